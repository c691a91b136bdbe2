//! Structured polar triangulations of the annulus `eps <= r <= 1` and
//! piecewise-linear field transfer between them.
//!
//! Nodes are laid out ring-major: node `ring * n_theta + k` sits at radius
//! `radii[ring]` and angle `2 pi k / n_theta`, ring 0 on the inner boundary
//! and ring `n_r` on the outer one. Each polar quad is split into two
//! counter-clockwise triangles along alternating diagonals. Radial layer
//! widths grow geometrically away from the hole, so the finest layer sits
//! where cavitating fields vary fastest.
//!
//! The mesh is a polygon inscribed in the annulus: every discrete functional
//! in this crate uses polygon areas, not `pi`, as its reference.

use crate::fem::DeformationField;
use crate::material::Vec2;
use crate::{Error, Result};

/// Boundary edge `a -> b`, ordered counter-clockwise around the origin,
/// together with the unique triangle it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tri: usize,
}

/// Mesh construction parameters shared by a continuation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshParams {
    pub n_r: usize,
    pub n_theta: usize,
    pub grading: f64,
}

impl MeshParams {
    pub fn build(&self, eps: f64) -> Result<Mesh> {
        Mesh::build_annulus(eps, self.n_r, self.n_theta, self.grading)
    }
}

/// Immutable triangulation of the annulus; safe to share across threads.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Vec2>,
    /// Node index triples, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Node indices on radius 1 (ring `n_r`).
    pub outer_boundary: Vec<usize>,
    /// Node indices on radius `eps` (ring 0).
    pub inner_boundary: Vec<usize>,
    pub inner_edges: Vec<BoundaryEdge>,
    pub outer_edges: Vec<BoundaryEdge>,
    pub eps: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub grading: f64,
    radii: Vec<f64>,
}

impl Mesh {
    /// Triangulate the annulus with `n_r` radial layers and `n_theta` angular
    /// sectors. Layer widths form a geometric sequence with the given ratio,
    /// finest adjacent to the inner boundary.
    pub fn build_annulus(eps: f64, n_r: usize, n_theta: usize, grading: f64) -> Result<Mesh> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::param("eps", format!("must lie in (0,1), got {eps}")));
        }
        if n_r < 1 {
            return Err(Error::param("n_r", "must be >= 1".to_string()));
        }
        if n_theta < 3 {
            return Err(Error::param(
                "n_theta",
                format!("must be >= 3, got {n_theta}"),
            ));
        }
        if !(grading >= 1.0) {
            return Err(Error::param(
                "grading",
                format!("must be >= 1, got {grading}"),
            ));
        }

        let mut radii = Vec::with_capacity(n_r + 1);
        radii.push(eps);
        if grading > 1.0 {
            let w0 = (1.0 - eps) * (grading - 1.0) / (grading.powi(n_r as i32) - 1.0);
            let mut w = w0;
            let mut r = eps;
            for _ in 0..n_r {
                r += w;
                radii.push(r);
                w *= grading;
            }
        } else {
            for i in 1..=n_r {
                radii.push(eps + (1.0 - eps) * i as f64 / n_r as f64);
            }
        }
        // keep the outer ring on the unit circle exactly
        radii[n_r] = 1.0;

        let mut nodes = Vec::with_capacity((n_r + 1) * n_theta);
        let dtheta = 2.0 * std::f64::consts::PI / n_theta as f64;
        for &r in &radii {
            for k in 0..n_theta {
                let th = k as f64 * dtheta;
                nodes.push([r * th.cos(), r * th.sin()]);
            }
        }

        // quad corners: a, b on the inner ring (angles k, k+1), d, c above
        // them; counter-clockwise traversal of the quad is a, d, c, b
        let node = |ring: usize, k: usize| ring * n_theta + (k % n_theta);
        let mut triangles = Vec::with_capacity(2 * n_r * n_theta);
        for i in 0..n_r {
            for k in 0..n_theta {
                let a = node(i, k);
                let b = node(i, k + 1);
                let c = node(i + 1, k + 1);
                let d = node(i + 1, k);
                if (i + k).is_multiple_of(2) {
                    triangles.push([a, c, b]);
                    triangles.push([a, d, c]);
                } else {
                    triangles.push([a, d, b]);
                    triangles.push([d, c, b]);
                }
            }
        }

        // the quad split always leaves the inner arc edge in the first
        // triangle of the quad and the outer arc edge in the second
        let inner_edges = (0..n_theta)
            .map(|k| BoundaryEdge {
                a: node(0, k),
                b: node(0, k + 1),
                tri: 2 * k,
            })
            .collect();
        let outer_edges = (0..n_theta)
            .map(|k| BoundaryEdge {
                a: node(n_r, k),
                b: node(n_r, k + 1),
                tri: 2 * ((n_r - 1) * n_theta + k) + 1,
            })
            .collect();

        Ok(Mesh {
            nodes,
            triangles,
            outer_boundary: (0..n_theta).map(|k| node(n_r, k)).collect(),
            inner_boundary: (0..n_theta).map(|k| node(0, k)).collect(),
            inner_edges,
            outer_edges,
            eps,
            n_r,
            n_theta,
            grading,
            radii,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// A node is pinned by the displacement boundary condition iff it lies on
    /// the outer ring.
    #[inline]
    pub fn is_outer_node(&self, node: usize) -> bool {
        node >= self.n_r * self.n_theta
    }

    #[inline]
    pub fn is_inner_node(&self, node: usize) -> bool {
        node < self.n_theta
    }

    pub fn signed_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.triangles[tri];
        let p = &self.nodes;
        0.5 * ((p[b][0] - p[a][0]) * (p[c][1] - p[a][1])
            - (p[c][0] - p[a][0]) * (p[b][1] - p[a][1]))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangle_count())
            .map(|t| self.signed_area(t))
            .sum()
    }

    /// Area of the regular `n_theta`-gon inscribed in the unit circle:
    /// `(n_theta / 2) sin(2 pi / n_theta)`.
    pub fn polygon_disk_area(n_theta: usize) -> f64 {
        let n = n_theta as f64;
        0.5 * n * (2.0 * std::f64::consts::PI / n).sin()
    }

    /// Area of the polygonal annulus: `polygon_disk_area * (1 - eps^2)`.
    pub fn polygon_annulus_area(&self) -> f64 {
        Self::polygon_disk_area(self.n_theta) * (1.0 - self.eps * self.eps)
    }

    /// Evaluate the piecewise-linear field `u_old` (given on `self`) at the
    /// nodes of `mesh_new`. New nodes inside the old hole take the value at
    /// the radially clamped point (radius `self.eps`, same angle); new nodes
    /// outside the old polygon in any other direction are an error.
    pub fn interpolate(
        &self,
        u_old: &DeformationField,
        mesh_new: &Mesh,
    ) -> Result<DeformationField> {
        assert_eq!(u_old.values.len(), self.node_count(), "field/mesh mismatch");
        let mut values = Vec::with_capacity(mesh_new.node_count());
        for p in &mesh_new.nodes {
            values.push(self.eval_clamped(u_old, *p)?);
        }
        Ok(DeformationField { values })
    }

    /// Point evaluation used by [`Mesh::interpolate`].
    ///
    /// The mesh rings are chords of circles, so a point is located by its
    /// chord-normalized radius `r cos(phi) / cos(dtheta/2)` (`phi` the angular
    /// offset from the sector midline), which is exact for the straight-sided
    /// quads. Points below the inner chord take the value at the radially
    /// clamped chord point; points in the sliver between the outer chord and
    /// the unit circle are evaluated by a radial homothety onto the chord
    /// (exact for affine fields); points beyond the unit circle are outside
    /// the domain.
    pub fn eval_clamped(&self, u: &DeformationField, p: Vec2) -> Result<Vec2> {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if r > 1.0 + 1e-9 {
            return Err(Error::OutsideDomain { x: p[0], y: p[1] });
        }
        let theta = {
            let t = p[1].atan2(p[0]);
            if t < 0.0 {
                t + 2.0 * std::f64::consts::PI
            } else {
                t
            }
        };
        let dtheta = 2.0 * std::f64::consts::PI / self.n_theta as f64;
        let k = ((theta / dtheta) as usize).min(self.n_theta - 1);
        let phi = theta - (k as f64 + 0.5) * dtheta;
        let chord_scale = phi.cos() / (0.5 * dtheta).cos();
        let r_eff = r * chord_scale;
        let rc = r_eff.clamp(self.eps, 1.0);
        // radial interval such that radii[i] <= rc <= radii[i+1]
        let i = match self.radii.partition_point(|&x| x < rc) {
            0 => 0,
            j => (j - 1).min(self.n_r - 1),
        };

        // clamped points land exactly on the corresponding chord; the outer
        // sliver is rescaled back after evaluation
        let (q, post_scale) = if r_eff > 1.0 + 1e-12 {
            ([p[0] / r_eff, p[1] / r_eff], r_eff)
        } else if r_eff < rc {
            let scale = rc / chord_scale / r.max(1e-300);
            ([p[0] * scale, p[1] * scale], 1.0)
        } else {
            (p, 1.0)
        };
        let corners = [
            i * self.n_theta + k,
            i * self.n_theta + (k + 1) % self.n_theta,
            (i + 1) * self.n_theta + (k + 1) % self.n_theta,
            (i + 1) * self.n_theta + k,
        ];
        // exact vertex hit: return the nodal value unmodified
        for &n in &corners {
            let d = (self.nodes[n][0] - q[0]).abs() + (self.nodes[n][1] - q[1]).abs();
            if d <= 1e-13 {
                let v = u.values[n];
                return Ok([post_scale * v[0], post_scale * v[1]]);
            }
        }

        let tris = if (i + k).is_multiple_of(2) {
            [
                [corners[0], corners[1], corners[2]],
                [corners[0], corners[2], corners[3]],
            ]
        } else {
            [
                [corners[0], corners[1], corners[3]],
                [corners[1], corners[2], corners[3]],
            ]
        };
        let mut best: Option<([f64; 3], [usize; 3])> = None;
        for t in tris {
            let bary = barycentric(&self.nodes[t[0]], &self.nodes[t[1]], &self.nodes[t[2]], &q);
            let worst = bary[0].min(bary[1]).min(bary[2]);
            match &best {
                Some((bb, _)) if bb[0].min(bb[1]).min(bb[2]) >= worst => {}
                _ => best = Some((bary, t)),
            }
        }
        let (bary, t) = best.unwrap();
        if bary[0].min(bary[1]).min(bary[2]) < -1e-6 {
            return Err(Error::OutsideDomain { x: p[0], y: p[1] });
        }
        let mut out = [0.0; 2];
        for j in 0..3 {
            out[0] += bary[j] * u.values[t[j]][0];
            out[1] += bary[j] * u.values[t[j]][1];
        }
        Ok([post_scale * out[0], post_scale * out[1]])
    }

    /// `node_id,x,y,boundary_tag` rows for the whole mesh.
    pub fn nodes_csv(&self) -> String {
        let mut s = String::from("node_id,x,y,boundary_tag\n");
        for (i, p) in self.nodes.iter().enumerate() {
            let tag = if self.is_inner_node(i) {
                "inner"
            } else if self.is_outer_node(i) {
                "outer"
            } else {
                "interior"
            };
            s.push_str(&format!("{i},{:.17e},{:.17e},{tag}\n", p[0], p[1]));
        }
        s
    }

    /// `tri_id,n0,n1,n2` rows for the whole mesh.
    pub fn triangles_csv(&self) -> String {
        let mut s = String::from("tri_id,n0,n1,n2\n");
        for (t, tri) in self.triangles.iter().enumerate() {
            s.push_str(&format!("{t},{},{},{}\n", tri[0], tri[1], tri[2]));
        }
        s
    }
}

fn barycentric(a: &Vec2, b: &Vec2, c: &Vec2, p: &Vec2) -> [f64; 3] {
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::BoundaryData;
    use proptest::prelude::*;

    #[test]
    fn tiny_mesh_counts() {
        let m = Mesh::build_annulus(0.1, 1, 4, 1.0).unwrap();
        assert_eq!(m.node_count(), 8);
        assert_eq!(m.triangle_count(), 8);
    }

    #[test]
    fn counts_formula() {
        let m = Mesh::build_annulus(0.3, 5, 12, 1.2).unwrap();
        assert_eq!(m.node_count(), (5 + 1) * 12);
        assert_eq!(m.triangle_count(), 2 * 5 * 12);
    }

    #[test]
    fn area_identity_uniform_and_graded() {
        for grading in [1.0, 1.1, 1.5] {
            let m = Mesh::build_annulus(0.1, 32, 256, grading).unwrap();
            let expect = 128.0 * (2.0 * std::f64::consts::PI / 256.0).sin() * 0.99;
            let area = m.total_area();
            assert!(
                (area - expect).abs() <= 1e-12 * expect,
                "grading {grading}: {area} vs {expect}"
            );
        }
    }

    #[test]
    fn all_triangles_positive() {
        let m = Mesh::build_annulus(0.05, 16, 48, 1.3).unwrap();
        let min = (0..m.triangle_count())
            .map(|t| m.signed_area(t))
            .fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
    }

    #[test]
    fn domain_validation() {
        assert!(Mesh::build_annulus(1.2, 4, 16, 1.0).is_err());
        assert!(Mesh::build_annulus(0.0, 4, 16, 1.0).is_err());
        assert!(Mesh::build_annulus(0.1, 4, 2, 1.0).is_err());
        assert!(Mesh::build_annulus(0.1, 0, 16, 1.0).is_err());
        assert!(Mesh::build_annulus(0.1, 4, 16, 0.9).is_err());
    }

    #[test]
    fn boundary_tags_complete_and_disjoint() {
        let m = Mesh::build_annulus(0.2, 6, 20, 1.1).unwrap();
        assert_eq!(m.inner_boundary.len(), 20);
        assert_eq!(m.outer_boundary.len(), 20);
        for (i, p) in m.nodes.iter().enumerate() {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if (r - m.eps).abs() <= 1e-12 {
                assert!(m.inner_boundary.contains(&i));
                assert!(m.is_inner_node(i));
            }
            if (r - 1.0).abs() <= 1e-12 {
                assert!(m.outer_boundary.contains(&i));
                assert!(m.is_outer_node(i));
            }
            assert!(!(m.is_inner_node(i) && m.is_outer_node(i)));
        }
    }

    #[test]
    fn boundary_edges_lie_on_exactly_one_triangle() {
        let m = Mesh::build_annulus(0.15, 3, 10, 1.0).unwrap();
        let contains = |tri: &[usize; 3], a: usize, b: usize| tri.contains(&a) && tri.contains(&b);
        for e in m.inner_edges.iter().chain(m.outer_edges.iter()) {
            let count = m.triangles.iter().filter(|t| contains(t, e.a, e.b)).count();
            assert_eq!(count, 1);
            assert!(contains(&m.triangles[e.tri], e.a, e.b));
        }
    }

    #[test]
    fn graded_layers_finest_inside() {
        let m = Mesh::build_annulus(0.1, 8, 16, 1.4).unwrap();
        let widths: Vec<f64> = m.radii.windows(2).map(|w| w[1] - w[0]).collect();
        for i in 1..widths.len() {
            assert!(widths[i] > widths[i - 1]);
        }
        assert!((m.radii[0] - 0.1).abs() < 1e-15);
        assert_eq!(m.radii[8], 1.0);
    }

    #[test]
    fn interpolate_reproduces_affine() {
        let coarse = Mesh::build_annulus(0.1, 4, 16, 1.1).unwrap();
        let bd = BoundaryData::new(1.1, 1.4).unwrap();
        let u = DeformationField::affine(&coarse, &bd);
        // finer mesh, same hole: reproduced everywhere
        let fine = Mesh::build_annulus(0.1, 9, 48, 1.2).unwrap();
        let v = coarse.interpolate(&u, &fine).unwrap();
        for (p, val) in fine.nodes.iter().zip(&v.values) {
            let expect = [1.1 * p[0], 1.4 * p[1]];
            assert!((val[0] - expect[0]).abs() <= 1e-12);
            assert!((val[1] - expect[1]).abs() <= 1e-12);
        }
        // shrunk hole: reproduced outside the old hole, clamped inside it
        let shrunk = Mesh::build_annulus(0.05, 9, 48, 1.2).unwrap();
        let v = coarse.interpolate(&u, &shrunk).unwrap();
        for (p, val) in shrunk.nodes.iter().zip(&v.values) {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            if r >= 0.1 {
                let expect = [1.1 * p[0], 1.4 * p[1]];
                assert!((val[0] - expect[0]).abs() <= 1e-12);
                assert!((val[1] - expect[1]).abs() <= 1e-12);
            } else {
                // clamped values sit on the old inner chord polygon
                let vr = (val[0] / 1.1).hypot(val[1] / 1.4);
                let sag = 0.1 * (1.0 - (std::f64::consts::PI / 16.0).cos());
                assert!((vr - 0.1).abs() <= sag + 1e-12, "clamped radius {vr}");
            }
        }
    }

    #[test]
    fn interpolate_identity_is_exact() {
        let m = Mesh::build_annulus(0.1, 3, 12, 1.1).unwrap();
        let mut u = DeformationField::affine(&m, &BoundaryData::new(1.0, 1.0).unwrap());
        for (i, v) in u.values.iter_mut().enumerate() {
            v[0] += (i as f64 * 0.37).sin() * 0.01;
            v[1] += (i as f64 * 0.71).cos() * 0.01;
        }
        let v = m.interpolate(&u, &m).unwrap();
        assert_eq!(u.values, v.values);
    }

    #[test]
    fn interpolate_clamps_through_hole() {
        let old = Mesh::build_annulus(0.1, 4, 16, 1.0).unwrap();
        let new = Mesh::build_annulus(0.05, 4, 16, 1.0).unwrap();
        let mut u = DeformationField::affine(&old, &BoundaryData::new(1.0, 1.0).unwrap());
        // non-affine so clamping is observable: scale by radius
        for (p, v) in old.nodes.iter().zip(u.values.iter_mut()) {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            v[0] = p[0] * (1.0 + r);
            v[1] = p[1] * (1.0 + r);
        }
        let got = old.eval_clamped(&u, [0.05, 0.0]).unwrap();
        // clamped to the old inner radius 0.1 at angle 0
        assert!((got[0] - 0.1 * 1.1).abs() < 1e-12);
        assert!(got[1].abs() < 1e-12);
        let v = old.interpolate(&u, &new).unwrap();
        let k = 0; // new inner node at angle 0, radius 0.05
        assert!((v.values[k][0] - 0.1 * 1.1).abs() < 1e-12);
    }

    #[test]
    fn interpolate_rejects_points_outside_the_disk() {
        let old = Mesh::build_annulus(0.1, 2, 4, 1.0).unwrap();
        let u = DeformationField::affine(&old, &BoundaryData::new(1.0, 1.0).unwrap());
        assert!(matches!(
            old.eval_clamped(&u, [1.5, 0.0]),
            Err(Error::OutsideDomain { .. })
        ));
        assert!(old.eval_clamped(&u, [0.0, -1.1]).is_err());
        // the sliver between the coarse outer chord and the unit circle is
        // covered by the radial extension
        let p = [0.99 * (0.25f64 * std::f64::consts::PI).cos(); 2];
        let v = old.eval_clamped(&u, p).unwrap();
        assert!((v[0] - p[0]).abs() <= 1e-12 && (v[1] - p[1]).abs() <= 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn positivity_and_area_for_random_parameters(
            eps in 0.01f64..0.9,
            n_r in 1usize..12,
            n_theta in 3usize..40,
            grading in 1.0f64..2.0,
        ) {
            let m = Mesh::build_annulus(eps, n_r, n_theta, grading).unwrap();
            let min = (0..m.triangle_count()).map(|t| m.signed_area(t)).fold(f64::INFINITY, f64::min);
            prop_assert!(min > 0.0);
            let expect = m.polygon_annulus_area();
            prop_assert!((m.total_area() - expect).abs() <= 1e-12 * expect.abs());
        }
    }
}
