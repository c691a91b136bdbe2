//! Closed-form reference solutions and diagnostic functionals for the
//! elastic-fluid benchmark: the exact constrained minimizer and its energy
//! and multiplier, the cavity-volume boundary functional, the boundary-data
//! sensitivity, the feasible shell initializer, and the traction residual on
//! the inner boundary.

use crate::fem::{grad_field, tri_geom, BoundaryData, DeformationField, Problem};
use crate::material::{adj2, mat_vec2, transpose2, MaterialModel, Vec2};
use crate::mesh::Mesh;
use crate::{Error, Result};

use std::f64::consts::PI;

/// Exact constrained minimizer for an elastic fluid on the unit disk:
/// `u(x) = sqrt(d R^2 + 1 - d) A x / R` with `d = 1 - V / (pi det A)`.
/// Its determinant is `d det A` everywhere and the deformed hole has
/// volume exactly `V`.
#[derive(Debug, Clone, Copy)]
pub struct FluidExactSolution {
    pub boundary: BoundaryData,
    pub cavity_volume: f64,
    d: f64,
}

impl FluidExactSolution {
    pub fn new(boundary: BoundaryData, cavity_volume: f64) -> Result<Self> {
        let d = 1.0 - cavity_volume / (PI * boundary.det());
        if !(d > 0.0) {
            return Err(Error::param(
                "cavity_volume",
                format!("too large: d = {d} must be positive"),
            ));
        }
        Ok(FluidExactSolution {
            boundary,
            cavity_volume,
            d,
        })
    }

    /// The constant volume-ratio parameter `d`.
    pub fn d(&self) -> f64 {
        self.d
    }

    /// Deformed position of `x != 0`.
    pub fn eval(&self, x: &Vec2) -> Result<Vec2> {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 == 0.0 {
            return Err(Error::param(
                "x",
                "the exact solution is singular at 0".to_string(),
            ));
        }
        let scale = (self.d * r2 + (1.0 - self.d)).sqrt() / r2.sqrt();
        Ok([
            scale * self.boundary.lambda1 * x[0],
            scale * self.boundary.lambda2 * x[1],
        ])
    }

    /// Nodal interpolant on a mesh, with the outer ring pinned to `A x`.
    pub fn sample(&self, mesh: &Mesh) -> Result<DeformationField> {
        let mut values = Vec::with_capacity(mesh.node_count());
        for p in &mesh.nodes {
            values.push(self.eval(p)?);
        }
        let mut u = DeformationField { values };
        u.pin_outer(mesh, &self.boundary);
        Ok(u)
    }

    /// Exact energy `pi h(d det A)`; only meaningful for an elastic fluid.
    pub fn energy(&self, material: &MaterialModel) -> Result<f64> {
        self.require_fluid(material)?;
        Ok(PI * material.h_eval(self.d * self.boundary.det())?)
    }

    /// Exact constraint multiplier `-h'(d det A)`: the deformed cavity
    /// surface is traction free exactly when the multiplier offsets the
    /// hydrostatic stress there.
    pub fn multiplier(&self, material: &MaterialModel) -> Result<f64> {
        self.require_fluid(material)?;
        Ok(-material.h_prime(self.d * self.boundary.det())?)
    }

    fn require_fluid(&self, material: &MaterialModel) -> Result<()> {
        if !material.is_fluid() {
            return Err(Error::param(
                "material",
                "closed-form solution requires kappa = 0".to_string(),
            ));
        }
        Ok(())
    }
}

/// Volume enclosed by the deformed inner boundary:
/// `(1/2) contour_integral (adj(grad u) u) . n ds` over the inner edge loop,
/// with the outward (hole-facing) normal, element-constant gradients and
/// midpoint values. For constrained minimizers this tends to the prescribed
/// cavity volume as the regularization radius shrinks.
pub fn cavity_volume(mesh: &Mesh, u: &DeformationField) -> f64 {
    let mut acc = 0.0;
    for e in &mesh.inner_edges {
        let g = tri_geom(mesh, e.tri);
        let f = grad_field(&u.values, &mesh.triangles[e.tri], &g);
        let adj = adj2(&f);
        let ua = u.values[e.a];
        let ub = u.values[e.b];
        let mid = [0.5 * (ua[0] + ub[0]), 0.5 * (ua[1] + ub[1])];
        let pa = mesh.nodes[e.a];
        let pb = mesh.nodes[e.b];
        // edges run counter-clockwise around the origin, so (dy, -dx) points
        // out of the hole
        let n_ds = [pb[1] - pa[1], -(pb[0] - pa[0])];
        let adj_u = mat_vec2(&adj, &mid);
        acc += adj_u[0] * n_ds[0] + adj_u[1] * n_ds[1];
    }
    0.5 * acc
}

/// Sensitivity of the constrained minimum energy to the boundary stretch
/// `lambda_{axis+1}`:
/// the outer-boundary traction integral of `piola + mu (adj F)^T` weighted by
/// `x_i e_i`, minus `mu det(A) |disk polygon| / lambda_i`.
pub fn sensitivity(
    mesh: &Mesh,
    u: &DeformationField,
    mu: f64,
    problem: &Problem,
    axis: usize,
) -> Result<f64> {
    assert!(axis < 2, "axis must be 0 or 1");
    let mut boundary_term = 0.0;
    for e in &mesh.outer_edges {
        let g = tri_geom(mesh, e.tri);
        let f = grad_field(&u.values, &mesh.triangles[e.tri], &g);
        let p = problem.material.piola(&f)?;
        let adj_t = transpose2(&adj2(&f));
        let s = [
            [p[0][0] + mu * adj_t[0][0], p[0][1] + mu * adj_t[0][1]],
            [p[1][0] + mu * adj_t[1][0], p[1][1] + mu * adj_t[1][1]],
        ];
        let pa = mesh.nodes[e.a];
        let pb = mesh.nodes[e.b];
        let n_ds = [pb[1] - pa[1], -(pb[0] - pa[0])];
        let traction = mat_vec2(&s, &n_ds);
        let x_mid = 0.5 * (pa[axis] + pb[axis]);
        boundary_term += x_mid * traction[axis];
    }
    let lambda = if axis == 0 {
        problem.boundary.lambda1
    } else {
        problem.boundary.lambda2
    };
    let volume_term = mu * problem.boundary.det() * Mesh::polygon_disk_area(mesh.n_theta) / lambda;
    Ok(boundary_term - volume_term)
}

/// Feasible initializer built from the incompressible cavity map: inside the
/// shell of radius `r_shell` the field is
/// `sqrt(d_eps R^2 + (1 - d_eps) r_shell^2) A x / R` with
/// `d_eps = (r_shell^2 - V / (pi det A)) / (r_shell^2 - eps^2)`,
/// outside it is `A x`. Its volume constraint vanishes by construction.
pub fn initializer_z_eps(
    mesh: &Mesh,
    boundary: &BoundaryData,
    cavity_volume: f64,
    r_shell: f64,
) -> Result<DeformationField> {
    let eps = mesh.eps;
    if !(r_shell < 1.0) {
        return Err(Error::param(
            "r_shell",
            format!("must be < 1, got {r_shell}"),
        ));
    }
    // degenerate shell: nothing left to rescale
    if r_shell <= eps * (1.0 + 1e-12) {
        return Ok(DeformationField::affine(mesh, boundary));
    }
    if !(cavity_volume < PI * r_shell * r_shell * boundary.det()) {
        return Err(Error::param(
            "cavity_volume",
            format!(
                "must be < pi r_shell^2 det A = {}",
                PI * r_shell * r_shell * boundary.det()
            ),
        ));
    }
    let s2 = r_shell * r_shell;
    let d_eps = (s2 - cavity_volume / (PI * boundary.det())) / (s2 - eps * eps);
    let floor = d_eps * eps * eps + (1.0 - d_eps) * s2;
    if !(floor > 0.0) {
        return Err(Error::param(
            "r_shell",
            format!("shell collapses at the inner radius (d_eps = {d_eps})"),
        ));
    }
    let mut u = DeformationField::affine(mesh, boundary);
    for (i, p) in mesh.nodes.iter().enumerate() {
        let r2 = p[0] * p[0] + p[1] * p[1];
        if r2 <= s2 {
            let scale = (d_eps * r2 + (1.0 - d_eps) * s2).sqrt() / r2.sqrt();
            u.values[i] = [
                scale * boundary.lambda1 * p[0],
                scale * boundary.lambda2 * p[1],
            ];
        }
    }
    Ok(u)
}

/// `d_eps` of the shell initializer, exposed for diagnostics.
pub fn z_eps_volume_ratio(
    eps: f64,
    boundary: &BoundaryData,
    cavity_volume: f64,
    r_shell: f64,
) -> f64 {
    let s2 = r_shell * r_shell;
    (s2 - cavity_volume / (PI * boundary.det())) / (s2 - eps * eps)
}

/// Natural-boundary-condition defect on the inner boundary: the largest
/// traction `|(piola(F) + mu (adj F)^T) n|` over inner edges. Vanishes (up to
/// discretization) at a converged constrained minimizer paired with its
/// multiplier.
pub fn inner_bc_residual(
    mesh: &Mesh,
    u: &DeformationField,
    mu: f64,
    material: &MaterialModel,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for e in &mesh.inner_edges {
        let g = tri_geom(mesh, e.tri);
        let f = grad_field(&u.values, &mesh.triangles[e.tri], &g);
        let p = material.piola(&f)?;
        let adj_t = transpose2(&adj2(&f));
        let pa = mesh.nodes[e.a];
        let pb = mesh.nodes[e.b];
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        let n = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
        let t = [
            (p[0][0] + mu * adj_t[0][0]) * n[0] + (p[0][1] + mu * adj_t[0][1]) * n[1],
            (p[1][0] + mu * adj_t[1][0]) * n[0] + (p[1][1] + mu * adj_t[1][1]) * n[1],
        ];
        worst = worst.max((t[0] * t[0] + t[1] * t[1]).sqrt());
    }
    Ok(worst)
}
