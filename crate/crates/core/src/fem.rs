//! Piecewise-linear finite elements on the annulus: the regularized energy,
//! the cavity-volume constraint, the penalized functional and its exact
//! discrete gradient, the vector-Laplacian stiffness with the outer boundary
//! eliminated, and a Jacobi-preconditioned conjugate-gradient solver.
//!
//! Gradients of P1 fields are constant per triangle, so one-point quadrature
//! integrates every functional here exactly. The volume constraint measures
//! the reference disk by its inscribed polygon (same `n_theta` as the mesh),
//! which keeps affine states exactly consistent with the discrete geometry.

use crate::material::{adj2, det2, mat_vec2, transpose2, Mat2, MaterialModel, Vec2};
use crate::mesh::Mesh;
use crate::parallel::map_chunks;
use crate::{Error, Result};

/// Diagonal displacement boundary data `A = diag(lambda1, lambda2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl BoundaryData {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1 > 0.0) || !(lambda2 > 0.0) {
            return Err(Error::param(
                "boundary",
                format!("stretches must be positive, got ({lambda1}, {lambda2})"),
            ));
        }
        Ok(BoundaryData { lambda1, lambda2 })
    }

    pub fn matrix(&self) -> Mat2 {
        [[self.lambda1, 0.0], [0.0, self.lambda2]]
    }

    pub fn det(&self) -> f64 {
        self.lambda1 * self.lambda2
    }

    /// `A x` for the displacement condition on the outer boundary.
    #[inline]
    pub fn apply(&self, x: &Vec2) -> Vec2 {
        [self.lambda1 * x[0], self.lambda2 * x[1]]
    }
}

/// The constrained minimization instance: material, boundary stretches and
/// prescribed cavity volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub material: MaterialModel,
    pub boundary: BoundaryData,
    pub cavity_volume: f64,
}

impl Problem {
    pub fn new(
        material: MaterialModel,
        boundary: BoundaryData,
        cavity_volume: f64,
    ) -> Result<Self> {
        if !(cavity_volume >= 0.0) {
            return Err(Error::param(
                "cavity_volume",
                format!("must be >= 0, got {cavity_volume}"),
            ));
        }
        Ok(Problem {
            material,
            boundary,
            cavity_volume,
        })
    }
}

/// Nodal deformation `y = u(x)`, two components per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    pub values: Vec<Vec2>,
}

impl DeformationField {
    /// The affine state `u = A x`, exact at every node.
    pub fn affine(mesh: &Mesh, boundary: &BoundaryData) -> Self {
        DeformationField {
            values: mesh.nodes.iter().map(|p| boundary.apply(p)).collect(),
        }
    }

    /// Re-impose `u = A x` exactly on the outer ring.
    pub fn pin_outer(&mut self, mesh: &Mesh, boundary: &BoundaryData) {
        for &i in &mesh.outer_boundary {
            self.values[i] = boundary.apply(&mesh.nodes[i]);
        }
    }

    /// Smallest deformation-gradient determinant over all triangles.
    pub fn min_det(&self, mesh: &Mesh) -> f64 {
        let mut min = f64::INFINITY;
        for t in 0..mesh.triangle_count() {
            let g = tri_geom(mesh, t);
            let f = grad_field(&self.values, &mesh.triangles[t], &g);
            min = min.min(det2(&f));
        }
        min
    }

    /// Max-norm distance to another field.
    pub fn max_diff(&self, other: &DeformationField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a[0] - b[0]).abs().max((a[1] - b[1]).abs()))
            .fold(0.0, f64::max)
    }
}

pub(crate) struct TriGeom {
    pub area: f64,
    pub grads: [Vec2; 3],
}

/// Area and P1 shape-function gradients of triangle `t`.
#[inline]
pub(crate) fn tri_geom(mesh: &Mesh, t: usize) -> TriGeom {
    let [a, b, c] = mesh.triangles[t];
    let pa = mesh.nodes[a];
    let pb = mesh.nodes[b];
    let pc = mesh.nodes[c];
    let d = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
    TriGeom {
        area: 0.5 * d,
        grads: [
            [(pb[1] - pc[1]) / d, (pc[0] - pb[0]) / d],
            [(pc[1] - pa[1]) / d, (pa[0] - pc[0]) / d],
            [(pa[1] - pb[1]) / d, (pb[0] - pa[0]) / d],
        ],
    }
}

/// Element-constant deformation gradient `F = sum_i u_i (grad lambda_i)^T`.
#[inline]
pub(crate) fn grad_field(values: &[Vec2], tri: &[usize; 3], g: &TriGeom) -> Mat2 {
    let mut f = [[0.0; 2]; 2];
    for (local, &node) in tri.iter().enumerate() {
        let u = values[node];
        let gl = g.grads[local];
        f[0][0] += u[0] * gl[0];
        f[0][1] += u[0] * gl[1];
        f[1][0] += u[1] * gl[0];
        f[1][1] += u[1] * gl[1];
    }
    f
}

/// One-sweep evaluation of the penalized state.
#[derive(Debug, Clone, Copy)]
pub struct StateEval {
    /// `E_eps(u)`, the stored energy over the annulus.
    pub energy: f64,
    /// `c_eps(u)`, the volume-constraint value.
    pub constraint: f64,
    /// `E_eps + mu c + eta c^2 / 2`.
    pub penalized: f64,
    pub min_det: f64,
}

/// Stored energy `E_eps(u) = sum_T area W(F_T)`; fails on the first triangle
/// with non-positive determinant.
pub fn energy_eps(mesh: &Mesh, u: &DeformationField, material: &MaterialModel) -> Result<f64> {
    let parts = map_chunks(mesh.triangle_count(), |range| -> Result<f64> {
        let mut acc = 0.0;
        for t in range {
            let g = tri_geom(mesh, t);
            let f = grad_field(&u.values, &mesh.triangles[t], &g);
            let d = det2(&f);
            if !(d > 0.0) {
                return Err(Error::NonPositiveDeterminant {
                    triangle: t,
                    det: d,
                });
            }
            acc += g.area * material.energy_density(&f)?;
        }
        Ok(acc)
    });
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total)
}

/// Volume constraint
/// `c_eps(u) = int det(grad u) - det(A) |disk polygon| + V`; defined for any
/// field, degenerate or not.
pub fn constraint_eps(
    mesh: &Mesh,
    u: &DeformationField,
    boundary: &BoundaryData,
    cavity_volume: f64,
) -> f64 {
    let parts = map_chunks(mesh.triangle_count(), |range| {
        let mut acc = 0.0;
        for t in range {
            let g = tri_geom(mesh, t);
            let f = grad_field(&u.values, &mesh.triangles[t], &g);
            acc += g.area * det2(&f);
        }
        acc
    });
    let det_integral: f64 = parts.into_iter().sum();
    det_integral - boundary.det() * Mesh::polygon_disk_area(mesh.n_theta) + cavity_volume
}

/// Energy, constraint and penalized value in a single element sweep.
pub fn eval_state(
    mesh: &Mesh,
    u: &DeformationField,
    problem: &Problem,
    mu: f64,
    eta: f64,
) -> Result<StateEval> {
    type Acc = (f64, f64, f64);
    let parts = map_chunks(mesh.triangle_count(), |range| -> Result<Acc> {
        let mut energy = 0.0;
        let mut det_integral = 0.0;
        let mut min_det = f64::INFINITY;
        for t in range {
            let g = tri_geom(mesh, t);
            let f = grad_field(&u.values, &mesh.triangles[t], &g);
            let d = det2(&f);
            if !(d > 0.0) {
                return Err(Error::NonPositiveDeterminant {
                    triangle: t,
                    det: d,
                });
            }
            min_det = min_det.min(d);
            det_integral += g.area * d;
            energy += g.area * problem.material.energy_density(&f)?;
        }
        Ok((energy, det_integral, min_det))
    });
    let mut energy = 0.0;
    let mut det_integral = 0.0;
    let mut min_det = f64::INFINITY;
    for p in parts {
        let (e, di, md) = p?;
        energy += e;
        det_integral += di;
        min_det = min_det.min(md);
    }
    let constraint = det_integral - problem.boundary.det() * Mesh::polygon_disk_area(mesh.n_theta)
        + problem.cavity_volume;
    Ok(StateEval {
        energy,
        constraint,
        penalized: energy + mu * constraint + 0.5 * eta * constraint * constraint,
        min_det,
    })
}

/// `E_eps + mu c_eps + eta c_eps^2 / 2`.
pub fn penalty_energy(
    mesh: &Mesh,
    u: &DeformationField,
    problem: &Problem,
    mu: f64,
    eta: f64,
) -> Result<f64> {
    Ok(eval_state(mesh, u, problem, mu, eta)?.penalized)
}

/// Gradient of [`penalty_energy`] with respect to the free nodal values:
/// `G_i = sum_T area [piola(F) + (mu + eta c) (adj F)^T] grad(lambda_i)`.
/// Rows of outer-boundary nodes are zero.
pub fn assemble_residual(
    mesh: &Mesh,
    u: &DeformationField,
    problem: &Problem,
    mu: f64,
    eta: f64,
) -> Result<Vec<Vec2>> {
    let c = {
        // positivity is checked in the stress sweep below
        constraint_eps(mesh, u, &problem.boundary, problem.cavity_volume)
    };
    let factor = mu + eta * c;
    let n = mesh.node_count();
    let parts = map_chunks(mesh.triangle_count(), |range| -> Result<Vec<Vec2>> {
        let mut local = vec![[0.0; 2]; n];
        for t in range {
            let g = tri_geom(mesh, t);
            let tri = &mesh.triangles[t];
            let f = grad_field(&u.values, tri, &g);
            let d = det2(&f);
            if !(d > 0.0) {
                return Err(Error::NonPositiveDeterminant {
                    triangle: t,
                    det: d,
                });
            }
            let p = problem.material.piola(&f)?;
            let adj_t = transpose2(&adj2(&f));
            let s = [
                [
                    p[0][0] + factor * adj_t[0][0],
                    p[0][1] + factor * adj_t[0][1],
                ],
                [
                    p[1][0] + factor * adj_t[1][0],
                    p[1][1] + factor * adj_t[1][1],
                ],
            ];
            for (local_i, &node) in tri.iter().enumerate() {
                if mesh.is_outer_node(node) {
                    continue;
                }
                let sg = mat_vec2(&s, &g.grads[local_i]);
                local[node][0] += g.area * sg[0];
                local[node][1] += g.area * sg[1];
            }
        }
        Ok(local)
    });
    let mut out = vec![[0.0; 2]; n];
    for p in parts {
        let local = p?;
        for (o, l) in out.iter_mut().zip(&local) {
            o[0] += l[0];
            o[1] += l[1];
        }
    }
    Ok(out)
}

/// Symmetric positive-definite scalar operator in compressed sparse rows,
/// applied identically to both field components. Outer-boundary rows and
/// columns are eliminated (replaced by identity rows).
#[derive(Debug, Clone)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    dirichlet: Vec<bool>,
}

impl SparseOperator {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_dirichlet(&self, node: usize) -> bool {
        self.dirichlet[node]
    }

    /// Build directly from rows; used for tests and benches.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>, dirichlet: Vec<bool>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseOperator {
            n,
            row_ptr,
            cols,
            vals,
            dirichlet,
        }
    }

    /// `y = K x`, componentwise over 2-vectors.
    pub fn apply(&self, x: &[Vec2], y: &mut [Vec2]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc0 = 0.0;
            let mut acc1 = 0.0;
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.cols[idx];
                let v = self.vals[idx];
                acc0 += v * x[c][0];
                acc1 += v * x[c][1];
            }
            y[i] = [acc0, acc1];
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.cols[idx] == i {
                    d[i] = self.vals[idx];
                }
            }
        }
        d
    }

    /// Largest `|K_ij - K_ji|` over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        let get = |i: usize, j: usize| -> f64 {
            let lo = self.row_ptr[i];
            let hi = self.row_ptr[i + 1];
            match self.cols[lo..hi].binary_search(&j) {
                Ok(k) => self.vals[lo + k],
                Err(_) => 0.0,
            }
        };
        let mut defect = 0.0f64;
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[idx];
                defect = defect.max((self.vals[idx] - get(j, i)).abs());
            }
        }
        defect
    }
}

/// P1 stiffness of the vector Laplacian on the mesh. Outer-boundary rows and
/// columns are identity (the flow increment vanishes there); the inner
/// boundary is free, which is exactly the natural condition of the weak form.
pub fn assemble_stiffness(mesh: &Mesh) -> SparseOperator {
    let n = mesh.node_count();
    let dirichlet: Vec<bool> = (0..n).map(|i| mesh.is_outer_node(i)).collect();

    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in adjacency.iter_mut().enumerate() {
        row.push(i);
    }
    for tri in &mesh.triangles {
        for &i in tri {
            if dirichlet[i] {
                continue;
            }
            for &j in tri {
                if i != j && !dirichlet[j] {
                    adjacency[i].push(j);
                }
            }
        }
    }
    for row in adjacency.iter_mut() {
        row.sort_unstable();
        row.dedup();
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut cols = Vec::new();
    for row in &adjacency {
        cols.extend_from_slice(row);
        row_ptr.push(cols.len());
    }
    let mut vals = vec![0.0; cols.len()];

    let mut add = |i: usize, j: usize, v: f64| {
        let lo = row_ptr[i];
        let hi = row_ptr[i + 1];
        let k = cols[lo..hi].binary_search(&j).expect("entry in pattern");
        vals[lo + k] += v;
    };

    for t in 0..mesh.triangle_count() {
        let g = tri_geom(mesh, t);
        let tri = &mesh.triangles[t];
        for a in 0..3 {
            let i = tri[a];
            if dirichlet[i] {
                continue;
            }
            for b in 0..3 {
                let j = tri[b];
                if dirichlet[j] {
                    continue;
                }
                let v = g.area * (g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1]);
                add(i, j, v);
            }
        }
    }
    for i in 0..n {
        if dirichlet[i] {
            add(i, i, 1.0);
        }
    }

    SparseOperator {
        n,
        row_ptr,
        cols,
        vals,
        dirichlet,
    }
}

fn dot(a: &[Vec2], b: &[Vec2]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x[0] * y[0] + x[1] * y[1])
        .sum()
}

/// Solve `K x = rhs` by conjugate gradients with Jacobi preconditioning,
/// stopping at relative residual `tol`. `x0` warm-starts the iteration.
pub fn solve_spd(
    k: &SparseOperator,
    rhs: &[Vec2],
    x0: Option<&[Vec2]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Vec2>, usize)> {
    let n = k.n();
    assert_eq!(rhs.len(), n);
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        return Ok((vec![[0.0; 2]; n], 0));
    }
    let inv_diag: Vec<f64> = k.diagonal().iter().map(|&d| 1.0 / d).collect();

    let mut x = match x0 {
        Some(x0) => {
            assert_eq!(x0.len(), n);
            x0.to_vec()
        }
        None => vec![[0.0; 2]; n],
    };
    let mut r = vec![[0.0; 2]; n];
    k.apply(&x, &mut r);
    for i in 0..n {
        r[i] = [rhs[i][0] - r[i][0], rhs[i][1] - r[i][1]];
    }
    let precond = |r: &[Vec2], z: &mut Vec<Vec2>| {
        for i in 0..r.len() {
            z[i] = [r[i][0] * inv_diag[i], r[i][1] * inv_diag[i]];
        }
    };
    let mut z = vec![[0.0; 2]; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![[0.0; 2]; n];

    for iter in 0..max_iter {
        let r_norm = dot(&r, &r).sqrt();
        if r_norm <= tol * b_norm {
            return Ok((x, iter));
        }
        k.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            return Err(Error::SolveFailed {
                iterations: iter,
                residual: r_norm / b_norm,
            });
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i][0] += alpha * p[i][0];
            x[i][1] += alpha * p[i][1];
            r[i][0] -= alpha * q[i][0];
            r[i][1] -= alpha * q[i][1];
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i][0] = z[i][0] + beta * p[i][0];
            p[i][1] = z[i][1] + beta * p[i][1];
        }
    }
    let r_norm = dot(&r, &r).sqrt();
    if r_norm <= tol * b_norm {
        Ok((x, max_iter))
    } else {
        Err(Error::SolveFailed {
            iterations: max_iter,
            residual: r_norm / b_norm,
        })
    }
}
