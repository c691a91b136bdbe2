//! Stored-energy law and 2x2 matrix algebra.
//!
//! The energy density is
//!
//! ```text
//! W(F) = (kappa / q) ||F||^q + h(det F),    h(d) = c1 d^e1 + c2 d^(-e2),
//! ```
//!
//! with `||.||` the Frobenius norm. Setting `kappa = 0` gives an elastic
//! fluid whose energy depends on `det F` alone. The reference configuration is
//! stress free exactly when `c2 = (kappa sqrt(n)^(q-2) + c1 e1) / e2`.

use crate::{Error, Result};

/// 2-vector of nodal or spatial coordinates.
pub type Vec2 = [f64; 2];
/// Row-major 2x2 matrix.
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY2: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

/// Determinant of a 2x2 matrix.
#[inline]
pub fn det2(f: &Mat2) -> f64 {
    f[0][0] * f[1][1] - f[0][1] * f[1][0]
}

/// Adjugate of a 2x2 matrix: `adj [[a,b],[c,d]] = [[d,-b],[-c,a]]`, so that
/// `F * adj2(F) = det2(F) * I`.
#[inline]
pub fn adj2(f: &Mat2) -> Mat2 {
    [[f[1][1], -f[0][1]], [-f[1][0], f[0][0]]]
}

#[inline]
pub fn transpose2(f: &Mat2) -> Mat2 {
    [[f[0][0], f[1][0]], [f[0][1], f[1][1]]]
}

#[inline]
pub fn mat_vec2(f: &Mat2, v: &Vec2) -> Vec2 {
    [
        f[0][0] * v[0] + f[0][1] * v[1],
        f[1][0] * v[0] + f[1][1] * v[1],
    ]
}

/// Frobenius norm.
#[inline]
pub fn frob2(f: &Mat2) -> f64 {
    (f[0][0] * f[0][0] + f[0][1] * f[0][1] + f[1][0] * f[1][0] + f[1][1] * f[1][1]).sqrt()
}

/// `x^e`, routed through `powi` for small integer exponents. The volumetric
/// exponents are almost always small integers and this path is much cheaper
/// than `powf` inside element sweeps.
#[inline]
fn powr(x: f64, e: f64) -> f64 {
    let r = e.round();
    if (e - r).abs() < 1e-12 && r.abs() <= 8.0 {
        x.powi(r as i32)
    } else {
        x.powf(e)
    }
}

/// Isotropic polyconvex material of the form `(kappa/q)||F||^q + h(det F)`.
///
/// `kappa` is the shear-like coefficient (zero for an elastic fluid); the
/// multiplier of the volume constraint is named `mu` elsewhere and never
/// collides with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialModel {
    pub kappa: f64,
    pub q: f64,
    pub c1: f64,
    pub c2: f64,
    pub e1: f64,
    pub e2: f64,
}

impl MaterialModel {
    /// Validate and build a material. Requires `kappa >= 0`, `c1, c2 >= 0`,
    /// `e1 >= 1` and `e2 > 0`, which makes `h` convex on `(0, inf)`.
    pub fn new(kappa: f64, q: f64, c1: f64, c2: f64, e1: f64, e2: f64) -> Result<Self> {
        if !(kappa >= 0.0) {
            return Err(Error::param("kappa", format!("must be >= 0, got {kappa}")));
        }
        if !q.is_finite() || q <= 0.0 {
            return Err(Error::param("q", format!("must be positive, got {q}")));
        }
        if !(c1 >= 0.0) {
            return Err(Error::param("c1", format!("must be >= 0, got {c1}")));
        }
        if !(c2 >= 0.0) {
            return Err(Error::param("c2", format!("must be >= 0, got {c2}")));
        }
        if !(e1 >= 1.0) {
            return Err(Error::param(
                "e1",
                format!("must be >= 1 for convexity of h, got {e1}"),
            ));
        }
        if !(e2 > 0.0) {
            return Err(Error::param("e2", format!("must be > 0, got {e2}")));
        }
        Ok(MaterialModel {
            kappa,
            q,
            c1,
            c2,
            e1,
            e2,
        })
    }

    /// Build a material whose `c2` is chosen by [`stress_free_c2`] so that the
    /// reference configuration carries no stress.
    pub fn stress_free(kappa: f64, q: f64, c1: f64, e1: f64, e2: f64) -> Result<Self> {
        let c2 = stress_free_c2(kappa, q, c1, e1, e2, 2)?;
        Self::new(kappa, q, c1, c2, e1, e2)
    }

    /// Elastic fluid: no Frobenius term.
    pub fn is_fluid(&self) -> bool {
        self.kappa == 0.0
    }

    /// For `kappa > 0` the growth analysis wants `q` in `[n-1, n)`; outside
    /// that window the model is still usable but worth flagging.
    pub fn q_range_warning(&self) -> Option<String> {
        if self.kappa > 0.0 && !(1.0..2.0).contains(&self.q) {
            Some(format!(
                "q = {} lies outside [1, 2); growth assumptions do not cover this exponent",
                self.q
            ))
        } else {
            None
        }
    }

    /// Volumetric energy `h(d) = c1 d^e1 + c2 d^(-e2)` for `d > 0`.
    pub fn h_eval(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::DeterminantCollapse { d });
        }
        Ok(self.c1 * powr(d, self.e1) + self.c2 * powr(d, -self.e2))
    }

    /// `h'(d) = c1 e1 d^(e1-1) - c2 e2 d^(-e2-1)`.
    pub fn h_prime(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::DeterminantCollapse { d });
        }
        Ok(
            self.c1 * self.e1 * powr(d, self.e1 - 1.0)
                - self.c2 * self.e2 * powr(d, -self.e2 - 1.0),
        )
    }

    /// Energy density `W(F)`; fails when `det F <= 0`.
    pub fn energy_density(&self, f: &Mat2) -> Result<f64> {
        let d = det2(f);
        let h = self.h_eval(d)?;
        if self.kappa == 0.0 {
            Ok(h)
        } else {
            Ok(self.kappa / self.q * powr(frob2(f), self.q) + h)
        }
    }

    /// Piola stress `dW/dF = kappa ||F||^(q-2) F + h'(det F) (adj F)^T`.
    pub fn piola(&self, f: &Mat2) -> Result<Mat2> {
        let d = det2(f);
        let hp = self.h_prime(d)?;
        let adj_t = transpose2(&adj2(f));
        let mut p = [[0.0; 2]; 2];
        let scale = if self.kappa == 0.0 {
            0.0
        } else {
            self.kappa * powr(frob2(f), self.q - 2.0)
        };
        for a in 0..2 {
            for b in 0..2 {
                p[a][b] = scale * f[a][b] + hp * adj_t[a][b];
            }
        }
        Ok(p)
    }
}

/// The `c2` that makes the reference configuration stress free:
/// `(kappa sqrt(n)^(q-2) + c1 e1) / e2`.
pub fn stress_free_c2(kappa: f64, q: f64, c1: f64, e1: f64, e2: f64, n: u32) -> Result<f64> {
    if !(e2 > 0.0) {
        return Err(Error::param("e2", format!("must be > 0, got {e2}")));
    }
    if n < 2 {
        return Err(Error::param(
            "n",
            format!("dimension must be >= 2, got {n}"),
        ));
    }
    Ok((kappa * (n as f64).sqrt().powf(q - 2.0) + c1 * e1) / e2)
}

/// Fluid material of the reference benchmark: `c1 = 1, e1 = 2, e2 = 1`,
/// `kappa = 0`, stress-free `c2 = 2`.
pub fn benchmark_fluid() -> MaterialModel {
    MaterialModel::stress_free(0.0, 2.0, 1.0, 2.0, 1.0).expect("valid parameters")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fluid() -> MaterialModel {
        benchmark_fluid()
    }

    #[test]
    fn stress_free_c2_values() {
        assert!((stress_free_c2(0.0, 2.0, 1.0, 2.0, 1.0, 2).unwrap() - 2.0).abs() < 1e-14);
        assert!((stress_free_c2(1.0, 2.0, 1.0, 2.0, 1.0, 2).unwrap() - 3.0).abs() < 1e-14);
        assert!(stress_free_c2(0.0, 2.0, 1.0, 2.0, 0.0, 2).is_err());
    }

    #[test]
    fn stress_free_reference_has_zero_piola() {
        for kappa in [0.0, 1.0, 2.5] {
            let m = MaterialModel::stress_free(kappa, 2.0, 1.0, 2.0, 1.0).unwrap();
            let p = m.piola(&IDENTITY2).unwrap();
            let norm = frob2(&p);
            assert!(norm <= 1e-12, "kappa={kappa}: |piola(I)| = {norm}");
        }
        // q away from 2 exercises the Frobenius factor
        let m = MaterialModel::stress_free(0.7, 1.5, 1.0, 2.0, 1.0).unwrap();
        assert!(frob2(&m.piola(&IDENTITY2).unwrap()) <= 1e-12);
    }

    #[test]
    fn h_values_fluid() {
        let m = fluid();
        assert!((m.h_eval(1.0).unwrap() - 3.0).abs() < 1e-14);
        assert!(m.h_prime(1.0).unwrap().abs() < 1e-14);
        // independent arithmetic: 1.5175^2 + 2/1.5175 and 2*1.5175 - 2/1.5175^2
        let d = 1.5175f64;
        assert!((m.h_eval(d).unwrap() - (d * d + 2.0 / d)).abs() < 1e-14);
        assert!((m.h_eval(d).unwrap() - 3.6207634).abs() < 1e-7);
        assert!((m.h_prime(d).unwrap() - (2.0 * d - 2.0 / (d * d))).abs() < 1e-14);
        assert!((m.h_prime(d).unwrap() - 2.1664970).abs() < 5e-6);
        assert!(m.h_eval(0.0).is_err());
        assert!(m.h_prime(-1.0).is_err());
    }

    #[test]
    fn piola_fluid_diagonal() {
        let m = fluid();
        let f = [[1.1, 0.0], [0.0, 1.4]];
        let p = m.piola(&f).unwrap();
        let hp = m.h_prime(1.54).unwrap();
        assert!((hp - 2.236687).abs() < 1e-6);
        assert!((p[0][0] - 3.131362).abs() < 1e-6);
        assert!((p[1][1] - 2.460356).abs() < 1e-6);
        assert!(p[0][1].abs() < 1e-14 && p[1][0].abs() < 1e-14);
    }

    #[test]
    fn piola_rejects_flipped_orientation() {
        let m = fluid();
        assert!(m.piola(&[[1.0, 0.0], [0.0, -1.0]]).is_err());
        assert!(m.energy_density(&[[0.0, 1.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn adjugate_identities() {
        assert_eq!(det2(&IDENTITY2), 1.0);
        assert_eq!(adj2(&IDENTITY2), IDENTITY2);
        let f = [[0.3, -1.2], [2.1, 0.7]];
        let a = adj2(&f);
        assert_eq!(a, [[0.7, 1.2], [-2.1, 0.3]]);
        assert!((det2(&[[1.1, 0.0], [0.0, 1.4]]) - 1.54).abs() < 1e-15);
        // F adj F = det F I, pseudo-random sample
        let mut s = 0x9e3779b97f4a7c15u64;
        let mut rnd = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        for _ in 0..50 {
            let f = [[rnd(), rnd()], [rnd(), rnd()]];
            let prod_should_be = det2(&f);
            let a = adj2(&f);
            let prod = [
                [
                    f[0][0] * a[0][0] + f[0][1] * a[1][0],
                    f[0][0] * a[0][1] + f[0][1] * a[1][1],
                ],
                [
                    f[1][0] * a[0][0] + f[1][1] * a[1][0],
                    f[1][0] * a[0][1] + f[1][1] * a[1][1],
                ],
            ];
            for i in 0..2 {
                for j in 0..2 {
                    let expect = if i == j { prod_should_be } else { 0.0 };
                    assert!((prod[i][j] - expect).abs() <= 1e-14 * (1.0 + prod_should_be.abs()));
                }
            }
        }
    }

    // central differences of W match the Piola stress entrywise
    #[test]
    fn piola_matches_finite_differences() {
        let materials = [
            fluid(),
            MaterialModel::stress_free(1.0, 2.0, 1.0, 2.0, 1.0).unwrap(),
            MaterialModel::new(0.5, 1.5, 0.8, 1.3, 2.0, 1.5).unwrap(),
        ];
        let mut s = 0x853c49e6748fea9bu64;
        let mut rnd = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let step = 1e-6;
        for m in materials {
            let mut checked = 0;
            while checked < 100 {
                let f = [
                    [0.8 + rnd(), 0.6 * (rnd() - 0.5)],
                    [0.6 * (rnd() - 0.5), 0.8 + rnd()],
                ];
                let d = det2(&f);
                if !(0.5..=3.0).contains(&d) {
                    continue;
                }
                checked += 1;
                let p = m.piola(&f).unwrap();
                for a in 0..2 {
                    for b in 0..2 {
                        let mut fp = f;
                        let mut fm = f;
                        fp[a][b] += step;
                        fm[a][b] -= step;
                        let fd = (m.energy_density(&fp).unwrap() - m.energy_density(&fm).unwrap())
                            / (2.0 * step);
                        let scale = p[a][b].abs().max(1.0);
                        assert!(
                            (fd - p[a][b]).abs() <= 1e-6 * scale,
                            "entry ({a},{b}): fd {fd} vs piola {}",
                            p[a][b]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn h_is_convex_on_sampled_grid() {
        let m = fluid();
        let lo = 0.1;
        let hi = 10.0;
        let n = 400;
        let dd = (hi - lo) / n as f64;
        for k in 1..n {
            let d = lo + k as f64 * dd;
            let second =
                m.h_eval(d - dd).unwrap() - 2.0 * m.h_eval(d).unwrap() + m.h_eval(d + dd).unwrap();
            assert!(second >= 0.0, "second difference negative at d = {d}");
        }
    }

    #[test]
    fn constructor_rejects_nonconvex_parameters() {
        assert!(MaterialModel::new(0.0, 2.0, -1.0, 2.0, 2.0, 1.0).is_err());
        assert!(MaterialModel::new(0.0, 2.0, 1.0, 2.0, 0.5, 1.0).is_err());
        assert!(MaterialModel::new(0.0, 2.0, 1.0, 2.0, 2.0, -1.0).is_err());
        assert!(MaterialModel::new(-0.1, 2.0, 1.0, 2.0, 2.0, 1.0).is_err());
        assert!(MaterialModel::new(1.0, 3.0, 1.0, 2.0, 2.0, 1.0).is_ok());
    }

    #[test]
    fn q_warning_only_for_solid_out_of_range() {
        assert!(fluid().q_range_warning().is_none());
        let solid_ok = MaterialModel::stress_free(1.0, 1.5, 1.0, 2.0, 1.0).unwrap();
        assert!(solid_ok.q_range_warning().is_none());
        let solid_q2 = MaterialModel::stress_free(1.0, 2.0, 1.0, 2.0, 1.0).unwrap();
        assert!(solid_q2.q_range_warning().is_some());
    }
}
