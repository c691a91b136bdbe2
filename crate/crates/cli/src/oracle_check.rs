//! The `oracle-check` subcommand: evaluate the closed-form identities the
//! solver is verified against and report pass/fail per identity.

use cavsolve_core::fem::{assemble_residual, constraint_eps};
use cavsolve_core::material::{adj2, det2, frob2, IDENTITY2};
use cavsolve_core::oracles::{
    cavity_volume, initializer_z_eps, inner_bc_residual, sensitivity, FluidExactSolution,
};
use cavsolve_core::{BoundaryData, DeformationField, MaterialModel, Mesh, Problem};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> OracleCheck {
    OracleCheck {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// The benchmark setup: stress-free elastic fluid, `A = diag(1.1, 1.4)`,
/// cavity volume `pi 0.15^2`.
pub fn benchmark_setup() -> (MaterialModel, BoundaryData, f64) {
    (
        cavsolve_core::material::benchmark_fluid(),
        BoundaryData::new(1.1, 1.4).expect("positive stretches"),
        std::f64::consts::PI * 0.15 * 0.15,
    )
}

struct Lcg(u64);

impl Lcg {
    fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Run every identity for the given material/boundary/volume. Checks that
/// need the closed-form fluid solution are skipped (reported as passing with
/// a note) when the material is not a fluid.
pub fn oracle_report(
    material: &MaterialModel,
    boundary: &BoundaryData,
    cavity_volume_target: f64,
) -> Vec<OracleCheck> {
    let mut out = Vec::new();
    let mut rng = Lcg(0x9e3779b97f4a7c15);

    // reference configuration stress
    let piola_norm = material
        .piola(&IDENTITY2)
        .map(|p| frob2(&p))
        .unwrap_or(f64::INFINITY);
    out.push(check(
        "stress_free_reference",
        piola_norm <= 1e-12,
        format!("|piola(I)| = {piola_norm:.3e}"),
    ));

    // Cramer identity for the adjugate
    let mut worst = 0.0f64;
    for _ in 0..40 {
        let f = [
            [rng.next() * 4.0 - 2.0, rng.next() * 4.0 - 2.0],
            [rng.next() * 4.0 - 2.0, rng.next() * 4.0 - 2.0],
        ];
        let a = adj2(&f);
        let d = det2(&f);
        for i in 0..2 {
            for j in 0..2 {
                let prod = f[i][0] * a[0][j] + f[i][1] * a[1][j];
                let expect = if i == j { d } else { 0.0 };
                worst = worst.max((prod - expect).abs() / (1.0 + d.abs()));
            }
        }
    }
    out.push(check(
        "adjugate_cramer_identity",
        worst <= 1e-14,
        format!("max scaled defect {worst:.3e}"),
    ));

    // Piola stress against central differences of the energy density
    let mut worst = 0.0f64;
    let step = 1e-6;
    let mut tried = 0;
    while tried < 60 {
        let f = [
            [0.8 + rng.next(), 0.6 * (rng.next() - 0.5)],
            [0.6 * (rng.next() - 0.5), 0.8 + rng.next()],
        ];
        if !(0.5..=3.0).contains(&det2(&f)) {
            continue;
        }
        tried += 1;
        let p = material.piola(&f).expect("positive determinant");
        for a in 0..2 {
            for b in 0..2 {
                let mut fp = f;
                let mut fm = f;
                fp[a][b] += step;
                fm[a][b] -= step;
                let fd = (material.energy_density(&fp).unwrap()
                    - material.energy_density(&fm).unwrap())
                    / (2.0 * step);
                worst = worst.max((fd - p[a][b]).abs() / p[a][b].abs().max(1.0));
            }
        }
    }
    out.push(check(
        "piola_finite_difference",
        worst <= 1e-6,
        format!("max relative defect {worst:.3e}"),
    ));

    // polygonal area identity
    let mesh = Mesh::build_annulus(0.1, 32, 256, 1.1).expect("valid mesh");
    let expect = mesh.polygon_annulus_area();
    let defect = (mesh.total_area() - expect).abs() / expect;
    out.push(check(
        "mesh_area_identity",
        defect <= 1e-12,
        format!("relative defect {defect:.3e}"),
    ));

    // cavity volume vs constraint: exact discrete identity
    {
        let mut u = DeformationField::affine(&mesh, boundary);
        for (i, p) in mesh.nodes.iter().enumerate() {
            if !mesh.is_outer_node(i) {
                u.values[i][0] += 0.04 * (3.1 * p[1]).sin();
                u.values[i][1] -= 0.03 * (2.3 * p[0]).cos();
            }
        }
        let c = constraint_eps(&mesh, &u, boundary, cavity_volume_target);
        let vol = cavity_volume(&mesh, &u);
        let defect = (vol - (cavity_volume_target - c)).abs();
        out.push(check(
            "cavity_volume_constraint_identity",
            defect <= 1e-12,
            format!("defect {defect:.3e}"),
        ));
    }

    // shell initializer feasibility
    {
        let z = initializer_z_eps(&mesh, boundary, cavity_volume_target, 0.5);
        let detail = match &z {
            Ok(z) => {
                let c = constraint_eps(&mesh, z, boundary, cavity_volume_target);
                format!("|c(z_eps)| = {:.3e}", c.abs())
            }
            Err(e) => format!("construction failed: {e}"),
        };
        let passed = z
            .map(|z| constraint_eps(&mesh, &z, boundary, cavity_volume_target).abs() <= 1e-3)
            .unwrap_or(false);
        out.push(check("shell_initializer_feasibility", passed, detail));
    }

    if !material.is_fluid() {
        out.push(check(
            "fluid_closed_form_suite",
            true,
            "skipped: material is not an elastic fluid".to_string(),
        ));
        return out;
    }

    let exact = match FluidExactSolution::new(*boundary, cavity_volume_target) {
        Ok(e) => e,
        Err(e) => {
            out.push(check(
                "fluid_exact_solution",
                false,
                format!("construction failed: {e}"),
            ));
            return out;
        }
    };

    // constant Jacobian of the exact map via finite differences
    {
        let target = exact.d() * boundary.det();
        let mut worst = 0.0f64;
        for _ in 0..40 {
            let r = 0.05 + 0.9 * rng.next();
            let th = 2.0 * std::f64::consts::PI * rng.next();
            let x = [r * th.cos(), r * th.sin()];
            let mut jac = [[0.0; 2]; 2];
            for b in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[b] += step;
                xm[b] -= step;
                let yp = exact.eval(&xp).unwrap();
                let ym = exact.eval(&xm).unwrap();
                jac[0][b] = (yp[0] - ym[0]) / (2.0 * step);
                jac[1][b] = (yp[1] - ym[1]) / (2.0 * step);
            }
            worst = worst.max((det2(&jac) - target).abs() / target);
        }
        out.push(check(
            "exact_jacobian_constant",
            worst <= 1e-6,
            format!("max relative defect {worst:.3e} against d det A = {target:.6}"),
        ));
    }

    // energy identity
    {
        let e = exact.energy(material).expect("fluid");
        let formula = std::f64::consts::PI
            * material
                .h_eval(exact.d() * boundary.det())
                .expect("valid ratio");
        out.push(check(
            "exact_energy_formula",
            (e - formula).abs() <= 1e-12 * formula,
            format!("E = {e:.6}"),
        ));
    }

    // interpolated exact solution satisfies the weak equilibrium equation
    // with the oracle multiplier, improving under refinement
    {
        let mu = exact.multiplier(material).expect("fluid");
        let problem = Problem::new(*material, *boundary, cavity_volume_target).expect("valid");
        let mut norms = Vec::new();
        for (n_r, n_theta) in [(8, 64), (16, 128)] {
            let m = Mesh::build_annulus(0.1, n_r, n_theta, 1.1).expect("valid");
            let u = exact.sample(&m).expect("sampled");
            let g = assemble_residual(&m, &u, &problem, mu, 0.0).expect("admissible");
            let norm = g
                .iter()
                .map(|v| v[0].abs().max(v[1].abs()))
                .fold(0.0, f64::max);
            norms.push(norm);
        }
        out.push(check(
            "exact_solution_weak_residual",
            norms[1] < norms[0],
            format!(
                "|G|_inf {:.3e} -> {:.3e} under refinement",
                norms[0], norms[1]
            ),
        ));
    }

    // boundary-data sensitivity against the closed-form derivative
    {
        let problem = Problem::new(*material, *boundary, cavity_volume_target).expect("valid");
        let m = Mesh::build_annulus(0.05, 16, 128, 1.1).expect("valid");
        let u = exact.sample(&m).expect("sampled");
        let mu = exact.multiplier(material).expect("fluid");
        let hp = material
            .h_prime(exact.d() * boundary.det())
            .expect("valid ratio");
        let mut worst = 0.0f64;
        let mut detail = String::new();
        for axis in 0..2 {
            let target = std::f64::consts::PI
                * hp
                * if axis == 0 {
                    boundary.lambda2
                } else {
                    boundary.lambda1
                };
            let s = sensitivity(&m, &u, mu, &problem, axis).expect("admissible");
            worst = worst.max((s - target).abs() / target.abs().max(1e-12));
            detail.push_str(&format!("axis {axis}: {s:.4} vs {target:.4}; "));
        }
        out.push(check("sensitivity_closed_form", worst <= 0.02, detail));
    }

    // the inner traction residual singles out the oracle multiplier
    {
        let m = Mesh::build_annulus(0.1, 16, 128, 1.1).expect("valid");
        let u = exact.sample(&m).expect("sampled");
        let mu = exact.multiplier(material).expect("fluid");
        let at_oracle = inner_bc_residual(&m, &u, mu, material).expect("admissible");
        let perturbed = inner_bc_residual(&m, &u, mu + 1.0, material).expect("admissible");
        out.push(check(
            "inner_traction_pins_multiplier",
            perturbed > at_oracle + 1.0,
            format!("residual {at_oracle:.3e} jumps to {perturbed:.3e} at mu+1"),
        ));
    }

    out
}

/// Render the report as an aligned text table.
pub fn format_report(checks: &[OracleCheck]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut s = String::new();
    for c in checks {
        s.push_str(&format!(
            "{:<width$}  {}  {}\n",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail,
        ));
    }
    s
}
