//! Discretized gradient flow for the penalized functional at fixed
//! multiplier and penalty.
//!
//! Each step solves `K z = -G(u_i)` for the H1 descent direction (`K` the
//! vector-Laplacian stiffness, `G` the exact discrete gradient) and proposes
//! `u_{i+1} = u_i + dt z`. A step is accepted only if every triangle keeps a
//! positive determinant and the penalized energy does not increase; otherwise
//! `dt` is halved down to a floor. The plain update has no such safeguard,
//! but the volumetric density blows up when a step overshoots through zero
//! determinant, and descent acceptance costs one extra sweep per backtrack.

use crate::fem::{
    assemble_residual, eval_state, solve_spd, DeformationField, Problem, SparseOperator, StateEval,
};
use crate::material::Vec2;
use crate::mesh::Mesh;
use crate::{Error, Result};

/// Pseudo-time stepping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig {
    /// Target pseudo-time step.
    pub dt: f64,
    /// Stop when the max-norm of the nodal update falls below this.
    pub tol_u: f64,
    pub max_steps: usize,
    /// Factor applied to `dt` when a candidate step is rejected.
    pub backtrack_factor: f64,
    /// Smallest step the backtracking is allowed to reach.
    pub min_dt: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            dt: 0.1,
            tol_u: 1e-3,
            max_steps: 5000,
            backtrack_factor: 0.5,
            min_dt: 1e-6,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::param(
                "flow.dt",
                format!("must be > 0, got {}", self.dt),
            ));
        }
        if !(self.tol_u > 0.0) {
            return Err(Error::param(
                "flow.tol_u",
                format!("must be > 0, got {}", self.tol_u),
            ));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::param(
                "flow.backtrack_factor",
                format!("must lie in (0,1), got {}", self.backtrack_factor),
            ));
        }
        if !(self.min_dt > 0.0 && self.min_dt <= self.dt) {
            return Err(Error::param(
                "flow.min_dt",
                format!("must lie in (0, dt], got {}", self.min_dt),
            ));
        }
        Ok(())
    }
}

/// Per-step diagnostics handed to trace sinks.
#[derive(Debug, Clone, Copy)]
pub struct StepTrace {
    pub step: usize,
    /// Accepted step size after backtracking.
    pub dt: f64,
    /// Penalized energy after the step.
    pub energy: f64,
    pub constraint: f64,
    /// Max-norm of the gradient at the pre-step iterate.
    pub grad_norm: f64,
    pub min_det: f64,
}

/// Summary of a [`run_flow`] call.
#[derive(Debug, Clone, Copy)]
pub struct FlowStats {
    pub steps: usize,
    pub converged: bool,
    /// Penalized energy at the returned iterate.
    pub penalized: f64,
    /// Stored energy at the returned iterate.
    pub raw_energy: f64,
    pub constraint: f64,
    pub grad_norm: f64,
    pub update_norm: f64,
    pub cg_iterations: usize,
}

pub(crate) struct StepOutcome {
    pub u_next: DeformationField,
    pub eval: StateEval,
    pub accepted_dt: f64,
    pub update_norm: f64,
    /// What the update norm would have been at the configured step size;
    /// the stopping test uses this so a backtracked step cannot fake
    /// stationarity.
    pub nominal_update_norm: f64,
    pub grad_norm: f64,
    pub cg_iterations: usize,
}

fn max_abs(v: &[Vec2]) -> f64 {
    v.iter()
        .map(|x| x[0].abs().max(x[1].abs()))
        .fold(0.0, f64::max)
}

/// One flow step with determinant and descent backtracking. `z_warm` carries
/// the previous descent direction as the CG starting guess.
#[allow(clippy::too_many_arguments)]
pub(crate) fn flow_step(
    mesh: &Mesh,
    problem: &Problem,
    stiffness: &SparseOperator,
    u: &DeformationField,
    state: &StateEval,
    z_warm: &mut Vec<Vec2>,
    mu: f64,
    eta: f64,
    dt_start: f64,
    cfg: &FlowConfig,
    step: usize,
) -> Result<StepOutcome> {
    let grad = assemble_residual(mesh, u, problem, mu, eta)?;
    let grad_norm = max_abs(&grad);
    let rhs: Vec<Vec2> = grad.iter().map(|g| [-g[0], -g[1]]).collect();
    let (z, cg_iterations) = solve_spd(stiffness, &rhs, Some(z_warm), 1e-10, 10_000)?;
    z_warm.clone_from(&z);

    let z_max = max_abs(&z);
    // descent acceptance with a one-ulp-scale slack so exact stationary
    // points are re-accepted
    let energy_cap = state.penalized + 1e-13 * state.penalized.abs().max(1.0);
    let mut dt = dt_start;
    loop {
        let mut candidate = u.clone();
        for (c, zi) in candidate.values.iter_mut().zip(&z) {
            c[0] += dt * zi[0];
            c[1] += dt * zi[1];
        }
        match eval_state(mesh, &candidate, problem, mu, eta) {
            Ok(eval) if eval.penalized <= energy_cap => {
                return Ok(StepOutcome {
                    u_next: candidate,
                    eval,
                    accepted_dt: dt,
                    update_norm: dt * z_max,
                    nominal_update_norm: cfg.dt * z_max,
                    grad_norm,
                    cg_iterations,
                });
            }
            Ok(_) | Err(Error::NonPositiveDeterminant { .. }) => {
                dt *= cfg.backtrack_factor;
                if dt < cfg.min_dt {
                    return Err(Error::FlowStalled {
                        step,
                        dt,
                        min_dt: cfg.min_dt,
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
}

/// Iterate [`flow_step`] from `u0` until the nodal update is smaller than
/// `cfg.tol_u` or `cfg.max_steps` is reached (the latter returns the iterate
/// flagged non-converged). The stopping test uses the update the configured
/// step size would produce, so backtracked steps cannot trigger it early.
/// After five consecutive accepted steps the step size recovers by 25%
/// toward its configured value.
#[allow(clippy::too_many_arguments)]
pub fn run_flow(
    mesh: &Mesh,
    problem: &Problem,
    stiffness: &SparseOperator,
    u0: DeformationField,
    mu: f64,
    eta: f64,
    cfg: &FlowConfig,
    on_step: &mut dyn FnMut(&StepTrace),
) -> Result<(DeformationField, FlowStats)> {
    cfg.validate()?;
    let mut state = eval_state(mesh, &u0, problem, mu, eta)?;
    let mut u = u0;
    let mut z_warm = vec![[0.0; 2]; mesh.node_count()];
    let mut dt = cfg.dt;
    let mut streak = 0usize;
    let mut stats = FlowStats {
        steps: 0,
        converged: false,
        penalized: state.penalized,
        raw_energy: state.energy,
        constraint: state.constraint,
        grad_norm: f64::NAN,
        update_norm: f64::NAN,
        cg_iterations: 0,
    };

    for step in 0..cfg.max_steps {
        let out = flow_step(
            mesh,
            problem,
            stiffness,
            &u,
            &state,
            &mut z_warm,
            mu,
            eta,
            dt,
            cfg,
            step,
        )?;
        if out.accepted_dt < dt {
            dt = out.accepted_dt;
            streak = 0;
        } else {
            streak += 1;
            if streak >= 5 && dt < cfg.dt {
                dt = (dt * 1.25).min(cfg.dt);
                streak = 0;
            }
        }
        u = out.u_next;
        state = out.eval;
        stats.steps = step + 1;
        stats.penalized = state.penalized;
        stats.raw_energy = state.energy;
        stats.constraint = state.constraint;
        stats.grad_norm = out.grad_norm;
        stats.update_norm = out.update_norm;
        stats.cg_iterations += out.cg_iterations;
        on_step(&StepTrace {
            step,
            dt: out.accepted_dt,
            energy: state.penalized,
            constraint: state.constraint,
            grad_norm: out.grad_norm,
            min_det: state.min_det,
        });
        if out.nominal_update_norm < cfg.tol_u {
            stats.converged = true;
            break;
        }
    }
    Ok((u, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_stiffness, BoundaryData};
    use crate::material::{benchmark_fluid, MaterialModel};

    fn small_problem() -> (Mesh, Problem) {
        let mesh = Mesh::build_annulus(0.1, 4, 16, 1.1).unwrap();
        let problem = Problem::new(
            benchmark_fluid(),
            BoundaryData::new(1.1, 1.4).unwrap(),
            std::f64::consts::PI * 0.15 * 0.15,
        )
        .unwrap();
        (mesh, problem)
    }

    #[test]
    fn stationary_start_returns_in_one_step() {
        let mesh = Mesh::build_annulus(0.1, 3, 12, 1.0).unwrap();
        let material = MaterialModel::stress_free(1.0, 2.0, 1.0, 2.0, 1.0).unwrap();
        let boundary = BoundaryData::new(1.0, 1.0).unwrap();
        let problem = Problem::new(material, boundary, 0.0).unwrap();
        let k = assemble_stiffness(&mesh);
        let u0 = DeformationField::affine(&mesh, &boundary);
        let (u, stats) = run_flow(
            &mesh,
            &problem,
            &k,
            u0.clone(),
            0.0,
            0.0,
            &FlowConfig::default(),
            &mut |_| {},
        )
        .unwrap();
        assert!(stats.converged);
        assert_eq!(stats.steps, 1);
        assert!(u.max_diff(&u0) <= 1e-14);
    }

    #[test]
    fn accepted_steps_descend_and_stay_admissible() {
        let (mesh, problem) = small_problem();
        let k = assemble_stiffness(&mesh);
        let u0 = DeformationField::affine(&mesh, &problem.boundary);
        let mut energies = Vec::new();
        let mut min_dets = Vec::new();
        let cfg = FlowConfig {
            max_steps: 150,
            ..FlowConfig::default()
        };
        let (u, stats) = run_flow(&mesh, &problem, &k, u0, 0.0, 5.0, &cfg, &mut |t| {
            energies.push(t.energy);
            min_dets.push(t.min_det);
        })
        .unwrap();
        assert!(stats.steps > 1);
        for w in energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-13 * w[0].abs().max(1.0));
        }
        assert!(min_dets.iter().all(|&d| d > 0.0));
        assert!(u.min_det(&mesh) > 0.0);
        // Dirichlet values untouched
        for &i in &mesh.outer_boundary {
            let expect = problem.boundary.apply(&mesh.nodes[i]);
            assert_eq!(u.values[i], expect);
        }
    }

    #[test]
    fn oversized_step_backtracks_but_never_degenerates() {
        let (mesh, problem) = small_problem();
        let k = assemble_stiffness(&mesh);
        let u0 = DeformationField::affine(&mesh, &problem.boundary);
        let cfg = FlowConfig {
            dt: 50.0,
            min_dt: 1e-9,
            max_steps: 1,
            ..FlowConfig::default()
        };
        let mut traces = Vec::new();
        let (u, _) = run_flow(&mesh, &problem, &k, u0, 0.0, 5.0, &cfg, &mut |t| {
            traces.push(*t)
        })
        .unwrap();
        assert_eq!(traces.len(), 1);
        assert!(
            traces[0].dt < 50.0,
            "dt {} should have backtracked",
            traces[0].dt
        );
        assert!(u.min_det(&mesh) > 0.0);
    }

    #[test]
    fn hopeless_step_floor_reports_stall() {
        let (mesh, problem) = small_problem();
        let k = assemble_stiffness(&mesh);
        let u0 = DeformationField::affine(&mesh, &problem.boundary);
        let cfg = FlowConfig {
            dt: 1e12,
            min_dt: 2e11,
            ..FlowConfig::default()
        };
        match run_flow(&mesh, &problem, &k, u0, 0.0, 5.0, &cfg, &mut |_| {}) {
            Err(Error::FlowStalled { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected FlowStalled, got {:?}", other.map(|r| r.1)),
        }
    }

    #[test]
    fn inadmissible_start_is_rejected() {
        let (mesh, problem) = small_problem();
        let k = assemble_stiffness(&mesh);
        let mut u0 = DeformationField::affine(&mesh, &problem.boundary);
        u0.values[mesh.n_theta] = [-3.0, 0.0];
        assert!(matches!(
            run_flow(
                &mesh,
                &problem,
                &k,
                u0,
                0.0,
                5.0,
                &FlowConfig::default(),
                &mut |_| {}
            ),
            Err(Error::NonPositiveDeterminant { .. })
        ));
    }

    // the first outer iterate under-opens the hole: converged c is negative
    #[test]
    fn first_subproblem_underopens_cavity() {
        let mesh = Mesh::build_annulus(0.1, 8, 64, 1.1).unwrap();
        let problem = Problem::new(
            benchmark_fluid(),
            BoundaryData::new(1.1, 1.4).unwrap(),
            std::f64::consts::PI * 0.15 * 0.15,
        )
        .unwrap();
        let k = assemble_stiffness(&mesh);
        let u0 = DeformationField::affine(&mesh, &problem.boundary);
        let (_, stats) = run_flow(
            &mesh,
            &problem,
            &k,
            u0,
            0.0,
            5.0,
            &FlowConfig::default(),
            &mut |_| {},
        )
        .unwrap();
        assert!(
            stats.converged,
            "flow did not converge in {} steps",
            stats.steps
        );
        assert!(
            stats.constraint < 0.0,
            "expected c < 0, got {}",
            stats.constraint
        );
    }
}
