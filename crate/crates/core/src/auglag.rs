//! Penalty-multiplier outer iteration and continuation in the regularization
//! radius.
//!
//! At fixed `eps` the loop alternates an inner gradient-flow minimization of
//! the penalized functional with the updates
//!
//! ```text
//! mu_{j+1}  = mu_j + eta_j c(u_j)
//! eta_{j+1} = eta_j         if |c(u_j)| <= gamma |c(u_{j-1})|
//!             beta eta_j    otherwise
//! ```
//!
//! and stops once the relative multiplier change drops below `tol_mu`. The
//! previous constraint value is taken as zero on the first update, so the
//! penalty always grows by `beta` at `j = 0` unless the start is exactly
//! feasible. Continuation shrinks `eps` along a schedule, warm-starting each
//! stage from the interpolated previous solution.

use crate::fem::{assemble_stiffness, DeformationField, Problem};
use crate::flow::{run_flow, FlowConfig, StepTrace};
use crate::mesh::{Mesh, MeshParams};
use crate::oracles::initializer_z_eps;
use crate::{Error, Result};

/// Relative floor for the multiplier stopping test, guarding the `mu_1 = 0`
/// start against division by zero.
pub const MU_FLOOR: f64 = 1e-8;

/// Outer-loop parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugLagConfig {
    /// Contraction factor the constraint must beat for the penalty to stay.
    pub gamma: f64,
    /// Penalty growth factor.
    pub beta: f64,
    /// Initial penalty.
    pub eta1: f64,
    /// Initial multiplier.
    pub mu1: f64,
    /// Relative multiplier-change stopping threshold.
    pub tol_mu: f64,
    pub max_outer: usize,
}

impl Default for AugLagConfig {
    fn default() -> Self {
        AugLagConfig {
            gamma: 0.25,
            beta: 2.0,
            eta1: 5.0,
            mu1: 0.0,
            tol_mu: 1e-3,
            max_outer: 30,
        }
    }
}

impl AugLagConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::param(
                "auglag.gamma",
                format!("must lie in (0,1), got {}", self.gamma),
            ));
        }
        if !(self.beta > 1.0) {
            return Err(Error::param(
                "auglag.beta",
                format!("must be > 1, got {}", self.beta),
            ));
        }
        if !(self.eta1 > 0.0) {
            return Err(Error::param(
                "auglag.eta1",
                format!("must be > 0, got {}", self.eta1),
            ));
        }
        if !(self.tol_mu > 0.0) {
            return Err(Error::param(
                "auglag.tol_mu",
                format!("must be > 0, got {}", self.tol_mu),
            ));
        }
        if self.max_outer == 0 {
            return Err(Error::param("auglag.max_outer", "must be >= 1".to_string()));
        }
        Ok(())
    }
}

/// `mu_{j+1} = mu_j + eta_j c_j`.
pub fn update_multiplier(mu: f64, eta: f64, c: f64) -> f64 {
    mu + eta * c
}

/// `eta_{j+1} = eta_j` if the constraint contracted by `gamma`, else
/// `beta eta_j`.
pub fn update_penalty(eta: f64, c: f64, c_prev: f64, gamma: f64, beta: f64) -> f64 {
    if c.abs() <= gamma * c_prev.abs() {
        eta
    } else {
        beta * eta
    }
}

/// One row of the outer-iteration table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub j: usize,
    /// Constraint value of the inner minimizer.
    pub c: f64,
    /// Penalized energy of the inner minimizer at `(mu, eta)`.
    pub e_pen: f64,
    /// Stored energy of the inner minimizer.
    pub e_raw: f64,
    /// Multiplier used for this subproblem.
    pub mu: f64,
    /// Penalty used for this subproblem.
    pub eta: f64,
    /// Inner flow steps spent on this subproblem.
    pub flow_steps: usize,
}

/// Result of [`run_outer`].
#[derive(Debug, Clone)]
pub struct OuterResult {
    pub u: DeformationField,
    /// Final multiplier estimate (after the last update).
    pub mu: f64,
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// Number of subproblems whose inner flow hit its step cap.
    pub inner_nonconverged: usize,
}

impl OuterResult {
    pub fn total_flow_steps(&self) -> usize {
        self.records.iter().map(|r| r.flow_steps).sum()
    }

    pub fn final_record(&self) -> &IterationRecord {
        self.records.last().expect("at least one outer iteration")
    }
}

/// Replay the multiplier/penalty recurrence over a constraint column,
/// returning `(mu_j, eta_j)` for each row.
pub fn replay_block(c_column: &[f64], cfg: &AugLagConfig) -> Vec<(f64, f64)> {
    let mut mu = cfg.mu1;
    let mut eta = cfg.eta1;
    let mut c_prev = 0.0;
    let mut out = Vec::with_capacity(c_column.len());
    for &c in c_column {
        out.push((mu, eta));
        mu = update_multiplier(mu, eta, c);
        eta = update_penalty(eta, c, c_prev, cfg.gamma, cfg.beta);
        c_prev = c;
    }
    out
}

/// Run the outer loop at fixed `eps` (the mesh's inner radius), starting the
/// first subproblem from `u_init` and each later one from its predecessor.
pub fn run_outer(
    mesh: &Mesh,
    problem: &Problem,
    u_init: DeformationField,
    cfg: &AugLagConfig,
    flow_cfg: &FlowConfig,
    on_flow_step: &mut dyn FnMut(usize, &StepTrace),
) -> Result<OuterResult> {
    cfg.validate()?;
    flow_cfg.validate()?;
    let stiffness = assemble_stiffness(mesh);

    let mut u = u_init;
    let mut mu = cfg.mu1;
    let mut eta = cfg.eta1;
    let mut c_prev = 0.0;
    let mut records = Vec::new();
    let mut converged = false;
    let mut inner_nonconverged = 0;

    for j in 0..cfg.max_outer {
        // the multiplier update resolves eta * c, so the subproblems must be
        // solved more accurately as the penalty grows; a fixed inner
        // tolerance leaves c stuck at its accuracy floor and the penalty
        // update then doubles eta indefinitely
        let flow_cfg_j = FlowConfig {
            tol_u: (flow_cfg.tol_u * (cfg.eta1 / eta).powi(2)).max(1e-9),
            ..*flow_cfg
        };
        let (u_next, stats) = run_flow(
            mesh,
            problem,
            &stiffness,
            u,
            mu,
            eta,
            &flow_cfg_j,
            &mut |t| on_flow_step(j, t),
        )?;
        u = u_next;
        if !stats.converged {
            inner_nonconverged += 1;
        }
        records.push(IterationRecord {
            j,
            c: stats.constraint,
            e_pen: stats.penalized,
            e_raw: stats.raw_energy,
            mu,
            eta,
            flow_steps: stats.steps,
        });
        let mu_next = update_multiplier(mu, eta, stats.constraint);
        if (mu_next - mu).abs() < cfg.tol_mu * mu.abs().max(MU_FLOOR) {
            mu = mu_next;
            converged = true;
            break;
        }
        eta = update_penalty(eta, stats.constraint, c_prev, cfg.gamma, cfg.beta);
        c_prev = stats.constraint;
        mu = mu_next;
    }

    Ok(OuterResult {
        u,
        mu,
        records,
        converged,
        inner_nonconverged,
    })
}

/// How the first continuation stage is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitStrategy {
    /// The feasible shell construction with the given shell radius.
    ZEps { r_shell: f64 },
    /// Plain `u = A x`.
    Affine,
}

impl Default for InitStrategy {
    fn default() -> Self {
        InitStrategy::ZEps { r_shell: 0.5 }
    }
}

/// One continuation stage.
#[derive(Debug, Clone)]
pub struct ContinuationEntry {
    pub eps: f64,
    pub mesh: Mesh,
    pub outer: OuterResult,
}

/// Interpolate the previous stage's solution onto the new mesh and restore
/// admissibility in the newly exposed ring.
///
/// Value clamping makes the transferred field constant along rays below the
/// old inner radius, which collapses determinants there. Those nodes are
/// rescaled onto the incompressible cavity profile
/// `sqrt((r^2 + t) / (eps_old^2 + t))` whose parameter `t` is fitted so the
/// extension's determinant sits at the feasible mean volume ratio.
pub fn warm_start_from_previous(
    mesh_new: &Mesh,
    mesh_old: &Mesh,
    u_old: &DeformationField,
    problem: &Problem,
) -> Result<DeformationField> {
    let mut u = mesh_old.interpolate(u_old, mesh_new)?;
    u.pin_outer(mesh_new, &problem.boundary);

    let eps_old = mesh_old.eps;
    let eps_new = mesh_new.eps;
    if eps_new < eps_old {
        let ring_norm2: f64 = mesh_new
            .inner_boundary
            .iter()
            .map(|&i| u.values[i][0].powi(2) + u.values[i][1].powi(2))
            .sum::<f64>()
            / mesh_new.inner_boundary.len() as f64;
        let mean_det = (problem.boundary.det() * Mesh::polygon_disk_area(mesh_new.n_theta)
            - problem.cavity_volume)
            / mesh_new.polygon_annulus_area();
        let mut t = ring_norm2 / mean_det.max(1e-12) - eps_old * eps_old;
        if t <= -0.5 * eps_new * eps_new {
            t = -0.5 * eps_new * eps_new;
        }
        let denom = eps_old * eps_old + t;
        for (i, p) in mesh_new.nodes.iter().enumerate() {
            let r2 = p[0] * p[0] + p[1] * p[1];
            if r2 < eps_old * eps_old * (1.0 - 1e-12) {
                let s = ((r2 + t) / denom).sqrt();
                u.values[i][0] *= s;
                u.values[i][1] *= s;
            }
        }
    }
    Ok(u)
}

fn validate_schedule(eps_schedule: &[f64]) -> Result<()> {
    if eps_schedule.is_empty() {
        return Err(Error::param(
            "eps_schedule",
            "must not be empty".to_string(),
        ));
    }
    for w in eps_schedule.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::param(
                "eps_schedule",
                format!("must be strictly decreasing, got {} then {}", w[0], w[1]),
            ));
        }
    }
    if eps_schedule.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::param(
            "eps_schedule",
            "entries must lie in (0,1)".to_string(),
        ));
    }
    Ok(())
}

/// Shrink the regularization radius along `eps_schedule`, running the outer
/// loop on each mesh. The first stage starts from `init`; every later stage
/// warm-starts from the previous solution. If a warm start loses positive
/// orientation it falls back to the feasible shell initializer.
/// `on_stage` fires after every completed stage, so callers can persist
/// partial results before a later stage can fail.
#[allow(clippy::too_many_arguments)]
pub fn run_continuation(
    problem: &Problem,
    eps_schedule: &[f64],
    mesh_params: &MeshParams,
    cfg: &AugLagConfig,
    flow_cfg: &FlowConfig,
    init: InitStrategy,
    on_flow_step: &mut dyn FnMut(f64, usize, &StepTrace),
    on_stage: &mut dyn FnMut(&ContinuationEntry),
) -> Result<Vec<ContinuationEntry>> {
    validate_schedule(eps_schedule)?;
    let mut entries: Vec<ContinuationEntry> = Vec::with_capacity(eps_schedule.len());
    let mut previous: Option<(Mesh, DeformationField)> = None;

    let mut stage_cfg = *cfg;
    for &eps in eps_schedule {
        let mesh = mesh_params.build(eps)?;
        let u_init = match &previous {
            None => match init {
                InitStrategy::Affine => DeformationField::affine(&mesh, &problem.boundary),
                // outside the shell construction's validity range (tiny or
                // zero cavity volume) the affine state is the usable start
                InitStrategy::ZEps { r_shell } => {
                    initializer_z_eps(&mesh, &problem.boundary, problem.cavity_volume, r_shell)
                        .ok()
                        .filter(|z| z.min_det(&mesh) > 0.0)
                        .unwrap_or_else(|| DeformationField::affine(&mesh, &problem.boundary))
                }
            },
            Some((mesh_old, u_old)) => {
                let warm = warm_start_from_previous(&mesh, mesh_old, u_old, problem)?;
                if warm.min_det(&mesh) > 0.0 {
                    warm
                } else {
                    initializer_z_eps(&mesh, &problem.boundary, problem.cavity_volume, 0.5)?
                }
            }
        };
        let outer = run_outer(&mesh, problem, u_init, &stage_cfg, flow_cfg, &mut |j, t| {
            on_flow_step(eps, j, t)
        })?;
        // the multiplier of one stage is the natural starting guess for the
        // next (any starting multiplier is admissible); resetting it to
        // cfg.mu1 would make every stage re-walk the same outer path
        stage_cfg.mu1 = outer.mu;
        previous = Some((mesh.clone(), outer.u.clone()));
        let entry = ContinuationEntry { eps, mesh, outer };
        on_stage(&entry);
        entries.push(entry);
    }
    Ok(entries)
}
