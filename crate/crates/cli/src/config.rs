//! JSON run configuration and validation.
//!
//! Validation failures name the offending field path so configs are easy to
//! fix from the error message alone.

use cavsolve_core::{AugLagConfig, BoundaryData, FlowConfig, MaterialModel, MeshParams, Problem};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at `{}`: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum C2Mode {
    /// `c2` computed so the reference configuration is stress free.
    StressFree,
    /// `c2` given explicitly.
    Explicit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub kappa: f64,
    pub q: f64,
    pub c1: f64,
    pub e1: f64,
    pub e2: f64,
    pub c2_mode: C2Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub n_r: usize,
    pub n_theta: usize,
    pub grading: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    pub dt: f64,
    pub tol_u: f64,
    pub max_steps: usize,
    pub backtrack_factor: f64,
    pub min_dt: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        let f = FlowConfig::default();
        FlowSection {
            dt: f.dt,
            tol_u: f.tol_u,
            max_steps: f.max_steps,
            backtrack_factor: f.backtrack_factor,
            min_dt: f.min_dt,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugLagSection {
    pub gamma: f64,
    pub beta: f64,
    pub eta1: f64,
    pub mu1: f64,
    pub tol_mu: f64,
    pub max_outer: usize,
}

impl Default for AugLagSection {
    fn default() -> Self {
        let a = AugLagConfig::default();
        AugLagSection {
            gamma: a.gamma,
            beta: a.beta,
            eta1: a.eta1,
            mu1: a.mu1,
            tol_mu: a.tol_mu,
            max_outer: a.max_outer,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub dump_fields: bool,
    pub trace_flow: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".to_string(),
            dump_fields: false,
            trace_flow: false,
        }
    }
}

/// Complete run description, loaded from JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub material: MaterialSection,
    pub boundary: BoundarySection,
    /// Prescribed cavity volume (alias `V`).
    #[serde(alias = "V")]
    pub cavity_volume: f64,
    pub eps_schedule: Vec<f64>,
    pub mesh: MeshSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub auglag: AugLagSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("<file>", format!("cannot read {}: {e}", path.display())))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| err("<json>", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-level checks beyond what deserialization can express.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.material;
        if m.kappa < 0.0 {
            return Err(err("material.kappa", "must be >= 0"));
        }
        if m.c1 < 0.0 {
            return Err(err("material.c1", "must be >= 0"));
        }
        if m.e1 < 1.0 {
            return Err(err("material.e1", "must be >= 1 (convexity of h)"));
        }
        if m.e2 <= 0.0 {
            return Err(err("material.e2", "must be > 0"));
        }
        match m.c2_mode {
            C2Mode::Explicit if m.c2.is_none() => {
                return Err(err("material.c2", "required when c2_mode = \"explicit\""));
            }
            C2Mode::StressFree if m.c2.is_some() => {
                return Err(err(
                    "material.c2",
                    "must be omitted when c2_mode = \"stress_free\"",
                ));
            }
            _ => {}
        }
        if self.boundary.lambda1 <= 0.0 || self.boundary.lambda2 <= 0.0 {
            return Err(err("boundary", "stretches must be positive"));
        }
        if self.cavity_volume < 0.0 {
            return Err(err("cavity_volume", "must be >= 0"));
        }
        if self.eps_schedule.is_empty() {
            return Err(err("eps_schedule", "must not be empty"));
        }
        if self.eps_schedule.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return Err(err("eps_schedule", "entries must lie in (0,1)"));
        }
        if self.eps_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(err("eps_schedule", "must be strictly decreasing"));
        }
        if self.mesh.n_r < 1 {
            return Err(err("mesh.n_r", "must be >= 1"));
        }
        if self.mesh.n_theta < 3 {
            return Err(err("mesh.n_theta", "must be >= 3"));
        }
        if self.mesh.grading < 1.0 {
            return Err(err("mesh.grading", "must be >= 1"));
        }
        if self.flow.dt <= 0.0 {
            return Err(err("flow.dt", "must be > 0"));
        }
        if self.flow.tol_u <= 0.0 {
            return Err(err("flow.tol_u", "must be > 0"));
        }
        if !(self.flow.backtrack_factor > 0.0 && self.flow.backtrack_factor < 1.0) {
            return Err(err("flow.backtrack_factor", "must lie in (0,1)"));
        }
        if !(self.flow.min_dt > 0.0 && self.flow.min_dt <= self.flow.dt) {
            return Err(err("flow.min_dt", "must lie in (0, dt]"));
        }
        if !(self.auglag.gamma > 0.0 && self.auglag.gamma < 1.0) {
            return Err(err("auglag.gamma", "must lie in (0,1)"));
        }
        if self.auglag.beta <= 1.0 {
            return Err(err("auglag.beta", "must be > 1"));
        }
        if self.auglag.eta1 <= 0.0 {
            return Err(err("auglag.eta1", "must be > 0"));
        }
        if self.auglag.tol_mu <= 0.0 {
            return Err(err("auglag.tol_mu", "must be > 0"));
        }
        if self.auglag.max_outer == 0 {
            return Err(err("auglag.max_outer", "must be >= 1"));
        }
        Ok(())
    }

    pub fn material_model(&self) -> Result<MaterialModel, ConfigError> {
        let m = &self.material;
        let result = match m.c2_mode {
            C2Mode::StressFree => MaterialModel::stress_free(m.kappa, m.q, m.c1, m.e1, m.e2),
            C2Mode::Explicit => {
                MaterialModel::new(m.kappa, m.q, m.c1, m.c2.unwrap_or(f64::NAN), m.e1, m.e2)
            }
        };
        result.map_err(|e| err("material", e.to_string()))
    }

    pub fn problem(&self) -> Result<Problem, ConfigError> {
        let material = self.material_model()?;
        let boundary = BoundaryData::new(self.boundary.lambda1, self.boundary.lambda2)
            .map_err(|e| err("boundary", e.to_string()))?;
        Problem::new(material, boundary, self.cavity_volume)
            .map_err(|e| err("cavity_volume", e.to_string()))
    }

    pub fn mesh_params(&self) -> MeshParams {
        MeshParams {
            n_r: self.mesh.n_r,
            n_theta: self.mesh.n_theta,
            grading: self.mesh.grading,
        }
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            dt: self.flow.dt,
            tol_u: self.flow.tol_u,
            max_steps: self.flow.max_steps,
            backtrack_factor: self.flow.backtrack_factor,
            min_dt: self.flow.min_dt,
        }
    }

    pub fn auglag_config(&self) -> AugLagConfig {
        AugLagConfig {
            gamma: self.auglag.gamma,
            beta: self.auglag.beta,
            eta1: self.auglag.eta1,
            mu1: self.auglag.mu1,
            tol_mu: self.auglag.tol_mu,
            max_outer: self.auglag.max_outer,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_json() -> serde_json::Value {
        serde_json::json!({
            "material": {"kappa": 0.0, "q": 2.0, "c1": 1.0, "e1": 2.0, "e2": 1.0, "c2_mode": "stress_free"},
            "boundary": {"lambda1": 1.1, "lambda2": 1.4},
            "cavity_volume": 0.07068583470577035,
            "eps_schedule": [0.1, 0.05],
            "mesh": {"n_r": 4, "n_theta": 16, "grading": 1.1}
        })
    }

    #[test]
    fn parses_minimal_config_with_defaults() {
        let cfg: RunConfig = serde_json::from_value(base_json()).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.flow.dt, 0.1);
        assert_eq!(cfg.auglag.beta, 2.0);
        assert_eq!(cfg.output.dir, "out");
        let m = cfg.material_model().unwrap();
        assert!((m.c2 - 2.0).abs() < 1e-14);
    }

    #[test]
    fn accepts_uppercase_volume_alias() {
        let mut j = base_json();
        let v = j["cavity_volume"].take();
        j["V"] = v;
        j.as_object_mut().unwrap().remove("cavity_volume");
        let cfg: RunConfig = serde_json::from_value(j).unwrap();
        assert!(cfg.cavity_volume > 0.07);
    }

    #[test]
    fn nondecreasing_schedule_names_the_field() {
        let mut j = base_json();
        j["eps_schedule"] = serde_json::json!([0.05, 0.1]);
        let cfg: RunConfig = serde_json::from_value(j).unwrap();
        let e = cfg.validate().unwrap_err();
        assert_eq!(e.path, "eps_schedule");
    }

    #[test]
    fn explicit_mode_requires_c2() {
        let mut j = base_json();
        j["material"]["c2_mode"] = "explicit".into();
        let cfg: RunConfig = serde_json::from_value(j).unwrap();
        let e = cfg.validate().unwrap_err();
        assert_eq!(e.path, "material.c2");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut j = base_json();
        j["mesh"]["n_z"] = 7.into();
        let r: Result<RunConfig, _> = serde_json::from_value(j);
        assert!(r.unwrap_err().to_string().contains("n_z"));
    }
}
