//! Run configuration shared by the library drivers and the command line.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[serde(rename = "self-org-1d")]
    SelfOrg1d,
    #[serde(rename = "self-org-2d")]
    SelfOrg2d,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    /// Agent count `N`.
    pub agents: i64,
    /// Base time step; drivers fall back to their own default when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Flat-kernel width `d`; defaults depend on the experiment.
    #[serde(default)]
    pub kernel_width: Option<f64>,
    /// Communication radius for the 2D neighbor graph.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub iterations: Iterations,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub one_d: OneDConfig,
    #[serde(default)]
    pub two_d: TwoDConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Iterations {
    /// Motion steps: the whole 1D run, or Stage 3 in 2D.
    pub k: usize,
    /// Stage-1 steps.
    pub k1: usize,
    /// Stage-2 rounds.
    pub k2: usize,
}

impl Default for Iterations {
    fn default() -> Self {
        Self {
            k: 50_000,
            k1: 2_000,
            k2: 4_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub pseudoloc: f64,
    pub harmonic: f64,
    pub max_dt_halvings: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pseudoloc: 1e-9,
            harmonic: 1e-8,
            max_dt_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PseudoInit {
    /// Start from `X = 0`, `beta = 0`.
    Zeros,
    /// Start from the converged ramp `X_i = i/(N-1)`, `beta = 1`.
    Ramp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Initial1D {
    /// Agents equally spaced on `[0, length]`.
    Uniform { length: f64 },
    /// Gaussian-shaped cluster: inverse-CDF placement of a normal profile
    /// truncated to `[0, length]`.
    Clustered {
        length: f64,
        center: f64,
        width: f64,
    },
    /// Inverse-CDF placement of the target density.
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OneDConfig {
    /// Target `a sin x + b` on `[0, length]`; `None` picks the normalized pair.
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub length: f64,
    /// Sample spacing used to compile the target table.
    pub table_step: f64,
    pub initial: Initial1D,
    pub pseudo_init: PseudoInit,
    /// Correct the truncated kernel windows of the agents near either end
    /// before they enter the velocity law.
    pub edge_correction: bool,
    /// Record metrics every `metrics_stride` iterations.
    pub metrics_stride: usize,
    /// Density snapshots taken at these iterations (plus the final one).
    pub snapshot_iters: Vec<usize>,
}

impl Default for OneDConfig {
    fn default() -> Self {
        Self {
            a: None,
            b: None,
            length: std::f64::consts::FRAC_PI_2,
            table_step: 1e-3,
            initial: Initial1D::Clustered {
                length: 0.6,
                center: 0.3,
                width: 0.12,
            },
            pseudo_init: PseudoInit::Ramp,
            edge_correction: true,
            metrics_stride: 50,
            snapshot_iters: vec![0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    Jacobian,
    Meanshift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Initial2D {
    /// Hexagonal fill of the target disk with a ring of boundary agents.
    TargetDisk,
    /// Hexagonal fill of an ellipse; `center` and semi-axes in world units.
    Ellipse {
        center: [f64; 2],
        semi_x: f64,
        semi_y: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoDConfig {
    pub target_center: [f64; 2],
    pub target_radius: f64,
    /// `rho* ~ |r - rho_center|^(-2 rho_exponent)`, normalized on the target.
    pub rho_center: [f64; 2],
    pub rho_exponent: f64,
    pub initial: Initial2D,
    /// Boundary chain runs clockwise when true.
    pub clockwise: bool,
    pub grid_step: f64,
    /// Scattered samples used for `p*`.
    pub pstar_samples: usize,
    /// Match `p*` to what the flat kernel would measure on the target.
    pub kernel_matched_pstar: bool,
    pub gradient: GradientMethod,
    pub viscosity: bool,
    pub viscosity_coefficient: f64,
    /// Stage-1 time step; the top-level `dt` applies to Stage 3.
    pub stage1_dt: f64,
    /// Interior speed limit in Stage 1, as a fraction of `radius` per step.
    pub stage1_speed_cap: f64,
    /// Stage-1 kernel width relative to the Stage-3 one.
    pub stage1_kernel_scale: f64,
    pub hausdorff_resolution: f64,
    pub metrics_stride: usize,
    pub snapshot_stride: usize,
}

impl Default for TwoDConfig {
    fn default() -> Self {
        Self {
            target_center: [0.6, 0.0],
            target_radius: 0.5,
            rho_center: [0.4, 0.0],
            rho_exponent: 0.3,
            initial: Initial2D::TargetDisk,
            clockwise: true,
            grid_step: 1.0 / 64.0,
            pstar_samples: 4000,
            kernel_matched_pstar: true,
            gradient: GradientMethod::Meanshift,
            viscosity: true,
            viscosity_coefficient: 1.0,
            stage1_dt: 0.05,
            stage1_speed_cap: 0.1,
            stage1_kernel_scale: 1.0,
            hausdorff_resolution: 2e-3,
            metrics_stride: 10,
            snapshot_stride: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleCheck {
    CheckCdf,
    CheckPde1d,
    CheckHeatflow,
    CheckHausdorff,
}

impl OracleCheck {
    pub const ALL: [OracleCheck; 4] = [
        OracleCheck::CheckCdf,
        OracleCheck::CheckPde1d,
        OracleCheck::CheckHeatflow,
        OracleCheck::CheckHausdorff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OracleCheck::CheckCdf => "check-cdf",
            OracleCheck::CheckPde1d => "check-pde1d",
            OracleCheck::CheckHeatflow => "check-heatflow",
            OracleCheck::CheckHausdorff => "check-hausdorff",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub checks: Vec<OracleCheck>,
    pub heat_grid_step: f64,
    pub pde_cells: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            checks: OracleCheck::ALL.to_vec(),
            heat_grid_step: 1.0 / 64.0,
            pde_cells: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// Pass/fail limits checked by the runner; absent limits are not checked.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Final over initial `e` of a 1D run.
    pub e_ratio_1d: Option<f64>,
    /// Hausdorff distance at the end of Stage 1.
    pub hausdorff: Option<f64>,
    /// Final over Stage-3-start `e(rho)`.
    pub e_ratio_2d: Option<f64>,
}

impl SimConfig {
    /// Minimal config of the given kind with every default applied.
    pub fn new(experiment: ExperimentKind, agents: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment,
            seed: 0,
            agents: agents as i64,
            dt: None,
            kernel_width: None,
            radius: None,
            iterations: Iterations::default(),
            tolerances: Tolerances::default(),
            one_d: OneDConfig::default(),
            two_d: TwoDConfig::default(),
            oracle: OracleConfig::default(),
            output: OutputConfig::default(),
            thresholds: Thresholds::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn agent_count(&self) -> usize {
        self.agents.max(0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(param(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.agents < 3 && self.experiment != ExperimentKind::Oracle {
            return Err(param(
                "agents",
                format!("need at least 3, got {}", self.agents),
            ));
        }
        positive_opt("dt", self.dt)?;
        positive_opt("thresholds.e_ratio_1d", self.thresholds.e_ratio_1d)?;
        positive_opt("thresholds.hausdorff", self.thresholds.hausdorff)?;
        positive_opt("thresholds.e_ratio_2d", self.thresholds.e_ratio_2d)?;
        positive_opt("kernel_width", self.kernel_width)?;
        positive_opt("radius", self.radius)?;
        positive("tolerances.pseudoloc", self.tolerances.pseudoloc)?;
        positive("tolerances.harmonic", self.tolerances.harmonic)?;
        positive("one_d.length", self.one_d.length)?;
        positive("one_d.table_step", self.one_d.table_step)?;
        if self.one_d.metrics_stride == 0 {
            return Err(param("one_d.metrics_stride", "must be at least 1"));
        }
        match &self.one_d.initial {
            Initial1D::Uniform { length } => positive("one_d.initial.length", *length)?,
            Initial1D::Clustered {
                length,
                center,
                width,
            } => {
                positive("one_d.initial.length", *length)?;
                positive("one_d.initial.width", *width)?;
                if !center.is_finite() {
                    return Err(param("one_d.initial.center", "must be finite"));
                }
            }
            Initial1D::Target => {}
        }
        let t = &self.two_d;
        positive("two_d.target_radius", t.target_radius)?;
        positive("two_d.grid_step", t.grid_step)?;
        positive("two_d.stage1_dt", t.stage1_dt)?;
        positive("two_d.stage1_speed_cap", t.stage1_speed_cap)?;
        positive("two_d.stage1_kernel_scale", t.stage1_kernel_scale)?;
        positive("two_d.hausdorff_resolution", t.hausdorff_resolution)?;
        if !(t.viscosity_coefficient >= 0.0) {
            return Err(param("two_d.viscosity_coefficient", "must be non-negative"));
        }
        if t.pstar_samples < 8 {
            return Err(param("two_d.pstar_samples", "need at least 8"));
        }
        if t.metrics_stride == 0 {
            return Err(param("two_d.metrics_stride", "must be at least 1"));
        }
        if let Initial2D::Ellipse { semi_x, semi_y, .. } = t.initial {
            positive("two_d.initial.semi_x", semi_x)?;
            positive("two_d.initial.semi_y", semi_y)?;
        }
        positive("oracle.heat_grid_step", self.oracle.heat_grid_step)?;
        if self.oracle.pde_cells < 4 {
            return Err(param("oracle.pde_cells", "need at least 4"));
        }
        Ok(())
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(param(name, format!("must be positive, got {v}")))
    }
}

fn positive_opt(name: &'static str, v: Option<f64>) -> Result<()> {
    v.map_or(Ok(()), |v| positive(name, v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = SimConfig::from_json(
            r#"{"experiment": "self-org-1d", "agents": 100, "iterations": {"k": 10}}"#,
        )
        .unwrap();
        assert_eq!(cfg.iterations.k, 10);
        assert_eq!(cfg.iterations.k1, Iterations::default().k1);
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.dt, None);
        assert_eq!(cfg.one_d.pseudo_init, PseudoInit::Ramp);
    }

    #[test]
    fn negative_agents_rejected() {
        let err =
            SimConfig::from_json(r#"{"experiment": "self-org-2d", "agents": -5}"#).unwrap_err();
        assert!(matches!(err, Error::Parameter { name: "agents", .. }));
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = SimConfig::from_json(r#"{"experiment": "oracle", "agents": 0, "bogus": 1}"#)
            .unwrap_err();
        assert!(err.to_string().contains("bogus"));
        let err = SimConfig::from_json(
            r#"{"experiment": "oracle", "agents": 0, "two_d": {"radius": 1}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("radius"));
    }

    #[test]
    fn round_trips_through_json() {
        let mut cfg = SimConfig::new(ExperimentKind::SelfOrg2d, 500);
        cfg.two_d.initial = Initial2D::Ellipse {
            center: [0.45, 0.0],
            semi_x: 0.35,
            semi_y: 0.25,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(SimConfig::from_json(&text).unwrap(), cfg);
    }
}
