//! Experiment configuration file (TOML). Every table rejects unknown keys,
//! and [`ExperimentConfig::resolved`] materializes all defaults so a run can
//! be replayed from its snapshot alone.

use std::fmt;
use std::path::Path;

use nalgebra::DVector;
use senstune_core::optim::NoiseSchedule;
use senstune_core::types::layout;
use senstune_core::{
    DubinsCar, DubinsCurve, FeasibleBox, L1Config, LossSpec, ParamVector, Quadrotor,
    QuadrotorCircle, QuadrotorParams, SimConfig, SystemModel, Termination, Trajectory, TuneConfig,
};
use serde::{Deserialize, Serialize};

/// A configuration problem, tagged with the dotted path of the field at fault.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    /// Trajectories the gains are tuned on.
    pub trajectories: TrajectorySet,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub loss: LossConfig,
    #[serde(default)]
    pub tune: TuneSection,
    #[serde(default)]
    pub l1: L1Section,
    #[serde(default)]
    pub grid: GridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    Dubins {
        #[serde(default = "one")]
        mass: f64,
        #[serde(default = "one")]
        inertia: f64,
    },
    Quadrotor {
        #[serde(default = "quad_mass")]
        mass: f64,
        #[serde(default = "quad_gravity")]
        gravity: f64,
        #[serde(default = "quad_inertia")]
        inertia: [[f64; 3]; 3],
    },
}

fn one() -> f64 {
    1.0
}

fn quad_mass() -> f64 {
    QuadrotorParams::default().mass
}

fn quad_gravity() -> f64 {
    QuadrotorParams::default().gravity
}

fn quad_inertia() -> [[f64; 3]; 3] {
    QuadrotorParams::default().inertia
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Nine slow circles and ellipses.
    Training,
    /// Peanut, lemon, spiral and twist.
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    /// Car only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curves: Vec<DubinsCurve>,
    /// Quadrotor only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrotor_circle: Option<QuadrotorCircle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Defaults to the tuning trajectories.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<TrajectorySet>,
    /// Held-out noise realizations averaged per reported metric.
    pub realizations: usize,
    /// When false, each trajectory is scored once on the realization the
    /// tuner saw for the same batch index.
    pub held_out: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trajectories: None,
            realizations: 8,
            held_out: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// Weight on `|u_k|^2`; the position error weight is 1.
    pub control_penalty: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            control_penalty: 0.0,
        }
    }
}

/// A scalar applied to every gain, or one value per gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerGain {
    All(f64),
    Each(Vec<f64>),
}

impl PerGain {
    fn expand(&self, p: usize, field: &str) -> Result<ParamVector, ConfigError> {
        match self {
            PerGain::All(v) => Ok(DVector::from_element(p, *v)),
            PerGain::Each(v) if v.len() == p => Ok(DVector::from_column_slice(v)),
            PerGain::Each(v) => Err(ConfigError::new(
                field,
                format!("expected {p} values for this system, got {}", v.len()),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneSection {
    /// Defaults per system: (2,2,2,2) for the car, the standard geometric
    /// controller gains for the quadrotor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta0: Option<PerGain>,
    pub step_size: f64,
    pub lower: PerGain,
    pub upper: PerGain,
    pub rel_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub increase_tol: Option<f64>,
    pub max_iters: usize,
    pub noise: NoiseSchedule,
}

impl Default for TuneSection {
    fn default() -> Self {
        Self {
            theta0: None,
            step_size: 0.1,
            lower: PerGain::All(1e-3),
            upper: PerGain::All(1e3),
            rel_tol: 1e-4,
            increase_tol: None,
            max_iters: 500,
            noise: NoiseSchedule::Frozen,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct L1Section {
    pub enabled: bool,
    pub bandwidth: f64,
    pub predictor_pole: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adaptation_period: Option<f64>,
}

impl Default for L1Section {
    fn default() -> Self {
        let d = L1Config::default();
        Self {
            enabled: false,
            bandwidth: d.bandwidth,
            predictor_pole: d.predictor_pole,
            adaptation_period: d.adaptation_period,
        }
    }
}

impl L1Section {
    pub fn params(&self) -> L1Config {
        L1Config {
            bandwidth: self.bandwidth,
            predictor_pole: self.predictor_pole,
            adaptation_period: self.adaptation_period,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    None,
    Tune,
    L1,
    TuneL1,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::None,
        Ablation::Tune,
        Ablation::L1,
        Ablation::TuneL1,
    ];

    pub fn tune(self) -> bool {
        matches!(self, Ablation::Tune | Ablation::TuneL1)
    }

    pub fn l1(self) -> bool {
        matches!(self, Ablation::L1 | Ablation::TuneL1)
    }
}

/// Uncertainty axes of a sweep. Empty axes hold the `[sim.uncertainty]`
/// value fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub force_amplitude: Vec<f64>,
    pub moment_amplitude: Vec<f64>,
    pub inertia_scale: Vec<f64>,
    pub ablations: Vec<Ablation>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            force_amplitude: Vec::new(),
            moment_amplitude: Vec::new(),
            inertia_scale: Vec::new(),
            ablations: Ablation::ALL.to_vec(),
        }
    }
}

/// Owned system model behind the config.
pub enum System {
    Dubins(DubinsCar),
    Quadrotor(Quadrotor),
}

impl System {
    pub fn model(&self) -> &dyn SystemModel {
        match self {
            System::Dubins(m) => m,
            System::Quadrotor(m) => m,
        }
    }

    pub fn position_indices(&self) -> Vec<usize> {
        match self {
            System::Dubins(m) => m.position_indices(),
            System::Quadrotor(m) => m.position_indices(),
        }
    }
}

pub struct NamedTrajectory {
    pub name: String,
    pub trajectory: Box<dyn Trajectory>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let field = match e.span() {
                Some(span) => locate(text, span.start),
                None => String::new(),
            };
            ConfigError::new(field, message)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The config with every default written out.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.tune.theta0 = Some(PerGain::Each(self.theta0().as_slice().to_vec()));
        if out.eval.trajectories.is_none() {
            out.eval.trajectories = Some(self.trajectories.clone());
        }
        if let SystemSpec::Quadrotor { .. } = self.system {
            if out.trajectories.quadrotor_circle.is_none() {
                out.trajectories.quadrotor_circle = Some(QuadrotorCircle::default());
            }
            if let Some(t) = out.eval.trajectories.as_mut() {
                if t.quadrotor_circle.is_none() {
                    t.quadrotor_circle = Some(QuadrotorCircle::default());
                }
            }
        }
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config types serialize to TOML")
    }

    pub fn param_count(&self) -> usize {
        match self.system {
            SystemSpec::Dubins { .. } => layout::dubins::P,
            SystemSpec::Quadrotor { .. } => layout::quadrotor::P,
        }
    }

    pub fn theta0(&self) -> ParamVector {
        let p = self.param_count();
        match (&self.tune.theta0, &self.system) {
            (Some(g), _) => g.expand(p, "tune.theta0").expect("validated"),
            (None, SystemSpec::Dubins { .. }) => DVector::from_element(p, 2.0),
            (None, SystemSpec::Quadrotor { .. }) => {
                use layout::quadrotor::{K_OMEGA, K_P, K_R, K_V};
                let mut theta = DVector::zeros(p);
                for (gain, range) in [(16.0, K_P), (5.6, K_V), (8.81, K_R), (2.54, K_OMEGA)] {
                    theta.rows_mut(range.start, range.len()).fill(gain);
                }
                theta
            }
        }
    }

    pub fn bounds(&self) -> FeasibleBox {
        let p = self.param_count();
        let lower = self.tune.lower.expand(p, "tune.lower").expect("validated");
        let upper = self.tune.upper.expand(p, "tune.upper").expect("validated");
        FeasibleBox::new(lower, upper).expect("validated")
    }

    pub fn tune_config(&self) -> TuneConfig {
        TuneConfig {
            step_size: self.tune.step_size,
            bounds: self.bounds(),
            termination: Termination {
                rel_tol: self.tune.rel_tol,
                increase_tol: self.tune.increase_tol,
                max_iters: self.tune.max_iters,
            },
            noise: self.tune.noise,
        }
    }

    pub fn l1(&self) -> Option<L1Config> {
        self.l1.enabled.then(|| self.l1.params())
    }

    pub fn build_system(&self) -> Result<System, ConfigError> {
        match self.system {
            SystemSpec::Dubins { mass, inertia } => DubinsCar::new(mass, inertia)
                .map(System::Dubins)
                .map_err(|e| ConfigError::new("system", e.to_string())),
            SystemSpec::Quadrotor {
                mass,
                gravity,
                inertia,
            } => Quadrotor::new(QuadrotorParams {
                mass,
                gravity,
                inertia,
            })
            .map(System::Quadrotor)
            .map_err(|e| ConfigError::new("system", e.to_string())),
        }
    }

    pub fn loss_spec(&self, system: &System) -> LossSpec {
        LossSpec::new(system.position_indices(), self.loss.control_penalty).expect("validated")
    }

    pub fn training_trajectories(&self) -> Vec<NamedTrajectory> {
        self.expand_set(&self.trajectories)
    }

    pub fn eval_trajectories(&self) -> Vec<NamedTrajectory> {
        self.expand_set(
            self.eval
                .trajectories
                .as_ref()
                .unwrap_or(&self.trajectories),
        )
    }

    fn expand_set(&self, set: &TrajectorySet) -> Vec<NamedTrajectory> {
        let mut out = Vec::new();
        match self.system {
            SystemSpec::Dubins { .. } => {
                let preset = match set.preset {
                    Some(Preset::Training) => DubinsCurve::training_set(),
                    Some(Preset::Test) => DubinsCurve::test_set(),
                    None => Vec::new(),
                };
                for (i, curve) in preset
                    .into_iter()
                    .chain(set.curves.iter().cloned())
                    .enumerate()
                {
                    out.push(NamedTrajectory {
                        name: format!("{i}_{}", curve.name()),
                        trajectory: Box::new(curve),
                    });
                }
            }
            SystemSpec::Quadrotor { .. } => out.push(NamedTrajectory {
                name: "0_circle".into(),
                trajectory: Box::new(set.quadrotor_circle.unwrap_or_default()),
            }),
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = self.param_count();
        let system = self.build_system()?;
        self.validate_set(&self.trajectories, "trajectories", true)?;
        if let Some(set) = &self.eval.trajectories {
            self.validate_set(set, "eval.trajectories", false)?;
        }
        if self.eval.realizations == 0 {
            return Err(ConfigError::new("eval.realizations", "must be at least 1"));
        }
        self.sim
            .validate()
            .map_err(|e| ConfigError::new("sim", e.to_string()))?;
        if !(self.sim.adaptive_tol.is_finite()) {
            return Err(ConfigError::new("sim.adaptive_tol", "must be finite"));
        }
        LossSpec::new(system.position_indices(), self.loss.control_penalty)
            .map_err(|e| ConfigError::new("loss.control_penalty", e.to_string()))?;

        let t = &self.tune;
        if !(t.step_size > 0.0 && t.step_size.is_finite()) {
            return Err(ConfigError::new(
                "tune.step_size",
                format!("must be positive, got {}", t.step_size),
            ));
        }
        if !(t.rel_tol > 0.0 && t.rel_tol.is_finite()) {
            return Err(ConfigError::new(
                "tune.rel_tol",
                format!("must be positive, got {}", t.rel_tol),
            ));
        }
        if let Some(tol) = t.increase_tol {
            if !(tol >= 0.0 && tol.is_finite()) {
                return Err(ConfigError::new(
                    "tune.increase_tol",
                    format!("must be non-negative, got {tol}"),
                ));
            }
        }
        let lower = t.lower.expand(p, "tune.lower")?;
        let upper = t.upper.expand(p, "tune.upper")?;
        let bounds = FeasibleBox::new(lower, upper)
            .map_err(|e| ConfigError::new("tune.lower", e.to_string()))?;
        if let Some(theta0) = &t.theta0 {
            let theta0 = theta0.expand(p, "tune.theta0")?;
            if !bounds.contains(&theta0) {
                return Err(ConfigError::new(
                    "tune.theta0",
                    "lies outside [tune.lower, tune.upper]",
                ));
            }
        } else if !bounds.contains(&self.theta0()) {
            return Err(ConfigError::new(
                "tune.lower",
                "default initial gains lie outside the box",
            ));
        }

        self.l1
            .params()
            .validate(self.sim.dt)
            .map_err(|e| ConfigError::new("l1", e.to_string()))?;

        let g = &self.grid;
        let car = matches!(self.system, SystemSpec::Dubins { .. });
        for (name, axis, allowed) in [
            ("grid.force_amplitude", &g.force_amplitude, car),
            ("grid.moment_amplitude", &g.moment_amplitude, car),
            ("grid.inertia_scale", &g.inertia_scale, !car),
        ] {
            if !axis.is_empty() && !allowed {
                return Err(ConfigError::new(name, "does not apply to this system"));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(ConfigError::new(name, "values must be finite"));
            }
        }
        if g.inertia_scale.iter().any(|b| *b <= 0.0) {
            return Err(ConfigError::new(
                "grid.inertia_scale",
                "values must be positive",
            ));
        }
        if g.ablations.is_empty() {
            return Err(ConfigError::new(
                "grid.ablations",
                "must list at least one ablation",
            ));
        }
        let unique: std::collections::HashSet<_> = g.ablations.iter().collect();
        if unique.len() != g.ablations.len() {
            return Err(ConfigError::new("grid.ablations", "contains duplicates"));
        }
        Ok(())
    }

    fn validate_set(
        &self,
        set: &TrajectorySet,
        field: &str,
        required: bool,
    ) -> Result<(), ConfigError> {
        match self.system {
            SystemSpec::Dubins { .. } => {
                if set.quadrotor_circle.is_some() {
                    return Err(ConfigError::new(
                        format!("{field}.quadrotor_circle"),
                        "only applies to the quadrotor",
                    ));
                }
                if required && set.preset.is_none() && set.curves.is_empty() {
                    return Err(ConfigError::new(
                        field,
                        "no trajectories given; set `preset` or `curves`",
                    ));
                }
                for (i, curve) in set.curves.iter().enumerate() {
                    curve.desired(0.0).map_err(|e| {
                        ConfigError::new(format!("{field}.curves[{i}]"), e.to_string())
                    })?;
                }
            }
            SystemSpec::Quadrotor { .. } => {
                if set.preset.is_some() {
                    return Err(ConfigError::new(
                        format!("{field}.preset"),
                        "only applies to the car",
                    ));
                }
                if !set.curves.is_empty() {
                    return Err(ConfigError::new(
                        format!("{field}.curves"),
                        "only applies to the car",
                    ));
                }
                if let Some(c) = set.quadrotor_circle {
                    if !(c.amplitude.is_finite() && c.rate.is_finite()) {
                        return Err(ConfigError::new(
                            format!("{field}.quadrotor_circle"),
                            "must be finite",
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Dotted key path of the table entry containing byte `offset`, found by
/// scanning headers and keys up to that point.
fn locate(text: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        if pos > offset {
            break;
        }
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            table = trimmed
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            key.clear();
        } else if let Some((k, _)) = trimmed.split_once('=') {
            if !trimmed.starts_with('#') {
                key = k.trim().to_string();
            }
        }
        pos += line.len();
    }
    match (table.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}
