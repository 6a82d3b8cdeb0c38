//! Scenario configuration, stored as TOML.
//!
//! Relative paths are resolved against the directory of the configuration
//! file by [`ScenarioConfig::load`]. Every section has defaults, so an empty
//! file with only `kind` set is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::controllers::CircleReference;
use super::shapes::{Shape, ShapeParams};
use crate::compliance::ComplianceGains;
use crate::error::{Error, Result};
use crate::fdm::FitConfig;
use crate::motion::{EkfConfig, VelocityModulation};
use crate::nullspace_opt::OptimizationWeights;
use crate::robot::{RobotModel, DOF};
use crate::sim::{
    ForceDirection, HandParams, PerturbationEvent, PerturbationSchedule, PerturbationTarget, Profile, SimConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Learn,
    Reproduce,
    Teach,
    Comply,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Learn => "learn",
            ScenarioKind::Reproduce => "reproduce",
            ScenarioKind::Teach => "teach",
            ScenarioKind::Comply => "comply",
        }
    }
}

/// Default IK seed for tool-down postures in front of the robot (+x).
pub const FRONT_SEED: [f64; DOF] = [0.0, 0.6, 0.0, -1.4, 0.0, 1.1, 0.0];
/// Default IK seed for tool-down postures behind the robot (−x).
pub const BACK_SEED: [f64; DOF] = [0.0, -0.6, 0.0, 1.4, 0.0, -1.1, 0.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnSettings {
    /// Demonstration CSV (`t,x,y,z`). When absent the built-in `shape` is
    /// synthesized.
    pub demo: Option<PathBuf>,
    pub shape: Shape,
    pub shape_params: ShapeParams,
    /// Added to every demonstrated point (m); places the demo in the
    /// robot workspace.
    pub workspace_offset: [f64; 3],
    /// Resampled demonstration length N.
    pub samples: usize,
    pub fit: FitConfig,
    /// Adaptation parameters for ζ; the `zeta` field is ignored (the
    /// adaptation starts from the least-squares speed gain).
    pub modulation: VelocityModulation<f64>,
}

impl Default for LearnSettings {
    fn default() -> Self {
        Self {
            demo: None,
            shape: Shape::Trapezoid,
            shape_params: ShapeParams::default(),
            workspace_offset: [0.55, 0.0, 0.25],
            samples: 400,
            fit: FitConfig::default(),
            modulation: VelocityModulation::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReproduceSettings {
    /// Skill file written by `learn`. When absent the skill is learned in
    /// process from the `[learn]` section.
    pub skill: Option<PathBuf>,
    pub ekf_enabled: bool,
    pub ekf: EkfConfig,
    /// Also run the EKF-off reproduction and report it as the baseline.
    pub compare_baseline: bool,
    /// Principal damping values Ξ (N·s/m).
    pub xi: [f64; 3],
    pub orientation_kp: f64,
    pub orientation_kd: f64,
    pub compliance: ComplianceGains,
    pub ik_seed: [f64; DOF],
    /// Upper bound on simulated time (s).
    pub max_duration: f64,
    /// The run ends once the EE is this close to the goal (m).
    pub goal_tolerance: f64,
    /// Half-width of the band used for the recovery time (m).
    pub band: f64,
    pub perturbations: PerturbationSchedule,
}

impl Default for ReproduceSettings {
    fn default() -> Self {
        Self {
            skill: None,
            ekf_enabled: true,
            ekf: EkfConfig::default(),
            compare_baseline: true,
            xi: [30.0; 3],
            orientation_kp: 20.0,
            orientation_kd: 2.0,
            compliance: ComplianceGains::default(),
            ik_seed: FRONT_SEED,
            max_duration: 30.0,
            goal_tolerance: 0.002,
            band: 0.02,
            perturbations: PerturbationSchedule::default(),
        }
    }
}

/// The end-effector pulse used for the recovery measurement.
pub fn ee_pulse(start: f64, duration: f64, force: [f64; 3]) -> PerturbationSchedule {
    let magnitude = (force[0] * force[0] + force[1] * force[1] + force[2] * force[2]).sqrt();
    PerturbationSchedule {
        events: vec![PerturbationEvent {
            start,
            end: start + duration,
            target: PerturbationTarget::EndEffector,
            magnitude,
            direction: ForceDirection::Fixed(force),
            profile: Profile::Constant,
        }],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PullSettings {
    pub enabled: bool,
    pub start: [f64; 3],
    /// Displacement of the hand target over the pull (m).
    pub displacement: [f64; 3],
    pub start_time: f64,
    pub duration: f64,
    /// The hand stops advancing this far past the point where the gate
    /// opened (m).
    pub stop: f64,
    /// Simulated time after the hand stops (s).
    pub hold: f64,
}

impl Default for PullSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            start: [0.45, -0.1, 0.35],
            displacement: [0.6, 0.0, 0.0],
            start_time: 4.0,
            duration: 12.0,
            stop: 0.07,
            hold: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeachSettings {
    pub weights: OptimizationWeights,
    pub hand: HandParams,
    /// Target damping D_d and inertia Λ_d of the variable damping.
    pub target_damping: [f64; 3],
    pub target_inertia: [f64; 3],
    pub hold_orientation: bool,
    pub ik_seed: [f64; DOF],
    /// Number of random L-shape placements pooled into the statistics.
    pub placements: usize,
    /// Box the path start point is drawn from (m).
    pub region_min: [f64; 3],
    pub region_max: [f64; 3],
    pub segment_length: f64,
    pub segment_time: f64,
    /// Repetitions of each L-shape.
    pub cycles: usize,
    /// Hand holds still while the initial optimization phase runs (s).
    pub start_time: f64,
    pub pull: PullSettings,
}

impl Default for TeachSettings {
    fn default() -> Self {
        Self {
            weights: OptimizationWeights::default(),
            hand: HandParams::default(),
            target_damping: [15.0; 3],
            target_inertia: [4.0; 3],
            hold_orientation: false,
            ik_seed: FRONT_SEED,
            placements: 8,
            region_min: [0.4, -0.2, 0.25],
            region_max: [0.55, 0.0, 0.4],
            segment_length: 0.2,
            segment_time: 2.0,
            cycles: 5,
            start_time: 3.0,
            pull: PullSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigidBaseline {
    pub stiffness: f64,
    pub damping: f64,
}

impl Default for RigidBaseline {
    fn default() -> Self {
        Self {
            stiffness: 500.0,
            damping: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComplySettings {
    pub circle: CircleReference,
    pub xi: [f64; 3],
    pub orientation_kp: f64,
    pub orientation_kd: f64,
    pub compliance: ComplianceGains,
    pub rigid: RigidBaseline,
    pub ik_seed: [f64; DOF],
    pub duration: f64,
    /// Start-up transient excluded from the path statistics (s).
    pub settle_time: f64,
    pub perturbations: PerturbationSchedule,
}

/// Two opposite swivel pushes at the elbow, 0.3 s each.
pub fn elbow_pulses(magnitude: f64, times: &[f64]) -> PerturbationSchedule {
    PerturbationSchedule {
        events: times
            .iter()
            .enumerate()
            .map(|(i, &t)| PerturbationEvent {
                start: t,
                end: t + 0.3,
                target: PerturbationTarget::LinkPoint(3),
                magnitude: if i % 2 == 0 { magnitude } else { -magnitude },
                direction: ForceDirection::ArmPlaneNormal,
                profile: Profile::Constant,
            })
            .collect(),
    }
}

impl Default for ComplySettings {
    fn default() -> Self {
        Self {
            circle: CircleReference {
                radial_gain: 30.0,
                height_gain: 30.0,
                ..CircleReference::default()
            },
            xi: [100.0; 3],
            orientation_kp: 20.0,
            orientation_kd: 2.0,
            compliance: ComplianceGains {
                alpha_d: 1.0,
                ..ComplianceGains::default()
            },
            rigid: RigidBaseline::default(),
            ik_seed: BACK_SEED,
            duration: 12.0,
            settle_time: 2.0,
            perturbations: elbow_pulses(27.0, &[4.0, 8.0]),
        }
    }
}

/// Pass/fail thresholds applied to a run's metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub fdm_mean_error_cm: f64,
    pub fit_time_s: f64,
    pub reproduction_mean_error_cm: f64,
    pub recovery_time_s: f64,
    /// Smallest admissible min r_min as a fraction of r_thr.
    pub r_min_fraction: f64,
    pub joint_deviation_deg: [f64; 2],
    /// Required ratio of rigid-baseline to compliant EE RMS deviation.
    pub rigid_ratio: f64,
    pub z_peak_mm: f64,
    pub circle_rms_mm: f64,
    pub runtime_s: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            fdm_mean_error_cm: 0.3,
            fit_time_s: 5.0,
            reproduction_mean_error_cm: 2.0,
            recovery_time_s: 3.0,
            r_min_fraction: 0.9,
            joint_deviation_deg: [10.0, 90.0],
            rigid_ratio: 10.0,
            z_peak_mm: 5.0,
            circle_rms_mm: 5.0,
            runtime_s: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    #[serde(default)]
    pub seed: u64,
    /// Output directory; the CLI falls back to its output root.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Robot description (TOML); the built-in 7-DOF arm when absent.
    #[serde(default)]
    pub robot: Option<PathBuf>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub learn: LearnSettings,
    #[serde(default)]
    pub reproduce: ReproduceSettings,
    #[serde(default)]
    pub teach: TeachSettings,
    #[serde(default)]
    pub comply: ComplySettings,
    #[serde(default)]
    pub limits: Limits,
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            seed: 0,
            output_dir: None,
            robot: None,
            sim: SimConfig::default(),
            learn: LearnSettings::default(),
            reproduce: ReproduceSettings::default(),
            teach: TeachSettings::default(),
            comply: ComplySettings::default(),
            limits: Limits::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Parses, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.output_dir,
            &mut self.robot,
            &mut self.learn.demo,
            &mut self.reproduce.skill,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn robot_model(&self) -> Result<RobotModel<f64>> {
        match &self.robot {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
                RobotModel::from_toml_str(&text)
            }
            None => Ok(RobotModel::lwr_like()),
        }
    }

    /// Checks that referenced files exist and parameters are in range.
    pub fn validate(&self) -> Result<()> {
        for p in [&self.robot, &self.learn.demo, &self.reproduce.skill].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::InvalidInput(format!("file not found: {}", p.display())));
            }
        }
        let bad = |what: &str| Err(Error::InvalidInput(format!("out of range: {what}")));
        let s = &self.sim;
        if !(s.dt > 0.0 && s.control_period >= s.dt && s.abort_factor > 0.0 && s.friction.is_valid()) {
            return bad("sim");
        }
        let l = &self.learn;
        if l.samples < 3 || !l.workspace_offset.iter().all(|v| v.is_finite()) {
            return bad("learn.samples / learn.workspace_offset");
        }
        l.fit.validate()?;
        let m = &l.modulation;
        if !(m.eta >= 0.0 && m.epsilon >= 0.0 && m.clamp >= 0.0 && m.window > 0) {
            return bad("learn.modulation");
        }
        let r = &self.reproduce;
        if !(nonneg(&r.xi)
            && r.orientation_kp >= 0.0
            && r.orientation_kd >= 0.0
            && r.max_duration > 0.0
            && r.goal_tolerance > 0.0
            && r.band > 0.0
            && r.ekf.horizon > 0.0
            && r.perturbations.is_valid())
        {
            return bad("reproduce");
        }
        let t = &self.teach;
        if !(t.placements > 0
            && t.segment_length > 0.0
            && t.segment_time > 0.0
            && t.cycles > 0
            && t.start_time >= 0.0
            && t.weights.r_thr > 0.0
            && t.weights.grad_limit > 0.0
            && nonneg(&t.target_damping)
            && t.target_inertia.iter().all(|v| *v > 0.0)
            && (0..3).all(|i| t.region_min[i] <= t.region_max[i])
            && t.pull.duration > 0.0
            && t.pull.stop > 0.0)
        {
            return bad("teach");
        }
        let c = &self.comply;
        if !(c.circle.radius > 0.0
            && c.circle.speed > 0.0
            && nonneg(&c.xi)
            && c.duration > c.settle_time
            && c.rigid.stiffness >= 0.0
            && c.rigid.damping >= 0.0
            && c.compliance.alpha_d >= 0.0
            && c.perturbations.is_valid())
        {
            return bad("comply");
        }
        Ok(())
    }
}

fn nonneg(v: &[f64]) -> bool {
    v.iter().all(|x| *x >= 0.0 && x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_is_identity() {
        for kind in [ScenarioKind::Learn, ScenarioKind::Reproduce, ScenarioKind::Teach, ScenarioKind::Comply] {
            let mut c = ScenarioConfig::new(kind);
            c.seed = 42;
            c.output_dir = Some(PathBuf::from("out/x"));
            c.reproduce.perturbations = ee_pulse(3.0, 0.5, [0.0, 20.0, 0.0]);
            let text = c.to_toml_string().unwrap();
            let parsed = ScenarioConfig::from_toml_str(&text).unwrap();
            assert_eq!(parsed, c);
            assert_eq!(parsed.to_toml_string().unwrap(), text);
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let c = ScenarioConfig::from_toml_str("kind = \"teach\"\n").unwrap();
        assert_eq!(c, ScenarioConfig::new(ScenarioKind::Teach));
        c.validate().unwrap();
    }

    #[test]
    fn missing_demo_file_is_rejected() {
        let mut c = ScenarioConfig::new(ScenarioKind::Learn);
        c.learn.demo = Some(PathBuf::from("/nonexistent/demo.csv"));
        assert!(matches!(c.validate(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn out_of_range_gain_is_rejected() {
        let mut c = ScenarioConfig::new(ScenarioKind::Comply);
        c.comply.xi = [-1.0, 1.0, 1.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_kind_is_a_parse_error() {
        assert!(matches!(ScenarioConfig::from_toml_str("kind = \"dance\""), Err(Error::Parse(_))));
    }
}
