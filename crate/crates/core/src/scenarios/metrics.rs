//! Machine-readable run summary, written as `metrics.json`.

use serde::{Deserialize, Serialize};

use super::config::ScenarioKind;
use crate::error::{Error, Result};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// One invariant or threshold evaluated on a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
        }
    }

    pub fn below(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < limit,
            value,
            limit,
        }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= limit,
            value,
            limit,
        }
    }

    pub fn holds(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            limit: 1.0,
        }
    }
}

/// Quantities measured by a run. Fields that a scenario does not produce
/// are omitted from the JSON.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub kind: Option<ScenarioKind>,
    pub seed: u64,
    pub runtime_s: f64,

    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fdm_mean_error_cm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fdm_max_error_cm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit_time_s: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reproduction_mean_error_cm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reproduction_max_error_cm: Option<f64>,
    /// Same run with the EKF correction off.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline_mean_error_cm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub baseline_max_error_cm: Option<f64>,
    /// Time from the end of the last perturbation until the EE is back in
    /// the band for good.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recovery_time_s: Option<f64>,

    /// max/min of the per-axis mean interaction force, optimized stack.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub isotropy_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub isotropy_ratio_baseline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub axis_force_n: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub axis_force_baseline_n: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_r_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r_thr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub peak_resistance_force_n: Option<f64>,

    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_joint_deviation_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ee_rms_deviation_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rigid_ee_rms_deviation_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z_peak_mm: Option<f64>,
    /// Unperturbed circle tracking RMS error.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub circle_rms_mm: Option<f64>,

    pub checks: Vec<Check>,
}

impl MetricsReport {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        Self {
            schema_version: METRICS_SCHEMA_VERSION,
            kind: Some(kind),
            seed,
            ..Self::default()
        }
    }

    fn values(&self) -> Vec<f64> {
        let mut v = vec![self.runtime_s];
        v.extend(
            [
                self.fdm_mean_error_cm,
                self.fdm_max_error_cm,
                self.fit_time_s,
                self.reproduction_mean_error_cm,
                self.reproduction_max_error_cm,
                self.baseline_mean_error_cm,
                self.baseline_max_error_cm,
                self.recovery_time_s,
                self.isotropy_ratio,
                self.isotropy_ratio_baseline,
                self.min_r_min,
                self.r_thr,
                self.peak_resistance_force_n,
                self.max_joint_deviation_deg,
                self.ee_rms_deviation_mm,
                self.rigid_ee_rms_deviation_mm,
                self.z_peak_mm,
                self.circle_rms_mm,
            ]
            .into_iter()
            .flatten(),
        );
        for f in [self.axis_force_n, self.axis_force_baseline_n].into_iter().flatten() {
            v.extend(f);
        }
        v
    }

    /// Every measured quantity is finite and non-negative.
    pub fn is_well_formed(&self) -> bool {
        self.schema_version == METRICS_SCHEMA_VERSION && self.values().iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn passed(&self) -> bool {
        self.is_well_formed() && self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if r.schema_version != METRICS_SCHEMA_VERSION {
            return Err(Error::Parse(format!("unsupported metrics schema {}", r.schema_version)));
        }
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_absent_fields() {
        let mut r = MetricsReport::new(ScenarioKind::Comply, 3);
        r.z_peak_mm = Some(4.2);
        r.checks.push(Check::below("z_peak_mm", 4.2, 5.0));
        let text = r.to_json();
        assert!(!text.contains("isotropy_ratio"));
        assert_eq!(MetricsReport::from_json(&text).unwrap(), r);
        assert!(r.passed());
    }

    #[test]
    fn negative_values_are_not_well_formed() {
        let mut r = MetricsReport::new(ScenarioKind::Learn, 0);
        r.fdm_mean_error_cm = Some(-0.1);
        assert!(!r.is_well_formed() && !r.passed());
        r.fdm_mean_error_cm = Some(f64::NAN);
        assert!(!r.is_well_formed());
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let mut r = MetricsReport::new(ScenarioKind::Learn, 0);
        r.schema_version = 99;
        assert!(MetricsReport::from_json(&r.to_json()).is_err());
    }

    #[test]
    fn check_constructors() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::below("a", 1.0, 1.0).passed);
        assert!(Check::at_least("a", 1.0, 1.0).passed);
        assert!(!Check::holds("a", false).passed);
    }
}
