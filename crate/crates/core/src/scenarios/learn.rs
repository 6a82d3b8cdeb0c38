//! Learning a skill from one demonstration: resample, fit the
//! diffeomorphism, adapt ζ.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::config::{LearnSettings, Limits, ScenarioConfig, ScenarioKind};
use super::export::{traces, Table};
use super::metrics::{Check, MetricsReport};
use super::run::RunOutput;
use super::shapes::raw_demo;
use crate::error::{Error, Result};
use crate::fdm::{
    fit, read_model, read_samples_csv, resample, source_line, write_model, write_samples_csv, DemonstrationPath,
    Diffeomorphism, FitReport, TimedSample,
};
use crate::motion::{adapt_zeta, fit_speed_gain, VelocityModulation};

pub const SKILL_FORMAT_VERSION: u32 = 1;

/// A learned skill: diffeomorphism, gain matrix and the demonstration it
/// reproduces (robot frame).
#[derive(Debug, Clone)]
pub struct Skill {
    pub phi: Diffeomorphism<f64>,
    pub zeta: Matrix3<f64>,
    pub demo: DemonstrationPath<f64>,
    pub speed_gain: f64,
}

/// On-disk index of a skill; paths are relative to the skill file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillFile {
    pub version: u32,
    pub model: PathBuf,
    pub demo: PathBuf,
    /// ζ row by row.
    pub zeta: [[f64; 3]; 3],
    pub speed_gain: f64,
}

pub const SKILL_FILE: &str = "skill.toml";
pub const MODEL_FILE: &str = "model.fdm";
pub const DEMO_FILE: &str = "demo.csv";

impl Skill {
    pub fn index(&self) -> SkillFile {
        SkillFile {
            version: SKILL_FORMAT_VERSION,
            model: MODEL_FILE.into(),
            demo: DEMO_FILE.into(),
            zeta: std::array::from_fn(|r| std::array::from_fn(|c| self.zeta[(r, c)])),
            speed_gain: self.speed_gain,
        }
    }

    /// Text artifacts (file name, contents) making up the skill.
    pub fn artifacts(&self) -> Result<Vec<(String, String)>> {
        let mut model = Vec::new();
        write_model(&mut model, &self.phi)?;
        let mut demo = Vec::new();
        write_samples_csv(&mut demo, &self.demo.samples())?;
        let index = toml::to_string(&self.index()).map_err(|e| Error::Parse(e.to_string()))?;
        let utf8 = |b: Vec<u8>| String::from_utf8(b).expect("ascii output");
        Ok(vec![
            (MODEL_FILE.into(), utf8(model)),
            (DEMO_FILE.into(), utf8(demo)),
            (SKILL_FILE.into(), index),
        ])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        let index: SkillFile = toml::from_str(&text).map_err(|e| Error::Parse(e.to_string()))?;
        if index.version != SKILL_FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported skill version {}", index.version)));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let open = |p: &Path| {
            let p = base.join(p);
            fs::File::open(&p)
                .map(BufReader::new)
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", p.display())))
        };
        let phi = read_model(open(&index.model)?)?;
        let samples: Vec<TimedSample<f64>> = read_samples_csv(open(&index.demo)?)?;
        if samples.len() < 2 {
            return Err(Error::DegenerateDemo("skill demo has fewer than 2 points".into()));
        }
        let dt = samples[1].t - samples[0].t;
        let demo = DemonstrationPath::from_points(samples.iter().map(|s| s.position).collect(), dt)?;
        let zeta = Matrix3::from_fn(|r, c| index.zeta[r][c]);
        Ok(Self {
            phi,
            zeta,
            demo,
            speed_gain: index.speed_gain,
        })
    }
}

/// Raw demonstration from the configured file or generator, shifted into
/// the workspace.
pub fn raw_demonstration(settings: &LearnSettings) -> Result<Vec<TimedSample<f64>>> {
    let offset = Vector3::from(settings.workspace_offset);
    match &settings.demo {
        Some(path) => {
            let file = fs::File::open(path)
                .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
            let mut raw: Vec<TimedSample<f64>> = read_samples_csv(BufReader::new(file))?;
            raw.iter_mut().for_each(|s| s.position += offset);
            Ok(raw)
        }
        None => Ok(raw_demo(settings.shape, &settings.shape_params, &offset)),
    }
}

/// Result of [`learn_skill`].
pub struct Learned {
    pub skill: Skill,
    pub report: FitReport<f64>,
    pub fit_time_s: f64,
}

pub fn learn_skill(settings: &LearnSettings) -> Result<Learned> {
    let raw = raw_demonstration(settings)?;
    let demo = resample(&raw, settings.samples)?;
    let x = source_line(&demo)?;
    let started = Instant::now();
    let (phi, report) = fit(&x, &demo.points, &settings.fit)?;
    let fit_time_s = started.elapsed().as_secs_f64();
    let speed_gain = fit_speed_gain(&demo, &phi)?;
    let params = VelocityModulation {
        zeta: Matrix3::identity() * speed_gain,
        ..settings.modulation.clone()
    };
    let zeta = adapt_zeta(&demo, &phi, &params)?;
    Ok(Learned {
        skill: Skill {
            phi,
            zeta,
            demo,
            speed_gain,
        },
        report,
        fit_time_s,
    })
}

/// Largest `‖Φ⁻¹(Φ(x)) − x‖` and smallest `det J_Φ` over the source line.
pub fn diffeomorphism_checks(skill: &Skill) -> Result<(f64, f64)> {
    let x = source_line(&skill.demo)?;
    let mut worst = 0.0f64;
    let mut min_det = f64::INFINITY;
    for p in &x {
        let (y, j) = skill.phi.apply_with_jacobian(p);
        worst = worst.max((skill.phi.inverse(&y)? - p).norm());
        min_det = min_det.min(j.determinant());
    }
    Ok((worst, min_det))
}

pub fn run_learn(config: &ScenarioConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let learned = learn_skill(&config.learn)?;
    let skill = &learned.skill;
    let (mean, max) = learned.report.final_error;
    let (round_trip, min_det) = diffeomorphism_checks(skill)?;

    let mut report = MetricsReport::new(ScenarioKind::Learn, config.seed);
    report.fdm_mean_error_cm = Some(mean * 100.0);
    report.fdm_max_error_cm = Some(max * 100.0);
    report.fit_time_s = Some(learned.fit_time_s);
    let limits: &Limits = &config.limits;
    report.checks = vec![
        Check::at_most("fdm_mean_error_cm", mean * 100.0, limits.fdm_mean_error_cm),
        Check::below("fit_time_s", learned.fit_time_s, limits.fit_time_s),
        Check::holds("rho_cap", skill.phi.respects_rho_cap()),
        Check::at_most("round_trip_m", round_trip, 1e-8),
        Check::holds("jacobian_det_positive", min_det > 0.0),
        Check::holds(
            "fit_trace_monotone",
            learned.report.objective.windows(2).all(|w| w[1] <= w[0]),
        ),
    ];

    let mut demo = Table::new(traces::DEMO.0, traces::DEMO.1);
    for p in &skill.demo.points {
        demo.push(vec![p.x, p.y, p.z]);
    }
    let mut fit_trace = Table::new("fit", &["translation", "objective", "mean_error"]);
    for (k, (o, e)) in learned.report.objective.iter().zip(&learned.report.mean_error).enumerate() {
        fit_trace.push(vec![(k + 1) as f64, *o, *e]);
    }
    report.runtime_s = started.elapsed().as_secs_f64();
    Ok(RunOutput {
        report,
        tables: vec![demo, fit_trace],
        artifacts: skill.artifacts()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::shapes::Shape;

    #[test]
    fn skill_files_round_trip() {
        let settings = LearnSettings {
            shape: Shape::W,
            fit: crate::fdm::FitConfig {
                translations: 20,
                ..Default::default()
            },
            ..Default::default()
        };
        let skill = learn_skill(&settings).unwrap().skill;
        let dir = std::env::temp_dir().join(format!("skill-rt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        for (name, text) in skill.artifacts().unwrap() {
            fs::write(dir.join(name), text).unwrap();
        }
        let back = Skill::load(&dir.join(SKILL_FILE)).unwrap();
        assert_eq!(back.phi, skill.phi);
        assert_eq!(back.zeta, skill.zeta);
        assert_eq!(back.demo.points, skill.demo.points);
        assert_eq!(back.demo.dt, skill.demo.dt);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn straight_demo_needs_no_bending() {
        let dir = std::env::temp_dir().join(format!("line-demo-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("line.csv");
        let raw: Vec<TimedSample<f64>> = (0..50)
            .map(|i| TimedSample {
                t: i as f64 * 0.1,
                position: Vector3::new(0.004 * i as f64, 0.0, 0.002 * i as f64),
            })
            .collect();
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &raw).unwrap();
        fs::write(&path, buf).unwrap();
        let mut config = ScenarioConfig::new(ScenarioKind::Learn);
        config.learn.demo = Some(path);
        let out = run_learn(&config).unwrap();
        assert!(out.report.fdm_mean_error_cm.unwrap() < 1e-9);
        assert!(out.report.passed());
        fs::remove_dir_all(&dir).ok();
    }
}
