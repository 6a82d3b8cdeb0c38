//! Closed-loop reproduction of a learned skill on the simulated arm.

use std::time::Instant;

use nalgebra::Vector3;

use super::config::{ReproduceSettings, ScenarioConfig, ScenarioKind};
use super::controllers::{NullSpaceMode, TrackingController};
use super::export::{traces, Table};
use super::learn::{learn_skill, Skill};
use super::metrics::{Check, MetricsReport};
use super::run::RunOutput;
use crate::error::{Error, Result};
use crate::interaction::{tool_down, DampingSpec, OrientationSetpoint};
use crate::motion::{ReproductionConfig, Reproducer};
use crate::robot::{JointVector, RobotModel};
use crate::sim::{SimConfig, Simulator};

/// Path statistics of one reproduction run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproductionRun {
    pub mean_error: f64,
    pub max_error: f64,
    /// Seconds after the last perturbation ends until the EE is inside the
    /// band for good; `None` without perturbations.
    pub recovery_time: Option<f64>,
    pub reached_goal: bool,
    pub trace: Table,
    /// Smallest eigenvalue of the EKF covariance seen during the run.
    pub min_covariance_eig: f64,
}

pub fn start_posture(model: &RobotModel<f64>, position: &Vector3<f64>, seed: &[f64]) -> Result<JointVector<f64>> {
    let seed = JointVector::from_row_slice(seed);
    let (q, err) = model.inverse_kinematics(position, &tool_down::<f64>(), &seed, 500);
    if err > 1e-6 {
        return Err(Error::InvalidInput(format!(
            "start point {:?} is not reachable tool-down (IK error {err:.2e} m)",
            position.as_slice()
        )));
    }
    Ok(q)
}

/// Simulates one reproduction of `skill` with the EKF on or off.
pub fn simulate_reproduction(
    model: &RobotModel<f64>,
    skill: &Skill,
    settings: &ReproduceSettings,
    sim_config: &SimConfig,
    ekf_enabled: bool,
) -> Result<ReproductionRun> {
    let demo = &skill.demo;
    let reproducer = Reproducer::new(
        skill.phi.clone(),
        skill.zeta,
        demo.clone(),
        ReproductionConfig {
            ekf_enabled,
            ekf: settings.ekf.clone(),
            ..ReproductionConfig::default()
        },
    );
    let q0 = start_posture(model, &demo.start(), &settings.ik_seed)?;
    let orientation = OrientationSetpoint {
        desired: tool_down::<f64>(),
        kp: settings.orientation_kp,
        kd: settings.orientation_kd,
    };
    let dt = sim_config.control_period;
    let mut controller = TrackingController::new(
        reproducer,
        DampingSpec::new(Vector3::from(settings.xi)),
        orientation,
        NullSpaceMode::Compliant(settings.compliance.clone()),
        dt,
    );
    let sim_config = SimConfig {
        record_every: 0,
        ..sim_config.clone()
    };
    let schedule = settings.perturbations.clone();
    let release = (!schedule.events.is_empty()).then(|| schedule.last_end());
    let mut sim = Simulator::new(model.clone(), q0, sim_config, schedule);

    let (name, columns) = if ekf_enabled { traces::REPRODUCTION } else { traces::BASELINE };
    let mut trace = Table::new(name, columns);
    let (mut sum, mut n, mut max) = (0.0, 0usize, 0.0f64);
    let mut last_outside: Option<f64> = None;
    let mut min_eig = f64::INFINITY;
    let mut reached_goal = false;
    // keep running a while after the last perturbation so recovery is observed
    let min_time = release.map_or(1.0, |r| r + 1.0);
    while sim.state().t < settings.max_duration {
        sim.run(&mut controller, dt)?;
        let t = sim.state().t;
        let y = model.forward_kinematics(&sim.state().joints.q).position;
        let e = demo.distance_to(&y);
        sum += e;
        n += 1;
        max = max.max(e);
        if release.is_some_and(|r| t >= r) && e > settings.band {
            last_outside = Some(t);
        }
        let ekf = controller.reference.ekf();
        min_eig = min_eig.min(ekf.p.symmetric_eigenvalues().min());
        let mut row = vec![t, y.x, y.y, y.z, e];
        if ekf_enabled {
            row.extend([ekf.b.x, ekf.b.y, ekf.b.z]);
        }
        trace.push(row);
        if t >= min_time && (y - demo.goal()).norm() < settings.goal_tolerance {
            reached_goal = true;
            break;
        }
    }
    let recovery_time = release.map(|r| last_outside.map_or(0.0, |t| t - r));
    Ok(ReproductionRun {
        mean_error: sum / n.max(1) as f64,
        max_error: max,
        recovery_time,
        reached_goal,
        trace,
        min_covariance_eig: min_eig,
    })
}

pub fn load_or_learn(config: &ScenarioConfig) -> Result<Skill> {
    match &config.reproduce.skill {
        Some(path) => Skill::load(path),
        None => Ok(learn_skill(&config.learn)?.skill),
    }
}

pub fn run_reproduce(config: &ScenarioConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let model = config.robot_model()?;
    let skill = load_or_learn(config)?;
    let settings = &config.reproduce;
    let main = simulate_reproduction(&model, &skill, settings, &config.sim, settings.ekf_enabled)?;

    let mut report = MetricsReport::new(ScenarioKind::Reproduce, config.seed);
    report.reproduction_mean_error_cm = Some(main.mean_error * 100.0);
    report.reproduction_max_error_cm = Some(main.max_error * 100.0);
    report.recovery_time_s = main.recovery_time;
    let limits = &config.limits;
    report.checks.push(Check::at_most(
        "reproduction_mean_error_cm",
        main.mean_error * 100.0,
        limits.reproduction_mean_error_cm,
    ));
    report.checks.push(Check::holds("reached_goal", main.reached_goal));
    if settings.ekf_enabled {
        report
            .checks
            .push(Check::holds("ekf_covariance_spd", main.min_covariance_eig > 0.0));
    }
    if let Some(r) = main.recovery_time {
        report.checks.push(Check::at_most("recovery_time_s", r, limits.recovery_time_s));
    }

    let mut demo = Table::new(traces::DEMO.0, traces::DEMO.1);
    for p in &skill.demo.points {
        demo.push(vec![p.x, p.y, p.z]);
    }
    let mut tables = vec![demo, main.trace];
    if settings.compare_baseline && settings.ekf_enabled {
        let base = simulate_reproduction(&model, &skill, settings, &config.sim, false)?;
        report.baseline_mean_error_cm = Some(base.mean_error * 100.0);
        report.baseline_max_error_cm = Some(base.max_error * 100.0);
        report.checks.push(Check::holds(
            "ekf_beats_baseline",
            main.mean_error < base.mean_error,
        ));
        tables.push(base.trace);
    }
    report.runtime_s = started.elapsed().as_secs_f64();
    Ok(RunOutput {
        report,
        tables,
        artifacts: Vec::new(),
    })
}
