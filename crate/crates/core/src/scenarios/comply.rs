//! Circle tracking with elbow pushes: null-space compliance versus a
//! null-space-rigid baseline.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::Vector3;

use super::config::{ComplySettings, ScenarioConfig, ScenarioKind};
use super::controllers::{CircleReference, NullSpaceMode, TrackingController};
use super::export::{traces, Table};
use super::metrics::{Check, MetricsReport};
use super::reproduce::start_posture;
use super::run::RunOutput;
use crate::error::Result;
use crate::interaction::{tool_down, DampingSpec, OrientationSetpoint};
use crate::robot::{JointVector, RobotModel};
use crate::sim::{PerturbationSchedule, SimConfig, Simulator};

/// One sample per control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSample {
    pub t: f64,
    pub q: JointVector<f64>,
    pub y: Vector3<f64>,
}

pub fn simulate_circle(
    model: &RobotModel<f64>,
    q0: JointVector<f64>,
    mode: NullSpaceMode,
    schedule: PerturbationSchedule,
    settings: &ComplySettings,
    sim_config: &SimConfig,
) -> Result<Vec<CircleSample>> {
    let orientation = OrientationSetpoint {
        desired: tool_down::<f64>(),
        kp: settings.orientation_kp,
        kd: settings.orientation_kd,
    };
    let dt = sim_config.control_period;
    let mut ctl = TrackingController::new(
        settings.circle.clone(),
        DampingSpec::new(Vector3::from(settings.xi)),
        orientation,
        mode,
        dt,
    );
    let config = SimConfig {
        record_every: 0,
        ..sim_config.clone()
    };
    let mut sim = Simulator::new(model.clone(), q0, config, schedule);
    let mut out = Vec::new();
    while sim.state().t < settings.duration {
        sim.run(&mut ctl, dt)?;
        let st = sim.state();
        out.push(CircleSample {
            t: st.t,
            q: st.joints.q,
            y: model.forward_kinematics(&st.joints.q).position,
        });
    }
    Ok(out)
}

/// Continuous phase angle of each sample around the circle centre.
pub fn unwrapped_phase(circle: &CircleReference, run: &[CircleSample]) -> Vec<f64> {
    let c = circle.center();
    let mut out = Vec::with_capacity(run.len());
    let mut prev = 0.0;
    let mut acc = 0.0;
    for (i, s) in run.iter().enumerate() {
        let d = s.y - c;
        let p = d.y.atan2(d.x);
        if i == 0 {
            acc = p;
        } else {
            acc += (p - prev + PI).rem_euclid(2.0 * PI) - PI;
        }
        prev = p;
        out.push(acc);
    }
    out
}

/// Joint deviation of every perturbed sample from the unperturbed run at
/// the same circle phase (linear interpolation between base samples).
pub fn phase_matched_deviation(
    circle: &CircleReference,
    base: &[CircleSample],
    perturbed: &[CircleSample],
) -> Vec<JointVector<f64>> {
    let pb = unwrapped_phase(circle, base);
    let pp = unwrapped_phase(circle, perturbed);
    perturbed
        .iter()
        .zip(&pp)
        .map(|(s, &phase)| {
            let i = pb.partition_point(|x| *x < phase).clamp(1, pb.len() - 1);
            let w = ((phase - pb[i - 1]) / (pb[i] - pb[i - 1]).max(1e-12)).clamp(0.0, 1.0);
            let qb = base[i - 1].q * (1.0 - w) + base[i].q * w;
            s.q - qb
        })
        .collect()
}

/// Distance of `y` from the circle (radial and vertical offsets combined).
pub fn circle_distance(circle: &CircleReference, y: &Vector3<f64>) -> f64 {
    let (r, z) = circle.offset(y);
    (r * r + z * z).sqrt()
}

/// RMS over `t > settle` of the change in distance to the circle caused by
/// the perturbation (time-matched).
pub fn path_deviation_rms(circle: &CircleReference, base: &[CircleSample], perturbed: &[CircleSample], settle: f64) -> f64 {
    let (sum, n) = base
        .iter()
        .zip(perturbed)
        .filter(|(b, _)| b.t > settle)
        .fold((0.0, 0usize), |(s, n), (b, p)| {
            let d = circle_distance(circle, &p.y) - circle_distance(circle, &b.y);
            (s + d * d, n + 1)
        });
    (sum / n.max(1) as f64).sqrt()
}

pub fn run_comply(config: &ScenarioConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let model = config.robot_model()?;
    let s = &config.comply;
    let circle = &s.circle;
    let q0 = start_posture(&model, &circle.point(0.0), &s.ik_seed)?;
    let compliant = NullSpaceMode::Compliant(s.compliance.clone());
    let rigid = NullSpaceMode::Rigid {
        stiffness: s.rigid.stiffness,
        damping: s.rigid.damping,
        posture: q0,
    };
    let none = PerturbationSchedule::default();
    let sched = s.perturbations.clone();
    let sim = &config.sim;
    let base = simulate_circle(&model, q0, compliant.clone(), none.clone(), s, sim)?;
    let pert = simulate_circle(&model, q0, compliant, sched.clone(), s, sim)?;
    let rigid_base = simulate_circle(&model, q0, rigid.clone(), none, s, sim)?;
    let rigid_pert = simulate_circle(&model, q0, rigid, sched, s, sim)?;

    let dev = phase_matched_deviation(circle, &base, &pert);
    let max_dev = dev.iter().map(|d| d.amax()).fold(0.0, f64::max).to_degrees();
    let ee_rms = path_deviation_rms(circle, &base, &pert, s.settle_time);
    let rigid_rms = path_deviation_rms(circle, &rigid_base, &rigid_pert, s.settle_time);
    let settled = |run: &[CircleSample]| run.iter().filter(|x| x.t > s.settle_time).copied().collect::<Vec<_>>();
    let z_peak = settled(&pert)
        .iter()
        .map(|x| (x.y.z - circle.center[2]).abs())
        .fold(0.0, f64::max);
    let tracked = settled(&base);
    let circle_rms = (tracked.iter().map(|x| circle_distance(circle, &x.y).powi(2)).sum::<f64>()
        / tracked.len().max(1) as f64)
        .sqrt();

    let mut report = MetricsReport::new(ScenarioKind::Comply, config.seed);
    report.max_joint_deviation_deg = Some(max_dev);
    report.ee_rms_deviation_mm = Some(ee_rms * 1e3);
    report.rigid_ee_rms_deviation_mm = Some(rigid_rms * 1e3);
    report.z_peak_mm = Some(z_peak * 1e3);
    report.circle_rms_mm = Some(circle_rms * 1e3);
    let l = &config.limits;
    let ratio = if ee_rms > 0.0 { rigid_rms / ee_rms } else { f64::INFINITY };
    report.checks = vec![
        Check::below("circle_rms_mm", circle_rms * 1e3, l.circle_rms_mm),
        Check::at_least("max_joint_deviation_deg", max_dev, l.joint_deviation_deg[0]),
        Check::at_most("max_joint_deviation_deg_upper", max_dev, l.joint_deviation_deg[1]),
        Check::at_least("rigid_to_compliant_ee_ratio", ratio, l.rigid_ratio),
        Check::below("z_peak_mm", z_peak * 1e3, l.z_peak_mm),
    ];

    let mut joints = Table::new(traces::COMPLY_JOINTS.0, traces::COMPLY_JOINTS.1);
    for (x, d) in pert.iter().zip(&dev) {
        let mut row = vec![x.t];
        row.extend(d.iter().map(|v| v.to_degrees()));
        joints.push(row);
    }
    let mut ee = Table::new(traces::COMPLY_EE.0, traces::COMPLY_EE.1);
    for (((b, p), rb), rp) in base.iter().zip(&pert).zip(&rigid_base).zip(&rigid_pert) {
        ee.push(vec![
            p.t,
            p.y.x,
            p.y.y,
            p.y.z,
            p.y.z - circle.center[2],
            circle_distance(circle, &p.y) - circle_distance(circle, &b.y),
            circle_distance(circle, &rp.y) - circle_distance(circle, &rb.y),
        ]);
    }
    report.runtime_s = started.elapsed().as_secs_f64();
    report.checks.push(Check::below("runtime_s", report.runtime_s, l.runtime_s));
    Ok(RunOutput {
        report,
        tables: vec![joints, ee],
        artifacts: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64, phase: f64, q: f64) -> CircleSample {
        let c = CircleReference::default();
        CircleSample {
            t,
            q: JointVector::repeat(q),
            y: c.point(phase),
        }
    }

    #[test]
    fn phase_unwraps_across_pi() {
        let c = CircleReference::default();
        let run: Vec<_> = (0..40).map(|k| sample(k as f64, 0.2 * k as f64, 0.0)).collect();
        let p = unwrapped_phase(&c, &run);
        for (k, v) in p.iter().enumerate() {
            assert!((v - 0.2 * k as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn time_shift_alone_gives_no_phase_matched_deviation() {
        let c = CircleReference::default();
        // joint angle proportional to phase; the perturbed run lags in time
        let base: Vec<_> = (0..100).map(|k| sample(k as f64, 0.05 * k as f64, 0.05 * k as f64)).collect();
        let lagged: Vec<_> = (0..100)
            .map(|k| {
                let phase = 0.05 * (k as f64 - 10.0).max(0.0);
                sample(k as f64, phase, phase)
            })
            .collect();
        let dev = phase_matched_deviation(&c, &base, &lagged);
        assert!(dev.iter().all(|d| d.amax() < 1e-9));
        assert!(path_deviation_rms(&c, &base, &lagged, 0.0) < 1e-12);
    }
}
