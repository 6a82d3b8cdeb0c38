//! Kinesthetic teaching with a simulated hand: L-shape isotropy study and
//! the singularity pull.

use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{ScenarioConfig, ScenarioKind, TeachSettings};
use super::controllers::{HandPath, TeachController};
use super::export::{traces, Table};
use super::metrics::{Check, MetricsReport};
use super::reproduce::start_posture;
use super::run::RunOutput;
use crate::error::Result;
use crate::robot::RobotModel;
use crate::sim::{PerturbationSchedule, SimConfig, Simulator};

/// Path start points drawn uniformly from the configured region.
pub fn placements(settings: &TeachSettings, seed: u64) -> Vec<Vector3<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..settings.placements)
        .map(|_| {
            Vector3::from_fn(|i, _| {
                let (lo, hi) = (settings.region_min[i], settings.region_max[i]);
                if hi > lo {
                    rng.random_range(lo..hi)
                } else {
                    lo
                }
            })
        })
        .collect()
}

/// Two L-shapes from `a`: one in the XY plane, one in the YZ plane, each
/// traced `cycles` times out and back.
pub fn l_shape_path(a: Vector3<f64>, settings: &TeachSettings) -> HandPath {
    let l = settings.segment_length;
    let b = a + Vector3::x() * l;
    let c = b + Vector3::y() * l;
    let d = a + Vector3::y() * l;
    let e = d + Vector3::z() * l;
    let mut waypoints = vec![a];
    for _ in 0..settings.cycles {
        waypoints.extend([b, c, b, a]);
    }
    for _ in 0..settings.cycles {
        waypoints.extend([d, e, d, a]);
    }
    HandPath {
        waypoints,
        segment_time: settings.segment_time,
        start_time: settings.start_time,
    }
}

/// Per-axis interaction-force statistics of one or more teaching runs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AxisForces {
    pub sum: [f64; 3],
    pub count: [usize; 3],
}

impl AxisForces {
    pub fn add(&mut self, other: &AxisForces) {
        for i in 0..3 {
            self.sum[i] += other.sum[i];
            self.count[i] += other.count[i];
        }
    }

    pub fn means(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.sum[i] / self.count[i].max(1) as f64)
    }

    /// max/min of the per-axis means over the axes that were traversed.
    pub fn isotropy_ratio(&self) -> f64 {
        let m: Vec<f64> = (0..3).filter(|&i| self.count[i] > 0).map(|i| self.means()[i]).collect();
        let max = m.iter().cloned().fold(0.0, f64::max);
        let min = m.iter().cloned().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    }
}

pub struct TeachRun {
    pub forces: AxisForces,
    pub min_r_min: f64,
    pub trace: Option<Table>,
}

fn controller(path: HandPath, settings: &TeachSettings, optimized: bool, dt: f64) -> TeachController {
    let mut c = TeachController::new(path, settings.hand.clone(), optimized, settings.weights.clone(), dt);
    c.target_damping = Vector3::from(settings.target_damping);
    c.target_inertia = Vector3::from(settings.target_inertia);
    c.hold_orientation = settings.hold_orientation;
    c
}

/// Traces `path` with the hand, on the optimized stack or the
/// gravity-compensation-only baseline. On each segment the force along
/// the segment's axis is accumulated for that axis.
pub fn simulate_teach(
    model: &RobotModel<f64>,
    path: &HandPath,
    settings: &TeachSettings,
    sim_config: &SimConfig,
    optimized: bool,
    record: bool,
) -> Result<TeachRun> {
    let q0 = start_posture(model, &path.waypoints[0], &settings.ik_seed)?;
    let dt = sim_config.control_period;
    let mut ctl = controller(path.clone(), settings, optimized, dt);
    let config = SimConfig {
        record_every: 0,
        ..sim_config.clone()
    };
    let mut sim = Simulator::new(model.clone(), q0, config, PerturbationSchedule::default());
    let name = if optimized { traces::TEACH_OPT } else { traces::TEACH_GC };
    let mut trace = record.then(|| Table::new(name.0, name.1));
    let mut forces = AxisForces::default();
    let mut min_r_min = f64::INFINITY;
    while sim.state().t < path.end_time() {
        sim.run(&mut ctl, dt)?;
        let t = sim.state().t;
        if let Some(terms) = &ctl.last_terms {
            min_r_min = min_r_min.min(terms.r_min);
        }
        let Some(s) = path.segment(t) else { continue };
        let axis = (path.waypoints[s + 1] - path.waypoints[s]).iamax();
        let f = ctl.hand_force;
        forces.sum[axis] += f[axis].abs();
        forces.count[axis] += 1;
        if let Some(tr) = trace.as_mut() {
            let st = sim.state();
            let v = model.translational_jacobian(&st.joints.q) * st.joints.qdot;
            tr.push(vec![t, f.x, f.y, f.z, v.x, v.y, v.z, axis as f64]);
        }
    }
    Ok(TeachRun {
        forces,
        min_r_min,
        trace,
    })
}

#[derive(Debug, Clone)]
pub struct PullRun {
    pub min_r_min: f64,
    pub peak_force: f64,
    /// Hand force never decreased while the gate was open and the hand
    /// still advancing.
    pub monotone: bool,
    pub gate_opened: bool,
    pub trace: Table,
}

/// Pulls the end effector toward the workspace boundary on the optimized
/// stack.
pub fn simulate_pull(model: &RobotModel<f64>, settings: &TeachSettings, sim_config: &SimConfig) -> Result<PullRun> {
    let pull = &settings.pull;
    let start = Vector3::from(pull.start);
    let path = HandPath {
        waypoints: vec![start, start + Vector3::from(pull.displacement)],
        segment_time: pull.duration,
        start_time: pull.start_time,
    };
    let q0 = start_posture(model, &start, &settings.ik_seed)?;
    let dt = sim_config.control_period;
    let mut ctl = controller(path.clone(), settings, true, dt);
    ctl.pull_stop = Some(pull.stop);
    let config = SimConfig {
        record_every: 0,
        ..sim_config.clone()
    };
    let mut sim = Simulator::new(model.clone(), q0, config, PerturbationSchedule::default());
    let mut trace = Table::new(traces::PULL.0, traces::PULL.1);
    let mut min_r_min = f64::INFINITY;
    let mut peak_force = 0.0f64;
    let mut monotone = true;
    let mut gate_opened = false;
    let mut previous = 0.0;
    let end = path.end_time() + pull.hold;
    while sim.state().t < end {
        sim.run(&mut ctl, dt)?;
        let t = sim.state().t;
        let r = ctl.last_terms.as_ref().map_or(f64::INFINITY, |x| x.r_min);
        min_r_min = min_r_min.min(r);
        let f = ctl.hand_force.norm();
        peak_force = peak_force.max(f);
        gate_opened |= ctl.last_gate > 0.0;
        if gate_opened && !ctl.hand_holding {
            monotone &= f >= previous - 1e-9;
            previous = f;
        }
        let y = model.forward_kinematics(&sim.state().joints.q).position;
        trace.push(vec![t, y.x, r, ctl.last_gate, f]);
    }
    Ok(PullRun {
        min_r_min,
        peak_force,
        monotone,
        gate_opened,
        trace,
    })
}

/// Pooled per-axis forces (baseline, optimized) over all placements.
pub fn isotropy_study(
    model: &RobotModel<f64>,
    settings: &TeachSettings,
    sim_config: &SimConfig,
    seed: u64,
) -> Result<(AxisForces, AxisForces, Vec<Table>)> {
    let starts = placements(settings, seed);
    for a in &starts {
        start_posture(model, a, &settings.ik_seed)?;
    }
    let jobs: Vec<(usize, bool)> = (0..starts.len()).flat_map(|i| [(i, false), (i, true)]).collect();
    let results: Vec<Result<TeachRun>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(i, optimized)| {
                let path = l_shape_path(starts[i], settings);
                scope.spawn(move || simulate_teach(model, &path, settings, sim_config, optimized, i == 0))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("teach worker panicked")).collect()
    });
    let mut gc = AxisForces::default();
    let mut opt = AxisForces::default();
    let mut tables = Vec::new();
    for (run, &(_, optimized)) in results.into_iter().zip(&jobs) {
        let run = run?;
        if optimized { &mut opt } else { &mut gc }.add(&run.forces);
        tables.extend(run.trace);
    }
    Ok((gc, opt, tables))
}

pub fn run_teach(config: &ScenarioConfig) -> Result<RunOutput> {
    let started = Instant::now();
    let model = config.robot_model()?;
    let settings = &config.teach;
    let (gc, opt, mut tables) = isotropy_study(&model, settings, &config.sim, config.seed)?;

    let mut report = MetricsReport::new(ScenarioKind::Teach, config.seed);
    report.isotropy_ratio = Some(opt.isotropy_ratio());
    report.isotropy_ratio_baseline = Some(gc.isotropy_ratio());
    report.axis_force_n = Some(opt.means());
    report.axis_force_baseline_n = Some(gc.means());
    report.r_thr = Some(settings.weights.r_thr);
    report.checks.push(Check::below(
        "isotropy_ratio",
        opt.isotropy_ratio(),
        gc.isotropy_ratio(),
    ));
    if settings.pull.enabled {
        let pull = simulate_pull(&model, settings, &config.sim)?;
        report.min_r_min = Some(pull.min_r_min);
        report.peak_resistance_force_n = Some(pull.peak_force);
        report.checks.extend([
            Check::at_least(
                "min_r_min",
                pull.min_r_min,
                config.limits.r_min_fraction * settings.weights.r_thr,
            ),
            Check::holds("gate_opened", pull.gate_opened),
            Check::holds("resistance_monotone", pull.monotone),
        ]);
        tables.push(pull.trace);
    }
    report.runtime_s = started.elapsed().as_secs_f64();
    Ok(RunOutput {
        report,
        tables,
        artifacts: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placements_are_seeded_and_inside_region() {
        let s = TeachSettings::default();
        let a = placements(&s, 5);
        assert_eq!(a, placements(&s, 5));
        assert_ne!(a, placements(&s, 6));
        for p in &a {
            for i in 0..3 {
                assert!(p[i] >= s.region_min[i] && p[i] <= s.region_max[i]);
            }
        }
    }

    #[test]
    fn l_shape_segments_are_axis_aligned() {
        let s = TeachSettings::default();
        let path = l_shape_path(Vector3::new(0.4, -0.1, 0.3), &s);
        assert_eq!(path.waypoints.len(), 1 + 8 * s.cycles);
        for w in path.waypoints.windows(2) {
            let d = w[1] - w[0];
            assert!((d.norm() - s.segment_length).abs() < 1e-12);
            assert_eq!(d.iter().filter(|v| v.abs() > 0.0).count(), 1);
        }
        assert_eq!(path.waypoints.last(), path.waypoints.first());
    }

    #[test]
    fn isotropy_ratio_ignores_unused_axes() {
        let f = AxisForces {
            sum: [4.0, 2.0, 0.0],
            count: [2, 2, 0],
        };
        assert_eq!(f.isotropy_ratio(), 2.0);
    }
}
