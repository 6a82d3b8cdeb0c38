use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::ekf::{ekf_correct, nearest_demo_point, EkfConfig, EkfState};
use super::{fdm_velocity, surface_velocity};
use crate::error::Result;
use crate::fdm::{DemonstrationPath, Diffeomorphism};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReproductionConfig {
    pub ekf_enabled: bool,
    pub ekf: EkfConfig,
    /// Surface approach speed α_c (m/s); zero disables the term.
    pub surface_speed: f64,
    pub surface_normal: [f64; 3],
}

impl Default for ReproductionConfig {
    fn default() -> Self {
        Self {
            ekf_enabled: true,
            ekf: EkfConfig::default(),
            surface_speed: 0.0,
            surface_normal: [0.0, 0.0, -1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproductionState<T: Real> {
    pub y: Vector3<T>,
    pub ydot_fdm: Vector3<T>,
    pub ydot_ekf: Vector3<T>,
    pub nearest_index: usize,
    pub t: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T: Real> {
    pub t: T,
    pub y: Vector3<T>,
    pub ydot_fdm: Vector3<T>,
    pub ydot_ekf: Vector3<T>,
    pub b: Vector3<T>,
    pub nearest_index: usize,
}

/// One reproduction run. Owns its filter and progress state.
#[derive(Debug, Clone)]
pub struct Reproducer<T: Real> {
    pub phi: Diffeomorphism<T>,
    pub zeta: Matrix3<T>,
    pub demo: DemonstrationPath<T>,
    pub config: ReproductionConfig,
    ekf: EkfState<T>,
    state: ReproductionState<T>,
    trace: Vec<TraceRow<T>>,
}

impl<T: Real> Reproducer<T> {
    pub fn new(
        phi: Diffeomorphism<T>,
        zeta: Matrix3<T>,
        demo: DemonstrationPath<T>,
        config: ReproductionConfig,
    ) -> Self {
        let start = demo.start();
        Self {
            ekf: EkfState::new(&config.ekf),
            state: ReproductionState {
                y: start,
                ydot_fdm: Vector3::zeros(),
                ydot_ekf: Vector3::zeros(),
                nearest_index: 0,
                t: T::zero(),
            },
            trace: Vec::new(),
            phi,
            zeta,
            demo,
            config,
        }
    }

    pub fn state(&self) -> &ReproductionState<T> {
        &self.state
    }

    pub fn ekf(&self) -> &EkfState<T> {
        &self.ekf
    }

    pub fn trace(&self) -> &[TraceRow<T>] {
        &self.trace
    }

    /// Commanded velocity for the measured position `y`; advances the
    /// internal clock by `dt`.
    pub fn step(&mut self, y: &Vector3<T>, dt: T) -> Result<Vector3<T>> {
        let ydot_fdm = fdm_velocity(&self.phi, y, &self.zeta)?;
        let n = self.config.surface_normal;
        let contact = surface_velocity(
            T::lit(self.config.surface_speed),
            &Vector3::new(T::lit(n[0]), T::lit(n[1]), T::lit(n[2])),
        );
        let (ydot_ekf, index) = if self.config.ekf_enabled {
            let (ekf, v, index) = ekf_correct(&self.ekf, y, &ydot_fdm, &self.demo, self.state.nearest_index, dt);
            self.ekf = ekf;
            (v + contact, index)
        } else {
            let index = nearest_demo_point(y, &self.demo, self.state.nearest_index).index;
            (ydot_fdm + contact, index)
        };
        self.state = ReproductionState {
            y: *y,
            ydot_fdm,
            ydot_ekf,
            nearest_index: index,
            t: self.state.t,
        };
        self.trace.push(TraceRow {
            t: self.state.t,
            y: *y,
            ydot_fdm,
            ydot_ekf,
            b: self.ekf.b,
            nearest_index: index,
        });
        self.state.t += dt;
        Ok(ydot_ekf)
    }

    /// Kinematic rollout: the position follows the commanded velocity
    /// exactly (explicit Euler). Returns the visited positions.
    pub fn rollout(&mut self, start: Vector3<T>, dt: T, steps: usize) -> Result<Vec<Vector3<T>>> {
        let mut y = start;
        let mut out = Vec::with_capacity(steps + 1);
        out.push(y);
        for _ in 0..steps {
            let v = self.step(&y, dt)?;
            y += v * dt;
            out.push(y);
        }
        Ok(out)
    }
}

pub fn write_trace_csv<T: Real, W: Write>(mut w: W, rows: &[TraceRow<T>]) -> Result<()> {
    writeln!(
        w,
        "t,y_x,y_y,y_z,fdm_x,fdm_y,fdm_z,ekf_x,ekf_y,ekf_z,b_x,b_y,b_z,nearest_index"
    )?;
    for r in rows {
        write!(w, "{}", r.t.as_f64())?;
        for v in [&r.y, &r.ydot_fdm, &r.ydot_ekf, &r.b] {
            write!(w, ",{},{},{}", v.x.as_f64(), v.y.as_f64(), v.z.as_f64())?;
        }
        writeln!(w, ",{}", r.nearest_index)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fdm::{fit, source_line, FitConfig};

    fn setup() -> (Diffeomorphism<f64>, DemonstrationPath<f64>) {
        let pts: Vec<_> = (0..300)
            .map(|i| {
                let u = i as f64 / 299.0;
                Vector3::new(0.2 * u, 0.05 * (std::f64::consts::PI * u).sin(), 0.0)
            })
            .collect();
        let demo = DemonstrationPath::from_points(pts, 0.02).unwrap();
        let x = source_line(&demo).unwrap();
        (fit(&x, &demo.points, &FitConfig::default()).unwrap().0, demo)
    }

    #[test]
    fn ekf_off_matches_plain_fdm_integration() {
        let (phi, demo) = setup();
        let zeta = Matrix3::identity() * 0.8;
        let cfg = ReproductionConfig {
            ekf_enabled: false,
            ..ReproductionConfig::default()
        };
        let mut rep = Reproducer::new(phi.clone(), zeta, demo.clone(), cfg);
        let path = rep.rollout(demo.start(), 0.005, 500).unwrap();
        let mut y = demo.start();
        for p in &path[1..] {
            y += fdm_velocity(&phi, &y, &zeta).unwrap() * 0.005;
            assert_eq!(*p, y);
        }
    }

    #[test]
    fn nominal_progress_is_monotone_and_stays_on_path() {
        let (phi, demo) = setup();
        let mut rep = Reproducer::new(phi, Matrix3::identity(), demo.clone(), ReproductionConfig::default());
        let path = rep.rollout(demo.start(), 0.005, 2000).unwrap();
        assert!(rep.trace().windows(2).all(|w| w[1].nearest_index >= w[0].nearest_index));
        let worst = path.iter().map(|p| demo.distance_to(p)).fold(0.0, f64::max);
        assert!(worst < 2e-3, "{worst}");
    }

    #[test]
    fn field_is_time_independent() {
        let (phi, demo) = setup();
        let zeta = Matrix3::identity();
        let cfg = ReproductionConfig {
            ekf_enabled: false,
            ..ReproductionConfig::default()
        };
        let mut a = Reproducer::new(phi.clone(), zeta, demo.clone(), cfg.clone());
        let mut b = Reproducer::new(phi, zeta, demo.clone(), cfg);
        a.rollout(demo.start(), 0.01, 37).unwrap();
        let p = demo.points[120];
        assert_eq!(a.step(&p, 0.01).unwrap(), b.step(&p, 0.01).unwrap());
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let (phi, demo) = setup();
        let mut rep = Reproducer::new(phi, Matrix3::identity(), demo.clone(), ReproductionConfig::default());
        rep.rollout(demo.start(), 0.01, 3).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, rep.trace()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 14);
    }
}
