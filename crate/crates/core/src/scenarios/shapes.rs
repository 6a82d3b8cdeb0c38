//! Synthetic handwriting-style demonstrations.
//!
//! Two planar shapes (a trapezoid and a 'W') are described by control
//! points in centimeters, interpolated with a centripetal-free uniform
//! Catmull–Rom spline, and lifted into 3D with a height profile
//! `z(u) = h·(1 − cos πu)/2` that starts at zero. The curve parameter is
//! driven by a minimum-jerk time law so the raw recording has a realistic
//! bell-shaped speed profile.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::fdm::TimedSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Trapezoid,
    W,
}

impl Shape {
    pub const ALL: [Shape; 2] = [Shape::Trapezoid, Shape::W];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Trapezoid => "trapezoid",
            Shape::W => "w",
        }
    }

    /// Planar control points (cm).
    pub fn control_points(self) -> &'static [[f64; 2]] {
        match self {
            Shape::Trapezoid => &[
                [-10.0, 0.0],
                [-8.5, 4.0],
                [-7.0, 8.0],
                [-3.0, 8.5],
                [3.0, 8.5],
                [7.0, 8.0],
                [8.5, 4.0],
                [10.0, 0.0],
            ],
            Shape::W => &[
                [-10.0, 8.0],
                [-7.5, 0.0],
                [-5.0, -1.0],
                [-2.5, 4.5],
                [0.0, 5.5],
                [2.5, 4.5],
                [5.0, -1.0],
                [7.5, 0.0],
                [10.0, 8.0],
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeParams {
    /// Final height of the lift profile (m).
    pub height: f64,
    /// Duration of the recording (s).
    pub duration: f64,
    /// Number of raw samples.
    pub samples: usize,
}

impl Default for ShapeParams {
    fn default() -> Self {
        Self {
            height: 0.05,
            duration: 8.0,
            samples: 800,
        }
    }
}

fn catmull_rom(p: &[[f64; 2]], u: f64) -> [f64; 2] {
    let segments = p.len() - 1;
    let s = (u.clamp(0.0, 1.0) * segments as f64).min(segments as f64 - 1e-12);
    let i = s.floor() as usize;
    let t = s - i as f64;
    let get = |k: isize| -> [f64; 2] {
        let k = k.clamp(0, p.len() as isize - 1) as usize;
        p[k]
    };
    let (p0, p1, p2, p3) = (
        get(i as isize - 1),
        get(i as isize),
        get(i as isize + 1),
        get(i as isize + 2),
    );
    let mut out = [0.0; 2];
    for c in 0..2 {
        out[c] = 0.5
            * (2.0 * p1[c]
                + (-p0[c] + p2[c]) * t
                + (2.0 * p0[c] - 5.0 * p1[c] + 4.0 * p2[c] - p3[c]) * t * t
                + (-p0[c] + 3.0 * p1[c] - 3.0 * p2[c] + p3[c]) * t * t * t);
    }
    out
}

fn minimum_jerk(s: f64) -> f64 {
    s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
}

/// Point on the lifted curve at parameter `u ∈ [0, 1]` (meters, centered
/// near the origin).
pub fn shape_point(shape: Shape, params: &ShapeParams, u: f64) -> Vector3<f64> {
    let [x, y] = catmull_rom(shape.control_points(), u);
    let z = params.height * 0.5 * (1.0 - (std::f64::consts::PI * u).cos());
    Vector3::new(0.01 * x, 0.01 * y, z)
}

/// A raw timestamped recording of `shape`, shifted by `offset`.
pub fn raw_demo(shape: Shape, params: &ShapeParams, offset: &Vector3<f64>) -> Vec<TimedSample<f64>> {
    let n = params.samples.max(2);
    (0..n)
        .map(|i| {
            let s = i as f64 / (n - 1) as f64;
            TimedSample {
                t: s * params.duration,
                position: shape_point(shape, params, minimum_jerk(s)) + offset,
            }
        })
        .collect()
}
