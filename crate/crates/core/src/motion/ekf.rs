use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::fdm::DemonstrationPath;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EkfConfig {
    /// Process noise density (isotropic), (m/s)²/s.
    pub q: f64,
    /// Measurement noise (isotropic), m².
    pub r: f64,
    pub p0: f64,
    /// Upper bound on the covariance eigenvalues.
    pub p_cap: f64,
    /// Correction horizon `h` (s): the measurement model is `h·b`, so a
    /// path offset is removed over roughly `h`. Setting it to the control
    /// period gives the one-step model.
    pub horizon: f64,
}

impl Default for EkfConfig {
    fn default() -> Self {
        Self {
            q: 1e-4,
            r: 1e-6,
            p0: 1e-2,
            p_cap: 1.0,
            horizon: 0.25,
        }
    }
}

/// Velocity bias `b` with a random-walk model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EkfState<T: Real> {
    pub b: Vector3<T>,
    pub p: Matrix3<T>,
    pub q: Matrix3<T>,
    pub r: Matrix3<T>,
    pub p_cap: T,
    pub horizon: T,
}

impl<T: Real> EkfState<T> {
    pub fn new(config: &EkfConfig) -> Self {
        let i = Matrix3::identity();
        Self {
            b: Vector3::zeros(),
            p: i * T::lit(config.p0),
            q: i * T::lit(config.q),
            r: i * T::lit(config.r),
            p_cap: T::lit(config.p_cap),
            horizon: T::lit(config.horizon),
        }
    }

    /// One predict/update cycle (random-walk prediction over `dt`) for the
    /// position residual `residual`, measured as `target − (y + ẏ_fdm·dt)`
    /// with model `h·b`.
    pub fn update(&mut self, residual: &Vector3<T>, dt: T) {
        let p_pred = self.p + self.q * dt;
        let h = self.horizon;
        let s = p_pred * (h * h) + self.r;
        let s_inv = s.try_inverse().unwrap_or_else(Matrix3::zeros);
        let k = p_pred * h * s_inv;
        let innovation = residual - self.b * h;
        self.b += k * innovation;
        // Joseph form keeps P symmetric positive definite.
        let a = Matrix3::identity() - k * h;
        let mut p = a * p_pred * a.transpose() + k * self.r * k.transpose();
        p = (p + p.transpose()) * T::lit(0.5);
        let top = p.symmetric_eigenvalues().max();
        if top > self.p_cap {
            p *= self.p_cap / top;
        }
        self.p = p;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestPoint<T: Real> {
    pub index: usize,
    pub point: Vector3<T>,
}

/// Points scanned ahead of the hint during nominal progress.
const FORWARD_WINDOW: usize = 40;
/// A windowed match farther than this (m) triggers a global search.
const REENTRY_DISTANCE: f64 = 0.01;

/// Nearest demonstration point, searched forward from `hint` so progress
/// along the demonstration is monotone. When the windowed match is farther
/// than 1 cm (the robot has been pushed off the path) the whole
/// demonstration is searched. Ties resolve to the lower index.
pub fn nearest_demo_point<T: Real>(y: &Vector3<T>, demo: &DemonstrationPath<T>, hint: usize) -> NearestPoint<T> {
    let n = demo.points.len();
    let scan = |range: std::ops::Range<usize>| {
        let mut best = range.start;
        let mut best_d = (demo.points[best] - y).norm_squared();
        for i in range {
            let d = (demo.points[i] - y).norm_squared();
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        (best, best_d)
    };
    let start = hint.min(n - 1);
    let (mut index, d2) = scan(start..(start + FORWARD_WINDOW).min(n));
    let limit = T::lit(REENTRY_DISTANCE);
    if d2 > limit * limit {
        index = scan(0..n).0;
    }
    NearestPoint {
        index,
        point: demo.points[index],
    }
}

/// Orthogonal projection of `p` onto the two polyline segments adjacent to
/// vertex `index`.
pub fn project_onto_demo<T: Real>(p: &Vector3<T>, demo: &DemonstrationPath<T>, index: usize) -> Vector3<T> {
    let pts = &demo.points;
    let mut best = pts[index];
    let mut best_d = (best - p).norm_squared();
    let lo = index.saturating_sub(1);
    let hi = (index + 1).min(pts.len() - 1);
    for (a, b) in [(lo, index), (index, hi)] {
        if a == b {
            continue;
        }
        let d = pts[b] - pts[a];
        let s = ((p - pts[a]).dot(&d) / d.norm_squared()).clamp(T::zero(), T::one());
        let q = pts[a] + d * s;
        let dist = (q - p).norm_squared();
        if dist < best_d {
            best = q;
            best_d = dist;
        }
    }
    best
}

/// Bias correction step. The predicted position `y + ẏ_fdm·dt` is
/// compared with its projection onto the demonstration near the current
/// nearest point; the difference is the measurement. Returns the updated
/// state, `ẏ_ekf = ẏ_fdm + b`, and the nearest index used.
pub fn ekf_correct<T: Real>(
    state: &EkfState<T>,
    y: &Vector3<T>,
    ydot_fdm: &Vector3<T>,
    demo: &DemonstrationPath<T>,
    hint: usize,
    dt: T,
) -> (EkfState<T>, Vector3<T>, usize) {
    let predicted = y + ydot_fdm * dt;
    let nearest = nearest_demo_point(&predicted, demo, hint);
    let target = project_onto_demo(&predicted, demo, nearest.index);
    let mut next = state.clone();
    next.update(&(target - predicted), dt);
    let ydot = ydot_fdm + next.b;
    (next, ydot, nearest.index)
}
