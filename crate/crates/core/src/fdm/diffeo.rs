use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest ρ for which `x ↦ x + exp(−ρ²‖x−c‖²)·v` stays a diffeomorphism.
/// Returns `+∞` for a zero translation.
pub fn rho_max<T: Real>(v: &Vector3<T>) -> T {
    let n = v.norm();
    if n > T::zero() {
        T::lit(0.25).exp() / (T::lit(2.0).sqrt() * n)
    } else {
        T::lit(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct LocalTranslation<T: Real> {
    pub rho: T,
    pub center: Vector3<T>,
    pub direction: Vector3<T>,
}

const NEWTON_MAX_ITERATIONS: usize = 100;

impl<T: Real> LocalTranslation<T> {
    pub fn kernel(&self, x: &Vector3<T>) -> T {
        (-(self.rho * self.rho) * (x - self.center).norm_squared()).exp()
    }

    pub fn apply(&self, x: &Vector3<T>) -> Vector3<T> {
        x + self.direction * self.kernel(x)
    }

    /// `I + v·∇kᵀ` with `∇k = −2ρ²k·(x − c)`.
    pub fn jacobian(&self, x: &Vector3<T>) -> Matrix3<T> {
        let k = self.kernel(x);
        let grad = (x - self.center) * (T::lit(-2.0) * self.rho * self.rho * k);
        Matrix3::identity() + self.direction * grad.transpose()
    }

    /// Solves `apply(x) = y`. Since `x = y − t·v` with `t = k(x) ∈ (0, 1]`,
    /// this reduces to a scalar root of `g(t) = t − k(y − t·v)` bracketed by
    /// `[0, 1]`; Newton steps falling outside the bracket are replaced by
    /// bisection.
    pub fn invert(&self, y: &Vector3<T>) -> Result<Vector3<T>> {
        if self.direction.norm_squared() == T::zero() {
            return Ok(*y);
        }
        let d = y - self.center;
        let r2 = self.rho * self.rho;
        let g = |t: T| {
            let e = d - self.direction * t;
            let k = (-r2 * e.norm_squared()).exp();
            let dg = T::one() - k * T::lit(2.0) * r2 * e.dot(&self.direction);
            (t - k, dg)
        };
        let (mut lo, mut hi) = (T::zero(), T::one());
        let mut t = (-r2 * d.norm_squared()).exp();
        let tol = T::lit(4.0) * T::default_epsilon();
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let (gt, dg) = g(t);
            if gt == T::zero() {
                return Ok(y - self.direction * t);
            }
            if gt < T::zero() {
                lo = t;
            } else {
                hi = t;
            }
            let newton = t - gt / dg;
            let next = if dg > T::zero() && newton > lo && newton < hi {
                newton
            } else {
                (lo + hi) * T::lit(0.5)
            };
            let step = (next - t).abs();
            t = next;
            if step <= tol * (T::one() + t.abs()) || hi - lo <= tol {
                return Ok(y - self.direction * t);
            }
        }
        let residual = g(t).0.abs().as_f64();
        Err(Error::NoConvergence {
            iterations: NEWTON_MAX_ITERATIONS,
            residual,
        })
    }
}

/// A composition of local translations applied in fit order (first fitted,
/// first applied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Diffeomorphism<T: Real> {
    pub translations: Vec<LocalTranslation<T>>,
    /// End point of the straight source line; the attractor sits here.
    pub source_goal: Vector3<T>,
    pub mu: T,
    pub beta: T,
    /// (mean, max) index-aligned matching error recorded at fit time.
    pub fit_error: (T, T),
}

impl<T: Real> Diffeomorphism<T> {
    /// The identity map (a single zero translation).
    pub fn identity(source_goal: Vector3<T>) -> Self {
        Self {
            translations: vec![LocalTranslation {
                rho: T::zero(),
                center: source_goal,
                direction: Vector3::zeros(),
            }],
            source_goal,
            mu: T::lit(0.9),
            beta: T::lit(0.5),
            fit_error: (T::zero(), T::zero()),
        }
    }

    pub fn len(&self) -> usize {
        self.translations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.translations.is_empty()
    }

    pub fn apply(&self, x: &Vector3<T>) -> Vector3<T> {
        self.translations.iter().fold(*x, |p, tr| tr.apply(&p))
    }

    pub fn apply_all(&self, xs: &[Vector3<T>]) -> Vec<Vector3<T>> {
        xs.iter().map(|x| self.apply(x)).collect()
    }

    /// Forward image together with `J_Φ`, accumulated along the pass.
    pub fn apply_with_jacobian(&self, x: &Vector3<T>) -> (Vector3<T>, Matrix3<T>) {
        let mut p = *x;
        let mut j = Matrix3::identity();
        for tr in &self.translations {
            j = tr.jacobian(&p) * j;
            p = tr.apply(&p);
        }
        (p, j)
    }

    pub fn jacobian_of(&self, x: &Vector3<T>) -> Matrix3<T> {
        self.apply_with_jacobian(x).1
    }

    pub fn inverse(&self, y: &Vector3<T>) -> Result<Vector3<T>> {
        self.translations
            .iter()
            .rev()
            .try_fold(*y, |p, tr| tr.invert(&p))
    }

    /// Index-aligned (mean, max) distance between `Φ(X)` and `Y`.
    pub fn matching_error(&self, x: &[Vector3<T>], y: &[Vector3<T>]) -> (T, T) {
        matching_error(&self.apply_all(x), y)
    }

    /// Every stored ρ respects the `μ·ρ_max` cap.
    pub fn respects_rho_cap(&self) -> bool {
        self.translations.iter().all(|t| {
            t.rho >= T::zero()
                && if t.direction.norm() > T::zero() {
                    t.rho <= self.mu * rho_max(&t.direction) * (T::one() + T::lit(1e-12))
                } else {
                    t.rho == T::zero()
                }
        })
    }
}

pub(crate) fn matching_error<T: Real>(a: &[Vector3<T>], b: &[Vector3<T>]) -> (T, T) {
    let n = a.len().min(b.len());
    if n == 0 {
        return (T::zero(), T::zero());
    }
    let mut sum = T::zero();
    let mut max = T::zero();
    for (p, q) in a.iter().zip(b) {
        let d = (p - q).norm();
        sum += d;
        max = max.max(d);
    }
    (sum / T::from_usize_lossy(n), max)
}
