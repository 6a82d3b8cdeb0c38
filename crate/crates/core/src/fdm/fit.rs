use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::diffeo::{matching_error, rho_max, Diffeomorphism, LocalTranslation};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// How the point furthest from its target is chosen at each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correspondence {
    /// Residual `‖X[m] − Y[m]‖`, index for index.
    #[default]
    IndexAligned,
    /// Distance from `X[m]` to the closest point of `Y`; the target is
    /// still `Y[m]`.
    NearestNeighbor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub translations: usize,
    pub mu: f64,
    pub beta: f64,
    pub golden_iterations: usize,
    /// Stop early once the mean matching error falls below this (m).
    pub tolerance: f64,
    pub correspondence: Correspondence,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            translations: 120,
            mu: 0.9,
            beta: 0.5,
            golden_iterations: 40,
            tolerance: 1e-5,
            correspondence: Correspondence::IndexAligned,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.translations == 0 {
            return Err(Error::InvalidInput("translation count must be ≥ 1".into()));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::InvalidInput(format!("mu = {} outside (0, 1)", self.mu)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidInput(format!("beta = {} outside (0, 1)", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FitReport<T: Real> {
    /// Mean squared matching error after each translation.
    pub objective: Vec<T>,
    /// Mean matching distance after each translation.
    pub mean_error: Vec<T>,
    pub final_error: (T, T),
}

fn mean_squared<T: Real>(a: &[Vector3<T>], b: &[Vector3<T>]) -> T {
    let s = a
        .iter()
        .zip(b)
        .fold(T::zero(), |acc, (p, q)| acc + (p - q).norm_squared());
    s / T::from_usize_lossy(a.len())
}

fn objective<T: Real>(tr: &LocalTranslation<T>, x: &[Vector3<T>], y: &[Vector3<T>]) -> T {
    let s = x
        .iter()
        .zip(y)
        .fold(T::zero(), |acc, (p, q)| acc + (tr.apply(p) - q).norm_squared());
    s / T::from_usize_lossy(x.len())
}

fn golden_section<T: Real>(f: impl Fn(T) -> T, a: T, b: T, iterations: usize) -> (T, T) {
    let inv_phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (a, b);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iterations {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

fn select_index<T: Real>(x: &[Vector3<T>], y: &[Vector3<T>], mode: Correspondence) -> usize {
    let score = |i: usize| match mode {
        Correspondence::IndexAligned => (x[i] - y[i]).norm_squared(),
        Correspondence::NearestNeighbor => y
            .iter()
            .map(|q| (x[i] - q).norm_squared())
            .fold(T::lit(f64::INFINITY), |a, b| a.min(b)),
    };
    let mut best = 0;
    let mut best_score = score(0);
    for i in 1..x.len() {
        let s = score(i);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

/// Greedily fits up to `config.translations` local translations bending
/// `source` onto `target`.
pub fn fit<T: Real>(
    source: &[Vector3<T>],
    target: &[Vector3<T>],
    config: &FitConfig,
) -> Result<(Diffeomorphism<T>, FitReport<T>)> {
    config.validate()?;
    if source.len() != target.len() || source.is_empty() {
        return Err(Error::InvalidInput(format!(
            "source has {} points, target {}",
            source.len(),
            target.len()
        )));
    }
    let mu = T::lit(config.mu);
    let beta = T::lit(config.beta);
    let tolerance = T::lit(config.tolerance);
    let mut x = source.to_vec();
    let mut translations = Vec::with_capacity(config.translations);
    let mut report = FitReport {
        objective: Vec::with_capacity(config.translations),
        mean_error: Vec::with_capacity(config.translations),
        final_error: (T::zero(), T::zero()),
    };

    for _ in 0..config.translations {
        let m = select_index(&x, target, config.correspondence);
        let center = x[m];
        let direction = (target[m] - center) * beta;
        let current = mean_squared(&x, target);
        let mut tr = LocalTranslation {
            rho: T::zero(),
            center,
            direction,
        };
        if direction.norm() > T::zero() {
            let cap = mu * rho_max(&direction);
            let eval = |rho: T| {
                objective(
                    &LocalTranslation {
                        rho,
                        center,
                        direction,
                    },
                    &x,
                    target,
                )
            };
            let (mut rho, mut best) = golden_section(eval, T::zero(), cap, config.golden_iterations);
            for candidate in [T::zero(), cap] {
                let f = eval(candidate);
                if f < best {
                    best = f;
                    rho = candidate;
                }
            }
            tr.rho = rho;
            // A translation that makes things worse is kept as a no-op so the
            // recorded trace stays monotone.
            if best > current {
                tr.direction = Vector3::zeros();
                tr.rho = T::zero();
            }
        }
        for p in x.iter_mut() {
            *p = tr.apply(p);
        }
        translations.push(tr);
        report.objective.push(mean_squared(&x, target));
        let (mean, _) = matching_error(&x, target);
        report.mean_error.push(mean);
        if mean < tolerance {
            break;
        }
    }

    report.final_error = matching_error(&x, target);
    let phi = Diffeomorphism {
        translations,
        source_goal: source[source.len() - 1],
        mu,
        beta,
        fit_error: report.final_error,
    };
    Ok((phi, report))
}
