//! Canonical text form of a fitted model.
//!
//! ```text
//! fdm-model 1
//! k <K>
//! mu <μ>
//! beta <β>
//! source_goal <x> <y> <z>
//! fit_error <mean> <max>
//! <ρ> <cx> <cy> <cz> <vx> <vy> <vz>      (K lines, fit order)
//! ```
//!
//! Numbers use the shortest decimal form that round-trips an f64 exactly,
//! so writing a model read from disk reproduces the file byte for byte.

use std::io::{BufRead, Write};

use nalgebra::Vector3;

use super::diffeo::{Diffeomorphism, LocalTranslation};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "fdm-model";

pub fn write_model<T: Real, W: Write>(mut w: W, phi: &Diffeomorphism<T>) -> Result<()> {
    let f = |v: T| v.as_f64();
    writeln!(w, "{MAGIC} {MODEL_FORMAT_VERSION}")?;
    writeln!(w, "k {}", phi.translations.len())?;
    writeln!(w, "mu {}", f(phi.mu))?;
    writeln!(w, "beta {}", f(phi.beta))?;
    let g = phi.source_goal;
    writeln!(w, "source_goal {} {} {}", f(g.x), f(g.y), f(g.z))?;
    writeln!(w, "fit_error {} {}", f(phi.fit_error.0), f(phi.fit_error.1))?;
    for t in &phi.translations {
        writeln!(
            w,
            "{} {} {} {} {} {} {}",
            f(t.rho),
            f(t.center.x),
            f(t.center.y),
            f(t.center.z),
            f(t.direction.x),
            f(t.direction.y),
            f(t.direction.z)
        )?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        loop {
            self.number += 1;
            match self.inner.next() {
                Some(line) => {
                    let line = line?;
                    let trimmed = line.trim();
                    if !trimmed.is_empty() && !trimmed.starts_with('#') {
                        return Ok(trimmed.to_owned());
                    }
                }
                None => return Err(Error::Parse("unexpected end of model file".into())),
            }
        }
    }

    fn keyed<T: Real>(&mut self, key: &str, count: usize) -> Result<Vec<T>> {
        let line = self.next_line()?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::Parse(format!("line {}: expected `{key}`", self.number)));
        }
        self.numbers(it, count)
    }

    fn numbers<'a, T: Real>(
        &self,
        it: impl Iterator<Item = &'a str>,
        count: usize,
    ) -> Result<Vec<T>> {
        let values = it
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| Error::Parse(format!("line {}: bad number {s:?}", self.number)))
            })
            .collect::<Result<Vec<T>>>()?;
        if values.len() != count {
            return Err(Error::Parse(format!(
                "line {}: expected {count} numbers, found {}",
                self.number,
                values.len()
            )));
        }
        Ok(values)
    }
}

pub fn read_model<T: Real, R: BufRead>(reader: R) -> Result<Diffeomorphism<T>> {
    let mut lines = Lines {
        inner: reader.lines(),
        number: 0,
    };
    let header = lines.next_line()?;
    let version = header
        .strip_prefix(MAGIC)
        .map(str::trim)
        .ok_or_else(|| Error::Parse("missing fdm-model header".into()))?;
    if version != MODEL_FORMAT_VERSION.to_string() {
        return Err(Error::Parse(format!("unsupported model version {version:?}")));
    }
    let k_line = lines.next_line()?;
    let k: usize = k_line
        .strip_prefix("k ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::Parse(format!("line {}: expected `k <count>`", lines.number)))?;
    if k == 0 {
        return Err(Error::Parse("model has no translations".into()));
    }
    let mu = lines.keyed::<T>("mu", 1)?[0];
    let beta = lines.keyed::<T>("beta", 1)?[0];
    let g = lines.keyed::<T>("source_goal", 3)?;
    let e = lines.keyed::<T>("fit_error", 2)?;
    let mut translations = Vec::with_capacity(k);
    for _ in 0..k {
        let line = lines.next_line()?;
        let v = lines.numbers::<T>(line.split_whitespace(), 7)?;
        translations.push(LocalTranslation {
            rho: v[0],
            center: Vector3::new(v[1], v[2], v[3]),
            direction: Vector3::new(v[4], v[5], v[6]),
        });
    }
    if let Ok(extra) = lines.next_line() {
        return Err(Error::Parse(format!("trailing content {extra:?}")));
    }
    let phi = Diffeomorphism {
        translations,
        source_goal: Vector3::new(g[0], g[1], g[2]),
        mu,
        beta,
        fit_error: (e[0], e[1]),
    };
    if !phi.respects_rho_cap() {
        return Err(Error::Parse("a stored ρ exceeds the invertibility cap".into()));
    }
    Ok(phi)
}
