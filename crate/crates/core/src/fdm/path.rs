use std::io::{BufRead, Write};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One raw recorded sample: time stamp (s) and position (m).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimedSample<T: Real> {
    pub t: T,
    pub position: Vector3<T>,
}

/// A demonstration resampled uniformly in arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct DemonstrationPath<T: Real> {
    pub points: Vec<Vector3<T>>,
    pub velocities: Vec<Vector3<T>>,
    /// Sample period; `dt·(N−1)` is the duration of the raw recording.
    pub dt: T,
}

const MIN_ARC_LENGTH: f64 = 1e-4;

fn cumulative_lengths<T: Real>(points: &[Vector3<T>]) -> Vec<T> {
    let mut s = Vec::with_capacity(points.len());
    let mut acc = T::zero();
    s.push(acc);
    for w in points.windows(2) {
        acc += (w[1] - w[0]).norm();
        s.push(acc);
    }
    s
}

/// Central finite differences, one-sided at the ends.
fn finite_difference_velocities<T: Real>(points: &[Vector3<T>], dt: T) -> Vec<Vector3<T>> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (a, b, span) = match i {
                0 => (0, 1, T::one()),
                _ if i == n - 1 => (n - 2, n - 1, T::one()),
                _ => (i - 1, i + 1, T::lit(2.0)),
            };
            (points[b] - points[a]) / (span * dt)
        })
        .collect()
}

/// Resamples `raw` to `n` points uniformly spaced in arc length. The
/// recorded duration is preserved, so velocities are the finite
/// differences of the resampled points over `duration/(n−1)`.
pub fn resample<T: Real>(raw: &[TimedSample<T>], n: usize) -> Result<DemonstrationPath<T>> {
    if raw.len() < 2 || n < 2 {
        return Err(Error::DegenerateDemo(
            "need at least two raw samples and two output points".into(),
        ));
    }
    let positions: Vec<_> = raw.iter().map(|s| s.position).collect();
    let s = cumulative_lengths(&positions);
    let total = *s.last().expect("non-empty");
    if total < T::lit(MIN_ARC_LENGTH) {
        return Err(Error::DegenerateDemo(format!(
            "arc length {:.3e} m below {MIN_ARC_LENGTH:e} m",
            total.as_f64()
        )));
    }
    let duration = raw[raw.len() - 1].t - raw[0].t;
    if !(duration > T::zero()) {
        return Err(Error::DegenerateDemo("non-positive duration".into()));
    }

    let mut points = Vec::with_capacity(n);
    let mut seg = 0;
    let last = T::from_usize_lossy(n - 1);
    for k in 0..n {
        let target = if k == n - 1 {
            total
        } else {
            total * T::from_usize_lossy(k) / last
        };
        while seg + 2 < s.len() && s[seg + 1] < target {
            seg += 1;
        }
        let len = s[seg + 1] - s[seg];
        let frac = if len > T::zero() {
            ((target - s[seg]) / len).clamp(T::zero(), T::one())
        } else {
            T::zero()
        };
        points.push(positions[seg] + (positions[seg + 1] - positions[seg]) * frac);
    }
    let dt = duration / last;
    let velocities = finite_difference_velocities(&points, dt);
    Ok(DemonstrationPath {
        points,
        velocities,
        dt,
    })
}

/// `n` evenly spaced collinear points from the first to the last point of
/// the demonstration.
///
/// Near-closed demonstrations (end within 5 % of the arc length of the
/// start) get their goal pushed one resample step further along the final
/// tangent so the line does not collapse.
pub fn source_line<T: Real>(demo: &DemonstrationPath<T>) -> Result<Vec<Vector3<T>>> {
    let y = &demo.points;
    let n = y.len();
    if n < 2 {
        return Err(Error::DegenerateDemo("demonstration has fewer than 2 points".into()));
    }
    let start = y[0];
    let mut end = y[n - 1];
    let chord = (end - start).norm();
    let length = demo.arc_length();
    if chord <= T::lit(1e-12) {
        return Err(Error::DegenerateDemo("start and end coincide".into()));
    }
    if chord < length * T::lit(0.05) {
        let step = length / T::from_usize_lossy(n - 1);
        let tangent = (y[n - 1] - y[n - 2]).normalize();
        end += tangent * step;
    }
    let last = T::from_usize_lossy(n - 1);
    Ok((0..n)
        .map(|i| start + (end - start) * (T::from_usize_lossy(i) / last))
        .collect())
}

impl<T: Real> DemonstrationPath<T> {
    /// Builds a path from already uniformly spaced points.
    pub fn from_points(points: Vec<Vector3<T>>, dt: T) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegenerateDemo("need at least 2 points".into()));
        }
        let velocities = finite_difference_velocities(&points, dt);
        Ok(Self {
            points,
            velocities,
            dt,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> Vector3<T> {
        self.points[0]
    }

    pub fn goal(&self) -> Vector3<T> {
        self.points[self.points.len() - 1]
    }

    pub fn duration(&self) -> T {
        self.dt * T::from_usize_lossy(self.points.len().saturating_sub(1))
    }

    pub fn arc_length(&self) -> T {
        *cumulative_lengths(&self.points).last().unwrap_or(&T::zero())
    }

    pub fn translated(&self, offset: &Vector3<T>) -> Self {
        Self {
            points: self.points.iter().map(|p| p + offset).collect(),
            velocities: self.velocities.clone(),
            dt: self.dt,
        }
    }

    /// Distance from `p` to the polyline through the points.
    pub fn distance_to(&self, p: &Vector3<T>) -> T {
        self.points
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                let l2 = d.norm_squared();
                let s = if l2 > T::zero() {
                    ((p - w[0]).dot(&d) / l2).clamp(T::zero(), T::one())
                } else {
                    T::zero()
                };
                (w[0] + d * s - p).norm()
            })
            .fold(T::max_value().unwrap_or(T::lit(f64::MAX)), |a, b| a.min(b))
    }

    /// Raw samples (t, position) of this path, one per point.
    pub fn samples(&self) -> Vec<TimedSample<T>> {
        self.points
            .iter()
            .enumerate()
            .map(|(i, p)| TimedSample {
                t: self.dt * T::from_usize_lossy(i),
                position: *p,
            })
            .collect()
    }
}

/// Reads a demonstration CSV with header `t,x,y,z` (seconds, meters).
pub fn read_samples_csv<T: Real, R: BufRead>(reader: R) -> Result<Vec<TimedSample<T>>> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "line {}: expected 4 columns t,x,y,z",
                lineno + 1
            )));
        }
        if lineno == 0 && fields[0].parse::<f64>().is_err() {
            if fields != ["t", "x", "y", "z"] {
                return Err(Error::Parse(format!("unexpected header {line:?}")));
            }
            continue;
        }
        let mut v = [0.0f64; 4];
        for (dst, f) in v.iter_mut().zip(&fields) {
            *dst = f
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
            if !dst.is_finite() {
                return Err(Error::Parse(format!("line {}: non-finite value", lineno + 1)));
            }
        }
        out.push(TimedSample {
            t: T::lit(v[0]),
            position: Vector3::new(T::lit(v[1]), T::lit(v[2]), T::lit(v[3])),
        });
    }
    Ok(out)
}

pub fn write_samples_csv<T: Real, W: Write>(mut w: W, samples: &[TimedSample<T>]) -> Result<()> {
    writeln!(w, "t,x,y,z")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{}",
            s.t.as_f64(),
            s.position.x.as_f64(),
            s.position.y.as_f64(),
            s.position.z.as_f64()
        )?;
    }
    Ok(())
}
