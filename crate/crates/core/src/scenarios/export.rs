//! Columnar traces and plot-ready figure files.
//!
//! Runs store their traces as CSV tables (`<run>/trace/<name>.csv`, one
//! header line). [`export_plots`] turns a trace directory into
//! whitespace-separated `.dat` files, one per figure panel, each starting
//! with a `#` header line. Missing or empty traces yield header-only files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// A named table of `f64` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(name: &str, reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("{name}: missing header")))??;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse(format!("{name} line {}: {e}", k + 2)))?;
            if row.len() != columns.len() {
                return Err(Error::Parse(format!("{name} line {}: expected {} columns", k + 2, columns.len())));
            }
            rows.push(row);
        }
        Ok(Self {
            name: name.into(),
            columns,
            rows,
        })
    }

    /// Plain whitespace-separated columns with a `#` header.
    pub fn write_dat<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", self.columns.join(" "))?;
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|v| format!("{v:.9e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

pub fn write_tables(dir: &Path, tables: &[Table]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for t in tables {
        t.write_csv(std::io::BufWriter::new(fs::File::create(dir.join(format!("{}.csv", t.name)))?))?;
    }
    Ok(())
}

pub fn read_tables(dir: &Path) -> Result<BTreeMap<String, Table>> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Err(Error::InvalidInput(format!("trace directory not found: {}", dir.display())));
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let t = Table::read_csv(&name, std::io::BufReader::new(fs::File::open(&path)?))?;
        out.insert(name, t);
    }
    Ok(out)
}

/// Trace table names and their columns, as written by the runners.
pub mod traces {
    pub const DEMO: (&str, &[&str]) = ("demo", &["x", "y", "z"]);
    pub const REPRODUCTION: (&str, &[&str]) =
        ("reproduction", &["t", "x", "y", "z", "error", "bias_x", "bias_y", "bias_z"]);
    pub const BASELINE: (&str, &[&str]) = ("reproduction_baseline", &["t", "x", "y", "z", "error"]);
    pub const TEACH_GC: (&str, &[&str]) = ("teach_gc", &["t", "fx", "fy", "fz", "vx", "vy", "vz", "axis"]);
    pub const TEACH_OPT: (&str, &[&str]) = ("teach_opt", &["t", "fx", "fy", "fz", "vx", "vy", "vz", "axis"]);
    pub const PULL: (&str, &[&str]) = ("pull", &["t", "x", "r_min", "gate", "force"]);
    pub const COMPLY_JOINTS: (&str, &[&str]) =
        ("comply_joint_deviation", &["t", "dq1", "dq2", "dq3", "dq4", "dq5", "dq6", "dq7"]);
    pub const COMPLY_EE: (&str, &[&str]) = ("comply_ee", &["t", "x", "y", "z", "dz", "path_dev", "rigid_path_dev"]);
}

/// Figure files written by [`export_plots`], with their columns.
pub const FIGURES: &[(&str, &[&str])] = &[
    (
        "fig_reproduction_overlay",
        &["demo_x", "demo_y", "demo_z", "repro_x", "repro_y", "repro_z"],
    ),
    ("fig_reproduction_error", &["t", "error_cm", "baseline_t", "baseline_error_cm"]),
    ("fig_ekf_bias", &["t", "bias_x", "bias_y", "bias_z"]),
    ("fig_teach_force_gc", &["fx", "fy", "fz"]),
    ("fig_teach_force_opt", &["fx", "fy", "fz"]),
    ("fig_pull", &["x", "force", "r_min", "gate"]),
    ("fig_comply_joint_deviation", &["t", "dq1", "dq2", "dq3", "dq4", "dq5", "dq6", "dq7"]),
    ("fig_comply_path", &["t", "path_dev_mm", "rigid_path_dev_mm", "z_mm"]),
];

fn cols(t: Option<&Table>, names: &[&str]) -> Vec<Vec<f64>> {
    match t {
        Some(t) => names.iter().map(|n| t.column(n).unwrap_or_default()).collect(),
        None => names.iter().map(|_| Vec::new()).collect(),
    }
}

fn zip_rows(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = columns.iter().map(Vec::len).min().unwrap_or(0);
    (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
}

/// Resamples a polyline to `n` points equally spaced in arc length.
pub fn resample_polyline(points: &[[f64; 3]], n: usize) -> Vec<[f64; 3]> {
    if points.is_empty() || n == 0 {
        return Vec::new();
    }
    let mut s = vec![0.0];
    for w in points.windows(2) {
        let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2) + (w[1][2] - w[0][2]).powi(2)).sqrt();
        s.push(s.last().unwrap() + d);
    }
    let total = *s.last().unwrap();
    if total == 0.0 || n == 1 {
        return vec![points[0]; n];
    }
    (0..n)
        .map(|k| {
            let target = total * k as f64 / (n - 1) as f64;
            let i = s.partition_point(|v| *v < target).clamp(1, points.len() - 1);
            let w = ((target - s[i - 1]) / (s[i] - s[i - 1]).max(1e-300)).clamp(0.0, 1.0);
            std::array::from_fn(|c| points[i - 1][c] * (1.0 - w) + points[i][c] * w)
        })
        .collect()
}

/// Builds every figure table from the traces present in `tables`.
pub fn figure_tables(tables: &BTreeMap<String, Table>) -> Vec<Table> {
    let get = |name: &str| tables.get(name);
    let mut figs: Vec<Table> = FIGURES.iter().map(|(n, c)| Table::new(n, c)).collect();

    let demo = zip_rows(&cols(get(traces::DEMO.0), &["x", "y", "z"]));
    let repro = zip_rows(&cols(get(traces::REPRODUCTION.0), &["x", "y", "z"]));
    if !demo.is_empty() && !repro.is_empty() {
        let r: Vec<[f64; 3]> = repro.iter().map(|p| [p[0], p[1], p[2]]).collect();
        let matched = resample_polyline(&r, demo.len());
        figs[0].rows = demo.iter().zip(&matched).map(|(d, m)| vec![d[0], d[1], d[2], m[0], m[1], m[2]]).collect();
    }

    let e = cols(get(traces::REPRODUCTION.0), &["t", "error"]);
    let b = cols(get(traces::BASELINE.0), &["t", "error"]);
    let n = e[0].len().max(b[0].len());
    let at = |v: &Vec<f64>, i: usize, scale: f64| v.get(i).map_or(f64::NAN, |x| x * scale);
    figs[1].rows = (0..n)
        .map(|i| vec![at(&e[0], i, 1.0), at(&e[1], i, 100.0), at(&b[0], i, 1.0), at(&b[1], i, 100.0)])
        .collect();

    figs[2].rows = zip_rows(&cols(get(traces::REPRODUCTION.0), &["t", "bias_x", "bias_y", "bias_z"]));
    figs[3].rows = zip_rows(&cols(get(traces::TEACH_GC.0), &["fx", "fy", "fz"]));
    figs[4].rows = zip_rows(&cols(get(traces::TEACH_OPT.0), &["fx", "fy", "fz"]));
    figs[5].rows = zip_rows(&cols(get(traces::PULL.0), &["x", "force", "r_min", "gate"]));
    figs[6].rows = zip_rows(&cols(get(traces::COMPLY_JOINTS.0), traces::COMPLY_JOINTS.1));
    figs[7].rows = zip_rows(&cols(get(traces::COMPLY_EE.0), &["t", "path_dev", "rigid_path_dev", "dz"]))
        .into_iter()
        .map(|r| vec![r[0], r[1] * 1e3, r[2] * 1e3, r[3] * 1e3])
        .collect();
    figs
}

/// Writes one `.dat` file per figure into `out_dir` and returns the paths.
pub fn export_plots(trace_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = read_tables(trace_dir)?;
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    for fig in figure_tables(&tables) {
        let path = out_dir.join(format!("{}.dat", fig.name));
        fig.write_dat(std::io::BufWriter::new(fs::File::create(&path)?))?;
        written.push(path);
    }
    Ok(written)
}
