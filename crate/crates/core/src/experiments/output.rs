//! Tabular CSV, per-curve plot data, JSON and run manifests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::fringe::InterferenceSweep;
use super::runners::{DimensionRow, LossSweep, MatrixExperiment};
use crate::protocol::Bb84Label;
use crate::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "QLINK_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::invalid(format!("unknown format `{s}` (expected csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// One plotted series with error bars.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
}

pub fn curves_csv(curves: &[Curve]) -> String {
    let mut out = String::from("curve,x,y,sigma\n");
    for c in curves {
        for i in 0..c.x.len() {
            let _ = writeln!(out, "{},{},{},{}", c.name, c.x[i], c.y[i], c.sigma[i]);
        }
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| x.to_string())
}

/// A runner result that can be written to disk.
pub trait Experiment: Serialize {
    fn runner(&self) -> &'static str;
    fn table(&self) -> Table;
    fn curves(&self) -> Vec<Curve> {
        Vec::new()
    }
    /// Headline numbers, echoed in the manifest.
    fn summary(&self) -> Vec<(String, String)>;
}

impl Experiment for InterferenceSweep {
    fn runner(&self) -> &'static str {
        "sweep"
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["alice_phase_rad", "counts_d0", "counts_d1", "sigma_d0", "sigma_d1"]);
        for p in &self.points {
            t.rows.push(vec![
                p.alice_phase_rad.to_string(),
                p.counts[0].to_string(),
                p.counts[1].to_string(),
                p.sigma[0].to_string(),
                p.sigma[1].to_string(),
            ]);
        }
        t
    }

    fn curves(&self) -> Vec<Curve> {
        (0..self.fits.len())
            .map(|k| Curve {
                name: format!("detector_{k}"),
                x: self.points.iter().map(|p| p.alice_phase_rad).collect(),
                y: self.points.iter().map(|p| p.counts[k] as f64).collect(),
                sigma: self.points.iter().map(|p| p.sigma[k]).collect(),
            })
            .collect()
    }

    fn summary(&self) -> Vec<(String, String)> {
        let mut s = vec![("no_counts".to_string(), self.no_counts.to_string())];
        for (k, f) in self.fits.iter().enumerate() {
            s.push((format!("visibility_d{k}"), opt(f.map(|f| f.visibility))));
            s.push((format!("visibility_sigma_d{k}"), opt(f.map(|f| f.visibility_sigma))));
            s.push((format!("fringe_phase_rad_d{k}"), opt(f.map(|f| f.phase_rad))));
            s.push((format!("analytic_visibility_d{k}"), self.analytic_visibility[k].to_string()));
        }
        s.push(("detector_phase_offset_rad".into(), opt(self.detector_phase_offset())));
        s
    }
}

impl Experiment for MatrixExperiment {
    fn runner(&self) -> &'static str {
        "matrix"
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["sent", "projected", "probability", "sigma", "counts", "analytic"]);
        for sent in Bb84Label::ALL {
            for proj in Bb84Label::ALL {
                let (i, j) = (sent.index(), proj.index());
                t.rows.push(vec![
                    sent.name().to_string(),
                    proj.name().to_string(),
                    self.matrix.probabilities[i][j].to_string(),
                    self.matrix.sigma[i][j].to_string(),
                    self.matrix.counts[i][j].to_string(),
                    self.analytic[i][j].to_string(),
                ]);
            }
        }
        t
    }

    fn curves(&self) -> Vec<Curve> {
        Bb84Label::ALL
            .iter()
            .map(|sent| Curve {
                name: sent.name().to_string(),
                x: (0..4).map(|j| j as f64).collect(),
                y: self.matrix.probabilities[sent.index()].to_vec(),
                sigma: self.matrix.sigma[sent.index()].to_vec(),
            })
            .collect()
    }

    fn summary(&self) -> Vec<(String, String)> {
        vec![
            ("mean_diagonal".into(), self.mean_diagonal.to_string()),
            ("diagonal_sd".into(), self.diagonal_sd.to_string()),
            ("implied_visibility".into(), self.implied_visibility.to_string()),
            ("low_statistics".into(), self.matrix.low_statistics.to_string()),
        ]
    }
}

impl Experiment for LossSweep {
    fn runner(&self) -> &'static str {
        "losssweep"
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&[
            "added_loss_db",
            "equivalent_km",
            "qber",
            "key_fraction",
            "dark_share_points",
            "signal_per_gate",
        ]);
        for r in &self.rows {
            t.rows.push(
                [r.added_loss_db, r.equivalent_km, r.qber, r.key_fraction, r.dark_share_points, r.signal_per_gate]
                    .iter()
                    .map(f64::to_string)
                    .collect(),
            );
        }
        t
    }

    fn curves(&self) -> Vec<Curve> {
        vec![Curve {
            name: "qber".into(),
            x: self.rows.iter().map(|r| r.added_loss_db).collect(),
            y: self.rows.iter().map(|r| r.qber).collect(),
            sigma: vec![0.0; self.rows.len()],
        }]
    }

    fn summary(&self) -> Vec<(String, String)> {
        vec![
            ("qber_limit".into(), self.spec.qber_limit.to_string()),
            ("threshold_db".into(), opt(self.threshold_db)),
            ("threshold_km".into(), opt(self.threshold_km)),
            ("threshold_reached".into(), self.threshold_db.is_some().to_string()),
        ]
    }
}

/// Wrapper so the dimension table can be written like the other results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionTable {
    pub lantern_loss_db: f64,
    pub rows: Vec<DimensionRow>,
}

impl Experiment for DimensionTable {
    fn runner(&self) -> &'static str {
        "dimtable"
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["dimension", "time_bin_sift", "lantern_transmission", "detection_gain"]);
        for r in &self.rows {
            t.rows.push(vec![
                r.dimension.to_string(),
                r.time_bin_sift.to_string(),
                r.lantern_transmission.to_string(),
                r.detection_gain.to_string(),
            ]);
        }
        t
    }

    fn curves(&self) -> Vec<Curve> {
        vec![Curve {
            name: "detection_gain".into(),
            x: self.rows.iter().map(|r| r.dimension as f64).collect(),
            y: self.rows.iter().map(|r| r.detection_gain).collect(),
            sigma: vec![0.0; self.rows.len()],
        }]
    }

    fn summary(&self) -> Vec<(String, String)> {
        vec![("lantern_loss_db".into(), self.lantern_loss_db.to_string())]
    }
}

/// Everything needed to name and stamp one run's files.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub seed: u64,
    /// Seconds since the Unix epoch; only used in file names.
    pub timestamp: u64,
    pub dir: PathBuf,
    pub format: Format,
    /// Canonical `key = value` lines of the resolved configuration.
    pub config_echo: String,
}

/// Output directory: explicit flag, then `QLINK_OUTPUT_DIR`, then the working directory.
pub fn resolve_output_dir(flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("."),
    }
}

/// Manifest text. Contains no timestamp, so identical runs give identical manifests.
pub fn manifest<E: Experiment>(exp: &E, ctx: &RunContext) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "runner = {}", exp.runner());
    let _ = writeln!(out, "seed = {}", ctx.seed);
    let _ = writeln!(out, "qlink_core_version = {}", env!("CARGO_PKG_VERSION"));
    out.push_str("\n# configuration\n");
    out.push_str(&ctx.config_echo);
    if !ctx.config_echo.ends_with('\n') && !ctx.config_echo.is_empty() {
        out.push('\n');
    }
    out.push_str("\n# summary\n");
    for (k, v) in exp.summary() {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Writes `<runner>_<timestamp>_<seed>` data, plot data and manifest files,
/// returning their paths.
pub fn write_outputs<E: Experiment>(exp: &E, ctx: &RunContext) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&ctx.dir)?;
    let stem = format!("{}_{}_{}", exp.runner(), ctx.timestamp, ctx.seed);
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = ctx.dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    match ctx.format {
        Format::Csv => {
            put(format!("{stem}.csv"), exp.table().to_csv())?;
            let curves = exp.curves();
            if !curves.is_empty() {
                put(format!("{stem}.plot.csv"), curves_csv(&curves))?;
            }
        }
        Format::Json => {
            let body = serde_json::to_string_pretty(exp).map_err(|e| Error::invalid(e.to_string()))?;
            put(format!("{stem}.json"), body + "\n")?;
        }
    }
    put(format!("{stem}.manifest.txt"), manifest(exp, ctx))?;
    Ok(written)
}
