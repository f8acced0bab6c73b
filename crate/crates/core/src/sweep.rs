//! Parameter sweeps and the detuning curve family (Gaussian, optimal and
//! parasitic-free control) comparing storage-and-retrieval efficiencies.
//!
//! Points are independent jobs on a rayon pool; results are collected in
//! input order, so tables never depend on the worker count.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{parse_assignment, set_path, Config, GridConfig};
use crate::domain::PulseEnvelope;
use crate::consts::TWO_PI;
use crate::error::{Error, Result};
use crate::optimizer::optimize_control;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// One-photon detuning Δ/2π, Hz.
    Delta,
    /// Optical depth (same convention as `medium.od`).
    Od,
    /// Peak Rabi frequency of the Gaussian control pulses, rad/s.
    ControlPeak,
    /// Write-to-read separation, s.
    StorageTime,
}

impl SweepAxis {
    pub fn column(self) -> &'static str {
        match self {
            SweepAxis::Delta => "delta_hz",
            SweepAxis::Od => "od",
            SweepAxis::ControlPeak => "control_peak_rad_s",
            SweepAxis::StorageTime => "storage_time_s",
        }
    }

    fn apply(self, cfg: &mut Config, value: f64) {
        match self {
            SweepAxis::Delta => cfg.signal.detuning = TWO_PI * value,
            SweepAxis::Od => cfg.medium.od = value,
            SweepAxis::ControlPeak => {
                cfg.control.use_beam = false;
                cfg.control.peak_rabi = value;
                cfg.control.peak_scale = 1.0;
            }
            SweepAxis::StorageTime => cfg.protocol.storage_time = value,
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta" => Ok(SweepAxis::Delta),
            "od" => Ok(SweepAxis::Od),
            "control_peak" => Ok(SweepAxis::ControlPeak),
            "storage_time" => Ok(SweepAxis::StorageTime),
            other => Err(Error::invalid(
                "sweep.axis",
                format!("`{other}` is not one of delta, od, control_peak, storage_time"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoParasitic,
    /// `key=value` overrides applied on top of the base configuration.
    Custom(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// The configured Gaussian write/read pulses.
    #[default]
    Gaussian,
    /// Pulses optimized per point, starting from the configured Gaussians.
    Optimal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub variant: Variant,
    pub control: ControlMode,
    /// Grid on which optimal pulses are computed before being resampled and
    /// evaluated on the base grid; `None` optimizes on the base grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize_on: Option<GridConfig>,
    pub base: Config,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>, base: Config) -> Self {
        SweepSpec {
            axis,
            values,
            variant: Variant::Full,
            control: ControlMode::Gaussian,
            optimize_on: None,
            base,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep.values", "at least one value is required"));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("sweep.values", format!("non-finite value {v}")));
        }
        // the base must resolve even before the axis value is applied
        self.variant_config()?.scenario()?;
        Ok(())
    }

    /// Base configuration with the variant applied.
    pub fn variant_config(&self) -> Result<Config> {
        let mut cfg = self.base.clone();
        match &self.variant {
            Variant::Full => {}
            Variant::NoParasitic => cfg.medium.include_parasitic = false,
            Variant::Custom(sets) => cfg = with_overrides(&cfg, sets)?,
        }
        Ok(cfg)
    }

    /// Fully resolved configuration of one point.
    pub fn point_config(&self, value: f64) -> Result<Config> {
        let mut cfg = self.variant_config()?;
        self.axis.apply(&mut cfg, value);
        Ok(cfg)
    }
}

/// Applies `key=value` overrides to a configuration.
pub fn with_overrides(cfg: &Config, sets: &[String]) -> Result<Config> {
    if sets.is_empty() {
        return Ok(cfg.clone());
    }
    let mut table = toml::Table::try_from(cfg).map_err(|e| Error::Config {
        key: "<config>".into(),
        message: e.to_string(),
    })?;
    for s in sets {
        let (k, v) = parse_assignment(s)?;
        set_path(&mut table, &k, v)?;
    }
    Config::from_table(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PointStatus {
    Ok,
    Failed(String),
}

impl PointStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, PointStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub eta_total: f64,
    pub eta_storage: f64,
    pub leakage: f64,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.status.is_ok()).count()
    }

    /// Row with the largest `eta_total` among successful points.
    pub fn peak(&self) -> Option<&SweepRow> {
        self.rows
            .iter()
            .filter(|r| r.status.is_ok())
            .max_by(|a, b| a.eta_total.total_cmp(&b.eta_total))
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},eta_total,eta_storage,leakage,status\n", self.axis.column());
        for r in &self.rows {
            let status = match &r.status {
                PointStatus::Ok => "ok".to_string(),
                // keep the CSV one record per line and comma-free
                PointStatus::Failed(m) => format!("failed: {}", m.replace([',', '\n'], ";")),
            };
            let _ = writeln!(out, "{},{},{},{},{}", r.axis_value, r.eta_total, r.eta_storage, r.leakage, status);
        }
        out
    }
}

fn evaluate(cfg: &Config, mode: ControlMode, optimize_on: Option<&GridConfig>) -> Result<(f64, f64, f64)> {
    let scenario = cfg.scenario()?;
    let control = match mode {
        ControlMode::Gaussian => scenario.control.clone(),
        ControlMode::Optimal => {
            let ocfg = cfg.optimizer_config()?;
            let mut opt_cfg = cfg.clone();
            if let Some(g) = optimize_on {
                opt_cfg.grid = g.clone();
            }
            let s = opt_cfg.scenario()?;
            let optimized = optimize_control(&s.medium, &s.grid, &s.signal, &s.control, s.delta, &s.timing, &ocfg)?.control;
            if optimize_on.is_some() {
                resample(&optimized, &scenario.control)?
            } else {
                optimized
            }
        }
    };
    let r = crate::solver::solve(
        &scenario.medium,
        &scenario.grid,
        &scenario.signal,
        &control,
        scenario.delta,
        &scenario.timing,
    )?;
    Ok((r.eta_total, r.eta_storage, r.leakage))
}

/// Linear interpolation of `from` onto the sampling of `like`; the peak
/// cannot grow, so a feasible pulse stays feasible.
fn resample(from: &PulseEnvelope, like: &PulseEnvelope) -> Result<PulseEnvelope> {
    let amp = (0..like.len()).map(|n| from.value_at(like.time(n))).collect();
    PulseEnvelope::new(like.t0(), like.dt(), amp)
}

fn row(value: f64, result: Result<(f64, f64, f64)>) -> SweepRow {
    match result {
        Ok((eta_total, eta_storage, leakage)) => SweepRow {
            axis_value: value,
            eta_total,
            eta_storage,
            leakage,
            status: PointStatus::Ok,
        },
        Err(e) => SweepRow {
            axis_value: value,
            eta_total: f64::NAN,
            eta_storage: f64::NAN,
            leakage: f64::NAN,
            status: PointStatus::Failed(e.to_string()),
        },
    }
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    if parallelism == 0 {
        return Err(Error::invalid("parallelism", "must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))
}

/// Runs every point of `spec` on `parallelism` workers. Failed points are
/// recorded in the status column; rows are sorted by axis value.
pub fn run_sweep(spec: &SweepSpec, parallelism: usize) -> Result<SweepTable> {
    let mut tables = run_many(std::slice::from_ref(spec), parallelism)?;
    Ok(tables.remove(0))
}

/// Runs several sweeps as one pool of independent jobs.
pub fn run_many(specs: &[SweepSpec], parallelism: usize) -> Result<Vec<SweepTable>> {
    for s in specs {
        s.validate()?;
    }
    let jobs: Vec<(usize, f64)> = specs
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.values.iter().map(move |&v| (i, v)))
        .collect();
    let rows: Vec<(usize, SweepRow)> = pool(parallelism)?.install(|| {
        jobs.par_iter()
            .map(|&(i, v)| {
                let spec = &specs[i];
                let result = spec
                    .point_config(v)
                    .and_then(|cfg| evaluate(&cfg, spec.control, spec.optimize_on.as_ref()));
                (i, row(v, result))
            })
            .collect()
    });
    let mut tables: Vec<SweepTable> = specs
        .iter()
        .map(|s| SweepTable {
            axis: s.axis,
            rows: Vec::with_capacity(s.values.len()),
        })
        .collect();
    for (i, r) in rows {
        tables[i].rows.push(r);
    }
    for t in &mut tables {
        t.rows.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value));
    }
    Ok(tables)
}

/// `n` uniformly spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n)
            .map(|i| start + (end - start) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Settings of the five-curve detuning comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Figure4Settings {
    /// Δ/2π values for the Gaussian-control curves, Hz.
    pub gaussian_deltas: Vec<f64>,
    /// Δ/2π values for the optimized curves, Hz; each point is a full
    /// optimization, so this grid is coarser.
    pub optimal_deltas: Vec<f64>,
    /// Peak Rabi multiplier of the strong Gaussian curve and of the
    /// optimizer cap.
    pub peak_factor: f64,
    /// Optical depth of the high-density parasitic-free curve.
    pub high_od: f64,
    /// Report efficiencies without the dark-time decay.
    pub intrinsic: bool,
    /// Optional coarser grid for the optimizations; results are always
    /// evaluated on the base grid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimization_grid: Option<GridConfig>,
}

impl Default for Figure4Settings {
    fn default() -> Self {
        Figure4Settings {
            gaussian_deltas: linspace(-2.0e9, 0.5e9, 61),
            optimal_deltas: linspace(-2.0e9, 0.5e9, 11),
            peak_factor: 4.0,
            high_od: 35.0,
            intrinsic: true,
            optimization_grid: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Curve {
    /// Short identifier used for file names: `ii` … `vi`.
    pub id: String,
    pub label: String,
    pub spec: SweepSpec,
    pub table: SweepTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Figure4 {
    pub settings: Figure4Settings,
    pub curves: Vec<Curve>,
}

impl Figure4 {
    pub fn curve(&self, id: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.id == id)
    }

    /// Peak efficiency of each curve in order.
    pub fn peaks(&self) -> Vec<(String, f64)> {
        self.curves
            .iter()
            .map(|c| (c.id.clone(), c.table.peak().map_or(f64::NAN, |r| r.eta_total)))
            .collect()
    }

    pub fn failures(&self) -> usize {
        self.curves.iter().map(|c| c.table.failures()).sum()
    }
}

/// Curve specifications: (ii) Gaussian at the configured peak, (iii)
/// Gaussian at `peak_factor`×, (iv) optimized within a `peak_factor`× cap,
/// (v) as (iv) without the parasitic level, (vi) as (v) at `high_od`.
pub fn figure4_specs(base: &Config, settings: &Figure4Settings) -> Result<Vec<(String, String, SweepSpec)>> {
    let mut base = base.clone();
    if settings.intrinsic {
        base.protocol.dark_decay = false;
    }
    let mut strong = base.clone();
    strong.control.peak_scale *= settings.peak_factor;
    strong.optimizer.cap_scale = settings.peak_factor * base.control.peak_scale;
    let mut dense = strong.clone();
    dense.medium.od = settings.high_od;

    let gaussian = |cfg: &Config| SweepSpec::new(SweepAxis::Delta, settings.gaussian_deltas.clone(), cfg.clone());
    let optimal = |cfg: &Config, variant: Variant| SweepSpec {
        axis: SweepAxis::Delta,
        values: settings.optimal_deltas.clone(),
        variant,
        control: ControlMode::Optimal,
        optimize_on: settings.optimization_grid.clone(),
        base: cfg.clone(),
    };
    let k = settings.peak_factor;
    let od = base.medium.od;
    Ok(vec![
        ("ii".into(), "Gaussian control, 1× peak".into(), gaussian(&base)),
        ("iii".into(), format!("Gaussian control, {k}× peak"), gaussian(&strong)),
        ("iv".into(), format!("optimal control, {k}× cap"), optimal(&strong, Variant::Full)),
        (
            "v".into(),
            format!("optimal control, no parasitic level, OD {od}"),
            optimal(&strong, Variant::NoParasitic),
        ),
        (
            "vi".into(),
            format!("optimal control, no parasitic level, OD {}", settings.high_od),
            optimal(&dense, Variant::NoParasitic),
        ),
    ])
}

pub fn figure4_suite(base: &Config, settings: &Figure4Settings, parallelism: usize) -> Result<Figure4> {
    let specs = figure4_specs(base, settings)?;
    let plain: Vec<SweepSpec> = specs.iter().map(|(_, _, s)| s.clone()).collect();
    let tables = run_many(&plain, parallelism)?;
    let curves = specs
        .into_iter()
        .zip(tables)
        .map(|((id, label, spec), table)| Curve { id, label, spec, table })
        .collect();
    Ok(Figure4 {
        settings: settings.clone(),
        curves,
    })
}
