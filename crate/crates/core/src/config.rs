//! Scenario configuration: TOML files, `key=value` overrides and `EITSIM_`
//! environment variables, resolved into the physics objects the solver needs.
//!
//! Precedence, lowest first: built-in defaults, the config file, `--set`
//! overrides, environment variables. Every key is checked against
//! [`KEYS`] before deserialization so schema errors name the offending key.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::consts::TWO_PI;
use crate::counting::CountRecord;
use crate::domain::{
    make_signal_pulse, make_write_read_control, rabi_from_beam, rb87_d1_levels, ControlBeam, ExcitedLevel,
    MediumSpec, OdConvention, ProtocolTiming, PulseEnvelope, SimGrid, RB_D1_NATURAL_LINEWIDTH_HZ,
};
use crate::error::{Error, Result};
use crate::optimizer::{ControlConstraint, OptimizerConfig};
use crate::solver::{solve, MemoryResult};
use crate::spectrum::calibrate_flat_top;

pub const ENV_PREFIX: &str = "EITSIM_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    Float,
    Int,
    Bool,
    Enum(&'static [&'static str]),
    Levels,
}

/// Documentation entry for one configuration key.
#[derive(Debug, Clone, Copy)]
pub struct KeyDoc {
    pub key: &'static str,
    pub kind: KeyKind,
    pub default: &'static str,
    pub doc: &'static str,
}

const fn key(key: &'static str, kind: KeyKind, default: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc {
        key,
        kind,
        default,
        doc,
    }
}

use KeyKind::*;

/// Every accepted configuration key.
pub const KEYS: &[KeyDoc] = &[
    key("medium.od", Float, "5", "resonant optical depth of the F=1→F'=1 line (intensity, e^-od)"),
    key(
        "medium.od_convention",
        Enum(&["doppler_broadened", "homogeneous"]),
        "doppler_broadened",
        "whether medium.od is the Doppler-broadened line-centre OD or the unbroadened one",
    ),
    key("medium.cell_length", Float, "0.0375", "cell length, m (informational)"),
    key("medium.gamma_e", Float, "1.806e7", "excited-state coherence decay (HWHM), rad/s"),
    key("medium.doppler_fwhm", Float, "5e8", "Doppler FWHM, Hz"),
    key("medium.gamma_s", Float, "0", "spin-wave decay during the pulses, rad/s"),
    key("medium.lifetime_tau", Float, "6.8e-8", "1/e memory lifetime of the Gaussian dark-time decay, s"),
    key(
        "medium.parasitic_fraction",
        Float,
        "0.3333",
        "share of the F'=2 signal strength in the control-dark m=0 level",
    ),
    key("medium.include_parasitic", Bool, "true", "keep the parasitic absorber in the level scheme"),
    key(
        "medium.levels",
        Levels,
        "Rb87 D1",
        "explicit excited levels [{label, offset (rad/s), f_signal, f_control, reference}]; replaces the built-in scheme",
    ),
    key("beam.power_peak", Float, "0.12", "control peak power, W"),
    key("beam.waist_diameter_e2", Float, "5.25e-4", "control e^-2 intensity diameter, m"),
    key("beam.dipole_moment", Float, "2.54e-29", "transition dipole moment, C·m"),
    key("signal.rise_10_90", Float, "5e-10", "10-90 % amplitude rise time, s"),
    key("signal.fall_90_10", Float, "1e-9", "90-10 % amplitude fall time, s"),
    key(
        "signal.flat_top",
        Float,
        "calibrated",
        "flat-top duration, s; when absent it is calibrated to signal.target_bandwidth",
    ),
    key(
        "signal.target_bandwidth",
        Float,
        "6.6e8",
        "spectral FWHM of the detected intensity trace used to calibrate the flat top, Hz",
    ),
    key("signal.dt", Float, "5e-12", "sampling step of the signal envelope, s"),
    key(
        "signal.delay",
        Float,
        "4.4e-9",
        "signal centre relative to the write-pulse centre, s",
    ),
    key("signal.detuning", Float, "-5.655e9", "one-photon detuning Δ from F=1→F'=1, rad/s"),
    key("control.fwhm", Float, "5e-9", "Gaussian FWHM of the write and read pulses, s"),
    key("control.peak_rabi", Float, "3.770e9", "peak Rabi frequency Ω, rad/s"),
    key(
        "control.use_beam",
        Bool,
        "false",
        "derive the peak Rabi frequency from the [beam] section instead of control.peak_rabi",
    ),
    key("control.peak_scale", Float, "1", "multiplier applied to the peak Rabi frequency"),
    key("grid.nz", Int, "100", "spatial points along the cell"),
    key("grid.nt", Int, "4000", "time points"),
    key("grid.n_velocity", Int, "16", "Gauss-Hermite velocity classes"),
    key("grid.t_start", Float, "-1e-8", "start of the time grid, s"),
    key("grid.t_end", Float, "7.5e-8", "end of the time grid, s"),
    key("protocol.write_center", Float, "0", "centre of the write pulse, s"),
    key("protocol.storage_time", Float, "5e-8", "gap between write and read pulses, s"),
    key(
        "protocol.dark_decay",
        Bool,
        "true",
        "apply the Gaussian dark-time decay (false gives intrinsic efficiencies)",
    ),
    key("protocol.window_start", Float, "-1e-8", "retrieval window start relative to the read centre, s"),
    key("protocol.window_end", Float, "2.5e-8", "retrieval window end relative to the read centre, s"),
    key("counts.n_signal", Float, "required", "counts in the retrieval window with input"),
    key("counts.n_noise", Float, "required", "counts in the retrieval window without input"),
    key("counts.alpha2", Float, "required", "mean input photon number per pulse"),
    key("counts.eta_apd", Float, "required", "detector efficiency"),
    key("counts.f_rep", Float, "required", "repetition rate, Hz"),
    key("counts.t_int", Float, "required", "integration time, s"),
    key("counts.filter_attenuation", Float, "required", "linear signal attenuation of the filter path"),
    key(
        "counts.storage_time",
        Float,
        "protocol.storage_time",
        "storage time used for the decay correction, s",
    ),
    key(
        "counts.lifetime_tau",
        Float,
        "medium.lifetime_tau",
        "lifetime used for the decay correction, s",
    ),
    key(
        "optimizer.cap_scale",
        Float,
        "4",
        "peak cap as a multiple of the experimental peak Rabi frequency",
    ),
    key("optimizer.step_size", Float, "0.2", "initial step as a fraction of the cap"),
    key("optimizer.shrink_factor", Float, "0.5", "step multiplier after a rejected step"),
    key("optimizer.grow_factor", Float, "1.5", "step multiplier after an accepted step"),
    key("optimizer.max_iters", Int, "40", "iteration budget"),
    key("optimizer.tol", Float, "1e-4", "relative improvement below which the ascent stops"),
    key("optimizer.min_step", Float, "1e-4", "smallest step before giving up"),
    key("optimizer.optimize_write", Bool, "true", "optimize the write pulse"),
    key("optimizer.optimize_read", Bool, "true", "optimize the read pulse"),
    key(
        "optimizer.read_phase_fraction",
        Float,
        "0.25",
        "share of the iterations spent on the read pulse alone before joint optimization",
    ),
    key("optimizer.lowpass_cutoff", Float, "2e9", "low-pass cutoff of ascent directions, Hz (0 disables)"),
    key(
        "optimizer.energy_cap",
        Float,
        "0",
        "cap on ∫|Ω|²dt in rad²/s in addition to the peak cap (0 disables)",
    ),
];

/// Human-readable table of every key, its default and meaning.
pub fn key_reference() -> String {
    let width = KEYS.iter().map(|k| k.key.len()).max().unwrap_or(0);
    let mut out = String::new();
    let mut section = "";
    for k in KEYS {
        let s = k.key.split('.').next().unwrap_or("");
        if s != section {
            out.push_str(&format!("[{s}]\n"));
            section = s;
        }
        out.push_str(&format!(
            "  {:<width$}  {} (default: {})\n",
            k.key,
            k.doc,
            k.default,
            width = width
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MediumConfig {
    pub od: f64,
    pub od_convention: OdConvention,
    pub cell_length: f64,
    pub gamma_e: f64,
    pub doppler_fwhm: f64,
    pub gamma_s: f64,
    pub lifetime_tau: f64,
    pub parasitic_fraction: f64,
    pub include_parasitic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<ExcitedLevel>>,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            od: 5.0,
            od_convention: OdConvention::DopplerBroadened,
            cell_length: 37.5e-3,
            gamma_e: TWO_PI * RB_D1_NATURAL_LINEWIDTH_HZ / 2.0,
            doppler_fwhm: 500e6,
            gamma_s: 0.0,
            lifetime_tau: 68e-9,
            parasitic_fraction: 1.0 / 3.0,
            include_parasitic: true,
            levels: None,
        }
    }
}

impl MediumConfig {
    pub fn build(&self) -> Result<MediumSpec> {
        let mut levels = match &self.levels {
            Some(l) => l.clone(),
            None => rb87_d1_levels(self.parasitic_fraction)?,
        };
        if !self.include_parasitic {
            levels.retain(|l| !l.is_parasitic());
        }
        let medium = MediumSpec {
            od: self.od,
            od_convention: self.od_convention,
            cell_length: self.cell_length,
            gamma_e: self.gamma_e,
            doppler_fwhm: self.doppler_fwhm,
            levels,
            gamma_s: self.gamma_s,
            lifetime_tau: self.lifetime_tau,
        };
        medium.validate()?;
        Ok(medium)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalConfig {
    pub rise_10_90: f64,
    pub fall_90_10: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flat_top: Option<f64>,
    pub target_bandwidth: f64,
    pub dt: f64,
    pub delay: f64,
    pub detuning: f64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            rise_10_90: 0.5e-9,
            fall_90_10: 1.0e-9,
            flat_top: None,
            target_bandwidth: 0.66e9,
            dt: 5e-12,
            delay: 4.4e-9,
            detuning: -TWO_PI * 0.9e9,
        }
    }
}

impl SignalConfig {
    pub fn resolved_flat_top(&self) -> Result<f64> {
        match self.flat_top {
            Some(f) => Ok(f),
            None => calibrate_flat_top(self.rise_10_90, self.fall_90_10, self.dt, self.target_bandwidth),
        }
    }

    /// Unit-energy pulse centred at `center`.
    pub fn build(&self, center: f64) -> Result<PulseEnvelope> {
        let p = make_signal_pulse(self.rise_10_90, self.fall_90_10, self.resolved_flat_top()?, self.dt)?;
        let mid = 0.5 * (p.t0() + p.t_end());
        Ok(p.shifted(center - mid))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlConfig {
    pub fwhm: f64,
    pub peak_rabi: f64,
    pub use_beam: bool,
    pub peak_scale: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            fwhm: 5e-9,
            peak_rabi: TWO_PI * 600e6,
            use_beam: false,
            peak_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub nz: usize,
    pub nt: usize,
    pub n_velocity: usize,
    pub t_start: f64,
    pub t_end: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            nz: 100,
            nt: 4000,
            n_velocity: 16,
            t_start: -10e-9,
            t_end: 75e-9,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<SimGrid> {
        SimGrid::new(self.nz, self.nt, self.n_velocity, (self.t_start, self.t_end))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolConfig {
    pub write_center: f64,
    pub storage_time: f64,
    pub dark_decay: bool,
    pub window_start: f64,
    pub window_end: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            write_center: 0.0,
            storage_time: 50e-9,
            dark_decay: true,
            window_start: -10e-9,
            window_end: 25e-9,
        }
    }
}

impl ProtocolConfig {
    pub fn build(&self) -> Result<ProtocolTiming> {
        let read = self.write_center + self.storage_time;
        let timing = ProtocolTiming {
            storage_control_center: self.write_center,
            retrieval_control_center: read,
            storage_time: if self.dark_decay { self.storage_time } else { 0.0 },
            retrieval_window: (read + self.window_start, read + self.window_end),
        };
        timing.validate()?;
        Ok(timing)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountsConfig {
    pub n_signal: f64,
    pub n_noise: f64,
    pub alpha2: f64,
    pub eta_apd: f64,
    pub f_rep: f64,
    pub t_int: f64,
    pub filter_attenuation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub storage_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifetime_tau: Option<f64>,
}

impl CountsConfig {
    pub fn record(&self) -> CountRecord {
        CountRecord {
            n_signal: self.n_signal,
            n_noise: self.n_noise,
            alpha2: self.alpha2,
            eta_apd: self.eta_apd,
            f_rep: self.f_rep,
            t_int: self.t_int,
            filter_attenuation: self.filter_attenuation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSection {
    pub cap_scale: f64,
    pub step_size: f64,
    pub shrink_factor: f64,
    pub grow_factor: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub min_step: f64,
    pub optimize_write: bool,
    pub optimize_read: bool,
    pub read_phase_fraction: f64,
    pub lowpass_cutoff: f64,
    pub energy_cap: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let d = OptimizerConfig::default();
        OptimizerSection {
            cap_scale: 4.0,
            step_size: d.step_size,
            shrink_factor: d.shrink_factor,
            grow_factor: d.grow_factor,
            max_iters: d.max_iters,
            tol: d.tol,
            min_step: d.min_step,
            optimize_write: d.optimize_write,
            optimize_read: d.optimize_read,
            read_phase_fraction: d.read_phase_fraction,
            lowpass_cutoff: d.lowpass_cutoff.unwrap_or(0.0),
            energy_cap: 0.0,
        }
    }
}

impl OptimizerSection {
    /// Optimizer settings for a cap of `cap_scale` × `experimental_peak`.
    pub fn build(&self, experimental_peak: f64) -> Result<OptimizerConfig> {
        let cfg = OptimizerConfig {
            max_peak_rabi: self.cap_scale * experimental_peak,
            step_size: self.step_size,
            shrink_factor: self.shrink_factor,
            grow_factor: self.grow_factor,
            max_iters: self.max_iters,
            tol: self.tol,
            min_step: self.min_step,
            optimize_write: self.optimize_write,
            optimize_read: self.optimize_read,
            read_phase_fraction: self.read_phase_fraction,
            lowpass_cutoff: (self.lowpass_cutoff > 0.0).then_some(self.lowpass_cutoff),
            constraint: if self.energy_cap > 0.0 {
                ControlConstraint::EnergyCap {
                    max_pulse_area: self.energy_cap,
                }
            } else {
                ControlConstraint::PeakCap
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_beam() -> ControlBeam {
    ControlBeam {
        power_peak: 0.120,
        waist_diameter_e2: 525e-6,
        dipole_moment: 2.54e-29,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub medium: MediumConfig,
    pub beam: ControlBeam,
    pub signal: SignalConfig,
    pub control: ControlConfig,
    pub grid: GridConfig,
    pub protocol: ProtocolConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<CountsConfig>,
    pub optimizer: OptimizerSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            medium: MediumConfig::default(),
            beam: default_beam(),
            signal: SignalConfig::default(),
            control: ControlConfig::default(),
            grid: GridConfig::default(),
            protocol: ProtocolConfig::default(),
            counts: None,
            optimizer: OptimizerSection::default(),
        }
    }
}

impl Default for ControlBeam {
    fn default() -> Self {
        default_beam()
    }
}

fn config_err(key: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.into(),
        message: message.into(),
    }
}

/// Parses the right-hand side of `key=value` as a TOML value, falling back
/// to a bare string.
pub fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `dotted.key` in a nested table, creating intermediate tables.
pub fn set_path(table: &mut Table, dotted: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(config_err(dotted, "malformed key"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(config_err(dotted, format!("`{p}` is not a section"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Splits `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| config_err(s, "override must have the form key=value"))?;
    Ok((k.trim().to_string(), parse_value(v)))
}

/// Config keys from `EITSIM_SECTION__KEY=value` variables.
pub fn env_overrides<I: IntoIterator<Item = (String, String)>>(vars: I) -> Vec<(String, Value)> {
    let mut out: Vec<(String, Value)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            rest.contains("__")
                .then(|| (rest.to_ascii_lowercase().replace("__", "."), parse_value(&v)))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

fn kind_matches(kind: KeyKind, v: &Value) -> bool {
    match kind {
        Float => matches!(v, Value::Float(_) | Value::Integer(_)),
        Int => matches!(v, Value::Integer(i) if *i >= 0),
        Bool => matches!(v, Value::Boolean(_)),
        Enum(options) => matches!(v, Value::String(s) if options.contains(&s.as_str())),
        Levels => matches!(v, Value::Array(_)),
    }
}

fn kind_name(kind: KeyKind) -> String {
    match kind {
        Float => "a number".into(),
        Int => "a non-negative integer".into(),
        Bool => "true or false".into(),
        Enum(options) => format!("one of {}", options.join(", ")),
        Levels => "an array of level tables".into(),
    }
}

fn check_levels(v: &Value) -> Result<()> {
    let Value::Array(items) = v else {
        return Err(config_err("medium.levels", kind_name(Levels)));
    };
    for (i, item) in items.iter().enumerate() {
        let Value::Table(t) = item else {
            return Err(config_err(format!("medium.levels[{i}]"), "expected a table"));
        };
        for (k, val) in t {
            let ok = match k.as_str() {
                "label" => val.is_str(),
                "offset" | "f_signal" | "f_control" => matches!(val, Value::Float(_) | Value::Integer(_)),
                "reference" => val.is_bool(),
                _ => return Err(config_err(format!("medium.levels[{i}].{k}"), "unknown key")),
            };
            if !ok {
                return Err(config_err(format!("medium.levels[{i}].{k}"), "wrong type"));
            }
        }
    }
    Ok(())
}

/// Checks every leaf of `table` against [`KEYS`].
pub fn check_schema(table: &Table) -> Result<()> {
    for (section, v) in table {
        let Value::Table(t) = v else {
            return Err(config_err(section.clone(), "expected a section"));
        };
        for (k, val) in t {
            let full = format!("{section}.{k}");
            let doc = KEYS
                .iter()
                .find(|d| d.key == full)
                .ok_or_else(|| config_err(full.clone(), "unknown key"))?;
            if !kind_matches(doc.kind, val) {
                return Err(config_err(full, format!("expected {}, got `{val}`", kind_name(doc.kind))));
            }
            if doc.kind == Levels {
                check_levels(val)?;
            }
        }
    }
    if let Some(Value::Table(counts)) = table.get("counts") {
        for doc in KEYS.iter().filter(|d| d.key.starts_with("counts.") && d.default == "required") {
            let leaf = &doc.key["counts.".len()..];
            if !counts.contains_key(leaf) {
                return Err(config_err(doc.key, "missing required key"));
            }
        }
    }
    Ok(())
}

impl Config {
    /// Merges file, overrides and environment, validates the schema and
    /// deserializes.
    pub fn from_layers(file_text: Option<&str>, sets: &[String], env: &[(String, Value)]) -> Result<Config> {
        let mut table = match file_text {
            Some(text) => text.parse::<Table>().map_err(|e| config_err("<file>", e.to_string()))?,
            None => Table::new(),
        };
        for s in sets {
            let (k, v) = parse_assignment(s)?;
            set_path(&mut table, &k, v)?;
        }
        for (k, v) in env {
            set_path(&mut table, k, v.clone())?;
        }
        Config::from_table(table)
    }

    pub fn from_table(table: Table) -> Result<Config> {
        check_schema(&table)?;
        Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err("<config>", e.to_string()))
    }

    /// Loads `path` (if any), applies `--set` overrides and the process
    /// environment.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Config> {
        let text = match path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| config_err(p.display().to_string(), e.to_string()))?),
            None => None,
        };
        let env = env_overrides(std::env::vars());
        Config::from_layers(text.as_deref(), sets, &env)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_default()
    }

    /// Peak Rabi frequency of the Gaussian control pulses, rad/s.
    pub fn peak_rabi(&self) -> Result<f64> {
        let base = if self.control.use_beam {
            rabi_from_beam(&self.beam)?
        } else {
            self.control.peak_rabi
        };
        Ok(base * self.control.peak_scale)
    }

    /// The experimental peak before `control.peak_scale`; the optimizer cap
    /// is measured in units of this.
    pub fn experimental_peak_rabi(&self) -> Result<f64> {
        Ok(self.peak_rabi()? / self.control.peak_scale)
    }

    pub fn counts_or_err(&self) -> Result<&CountsConfig> {
        self.counts
            .as_ref()
            .ok_or_else(|| config_err("counts.n_signal", "missing required key"))
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        self.optimizer.build(self.experimental_peak_rabi()?)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let medium = self.medium.build()?;
        let grid = self.grid.build()?;
        let timing = self.protocol.build()?;
        let signal = self.signal.build(timing.storage_control_center + self.signal.delay)?;
        let peak_rabi = self.peak_rabi()?;
        let control = make_write_read_control(self.control.fwhm, peak_rabi, &timing, &grid)?;
        Ok(Scenario {
            medium,
            grid,
            signal,
            control,
            delta: self.signal.detuning,
            timing,
            peak_rabi,
        })
    }
}

/// Fully resolved inputs of one storage-and-retrieval run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub medium: MediumSpec,
    pub grid: SimGrid,
    pub signal: PulseEnvelope,
    pub control: PulseEnvelope,
    /// One-photon detuning, rad/s.
    pub delta: f64,
    pub timing: ProtocolTiming,
    pub peak_rabi: f64,
}

impl Scenario {
    pub fn run(&self) -> Result<MemoryResult> {
        solve(&self.medium, &self.grid, &self.signal, &self.control, self.delta, &self.timing)
    }
}
