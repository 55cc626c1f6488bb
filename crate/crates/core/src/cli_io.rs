//! Configuration files, CSV/JSON output, run manifests and replay.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::absorbing_estimate;
use crate::dynamics::{sample_lipschitz, RhsKind};
use crate::error::{Error, Result};
use crate::experiments::absorbing::{run_absorbing, AbsorbingConfig};
use crate::experiments::closeness::{run_closeness, ClosenessConfig};
use crate::experiments::congruence::{run_congruence, CongruenceConfig};
use crate::experiments::tails::{run_tails, TailsConfig};
use crate::experiments::uniform::run_uniform_bound;
use crate::experiments::validation::{run_conservation, run_operator_suite, ConservationConfig};
use crate::experiments::{norm_ensemble, Profile};
use crate::integrators::{
    integrate, Scheme, StepperConfig, TrajectoryRecord, DEFAULT_ATOL, DEFAULT_DT_MAX, DEFAULT_DT_MIN, DEFAULT_RTOL,
    DEFAULT_SAMPLE_EVERY,
};
use crate::lattice::{Boundary, Forcing, ForcingFamily, LatticeState, ModelParams};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub run: RunSection,
    pub model: ModelSection,
    #[serde(default)]
    pub forcing: ForcingFamily,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorbing: Option<AbsorbingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub closeness: Option<ClosenessSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tails: Option<TailsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub congruence: Option<CongruenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<LipschitzSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform: Option<UniformSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub n_half: usize,
    pub system: RhsKind,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            n_half: 64,
            system: RhsKind::DfDNLS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub gamma: f64,
    pub delta: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub profile: Profile,
    pub norm: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            profile: Profile::Gaussian { width: 3.0 },
            norm: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Rk4,
    Rk45,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub scheme: SchemeName,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub atol: f64,
    pub rtol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub sample_every: f64,
    pub tail_ks: Vec<usize>,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            scheme: SchemeName::Rk45,
            dt: None,
            atol: DEFAULT_ATOL,
            rtol: DEFAULT_RTOL,
            dt_min: DEFAULT_DT_MIN,
            dt_max: DEFAULT_DT_MAX,
            t_end: 10.0,
            sample_every: DEFAULT_SAMPLE_EVERY,
            tail_ks: Vec::new(),
        }
    }
}

impl IntegratorSection {
    pub fn scheme(&self) -> Result<Scheme> {
        match self.scheme {
            SchemeName::Rk4 => match self.dt {
                Some(dt) => Ok(Scheme::Rk4Fixed { dt }),
                None => Err(Error::InvalidParameter("the rk4 scheme needs dt".into())),
            },
            SchemeName::Rk45 => Ok(Scheme::Rk45Adaptive {
                atol: self.atol,
                rtol: self.rtol,
                dt_min: self.dt_min,
                dt_max: self.dt_max,
            }),
        }
    }

    pub fn stepper(&self) -> Result<StepperConfig> {
        Ok(StepperConfig {
            scheme: self.scheme()?,
            t_end: self.t_end,
            sample_every: self.sample_every,
            tail_ks: self.tail_ks.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbsorbingSection {
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub r: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_fine_sampling")]
    pub sample_every: f64,
    #[serde(default = "default_width")]
    pub initial_width: f64,
    #[serde(default = "half")]
    pub min_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosenessSection {
    pub epsilons: Vec<f64>,
    #[serde(default = "default_closeness_t0")]
    pub t0: f64,
    #[serde(default = "default_c0")]
    pub c0: f64,
    #[serde(default = "default_k_phi")]
    pub k_phi: f64,
    #[serde(default = "default_initial_profile")]
    pub initial_profile: Profile,
    #[serde(default = "default_perturbation_profile")]
    pub perturbation_profile: Profile,
    #[serde(default = "half")]
    pub forcing_fraction: f64,
    #[serde(default = "default_fine_sampling")]
    pub sample_every: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailsSection {
    pub xis: Vec<f64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "half")]
    pub sample_every: f64,
    #[serde(default)]
    pub ks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongruenceSection {
    pub epsilons: Vec<f64>,
    pub k_phi: f64,
    pub r_mu: f64,
    #[serde(default = "half")]
    pub forcing_fraction: f64,
    #[serde(default = "default_initial_count")]
    pub initial_count: usize,
    #[serde(default = "default_cloud_samples")]
    pub samples_per_trajectory: usize,
    #[serde(default = "one")]
    pub sample_spacing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<f64>,
    #[serde(default = "default_congruence_width")]
    pub initial_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzSection {
    pub radius: f64,
    #[serde(default = "default_lipschitz_samples")]
    pub samples: usize,
    #[serde(default = "default_lipschitz_n_half")]
    pub n_half: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformSection {
    pub min_norm: f64,
    pub max_norm: f64,
    #[serde(default = "default_uniform_ensemble")]
    pub ensemble_size: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_width")]
    pub initial_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub states: usize,
    pub operator_n_half: usize,
    pub boundary: Boundary,
    pub conservation_n_half: usize,
    pub t_end: f64,
    pub sample_every: f64,
    pub width: f64,
    pub norm: f64,
    /// atol = rtol of the adaptive scheme used for the drift runs.
    pub tolerance: f64,
    pub max_drift: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        Self {
            states: 1000,
            operator_n_half: 256,
            boundary: Boundary::Periodic,
            conservation_n_half: 512,
            t_end: 100.0,
            sample_every: 1.0,
            width: 2.0,
            norm: 2.0,
            tolerance: 1e-12,
            max_drift: 1e-8,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_ensemble() -> usize {
    32
}
fn default_horizon() -> f64 {
    50.0
}
fn default_fine_sampling() -> f64 {
    0.05
}
fn default_width() -> f64 {
    3.0
}
fn default_closeness_t0() -> f64 {
    10.0
}
fn default_c0() -> f64 {
    0.1
}
fn default_k_phi() -> f64 {
    2.0
}
fn default_initial_profile() -> Profile {
    Profile::Gaussian { width: 2.0 }
}
fn default_perturbation_profile() -> Profile {
    Profile::Gaussian { width: 1.0 }
}
fn default_initial_count() -> usize {
    16
}
fn default_cloud_samples() -> usize {
    64
}
fn default_congruence_width() -> f64 {
    4.0
}
fn default_lipschitz_samples() -> usize {
    10_000
}
fn default_lipschitz_n_half() -> usize {
    8
}
fn default_uniform_ensemble() -> usize {
    8
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_half: Option<usize>,
}

impl Config {
    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let p = ModelParams {
            kappa: m.kappa,
            mu: m.mu,
            gamma: m.gamma,
            delta: m.delta,
            boundary: m.boundary,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn forcing(&self) -> Result<Forcing> {
        Forcing::realize(self.forcing, self.run.n_half)
    }

    pub fn initial_state(&self) -> Result<LatticeState> {
        if !(self.initial.norm >= 0.0 && self.initial.norm.is_finite()) {
            return Err(Error::InvalidParameter("initial norm must be non-negative".into()));
        }
        self.initial.profile.with_l2_norm(self.run.n_half, self.initial.norm)
    }

    pub fn absorbing_config(&self) -> Result<AbsorbingConfig> {
        let s = self.section(&self.absorbing, "absorbing")?;
        Ok(AbsorbingConfig {
            ensemble_size: s.ensemble_size,
            big_r: s.big_r,
            r: s.r,
            horizon: s.horizon,
            sample_every: s.sample_every,
            scheme: self.integrator.scheme()?,
            initial_width: s.initial_width,
            min_fraction: s.min_fraction,
            seed: self.run.seed,
        })
    }

    pub fn closeness_config(&self) -> Result<ClosenessConfig> {
        let s = self.section(&self.closeness, "closeness")?;
        Ok(ClosenessConfig {
            epsilons: s.epsilons.clone(),
            t0: s.t0,
            c0: s.c0,
            k_phi: s.k_phi,
            initial_profile: s.initial_profile,
            perturbation_profile: s.perturbation_profile,
            forcing_fraction: s.forcing_fraction,
            sample_every: s.sample_every,
            scheme: self.integrator.scheme()?,
        })
    }

    pub fn tails_config(&self) -> Result<TailsConfig> {
        let s = self.section(&self.tails, "tails")?;
        Ok(TailsConfig {
            xis: s.xis.clone(),
            horizon: s.horizon,
            sample_every: s.sample_every,
            scheme: self.integrator.scheme()?,
            ks: s.ks.clone(),
        })
    }

    pub fn congruence_config(&self) -> Result<CongruenceConfig> {
        let s = self.section(&self.congruence, "congruence")?;
        Ok(CongruenceConfig {
            epsilons: s.epsilons.clone(),
            k_phi: s.k_phi,
            r_mu: s.r_mu,
            forcing_fraction: s.forcing_fraction,
            initial_count: s.initial_count,
            samples_per_trajectory: s.samples_per_trajectory,
            sample_spacing: s.sample_spacing,
            burn_in: s.burn_in,
            initial_width: s.initial_width,
            scheme: self.integrator.scheme()?,
            seed: self.run.seed,
        })
    }

    fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T> {
        s.as_ref().ok_or_else(|| Error::Config {
            line: None,
            message: format!("missing section [{name}]"),
        })
    }

    fn apply(&mut self, overrides: Overrides) {
        if let Some(seed) = overrides.seed {
            self.run.seed = seed;
        }
        if let Some(n_half) = overrides.n_half {
            self.run.n_half = n_half;
        }
    }

    /// sha256 of the canonical JSON form of the configuration.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Location of a validation failure inside the config file.
struct Site(&'static str, &'static str);

fn invalid(site: Site, text: Option<&str>, err: Error) -> Error {
    let message = match err {
        Error::Config { message, .. } => message,
        other => other.to_string(),
    };
    Error::Config {
        line: text.and_then(|t| find_key_line(t, site.0, site.1)),
        message,
    }
}

/// Line (1-based) of `key = ...` inside `[section]`; an empty section name
/// means the top level.
pub fn find_key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.split(']').next()) {
            current = name.trim().trim_matches(['[', ']']).to_string();
            if current == section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((lhs, _)) = trimmed.split_once('=') {
                if lhs.trim().trim_matches('"') == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}

/// Parses TOML text, applies overrides and validates every section.
pub fn parse_config_str(text: &str, overrides: Overrides) -> Result<Config> {
    let mut config: Config = toml::from_str(text).map_err(|e| Error::Config {
        line: e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    config.apply(overrides);
    validate_config(&config, Some(text))?;
    Ok(config)
}

pub fn parse_config(path: &Path, overrides: Overrides) -> Result<Config> {
    let text = fs::read_to_string(path)?;
    parse_config_str(&text, overrides)
}

/// Module-level invariants and hypothesis gates.
pub fn validate_config(c: &Config, text: Option<&str>) -> Result<()> {
    let m = &c.model;
    if !(m.delta > 0.0) {
        return Err(invalid(Site("model", "delta"), text, Error::Config {
            line: None,
            message: "delta must be positive".into(),
        }));
    }
    let params = c.params().map_err(|e| invalid(Site("model", "mu"), text, e))?;
    let forcing = c.forcing().map_err(|e| invalid(Site("forcing", "family"), text, e))?;
    c.initial_state().map_err(|e| invalid(Site("initial", "norm"), text, e))?;
    c.integrator
        .stepper()
        .and_then(|s| s.validate())
        .map_err(|e| invalid(Site("integrator", "scheme"), text, e))?;
    for &k in &c.integrator.tail_ks {
        if 2 * k >= c.run.n_half {
            return Err(invalid(
                Site("integrator", "tail_ks"),
                text,
                Error::TailOutOfRange {
                    two_k: 2 * k,
                    n_half: c.run.n_half,
                },
            ));
        }
    }
    if c.absorbing.is_some() {
        let a = c.absorbing_config()?;
        if c.run.system == RhsKind::DfAL && params.mu > 0.0 && a.big_r * a.big_r >= params.delta / (4.0 * params.mu) {
            return Err(invalid(
                Site("absorbing", "R"),
                text,
                Error::Hypothesis(format!(
                    "dfAL absorbing run needs R^2 < delta/(4 mu): R^2 = {}, delta/(4 mu) = {}",
                    a.big_r * a.big_r,
                    params.delta / (4.0 * params.mu)
                )),
            ));
        }
        absorbing_estimate(&params, &forcing, a.big_r, a.r, c.run.system)
            .map_err(|e| invalid(Site("absorbing", "r"), text, e))?;
        if a.ensemble_size == 0 {
            return Err(invalid(
                Site("absorbing", "ensemble_size"),
                text,
                Error::InvalidParameter("ensemble_size must be at least 1".into()),
            ));
        }
    }
    if c.closeness.is_some() {
        c.closeness_config()?
            .validate()
            .map_err(|e| invalid(Site("closeness", "epsilons"), text, e))?;
    }
    if let Some(t) = &c.tails {
        if t.xis.is_empty() || t.xis.iter().any(|&x| !(x > 0.0)) {
            return Err(invalid(
                Site("tails", "xis"),
                text,
                Error::InvalidParameter("xis must be a non-empty list of positive values".into()),
            ));
        }
        if let Some(&k) = t.ks.iter().find(|&&k| 2 * k >= c.run.n_half) {
            return Err(invalid(
                Site("tails", "ks"),
                text,
                Error::TailOutOfRange {
                    two_k: 2 * k,
                    n_half: c.run.n_half,
                },
            ));
        }
    }
    if c.congruence.is_some() {
        c.congruence_config()?
            .validate()
            .map_err(|e| invalid(Site("congruence", "epsilons"), text, e))?;
    }
    if let Some(l) = &c.lipschitz {
        if !(l.radius > 0.0) || l.samples == 0 {
            return Err(invalid(
                Site("lipschitz", "radius"),
                text,
                Error::InvalidParameter("radius and samples must be positive".into()),
            ));
        }
    }
    if let Some(u) = &c.uniform {
        if !(u.min_norm > 0.0 && u.min_norm <= u.max_norm) || u.ensemble_size == 0 {
            return Err(invalid(
                Site("uniform", "min_norm"),
                text,
                Error::InvalidParameter("need 0 < min_norm <= max_norm and a non-empty ensemble".into()),
            ));
        }
    }
    if let Some(v) = &c.validate {
        if !(v.tolerance > 0.0 && v.max_drift > 0.0) {
            return Err(invalid(
                Site("validate", "tolerance"),
                text,
                Error::InvalidParameter("tolerance and max_drift must be positive".into()),
            ));
        }
    }
    Ok(())
}

/// Header row for a trajectory CSV.
pub fn csv_header(tail_ks: &[usize]) -> Vec<String> {
    let mut h: Vec<String> = ["t", "l2", "l4", "linf", "p"].iter().map(|s| s.to_string()).collect();
    h.extend(tail_ks.iter().map(|k| format!("tail_K{k}")));
    h
}

/// Writes `t, l2, l4, linf, p, tail_K...` with LF line endings. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_trajectory_csv<W: std::io::Write>(record: &TrajectoryRecord, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(csv_header(&record.tail_ks)).map_err(csv_err)?;
    for i in 0..record.len() {
        let mut row = vec![
            record.times[i],
            record.l2[i],
            record.l4[i],
            record.linf[i],
            record.p_functional[i],
        ];
        row.extend(record.tails.iter().map(|c| c[i]));
        w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_trajectory_csv(record: &TrajectoryRecord, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_trajectory_csv(record, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Columns of a trajectory CSV: header names and one `Vec` per column.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

pub fn read_trajectory_csv<R: std::io::Read>(input: R) -> Result<CsvTable> {
    let mut r = csv::Reader::from_reader(input);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); header.len()];
    for row in r.records() {
        let row = row.map_err(csv_err)?;
        for (col, field) in columns.iter_mut().zip(row.iter()) {
            col.push(field.parse::<f64>().map_err(|e| Error::Io(std::io::Error::other(e)))?);
        }
    }
    Ok(CsvTable { header, columns })
}

/// Provenance block carried by every JSON report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub n_half: usize,
}

impl Provenance {
    pub fn new(command: Command, config: &Config) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: VERSION.to_string(),
            command,
            config_hash: config.hash(),
            seed: config.run.seed,
            n_half: config.run.n_half,
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    provenance: &'a Provenance,
    report: &'a T,
}

pub fn report_json<T: Serialize>(report: &T, provenance: &Provenance) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(&Envelope { provenance, report })?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn emit_report_json<T: Serialize>(report: &T, provenance: &Provenance, path: &Path) -> Result<()> {
    fs::write(path, report_json(report, provenance)?)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Closeness,
    Absorbing,
    Tails,
    Congruence,
    Lipschitz,
    Uniform,
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Closeness => "closeness",
            Command::Absorbing => "absorbing",
            Command::Tails => "tails",
            Command::Congruence => "congruence",
            Command::Lipschitz => "lipschitz",
            Command::Uniform => "uniform",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// File name relative to the output directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config_hash: String,
    /// Effective configuration after command-line overrides.
    pub config: Config,
    /// Size of the worker pool the run used.
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputFile>,
}

/// Files written by a command plus the verdict of its checks.
#[derive(Debug)]
pub struct RunOutcome {
    pub outputs: Vec<OutputFile>,
    /// Set when the experiment ran but its checks failed.
    pub failure: Option<Error>,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    system: RhsKind,
    samples: usize,
    t_end: f64,
    final_l2: f64,
    final_linf: f64,
    final_p: f64,
    max_l2: f64,
    tail_ks: &'a [usize],
    trajectory_csv: &'a str,
}

#[derive(Serialize)]
struct ValidateReport {
    operators: crate::experiments::validation::OperatorSuiteReport,
    conservation: crate::experiments::validation::ConservationReport,
    max_drift: f64,
    passed: bool,
}

fn write_output(out_dir: &Path, name: &str, bytes: &[u8], outputs: &mut Vec<OutputFile>) -> Result<()> {
    fs::write(out_dir.join(name), bytes)?;
    outputs.push(OutputFile {
        path: name.to_string(),
        sha256: hex(&Sha256::digest(bytes)),
    });
    Ok(())
}

/// Runs one experiment and writes its outputs into `out_dir`.
pub fn run_command(command: Command, config: &Config, out_dir: &Path) -> Result<RunOutcome> {
    validate_config(config, None)?;
    fs::create_dir_all(out_dir)?;
    let prov = Provenance::new(command, config);
    let params = config.params()?;
    let forcing = config.forcing()?;
    let kind = config.run.system;
    let json_name = format!("{}.json", command.name());
    let mut outputs = Vec::new();
    let mut failure = None;
    let emit = |bytes: Vec<u8>, outputs: &mut Vec<OutputFile>| write_output(out_dir, &json_name, &bytes, outputs);
    match command {
        Command::Simulate => {
            let record = integrate(&config.initial_state()?, &params, &forcing, kind, &config.integrator.stepper()?)?;
            let mut csv = Vec::new();
            write_trajectory_csv(&record, &mut csv)?;
            write_output(out_dir, "trajectory.csv", &csv, &mut outputs)?;
            let last = |v: &[f64]| v.last().copied().unwrap_or(f64::NAN);
            let summary = SimulateSummary {
                system: kind,
                samples: record.len(),
                t_end: last(&record.times),
                final_l2: last(&record.l2),
                final_linf: last(&record.linf),
                final_p: last(&record.p_functional),
                max_l2: record.l2.iter().copied().fold(0.0, f64::max),
                tail_ks: &record.tail_ks,
                trajectory_csv: "trajectory.csv",
            };
            emit(report_json(&summary, &prov)?, &mut outputs)?;
        }
        Command::Closeness => {
            let report = run_closeness(&config.closeness_config()?, &params, &forcing)?;
            if !report.embedding_holds() {
                failure = Some(Error::Failed("l-infinity distance exceeded l2 distance".into()));
            }
            emit(report_json(&report, &prov)?, &mut outputs)?;
        }
        Command::Absorbing => {
            let report = run_absorbing(&params, &forcing, kind, &config.absorbing_config()?)?;
            failure = report.verdict().err();
            emit(report_json(&report, &prov)?, &mut outputs)?;
        }
        Command::Tails => {
            let report = run_tails(&params, &forcing, kind, &config.initial_state()?, &config.tails_config()?)?;
            failure = report.verdict().err();
            emit(report_json(&report, &prov)?, &mut outputs)?;
        }
        Command::Congruence => {
            let report = run_congruence(&params, &forcing, &config.congruence_config()?)?;
            failure = report.verdict().err();
            emit(report_json(&report, &prov)?, &mut outputs)?;
        }
        Command::Lipschitz => {
            let l = config.section(&config.lipschitz, "lipschitz")?;
            let report = sample_lipschitz(&params, l.radius, l.samples, config.run.seed, l.n_half)?;
            if !report.holds() {
                failure = Some(Error::Failed(format!(
                    "{} sampled pairs exceed the Lipschitz constant {}",
                    report.violations, report.theoretical_constant
                )));
            }
            emit(report_json(&report, &prov)?, &mut outputs)?;
        }
        Command::Uniform => {
            let u = config.section(&config.uniform, "uniform")?;
            let initials = norm_ensemble(
                config.run.seed,
                config.run.n_half,
                u.initial_width,
                u.ensemble_size,
                u.min_norm,
                u.max_norm,
            );
            let mut stepper = config.integrator.stepper()?;
            stepper.t_end = u.horizon;
            stepper.tail_ks.clear();
            let report = run_uniform_bound(&params, &forcing, &initials, &stepper)?;
            failure = report.verdict().err();
            emit(report_json(&report, &prov)?, &mut outputs)?;
        }
        Command::Validate => {
            let v = config.validate.clone().unwrap_or_default();
            let operators = run_operator_suite(v.operator_n_half, v.boundary, v.states, config.run.seed);
            let conservation = run_conservation(&ConservationConfig {
                n_half: v.conservation_n_half,
                t_end: v.t_end,
                sample_every: v.sample_every,
                scheme: Scheme::Rk45Adaptive {
                    atol: v.tolerance,
                    rtol: v.tolerance,
                    dt_min: DEFAULT_DT_MIN,
                    dt_max: DEFAULT_DT_MAX,
                },
                width: v.width,
                norm: v.norm,
                seed: config.run.seed,
            })?;
            let passed = operators.passed()
                && conservation.dnls_norm_drift < v.max_drift
                && conservation.al_p_drift < v.max_drift;
            if !passed {
                failure = Some(Error::Failed("operator or conservation check failed".into()));
            }
            let report = ValidateReport {
                operators,
                conservation,
                max_drift: v.max_drift,
                passed,
            };
            emit(report_json(&report, &prov)?, &mut outputs)?;
        }
    }
    Ok(RunOutcome { outputs, failure })
}

/// Runs a command and writes `manifest.json` next to its outputs.
pub fn run_with_manifest(
    command: Command,
    config: &Config,
    out_dir: &Path,
    threads: Option<usize>,
) -> Result<(RunManifest, Option<Error>)> {
    let start = Instant::now();
    let outcome = run_command(command, config, out_dir)?;
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: VERSION.to_string(),
        command,
        config_hash: config.hash(),
        config: config.clone(),
        threads: threads.unwrap_or_else(rayon::current_num_threads),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        outputs: outcome.outputs,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(out_dir.join(MANIFEST_FILE), bytes)?;
    Ok((manifest, outcome.failure))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

/// Outcome of replaying a manifest into a fresh directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub out_dir: PathBuf,
    pub matched: Vec<String>,
    pub mismatched: Vec<String>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty()
    }
}

/// Re-runs the manifest's command with its configuration snapshot and compares
/// every output file by sha256.
pub fn replay(manifest: &RunManifest, out_dir: &Path) -> Result<ReplayReport> {
    if manifest.version != VERSION {
        return Err(Error::InvalidParameter(format!(
            "manifest was written by version {} but this is {VERSION}",
            manifest.version
        )));
    }
    if manifest.config.hash() != manifest.config_hash {
        return Err(Error::InvalidParameter("manifest config does not match its hash".into()));
    }
    let outcome = run_command(manifest.command, &manifest.config, out_dir)?;
    let mut report = ReplayReport {
        out_dir: out_dir.to_path_buf(),
        matched: Vec::new(),
        mismatched: Vec::new(),
    };
    for expected in &manifest.outputs {
        let same = outcome.outputs.iter().any(|o| o == expected);
        let list = if same { &mut report.matched } else { &mut report.mismatched };
        list.push(expected.path.clone());
    }
    for produced in &outcome.outputs {
        if !manifest.outputs.iter().any(|o| o.path == produced.path) {
            report.mismatched.push(produced.path.clone());
        }
    }
    Ok(report)
}
