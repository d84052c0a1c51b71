//! Flat `key = value` experiment configuration with `[section]` headers.
//!
//! The grammar is line-oriented and diff-friendly: blank lines and `#`
//! comments are ignored, `[section]` opens a section, and every other line
//! must be `key = value`. Unknown sections or keys are errors. Every
//! default is recorded so `--explain` can show exactly what a run resolved
//! to and where each value came from.
//!
//! Sections: `[experiment]`, `[models]`, `[data]`, `[synth]`, `[agent.N]`
//! (per-agent true means for the generator, 1-based), `[plot]`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use capbandit_core::domain::CapacityProfile;
use capbandit_core::harness::ExperimentConfig;
use capbandit_core::policy::PolicyKind;
use capbandit_core::synth::{AgentMean, ContextLaw, PiecewiseCell, SynthSpec};

use crate::{CliError, Result};

/// Where a resolved value came from, for `--explain`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Default,
    File,
    Flag,
}

/// One resolved configuration entry.
#[derive(Debug, Clone)]
pub struct ExplainEntry {
    pub key: &'static str,
    pub value: String,
    pub provenance: Provenance,
    pub note: &'static str,
}

/// External data log reference.
#[derive(Debug, Clone)]
pub struct DataConfig {
    pub path: PathBuf,
    pub agent_names: Option<Vec<String>>,
}

/// Plot command inputs.
#[derive(Debug, Clone, Default)]
pub struct PlotConfig {
    pub input: Option<PathBuf>,
    pub offline: Option<PathBuf>,
    pub title: Option<String>,
}

/// Fully resolved application configuration.
#[derive(Debug, Clone)]
pub struct AppConfig {
    pub experiment: ExperimentConfig,
    /// Capacity grid given as agent-1 shares (two constrained agents); the
    /// full profiles land in `experiment.grid`.
    pub alpha_grid: Vec<f64>,
    /// Append one unconstrained agent after the constrained ones.
    pub free_agent: bool,
    pub offline_families: Vec<String>,
    pub data: Option<DataConfig>,
    pub synth: Option<SynthSpec>,
    pub plot: PlotConfig,
    pub explain: Vec<ExplainEntry>,
}

const DEFAULT_ALPHA_GRID: [f64; 7] = [0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0];
const DEFAULT_POLICIES: [PolicyKind; 5] = [
    PolicyKind::LogisticGreedy,
    PolicyKind::LogisticTs,
    PolicyKind::TreeGreedy,
    PolicyKind::TreeTs,
    PolicyKind::RandomNonContextual,
];

struct RawLine {
    section: String,
    key: String,
    value: String,
}

fn parse_lines(text: &str, file: &str) -> Result<Vec<RawLine>> {
    let mut out = Vec::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(name) = trimmed.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(CliError::ParseError {
                    file: file.to_string(),
                    line,
                    message: "unterminated section header".into(),
                });
            };
            section = name.trim().to_string();
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(CliError::ParseError {
                file: file.to_string(),
                line,
                message: "expected `key = value`".into(),
            });
        };
        out.push(RawLine {
            section: section.clone(),
            key: key.trim().to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

struct Scanner {
    lines: Vec<RawLine>,
    used: Vec<bool>,
}

impl Scanner {
    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        for (i, l) in self.lines.iter().enumerate() {
            if !self.used[i] && l.section == section && l.key == key {
                self.used[i] = true;
                return Some(l.value.clone());
            }
        }
        None
    }

    fn take_all(&mut self, section: &str, key: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (i, l) in self.lines.iter().enumerate() {
            if !self.used[i] && l.section == section && l.key == key {
                self.used[i] = true;
                out.push(l.value.clone());
            }
        }
        out
    }

    fn sections(&self) -> BTreeSet<String> {
        self.lines.iter().map(|l| l.section.clone()).collect()
    }

    fn first_unused(&self) -> Option<&RawLine> {
        self.lines
            .iter()
            .zip(&self.used)
            .find(|(_, &used)| !used)
            .map(|(l, _)| l)
    }
}

fn parse_scalar<T: FromStr>(value: &str, path: &str, expected: &'static str) -> Result<T> {
    value.parse::<T>().map_err(|_| CliError::TypeError {
        path: path.to_string(),
        expected,
    })
}

fn parse_bool(value: &str, path: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(CliError::TypeError {
            path: path.to_string(),
            expected: "a boolean (true/false)",
        }),
    }
}

fn parse_f64_list(value: &str, path: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|v| parse_scalar::<f64>(v.trim(), path, "a comma-separated list of numbers"))
        .collect()
}

/// Parses and validates a config file relative to its own directory.
pub fn load(path: &Path) -> Result<AppConfig> {
    let text = std::fs::read_to_string(path)?;
    let file = path.display().to_string();
    let base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    parse(&text, &file, &base_dir)
}

pub fn parse(text: &str, file: &str, base_dir: &Path) -> Result<AppConfig> {
    let lines = parse_lines(text, file)?;
    let used = vec![false; lines.len()];
    let mut scan = Scanner { lines, used };
    let mut explain = Vec::new();

    let mut experiment = ExperimentConfig::default();
    let mut record =
        |key: &'static str, value: String, provenance: Provenance, note: &'static str| {
            explain.push(ExplainEntry {
                key,
                value,
                provenance,
                note,
            });
        };

    macro_rules! scalar {
        ($section:literal, $key:literal, $target:expr, $ty:ty, $expected:literal, $note:literal) => {
            match scan.take($section, $key) {
                Some(v) => {
                    $target = parse_scalar::<$ty>(&v, concat!($section, ".", $key), $expected)?;
                    record($key, v, Provenance::File, $note);
                }
                None => record($key, format!("{}", $target), Provenance::Default, $note),
            }
        };
    }

    scalar!(
        "experiment",
        "eta",
        experiment.eta,
        f64,
        "a nonnegative number",
        "queue penalty weight; 0 disables capacity pressure, large values force proportional assignment"
    );
    scalar!(
        "experiment",
        "runs",
        experiment.runs,
        usize,
        "a positive integer",
        "evaluation repetitions per cell, each on its own seeded permutation of the task order"
    );
    scalar!(
        "experiment",
        "base_seed",
        experiment.base_seed,
        u64,
        "a 64-bit integer",
        "run k permutes the log with base_seed + k; all other randomness derives from the same value"
    );
    scalar!(
        "experiment",
        "batch_size",
        experiment.batch_size,
        usize,
        "a nonnegative integer",
        "tasks assigned jointly per matching; 0 or 1 means fully online"
    );
    match scan.take("experiment", "bias") {
        Some(v) => {
            experiment.bias = parse_bool(&v, "experiment.bias")?;
            record(
                "bias",
                v,
                Provenance::File,
                "append a constant 1.0 feature before modeling",
            );
        }
        None => record(
            "bias",
            experiment.bias.to_string(),
            Provenance::Default,
            "append a constant 1.0 feature before modeling",
        ),
    }
    match scan.take("experiment", "standardize") {
        Some(v) => {
            experiment.standardize = parse_bool(&v, "experiment.standardize")?;
            record(
                "standardize",
                v,
                Provenance::File,
                "scale each raw feature to zero mean and unit variance over the whole log",
            );
        }
        None => record(
            "standardize",
            experiment.standardize.to_string(),
            Provenance::Default,
            "scale each raw feature to zero mean and unit variance over the whole log",
        ),
    }
    match scan.take("experiment", "trace") {
        Some(v) => {
            experiment.record_trace = parse_bool(&v, "experiment.trace")?;
            record(
                "trace",
                v,
                Provenance::File,
                "record per-round decisions, scores, and queues",
            );
        }
        None => record(
            "trace",
            experiment.record_trace.to_string(),
            Provenance::Default,
            "record per-round decisions, scores, and queues",
        ),
    }

    let policies = match scan.take("experiment", "policies") {
        Some(v) => {
            let mut kinds = Vec::new();
            for name in v.split(',') {
                let name = name.trim();
                kinds.push(
                    PolicyKind::from_str(name).map_err(|_| CliError::ValidationError {
                        path: "experiment.policies".into(),
                        message: format!("unknown policy `{name}`"),
                    })?,
                );
            }
            record(
                "policies",
                v,
                Provenance::File,
                "policy families evaluated per cell",
            );
            kinds
        }
        None => {
            let kinds = DEFAULT_POLICIES.to_vec();
            record(
                "policies",
                kinds
                    .iter()
                    .map(|k| k.name())
                    .collect::<Vec<_>>()
                    .join(", "),
                Provenance::Default,
                "policy families evaluated per cell",
            );
            kinds
        }
    };
    experiment.policies = policies;

    let alpha_grid = match scan.take("experiment", "alpha_grid") {
        Some(v) => {
            let grid = parse_f64_list(&v, "experiment.alpha_grid")?;
            record(
                "alpha_grid",
                v,
                Provenance::File,
                "capacity shares of agent 1 swept over",
            );
            grid
        }
        None => {
            record(
                "alpha_grid",
                DEFAULT_ALPHA_GRID
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(", "),
                Provenance::Default,
                "capacity shares of agent 1 swept over",
            );
            DEFAULT_ALPHA_GRID.to_vec()
        }
    };

    let free_agent = match scan.take("experiment", "free_agent") {
        Some(v) => {
            let b = parse_bool(&v, "experiment.free_agent")?;
            record(
                "free_agent",
                v,
                Provenance::File,
                "append one unconstrained agent with no queue after the constrained ones",
            );
            b
        }
        None => {
            record(
                "free_agent",
                "false".into(),
                Provenance::Default,
                "append one unconstrained agent with no queue after the constrained ones",
            );
            false
        }
    };

    let offline_families = match scan.take("experiment", "offline_benchmarks") {
        Some(v) => {
            let fams: Vec<String> = v.split(',').map(|s| s.trim().to_string()).collect();
            for f in &fams {
                if f != "logistic" && f != "tree" {
                    return Err(CliError::ValidationError {
                        path: "experiment.offline_benchmarks".into(),
                        message: format!("unknown family `{f}` (expected logistic or tree)"),
                    });
                }
            }
            record(
                "offline_benchmarks",
                v,
                Provenance::File,
                "offline unconstrained reference fits",
            );
            fams
        }
        None => {
            record(
                "offline_benchmarks",
                "(none)".into(),
                Provenance::Default,
                "offline unconstrained reference fits",
            );
            Vec::new()
        }
    };

    scalar!(
        "models",
        "kappa",
        experiment.models.kappa,
        f64,
        "a nonnegative number",
        "posterior draw scale for logistic Thompson sampling"
    );
    scalar!(
        "models",
        "gamma_prior",
        experiment.models.gamma_prior,
        f64,
        "a positive number",
        "Gaussian prior precision of the logistic weights"
    );
    scalar!(
        "models",
        "trees",
        experiment.models.tree.n_trees,
        usize,
        "a positive integer",
        "bootstrap ensemble size"
    );
    scalar!(
        "models",
        "tree_depth",
        experiment.models.tree.max_depth,
        usize,
        "a positive integer",
        "maximum regression tree depth"
    );
    scalar!(
        "models",
        "tree_min_leaf",
        experiment.models.tree.min_leaf,
        usize,
        "a positive integer",
        "minimum observations per leaf"
    );
    scalar!(
        "models",
        "tree_refit_period",
        experiment.models.tree.refit_period,
        u64,
        "a positive integer",
        "observations between full ensemble refits"
    );

    let data = match scan.take("data", "log") {
        Some(v) => {
            let agent_names = scan.take("data", "agent_names").map(|names| {
                names
                    .split(',')
                    .map(|n| n.trim().to_string())
                    .collect::<Vec<_>>()
            });
            record(
                "data.log",
                v.clone(),
                Provenance::File,
                "CSV reward log replayed by the run",
            );
            Some(DataConfig {
                path: base_dir.join(v),
                agent_names,
            })
        }
        None => None,
    };

    let synth = parse_synth(&mut scan)?;

    let plot = PlotConfig {
        input: scan.take("plot", "input").map(|v| base_dir.join(v)),
        offline: scan.take("plot", "offline").map(|v| base_dir.join(v)),
        title: scan.take("plot", "title"),
    };

    // Anything left is an unknown key (or an unknown section entirely).
    if let Some(line) = scan.first_unused() {
        let path = if line.section.is_empty() {
            line.key.clone()
        } else {
            format!("{}.{}", line.section, line.key)
        };
        return Err(CliError::UnknownKey { path });
    }
    let known_sections: BTreeSet<String> = ["experiment", "models", "data", "synth", "plot"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for s in scan.sections() {
        if !known_sections.contains(&s) && !s.starts_with("agent.") && !s.is_empty() {
            return Err(CliError::UnknownKey { path: s });
        }
    }

    // Build the capacity grid: two constrained agents at (alpha, 1 - alpha),
    // plus an optional free agent.
    let mut grid = Vec::with_capacity(alpha_grid.len());
    for &alpha in &alpha_grid {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(CliError::ValidationError {
                path: "experiment.alpha_grid".into(),
                message: format!("share {alpha} outside [0, 1]"),
            });
        }
        let (mut alphas, mut free) = (vec![alpha, 1.0 - alpha], vec![false, false]);
        if free_agent {
            alphas.push(0.0);
            free.push(true);
        }
        grid.push(CapacityProfile::new(alphas, free).map_err(CliError::Engine)?);
    }
    experiment.grid = grid;
    experiment
        .validate()
        .map_err(|e| CliError::ValidationError {
            path: "experiment".into(),
            message: e.to_string(),
        })?;

    Ok(AppConfig {
        experiment,
        alpha_grid,
        free_agent,
        offline_families,
        data,
        synth,
        plot,
        explain,
    })
}

fn parse_synth(scan: &mut Scanner) -> Result<Option<SynthSpec>> {
    let has_synth = scan.sections().iter().any(|s| s == "synth");
    if !has_synth {
        return Ok(None);
    }
    let dim = match scan.take("synth", "dim") {
        Some(v) => parse_scalar::<usize>(&v, "synth.dim", "a positive integer")?,
        None => 1,
    };
    let rounds = match scan.take("synth", "rounds") {
        Some(v) => parse_scalar::<usize>(&v, "synth.rounds", "a positive integer")?,
        None => 5000,
    };
    let law = match scan.take("synth", "context") {
        Some(v) => parse_context_law(&v)?,
        None => ContextLaw::UniformBox { lo: -1.0, hi: 1.0 },
    };

    let mut agents = Vec::new();
    for idx in 1.. {
        let section = format!("agent.{idx}");
        if !scan.sections().contains(&section) {
            break;
        }
        agents.push(parse_agent(scan, &section, dim)?);
    }
    if agents.is_empty() {
        return Err(CliError::ValidationError {
            path: "synth".into(),
            message: "at least two [agent.N] sections are required".into(),
        });
    }
    Ok(Some(SynthSpec {
        dim,
        rounds,
        law,
        agents,
    }))
}

fn parse_context_law(value: &str) -> Result<ContextLaw> {
    let err = || CliError::TypeError {
        path: "synth.context".into(),
        expected: "uniform(lo, hi) or gaussian(mean, std)",
    };
    let value = value.trim();
    let (name, args) = value.split_once('(').ok_or_else(err)?;
    let args = args.strip_suffix(')').ok_or_else(err)?;
    let parts: Vec<f64> = args
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| err())?;
    if parts.len() != 2 {
        return Err(err());
    }
    match name.trim() {
        "uniform" => Ok(ContextLaw::UniformBox {
            lo: parts[0],
            hi: parts[1],
        }),
        "gaussian" => Ok(ContextLaw::Gaussian {
            mean: parts[0],
            std: parts[1],
        }),
        _ => Err(err()),
    }
}

fn parse_agent(scan: &mut Scanner, section: &str, dim: usize) -> Result<AgentMean> {
    if let Some(v) = scan.take(section, "logistic") {
        let theta = parse_f64_list(&v, &format!("{section}.logistic"))?;
        let intercept = match scan.take(section, "intercept") {
            Some(v) => parse_scalar::<f64>(&v, &format!("{section}.intercept"), "a number")?,
            None => 0.0,
        };
        return Ok(AgentMean::Logistic { theta, intercept });
    }
    if let Some(v) = scan.take(section, "constant") {
        let value = parse_scalar::<f64>(&v, &format!("{section}.constant"), "a number in [0, 1]")?;
        return Ok(AgentMean::Constant { value });
    }
    let cells_raw = scan.take_all(section, "cell");
    if !cells_raw.is_empty() {
        let default = match scan.take(section, "default") {
            Some(v) => {
                parse_scalar::<f64>(&v, &format!("{section}.default"), "a number in [0, 1]")?
            }
            None => 0.5,
        };
        let mut cells = Vec::new();
        for raw in cells_raw {
            cells.push(parse_cell(&raw, section, dim)?);
        }
        return Ok(AgentMean::Piecewise { cells, default });
    }
    Err(CliError::ValidationError {
        path: section.to_string(),
        message: "agent needs `logistic = ...`, `constant = ...`, or `cell = ...` lines".into(),
    })
}

/// `cell = lo1:hi1, lo2:hi2, ..., value` — one range per dimension, then the
/// constant mean inside that box.
fn parse_cell(raw: &str, section: &str, dim: usize) -> Result<PiecewiseCell> {
    let path = format!("{section}.cell");
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    if parts.len() != dim + 1 {
        return Err(CliError::ValidationError {
            path,
            message: format!(
                "expected {dim} ranges plus a value, got {} fields",
                parts.len()
            ),
        });
    }
    let mut bounds = Vec::with_capacity(dim);
    for part in &parts[..dim] {
        let Some((lo, hi)) = part.split_once(':') else {
            return Err(CliError::TypeError {
                path: path.clone(),
                expected: "ranges of the form lo:hi",
            });
        };
        let lo = parse_scalar::<f64>(lo.trim(), &path, "a number")?;
        let hi = parse_scalar::<f64>(hi.trim(), &path, "a number")?;
        bounds.push((lo, hi));
    }
    let value = parse_scalar::<f64>(parts[dim], &path, "a number in [0, 1]")?;
    Ok(PiecewiseCell { bounds, value })
}

/// Renders the resolved configuration for `--explain`.
pub fn explain_text(cfg: &AppConfig) -> String {
    let mut out = String::from("resolved configuration:\n");
    for entry in &cfg.explain {
        let source = match entry.provenance {
            Provenance::Default => "default",
            Provenance::File => "config",
            Provenance::Flag => "flag",
        };
        out.push_str(&format!(
            "  {:<20} = {:<28} [{source}] {}\n",
            entry.key, entry.value, entry.note
        ));
    }
    out
}
