//! Command implementations: resolve a source, run the engine, write files.
//!
//! Every command writes its artifacts plus a `manifest.json` listing them
//! along with the SHA-256 of the configuration file, so an output directory
//! is self-describing. Sweep runs fan out over a bounded rayon pool; results
//! are reduced in run order, so `--jobs` never changes the output bytes.

use std::fmt::Write as _;
use std::path::PathBuf;

use capbandit_core::harness::{
    self, aggregate_cell, run_offline_benchmark, run_sweep_member, ExperimentConfig, ModelFamily,
    ReplaySource, RunArtifacts, SweepTable,
};
use capbandit_core::policy::{self, PolicyKind};
use capbandit_core::synth;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::checkpoint::{Checkpoint, CHECKPOINT_VERSION};
use crate::config::AppConfig;
use crate::io::{self, SweepRow, SweepRows};
use crate::plot;
use crate::{CliError, Result};

const SALT_SYNTH: u64 = 0x53;
const SALT_RUN: u64 = 0x52;
const SALT_OFFLINE: u64 = 0x4f;

/// Splitmix-style finalizer used to derive disjoint seed streams from the
/// base seed (generation vs permutation vs model randomness).
fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for p in [base, salt] {
        let mut z = h.wrapping_add(p).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z ^= z >> 27;
        z = z.wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        h = z;
    }
    h
}

/// Everything a command needs besides its own logic.
pub struct CommandContext {
    pub config: AppConfig,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub config_hash: String,
    pub command: &'static str,
}

impl CommandContext {
    pub fn new(
        config: AppConfig,
        config_bytes: &[u8],
        out_dir: PathBuf,
        jobs: usize,
        command: &'static str,
    ) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_bytes);
        let config_hash = format!("{:x}", hasher.finalize());
        Self {
            config,
            out_dir,
            jobs: jobs.max(1),
            config_hash,
            command,
        }
    }

    fn experiment(&self) -> &ExperimentConfig {
        &self.config.experiment
    }

    /// Loads the data log or generates the synthetic one.
    fn resolve_source(&self) -> Result<ReplaySource> {
        match (&self.config.data, &self.config.synth) {
            (Some(data), None) => {
                let log = io::load_task_log(&data.path, data.agent_names.clone())?;
                log::info!(
                    "loaded {} records, {} features, {} agents from {}",
                    log.len(),
                    log.feature_dim(),
                    log.num_agents(),
                    data.path.display()
                );
                Ok(ReplaySource::from_log(log))
            }
            (None, Some(spec)) => {
                let seed = derive_seed(self.experiment().base_seed, SALT_SYNTH);
                let synth_log = synth::generate(spec, seed)?;
                log::info!(
                    "generated {} synthetic records ({} agents)",
                    synth_log.log.len(),
                    spec.agents.len()
                );
                Ok(ReplaySource::from_synth(synth_log))
            }
            (Some(_), Some(_)) => Err(CliError::ValidationError {
                path: "data/synth".into(),
                message: "configure either [data] or [synth], not both".into(),
            }),
            (None, None) => Err(CliError::ValidationError {
                path: "data/synth".into(),
                message: "a [data] log or a [synth] generator is required".into(),
            }),
        }
    }

    /// First profile of the grid, used by the single-run commands.
    fn head_profile(&self) -> Result<&capbandit_core::CapacityProfile> {
        self.experiment()
            .grid
            .first()
            .ok_or_else(|| CliError::ValidationError {
                path: "experiment.alpha_grid".into(),
                message: "at least one capacity profile is required".into(),
            })
    }

    fn write(&self, name: &str, contents: &str, artifacts: &mut Vec<String>) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(self.out_dir.join(name), contents)?;
        artifacts.push(name.to_string());
        Ok(())
    }

    fn finish(&self, artifacts: Vec<String>) -> Result<()> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            command: &'a str,
            config_sha256: &'a str,
            artifacts: &'a [String],
        }
        let manifest = serde_json::to_string_pretty(&Manifest {
            command: self.command,
            config_sha256: &self.config_hash,
            artifacts: &artifacts,
        })
        .expect("manifest serialization");
        std::fs::create_dir_all(&self.out_dir)?;
        std::fs::write(self.out_dir.join("manifest.json"), manifest)?;
        Ok(())
    }
}

/// `synth`: generate the configured log and write it in the standard schema.
pub fn cmd_synth(ctx: &CommandContext) -> Result<()> {
    let Some(spec) = &ctx.config.synth else {
        return Err(CliError::ValidationError {
            path: "synth".into(),
            message: "the synth command needs a [synth] section".into(),
        });
    };
    let seed = derive_seed(ctx.experiment().base_seed, SALT_SYNTH);
    let synth_log = synth::generate(spec, seed)?;
    let mut artifacts = Vec::new();
    ctx.write(
        "log.csv",
        &io::task_log_to_csv(&synth_log.log),
        &mut artifacts,
    )?;
    let mut means = String::from("record_index");
    for a in 1..=spec.agents.len() {
        let _ = write!(means, ",mu_agent{a}");
    }
    means.push('\n');
    for (t, row) in synth_log.mu.iter().enumerate() {
        let _ = write!(means, "{t}");
        for v in row {
            let _ = write!(means, ",{v}");
        }
        means.push('\n');
    }
    ctx.write("true_means.csv", &means, &mut artifacts)?;
    ctx.finish(artifacts)
}

fn summary_csv(rows: &[(PolicyKind, &RunArtifacts)]) -> String {
    let agents = rows
        .first()
        .map(|(_, a)| a.result.realized_fractions.len())
        .unwrap_or(0);
    let mut out = String::from("policy,error,mean_reward,model_updates");
    for a in 1..=agents {
        let _ = write!(out, ",frac_agent_{a}");
    }
    for a in 1..=agents {
        let _ = write!(out, ",q_final_{a}");
    }
    out.push_str(",cumulative_regret\n");
    for (policy, artifacts) in rows {
        let r = &artifacts.result;
        let _ = write!(
            out,
            "{policy},{},{},{}",
            r.error_rate, r.mean_reward, r.model_updates
        );
        for f in &r.realized_fractions {
            let _ = write!(out, ",{f}");
        }
        for q in &r.final_queues {
            let _ = write!(out, ",{q}");
        }
        match r.cumulative_regret {
            Some(v) => {
                let _ = writeln!(out, ",{v}");
            }
            None => out.push_str(",\n"),
        }
    }
    out
}

/// `simulate` / `batch-sim`: one run per configured policy on the first
/// capacity profile, replaying the source in its stored order.
pub fn cmd_simulate(ctx: &CommandContext, batched: bool) -> Result<()> {
    let source = ctx.resolve_source()?;
    let mut cfg = ctx.experiment().clone();
    let profile = ctx.head_profile()?.clone();
    let batch_size = cfg.batch_size;
    if batched {
        if batch_size < 1 {
            return Err(CliError::ValidationError {
                path: "experiment.batch_size".into(),
                message: "batch-sim needs batch_size >= 1".into(),
            });
        }
        // The batch-plan export is derived from the trace.
        cfg.record_trace = true;
    }
    let seed = derive_seed(cfg.base_seed, SALT_RUN);
    let mut results: Vec<(PolicyKind, RunArtifacts)> = Vec::new();
    for &kind in &cfg.policies {
        let artifacts = if batched {
            harness::run_batched_stateful(&source, &cfg, kind, &profile, seed, batch_size)?
        } else {
            harness::run_online_stateful(&source, &cfg, kind, &profile, seed)?
        };
        log::info!(
            "{kind}: error {:.4}, fractions {:?}",
            artifacts.result.error_rate,
            artifacts.result.realized_fractions
        );
        results.push((kind, artifacts));
    }

    let mut artifacts = Vec::new();
    let rows: Vec<(PolicyKind, &RunArtifacts)> = results.iter().map(|(k, a)| (*k, a)).collect();
    ctx.write("summary.csv", &summary_csv(&rows), &mut artifacts)?;
    for (kind, run) in &results {
        if let Some(trace) = &run.result.trace {
            let agents = profile.num_agents();
            ctx.write(
                &format!("trace_{kind}.csv"),
                &io::trace_to_csv(trace, agents),
                &mut artifacts,
            )?;
            ctx.write(
                &format!("queues_{kind}.csv"),
                &io::queues_to_csv(trace, agents),
                &mut artifacts,
            )?;
            if batched {
                ctx.write(
                    &format!("batches_{kind}.csv"),
                    &io::batches_to_csv(trace, batch_size),
                    &mut artifacts,
                )?;
            }
        }
        let checkpoint = Checkpoint {
            version: CHECKPOINT_VERSION,
            label: format!("{kind} seed {seed}"),
            rounds_completed: source.len(),
            models: run.models.clone(),
            queues: run.queues.clone(),
        };
        let name = format!("checkpoint_{kind}.json");
        ctx.write(&name, &checkpoint.to_json()?, &mut artifacts)?;
    }
    ctx.finish(artifacts)
}

/// Parallel sweep execution; reduction happens in run order so `--jobs`
/// cannot change the table.
pub fn run_sweep_parallel(
    source: &ReplaySource,
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<SweepTable> {
    cfg.validate().map_err(CliError::Engine)?;
    if cfg.grid.is_empty() || cfg.policies.is_empty() {
        return Err(CliError::ValidationError {
            path: "experiment".into(),
            message: "sweep needs at least one policy and one profile".into(),
        });
    }
    let cells = harness::sweep_cells(cfg);
    let jobs = jobs.max(1);
    let mut units: Vec<(usize, usize)> = Vec::new();
    for (cell_index, _) in cells.iter().enumerate() {
        for k in 0..cfg.runs {
            units.push((cell_index, k));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::ValidationError {
            path: "--jobs".into(),
            message: e.to_string(),
        })?;
    let outcomes: Vec<capbandit_core::Result<harness::RunResult>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(cell_index, k)| {
                let (kind, profile_index) = cells[cell_index];
                run_sweep_member(source, cfg, kind, &cfg.grid[profile_index], k)
            })
            .collect()
    });
    let mut per_cell: Vec<Vec<harness::RunResult>> =
        vec![Vec::with_capacity(cfg.runs); cells.len()];
    for (&(cell_index, _), outcome) in units.iter().zip(outcomes) {
        per_cell[cell_index].push(outcome.map_err(CliError::Engine)?);
    }
    let mut table_cells = Vec::with_capacity(cells.len());
    for (cell_index, &(kind, profile_index)) in cells.iter().enumerate() {
        table_cells.push(aggregate_cell(
            cfg,
            kind,
            profile_index,
            &per_cell[cell_index],
        ));
    }
    Ok(SweepTable {
        profiles: cfg.grid.clone(),
        cells: table_cells,
        offline: Vec::new(),
    })
}

/// `sweep`: full (policy x profile) table, optional offline reference fits,
/// CSV plus rendered SVG.
pub fn cmd_sweep(ctx: &CommandContext) -> Result<()> {
    let source = ctx.resolve_source()?;
    let cfg = ctx.experiment();
    let mut table = run_sweep_parallel(&source, cfg, ctx.jobs)?;
    let offline_rows = offline_rows(ctx, &source, &ctx.config.offline_families)?;
    table.offline = offline_rows
        .iter()
        .map(|(name, e)| {
            let family = if name == "tree" {
                ModelFamily::Tree
            } else {
                ModelFamily::Logistic
            };
            (family, *e)
        })
        .collect();

    let mut artifacts = Vec::new();
    let csv = io::sweep_to_csv(&table);
    ctx.write("sweep.csv", &csv, &mut artifacts)?;
    if !offline_rows.is_empty() {
        ctx.write(
            "offline.csv",
            &io::offline_to_csv(&offline_rows),
            &mut artifacts,
        )?;
    }
    let rows = sweep_rows_of(&table);
    let svg = plot::render_svg(&rows, &offline_rows, ctx.config.plot.title.as_deref())?;
    ctx.write("sweep.svg", &svg, &mut artifacts)?;
    ctx.finish(artifacts)
}

fn sweep_rows_of(table: &SweepTable) -> SweepRows {
    SweepRows {
        rows: table
            .cells
            .iter()
            .map(|c| SweepRow {
                policy: c.policy,
                alphas: table.profiles[c.profile_index].alphas().to_vec(),
                mean_error: c.mean_error,
                std_error: c.std_error,
            })
            .collect(),
    }
}

fn offline_rows(
    ctx: &CommandContext,
    source: &ReplaySource,
    families: &[String],
) -> Result<Vec<(String, f64)>> {
    let mut rows = Vec::new();
    for family in families {
        let fam = match family.as_str() {
            "logistic" => ModelFamily::Logistic,
            "tree" => ModelFamily::Tree,
            other => {
                return Err(CliError::ValidationError {
                    path: "experiment.offline_benchmarks".into(),
                    message: format!("unknown family `{other}`"),
                })
            }
        };
        let seed = derive_seed(ctx.experiment().base_seed, SALT_OFFLINE);
        let error = run_offline_benchmark(source, fam, ctx.experiment(), seed)?;
        rows.push((fam.name().to_string(), error));
    }
    Ok(rows)
}

/// `offline`: the unconstrained offline benchmark for each requested family
/// (both families when none are configured).
pub fn cmd_offline(ctx: &CommandContext) -> Result<()> {
    let source = ctx.resolve_source()?;
    let families = if ctx.config.offline_families.is_empty() {
        vec!["logistic".to_string(), "tree".to_string()]
    } else {
        ctx.config.offline_families.clone()
    };
    let rows = offline_rows(ctx, &source, &families)?;
    let mut artifacts = Vec::new();
    ctx.write("offline.csv", &io::offline_to_csv(&rows), &mut artifacts)?;
    ctx.finish(artifacts)
}

/// `oracle`: hindsight-optimal assignments on the source. Synthetic sources
/// use true means; logged sources use the counterfactual rewards as the mean
/// table (the realized hindsight optimum).
pub fn cmd_oracle(ctx: &CommandContext) -> Result<()> {
    let source = ctx.resolve_source()?;
    let profile = ctx.head_profile()?;
    if profile.num_agents() != source.log().num_agents() {
        return Err(CliError::Engine(capbandit_core::Error::DimensionMismatch {
            expected: source.log().num_agents(),
            got: profile.num_agents(),
        }));
    }
    let mu_table: Vec<Vec<f64>> = match source.true_means() {
        Some(mu) => mu.to_vec(),
        None => source
            .log()
            .records()
            .iter()
            .map(|rec| (0..rec.rewards.len()).map(|a| rec.reward_of(a)).collect())
            .collect(),
    };
    let unconstrained = policy::oracle_unconstrained(&mu_table);
    let unconstrained_value = policy::assignment_value(&mu_table, &unconstrained);
    let constrained = policy::oracle_constrained_general(&mu_table, profile)?;
    let random = policy::random_value(&mu_table, profile.alphas());

    let mut artifacts = Vec::new();
    ctx.write(
        "oracle_unconstrained.csv",
        &io::oracle_to_csv(&unconstrained, &mu_table),
        &mut artifacts,
    )?;
    ctx.write(
        "oracle_constrained.csv",
        &io::oracle_to_csv(&constrained.assignment, &mu_table),
        &mut artifacts,
    )?;
    let mut summary = String::from("quantity,value\n");
    let _ = writeln!(summary, "unconstrained_value,{unconstrained_value}");
    let _ = writeln!(summary, "constrained_value,{}", constrained.value);
    let _ = writeln!(summary, "random_value,{random}");
    for (a, l) in constrained.shadow_prices.lambdas.iter().enumerate() {
        let _ = writeln!(summary, "lambda_{},{l}", a + 1);
    }
    let _ = writeln!(summary, "threshold,{}", constrained.shadow_prices.threshold);
    ctx.write("oracle_summary.csv", &summary, &mut artifacts)?;
    ctx.finish(artifacts)
}

/// `plot`: re-render a sweep CSV (plus optional offline CSV) as SVG.
pub fn cmd_plot(ctx: &CommandContext) -> Result<()> {
    let Some(input) = &ctx.config.plot.input else {
        return Err(CliError::ValidationError {
            path: "plot.input".into(),
            message: "the plot command needs `input = <sweep.csv>` in [plot]".into(),
        });
    };
    let text = std::fs::read_to_string(input)?;
    let rows = io::parse_sweep_csv(&text, &input.display().to_string())?;
    let offline = match &ctx.config.plot.offline {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            io::parse_offline_csv(&text, &path.display().to_string())?
        }
        None => Vec::new(),
    };
    let svg = plot::render_svg(&rows, &offline, ctx.config.plot.title.as_deref())?;
    let mut artifacts = Vec::new();
    ctx.write("plot.svg", &svg, &mut artifacts)?;
    ctx.finish(artifacts)
}
