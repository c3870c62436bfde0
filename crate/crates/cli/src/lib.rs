//! `train`, `eval` and `sweep` over a config file, writing CSV under the output directory.
//!
//! Layout: `<out>/<scheme>/model.bin`, `<out>/<scheme>/learning.csv`,
//! `<out>/<scheme>/trajectory.csv`, `<out>/summary.csv`, `<out>/sweep.csv`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gsrc_core::config::ExperimentConfig;
use gsrc_core::dqn::{load_network, save_network, Agent, FeatureMap};
use gsrc_core::engine::{episode_rng, run_batch, run_episode, train_agent, Scenario, SchemeId};
use gsrc_core::report::{write_learning, write_summary, write_trajectory, SummaryRow};
use gsrc_core::repetition::RepetitionParams;

#[derive(Parser, Debug)]
#[command(name = "gsrc", version, about = "UAV command-and-control simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train a Q-network per agent-driven scheme.
    Train(CommonArgs),
    /// Evaluate schemes and write summary and trajectory CSVs.
    Eval {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Re-run the evaluation across repetition settings.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated axis values, e.g. `1,2,3,4` or `2.5e-5,5e-5`.
        #[arg(long)]
        values: String,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Config file; absent keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scheme to run (repeatable); defaults to `experiment.schemes`.
    #[arg(long = "scheme")]
    pub schemes: Vec<String>,
    /// Evaluation episodes (training episodes come from `trainer.episodes`).
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Base seed: the trainer seed for `train`, the evaluation seed otherwise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// Network used by every agent-driven scheme instead of `<out>/<scheme>/model.bin`.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Kmax,
    Trep,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Run(#[from] gsrc_core::Error),
}

impl From<gsrc_core::config::ConfigError> for CliError {
    fn from(e: gsrc_core::config::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl CliError {
    /// 2 for configuration problems, 1 for everything that failed while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Run(gsrc_core::Error::Config(_)) => 2,
            CliError::Run(_) => 1,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |e| CliError::Run(gsrc_core::Error::io(context, e))
}

pub enum Stage {
    Train,
    Evaluate,
}

/// Config file plus command-line overrides, validated.
pub fn load_config(args: &CommonArgs, stage: Stage) -> Result<ExperimentConfig, CliError> {
    let (mut cfg, origin) = match &args.config {
        Some(path) => (ExperimentConfig::load(path)?, path.display().to_string()),
        None => (ExperimentConfig::default(), "<defaults>".to_string()),
    };
    if let Some(n) = args.episodes {
        cfg.episodes = n;
    }
    if let Some(seed) = args.seed {
        match stage {
            Stage::Train => cfg.trainer.seed = seed,
            Stage::Evaluate => cfg.base_seed = seed,
        }
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate(&origin)?;
    if !args.schemes.is_empty() {
        cfg.schemes = args
            .schemes
            .iter()
            .map(|s| s.parse::<SchemeId>().map_err(|e| CliError::Config(e.to_string())))
            .collect::<Result<_, _>>()?;
    }
    Ok(cfg)
}

pub fn scheme_dir(cfg: &ExperimentConfig, scheme: SchemeId) -> PathBuf {
    cfg.output_dir.join(scheme.name().to_ascii_lowercase())
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
    }
    let f = File::create(path).map_err(io_err(format!("creating {}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn features(cfg: &ExperimentConfig) -> FeatureMap {
    FeatureMap::new(cfg.trainer.scene_scale_m, &cfg.clock, &cfg.vel_sets, cfg.trainer.goal_offset)
}

/// Train every agent-driven scheme in `cfg.schemes`; returns the model paths.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let schemes: Vec<SchemeId> = cfg.schemes.iter().copied().filter(|s| s.uses_agent()).collect();
    if schemes.is_empty() {
        return Err(CliError::Config("no agent-driven scheme selected (DEEPPRO or GSRC)".into()));
    }
    let scenario = cfg.scenario()?;
    let mut written = Vec::new();
    for scheme in schemes {
        let (agent, curve) = train_agent(scheme, &scenario, &cfg.trainer)?;
        let dir = scheme_dir(cfg, scheme);
        let mut w = create(&dir.join("learning.csv"))?;
        write_learning(&mut w, &curve)?;
        w.flush().map_err(io_err("learning.csv"))?;
        let model = dir.join("model.bin");
        save_network(&agent.net, &model).map_err(gsrc_core::Error::from)?;
        written.push(model);
    }
    Ok(written)
}

fn load_agent(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    scheme: SchemeId,
    model: Option<&Path>,
) -> Result<Option<Agent>, CliError> {
    if !scheme.uses_agent() {
        return Ok(None);
    }
    let path = model.map_or_else(|| scheme_dir(cfg, scheme).join("model.bin"), Path::to_path_buf);
    if !path.exists() {
        return Err(CliError::Run(gsrc_core::Error::io(
            format!("{scheme} model {} (run `gsrc train` first or pass --model)", path.display()),
            std::io::Error::from(std::io::ErrorKind::NotFound),
        )));
    }
    let net = load_network(&path).map_err(gsrc_core::Error::from)?;
    let agent = Agent::new(net, features(cfg), scenario.action_space()).map_err(gsrc_core::Error::from)?;
    Ok(Some(agent))
}

fn evaluate(
    cfg: &ExperimentConfig,
    scenario: &Scenario,
    scheme: SchemeId,
    agent: Option<&Agent>,
) -> Result<SummaryRow, CliError> {
    let batch = run_batch(scheme, scenario, agent, cfg.episodes, cfg.base_seed, cfg.threads)?;
    Ok(SummaryRow {
        scheme,
        k_max: scenario.repetition.k_max,
        t_rep_s: scenario.repetition.t_rep_s,
        summary: batch.summary,
    })
}

/// Evaluate `cfg.schemes`; writes `summary.csv` and one `trajectory.csv` per scheme.
pub fn cmd_eval(cfg: &ExperimentConfig, model: Option<&Path>) -> Result<Vec<SummaryRow>, CliError> {
    let scenario = cfg.scenario()?;
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        let agent = load_agent(cfg, &scenario, scheme, model)?;
        rows.push(evaluate(cfg, &scenario, scheme, agent.as_ref())?);

        let shown = cfg.trajectory_episodes.min(cfg.episodes);
        let results = (0..shown)
            .map(|e| run_episode(scheme, &scenario, agent.as_ref(), &mut episode_rng(cfg.base_seed, e)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut w = create(&scheme_dir(cfg, scheme).join("trajectory.csv"))?;
        write_trajectory(&mut w, results.iter().enumerate())?;
        w.flush().map_err(io_err("trajectory.csv"))?;
    }
    let mut w = create(&cfg.output_dir.join("summary.csv"))?;
    write_summary(&mut w, &rows)?;
    w.flush().map_err(io_err("summary.csv"))?;
    Ok(rows)
}

/// Parse `--values` for `axis`, checking each against the repetition invariant.
pub fn sweep_points(cfg: &ExperimentConfig, axis: Axis, values: &str) -> Result<Vec<RepetitionParams>, CliError> {
    let bad = |v: &str, why: String| CliError::Config(format!("--values: `{v}`: {why}"));
    let mut points = Vec::new();
    for v in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
        let mut p = cfg.repetition;
        match axis {
            Axis::Kmax => p.k_max = v.parse().map_err(|e| bad(v, format!("{e}")))?,
            Axis::Trep => p.t_rep_s = v.parse().map_err(|e| bad(v, format!("{e}")))?,
        }
        p.validate(cfg.clock.tti_s).map_err(|e| bad(v, e.to_string()))?;
        points.push(p);
    }
    if points.is_empty() {
        return Err(CliError::Config("--values: no values given".into()));
    }
    Ok(points)
}

/// One row per (scheme, value) in `sweep.csv`. Agents are loaded once and reused at every point.
pub fn cmd_sweep(
    cfg: &ExperimentConfig,
    axis: Axis,
    values: &str,
    model: Option<&Path>,
) -> Result<Vec<SummaryRow>, CliError> {
    let points = sweep_points(cfg, axis, values)?;
    let base = cfg.scenario()?;
    let mut rows = Vec::new();
    for &scheme in &cfg.schemes {
        let agent = load_agent(cfg, &base, scheme, model)?;
        for &p in &points {
            let scenario = base.clone().with_repetition(p)?;
            rows.push(evaluate(cfg, &scenario, scheme, agent.as_ref())?);
        }
    }
    let mut w = create(&cfg.output_dir.join("sweep.csv"))?;
    write_summary(&mut w, &rows)?;
    w.flush().map_err(io_err("sweep.csv"))?;
    Ok(rows)
}

fn report(rows: &[SummaryRow]) {
    for r in rows {
        let s = &r.summary;
        println!(
            "{:8} k_max={} t_rep={:e} mse={:.6} (se {:.6}) tx={:.4} decoded={:.4}",
            r.scheme.name(),
            r.k_max,
            r.t_rep_s,
            s.mse_mean,
            s.std_error(),
            s.tx_mean,
            s.decode_rate
        );
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(common) => {
            let cfg = load_config(&common, Stage::Train)?;
            for path in cmd_train(&cfg)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Eval { common, model } => {
            let cfg = load_config(&common, Stage::Evaluate)?;
            report(&cmd_eval(&cfg, model.model.as_deref())?);
        }
        Command::Sweep {
            common,
            model,
            axis,
            values,
        } => {
            let cfg = load_config(&common, Stage::Evaluate)?;
            report(&cmd_sweep(&cfg, axis, &values, model.model.as_deref())?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_values_parse_per_axis() {
        let cfg = ExperimentConfig::default();
        let k = sweep_points(&cfg, Axis::Kmax, "1, 2,4").unwrap();
        assert_eq!(k.iter().map(|p| p.k_max).collect::<Vec<_>>(), [1, 2, 4]);
        assert!(k.iter().all(|p| p.t_rep_s == cfg.repetition.t_rep_s));
        let t = sweep_points(&cfg, Axis::Trep, "2.5e-5,2e-4").unwrap();
        assert_eq!(t.iter().map(|p| p.t_rep_s).collect::<Vec<_>>(), [2.5e-5, 2e-4]);
        assert!(t.iter().all(|p| p.k_max == cfg.repetition.k_max));
    }

    #[test]
    fn sweep_values_are_config_errors() {
        let cfg = ExperimentConfig::default();
        for (axis, v) in [(Axis::Kmax, "0"), (Axis::Kmax, "two"), (Axis::Trep, "-1e-5"), (Axis::Trep, "")] {
            assert_eq!(sweep_points(&cfg, axis, v).unwrap_err().exit_code(), 2, "{v}");
        }
    }

    #[test]
    fn runtime_failures_exit_with_one() {
        let e = CliError::Run(gsrc_core::Error::io("x", std::io::Error::from(std::io::ErrorKind::NotFound)));
        assert_eq!(e.exit_code(), 1);
        assert_eq!(CliError::Config("bad".into()).exit_code(), 2);
    }
}
