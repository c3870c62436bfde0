use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use gsrc_cli::{cmd_eval, cmd_sweep, cmd_train, load_config, Axis, CommonArgs, Stage};
use gsrc_core::engine::SchemeId;

const SMALL: &str = "\
clock.n_tti = 12
trainer.episodes = 4
trainer.warmup = 16
trainer.batch_size = 8
trainer.hidden = 8
experiment.episodes = 16
experiment.trajectory_episodes = 2
";

fn setup(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out");
    fs::write(&cfg, format!("{SMALL}experiment.output_dir = {}\n{extra}", out.display())).unwrap();
    (dir, cfg)
}

fn args(cfg: &Path) -> CommonArgs {
    CommonArgs {
        config: Some(cfg.to_path_buf()),
        ..CommonArgs::default()
    }
}

fn gsrc(argv: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gsrc")).args(argv).output().unwrap()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn columns_constant(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    let widths: Vec<usize> = text.lines().map(|l| l.split(',').count()).collect();
    assert!(widths.len() > 1, "{} has no rows", path.display());
    assert!(widths.iter().all(|&w| w == widths[0]), "{}", path.display());
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn train_then_eval_writes_every_artifact() {
    let (_dir, cfg_path) = setup("");
    let cfg = load_config(&args(&cfg_path), Stage::Train).unwrap();
    let models = cmd_train(&cfg).unwrap();
    assert_eq!(models.len(), 2);
    let out = cfg.output_dir.clone();
    for scheme in ["deeppro", "gsrc"] {
        assert!(out.join(scheme).join("model.bin").exists());
        let learning = out.join(scheme).join("learning.csv");
        assert_eq!(header(&learning), "episode,cum_reward,epsilon");
        assert_eq!(fs::read_to_string(&learning).unwrap().lines().count(), 1 + 4);
    }

    let cfg = load_config(&args(&cfg_path), Stage::Evaluate).unwrap();
    let rows = cmd_eval(&cfg, None).unwrap();
    assert_eq!(rows.len(), 4);
    let summary = out.join("summary.csv");
    assert_eq!(header(&summary), "scheme,k_max,t_rep,episodes,mse_mean,mse_std,tx_mean,decode_rate");
    columns_constant(&summary);
    for scheme in ["tucf", "vaqom", "deeppro", "gsrc"] {
        let traj = out.join(scheme).join("trajectory.csv");
        assert_eq!(header(&traj), "episode,tti,sample_j,t_s,px,py,pz,gx,gy,gz,err_m");
        columns_constant(&traj);
        // two episodes of 12 TTIs with 9 samples each
        assert_eq!(fs::read_to_string(&traj).unwrap().lines().count(), 1 + 2 * 12 * 9);
    }
}

#[test]
fn eval_is_byte_identical_across_runs_and_threads() {
    let (_dir, cfg_path) = setup("experiment.schemes = TUCF,VAQOM\n");
    let out = |threads: usize| {
        let mut cfg = load_config(&args(&cfg_path), Stage::Evaluate).unwrap();
        cfg.threads = threads;
        cmd_eval(&cfg, None).unwrap();
        fs::read(cfg.output_dir.join("summary.csv")).unwrap()
    };
    let first = out(1);
    assert_eq!(first, out(1));
    assert_eq!(first, out(8));
}

#[test]
fn sweep_has_one_row_per_scheme_and_value() {
    let (_dir, cfg_path) = setup("experiment.schemes = TUCF,VAQOM\n");
    let cfg = load_config(&args(&cfg_path), Stage::Evaluate).unwrap();
    let rows = cmd_sweep(&cfg, Axis::Kmax, "1,2,3,4", None).unwrap();
    assert_eq!(rows.len(), 2 * 4);
    let k: Vec<u32> = rows.iter().map(|r| r.k_max).collect();
    assert_eq!(k, [1, 2, 3, 4, 1, 2, 3, 4]);
    // schemes without repetition ignore k_max
    for scheme_rows in rows.chunks(4) {
        assert!(scheme_rows.iter().all(|r| r.summary == scheme_rows[0].summary));
    }
    columns_constant(&cfg.output_dir.join("sweep.csv"));
}

#[test]
fn single_value_sweep_matches_eval() {
    let (_dir, cfg_path) = setup("experiment.schemes = VAQOM\n");
    let cfg = load_config(&args(&cfg_path), Stage::Evaluate).unwrap();
    let sweep = cmd_sweep(&cfg, Axis::Trep, &cfg.repetition.t_rep_s.to_string(), None).unwrap();
    let eval = cmd_eval(&cfg, None).unwrap();
    assert_eq!(sweep, eval);
    let a = fs::read_to_string(cfg.output_dir.join("sweep.csv")).unwrap();
    let b = fs::read_to_string(cfg.output_dir.join("summary.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn command_line_overrides_apply() {
    let (dir, cfg_path) = setup("");
    let mut a = args(&cfg_path);
    a.episodes = Some(3);
    a.seed = Some(99);
    a.out = Some(dir.path().join("elsewhere"));
    a.schemes = vec!["gsrc".into(), "tucf".into()];
    let eval = load_config(&a, Stage::Evaluate).unwrap();
    assert_eq!(eval.episodes, 3);
    assert_eq!(eval.base_seed, 99);
    assert_eq!(eval.output_dir, dir.path().join("elsewhere"));
    assert_eq!(eval.schemes, [SchemeId::Gsrc, SchemeId::Tucf]);
    let train = load_config(&a, Stage::Train).unwrap();
    assert_eq!(train.trainer.seed, 99);
    assert_eq!(train.base_seed, 1);
}

#[test]
fn binary_runs_an_evaluation() {
    let (_dir, cfg_path) = setup("");
    let cfg = cfg_path.to_str().unwrap();
    let r = gsrc(&["eval", "--config", cfg, "--scheme", "tucf", "--episodes", "4"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stdout).contains("TUCF"));
}

#[test]
fn config_errors_exit_with_two() {
    let (_dir, cfg_path) = setup("channel.warp = 9\n");
    let r = gsrc(&["eval", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("channel.warp") && err.contains(":9:"), "{err}");

    let (_dir, cfg_path) = setup("");
    let cfg = cfg_path.to_str().unwrap();
    assert_eq!(gsrc(&["eval", "--config", cfg, "--scheme", "ppo"]).status.code(), Some(2));
    // (k_max - 1) * t_rep must stay below one TTI
    let r = gsrc(&["sweep", "--config", cfg, "--axis", "trep", "--values", "5e-5,5e-4"]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(gsrc(&["train", "--config", cfg, "--scheme", "tucf"]).status.code(), Some(2));
    assert_eq!(gsrc(&["eval", "--config", "/nonexistent/run.cfg"]).status.code(), Some(2));
}

#[test]
fn missing_model_is_a_runtime_error() {
    let (_dir, cfg_path) = setup("");
    let r = gsrc(&["eval", "--config", cfg_path.to_str().unwrap(), "--scheme", "gsrc"]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("gsrc train"));
}

#[test]
fn explicit_model_serves_every_agent_scheme() {
    let (_dir, cfg_path) = setup("experiment.schemes = GSRC\n");
    let cfg = load_config(&args(&cfg_path), Stage::Train).unwrap();
    let model = cmd_train(&cfg).unwrap().remove(0);
    let mut cfg = load_config(&args(&cfg_path), Stage::Evaluate).unwrap();
    cfg.schemes = vec![SchemeId::DeepPro, SchemeId::Gsrc];
    let rows = cmd_eval(&cfg, Some(&model)).unwrap();
    assert_eq!(rows.len(), 2);
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let default = gsrc_core::config::ExperimentConfig::load(&root.join("default.cfg")).unwrap();
    assert_eq!(default, gsrc_core::config::ExperimentConfig::default());
    let quick = load_config(&args(&root.join("quick.cfg")), Stage::Train).unwrap();
    assert_eq!(quick.trainer.episodes, 200);
}
