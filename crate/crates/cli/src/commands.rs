use std::collections::BTreeMap;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use adr_planner::environment::CostMatrix;
use adr_planner::learner::{self, greedy_episode, EpisodeTrace};
use adr_planner::oracle::{self, MinDvResult, TIE_TOLERANCE};
use adr_planner::{
    data, derive_seed, Budgets, CostProvider, DebrisCatalog, Environment, HighThrust,
    OrbitalElements, QNetwork, StartPolicy, Stream, TrainingReport, TransferCost,
};
use serde::{Deserialize, Serialize};

use crate::config::{worker_count, CatalogSource, RunConfig};
use crate::plot::{self, Series};
use crate::{Cli, CliError, Command, EvalArgs, GenerateArgs, RunArgs, TransferArgs, ValidateArgs};

/// Time budget used by `validate` when none is given on the command line.
pub const VALIDATE_DT_MAX: f64 = 1e12;

/// Dispatches a parsed command line and prints its primary result.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => {
            let (path, n) = cmd_generate(&args)?;
            println!("wrote {n} debris to {}", path.display());
        }
        Command::Train(args) => {
            let cfg = load_run_config(&args.run)?;
            let out = cmd_train(cfg)?;
            println!(
                "wrote {} seed runs to {}",
                out.runs.len(),
                out.dir.display()
            );
        }
        Command::Eval(args) => {
            let summary = cmd_eval(&args)?;
            println!("{}", to_json(&summary));
        }
        Command::Validate(args) => {
            let verdict = cmd_validate(&args)?;
            println!("{}", to_json(&verdict));
        }
        Command::Transfer(args) => {
            let cost = cmd_transfer(&args)?;
            println!("delta_v_km_s {:.6}", cost.delta_v);
            println!("delta_t_s {:.3}", cost.delta_t);
        }
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("summary serializes")
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

/// Parses `a_km,i_deg,omega_deg,nu_deg`.
pub fn parse_elements(text: &str) -> Result<OrbitalElements, CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(CliError::Config(format!(
            "expected `a_km,i_deg,omega_deg,nu_deg`, got `{text}`"
        )));
    }
    let mut v = [0.0; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p
            .parse()
            .map_err(|_| CliError::Config(format!("`{p}` is not a number in `{text}`")))?;
    }
    OrbitalElements::from_degrees(v[0], v[1], v[2], v[3]).map_err(config_err)
}

/// Builds the run configuration from an optional JSON file plus flag overrides.
pub fn load_run_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &args.catalog_csv {
        cfg.catalog = CatalogSource::Csv(p.clone());
    }
    if let Some(p) = &args.catalog_tle {
        cfg.catalog = CatalogSource::Tle(p.clone());
    }
    if let Some(n) = args.generate_n {
        let (seed, ranges) = match &cfg.catalog {
            CatalogSource::Generate { seed, ranges, .. } => (*seed, *ranges),
            _ => (0, Default::default()),
        };
        cfg.catalog = CatalogSource::Generate { n, seed, ranges };
    }
    if let Some(s) = args.generate_seed {
        match &mut cfg.catalog {
            CatalogSource::Generate { seed, .. } => *seed = s,
            _ => {
                return Err(CliError::Config(
                    "--generate-seed needs a generated catalog".into(),
                ))
            }
        }
    }
    if args.n_debris.is_some() {
        cfg.n_debris = args.n_debris;
    }
    let m = &mut cfg.mission;
    if let Some(v) = args.dv_max {
        m.delta_v_max = v;
    }
    if let Some(v) = args.dt_max {
        m.delta_t_max = v;
    }
    if let Some(v) = args.r_prio {
        m.r_prio = v;
    }
    if let Some(v) = args.risk_threshold {
        m.risk_threshold = v;
    }
    if let Some(v) = args.risk_visible {
        m.risk_visible = v;
    }
    if let Some(text) = &args.parking_orbit {
        m.start_policy = StartPolicy::ParkingOrbit(parse_elements(text)?);
    }
    let a = &mut cfg.agent;
    if let Some(v) = args.episodes {
        a.episodes = v;
    }
    if let Some(v) = args.gamma {
        a.gamma = v;
    }
    if let Some(v) = args.learning_rate {
        a.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        a.batch_size = v;
    }
    if let Some(v) = args.buffer_capacity {
        a.buffer_capacity = v;
    }
    if let Some(v) = args.target_sync_period {
        a.target_sync_period = v;
    }
    if let Some(v) = args.learning_starts {
        a.learning_starts = v;
    }
    if let Some(v) = &args.hidden {
        a.hidden = v.clone();
    }
    if let Some(v) = &args.seeds {
        cfg.seeds = v.clone();
    }
    if let Some(v) = args.eval_episodes {
        cfg.eval_episodes = v;
    }
    if let Some(v) = &args.out {
        cfg.output_dir = v.clone();
    }
    Ok(cfg)
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(PathBuf, usize), CliError> {
    if args.n == 0 {
        return Err(CliError::Config("--n must be positive".into()));
    }
    let mut ranges = match &args.config {
        Some(path) => match RunConfig::from_file(path)?.catalog {
            CatalogSource::Generate { ranges, .. } => ranges,
            _ => Default::default(),
        },
        None => Default::default(),
    };
    if let Some(v) = args.a_min_km {
        ranges.a_min_km = v;
    }
    if let Some(v) = args.a_max_km {
        ranges.a_max_km = v;
    }
    if let Some(v) = args.i_mean_deg {
        ranges.i_mean_deg = v;
    }
    if let Some(v) = args.i_sigma_deg {
        ranges.i_sigma_deg = v;
    }
    let catalog = data::generate_cloud(args.n, args.seed, &ranges).map_err(config_err)?;
    data::save_csv(&catalog, &args.out).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok((args.out.clone(), catalog.len()))
}

/// One finished training seed.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub report: TrainingReport,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub dir: PathBuf,
    pub runs: Vec<SeedRun>,
    pub catalog: DebrisCatalog,
    pub config: RunConfig,
}

pub fn metrics_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("metrics_seed{seed}.csv"))
}

pub fn checkpoint_path(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("checkpoint_seed{seed}.qnet"))
}

/// Trains one agent per seed with the high-thrust cost model.
pub fn cmd_train(cfg: RunConfig) -> Result<TrainOutput, CliError> {
    train_with(cfg, &HighThrust::default())
}

pub fn train_with(mut cfg: RunConfig, costs: &dyn CostProvider) -> Result<TrainOutput, CliError> {
    let catalog = cfg.resolve_catalog()?;
    cfg.validate()?;
    let matrix =
        CostMatrix::build(&catalog, &cfg.mission.start_policy, costs).map_err(config_err)?;
    let dir = cfg.output_dir.clone();
    let runs = train_seeds(&cfg, &catalog, &matrix, &dir)?;
    Ok(TrainOutput {
        dir,
        runs,
        catalog,
        config: cfg,
    })
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn train_seeds(
    cfg: &RunConfig,
    catalog: &DebrisCatalog,
    matrix: &CostMatrix,
    dir: &Path,
) -> Result<Vec<SeedRun>, CliError> {
    prepare_dir(dir)?;
    cfg.write_effective(dir)?;
    let workers = worker_count()?.min(cfg.seeds.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SeedRun, String>>>> =
        Mutex::new(vec![None; cfg.seeds.len()]);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let slot = next.fetch_add(1, Ordering::SeqCst);
                let Some(&seed) = cfg.seeds.get(slot) else {
                    break;
                };
                let outcome = train_one(cfg, catalog, matrix, dir, seed);
                results.lock().expect("no worker panicked")[slot] = Some(outcome);
            });
        }
    });

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in cfg
        .seeds
        .iter()
        .zip(results.into_inner().expect("no worker panicked"))
    {
        match r.expect("every seed is processed") {
            Ok(run) => runs.push(run),
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    if !runs.is_empty() {
        write_aggregate(dir, &runs, cfg.curve_window)?;
    }
    if !failures.is_empty() {
        return Err(CliError::Runtime(failures.join("; ")));
    }
    Ok(runs)
}

fn train_one(
    cfg: &RunConfig,
    catalog: &DebrisCatalog,
    matrix: &CostMatrix,
    dir: &Path,
    seed: u64,
) -> Result<SeedRun, String> {
    log::info!("training seed {seed}");
    let env = Environment::with_costs(cfg.mission.clone(), catalog.clone(), matrix.clone(), seed)
        .map_err(|e| e.to_string())?;
    let mut agent = cfg.agent.clone();
    agent.seed = seed;
    let report = learner::train(env, &agent).map_err(|e| e.to_string())?;

    let write = |path: PathBuf, f: &dyn Fn(&mut BufWriter<fs::File>) -> std::io::Result<()>| {
        let file = fs::File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).map_err(|e| format!("{}: {e}", path.display()))
    };
    write(metrics_path(dir, seed), &|w| report.write_metrics_csv(w))?;
    write(checkpoint_path(dir, seed), &|w| {
        report.params.write_checkpoint(w)
    })?;

    let rewards = report.rewards();
    let smooth = plot::moving_average(&rewards, cfg.curve_window);
    let label = format!("seed {seed}, {}-episode moving average", cfg.curve_window);
    let svg = plot::line_chart(
        "Average episode reward",
        "training episode",
        "reward",
        &[Series {
            label: &label,
            values: &smooth,
            band: None,
        }],
    );
    let path = dir.join(format!("curve_seed{seed}.svg"));
    fs::write(&path, svg).map_err(|e| format!("{}: {e}", path.display()))?;
    log::info!(
        "seed {seed}: {} steps, final reward {}",
        report.total_steps,
        rewards.last().copied().unwrap_or(0.0)
    );
    Ok(SeedRun { seed, report })
}

fn write_aggregate(dir: &Path, runs: &[SeedRun], window: usize) -> Result<(), CliError> {
    let per_seed: Vec<Vec<f64>> = runs.iter().map(|r| r.report.rewards()).collect();
    let stats = plot::aggregate(&per_seed, window);
    let path = dir.join("aggregate.csv");
    fs::write(&path, plot::aggregate_csv(&stats, runs.len()))
        .map_err(|e| CliError::io(&path, e))?;

    let len = per_seed.iter().map(Vec::len).min().unwrap_or(0);
    let smoothed: Vec<Vec<f64>> = per_seed
        .iter()
        .map(|r| plot::moving_average(&r[..len], window))
        .collect();
    let count = smoothed.len() as f64;
    let mean: Vec<f64> = (0..len)
        .map(|k| smoothed.iter().map(|s| s[k]).sum::<f64>() / count)
        .collect();
    let std: Vec<f64> = (0..len)
        .map(|k| {
            (smoothed
                .iter()
                .map(|s| (s[k] - mean[k]).powi(2))
                .sum::<f64>()
                / count)
                .sqrt()
        })
        .collect();
    let label = format!("mean ± std over {} seeds", runs.len());
    let svg = plot::line_chart(
        "Average episode reward",
        "training episode",
        "reward",
        &[Series {
            label: &label,
            values: &mean,
            band: Some(&std),
        }],
    );
    let path = dir.join("learning_curve.svg");
    fs::write(&path, svg).map_err(|e| CliError::io(&path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub checkpoint: PathBuf,
    pub masked: bool,
    pub episodes: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub min_reward: f64,
    pub max_reward: f64,
    pub mean_removed: f64,
    pub termination: BTreeMap<String, usize>,
}

fn eval_env(
    cfg: &RunConfig,
    catalog: &DebrisCatalog,
    matrix: &CostMatrix,
    seed: u64,
) -> Result<Environment, CliError> {
    Environment::with_costs(
        cfg.mission.clone(),
        catalog.clone(),
        matrix.clone(),
        derive_seed(seed, Stream::Evaluation),
    )
    .map_err(config_err)
}

/// Greedy evaluation of a checkpoint, `eval_episodes` per configured seed.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalSummary, CliError> {
    let mut cfg = load_run_config(&args.run)?;
    let catalog = cfg.resolve_catalog()?;
    cfg.validate()?;
    let file = fs::File::open(&args.checkpoint)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.checkpoint.display())))?;
    let params = QNetwork::read_checkpoint(std::io::BufReader::new(file)).map_err(config_err)?;
    let (inputs, outputs) = (cfg.mission.feature_len(), catalog.len());
    if params.input_size() != inputs || params.output_size() != outputs {
        return Err(CliError::Config(format!(
            "checkpoint is {}x{} but the mission needs {inputs}x{outputs}",
            params.input_size(),
            params.output_size()
        )));
    }
    let matrix = CostMatrix::build(&catalog, &cfg.mission.start_policy, &HighThrust::default())
        .map_err(config_err)?;
    let mut traces: Vec<EpisodeTrace> = Vec::new();
    for &seed in &cfg.seeds {
        let mut env = eval_env(&cfg, &catalog, &matrix, seed)?;
        let batch = learner::evaluate(&mut env, &params, cfg.eval_episodes, args.masked)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        traces.extend(batch);
    }
    let summary = summarize(&args.checkpoint, args.masked, &traces);
    prepare_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("eval_summary.json");
    fs::write(&path, to_json(&summary) + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(summary)
}

fn summarize(checkpoint: &Path, masked: bool, traces: &[EpisodeTrace]) -> EvalSummary {
    let n = traces.len().max(1) as f64;
    let rewards: Vec<f64> = traces.iter().map(|t| t.total_reward).collect();
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let mut termination = BTreeMap::new();
    for t in traces {
        *termination
            .entry(t.termination_cause.as_str().to_string())
            .or_insert(0) += 1;
    }
    EvalSummary {
        checkpoint: checkpoint.to_path_buf(),
        masked,
        episodes: traces.len(),
        mean_reward: mean,
        std_reward: var.sqrt(),
        min_reward: rewards.iter().copied().fold(f64::INFINITY, f64::min),
        max_reward: rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_removed: traces.iter().map(|t| t.removed().len()).sum::<usize>() as f64 / n,
        termination,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedVerdict {
    pub seed: u64,
    pub reward: f64,
    pub sequence: Vec<usize>,
}

/// Outcome of the exhaustive-search validation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub dv_optimal: f64,
    pub optimal_sequence: Vec<usize>,
    pub unique: bool,
    pub agent_best_reward: f64,
    #[serde(rename = "match")]
    pub matched: bool,
    pub k: usize,
    pub delta_v_max: f64,
    pub delta_t_max: f64,
    pub oracle_best_reward: f64,
    pub ties: usize,
    pub seeds: Vec<SeedVerdict>,
}

impl Verdict {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<Verdict, CliError> {
    let cfg = load_run_config(&args.run)?;
    let dt_max = args.run.dt_max.unwrap_or(VALIDATE_DT_MAX);
    validate_with(
        cfg,
        args.k,
        args.dv_scale,
        dt_max,
        args.masked,
        &HighThrust::default(),
    )
}

/// Oracle minimum, budget at that minimum, full-depth feasibility check,
/// training and a greedy risk-free replay per seed.
pub fn validate_with(
    mut cfg: RunConfig,
    k: usize,
    dv_scale: f64,
    dt_max: f64,
    masked: bool,
    costs: &dyn CostProvider,
) -> Result<Verdict, CliError> {
    let catalog = cfg.resolve_catalog()?;
    let n = catalog.len();
    if n > oracle::FULL_DEPTH_MAX_N {
        return Err(CliError::Config(format!(
            "validation enumerates every sequence and is limited to {} debris, got {n}",
            oracle::FULL_DEPTH_MAX_N
        )));
    }
    if k == 0 || k > n {
        return Err(CliError::Config(format!("k must lie in [1, {n}], got {k}")));
    }
    if !(dv_scale > 0.0 && dv_scale.is_finite()) {
        return Err(CliError::Config(format!(
            "dv_scale must be positive, got {dv_scale}"
        )));
    }
    let matrix =
        CostMatrix::build(&catalog, &cfg.mission.start_policy, costs).map_err(config_err)?;
    let optimum: MinDvResult = oracle::optimal_min_dv_with(&matrix, k).map_err(config_err)?;

    cfg.mission.delta_v_max = optimum.dv_optimal * dv_scale + TIE_TOLERANCE;
    cfg.mission.delta_t_max = dt_max;
    cfg.mission.risk_threshold = 0.0;
    cfg.validate()?;
    let budgets = Budgets {
        delta_v_max: cfg.mission.delta_v_max,
        delta_t_max: cfg.mission.delta_t_max,
    };
    let full = oracle::full_depth_with(&matrix, budgets).map_err(config_err)?;
    if full.sequence.len() < k {
        return Err(CliError::Config(format!(
            "under delta_v_max = {} and delta_t_max = {} the longest feasible sequence has {} captures, fewer than k = {k}",
            budgets.delta_v_max,
            budgets.delta_t_max,
            full.sequence.len()
        )));
    }

    let dir = cfg.output_dir.clone();
    let runs = train_seeds(&cfg, &catalog, &matrix, &dir)?;
    let mut seeds = Vec::with_capacity(runs.len());
    for run in &runs {
        let mut env = eval_env(&cfg, &catalog, &matrix, run.seed)?;
        let trace = greedy_episode(&mut env, &run.report.params, masked)
            .map_err(|e| CliError::Runtime(e.to_string()))?;
        seeds.push(SeedVerdict {
            seed: run.seed,
            reward: trace.total_reward,
            sequence: trace.removed().to_vec(),
        });
    }
    let agent_best_reward = seeds
        .iter()
        .map(|s| s.reward)
        .fold(f64::NEG_INFINITY, f64::max);
    let verdict = Verdict {
        dv_optimal: optimum.dv_optimal,
        optimal_sequence: optimum.sequence,
        unique: optimum.unique,
        agent_best_reward,
        matched: (agent_best_reward - full.best_reward).abs() <= TIE_TOLERANCE,
        k,
        delta_v_max: budgets.delta_v_max,
        delta_t_max: budgets.delta_t_max,
        oracle_best_reward: full.best_reward,
        ties: optimum.ties,
        seeds,
    };
    let path = dir.join("verdict.json");
    fs::write(&path, to_json(&verdict) + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(verdict)
}

pub fn cmd_transfer(args: &TransferArgs) -> Result<TransferCost, CliError> {
    let from = parse_elements(&args.from)?;
    let to = parse_elements(&args.to)?;
    HighThrust::default().cost(&from, &to).map_err(config_err)
}
