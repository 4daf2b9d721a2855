//! `opra` — high-confidence off-policy risk assessment for contextual
//! bandits.
//!
//! Subcommands: `assess` (one dataset, one policy, a risk report with
//! simultaneous confidence half-widths), `sweep` (Monte Carlo convergence
//! study on a built-in environment or a classification transform),
//! `make-bandit` (classification CSV → logged bandit dataset + policies),
//! and `fixtures` (list the built-in environments).

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use opra_cli::error::CliError;
use opra_cli::io;
use opra_cli::report::{report_json, report_table, RunManifest};
use opra_cli::riskspec::parse_risks;
use opra_cli::sweep::{run_sweep, sweep_csv, SweepConfig};
use opra_core::bound::BandMethod;
use opra_core::env::fixtures;
use opra_core::model::LogisticFitConfig;
use opra_core::transform::{classification_env, classification_to_bandit, train_softmax_classifier};
use opra_core::{
    run_opra, BehaviorSource, EstimatorKind, ModelConfig, OpraConfig, PolicySpec, WeightStats,
};

#[derive(Parser)]
#[command(
    name = "opra",
    version,
    about = "Off-policy risk assessment for contextual bandits: CDF estimation with finite-sample confidence bands and simultaneous Lipschitz-risk error bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assess a target policy on a logged dataset and write a risk report
    Assess(AssessArgs),
    /// Monte Carlo convergence sweep over sample sizes (and mixture levels)
    Sweep(SweepArgs),
    /// Transform a classification CSV into a logged bandit dataset
    MakeBandit(MakeBanditArgs),
    /// List the built-in environments
    Fixtures,
}

#[derive(Args)]
struct ModelArgs {
    /// Conditional reward-CDF model for dm / m-dr: tabular | logistic
    #[arg(long, default_value = "tabular")]
    model: String,
    /// Additive smoothing for the tabular model
    #[arg(long, default_value_t = 0.0)]
    smoothing: f64,
    /// Number of evenly spaced thresholds for the logistic model
    /// (default: 33 plus observed rewards)
    #[arg(long)]
    grid_points: Option<usize>,
    /// Gradient-descent epochs for logistic fits
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Gradient-descent learning rate
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    /// L2 penalty for logistic fits
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    /// Disable two-fold cross-fitting for model-based estimators
    #[arg(long)]
    no_crossfit: bool,
}

impl ModelArgs {
    fn to_config(&self) -> Result<ModelConfig, CliError> {
        match self.model.as_str() {
            "tabular" => Ok(ModelConfig::Tabular {
                smoothing: self.smoothing,
            }),
            "logistic" => Ok(ModelConfig::Logistic {
                grid_points: self.grid_points,
                fit: LogisticFitConfig {
                    learning_rate: self.learning_rate,
                    epochs: self.epochs,
                    l2: self.l2,
                },
            }),
            other => Err(CliError::config(format!(
                "unknown model {other:?} (expected tabular or logistic)"
            ))),
        }
    }
}

#[derive(Args)]
struct AssessArgs {
    /// Logged dataset CSV: f0..f{d-1},action,reward and optional propensity
    #[arg(long)]
    data: String,
    /// Target policy JSON
    #[arg(long)]
    target: String,
    /// Behavior policy JSON (optional when the dataset logs propensities)
    #[arg(long)]
    behavior: Option<String>,
    /// is-clip | wis | dm | m-dr (dr is an alias for m-dr)
    #[arg(long, default_value = "is-clip")]
    estimator: String,
    /// hoeffding | bernstein | dr | none (default matches the estimator)
    #[arg(long)]
    band: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Comma-separated risk list, e.g. mean,cvar:0.5,variance
    #[arg(long)]
    risks: String,
    /// Declared reward support bound D
    #[arg(long, default_value_t = 1.0)]
    reward_bound: f64,
    /// known | logged | estimated (default: known with --behavior, else logged)
    #[arg(long)]
    behavior_source: Option<String>,
    /// Bound on sup |beta - beta_hat| for the estimated-behavior path
    #[arg(long)]
    eps_beta: Option<f64>,
    /// Exact w_max when the environment is enumerable (else empirical plug-ins)
    #[arg(long)]
    w_max: Option<f64>,
    /// Exact w_2 = E_beta[w^2]
    #[arg(long)]
    w2: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    /// Output prefix: writes PREFIX.json and PREFIX.txt
    #[arg(long, default_value = "opra_report")]
    out: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// Built-in environment: e1 | e2
    #[arg(long, conflicts_with = "data")]
    env: Option<String>,
    /// Classification CSV to transform instead of a built-in environment
    #[arg(long)]
    data: Option<String>,
    /// Label column name in --data
    #[arg(long, default_value = "label")]
    label_col: String,
    /// Mixture level for the transform behavior policy (without --alpha-grid)
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Comma-separated sample sizes, strictly increasing
    #[arg(long)]
    ns: String,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Comma-separated estimators: is-clip, wis, dm, dr (= m-dr)
    #[arg(long, default_value = "is-clip,wis")]
    estimators: String,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Sweep the behavior mixture over these levels instead of a fixed one
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long, default_value = "mean,cvar:0.5,variance")]
    risks: String,
    #[command(flatten)]
    model: ModelArgs,
    /// Record wall-clock runtimes (makes the CSV run-dependent)
    #[arg(long)]
    timings: bool,
    /// Output prefix: writes PREFIX.csv and PREFIX.manifest.json
    #[arg(long, default_value = "opra_sweep")]
    out: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MakeBanditArgs {
    /// Classification CSV with a label column
    #[arg(long)]
    data: String,
    #[arg(long, default_value = "label")]
    label_col: String,
    /// Behavior mixture level: beta = alpha * pi + (1 - alpha) * uniform
    #[arg(long)]
    alpha: f64,
    /// Gradient-descent epochs for the target classifier
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    /// Output prefix: writes PREFIX_dataset.csv, PREFIX_target.json,
    /// PREFIX_behavior.json, PREFIX.manifest.json
    #[arg(long, default_value = "bandit")]
    out: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_list<T: core::str::FromStr>(arg: &str, what: &str) -> Result<Vec<T>, CliError> {
    arg.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| CliError::config(format!("cannot parse {what} entry {s:?}")))
        })
        .collect()
}

fn parse_estimator(name: &str) -> Result<EstimatorKind, CliError> {
    match name {
        "is-clip" => Ok(EstimatorKind::IsClip),
        "wis" => Ok(EstimatorKind::Wis),
        "dm" => Ok(EstimatorKind::Dm),
        // The raw DR estimate is not a valid CDF; "dr" means its
        // monotonized form everywhere a valid CDF is required.
        "dr" | "m-dr" => Ok(EstimatorKind::MDr),
        "is" => Err(CliError::config(
            "raw is exceeds 1 and is not a valid CDF; use is-clip",
        )),
        other => Err(CliError::config(format!(
            "unknown estimator {other:?} (expected is-clip, wis, dm, dr)"
        ))),
    }
}

fn parse_band(name: &str) -> Result<Option<BandMethod>, CliError> {
    match name {
        "hoeffding" => Ok(Some(BandMethod::IsHoeffding)),
        "bernstein" => Ok(Some(BandMethod::IsBernstein)),
        "dr" => Ok(Some(BandMethod::Dr)),
        "none" => Ok(None),
        other => Err(CliError::config(format!(
            "unknown band {other:?} (expected hoeffding, bernstein, dr, none)"
        ))),
    }
}

fn default_band(estimator: EstimatorKind) -> Option<BandMethod> {
    match estimator {
        EstimatorKind::IsClip => Some(BandMethod::IsHoeffding),
        EstimatorKind::MDr => Some(BandMethod::Dr),
        _ => None,
    }
}

fn cmd_assess(args: &AssessArgs) -> Result<(), CliError> {
    let target = io::read_policy(&args.target)?;
    let behavior = args.behavior.as_deref().map(io::read_policy).transpose()?;
    let data = io::read_dataset(&args.data, target.action_count(), args.reward_bound)?;

    let estimator = parse_estimator(&args.estimator)?;
    let band = match &args.band {
        Some(name) => parse_band(name)?,
        None => default_band(estimator),
    };
    let risks = parse_risks(&args.risks)?;
    let behavior_source = match args.behavior_source.as_deref() {
        Some("known") => BehaviorSource::KnownPolicy,
        Some("logged") => BehaviorSource::LoggedPropensities,
        Some("estimated") => BehaviorSource::EstimatedTabular {
            smoothing: args.model.smoothing,
            eps_beta: args.eps_beta.ok_or_else(|| {
                CliError::config("--behavior-source estimated requires --eps-beta")
            })?,
        },
        Some(other) => {
            return Err(CliError::config(format!(
                "unknown behavior source {other:?} (expected known, logged, estimated)"
            )))
        }
        None if behavior.is_some() => BehaviorSource::KnownPolicy,
        None => BehaviorSource::LoggedPropensities,
    };
    let weight_stats = match (args.w_max, args.w2) {
        (Some(w_max), Some(w_2)) => {
            Some(WeightStats::exact(w_max, w_2).map_err(|e| CliError::config(e.to_string()))?)
        }
        (None, None) => None,
        _ => {
            return Err(CliError::config(
                "--w-max and --w2 must be given together",
            ))
        }
    };
    let config = OpraConfig {
        estimator,
        band,
        delta: args.delta,
        risks,
        model: if estimator.needs_model() {
            Some(args.model.to_config()?)
        } else {
            None
        },
        crossfit: estimator.needs_model() && !args.model.no_crossfit,
        behavior_source,
        weight_stats,
    };

    let report = run_opra(&data, &target, behavior.as_ref(), &config)?;

    let mut manifest = RunManifest::new(
        "assess",
        Some(args.seed),
        json!({
            "data": args.data,
            "target": args.target,
            "behavior": args.behavior,
            "estimator": estimator.as_str(),
            "band": band.map(BandMethod::as_str),
            "delta": args.delta,
            "risks": args.risks,
            "reward_bound": args.reward_bound,
            "crossfit": config.crossfit,
        }),
    );
    manifest.record_input(&args.data)?;
    manifest.record_input(&args.target)?;
    if let Some(path) = &args.behavior {
        manifest.record_input(path)?;
    }
    let json_path = format!("{}.json", args.out);
    let txt_path = format!("{}.txt", args.out);
    manifest.record_artifact(&json_path);
    manifest.record_artifact(&txt_path);

    let mut json_text = serde_json::to_string_pretty(&report_json(&report, &manifest))
        .map_err(|e| CliError::config(e.to_string()))?;
    json_text.push('\n');
    std::fs::write(&json_path, json_text).map_err(|e| CliError::io(&json_path, e))?;

    let mut table = report_table(&report);
    table.push_str(&format!(
        "\n  manifest: assess v{} seed {} -> {}\n",
        manifest.version, args.seed, json_path
    ));
    std::fs::write(&txt_path, &table).map_err(|e| CliError::io(&txt_path, e))?;
    print!("{table}");
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let n_grid: Vec<usize> = parse_list(&args.ns, "--ns")?;
    let estimator_names: Vec<String> = parse_list(&args.estimators, "--estimators")?;
    let estimators = estimator_names
        .iter()
        .map(|s| parse_estimator(s))
        .collect::<Result<Vec<_>, _>>()?;
    let alpha_grid = args
        .alpha_grid
        .as_deref()
        .map(|s| parse_list::<f64>(s, "--alpha-grid"))
        .transpose()?;
    let risks = parse_risks(&args.risks)?;

    let mut manifest_inputs = Vec::new();
    let (env, target, behavior) = match (&args.env, &args.data) {
        (Some(name), None) => match name.as_str() {
            "e1" => fixtures::e1(),
            "e2" => fixtures::e2(),
            other => {
                return Err(CliError::config(format!(
                    "unknown fixture {other:?} (expected e1 or e2; see `opra fixtures`)"
                )))
            }
        },
        (None, Some(path)) => {
            let (features, labels) = io::read_classification(path, &args.label_col)?;
            manifest_inputs.push(path.clone());
            let env = classification_env(&features, &labels)
                .map_err(|e| CliError::config(e.to_string()))?;
            let classes = env.action_count();
            let target = train_softmax_classifier(
                &features,
                &labels,
                classes,
                LogisticFitConfig {
                    learning_rate: args.model.learning_rate,
                    epochs: args.model.epochs,
                    l2: args.model.l2,
                },
            )
            .map_err(|e| CliError::config(e.to_string()))?;
            let behavior = if args.alpha == 1.0 {
                target.clone()
            } else {
                PolicySpec::mixture(target.clone(), args.alpha)
                    .map_err(|e| CliError::config(e.to_string()))?
            };
            (env, target, behavior)
        }
        _ => {
            return Err(CliError::config(
                "exactly one of --env or --data must be given",
            ))
        }
    };

    let config = SweepConfig {
        n_grid,
        replications: args.reps,
        seed: args.seed,
        estimators,
        alpha_grid,
        delta: args.delta,
        risks,
        model: args.model.to_config()?,
        crossfit: !args.model.no_crossfit,
        timings: args.timings,
    };
    let result = run_sweep(&env, &target, &behavior, &config)?;
    let csv = sweep_csv(&result);

    let csv_path = format!("{}.csv", args.out);
    let manifest_path = format!("{}.manifest.json", args.out);
    std::fs::write(&csv_path, &csv).map_err(|e| CliError::io(&csv_path, e))?;

    let mut manifest = RunManifest::new(
        "sweep",
        Some(args.seed),
        json!({
            "env": args.env,
            "data": args.data,
            "ns": args.ns,
            "reps": args.reps,
            "estimators": args.estimators,
            "delta": args.delta,
            "alpha": args.alpha,
            "alpha_grid": args.alpha_grid,
            "risks": args.risks,
            "crossfit": !args.model.no_crossfit,
            "timings": args.timings,
        }),
    );
    for path in &manifest_inputs {
        manifest.record_input(path)?;
    }
    manifest.record_artifact(&csv_path);
    manifest.write(&manifest_path)?;
    eprintln!(
        "wrote {} rows to {csv_path} (manifest: {manifest_path})",
        result.rows.len()
    );
    Ok(())
}

fn cmd_make_bandit(args: &MakeBanditArgs) -> Result<(), CliError> {
    let (features, labels) = io::read_classification(&args.data, &args.label_col)?;
    let classifier = LogisticFitConfig {
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        l2: args.l2,
    };
    let (data, target, behavior) =
        classification_to_bandit(&features, &labels, args.alpha, args.seed, classifier)
            .map_err(|e| CliError::config(e.to_string()))?;

    let dataset_path = format!("{}_dataset.csv", args.out);
    let target_path = format!("{}_target.json", args.out);
    let behavior_path = format!("{}_behavior.json", args.out);
    let manifest_path = format!("{}.manifest.json", args.out);
    io::write_dataset(&dataset_path, &data)?;
    io::write_policy(&target_path, &target)?;
    io::write_policy(&behavior_path, &behavior)?;

    let mut manifest = RunManifest::new(
        "make-bandit",
        Some(args.seed),
        json!({
            "data": args.data,
            "label_col": args.label_col,
            "alpha": args.alpha,
            "epochs": args.epochs,
            "learning_rate": args.learning_rate,
            "l2": args.l2,
        }),
    );
    manifest.record_input(&args.data)?;
    manifest.record_artifact(&dataset_path);
    manifest.record_artifact(&target_path);
    manifest.record_artifact(&behavior_path);
    manifest.write(&manifest_path)?;
    eprintln!(
        "wrote {dataset_path} ({} rows, {} actions), {target_path}, {behavior_path}",
        data.len(),
        data.action_count()
    );
    Ok(())
}

fn cmd_fixtures() {
    for (name, (env, target, behavior)) in [("e1", fixtures::e1()), ("e2", fixtures::e2())] {
        let stats = env
            .weight_stats_exact(&target, &behavior)
            .expect("fixture policies satisfy absolute continuity");
        let truth = env.true_cdf(&target).expect("fixture CDF is valid");
        println!(
            "{name}: {} contexts, {} actions, reward bound {}, {} reward atoms",
            env.contexts().len(),
            env.action_count(),
            env.reward_bound(),
            env.all_atoms().len(),
        );
        println!(
            "    w_max {:.6}  w_2 {:.6}  target mean {:.6}",
            stats.w_max,
            stats.w_2,
            opra_core::risk::eval_mean(&truth),
        );
    }
}

fn main() {
    if let Ok(threads) = std::env::var("OPRA_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: OPRA_THREADS must be a positive integer, got {threads:?}");
                std::process::exit(2);
            }
        }
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Assess(args) => cmd_assess(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::MakeBandit(args) => cmd_make_bandit(args),
        Command::Fixtures => {
            cmd_fixtures();
            Ok(())
        }
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
