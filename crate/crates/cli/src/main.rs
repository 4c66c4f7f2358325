use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use conclusive_forest::audit::{audit, Verdict};
use conclusive_forest::dataset::Dataset;
use conclusive_forest::eval::{mean_std, sensitivity_sweep, write_sweep_csv, SweepConfig};
use conclusive_forest::explain::{
    explain, permutation_importance, render, ExplanationRule, Format, ImportanceOptions, PlotContext,
};
use conclusive_forest::explain::importance::{mean_absolute_error, weighted_f1};
use conclusive_forest::model::{read_model, serialize_model, ForestModel, Task};
use conclusive_forest::quorum::{default_allowed_error, ErrorBudget};
use conclusive_forest::reduce::{ArOptions, ClusterOptions, Method, Miner, ReductionOptions};
use conclusive_forest::trainer::{train_dataset, MaxFeatures, Targets, TrainConfig};
use conclusive_forest::Error;

/// Exit status for malformed invocations.
const EXIT_USAGE: u8 = 64;
const EXIT_VIOLATED: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(name = "conclusive-forest", version, about = "Conclusive single-rule explanations for random forests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a forest on a CSV file and write the model document.
    Train(TrainArgs),
    /// Explain one instance with a single rule.
    Explain(ExplainArgs),
    /// Check a rule against the model by exhaustive single-feature probing.
    Audit(AuditArgs),
    /// Run a grid of forests and reducer settings and write a CSV table.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    task: Task,
    #[arg(long, default_value = "target")]
    target: String,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    estimators: u64,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value = "sqrt")]
    max_features: MaxFeatures,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    min_samples_leaf: u64,
    #[arg(long)]
    no_bootstrap: bool,
    /// Share of rows held out for the reported score.
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    #[arg(long, env = "CONCLUSIVE_FOREST_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Instance {
    /// Dataset the instance (and histograms, importances) come from.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "target")]
    target: String,
    /// Zero-based row of --data.
    #[arg(long, conflicts_with = "values", requires = "data")]
    row: Option<usize>,
    /// Feature values in model column order, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    instance: Instance,
    /// Expected task; refused when the model differs.
    #[arg(long)]
    task: Option<Task>,
    /// Reduction method code (defaults to 123 for classification, 13 for regression).
    #[arg(long)]
    method: Option<String>,
    #[arg(long, default_value = "apriori")]
    miner: Miner,
    #[arg(long, default_value_t = 0.1)]
    min_support: f64,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long)]
    allowed_error: Option<f64>,
    #[arg(long, env = "CONCLUSIVE_FOREST_SEED", default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "text")]
    format: Format,
    #[arg(long)]
    no_reduction: bool,
    /// Print the reduction trace to stderr.
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    model: PathBuf,
    /// Rule document as written by `explain --format json`.
    #[arg(long)]
    rule: PathBuf,
    /// Instance; defaults to the one stored in the rule.
    #[command(flatten)]
    instance: Instance,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    task: Task,
    #[arg(long, default_value = "target")]
    target: String,
    /// Label written to the dataset column.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "10")]
    estimators: Vec<usize>,
    /// Depths; `none` grows full trees.
    #[arg(long, value_delimiter = ',', default_value = "5")]
    max_depth: Vec<String>,
    /// Method codes; defaults to every code valid for the task.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, default_value = "apriori")]
    miner: Miner,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    min_support: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "5")]
    k: Vec<usize>,
    /// Regression budgets as multiples of the held-out MAE.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    allowed_error_scale: Vec<f64>,
    #[arg(long, value_delimiter = ',', env = "CONCLUSIVE_FOREST_SEED", default_value = "42")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 10)]
    instances: usize,
    #[arg(long, default_value_t = 0.2)]
    holdout: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Explain(a) => cmd_explain(a),
        Command::Audit(a) => cmd_audit(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e
                .downcast_ref::<Error>()
                .is_some_and(|e| matches!(e, Error::InvalidConfig(_) | Error::InvalidMethod(_) | Error::MethodTaskMismatch { .. }));
            ExitCode::from(if usage { EXIT_USAGE } else { 1 })
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    let mut body = text.to_string();
    if !body.ends_with('\n') {
        body.push('\n');
    }
    match out {
        Some(p) => write_atomic(p, body.as_bytes()),
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}

fn read_data(path: &Path, target: &str) -> Result<Dataset> {
    Dataset::read_csv(path, Some(target)).with_context(|| format!("reading {}", path.display()))
}

fn cmd_train(a: TrainArgs) -> Result<ExitCode> {
    let data = read_data(&a.data, &a.target)?;
    if data.targets.is_none() {
        bail!("{} has no target column {:?}", a.data.display(), a.target);
    }
    let config = TrainConfig {
        n_estimators: a.estimators as usize,
        max_depth: a.max_depth,
        max_features: a.max_features,
        min_samples_leaf: a.min_samples_leaf as usize,
        bootstrap: !a.no_bootstrap,
        seed: a.seed,
    };
    config.validate()?;
    let (train, held) = data.split(a.holdout, a.seed);
    let model = train_dataset(&train, a.task, &config)?;
    write_atomic(&a.out, &serialize_model(&model)?)?;
    if held.is_empty() {
        eprintln!("trained {} trees; no held-out rows to score", model.n_trees());
        return Ok(ExitCode::SUCCESS);
    }
    let rows = held.project(model.features())?;
    if a.task == Task::Regression {
        let y = held.numeric_targets()?;
        let pred: Vec<f64> = rows.iter().map(|r| model.predict_unchecked(r).value().unwrap_or(f64::NAN)).collect();
        println!("held-out MAE: {:.6} ({} rows)", mean_absolute_error(&y, &pred), rows.len());
    } else {
        let y = held.class_targets(model.classes())?;
        let pred: Vec<usize> = rows.iter().map(|r| model.predict_unchecked(r).class().unwrap_or(0)).collect();
        println!("held-out weighted F1: {:.6} ({} rows)", weighted_f1(&y, &pred, model.n_classes()), rows.len());
    }
    Ok(ExitCode::SUCCESS)
}

/// The instance to explain plus the dataset rows (model column order) when given.
fn resolve_instance(model: &ForestModel, inst: &Instance) -> Result<(Option<Vec<f64>>, Option<(Dataset, Vec<Vec<f64>>)>)> {
    let data = match &inst.data {
        Some(p) => {
            let d = read_data(p, &inst.target)?;
            let rows = d.project(model.features())?;
            Some((d, rows))
        }
        None => None,
    };
    let x = match (&inst.values, inst.row) {
        (Some(v), _) => Some(v.clone()),
        (None, Some(r)) => {
            let (_, rows) = data.as_ref().expect("--row requires --data");
            Some(rows.get(r).cloned().with_context(|| format!("row {r} is out of range ({} rows)", rows.len()))?)
        }
        (None, None) => None,
    };
    if let Some(x) = &x {
        model.check_instance(x)?;
    }
    Ok((x, data))
}

fn importances(model: &ForestModel, data: Option<&(Dataset, Vec<Vec<f64>>)>, seed: u64) -> Result<Vec<f64>> {
    let Some((d, rows)) = data else {
        return Ok(vec![0.0; model.n_features()]);
    };
    let options = ImportanceOptions { seed, ..ImportanceOptions::default() };
    // Without targets, importance is measured against the model's own output.
    let imp = if model.task() == Task::Regression {
        let y = match d.targets {
            Some(_) => d.numeric_targets()?,
            None => rows.iter().map(|r| model.predict_unchecked(r).value().unwrap_or(0.0)).collect(),
        };
        permutation_importance(model, rows, Targets::Values(&y), &options)?
    } else {
        let y = match d.targets {
            Some(_) => d.class_targets(model.classes())?,
            None => rows.iter().map(|r| model.predict_unchecked(r).class().unwrap_or(0)).collect(),
        };
        permutation_importance(model, rows, Targets::Classes { y: &y, n_classes: model.n_classes() }, &options)?
    };
    Ok(imp)
}

fn cmd_explain(a: ExplainArgs) -> Result<ExitCode> {
    let model = read_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    if let Some(task) = a.task {
        if task != model.task() {
            return Err(Error::WrongTask { expected: task.to_string(), got: model.task().to_string() }.into());
        }
    }
    let (x, data) = resolve_instance(&model, &a.instance)?;
    let Some(x) = x else {
        return Err(Error::InvalidConfig("explain needs --row with --data, or --values".into()).into());
    };
    let method: Method = if a.no_reduction {
        Method::NoReduction
    } else {
        match &a.method {
            Some(code) => code.parse()?,
            None if model.task() == Task::Regression => "13".parse()?,
            None => "123".parse()?,
        }
    };
    let budget = match (model.task(), a.allowed_error) {
        (Task::Regression, Some(v)) => Some(ErrorBudget::user(v)?),
        (Task::Regression, None) => match &data {
            Some((d, rows)) if d.targets.is_some() => Some(default_allowed_error(&model, rows, &d.numeric_targets()?)?),
            _ => {
                return Err(Error::InvalidConfig(
                    "regression needs --allowed-error, or --data with a target column for the MAE default".into(),
                )
                .into())
            }
        },
        (_, Some(_)) => return Err(Error::InvalidConfig("--allowed-error applies to regression models only".into()).into()),
        _ => None,
    };
    let options = ReductionOptions {
        ar: ArOptions { miner: a.miner, min_support: a.min_support, ..ArOptions::default() },
        cluster: ClusterOptions { k: a.k },
        seed: a.seed,
    };
    let imp = importances(&model, data.as_ref(), a.seed)?;
    let mut e = explain(&model, &x, &imp, &method, &options, budget)?;
    e.rule.id = a.id.clone();
    if a.trace {
        if let Some(t) = &e.rule.trace {
            eprintln!("trace: {} | {} of {} paths", t.steps.join(" -> "), t.retained_paths, t.total_paths);
        }
    }
    let text = if a.format == Format::PlotData {
        let baseline = explain(&model, &x, &imp, &Method::NoReduction, &options, budget)?;
        let ctx = PlotContext { baseline: Some(&baseline.rule), rows: data.as_ref().map(|(_, r)| r.as_slice()) };
        render(&e.rule, &model, a.format, ctx)?
    } else {
        render(&e.rule, &model, a.format, PlotContext::default())?
    };
    emit(a.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_audit(a: AuditArgs) -> Result<ExitCode> {
    let model = read_model(&a.model).with_context(|| format!("loading {}", a.model.display()))?;
    let bytes = std::fs::read(&a.rule).with_context(|| format!("reading {}", a.rule.display()))?;
    let rule: ExplanationRule = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", a.rule.display()))?;
    let (x, _) = resolve_instance(&model, &a.instance)?;
    let x = x
        .or_else(|| rule.instance.clone())
        .ok_or_else(|| Error::InvalidConfig("no instance: pass --row/--values or store it in the rule".into()))?;
    let report = match audit(&model, &x, &rule) {
        Ok(r) => r,
        Err(e @ Error::ConsequentMismatch { .. }) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(EXIT_MISMATCH));
        }
        Err(e) => return Err(e.into()),
    };
    emit(a.out.as_deref(), &serde_json::to_string_pretty(&report)?)?;
    match report.verdict {
        Verdict::Conclusive => {
            eprintln!("conclusive: {} probes, no prediction change", report.probes_evaluated);
            Ok(ExitCode::SUCCESS)
        }
        Verdict::Violated => {
            let first = &report.violations[0];
            eprintln!(
                "violated: {} of {} probes change the prediction, e.g. {} = {} gives {}",
                report.violations.len(),
                report.probes_evaluated,
                first.feature,
                serde_json::to_string(&first.value)?,
                first.new_prediction
            );
            Ok(ExitCode::from(EXIT_VIOLATED))
        }
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode> {
    let data = read_data(&a.data, &a.target)?;
    let max_depth = a
        .max_depth
        .iter()
        .map(|d| match d.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(None),
            v => v.parse::<usize>().map(Some).map_err(|_| Error::InvalidConfig(format!("bad depth {d:?}"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if a.estimators.contains(&0) {
        return Err(Error::InvalidConfig("--estimators values must be at least 1".into()).into());
    }
    let methods = match &a.methods {
        Some(codes) => codes.iter().map(|c| c.parse()).collect::<Result<Vec<Method>, _>>()?,
        None => Method::all_for(a.task),
    };
    let name = a.name.clone().unwrap_or_else(|| {
        a.data.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    });
    let config = SweepConfig {
        dataset: name,
        task: a.task,
        n_estimators: a.estimators.clone(),
        max_depth,
        methods,
        miner: a.miner,
        min_support: a.min_support.clone(),
        k: a.k.clone(),
        allowed_error_scale: a.allowed_error_scale.clone(),
        seeds: a.seeds.clone(),
        instances: a.instances,
        holdout: a.holdout,
    };
    let rows = sensitivity_sweep(&data, &config)?;
    let mut csv = Vec::new();
    write_sweep_csv(&rows, &mut csv)?;
    match &a.out {
        Some(p) => write_atomic(p, &csv)?,
        None => std::io::stdout().write_all(&csv)?,
    }
    let (pr, _) = mean_std(&rows.iter().map(|r| r.pr_mean).collect::<Vec<_>>());
    eprintln!("{} rows, mean PR {:.4}", rows.len(), pr);
    Ok(ExitCode::SUCCESS)
}
