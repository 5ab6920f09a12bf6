use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;
use spam_core::data::metrics::{evaluate, Metric, MetricsReport};
use spam_core::data::split::{DatasetSplit, Partition};
use spam_core::model::SpamModel;
use spam_core::optim::train;
use spam_core::poly::{sorted_magnitudes, spectral_fit, SpectralFit, Term, DEFAULT_ORACLE_CAP};
use spam_core::recipe::{ExperimentConfig, ModelConfig};
use spam_core::search::{run_search, SearchSpace, TrialRecord, TrialStatus};
use spam_core::verify::{verify, VerifyConfig};
use spam_core::{Result, SpamError};

use crate::output::{csv_bytes, json_string, opt_f64, write_atomic, write_csv, write_json, write_jsonl};
use crate::{Cli, Command, EvalArgs, ExplainArgs, SearchArgs, SpectraArgs, TrainArgs, VerifyArgs};

pub const ORACLE_CAP_ENV: &str = "SPAM_ORACLE_CAP";

#[cfg(feature = "parallel")]
pub fn set_threads(n: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| SpamError::Config(format!("thread pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
pub fn set_threads(_n: usize) -> Result<()> {
    Ok(())
}

pub fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Train(a) => cmd_train(cli, a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Explain(a) => cmd_explain(cli, a),
        Command::Verify(a) => cmd_verify(cli, a),
        Command::Spectra(a) => cmd_spectra(cli, a),
        Command::Search(a) => cmd_search(cli, a),
    }
}

fn recipe(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| SpamError::Config("this command needs --config".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    print!("{}", json_string(value)?);
    Ok(())
}

fn metrics_report(
    data: &DatasetSplit,
    model: &SpamModel,
    split: Partition,
    seed: u64,
) -> Result<MetricsReport> {
    let (x, y) = data.part(split);
    let value = evaluate(data.task, &model.predict(x)?, y)?;
    Ok(MetricsReport {
        task: data.task,
        metric_name: Metric::for_task(data.task).name().to_string(),
        value,
        n_test: y.len(),
        seed,
        split: split.as_str().to_string(),
    })
}

fn check_compatible(model: &SpamModel, data: &DatasetSplit) -> Result<()> {
    if model.input_dim() != data.num_features() || model.flags.task != data.task {
        return Err(SpamError::Schema(format!(
            "model is a {} model over {} features; the data is {} with {} features",
            model.flags.task.as_str(),
            model.input_dim(),
            data.task.as_str(),
            data.num_features()
        )));
    }
    let outputs = data.task.num_outputs(data.num_classes);
    if model.num_outputs() != outputs {
        return Err(SpamError::Schema(format!(
            "model has {} outputs, the data needs {outputs}",
            model.num_outputs()
        )));
    }
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> Result<ExitCode> {
    let mut cfg = recipe(cli)?;
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    cfg.train.validate()?;
    let data = cfg.dataset()?;
    let model = cfg
        .model
        .build(data.num_features(), data.task, data.num_classes, cfg.train.seed)?;
    eprintln!(
        "training order-{} model: {} train / {} val / {} test rows, {} epochs",
        model.degree(),
        data.train.rows(),
        data.val.rows(),
        data.test.rows(),
        cfg.train.epochs
    );
    let outcome = train(model, &data, &cfg.train)?;
    eprintln!(
        "best validation {} = {} at epoch {}",
        Metric::for_task(data.task).name(),
        outcome.best_val,
        outcome.best_epoch
    );
    let report = metrics_report(&data, &outcome.model, Partition::Test, cfg.train.seed)?;
    let dir = out_dir(cli);
    write_atomic(&dir.join("model.json"), outcome.model.to_json()?.as_bytes())?;
    write_jsonl(&dir.join("history.jsonl"), &outcome.history)?;
    write_json(&dir.join("metrics.json"), &report)?;
    print_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(cli: &Cli, args: &EvalArgs) -> Result<ExitCode> {
    let split = Partition::parse(&args.split)?;
    let cfg = recipe(cli)?;
    let model = SpamModel::load(&args.model)?;
    let data = cfg.dataset()?;
    check_compatible(&model, &data)?;
    let report = metrics_report(&data, &model, split, cfg.train.seed)?;
    if let Some(dir) = &cli.out {
        write_json(&dir.join("metrics.json"), &report)?;
    }
    print_json(&report)?;
    Ok(ExitCode::SUCCESS)
}

fn parse_row(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .enumerate()
        .map(|(i, v)| {
            v.trim().parse::<f64>().map_err(|e| {
                SpamError::Config(format!("--row value {i} (`{}`): {e}", v.trim()))
            })
        })
        .collect()
}

/// Bias row, the `top` largest terms, then one residual row holding the sum
/// of everything not listed. The rows always add up to the logit.
pub fn explanation_rows(bias: f64, terms: &[Term], top: usize) -> Vec<Vec<String>> {
    let shown = top.min(terms.len());
    let mut rows = vec![vec!["bias".into(), String::new(), String::new(), bias.to_string()]];
    for t in &terms[..shown] {
        rows.push(vec![
            t.kind.as_str().to_string(),
            t.i.to_string(),
            t.j.map(|j| j.to_string()).unwrap_or_default(),
            t.contribution.to_string(),
        ]);
    }
    let residual: f64 = terms[shown..].iter().map(|t| t.contribution).sum();
    rows.push(vec!["residual".into(), String::new(), String::new(), residual.to_string()]);
    rows
}

fn cmd_explain(cli: &Cli, args: &ExplainArgs) -> Result<ExitCode> {
    let model = SpamModel::load(&args.model)?;
    let x = match (&args.row, args.index) {
        (Some(row), _) => parse_row(row)?,
        (None, Some(i)) => {
            let data = recipe(cli)?.dataset()?;
            check_compatible(&model, &data)?;
            let (m, _) = data.part(Partition::parse(&args.split)?);
            if i >= m.rows() {
                return Err(SpamError::Config(format!(
                    "--index {i} out of range for {} rows",
                    m.rows()
                )));
            }
            m.row(i).to_vec()
        }
        (None, None) => {
            return Err(SpamError::Config("explain needs --row or --index".into()));
        }
    };
    if x.len() != model.input_dim() {
        return Err(SpamError::Shape(format!(
            "row has {} values, model expects {}",
            x.len(),
            model.input_dim()
        )));
    }
    let expl = model.explain(&x, args.class)?;
    let rows = explanation_rows(expl.bias, &expl.terms, args.top.unwrap_or(usize::MAX));
    let header = ["kind", "i", "j", "contribution"];
    match &cli.out {
        Some(dir) => {
            write_csv(&dir.join("explanation.csv"), &header, &rows)?;
            #[derive(Serialize)]
            struct Summary {
                class_index: usize,
                logit: f64,
                rows: usize,
                terms_total: usize,
            }
            print_json(&Summary {
                class_index: expl.class_index,
                logit: expl.logit,
                rows: rows.len(),
                terms_total: expl.terms.len(),
            })?;
        }
        None => print!("{}", String::from_utf8_lossy(&csv_bytes(&header, &rows)?)),
    }
    Ok(ExitCode::SUCCESS)
}

fn oracle_cap() -> Result<u128> {
    match std::env::var(ORACLE_CAP_ENV) {
        Ok(v) => v.trim().parse().map_err(|e| {
            SpamError::Config(format!("{ORACLE_CAP_ENV}=`{v}` is not a cell count: {e}"))
        }),
        Err(_) => Ok(DEFAULT_ORACLE_CAP),
    }
}

fn cmd_verify(cli: &Cli, args: &VerifyArgs) -> Result<ExitCode> {
    let cfg = VerifyConfig {
        max_d: args.max_d,
        max_k: args.max_k,
        max_rank: args.max_rank,
        max_classes: args.max_classes,
        trials: args.trials,
        seed: cli.seed.unwrap_or(0),
        oracle_cap: oracle_cap()?,
        corrupt_contraction: args.corrupt,
    };
    let report = verify(&cfg)?;
    if let Some(dir) = &cli.out {
        write_json(&dir.join("verify.json"), &report)?;
    }
    #[derive(Serialize)]
    struct Summary {
        pass: bool,
        trials: usize,
        max_forward_dev: f64,
        max_grad_err: f64,
        forward_tolerance: f64,
        gradient_tolerance: f64,
    }
    print_json(&Summary {
        pass: report.pass,
        trials: report.trials,
        max_forward_dev: report.max_forward_dev,
        max_grad_err: report.max_grad_err,
        forward_tolerance: report.forward_tolerance,
        gradient_tolerance: report.gradient_tolerance,
    })?;
    if !report.pass {
        eprintln!("verification failed");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct OrderFit {
    order: usize,
    #[serde(flatten)]
    fit: SpectralFit,
}

fn cmd_spectra(cli: &Cli, args: &SpectraArgs) -> Result<ExitCode> {
    let model = SpamModel::load(&args.model)?;
    let params = &model.params;
    if params.degree() < 2 {
        return Err(SpamError::NoSpectrum(params.degree()));
    }
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for order in 2..=params.degree() {
        let spectra: Vec<Vec<f64>> = (0..params.num_classes)
            .map(|c| sorted_magnitudes(params.singular_row(order, c)))
            .collect();
        for (c, s) in spectra.iter().enumerate() {
            for (j, v) in s.iter().enumerate() {
                rows.push(vec![c.to_string(), order.to_string(), (j + 1).to_string(), v.to_string()]);
            }
        }
        fits.push(OrderFit {
            order,
            fit: spectral_fit(&spectra)?,
        });
    }
    let dir = out_dir(cli);
    write_csv(&dir.join("spectra.csv"), &["class", "order", "index", "magnitude"], &rows)?;
    write_json(&dir.join("spectral_fit.json"), &fits)?;
    print_json(&fits)?;
    Ok(ExitCode::SUCCESS)
}

fn trial_row(t: &TrialRecord) -> Vec<String> {
    let ranks: Vec<String> = t.sample.ranks.iter().map(|r| r.to_string()).collect();
    vec![
        t.trial.to_string(),
        match t.status {
            TrialStatus::Ok => "ok".into(),
            TrialStatus::Failed => "failed".into(),
        },
        t.sample.lr.to_string(),
        t.sample.weight_decay.to_string(),
        t.sample.lambda_dropout_p.to_string(),
        ranks.join("x"),
        t.sample.seed.to_string(),
        opt_f64(t.val_metric),
        opt_f64(t.test_metric),
        t.best_epoch.map(|e| e.to_string()).unwrap_or_default(),
        t.error.clone().unwrap_or_default(),
    ]
}

pub const TRIAL_COLUMNS: [&str; 11] = [
    "trial",
    "status",
    "lr",
    "weight_decay",
    "lambda_dropout_p",
    "ranks",
    "seed",
    "val_metric",
    "test_metric",
    "best_epoch",
    "error",
];

#[derive(Serialize)]
struct BestDoc<'a> {
    metric_name: &'a str,
    master_seed: u64,
    trials: usize,
    failed: usize,
    best: &'a TrialRecord,
    model: ModelConfig,
    train: spam_core::optim::TrainConfig,
}

fn load_space(path: Option<&Path>, degree: usize) -> Result<SearchSpace> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| SpamError::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| SpamError::Config(format!("{}: {e}", p.display())))
        }
        None => Ok(SearchSpace::for_degree(degree)),
    }
}

fn cmd_search(cli: &Cli, args: &SearchArgs) -> Result<ExitCode> {
    let mut cfg = recipe(cli)?;
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    let master_seed = cfg.train.seed;
    let degree = cfg.model.rank_spec()?.degree();
    let space = load_space(args.space.as_deref(), degree)?;
    let data = cfg.dataset()?;
    eprintln!(
        "searching {} trials of {} epochs on {} train rows",
        args.trials,
        cfg.train.epochs,
        data.train.rows()
    );
    let report = run_search(&space, &cfg.model, &cfg.train, &data, args.trials, master_seed)?;

    let dir = out_dir(cli);
    let rows: Vec<Vec<String>> = report.trials.iter().map(trial_row).collect();
    write_csv(&dir.join("trials.csv"), &TRIAL_COLUMNS, &rows)?;
    let timings: Vec<Vec<String>> = report
        .trials
        .iter()
        .map(|t| vec![t.trial.to_string(), format!("{:.3}", t.wall_time_s)])
        .collect();
    write_csv(&dir.join("timings.csv"), &["trial", "wall_time_s"], &timings)?;

    let best = report.best_trial()?;
    let (model_cfg, train_cfg) = best.sample.apply(&cfg.model, &cfg.train);
    let failed = report
        .trials
        .iter()
        .filter(|t| t.status == TrialStatus::Failed)
        .count();
    let doc = BestDoc {
        metric_name: report.metric.name(),
        master_seed,
        trials: report.trials.len(),
        failed,
        best,
        model: model_cfg,
        train: train_cfg,
    };
    write_json(&dir.join("best.json"), &doc)?;
    if let Some(model) = &report.best_model {
        write_atomic(&dir.join("model.json"), model.to_json()?.as_bytes())?;
        let metrics = metrics_report(&data, model, Partition::Test, master_seed)?;
        write_json(&dir.join("metrics.json"), &metrics)?;
    }
    eprintln!(
        "best trial {} ({} failed): val {} test {}",
        best.trial,
        failed,
        opt_f64(best.val_metric),
        opt_f64(best.test_metric)
    );
    print_json(&doc)?;
    Ok(ExitCode::SUCCESS)
}
