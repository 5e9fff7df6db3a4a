//! The experiment commands behind the `divnet` binary.
//!
//! Every command writes its data to files under an output directory,
//! together with the resolved config (`config.toml`) it ran with.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use divnet_core::autodiff::{grad_check, GradCheckReport};
use divnet_core::data::generate_split;
use divnet_core::eval::{degeneracy_report, oracle_curve, oracle_curve_exhaustive, prediction_variance};
use divnet_core::train::{batch_loss, label_sets, predict_all, run};
use divnet_core::{ControlSet, Dataset, Method, Model, OracleCurve, Tensor, TrainReport, Trained};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::format::{load_dataset, load_model, save_dataset, save_model};
use crate::report::{diagnostics_csv, oracle_csv, train_report_csv, ABLATION_HEADER, SWEEP_HEADER};

pub const TRAIN_FILE: &str = "train.data";
pub const TEST_FILE: &str = "test.data";
pub const MODEL_FILE: &str = "model.bin";
pub const CONFIG_FILE: &str = "config.toml";
pub const TRAIN_REPORT_FILE: &str = "train_report.csv";
pub const ORACLE_FILE: &str = "oracle_curve.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const SWEEP_FILE: &str = "sweep_summary.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const GRAD_CHECK_FILE: &str = "grad_check.csv";

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::usage(format!("{}: {e}", path.display()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_config(cfg: &ExperimentConfig, dir: &Path) -> Result<(), CliError> {
    write(&dir.join(CONFIG_FILE), cfg.to_toml())
}

/// Generates the train and test splits described by `cfg.data`.
pub fn generate(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset), CliError> {
    let g = cfg.data.generator()?;
    Ok(generate_split(&g, cfg.data.n_train, cfg.data.n_test, cfg.data.seed)?)
}

pub fn cmd_gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<(Dataset, Dataset), CliError> {
    cfg.validate()?;
    let (train, test) = generate(cfg)?;
    ensure_dir(out)?;
    save_dataset(&train, &out.join(TRAIN_FILE))?;
    save_dataset(&test, &out.join(TEST_FILE))?;
    write_config(cfg, out)?;
    Ok((train, test))
}

/// Resolves a dataset argument: a file, or a directory holding `default`.
pub fn dataset_at(path: &Path, default: &str) -> Result<Dataset, CliError> {
    let file = if path.is_dir() { path.join(default) } else { path.to_path_buf() };
    load_dataset(&file).map_err(|e| CliError::usage(format!("{}: {e}", file.display())))
}

pub struct TrainOutcome {
    pub trained: Trained,
    pub report: TrainReport,
}

/// Trains on `train` and writes the model, the report and the config.
pub fn train_on(cfg: &ExperimentConfig, train: &Dataset, out: &Path) -> Result<TrainOutcome, CliError> {
    let tc = cfg.train_config()?;
    let mc = cfg.model_config(train.input_dim(), train.output_dim())?;
    ensure_dir(out)?;
    write_config(cfg, out)?;
    let start = Instant::now();
    let (trained, mut report) = run(&mc, train, &tc)?;
    report.wall_time_secs = start.elapsed().as_secs_f64();
    save_model(&trained, &out.join(MODEL_FILE))?;
    write(&out.join(TRAIN_REPORT_FILE), train_report_csv(&report))?;
    Ok(TrainOutcome { trained, report })
}

pub fn cmd_train(cfg: &ExperimentConfig, data: Option<&Path>, out: &Path) -> Result<TrainOutcome, CliError> {
    cfg.validate()?;
    let train = match data {
        Some(p) => dataset_at(p, TRAIN_FILE)?,
        None => generate(cfg)?.0,
    };
    train_on(cfg, &train, out)
}

/// Headline numbers of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub curve: OracleCurve,
    pub variance: Option<f64>,
    pub degenerate: usize,
}

impl EvalSummary {
    pub fn k1(&self) -> (f64, f64) {
        let p = &self.curve.points[0];
        (p.mean_error, p.stderr)
    }

    pub fn kmax(&self) -> (usize, f64) {
        let p = self.curve.points.last().expect("non-empty curve");
        (p.k, p.mean_error)
    }
}

/// Prediction slots for evaluating `trained` under `cfg`.
pub fn eval_controls(cfg: &ExperimentConfig, trained: &Trained) -> Result<ControlSet, CliError> {
    let tc = cfg.train_config()?;
    Ok(match trained {
        Trained::Single(m) => {
            let controls = tc.eval_controls();
            if controls.kind() != m.config().control_kind {
                return Err(CliError::usage("config control mode does not match the model"));
            }
            controls
        }
        Trained::Treenet(t) => ControlSet::Discrete(t.n_members()),
        Trained::Bagged(e) => ControlSet::Discrete(e.members.len()),
    })
}

pub fn evaluate(cfg: &ExperimentConfig, trained: &Trained, ds: &Dataset, k_max: Option<usize>, out: &Path) -> Result<EvalSummary, CliError> {
    let controls = eval_controls(cfg, trained)?;
    let preds = predict_all(trained, &controls, ds)?;
    let gts = label_sets(ds);
    let m = preds.slots();
    let k_max = k_max.filter(|&k| k > 0).unwrap_or(if cfg.eval.k_max == 0 { m } else { cfg.eval.k_max });
    if k_max > m {
        return Err(CliError::usage(format!("k_max {k_max} exceeds the {m} available predictions")));
    }
    let method = cfg.train.method.as_str();
    let mut curve = if cfg.eval.exhaustive {
        oracle_curve_exhaustive(&preds, &gts, k_max, &format!("{method}:exhaustive"))?
    } else {
        oracle_curve(
            &preds,
            &gts,
            k_max,
            cfg.eval.seed,
            cfg.eval.n_resamples,
            &format!("{method}:without-replacement"),
        )?
    };
    curve.seed = cfg.eval.seed;
    let variance = if m >= 2 { Some(prediction_variance(&preds)?) } else { None };
    let tau = (cfg.eval.tau > 0.0).then_some(cfg.eval.tau);
    let degeneracy = degeneracy_report(&preds, &gts, tau)?;
    ensure_dir(out)?;
    write(&out.join(ORACLE_FILE), oracle_csv(&curve))?;
    write(&out.join(DIAGNOSTICS_FILE), diagnostics_csv(variance, &degeneracy))?;
    Ok(EvalSummary {
        curve,
        variance,
        degenerate: degeneracy.count,
    })
}

/// Evaluates a saved model. Without an explicit config, the `config.toml`
/// next to the model file is used.
pub fn cmd_eval(
    cfg: Option<&ExperimentConfig>,
    model_path: &Path,
    data: &Path,
    k_max: Option<usize>,
    out: &Path,
) -> Result<EvalSummary, CliError> {
    let trained = load_model(model_path).map_err(|e| CliError::usage(format!("{}: {e}", model_path.display())))?;
    let cfg = match cfg {
        Some(c) => c.clone(),
        None => {
            let beside = model_path.parent().unwrap_or(Path::new(".")).join(CONFIG_FILE);
            if beside.exists() {
                ExperimentConfig::load(&beside)?
            } else {
                ExperimentConfig::default()
            }
        }
    };
    let ds = dataset_at(data, TEST_FILE)?;
    let (din, dout) = match &trained {
        Trained::Single(m) => (m.config().input_dim, m.config().output_dim),
        Trained::Treenet(t) => (t.config().input_dim, t.config().output_dim),
        Trained::Bagged(e) => e
            .members
            .first()
            .map_or((0, 0), |m| (m.config().input_dim, m.config().output_dim)),
    };
    if ds.input_dim() != din || ds.output_dim() != dout {
        return Err(CliError::usage(format!(
            "model maps {din} -> {dout}, dataset has {} -> {}",
            ds.input_dim(),
            ds.output_dim()
        )));
    }
    evaluate(&cfg, &trained, &ds, k_max, out)
}

/// Runs `tasks` on up to `jobs` worker threads; results keep task order.
pub fn run_parallel<T: Send>(jobs: usize, tasks: Vec<Box<dyn FnOnce() -> T + Send + '_>>) -> Vec<T> {
    let n = tasks.len();
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let queue: Vec<Mutex<Option<Box<dyn FnOnce() -> T + Send + '_>>>> =
        tasks.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let task = queue[i].lock().expect("queue lock").take().expect("task taken once");
                let r = task();
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("task ran"))
        .collect()
}

/// One train + evaluate run in its own directory.
pub fn train_and_eval(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset, dir: &Path) -> Result<EvalSummary, CliError> {
    let outcome = train_on(cfg, train, dir)?;
    evaluate(cfg, &outcome.trained, test, None, dir)
}

fn finish_grid<T>(results: Vec<Result<T, CliError>>, what: &str) -> Result<Vec<T>, CliError> {
    let failed: Vec<(usize, &CliError)> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().err().map(|e| (i, e)))
        .collect();
    if let Some(&(_, first)) = failed.first() {
        for (i, e) in &failed {
            eprintln!("warning: {what} sub-run {i} failed: {e}");
        }
        eprintln!(
            "warning: partial results, {} of {} sub-runs failed",
            failed.len(),
            results.len()
        );
        return Err(first.clone().context(&format!("{what} incomplete")));
    }
    Ok(results.into_iter().map(|r| r.expect("checked")).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub summary: EvalSummary,
}

pub fn cmd_sweep_beta(cfg: &ExperimentConfig, betas: &[f64], out: &Path, jobs: usize) -> Result<Vec<SweepRow>, CliError> {
    cfg.validate()?;
    if betas.is_empty() {
        return Err(CliError::usage("the beta list is empty"));
    }
    if let Some(b) = betas.iter().find(|b| !(**b >= 0.0)) {
        return Err(CliError::usage(format!("beta values must be non-negative, got {b}")));
    }
    let (train, test) = generate(cfg)?;
    ensure_dir(out)?;
    write_config(cfg, out)?;
    let (train, test) = (&train, &test);
    let tasks: Vec<Box<dyn FnOnce() -> Result<SweepRow, CliError> + Send + '_>> = betas
        .iter()
        .enumerate()
        .map(|(i, &beta)| {
            let mut c = cfg.clone();
            c.train.beta = beta;
            let dir = out.join(format!("beta_{i}"));
            Box::new(move || {
                let summary = train_and_eval(&c, train, test, &dir)?;
                Ok(SweepRow { beta, summary })
            }) as Box<dyn FnOnce() -> _ + Send>
        })
        .collect();
    let results = run_parallel(jobs, tasks);
    let mut csv = format!("{SWEEP_HEADER}\n");
    for r in results.iter().flatten() {
        let (k1, se) = r.summary.k1();
        let (km, kme) = r.summary.kmax();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.beta,
            k1,
            se,
            km,
            kme,
            r.summary.variance.map_or(String::new(), |v| v.to_string()),
            r.summary.degenerate
        ));
    }
    write(&out.join(SWEEP_FILE), csv)?;
    finish_grid(results, "sweep-beta")
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub method: Method,
    pub catchup: bool,
    pub pretrain: bool,
    pub beta: f64,
    pub pretrain_epochs: usize,
}

/// The eight cells {diversenet, treenet} × catchup × pretraining. Catchup
/// uses the config's `beta` (1 when it is 0); pretraining uses the config's
/// `pretrain_epochs` (a fifth of the epochs when it is 0).
pub fn ablation_cells(cfg: &ExperimentConfig) -> Vec<AblationCell> {
    let beta_on = if cfg.train.beta > 0.0 { cfg.train.beta } else { 1.0 };
    let pre_on = if cfg.train.pretrain_epochs > 0 {
        cfg.train.pretrain_epochs
    } else {
        cfg.train.epochs / 5
    };
    let mut cells = Vec::with_capacity(8);
    for method in [Method::DiverseNet, Method::Treenet] {
        for catchup in [true, false] {
            for pretrain in [true, false] {
                cells.push(AblationCell {
                    method,
                    catchup,
                    pretrain,
                    beta: if catchup { beta_on } else { 0.0 },
                    pretrain_epochs: if pretrain { pre_on } else { 0 },
                });
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub cell: AblationCell,
    pub summary: EvalSummary,
}

pub fn cmd_ablate(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<Vec<AblationRow>, CliError> {
    cfg.validate()?;
    let (train, test) = generate(cfg)?;
    ensure_dir(out)?;
    write_config(cfg, out)?;
    let (train, test) = (&train, &test);
    let tasks: Vec<Box<dyn FnOnce() -> Result<AblationRow, CliError> + Send + '_>> = ablation_cells(cfg)
        .into_iter()
        .map(|cell| {
            let mut c = cfg.clone();
            c.train.method = cell.method.name().into();
            c.train.beta = cell.beta;
            c.train.pretrain_epochs = cell.pretrain_epochs;
            let dir = out.join(format!(
                "{}_catchup-{}_pretrain-{}",
                cell.method.name(),
                on_off(cell.catchup),
                on_off(cell.pretrain)
            ));
            Box::new(move || {
                let summary = train_and_eval(&c, train, test, &dir)?;
                Ok(AblationRow { cell, summary })
            }) as Box<dyn FnOnce() -> _ + Send>
        })
        .collect();
    let results = run_parallel(jobs, tasks);
    let mut csv = format!("{ABLATION_HEADER}\n");
    for r in results.iter().flatten() {
        let (k1, se) = r.summary.k1();
        let (km, kme) = r.summary.kmax();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.cell.method.name(),
            on_off(r.cell.catchup),
            on_off(r.cell.pretrain),
            r.cell.beta,
            r.cell.pretrain_epochs,
            k1,
            se,
            km,
            kme,
            r.summary.variance.map_or(String::new(), |v| v.to_string()),
            r.summary.degenerate
        ));
    }
    write(&out.join(ABLATION_FILE), csv)?;
    finish_grid(results, "ablate")
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

/// Finite-difference check of the training objective on a probe batch of
/// up to four training items.
pub fn cmd_grad_check(cfg: &ExperimentConfig, out: &Path) -> Result<GradCheckReport, CliError> {
    cfg.validate()?;
    let mut tc = cfg.train_config()?;
    if tc.control_kind() != divnet_core::ControlKind::Discrete || tc.method.is_treenet() || tc.method == Method::Bagged {
        tc.method = Method::DiverseNet;
        tc.control_mode = divnet_core::train::ControlMode::Discrete;
    }
    let (train, _) = generate(cfg)?;
    let mut mc = cfg.model_config(train.input_dim(), train.output_dim())?;
    mc.control_dim = tc.control_dim();
    mc.control_kind = tc.control_kind();
    let model = Model::init(mc)?;
    let batch: Vec<usize> = (0..train.len().min(4)).collect();
    let params: Vec<Tensor> = model.parameters().iter().map(|p| p.value.clone()).collect();
    let report = grad_check(
        |g, ids| batch_loss(g, &model, ids, &train, &batch, &tc),
        &params,
        1e-6,
        1e-4,
    )?;
    ensure_dir(out)?;
    write_config(cfg, out)?;
    let mut csv = String::from("tensor,max_rel_error,tolerance,passed\n");
    for (p, e) in model.parameters().iter().zip(&report.max_rel_error) {
        csv.push_str(&format!("{},{},{},{}\n", p.name, e, report.tolerance, e < &report.tolerance));
    }
    write(&out.join(GRAD_CHECK_FILE), csv)?;
    if !report.passed() {
        return Err(CliError::numerical(format!(
            "gradient check failed: worst relative error {} (tolerance {})",
            report.worst(),
            report.tolerance
        )));
    }
    Ok(report)
}
