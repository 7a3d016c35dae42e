//! Sweep protocols behind the `imbalance-lab` command line tool.
//!
//! Every command writes a long-format `results.csv` with columns
//! `method,param,seed,metric,value,analytic_value` sorted by
//! (method, param, seed, metric), then renders SVG plots from that file.

pub mod config;
pub mod svg;

use crate::analytic::{analytic_error_report, reduced_optimum, McOptions, Method, Mode};
use crate::error::{invalid, Error, Result};
use crate::evaluation::{evaluate_scores, ErrorReport};
use crate::gd::{direction_cosine, gd_train, LossSpec};
use crate::kernel_lab;
use crate::margin::{kernel_decision_scores, solve_kernel, solve_primal, MarginProblem};
use crate::model::{decision_scores, kernel_matrix, sample_test, sample_train, ProblemInstance, Rho};
use crate::rng::derive_seed;
use crate::sampler::sample_gram;
use crate::tuners::{self, method_coefficients, Schedule};
use config::{Config, Grid, ProfileOrSizes, SamplerKind, Trainer, Tuning};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use std::path::{Path, PathBuf};

pub use config::MethodSpec;

/// One line of `results.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub method: String,
    pub param: f64,
    pub seed: u64,
    pub metric: String,
    pub value: Option<f64>,
    pub analytic: Option<f64>,
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.param.total_cmp(&b.param))
            .then(a.seed.cmp(&b.seed))
            .then(a.metric.cmp(&b.metric))
    });
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

pub fn write_results_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["method", "param", "seed", "metric", "value", "analytic_value"])?;
    for r in rows {
        w.write_record([r.method.clone(), format!("{}", r.param), r.seed.to_string(), r.metric.clone(), opt(r.value), opt(r.analytic)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let bad = |msg: &str| Error::Parse { line: i + 2, msg: msg.to_string() };
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() { Ok(None) } else { s.parse().map(Some).map_err(|_| bad("bad number")) }
        };
        if rec.len() != 6 {
            return Err(bad("expected 6 columns"));
        }
        rows.push(ResultRow {
            method: rec[0].to_string(),
            param: rec[1].parse().map_err(|_| bad("bad param"))?,
            seed: rec[2].parse().map_err(|_| bad("bad seed"))?,
            metric: rec[3].to_string(),
            value: num(&rec[4])?,
            analytic: num(&rec[5])?,
        });
    }
    Ok(rows)
}

/// Writes results.csv plus one SVG per metric, each plotted from the CSV on disk.
fn emit(rows: &mut [ResultRow], out: &Path, plots: &[(&str, &str)], x_label: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(out)?;
    sort_rows(rows);
    let csv_path = out.join("results.csv");
    write_results_csv(rows, &csv_path)?;
    let back = read_results_csv(&csv_path)?;
    for (metric, title) in plots {
        std::fs::write(out.join(format!("{metric}.svg")), svg::plot(&back, metric, x_label, title))?;
    }
    Ok(csv_path)
}

/// A method at one hyperparameter value and bias weight.
#[derive(Clone, Debug)]
pub struct Job {
    pub label: String,
    /// Value written to the param column.
    pub param: f64,
    pub method: Method,
    pub schedule: Schedule,
    pub rho: Rho,
}

#[derive(Clone, Debug)]
struct Outcome {
    report: ErrorReport,
    training_error: f64,
}

type SolveKey = (u8, u64, Vec<u64>);

fn key(method: Method, rho: Rho, values: &[f64]) -> SolveKey {
    let r = match rho {
        Rho::Infinite => u64::MAX,
        Rho::Finite(v) => v.to_bits(),
    };
    (method as u8, r, values.iter().map(|v| v.to_bits()).collect())
}

/// Kernel-form fit of one job; LA reuses the MM solution with b − ι.
fn fit_kernel(
    k: &DMatrix<f64>,
    labels: &[usize],
    inst: &ProblemInstance,
    job: &Job,
    cache: &mut HashMap<SolveKey, (DMatrix<f64>, DVector<f64>)>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let c = inst.c;
    let values = job.schedule.values(inst, job.rho);
    let (base_method, base_values) = match job.method {
        Method::La | Method::Mm => (Method::Mm, vec![1.0; c]),
        m => (m, values.clone()),
    };
    let kk = key(base_method, job.rho, &base_values);
    if !cache.contains_key(&kk) {
        let problem = match base_method {
            Method::Mm => MarginProblem::max_margin(c, job.rho),
            Method::Ma => MarginProblem::margin_adjust(base_values.clone(), job.rho),
            Method::Cdt => MarginProblem::class_dep_temp(base_values.clone(), job.rho),
            Method::La => unreachable!(),
        };
        let sol = solve_kernel(k, labels, &problem)?;
        cache.insert(kk.clone(), (sol.beta, sol.b));
    }
    let (beta, mut b) = cache[&kk].clone();
    if job.method == Method::La {
        for (bi, iota) in b.iter_mut().zip(&values) {
            *bi -= iota;
        }
    }
    Ok((beta, b))
}

fn loss_for(job: &Job, inst: &ProblemInstance) -> LossSpec {
    let values = job.schedule.values(inst, job.rho);
    match job.method {
        Method::Mm => LossSpec::ce(job.rho),
        Method::Ma => LossSpec::ma(values, job.rho),
        Method::Cdt => LossSpec::cdt(values, job.rho),
        Method::La => LossSpec::la(values, job.rho),
    }
}

/// Trains and evaluates every job on one seed's training draw.
fn empirical_for_seed(cfg: &Config, inst: &ProblemInstance, jobs: &[Job]) -> Result<Vec<Outcome>> {
    let test_seed = derive_seed(inst.seed, 0x7E57);
    let per_class = cfg.test_per_class;
    let c = inst.c;
    let use_gram = cfg.trainer == Trainer::Margin && cfg.sampler == SamplerKind::Gram && inst.d >= inst.total() + c;
    if use_gram {
        let gs = sample_gram(inst)?;
        let k = gs.kernel();
        let mut cache = HashMap::new();
        let fits = jobs.iter().map(|j| fit_kernel(&k, &gs.labels, inst, j, &mut cache)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<(&DMatrix<f64>, &DVector<f64>)> = fits.iter().map(|(b, bb)| (b, bb)).collect();
        let (scores, labels) = gs.test_scores(&refs, per_class, test_seed)?;
        return fits
            .iter()
            .zip(scores)
            .map(|((beta, b), s)| {
                let train = evaluate_scores(&kernel_decision_scores(beta, b, &k), &gs.labels, c)?;
                Ok(Outcome { report: evaluate_scores(&s, &labels, c)?, training_error: train.overall_error() })
            })
            .collect();
    }
    let ds = sample_train(inst);
    let test = sample_test(inst, per_class, test_seed)?;
    let mut out = Vec::with_capacity(jobs.len());
    match cfg.trainer {
        Trainer::Margin => {
            let k = kernel_matrix(&ds);
            let mut cache = HashMap::new();
            for j in jobs {
                let (beta, b) = fit_kernel(&k, &ds.y, inst, j, &mut cache)?;
                let w = &ds.x * &beta;
                let p = crate::model::Predictor { w, b, beta: Some(beta) };
                let train = evaluate_scores(&decision_scores(&p, &ds.x), &ds.y, c)?;
                let report = evaluate_scores(&decision_scores(&p, &test.x), &test.y, c)?;
                out.push(Outcome { report, training_error: train.overall_error() });
            }
        }
        Trainer::Gd => {
            for j in jobs {
                let traj = gd_train(&ds, &loss_for(j, inst), cfg.gd.steps, cfg.gd.step_rule)?;
                let p = traj.final_predictor();
                let report = evaluate_scores(&decision_scores(p, &test.x), &test.y, c)?;
                out.push(Outcome { report, training_error: traj.last().train_error });
            }
        }
    }
    Ok(out)
}

/// Finite-d analytic prediction for a job, or None when no theory covers it.
fn analytic_for(inst: &ProblemInstance, job: &Job, mc_samples: usize, mc_seed: u64) -> Result<Option<crate::analytic::AnalyticReport>> {
    if job.method == Method::Cdt && !job.rho.is_infinite() {
        return Ok(None);
    }
    if job.rho == Rho::Finite(0.0) && job.method != Method::Mm && job.method != Method::Ma {
        return Ok(None);
    }
    let coeffs = reduced_optimum(inst, &method_coefficients(inst, job.method, &job.schedule, job.rho)?)?;
    let rep = analytic_error_report(inst, &coeffs, Mode::FiniteD, McOptions { samples: mc_samples, seed: mc_seed })?;
    Ok(Some(rep))
}

/// Empirical rows for all seeds plus analytic overlays for one instance family.
pub fn run_jobs(cfg: &Config, make: &(dyn Fn(u64) -> Result<ProblemInstance> + Sync), jobs: &[Job]) -> Result<Vec<ResultRow>> {
    let inst0 = make(cfg.seeds[0])?;
    let analytic = jobs
        .par_iter()
        .enumerate()
        .map(|(i, j)| analytic_for(&inst0, j, cfg.mc_samples, derive_seed(0xA7A1, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let inst = make(seed)?;
            Ok((seed, empirical_for_seed(cfg, &inst, jobs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (seed, outcomes) in per_seed {
        for ((job, out), an) in jobs.iter().zip(outcomes).zip(&analytic) {
            let row = |metric: String, value: f64, analytic: Option<f64>| ResultRow {
                method: job.label.clone(),
                param: job.param,
                seed,
                metric,
                value: Some(value),
                analytic,
            };
            let an_worst = an.as_ref().map(|a| a.worst_class_error);
            let an_bal = an.as_ref().map(|a| a.per_class_error.iter().sum::<f64>() / a.per_class_error.len() as f64);
            rows.push(row("worst_class_error".into(), out.report.worst_class_error, an_worst));
            rows.push(row("balanced_error".into(), out.report.balanced_error, an_bal));
            rows.push(row("macro_f1".into(), out.report.macro_f1, None));
            rows.push(row("training_error".into(), out.training_error, None));
            for (k, e) in out.report.per_class_error.iter().enumerate() {
                rows.push(row(format!("class_{}_error", k + 1), *e, an.as_ref().map(|a| a.per_class_error[k])));
            }
        }
    }
    Ok(rows)
}

fn sweep_jobs(cfg: &Config, params: &[f64]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for m in &cfg.methods {
        for &p in params {
            jobs.push(Job {
                label: m.label(),
                param: p,
                method: m.method(),
                schedule: cfg.tuning.schedule(m.method(), p),
                rho: m.rho(cfg.rho),
            });
        }
    }
    jobs
}

const ERROR_PLOTS: [(&str, &str); 3] = [
    ("worst_class_error", "Worst-class error"),
    ("balanced_error", "Balanced error"),
    ("macro_f1", "Macro F1"),
];

/// Hyperparameter sweep over `grid` for every method.
pub fn cmd_sweep(cfg: &Config, out: &Path) -> Result<PathBuf> {
    let params = cfg.grid_points()?;
    let jobs = sweep_jobs(cfg, &params);
    let mut rows = run_jobs(cfg, &|seed| cfg.instance(seed), &jobs)?;
    emit(&mut rows, out, &ERROR_PLOTS, "hyperparameter (gamma / tau)")
}

/// Worst-class error against the dimension d at a fixed hyperparameter.
pub fn cmd_dimension_scan(cfg: &Config, out: &Path) -> Result<PathBuf> {
    let dims: Vec<usize> = cfg.dims.unwrap_or(Grid::logarithmic(1e3, 1e5, 9)).points()?.iter().map(|d| d.round() as usize).collect();
    let mut rows = Vec::new();
    for d in dims {
        let jobs: Vec<Job> = sweep_jobs(cfg, &[cfg.param]).into_iter().map(|j| Job { param: d as f64, ..j }).collect();
        rows.extend(run_jobs(cfg, &|seed| cfg.instance(seed)?.with_dimension(d), &jobs)?);
    }
    emit(&mut rows, out, &ERROR_PLOTS, "dimension d")
}

/// Errors against the bias weight ρ; the hyperparameters follow ρ.
pub fn cmd_rho_scan(cfg: &Config, out: &Path) -> Result<PathBuf> {
    let d = cfg.instance(cfg.seeds[0])?.d as f64;
    let rhos = cfg.rhos.unwrap_or(Grid::logarithmic(1e-3 * d.sqrt(), 1e4 * d.sqrt(), 15)).points()?;
    let mut jobs = Vec::new();
    for m in &cfg.methods {
        for &r in &rhos {
            jobs.push(Job {
                label: m.method().name().to_string(),
                param: r,
                method: m.method(),
                schedule: cfg.tuning.schedule(m.method(), cfg.param),
                rho: Rho::Finite(r),
            });
        }
    }
    let mut rows = run_jobs(cfg, &|seed| cfg.instance(seed), &jobs)?;
    emit(&mut rows, out, &ERROR_PLOTS[..1], "rho")
}

#[derive(Clone, Debug, Serialize)]
pub struct CdtFailureReport {
    pub epsilon: f64,
    pub n: Vec<usize>,
    pub s: Vec<f64>,
    pub wcelb_ma_opt_no_bias: f64,
    pub gammas: Vec<f64>,
    pub cdt_bounds: Vec<f64>,
    pub min_cdt_bound: f64,
    /// min CDT bound ≥ ½ − ε and MA bound ≤ ε
    pub separation_holds: bool,
}

/// Large-d worst-class bounds of the CDT failure construction.
pub fn cdt_failure_report(epsilon: f64, c: usize, gammas: &[f64]) -> Result<CdtFailureReport> {
    let fi = tuners::cdt_failure_instance(epsilon, c)?;
    let inst = fi.instance(10_000_000, 0)?;
    let n = inst.n_f64();
    let cdt_bounds: Vec<f64> = gammas
        .iter()
        .map(|g| tuners::wcelb_cdt(&inst, &n.iter().map(|v| v.powf(-g)).collect::<Vec<_>>()))
        .collect();
    let ma = tuners::wcelb_ma_opt(&inst, Rho::Infinite);
    let min_cdt = cdt_bounds.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CdtFailureReport {
        epsilon,
        n: fi.n,
        s: fi.s,
        wcelb_ma_opt_no_bias: ma,
        gammas: gammas.to_vec(),
        cdt_bounds,
        min_cdt_bound: min_cdt,
        separation_holds: min_cdt >= 0.5 - epsilon && ma <= epsilon,
    })
}

pub fn cmd_cdt_failure(cfg: &Config, out: &Path) -> Result<PathBuf> {
    let eps = cfg.epsilon.unwrap_or(0.1);
    let c = cfg.classes.unwrap_or(3);
    let gammas = cfg.grid.unwrap_or(Grid::linear(0.0, 3.0, 61)).points()?;
    let rep = cdt_failure_report(eps, c, &gammas)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&rep)?)?;
    let mut rows: Vec<ResultRow> = gammas
        .iter()
        .zip(&rep.cdt_bounds)
        .map(|(&g, &b)| ResultRow { method: "cdt".into(), param: g, seed: 0, metric: "worst_class_bound".into(), value: None, analytic: Some(b) })
        .collect();
    for &g in &gammas {
        rows.push(ResultRow { method: "ma_star".into(), param: g, seed: 0, metric: "worst_class_bound".into(), value: None, analytic: Some(rep.wcelb_ma_opt_no_bias) });
    }
    emit(&mut rows, out, &[("worst_class_bound", "Large-d worst-class bound")], "gamma (delta_i = N_i^-gamma)")
}

/// GD trajectories against the matching exact margin solutions.
pub fn cmd_implicit_bias(cfg: &Config, out: &Path) -> Result<PathBuf> {
    if cfg.rho == Rho::Finite(0.0) {
        return invalid("implicit-bias runs need rho > 0");
    }
    std::fs::create_dir_all(out)?;
    let jobs = sweep_jobs(cfg, &[cfg.param]);
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<ResultRow>> {
            let inst = cfg.instance(seed)?;
            let ds = sample_train(&inst);
            let test = sample_test(&inst, cfg.test_per_class, derive_seed(seed, 0x7E57))?;
            let mut rows = Vec::new();
            for j in &jobs {
                let values = j.schedule.values(&inst, j.rho);
                let problem = match j.method {
                    Method::Mm | Method::La => MarginProblem::max_margin(inst.c, j.rho),
                    Method::Ma => MarginProblem::margin_adjust(values.clone(), j.rho),
                    Method::Cdt => MarginProblem::class_dep_temp(values.clone(), j.rho),
                };
                let reference = solve_primal(&ds, &problem)?.predictor;
                let traj = gd_train(&ds, &loss_for(j, &inst), cfg.gd.steps, cfg.gd.step_rule)?;
                let f = std::fs::File::create(out.join(format!("trajectory_{}_seed{seed}.csv", j.label)))?;
                traj.write_csv(std::io::BufWriter::new(f), Some(&reference))?;
                for s in &traj.snapshots {
                    if s.step == 0 {
                        continue;
                    }
                    let cos = direction_cosine(&s.predictor, &reference, j.rho);
                    rows.push(ResultRow { method: j.label.clone(), param: s.step as f64, seed, metric: "cosine_to_reference".into(), value: Some(cos), analytic: Some(1.0) });
                    rows.push(ResultRow { method: j.label.clone(), param: s.step as f64, seed, metric: "loss".into(), value: Some(s.loss), analytic: None });
                }
                let gd_rep = evaluate_scores(&decision_scores(traj.final_predictor(), &test.x), &test.y, inst.c)?;
                let qp_rep = evaluate_scores(&decision_scores(&reference, &test.x), &test.y, inst.c)?;
                let last = traj.last().step as f64;
                rows.push(ResultRow { method: j.label.clone(), param: last, seed, metric: "worst_class_error".into(), value: Some(gd_rep.worst_class_error), analytic: Some(qp_rep.worst_class_error) });
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<ResultRow> = per_seed.into_iter().flatten().collect();
    emit(&mut rows, out, &[("cosine_to_reference", "Direction cosine to the margin solution")], "GD step")
}

#[derive(Clone, Debug, Serialize)]
struct KernelRecord {
    zeta: f64,
    method: String,
    param: f64,
    seed: u64,
    training_error: f64,
    distance_from_theory: f64,
    report: ErrorReport,
}

/// RBF-kernel classification on feature files over ζ × methods × grid.
pub fn cmd_kernel(cfg: &Config, out: &Path) -> Result<PathBuf> {
    let Some(ks) = &cfg.kernel else { return invalid("kernel runs need a kernel section") };
    if cfg.tuning == Tuning::Theoretical {
        return invalid("kernel runs need tuning standard or equal_signal (feature files have no signal strengths)");
    }
    let mut train_all = kernel_lab::load_features(&ks.train, ks.classes)?;
    let mut test = kernel_lab::load_features(&ks.test, Some(ks.classes.unwrap_or(train_all.c)))?;
    if train_all.c != test.c {
        return invalid("train and test files disagree on the number of classes");
    }
    if ks.normalize {
        train_all = kernel_lab::normalize_features(&train_all);
        test = kernel_lab::normalize_features(&test);
    }
    let sizes = match &ks.profile {
        None => None,
        Some(ProfileOrSizes::Sizes(v)) => Some(v.clone()),
        Some(ProfileOrSizes::Profile(p)) => Some(p.sizes()?),
    };
    let seeds: Vec<u64> = if sizes.is_some() { cfg.seeds.clone() } else { vec![cfg.seeds[0]] };
    let zetas = ks.zetas.clone().unwrap_or(kernel_lab::DEFAULT_ZETAS.to_vec());
    let params = cfg.grid_points()?;
    let jobs = sweep_jobs(cfg, &params);
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for &seed in &seeds {
        let train = match &sizes {
            Some(n) => kernel_lab::subsample_profile(&train_all, n, seed)?,
            None => train_all.clone(),
        };
        let counts = train.class_counts();
        if counts.contains(&0) {
            return invalid("every class needs at least one training point");
        }
        // Only the class sizes matter for the standard schedules.
        let shape = ProblemInstance::new(train.c, train.dim().max(1), counts, vec![1.0; train.c], seed)?;
        for &zeta in &zetas {
            let k = kernel_lab::rbf_kernel(&train.x, zeta)?;
            let cross = kernel_lab::rbf_cross(&train.x, &test.x, zeta)?;
            let dist = kernel_lab::distance_from_theory(&k, &train.y)?;
            let mut cache = HashMap::new();
            for j in &jobs {
                let (beta, b) = fit_kernel(&k, &train.y, &shape, j, &mut cache)?;
                let train_rep = evaluate_scores(&kernel_decision_scores(&beta, &b, &k), &train.y, train.c)?;
                let report = evaluate_scores(&kernel_decision_scores(&beta, &b, &cross), &test.y, test.c)?;
                let label = format!("{}@zeta={zeta}", j.label);
                let row = |metric: &str, v: f64| ResultRow { method: label.clone(), param: j.param, seed, metric: metric.into(), value: Some(v), analytic: None };
                rows.push(row("worst_class_error", report.worst_class_error));
                rows.push(row("balanced_error", report.balanced_error));
                rows.push(row("macro_f1", report.macro_f1));
                rows.push(row("training_error", train_rep.overall_error()));
                rows.push(row("distance_from_theory", dist));
                records.push(KernelRecord { zeta, method: j.label.clone(), param: j.param, seed, training_error: train_rep.overall_error(), distance_from_theory: dist, report });
            }
        }
    }
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("kernel_results.json"), serde_json::to_string_pretty(&records)?)?;
    emit(&mut rows, out, &ERROR_PLOTS, "hyperparameter (gamma / tau)")
}

/// Subcommands of the command line tool.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Sweep,
    DimScan,
    RhoScan,
    CdtFailure,
    ImplicitBias,
    Kernel,
}

pub fn run(cmd: Command, cfg: &Config, out: &Path) -> Result<PathBuf> {
    match cmd {
        Command::Sweep => cmd_sweep(cfg, out),
        Command::DimScan => cmd_dimension_scan(cfg, out),
        Command::RhoScan => cmd_rho_scan(cfg, out),
        Command::CdtFailure => cmd_cdt_failure(cfg, out),
        Command::ImplicitBias => cmd_implicit_bias(cfg, out),
        Command::Kernel => cmd_kernel(cfg, out),
    }
}

/// Process exit code for an error: 2 configuration/input, 3 infeasible, 4 numerical.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible { .. } => 3,
        Error::Numerical(_) | Error::Diverged { .. } => 4,
        _ => 2,
    }
}
