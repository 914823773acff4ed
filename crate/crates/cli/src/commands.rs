use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use optsel::convergence::{build_training_set, default_basis, fit_with, FitMethod, FitOptions, Refit};
use optsel::data::{read_libsvm, synth_with_truth, SynthParams};
use optsel::eval::{fit_report, forward_prediction_iters, forward_prediction_time, loo_m_cv, EvalError};
use optsel::kv::{join_floats, KvFile};
use optsel::optim::reference_optimum;
use optsel::optim::{run_bsp, OptimError, ReferenceOptimum};
use optsel::recommender::{
    default_m_grid, h, recommend_for_deadline, recommend_for_epsilon, table_csv, Metric, RecommendError,
};
use optsel::system_model::{
    fit_kkt_violation, fit_nnls, observation_from_trace, synth_timings as synth_observations, timings_from_csv,
    timings_to_csv, SystemBasis,
};
use optsel::{
    Algorithm, AlgorithmConfig, ConvergenceModel, EvalReport, ModelPair, SvmProblem, SystemModel, TimingMode, Trace,
};

use crate::artifacts::{
    load_traces, prepare_out, resolve_p_star, single_algorithm, write_sidecar, write_with_sidecar, Provenance,
};
use crate::settings::{join, Settings};
use crate::{EvalArgs, FitConvergenceArgs, FitSystemArgs, Outcome, PredictArgs, RecommendArgs, RunArgs};
use crate::{SynthDataArgs, SynthTimingsArgs};

fn parse_algorithm(s: &str) -> Result<Algorithm> {
    s.parse().map_err(anyhow::Error::msg)
}

fn check_m_grid(grid: &[usize]) -> Result<()> {
    ensure!(!grid.is_empty() && !grid.contains(&0), "m grid must be nonempty with entries >= 1, got {grid:?}");
    Ok(())
}

fn parse_refit(s: &str) -> Result<Refit> {
    match s {
        "support" => Ok(Refit::Support),
        "lasso" => Ok(Refit::Lasso),
        other => bail!("unknown refit {other:?}; expected support or lasso"),
    }
}

fn fit_options(s: &mut Settings, folds: Option<usize>, refit: Option<String>) -> Result<FitOptions> {
    let folds = s.get("folds", folds, 5)?;
    let refit = parse_refit(&s.get("refit", refit, "support".to_string())?)?;
    Ok(FitOptions { folds, refit, ..FitOptions::default() })
}

fn load_dataset_reference(
    path: &Path,
    dataset_hash: &str,
    reg: f64,
    max_iters: usize,
    problem: &SvmProblem<'_>,
) -> Result<(ReferenceOptimum, bool)> {
    if let Ok(kv) = KvFile::read(path) {
        let same = kv.get("dataset_hash") == Some(dataset_hash)
            && kv.parse::<f64>("reg").ok() == Some(reg)
            && kv.parse::<usize>("max_iters").ok() == Some(max_iters);
        if same {
            let r = ReferenceOptimum {
                p_star: kv.parse("p_star")?,
                gap: kv.parse("gap")?,
                iterations: kv.parse("iterations")?,
                loose: kv.parse("loose")?,
            };
            return Ok((r, true));
        }
    }
    Ok((reference_optimum(problem, max_iters), false))
}

pub fn run(a: RunArgs) -> Result<Outcome> {
    let out = a.common.out.clone();
    let mut s = Settings::load(a.common.config.as_deref())?;
    let data = s.path("data", a.data)?.context("missing --data")?;
    let algorithms: Vec<String> = s.list("algorithm", a.algorithm, vec!["cocoa_plus".to_string()])?;
    let algorithms = algorithms.iter().map(|x| parse_algorithm(x)).collect::<Result<Vec<_>>>()?;
    let m_grid = s.list("m-grid", a.m_grid, default_m_grid())?;
    check_m_grid(&m_grid)?;
    let reg = s.get("reg", a.reg, 0.01)?;
    let local_iters = s.opt("local-iters", a.local_iters)?;
    let batch_size = s.get("batch-size", a.batch_size, 0)?;
    let max_iters = s.get("max-iters", a.max_iters, 500)?;
    let epsilon = s.get("epsilon", a.epsilon, 1e-4)?;
    let seed = s.get("seed", a.seed, 0)?;
    let timing_name = s.get("timing", a.timing, "measured".to_string())?;
    let system_path = s.path("system", a.system)?;

    let ds = read_libsvm(&data).with_context(|| format!("loading dataset {}", data.display()))?;
    let timing = match timing_name.as_str() {
        "measured" => TimingMode::Measured,
        "synthetic" => {
            let p = system_path.as_ref().context("--timing synthetic needs --system")?;
            TimingMode::Synthetic(SystemModel::read(p).with_context(|| format!("loading {}", p.display()))?)
        }
        other => bail!("unknown timing mode {other:?}; expected measured or synthetic"),
    };
    for &m in &m_grid {
        ensure!(m <= ds.n(), "m={m} exceeds the {} examples in {}", ds.n(), data.display());
    }
    prepare_out(&out)?;
    let mut prov = Provenance::new("run", &s);
    prov.input("data", &data)?;
    if let (TimingMode::Synthetic(_), Some(p)) = (&timing, &system_path) {
        prov.input("system", p)?;
    }

    let hash = ds.content_hash();
    let problem = SvmProblem::new(&ds, reg)?;
    let ref_path = out.join(format!("reference_{}_reg{reg:e}.kv", &hash[..16]));
    let (reference, cached) = load_dataset_reference(&ref_path, &hash, reg, max_iters, &problem)?;
    if !cached {
        let mut kv = KvFile::new();
        kv.set("dataset_hash", &hash)
            .set("reg", reg)
            .set("max_iters", max_iters)
            .set("p_star", reference.p_star)
            .set("gap", reference.gap)
            .set("iterations", reference.iterations)
            .set("loose", reference.loose);
        write_with_sidecar(&ref_path, &kv.to_text(), &prov)?;
    }
    println!(
        "reference optimum {} (gap {:e}, {} rounds{}{})",
        reference.p_star,
        reference.gap,
        reference.iterations,
        if reference.loose { ", loose" } else { "" },
        if cached { ", cached" } else { "" }
    );

    let mut diverged = Vec::new();
    for &alg in &algorithms {
        for &m in &m_grid {
            let cfg = AlgorithmConfig {
                local_iters,
                batch_size,
                max_iters,
                target_suboptimality: epsilon,
                p_star: Some(reference.p_star),
                seed,
                timing: timing.clone(),
                ..AlgorithmConfig::new(alg, m)
            };
            let mut trace = match run_bsp(&problem, &cfg) {
                Ok(t) => t,
                Err(OptimError::Diverged { trace, .. }) => {
                    diverged.push(format!("{alg} m={m}"));
                    let mut t = *trace;
                    t.meta.diverged = true;
                    t
                }
                Err(e) => return Err(e).with_context(|| format!("running {alg} m={m}")),
            };
            trace.meta.p_star = Some(reference.p_star);
            trace.meta.p_star_gap = Some(reference.gap);
            trace.meta.dataset_path = Some(data.display().to_string());
            trace.meta.extra.extend(prov.entries().iter().cloned());
            let path = out.join(format!("trace_{alg}_m{m}.csv"));
            trace.write(&path).with_context(|| format!("writing {}", path.display()))?;
            let last = trace.records.last().expect("trace has the initial record");
            println!(
                "{alg} m={m}: {} iterations, sub-optimality {:e}, stop {}",
                last.iteration,
                last.primal - reference.p_star,
                trace.meta.stop_reason
            );
        }
    }
    if diverged.is_empty() {
        Ok(Outcome::Complete)
    } else {
        Ok(Outcome::Partial(format!("diverged: {}", diverged.join(", "))))
    }
}

fn parse_system_basis(s: &str) -> Result<SystemBasis> {
    match s {
        "ernest" => Ok(SystemBasis::Ernest),
        "extended" => Ok(SystemBasis::Extended),
        other => SystemBasis::from_version(other).with_context(|| format!("unknown system basis {other:?}")),
    }
}

pub fn fit_system(a: FitSystemArgs) -> Result<Outcome> {
    let out = a.common.out.clone();
    let mut s = Settings::load(a.common.config.as_deref())?;
    let timings = s.path("timings", a.timings)?;
    let traces_dir = s.path("traces", a.traces)?;
    let algorithm = s.opt("algorithm", a.algorithm)?.map(|x| parse_algorithm(&x)).transpose()?;
    let basis = parse_system_basis(&s.get("basis", a.basis, "ernest".to_string())?)?;
    let name = s.opt("name", a.name)?;

    let mut inputs = Vec::new();
    let (observations, algorithm, dataset_hash) = match (timings, traces_dir) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            inputs.push(("timings".to_string(), path.clone()));
            (timings_from_csv(&text, &path.display().to_string())?, algorithm, None)
        }
        (None, Some(dir)) => {
            let traces = load_traces(&dir, algorithm.map(Algorithm::as_str))?;
            let alg = parse_algorithm(&single_algorithm(&traces)?)?;
            let hash = single_dataset(&traces)?;
            let mut obs = Vec::new();
            for (p, t) in &traces {
                obs.push(observation_from_trace(t, t.meta.n as f64).with_context(|| format!("{}", p.display()))?);
                inputs.push((String::new(), p.clone()));
            }
            (obs, Some(alg), Some(hash))
        }
        (Some(_), Some(_)) => bail!("pass either --timings or --traces, not both"),
        (None, None) => bail!("missing --timings or --traces"),
    };
    let mut model = fit_nnls(&observations, basis)?;
    model.algorithm = algorithm.map(|x| x.as_str().to_string());
    model.dataset_hash = dataset_hash;

    prepare_out(&out)?;
    let file = name.unwrap_or_else(|| match algorithm {
        Some(x) => format!("system_{x}.model"),
        None => "system.model".to_string(),
    });
    let path = out.join(file);
    let mut prov = Provenance::new("fit-system", &s);
    for (label, p) in &inputs {
        if label.is_empty() {
            prov.trace_input(p)?;
        } else {
            prov.input(label, p)?;
        }
    }
    prov.note("fit.observations", observations.len());
    prov.note("fit.kkt_violation", fit_kkt_violation(&model, &observations));
    model.write(&path).with_context(|| format!("writing {}", path.display()))?;
    write_sidecar(&path, &prov)?;
    println!(
        "theta [{}] rms {:e}{} -> {}",
        join(&model.theta),
        model.fit_residual,
        if model.rank_deficient { " (rank deficient)" } else { "" },
        path.display()
    );
    Ok(Outcome::Complete)
}

fn single_dataset(traces: &[(PathBuf, Trace)]) -> Result<String> {
    let first = &traces[0].1.meta.dataset_hash;
    for (p, t) in traces {
        ensure!(&t.meta.dataset_hash == first, "{} is from dataset {}, others from {first}", p.display(), t.meta.dataset_hash);
    }
    Ok(first.clone())
}

pub fn fit_convergence(a: FitConvergenceArgs) -> Result<Outcome> {
    let out = a.common.out.clone();
    let mut s = Settings::load(a.common.config.as_deref())?;
    let dir = s.path("traces", a.traces)?.context("missing --traces")?;
    let algorithm = s.opt("algorithm", a.algorithm)?.map(|x| parse_algorithm(&x)).transpose()?;
    let mut opts = fit_options(&mut s, a.folds, a.refit)?;
    opts.method = s.opt("method", a.method)?.map(|m| m.parse::<FitMethod>().map_err(anyhow::Error::msg)).transpose()?;
    let p_star = s.opt("p-star", a.p_star)?;
    let gap = s.opt("p-star-gap", a.p_star_gap)?;
    let name = s.opt("name", a.name)?;

    let traces = load_traces(&dir, algorithm.map(Algorithm::as_str))?;
    let alg = single_algorithm(&traces)?;
    let (p, g) = resolve_p_star(&traces, p_star, gap)?;
    let plain: Vec<Trace> = traces.iter().map(|(_, t)| t.clone()).collect();
    let training = build_training_set(&plain, p, g)?;
    let model = fit_with(&training, &default_basis(), &opts)?;
    let report = fit_report(&model, &training);

    prepare_out(&out)?;
    let path = out.join(name.unwrap_or_else(|| format!("convergence_{alg}.model")));
    let mut prov = Provenance::new("fit-convergence", &s);
    for (tp, _) in &traces {
        prov.trace_input(tp)?;
    }
    prov.note("fit.rows", training.len());
    prov.note("fit.dropped_rows", training.dropped);
    prov.note("fit.rmse_log", report.mean_rmse_log());
    if let Some(r2) = report.mean_r2_log() {
        prov.note("fit.r2_log", r2);
    }
    model.write(&path).with_context(|| format!("writing {}", path.display()))?;
    write_sidecar(&path, &prov)?;

    let terms: Vec<String> = model.terms().iter().filter(|t| t.coef != 0.0).map(|t| t.name.to_string()).collect();
    println!(
        "{alg}: {} rows, method {}, reg {:e}, terms [{}], rmse_log {:e} -> {}",
        training.len(),
        model.method.as_str(),
        model.chosen_reg,
        terms.join(", "),
        report.mean_rmse_log(),
        path.display()
    );
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    Ok(Outcome::Complete)
}

/// Algorithm for a model pair: the flag, else whatever either model records.
fn pair_algorithm(flag: Option<Algorithm>, system: &SystemModel, conv: &ConvergenceModel) -> Result<Algorithm> {
    if let Some(a) = flag {
        return Ok(a);
    }
    match conv.algorithm.as_ref().or(system.algorithm.as_ref()) {
        Some(x) => parse_algorithm(x),
        None => bail!("neither model records an algorithm; pass --algorithm"),
    }
}

fn load_pair(system: &Path, convergence: &Path, flag: Option<Algorithm>) -> Result<ModelPair> {
    let sys = SystemModel::read(system).with_context(|| format!("loading {}", system.display()))?;
    let conv = ConvergenceModel::read(convergence).with_context(|| format!("loading {}", convergence.display()))?;
    let alg = pair_algorithm(flag, &sys, &conv)?;
    ModelPair::new(alg, sys, conv).with_context(|| format!("pairing {} with {}", system.display(), convergence.display()))
}

pub fn predict(a: PredictArgs) -> Result<Outcome> {
    let out = a.common.out.clone();
    let mut s = Settings::load(a.common.config.as_deref())?;
    let system = s.path("system", a.system)?.context("missing --system")?;
    let convergence = s.path("convergence", a.convergence)?.context("missing --convergence")?;
    let flag = s.opt("algorithm", a.algorithm)?.map(|x| parse_algorithm(&x)).transpose()?;
    let ms = s.list_opt("m", a.m)?.context("missing --m")?;
    check_m_grid(&ms)?;
    let is = s.list_opt("i", a.i)?;
    let ts = s.list_opt("t", a.t)?;
    let name = s.get("name", a.name, "prediction.csv".to_string())?;

    let pair = load_pair(&system, &convergence, flag)?;
    let mut csv = String::from("algorithm,m,i,t_s,sub_optimality,ln_sub_optimality,clamped\n");
    let mut emit = |m: usize, i: f64, t: f64, g: f64, clamped: bool| {
        let _ = writeln!(csv, "{},{m},{i},{t},{g},{},{clamped}", pair.algorithm(), g.ln());
        println!("{} m={m} i={i} t={t} sub_optimality={g}", pair.algorithm());
    };
    match (is, ts) {
        (Some(is), None) => {
            for &m in &ms {
                let f = pair.system().predict_time(m);
                for &i in &is {
                    ensure!(i >= 1.0 && i.is_finite(), "iteration count must be >= 1, got {i}");
                    emit(m, i, i * f, pair.convergence().predict_g(i, m), false);
                }
            }
        }
        (None, Some(ts)) => {
            for &m in &ms {
                for &t in &ts {
                    let v = h(&pair, t, m)?;
                    emit(m, v.iterations, t, v.sub_optimality, v.clamped);
                }
            }
        }
        (Some(_), Some(_)) => bail!("pass either --i or --t, not both"),
        (None, None) => bail!("missing --i or --t"),
    }

    prepare_out(&out)?;
    let mut prov = Provenance::new("predict", &s);
    prov.input("system", &system)?;
    prov.input("convergence", &convergence)?;
    write_with_sidecar(&out.join(name), &csv, &prov)?;
    Ok(Outcome::Complete)
}

pub fn recommend(a: RecommendArgs) -> Result<Outcome> {
    let out = a.common.out.clone();
    let mut s = Settings::load(a.common.config.as_deref())?;
    let systems = s.list_opt("system", a.system)?.context("missing --system")?;
    let convs = s.list_opt("convergence", a.convergence)?.context("missing --convergence")?;
    ensure!(
        systems.len() == convs.len(),
        "{} system models but {} convergence models; they are paired by position",
        systems.len(),
        convs.len()
    );
    let epsilon = s.opt("epsilon", a.epsilon)?;
    let deadline = s.opt("deadline", a.deadline)?;
    let m_grid = s.list("m-grid", a.m_grid, default_m_grid())?;
    check_m_grid(&m_grid)?;
    let name = s.get("name", a.name, "recommendation.csv".to_string())?;

    let mut pairs = Vec::new();
    let mut prov_inputs = Vec::new();
    for (k, (sp, cp)) in systems.iter().zip(&convs).enumerate() {
        let (sp, cp) = (PathBuf::from(sp), PathBuf::from(cp));
        pairs.push(load_pair(&sp, &cp, None)?);
        prov_inputs.push((format!("system{k}"), sp));
        prov_inputs.push((format!("convergence{k}"), cp));
    }
    let result = match (epsilon, deadline) {
        (Some(e), None) => recommend_for_epsilon(&pairs, e, &m_grid).map_err(|e| (e, Metric::TimeS)),
        (None, Some(t)) => recommend_for_deadline(&pairs, t, &m_grid).map_err(|e| (e, Metric::SubOptimality)),
        (Some(_), Some(_)) => bail!("pass either --epsilon or --deadline, not both"),
        (None, None) => bail!("missing --epsilon or --deadline"),
    };

    prepare_out(&out)?;
    let mut prov = Provenance::new("recommend", &s);
    for (label, p) in &prov_inputs {
        prov.input(label, p)?;
    }
    let path = out.join(name);
    match result {
        Ok(rec) => {
            prov.note("verdict", rec.verdict());
            write_with_sidecar(&path, &rec.to_csv(), &prov)?;
            println!("{}", rec.verdict());
            Ok(Outcome::Complete)
        }
        Err((RecommendError::NoFeasible { table }, metric)) => {
            prov.note("verdict", "none");
            write_with_sidecar(&path, &table_csv(&table, metric), &prov)?;
            println!("best: none");
            Ok(Outcome::Partial(format!("no configuration in the grid is feasible; table in {}", path.display())))
        }
        Err((e, _)) => Err(e.into()),
    }
}

pub fn eval(a: EvalArgs) -> Result<Outcome> {
    let out = a.common.out.clone();
    let mut s = Settings::load(a.common.config.as_deref())?;
    let dir = s.path("traces", a.traces)?.context("missing --traces")?;
    let protocol: String = s.require("protocol", a.protocol)?;
    let algorithm = s.opt("algorithm", a.algorithm)?.map(|x| parse_algorithm(&x)).transpose()?;
    let ms = s.list_opt("m", a.m)?;
    let p_star = s.opt("p-star", a.p_star)?;
    let gap = s.opt("p-star-gap", a.p_star_gap)?;
    let basis = default_basis();

    let traces = load_traces(&dir, algorithm.map(Algorithm::as_str))?;
    let (p, g) = resolve_p_star(&traces, p_star, gap)?;
    let mut by_alg: BTreeMap<String, Vec<&(PathBuf, Trace)>> = BTreeMap::new();
    for t in &traces {
        by_alg.entry(t.1.meta.algorithm.as_str().to_string()).or_default().push(t);
    }
    let selected = |t: &Trace| ms.as_ref().is_none_or(|ms| ms.contains(&t.m()));

    // (file stem, report, traces it was computed from)
    let mut reports: Vec<(String, EvalReport, Vec<PathBuf>)> = Vec::new();
    let mut skipped = Vec::new();
    match protocol.as_str() {
        "loo-m" | "fit" => {
            let opts = fit_options(&mut s, a.folds, a.refit)?;
            for (alg, group) in &by_alg {
                let plain: Vec<Trace> = group.iter().map(|(_, t)| t.clone()).collect();
                let report = if protocol == "fit" {
                    let training = build_training_set(&plain, p, g)?;
                    fit_report(&fit_with(&training, &basis, &opts)?, &training)
                } else {
                    loo_m_cv(&plain, &basis, p, g, &opts)?
                };
                let inputs = group.iter().map(|(p, _)| p.clone()).collect();
                reports.push((format!("eval_{protocol}_{alg}"), report, inputs));
            }
        }
        "forward-iters" => {
            let window = s.get("window", a.window, optsel::eval::DEFAULT_WINDOW)?;
            let horizons = s.list("horizon", a.horizon, vec![1, 10])?;
            for (path, t) in traces.iter().filter(|(_, t)| selected(t)) {
                for &hz in &horizons {
                    match forward_prediction_iters(t, &basis, window, hz, p, g) {
                        Ok(r) => reports.push((forward_stem(&r, t), r, vec![path.clone()])),
                        Err(EvalError::InsufficientData(msg)) => skipped.push(format!("{} h={hz}: {msg}", path.display())),
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        }
        "forward-time" => {
            let system_path = s.path("system", a.system)?.context("forward-time needs --system")?;
            let window_s: f64 = s.require("window-s", a.window_s)?;
            let horizons: Vec<f64> = s.list_opt("horizon-s", a.horizon_s)?.context("missing --horizon-s")?;
            let system = SystemModel::read(&system_path).with_context(|| format!("loading {}", system_path.display()))?;
            for (path, t) in traces.iter().filter(|(_, t)| selected(t)) {
                for &hz in &horizons {
                    match forward_prediction_time(t, &system, &basis, window_s, hz, p, g) {
                        Ok(r) => reports.push((forward_stem(&r, t), r, vec![path.clone(), system_path.clone()])),
                        // the window in iterations depends on f(m), so it can be too short for some traces only
                        Err(EvalError::InsufficientData(msg) | EvalError::InvalidWindow(msg)) => {
                            skipped.push(format!("{} h={hz}s: {msg}", path.display()))
                        }
                        Err(e) => return Err(e.into()),
                    }
                }
            }
        }
        other => bail!("unknown protocol {other:?}; expected loo-m, forward-iters, forward-time or fit"),
    }
    ensure!(!reports.is_empty(), "no report produced: {}", skipped.join("; "));

    prepare_out(&out)?;
    for (stem, report, inputs) in &reports {
        let mut prov = Provenance::new("eval", &s);
        for ip in inputs {
            if ip.extension().is_some_and(|e| e == "csv") {
                prov.trace_input(ip)?;
            } else {
                prov.input("system", ip)?;
            }
        }
        for (k, n) in report.notes.iter().enumerate() {
            prov.note(&format!("note.{k}"), n);
        }
        write_with_sidecar(&out.join(format!("{stem}.csv")), &report.summary_csv(), &prov)?;
        write_with_sidecar(&out.join(format!("{stem}_points.csv")), &report.points_csv(), &prov)?;
        let r2 = report.mean_r2_log().map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into());
        println!(
            "{stem}: {} units, mean rmse_log {:.4}, mean r2_log {r2}, mean max_abs_err_log {:.4}",
            report.rows.len(),
            report.mean_rmse_log(),
            report.mean_max_abs_err_log()
        );
        for n in &report.notes {
            println!("  note: {n}");
        }
    }
    if skipped.is_empty() {
        Ok(Outcome::Complete)
    } else {
        for w in &skipped {
            eprintln!("skipped: {w}");
        }
        Ok(Outcome::Partial(format!("{} evaluations skipped for lack of data", skipped.len())))
    }
}

fn forward_stem(report: &EvalReport, t: &Trace) -> String {
    format!("eval_{}_{}_m{}", report.protocol, t.meta.algorithm, t.m())
}

pub fn synth_data(a: SynthDataArgs) -> Result<Outcome> {
    let out = a.common.out.clone();
    let mut s = Settings::load(a.common.config.as_deref())?;
    let params = SynthParams {
        n: s.get("n", a.n, 1000)?,
        d: s.get("d", a.d, 20)?,
        margin: s.get("margin", a.margin, 0.1)?,
        noise_frac: s.get("noise", a.noise, 0.0)?,
        seed: s.get("seed", a.seed, 0)?,
    };
    let name = s.get("name", a.name, "data.libsvm".to_string())?;
    let (ds, truth) = synth_with_truth(&params)?;

    prepare_out(&out)?;
    let path = out.join(name);
    let mut prov = Provenance::new("synth-data", &s);
    prov.note("dataset_hash", ds.content_hash());
    prov.note("truth", join_floats(&truth));
    write_with_sidecar(&path, &ds.to_libsvm(), &prov)?;
    println!("{} examples, {} features, hash {} -> {}", ds.n(), ds.d(), ds.content_hash(), path.display());
    Ok(Outcome::Complete)
}

pub fn synth_timings(a: SynthTimingsArgs) -> Result<Outcome> {
    let out = a.common.out.clone();
    let mut s = Settings::load(a.common.config.as_deref())?;
    let theta: Vec<f64> = s.list_opt("theta", a.theta)?.context("missing --theta")?;
    let theta: [f64; 4] = theta
        .as_slice()
        .try_into()
        .map_err(|_| anyhow::anyhow!("--theta needs 4 values for [1, size/m, ln m, m], got {}", theta.len()))?;
    ensure!(theta.iter().all(|v| *v >= 0.0 && v.is_finite()), "theta must be non-negative, got {theta:?}");
    let size: f64 = s.require("size", a.size)?;
    let m_grid = s.list("m-grid", a.m_grid, default_m_grid())?;
    check_m_grid(&m_grid)?;
    let noise = s.get("noise", a.noise, 0.0)?;
    let repeats = s.get("repeats", a.repeats, 3)?;
    let seed = s.get("seed", a.seed, 0)?;
    let name = s.get("name", a.name, "timings.csv".to_string())?;

    let model = SystemModel::from_theta(theta, size);
    let obs = synth_observations(&model, &m_grid, noise, repeats, seed)?;
    prepare_out(&out)?;
    let path = out.join(name);
    write_with_sidecar(&path, &timings_to_csv(&obs), &Provenance::new("synth-timings", &s))?;
    println!("{} observations -> {}", obs.len(), path.display());
    Ok(Outcome::Complete)
}
