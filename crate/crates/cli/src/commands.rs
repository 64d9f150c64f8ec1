use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use bg_impulse::bench::{
    builtin_config, compare_tables, parse_config, run_grid, ExperimentReport, Progress,
    ReferenceTables, RunOptions, TolerancePolicy, TrialOutcome,
};
use bg_impulse::detect::{
    classify_threshold, its_blind, its_known, smlr, three_sigma_baseline, DetectorConfig, InitRule,
    ScoringModel,
};
use bg_impulse::io::{read_labels, read_observations, write_labels, write_samples};
use bg_impulse::model::generate;
use bg_impulse::posterior::{EstimatorKind, PlugInEstimate};
use bg_impulse::robust::{gini, mad, median, threshold_three_sigma, THREE_SIGMA_FACTOR};
use bg_impulse::{Error, NoiseParams, ObservationSequence, Result};
use serde::Serialize;

use crate::{
    BenchArgs, CompareArgs, DetectArgs, Estimator, Format, GenArgs, Init, Method, Mode, StatsArgs,
};

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn gen(args: GenArgs) -> Result<ExitCode> {
    let params = NoiseParams::new(args.rho, args.sigma1_sq, args.sigma2_sq)?;
    let noise = generate(params, args.n, args.seed)?;
    write_samples(&args.out, &noise.observations)?;
    if let Some(path) = &args.truth_out {
        write_labels(path, &noise.truth)?;
    }
    println!("rho        {}", params.rho);
    println!("sigma1_sq  {}", params.sigma1_sq);
    println!("sigma2_sq  {}", params.sigma2_sq);
    println!("n          {}", args.n);
    println!("seed       {}", args.seed);
    println!("impulses   {}", noise.truth.impulse_count());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct TruthSummary {
    false_alarms: u64,
    misses: u64,
    background: u64,
    impulses: u64,
    type1_rate: Option<f64>,
    type2_rate: Option<f64>,
}

impl From<TrialOutcome> for TruthSummary {
    fn from(o: TrialOutcome) -> Self {
        let rate = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        Self {
            false_alarms: o.false_alarms,
            misses: o.misses,
            background: o.background,
            impulses: o.impulses,
            type1_rate: rate(o.false_alarms, o.background),
            type2_rate: rate(o.misses, o.impulses),
        }
    }
}

#[derive(Serialize)]
struct DetectReport {
    input: String,
    n: usize,
    method: &'static str,
    mode: &'static str,
    estimate: PlugInEstimate,
    impulses: usize,
    log_score: f64,
    loops: usize,
    converged: bool,
    /// Thresholding methods only.
    initial_threshold: Option<f64>,
    final_threshold: Option<f64>,
    threshold_trace: Option<Vec<f64>>,
    truth: Option<TruthSummary>,
}

fn detector_config(args: &DetectArgs) -> DetectorConfig {
    DetectorConfig {
        max_loops: args.max_loops,
        ssi_coefficient: args.ssi_coefficient,
        estimator: match args.estimator {
            Estimator::Robust => EstimatorKind::Robust,
            Estimator::Ergodic => EstimatorKind::Ergodic,
        },
        init: match args.init {
            Init::Ssi => InitRule::Ssi,
            Init::ThreeSigma => InitRule::ThreeSigma,
            Init::Fixed => InitRule::Fixed(args.t0.expect("clap requires --t0 with --init fixed")),
        },
        fixed_rho: args.rho,
        ..DetectorConfig::default()
    }
}

fn scoring_model(args: &DetectArgs, cfg: &DetectorConfig) -> ScoringModel {
    match args.mode {
        Mode::Known => ScoringModel::Known {
            sigma1_sq: args
                .sigma1_sq
                .expect("clap requires sigma flags in known mode"),
            sigma2_sq: args
                .sigma2_sq
                .expect("clap requires sigma flags in known mode"),
            fixed_rho: cfg.fixed_rho,
        },
        Mode::Blind => ScoringModel::PlugIn {
            estimator: cfg.estimator,
        },
    }
}

fn run_detector(args: &DetectArgs, x: &ObservationSequence) -> Result<DetectReport> {
    let cfg = detector_config(args);
    let mode = match args.mode {
        Mode::Blind => "blind",
        Mode::Known => "known",
    };
    let threshold_report = |method, r: bg_impulse::detect::DetectionResult| DetectReport {
        input: args.input.display().to_string(),
        n: x.len(),
        method,
        mode,
        estimate: r.estimate,
        impulses: r.labels.impulse_count(),
        log_score: r.score.log_score,
        loops: r.loops,
        converged: r.converged,
        initial_threshold: r.threshold_trace.first().copied(),
        final_threshold: Some(r.final_threshold()),
        threshold_trace: Some(r.threshold_trace.clone()),
        truth: None,
    };
    let (report, labels) = match args.method {
        Method::Its => {
            let r = match args.mode {
                Mode::Blind => its_blind(x, &cfg)?,
                Mode::Known => its_known(
                    x,
                    args.sigma1_sq.expect("checked by clap"),
                    args.sigma2_sq.expect("checked by clap"),
                    &cfg,
                )?,
            };
            let labels = r.labels.clone();
            (threshold_report("its", r), labels)
        }
        Method::ThreeSigma => {
            let r = three_sigma_baseline(x)?;
            let labels = r.labels.clone();
            (threshold_report("three-sigma", r), labels)
        }
        Method::Smlr => {
            let t0 = cfg.initial_threshold(x)?;
            let init = classify_threshold(x, t0);
            let r = smlr(x, scoring_model(args, &cfg), &init, &cfg)?;
            let report = DetectReport {
                input: args.input.display().to_string(),
                n: x.len(),
                method: "smlr",
                mode,
                estimate: r.estimate,
                impulses: r.labels.impulse_count(),
                log_score: r.score.log_score,
                loops: r.loops,
                converged: r.converged,
                initial_threshold: Some(t0),
                final_threshold: None,
                threshold_trace: None,
                truth: None,
            };
            (report, r.labels)
        }
    };
    if let Some(path) = &args.out {
        write_labels(path, &labels)?;
    }
    let truth = match &args.truth {
        Some(path) => {
            let truth = read_labels(path)?;
            Some(TrialOutcome::score(&labels, &truth, report.loops, report.converged)?.into())
        }
        None => None,
    };
    Ok(DetectReport { truth, ..report })
}

pub fn detect(args: DetectArgs) -> Result<ExitCode> {
    let x = read_observations(&args.input)?;
    let report = run_detector(&args, &x)?;
    let p = report.estimate.params;
    println!("n                 {}", report.n);
    println!("method            {} ({})", report.method, report.mode);
    println!("rho_hat           {}", p.rho);
    println!("sigma1_sq_hat     {}", p.sigma1_sq);
    println!("sigma2_sq_hat     {}", p.sigma2_sq);
    if report.estimate.degenerate {
        println!("estimate          degenerate (empty background or impulse set)");
    }
    println!("impulses          {}", report.impulses);
    println!("loops             {}", report.loops);
    println!("converged         {}", report.converged);
    if let Some(t) = report.initial_threshold {
        println!("initial_threshold {t}");
    }
    if let Some(t) = report.final_threshold {
        println!("final_threshold   {t}");
    }
    println!("log_score         {}", report.log_score);
    if let Some(t) = &report.truth {
        let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| v.to_string());
        println!("false_alarms      {} of {}", t.false_alarms, t.background);
        println!("misses            {} of {}", t.misses, t.impulses);
        println!("type1_rate        {}", opt(t.type1_rate));
        println!("type2_rate        {}", opt(t.type2_rate));
    }
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report).expect("report is serializable") + "\n";
        write_file(path, json)?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Stats {
    n: usize,
    median: f64,
    mad: f64,
    sigma_hat: f64,
    /// `None` when every sample is zero.
    gini_abs: Option<f64>,
    three_sigma_t0: f64,
    ssi_coefficient: f64,
    ssi_t0: Option<f64>,
    /// `None` when the three-sigma threshold is zero.
    ssi_over_three_sigma: Option<f64>,
}

fn compute_stats(x: &ObservationSequence, ssi_coefficient: f64) -> Result<Stats> {
    let scale = mad(x)?;
    let magnitudes: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let g = match gini(&magnitudes) {
        Ok(g) => Some(g.value()),
        Err(Error::DegenerateInput(_)) => None,
        Err(e) => return Err(e),
    };
    let three_sigma = threshold_three_sigma(x)?;
    debug_assert_eq!(three_sigma, THREE_SIGMA_FACTOR * scale.mad);
    let ssi = g.map(|g| ssi_coefficient * g * scale.sigma_hat);
    Ok(Stats {
        n: x.len(),
        median: median(x)?,
        mad: scale.mad,
        sigma_hat: scale.sigma_hat,
        gini_abs: g,
        three_sigma_t0: three_sigma,
        ssi_coefficient,
        ssi_t0: ssi,
        ssi_over_three_sigma: ssi.filter(|_| three_sigma > 0.0).map(|s| s / three_sigma),
    })
}

pub fn stats(args: StatsArgs) -> Result<ExitCode> {
    let x = read_observations(&args.input)?;
    let s = compute_stats(&x, args.ssi_coefficient)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&s).expect("stats are serializable")
        );
        return Ok(ExitCode::SUCCESS);
    }
    let opt = |v: Option<f64>| v.map_or("undefined".to_string(), |v| v.to_string());
    println!("n                     {}", s.n);
    println!("median                {}", s.median);
    println!("mad                   {}", s.mad);
    println!("sigma_hat             {}", s.sigma_hat);
    println!("gini_abs              {}", opt(s.gini_abs));
    println!("three_sigma_t0        {}", s.three_sigma_t0);
    println!("ssi_t0                {}", opt(s.ssi_t0));
    println!("ssi_over_three_sigma  {}", opt(s.ssi_over_three_sigma));
    Ok(ExitCode::SUCCESS)
}

fn load_grid(name_or_path: &str) -> Result<bg_impulse::bench::GridSpec> {
    match builtin_config(name_or_path) {
        Some(spec) => Ok(spec),
        None => parse_config(name_or_path, &read_file(Path::new(name_or_path))?),
    }
}

fn summary_table(report: &ExperimentReport) -> String {
    let mut out = format!(
        "{:>9} {:>9} {:<9} {:>11} {:>11} {:>9} {:>6}\n",
        "sigma2_sq", "rho", "arm", "type1", "type2", "loops", "nonconv"
    );
    for c in &report.cells {
        let m = &c.metrics;
        let _ = writeln!(
            out,
            "{:>9e} {:>9e} {:<9} {:>11.4e} {:>11} {:>9.2} {:>6}",
            c.sigma2_sq,
            c.rho,
            c.arm,
            m.type1_rate,
            m.type2_rate.map_or("-".to_string(), |v| format!("{v:.4e}")),
            m.mean_loops,
            m.nonconverged_trials
        );
    }
    out
}

pub fn bench(args: BenchArgs) -> Result<ExitCode> {
    let mut spec = load_grid(&args.config)?;
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(seed) = args.seed {
        spec.base_seed = seed;
    }
    if let Some(arms) = args.arms {
        spec.arms = arms;
    }
    let progress = |p: Progress| {
        eprintln!(
            "[{}/{}] sigma2_sq={:e} rho={:e} arm={}",
            p.done, p.total, p.sigma2_sq, p.rho, p.arm
        );
    };
    let opts = RunOptions {
        workers: args.workers,
        progress: if args.quiet { None } else { Some(&progress) },
    };
    let report = run_grid(&spec, &opts)?;
    write_file(&args.out, report.to_json())?;
    if let Some(path) = &args.csv {
        write_file(path, report.to_csv())?;
    }
    print!("{}", summary_table(&report));
    if !args.quiet {
        eprintln!("wall time {:.1} s", report.wall_time_s);
    }
    Ok(ExitCode::SUCCESS)
}

pub fn compare(args: CompareArgs) -> Result<ExitCode> {
    let report_name = args.report.display().to_string();
    let report = ExperimentReport::from_json(&report_name, &read_file(&args.report)?)?;
    let reference = match &args.reference {
        Some(path) => ReferenceTables::parse(&path.display().to_string(), &read_file(path)?)?,
        None => ReferenceTables::shipped(),
    };
    let mut policy = TolerancePolicy::default();
    if let Some(v) = args.type2_relative {
        policy.type2_relative = v;
    }
    if let Some(v) = args.type2_standard_errors {
        policy.type2_standard_errors = v;
    }
    if let Some(v) = args.type1_factor {
        policy.type1_factor = v;
    }
    if let Some(v) = args.loops_factor {
        policy.loops_factor = v;
    }
    let cmp = compare_tables(&report, &reference, &policy);
    let text = match args.format {
        Format::Text => cmp.to_text(),
        Format::Csv => cmp.to_csv(),
        Format::Json => cmp.to_json(),
    };
    match &args.out {
        Some(path) => {
            write_file(path, text)?;
            eprintln!(
                "{} of {} cells within tolerance",
                cmp.passed(),
                cmp.rows.len()
            );
        }
        None => print!("{text}"),
    }
    if args.strict && !cmp.all_pass() {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
