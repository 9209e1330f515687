//! Command-line front end for transport semigroup spectral analysis.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error,
//! 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use shiftspec_core::classify::write_classification_csv;
use shiftspec_core::periodic::{
    annular_hull_set, candidate_spectrum_per, rest_spectrum, smt_counterexample_report,
    write_periodic_csv,
};
use shiftspec_core::report::{
    growth_block, periodic_data, run_classify, run_spectrum, run_verify, to_json_pretty,
    write_growth_csv, write_norm_csv, write_spectrum_dat,
};
use shiftspec_core::spectral_set::RealSet;
use shiftspec_core::{PipelineError, ProblemConfig, RunConfig};

#[derive(Parser)]
#[command(
    name = "shiftspec",
    version,
    about = "Spectral analysis of weighted-shift transport semigroups along characteristics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Problem definition JSON ({"builtin": ...} or {"custom": ...}).
    #[arg(long)]
    config: PathBuf,
    /// RNG seed; identical config and seed give byte-identical reports.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for reports and tables.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Number of phase-space sample points.
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Exit-time integration horizon.
    #[arg(long, default_value_t = 40.0)]
    horizon: f64,
    /// Largest time in the t grid.
    #[arg(long, default_value_t = 10.0)]
    t_max: f64,
    /// Number of t-grid points.
    #[arg(long, default_value_t = 20)]
    t_steps: usize,
    /// Lattice truncation for periodic candidate spectra.
    #[arg(long, default_value_t = 5)]
    k_max: i64,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, PipelineError> {
        let text = fs::read_to_string(&self.config).map_err(|e| {
            PipelineError::Config(shiftspec_core::config::ConfigError::Json(format!(
                "cannot read {}: {e}",
                self.config.display()
            )))
        })?;
        let problem = ProblemConfig::from_json(&text)?;
        let mut cfg = RunConfig::new(problem);
        cfg.seed = self.seed;
        cfg.samples = self.samples;
        cfg.horizon = self.horizon;
        cfg.t_max = self.t_max;
        cfg.t_steps = self.t_steps;
        cfg.k_max = self.k_max;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Classify sampled phase-space points by exit-time finiteness.
    Classify(RunArgs),
    /// Full report: classification, growth bounds, composed spectra.
    Spectrum(RunArgs),
    /// Growth constants and the norm-slope type estimate.
    Gamma(RunArgs),
    /// Prime periods, orbit averages and the periodic candidate spectrum.
    Periodic(RunArgs),
    /// Run the residual verification suites; nonzero exit on failure.
    Verify(RunArgs),
    /// Show how the pointwise exponential image of a lattice spectrum
    /// fails to fill the circle at finite truncation.
    DemoSmtFailure {
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 100)]
        k_max: i64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn ensure_out(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> std::io::Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn write_meta(dir: &Path, config: &RunConfig) -> std::io::Result<()> {
    let now_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    // timestamps stay out of the deterministic report body
    let meta = json!({
        "generated_unix_ms": now_ms,
        "config_sha256": config.config_hash(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_file(dir, "meta.json", to_json_pretty(&meta).as_bytes())?;
    Ok(())
}

fn cmd_classify(args: &RunArgs) -> Result<(), PipelineError> {
    let config = args.load()?;
    let (problem, stats, summary) = run_classify(&config)?;
    ensure_out(&args.out)?;
    let mut csv = Vec::new();
    write_classification_csv(&stats, problem.dimension(), &mut csv)?;
    write_file(&args.out, "classification.csv", &csv)?;
    write_file(
        &args.out,
        "classify_summary.json",
        to_json_pretty(&summary).as_bytes(),
    )?;
    write_meta(&args.out, &config)?;
    println!(
        "classified {} points: {} omega1, {} omega2, {} rest, {} periodic, {} infinite, {} censored",
        summary.total,
        summary.counts.omega1,
        summary.counts.omega2,
        summary.counts.rest,
        summary.counts.periodic,
        summary.counts.infinite,
        summary.counts.censored,
    );
    println!("wrote {}", args.out.join("classification.csv").display());
    Ok(())
}

fn cmd_spectrum(args: &RunArgs) -> Result<(), PipelineError> {
    let config = args.load()?;
    let report = run_spectrum(&config)?;
    ensure_out(&args.out)?;
    write_file(&args.out, "report.json", to_json_pretty(&report).as_bytes())?;
    let mut norm_csv = Vec::new();
    write_norm_csv(&report.growth.norm_vs_t, &mut norm_csv)?;
    write_file(&args.out, "norm_vs_t.csv", &norm_csv)?;
    let mut dat = Vec::new();
    write_spectrum_dat(&report.spectra, &mut dat)?;
    write_file(&args.out, "spectrum_points.dat", &dat)?;
    write_meta(&args.out, &config)?;
    match (report.growth.gamma_min, report.growth.nilpotent) {
        (Some(g), _) => println!("gamma = {g:.6}"),
        (None, true) => println!("gamma = +inf (nilpotent escaping component)"),
        (None, false) => println!("gamma = n/a (no escaping component sampled)"),
    }
    println!(
        "report: {} generator and {} semigroup component sets; verification {}",
        report.spectra.generator_components.len(),
        report.spectra.semigroup_components.len(),
        if report.verification.passed {
            "passed"
        } else {
            "FAILED"
        },
    );
    println!("wrote {}", args.out.join("report.json").display());
    Ok(())
}

fn cmd_gamma(args: &RunArgs) -> Result<(), PipelineError> {
    let config = args.load()?;
    let (problem, stats, _) = run_classify(&config)?;
    let growth = growth_block(&config, &problem, &stats)?;
    ensure_out(&args.out)?;
    write_file(
        &args.out,
        "gamma_report.json",
        to_json_pretty(&growth).as_bytes(),
    )?;
    if let Some(est) = &growth.gamma1 {
        let mut csv = Vec::new();
        write_growth_csv(est, &mut csv)?;
        write_file(&args.out, "gamma1.csv", &csv)?;
    }
    if let Some(est) = &growth.gamma2 {
        let mut csv = Vec::new();
        write_growth_csv(est, &mut csv)?;
        write_file(&args.out, "gamma2.csv", &csv)?;
    }
    let mut norm_csv = Vec::new();
    write_norm_csv(&growth.norm_vs_t, &mut norm_csv)?;
    write_file(&args.out, "norm_vs_t.csv", &norm_csv)?;
    write_meta(&args.out, &config)?;
    println!(
        "gamma1 = {}, gamma2 = {}, omega0_hat = {}",
        growth
            .gamma1
            .as_ref()
            .map(|g| format!("{:.6}", g.gamma_hat))
            .unwrap_or_else(|| "n/a".into()),
        growth
            .gamma2
            .as_ref()
            .map(|g| format!("{:.6}", g.gamma_hat))
            .unwrap_or_else(|| "n/a".into()),
        growth
            .omega0_hat
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "n/a".into()),
    );
    Ok(())
}

fn cmd_periodic(args: &RunArgs) -> Result<(), PipelineError> {
    let config = args.load()?;
    let (problem, stats, _) = run_classify(&config)?;
    let data = periodic_data(&config, &problem, &stats)?;
    let candidate = candidate_spectrum_per(&data, config.k_max, None, None);

    // rest-point spectrum and the rotational hull of the candidate reals
    let rest_points: Vec<&shiftspec_core::ClassifiedPoint> = stats
        .points
        .iter()
        .filter(|p| matches!(p.class, shiftspec_core::PhaseClass::Omega3Rest))
        .collect();
    let (rest_generator, rest_semigroup) =
        rest_spectrum(&problem, &rest_points, config.t_max, None, None);
    let mut reals: Vec<f64> = match &candidate.set.region {
        shiftspec_core::Region::Discrete { points } => points.iter().map(|(re, _)| *re).collect(),
        _ => Vec::new(),
    };
    reals.sort_by(f64::total_cmp);
    reals.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    let annuli = annular_hull_set(&RealSet::Points(reals), config.t_max);

    let report = json!({
        "candidate_generator_spectrum": candidate,
        "k_max": config.k_max,
        "covered_band": candidate.covered_band,
        "rest_spectrum": {
            "generator": rest_generator,
            "semigroup": rest_semigroup,
        },
        "annuli": annuli,
        "t": config.t_max,
    });

    ensure_out(&args.out)?;
    let mut csv = Vec::new();
    write_periodic_csv(&data, problem.dimension(), &mut csv)?;
    write_file(&args.out, "periodic_points.csv", &csv)?;
    write_file(
        &args.out,
        "periodic_spectrum.json",
        to_json_pretty(&report).as_bytes(),
    )?;
    write_meta(&args.out, &config)?;
    println!(
        "{} periodic points, candidate spectrum truncated at |k| <= {} covering |Im| < {:.4}",
        data.len(),
        candidate.k_max,
        candidate.covered_band,
    );
    Ok(())
}

fn cmd_verify(args: &RunArgs) -> Result<bool, PipelineError> {
    let config = args.load()?;
    let report = run_verify(&config)?;
    ensure_out(&args.out)?;
    write_file(
        &args.out,
        "verify_report.json",
        to_json_pretty(&report).as_bytes(),
    )?;
    write_meta(&args.out, &config)?;
    println!(
        "{:<28} {:>12} {:>12}  status",
        "check", "residual", "tolerance"
    );
    for check in &report.checks {
        let status = if !check.passed {
            "FAIL"
        } else if check.warning {
            "warn"
        } else {
            "ok"
        };
        println!(
            "{:<28} {:>12.4e} {:>12.4e}  {status}  ({})",
            check.name, check.residual, check.tolerance, check.detail
        );
    }
    println!(
        "verification {}",
        if report.passed { "passed" } else { "FAILED" }
    );
    Ok(report.passed)
}

fn cmd_demo_smt(t: f64, k_max: i64, out: &Path) -> Result<(), PipelineError> {
    let report = smt_counterexample_report(t, k_max);
    ensure_out(out)?;
    write_file(out, "smt_demo.json", to_json_pretty(&report).as_bytes())?;
    println!(
        "t = {t}, |k| <= {k_max}: {} distinct exponential images, max circular gap {:.6}",
        report.distinct_count, report.max_gap
    );
    if report.exp_image_proper_subset {
        println!(
            "the pointwise exponential image is a proper subset of the circle; \
             only its rotational closure fills it"
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Result<bool, PipelineError> = match &cli.command {
        Command::Classify(args) => cmd_classify(args).map(|()| true),
        Command::Spectrum(args) => cmd_spectrum(args).map(|()| true),
        Command::Gamma(args) => cmd_gamma(args).map(|()| true),
        Command::Periodic(args) => cmd_periodic(args).map(|()| true),
        Command::Verify(args) => cmd_verify(args),
        Command::DemoSmtFailure { t, k_max, out } => cmd_demo_smt(*t, *k_max, out).map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
