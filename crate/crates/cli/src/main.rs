mod config;
mod output;
mod tables;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use iqc_observer::analysis::{validate_certificate, ValidationConfig};
use iqc_observer::damping::{gamma_actual, optimize_alpha, DampingObjective, DampingSearchConfig};
use iqc_observer::lmi::SolveStatus;
use iqc_observer::sim::{monte_carlo_linear, monte_carlo_quaternion, LinearInit};
use iqc_observer::synthesis::{synthesize, Formulation, SynthesisResult};
use iqc_observer::{Error, Mat};
use serde_json::json;

use config::{ErrorModelArg, FormulationArg, MultiplierArg, PlantKind, RunConfig};
use output::{csv_header, matrix_rows, write_dense, write_gain_csv, write_json};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

/// Failure carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    err: anyhow::Error,
}

type CmdResult = Result<(), Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_CONFIG, err: e.into() }
}

/// Map library errors onto the exit-code contract.
fn classify(e: anyhow::Error) -> Failure {
    let code = match e.downcast_ref::<Error>() {
        Some(Error::InvalidConfig(_) | Error::DimensionMismatch { .. } | Error::WellPosedness { .. }) => EXIT_CONFIG,
        Some(Error::Infeasible(_)) => EXIT_INFEASIBLE,
        Some(_) => EXIT_SOLVER,
        None if e.downcast_ref::<std::io::Error>().is_some() => EXIT_SOLVER,
        None => EXIT_CONFIG,
    };
    Failure { code, err: e }
}

trait OrFail<T> {
    fn or_fail(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFail<T> for Result<T, E> {
    fn or_fail(self) -> Result<T, Failure> {
        self.map_err(|e| classify(e.into()))
    }
}

/// Robust H∞ observer synthesis with IQC multipliers.
///
/// Exit codes: 0 success, 2 configuration error, 3 solver/numerical
/// failure, 4 infeasible design or refuted certificate.
#[derive(Parser, Debug)]
#[command(name = "iqcobs", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a gain, verify it, and write result files.
    Synthesize(CommonArgs),
    /// Validate a gain against frozen-Δ H∞ norms.
    Validate(ValidateArgs),
    /// Reproduce a benchmark table (1: quaternion, 2: mass-spring-damper).
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo simulation of the estimation error.
    Montecarlo(MonteCarloArgs),
    /// Search the artificial damping α.
    Damping(DampingArgs),
}

#[derive(Args, Debug, Clone)]
struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    plant: Option<PlantKind>,
    #[arg(long)]
    plant_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    formulation: Option<FormulationArg>,
    #[arg(long, value_enum)]
    multiplier: Option<MultiplierArg>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    allow_undamped: bool,
    #[arg(long)]
    eps_g: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `result.json` or headerless gain CSV.
    #[arg(long)]
    gain_from: PathBuf,
    /// Reference bound γ.
    #[arg(long)]
    gamma: f64,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    alpha_shift: Option<f64>,
    #[arg(long, value_enum)]
    error_model: Option<ErrorModelArg>,
}

#[derive(Args, Debug)]
struct MonteCarloArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Gain to simulate; synthesized from the configuration when omitted.
    #[arg(long)]
    gain_from: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    no_noise: bool,
}

#[derive(Args, Debug)]
struct DampingArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    tol_alpha: Option<f64>,
    /// Minimize the certified bound instead of the sampled actual norm.
    #[arg(long)]
    objective_cert: bool,
}

fn resolve(args: &CommonArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(args.config.as_deref()).map_err(config_err)?;
    if let Some(p) = args.plant {
        cfg.plant = p;
    }
    if let Some(p) = &args.plant_file {
        cfg.plant_file = Some(p.clone());
    }
    if let Some(f) = args.formulation {
        cfg.formulation = f;
    }
    if let Some(m) = args.multiplier {
        cfg.multiplier = m;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = Some(a);
    }
    cfg.allow_undamped |= args.allow_undamped;
    if let Some(e) = args.eps_g {
        cfg.eps_g = e;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
        cfg.sim.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn config_json(cfg: &RunConfig) -> serde_json::Value {
    let mut v = serde_json::to_value(cfg).unwrap_or_default();
    v["alpha"] = json!(cfg.resolved_alpha());
    v
}

fn prepare_out(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(|e| Failure { code: EXIT_SOLVER, err: e })
}

fn num(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

fn result_json(cfg: &RunConfig, r: &SynthesisResult, wall: f64) -> serde_json::Value {
    let ver = r.verification.as_ref();
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": config_json(cfg),
        "formulation": r.formulation,
        "alpha": r.alpha,
        "status": r.status,
        "gamma_syn": num(r.gamma_syn),
        "gamma_ver": ver.map_or(serde_json::Value::Null, |v| num(v.gamma_ver)),
        "verification_status": ver.map(|v| v.status),
        "gain": if r.is_feasible() { json!(matrix_rows(&r.gain)) } else { serde_json::Value::Null },
        "residuals": r.residuals.map(|res| json!({"r1": res.r1, "r2_top": res.r2_top, "r3": res.r3})),
        "cond_g22_bot": r.residuals.map(|res| res.cond_g22_bot),
        "exactness_gap": r.exactness_gap,
        "solver": r.solver,
        "verification_solver": ver.map(|v| &v.solver),
        "wall_time": wall,
    })
}

fn write_certificate(path: &Path, r: &SynthesisResult) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    use std::io::Write;
    writeln!(f, "# iqcobs {} certificate ({} design)", env!("CARGO_PKG_VERSION"), r.formulation)?;
    if let Some(c) = &r.certificate {
        write_dense(&mut f, "P", &c.p)?;
        for (name, m) in [("Lambda", &c.lambda), ("G_mult", &c.g_mult), ("slack_G", &c.slack)] {
            if let Some(m) = m {
                write_dense(&mut f, name, m)?;
            }
        }
    }
    if let Some(c) = r.verification.as_ref().and_then(|v| v.certificate.as_ref()) {
        write_dense(&mut f, "P_ver", &c.p)?;
        if let Some(l) = &c.lambda {
            write_dense(&mut f, "Lambda_ver", l)?;
        }
        if let Some(g) = &c.g_mult {
            write_dense(&mut f, "G_mult_ver", g)?;
        }
    }
    f.flush()
}

fn cmd_synthesize(args: &CommonArgs) -> CmdResult {
    let cfg = resolve(args)?;
    let plant = cfg.build_plant().map_err(classify)?;
    let scfg = cfg.synthesis_config(&plant).map_err(config_err)?;
    let start = Instant::now();
    let result = synthesize(&plant, &scfg).or_fail()?;
    let wall = start.elapsed().as_secs_f64();

    prepare_out(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("result.json"), &result_json(&cfg, &result, wall)).or_fail()?;
    write_certificate(&cfg.out_dir.join("certificate.txt"), &result).or_fail()?;
    if result.is_feasible() {
        write_gain_csv(&cfg.out_dir.join("gain.csv"), &result.gain).or_fail()?;
    }

    let ver = result
        .verification
        .as_ref()
        .map_or("not run".to_string(), |v| format!("{} (γ_ver = {:.6})", v.status, v.gamma_ver));
    println!(
        "{} {} α = {}: {} γ_syn = {:.6}; verification: {}",
        scfg.formulation,
        scfg.multiplier.label(),
        scfg.alpha,
        result.status,
        result.gamma_syn,
        ver
    );
    if let Some(res) = result.residuals {
        println!("residuals r1 = {:.3e}, r3 = {:.3e}, cond(G22bot) = {:.3e}", res.r1, res.r3, res.cond_g22_bot);
    }
    match result.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::Infeasible => Err(Failure { code: EXIT_INFEASIBLE, err: anyhow!("synthesis infeasible") }),
        SolveStatus::Unknown => Err(Failure { code: EXIT_SOLVER, err: anyhow!("solver did not converge") }),
    }
}

fn cmd_validate(args: &ValidateArgs) -> CmdResult {
    let mut cfg = resolve(&args.common)?;
    if let Some(s) = args.samples {
        cfg.samples = s;
    }
    if let Some(a) = args.alpha_shift {
        cfg.validation.alpha_shift = Some(a);
    }
    if let Some(m) = args.error_model {
        cfg.validation.error_model = m;
    }
    let plant = cfg.build_plant().map_err(classify)?;
    let gain = output::read_gain(&args.gain_from).map_err(config_err)?;
    let vcfg = ValidationConfig {
        n_samples: cfg.samples,
        seed: cfg.seed,
        alpha_shift: cfg.resolved_alpha_shift(),
        error_model: cfg.validation.error_model.into(),
        ..Default::default()
    };
    let report = validate_certificate(&plant, &gain, args.gamma, &vcfg).or_fail()?;

    prepare_out(&cfg.out_dir)?;
    let mut buf = csv_header("validate", &config_json(&cfg)).into_bytes();
    buf.push(b'\n');
    report.write_csv(&mut buf).or_fail()?;
    fs::write(cfg.out_dir.join("validation.csv"), buf).or_fail()?;
    let mut summary = report.summary_json();
    summary["version"] = json!(env!("CARGO_PKG_VERSION"));
    summary["run_config"] = config_json(&cfg);
    summary["worst"] = num(report.worst);
    write_json(&cfg.out_dir.join("validation.json"), &summary).or_fail()?;

    println!(
        "{} samples, worst H∞ norm {:.6} vs γ = {}: {}",
        report.samples.len(),
        report.worst,
        args.gamma,
        if report.pass { "pass" } else { "FAIL" }
    );
    if report.pass {
        Ok(())
    } else {
        Err(Failure { code: EXIT_INFEASIBLE, err: anyhow!("certificate refuted by sampling") })
    }
}

fn cmd_table(which: u8, out: Option<&Path>) -> CmdResult {
    let rows = tables::run_table(which).or_fail()?;
    print!("{}", tables::render(&rows));
    if let Some(dir) = out {
        prepare_out(dir)?;
        let path = dir.join(format!("table{which}.csv"));
        let mut w = csv::Writer::from_path(&path).or_fail()?;
        w.write_record([
            "row", "formulation", "multiplier", "alpha", "status", "gamma_syn", "verification", "gamma_ver", "ref_syn",
            "ref_ver", "flag", "note",
        ])
        .or_fail()?;
        for r in &rows {
            w.write_record([
                r.label.clone(),
                r.formulation.clone(),
                r.multiplier.clone(),
                output::fmt_g17(r.alpha),
                r.status.clone(),
                output::fmt_g17(r.gamma_syn),
                r.verification.clone(),
                output::fmt_g17(r.gamma_ver),
                r.ref_syn.clone(),
                r.ref_ver.clone(),
                r.flag.to_string(),
                r.note.clone(),
            ])
            .or_fail()?;
        }
        w.flush().or_fail()?;
    }
    Ok(())
}

fn gain_for(cfg: &RunConfig, plant: &iqc_observer::LftPlant, from: Option<&Path>) -> Result<Mat, Failure> {
    if let Some(p) = from {
        return output::read_gain(p).map_err(config_err);
    }
    let scfg = cfg.synthesis_config(plant).map_err(config_err)?;
    let r = synthesize(plant, &scfg).or_fail()?;
    if !r.is_feasible() {
        return Err(Failure { code: EXIT_INFEASIBLE, err: anyhow!("synthesis for the simulated gain is {}", r.status) });
    }
    Ok(r.gain)
}

fn cmd_montecarlo(args: &MonteCarloArgs) -> CmdResult {
    let mut cfg = resolve(&args.common)?;
    if let Some(r) = args.runs {
        cfg.sim.n_runs = r;
    }
    if let Some(t) = args.t_final {
        cfg.sim.t_final = t;
    }
    if let Some(dt) = args.dt {
        cfg.sim.dt = dt;
    }
    cfg.sim.noise_on &= !args.no_noise;
    let plant = cfg.build_plant().map_err(classify)?;
    let gain = gain_for(&cfg, &plant, args.gain_from.as_deref())?;

    let (stats, drift) = match cfg.plant {
        PlantKind::Quaternion => {
            let (s, d) = monte_carlo_quaternion(&cfg.sim, &cfg.quaternion, &gain).or_fail()?;
            (s, Some(d))
        }
        _ => {
            let n = plant.n();
            let mut x0 = vec![0.0; n];
            x0[0] = 1.0;
            let init = LinearInit { x0, e0: vec![0.5; n] };
            (monte_carlo_linear(&plant, &gain, &init, &cfg.sim).or_fail()?, None)
        }
    };
    prepare_out(&cfg.out_dir)?;
    let mut buf = csv_header("montecarlo", &config_json(&cfg)).into_bytes();
    buf.push(b'\n');
    stats.write_csv(&mut buf).or_fail()?;
    fs::write(cfg.out_dir.join("montecarlo.csv"), buf).or_fail()?;
    write_json(
        &cfg.out_dir.join("montecarlo.json"),
        &json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config": config_json(&cfg),
            "gain": matrix_rows(&gain),
            "final_norms": stats.final_norms,
            "max_norm_drift": drift,
        }),
    )
    .or_fail()?;
    let last = stats.times.len() - 1;
    println!(
        "{} runs: ‖e(T)‖ p5 = {:.4e}, p50 = {:.4e}, p95 = {:.4e}{}",
        cfg.sim.n_runs,
        stats.p5[last],
        stats.p50[last],
        stats.p95[last],
        drift.map_or(String::new(), |d| format!(", max |‖q̂‖ − 1| = {d:.2e}"))
    );
    Ok(())
}

fn cmd_damping(args: &DampingArgs) -> CmdResult {
    let mut cfg = resolve(&args.common)?;
    if let Some(a) = args.alpha_max {
        cfg.damping.alpha_max = a;
    }
    if let Some(t) = args.tol_alpha {
        cfg.damping.tol_alpha = t;
    }
    if args.objective_cert {
        cfg.damping.objective = DampingObjective::GammaCert;
    }
    let plant = cfg.build_plant().map_err(classify)?;
    if cfg.formulation == FormulationArg::Nominal {
        return Err(config_err(anyhow!("damping search needs an IQC formulation (blkdiag or finsler)")));
    }
    let base = cfg.synthesis_config(&plant).map_err(config_err)?;
    let search = DampingSearchConfig {
        alpha_max: cfg.damping.alpha_max,
        tol_alpha: cfg.damping.tol_alpha,
        objective: cfg.damping.objective,
    };
    let model = cfg.damping.error_model.into();
    let synth = |alpha: f64| {
        let mut c = base.clone();
        c.alpha = alpha;
        c.allow_undamped = true;
        synthesize(&plant, &c)
    };
    let eval = |_alpha: f64, r: &SynthesisResult| gamma_actual(&plant, &r.gain, cfg.damping.n_random, cfg.seed, model);
    let outcome = optimize_alpha(synth, eval, &search).or_fail()?;

    prepare_out(&cfg.out_dir)?;
    let mut buf = csv_header("damping", &config_json(&cfg)).into_bytes();
    buf.push(b'\n');
    outcome.write_trace_csv(&mut buf).or_fail()?;
    fs::write(cfg.out_dir.join("damping_trace.csv"), buf).or_fail()?;
    write_json(
        &cfg.out_dir.join("damping.json"),
        &json!({
            "version": env!("CARGO_PKG_VERSION"),
            "config": config_json(&cfg),
            "formulation": Formulation::from(cfg.formulation),
            "alpha_min": outcome.alpha_min,
            "alpha_star": outcome.alpha_star,
            "objective_star": num(outcome.objective_star),
            "gamma_actual_star": num(outcome.gamma_actual_star),
        }),
    )
    .or_fail()?;
    println!(
        "α_min = {:.4}, α* = {:.4}, objective = {:.6}, γ_actual = {:.6} ({} evaluations)",
        outcome.alpha_min,
        outcome.alpha_star,
        outcome.objective_star,
        outcome.gamma_actual_star,
        outcome.trace.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Synthesize(a) => cmd_synthesize(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Table { which, out } => cmd_table(*which, out.as_deref()),
        Command::Montecarlo(a) => cmd_montecarlo(a),
        Command::Damping(a) => cmd_damping(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
