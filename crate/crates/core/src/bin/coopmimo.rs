use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use coopmimo::asym::{self, cobf, comp, scbf, TauMax};
use coopmimo::closed_forms;
use coopmimo::harness::{self, check, output, CsvSink, ExperimentSpec};
use coopmimo::model::{self, Problem};
use coopmimo::par::Execution;
use coopmimo::rng::{Purpose, Substreams};
use coopmimo::{Error, Result, Scheme};

#[derive(Parser)]
#[command(name = "coopmimo", version, about = "Multi-cell downlink precoding under three levels of BS cooperation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo experiment to CSV.
    Run(Common),
    /// Deterministic-equivalent quantities for one drop, as JSON.
    Asym(Common),
    /// Self-consistency suite: duality gaps and oracle equivalences.
    Check(Common),
    /// Two-cell, one-UE-per-cell report.
    Casestudy {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(short = 'n', long = "antennas", default_value_t = 4)]
        antennas: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Scbf,
    Cobf,
    Comp,
    All,
}

#[derive(Args)]
struct Common {
    /// Experiment spec (JSON); `{}` gives the default profile.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => harness::read_spec(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(seed) = self.seed {
            spec.network.seed = seed;
        }
        if let Some(trials) = self.trials {
            spec.trials = trials;
        }
        if let Some(s) = self.scheme {
            spec.schemes = match s {
                SchemeArg::Scbf => vec![Scheme::Scbf],
                SchemeArg::Cobf => vec![Scheme::Cobf],
                SchemeArg::Comp => vec![Scheme::Comp],
                SchemeArg::All => Scheme::ALL.to_vec(),
            };
        }
        if let Some(out) = &self.out {
            spec.output = Some(out.clone());
        }
        spec.validate()?;
        Ok(spec)
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Io { .. } => EXIT_CONFIG,
                _ => EXIT_NUMERIC,
            })
        }
    }
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Run(c) => run(&c),
        Command::Asym(c) => asym_report(&c),
        Command::Check(c) => run_check(&c),
        Command::Casestudy { alpha, gamma, antennas } => casestudy(alpha, gamma, antennas),
    }
}

fn run(c: &Common) -> Result<u8> {
    let spec = c.spec()?;
    let exec = Execution::from_threads(c.threads);
    let report = match &spec.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::Io {
                    path: dir.to_path_buf(),
                    source: e,
                })?;
            }
            fs::write(output::sidecar_path(path), spec.to_json()).map_err(|e| Error::Io {
                path: output::sidecar_path(path),
                source: e,
            })?;
            let mut sink = CsvSink::create(path)?;
            harness::run_experiment(&spec, exec, |rows| sink.write_rows(rows))?
        }
        None => {
            let mut sink = CsvSink::new(io::stdout().lock())?;
            harness::run_experiment(&spec, exec, |rows| sink.write_rows(rows))?
        }
    };
    eprintln!(
        "{} feasible, {} infeasible, {} numeric failures",
        report.feasible, report.infeasible, report.numeric_failures
    );
    Ok(match (report.feasible, report.numeric_failures) {
        (0, 0) => EXIT_INFEASIBLE,
        (0, _) => EXIT_NUMERIC,
        _ => 0,
    })
}

fn tau_json(t: &[TauMax]) -> serde_json::Value {
    t.iter()
        .map(|t| json!({ "value": t.value, "infeasible_at_zero": t.infeasible_at_zero }))
        .collect()
}

fn asym_report(c: &Common) -> Result<u8> {
    let spec = c.spec()?;
    let net = &spec.network;
    let geometry = model::build_geometry(net, &Substreams::new(net.seed, 0, Purpose::Drop))?;
    let gains = model::large_scale_gains(&geometry, &net.path_loss());
    let p = Problem::new(gains, net.targets()?, net.tau_tensor()?, net.antennas, net.noise_power_w)?;
    let mut schemes = Vec::new();
    for &scheme in &spec.schemes {
        let entry = match asym::evaluate(scheme, &p) {
            Ok(s) => {
                let tau_max = match scheme {
                    Scheme::Scbf => Ok(scbf::tau_max(&p.gains, &p.gamma, p.antennas)),
                    Scheme::Cobf => cobf::tau_max(&p.gains, &p.gamma, p.antennas),
                    Scheme::Comp => comp::tau_max(&p),
                };
                json!({
                    "scheme": scheme,
                    "feasible": s.feasible,
                    "spectral_radius": s.spectral_radius,
                    "lambda_bar": s.lambda_bar,
                    "dual_objective_w": s.dual_objective,
                    "powers": s.powers.as_ref().map(|pw| json!({
                        "total_w": pw.total,
                        "per_bs_w": pw.per_bs,
                        "per_user": pw.per_user,
                    })),
                    "tau_max": tau_max.ok().map(|t| tau_json(&t)),
                })
            }
            Err(e) => json!({ "scheme": scheme, "feasible": false, "error": e.to_string() }),
        };
        schemes.push(entry);
    }
    let report = json!({ "network": net, "mrt_limit_n_times_power_w": {
        "scbf": closed_forms::mrt_limit_powers(Scheme::Scbf, &p).ok(),
        "cobf": closed_forms::mrt_limit_powers(Scheme::Cobf, &p).ok(),
        "comp": closed_forms::mrt_limit_powers(Scheme::Comp, &p).ok(),
    }, "schemes": schemes });
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    match &spec.output {
        Some(path) => fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?,
        None => println!("{text}"),
    }
    Ok(0)
}

fn run_check(c: &Common) -> Result<u8> {
    let spec = c.spec()?;
    let results = check::run_checks(spec.network.seed)?;
    let mut out = io::stdout().lock();
    let mut failed = 0;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!r.passed);
        let _ = writeln!(out, "{tag} {}: {}", r.name, r.detail);
    }
    let _ = writeln!(out, "{}/{} checks passed", results.len() - failed, results.len());
    Ok(if failed == 0 { 0 } else { EXIT_NUMERIC })
}

fn casestudy(alpha: f64, gamma: f64, antennas: usize) -> Result<u8> {
    let r = closed_forms::two_cell_case_study(alpha, gamma, antennas, 1.0)?;
    let pair = |t: &[TauMax; 2]| format!("[{:.6}, {:.6}]", t[0].value, t[1].value);
    println!("two cells, one UE each: alpha = {alpha}, gamma = {gamma}, N = {antennas}");
    println!("eta                        [{:.6}, {:.6}]", r.eta1, r.eta2);
    println!("ScBF multipliers           [{:.6}, {:.6}]", r.lambda_scbf[0], r.lambda_scbf[1]);
    println!("CoBF multipliers           [{:.6}, {:.6}]", r.lambda_cobf[0], r.lambda_cobf[1]);
    println!("CoMP multipliers           [{:.6}, {:.6}]", r.lambda_comp[0], r.lambda_comp[1]);
    println!("ScBF tau_max (closed form) {}", pair(&r.tau_max_scbf));
    println!("ScBF tau_max (condition)   {}", pair(&r.tau_max_scbf_condition));
    println!("CoBF tau_max               {}", pair(&r.tau_max_cobf));
    println!("CoMP tau_max               {}", pair(&r.tau_max_comp));
    println!(
        "orderings: cobf lambda {}, comp lambda {}, scbf tau {}, cobf tau {}, comp tau {}",
        r.cobf_lambda_ordered(),
        r.comp_lambda_ordered(),
        r.scbf_tau_ordered(),
        r.cobf_tau_ordered(),
        r.comp_tau_ordered()
    );
    Ok(0)
}
