use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use trilemma_core::bounded::{self, BoundedMethod};
use trilemma_core::diagonal::{self, PatchPlan};
use trilemma_core::exact::{self, BinaryVerdict, SpecFile};
use trilemma_core::harness::{self, SuiteStatus, TrilemmaConfig};
use trilemma_core::proxy::{self, SupportFile};
use trilemma_core::rational::{self, parse_rational, Rational};
use trilemma_core::region::{Domain, RegionOptions};
use trilemma_core::symmetry;
use trilemma_core::{Error, Network};

const PASS: u8 = 0;
const ASSERTION_FAILED: u8 = 1;
const INPUT_ERROR: u8 = 2;
const RESOURCE_CAP: u8 = 3;

#[derive(Parser)]
#[command(name = "trilemma", version, about = "Exact, bounded and proxy verification of small ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Full,
    BoxExact,
    Ibp,
    Proxy,
}

#[derive(Subcommand)]
enum Command {
    /// Check a linear output spec; exits 0 when certified (or accepted by the proxy).
    Verify {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        method: Method,
        /// Support file for the proxy method.
        #[arg(long)]
        support: Option<PathBuf>,
        #[arg(long, value_parser = parse_tau)]
        tau: Option<Rational>,
        #[arg(long)]
        region_cap: Option<usize>,
    },
    /// Build a function-identical partner and check it exactly.
    Partner {
        net: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Patch two 1-D networks along a plan; with a spec, run the full demonstration.
    Patch {
        net1: PathBuf,
        net2: PathBuf,
        plan: PathBuf,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_parser = parse_tau)]
        tau: Option<Rational>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the three tracks and write the report.
    Trilemma {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn parse_tau(s: &str) -> Result<Rational, String> {
    parse_rational(s).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(Error::from)
}

fn print(value: &impl serde::Serialize) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn verify(
    net: &Path,
    spec: &Path,
    method: Method,
    support: Option<&Path>,
    tau: Option<Rational>,
    region_cap: Option<usize>,
) -> Result<u8, Error> {
    let net = Network::load(net)?;
    let file = SpecFile::from_json(&read(spec)?)?;
    let spec = file.spec();
    let dom: Domain = file.domain.resolve(net.input_dim())?;
    let opts = region_cap.map_or_else(RegionOptions::default, RegionOptions::with_cap);
    let verdict = match method {
        Method::Full => exact::verify_full_with(&net, &spec, &dom, opts)?,
        Method::BoxExact => bounded::verify_bounded_with(&net, &spec, &dom, BoundedMethod::ExactOnBox, opts)?,
        Method::Ibp => bounded::verify_bounded_with(&net, &spec, &dom, BoundedMethod::Ibp, opts)?,
        Method::Proxy => {
            let path = support.ok_or_else(|| Error::InvalidValue("--method proxy needs --support".into()))?;
            let sf = SupportFile::from_json(&read(path)?)?;
            let tau = tau.or(sf.tau.clone()).unwrap_or_else(rational::one);
            let result = proxy::verify_proxy(&net, &spec, &sf.support()?, &tau)?;
            print(&result)?;
            return Ok(if result.verdict == BinaryVerdict::Aligned { PASS } else { ASSERTION_FAILED });
        }
    };
    print(&json!({ "verdict": verdict, "binary": verdict.to_binary() }))?;
    Ok(if verdict.is_certified() { PASS } else { ASSERTION_FAILED })
}

fn partner(net: &Path, seed: u64, out: Option<&Path>) -> Result<u8, Error> {
    let net = Network::load(net)?;
    let (partner, transforms) = symmetry::random_symmetric_partner(&net, seed)?;
    let (equivalent, counterexample) = exact::equivalence_check(&net, &partner, &Domain::full(net.input_dim()))?;
    if let Some(out) = out {
        partner.save(out)?;
    }
    print(&json!({
        "partner": partner,
        "transforms": transforms,
        "equivalent": equivalent,
        "counterexample": counterexample.map(|w| w.iter().map(rational::format_rational).collect::<Vec<_>>()),
        "objective": [
            symmetry::synthetic_alignment_objective(&net).ok(),
            symmetry::synthetic_alignment_objective(&partner).ok(),
        ],
    }))?;
    Ok(if equivalent { PASS } else { ASSERTION_FAILED })
}

fn patch(net1: &Path, net2: &Path, plan: &Path, spec: Option<&Path>, tau: Option<Rational>, out: Option<&Path>) -> Result<u8, Error> {
    let theta1 = Network::load(net1)?;
    let theta2 = Network::load(net2)?;
    let plan = PatchPlan::from_json(&read(plan)?)?;
    match spec {
        Some(spec) => {
            let spec = SpecFile::from_json(&read(spec)?)?.spec();
            let tau = tau.unwrap_or_else(rational::one);
            let report = diagonal::build_unsound_pair(&theta1, &theta2, &plan, &spec, &tau, RegionOptions::default())?;
            if let Some(out) = out {
                report.patched.save(out)?;
            }
            print(&report)?;
            Ok(if report.passed() { PASS } else { ASSERTION_FAILED })
        }
        None => {
            let full = Domain::full(1);
            let opts = RegionOptions::default();
            let f1 = diagonal::pwl_from_network_1d(&theta1, &full, opts)?;
            let f2 = diagonal::pwl_from_network_1d(&theta2, &full, opts)?;
            let patched = diagonal::compile_pwl_to_network(&diagonal::patch(&f1, &f2, &plan)?);
            if let Some(out) = out {
                patched.save(out)?;
            }
            print(&patched)?;
            Ok(PASS)
        }
    }
}

fn trilemma(config: &Path, output_dir: Option<PathBuf>) -> Result<u8, Error> {
    let mut cfg = TrilemmaConfig::load(config)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    let report = harness::run_trilemma_suite(&cfg)?;
    harness::write_report(&report, &cfg.output_dir)?;
    for row in &report.summary {
        println!(
            "{} -> fails {}: {} ({})",
            row.held,
            row.fails,
            if row.verified { "verified" } else { "NOT verified" },
            row.evidence
        );
    }
    println!("report written to {}", cfg.output_dir.display());
    Ok(match report.status() {
        SuiteStatus::Passed => PASS,
        SuiteStatus::AssertionFailed => ASSERTION_FAILED,
        SuiteStatus::ResourceCap => RESOURCE_CAP,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify {
            net,
            spec,
            method,
            support,
            tau,
            region_cap,
        } => verify(&net, &spec, method, support.as_deref(), tau, region_cap),
        Command::Partner { net, seed, out } => partner(&net, seed, out.as_deref()),
        Command::Patch {
            net1,
            net2,
            plan,
            spec,
            tau,
            out,
        } => patch(&net1, &net2, &plan, spec.as_deref(), tau, out.as_deref()),
        Command::Trilemma { config, output_dir } => trilemma(&config, output_dir),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::RegionCap { .. } | Error::OracleCap { .. } => RESOURCE_CAP,
                _ => INPUT_ERROR,
            })
        }
    }
}
