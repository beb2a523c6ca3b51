use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use l0_attack::attack::finite_field::{run_fp_attack, FpAttackParams};
use l0_attack::attack::integer::{run_integer_attack, IntAttackParams};
use l0_attack::attack::real::{run_real_attack, RealAttackParams};
use l0_attack::error::Result;
use l0_attack::family::{build_family_with, MomentFamily};
use l0_attack::harness::{run_experiment, write_report, ExperimentConfig};
use l0_attack::linalg::RingMatrix;
use l0_attack::preprocess::{decompose, Decomposition, WitnessSource};
use l0_attack::victim::VictimConfig;

/// Adaptive attacks on linear sketches for l0 gap-norm estimation.
#[derive(Parser)]
#[command(name = "l0-attack", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build or verify the hard query-distribution family.
    Family {
        #[command(subcommand)]
        sub: FamilyCmd,
    },
    /// Dense/sparse decomposition of a sketching matrix.
    Preprocess {
        /// Matrix JSON: {"ring", "rows", "cols", "data"}.
        #[arg(long)]
        matrix: PathBuf,
        /// Heaviness parameter (>= 1).
        #[arg(long)]
        s: f64,
        /// Witness-search candidate budget per column.
        #[arg(long, default_value_t = 200)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integer attack against a victim config.
    AttackInt {
        #[arg(long)]
        victim: PathBuf,
        /// Family JSON from `family build`.
        #[arg(long)]
        family: PathBuf,
        /// Attack params JSON (IntAttackParams).
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-field attack against a victim config.
    AttackFp {
        #[arg(long)]
        victim: PathBuf,
        /// Field prime.
        #[arg(long)]
        p: u64,
        /// Target independent-set size (assumed rank bound).
        #[arg(long)]
        r: usize,
        /// Optional params JSON overriding the derived defaults.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Real-valued attack against a victim config.
    AttackReal {
        #[arg(long)]
        victim: PathBuf,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded multi-trial experiment from a config file.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Report path (overrides the config's report_path); a flat CSV
        /// lands next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FamilyCmd {
    /// Construct the family for a moment order.
    Build {
        #[arg(long = "K")]
        k: usize,
        /// Support radius override (defaults to c_R * K^2).
        #[arg(long = "R")]
        r: Option<usize>,
        #[arg(long, default_value_t = 4)]
        c_r: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check every exact invariant of a family file; nonzero exit on any
    /// violation.
    Verify { family: PathBuf },
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json<T: serde::Serialize>(path: &PathBuf, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Family { sub } => match sub {
            FamilyCmd::Build { k, r, c_r, out } => {
                let fam = build_family_with(k, r, c_r)?;
                write_json(&out, &fam)?;
                eprintln!(
                    "family K={k} R={} alpha={:.6} beta={:.6} -> {}",
                    fam.support_radius,
                    fam.alpha_f64(),
                    fam.beta_f64(),
                    out.display()
                );
                Ok(true)
            }
            FamilyCmd::Verify { family } => {
                let fam: MomentFamily = read_json(&family)?;
                match fam.verify() {
                    Ok(()) => {
                        eprintln!("family ok");
                        Ok(true)
                    }
                    Err(e) => {
                        eprintln!("family invalid: {e}");
                        Ok(false)
                    }
                }
            }
        },
        Cmd::Preprocess {
            matrix,
            s,
            budget,
            seed,
            out,
        } => {
            let a: RingMatrix = read_json(&matrix)?;
            let decomp: Decomposition = decompose(&a, s, WitnessSource::Search { budget, seed })?;
            write_json(&out, &decomp)?;
            eprintln!(
                "significant columns: {:?} (bound exceeded: {})",
                decomp.significant, decomp.bound_exceeded
            );
            Ok(true)
        }
        Cmd::AttackInt {
            victim,
            family,
            params,
            seed,
            out,
        } => {
            let victim_cfg: VictimConfig = read_json(&victim)?;
            let fam: MomentFamily = read_json(&family)?;
            let mut params: IntAttackParams = read_json(&params)?;
            params.seed = seed;
            let mut oracle = victim_cfg.build()?;
            let transcript = run_integer_attack(&mut oracle, &fam, &params)?;
            write_json(&out, &transcript)?;
            eprintln!(
                "certificate: {}, accused: {:?}, queries: {}",
                transcript.certificate.is_some(),
                transcript.accused,
                transcript.query_count
            );
            Ok(transcript.certificate.is_some())
        }
        Cmd::AttackFp {
            victim,
            p,
            r,
            params,
            seed,
            out,
        } => {
            let victim_cfg: VictimConfig = read_json(&victim)?;
            let mut params: FpAttackParams = match params {
                Some(path) => read_json(&path)?,
                None => FpAttackParams::new(p, victim_cfg.n, r),
            };
            params.p = p;
            params.r = r;
            params.seed = seed;
            let mut oracle = victim_cfg.build()?;
            let transcript = run_fp_attack(&mut oracle, &params)?;
            write_json(&out, &transcript)?;
            eprintln!(
                "certificate: {}, |T| = {}, queries: {}",
                transcript.certificate.is_some(),
                transcript.independent_set.len(),
                transcript.query_count
            );
            Ok(transcript.certificate.is_some())
        }
        Cmd::AttackReal {
            victim,
            params,
            seed,
            out,
        } => {
            let victim_cfg: VictimConfig = read_json(&victim)?;
            let mut params: RealAttackParams = read_json(&params)?;
            params.seed = seed;
            let mut oracle = victim_cfg.build()?;
            let transcript = run_real_attack(&mut oracle, &params)?;
            write_json(&out, &transcript)?;
            eprintln!(
                "certificate: {}, accused: {:?}, queries: {}",
                transcript.certificate.is_some(),
                transcript.accused,
                transcript.query_count
            );
            Ok(transcript.certificate.is_some())
        }
        Cmd::Bench { config, out } => {
            let cfg: ExperimentConfig = read_json(&config)?;
            let out = out
                .or_else(|| cfg.report_path.clone())
                .ok_or_else(|| l0_attack::Error::ConfigValidation(
                    "no report path: pass --out or set report_path in the config".into(),
                ))?;
            let report = run_experiment(&cfg)?;
            let csv = write_report(&report, &out)?;
            eprintln!(
                "success rate {:.3} over {} trials -> {} (+ {})",
                report.success_rate,
                report.outcomes.len(),
                out.display(),
                csv.display()
            );
            Ok(report.success_rate >= cfg.min_success_rate)
        }
    }
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("L0_ATTACK_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
