//! Experiment orchestration: seeded trials, statistics utilities, reports.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::attack::finite_field::{run_fp_attack, FpAttackParams, FpTranscript};
use crate::attack::integer::{run_integer_attack, AttackTranscript, IntAttackParams};
use crate::attack::real::{run_real_attack, RealAttackParams};
use crate::error::{Error, Result};
use crate::family::MomentFamily;
use crate::victim::VictimConfig;

/// Wilson score interval for a binomial proportion.
pub fn binomial_ci(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials = 0".into()));
    }
    if successes > trials {
        return Err(Error::InvalidArgument(format!(
            "successes {successes} > trials {trials}"
        )));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let z = Normal::new(0.0, 1.0)
        .unwrap()
        .inverse_cdf(0.5 + confidence / 2.0);
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = ((center - spread) / denom).max(0.0);
    let hi = ((center + spread) / denom).min(1.0);
    Ok((lo, hi))
}

/// Deterministic substream seed from (base seed, role tag, trial index):
/// a splitmix64 pass over the mixed words. Swapping trial execution order
/// never changes any trial's stream.
pub fn derive_seed(base: u64, role: &str, trial: u64) -> u64 {
    let mut h = base ^ trial.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in role.bytes() {
        h = h.wrapping_add(b as u64);
        h = splitmix64(h);
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Which attack a config drives.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "attack", rename_all = "kebab-case")]
pub enum AttackSpec {
    Int { family_k: usize, params: IntAttackParams },
    Fp { params: FpAttackParams },
    Real { params: RealAttackParams },
}

/// One reproducible experiment: a victim, an attack, and a trial budget.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub victim: VictimConfig,
    #[serde(flatten)]
    pub attack: AttackSpec,
    pub trials: u64,
    pub base_seed: u64,
    /// Exit-code criterion: minimum fraction of trials with a certificate.
    pub min_success_rate: f64,
    /// Keep the per-round arrays in per-trial transcripts.
    #[serde(default)]
    pub full_transcripts: bool,
    /// When set, per-trial transcript JSON files land here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_dir: Option<PathBuf>,
    /// Default report destination for `bench` (a `--out` flag overrides).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::ConfigValidation("trials must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_success_rate) {
            return Err(Error::ConfigValidation(
                "min_success_rate must lie in [0, 1]".into(),
            ));
        }
        let ring = crate::linalg::Ring::parse(&self.victim.ring)?;
        match (&self.attack, ring) {
            (AttackSpec::Int { .. }, crate::linalg::Ring::Int) => {}
            (AttackSpec::Fp { .. }, crate::linalg::Ring::Fp(_)) => {}
            (AttackSpec::Real { .. }, crate::linalg::Ring::Real) => {}
            (_, r) => {
                return Err(Error::ConfigValidation(format!(
                    "attack kind does not match victim ring {}",
                    r.name()
                )))
            }
        }
        self.victim.build().map(|_| ())
    }
}

/// Per-trial outcome row; aggregates are recomputable from these.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub seed: u64,
    pub certificate: bool,
    pub query_count: u64,
    pub rounds: u64,
    pub accused: Vec<usize>,
    /// Against analyst truth, when available (sampling victims).
    pub accused_precision: Option<f64>,
    pub accused_recall: Option<f64>,
    pub false_accusations: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub outcomes: Vec<TrialOutcome>,
    pub success_rate: f64,
    pub mean_queries: f64,
    pub median_queries: f64,
    pub queries_ci: (f64, f64),
}

/// Run all trials (in parallel, deterministic per-trial streams) and build
/// the report. Wall-clock timings go to stderr only, so report bytes depend
/// only on the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let family = match &cfg.attack {
        AttackSpec::Int { family_k, .. } => Some(crate::family::build_family(*family_k)?),
        _ => None,
    };
    if let Some(dir) = &cfg.transcript_dir {
        std::fs::create_dir_all(dir)?;
    }
    let results: Result<Vec<(TrialOutcome, String)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial(cfg, family.as_ref(), trial))
        .collect();
    let mut results = results?;
    results.sort_by_key(|(o, _)| o.trial);
    let mut outcomes = Vec::with_capacity(results.len());
    for (outcome, transcript) in results {
        if let Some(dir) = &cfg.transcript_dir {
            let path = dir.join(format!("trial_{:04}.json", outcome.trial));
            std::fs::write(path, transcript.as_bytes())?;
        }
        outcomes.push(outcome);
    }
    let report = summarize(cfg.clone(), outcomes)?;
    Ok(report)
}

fn run_trial(
    cfg: &ExperimentConfig,
    family: Option<&MomentFamily>,
    trial: u64,
) -> Result<(TrialOutcome, String)> {
    let started = std::time::Instant::now();
    let victim_seed = derive_seed(cfg.base_seed, "victim", trial);
    let attack_seed = derive_seed(cfg.base_seed, "attacker", trial);
    let mut victim_cfg = cfg.victim.clone();
    victim_cfg.seed = victim_seed;
    let mut oracle = victim_cfg.build()?;
    let hidden: Option<Vec<usize>> = oracle.analyst_hidden_set().map(|h| h.to_vec());

    let (certificate, accused, rounds, query_count, transcript) = match &cfg.attack {
        AttackSpec::Int { params, .. } => {
            let fam = family.expect("family built for int attacks");
            let mut params = params.clone();
            params.seed = attack_seed;
            params.store_rounds = cfg.full_transcripts;
            let t: AttackTranscript = run_integer_attack(&mut oracle, fam, &params)?;
            (
                t.certificate.is_some(),
                t.accused.clone(),
                t.rounds_run,
                t.query_count,
                serde_json::to_string_pretty(&t)?,
            )
        }
        AttackSpec::Fp { params } => {
            let mut params = params.clone();
            params.seed = attack_seed;
            let t: FpTranscript = run_fp_attack(&mut oracle, &params)?;
            (
                t.certificate.is_some(),
                t.independent_set.clone(),
                t.outer_iterations,
                t.query_count,
                serde_json::to_string_pretty(&t)?,
            )
        }
        AttackSpec::Real { params } => {
            let mut params = params.clone();
            params.seed = attack_seed;
            params.store_rounds = cfg.full_transcripts;
            let t = run_real_attack(&mut oracle, &params)?;
            (
                t.certificate.is_some(),
                t.accused.clone(),
                t.rounds_run,
                t.query_count,
                serde_json::to_string_pretty(&t)?,
            )
        }
    };

    let (precision, recall, false_acc) = match &hidden {
        Some(h) => {
            let hit = accused.iter().filter(|a| h.contains(a)).count();
            let precision = if accused.is_empty() {
                1.0
            } else {
                hit as f64 / accused.len() as f64
            };
            let recall = if h.is_empty() {
                1.0
            } else {
                hit as f64 / h.len() as f64
            };
            let false_acc = (accused.len() - hit) as u64;
            (Some(precision), Some(recall), Some(false_acc))
        }
        None => (None, None, None),
    };
    eprintln!(
        "trial {trial}: certificate={certificate} queries={query_count} rounds={rounds} wall={:?}",
        started.elapsed()
    );
    Ok((
        TrialOutcome {
            trial,
            seed: attack_seed,
            certificate,
            query_count,
            rounds,
            accused,
            accused_precision: precision,
            accused_recall: recall,
            false_accusations: false_acc,
        },
        transcript,
    ))
}

fn summarize(config: ExperimentConfig, outcomes: Vec<TrialOutcome>) -> Result<ExperimentReport> {
    let n = outcomes.len() as f64;
    let successes = outcomes.iter().filter(|o| o.certificate).count() as u64;
    let mut queries: Vec<u64> = outcomes.iter().map(|o| o.query_count).collect();
    queries.sort_unstable();
    let mean = queries.iter().sum::<u64>() as f64 / n;
    let median = if queries.is_empty() {
        0.0
    } else if queries.len() % 2 == 0 {
        (queries[queries.len() / 2 - 1] + queries[queries.len() / 2]) as f64 / 2.0
    } else {
        queries[queries.len() / 2] as f64
    };
    let ci = binomial_ci(successes, outcomes.len() as u64, 0.95)?;
    Ok(ExperimentReport {
        config,
        success_rate: successes as f64 / n,
        mean_queries: mean,
        median_queries: median,
        queries_ci: ci,
        outcomes,
    })
}

/// Write the report as stable JSON plus a flat per-trial CSV next to it.
pub fn write_report(report: &ExperimentReport, path: &Path) -> Result<PathBuf> {
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(path, json.as_bytes())?;
    let csv_path = path.with_extension("csv");
    let mut csv = std::fs::File::create(&csv_path)?;
    writeln!(
        csv,
        "trial,seed,certificate,query_count,rounds,accused,precision,recall,false_accusations"
    )?;
    for o in &report.outcomes {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            o.trial,
            o.seed,
            o.certificate,
            o.query_count,
            o.rounds,
            o.accused.len(),
            o.accused_precision.map_or(String::new(), |v| v.to_string()),
            o.accused_recall.map_or(String::new(), |v| v.to_string()),
            o.false_accusations.map_or(String::new(), |v| v.to_string()),
        )?;
    }
    Ok(csv_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_boundaries() {
        let (lo, _) = binomial_ci(0, 100, 0.99).unwrap();
        assert_eq!(lo, 0.0);
        let (_, hi) = binomial_ci(100, 100, 0.99).unwrap();
        assert_eq!(hi, 1.0);
        assert!(binomial_ci(1, 0, 0.95).is_err());
        assert!(binomial_ci(5, 4, 0.95).is_err());
    }

    #[test]
    fn wilson_central_interval() {
        let (lo, hi) = binomial_ci(50, 100, 0.95).unwrap();
        assert!(lo < 0.5 && 0.5 < hi);
        let width = hi - lo;
        assert!((width - 0.19).abs() < 0.01, "width {width}");
    }

    #[test]
    fn seed_derivation_separates_roles_and_trials() {
        let a = derive_seed(7, "victim", 0);
        let b = derive_seed(7, "attacker", 0);
        let c = derive_seed(7, "victim", 1);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, "victim", 0));
    }

    fn small_int_config() -> ExperimentConfig {
        let fam = crate::family::build_family(2).unwrap();
        let beta = fam.beta_f64();
        let n = 128usize;
        let r = 2usize;
        let nf = n as f64;
        let mut params = crate::attack::integer::IntAttackParams::new(n, r, 8.0);
        params.c_k = 0.05;
        ExperimentConfig {
            victim: crate::victim::VictimConfig {
                kind: "sampling".into(),
                n,
                r: Some(r),
                levels: None,
                buckets: None,
                ring: "int".into(),
                theta_lo: 0.05 * nf,
                theta_hi: (nf - 4.0 * r as f64) * (1.0 - beta)
                    - 4.0 * (nf * beta * (1.0 - beta)).sqrt(),
                seed: 0,
                answer: None,
            },
            attack: AttackSpec::Int {
                family_k: 2,
                params,
            },
            trials: 3,
            base_seed: 99,
            min_success_rate: 0.5,
            full_transcripts: false,
            transcript_dir: None,
            report_path: None,
        }
    }

    #[test]
    fn experiment_is_deterministic_and_aggregates_recompute() {
        let cfg = small_int_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        // aggregates equal an independent recomputation from the rows
        let succ = a.outcomes.iter().filter(|o| o.certificate).count() as f64;
        assert_eq!(a.success_rate, succ / a.outcomes.len() as f64);
        let mean =
            a.outcomes.iter().map(|o| o.query_count).sum::<u64>() as f64 / a.outcomes.len() as f64;
        assert_eq!(a.mean_queries, mean);
        // each trial's sub-streams derive from base seed and index alone
        for o in &a.outcomes {
            assert_eq!(o.seed, derive_seed(cfg.base_seed, "attacker", o.trial));
        }
    }

    #[test]
    fn constant_victim_single_trial_succeeds() {
        let mut cfg = small_int_config();
        cfg.victim.kind = "constant".into();
        cfg.victim.r = None;
        cfg.victim.answer = Some(-1);
        cfg.trials = 1;
        let report = run_experiment(&cfg).unwrap();
        assert_eq!(report.success_rate, 1.0);
        assert!(report.outcomes[0].certificate);
    }

    #[test]
    fn config_validation_rejects_ring_mismatch() {
        let mut cfg = small_int_config();
        cfg.victim.ring = "real".into();
        assert!(matches!(
            cfg.validate(),
            Err(crate::error::Error::ConfigValidation(_))
        ));
        let mut cfg = small_int_config();
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
    }
}
