//! Solve-rate benchmark: random in-limit joints, forward kinematics, then IK
//! back to the pose, reporting the share of exact solutions and timings.

use std::fmt::Write as _;
use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::arm::{JointVector, KinematicChain, Pose};
use crate::ik::{solve, solve_two_stage, IkConfig, IkError, IkResult};

/// Context printed under every report; these are third-party solvers and are
/// not rerun here.
pub const REFERENCE_FOOTER: &str =
    "reference (third-party solvers, not rerun): TRAC_IK 99.8%, KDL 96%";

pub const CSV_HEADER: &str = "config,n_cases,n_exact,solve_rate_pct,time_mean_s,time_p99_s,err_pos_mean_m";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("case count must be at least 1")]
    NoCases,
    #[error("at least one solver config is required")]
    NoConfigs,
    #[error(transparent)]
    Ik(#[from] IkError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCase {
    pub q_true: JointVector,
    pub target: Pose,
}

/// Draws `n` joint vectors uniformly within the limits and records their
/// forward-kinematics poses.
pub fn generate_cases(chain: &KinematicChain, n: usize, rng_seed: u64) -> Result<Vec<BenchCase>, BenchError> {
    if n == 0 {
        return Err(BenchError::NoCases);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    (0..n)
        .map(|_| {
            let q: Vec<f64> = chain
                .joints()
                .iter()
                .map(|j| rng.random_range(j.limit_lo..=j.limit_hi))
                .collect();
            let target = chain.forward_kinematics(&q).map_err(IkError::from)?;
            Ok(BenchCase { q_true: JointVector(q), target })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seeding {
    /// All-zero joints.
    Zero,
    /// The generating joints; the solve is trivially exact.
    Truth,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverSetup {
    Single(IkConfig),
    TwoStage { loose: IkConfig, tight: IkConfig },
}

impl SolverSetup {
    /// Tolerances that count a case as solved.
    pub fn success_config(&self) -> &IkConfig {
        match self {
            SolverSetup::Single(c) => c,
            SolverSetup::TwoStage { tight, .. } => tight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub name: String,
    pub setup: SolverSetup,
    pub seeding: Seeding,
}

impl BenchConfig {
    pub fn new(name: impl Into<String>, setup: SolverSetup) -> Self {
        Self {
            name: name.into(),
            setup,
            seeding: Seeding::Zero,
        }
    }

    pub fn seeded(mut self, seeding: Seeding) -> Self {
        self.seeding = seeding;
        self
    }

    /// Runs one case. The restart stream is derived from the config seed and
    /// the case index so results do not depend on execution order.
    pub fn run_case(&self, chain: &KinematicChain, index: usize, case: &BenchCase) -> Result<IkResult, IkError> {
        let seed = match self.seeding {
            Seeding::Zero => JointVector::zeros(chain.dof()),
            Seeding::Truth => case.q_true.clone(),
        };
        let stream = |c: &IkConfig| c.clone().with_seed(case_stream(c.rng_seed, index));
        match &self.setup {
            SolverSetup::Single(c) => solve(chain, &case.target, &seed, &stream(c)),
            SolverSetup::TwoStage { loose, tight } => {
                solve_two_stage(chain, &case.target, &seed, &stream(loose), &stream(tight))
            }
        }
    }
}

fn case_stream(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The shipped comparison set: single tight stage, two-stage, and the
/// truth-seeded sanity row.
pub fn default_configs() -> Vec<BenchConfig> {
    vec![
        BenchConfig::new("single_tight", SolverSetup::Single(IkConfig::tight())),
        BenchConfig::new(
            "two_stage",
            SolverSetup::TwoStage {
                loose: IkConfig::loose(),
                tight: IkConfig::tight(),
            },
        ),
        BenchConfig::new("cheat", SolverSetup::Single(IkConfig::tight())).seeded(Seeding::Truth),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config_name: String,
    pub n_cases: usize,
    pub n_exact: usize,
    /// Percent.
    pub solve_rate: f64,
    pub time_mean: f64,
    pub time_p99: f64,
    pub err_pos_mean: f64,
}

/// Per-case outcome of one benchmark config, indexed like the case list.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub report: BenchReport,
    pub results: Vec<IkResult>,
}

impl BenchRun {
    /// Solve rate re-judged at other tolerances.
    pub fn solve_rate_at(&self, pos_tol: f64, ori_tol: f64) -> f64 {
        let n = self
            .results
            .iter()
            .filter(|r| r.pos_err <= pos_tol && r.ori_err <= ori_tol)
            .count();
        100.0 * n as f64 / self.results.len() as f64
    }
}

fn summarize(name: &str, results: &[IkResult]) -> BenchReport {
    let n = results.len();
    let n_exact = results.iter().filter(|r| r.is_exact()).count();
    let mut times: Vec<f64> = results.iter().map(|r| r.elapsed).collect();
    times.sort_by(f64::total_cmp);
    let p99_idx = ((0.99 * n as f64).ceil() as usize).clamp(1, n) - 1;
    BenchReport {
        config_name: name.to_string(),
        n_cases: n,
        n_exact,
        solve_rate: 100.0 * n_exact as f64 / n as f64,
        time_mean: times.iter().sum::<f64>() / n as f64,
        time_p99: times[p99_idx],
        err_pos_mean: results.iter().map(|r| r.pos_err).sum::<f64>() / n as f64,
    }
}

/// Runs every config over every case. Cases are solved in parallel; results
/// are collected by index.
pub fn run_benchmark_detailed(
    chain: &KinematicChain,
    cases: &[BenchCase],
    configs: &[BenchConfig],
) -> Result<Vec<BenchRun>, BenchError> {
    if cases.is_empty() {
        return Err(BenchError::NoCases);
    }
    if configs.is_empty() {
        return Err(BenchError::NoConfigs);
    }
    configs
        .iter()
        .map(|cfg| {
            let results = cases
                .par_iter()
                .enumerate()
                .map(|(i, case)| cfg.run_case(chain, i, case))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(BenchRun {
                report: summarize(&cfg.name, &results),
                results,
            })
        })
        .collect()
}

pub fn run_benchmark(
    chain: &KinematicChain,
    cases: &[BenchCase],
    configs: &[BenchConfig],
) -> Result<Vec<BenchReport>, BenchError> {
    Ok(run_benchmark_detailed(chain, cases, configs)?
        .into_iter()
        .map(|r| r.report)
        .collect())
}

pub fn format_csv(reports: &[BenchReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{:.4},{:.9},{:.9},{:.9}",
            r.config_name, r.n_cases, r.n_exact, r.solve_rate, r.time_mean, r.time_p99, r.err_pos_mean
        );
    }
    out
}

/// Human-readable summary, one line per config plus the reference footer.
pub fn format_summary(reports: &[BenchReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let _ = writeln!(
            out,
            "{:<14} solve rate {:>7.3}% ({}/{})  mean {:.3} ms  p99 {:.3} ms  mean pos err {:.2e} m",
            r.config_name,
            r.solve_rate,
            r.n_exact,
            r.n_cases,
            r.time_mean * 1e3,
            r.time_p99 * 1e3,
            r.err_pos_mean
        );
    }
    out.push_str(REFERENCE_FOOTER);
    out.push('\n');
    out
}
