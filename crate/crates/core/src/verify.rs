//! Seeded self-check of the branch-and-bound search against exhaustive
//! enumeration, the relaxation sandwich, and structural properties of the
//! search tree.

use std::collections::HashMap;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{draw_channel, stream_rng, SystemConfig};
use crate::precoders::{bnb_search, exhaustive, mddt_mapped, BnbOptions, NodeLog};

/// Absolute tolerance for comparing margins.
pub const EPSILON_TOL: f64 = 1e-9;

const VERIFY_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub cases: Vec<SystemConfig>,
    pub instances: usize,
    pub master_seed: u64,
    pub bnb: BnbOptions,
    pub exhaustive_budget: u128,
    /// Also rerun each instance with pruning disabled.
    pub check_no_prune: bool,
    /// Worker threads; `None` uses the global pool. Not serialized.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl VerifyConfig {
    /// Every combination of the given grids.
    pub fn grid(
        users: usize,
        antennas: &[usize],
        alpha_s: &[usize],
        alpha_x: &[usize],
        instances: usize,
        master_seed: u64,
    ) -> Result<Self> {
        let mut cases = Vec::new();
        for &m in antennas {
            for &ax in alpha_x {
                for &a_s in alpha_s {
                    cases.push(SystemConfig::new(users, m, a_s, ax)?);
                }
            }
        }
        Ok(Self {
            cases,
            instances,
            master_seed,
            bnb: BnbOptions::default(),
            exhaustive_budget: crate::precoders::DEFAULT_EXHAUSTIVE_BUDGET,
            check_no_prune: true,
            threads: None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub users: usize,
    pub antennas: usize,
    pub alpha_s: usize,
    pub alpha_x: usize,
    pub instances: usize,
    /// Instances whose optimal margin differs from exhaustive search.
    pub epsilon_mismatches: usize,
    /// Instances whose returned indices differ from exhaustive search.
    pub index_mismatches: usize,
    /// Instances violating continuous ≥ exhaustive ≥ mapped.
    pub sandwich_violations: usize,
    /// Child lower bounds below their parent's.
    pub lb_monotonicity_violations: usize,
    /// Incumbent traces that ever increase.
    pub trace_violations: usize,
    /// Instances where disabling pruning changes the optimizer.
    pub no_prune_mismatches: usize,
    /// Largest `|ε_bnb − ε_exhaustive|`.
    pub max_epsilon_gap: f64,
    pub mean_branches: f64,
    /// Instances where a precoder returned an error.
    pub failures: usize,
}

impl CaseReport {
    pub fn optimality_passed(&self) -> bool {
        self.failures == 0 && self.epsilon_mismatches == 0 && self.index_mismatches == 0
    }

    pub fn sandwich_passed(&self) -> bool {
        self.failures == 0 && self.sandwich_violations == 0
    }

    pub fn properties_passed(&self) -> bool {
        self.failures == 0
            && self.lb_monotonicity_violations == 0
            && self.trace_violations == 0
            && self.no_prune_mismatches == 0
    }

    pub fn passed(&self) -> bool {
        self.optimality_passed() && self.sandwich_passed() && self.properties_passed()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub cases: Vec<CaseReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.cases.iter().all(CaseReport::passed)
    }
}

#[derive(Debug, Default)]
struct InstanceOutcome {
    failed: bool,
    epsilon_mismatch: bool,
    index_mismatch: bool,
    sandwich_violation: bool,
    lb_violations: usize,
    trace_violation: bool,
    no_prune_mismatch: bool,
    epsilon_gap: f64,
    branches: u64,
}

/// Children whose lower bound falls below the parent's; level-one nodes are
/// compared with the root relaxation.
pub fn lb_monotonicity_violations(log: &NodeLog) -> usize {
    let by_prefix: HashMap<&[usize], f64> = log
        .lower_bounds
        .iter()
        .map(|(p, lb)| (p.as_slice(), *lb))
        .collect();
    log.lower_bounds
        .iter()
        .filter(|(prefix, lb)| {
            let parent = if prefix.len() == 1 {
                Some(log.root_lb)
            } else {
                by_prefix.get(&prefix[..prefix.len() - 1]).copied()
            };
            parent.is_some_and(|p| *lb < p - EPSILON_TOL)
        })
        .count()
}

fn check_instance(
    cfg: &VerifyConfig,
    case_idx: usize,
    sys: &SystemConfig,
    instance: usize,
) -> InstanceOutcome {
    let stream = (VERIFY_STREAM << 56) | ((case_idx as u64) << 32) | instance as u64;
    let mut rng = stream_rng(cfg.master_seed, stream);
    let h = draw_channel(sys.users, sys.antennas, &mut rng);
    let data = sys.data_alphabet();
    let s: Vec<Complex64> = (0..sys.users)
        .map(|_| data.point(rng.random_range(0..sys.alpha_s)))
        .collect();

    let mut out = InstanceOutcome::default();
    let mut log = NodeLog::default();
    let (Ok(bnb), Ok(oracle), Ok(relax)) = (
        bnb_search(&h, &s, sys, &cfg.bnb, Some(&mut log)),
        exhaustive(&h, &s, sys, cfg.exhaustive_budget),
        mddt_mapped(&h, &s, sys, &cfg.bnb.lp),
    ) else {
        out.failed = true;
        return out;
    };

    out.branches = bnb.stats.branches_visited;
    out.epsilon_gap = (bnb.epsilon - oracle.epsilon).abs();
    out.epsilon_mismatch = out.epsilon_gap > EPSILON_TOL;
    out.index_mismatch = bnb.indices != oracle.indices;
    out.sandwich_violation = relax.continuous.epsilon < oracle.epsilon - EPSILON_TOL
        || oracle.epsilon < relax.mapped.epsilon - EPSILON_TOL;
    out.lb_violations = lb_monotonicity_violations(&log);
    out.trace_violation = bnb
        .stats
        .best_bound_trace
        .windows(2)
        .any(|w| w[1].1 > w[0].1);
    if cfg.check_no_prune {
        let open = BnbOptions {
            prune_tol: f64::INFINITY,
            ..cfg.bnb
        };
        match bnb_search(&h, &s, sys, &open, None) {
            Ok(full) => out.no_prune_mismatch = full.indices != bnb.indices,
            Err(_) => out.failed = true,
        }
    }
    out
}

fn run_case(cfg: &VerifyConfig, case_idx: usize) -> CaseReport {
    let sys = cfg.cases[case_idx];
    let outcomes: Vec<InstanceOutcome> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| check_instance(cfg, case_idx, &sys, i))
        .collect();
    let mut r = CaseReport {
        users: sys.users,
        antennas: sys.antennas,
        alpha_s: sys.alpha_s,
        alpha_x: sys.alpha_x,
        instances: cfg.instances,
        ..CaseReport::default()
    };
    let mut branches = 0u64;
    for o in &outcomes {
        if o.failed {
            r.failures += 1;
            continue;
        }
        r.epsilon_mismatches += usize::from(o.epsilon_mismatch);
        r.index_mismatches += usize::from(o.index_mismatch);
        r.sandwich_violations += usize::from(o.sandwich_violation);
        r.lb_monotonicity_violations += o.lb_violations;
        r.trace_violations += usize::from(o.trace_violation);
        r.no_prune_mismatches += usize::from(o.no_prune_mismatch);
        r.max_epsilon_gap = r.max_epsilon_gap.max(o.epsilon_gap);
        branches += o.branches;
    }
    let ok = cfg.instances - r.failures;
    r.mean_branches = branches as f64 / ok.max(1) as f64;
    r
}

pub fn run_verify(cfg: &VerifyConfig) -> Result<VerifyReport> {
    if cfg.cases.is_empty() || cfg.instances == 0 {
        return Err(Error::InvalidConfig(
            "verification needs at least one case and instance".into(),
        ));
    }
    if cfg.threads == Some(0) {
        return Err(Error::InvalidConfig("thread count must be positive".into()));
    }
    for sys in &cfg.cases {
        sys.validate()?;
        let needed = (sys.alpha_x as u128)
            .checked_pow(sys.antennas as u32)
            .unwrap_or(u128::MAX);
        if needed > cfg.exhaustive_budget {
            return Err(Error::BudgetExceeded {
                needed,
                budget: cfg.exhaustive_budget,
            });
        }
    }
    let job = || (0..cfg.cases.len()).map(|c| run_case(cfg, c)).collect();
    let cases = match cfg.threads {
        None => job(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?
            .install(job),
    };
    Ok(VerifyReport { cases })
}
