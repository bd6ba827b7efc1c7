//! Precoders: LP-relaxation branch-and-bound (optimal), relax-and-map,
//! the continuous relaxation itself, phase-quantized zero-forcing, and
//! exhaustive enumeration as the reference.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{build_full_lp, build_subproblem, deinterleave, MarginEvaluator};
use crate::lpsolve::{solve, LpTolerances};
use crate::model::{Channel, SystemConfig};

/// Which precoder produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderKind {
    Bnb,
    MddtMapped,
    ContinuousMmddt,
    ZfQuantized,
    Exhaustive,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 5] = [
        PrecoderKind::Bnb,
        PrecoderKind::MddtMapped,
        PrecoderKind::ContinuousMmddt,
        PrecoderKind::ZfQuantized,
        PrecoderKind::Exhaustive,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            PrecoderKind::Bnb => "bnb",
            PrecoderKind::MddtMapped => "mddt_mapped",
            PrecoderKind::ContinuousMmddt => "continuous_mmddt",
            PrecoderKind::ZfQuantized => "zf_quantized",
            PrecoderKind::Exhaustive => "exhaustive",
        }
    }

    /// Whether the output is restricted to the transmit alphabet.
    pub fn is_discrete(&self) -> bool {
        !matches!(self, PrecoderKind::ContinuousMmddt)
    }
}

impl std::str::FromStr for PrecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PrecoderKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown precoder '{s}'")))
    }
}

impl std::fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Subproblem solves plus final-level leaf evaluations.
    pub branches_visited: u64,
    /// Nodes at which a conditioned subproblem was solved.
    pub subproblem_solves: u64,
    /// Full candidates whose margin was evaluated exactly.
    pub leaf_evaluations: u64,
    /// All LP invocations, including the root relaxation.
    pub lp_solves: u64,
    /// Nodes discarded by the bound comparison.
    pub pruned: u64,
    /// `|𝒢_d|` for `d = 1..M`.
    pub level_sizes: Vec<u64>,
    /// `(node counter, incumbent)` each time the incumbent improves.
    pub best_bound_trace: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodeResult {
    pub x: Vec<Complex64>,
    /// Transmit-alphabet indices for discrete precoders.
    pub indices: Option<Vec<usize>>,
    pub epsilon: f64,
    pub stats: SearchStats,
}

impl PrecodeResult {
    fn discrete(
        cfg: &SystemConfig,
        indices: Vec<usize>,
        ev: &MarginEvaluator,
        stats: SearchStats,
    ) -> Self {
        let x = indices_to_points(cfg, &indices);
        let epsilon = ev.margin(&x);
        Self {
            x,
            indices: Some(indices),
            epsilon,
            stats,
        }
    }
}

pub fn indices_to_points(cfg: &SystemConfig, indices: &[usize]) -> Vec<Complex64> {
    let alphabet = cfg.transmit_alphabet();
    indices.iter().map(|&i| alphabet.point(i)).collect()
}

/// Per-entry nearest transmit-alphabet point.
pub fn map_to_alphabet(cfg: &SystemConfig, x: &[Complex64]) -> Vec<usize> {
    let alphabet = cfg.transmit_alphabet();
    x.iter().map(|&c| alphabet.nearest_point(c)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnbOptions {
    /// Nodes with `lb ≤ f̌ + prune_tol` survive.
    pub prune_tol: f64,
    pub lp: LpTolerances,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            prune_tol: 1e-9,
            lp: LpTolerances::default(),
        }
    }
}

/// Solution of the convex-hull relaxation and its per-entry mapping.
#[derive(Debug, Clone)]
pub struct RelaxAndMap {
    pub continuous: PrecodeResult,
    pub mapped: PrecodeResult,
    /// LP optimum `ε` (an upper bound on the discrete optimum).
    pub relaxed_bound: f64,
}

pub fn mddt_mapped(
    h: &Channel,
    s: &[Complex64],
    cfg: &SystemConfig,
    tol: &LpTolerances,
) -> Result<RelaxAndMap> {
    let f = build_full_lp(h, s, cfg)?;
    let sol = solve(&f.to_lp(), tol);
    if !sol.is_optimal() {
        return Err(Error::Lp(sol.status));
    }
    let x_cont = deinterleave(&sol.v[1..]);
    let stats = SearchStats {
        lp_solves: 1,
        ..SearchStats::default()
    };
    let continuous = PrecodeResult {
        epsilon: f.evaluator.margin(&x_cont),
        x: x_cont.clone(),
        indices: None,
        stats: stats.clone(),
    };
    let mapped = PrecodeResult::discrete(cfg, map_to_alphabet(cfg, &x_cont), &f.evaluator, stats);
    Ok(RelaxAndMap {
        continuous,
        mapped,
        relaxed_bound: sol.v[0],
    })
}

/// Optional per-node record of the search, for inspecting bounds.
#[derive(Debug, Clone, Default)]
pub struct NodeLog {
    /// `(prefix indices, lb)` for every solved subproblem.
    pub lower_bounds: Vec<(Vec<usize>, f64)>,
    /// Lower bound of the root relaxation.
    pub root_lb: f64,
}

pub fn bnb_optimal(
    h: &Channel,
    s: &[Complex64],
    cfg: &SystemConfig,
    opts: &BnbOptions,
) -> Result<PrecodeResult> {
    bnb_search(h, s, cfg, opts, None)
}

/// Breadth-first branch-and-bound. Returns the maximizer of the safety
/// margin over the scaled transmit alphabet; ties go to the lexicographically
/// smallest index sequence.
pub fn bnb_search(
    h: &Channel,
    s: &[Complex64],
    cfg: &SystemConfig,
    opts: &BnbOptions,
    mut log: Option<&mut NodeLog>,
) -> Result<PrecodeResult> {
    let f = build_full_lp(h, s, cfg)?;
    let ev = &f.evaluator;
    let alphabet = cfg.transmit_alphabet();
    let (m, ax) = (cfg.antennas, cfg.alpha_x);
    let mut stats = SearchStats::default();

    // Incumbent from relax-and-map.
    let root = solve(&f.to_lp(), &opts.lp);
    stats.lp_solves += 1;
    if !root.is_optimal() {
        return Err(Error::Lp(root.status));
    }
    if let Some(log) = log.as_deref_mut() {
        log.root_lb = -root.v[0];
    }
    let mut incumbent = map_to_alphabet(cfg, &deinterleave(&root.v[1..]));
    let mut f_check = -ev.margin(&indices_to_points(cfg, &incumbent));
    let mut node_counter = 0u64;
    stats.best_bound_trace.push((node_counter, f_check));

    let mut level: Vec<Vec<usize>> = (0..ax).map(|i| vec![i]).collect();
    for _d in 1..m {
        stats.level_sizes.push(level.len() as u64);
        let mut lbs = Vec::with_capacity(level.len());
        for prefix in &level {
            let points: Vec<Complex64> = prefix.iter().map(|&i| alphabet.point(i)).collect();
            let sub = build_subproblem(&f, &points)?;
            let sol = solve(&sub.to_lp(), &opts.lp);
            stats.lp_solves += 1;
            stats.subproblem_solves += 1;
            node_counter += 1;
            if !sol.is_optimal() {
                return Err(Error::Lp(sol.status));
            }
            let lb = -sol.v[0];
            if let Some(log) = log.as_deref_mut() {
                log.lower_bounds.push((prefix.clone(), lb));
            }
            let mut candidate = prefix.clone();
            candidate.extend(map_to_alphabet(cfg, &deinterleave(&sol.v[1..])));
            let ub = -ev.margin(&indices_to_points(cfg, &candidate));
            if ub < f_check {
                f_check = ub;
                incumbent = candidate;
                stats.best_bound_trace.push((node_counter, f_check));
            }
            lbs.push(lb);
        }
        let mut next = Vec::with_capacity(level.len() * ax);
        for (prefix, lb) in level.iter().zip(&lbs) {
            if *lb <= f_check + opts.prune_tol {
                for i in 0..ax {
                    let mut child = prefix.clone();
                    child.push(i);
                    next.push(child);
                }
            } else {
                stats.pruned += 1;
            }
        }
        level = next;
    }
    stats.level_sizes.push(level.len() as u64);

    // Final level: exact margins of every surviving full candidate.
    let mut best: Option<(f64, &Vec<usize>)> = None;
    for cand in &level {
        let eps = ev.margin(&indices_to_points(cfg, cand));
        stats.leaf_evaluations += 1;
        if best.is_none_or(|(b, _)| eps > b) {
            best = Some((eps, cand));
        }
    }
    stats.branches_visited = stats.subproblem_solves + stats.leaf_evaluations;
    let chosen = match best {
        Some((_, cand)) => cand.clone(),
        // Over-aggressive pruning can empty the last level; the incumbent
        // is still feasible.
        None => incumbent,
    };
    Ok(PrecodeResult::discrete(cfg, chosen, ev, stats))
}

pub const DEFAULT_EXHAUSTIVE_BUDGET: u128 = 10_000_000;

/// Enumerates every candidate in lexicographic index order.
pub fn exhaustive(
    h: &Channel,
    s: &[Complex64],
    cfg: &SystemConfig,
    budget: u128,
) -> Result<PrecodeResult> {
    cfg.validate()?;
    cfg.check_channel(h)?;
    let (k, m, ax) = (cfg.users, cfg.antennas, cfg.alpha_x);
    let needed = (ax as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let ev = MarginEvaluator::new(h, s, cfg.alpha_s)?;
    let alphabet = cfg.transmit_alphabet();
    // contrib[(ant * ax + i) * k + user] = hs(user, ant) · point(i)
    let mut contrib = vec![Complex64::new(0.0, 0.0); m * ax * k];
    for ant in 0..m {
        for i in 0..ax {
            for user in 0..k {
                contrib[(ant * ax + i) * k + user] = ev.hs(user, ant) * alphabet.point(i);
            }
        }
    }

    // Depth-first odometer with partial sums per depth.
    let mut idx = vec![0usize; m];
    let mut partial = vec![Complex64::new(0.0, 0.0); (m + 1) * k];
    let mut best_eps = f64::NEG_INFINITY;
    let mut best_idx = idx.clone();
    let mut depth = 0;
    loop {
        // fill partial sums from `depth` downward with the current digits
        for d in depth..m {
            for user in 0..k {
                partial[(d + 1) * k + user] =
                    partial[d * k + user] + contrib[(d * ax + idx[d]) * k + user];
            }
        }
        let w = &partial[m * k..];
        let eps = w
            .iter()
            .fold(f64::INFINITY, |acc, &wk| acc.min(ev.sample_margin(wk)));
        if eps > best_eps {
            best_eps = eps;
            best_idx.copy_from_slice(&idx);
        }
        // advance
        let mut d = m;
        loop {
            if d == 0 {
                let stats = SearchStats {
                    branches_visited: needed as u64,
                    leaf_evaluations: needed as u64,
                    ..SearchStats::default()
                };
                return Ok(PrecodeResult::discrete(cfg, best_idx, &ev, stats));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < ax {
                break;
            }
            idx[d] = 0;
        }
        depth = d;
    }
}

/// Zero-forcing `Hᴴ(HHᴴ)⁻¹s` followed by per-entry phase quantization.
pub fn zf_phase_quantized(
    h: &Channel,
    s: &[Complex64],
    cfg: &SystemConfig,
) -> Result<PrecodeResult> {
    cfg.validate()?;
    cfg.check_channel(h)?;
    let x_zf = zero_forcing(h, s)?;
    let ev = MarginEvaluator::new(h, s, cfg.alpha_s)?;
    Ok(PrecodeResult::discrete(
        cfg,
        map_to_alphabet(cfg, &x_zf),
        &ev,
        SearchStats::default(),
    ))
}

/// Unquantized zero-forcing vector.
pub fn zero_forcing(h: &Channel, s: &[Complex64]) -> Result<Vec<Complex64>> {
    if s.len() != h.users() {
        return Err(Error::DimensionMismatch(format!(
            "{} symbols for {} users",
            s.len(),
            h.users()
        )));
    }
    let hm: &DMatrix<Complex64> = h.matrix();
    let gram = hm * hm.adjoint();
    let inv = gram.try_inverse().ok_or(Error::SingularChannel)?;
    if inv.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::SingularChannel);
    }
    let x = hm.adjoint() * inv * DVector::from_column_slice(s);
    Ok(x.iter().copied().collect())
}

/// Dispatches to the precoder named by `kind`.
pub fn precode(
    kind: PrecoderKind,
    h: &Channel,
    s: &[Complex64],
    cfg: &SystemConfig,
    opts: &BnbOptions,
    budget: u128,
) -> Result<PrecodeResult> {
    match kind {
        PrecoderKind::Bnb => bnb_optimal(h, s, cfg, opts),
        PrecoderKind::MddtMapped => Ok(mddt_mapped(h, s, cfg, &opts.lp)?.mapped),
        PrecoderKind::ContinuousMmddt => Ok(mddt_mapped(h, s, cfg, &opts.lp)?.continuous),
        PrecoderKind::ZfQuantized => zf_phase_quantized(h, s, cfg),
        PrecoderKind::Exhaustive => exhaustive(h, s, cfg, budget),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::safety_margin;
    use crate::model::{detect, draw_channel, noiseless_receive, stream_rng};
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn s_top_right() -> Vec<Complex64> {
        vec![Complex64::from_polar(1.0, PI / 4.0)]
    }

    fn random_instance(cfg: &SystemConfig, seed: u64) -> (Channel, Vec<Complex64>) {
        let mut rng = stream_rng(seed, 0);
        let h = draw_channel(cfg.users, cfg.antennas, &mut rng);
        let data = cfg.data_alphabet();
        let s = (0..cfg.users)
            .map(|_| data.point(rng.random_range(0..cfg.alpha_s)))
            .collect();
        (h, s)
    }

    #[test]
    fn scalar_channel_all_precoders() {
        let cfg = SystemConfig::new(1, 1, 4, 4).unwrap();
        let h = Channel::from_rows(&[vec![c(1.0, 0.0)]]).unwrap();
        let s = s_top_right();
        let sin45 = (PI / 4.0).sin();

        let ex = exhaustive(&h, &s, &cfg, DEFAULT_EXHAUSTIVE_BUDGET).unwrap();
        assert_eq!(ex.indices, Some(vec![3]));
        assert_abs_diff_eq!(ex.epsilon, sin45, epsilon = 1e-12);
        assert_eq!(ex.stats.branches_visited, 4);

        let rm = mddt_mapped(&h, &s, &cfg, &LpTolerances::default()).unwrap();
        assert_eq!(rm.mapped.indices, Some(vec![3]));
        assert_abs_diff_eq!(rm.mapped.epsilon, sin45, epsilon = 1e-12);
        assert_abs_diff_eq!(rm.relaxed_bound, sin45, epsilon = 1e-9);

        let bnb = bnb_optimal(&h, &s, &cfg, &BnbOptions::default()).unwrap();
        assert_eq!(bnb.indices, Some(vec![3]));
        assert_eq!(bnb.stats.branches_visited, 4);

        let zf = zf_phase_quantized(&h, &s, &cfg).unwrap();
        assert_eq!(zf.indices, Some(vec![3]));
        assert_abs_diff_eq!(zf.epsilon, sin45, epsilon = 1e-12);
    }

    #[test]
    fn two_antenna_single_user_enumeration() {
        let cfg = SystemConfig::new(1, 2, 4, 4).unwrap();
        let h = Channel::from_rows(&[vec![c(1.0, 0.0), c(1.0, 0.0)]]).unwrap();
        let s = s_top_right();
        let ex = exhaustive(&h, &s, &cfg, 16).unwrap();
        assert_eq!(ex.indices, Some(vec![3, 3]));
        // w = e^{-jπ/4}·2e^{jπ/4}/√2 = √2, so ε = √2·sin(π/4) = 1.
        assert_abs_diff_eq!(ex.epsilon, 1.0, epsilon = 1e-12);
        assert!(matches!(
            exhaustive(&h, &s, &cfg, 15),
            Err(Error::BudgetExceeded {
                needed: 16,
                budget: 15
            })
        ));
    }

    #[test]
    fn exhaustive_matches_naive_enumeration() {
        let cfg = SystemConfig::new(2, 3, 8, 3).unwrap();
        for seed in 0..20 {
            let (h, s) = random_instance(&cfg, seed);
            let ex = exhaustive(&h, &s, &cfg, DEFAULT_EXHAUSTIVE_BUDGET).unwrap();
            let mut best = (f64::NEG_INFINITY, vec![]);
            for a in 0..3 {
                for b in 0..3 {
                    for cc in 0..3 {
                        let idx = vec![a, b, cc];
                        let x = indices_to_points(&cfg, &idx);
                        let e = safety_margin(&h, &s, &x, 8).unwrap();
                        if e > best.0 {
                            best = (e, idx);
                        }
                    }
                }
            }
            assert_eq!(ex.indices.unwrap(), best.1);
            assert_abs_diff_eq!(ex.epsilon, best.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn results_are_self_consistent() {
        let cfg = SystemConfig::new(2, 4, 8, 8).unwrap();
        for seed in 0..10 {
            let (h, s) = random_instance(&cfg, 100 + seed);
            for kind in PrecoderKind::ALL {
                let r = precode(
                    kind,
                    &h,
                    &s,
                    &cfg,
                    &BnbOptions::default(),
                    DEFAULT_EXHAUSTIVE_BUDGET,
                )
                .unwrap();
                let eps = safety_margin(&h, &s, &r.x, 8).unwrap();
                assert_abs_diff_eq!(r.epsilon, eps, epsilon = 1e-10);
                if kind.is_discrete() {
                    let norm: f64 = r.x.iter().map(|v| v.norm_sqr()).sum();
                    assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
                    for v in &r.x {
                        assert_abs_diff_eq!(v.norm(), 0.5, epsilon = 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn sandwich_and_optimality_small() {
        let cfg = SystemConfig::new(2, 4, 4, 3).unwrap();
        for seed in 0..50 {
            let (h, s) = random_instance(&cfg, 500 + seed);
            let rm = mddt_mapped(&h, &s, &cfg, &LpTolerances::default()).unwrap();
            let ex = exhaustive(&h, &s, &cfg, DEFAULT_EXHAUSTIVE_BUDGET).unwrap();
            let bnb = bnb_optimal(&h, &s, &cfg, &BnbOptions::default()).unwrap();
            assert!(rm.mapped.epsilon <= ex.epsilon + 1e-9);
            assert!(ex.epsilon <= rm.continuous.epsilon + 1e-9);
            assert!(ex.epsilon <= rm.relaxed_bound + 1e-9);
            assert_eq!(bnb.indices, ex.indices);
        }
    }

    #[test]
    fn zero_forcing_inverts_channel() {
        let cfg = SystemConfig::new(2, 6, 8, 8).unwrap();
        let data = cfg.data_alphabet();
        for seed in 0..50 {
            let (h, s) = random_instance(&cfg, 900 + seed);
            let x = zero_forcing(&h, &s).unwrap();
            let z = noiseless_receive(&h, &x).unwrap();
            for (zk, sk) in z.iter().zip(&s) {
                assert_abs_diff_eq!((zk - sk).norm(), 0.0, epsilon = 1e-10);
            }
            let sent: Vec<usize> = s.iter().map(|&v| data.phase_quantize(v)).collect();
            assert_eq!(detect(&z, &data), sent);
        }
    }

    #[test]
    fn singular_gram_is_reported() {
        let cfg = SystemConfig::new(2, 2, 4, 4).unwrap();
        let row = vec![c(1.0, 0.5), c(-0.3, 0.2)];
        let h = Channel::from_rows(&[row.clone(), row]).unwrap();
        let s = vec![c(1.0, 0.0), c(0.0, 1.0)];
        assert!(matches!(
            zf_phase_quantized(&h, &s, &cfg),
            Err(Error::SingularChannel)
        ));
    }

    #[test]
    fn zero_channel_row_still_solves() {
        let cfg = SystemConfig::new(2, 3, 4, 4).unwrap();
        let h = Channel::from_rows(&[
            vec![c(0.0, 0.0); 3],
            vec![c(0.3, 1.0), c(-0.5, 0.2), c(1.1, -0.4)],
        ])
        .unwrap();
        let s = vec![c(1.0, 0.0), c(0.0, 1.0)];
        let f = build_full_lp(&h, &s, &cfg).unwrap();
        assert!(f.degenerate_user);
        let rm = mddt_mapped(&h, &s, &cfg, &LpTolerances::default()).unwrap();
        assert!(rm.relaxed_bound <= 1e-12);
        let bnb = bnb_optimal(&h, &s, &cfg, &BnbOptions::default()).unwrap();
        let ex = exhaustive(&h, &s, &cfg, 1000).unwrap();
        assert_abs_diff_eq!(bnb.epsilon, ex.epsilon, epsilon = 1e-12);
    }

    #[test]
    fn precoder_ids_round_trip() {
        for k in PrecoderKind::ALL {
            assert_eq!(k.id().parse::<PrecoderKind>().unwrap(), k);
        }
        assert!("cio".parse::<PrecoderKind>().is_err());
    }
}
