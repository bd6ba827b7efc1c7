//! Monte Carlo sweeps: uncoded BER/SER versus SNR, and average search size
//! versus the number of transmit antennas.
//!
//! Every channel realization is an independent work unit with its own
//! random stream derived from `(master_seed, M, channel index)`, so results
//! do not depend on how units are scheduled across threads.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alphabet::GrayMap;
use crate::error::{Error, Result};
use crate::model::{
    complex_gaussian, detect, draw_channel, noiseless_receive, sigma2_from_snr, stream_rng,
    SystemConfig,
};
use crate::precoders::{bnb_optimal, mddt_mapped, precode, BnbOptions, PrecoderKind};

/// Largest `α_x^M` for which exhaustive search joins a BER sweep by default.
pub const DEFAULT_EXHAUSTIVE_BER_LIMIT: u128 = 100_000;

/// Fraction of failed instances above which a sweep aborts.
pub const MAX_FAILURE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub users: usize,
    pub antennas: Vec<usize>,
    pub alpha_s: usize,
    pub alpha_x: usize,
    pub snr_grid_db: Vec<f64>,
    pub n_channels: usize,
    pub symbols_per_channel: usize,
    pub precoders: Vec<PrecoderKind>,
    pub master_seed: u64,
    pub bnb: BnbOptions,
    pub exhaustive_budget: u128,
    /// Worker threads; `None` uses the global pool. Not serialized, since
    /// results do not depend on it.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl SweepConfig {
    /// Defaults: 1000 channels, 100 symbol vectors per channel, all
    /// precoders except exhaustive search.
    pub fn new(users: usize, antennas: Vec<usize>, alpha_s: usize, alpha_x: usize) -> Self {
        Self {
            users,
            antennas,
            alpha_s,
            alpha_x,
            snr_grid_db: vec![10.0],
            n_channels: 1000,
            symbols_per_channel: 100,
            precoders: default_precoders(&[], usize::MAX),
            master_seed: 0,
            bnb: BnbOptions::default(),
            exhaustive_budget: crate::precoders::DEFAULT_EXHAUSTIVE_BUDGET,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.antennas.is_empty() {
            return Err(Error::InvalidConfig("antenna grid is empty".into()));
        }
        for &m in &self.antennas {
            SystemConfig::new(self.users, m, self.alpha_s, self.alpha_x)?;
        }
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(
                "SNR grid must be non-empty and finite".into(),
            ));
        }
        if self.n_channels == 0 || self.symbols_per_channel == 0 {
            return Err(Error::InvalidConfig(
                "channel and symbol budgets must be positive".into(),
            ));
        }
        if self.precoders.is_empty() {
            return Err(Error::InvalidConfig("no precoders selected".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("thread count must be positive".into()));
        }
        Ok(())
    }

    fn system(&self, antennas: usize) -> SystemConfig {
        SystemConfig::new(self.users, antennas, self.alpha_s, self.alpha_x).expect("validated")
    }
}

/// The default precoder set, adding exhaustive search only when every
/// configuration in `alpha_x^M` stays within `DEFAULT_EXHAUSTIVE_BER_LIMIT`.
pub fn default_precoders(antennas: &[usize], alpha_x: usize) -> Vec<PrecoderKind> {
    let mut list = vec![
        PrecoderKind::Bnb,
        PrecoderKind::MddtMapped,
        PrecoderKind::ContinuousMmddt,
        PrecoderKind::ZfQuantized,
    ];
    let small = !antennas.is_empty()
        && antennas.iter().all(|&m| {
            (alpha_x as u128)
                .checked_pow(m as u32)
                .is_some_and(|n| n <= DEFAULT_EXHAUSTIVE_BER_LIMIT)
        });
    if small {
        list.push(PrecoderKind::Exhaustive);
    }
    list
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub antennas: usize,
    pub snr_db: f64,
    pub precoder: PrecoderKind,
    pub bit_errors: u64,
    /// `symbols_total · K · log2(α_s)`, or 0 in SER-only mode.
    pub bits_total: u64,
    /// Per-user symbol errors.
    pub symbol_errors: u64,
    /// Symbol vectors sent; each carries one symbol per user.
    pub symbols_total: u64,
    /// `None` when `α_s` is not a power of two.
    pub ber: Option<f64>,
    pub ser: f64,
    /// Precoding instances excluded after a failure.
    pub excluded: u64,
}

impl BerPoint {
    /// Binomial standard error of the BER estimate.
    pub fn ber_std_error(&self) -> Option<f64> {
        let ber = self.ber?;
        Some((ber * (1.0 - ber) / self.bits_total.max(1) as f64).sqrt())
    }
}

fn stream_id(tag: u64, antennas: usize, channel: usize) -> u64 {
    (tag << 56) | ((antennas as u64) << 40) | channel as u64
}

const BER_STREAM: u64 = 1;
const COMPLEXITY_STREAM: u64 = 2;

#[derive(Debug, Clone, Default)]
struct Tally {
    bit_errors: u64,
    symbol_errors: u64,
    vectors: u64,
}

/// Error counts of one channel realization, indexed `[precoder][snr]`.
#[derive(Debug, Clone)]
struct ChannelOutcome {
    tallies: Vec<Vec<Tally>>,
    failures: Vec<u64>,
}

fn run_channel(
    cfg: &SweepConfig,
    sys: &SystemConfig,
    gray: Option<GrayMap>,
    channel: usize,
) -> ChannelOutcome {
    let np = cfg.precoders.len();
    let ns = cfg.snr_grid_db.len();
    let mut out = ChannelOutcome {
        tallies: vec![vec![Tally::default(); ns]; np],
        failures: vec![0; np],
    };
    let mut rng = stream_rng(
        cfg.master_seed,
        stream_id(BER_STREAM, sys.antennas, channel),
    );
    let h = draw_channel(sys.users, sys.antennas, &mut rng);
    let data = sys.data_alphabet();
    let sigmas: Vec<f64> = cfg
        .snr_grid_db
        .iter()
        .map(|&snr| sigma2_from_snr(snr, 1.0).sqrt())
        .collect();

    for _ in 0..cfg.symbols_per_channel {
        let sent: Vec<usize> = (0..sys.users)
            .map(|_| rng.random_range(0..sys.alpha_s))
            .collect();
        let s: Vec<Complex64> = sent.iter().map(|&i| data.point(i)).collect();
        // Noiseless receive per precoder, reused across the SNR grid.
        // The mapped and continuous precoders share one relaxation solve.
        let mut relaxation = None;
        let received: Vec<Option<Vec<Complex64>>> = cfg
            .precoders
            .iter()
            .map(|&kind| {
                let x = match kind {
                    PrecoderKind::MddtMapped | PrecoderKind::ContinuousMmddt => {
                        let relax = relaxation
                            .get_or_insert_with(|| mddt_mapped(&h, &s, sys, &cfg.bnb.lp).ok())
                            .as_ref();
                        relax.map(|r| match kind {
                            PrecoderKind::MddtMapped => r.mapped.x.clone(),
                            _ => r.continuous.x.clone(),
                        })
                    }
                    _ => precode(kind, &h, &s, sys, &cfg.bnb, cfg.exhaustive_budget)
                        .ok()
                        .map(|r| r.x),
                };
                x.map(|x| noiseless_receive(&h, &x).expect("precoder output length"))
            })
            .collect();
        for (p, z) in received.iter().enumerate() {
            if z.is_none() {
                out.failures[p] += 1;
            }
        }
        for (si, sigma) in sigmas.iter().enumerate() {
            // Common noise for all precoders at this (channel, symbol, SNR).
            let noise: Vec<Complex64> = (0..sys.users)
                .map(|_| complex_gaussian(&mut rng, 1.0))
                .collect();
            for (p, z) in received.iter().enumerate() {
                let Some(z) = z else { continue };
                let r: Vec<Complex64> = z
                    .iter()
                    .zip(&noise)
                    .map(|(zk, nk)| zk + nk * sigma)
                    .collect();
                let detected = detect(&r, &data);
                let t = &mut out.tallies[p][si];
                for (&a, &b) in sent.iter().zip(&detected) {
                    if a != b {
                        t.symbol_errors += 1;
                        if let Some(g) = gray {
                            t.bit_errors += u64::from(g.bit_errors(a, b));
                        }
                    }
                }
                t.vectors += 1;
            }
        }
    }
    out
}

fn with_pool<T: Send>(threads: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// BER/SER versus SNR for every antenna count and precoder in `cfg`.
///
/// Points are ordered by antenna count, then precoder, then SNR.
pub fn run_ber_sweep(cfg: &SweepConfig) -> Result<Vec<BerPoint>> {
    cfg.validate()?;
    let gray = GrayMap::new(cfg.alpha_s).ok();
    let bits_per_symbol = gray.map_or(0, |g| g.bits_per_symbol() as u64);
    let mut points = Vec::new();
    for &m in &cfg.antennas {
        let sys = cfg.system(m);
        let outcomes: Vec<ChannelOutcome> = with_pool(cfg.threads, || {
            (0..cfg.n_channels)
                .into_par_iter()
                .map(|c| run_channel(cfg, &sys, gray, c))
                .collect()
        })?;
        let instances = (cfg.n_channels * cfg.symbols_per_channel) as u64;
        for (p, &kind) in cfg.precoders.iter().enumerate() {
            let excluded: u64 = outcomes.iter().map(|o| o.failures[p]).sum();
            if excluded as f64 > MAX_FAILURE_FRACTION * instances as f64 {
                return Err(Error::TooManyFailures {
                    excluded,
                    total: instances,
                });
            }
            for (si, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
                let mut sum = Tally::default();
                for o in &outcomes {
                    let t = &o.tallies[p][si];
                    sum.bit_errors += t.bit_errors;
                    sum.symbol_errors += t.symbol_errors;
                    sum.vectors += t.vectors;
                }
                let symbols = sum.vectors * cfg.users as u64;
                let bits_total = symbols * bits_per_symbol;
                points.push(BerPoint {
                    antennas: m,
                    snr_db,
                    precoder: kind,
                    bit_errors: sum.bit_errors,
                    bits_total,
                    symbol_errors: sum.symbol_errors,
                    symbols_total: sum.vectors,
                    ber: gray.map(|_| sum.bit_errors as f64 / bits_total.max(1) as f64),
                    ser: sum.symbol_errors as f64 / symbols.max(1) as f64,
                    excluded,
                });
            }
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexitySample {
    pub antennas: usize,
    pub alpha_x: usize,
    /// Mean of subproblem solves plus leaf evaluations.
    pub mean_branches: f64,
    pub std_branches: f64,
    /// Mean number of conditioned subproblems solved (leaf evaluations excluded).
    pub mean_subproblems: f64,
    pub exhaustive_count: u128,
    pub n_channels: usize,
    pub per_channel: Vec<u64>,
}

/// Average branch-and-bound search size per antenna count, one random
/// symbol vector per channel.
pub fn run_complexity_sweep(cfg: &SweepConfig) -> Result<Vec<ComplexitySample>> {
    cfg.validate()?;
    let mut samples = Vec::with_capacity(cfg.antennas.len());
    for &m in &cfg.antennas {
        let sys = cfg.system(m);
        let results: Vec<Option<(u64, u64)>> = with_pool(cfg.threads, || {
            (0..cfg.n_channels)
                .into_par_iter()
                .map(|c| {
                    let mut rng = stream_rng(cfg.master_seed, stream_id(COMPLEXITY_STREAM, m, c));
                    let h = draw_channel(sys.users, m, &mut rng);
                    let data = sys.data_alphabet();
                    let s: Vec<Complex64> = (0..sys.users)
                        .map(|_| data.point(rng.random_range(0..sys.alpha_s)))
                        .collect();
                    bnb_optimal(&h, &s, &sys, &cfg.bnb)
                        .ok()
                        .map(|r| (r.stats.branches_visited, r.stats.subproblem_solves))
                })
                .collect()
        })?;
        let excluded = results.iter().filter(|r| r.is_none()).count() as u64;
        if excluded as f64 > MAX_FAILURE_FRACTION * cfg.n_channels as f64 {
            return Err(Error::TooManyFailures {
                excluded,
                total: cfg.n_channels as u64,
            });
        }
        let ok: Vec<(u64, u64)> = results.into_iter().flatten().collect();
        let per_channel: Vec<u64> = ok.iter().map(|r| r.0).collect();
        let n = per_channel.len().max(1) as f64;
        let mean = per_channel.iter().sum::<u64>() as f64 / n;
        let var = if per_channel.len() > 1 {
            per_channel
                .iter()
                .map(|&b| (b as f64 - mean).powi(2))
                .sum::<f64>()
                / (per_channel.len() - 1) as f64
        } else {
            0.0
        };
        samples.push(ComplexitySample {
            antennas: m,
            alpha_x: cfg.alpha_x,
            mean_branches: mean,
            std_branches: var.sqrt(),
            mean_subproblems: ok.iter().map(|r| r.1).sum::<u64>() as f64 / n,
            exhaustive_count: (cfg.alpha_x as u128).saturating_pow(m as u32),
            n_channels: cfg.n_channels,
            per_channel,
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(precoders: Vec<PrecoderKind>) -> SweepConfig {
        let mut cfg = SweepConfig::new(2, vec![4], 4, 3);
        cfg.n_channels = 6;
        cfg.symbols_per_channel = 5;
        cfg.snr_grid_db = vec![0.0, 10.0, 60.0];
        cfg.precoders = precoders;
        cfg.master_seed = 3;
        cfg
    }

    #[test]
    fn bookkeeping_invariants() {
        let cfg = small(PrecoderKind::ALL.to_vec());
        let points = run_ber_sweep(&cfg).unwrap();
        assert_eq!(points.len(), 5 * 3);
        for p in &points {
            assert_eq!(p.symbols_total, 6 * 5);
            assert_eq!(p.bits_total, p.symbols_total * 2 * 2);
            let ber = p.ber.unwrap();
            assert!((0.0..=1.0).contains(&ber));
            assert!(p.ser >= ber / 2.0 - 1e-12 && p.ser <= ber * 2.0 + 1e-12);
        }
    }

    #[test]
    fn high_snr_errors_match_negative_margins() {
        // At 60 dB the noise std is 1e-3, so a symbol vector is received
        // correctly exactly when its optimal margin is clearly positive.
        let cfg = small(vec![PrecoderKind::Bnb]);
        let points = run_ber_sweep(&cfg).unwrap();
        let high = points.iter().find(|p| p.snr_db == 60.0).unwrap();
        let sys = cfg.system(4);
        let data = sys.data_alphabet();
        let (mut low_margin, mut clear) = (0, 0);
        for c in 0..cfg.n_channels {
            let mut rng = stream_rng(cfg.master_seed, stream_id(BER_STREAM, 4, c));
            let h = draw_channel(2, 4, &mut rng);
            for _ in 0..cfg.symbols_per_channel {
                let s: Vec<Complex64> =
                    (0..2).map(|_| data.point(rng.random_range(0..4))).collect();
                for _ in 0..cfg.snr_grid_db.len() * 2 {
                    complex_gaussian(&mut rng, 1.0);
                }
                let eps = bnb_optimal(&h, &s, &sys, &cfg.bnb).unwrap().epsilon;
                if eps < 0.01 {
                    low_margin += 1;
                } else {
                    clear += 1;
                }
            }
        }
        assert!(clear > 0);
        if low_margin == 0 {
            assert_eq!(high.symbol_errors, 0);
        }
        assert!(high.symbol_errors <= 2 * low_margin as u64);
    }

    #[test]
    fn non_power_of_two_data_gives_ser_only() {
        let mut cfg = small(vec![PrecoderKind::ZfQuantized]);
        cfg.alpha_s = 3;
        let points = run_ber_sweep(&cfg).unwrap();
        assert!(points.iter().all(|p| p.ber.is_none() && p.bits_total == 0));
    }

    #[test]
    fn default_precoder_set() {
        assert!(default_precoders(&[6], 3).contains(&PrecoderKind::Exhaustive));
        assert!(!default_precoders(&[6], 8).contains(&PrecoderKind::Exhaustive));
        assert!(!default_precoders(&[4, 12], 3).contains(&PrecoderKind::Exhaustive));
    }

    #[test]
    fn validation() {
        let mut cfg = small(vec![PrecoderKind::Bnb]);
        cfg.snr_grid_db.clear();
        assert!(run_ber_sweep(&cfg).is_err());
        let mut cfg = small(vec![PrecoderKind::Bnb]);
        cfg.alpha_x = 1;
        assert!(run_complexity_sweep(&cfg).is_err());
        let mut cfg = small(vec![]);
        cfg.precoders.clear();
        assert!(run_ber_sweep(&cfg).is_err());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut cfg = small(vec![PrecoderKind::Bnb, PrecoderKind::ZfQuantized]);
        cfg.threads = Some(1);
        let a = run_ber_sweep(&cfg).unwrap();
        cfg.threads = Some(3);
        let b = run_ber_sweep(&cfg).unwrap();
        assert_eq!(a, b);
        let c1 = run_complexity_sweep(&cfg).unwrap();
        cfg.threads = Some(1);
        assert_eq!(c1, run_complexity_sweep(&cfg).unwrap());
    }

    #[test]
    fn complexity_counts_stay_below_exhaustive() {
        let mut cfg = small(vec![PrecoderKind::Bnb]);
        cfg.antennas = vec![1, 3, 5];
        cfg.n_channels = 20;
        let samples = run_complexity_sweep(&cfg).unwrap();
        assert_eq!(samples[0].mean_branches, 3.0);
        for s in &samples {
            assert!(s.mean_branches <= s.exhaustive_count as f64);
            assert!(s
                .per_channel
                .iter()
                .all(|&b| b as u128 <= s.exhaustive_count));
            assert_eq!(s.per_channel.len(), 20);
        }
    }
}
