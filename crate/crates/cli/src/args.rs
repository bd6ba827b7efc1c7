use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "precode",
    version,
    about = "Phase-quantized MU-MIMO precoding experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// BER/SER versus SNR sweep; writes ber_<tag>.csv.
    Ber(BerArgs),
    /// Average search size versus antenna count; writes complexity_<tag>.csv.
    Complexity(ComplexityArgs),
    /// Branch-and-bound against exhaustive search on seeded instances.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Master seed; falls back to PRECODE_SEED, then 0.
    #[arg(long, env = "PRECODE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// File name tag (default derived from the configuration).
    #[arg(long)]
    pub tag: Option<String>,
    /// Branch-and-bound pruning slack.
    #[arg(long, default_value_t = 1e-9, allow_negative_numbers = true)]
    pub prune_tol: f64,
    /// Largest candidate count exhaustive search may enumerate.
    #[arg(long, default_value_t = precode_core::precoders::DEFAULT_EXHAUSTIVE_BUDGET)]
    pub budget: u128,
}

#[derive(Debug, Args)]
pub struct BerArgs {
    #[arg(long = "K", default_value_t = 2)]
    pub users: usize,
    /// Antenna counts: `6`, `6,9` or `start:stop[:step]`.
    #[arg(long = "M", default_value = "6")]
    pub antennas: String,
    #[arg(long, default_value_t = 8)]
    pub alpha_s: usize,
    #[arg(long, default_value_t = 8)]
    pub alpha_x: usize,
    /// SNR grid in dB: `start:step:stop` or a comma list.
    #[arg(long, default_value = "-10:2.5:30", allow_hyphen_values = true)]
    pub snr: String,
    #[arg(long, default_value_t = 1000)]
    pub channels: usize,
    #[arg(long, default_value_t = 100)]
    pub symbols_per_channel: usize,
    /// Comma list of precoder ids (default: all, exhaustive only when small).
    #[arg(long)]
    pub precoders: Option<String>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    #[arg(long = "K", default_value_t = 2)]
    pub users: usize,
    /// Antenna counts: `6`, `6,9` or `start:stop[:step]`.
    #[arg(long = "M", default_value = "3:20")]
    pub antennas: String,
    #[arg(long, default_value_t = 4)]
    pub alpha_s: usize,
    #[arg(long, default_value_t = 3)]
    pub alpha_x: usize,
    #[arg(long, default_value_t = 1000)]
    pub channels: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long = "K", default_value_t = 2)]
    pub users: usize,
    #[arg(long = "M", default_value = "4")]
    pub antennas: String,
    /// Comma list of data alphabet orders.
    #[arg(long, default_value = "4,8")]
    pub alpha_s: String,
    /// Comma list of transmit alphabet orders.
    #[arg(long, default_value = "3,4,8")]
    pub alpha_x: String,
    #[arg(long, default_value_t = 200)]
    pub instances: usize,
    #[command(flatten)]
    pub common: Common,
}

/// Integer grid: a single value, a comma list, or `start:stop[:step]`.
pub fn parse_int_grid(text: &str) -> Result<Vec<usize>, String> {
    let text = text.trim();
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let num = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad integer {s:?} in grid {text:?}"))
        };
        let (start, stop, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => {
                return Err(format!(
                    "grid {text:?} must be start:stop or start:stop:step"
                ))
            }
        };
        if step == 0 || stop < start {
            return Err(format!("grid {text:?} is empty"));
        }
        return Ok((start..=stop).step_by(step).collect());
    }
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad integer {s:?} in list {text:?}"))
        })
        .collect()
}

/// SNR grid in dB: `start:step:stop` (inclusive) or a comma list.
pub fn parse_snr_grid(text: &str) -> Result<Vec<f64>, String> {
    let text = text.trim();
    let num = |s: &str| {
        let v = s
            .trim()
            .parse::<f64>()
            .map_err(|_| format!("bad number {s:?} in SNR grid {text:?}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("SNR values must be finite, got {s:?}"))
        }
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err(format!("SNR grid {text:?} must be start:step:stop"));
        };
        let (start, step, stop) = (num(a)?, num(b)?, num(c)?);
        if step <= 0.0 || stop < start {
            return Err(format!("SNR grid {text:?} is empty"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + step * i as f64).collect());
    }
    text.split(',').map(num).collect()
}
