use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use precode_core::lpsolve::LpTolerances;
use precode_core::simulate::{BerPoint, ComplexitySample};
use serde::Serialize;

/// Provenance written at the top of every output file.
#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub master_seed: u64,
    pub timestamp: String,
    pub tolerances: Tolerances,
    /// Noise and power conventions behind the SNR axis.
    pub conventions: &'static str,
    pub config: C,
}

#[derive(Debug, Serialize)]
pub struct Tolerances {
    pub lp: LpTolerances,
    pub prune_tol: f64,
    pub verify_epsilon: f64,
}

pub const CONVENTIONS: &str = "unit-variance complex Gaussian channel entries; transmit amplitude 1/sqrt(M) so ||x||^2 = 1; \
     sigma_n^2 = 10^(-SNR/10) total per receive sample, split evenly over real and imaginary parts; \
     Gray-labelled BER; noise shared across precoders per (channel, symbol vector, SNR)";

impl<C: Serialize> RunManifest<C> {
    pub fn new(command: &'static str, master_seed: u64, tolerances: Tolerances, config: C) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            master_seed,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            tolerances,
            conventions: CONVENTIONS,
            config,
        }
    }

    /// Pretty JSON with every line prefixed by `# `. The timestamp sits on a
    /// line of its own.
    pub fn header(&self) -> String {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        json.lines().map(|l| format!("# {l}\n")).collect()
    }
}

#[derive(Serialize)]
struct BerRow<'a> {
    precoder: &'a str,
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "M")]
    antennas: usize,
    alpha_s: usize,
    alpha_x: usize,
    snr_db: f64,
    ber: Option<f64>,
    ser: f64,
    bit_errors: u64,
    bits_total: u64,
    n_channels: usize,
    seed: u64,
}

#[derive(Serialize)]
struct ComplexityRow {
    #[serde(rename = "M")]
    antennas: usize,
    alpha_x: usize,
    mean_branches: f64,
    std_branches: f64,
    exhaustive_count: u128,
    n_channels: usize,
    seed: u64,
}

pub struct BerTable<'a> {
    pub users: usize,
    pub alpha_s: usize,
    pub alpha_x: usize,
    pub n_channels: usize,
    pub seed: u64,
    pub points: &'a [BerPoint],
}

fn create(dir: &Path, name: &str, header: &str) -> io::Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut file = BufWriter::new(File::create(&path)?);
    file.write_all(header.as_bytes())?;
    Ok((path, file))
}

fn csv_error(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

pub fn write_ber_csv(dir: &Path, tag: &str, header: &str, table: &BerTable) -> io::Result<PathBuf> {
    let (path, file) = create(dir, &format!("ber_{tag}.csv"), header)?;
    let mut w = csv::Writer::from_writer(file);
    for p in table.points {
        w.serialize(BerRow {
            precoder: p.precoder.id(),
            users: table.users,
            antennas: p.antennas,
            alpha_s: table.alpha_s,
            alpha_x: table.alpha_x,
            snr_db: p.snr_db,
            ber: p.ber,
            ser: p.ser,
            bit_errors: p.bit_errors,
            bits_total: p.bits_total,
            n_channels: table.n_channels,
            seed: table.seed,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_complexity_csv(
    dir: &Path,
    tag: &str,
    header: &str,
    seed: u64,
    samples: &[ComplexitySample],
) -> io::Result<PathBuf> {
    let (path, file) = create(dir, &format!("complexity_{tag}.csv"), header)?;
    let mut w = csv::Writer::from_writer(file);
    for s in samples {
        w.serialize(ComplexityRow {
            antennas: s.antennas,
            alpha_x: s.alpha_x,
            mean_branches: s.mean_branches,
            std_branches: s.std_branches,
            exhaustive_count: s.exhaustive_count,
            n_channels: s.n_channels,
            seed,
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_lines_are_comments_with_timestamp_alone() {
        let tol = Tolerances {
            lp: LpTolerances::default(),
            prune_tol: 1e-9,
            verify_epsilon: 1e-9,
        };
        let h = RunManifest::new("ber", 7, tol, vec![1, 2]).header();
        assert!(h.lines().all(|l| l.starts_with("# ")));
        let ts: Vec<&str> = h.lines().filter(|l| l.contains("timestamp")).collect();
        assert_eq!(ts.len(), 1);
        assert!(!ts[0].contains("seed"));
        assert!(h.ends_with('\n'));
    }
}
