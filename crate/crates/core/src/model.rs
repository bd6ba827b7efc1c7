//! Flat-fading multiuser downlink: channel draws, noiseless receive, AWGN
//! and hard detection.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::alphabet::PskAlphabet;
use crate::error::{Error, Result};

/// Random stream used throughout the simulator.
pub type SimRng = ChaCha8Rng;

/// Independent stream `stream` of the generator seeded by `master_seed`.
pub fn stream_rng(master_seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Draws a circularly-symmetric complex Gaussian with total variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// K×M complex channel matrix, users by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    h: DMatrix<Complex64>,
}

impl Channel {
    pub fn new(h: DMatrix<Complex64>) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::InvalidConfig("channel must be at least 1×1".into()));
        }
        if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidConfig(
                "channel entries must be finite".into(),
            ));
        }
        Ok(Self { h })
    }

    /// Builds a channel from row-major rows.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let k = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch("ragged channel rows".into()));
        }
        Self::new(DMatrix::from_fn(k, m, |i, j| rows[i][j]))
    }

    pub fn users(&self) -> usize {
        self.h.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.h.ncols()
    }

    pub fn get(&self, user: usize, antenna: usize) -> Complex64 {
        self.h[(user, antenna)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    /// True when some user's row is identically zero.
    pub fn has_zero_row(&self) -> bool {
        self.h
            .row_iter()
            .any(|row| row.iter().all(|c| *c == Complex64::new(0.0, 0.0)))
    }
}

/// i.i.d. unit-variance complex Gaussian channel.
pub fn draw_channel<R: Rng + ?Sized>(users: usize, antennas: usize, rng: &mut R) -> Channel {
    assert!(users >= 1 && antennas >= 1, "channel must be at least 1×1");
    let mut entries = Vec::with_capacity(users * antennas);
    for _ in 0..users * antennas {
        entries.push(complex_gaussian(rng, 1.0));
    }
    // entries are drawn row by row
    Channel {
        h: DMatrix::from_row_slice(users, antennas, &entries),
    }
}

/// `z = H x`.
pub fn noiseless_receive(h: &Channel, x: &[Complex64]) -> Result<Vec<Complex64>> {
    if x.len() != h.antennas() {
        return Err(Error::DimensionMismatch(format!(
            "transmit vector has {} entries, channel has {} antennas",
            x.len(),
            h.antennas()
        )));
    }
    Ok((0..h.users())
        .map(|k| (0..h.antennas()).map(|m| h.get(k, m) * x[m]).sum())
        .collect())
}

/// Noise variance giving `snr_db` for a transmit vector of squared norm `x_norm_sq`.
pub fn sigma2_from_snr(snr_db: f64, x_norm_sq: f64) -> f64 {
    x_norm_sq / 10f64.powf(snr_db / 10.0)
}

pub fn add_noise<R: Rng + ?Sized>(z: &[Complex64], sigma2: f64, rng: &mut R) -> Vec<Complex64> {
    assert!(sigma2 >= 0.0, "noise variance must be nonnegative");
    if sigma2 == 0.0 {
        return z.to_vec();
    }
    z.iter()
        .map(|zk| zk + complex_gaussian(rng, sigma2))
        .collect()
}

/// Per-user phase detection with the data alphabet.
pub fn detect(r: &[Complex64], data: &PskAlphabet) -> Vec<usize> {
    r.iter().map(|&rk| data.phase_quantize(rk)).collect()
}

/// Downlink dimensions and alphabet sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub users: usize,
    pub antennas: usize,
    pub alpha_s: usize,
    pub alpha_x: usize,
}

impl SystemConfig {
    pub fn new(users: usize, antennas: usize, alpha_s: usize, alpha_x: usize) -> Result<Self> {
        let cfg = Self {
            users,
            antennas,
            alpha_s,
            alpha_x,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.antennas == 0 {
            return Err(Error::InvalidConfig(
                "need at least one user and one antenna".into(),
            ));
        }
        if self.alpha_s < 2 || self.alpha_x < 2 {
            return Err(Error::InvalidConfig(format!(
                "alphabet orders must be at least 2 (alpha_s={}, alpha_x={})",
                self.alpha_s, self.alpha_x
            )));
        }
        Ok(())
    }

    /// Per-antenna transmit amplitude; gives unit total transmit power.
    pub fn transmit_amplitude(&self) -> f64 {
        1.0 / (self.antennas as f64).sqrt()
    }

    pub fn data_alphabet(&self) -> PskAlphabet {
        PskAlphabet::unit(self.alpha_s).expect("validated config")
    }

    pub fn transmit_alphabet(&self) -> PskAlphabet {
        PskAlphabet::new(self.alpha_x, self.transmit_amplitude()).expect("validated config")
    }

    pub fn check_channel(&self, h: &Channel) -> Result<()> {
        if h.users() != self.users || h.antennas() != self.antennas {
            return Err(Error::DimensionMismatch(format!(
                "channel is {}×{}, config expects {}×{}",
                h.users(),
                h.antennas(),
                self.users,
                self.antennas
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn channel_moments() {
        let mut rng = stream_rng(11, 0);
        let n = 100_000;
        let h = draw_channel(1, n, &mut rng);
        let entries: Vec<_> = h.matrix().iter().copied().collect();
        let power = entries.iter().map(|e| e.norm_sqr()).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(power, 1.0, epsilon = 0.02);
        let var_re = entries.iter().map(|e| e.re * e.re).sum::<f64>() / n as f64;
        let var_im = entries.iter().map(|e| e.im * e.im).sum::<f64>() / n as f64;
        let cov = entries.iter().map(|e| e.re * e.im).sum::<f64>() / n as f64;
        assert_abs_diff_eq!(var_re, 0.5, epsilon = 0.02);
        assert_abs_diff_eq!(var_im, 0.5, epsilon = 0.02);
        assert_abs_diff_eq!(cov, 0.0, epsilon = 0.02);
    }

    #[test]
    fn channel_draw_is_seeded() {
        let a = draw_channel(2, 6, &mut stream_rng(3, 9));
        let b = draw_channel(2, 6, &mut stream_rng(3, 9));
        let other = draw_channel(2, 6, &mut stream_rng(3, 10));
        assert_eq!(a, b);
        assert_ne!(a, other);
    }

    #[test]
    fn receive_small_cases() {
        let h = Channel::from_rows(&[vec![c(1.0, 0.0)]]).unwrap();
        assert_eq!(
            noiseless_receive(&h, &[c(0.3, -0.2)]).unwrap(),
            vec![c(0.3, -0.2)]
        );

        let h = Channel::from_rows(&[vec![c(1.0, 0.0), c(0.0, 1.0)]]).unwrap();
        let s = 0.5f64.sqrt();
        let z = noiseless_receive(&h, &[c(s, 0.0), c(s, 0.0)]).unwrap();
        assert_abs_diff_eq!(z[0].re, s, epsilon = 1e-15);
        assert_abs_diff_eq!(z[0].im, s, epsilon = 1e-15);

        assert!(noiseless_receive(&h, &[c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn receive_matches_loop_oracle_and_is_linear() {
        let mut rng = stream_rng(5, 1);
        let h = draw_channel(2, 6, &mut rng);
        let x1: Vec<_> = (0..6).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let x2: Vec<_> = (0..6).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
        let z1 = noiseless_receive(&h, &x1).unwrap();
        let z2 = noiseless_receive(&h, &x2).unwrap();
        for k in 0..2 {
            let mut acc = c(0.0, 0.0);
            for m in 0..6 {
                let hk = h.matrix()[(k, m)];
                acc.re += hk.re * x1[m].re - hk.im * x1[m].im;
                acc.im += hk.re * x1[m].im + hk.im * x1[m].re;
            }
            assert_abs_diff_eq!(z1[k].re, acc.re, epsilon = 1e-12);
            assert_abs_diff_eq!(z1[k].im, acc.im, epsilon = 1e-12);
        }
        let (a, b) = (c(0.4, -1.2), c(-2.0, 0.5));
        let mix: Vec<_> = x1.iter().zip(&x2).map(|(p, q)| a * p + b * q).collect();
        let zm = noiseless_receive(&h, &mix).unwrap();
        for k in 0..2 {
            let want = a * z1[k] + b * z2[k];
            assert_abs_diff_eq!((zm[k] - want).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sigma2_conversion() {
        assert_abs_diff_eq!(sigma2_from_snr(0.0, 1.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma2_from_snr(10.0, 1.0), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(sigma2_from_snr(-10.0, 1.0), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn noise_moments_and_determinism() {
        let z = vec![c(0.3, 0.1); 4];
        assert_eq!(add_noise(&z, 0.0, &mut stream_rng(1, 1)), z);

        let zeros = vec![c(0.0, 0.0); 100_000];
        let sigma2 = 0.37;
        let n = add_noise(&zeros, sigma2, &mut stream_rng(2, 0));
        let power = n.iter().map(|v| v.norm_sqr()).sum::<f64>() / n.len() as f64;
        assert!((power / sigma2 - 1.0).abs() < 0.02, "power {power}");
        let again = add_noise(&zeros, sigma2, &mut stream_rng(2, 0));
        assert_eq!(n, again);
    }

    #[test]
    fn detection() {
        let data = PskAlphabet::unit(8).unwrap();
        let s: Vec<_> = (0..8).map(|i| data.point(i)).collect();
        assert_eq!(detect(&s, &data), (0..8).collect::<Vec<_>>());
        let theta = data.half_sector();
        let rotated: Vec<_> = s
            .iter()
            .map(|p| p * Complex64::from_polar(2.5, 0.99 * theta))
            .collect();
        assert_eq!(detect(&rotated, &data), (0..8).collect::<Vec<_>>());
        let rotated: Vec<_> = s
            .iter()
            .map(|p| p * Complex64::from_polar(0.1, -0.99 * theta))
            .collect();
        assert_eq!(detect(&rotated, &data), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn detection_matches_sector_oracle() {
        let mut rng = stream_rng(77, 0);
        for order in [4usize, 8] {
            let data = PskAlphabet::unit(order).unwrap();
            let theta = data.half_sector();
            let r: Vec<_> = (0..10_000)
                .map(|_| complex_gaussian(&mut rng, 1.0))
                .collect();
            let got = detect(&r, &data);
            for (rk, g) in r.iter().zip(got) {
                // Rotate the sample onto the candidate's axis and test |angle| <= θ.
                let hit: Vec<_> = (0..order)
                    .filter(|&i| (rk * data.point(i).conj()).arg().abs() < theta)
                    .collect();
                assert_eq!(hit, vec![g]);
            }
        }
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(2, 6, 4, 3).is_ok());
        assert!(SystemConfig::new(2, 6, 1, 3).is_err());
        assert!(SystemConfig::new(2, 6, 4, 1).is_err());
        assert!(SystemConfig::new(0, 6, 4, 3).is_err());
        let cfg = SystemConfig::new(2, 9, 8, 8).unwrap();
        let norm: f64 = (0..9)
            .map(|_| cfg.transmit_alphabet().point(2).norm_sqr())
            .sum();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
    }
}
