//! PSK constellations, the sector detector, nearest-point mapping and Gray
//! bit labels.
//!
//! Points are indexed `0..order` internally. Index `j` sits at angle
//! `π(2j + 3)/order` (mod 2π), so index `order - 1` is the point just above
//! the positive real axis.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// An `order`-point constant-modulus phase alphabet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PskAlphabet {
    order: usize,
    amplitude: f64,
}

impl PskAlphabet {
    pub fn new(order: usize, amplitude: f64) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidConfig(format!(
                "alphabet order must be at least 2, got {order}"
            )));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "alphabet amplitude must be positive and finite, got {amplitude}"
            )));
        }
        Ok(Self { order, amplitude })
    }

    /// Unit-amplitude alphabet.
    pub fn unit(order: usize) -> Result<Self> {
        Self::new(order, 1.0)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// Half the angular width of a decision sector.
    pub fn half_sector(&self) -> f64 {
        PI / self.order as f64
    }

    /// Angle of point `index`, reduced to `[0, 2π)`.
    pub fn angle(&self, index: usize) -> f64 {
        debug_assert!(index < self.order);
        let raw = PI * (2 * index + 3) as f64 / self.order as f64;
        raw.rem_euclid(2.0 * PI)
    }

    pub fn point(&self, index: usize) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.angle(index))
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.order).map(|i| self.point(i)).collect()
    }

    /// Index of the decision sector containing `arg(r)`.
    ///
    /// Sectors are half-open, `[center - θ, center + θ)`. A zero input has
    /// argument 0 and therefore lands in the sector of index `order - 1`.
    pub fn phase_quantize(&self, r: Complex64) -> usize {
        let mut phi = r.im.atan2(r.re);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        // Sector j covers [2π(j+1)/α, 2π(j+2)/α).
        let t = ((phi * self.order as f64) / (2.0 * PI)).floor() as usize;
        let t = t.min(self.order - 1);
        (t + self.order - 1) % self.order
    }

    /// Index of the point closest to `c` in Euclidean distance, ties toward
    /// the smaller index.
    pub fn nearest_point(&self, c: Complex64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for i in 0..self.order {
            let d = (c - self.point(i)).norm_sqr();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }
}

/// Binary-reflected Gray labels for a power-of-two alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrayMap {
    order: usize,
    bits_per_symbol: u32,
}

impl GrayMap {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 || !order.is_power_of_two() {
            return Err(Error::UnsupportedConfig(format!(
                "Gray labelling needs a power-of-two alphabet, got order {order}"
            )));
        }
        Ok(Self {
            order,
            bits_per_symbol: order.trailing_zeros(),
        })
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn encode(&self, index: usize) -> u32 {
        debug_assert!(index < self.order);
        (index ^ (index >> 1)) as u32
    }

    pub fn decode(&self, bits: u32) -> usize {
        let mut index = bits;
        let mut shift = bits >> 1;
        while shift != 0 {
            index ^= shift;
            shift >>= 1;
        }
        index as usize
    }

    /// Number of differing bits between the labels of two indices.
    pub fn bit_errors(&self, sent: usize, detected: usize) -> u32 {
        (self.encode(sent) ^ self.encode(detected)).count_ones()
    }
}
