//! Safety-margin objective and the real-valued LP data for the relaxed
//! precoding problem and its conditioned subproblems.
//!
//! The LP variable is `v = [ε, Re x₁, Im x₁, …, Re x_M, Im x_M]`. Each user
//! contributes two margin rows, one per side of its decision sector, and each
//! antenna contributes `α_x` half-plane rows describing the regular polygon
//! spanned by the scaled transmit alphabet.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lpsolve::LpProblem;
use crate::model::{Channel, SystemConfig};

/// Evaluates `min_k Re{w_k} sin θ - |Im{w_k}| cos θ` with `w = diag(s*) H x`.
#[derive(Debug, Clone)]
pub struct MarginEvaluator {
    users: usize,
    antennas: usize,
    /// Row-major `diag(s*) H`.
    hs: Vec<Complex64>,
    sin_theta: f64,
    cos_theta: f64,
}

impl MarginEvaluator {
    pub fn new(h: &Channel, s: &[Complex64], alpha_s: usize) -> Result<Self> {
        if s.len() != h.users() {
            return Err(Error::DimensionMismatch(format!(
                "{} symbols for {} users",
                s.len(),
                h.users()
            )));
        }
        let (k, m) = (h.users(), h.antennas());
        let mut hs = Vec::with_capacity(k * m);
        for (user, sk) in s.iter().enumerate() {
            for ant in 0..m {
                hs.push(sk.conj() * h.get(user, ant));
            }
        }
        let theta = PI / alpha_s as f64;
        Ok(Self {
            users: k,
            antennas: m,
            hs,
            sin_theta: theta.sin(),
            cos_theta: theta.cos(),
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Entry `(user, antenna)` of `diag(s*) H`.
    pub fn hs(&self, user: usize, antenna: usize) -> Complex64 {
        self.hs[user * self.antennas + antenna]
    }

    /// Margin of a single rotated receive sample.
    #[inline]
    pub fn sample_margin(&self, w: Complex64) -> f64 {
        w.re * self.sin_theta - w.im.abs() * self.cos_theta
    }

    /// Rotated noiseless receive samples `w`.
    pub fn rotated_receive(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.antennas, "transmit vector length");
        (0..self.users)
            .map(|k| {
                let row = &self.hs[k * self.antennas..(k + 1) * self.antennas];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn per_user(&self, x: &[Complex64]) -> Vec<f64> {
        self.rotated_receive(x)
            .into_iter()
            .map(|w| self.sample_margin(w))
            .collect()
    }

    pub fn margin(&self, x: &[Complex64]) -> f64 {
        assert_eq!(x.len(), self.antennas, "transmit vector length");
        let mut worst = f64::INFINITY;
        for k in 0..self.users {
            let row = &self.hs[k * self.antennas..(k + 1) * self.antennas];
            let w: Complex64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
            worst = worst.min(self.sample_margin(w));
        }
        worst
    }
}

/// Smallest distance to a decision threshold over all users; negative when
/// some user would be misdetected without noise.
pub fn safety_margin(h: &Channel, s: &[Complex64], x: &[Complex64], alpha_s: usize) -> Result<f64> {
    if x.len() != h.antennas() {
        return Err(Error::DimensionMismatch(format!(
            "transmit vector has {} entries, channel has {} antennas",
            x.len(),
            h.antennas()
        )));
    }
    Ok(MarginEvaluator::new(h, s, alpha_s)?.margin(x))
}

/// Interleaved real stacking `[Re x₁, Im x₁, Re x₂, …]`.
pub fn interleave(x: &[Complex64]) -> Vec<f64> {
    x.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn deinterleave(xr: &[f64]) -> Vec<Complex64> {
    xr.chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect()
}

/// Coefficient blocks of the margin rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginCoefficients {
    /// Multiplies `Re x` in the first-side row.
    pub gamma: Vec<f64>,
    /// Multiplies `Im x` in the first-side row.
    pub lambda: Vec<f64>,
    /// Multiplies `Re x` in the second-side row.
    pub psi: Vec<f64>,
    /// Multiplies `Im x` in the second-side row.
    pub delta: Vec<f64>,
}

/// Relaxed problem `minimize aᵀv subject to U v ≤ p`.
#[derive(Debug, Clone)]
pub struct RealFormulation {
    pub users: usize,
    pub antennas: usize,
    pub alpha_x: usize,
    pub theta: f64,
    pub evaluator: MarginEvaluator,
    /// Row-major `K × M` blocks.
    pub coefficients: MarginCoefficients,
    /// Row-major `rows × (2M + 1)`.
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub a: Vec<f64>,
    /// Number of polygon rows per antenna (`α_x`, or 4 for `α_x = 2`).
    pub hull_rows_per_antenna: usize,
    /// Set when some user's channel row is zero; that user caps ε at 0.
    pub degenerate_user: bool,
}

/// Half-plane rows `(β, rhs)` describing the convex hull of the scaled
/// transmit alphabet for one antenna.
pub fn hull_rows(alpha_x: usize, amplitude: f64) -> Vec<([f64; 2], f64)> {
    let bound = (PI / alpha_x as f64).cos() * amplitude;
    let mut rows: Vec<_> = (1..=alpha_x)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / alpha_x as f64;
            ([phi.cos(), -phi.sin()], bound)
        })
        .collect();
    if alpha_x == 2 {
        // The two faces collapse to Re x = 0; bound the segment along Im x.
        rows.push(([0.0, 1.0], amplitude));
        rows.push(([0.0, -1.0], amplitude));
    }
    rows
}

impl RealFormulation {
    pub fn rows(&self) -> usize {
        self.p.len()
    }

    pub fn cols(&self) -> usize {
        2 * self.antennas + 1
    }

    pub fn margin_rows(&self) -> usize {
        2 * self.users
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols();
        &self.u[i * n..(i + 1) * n]
    }

    pub fn to_lp(&self) -> LpProblem {
        LpProblem::new(self.a.clone(), self.u.clone(), self.p.clone())
    }

    /// Hull row of transmit antenna `antenna` for face `face` (0-based).
    pub fn hull_row_index(&self, face: usize, antenna: usize) -> usize {
        self.margin_rows() + face * self.antennas + antenna
    }
}

pub fn build_full_lp(h: &Channel, s: &[Complex64], cfg: &SystemConfig) -> Result<RealFormulation> {
    cfg.validate()?;
    cfg.check_channel(h)?;
    let evaluator = MarginEvaluator::new(h, s, cfg.alpha_s)?;
    let (k, m) = (cfg.users, cfg.antennas);
    let theta = PI / cfg.alpha_s as f64;
    let (st, ct) = theta.sin_cos();

    let mut co = MarginCoefficients {
        gamma: vec![0.0; k * m],
        lambda: vec![0.0; k * m],
        psi: vec![0.0; k * m],
        delta: vec![0.0; k * m],
    };
    for user in 0..k {
        for ant in 0..m {
            let hs = evaluator.hs(user, ant);
            let idx = user * m + ant;
            co.gamma[idx] = hs.im * ct - hs.re * st;
            co.lambda[idx] = hs.re * ct + hs.im * st;
            co.psi[idx] = -hs.im * ct - hs.re * st;
            co.delta[idx] = hs.im * st - hs.re * ct;
        }
    }

    let hull = hull_rows(cfg.alpha_x, cfg.transmit_amplitude());
    let n = 2 * m + 1;
    let rows = 2 * k + m * hull.len();
    let mut u = vec![0.0; rows * n];
    let mut p = vec![0.0; rows];
    for user in 0..k {
        let r1 = user * n;
        let r2 = (k + user) * n;
        u[r1] = 1.0;
        u[r2] = 1.0;
        for ant in 0..m {
            let idx = user * m + ant;
            u[r1 + 1 + 2 * ant] = co.gamma[idx];
            u[r1 + 2 + 2 * ant] = co.lambda[idx];
            u[r2 + 1 + 2 * ant] = co.psi[idx];
            u[r2 + 2 + 2 * ant] = co.delta[idx];
        }
    }
    for (face, (beta, rhs)) in hull.iter().enumerate() {
        for ant in 0..m {
            let row = 2 * k + face * m + ant;
            u[row * n + 1 + 2 * ant] = beta[0];
            u[row * n + 2 + 2 * ant] = beta[1];
            p[row] = *rhs;
        }
    }
    let mut a = vec![0.0; n];
    a[0] = -1.0;

    Ok(RealFormulation {
        users: k,
        antennas: m,
        alpha_x: cfg.alpha_x,
        theta,
        degenerate_user: h.has_zero_row(),
        evaluator,
        coefficients: co,
        u,
        p,
        a,
        hull_rows_per_antenna: hull.len(),
    })
}

/// Relaxation conditioned on the first `d` antennas being fixed.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub fixed: usize,
    pub prefix: Vec<Complex64>,
    /// Row-major `rows × (2(M - d) + 1)`.
    pub u_tilde: Vec<f64>,
    pub b: Vec<f64>,
    pub a_tilde: Vec<f64>,
    /// Slack `p - U₁ x_r1` of the dropped hull rows of the fixed antennas.
    pub fixed_hull_slack: Vec<f64>,
}

impl Subproblem {
    pub fn cols(&self) -> usize {
        self.a_tilde.len()
    }

    pub fn to_lp(&self) -> LpProblem {
        LpProblem::new(self.a_tilde.clone(), self.u_tilde.clone(), self.b.clone())
    }
}

pub fn build_subproblem(f: &RealFormulation, prefix: &[Complex64]) -> Result<Subproblem> {
    let d = prefix.len();
    let m = f.antennas;
    if d == 0 || d >= m {
        return Err(Error::InvalidConfig(format!(
            "subproblem needs 1 ≤ d ≤ M-1 fixed antennas, got d={d} with M={m}"
        )));
    }
    let xr1 = interleave(prefix);
    let free = m - d;
    let nt = 2 * free + 1;
    let kept_hull = f.hull_rows_per_antenna * free;
    let rows = f.margin_rows() + kept_hull;
    let mut u_tilde = Vec::with_capacity(rows * nt);
    let mut b = Vec::with_capacity(rows);

    for r in 0..f.margin_rows() {
        let full = f.row(r);
        u_tilde.push(full[0]);
        u_tilde.extend_from_slice(&full[1 + 2 * d..]);
        let fixed: f64 = full[1..1 + 2 * d]
            .iter()
            .zip(&xr1)
            .map(|(a, x)| a * x)
            .sum();
        b.push(f.p[r] - fixed);
    }
    let mut fixed_hull_slack = Vec::with_capacity(f.hull_rows_per_antenna * d);
    for face in 0..f.hull_rows_per_antenna {
        for ant in 0..m {
            let r = f.hull_row_index(face, ant);
            let full = f.row(r);
            if ant < d {
                let fixed: f64 = full[1..1 + 2 * d]
                    .iter()
                    .zip(&xr1)
                    .map(|(a, x)| a * x)
                    .sum();
                fixed_hull_slack.push(f.p[r] - fixed);
            } else {
                u_tilde.push(full[0]);
                u_tilde.extend_from_slice(&full[1 + 2 * d..]);
                b.push(f.p[r]);
            }
        }
    }
    let mut a_tilde = vec![0.0; nt];
    a_tilde[0] = -1.0;
    Ok(Subproblem {
        fixed: d,
        prefix: prefix.to_vec(),
        u_tilde,
        b,
        a_tilde,
        fixed_hull_slack,
    })
}
