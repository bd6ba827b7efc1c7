#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use precode_core::lpsolve::LpProblem;
use precode_core::model::{draw_channel, Channel, SimRng, SystemConfig};
use rand::Rng;

pub fn instance(sys: &SystemConfig, rng: &mut SimRng) -> (Channel, Vec<Complex64>) {
    let h = draw_channel(sys.users, sys.antennas, rng);
    let s = (0..sys.users)
        .map(|_| sys.data_alphabet().point(rng.random_range(0..sys.alpha_s)))
        .collect();
    (h, s)
}

/// Minimum over all feasible vertices, by solving every `n × n` row subset.
/// `None` when no vertex is feasible.
pub fn vertex_enumeration(lp: &LpProblem) -> Option<f64> {
    let (n, m) = (lp.vars(), lp.rows());
    let mut best: Option<f64> = None;
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |r, c| lp.row(subset[r])[c]);
        let b = DVector::from_fn(n, |r, _| lp.p[subset[r]]);
        if a.determinant().abs() > 1e-12 {
            if let Some(v) = a.lu().solve(&b) {
                let v: Vec<f64> = v.iter().copied().collect();
                if lp.max_violation(&v) <= 1e-9 {
                    let obj: f64 = lp.c.iter().zip(&v).map(|(c, x)| c * x).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
        }
        // Next combination in lexicographic order.
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if subset[i] < m - n + i {
                break;
            }
        }
        subset[i] += 1;
        for j in i + 1..n {
            subset[j] = subset[j - 1] + 1;
        }
        if subset[n - 1] >= m {
            return best;
        }
    }
}
