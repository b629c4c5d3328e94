//! Label-noise estimation from set sizes of two consecutive rounds.
//!
//! Counts follow the usual split of each set by ground truth: the present
//! set L1 holds `a` truly present and `b` truly absent windows, the absent
//! set L2 holds `c` truly absent and `d` truly present ones, and the
//! unlabeled set holds `e` present and `f` absent ones.

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::SetSizes;

/// Hidden set sizes of one round.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl Counts {
    pub fn from_array(x: [f64; 6]) -> Self {
        let [a, b, c, d, e, f] = x;
        Self { a, b, c, d, e, f }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    pub fn sizes(&self) -> SetSizes {
        SetSizes {
            l1: self.a + self.b,
            l2: self.c + self.d,
            u: self.e + self.f,
        }
    }

    pub fn labeled(&self) -> f64 {
        self.a + self.b + self.c + self.d
    }

    /// Fraction of mislabeled windows among the labeled ones.
    pub fn noise_rate(&self) -> f64 {
        let m = self.labeled();
        if m <= 0.0 {
            return 0.5;
        }
        (self.b + self.d) / m
    }

    /// Expected counts after one update with hypothesis error `eps`.
    ///
    /// The unlabeled counts of the next round take whatever the labeled
    /// ones leave of each ground-truth class.
    pub fn forward(&self, eps: f64, alpha1: f64, alpha2: f64) -> Self {
        let keep = 1.0 - eps;
        let a = self.a * keep + (self.d + self.e) * keep * alpha1;
        let b = self.b * eps + (self.c + self.f) * eps * alpha1;
        let c = self.c * keep + (self.b + self.f) * keep * alpha2;
        let d = self.d * eps + (self.a + self.e) * eps * alpha2;
        let e = (self.a + self.d + self.e) - a - d;
        let f = (self.b + self.c + self.f) - b - c;
        Self { a, b, c, d, e, f }
    }
}

/// A per-class error rate used as prior knowledge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatePrior {
    /// Equal to the hypothesis error under test.
    Epsilon,
    Fixed(f64),
}

impl RatePrior {
    fn at(self, eps: f64) -> f64 {
        match self {
            RatePrior::Epsilon => eps,
            RatePrior::Fixed(r) => r,
        }
    }
}

/// One externally known quantity pinning down the hidden counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorQuantity {
    /// Truly present windows overall, `a + d + e`.
    ClassOneTotal(f64),
    /// Truly present windows among the labeled ones, `a + d`.
    ClassOneLabeled(f64),
    /// `d / (a + d)`.
    TypeOneRate(RatePrior),
    /// `b / (b + c)`.
    TypeTwoRate(RatePrior),
}

impl PriorQuantity {
    fn row(self, eps: f64) -> ([f64; 6], f64) {
        match self {
            PriorQuantity::ClassOneTotal(n) => ([1.0, 0.0, 0.0, 1.0, 1.0, 0.0], n),
            PriorQuantity::ClassOneLabeled(n) => ([1.0, 0.0, 0.0, 1.0, 0.0, 0.0], n),
            PriorQuantity::TypeOneRate(r) => {
                let r = r.at(eps);
                ([-r, 0.0, 0.0, 1.0 - r, 0.0, 0.0], 0.0)
            }
            PriorQuantity::TypeTwoRate(r) => {
                let r = r.at(eps);
                ([0.0, 1.0 - r, -r, 0.0, 0.0, 0.0], 0.0)
            }
        }
    }
}

/// Settings of the line search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    pub alpha1: f64,
    pub alpha2: f64,
    pub grid_step: f64,
    pub eps_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    pub epsilon_hat: f64,
    pub eta_hat: f64,
    /// Norm of the misfit of the next-round set sizes, in windows.
    pub residual: f64,
    pub counts_hat: Counts,
}

/// Coefficients of `|L1'|` and `|L2'|` as linear functions of the counts.
fn next_round_rows(eps: f64, a1: f64, a2: f64) -> [[f64; 6]; 2] {
    let k = 1.0 - eps;
    [
        [k, eps, eps * a1, k * a1, k * a1, eps * a1],
        [eps * a2, k * a2, k, eps, eps * a2, k * a2],
    ]
}

fn dot(x: &[f64; 6], y: &[f64; 6]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn minor(rows: &[[f64; 6]; 5], skip: usize) -> Matrix5<f64> {
    Matrix5::from_fn(|i, j| rows[i][if j < skip { j } else { j + 1 }])
}

/// Best counts for one fixed `eps`, or `None` when no nonnegative solution exists.
fn solve_at(
    eps: f64,
    k: SetSizes,
    k1: SetSizes,
    s: &EstimatorSettings,
    priors: &[PriorQuantity; 2],
) -> Option<(Counts, f64)> {
    let n = k.total();
    let (p0, r0) = priors[0].row(eps);
    let (p1, r1) = priors[1].row(eps);
    let rows = [
        [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, 1.0, 1.0],
        p0,
        p1,
    ];
    let rhs = Vector5::new(k.l1, k.l2, k.u, r0, r1);

    // one-dimensional solution set x_p + t * v, v from the signed 5x5 minors
    let dets: Vec<f64> = (0..6).map(|j| minor(&rows, j).determinant()).collect();
    let (pivot, det_max) = dets
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |best, (j, d)| if d.abs() > best.1.abs() { (j, *d) } else { best });
    if det_max.abs() < 1e-12 {
        return None;
    }
    let mut v = [0.0; 6];
    for (j, d) in dets.iter().enumerate() {
        v[j] = if j % 2 == 0 { *d } else { -*d };
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);

    let sol = minor(&rows, pivot).lu().solve(&rhs)?;
    let mut xp = [0.0; 6];
    for j in 0..5 {
        xp[if j < pivot { j } else { j + 1 }] = sol[j];
    }

    let tol = 1e-9 * n.max(1.0);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut bound = |g: f64, h: f64| -> bool {
        // g + t * h <= 0
        if h.abs() < 1e-15 {
            return g <= tol;
        }
        let t = -g / h;
        if h > 0.0 {
            hi = hi.min(t + tol / h);
        } else {
            lo = lo.max(t + tol / h);
        }
        true
    };
    for j in 0..6 {
        if !bound(-xp[j], -v[j]) {
            return None;
        }
    }
    // noise rate at most one half: (b + d) - (a + c) <= 0
    let g = [-1.0, 1.0, -1.0, 1.0, 0.0, 0.0];
    if !bound(dot(&g, &xp), dot(&g, &v)) {
        return None;
    }
    if lo > hi {
        return None;
    }

    let next = next_round_rows(eps, s.alpha1, s.alpha2);
    let p = [dot(&next[0], &xp) - k1.l1, dot(&next[1], &xp) - k1.l2];
    let q = [dot(&next[0], &v), dot(&next[1], &v)];
    let qq = q[0] * q[0] + q[1] * q[1];
    let t_free = if qq > 0.0 { -(p[0] * q[0] + p[1] * q[1]) / qq } else { 0.0 };
    let t = t_free.clamp(lo, hi);
    let residual = ((p[0] + t * q[0]).powi(2) + (p[1] + t * q[1]).powi(2)).sqrt();

    let mut x = [0.0; 6];
    for j in 0..6 {
        x[j] = (xp[j] + t * v[j]).max(0.0);
    }
    Some((Counts::from_array(x), residual))
}

/// Line search over the hypothesis error.
///
/// For every grid value the observed set sizes and the two prior
/// quantities fix all counts up to one free direction; that direction is
/// chosen to best reproduce the next round's labeled set sizes under the
/// forward model, within nonnegativity and a noise rate of at most one half.
/// The grid value with the smallest misfit wins, the lowest one on ties.
pub fn estimate_noise(
    sizes_k: SetSizes,
    sizes_k1: SetSizes,
    settings: &EstimatorSettings,
    priors: &[PriorQuantity; 2],
) -> Result<NoiseEstimate> {
    if (sizes_k.total() - sizes_k1.total()).abs() > 1e-9 {
        return Err(Error::IndexMismatch(format!(
            "round sizes cover {} and {} windows",
            sizes_k.total(),
            sizes_k1.total()
        )));
    }
    if !(settings.grid_step > 0.0 && settings.grid_step <= 0.1) {
        return Err(Error::InvalidConfig(format!(
            "epsilon grid step {} outside (0, 0.1]",
            settings.grid_step
        )));
    }
    let steps = (settings.eps_max / settings.grid_step + 1e-9).floor() as usize;
    let mut best: Option<NoiseEstimate> = None;
    for i in 0..=steps {
        let eps = i as f64 * settings.grid_step;
        let Some((counts, residual)) = solve_at(eps, sizes_k, sizes_k1, settings, priors) else {
            continue;
        };
        if best.is_none_or(|b| residual < b.residual) {
            best = Some(NoiseEstimate {
                epsilon_hat: eps,
                eta_hat: counts.noise_rate(),
                residual,
                counts_hat: counts,
            });
        }
    }
    best.ok_or(Error::EstimatorInfeasible)
}

/// `m * (1 - 2 eta)^2`.
pub fn learning_utility(m: f64, eta: f64) -> f64 {
    m * (1.0 - 2.0 * eta).powi(2)
}

pub fn stopping_metric(m_prev: f64, eta_prev: f64, m_cur: f64, eta_cur: f64) -> f64 {
    learning_utility(m_cur, eta_cur) - learning_utility(m_prev, eta_prev)
}

/// Labeled size and noise rate expected after one more update.
pub fn predict_next(counts: &Counts, eps: f64, alpha1: f64, alpha2: f64) -> (f64, f64) {
    let next = counts.forward(eps, alpha1, alpha2);
    (next.labeled(), next.noise_rate().clamp(0.0, 0.5))
}

/// Rate grid scanned by [`search_rates`].
pub const RATE_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// First sampling rates predicted to raise the utility above `u_cur`.
///
/// The current rates are tried first, then `alpha1` (outer) and `alpha2`
/// (inner) over [`RATE_GRID`].
pub fn search_rates(counts: &Counts, eps: f64, u_cur: f64, current: (f64, f64)) -> Option<(f64, f64)> {
    let improves = |(a1, a2): (f64, f64)| {
        let (m, eta) = predict_next(counts, eps, a1, a2);
        learning_utility(m, eta) - u_cur > 0.0
    };
    if improves(current) {
        return Some(current);
    }
    RATE_GRID
        .iter()
        .flat_map(|&a1| RATE_GRID.iter().map(move |&a2| (a1, a2)))
        .find(|&pair| improves(pair))
}
