//! Exact evaluation of the discretized objective expressions.
//!
//! All three evaluators reduce to finite sums over grid cells, since every
//! integrand is constant per cell; the only rounding is f64 arithmetic.
//! Cell-boundary point values follow the discrete formulas: the lower
//! expression and the exact breakdown read `g(b-_j, j)` and `g(i, a_i)`,
//! the upper expression reads `g(b-_j, j+1)` and `g(i+1, a_i)`. Monotonicity
//! of `g` then gives `eval_lower <= gamma_exact.total <= eval_upper` for
//! every feasible grid and dominant pair.

use thiserror::Error;

use crate::grid::{GridDims, MonotonePath, PathPair};
use crate::price::PriceGrid;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GammaError {
    #[error("dimension mismatch: grid is {grid}, paths are {paths}")]
    DimsMismatch { grid: GridDims, paths: GridDims },
    #[error("rank {j} below the path value {b_i} at stage {i}")]
    RankBelowPath { i: usize, j: usize, b_i: usize },
    #[error("stage {i} out of range for {dims}")]
    StageOutOfRange { i: usize, dims: GridDims },
    #[error("alpha vector has length {got}, expected {want}")]
    AlphaLength { got: usize, want: usize },
    #[error("alpha value {a} at stage {i} outside [{lo}, {hi}]")]
    AlphaRange {
        i: usize,
        a: usize,
        lo: usize,
        hi: usize,
    },
}

/// The four summands of the exact objective, mirroring its derivation:
/// the matched mass, the online-side gain, and the two offline-side gains
/// (pre-matched ranks and late ranks).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBreakdown {
    pub match_term: f64,
    pub u_term: f64,
    pub v_early_term: f64,
    pub v_late_term: f64,
    pub total: f64,
}

impl GammaBreakdown {
    fn new(match_term: f64, u_term: f64, v_early_term: f64, v_late_term: f64) -> Self {
        GammaBreakdown {
            match_term,
            u_term,
            v_early_term,
            v_late_term,
            total: match_term + u_term + v_early_term + v_late_term,
        }
    }
}

fn check_dims(g: &PriceGrid, dims: GridDims) -> Result<(), GammaError> {
    if g.dims() != dims {
        return Err(GammaError::DimsMismatch {
            grid: g.dims(),
            paths: dims,
        });
    }
    Ok(())
}

/// The bracketed expression of the lower bound's second constraint family:
/// `j/n + (1 - j/n + b_i/n) * (1 - g(i,j)) + (1/n) * sum_{k=j}^{n-1} g(b-_k, k)`.
pub fn lower_bracket(
    g: &PriceGrid,
    b: &MonotonePath,
    i: usize,
    j: usize,
) -> Result<f64, GammaError> {
    check_dims(g, b.dims())?;
    let (m, n) = (b.dims().m(), b.dims().n());
    if i >= m {
        return Err(GammaError::StageOutOfRange { i, dims: b.dims() });
    }
    if j < b.value(i) || j > n {
        return Err(GammaError::RankBelowPath {
            i,
            j,
            b_i: b.value(i),
        });
    }
    let jb = b.inverse();
    let tail: f64 = (j..n).map(|k| g.get(jb.value(k), k)).sum();
    Ok(bracket_value(g, n, i, j, b.value(i), tail))
}

#[inline]
fn bracket_value(g: &PriceGrid, n: usize, i: usize, j: usize, b_i: usize, tail: f64) -> f64 {
    let nf = n as f64;
    j as f64 / nf + (nf - j as f64 + b_i as f64) / nf * (1.0 - g.get(i, j)) + tail / nf
}

/// `L(g, b)`: the tightest lower-LP constraint value for path `b`, with the
/// auxiliary variable set to its per-stage optimum (a minimum over ranks).
pub fn eval_lower(g: &PriceGrid, b: &MonotonePath) -> Result<f64, GammaError> {
    check_dims(g, b.dims())?;
    let (m, n) = (b.dims().m(), b.dims().n());
    let (mf, nf) = (m as f64, n as f64);
    let jb = b.inverse();

    // tail[j] = sum_{k=j}^{n-1} g(b-_k, k)
    let mut tail = vec![0.0f64; n + 1];
    for j in (0..n).rev() {
        tail[j] = tail[j + 1] + g.get(jb.value(j), j);
    }

    let v_early: f64 = (0..n)
        .map(|j| (mf - jb.value(j) as f64) / mf * g.get(jb.value(j), j))
        .sum::<f64>()
        / nf;
    let beta_mass: f64 = (0..m).map(|i| b.value(i) as f64).sum::<f64>() / (mf * nf);

    let mut h_sum = 0.0;
    for i in 0..m {
        let b_i = b.value(i);
        let best = (b_i..=n)
            .map(|j| bracket_value(g, n, i, j, b_i, tail[j]))
            .fold(f64::INFINITY, f64::min);
        h_sum += best;
    }
    Ok(v_early - beta_mass + h_sum / mf)
}

/// `U(g, a, b)`: the closed-form upper constraint value for the dominant
/// pair, reading every v-side sample as `g(b-_j, j+1)`.
///
/// This prices the entire top rank cell at the boundary value 1, which keeps
/// it a valid upper bound but a weak one; the upper LP instead treats the
/// top-cell averages as variables (see [`eval_upper_with_top`]).
pub fn eval_upper(g: &PriceGrid, pair: &PathPair) -> Result<f64, GammaError> {
    check_dims(g, pair.dims())?;
    let (m, n) = (pair.dims().m(), pair.dims().n());
    let (mf, nf) = (m as f64, n as f64);
    let (a, b) = (pair.alpha(), pair.beta());
    let jb = b.inverse();

    // tail_up[j] = sum_{k=j}^{n-1} g(b-_k, k+1)
    let mut tail_up = vec![0.0f64; n + 1];
    for j in (0..n).rev() {
        tail_up[j] = tail_up[j + 1] + g.get(jb.value(j), j + 1);
    }

    let mut match_term = 0.0;
    let mut u_term = 0.0;
    let mut v_late = 0.0;
    for i in 0..m {
        let (a_i, b_i) = (a.value(i), b.value(i));
        match_term += (a_i - b_i) as f64;
        u_term += (nf - a_i as f64 + b_i as f64) / nf * (1.0 - g.get(i + 1, a_i));
        v_late += tail_up[a_i];
    }
    let v_early: f64 = (0..n)
        .map(|j| (mf - jb.value(j) as f64) / mf * g.get(jb.value(j), j + 1))
        .sum::<f64>()
        / nf;

    Ok(match_term / (mf * nf) + u_term / mf + v_early + v_late / (mf * nf))
}

/// `U(g, t, a, b)`: the upper constraint value where the v-side samples for
/// the top rank cell `n-1` read the per-stage-line averages `top[i]` instead
/// of the rank boundary value 1.
///
/// The averages satisfy `g(i, n-1) <= top[i] <= 1` for a genuine price
/// function, and the stage boundary contributes 0 (the price at time 1 is 0
/// below rank 1, so its top-cell average vanishes). With `top` all ones this
/// reduces to [`eval_upper`]; the upper LP treats `top` as variables, which
/// is what makes its optimum a tight bound.
pub fn eval_upper_with_top(
    g: &PriceGrid,
    top: &[f64],
    pair: &PathPair,
) -> Result<f64, GammaError> {
    check_dims(g, pair.dims())?;
    let (m, n) = (pair.dims().m(), pair.dims().n());
    if top.len() != m {
        return Err(GammaError::AlphaLength {
            got: top.len(),
            want: m,
        });
    }
    let (mf, nf) = (m as f64, n as f64);
    let (a, b) = (pair.alpha(), pair.beta());
    let jb = b.inverse();

    // v-side sample for rank cell j at the stage line b-_j
    let vsample = |j: usize| -> f64 {
        let row = jb.value(j);
        if j + 1 < n {
            g.get(row, j + 1)
        } else if row < m {
            top[row]
        } else {
            0.0
        }
    };

    // tail_up[j] = sum_{k=j}^{n-1} vsample(k)
    let mut tail_up = vec![0.0f64; n + 1];
    for j in (0..n).rev() {
        tail_up[j] = tail_up[j + 1] + vsample(j);
    }

    let mut match_term = 0.0;
    let mut u_term = 0.0;
    let mut v_late = 0.0;
    for i in 0..m {
        let (a_i, b_i) = (a.value(i), b.value(i));
        match_term += (a_i - b_i) as f64;
        u_term += (nf - a_i as f64 + b_i as f64) / nf * (1.0 - g.get(i + 1, a_i));
        v_late += tail_up[a_i];
    }
    let v_early: f64 = (0..n)
        .map(|j| (mf - jb.value(j) as f64) / mf * vsample(j))
        .sum::<f64>()
        / nf;

    Ok(match_term / (mf * nf) + u_term / mf + v_early + v_late / (mf * nf))
}

/// The exact objective for the step functions induced by `g` and the pair,
/// split into its four terms.
pub fn gamma_exact(g: &PriceGrid, pair: &PathPair) -> Result<GammaBreakdown, GammaError> {
    let alpha: Vec<usize> = pair.alpha().values()[..pair.dims().m()].to_vec();
    gamma_exact_with_alpha(g, &alpha, pair.beta())
}

/// As [`gamma_exact`], with a free per-stage alpha vector: `alpha[i]` may be
/// non-monotone across stages (as it can be on vertex-weighted instances),
/// subject to `b_i <= alpha[i] <= n`.
pub fn gamma_exact_with_alpha(
    g: &PriceGrid,
    alpha: &[usize],
    b: &MonotonePath,
) -> Result<GammaBreakdown, GammaError> {
    check_dims(g, b.dims())?;
    let (m, n) = (b.dims().m(), b.dims().n());
    let (mf, nf) = (m as f64, n as f64);
    if alpha.len() != m {
        return Err(GammaError::AlphaLength {
            got: alpha.len(),
            want: m,
        });
    }
    for (i, &a_i) in alpha.iter().enumerate() {
        if a_i < b.value(i) || a_i > n {
            return Err(GammaError::AlphaRange {
                i,
                a: a_i,
                lo: b.value(i),
                hi: n,
            });
        }
    }
    let jb = b.inverse();
    let mut tail = vec![0.0f64; n + 1];
    for j in (0..n).rev() {
        tail[j] = tail[j + 1] + g.get(jb.value(j), j);
    }

    let mut match_term = 0.0;
    let mut u_term = 0.0;
    let mut v_late = 0.0;
    for (i, &a_i) in alpha.iter().enumerate() {
        let b_i = b.value(i);
        match_term += (a_i - b_i) as f64;
        u_term += (nf - a_i as f64 + b_i as f64) / nf * (1.0 - g.get(i, a_i));
        v_late += tail[a_i];
    }
    let v_early: f64 = (0..n)
        .map(|j| (mf - jb.value(j) as f64) / mf * g.get(jb.value(j), j))
        .sum::<f64>()
        / nf;

    Ok(GammaBreakdown::new(
        match_term / (mf * nf),
        u_term / mf,
        v_early,
        v_late / (mf * nf),
    ))
}
