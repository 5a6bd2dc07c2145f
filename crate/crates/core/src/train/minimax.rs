//! Zero-sum matrix games. The row player maximizes.
//!
//! Games with `min(m, n) <= 3` are solved exactly by enumerating square
//! supports: each candidate pair of row/column subsets is made indifferent by
//! solving the bordered linear systems, and the first pair that satisfies
//! every equilibrium inequality wins. Larger games fall back to fictitious
//! play, stopping once the duality gap is within tolerance.

use crate::error::{Error, Result};

pub const TOLERANCE: f64 = 1e-6;
const CHECK_EPS: f64 = 1e-9;
const FICTITIOUS_PLAY_ITERATIONS: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMethod {
    SupportEnumeration,
    FictitiousPlay,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimaxSolution {
    pub value: f64,
    pub row: Vec<f64>,
    pub col: Vec<f64>,
    pub method: SolveMethod,
    /// Upper minus lower bound on the value; 0 for exact solutions.
    pub gap: f64,
}

impl MinimaxSolution {
    /// Largest violation of the equilibrium inequalities.
    pub fn violation(&self, payoff: &[Vec<f64>]) -> f64 {
        let (lo, hi) = bounds(payoff, &self.row, &self.col);
        (self.value - lo).max(hi - self.value).max(0.0)
    }
}

/// `(min_j xᵀM e_j, max_i e_iᵀ M y)`: what `x` guarantees and what `y` concedes.
pub fn bounds(payoff: &[Vec<f64>], row: &[f64], col: &[f64]) -> (f64, f64) {
    let n = payoff[0].len();
    let lo = (0..n)
        .map(|j| payoff.iter().zip(row).map(|(r, x)| r[j] * x).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    let hi = payoff
        .iter()
        .map(|r| r.iter().zip(col).map(|(a, y)| a * y).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

pub fn solve_minimax(payoff: &[Vec<f64>]) -> Result<MinimaxSolution> {
    let m = payoff.len();
    let n = payoff.first().map_or(0, Vec::len);
    if m == 0 || n == 0 {
        return Err(Error::Empty("empty payoff matrix"));
    }
    if payoff.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("ragged payoff matrix".into()));
    }
    if payoff.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("payoff matrix"));
    }
    if m.min(n) <= 3 {
        if let Some(sol) = support_enumeration(payoff) {
            return Ok(sol);
        }
    }
    Ok(fictitious_play(payoff, TOLERANCE, FICTITIOUS_PLAY_ITERATIONS))
}

fn support_enumeration(payoff: &[Vec<f64>]) -> Option<MinimaxSolution> {
    let (m, n) = (payoff.len(), payoff[0].len());
    for k in 1..=m.min(n) {
        for rows in subsets(m, k) {
            for cols in subsets(n, k) {
                if let Some(sol) = try_support(payoff, &rows, &cols) {
                    return Some(sol);
                }
            }
        }
    }
    None
}

fn try_support(payoff: &[Vec<f64>], rows: &[usize], cols: &[usize]) -> Option<MinimaxSolution> {
    let k = rows.len();
    // columns: A y = v·1, Σy = 1
    let mut a = vec![vec![0.0; k + 1]; k + 1];
    let mut b = vec![0.0; k + 1];
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            a[i][j] = payoff[r][c];
        }
        a[i][k] = -1.0;
    }
    a[k][..k].fill(1.0);
    b[k] = 1.0;
    let ys = solve_linear(a, b)?;
    // rows: Aᵀ x = v·1, Σx = 1
    let mut a = vec![vec![0.0; k + 1]; k + 1];
    let mut b = vec![0.0; k + 1];
    for (j, &c) in cols.iter().enumerate() {
        for (i, &r) in rows.iter().enumerate() {
            a[j][i] = payoff[r][c];
        }
        a[j][k] = -1.0;
    }
    a[k][..k].fill(1.0);
    b[k] = 1.0;
    let xs = solve_linear(a, b)?;
    if (xs[k] - ys[k]).abs() > CHECK_EPS * (1.0 + xs[k].abs()) {
        return None;
    }
    if xs[..k].iter().chain(&ys[..k]).any(|&p| p < -CHECK_EPS) {
        return None;
    }
    let mut row = vec![0.0; payoff.len()];
    let mut col = vec![0.0; payoff[0].len()];
    for (i, &r) in rows.iter().enumerate() {
        row[r] = xs[i].max(0.0);
    }
    for (j, &c) in cols.iter().enumerate() {
        col[c] = ys[j].max(0.0);
    }
    normalize(&mut row);
    normalize(&mut col);
    let value = ys[k];
    let (lo, hi) = bounds(payoff, &row, &col);
    let scale = 1.0 + value.abs();
    if lo < value - CHECK_EPS * scale || hi > value + CHECK_EPS * scale {
        return None;
    }
    Some(MinimaxSolution {
        value,
        row,
        col,
        method: SolveMethod::SupportEnumeration,
        gap: 0.0,
    })
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

/// Simultaneous fictitious play with best-bound tracking.
pub fn fictitious_play(payoff: &[Vec<f64>], tol: f64, max_iter: usize) -> MinimaxSolution {
    let (m, n) = (payoff.len(), payoff[0].len());
    let mut row_counts = vec![0.0; m];
    let mut col_counts = vec![0.0; n];
    // cumulative payoff of each row against the column history, and vice versa
    let mut row_payoff = vec![0.0; m];
    let mut col_payoff = vec![0.0; n];
    let (mut i, mut j) = (0usize, 0usize);
    let mut best_lo = (f64::NEG_INFINITY, vec![0.0; m]);
    let mut best_hi = (f64::INFINITY, vec![0.0; n]);
    for t in 1..=max_iter {
        row_counts[i] += 1.0;
        col_counts[j] += 1.0;
        for (r, p) in row_payoff.iter_mut().enumerate() {
            *p += payoff[r][j];
        }
        for (c, p) in col_payoff.iter_mut().enumerate() {
            *p += payoff[i][c];
        }
        let tf = t as f64;
        let lo = col_payoff.iter().cloned().fold(f64::INFINITY, f64::min) / tf;
        let hi = row_payoff.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / tf;
        if lo > best_lo.0 {
            best_lo = (lo, row_counts.iter().map(|c| c / tf).collect());
        }
        if hi < best_hi.0 {
            best_hi = (hi, col_counts.iter().map(|c| c / tf).collect());
        }
        if best_hi.0 - best_lo.0 <= tol {
            break;
        }
        i = argmax(&row_payoff);
        j = argmin(&col_payoff);
    }
    MinimaxSolution {
        value: 0.5 * (best_lo.0 + best_hi.0),
        row: best_lo.1,
        col: best_hi.1,
        method: SolveMethod::FictitiousPlay,
        gap: best_hi.0 - best_lo.0,
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[best] {
            best = i;
        }
    }
    best
}
