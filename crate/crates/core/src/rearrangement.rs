//! Distribution functions, rearrangements and Lorentz norms of grid fields.
//!
//! A field on `M` equal cells of measure `h^d` has a decreasing rearrangement
//! that is a step function with breakpoints `k h^d`, so every integral of it
//! reduces to a finite sum over constancy intervals.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::quad::{gauss_legendre, integrate};
use crate::reduce::tree_sum;

/// Right-continuous step function on `[t_0, t_K)` with `t_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    /// `t_0 = 0 < t_1 < ... < t_K`.
    pub breakpoints: Vec<f64>,
    /// `levels[k]` holds on `[t_k, t_{k+1})`.
    pub levels: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != levels.len() + 1 || breakpoints.first() != Some(&0.0) {
            return Err(Error::Domain(
                "a step function needs K levels and K+1 breakpoints starting at 0".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("breakpoints must increase strictly".into()));
        }
        Ok(Self { breakpoints, levels })
    }

    pub fn total_measure(&self) -> f64 {
        *self.breakpoints.last().unwrap_or(&0.0)
    }

    pub fn is_non_increasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1] <= w[0])
    }

    /// Value on the interval containing `t` (`0` beyond the last breakpoint).
    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let k = self.breakpoints.partition_point(|&b| b <= t);
        if k == 0 || k > self.levels.len() {
            0.0
        } else {
            self.levels[k - 1]
        }
    }

    /// `int_0^{t_K}` of the step function.
    pub fn integral(&self) -> f64 {
        let parts: Vec<f64> = self
            .levels
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(f, w)| f * (w[1] - w[0]))
            .collect();
        tree_sum(&parts)
    }
}

/// `delta_f(s) = |{ |f| > s }|` for every requested level.
pub fn distribution_function(f: &GridFunction, levels: &[f64]) -> Result<Vec<f64>> {
    if let Some(s) = levels.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::Domain(format!("distribution levels must be non-negative, got {s}")));
    }
    let meas = f.grid().cell_measure();
    Ok(levels
        .iter()
        .map(|&s| f.values().iter().filter(|v| v.abs() > s).count() as f64 * meas)
        .collect())
}

// Cell order of |f| sorted non-increasing, ties by index.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()).then(a.cmp(&b)));
    idx
}

/// `f*`: the values of `|f|` sorted non-increasing on intervals of length `h^d`.
pub fn decreasing_rearrangement(f: &GridFunction) -> StepFunction {
    let meas = f.grid().cell_measure();
    let levels: Vec<f64> = descending_order(f.values()).iter().map(|&i| f.values()[i].abs()).collect();
    let breakpoints = (0..=levels.len()).map(|k| k as f64 * meas).collect();
    StepFunction { breakpoints, levels }
}

/// `f**(t) = t^{-1} int_0^t f*`, sampled at the right end of every interval.
pub fn maximal_function(fstar: &StepFunction) -> Result<StepFunction> {
    if !fstar.is_non_increasing() {
        return Err(Error::Domain("maximal function needs a non-increasing input".into()));
    }
    // Running mean update; it keeps constant inputs exactly constant.
    let mut mean = 0.0;
    let mut levels = Vec::with_capacity(fstar.levels.len());
    for (f, w) in fstar.levels.iter().zip(fstar.breakpoints.windows(2)) {
        mean += (f - mean) * (w[1] - w[0]) / w[1];
        levels.push(mean);
    }
    Ok(StepFunction { breakpoints: fstar.breakpoints.clone(), levels })
}

/// Radial rearrangement: the largest values of `|f|` go to the cells nearest
/// the origin (ties in distance broken by cell index).
pub fn schwarz_symmetrization(f: &GridFunction) -> GridFunction {
    let grid = f.grid();
    let mut by_radius: Vec<usize> = (0..grid.len()).collect();
    let norms: Vec<f64> = (0..grid.len()).map(|i| grid.center_norm(i)).collect();
    by_radius.sort_by(|&a, &b| norms[a].total_cmp(&norms[b]).then(a.cmp(&b)));
    let sorted = decreasing_rearrangement(f).levels;
    let mut out = vec![0.0; grid.len()];
    for (cell, v) in by_radius.into_iter().zip(sorted) {
        out[cell] = v;
    }
    f.with_values(out).expect("a permutation of finite values is finite")
}

/// `int f* g*`, the upper bound in the Hardy–Littlewood inequality.
pub fn rearranged_pairing(f: &GridFunction, g: &GridFunction) -> Result<f64> {
    f.check_same_grid(g.grid())?;
    let a = decreasing_rearrangement(f).levels;
    let b = decreasing_rearrangement(g).levels;
    let terms: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
    Ok(tree_sum(&terms) * f.grid().cell_measure())
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::Domain(format!("Lorentz exponent p must be at least 1, got {p}")));
    }
    if !(q >= 1.0) {
        return Err(Error::Domain(format!("Lorentz exponent q must lie in [1, inf], got {q}")));
    }
    Ok(())
}

/// `|f|_{(p,q)} = ( int_0^inf [t^{1/p - 1/q} f*(t)]^q dt )^{1/q}`, with the
/// supremum of `t^{1/p} f*(t)` for `q = inf`.
pub fn lorentz_quasi_norm(f: &GridFunction, p: f64, q: f64) -> Result<f64> {
    check_exponents(p, q)?;
    Ok(quasi_norm_of(&decreasing_rearrangement(f), p, q))
}

pub fn quasi_norm_of(fstar: &StepFunction, p: f64, q: f64) -> f64 {
    let windows = fstar.levels.iter().zip(fstar.breakpoints.windows(2));
    if q.is_infinite() {
        // t^{1/p} increases, so each interval peaks at its right end.
        return windows.map(|(f, w)| w[1].powf(1.0 / p) * f).fold(0.0, f64::max);
    }
    let r = q / p;
    let parts: Vec<f64> = windows
        .filter(|(f, _)| **f != 0.0)
        .map(|(f, w)| f.powf(q) * (w[1].powf(r) - w[0].powf(r)) / r)
        .collect();
    tree_sum(&parts).powf(1.0 / q)
}

/// `||f||_{(p,q)}`: as [`lorentz_quasi_norm`] with `f**` in place of `f*`.
///
/// `f**` keeps decaying like `||f||_1 / t` past the support of `f*`; that
/// tail is integrated in closed form.
pub fn lorentz_norm(f: &GridFunction, p: f64, q: f64) -> Result<f64> {
    check_exponents(p, q)?;
    Ok(norm_of(&decreasing_rearrangement(f), p, q))
}

pub fn norm_of(fstar: &StepFunction, p: f64, q: f64) -> f64 {
    let levels = &fstar.levels;
    let bps = &fstar.breakpoints;
    let total = fstar.integral();
    if total == 0.0 {
        return 0.0;
    }
    // On [t_{k-1}, t_k]: f**(t) = f_k + b_k / t with b_k = A_{k-1} - f_k t_{k-1}.
    let mut acc = 0.0;
    let mut pieces = Vec::with_capacity(levels.len());
    for (k, &fk) in levels.iter().enumerate() {
        let (t0, t1) = (bps[k], bps[k + 1]);
        pieces.push((t0, t1, fk, acc - fk * t0));
        acc += fk * (t1 - t0);
    }
    let big_t = fstar.total_measure();

    if q.is_infinite() {
        // t^{1/p} f**(t) is quasi-convex on every interval and non-increasing
        // past big_t, so the supremum sits at a breakpoint.
        return pieces
            .iter()
            .map(|&(_, t1, fk, b)| t1.powf(1.0 / p) * (fk + b / t1))
            .fold(0.0, f64::max);
    }
    if p == 1.0 {
        // f** ~ total / t makes the tail integral diverge logarithmically.
        return f64::INFINITY;
    }
    let r = q / p;
    let rule = gauss_legendre(20);
    let parts: Vec<f64> = pieces
        .iter()
        .map(|&(t0, t1, fk, b)| {
            if b == 0.0 {
                fk.powf(q) * (t1.powf(r) - t0.powf(r)) / r
            } else {
                integrate(&rule, t0, t1, |t| t.powf(r - 1.0) * (fk + b / t).powf(q))
            }
        })
        .collect();
    let tail = total.powf(q) * big_t.powf(r - q) / (q - r);
    (tree_sum(&parts) + tail).powf(1.0 / q)
}
