//! Capacities of cell sets, Maz'ya-type weight norms and concentration
//! profiles.
//!
//! `Cap(F)` is the least discrete energy of a field that equals 1 on `F`,
//! takes values in `[0, 1]` elsewhere and vanishes outside the box (or
//! outside a smaller reference domain). The weight norm
//! `sup_F int_F |w| / Cap(F)` is approximated from below over a finite family
//! of balls and super-level sets.

use std::collections::HashSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dist, Grid, GridFunction, KernelTable};
use crate::nonlocal::{energy, laplacian_density, stiffness_matrix};
use crate::reduce::tree_sum;

/// A set of grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSet {
    grid: Arc<Grid>,
    mask: Vec<bool>,
}

impl CellSet {
    pub fn from_mask(grid: Arc<Grid>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "mask of {} entries for {} cells",
                mask.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, mask })
    }

    pub fn empty(grid: Arc<Grid>) -> Self {
        let mask = vec![false; grid.len()];
        Self { grid, mask }
    }

    pub fn full(grid: Arc<Grid>) -> Self {
        let mask = vec![true; grid.len()];
        Self { grid, mask }
    }

    pub fn from_predicate<F: Fn(&[f64]) -> bool>(grid: Arc<Grid>, f: F) -> Self {
        let mask = grid.centers().map(f).collect();
        Self { grid, mask }
    }

    /// Cells whose centers lie in the closed ball.
    pub fn ball(grid: Arc<Grid>, center: &[f64], radius: f64) -> Self {
        Self::from_predicate(grid, |x| dist(x, center) <= radius)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask[i]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn measure(&self) -> f64 {
        self.count() as f64 * self.grid.cell_measure()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &CellSet) -> Result<CellSet> {
        self.combine(other, |a, b| a && b)
    }

    pub fn is_subset_of(&self, other: &CellSet) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    fn combine(&self, other: &CellSet, f: impl Fn(bool, bool) -> bool) -> Result<CellSet> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch("cell sets live on different grids".into()));
        }
        let mask = self.mask.iter().zip(&other.mask).map(|(&a, &b)| f(a, b)).collect();
        Ok(CellSet { grid: self.grid.clone(), mask })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CapacityOptions {
    /// Stop when the gradient-mapping norm drops below `tol * max(1, value)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50_000 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityResult {
    pub value: f64,
    #[serde(skip)]
    pub minimizer: GridFunction,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Set when the target was empty and the value is 0 by convention.
    pub degenerate: bool,
}

/// `Cap(F)` relative to the whole box.
pub fn capacity(f: &CellSet, kt: &KernelTable, opts: &CapacityOptions) -> Result<CapacityResult> {
    capacity_in(f, None, kt, opts, None)
}

/// `Cap(F, Omega)`: fields are additionally forced to vanish outside `domain`.
pub fn capacity_relative(
    f: &CellSet,
    domain: &CellSet,
    kt: &KernelTable,
    opts: &CapacityOptions,
) -> Result<CapacityResult> {
    capacity_in(f, Some(domain), kt, opts, None)
}

/// Like [`capacity`], starting the descent from `start` (projected onto the
/// admissible set first).
pub fn capacity_from(
    f: &CellSet,
    kt: &KernelTable,
    opts: &CapacityOptions,
    start: &GridFunction,
) -> Result<CapacityResult> {
    kt.check(start)?;
    capacity_in(f, None, kt, opts, Some(start.values()))
}

#[derive(Clone, Copy, PartialEq)]
enum Cell {
    One,
    Zero,
    Free,
}

fn classify(f: &CellSet, domain: Option<&CellSet>) -> Vec<Cell> {
    (0..f.mask.len())
        .map(|i| {
            if f.mask[i] {
                Cell::One
            } else if domain.is_some_and(|d| !d.mask[i]) {
                Cell::Zero
            } else {
                Cell::Free
            }
        })
        .collect()
}

fn project(x: &mut [f64], kinds: &[Cell]) {
    for (v, k) in x.iter_mut().zip(kinds) {
        *v = match k {
            Cell::One => 1.0,
            Cell::Zero => 0.0,
            Cell::Free => v.clamp(0.0, 1.0),
        };
    }
}

fn capacity_in(
    f: &CellSet,
    domain: Option<&CellSet>,
    kt: &KernelTable,
    opts: &CapacityOptions,
    start: Option<&[f64]>,
) -> Result<CapacityResult> {
    if !f.grid.same_as(kt.grid()) || domain.is_some_and(|d| !d.grid.same_as(kt.grid())) {
        return Err(Error::GridMismatch("cell set and kernel table disagree".into()));
    }
    let grid = kt.grid().clone();
    if f.is_empty() {
        return Ok(CapacityResult {
            value: 0.0,
            minimizer: GridFunction::zeros(grid),
            iterations: 0,
            grad_norm: 0.0,
            degenerate: true,
        });
    }
    let kinds = classify(f, domain);
    let (x, iterations, grad_norm) = minimize_energy_in_box(kt, &kinds, start, opts)?;
    let value = energy(&x, kt);
    Ok(CapacityResult {
        value,
        minimizer: GridFunction::new(grid, x)?,
        iterations,
        grad_norm,
        degenerate: false,
    })
}

// Accelerated projected gradient (FISTA with backtracking and a monotone
// restart) in the metric sum_i a_i b_i h^d, where the energy gradient is the
// density p * L_i.
fn minimize_energy_in_box(
    kt: &KernelTable,
    kinds: &[Cell],
    start: Option<&[f64]>,
    opts: &CapacityOptions,
) -> Result<(Vec<f64>, usize, f64)> {
    let p = kt.params().p;
    let meas = kt.grid().cell_measure();
    let m = kinds.len();
    let mut x: Vec<f64> = match start {
        Some(s) => s.to_vec(),
        None => kinds.iter().map(|k| if *k == Cell::One { 1.0 } else { 0.0 }).collect(),
    };
    project(&mut x, kinds);
    if !kinds.contains(&Cell::Free) {
        return Ok((x, 0, 0.0));
    }
    let grad = |y: &[f64]| -> Vec<f64> {
        let mut g: Vec<f64> = laplacian_density(y, kt).into_iter().map(|v| p * v).collect();
        for (gi, k) in g.iter_mut().zip(kinds) {
            if *k != Cell::Free {
                *gi = 0.0;
            }
        }
        g
    };
    let inner = |a: &[f64], b: &[f64]| -> f64 {
        let t: Vec<f64> = a.iter().zip(b).map(|(u, v)| u * v).collect();
        tree_sum(&t) * meas
    };

    // Curvature scale from the diagonal of the p = 2 Hessian.
    let diag_max = (0..m)
        .map(|i| {
            let row: f64 = kt.row(i).iter().sum();
            2.0 * p * (row * meas + kt.exterior_mass()[i])
        })
        .fold(0.0, f64::max);
    let mut lip = diag_max.max(1e-12);
    let mut y = x.clone();
    let mut gy = grad(&y);
    let mut t = 1.0f64;
    let mut last_norm = f64::INFINITY;

    // The step is accepted by a gradient Lipschitz test rather than the usual
    // sufficient-decrease test: near the minimizer energy differences drop
    // below rounding of the energy itself, gradient differences do not.
    for iter in 1..=opts.max_iter {
        lip *= 0.8;
        let (x_new, g_new) = loop {
            let mut cand: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - g / lip).collect();
            project(&mut cand, kinds);
            let g_cand = grad(&cand);
            let d: Vec<f64> = cand.iter().zip(&y).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = g_cand.iter().zip(&gy).map(|(a, b)| a - b).collect();
            if inner(&dg, &dg).sqrt() <= lip * inner(&d, &d).sqrt() || lip > 1e30 {
                break (cand, g_cand);
            }
            lip *= 2.0;
        };
        let step: Vec<f64> = y.iter().zip(&x_new).map(|(a, b)| lip * (a - b)).collect();
        let gnorm = inner(&step, &step).sqrt();
        last_norm = gnorm;
        if gnorm <= opts.tol * energy(&x_new, kt).max(1.0) {
            return Ok((x_new, iter, gnorm));
        }
        let moved: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        if inner(&step, &moved) < 0.0 {
            // The extrapolation points uphill: drop the momentum.
            t = 1.0;
            x = x_new;
            y.clone_from(&x);
            gy = g_new;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let mut y_next: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a + beta * (a - b)).collect();
        project(&mut y_next, kinds);
        gy = if beta == 0.0 { g_new } else { grad(&y_next) };
        y = y_next;
        x = x_new;
        t = t_next;
    }
    Err(Error::NotConverged {
        what: "capacity",
        iterations: opts.max_iter,
        residual: last_norm,
        last: Box::new(GridFunction::new(kt.grid().clone(), x)?),
    })
}

/// Exact `p = 2` capacity from the linear system on the free cells.
///
/// The stiffness matrix is a symmetric M-matrix, so the unconstrained
/// minimizer already lies in `[0, 1]`; this is checked, not assumed.
pub fn capacity_linear_oracle(f: &CellSet, domain: Option<&CellSet>, kt: &KernelTable) -> Result<CapacityResult> {
    let a = stiffness_matrix(kt)?;
    let grid = kt.grid().clone();
    if f.is_empty() {
        return Ok(CapacityResult {
            value: 0.0,
            minimizer: GridFunction::zeros(grid),
            iterations: 0,
            grad_norm: 0.0,
            degenerate: true,
        });
    }
    let kinds = classify(f, domain);
    let free: Vec<usize> = (0..kinds.len()).filter(|&i| kinds[i] == Cell::Free).collect();
    let ones: Vec<usize> = (0..kinds.len()).filter(|&i| kinds[i] == Cell::One).collect();
    let mut x: Vec<f64> = kinds.iter().map(|k| if *k == Cell::One { 1.0 } else { 0.0 }).collect();
    if !free.is_empty() {
        let aff = DMatrix::from_fn(free.len(), free.len(), |r, c| a[(free[r], free[c])]);
        let rhs = DVector::from_fn(free.len(), |r, _| -ones.iter().map(|&j| a[(free[r], j)]).sum::<f64>());
        let chol = aff
            .cholesky()
            .ok_or_else(|| Error::LinearAlgebra("free block is not positive definite".into()))?;
        let sol = chol.solve(&rhs);
        for (k, &i) in free.iter().enumerate() {
            let v = sol[k];
            if !(-1e-10..=1.0 + 1e-10).contains(&v) {
                return Err(Error::LinearAlgebra(format!("linear minimizer leaves [0,1] at cell {i}: {v}")));
            }
            x[i] = v.clamp(0.0, 1.0);
        }
    }
    let xv = DVector::from_column_slice(&x);
    let value = xv.dot(&(&a * &xv));
    Ok(CapacityResult { value, minimizer: GridFunction::new(grid, x)?, iterations: 0, grad_norm: 0.0, degenerate: false })
}

/// Grid layout used for ball capacities at several radii.
///
/// For a ball of radius `r` the box half width is `box_ratio * r` and the
/// exterior radius `ext_ratio * r`, so all grids are dilations of each other.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallScalingSetup {
    pub dim: usize,
    pub cells_per_dim: usize,
    pub box_ratio: f64,
    pub ext_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BallScaling {
    pub radii: Vec<f64>,
    pub capacities: Vec<f64>,
    pub slope: f64,
}

/// Least-squares slope of `log Cap(B_r)` against `log r`.
pub fn capacity_ball_scaling(
    radii: &[f64],
    setup: &BallScalingSetup,
    fp: crate::grid::FracParams,
    opts: &CapacityOptions,
) -> Result<BallScaling> {
    if radii.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 radii, got {}", radii.len())));
    }
    let mut capacities = Vec::with_capacity(radii.len());
    for &r in radii {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius must be positive, got {r}")));
        }
        let grid = Arc::new(Grid::new(setup.dim, setup.box_ratio * r, setup.cells_per_dim)?);
        let h = grid.spacing();
        if 2.0 * r / h < 4.0 {
            return Err(Error::Unresolved { radius: r, spacing: h });
        }
        let kt = KernelTable::build(grid.clone(), fp, setup.ext_ratio * r)?;
        let ball = CellSet::ball(grid.clone(), &vec![0.0; setup.dim], r);
        capacities.push(capacity(&ball, &kt, opts)?.value);
    }
    let logs_r: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let logs_c: Vec<f64> = capacities.iter().map(|c| c.ln()).collect();
    Ok(BallScaling { radii: radii.to_vec(), capacities, slope: ls_slope(&logs_r, &logs_c) })
}

pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Candidate sets for the weight-norm estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HardyFamily {
    /// Ball centers sit on every `center_stride`-th cell center per axis.
    pub center_stride: usize,
    /// Ball radii in units of the grid spacing.
    pub radii_cells: Vec<f64>,
    /// Super-level sets `{|w| > t}` with `t` the given quantiles of `|w|` on
    /// its support.
    pub quantiles: Vec<f64>,
    /// Intersect every candidate with `{w != 0}`.
    pub restrict_to_support: bool,
    pub capacity: CapacityOptions,
}

impl Default for HardyFamily {
    fn default() -> Self {
        Self {
            center_stride: 8,
            radii_cells: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            quantiles: vec![0.0, 0.25, 0.5, 0.75, 0.9, 0.95],
            restrict_to_support: true,
            capacity: CapacityOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateKind {
    Ball { center: Vec<f64>, radius: f64 },
    SuperLevel { threshold: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub candidate: CandidateKind,
    pub cells: usize,
    pub numerator: f64,
    pub capacity: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HardyNormEstimate {
    /// Largest ratio found; a lower bound for the supremum over all sets.
    pub estimate: f64,
    #[serde(skip)]
    pub argmax: Option<CellSet>,
    pub argmax_index: Option<usize>,
    pub sweep: Vec<SweepEntry>,
}

fn candidate_family(w: &GridFunction, family: &HardyFamily) -> Result<Vec<(CandidateKind, CellSet)>> {
    let grid = w.grid().clone();
    let n = grid.cells_per_dim();
    let h = grid.spacing();
    let support = CellSet::from_mask(grid.clone(), w.values().iter().map(|v| *v != 0.0).collect())?;
    let stride = family.center_stride.max(1);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |kind: CandidateKind, set: CellSet, out: &mut Vec<(CandidateKind, CellSet)>| -> Result<()> {
        let set = if family.restrict_to_support { set.intersection(&support)? } else { set };
        if !set.is_empty() && seen.insert(set.mask.clone()) {
            out.push((kind, set));
        }
        Ok(())
    };

    // Centers on a lattice offset so that it is symmetric about the box center.
    let first = (n - 1) % stride / 2;
    let axis: Vec<usize> = (first..n).step_by(stride).collect();
    let centers: Vec<usize> = if grid.dim() == 1 {
        axis.clone()
    } else {
        axis.iter().flat_map(|&iy| axis.iter().map(move |&ix| ix + n * iy)).collect()
    };
    for &c in &centers {
        let center = grid.center(c).to_vec();
        for &rc in &family.radii_cells {
            let radius = rc * h;
            let set = CellSet::ball(grid.clone(), &center, radius);
            push(CandidateKind::Ball { center: center.clone(), radius }, set, &mut out)?;
        }
    }

    let mut mags: Vec<f64> = w.values().iter().map(|v| v.abs()).filter(|v| *v > 0.0).collect();
    mags.sort_by(f64::total_cmp);
    if !mags.is_empty() {
        for &q in &family.quantiles {
            let k = ((q.clamp(0.0, 1.0) * (mags.len() - 1) as f64).floor()) as usize;
            // Strictly above the k-th smallest magnitude; the lowest quantile
            // keeps the whole support.
            let threshold = if k == 0 { 0.0 } else { mags[k - 1] };
            let set = CellSet::from_mask(grid.clone(), w.values().iter().map(|v| v.abs() > threshold).collect())?;
            push(CandidateKind::SuperLevel { threshold }, set, &mut out)?;
        }
    }
    Ok(out)
}

/// Lower estimate of `sup_F int_F |w| / Cap(F)` over the candidate family.
pub fn hardy_norm_estimate(w: &GridFunction, kt: &KernelTable, family: &HardyFamily) -> Result<HardyNormEstimate> {
    kt.check(w)?;
    if family.radii_cells.is_empty() && family.quantiles.is_empty() {
        return Err(Error::Empty("the candidate family has no radii and no quantiles".into()));
    }
    if w.is_identically_zero() {
        return Ok(HardyNormEstimate { estimate: 0.0, argmax: None, argmax_index: None, sweep: Vec::new() });
    }
    let candidates = candidate_family(w, family)?;
    let meas = w.grid().cell_measure();
    let evaluated: Vec<Result<SweepEntry>> = candidates
        .par_iter()
        .map(|(kind, set)| {
            let mass: Vec<f64> = set.indices().map(|i| w.values()[i].abs()).collect();
            let numerator = tree_sum(&mass) * meas;
            let cap = capacity(set, kt, &family.capacity)?.value;
            Ok(SweepEntry {
                candidate: kind.clone(),
                cells: set.count(),
                numerator,
                capacity: cap,
                ratio: if cap > 0.0 { numerator / cap } else { 0.0 },
            })
        })
        .collect();
    let sweep: Vec<SweepEntry> = evaluated.into_iter().collect::<Result<_>>()?;
    let mut best: Option<usize> = None;
    for (k, e) in sweep.iter().enumerate() {
        if e.numerator > 0.0 && e.capacity > 0.0 && best.is_none_or(|b| e.ratio > sweep[b].ratio) {
            best = Some(k);
        }
    }
    Ok(HardyNormEstimate {
        estimate: best.map_or(0.0, |b| sweep[b].ratio),
        argmax: best.map(|b| candidates[b].1.clone()),
        argmax_index: best,
        sweep,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationProfile {
    pub radii: Vec<f64>,
    /// Estimates for each radius with the monotonicity of the exact norm
    /// enforced (each value is at least that of every nested restriction).
    pub norm_estimates: Vec<f64>,
    /// Estimates before the monotone correction.
    pub raw_estimates: Vec<f64>,
    pub extrapolated_limit: f64,
}

fn check_resolved(radius: f64, grid: &Grid) -> Result<()> {
    if 2.0 * radius / grid.spacing() < 4.0 {
        return Err(Error::Unresolved { radius, spacing: grid.spacing() });
    }
    Ok(())
}

// The k-th restriction is nested inside all later ones (for `x` profiles the
// radii shrink, for the infinity profile the excluded ball grows), so the
// norm can only decrease along the list.
fn monotone_profile(radii: Vec<f64>, raw: Vec<f64>) -> ConcentrationProfile {
    let mut fixed = raw.clone();
    for k in (0..fixed.len().saturating_sub(1)).rev() {
        fixed[k] = fixed[k].max(fixed[k + 1]);
    }
    let extrapolated_limit = *fixed.last().unwrap_or(&0.0);
    ConcentrationProfile { radii, norm_estimates: fixed, raw_estimates: raw, extrapolated_limit }
}

/// Weight-norm estimates of `w` restricted to `B_r(x)` for shrinking `r`.
pub fn concentration_at(
    w: &GridFunction,
    kt: &KernelTable,
    x: &[f64],
    radii: &[f64],
    family: &HardyFamily,
) -> Result<ConcentrationProfile> {
    kt.check(w)?;
    if radii.is_empty() || radii.windows(2).any(|r| !(r[1] < r[0])) {
        return Err(Error::Domain("concentration radii must be non-empty and strictly decreasing".into()));
    }
    for &r in radii {
        check_resolved(r, kt.grid())?;
    }
    let raw = radii
        .iter()
        .map(|&r| {
            let vals: Vec<f64> = w
                .grid()
                .centers()
                .zip(w.values())
                .map(|(c, &v)| if dist(c, x) <= r { v } else { 0.0 })
                .collect();
            Ok(hardy_norm_estimate(&w.with_values(vals)?, kt, family)?.estimate)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(monotone_profile(radii.to_vec(), raw))
}

/// Weight-norm estimates of `w` restricted to the complement of `B_r(0)` for
/// growing `r`.
pub fn concentration_at_infinity(
    w: &GridFunction,
    kt: &KernelTable,
    radii: &[f64],
    family: &HardyFamily,
) -> Result<ConcentrationProfile> {
    kt.check(w)?;
    if radii.is_empty() || radii.windows(2).any(|r| !(r[1] > r[0])) {
        return Err(Error::Domain("radii at infinity must be non-empty and strictly increasing".into()));
    }
    for &r in radii {
        check_resolved(r, kt.grid())?;
    }
    let raw = radii
        .iter()
        .map(|&r| {
            let vals: Vec<f64> = w
                .grid()
                .centers()
                .zip(w.values())
                .map(|(c, &v)| if crate::grid::norm(c) > r { v } else { 0.0 })
                .collect();
            Ok(hardy_norm_estimate(&w.with_values(vals)?, kt, family)?.estimate)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(monotone_profile(radii.to_vec(), raw))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CompactnessOptions {
    /// Radii (in cells) for the local profiles, largest first.
    pub radii_cells: Vec<f64>,
    /// Radii (as fractions of the half width) for the profile at infinity.
    pub infinity_fractions: Vec<f64>,
    /// Number of local maxima of `|w|` probed.
    pub max_points: usize,
    /// Extra points to probe, e.g. known singularities of the weight.
    pub extra_points: Vec<Vec<f64>>,
    /// A limit counts as vanishing when it is at most `relative_tol` times
    /// the global norm estimate.
    pub relative_tol: f64,
    pub family: HardyFamily,
}

impl Default for CompactnessOptions {
    fn default() -> Self {
        Self {
            radii_cells: vec![8.0, 4.0, 2.0],
            infinity_fractions: vec![0.5, 0.75, 0.9],
            max_points: 4,
            extra_points: Vec::new(),
            relative_tol: 0.5,
            family: HardyFamily::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PointConcentration {
    pub point: Vec<f64>,
    pub profile: ConcentrationProfile,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompactnessVerdict {
    pub global_estimate: f64,
    pub c_star: f64,
    pub c_infinity: f64,
    pub tolerance: f64,
    pub compact_indicating: bool,
    pub points: Vec<PointConcentration>,
    pub infinity_profile: Option<ConcentrationProfile>,
}

/// Cells whose `|w|` is at least that of all grid neighbours, largest first.
pub fn local_maxima(w: &GridFunction, limit: usize) -> Vec<usize> {
    let grid = w.grid();
    let v = w.values();
    let mut peaks: Vec<usize> = (0..grid.len())
        .filter(|&i| v[i] != 0.0 && grid.neighbours(i).iter().all(|&j| v[i].abs() >= v[j].abs()))
        .collect();
    peaks.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    // Plateaus produce runs of equal maxima; keep one representative each.
    let mut out: Vec<usize> = Vec::new();
    for i in peaks {
        if out.iter().all(|&j| !(v[j].abs() == v[i].abs() && grid.neighbours(j).contains(&i))) {
            out.push(i);
        }
        if out.len() == limit {
            break;
        }
    }
    out
}

/// Evaluates `C_w* = max_x C_w(x)` over probe points and `C_w(inf)`; both
/// vanishing indicates a compact weighted embedding.
pub fn compactness_diagnostic(w: &GridFunction, kt: &KernelTable, opts: &CompactnessOptions) -> Result<CompactnessVerdict> {
    kt.check(w)?;
    let grid = kt.grid();
    let h = grid.spacing();
    let global = hardy_norm_estimate(w, kt, &opts.family)?.estimate;
    let tolerance = opts.relative_tol * global;
    if global == 0.0 {
        return Ok(CompactnessVerdict {
            global_estimate: 0.0,
            c_star: 0.0,
            c_infinity: 0.0,
            tolerance,
            compact_indicating: true,
            points: Vec::new(),
            infinity_profile: None,
        });
    }
    let mut probe: Vec<Vec<f64>> = local_maxima(w, opts.max_points)
        .into_iter()
        .map(|i| grid.center(i).to_vec())
        .collect();
    probe.extend(opts.extra_points.iter().cloned());
    let radii: Vec<f64> = opts.radii_cells.iter().map(|r| r * h).collect();
    let points = probe
        .into_iter()
        .map(|x| {
            let profile = concentration_at(w, kt, &x, &radii, &opts.family)?;
            Ok(PointConcentration { point: x, profile })
        })
        .collect::<Result<Vec<_>>>()?;
    let c_star = points.iter().map(|p| p.profile.extrapolated_limit).fold(0.0, f64::max);
    let inf_radii: Vec<f64> = opts.infinity_fractions.iter().map(|f| f * grid.half_width()).collect();
    let infinity_profile = if inf_radii.is_empty() {
        None
    } else {
        Some(concentration_at_infinity(w, kt, &inf_radii, &opts.family)?)
    };
    let c_infinity = infinity_profile.as_ref().map_or(0.0, |p| p.extrapolated_limit);
    Ok(CompactnessVerdict {
        global_estimate: global,
        c_star,
        c_infinity,
        tolerance,
        compact_indicating: c_star <= tolerance && c_infinity <= tolerance,
        points,
        infinity_profile,
    })
}
