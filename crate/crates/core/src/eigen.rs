//! Weighted eigenvalue problem `(-Δ_p)^s u = λ w |u|^{p-2} u`.
//!
//! Eigenvalues are critical values of the Rayleigh quotient
//! `Q(u) = seminorm_p(u) / W(u)` on `{W > 0}`, with `W(u) = int w |u|^p`.
//! The first one is found by descent on `Q`, normalising to `W(u) = 1` after
//! every step; higher levels by deflation against the previously found
//! eigenfunctions in the pairing `int w |u_m|^{p-2} u_m v`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dist, GridFunction, KernelTable};
use crate::nonlocal::{energy, energy_change, laplacian_density, pow_diff, stiffness_matrix, weighted_mass_raw};
use crate::reduce::{abs_pow, signed_pow, tree_sum};

/// `w = w1 - w2` with both parts non-negative.
#[derive(Debug, Clone)]
pub struct Weight {
    w1: GridFunction,
    w2: GridFunction,
    combined: GridFunction,
}

impl Weight {
    pub fn new(w1: GridFunction, w2: GridFunction) -> Result<Self> {
        w1.check_same_grid(w2.grid())?;
        if w1.values().iter().chain(w2.values()).any(|&v| v < 0.0) {
            return Err(Error::InvalidSpec("both weight parts must be non-negative".into()));
        }
        if w1.is_identically_zero() {
            return Err(Error::Domain("the positive part of the weight vanishes identically".into()));
        }
        let combined = w1.zip_with(&w2, |a, b| a - b)?;
        Ok(Self { w1, w2, combined })
    }

    /// Splits a signed field into its positive and negative parts.
    pub fn from_signed(w: &GridFunction) -> Result<Self> {
        Self::new(w.map(|v| v.max(0.0))?, w.map(|v| (-v).max(0.0))?)
    }

    pub fn positive(&self) -> &GridFunction {
        &self.w1
    }

    pub fn negative(&self) -> &GridFunction {
        &self.w2
    }

    pub fn combined(&self) -> &GridFunction {
        &self.combined
    }

    /// `|w|`.
    pub fn absolute(&self) -> Result<Self> {
        Self::new(self.combined.abs(), GridFunction::zeros(self.combined.grid().clone()))
    }

    fn swapped(&self) -> Result<Self> {
        Self::new(self.w2.clone(), self.w1.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeflationMode {
    /// Exact linear constraints: descent directions are projected onto the
    /// subspace where every pairing with a previous eigenfunction vanishes.
    Projection,
    /// Penalty `mu * sum_m |<w psi(u_m), u>|^p` added to the energy, with `mu`
    /// raised by a constant factor between stages. `mu` starts at
    /// `penalty_initial` times the largest previous eigenvalue.
    Penalty,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Relative weak residual at which a solve stops.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    pub deflation: DeflationMode,
    pub penalty_initial: f64,
    pub penalty_growth: f64,
    pub penalty_stages: usize,
    /// Alignment with a previous eigenfunction above which a deflated solve
    /// counts as collapsed.
    pub collapse_alignment: f64,
    pub seed: u64,
    /// Solve for the negative eigenvalues, i.e. with the roles of `w1` and
    /// `w2` exchanged.
    pub negative_spectrum: bool,
    /// Relative threshold used when classifying the sign of eigenfunctions.
    pub sign_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50_000,
            armijo: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            deflation: DeflationMode::Projection,
            penalty_initial: 10.0,
            penalty_growth: 10.0,
            penalty_stages: 4,
            collapse_alignment: 0.99,
            seed: 0,
            negative_spectrum: false,
            sign_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignStructure {
    Nonnegative,
    Nonpositive,
    SignChanging,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SignReport {
    pub tag: SignStructure,
    /// The field vanishes identically.
    pub degenerate: bool,
}

/// Classifies a field, ignoring entries below `tol * max|u|`.
pub fn sign_structure(u: &GridFunction, tol: f64) -> SignReport {
    let scale = u.max_abs();
    if scale == 0.0 {
        return SignReport { tag: SignStructure::Nonnegative, degenerate: true };
    }
    let cut = tol * scale;
    let pos = u.values().iter().any(|&v| v > cut);
    let neg = u.values().iter().any(|&v| v < -cut);
    let tag = match (pos, neg) {
        (true, true) => SignStructure::SignChanging,
        (false, true) => SignStructure::Nonpositive,
        _ => SignStructure::Nonnegative,
    };
    SignReport { tag, degenerate: false }
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    pub lambda: f64,
    #[serde(skip)]
    pub u: GridFunction,
    /// Residual of the solve that produced `u` (for deflated levels, of the
    /// constrained problem).
    pub residual: f64,
    /// [`residual_check`] of the returned pair.
    pub eigen_residual: f64,
    pub iterations: usize,
    /// `|W(u) - 1|`.
    pub constraint_gap: f64,
    pub sign: SignReport,
    /// Rayleigh quotient after every accepted step.
    #[serde(skip)]
    pub history: Vec<f64>,
}

/// `max_i |L_i u - λ w_i |u_i|^{p-2} u_i| / seminorm_p(u)^{(p-1)/p}` where
/// `L u` is the residual density of `(-Δ_p)^s u`. Invariant under `u -> t u`.
pub fn residual_check(lambda: f64, u: &GridFunction, wt: &Weight, kt: &KernelTable) -> Result<f64> {
    kt.check(u)?;
    wt.combined.check_same_grid(u.grid())?;
    if u.is_identically_zero() {
        return Err(Error::Domain("the residual of the zero field is undefined".into()));
    }
    Ok(residual_raw(lambda, u.values(), wt.combined.values(), kt))
}

fn residual_raw(lambda: f64, x: &[f64], w: &[f64], kt: &KernelTable) -> f64 {
    let p = kt.params().p;
    let lap = laplacian_density(x, kt);
    let worst = lap
        .iter()
        .zip(x.iter().zip(w))
        .map(|(l, (&u, &wi))| (l - lambda * wi * signed_pow(u, p)).abs())
        .fold(0.0, f64::max);
    worst / energy(x, kt).powf((p - 1.0) / p)
}

// Fixed data of one descent problem.
struct Problem<'a> {
    kt: &'a KernelTable,
    w: &'a [f64],
    /// Pairing densities `w psi(u_m)` of previous eigenfunctions.
    constraints: Vec<Vec<f64>>,
    /// Inverse Gram matrix of the constraints in the density metric.
    gram_inv: Option<DMatrix<f64>>,
    penalty: Option<f64>,
    meas: f64,
    p: f64,
}

impl<'a> Problem<'a> {
    fn new(kt: &'a KernelTable, w: &'a [f64], constraints: Vec<Vec<f64>>, penalty: Option<f64>) -> Result<Self> {
        let meas = kt.grid().cell_measure();
        let gram_inv = if constraints.is_empty() || penalty.is_some() {
            None
        } else {
            let k = constraints.len();
            let g = DMatrix::from_fn(k, k, |a, b| dot(&constraints[a], &constraints[b]) * meas);
            Some(g.try_inverse().ok_or_else(|| {
                Error::LinearAlgebra("previous eigenfunctions give dependent constraints".into())
            })?)
        };
        Ok(Self { kt, w, constraints, gram_inv, penalty, meas, p: kt.params().p })
    }

    fn pairings(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|b| dot(b, x) * self.meas).collect()
    }

    // Orthogonal projection onto the constraint subspace (density metric).
    fn project(&self, v: &mut [f64]) {
        let Some(gi) = &self.gram_inv else { return };
        let c = DVector::from_vec(self.pairings(v));
        let coef = gi * c;
        for (b, a) in self.constraints.iter().zip(coef.iter()) {
            v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= a * bi);
        }
    }

    fn numerator(&self, x: &[f64]) -> f64 {
        let mut n = energy(x, self.kt);
        if let Some(mu) = self.penalty {
            n += mu * self.pairings(x).iter().map(|c| abs_pow(*c, self.p)).sum::<f64>();
        }
        n
    }

    fn numerator_change(&self, x: &[f64], d: &[f64]) -> f64 {
        let mut dn = energy_change(x, d, self.kt);
        if let Some(mu) = self.penalty {
            let c = self.pairings(x);
            let dc = self.pairings(d);
            dn += mu * c.iter().zip(&dc).map(|(a, b)| pow_diff(*a, *b, self.p)).sum::<f64>();
        }
        dn
    }

    fn mass(&self, x: &[f64]) -> f64 {
        weighted_mass_raw(x, self.w, self.p) * self.meas
    }

    fn mass_change(&self, x: &[f64], d: &[f64]) -> f64 {
        let t: Vec<f64> = x.iter().zip(d).zip(self.w).map(|((&a, &b), &wi)| wi * pow_diff(a, b, self.p)).collect();
        tree_sum(&t) * self.meas
    }

    /// `(grad N - Q grad W) / p` as a density, projected when constrained.
    fn gradient(&self, x: &[f64], q: f64) -> Vec<f64> {
        let p = self.p;
        let mut g: Vec<f64> = laplacian_density(x, self.kt)
            .into_iter()
            .zip(x.iter().zip(self.w))
            .map(|(l, (&u, &wi))| l - q * wi * signed_pow(u, p))
            .collect();
        if let Some(mu) = self.penalty {
            for (b, c) in self.constraints.iter().zip(self.pairings(x)) {
                let f = mu * signed_pow(c, p);
                g.iter_mut().zip(b).for_each(|(gi, bi)| *gi += f * bi);
            }
        }
        self.project(&mut g);
        g
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let t: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    tree_sum(&t)
}

struct Descent {
    x: Vec<f64>,
    q: f64,
    iterations: usize,
    residual: f64,
    history: Vec<f64>,
}

fn normalize(x: &mut [f64], mass: f64, p: f64) {
    let s = mass.powf(-1.0 / p);
    x.iter_mut().for_each(|v| *v *= s);
}

// Armijo descent on the quotient N/W with renormalisation to W = 1.
fn descend(problem: &Problem<'_>, mut x: Vec<f64>, opts: &EigenOptions) -> Result<Descent> {
    let p = problem.p;
    problem.project(&mut x);
    let mass = problem.mass(&x);
    if !(mass > 0.0) {
        return Err(Error::Domain("starting iterate has non-positive weighted mass".into()));
    }
    normalize(&mut x, mass, p);
    let mut n = problem.numerator(&x);
    let mut w = problem.mass(&x);
    let mut q = n / w;
    let mut eta = opts.initial_step;
    let mut history = vec![q];
    let mut residual = f64::INFINITY;

    for iter in 0..=opts.max_iter {
        let g = problem.gradient(&x, q);
        let scale = n.powf((p - 1.0) / p);
        residual = g.iter().fold(0.0, |m: f64, v| m.max(v.abs())) / scale;
        if residual <= opts.tol {
            return Ok(Descent { x, q, iterations: iter, residual, history });
        }
        if iter == opts.max_iter {
            break;
        }
        let slope = p * dot(&g, &g) * problem.meas / w;
        let mut accepted = None;
        while eta > 1e-300 {
            let d: Vec<f64> = g.iter().map(|v| -eta * v).collect();
            let dw = problem.mass_change(&x, &d);
            let w_new = w + dw;
            if w_new > 0.0 {
                let dn = problem.numerator_change(&x, &d);
                let dq = (dn * w - n * dw) / (w * w_new);
                if dq <= -opts.armijo * eta * slope {
                    accepted = Some(d);
                    break;
                }
            }
            eta *= opts.backtrack;
        }
        let Some(d) = accepted else { break };
        x.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        problem.project(&mut x);
        let mass = problem.mass(&x);
        normalize(&mut x, mass, p);
        n = problem.numerator(&x);
        w = problem.mass(&x);
        q = n / w;
        history.push(q);
        eta /= opts.backtrack;
    }
    Err(Error::NotConverged {
        what: "eigenvalue descent",
        iterations: history.len() - 1,
        residual,
        last: Box::new(GridFunction::new(problem.kt.grid().clone(), x)?),
    })
}

// The weight actually used by the descent and its positive part.
fn effective(wt: &Weight, opts: &EigenOptions) -> Result<Weight> {
    if opts.negative_spectrum {
        wt.swapped()
    } else {
        Ok(wt.clone())
    }
}

/// Normalised gaussian bump centred where the positive weight is largest.
pub fn initial_bump(wt: &Weight) -> GridFunction {
    let w1 = wt.positive();
    let grid = w1.grid();
    let peak = (0..grid.len())
        .max_by(|&a, &b| w1.values()[a].total_cmp(&w1.values()[b]).then(b.cmp(&a)))
        .unwrap_or(0);
    let center = grid.center(peak).to_vec();
    let sigma = grid.half_width() / 4.0;
    GridFunction::from_fn(grid.clone(), |x| (-dist(x, &center).powi(2) / (2.0 * sigma * sigma)).exp())
        .expect("gaussian samples are finite")
}

fn seeded_start(wt: &Weight, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = wt.combined();
    // Noise on {w > 0} keeps the weighted mass positive.
    let mut x: Vec<f64> = w
        .values()
        .iter()
        .map(|&wi| if wi > 0.0 { rng.random_range(-1.0..1.0) } else { 0.0 })
        .collect();
    if x.iter().all(|v| *v == 0.0) {
        x = initial_bump(wt).into_values();
    }
    x
}

fn finish(
    kt: &KernelTable,
    wt_original: &Weight,
    d: Descent,
    opts: &EigenOptions,
    flip_to_positive: bool,
) -> Result<EigenResult> {
    let p = kt.params().p;
    let mut x = d.x;
    if flip_to_positive && x.iter().sum::<f64>() < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    let u = GridFunction::new(kt.grid().clone(), x)?;
    let lambda = if opts.negative_spectrum { -d.q } else { d.q };
    let mass = weighted_mass_raw(u.values(), wt_original.combined().values(), p) * kt.grid().cell_measure();
    let target = if opts.negative_spectrum { -1.0 } else { 1.0 };
    let eigen_residual = residual_check(lambda, &u, wt_original, kt)?;
    Ok(EigenResult {
        lambda,
        sign: sign_structure(&u, opts.sign_tol),
        u,
        residual: d.residual,
        eigen_residual,
        iterations: d.iterations,
        constraint_gap: (mass - target).abs(),
        history: d.history,
    })
}

/// First eigenpair, started from a gaussian bump at the peak of `w1`.
pub fn first_eigenpair(wt: &Weight, kt: &KernelTable, opts: &EigenOptions) -> Result<EigenResult> {
    let eff = effective(wt, opts)?;
    first_eigenpair_from(wt, kt, opts, &initial_bump(&eff))
}

/// First eigenpair from a given starting field. A start with non-positive
/// weighted mass is replaced by the default bump.
pub fn first_eigenpair_from(
    wt: &Weight,
    kt: &KernelTable,
    opts: &EigenOptions,
    start: &GridFunction,
) -> Result<EigenResult> {
    kt.check(start)?;
    let eff = effective(wt, opts)?;
    let problem = Problem::new(kt, eff.combined().values(), Vec::new(), None)?;
    let mut x = start.values().to_vec();
    if !(problem.mass(&x) > 0.0) {
        x = initial_bump(&eff).into_values();
        if !(problem.mass(&x) > 0.0) {
            // Cut the bump down to where the weight is positive.
            x.iter_mut().zip(eff.combined().values()).for_each(|(v, &w)| {
                if w <= 0.0 {
                    *v = 0.0;
                }
            });
        }
        if !(problem.mass(&x) > 0.0) {
            return Err(Error::Domain("no starting field with positive weighted mass".into()));
        }
    }
    let d = descend(&problem, x, opts)?;
    finish(kt, wt, d, opts, true)
}

/// Second eigenpair by deflation against `first`.
pub fn second_eigenpair(wt: &Weight, kt: &KernelTable, first: &EigenResult, opts: &EigenOptions) -> Result<EigenResult> {
    deflated_eigenpair(wt, kt, std::slice::from_ref(first), opts)
}

/// Next level after `previous`, deflating every earlier eigenfunction.
pub fn deflated_eigenpair(
    wt: &Weight,
    kt: &KernelTable,
    previous: &[EigenResult],
    opts: &EigenOptions,
) -> Result<EigenResult> {
    let eff = effective(wt, opts)?;
    let p = kt.params().p;
    let w = eff.combined().values();
    let constraints: Vec<Vec<f64>> = previous
        .iter()
        .map(|r| r.u.values().iter().zip(w).map(|(&u, &wi)| wi * signed_pow(u, p)).collect())
        .collect();

    let level = previous.len() as u64;
    let mut last_err = None;
    for attempt in 0..8u64 {
        let start = seeded_start(&eff, opts.seed.wrapping_add(1000 * level + attempt));
        let outcome = match opts.deflation {
            DeflationMode::Projection => {
                let problem = Problem::new(kt, w, constraints.clone(), None)?;
                descend(&problem, start, opts)
            }
            DeflationMode::Penalty => {
                let scale = previous.iter().map(|r| r.lambda.abs()).fold(0.0, f64::max);
                penalty_continuation(kt, w, &constraints, start, opts.penalty_initial * scale, opts)
            }
        };
        match outcome {
            Ok(d) => {
                let result = finish(kt, wt, d, opts, false)?;
                let alignment = previous.iter().map(|r| cosine(r.u.values(), result.u.values())).fold(0.0, f64::max);
                if alignment > opts.collapse_alignment {
                    return Err(Error::Collapse { alignment });
                }
                return Ok(result);
            }
            // The projected start can lose all positive mass; try another.
            Err(Error::Domain(msg)) => last_err = Some(Error::Domain(msg)),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Domain("no admissible deflated start".into())))
}

fn penalty_continuation(
    kt: &KernelTable,
    w: &[f64],
    constraints: &[Vec<f64>],
    start: Vec<f64>,
    mu0: f64,
    opts: &EigenOptions,
) -> Result<Descent> {
    let mut x = start;
    let mut mu = mu0;
    let mut total = 0;
    let mut history = Vec::new();
    let mut last = None;
    for _ in 0..opts.penalty_stages.max(1) {
        let problem = Problem::new(kt, w, constraints.to_vec(), Some(mu))?;
        let d = descend(&problem, x, opts)?;
        total += d.iterations;
        history.extend_from_slice(&d.history);
        x = d.x.clone();
        last = Some(d);
        mu *= opts.penalty_growth;
    }
    let mut d = last.expect("at least one stage");
    // Report the plain quotient, not the penalised one.
    d.q = energy(&d.x, kt) / (weighted_mass_raw(&d.x, w, kt.params().p) * kt.grid().cell_measure());
    d.iterations = total;
    d.history = history;
    Ok(d)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let ab = dot(a, b);
    let aa = dot(a, a);
    let bb = dot(b, b);
    if aa == 0.0 || bb == 0.0 {
        0.0
    } else {
        ab.abs() / (aa.sqrt() * bb.sqrt())
    }
}

/// The first `k` levels, each deflated against all earlier ones, sorted by
/// eigenvalue.
pub fn eigen_sequence(wt: &Weight, kt: &KernelTable, k: usize, opts: &EigenOptions) -> Result<Vec<EigenResult>> {
    if k == 0 {
        return Err(Error::Domain("need at least one level".into()));
    }
    let mut out = vec![first_eigenpair(wt, kt, opts)?];
    while out.len() < k {
        let next = deflated_eigenpair(wt, kt, &out, opts)?;
        out.push(next);
    }
    if opts.negative_spectrum {
        out.sort_by(|a, b| b.lambda.total_cmp(&a.lambda));
    } else {
        out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct OracleEigenpair {
    pub lambda: f64,
    pub u: GridFunction,
}

/// Dense solution of `A u = λ M_w u` for `p = 2`.
///
/// With `A = L L^T`, the pencil is equivalent to the symmetric matrix
/// `L^{-1} M_w L^{-T}`, whose positive eigenvalues `μ` give `λ = 1 / μ`.
/// Returns the positive eigenvalues in ascending order, eigenvectors scaled
/// to `W(u) = 1` with a positive sum.
pub fn linear_oracle(wt: &Weight, kt: &KernelTable) -> Result<Vec<OracleEigenpair>> {
    let a = stiffness_matrix(kt)?;
    wt.combined.check_same_grid(kt.grid())?;
    let m = a.nrows();
    let meas = kt.grid().cell_measure();
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("stiffness matrix is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::LinearAlgebra("Cholesky factor is singular".into()))?;
    let mw = DMatrix::from_diagonal(&DVector::from_iterator(m, wt.combined.values().iter().map(|w| w * meas)));
    let mut c = &l_inv * mw * l_inv.transpose();
    // Symmetrise away rounding before the symmetric solver.
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let lt_inv = l_inv.transpose();
    let mut pairs = Vec::new();
    for (k, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu <= 1e-14 * eig.eigenvalues.amax() {
            continue;
        }
        let y = eig.eigenvectors.column(k);
        let mut u = &lt_inv * y;
        // u^T M_w u = mu * |y|^2.
        let scale = (mu * y.norm_squared()).sqrt();
        u /= scale;
        if u.sum() < 0.0 {
            u = -u;
        }
        pairs.push(OracleEigenpair { lambda: 1.0 / mu, u: GridFunction::new(kt.grid().clone(), u.as_slice().to_vec())? });
    }
    pairs.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(pairs)
}

/// Kernel-free Picone expression
/// `|u_i - u_j|^p - |v_i - v_j|^{p-2}(v_i - v_j)(u_i^p / v_i^{p-1} - u_j^p / v_j^{p-1})`.
pub fn picone_pair(ui: f64, uj: f64, vi: f64, vj: f64, p: f64) -> f64 {
    let r = |u: f64, v: f64| abs_pow(u, p) / v.powf(p - 1.0);
    abs_pow(ui - uj, p) - signed_pow(vi - vj, p) * (r(ui, vi) - r(uj, vj))
}

#[derive(Debug, Clone, Serialize)]
pub struct PiconeGap {
    /// `sum_j K(u,v)(x_i, x_j) |x_i - x_j|^{-(d+sp)} h^d` per cell.
    #[serde(skip)]
    pub per_cell: GridFunction,
    /// Minimum over all ordered pairs, including `i = j` (where it is 0).
    pub min: f64,
    /// Minimum over pairs with `i != j`.
    pub min_offdiagonal: f64,
    /// Largest `|K|` over all pairs.
    pub max_abs: f64,
    /// Minimum of `K` divided by the magnitude of its two terms.
    pub min_relative: f64,
}

/// Evaluates the Picone expression for `u >= 0`, `v >= eps` over all pairs.
pub fn picone_gap(u: &GridFunction, v: &GridFunction, kt: &KernelTable, eps: f64) -> Result<PiconeGap> {
    kt.check(u)?;
    kt.check(v)?;
    if let Some(x) = u.values().iter().find(|x| **x < 0.0) {
        return Err(Error::Domain(format!("u must be non-negative, found {x}")));
    }
    if let Some(x) = v.values().iter().find(|x| **x < eps) {
        return Err(Error::Domain(format!("v must be at least {eps}, found {x}")));
    }
    let p = kt.params().p;
    let meas = kt.grid().cell_measure();
    let (a, b) = (u.values(), v.values());
    let rows: Vec<(f64, f64, f64, f64)> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let (mut acc, mut mn, mut mx, mut rel) = (0.0, f64::INFINITY, 0.0f64, f64::INFINITY);
            for j in 0..a.len() {
                if j == i {
                    continue;
                }
                let k = picone_pair(a[i], a[j], b[i], b[j], p);
                let r = |x: f64, y: f64| abs_pow(x, p) / y.powf(p - 1.0);
                let size = abs_pow(a[i] - a[j], p) + (signed_pow(b[i] - b[j], p) * (r(a[i], b[i]) - r(a[j], b[j]))).abs();
                acc += k * kt.pair(i, j);
                mn = mn.min(k);
                mx = mx.max(k.abs());
                if size > 0.0 {
                    rel = rel.min(k / size);
                }
            }
            (acc * meas, mn, mx, rel)
        })
        .collect();
    let per_cell = u.with_values(rows.iter().map(|r| r.0).collect())?;
    let min_offdiagonal = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    Ok(PiconeGap {
        per_cell,
        min: min_offdiagonal.min(0.0),
        min_offdiagonal,
        max_abs: rows.iter().map(|r| r.2).fold(0.0, f64::max),
        min_relative: rows.iter().map(|r| r.3).fold(f64::INFINITY, f64::min).min(0.0),
    })
}

/// `((phi1^p + phi2^p) / 2)^{1/p}` for non-negative fields.
pub fn midpoint_function(phi1: &GridFunction, phi2: &GridFunction, p: f64) -> Result<GridFunction> {
    phi1.zip_with(phi2, |a, b| (0.5 * (abs_pow(a, p) + abs_pow(b, p))).powf(1.0 / p))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimplicityReport {
    pub lambdas: Vec<f64>,
    pub lambda_spread: f64,
    /// Largest sup-norm distance between eigenfunctions normalised to
    /// `W = 1` and a positive sum.
    pub function_spread: f64,
    /// `J(Phi) - λ1 W(Phi)` for the midpoint of the two most distant
    /// eigenfunctions; zero when they coincide.
    pub convexity_gap: f64,
}

/// First eigenpairs from `restarts` seeded random starts.
pub fn simplicity_probe(wt: &Weight, kt: &KernelTable, restarts: usize, opts: &EigenOptions) -> Result<SimplicityReport> {
    if restarts < 2 {
        return Err(Error::Domain(format!("need at least 2 restarts, got {restarts}")));
    }
    let eff = effective(wt, opts)?;
    let starts: Vec<GridFunction> = (0..restarts as u64)
        .map(|k| GridFunction::new(kt.grid().clone(), seeded_start(&eff, opts.seed.wrapping_add(7919 * (k + 1)))))
        .collect::<Result<_>>()?;
    simplicity_probe_from(wt, kt, &starts, opts)
}

pub fn simplicity_probe_from(
    wt: &Weight,
    kt: &KernelTable,
    starts: &[GridFunction],
    opts: &EigenOptions,
) -> Result<SimplicityReport> {
    if starts.len() < 2 {
        return Err(Error::Domain(format!("need at least 2 starts, got {}", starts.len())));
    }
    let results: Vec<EigenResult> = starts
        .par_iter()
        .map(|s| first_eigenpair_from(wt, kt, opts, s))
        .collect::<Result<_>>()?;
    let lambdas: Vec<f64> = results.iter().map(|r| r.lambda).collect();
    let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut spread = 0.0;
    let mut pair = (0, 1);
    for a in 0..results.len() {
        for b in a + 1..results.len() {
            let d = results[a]
                .u
                .values()
                .iter()
                .zip(results[b].u.values())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            if d > spread {
                spread = d;
                pair = (a, b);
            }
        }
    }
    let p = kt.params().p;
    let phi = midpoint_function(&results[pair.0].u.abs(), &results[pair.1].u.abs(), p)?;
    let w = effective(wt, opts)?;
    let mass = weighted_mass_raw(phi.values(), w.combined().values(), p) * kt.grid().cell_measure();
    let lambda1 = results.iter().map(|r| r.lambda.abs()).fold(f64::INFINITY, f64::min);
    let convexity_gap = energy(phi.values(), kt) - lambda1 * mass;
    Ok(SimplicityReport { lambdas, lambda_spread: hi - lo, function_spread: spread, convexity_gap })
}

/// A smooth sign-changing test profile, `sin(pi x / L)` along the first axis.
pub fn sine_profile(kt: &KernelTable) -> GridFunction {
    let l = kt.grid().half_width();
    GridFunction::from_fn(kt.grid().clone(), |x| (PI * x[0] / l).sin()).expect("finite")
}
