//! Truncated computational domains, sampled fields and the singular kernel.
//!
//! The whole space is replaced by the box `[-L, L]^dim`, split into `n^dim`
//! equal cells. Fields are piecewise constant on cells and vanish outside the
//! box, so every pairwise energy splits into an interior double sum and an
//! interaction with the exterior that is captured by the per-cell exterior
//! mass `rho`.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::map_rows;

/// Uniform tensor grid on `[-half_width, half_width]^dim`.
///
/// Cells are numbered with the first axis fastest: `i = ix + n * iy`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    n: usize,
    h: f64,
    coords: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, cells_per_dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if cells_per_dim < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells per axis, got {cells_per_dim}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        let n = cells_per_dim;
        let h = 2.0 * half_width / n as f64;
        let axis: Vec<f64> = (0..n).map(|k| -half_width + (k as f64 + 0.5) * h).collect();
        let mut coords = Vec::with_capacity(n.pow(dim as u32) * dim);
        match dim {
            1 => coords.extend_from_slice(&axis),
            _ => {
                for iy in 0..n {
                    for ix in 0..n {
                        coords.push(axis[ix]);
                        coords.push(axis[iy]);
                    }
                }
            }
        }
        Ok(Self { dim, half_width, n, h, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn cells_per_dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn cell_measure(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Total measure of the box.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.cell_measure()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Per-axis cell indices of cell `i`.
    pub fn multi_index(&self, i: usize) -> [usize; 2] {
        match self.dim {
            1 => [i, 0],
            _ => [i % self.n, i / self.n],
        }
    }

    /// Euclidean norm of the center of cell `i`.
    pub fn center_norm(&self, i: usize) -> f64 {
        norm(self.center(i))
    }

    pub fn distance_to(&self, i: usize, point: &[f64]) -> f64 {
        dist(self.center(i), point)
    }

    /// The cell whose closure contains `point`, if the point lies in the box.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if point.len() != self.dim {
            return None;
        }
        let mut idx = [0usize; 2];
        for (k, &x) in point.iter().enumerate() {
            if x < -self.half_width || x > self.half_width {
                return None;
            }
            let j = ((x + self.half_width) / self.h).floor() as usize;
            idx[k] = j.min(self.n - 1);
        }
        Some(idx[0] + self.n * idx[1])
    }

    /// Grid-axis neighbours of cell `i` (up to `2 * dim` of them).
    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        let [ix, iy] = self.multi_index(i);
        let n = self.n;
        let mut out = Vec::with_capacity(4);
        if ix > 0 {
            out.push(i - 1);
        }
        if ix + 1 < n {
            out.push(i + 1);
        }
        if self.dim == 2 {
            if iy > 0 {
                out.push(i - n);
            }
            if iy + 1 < n {
                out.push(i + n);
            }
        }
        out
    }

    /// True when the cell touches the boundary of the box.
    pub fn is_boundary_cell(&self, i: usize) -> bool {
        let [ix, iy] = self.multi_index(i);
        let edge = |k: usize| k == 0 || k + 1 == self.n;
        edge(ix) || (self.dim == 2 && edge(iy))
    }

    /// The same grid dilated by `factor` about the origin.
    pub fn dilated(&self, factor: f64) -> Result<Self> {
        Grid::new(self.dim, self.half_width * factor, self.n)
    }

    pub(crate) fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || self == other
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Surface measure of the unit sphere in `R^dim`.
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        d => 2.0 * PI.powf(d as f64 / 2.0) / gamma_half_integer(d),
    }
}

/// Volume of the unit ball in `R^dim`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    unit_sphere_area(dim) / dim as f64
}

// Gamma(d/2) for positive integers d.
fn gamma_half_integer(d: usize) -> f64 {
    if d % 2 == 0 {
        (1..d / 2).map(|k| k as f64).product()
    } else {
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x < d as f64 / 2.0 - 0.25 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

/// Fractional order `s` and integrability exponent `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracParams {
    pub s: f64,
    pub p: f64,
}

impl FracParams {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidParams(format!("s must lie in (0,1), got {s}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidParams(format!("p must exceed 1, got {p}")));
        }
        Ok(Self { s, p })
    }

    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    /// Exponent of the pair kernel, `dim + s p`.
    pub fn kernel_exponent(&self, dim: usize) -> f64 {
        dim as f64 + self.sp()
    }

    /// Checks the standing assumption `s p < dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        // Re-run the scalar checks too: the fields are public.
        FracParams::new(self.s, self.p)?;
        if self.sp() >= dim as f64 {
            return Err(Error::InvalidParams(format!(
                "s*p = {} must be below the dimension {dim}",
                self.sp()
            )));
        }
        Ok(())
    }
}

/// A piecewise-constant real field on a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.values == other.values
    }
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some((cell, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteSample { cell, value });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(grid: Arc<Grid>, f: F) -> Result<Self> {
        let values = grid.centers().map(f).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// A field on the same grid; values must be finite.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| t * v).collect() }
    }

    pub fn abs(&self) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| v.abs()).collect() }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &Self, f: F) -> Result<Self> {
        self.check_same_grid(other.grid())?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        self.with_values(values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sum_i values[i] * cell_measure`.
    pub fn integral(&self) -> f64 {
        crate::reduce::tree_sum(&self.values) * self.grid.cell_measure()
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub(crate) fn check_same_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid.same_as(grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch("fields live on different grids".into()))
        }
    }
}

/// Serializable description of a grid together with its exterior radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    #[serde(alias = "L")]
    pub half_width: f64,
    #[serde(alias = "n")]
    pub cells_per_dim: usize,
    pub ext_radius: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { dim: 1, half_width: 1.0, cells_per_dim: 64, ext_radius: 2.0 }
    }
}

impl GridSpec {
    pub fn grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::new(self.dim, self.half_width, self.cells_per_dim)?))
    }

    pub fn kernel(&self, params: FracParams) -> Result<KernelTable> {
        KernelTable::build(self.grid()?, params, self.ext_radius)
    }
}

/// Pair kernel `|x_i - x_j|^{-(dim + s p)}` and the exterior interaction mass.
#[derive(Debug, Clone)]
pub struct KernelTable {
    grid: Arc<Grid>,
    params: FracParams,
    ext_radius: f64,
    pair: Vec<f64>,
    rho: Vec<f64>,
}

impl KernelTable {
    /// Builds the table, enforcing `s p < dim`.
    pub fn build(grid: Arc<Grid>, params: FracParams, ext_radius: f64) -> Result<Self> {
        params.check_dim(grid.dim())?;
        Self::build_allowing_supercritical(grid, params, ext_radius)
    }

    /// Builds the table without the `s p < dim` check.
    ///
    /// On a bounded box the discrete energy is well defined for every
    /// `s p > 0`; only whole-space statements need the subcritical range.
    pub fn build_allowing_supercritical(
        grid: Arc<Grid>,
        params: FracParams,
        ext_radius: f64,
    ) -> Result<Self> {
        FracParams::new(params.s, params.p)?;
        let half_width = grid.half_width();
        if !(ext_radius >= 2.0 * half_width) {
            return Err(Error::ExtRadiusTooSmall { ext_radius, half_width });
        }
        let dim = grid.dim();
        let n = grid.cells_per_dim();
        let h = grid.spacing();
        let m = grid.len();
        let exponent = params.kernel_exponent(dim);

        // The kernel only depends on the per-axis index offsets.
        let offsets = n.pow(dim as u32);
        let table: Vec<f64> = (0..offsets)
            .map(|k| {
                let (dx, dy) = (k % n, k / n);
                if k == 0 {
                    0.0
                } else {
                    let r = h * ((dx * dx + dy * dy) as f64).sqrt();
                    r.powf(-exponent)
                }
            })
            .collect();
        let mut pair = vec![0.0; m * m];
        for i in 0..m {
            let [ix, iy] = grid.multi_index(i);
            let row = &mut pair[i * m..(i + 1) * m];
            for (j, entry) in row.iter_mut().enumerate() {
                let [jx, jy] = grid.multi_index(j);
                *entry = table[ix.abs_diff(jx) + n * iy.abs_diff(jy)];
            }
        }

        let rho = exterior_mass(&grid, params, ext_radius);
        Ok(Self { grid, params, ext_radius, pair, rho })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn params(&self) -> FracParams {
        self.params
    }

    pub fn ext_radius(&self) -> f64 {
        self.ext_radius
    }

    pub fn pair(&self, i: usize, j: usize) -> f64 {
        self.pair[i * self.grid.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.grid.len();
        &self.pair[i * m..(i + 1) * m]
    }

    pub fn exterior_mass(&self) -> &[f64] {
        &self.rho
    }

    pub(crate) fn check(&self, u: &GridFunction) -> Result<()> {
        u.check_same_grid(&self.grid)
    }
}

/// `int_{|z| > r} |z|^{-(dim + sp)} dz`.
pub fn radial_tail(dim: usize, sp: f64, r: f64) -> f64 {
    unit_sphere_area(dim) * r.powf(-sp) / sp
}

// Ring quadrature over the extended grid inside the ball of radius
// `ext - |x_i|` about x_i, plus the closed-form tail outside that ball.
fn exterior_mass(grid: &Grid, params: FracParams, ext_radius: f64) -> Vec<f64> {
    let dim = grid.dim();
    let n = grid.cells_per_dim() as i64;
    let h = grid.spacing();
    let l = grid.half_width();
    let exponent = params.kernel_exponent(dim);
    let sp = params.sp();
    let pad = ((ext_radius - l) / h).ceil() as i64;
    let measure = grid.cell_measure();
    let coord = |k: i64| -l + (k as f64 + 0.5) * h;
    let inside = |k: i64| (0..n).contains(&k);

    map_rows(grid.len(), |i| {
        let x = grid.center(i);
        let reach = ext_radius - norm(x);
        let reach2 = reach * reach;
        let mut ring = 0.0;
        let ys: Vec<i64> = if dim == 2 { (-pad..n + pad).collect() } else { vec![0] };
        for &ky in &ys {
            let dy = if dim == 2 { coord(ky) - x[1] } else { 0.0 };
            for kx in -pad..n + pad {
                let exterior = !inside(kx) || (dim == 2 && !inside(ky));
                if !exterior {
                    continue;
                }
                let dx = coord(kx) - x[0];
                let r2 = dx * dx + dy * dy;
                if r2 <= reach2 {
                    ring += r2.sqrt().powf(-exponent);
                }
            }
        }
        ring * measure + radial_tail(dim, sp, reach)
    })
}

/// Region used by indicator weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ x : x[axis] > threshold }`.
    HalfSpace { axis: usize, threshold: f64 },
    /// Axis-aligned box `lower <= x <= upper`.
    Cuboid { lower: Vec<f64>, upper: Vec<f64> },
}

impl Region {
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Region::Ball { center, radius } => dist(x, center) <= *radius,
            Region::HalfSpace { axis, threshold } => x.get(*axis).is_some_and(|v| v > threshold),
            Region::Cuboid { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi),
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match self {
            Region::Ball { center, radius } => {
                if center.len() != dim {
                    return bad(format!("ball center has {} coordinates", center.len()));
                }
                if !(*radius > 0.0) {
                    return bad(format!("ball radius must be positive, got {radius}"));
                }
            }
            Region::HalfSpace { axis, .. } => {
                if *axis >= dim {
                    return bad(format!("half-space axis {axis} out of range"));
                }
            }
            Region::Cuboid { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return bad("cuboid corners must match the dimension".into());
                }
            }
        }
        Ok(())
    }
}

/// Analytic or file-backed description of a weight (or test function).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    /// `scale * |x|^{-alpha}`.
    PowerLaw {
        alpha: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `amplitude * exp(-|x - center|^2 / (2 sigma^2))`.
    Gaussian {
        sigma: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Indicator { region: Region },
    /// `positive - negative`, both parts non-negative.
    Difference { positive: Box<WeightSpec>, negative: Box<WeightSpec> },
    /// CSV in the grid-function layout (coordinates then value).
    FromFile { path: PathBuf },
    Constant { value: f64 },
    /// Smooth bump `amplitude * exp(1 - 1 / (1 - |x - center|^2 / radius^2))`
    /// supported in the ball.
    Bump {
        #[serde(default)]
        center: Option<Vec<f64>>,
        radius: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Product { factors: Vec<WeightSpec> },
}

fn one() -> f64 {
    1.0
}

impl WeightSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        match self {
            WeightSpec::PowerLaw { alpha, scale } => {
                if !(*alpha >= 0.0) || !scale.is_finite() {
                    return bad(format!("power law needs alpha >= 0, got {alpha}"));
                }
            }
            WeightSpec::Gaussian { sigma, center, amplitude } => {
                if !(*sigma > 0.0) {
                    return bad(format!("gaussian needs sigma > 0, got {sigma}"));
                }
                if center.as_ref().is_some_and(|c| c.len() != dim) || !amplitude.is_finite() {
                    return bad("gaussian center must match the dimension".into());
                }
            }
            WeightSpec::Bump { center, radius, amplitude } => {
                if !(*radius > 0.0) || !amplitude.is_finite() {
                    return bad(format!("bump needs radius > 0, got {radius}"));
                }
                if center.as_ref().is_some_and(|c| c.len() != dim) {
                    return bad("bump center must match the dimension".into());
                }
            }
            WeightSpec::Indicator { region } => region.validate(dim)?,
            WeightSpec::Difference { positive, negative } => {
                positive.validate(dim)?;
                negative.validate(dim)?;
            }
            WeightSpec::FromFile { .. } => {}
            WeightSpec::Constant { value } => {
                if !value.is_finite() {
                    return bad("constant must be finite".into());
                }
            }
            WeightSpec::Product { factors } => {
                if factors.is_empty() {
                    return bad("product needs at least one factor".into());
                }
                for f in factors {
                    f.validate(dim)?;
                }
            }
        }
        Ok(())
    }
}

/// Samples `spec` at cell centers.
///
/// A power law whose singular point falls inside a cell is evaluated at the
/// center shifted by `h/4` along every axis.
pub fn sample(grid: &Arc<Grid>, spec: &WeightSpec) -> Result<GridFunction> {
    spec.validate(grid.dim())?;
    let values = match spec {
        WeightSpec::FromFile { path } => {
            crate::io::read_grid_function_csv_on(path, grid)?.into_values()
        }
        WeightSpec::Difference { positive, negative } => {
            let pos = sample(grid, positive)?;
            let neg = sample(grid, negative)?;
            if pos.values().iter().chain(neg.values()).any(|&v| v < 0.0) {
                return Err(Error::InvalidSpec(
                    "both parts of a difference weight must be non-negative".into(),
                ));
            }
            pos.values().iter().zip(neg.values()).map(|(a, b)| a - b).collect()
        }
        WeightSpec::Product { factors } => {
            let mut acc = vec![1.0; grid.len()];
            for f in factors {
                let g = sample(grid, f)?;
                acc.iter_mut().zip(g.values()).for_each(|(a, b)| *a *= b);
            }
            acc
        }
        _ => {
            let h = grid.spacing();
            grid.centers().map(|x| evaluate_pointwise(spec, x, h)).collect()
        }
    };
    GridFunction::new(grid.clone(), values)
}

fn evaluate_pointwise(spec: &WeightSpec, x: &[f64], h: f64) -> f64 {
    let origin = vec![0.0; x.len()];
    let center_or_origin = |c: &Option<Vec<f64>>| c.clone().unwrap_or_else(|| origin.clone());
    match spec {
        WeightSpec::PowerLaw { alpha, scale } => {
            if *alpha == 0.0 {
                return *scale;
            }
            let contains_origin = x.iter().all(|c| c.abs() < 0.5 * h);
            let r = if contains_origin {
                let shifted: Vec<f64> = x.iter().map(|c| c + 0.25 * h).collect();
                norm(&shifted)
            } else {
                norm(x)
            };
            scale * r.powf(-alpha)
        }
        WeightSpec::Gaussian { sigma, center, amplitude } => {
            let r = dist(x, &center_or_origin(center));
            amplitude * (-(r * r) / (2.0 * sigma * sigma)).exp()
        }
        WeightSpec::Bump { center, radius, amplitude } => {
            let q = dist(x, &center_or_origin(center)) / radius;
            if q >= 1.0 {
                0.0
            } else {
                amplitude * (1.0 - 1.0 / (1.0 - q * q)).exp()
            }
        }
        WeightSpec::Indicator { region } => {
            if region.contains(x) {
                1.0
            } else {
                0.0
            }
        }
        WeightSpec::Constant { value } => *value,
        WeightSpec::FromFile { .. } | WeightSpec::Difference { .. } | WeightSpec::Product { .. } => {
            unreachable!("composite specs are sampled as whole fields")
        }
    }
}
