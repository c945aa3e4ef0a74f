//! Discrete Gagliardo energy and the operators derived from it.
//!
//! Sums run over ordered pairs of cells, so every unordered pair is counted
//! twice, and the interaction with the (zero) exterior carries a factor 2 for
//! the same reason.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{dist, GridFunction, KernelTable};
use crate::reduce::{abs_pow, map_rows, signed_pow, tree_sum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeminormValue {
    pub value: f64,
    pub interior_part: f64,
    pub boundary_part: f64,
}

/// `sum_{i != j} |u_i - u_j|^p K_ij h^{2d} + 2 sum_i |u_i|^p rho_i h^d`.
pub fn seminorm_p(u: &GridFunction, kt: &KernelTable) -> Result<SeminormValue> {
    kt.check(u)?;
    let (interior_part, boundary_part) = energy_parts(u.values(), kt);
    Ok(SeminormValue { value: interior_part + boundary_part, interior_part, boundary_part })
}

/// The field `|D^s u|(x_i)`.
///
/// `sum_i out_i^p h^d` equals the interior part plus half the boundary part
/// of [`seminorm_p`].
pub fn nonlocal_gradient(u: &GridFunction, kt: &KernelTable) -> Result<GridFunction> {
    kt.check(u)?;
    let p = kt.params().p;
    let meas = kt.grid().cell_measure();
    let x = u.values();
    let rho = kt.exterior_mass();
    let out = map_rows(x.len(), |i| {
        let xi = x[i];
        let inner: f64 = kt.row(i).iter().zip(x).map(|(k, &xj)| abs_pow(xi - xj, p) * k).sum();
        (inner * meas + abs_pow(xi, p) * rho[i]).powf(1.0 / p)
    });
    u.with_values(out)
}

/// `|D^s u|(x)` at a point outside the box, where `u(x) = 0`.
pub fn nonlocal_gradient_at(u: &GridFunction, kt: &KernelTable, point: &[f64]) -> Result<f64> {
    kt.check(u)?;
    let grid = kt.grid();
    if point.len() != grid.dim() {
        return Err(Error::Domain(format!("point has {} coordinates", point.len())));
    }
    if point.iter().all(|c| c.abs() <= grid.half_width()) {
        return Err(Error::Domain("point must lie outside the computational box".into()));
    }
    let p = kt.params().p;
    let exponent = kt.params().kernel_exponent(grid.dim());
    let terms: Vec<f64> = grid
        .centers()
        .zip(u.values())
        .map(|(c, &v)| abs_pow(v, p) * dist(c, point).powf(-exponent))
        .collect();
    Ok((tree_sum(&terms) * grid.cell_measure()).powf(1.0 / p))
}

/// Weak form of `(-Δ_p)^s u` tested against `v`.
pub fn gateaux(u: &GridFunction, v: &GridFunction, kt: &KernelTable) -> Result<f64> {
    kt.check(u)?;
    kt.check(v)?;
    let p = kt.params().p;
    let meas = kt.grid().cell_measure();
    let (x, y) = (u.values(), v.values());
    let rows = map_rows(x.len(), |i| {
        let (xi, yi) = (x[i], y[i]);
        kt.row(i)
            .iter()
            .zip(x.iter().zip(y))
            .map(|(k, (&xj, &yj))| signed_pow(xi - xj, p) * (yi - yj) * k)
            .sum()
    });
    let bnd: Vec<f64> = x
        .iter()
        .zip(y)
        .zip(kt.exterior_mass())
        .map(|((&a, &b), r)| signed_pow(a, p) * b * r)
        .collect();
    Ok(tree_sum(&rows) * meas * meas + 2.0 * tree_sum(&bnd) * meas)
}

/// Weak residual density of `(-Δ_p)^s u`: `gateaux(u, e_i) / h^d` per cell.
pub fn frac_p_laplacian_apply(u: &GridFunction, kt: &KernelTable) -> Result<GridFunction> {
    kt.check(u)?;
    u.with_values(laplacian_density(u.values(), kt))
}

pub(crate) fn laplacian_density(x: &[f64], kt: &KernelTable) -> Vec<f64> {
    let p = kt.params().p;
    let meas = kt.grid().cell_measure();
    let rho = kt.exterior_mass();
    map_rows(x.len(), |i| {
        let xi = x[i];
        let inner: f64 = kt.row(i).iter().zip(x).map(|(k, &xj)| signed_pow(xi - xj, p) * k).sum();
        2.0 * inner * meas + 2.0 * signed_pow(xi, p) * rho[i]
    })
}

fn energy_parts(x: &[f64], kt: &KernelTable) -> (f64, f64) {
    let p = kt.params().p;
    let meas = kt.grid().cell_measure();
    let rows = map_rows(x.len(), |i| {
        let xi = x[i];
        kt.row(i).iter().zip(x).map(|(k, &xj)| abs_pow(xi - xj, p) * k).sum()
    });
    let bnd: Vec<f64> = x.iter().zip(kt.exterior_mass()).map(|(&v, r)| abs_pow(v, p) * r).collect();
    (tree_sum(&rows) * meas * meas, 2.0 * tree_sum(&bnd) * meas)
}

pub(crate) fn energy(x: &[f64], kt: &KernelTable) -> f64 {
    let (a, b) = energy_parts(x, kt);
    a + b
}

/// `|a + b|^p - |a|^p` without cancellation when `|b| << |a|`.
pub(crate) fn pow_diff(a: f64, b: f64, p: f64) -> f64 {
    if p == 2.0 {
        return b * (2.0 * a + b);
    }
    if a == 0.0 {
        return abs_pow(b, p);
    }
    let r = b / a;
    if r.abs() < 0.5 {
        abs_pow(a, p) * (p * r.ln_1p()).exp_m1()
    } else {
        abs_pow(a + b, p) - abs_pow(a, p)
    }
}

/// `energy(x + d) - energy(x)`, accurate for small `d`.
pub(crate) fn energy_change(x: &[f64], d: &[f64], kt: &KernelTable) -> f64 {
    let p = kt.params().p;
    let meas = kt.grid().cell_measure();
    let rows = map_rows(x.len(), |i| {
        let (xi, di) = (x[i], d[i]);
        kt.row(i)
            .iter()
            .zip(x.iter().zip(d))
            .map(|(k, (&xj, &dj))| if *k == 0.0 { 0.0 } else { pow_diff(xi - xj, di - dj, p) * k })
            .sum()
    });
    let bnd: Vec<f64> = x
        .iter()
        .zip(d)
        .zip(kt.exterior_mass())
        .map(|((&a, &b), r)| pow_diff(a, b, p) * r)
        .collect();
    tree_sum(&rows) * meas * meas + 2.0 * tree_sum(&bnd) * meas
}

/// `W(u) = sum_i w_i |u_i|^p h^d`.
pub fn weighted_mass(u: &GridFunction, w: &GridFunction, p: f64) -> Result<f64> {
    w.check_same_grid(u.grid())?;
    Ok(weighted_mass_raw(u.values(), w.values(), p) * u.grid().cell_measure())
}

pub(crate) fn weighted_mass_raw(x: &[f64], w: &[f64], p: f64) -> f64 {
    let terms: Vec<f64> = x.iter().zip(w).map(|(&a, &b)| b * abs_pow(a, p)).collect();
    tree_sum(&terms)
}

/// `Q(u) = seminorm_p(u) / W(u)`; requires `W(u) > 0`.
pub fn rayleigh_quotient(u: &GridFunction, w: &GridFunction, kt: &KernelTable) -> Result<f64> {
    kt.check(u)?;
    let mass = weighted_mass(u, w, kt.params().p)?;
    if !(mass > 0.0) {
        return Err(Error::Domain(format!(
            "weighted mass {mass:.3e} is not positive; the quotient is undefined"
        )));
    }
    Ok(seminorm_p(u, kt)?.value / mass)
}

/// Symmetric matrix `A` with `seminorm_p(u) = u^T A u` when `p = 2`.
pub fn stiffness_matrix(kt: &KernelTable) -> Result<DMatrix<f64>> {
    if kt.params().p != 2.0 {
        return Err(Error::InvalidParams(format!(
            "the quadratic form needs p = 2, got {}",
            kt.params().p
        )));
    }
    let m = kt.grid().len();
    let meas = kt.grid().cell_measure();
    let rho = kt.exterior_mass();
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        let row = kt.row(i);
        let mut diag = 0.0;
        for (j, &k) in row.iter().enumerate() {
            if j != i {
                a[(i, j)] = -2.0 * k * meas * meas;
                diag += k;
            }
        }
        a[(i, i)] = 2.0 * diag * meas * meas + 2.0 * rho[i] * meas;
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{FracParams, Grid};
    use std::sync::Arc;

    fn table(dim: usize, n: usize, s: f64, p: f64) -> KernelTable {
        let g = Arc::new(Grid::new(dim, 1.0, n).unwrap());
        KernelTable::build(g, FracParams::new(s, p).unwrap(), 2.5).unwrap()
    }

    fn field(kt: &KernelTable, f: impl Fn(usize) -> f64) -> GridFunction {
        let m = kt.grid().len();
        GridFunction::new(kt.grid().clone(), (0..m).map(f).collect()).unwrap()
    }

    #[test]
    fn two_cell_interior_energy() {
        let kt = table(1, 2, 0.4, 2.0);
        let u = field(&kt, |i| if i == 0 { 1.0 } else { 0.0 });
        let v = field(&kt, |i| if i == 1 { 1.0 } else { 0.0 });
        let s = seminorm_p(&u, &kt).unwrap();
        assert_eq!(s.interior_part, 2.0);
        let g = gateaux(&u, &v, &kt).unwrap();
        // The supports of u and v are disjoint, so only the cross pair counts.
        assert_eq!(g, -2.0);
    }

    #[test]
    fn zero_function() {
        let kt = table(2, 5, 0.5, 1.5);
        let z = GridFunction::zeros(kt.grid().clone());
        assert_eq!(seminorm_p(&z, &kt).unwrap().value, 0.0);
        assert!(nonlocal_gradient(&z, &kt).unwrap().is_identically_zero());
        assert!(frac_p_laplacian_apply(&z, &kt).unwrap().is_identically_zero());
    }

    #[test]
    fn gateaux_on_itself_is_the_energy() {
        for p in [1.5, 2.0, 3.0] {
            let kt = table(1, 16, 0.3, p);
            let u = field(&kt, |i| ((i as f64) * 0.7).sin());
            let s = seminorm_p(&u, &kt).unwrap().value;
            let g = gateaux(&u, &u, &kt).unwrap();
            assert!((s - g).abs() <= 1e-12 * s);
        }
    }

    #[test]
    fn gradient_field_reproduces_energy() {
        let kt = table(2, 6, 0.4, 2.5);
        let u = field(&kt, |i| (i as f64 * 0.37).cos());
        let s = seminorm_p(&u, &kt).unwrap();
        let d = nonlocal_gradient(&u, &kt).unwrap();
        let p = 2.5;
        let sum: f64 = d.values().iter().map(|v| v.powf(p)).sum::<f64>() * kt.grid().cell_measure();
        let expected = s.interior_part + 0.5 * s.boundary_part;
        assert!((sum - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn laplacian_is_odd_and_matches_stiffness_at_p2() {
        let kt = table(1, 20, 0.4, 2.0);
        let u = field(&kt, |i| (i as f64 * 0.3).sin() + 0.1);
        let lu = frac_p_laplacian_apply(&u, &kt).unwrap();
        let lneg = frac_p_laplacian_apply(&u.scaled(-1.0), &kt).unwrap();
        for (a, b) in lu.values().iter().zip(lneg.values()) {
            assert_eq!(*a, -*b);
        }
        let a = stiffness_matrix(&kt).unwrap();
        let au = &a * nalgebra::DVector::from_column_slice(u.values());
        let h = kt.grid().cell_measure();
        for (i, v) in lu.values().iter().enumerate() {
            let rel = (v * h - au[i]).abs() / au[i].abs().max(1e-300);
            assert!(rel < 1e-12, "row {i}: {rel}");
        }
        let q = au.dot(&nalgebra::DVector::from_column_slice(u.values()));
        let s = seminorm_p(&u, &kt).unwrap().value;
        assert!((q - s).abs() <= 1e-12 * s);
    }

    #[test]
    fn quotient_rejects_negative_mass() {
        let kt = table(1, 8, 0.4, 2.0);
        let w = field(&kt, |i| if i < 4 { -1.0 } else { 1.0 });
        let u = field(&kt, |i| if i < 4 { 1.0 } else { 0.0 });
        assert!(matches!(rayleigh_quotient(&u, &w, &kt), Err(Error::Domain(_))));
        let u2 = field(&kt, |i| 1.0 + i as f64);
        let q1 = rayleigh_quotient(&u2, &w, &kt).unwrap();
        let q3 = rayleigh_quotient(&u2.scaled(3.0), &w, &kt).unwrap();
        assert!((q1 - q3).abs() <= 1e-12 * q1.abs());
    }

    #[test]
    fn exterior_gradient_decays() {
        let kt = table(1, 16, 0.4, 2.0);
        let u = field(&kt, |_| 1.0);
        let near = nonlocal_gradient_at(&u, &kt, &[1.5]).unwrap();
        let far = nonlocal_gradient_at(&u, &kt, &[6.0]).unwrap();
        assert!(near > far && far > 0.0);
        assert!(nonlocal_gradient_at(&u, &kt, &[0.2]).is_err());
    }

    #[test]
    fn energy_change_matches_direct_difference() {
        for p in [1.5, 2.0, 3.2] {
            let kt = table(1, 24, 0.3, p);
            let x: Vec<f64> = (0..24).map(|i| (i as f64 * 0.4).sin()).collect();
            let d: Vec<f64> = (0..24).map(|i| 0.3 * (i as f64 * 1.1).cos()).collect();
            let moved: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
            let direct = energy(&moved, &kt) - energy(&x, &kt);
            assert!((energy_change(&x, &d, &kt) - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
        let (a, b) = (2.0f64, 1e-9);
        let taylor = 1.5 * a.sqrt() * b + 0.375 / a.sqrt() * b * b;
        assert!((pow_diff(a, b, 1.5) - taylor).abs() <= 1e-14 * taylor);
    }

    #[test]
    fn mismatched_grids_rejected() {
        let kt = table(1, 8, 0.4, 2.0);
        let other = Arc::new(Grid::new(1, 1.0, 10).unwrap());
        let u = GridFunction::zeros(other);
        assert!(matches!(seminorm_p(&u, &kt), Err(Error::GridMismatch(_))));
    }
}
