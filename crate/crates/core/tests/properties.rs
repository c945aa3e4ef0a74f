use std::sync::Arc;

use fracspec::capacity::{capacity, CapacityOptions, CellSet};
use fracspec::eigen::picone_gap;
use fracspec::io::{read_grid_function_csv, write_grid_function_csv};
use fracspec::nonlocal::{gateaux, nonlocal_gradient, rayleigh_quotient, seminorm_p};
use fracspec::rearrangement::{
    decreasing_rearrangement, lorentz_norm, lorentz_quasi_norm, maximal_function, rearranged_pairing,
    schwarz_symmetrization,
};
use fracspec::{FracParams, Grid, GridFunction, KernelTable};
use proptest::prelude::*;

const N: usize = 12;

fn kernel(s: f64, p: f64) -> KernelTable {
    let g = Arc::new(Grid::new(1, 1.0, N).unwrap());
    KernelTable::build(g, FracParams::new(s, p).unwrap(), 2.0).unwrap()
}

fn field(kt: &KernelTable, v: Vec<f64>) -> GridFunction {
    GridFunction::new(kt.grid().clone(), v).unwrap()
}

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, N)
}

fn params() -> impl Strategy<Value = (f64, f64)> {
    (1.2f64..3.5).prop_flat_map(|p| ((0.05f64..(0.95f64).min(0.95 / p)), Just(p)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn seminorm_is_even_and_homogeneous((s, p) in params(), v in values(), t in -3.0f64..3.0) {
        let kt = kernel(s, p);
        let u = field(&kt, v);
        let e = seminorm_p(&u, &kt).unwrap().value;
        prop_assert!(e >= 0.0);
        let neg = seminorm_p(&u.scaled(-1.0), &kt).unwrap().value;
        prop_assert!((neg - e).abs() <= 1e-12 * e.max(1e-300));
        let scaled = seminorm_p(&u.scaled(t), &kt).unwrap().value;
        prop_assert!((scaled - t.abs().powf(p) * e).abs() <= 1e-11 * e.max(1e-300));
    }

    #[test]
    fn gateaux_on_the_diagonal_is_the_seminorm((s, p) in params(), v in values()) {
        let kt = kernel(s, p);
        let u = field(&kt, v);
        let e = seminorm_p(&u, &kt).unwrap().value;
        prop_assert!((gateaux(&u, &u, &kt).unwrap() - e).abs() <= 1e-12 * e.max(1e-300));
    }

    #[test]
    fn gradient_field_accounts_for_the_energy((s, p) in params(), v in values()) {
        let kt = kernel(s, p);
        let u = field(&kt, v);
        let parts = seminorm_p(&u, &kt).unwrap();
        let g = nonlocal_gradient(&u, &kt).unwrap();
        let total: f64 = g.values().iter().map(|x| x.powf(p)).sum::<f64>() * kt.grid().cell_measure();
        let expected = parts.interior_part + 0.5 * parts.boundary_part;
        prop_assert!((total - expected).abs() <= 1e-10 * expected.max(1e-300));
    }

    #[test]
    fn quotient_ignores_scale((s, p) in params(), v in values(), t in 0.01f64..100.0) {
        let kt = kernel(s, p);
        let u = field(&kt, v);
        prop_assume!(!u.is_identically_zero());
        let ones = GridFunction::from_fn(kt.grid().clone(), |_| 1.0).unwrap();
        let q = rayleigh_quotient(&u, &ones, &kt).unwrap();
        let qt = rayleigh_quotient(&u.scaled(t), &ones, &kt).unwrap();
        prop_assert!((q - qt).abs() <= 1e-12 * q);
    }

    #[test]
    fn rearrangement_invariants(v in values()) {
        let g = Arc::new(Grid::new(1, 1.0, N).unwrap());
        let f = GridFunction::new(g, v).unwrap();
        let fs = decreasing_rearrangement(&f);
        prop_assert!(fs.is_non_increasing());
        prop_assert_eq!(fs.total_measure(), f.grid().measure());
        let mut a: Vec<f64> = f.values().iter().map(|x| x.abs()).collect();
        let mut b = fs.levels.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
        let sym = schwarz_symmetrization(&f);
        prop_assert_eq!(&decreasing_rearrangement(&sym).levels, &fs.levels);
        let fss = maximal_function(&fs).unwrap();
        prop_assert!(fss.is_non_increasing());
        for (m, l) in fss.levels.iter().zip(&fs.levels) {
            prop_assert!(*m >= *l * (1.0 - 1e-15));
        }
    }

    #[test]
    fn pairing_bound(v in values(), w in values()) {
        let g = Arc::new(Grid::new(1, 1.0, N).unwrap());
        let f = GridFunction::new(g.clone(), v).unwrap();
        let h = GridFunction::new(g, w).unwrap();
        let lhs: f64 = f.values().iter().zip(h.values()).map(|(a, b)| (a * b).abs()).sum::<f64>()
            * f.grid().cell_measure();
        let rhs = rearranged_pairing(&f, &h).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn lorentz_norm_between_quasi_norm_and_its_multiple(v in values(), p in 1.1f64..4.0, q in 1.0f64..6.0) {
        let g = Arc::new(Grid::new(1, 1.0, N).unwrap());
        let f = GridFunction::new(g, v).unwrap();
        prop_assume!(!f.is_identically_zero());
        let quasi = lorentz_quasi_norm(&f, p, q).unwrap();
        let norm = lorentz_norm(&f, p, q).unwrap();
        prop_assert!(norm >= quasi * (1.0 - 1e-9));
        prop_assert!(norm <= p / (p - 1.0) * quasi * (1.0 + 1e-9));
    }

    #[test]
    fn picone_is_non_negative((s, p) in params(), u in prop::collection::vec(0.0f64..2.0, N), v in prop::collection::vec(0.05f64..2.0, N)) {
        let kt = kernel(s, p);
        let gap = picone_gap(&field(&kt, u), &field(&kt, v), &kt, 0.0).unwrap();
        prop_assert!(gap.min_offdiagonal >= -1e-12);
    }

    #[test]
    fn csv_round_trip_is_exact(v in prop::collection::vec(-1e6f64..1e6, 9)) {
        let g = Arc::new(Grid::new(2, 0.7, 3).unwrap());
        let f = GridFunction::new(g, v).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_grid_function_csv(&f, &path).unwrap();
        let back = read_grid_function_csv(&path).unwrap();
        prop_assert_eq!(back.values(), f.values());
        prop_assert_eq!(back.grid().as_ref(), f.grid().as_ref());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn capacity_is_monotone(mask in prop::collection::vec(any::<bool>(), N), extra in 0usize..N) {
        let kt = kernel(0.3, 2.0);
        let small = CellSet::from_mask(kt.grid().clone(), mask.clone()).unwrap();
        let mut grown = mask;
        grown[extra] = true;
        let large = CellSet::from_mask(kt.grid().clone(), grown).unwrap();
        let opts = CapacityOptions::default();
        let a = capacity(&small, &kt, &opts).unwrap().value;
        let b = capacity(&large, &kt, &opts).unwrap().value;
        prop_assert!(a <= b * (1.0 + 1e-6));
    }
}
