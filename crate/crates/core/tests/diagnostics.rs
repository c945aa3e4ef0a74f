use std::sync::Arc;

use fracspec::capacity::{
    compactness_diagnostic, concentration_at, concentration_at_infinity, hardy_norm_estimate, CellSet,
    CompactnessOptions, HardyFamily,
};
use fracspec::{sample, FracParams, Grid, GridFunction, KernelTable, Region, WeightSpec};

fn setup(n: usize) -> (Arc<Grid>, KernelTable) {
    let g = Arc::new(Grid::new(1, 1.0, n).unwrap());
    let kt = KernelTable::build(g.clone(), FracParams::new(0.4, 2.0).unwrap(), 2.0).unwrap();
    (g, kt)
}

fn ball(center: f64, radius: f64) -> WeightSpec {
    WeightSpec::Indicator { region: Region::Ball { center: vec![center], radius } }
}

fn compact_weight() -> WeightSpec {
    WeightSpec::Product {
        factors: vec![WeightSpec::Gaussian { sigma: 0.2, center: None, amplitude: 1.0 }, ball(0.0, 0.5)],
    }
}

#[test]
fn estimate_is_linear_in_the_weight() {
    let (g, kt) = setup(32);
    let w = sample(&g, &compact_weight()).unwrap();
    let family = HardyFamily::default();
    let a = hardy_norm_estimate(&w, &kt, &family).unwrap().estimate;
    let b = hardy_norm_estimate(&w.scaled(2.0), &kt, &family).unwrap().estimate;
    assert!((b - 2.0 * a).abs() <= 1e-12 * b);
    let zero = hardy_norm_estimate(&GridFunction::zeros(g), &kt, &family).unwrap();
    assert_eq!(zero.estimate, 0.0);
}

#[test]
fn ball_indicator_is_its_own_best_candidate() {
    let (g, kt) = setup(64);
    let w = sample(&g, &ball(0.0, 0.25)).unwrap();
    let est = hardy_norm_estimate(&w, &kt, &HardyFamily::default()).unwrap();
    let support = CellSet::from_mask(g.clone(), w.values().iter().map(|v| *v > 0.0).collect()).unwrap();
    assert!(support.is_subset_of(est.argmax.as_ref().unwrap()));
}

#[test]
fn compact_support_vanishes_and_hardy_weight_does_not() {
    let (g, kt) = setup(128);
    let opts = CompactnessOptions { extra_points: vec![vec![0.0]], ..CompactnessOptions::default() };
    let compact = compactness_diagnostic(&sample(&g, &compact_weight()).unwrap(), &kt, &opts).unwrap();
    assert!(compact.compact_indicating, "{} > {}", compact.c_star, compact.tolerance);
    let power = sample(&g, &WeightSpec::PowerLaw { alpha: 0.8, scale: 1.0 }).unwrap();
    let verdict = compactness_diagnostic(&power, &kt, &opts).unwrap();
    assert!(!verdict.compact_indicating);
    assert!(verdict.c_star > verdict.tolerance);
    let zero = compactness_diagnostic(&GridFunction::zeros(g), &kt, &opts).unwrap();
    assert!(zero.compact_indicating);
}

#[test]
fn concentration_refines_towards_zero_for_a_bump() {
    let mut ratios = Vec::new();
    for n in [32, 64, 128] {
        let (g, kt) = setup(n);
        let w = sample(&g, &compact_weight()).unwrap();
        let family = HardyFamily::default();
        let h = g.spacing();
        let global = hardy_norm_estimate(&w, &kt, &family).unwrap().estimate;
        let profile = concentration_at(&w, &kt, &[0.0], &[8.0 * h, 4.0 * h, 2.0 * h], &family).unwrap();
        ratios.push(profile.extrapolated_limit / global);
    }
    assert!(ratios.windows(2).all(|r| r[1] < r[0]), "{ratios:?}");
}

#[test]
fn profile_at_infinity() {
    let (g, kt) = setup(64);
    let family = HardyFamily::default();
    let bump = sample(&g, &compact_weight()).unwrap();
    let p = concentration_at_infinity(&bump, &kt, &[0.5, 0.75, 0.9], &family).unwrap();
    assert!(p.norm_estimates.iter().all(|&v| v == 0.0));
    let tail = sample(&g, &WeightSpec::PowerLaw { alpha: 0.8, scale: 3.0 }).unwrap();
    let q = concentration_at_infinity(&tail, &kt, &[0.5, 0.75, 0.9], &family).unwrap();
    assert!(q.extrapolated_limit > 0.0);
    assert!(q.norm_estimates.windows(2).all(|v| v[1] <= v[0]));
}
