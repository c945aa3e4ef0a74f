//! Gauss–Legendre quadrature nodes on `[-1, 1]`.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point rule, computed by Newton iteration on
/// the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..n.div_ceil(2) {
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    (nodes, weights)
}

// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `int_a^b f` with the given rule.
pub fn integrate<F: Fn(f64) -> f64>(rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64, f: F) -> f64 {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_on_polynomials() {
        let rule = gauss_legendre(20);
        assert!((rule.1.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        for deg in 0..40 {
            let got = integrate(&rule, 0.0, 1.0, |x| x.powi(deg));
            assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "degree {deg}");
        }
    }

    #[test]
    fn smooth_non_polynomial() {
        let rule = gauss_legendre(20);
        let got = integrate(&rule, 1.0, 2.0, |t| t.powf(-0.3));
        let exact = (2f64.powf(0.7) - 1.0) / 0.7;
        assert!((got - exact).abs() < 1e-14);
    }
}
