//! Derivative-free minimization used by the prox and infimum solvers.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search on `[a, b]`; returns the best point seen.
pub fn golden_section(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut best = (a, f(a));
    let fb = f(b);
    if fb < best.1 {
        best = (b, fb);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v < best.1 {
                best = (x, v);
            }
        }
    }
    best
}

/// Uniform scan with `n` intervals followed by golden-section refinement in
/// the cells next to the best few grid points.
pub fn minimize_interval(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize, tol: f64) -> (f64, f64) {
    let n = n.max(2);
    let h = (hi - lo) / n as f64;
    let vals: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let x = if k == n { hi } else { lo + h * k as f64 };
            (x, f(x))
        })
        .collect();
    let mut order: Vec<usize> = (0..=n).collect();
    order.sort_by(|&i, &j| vals[i].1.total_cmp(&vals[j].1).then(i.cmp(&j)));
    let mut best = vals[order[0]];
    for &k in order.iter().take(3) {
        let a = if k == 0 { lo } else { vals[k - 1].0 };
        let b = if k == n { hi } else { vals[k + 1].0 };
        let r = golden_section(f, a, b, tol);
        if r.1 < best.1 {
            best = r;
        }
    }
    best
}

/// Bounds for a coordinate search.
#[derive(Debug, Clone, Copy)]
pub struct SearchBox<'a> {
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

/// Coordinate descent with golden-section line searches on windows of
/// half-width `step`, shrunk by 4 when a sweep makes no progress.
pub fn coordinate_descent(
    f: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    tol: f64,
    bounds: Option<SearchBox<'_>>,
) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut x = start.to_vec();
    let mut fx = f(&x);
    let mut h = step.max(tol);
    let mut sweeps = 0;
    while h > tol && sweeps < 400 {
        sweeps += 1;
        let before = fx;
        for i in 0..d {
            let (mut a, mut b) = (x[i] - h, x[i] + h);
            if let Some(bx) = bounds {
                a = a.max(bx.lower[i]);
                b = b.min(bx.upper[i]);
            }
            if b <= a {
                continue;
            }
            let mut y = x.clone();
            let line = |s: f64| {
                let mut z = y.clone();
                z[i] = s;
                f(&z)
            };
            let (s, v) = minimize_interval(&line, a, b, 8, tol * 0.1);
            if v < fx {
                y[i] = s;
                x = y;
                fx = v;
            }
        }
        if !(fx < before - 1e-15 * (1.0 + before.abs())) {
            h /= 4.0;
        }
    }
    (x, fx)
}

/// Best of several coordinate-descent runs.
pub fn multi_start(
    f: &dyn Fn(&[f64]) -> f64,
    starts: &[Vec<f64>],
    step: f64,
    tol: f64,
    bounds: Option<SearchBox<'_>>,
) -> Option<(Vec<f64>, f64)> {
    starts
        .iter()
        .map(|s| coordinate_descent(f, s, step, tol, bounds))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_on_parabola() {
        let (x, v) = golden_section(&|x| (x - 0.3) * (x - 0.3), -1.0, 2.0, 1e-12);
        assert!((x - 0.3).abs() < 1e-9 && v < 1e-17);
    }

    #[test]
    fn interval_scan_finds_global_minimum() {
        let f = |x: f64| (x * x - 1.0).powi(2) + 0.1 * x;
        let (x, _) = minimize_interval(&f, -2.0, 2.0, 40, 1e-12);
        assert!((x + 1.0).abs() < 0.05);
    }

    #[test]
    fn interval_scan_handles_infinity() {
        let f = |x: f64| if x < 0.5 { f64::INFINITY } else { x };
        let (x, v) = minimize_interval(&f, 0.0, 1.0, 10, 1e-12);
        assert!((x - 0.5).abs() < 1e-9 && (v - 0.5).abs() < 1e-9);
    }

    #[test]
    fn coordinate_descent_on_nonsmooth() {
        let f = |z: &[f64]| (z[0] - 1.0).abs() + 2.0 * (z[1] + 0.5).abs();
        let (x, v) = coordinate_descent(&f, &[0.0, 0.0], 1.0, 1e-10, None);
        assert!(v < 1e-8, "{x:?} {v}");
    }
}
