//! Independent numerical oracles shared by the integration tests. Nothing
//! here calls into the library's spectral or transition code.

#![allow(dead_code)]

pub fn z_of_t(t: f64, y: f64) -> f64 {
    (t + 1.0) * (t + y) * (t + y) / t
}

/// Minimizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Root of `f` on `[lo, hi]` given a sign change, to adjacent floats.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    assert!(flo * f(hi) <= 0.0, "no sign change on [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `T(b+)` as the minimizer of `z_of_t`, and `b` as the minimum.
pub fn edge_by_minimization(y: f64) -> (f64, f64) {
    let t = golden_section(|t| z_of_t(t, y), 1e-9, 10.0 + 10.0 * y, 1e-11);
    (t, z_of_t(t, y))
}

/// T-transform right of the support by bisection on the decreasing branch.
pub fn t_transform_oracle(z: f64, y: f64) -> f64 {
    let (tb, _) = edge_by_minimization(y);
    bisect(|t| z_of_t(t, y) - z, 1e-300_f64.max(y * y / z * 1e-3), tb)
}

/// Spike location by bisection on lambda of the defining equation
/// `(y - g0 T)^2 = g1^2 T (1 + T)` with `T = T(lambda)`: the first sign
/// change met when scanning down from large lambda towards the edge. `None`
/// when there is none above the edge.
pub fn lambda_by_bisection(g0: f64, g1: f64, y: f64) -> Option<f64> {
    let (_, b) = edge_by_minimization(y);
    let resid = |lam: f64| {
        let t = t_transform_oracle(lam, y);
        (y - g0 * t).powi(2) - g1 * g1 * t * (1.0 + t)
    };
    let mut hi = 1e6 * b.max(g0 * g0);
    assert!(resid(hi) > 0.0);
    let n = 4000;
    let lo_end = b * (1.0 + 1e-12);
    let ratio = (lo_end / hi).powf(1.0 / n as f64);
    for _ in 0..n {
        let lo = (hi * ratio).max(lo_end);
        if resid(lo) <= 0.0 {
            return Some(bisect(resid, lo, hi));
        }
        hi = lo;
    }
    None
}

/// Adaptive Simpson quadrature.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, eps, 40)
}

/// `(1/T) sum_t y_t y_{t-1}'` by explicit loops over a series-major panel.
pub fn autocov_loops(series: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = series.len();
    let t = series[0].len() - 1;
    let mut out = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for s in 1..=t {
                acc += series[i][s] * series[j][s - 1];
            }
            out[i][j] = acc / t as f64;
        }
    }
    out
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}
