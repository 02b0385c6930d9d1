//! Limiting spectral distribution of the noise part of the lag-1
//! autocovariance product matrix.
//!
//! With unit-variance white noise and `p / T -> y`, the companion matrix
//! `B = T^{-2} Y'Y X'X` of `M_eps` has a limiting law `F` supported on
//! `[a 1{y >= 1}, b]`. Its Stieltjes transform solves
//!
//! ```text
//! z^2 m^3 - 2 z (y - 1) m^2 + (y - 1)^2 m - z m - 1 = 0
//! ```
//!
//! and, in terms of the T-transform `T(z) = -1 - z m(z)`,
//!
//! ```text
//! (T + 1) (T + y)^2 = z T.
//! ```
//!
//! Everything here is for `sigma^2 = 1`. The law `F*` of the `p x p` matrix
//! `M_eps` itself satisfies `y F* - F = (y - 1) delta_0`, so its density on
//! `(0, inf)` is `lsd_density / y` (see [`mhat_density`]).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Limiting aspect ratio `y = lim p / T`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AspectRatio(f64);

impl AspectRatio {
    pub fn new(y: f64) -> Result<Self> {
        if y.is_finite() && y > 0.0 {
            Ok(Self(y))
        } else {
            Err(Error::domain(format!(
                "aspect ratio must be finite and > 0, got {y}"
            )))
        }
    }

    /// `p / T` for a finite panel.
    pub fn from_dims(p: usize, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::domain("T must be positive"));
        }
        Self::new(p as f64 / t as f64)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for AspectRatio {
    type Error = Error;

    fn try_from(y: f64) -> Result<Self> {
        Self::new(y)
    }
}

impl From<AspectRatio> for f64 {
    fn from(y: AspectRatio) -> f64 {
        y.0
    }
}

/// The noise law for one aspect ratio, with its edges and `T(b+)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLaw {
    pub y: AspectRatio,
    /// Left edge of the support; zero when `y < 1`.
    pub a: f64,
    pub b: f64,
    pub t_b_plus: f64,
}

impl SpectralLaw {
    pub fn new(y: AspectRatio) -> Self {
        let (a, b) = lsd_edges(y);
        Self {
            y,
            a,
            b,
            t_b_plus: t_at_b_plus(y),
        }
    }

    /// Mass of the atom at zero carried by the companion law `F`.
    pub fn atom_at_zero(&self) -> f64 {
        (1.0 - self.y.value()).max(0.0)
    }

    /// Lower end of the continuous support.
    pub fn left_edge(&self) -> f64 {
        if self.y.value() >= 1.0 {
            self.a
        } else {
            0.0
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.left_edge() && x <= self.b
    }
}

/// A point `z > b` together with its Stieltjes and T-transform values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformPoint {
    pub z: f64,
    pub m: f64,
    pub t: f64,
}

impl TransformPoint {
    pub fn at(z: f64, y: AspectRatio) -> Result<Self> {
        let t = t_transform(z, y)?;
        Ok(Self {
            z,
            m: -(1.0 + t) / z,
            t,
        })
    }
}

/// Support edges `(a, b)` of the noise law. `a` is forced to zero for
/// `y < 1` where the law has an atom at the origin instead of a gap.
pub fn lsd_edges(y: AspectRatio) -> (f64, f64) {
    let y = y.value();
    let s = 1.0 + 8.0 * y;
    // s * sqrt(s) keeps y = 1 exact: 9 * 3 = 27.
    let s32 = s * s.sqrt();
    let base = -1.0 + 20.0 * y + 8.0 * y * y;
    let b = (base + s32) / 8.0;
    let a = if y >= 1.0 {
        ((base - s32) / 8.0).max(0.0)
    } else {
        0.0
    };
    (a, b)
}

/// Functional inverse of the T-transform: `z(t) = (t + 1)(t + y)^2 / t`.
pub fn z_of_t(t: f64, y: AspectRatio) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("z_of_t needs t > 0, got {t}")));
    }
    Ok(z_of_t_unchecked(t, y.value()))
}

#[inline]
pub(crate) fn z_of_t_unchecked(t: f64, y: f64) -> f64 {
    (t + 1.0) * (t + y) * (t + y) / t
}

/// `T(b+)`, the minimizer of [`z_of_t`] over `t > 0`.
///
/// `d/dt ln z(t) = 1/(t+1) + 2/(t+y) - 1/t` vanishes exactly where
/// `2t^2 + t - y = 0`, whose positive root is `(sqrt(1 + 8y) - 1) / 4`.
pub fn t_at_b_plus(y: AspectRatio) -> f64 {
    let y = y.value();
    // rationalized to avoid cancellation for small y
    2.0 * y / ((1.0 + 8.0 * y).sqrt() + 1.0)
}

/// Negative critical point of `z_of_t`; `z_of_t` there equals the left edge `a`.
fn t_at_a_minus(y: f64) -> f64 {
    -((1.0 + 8.0 * y).sqrt() + 1.0) / 4.0
}

/// T-transform of the noise law at a real `z > b`.
///
/// Inverts `z_of_t` on its decreasing branch `(0, T(b+))` by bisection carried
/// down to adjacent floating-point numbers.
pub fn t_transform(z: f64, y: AspectRatio) -> Result<f64> {
    let (_, b) = lsd_edges(y);
    if !(z > b) || !z.is_finite() {
        return Err(Error::domain(format!(
            "t_transform needs z > b = {b}, got {z}"
        )));
    }
    let yv = y.value();
    let mut hi = t_at_b_plus(y);
    // z_of_t(t) > y^2 / t, so the root lies above y^2 / z.
    let mut lo = (yv * yv / z) * 0.5;
    while z_of_t_unchecked(lo, yv) < z {
        lo *= 0.5;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if z_of_t_unchecked(mid, yv) > z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z_lo = z_of_t_unchecked(lo, yv) - z;
    let z_hi = z_of_t_unchecked(hi, yv) - z;
    Ok(if z_lo.abs() <= z_hi.abs() { lo } else { hi })
}

/// Stieltjes transform of the companion law `F` at `z`.
///
/// The cubic has three roots; the genuine transform is picked as follows.
/// For `Im z > 0` it is the root with `Im m > 0` and `Im (z m) > 0` (conjugate symmetry covers
/// `Im z < 0`). For real `z` outside the support it is the real root whose
/// `T = -1 - z m` lies on the monotone branch of the T-transform through
/// `z`: `(0, T(b+))` right of the support, `(T(a-), 0)` (or `(-y, 0)` when
/// `y < 1`) left of it.
pub fn stieltjes_m(z: Complex64, y: AspectRatio) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::domain("stieltjes_m needs a finite argument"));
    }
    if z.im < 0.0 {
        return stieltjes_m(z.conj(), y).map(|m| m.conj());
    }
    let law = SpectralLaw::new(y);
    let yv = y.value();
    let roots = stieltjes_cubic_roots(z, yv);

    if z.im > 0.0 {
        // F lives on [0, inf), so both m and z m map the upper half plane into itself
        let score = |m: &Complex64| m.im.min((z * m).im / z.norm());
        let best = roots
            .iter()
            .copied()
            .max_by(|l, r| score(l).total_cmp(&score(r)))
            .expect("three roots");
        return Ok(best);
    }

    let x = z.re;
    let branch = if x > law.b {
        (0.0, law.t_b_plus)
    } else if x < law.left_edge() && !(yv < 1.0 && x == 0.0) {
        if yv < 1.0 {
            (-yv, 0.0)
        } else {
            (t_at_a_minus(yv), 0.0)
        }
    } else {
        return Err(Error::domain(format!(
            "real z = {x} lies in the support [{}, {}]",
            law.left_edge(),
            law.b
        )));
    };

    let (lo, hi) = branch;
    let slack = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    roots
        .iter()
        .map(|m| (m, -1.0 - z * m))
        .filter(|(_, t)| t.re > lo - slack && t.re < hi + slack)
        .min_by(|(_, l), (_, r)| l.im.abs().total_cmp(&r.im.abs()))
        .map(|(m, _)| Complex64::new(m.re, 0.0))
        .ok_or_else(|| Error::Linalg(format!("no admissible cubic root at z = {x}")))
}

fn stieltjes_cubic_roots(z: Complex64, y: f64) -> [Complex64; 3] {
    let one = Complex64::new(1.0, 0.0);
    let ym1 = y - 1.0;
    cubic_roots(
        z * z,
        -2.0 * ym1 * z,
        Complex64::new(ym1 * ym1, 0.0) - z,
        -one,
    )
}

/// Roots of `c3 x^3 + c2 x^2 + c1 x + c0` via Cardano, each polished by Newton.
fn cubic_roots(c3: Complex64, c2: Complex64, c1: Complex64, c0: Complex64) -> [Complex64; 3] {
    let a = c2 / c3;
    let b = c1 / c3;
    let c = c0 / c3;
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
    let u3_plus = -q / 2.0 + disc;
    let u3_minus = -q / 2.0 - disc;
    let u3 = if u3_plus.norm() >= u3_minus.norm() {
        u3_plus
    } else {
        u3_minus
    };

    let omega = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
    let mut roots = [Complex64::new(0.0, 0.0); 3];
    if u3.norm() == 0.0 {
        roots = [-shift; 3];
    } else {
        let u = u3.powf(1.0 / 3.0);
        let mut w = Complex64::new(1.0, 0.0);
        for r in roots.iter_mut() {
            let uk = u * w;
            *r = uk - p / (3.0 * uk) - shift;
            w *= omega;
        }
    }

    let poly = |x: Complex64| ((c3 * x + c2) * x + c1) * x + c0;
    let dpoly = |x: Complex64| (3.0 * c3 * x + 2.0 * c2) * x + c1;
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let d = dpoly(*r);
            if d.norm() == 0.0 {
                break;
            }
            let next = *r - poly(*r) / d;
            if poly(next).norm() < poly(*r).norm() {
                *r = next;
            } else {
                break;
            }
        }
    }
    roots
}

const DENSITY_EPS: f64 = 1e-9;

/// Density of the continuous part of the companion law `F` at `x > 0`.
///
/// Evaluated as `Im m(x + i eps) / pi` at `eps = 1e-9`, with one Richardson
/// step against `2 eps`. The atom at zero (mass `max(0, 1 - y)`) is not part
/// of the density; see [`SpectralLaw::atom_at_zero`]. Its exact contribution
/// `w eps / (x^2 + eps^2)` is subtracted first, since near `x = eps` it is
/// not linear in `eps`.
pub fn lsd_density(x: f64, y: AspectRatio) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("lsd_density needs x > 0, got {x}")));
    }
    let law = SpectralLaw::new(y);
    if x <= law.left_edge() || x >= law.b {
        return Ok(0.0);
    }
    let at = |eps: f64| -> Result<f64> {
        let atom = law.atom_at_zero() * eps / (x * x + eps * eps);
        Ok((stieltjes_m(Complex64::new(x, eps), y)?.im - atom) / std::f64::consts::PI)
    };
    let d1 = at(DENSITY_EPS)?;
    let d2 = at(2.0 * DENSITY_EPS)?;
    Ok((2.0 * d1 - d2).max(0.0))
}

/// Density of the law `F*` of the `p x p` matrix `M_eps` itself.
pub fn mhat_density(x: f64, y: AspectRatio) -> Result<f64> {
    Ok(lsd_density(x, y)? / y.value())
}
