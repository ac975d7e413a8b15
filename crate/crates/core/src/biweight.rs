//! Tukey biweight functions and their tuning constants.
//!
//! `rho` is normalized to a maximum of 1, so the M-scale equation
//! `mean ρ(r/σ) = b` has breakdown point `b`.

use std::sync::OnceLock;

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[inline]
pub fn rho(u: f64, c: f64) -> f64 {
    let t = (u / c) * (u / c);
    if t >= 1.0 {
        1.0
    } else {
        1.0 - (1.0 - t).powi(3)
    }
}

/// IRWLS weight `ψ(u)/u` up to a constant factor.
#[inline]
pub fn weight(u: f64, c: f64) -> f64 {
    let t = (u / c) * (u / c);
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - t) * (1.0 - t)
    }
}

/// `ψ(u) = u (1 − (u/c)²)²` on `|u| < c`.
#[inline]
pub fn psi(u: f64, c: f64) -> f64 {
    u * weight(u, c)
}

#[inline]
pub fn psi_prime(u: f64, c: f64) -> f64 {
    let t = (u / c) * (u / c);
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - t) * (1.0 - 5.0 * t)
    }
}

pub fn mean_rho(values: &[f64], scale: f64, c: f64) -> f64 {
    values.iter().map(|&v| rho(v / scale, c)).sum::<f64>() / values.len() as f64
}

/// `E ρ(d)` for `d² ~ χ²_p`, using `E[d^{2k}; d ≤ c] = p(p+2)…(p+2k−2)·F_{p+2k}(c²)`.
pub fn expected_rho_chi(c: f64, p: usize) -> f64 {
    let c2 = c * c;
    let pf = p as f64;
    let trunc = |k: usize| -> f64 {
        let mut coef = 1.0;
        for i in 0..k {
            coef *= pf + 2.0 * i as f64;
        }
        let dist = ChiSquared::new(pf + 2.0 * k as f64).expect("positive df");
        coef * dist.cdf(c2)
    };
    let tail = 1.0 - ChiSquared::new(pf).expect("positive df").cdf(c2);
    3.0 / c2 * trunc(1) - 3.0 / (c2 * c2) * trunc(2) + trunc(3) / (c2 * c2 * c2) + tail
}

/// Biweight constant `c` with `E ρ(d) = bdp` under the `p`-variate Gaussian.
pub fn breakdown_constant(p: usize, bdp: f64) -> f64 {
    // E ρ is decreasing in c
    let (mut lo, mut hi) = (1e-3, 100.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_rho_chi(mid, p) > bdp {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// 50%-breakdown constant for regression residuals (`p = 1`), ≈ 1.5476.
pub fn regression_c50() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| breakdown_constant(1, 0.5))
}

/// Gaussian efficiency of the biweight location/regression M-estimator.
pub fn efficiency(c: f64) -> f64 {
    // Simpson on [−c, c]; ψ vanishes outside
    let m = 4000;
    let h = 2.0 * c / m as f64;
    let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (mut a, mut b) = (0.0, 0.0);
    for i in 0..=m {
        let u = -c + i as f64 * h;
        let w = if i == 0 || i == m {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        a += w * psi_prime(u, c) * phi(u);
        b += w * psi(u, c).powi(2) * phi(u);
    }
    a *= h / 3.0;
    b *= h / 3.0;
    a * a / b
}

/// Biweight constant reaching the requested Gaussian efficiency.
pub fn efficiency_constant(target: f64) -> f64 {
    let (mut lo, mut hi) = (0.5, 30.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if efficiency(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `mean ρ(v_i/σ) = b` for `σ` by bracketed false position
/// (Illinois variant) to relative width `1e-10`.
///
/// Returns 0 when at most a fraction `b` of the values are nonzero.
pub fn m_scale(values: &[f64], c: f64, b: f64) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let nonzero = values.iter().filter(|v| **v != 0.0).count();
    if nonzero as f64 <= b * n as f64 {
        return 0.0;
    }
    let f = |s: f64| mean_rho(values, s, c) - b;

    let mut abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let mid = n / 2;
    abs.select_nth_unstable_by(mid, f64::total_cmp);
    let mut s0 = abs[mid] / 0.6745;
    if s0 <= 0.0 {
        s0 = abs.iter().copied().fold(0.0, f64::max);
    }

    let (mut lo, mut hi) = (s0, s0);
    let mut flo = f(lo);
    let mut fhi = flo;
    while flo < 0.0 {
        lo *= 0.5;
        flo = f(lo);
    }
    while fhi > 0.0 {
        hi *= 2.0;
        fhi = f(hi);
    }
    if flo == 0.0 {
        return lo;
    }
    if fhi == 0.0 {
        return hi;
    }

    let mut side = 0i8;
    let mut s = 0.5 * (lo + hi);
    for _ in 0..300 {
        s = (lo * fhi - hi * flo) / (fhi - flo);
        if !(s > lo && s < hi) {
            s = 0.5 * (lo + hi);
        }
        let fs = f(s);
        if fs == 0.0 {
            return s;
        }
        if fs > 0.0 {
            lo = s;
            flo = fs;
            if side == 1 {
                fhi *= 0.5;
            }
            side = 1;
        } else {
            hi = s;
            fhi = fs;
            if side == -1 {
                flo *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= 1e-10 * s {
            break;
        }
    }
    s
}
