//! Standard normal distribution: density, CDF and quantile.
//!
//! The CDF goes through the complementary error function, evaluated with the
//! positive-term series for `erf` on small arguments and the Laplace continued
//! fraction for `erfc` on the tail. The quantile inverts that CDF by bisection,
//! which keeps it monotone in `p`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

const SERIES_CUTOFF: f64 = 2.5;
const QUANTILE_BRACKET: f64 = 40.0;

/// `erf(x)` for moderate `|x|`.
fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (1*3*...*(2n+1))
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        term *= 2.0 * x2 / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= sum.abs() * 1e-17 {
            break;
        }
    }
    2.0 / PI.sqrt() * (-x2).exp() * sum
}

/// `erfc(x)` for `x >= SERIES_CUTOFF` via modified Lentz.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for k in 1..500 {
        let a = k as f64 / 2.0;
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_CUTOFF {
        1.0 - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

pub fn erf(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        erf_series(x)
    } else {
        1.0 - erfc(x)
    }
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

const TABLE_LIMIT: f64 = 8.5;
const TABLE_STEPS_PER_UNIT: f64 = 256.0;

fn cdf_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = (2.0 * TABLE_LIMIT * TABLE_STEPS_PER_UNIT) as usize;
        (0..=n).map(|i| cdf(i as f64 / TABLE_STEPS_PER_UNIT - TABLE_LIMIT)).collect()
    })
}

/// Cheap CDF approximation (absolute error below 5e-7) for search heuristics
/// that evaluate it in hot loops: linear interpolation in a precomputed table.
pub fn cdf_fast(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= -TABLE_LIMIT {
        return 0.0;
    }
    if x >= TABLE_LIMIT {
        return 1.0;
    }
    let table = cdf_table();
    let pos = (x + TABLE_LIMIT) * TABLE_STEPS_PER_UNIT;
    let i = (pos as usize).min(table.len() - 2);
    let frac = pos - i as f64;
    table[i] + frac * (table[i + 1] - table[i])
}

/// Inverse of [`cdf`]: the smallest representable `x` with `cdf(x) >= p`.
///
/// Returns `-inf` for `p <= 0`, `+inf` for `p >= 1` and NaN for NaN input.
pub fn quantile(p: f64) -> f64 {
    if p.is_nan() {
        return f64::NAN;
    }
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (-QUANTILE_BRACKET, QUANTILE_BRACKET);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 {
            break;
        }
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_zero() {
        assert!(quantile(0.5).abs() < 1e-14);
    }

    #[test]
    fn endpoints_map_to_infinities() {
        assert_eq!(quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(quantile(1.0), f64::INFINITY);
        assert!(quantile(f64::NAN).is_nan());
    }

    #[test]
    fn erfc_is_continuous_at_cutoff() {
        let below = 1.0 - erf_series(SERIES_CUTOFF - 1e-12);
        let above = erfc_continued_fraction(SERIES_CUTOFF + 1e-12);
        assert!((below - above).abs() < 1e-14, "{below} vs {above}");
    }

    #[test]
    fn symmetric_quantiles() {
        for &d in &[0.01, 0.1, 0.25, 0.4, 0.49] {
            assert!((quantile(0.5 + d) + quantile(0.5 - d)).abs() < 1e-10);
        }
    }

    #[test]
    fn fast_cdf_is_close() {
        for i in -9000..=9000 {
            let x = i as f64 / 997.0;
            assert!((cdf_fast(x) - cdf(x)).abs() < 5e-7, "{x}");
        }
        assert!(cdf_fast(f64::NAN).is_nan());
    }

    #[test]
    fn deep_tail_keeps_relative_accuracy() {
        // Phi(-10) = 7.619853024160527e-24
        let v = cdf(-10.0);
        assert!((v / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }
}
