//! Hölder exponent of the lacunary tent series
//! `g(x) = Σ_{i<30} B^{-i} tent((AB)^i x)`, `tent(t) = dist(t, ℤ)`,
//! whose exponent should be `ln B / ln(AB)` when `A, B > 1`.

use serde::{Deserialize, Serialize};

use super::holder::{estimate_holder, HolderFit, HolderOptions};
use crate::error::{Error, Result};

pub const TERMS: usize = 30;
/// Sample points are `m / 2^DYADIC_BITS`.
pub const DYADIC_BITS: u32 = 40;
const BASES: usize = 64;
const OFFSET_LEVELS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderLimitCase {
    pub a: f64,
    pub b: f64,
}

impl HolderLimitCase {
    pub fn predicted(&self) -> f64 {
        self.b.ln() / (self.a * self.b).ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderLimitReport {
    pub case: HolderLimitCase,
    pub predicted: f64,
    pub fit: HolderFit,
    /// `|η̂ - predicted|`.
    pub error: f64,
}

fn tent(t: f64) -> f64 {
    let f = t - t.floor();
    f.min(1.0 - f)
}

/// `g(m / 2^40)`. When `AB` is an integer the fractional parts are exact.
pub fn tent_series(case: HolderLimitCase, m: u64) -> f64 {
    let ab = case.a * case.b;
    let modulus: u128 = 1 << DYADIC_BITS;
    let scale = modulus as f64;
    let integral = ab.fract() == 0.0 && ab < 1e12;
    let mut total = 0.0;
    let mut weight = 1.0;
    if integral {
        let step = ab as u128 % modulus;
        let mut frac = m as u128 % modulus;
        for _ in 0..TERMS {
            total += weight * tent(frac as f64 / scale);
            frac = frac * step % modulus;
            weight /= case.b;
        }
    } else {
        let x = m as f64 / scale;
        let mut power = 1.0;
        for _ in 0..TERMS {
            total += weight * tent(power * x);
            power *= ab;
            weight /= case.b;
        }
    }
    total
}

/// Samples `g` at 64 seeded base points and dyadic offsets `2^{-s}`,
/// `s = 1..30`, and fits the exponent.
pub fn holder_limit_check(case: HolderLimitCase, seed: u64) -> Result<HolderLimitReport> {
    if !(case.a > 1.0 && case.b > 1.0) || !case.a.is_finite() || !case.b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need A > 1 and B > 1, got A = {}, B = {}",
            case.a, case.b
        )));
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let full = 1u64 << DYADIC_BITS;
    let mut samples = Vec::with_capacity(BASES * (OFFSET_LEVELS as usize + 1));
    for _ in 0..BASES {
        let m = rng.gen_range(0..full / 2);
        let mut cluster = vec![m];
        for s in 1..=OFFSET_LEVELS {
            cluster.push(m + (1u64 << (DYADIC_BITS - s)) / 2);
        }
        for m in cluster {
            let x = m as f64 / full as f64;
            samples.push((vec![x], vec![tent_series(case, m)]));
        }
    }
    // Below (AB)^{-TERMS} the truncated series is Lipschitz.
    let cutoff = (case.a * case.b).powi(-(TERMS as i32)).max(2f64.powi(-(DYADIC_BITS as i32) + 4));
    let fit = estimate_holder(
        &samples,
        HolderOptions {
            min_distance: cutoff,
            max_distance: 0.25,
            min_bin_pairs: 1,
            noise_floor: 0.0,
        },
    )?;
    let predicted = case.predicted();
    let error = fit.exponent.map_or(f64::INFINITY, |e| (e - predicted).abs());
    Ok(HolderLimitReport {
        case,
        predicted,
        fit,
        error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_and_float_evaluation_agree() {
        let case = HolderLimitCase { a: 2.0, b: 2.0 };
        for m in [0u64, 1, 12345, 1 << 39, (1 << 40) - 1] {
            let x = m as f64 / (1u64 << 40) as f64;
            let mut float = 0.0;
            for i in 0..12 {
                float += 2f64.powi(-i) * tent(4f64.powi(i) * x);
            }
            let exact = tent_series(case, m);
            assert!((exact - float).abs() < 2f64.powi(-11), "{exact} {float}");
        }
    }

    #[test]
    fn rejects_non_expanding_cases() {
        assert!(holder_limit_check(HolderLimitCase { a: 1.0, b: 2.0 }, 0).is_err());
        assert!(holder_limit_check(HolderLimitCase { a: 2.0, b: 0.5 }, 0).is_err());
    }

    #[test]
    fn recovers_predicted_exponents() {
        for alpha in [0.3, 0.5, 0.7] {
            let case = HolderLimitCase { a: 10f64.powf(1.0 - alpha), b: 10f64.powf(alpha) };
            let report = holder_limit_check(case, 1).unwrap();
            assert!(report.error < 0.05, "alpha {alpha}: {:?}", report.fit.exponent);
        }
        let report = holder_limit_check(HolderLimitCase { a: 2.0, b: 2.0 }, 2).unwrap();
        assert!(report.error < 0.05, "{:?}", report.fit.exponent);
    }

    #[test]
    fn prediction_increases_with_b() {
        let p: Vec<f64> = [1.5, 2.0, 4.0, 8.0].iter().map(|&b| HolderLimitCase { a: 3.0, b }.predicted()).collect();
        assert!(p.windows(2).all(|w| w[0] < w[1]));
    }
}
