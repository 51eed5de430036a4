//! Hölder exponent estimation from sampled values: dyadic bins of pair
//! distances, the maximal increment per bin, and a least-squares fit of
//! `log max` against `log distance`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::dist;

/// Fewest sample pairs accepted.
pub const MIN_PAIRS: usize = 200;
/// Smallest accepted ratio between the largest and smallest binned distance.
pub const MIN_SPAN: f64 = 8.0;
pub const EXPONENT_RANGE: (f64, f64) = (0.0, 1.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderOptions {
    /// Pairs closer than this are ignored.
    pub min_distance: f64,
    /// Pairs farther than this are ignored.
    pub max_distance: f64,
    /// Bins with fewer pairs are dropped from the fit.
    pub min_bin_pairs: usize,
    /// Bin maxima at or below this count as zero.
    pub noise_floor: f64,
}

impl Default for HolderOptions {
    fn default() -> Self {
        HolderOptions {
            min_distance: 0.0,
            max_distance: f64::INFINITY,
            min_bin_pairs: 1,
            noise_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderBin {
    /// Distance of the pair realizing the maximum.
    pub distance: f64,
    pub max_increment: f64,
    pub pairs: usize,
}

/// Exponent fit `max |v(x) - v(y)| ≈ C |x - y|^η` over the binned envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// `η̂`, clamped to `[0, 1.5]`; `None` when every increment vanishes.
    pub exponent: Option<f64>,
    /// Unclamped least-squares slope.
    pub raw_slope: Option<f64>,
    /// Two standard errors of the slope.
    pub band: f64,
    /// `C` (exponential of the intercept).
    pub constant: f64,
    pub pairs: usize,
    /// Smallest and largest binned distance.
    pub scale_range: (f64, f64),
    pub bins: Vec<HolderBin>,
    /// All binned maxima are zero.
    pub identically_constant: bool,
}

/// Fits the Hölder envelope of `v` from `(point, value)` samples using all pairs.
pub fn estimate_holder(samples: &[(Vec<f64>, Vec<f64>)], options: HolderOptions) -> Result<HolderFit> {
    let count = samples.len();
    let total_pairs = count * count.saturating_sub(1) / 2;
    if total_pairs < MIN_PAIRS {
        return Err(Error::InvalidParameter(format!(
            "need at least {MIN_PAIRS} sample pairs, got {total_pairs}"
        )));
    }
    // Bin index b covers distances [2^b, 2^{b+1}).
    let mut bins: std::collections::BTreeMap<i32, HolderBin> = std::collections::BTreeMap::new();
    let mut used = 0usize;
    for a in 0..count {
        for b in a + 1..count {
            let r = dist(&samples[a].0, &samples[b].0);
            if !(r > 0.0) || r < options.min_distance || r > options.max_distance {
                continue;
            }
            let inc = dist(&samples[a].1, &samples[b].1);
            used += 1;
            let slot = r.log2().floor() as i32;
            let e = bins.entry(slot).or_insert(HolderBin {
                distance: r,
                max_increment: inc,
                pairs: 0,
            });
            e.pairs += 1;
            if inc > e.max_increment {
                e.max_increment = inc;
                e.distance = r;
            }
        }
    }
    let bins: Vec<HolderBin> = bins.into_values().filter(|b| b.pairs >= options.min_bin_pairs).collect();
    if bins.len() < 2 {
        return Err(Error::InvalidParameter("pair distances fall into fewer than two dyadic bins".into()));
    }
    let lo = bins.iter().map(|b| b.distance).fold(f64::INFINITY, f64::min);
    let hi = bins.iter().map(|b| b.distance).fold(0.0, f64::max);
    if hi / lo < MIN_SPAN {
        return Err(Error::InvalidParameter(format!(
            "pair distances span only a factor {:.3}; need {MIN_SPAN}",
            hi / lo
        )));
    }
    if bins.iter().all(|b| b.max_increment <= options.noise_floor) {
        return Ok(HolderFit {
            exponent: None,
            raw_slope: None,
            band: 0.0,
            constant: 0.0,
            pairs: used,
            scale_range: (lo, hi),
            bins,
            identically_constant: true,
        });
    }
    let pts: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| b.max_increment > options.noise_floor)
        .map(|b| (b.distance.ln(), b.max_increment.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Degenerate("fewer than two bins rise above the noise floor".into()));
    }
    let (slope, intercept, se) = least_squares(&pts);
    Ok(HolderFit {
        exponent: Some(slope.clamp(EXPONENT_RANGE.0, EXPONENT_RANGE.1)),
        raw_slope: Some(slope),
        band: 2.0 * se,
        constant: intercept.exp(),
        pairs: used,
        scale_range: (lo, hi),
        bins,
        identically_constant: false,
    })
}

/// Slope, intercept and slope standard error of the least-squares line.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (0.0, my, f64::INFINITY);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let se = if pts.len() > 2 {
        let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
        (rss / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, intercept, se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_samples(f: impl Fn(f64) -> f64, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        (0..count)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / (count - 1) as f64;
                (vec![x], vec![f(x)])
            })
            .collect()
    }

    #[test]
    fn constant_values_are_reported() {
        let fit = estimate_holder(&line_samples(|_| 3.0, 300), HolderOptions::default()).unwrap();
        assert!(fit.identically_constant);
        assert!(fit.exponent.is_none());
    }

    #[test]
    fn square_root_and_affine() {
        let fit = estimate_holder(&line_samples(|x| x.abs().sqrt(), 2001), HolderOptions::default()).unwrap();
        assert!((fit.exponent.unwrap() - 0.5).abs() < 0.03, "{fit:?}");
        let fit = estimate_holder(&line_samples(|x| 2.0 * x - 1.0, 1001), HolderOptions::default()).unwrap();
        assert!((fit.exponent.unwrap() - 1.0).abs() < 0.02);
    }

    #[test]
    fn rejects_small_or_narrow_samples() {
        assert!(estimate_holder(&line_samples(|x| x, 10), HolderOptions::default()).is_err());
        let window = HolderOptions {
            min_distance: 0.5,
            max_distance: 1.5,
            ..Default::default()
        };
        assert!(estimate_holder(&line_samples(|x| x, 300), window).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn scale_and_translation_invariance(lambda in 0.01f64..100.0, shift in -320i32..320, vshift in -5.0f64..5.0) {
            // Dyadic abscissae and shifts keep pair distances exact.
            let shift = shift as f64 / 64.0;
            let base: Vec<_> = (0..300)
                .map(|i| {
                    let x = i as f64 / 256.0 - 0.5;
                    (vec![x], vec![(3.0 * x).sin() + x.abs().powf(0.7)])
                })
                .collect();
            let fit = estimate_holder(&base, HolderOptions::default()).unwrap();
            let scaled: Vec<_> = base.iter().map(|(x, v)| (vec![x[0] + shift], vec![lambda * v[0] + vshift])).collect();
            let other = estimate_holder(&scaled, HolderOptions::default()).unwrap();
            prop_assert!((fit.raw_slope.unwrap() - other.raw_slope.unwrap()).abs() < 1e-9);
            prop_assert!((other.constant.ln() - fit.constant.ln() - lambda.ln()).abs() < 1e-9);
        }
    }
}
