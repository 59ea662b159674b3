use super::ThresholdPolicy;
use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::numeric::{bisect, golden_section_min};

/// Samples used to bracket threshold crossings of `p₀`.
const BRACKET_SAMPLES: usize = 4000;

/// Reads the threshold policy off the switching law `u = 1 ⇔ p₀(t) < −c₁`.
///
/// Crossings of `p₀ + c₁` are bracketed on a uniform sample and refined by
/// bisection. Sampled local minima that stay above the threshold are probed
/// with a golden-section search so that narrow dips are not missed. Ties
/// (`p₀ = −c₁`) count as inactive.
pub fn extract_policy<F: Fn(f64) -> f64>(p0: F, params: &SystemParams) -> Result<ThresholdPolicy> {
    let horizon = params.horizon;
    let c1 = params.c1;
    let s = |t: f64| p0(t) + c1;

    let mut samples: Vec<(f64, f64)> = (0..=BRACKET_SAMPLES)
        .map(|i| {
            let t = if i == BRACKET_SAMPLES {
                horizon
            } else {
                horizon * i as f64 / BRACKET_SAMPLES as f64
            };
            (t, s(t))
        })
        .collect();

    let mut dips = Vec::new();
    for w in samples.windows(3) {
        let (a, b, c) = (w[0], w[1], w[2]);
        if b.1 >= 0.0 && b.1 <= a.1 && b.1 <= c.1 {
            let (t, v) = golden_section_min(&s, a.0, c.0, 1e-12 * horizon);
            if v < 0.0 {
                dips.push((t, v));
            }
        }
    }
    if !dips.is_empty() {
        samples.extend(dips);
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        samples.dedup_by(|a, b| a.0 == b.0);
    }

    let tol = 1e-12 * horizon;
    let mut intervals = Vec::new();
    let mut i = 0;
    while i < samples.len() {
        if samples[i].1 < 0.0 {
            let start_idx = i;
            while i + 1 < samples.len() && samples[i + 1].1 < 0.0 {
                i += 1;
            }
            let start = if start_idx == 0 {
                0.0
            } else {
                bisect(&s, samples[start_idx - 1].0, samples[start_idx].0, tol)
            };
            let end = if i + 1 == samples.len() {
                horizon
            } else {
                bisect(&s, samples[i].0, samples[i + 1].0, tol)
            };
            intervals.push((start, end));
        }
        i += 1;
    }

    match intervals.as_slice() {
        [] => Ok(ThresholdPolicy::null()),
        [(on, off)] => ThresholdPolicy::new(*on, *off, horizon),
        many => Err(Error::MultipleIntervals { count: many.len() }),
    }
}
