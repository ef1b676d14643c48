//! Per-step decoding latency as a function of the step index.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datamodel::{SgnRng, VideoFeatures};
use crate::decoder::banned_tokens;
use crate::error::{Result, SgnError};
use crate::model::Model;
use crate::scalar::Scalar;

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub slope_se: f64,
    /// `slope / slope_se`.
    pub t_stat: f64,
    pub n: usize,
}

impl LineFit {
    /// Two-sided test of a zero slope at the given critical value.
    pub fn slope_is_zero(&self, critical: f64) -> bool {
        self.t_stat.abs() < critical
    }
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n != ys.len() || n < 3 {
        return Err(SgnError::Invalid("line fit needs at least 3 paired observations".into()));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SgnError::Invalid("line fit needs at least two distinct x values".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_se = (rss / (n - 2) as f64 / sxx).sqrt();
    let t_stat = if slope_se > 0.0 {
        slope / slope_se
    } else if slope == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(slope)
    };
    Ok(LineFit {
        intercept,
        slope,
        slope_se,
        t_stat,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub mode: String,
    pub n_frames: usize,
    pub max_len: usize,
    pub repeats: usize,
    /// Median step latency in microseconds, indexed by step (t = 1..=max_len).
    pub median_us: Vec<f64>,
    /// Fit over every kept raw observation, in microseconds per step.
    pub fit: LineFit,
    pub dropped_outliers: usize,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Times every step of forced-length decoding (`<eos>` is never chosen, so
/// every run has exactly `max_len` steps). The decoder states for each t are
/// built once, untimed; each repeat then times the steps in a fresh random
/// order so that warm-up effects are not confounded with t. Observations more
/// than three times their step's median are treated as scheduler noise and
/// dropped.
pub fn bench_decode<T: Scalar>(
    model: &Model<T>,
    video: &VideoFeatures<T>,
    max_len: usize,
    repeats: usize,
    warmup: usize,
) -> Result<BenchReport> {
    if max_len < 3 || repeats == 0 {
        return Err(SgnError::Invalid("bench needs max_len >= 3 and repeats >= 1".into()));
    }
    if max_len > model.dims.max_len {
        return Err(SgnError::Invalid(format!(
            "bench max_len {max_len} exceeds the model's max_len {}",
            model.dims.max_len
        )));
    }
    let mut banned = banned_tokens(model.specials).to_vec();
    banned.push(model.specials.eos);
    let mut states = Vec::with_capacity(max_len);
    let mut state = model.initial_state();
    for _ in 0..max_len {
        let (mut next, out, _) = model.step(video, &state, None)?;
        let token = out
            .probs
            .iter()
            .enumerate()
            .filter(|(i, _)| !banned.contains(i))
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(i, _)| i)
            .ok_or_else(|| SgnError::Invalid("vocabulary has no emittable word".into()))?;
        next.prefix.push(token);
        states.push(std::mem::replace(&mut state, next));
    }
    let mut rng = SgnRng::seed_from_u64(0);
    let mut order: Vec<usize> = (0..max_len).collect();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(repeats); max_len];
    for run in 0..warmup + repeats {
        order.shuffle(&mut rng);
        for &t in &order {
            let start = Instant::now();
            let stepped = model.step(video, &states[t], None)?;
            let us = start.elapsed().as_secs_f64() * 1e6;
            std::hint::black_box(&stepped);
            if run >= warmup {
                samples[t].push(us);
            }
        }
    }
    let mut median_us = Vec::with_capacity(max_len);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut dropped = 0;
    for (t, obs) in samples.iter().enumerate() {
        let m = median(&mut obs.clone());
        median_us.push(m);
        for &y in obs {
            if y > 3.0 * m {
                dropped += 1;
                continue;
            }
            xs.push((t + 1) as f64);
            ys.push(y);
        }
    }
    Ok(BenchReport {
        mode: model.flags.label(),
        n_frames: video.n_frames(),
        max_len,
        repeats,
        median_us,
        fit: fit_line(&xs, &ys)?,
        dropped_outliers: dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 0.5 * x).collect();
        let f = fit_line(&xs, &ys).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
        assert!(f.slope_se < 1e-9);
        assert!(!f.slope_is_zero(1.96));
    }

    #[test]
    fn slope_standard_error_matches_textbook_formula() {
        // y = 1, 3, 2, 4 at x = 1..4: slope 0.8, intercept 0.5, residuals -0.3, 0.9, -0.9, 0.3
        let f = fit_line(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((f.slope - 0.8).abs() < 1e-12);
        assert!((f.intercept - 0.5).abs() < 1e-12);
        let rss: f64 = 0.09 + 0.81 + 0.81 + 0.09;
        let se = (rss / 2.0 / 5.0f64).sqrt();
        assert!((f.slope_se - se).abs() < 1e-12);
    }

    #[test]
    fn flat_data_has_zero_slope() {
        let f = fit_line(&[1.0, 2.0, 3.0, 1.0, 2.0, 3.0], &[5.0, 4.0, 5.0, 5.0, 6.0, 5.0]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert!(f.slope_is_zero(1.96));
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(fit_line(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_line(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
