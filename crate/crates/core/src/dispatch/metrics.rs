//! Tracking metrics: normalized RMSE, delay recovery, and the
//! correlation/delay/precision performance triple.

#[allow(unused_imports)]
use nalgebra::{ComplexField as _, RealField as _};


use super::DispatchError;
use crate::math;

/// Five-minute reference window of the delay score, in seconds.
const DELAY_WINDOW: f64 = 300.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingReport {
    /// `√(Σ(prov−tar)² / Σtar²)`, unshifted.
    pub rmse: f64,
    /// RMSE after shifting the provided stream by the recovered delay.
    pub rmse_aligned: f64,
    /// Delay in seconds: the shift minimizing the aligned RMSE.
    pub delay: usize,
    pub correlation_score: f64,
    pub delay_score: f64,
    pub precision_score: f64,
    /// `(S_c + S_d + S_p)/3`.
    pub performance_score: f64,
}

fn rmse_of(provided: &[f64], target: &[f64]) -> f64 {
    let num: f64 = provided.iter().zip(target).map(|(&p, &t)| (p - t) * (p - t)).sum();
    let den: f64 = target.iter().map(|&t| t * t).sum();
    (num / den).sqrt()
}

/// Scores a provided stream against its target. The delay is the shift of
/// the provided stream (within `[0, max_shift]` seconds) that minimizes
/// aligned RMSE; correlation and precision are evaluated on the aligned
/// pair. The delay score `|δ − 5 min| / 5 min` is clamped to `[0, 1]`.
pub fn tracking_metrics(
    provided: &[f64],
    target: &[f64],
    max_shift: usize,
) -> Result<TrackingReport, DispatchError> {
    if provided.len() != target.len() {
        return Err(DispatchError::LengthMismatch);
    }
    let t_len = target.len();
    if t_len < 2 {
        return Err(DispatchError::TooShort);
    }
    if math::variance(target) == 0.0 {
        return Err(DispatchError::DegenerateTarget);
    }

    let rmse = rmse_of(provided, target);

    // provided[t] ≈ target[t − δ]: align by comparing provided[δ..] to
    // target[..len−δ]
    let mut best_shift = 0usize;
    let mut best_rmse = f64::INFINITY;
    // never align on less than half the stream
    let cap = max_shift.min(t_len / 2);
    for shift in 0..=cap {
        let r = rmse_of(&provided[shift..], &target[..t_len - shift]);
        if r < best_rmse {
            best_rmse = r;
            best_shift = shift;
        }
    }
    let prov = &provided[best_shift..];
    let tar = &target[..t_len - best_shift];

    let mu_p = math::mean(prov);
    let mu_t = math::mean(tar);
    let sd_p = math::variance(prov).sqrt();
    let sd_t = math::variance(tar).sqrt();
    if sd_p == 0.0 || sd_t == 0.0 {
        return Err(DispatchError::DegenerateTarget);
    }
    let m = prov.len();
    let correlation_score = prov
        .iter()
        .zip(tar)
        .map(|(&p, &t)| (p - mu_p) * (t - mu_t))
        .sum::<f64>()
        / ((m as f64 - 1.0) * sd_p * sd_t);
    let delay_score = ((best_shift as f64 - DELAY_WINDOW) / DELAY_WINDOW).abs().clamp(0.0, 1.0);
    let precision_score =
        1.0 - prov.iter().zip(tar).map(|(&p, &t)| ((p - t) / mu_t).abs()).sum::<f64>() / m as f64;
    let performance_score = (correlation_score + delay_score + precision_score) / 3.0;
    Ok(TrackingReport {
        rmse,
        rmse_aligned: best_rmse,
        delay: best_shift,
        correlation_score,
        delay_score,
        precision_score,
        performance_score,
    })
}
