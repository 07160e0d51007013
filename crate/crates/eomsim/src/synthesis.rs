//! Drive waveform generation and the inverse map from a wanted absorption
//! trace to the squared voltage that produces it.
//!
//! The forward chain in [`crate::steady`] is monotone in U^2 at probe line
//! center: more voltage means more cavity detuning, fewer photons, and a more
//! opaque medium. That makes the inversion a closed-form walk backwards
//! through the same chain, valid between the transparency floor at U = 0 and
//! the bare-medium ceiling the window leaves behind as U grows without bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::DeviceParams;
use crate::steady;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthesisError {
    #[error("drive values must be non-negative, got {value}")]
    NegativeDrive { value: f64 },
    #[error("waveform period must be positive, got {value}")]
    NonPositivePeriod { value: f64 },
    #[error("sample table needs at least two nodes")]
    TableTooShort,
    #[error("sample table times must increase strictly; node {index} breaks the order")]
    UnsortedTable { index: usize },
    #[error(
        "sample rate gives {samples_per_period:.3} samples per period; at least 16 are needed"
    )]
    UndersampledWaveform { samples_per_period: f64 },
    #[error("inversion assumes two-photon resonance, but delta = {delta:.6e} rad/s")]
    OffResonantInversion { delta: f64 },
    #[error(
        "absorption {requested:.9e} is outside the reachable band [{lo:.9e}, {hi:.9e})"
    )]
    OutOfBand { requested: f64, lo: f64, hi: f64 },
    #[error(
        "target sample {index} (t = {t:.9e} s) asks for absorption {requested:.9e}, \
         outside the reachable band [{lo:.9e}, {hi:.9e})"
    )]
    OutOfBandAt { index: usize, t: f64, requested: f64, lo: f64, hi: f64 },
    #[error("target rows must have matching lengths: {times} times vs {values} values")]
    LengthMismatch { times: usize, values: usize },
}

/// Analytic drive shapes in squared volts. All are non-negative by
/// construction once validated; `floor` and `peak` are U^2 levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WaveformShape {
    /// floor + (peak - floor) * (1 + sin(2 pi t / period + phase)) / 2.
    Sine { period: f64, floor: f64, peak: f64, phase: f64 },
    /// `peak` for the first half of each period, `floor` for the second.
    Square { period: f64, floor: f64, peak: f64 },
    /// Linear ramp from `floor` to `peak` over each period, then reset.
    Sawtooth { period: f64, floor: f64, peak: f64 },
    /// Piecewise-linear interpolation through (time, u_sq) nodes, clamped to
    /// the end values outside the node span. Not periodic.
    Table { nodes: Vec<(f64, f64)> },
}

impl WaveformShape {
    /// Period of the repeating shapes; node span for a table (s).
    pub fn period(&self) -> f64 {
        match self {
            WaveformShape::Sine { period, .. }
            | WaveformShape::Square { period, .. }
            | WaveformShape::Sawtooth { period, .. } => *period,
            WaveformShape::Table { nodes } => match (nodes.first(), nodes.last()) {
                (Some(first), Some(last)) => last.0 - first.0,
                _ => 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), SynthesisError> {
        match self {
            WaveformShape::Sine { period, floor, peak, .. }
            | WaveformShape::Square { period, floor, peak }
            | WaveformShape::Sawtooth { period, floor, peak } => {
                if !(*period > 0.0) {
                    return Err(SynthesisError::NonPositivePeriod { value: *period });
                }
                for value in [*floor, *peak] {
                    if !(value >= 0.0) {
                        return Err(SynthesisError::NegativeDrive { value });
                    }
                }
                Ok(())
            }
            WaveformShape::Table { nodes } => {
                if nodes.len() < 2 {
                    return Err(SynthesisError::TableTooShort);
                }
                for (i, pair) in nodes.iter().enumerate() {
                    if !(pair.1 >= 0.0) {
                        return Err(SynthesisError::NegativeDrive { value: pair.1 });
                    }
                    if i > 0 && !(pair.0 > nodes[i - 1].0) {
                        return Err(SynthesisError::UnsortedTable { index: i });
                    }
                }
                Ok(())
            }
        }
    }

    /// Squared drive voltage at time t (V^2).
    pub fn u_sq_at(&self, t: f64) -> f64 {
        match self {
            WaveformShape::Sine { period, floor, peak, phase } => {
                let s = (std::f64::consts::TAU * t / period + phase).sin();
                floor + (peak - floor) * (1.0 + s) / 2.0
            }
            WaveformShape::Square { period, floor, peak } => {
                if t.rem_euclid(*period) < period / 2.0 {
                    *peak
                } else {
                    *floor
                }
            }
            WaveformShape::Sawtooth { period, floor, peak } => {
                floor + (peak - floor) * (t / period).rem_euclid(1.0)
            }
            WaveformShape::Table { nodes } => interp_clamped(nodes, t),
        }
    }
}

fn interp_clamped(nodes: &[(f64, f64)], t: f64) -> f64 {
    let first = nodes[0];
    let last = nodes[nodes.len() - 1];
    if t <= first.0 {
        return first.1;
    }
    if t >= last.0 {
        return last.1;
    }
    let hi = nodes.partition_point(|n| n.0 <= t);
    let (t0, v0) = nodes[hi - 1];
    let (t1, v1) = nodes[hi];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// A drive waveform sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveProgram {
    /// Sample times (s), uniformly spaced from zero.
    pub times: Vec<f64>,
    /// Squared drive voltage at each sample (V^2).
    pub u_sq: Vec<f64>,
}

impl DriveProgram {
    /// Piecewise-linear readback of the program, clamped to the end samples.
    pub fn u_sq_at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n == 0 {
            return 0.0;
        }
        if t <= self.times[0] {
            return self.u_sq[0];
        }
        if t >= self.times[n - 1] {
            return self.u_sq[n - 1];
        }
        let hi = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[hi - 1], self.times[hi]);
        let (v0, v1) = (self.u_sq[hi - 1], self.u_sq[hi]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

/// Sample a shape at `sample_rate` (samples/s) for `duration` seconds.
///
/// The duration is rounded to a whole number of samples. A rate below 16
/// samples per period is refused; that is too coarse for the interpolated
/// readback to resemble the shape it came from.
pub fn sample_waveform(
    shape: &WaveformShape,
    sample_rate: f64,
    duration: f64,
) -> Result<DriveProgram, SynthesisError> {
    shape.validate()?;
    if !(sample_rate > 0.0) || !sample_rate.is_finite() {
        return Err(SynthesisError::NonPositivePeriod { value: sample_rate });
    }
    let samples_per_period = sample_rate * shape.period();
    if samples_per_period < 16.0 {
        return Err(SynthesisError::UndersampledWaveform { samples_per_period });
    }
    let n = (duration * sample_rate).round().max(1.0) as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut u_sq = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = i as f64 / sample_rate;
        times.push(t);
        u_sq.push(shape.u_sq_at(t));
    }
    Ok(DriveProgram { times, u_sq })
}

/// The absorption values a static drive can reach at probe line center.
///
/// Returns (floor, ceiling). The floor is attained at U = 0 where the cavity
/// is full; the ceiling is the bare-window limit approached as U^2 grows
/// without bound, so the band is closed below and open above.
pub fn reachable_band(p: &DeviceParams) -> (f64, f64) {
    let n_cmax = steady::photon_number(p, 0.0);
    (
        steady::resonant_absorption(p, n_cmax),
        steady::resonant_absorption(p, 0.0),
    )
}

/// Squared voltage that produces a given line-center absorption (V^2).
///
/// Walks the steady chain backwards: absorption to photon number, photon
/// number to detuning, detuning to U^2. Valid at two-photon resonance only.
/// At the exact band floor the detuning radicand can land a few ulp below
/// zero; it is snapped to zero there so the floor maps to U = 0.
pub fn voltage_for_absorption(p: &DeviceParams, absorption: f64) -> Result<f64, SynthesisError> {
    if p.medium.delta != 0.0 {
        return Err(SynthesisError::OffResonantInversion { delta: p.medium.delta });
    }
    let (lo, hi) = reachable_band(p);
    if !(absorption >= lo) || absorption >= hi {
        return Err(SynthesisError::OutOfBand { requested: absorption, lo, hi });
    }
    let m = &p.medium;
    let gg = m.gamma * m.gamma_s;
    let n_c = gg * (1.0 - absorption) / (absorption * m.g * m.g) - 1.0;
    let kappa_sq = p.cavity.kappa * p.cavity.kappa;
    let mut radicand = p.cavity.eps_c * p.cavity.eps_c / n_c - kappa_sq;
    if radicand < 0.0 {
        if radicand > -1e-12 * kappa_sq {
            radicand = 0.0;
        } else {
            return Err(SynthesisError::OutOfBand { requested: absorption, lo, hi });
        }
    }
    Ok(radicand.sqrt() / p.derived.detune_coeff)
}

/// A wanted absorption trace on explicit sample times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetWaveform {
    /// Sample times (s), strictly increasing.
    pub times: Vec<f64>,
    /// Wanted normalized absorption at each time.
    pub absorption: Vec<f64>,
}

/// One target sample that had to be moved into the reachable band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEvent {
    /// Row index in the target.
    pub index: usize,
    /// Sample time (s).
    pub t: f64,
    /// Absorption the target asked for.
    pub requested: f64,
    /// Absorption actually compiled.
    pub clipped_to: f64,
}

/// Compile an absorption target into a drive program.
///
/// With `clamp` set, samples outside the reachable band are moved to the
/// nearest attainable level (the floor below, a hair under the ceiling above)
/// and reported as clip events. Without it, the first out-of-band sample is
/// an error.
pub fn compile_target(
    p: &DeviceParams,
    target: &TargetWaveform,
    clamp: bool,
) -> Result<(DriveProgram, Vec<ClipEvent>), SynthesisError> {
    if target.times.len() != target.absorption.len() {
        return Err(SynthesisError::LengthMismatch {
            times: target.times.len(),
            values: target.absorption.len(),
        });
    }
    for (i, w) in target.times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(SynthesisError::UnsortedTable { index: i + 1 });
        }
    }
    let (lo, hi) = reachable_band(p);
    let ceiling = lo + (1.0 - 1e-6) * (hi - lo);
    let mut u_sq = Vec::with_capacity(target.times.len());
    let mut clips = Vec::new();
    for (index, (&t, &requested)) in target.times.iter().zip(&target.absorption).enumerate() {
        let level = if requested >= lo && requested < hi {
            requested
        } else if !clamp {
            return Err(SynthesisError::OutOfBandAt { index, t, requested, lo, hi });
        } else {
            let clipped_to = if requested < lo { lo } else { ceiling };
            clips.push(ClipEvent { index, t, requested, clipped_to });
            clipped_to
        };
        u_sq.push(voltage_for_absorption(p, level)?);
    }
    Ok((DriveProgram { times: target.times.clone(), u_sq }, clips))
}
