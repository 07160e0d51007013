//! Spectral and figure-of-merit analysis built on the steady-state maps.
//!
//! Everything here works on the closed-form chain, so sweeps are cheap and
//! parallelize trivially. Frequencies and widths are angular (rad/s) and
//! absorption is the normalized Im chi used across the crate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::params::DeviceParams;
use crate::steady::{self, SteadyError};

/// Evenly spaced grid, endpoints included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// One point of a probe-detuning by drive sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRow {
    /// Probe detuning (rad/s).
    pub delta_p: f64,
    /// Squared drive voltage (V^2).
    pub u_sq: f64,
    /// Steady intracavity photon number at this drive.
    pub n_c: f64,
    /// Normalized absorption Im chi.
    pub absorption: f64,
    /// Normalized dispersion Re chi.
    pub dispersion: f64,
}

/// Dense sweep over probe detuning (outer) and drive (inner), row order
/// matching the input grids.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub rows: Vec<SpectrumRow>,
}

pub fn spectrum_sweep(
    p: &DeviceParams,
    delta_ps: &[f64],
    u_sqs: &[f64],
) -> Result<SpectrumTable, SteadyError> {
    // Photon numbers depend on the drive alone; hoist them out of the scan.
    let photons: Vec<f64> = u_sqs
        .iter()
        .map(|&u_sq| steady::photon_number(p, steady::steady_detuning(p, u_sq)))
        .collect();
    let rows: Result<Vec<Vec<SpectrumRow>>, SteadyError> = delta_ps
        .par_iter()
        .map(|&delta_p| {
            u_sqs
                .iter()
                .zip(&photons)
                .map(|(&u_sq, &n_c)| {
                    let chi = steady::chi_normalized(p, delta_p, n_c)?;
                    Ok(SpectrumRow { delta_p, u_sq, n_c, absorption: chi.im, dispersion: chi.re })
                })
                .collect()
        })
        .collect();
    Ok(SpectrumTable { rows: rows?.into_iter().flatten().collect() })
}

/// Line-center extinction between the rest state and a held drive (dB).
///
/// Rest leaves the cavity full and the medium transparent; the drive empties
/// the cavity and restores absorption. The ratio of the two absorption levels
/// is the on/off contrast of the modulator.
pub fn extinction_db(p: &DeviceParams, u_m_sq: f64) -> f64 {
    let off = steady::resonant_absorption(p, steady::photon_number(p, 0.0));
    let on = steady::resonant_absorption(
        p,
        steady::photon_number(p, steady::steady_detuning(p, u_m_sq)),
    );
    10.0 * (on / off).log10()
}

/// Extinction approached as the drive grows without bound (dB): the cavity
/// fully detunes and the bare line is recovered.
pub fn extinction_db_limit(p: &DeviceParams) -> f64 {
    let off = steady::resonant_absorption(p, steady::photon_number(p, 0.0));
    let on = steady::resonant_absorption(p, 0.0);
    10.0 * (on / off).log10()
}

fn golden_max(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618033988749894848;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..90 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn bisect_crossing(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // f(lo) < 0 < f(hi) on entry.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * hi.abs() {
            return mid;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Contrast a dip must show against its flanking peaks to count as a window.
const WINDOW_CONTRAST: f64 = 1e-3;

/// Full width at half depth of the transparency window at a held drive
/// (rad/s). `None` when the window has closed: the dip at the two-photon
/// resonance no longer reaches below half of the flanking absorption peaks
/// (with a small contrast margin), so there is no half-depth level to cross.
pub fn eit_width(p: &DeviceParams, u_sq: f64) -> Result<Option<f64>, SteadyError> {
    let n_c = steady::photon_number(p, steady::steady_detuning(p, u_sq));
    let m = &p.medium;
    let center = m.delta;
    let dip = steady::absorption(p, center, n_c)?;

    // Scan each side on a log grid wide enough to clear both the bare line
    // and the dressed doublet.
    let x_min = (1e-2 * m.gamma_s).max(1e-3);
    let x_max = 10.0 * m.gamma + 5.0 * m.g * (n_c + 1.0).sqrt();
    let ratio = (x_max / x_min).ln();
    let mut peak_pos = [0.0f64; 2];
    let mut peaks = [0.0f64; 2];
    for (side, sign) in [(0usize, 1.0f64), (1usize, -1.0f64)] {
        let absorb = |x: f64| -> Result<f64, SteadyError> {
            steady::absorption(p, center + sign * x, n_c)
        };
        let grid: Vec<f64> = (0..256)
            .map(|i| x_min * (ratio * i as f64 / 255.0).exp())
            .collect();
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for (i, &x) in grid.iter().enumerate() {
            let v = absorb(x)?;
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        let lo = grid[best.saturating_sub(1)];
        let hi = grid[(best + 1).min(grid.len() - 1)];
        let (x_peak, peak) =
            golden_max(|x| absorb(x).unwrap_or(f64::NEG_INFINITY), lo, hi);
        if peak > best_val {
            peaks[side] = peak;
            peak_pos[side] = x_peak;
        } else {
            peaks[side] = best_val;
            peak_pos[side] = grid[best];
        }
    }

    let peak = peaks[0].min(peaks[1]);
    if !((peak - 2.0 * dip) / peak >= WINDOW_CONTRAST) {
        return Ok(None);
    }
    let level = 0.5 * (dip + peak);

    let mut width = 0.0;
    for (side, sign) in [(0usize, 1.0f64), (1usize, -1.0f64)] {
        let g = |x: f64| {
            steady::absorption(p, center + sign * x, n_c).unwrap_or(f64::NEG_INFINITY) - level
        };
        width += bisect_crossing(g, 0.0, peak_pos[side]);
    }
    Ok(Some(width))
}

/// How much matter is mixed into the probe polariton.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolaritonMix {
    /// tan^2 of the mixing angle, g_p^2 N over the dressed-control strength.
    pub tan_sq_theta: f64,
    /// Group velocity of the polariton over the bare light speed,
    /// 1 / (1 + tan^2 theta).
    pub group_velocity_ratio: f64,
}

/// Polariton mixing for a given intracavity photon number.
pub fn polariton_mix(p: &DeviceParams, n_c: f64) -> PolaritonMix {
    let m = &p.medium;
    let tan_sq_theta = (m.g_p * m.g_p * m.n_atoms) / (m.g * m.g * (n_c + 1.0));
    PolaritonMix { tan_sq_theta, group_velocity_ratio: 1.0 / (1.0 + tan_sq_theta) }
}

/// Polariton mixing at the steady photon number of a held drive.
pub fn polariton_at_drive(p: &DeviceParams, u_sq: f64) -> PolaritonMix {
    polariton_mix(p, steady::photon_number(p, steady::steady_detuning(p, u_sq)))
}

/// Figures of merit for modulating between rest and a held drive level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationMetrics {
    /// The drive level the metrics are quoted against (V^2).
    pub u_m_sq: f64,
    /// Normalized absorption at rest.
    pub absorption_floor: f64,
    /// Normalized absorption with the drive held.
    pub absorption_at_drive: f64,
    /// Line-center extinction between the two levels (dB).
    pub extinction_db: f64,
    /// Extinction bound for an unbounded drive (dB).
    pub extinction_db_limit: f64,
    /// Steady photon number at rest.
    pub n_c_rest: f64,
    /// Steady photon number with the drive held.
    pub n_c_at_drive: f64,
    /// Transparency window width at rest (rad/s); absent once the window
    /// has closed.
    pub eit_width_rest: Option<f64>,
    /// Polariton mixing at rest.
    pub polariton_rest: PolaritonMix,
}

pub fn modulation_metrics(
    p: &DeviceParams,
    u_m_sq: f64,
) -> Result<ModulationMetrics, SteadyError> {
    let n_c_rest = steady::photon_number(p, 0.0);
    let n_c_at_drive = steady::photon_number(p, steady::steady_detuning(p, u_m_sq));
    Ok(ModulationMetrics {
        u_m_sq,
        absorption_floor: steady::resonant_absorption(p, n_c_rest),
        absorption_at_drive: steady::resonant_absorption(p, n_c_at_drive),
        extinction_db: extinction_db(p, u_m_sq),
        extinction_db_limit: extinction_db_limit(p),
        n_c_rest,
        n_c_at_drive,
        eit_width_rest: eit_width(p, 0.0)?,
        polariton_rest: polariton_mix(p, n_c_rest),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Reference values below were computed independently at 50-digit
    // precision and rounded to 17 significant digits.

    #[test]
    fn extinction_matches_reference_values() {
        let a = presets::spectroscopy_demo();
        assert_relative_eq!(extinction_db(&a, 1e6), 5.4820446208700957e1, max_relative = 1e-13);
        assert_relative_eq!(extinction_db(&a, 4.0), 3.0413207413690711e1, max_relative = 1e-13);
        assert_relative_eq!(extinction_db_limit(&a), 5.4820446227819057e1, max_relative = 1e-13);
        let b = presets::modulation_demo();
        assert_relative_eq!(extinction_db(&b, 4.0), 2.3512564321251851e1, max_relative = 1e-13);
        assert_relative_eq!(extinction_db_limit(&b), 3.0741694932623384e1, max_relative = 1e-13);
    }

    #[test]
    fn extinction_is_the_absorption_ratio_in_decibels() {
        let p = presets::modulation_demo();
        for u_m_sq in [0.5, 2.0, 4.0, 25.0] {
            let on = steady::steady_absorption(&p, 0.0, u_m_sq).unwrap();
            let off = steady::steady_absorption(&p, 0.0, 0.0).unwrap();
            assert_relative_eq!(
                extinction_db(&p, u_m_sq),
                10.0 * (on / off).log10(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn polariton_matches_reference_values() {
        let a = presets::spectroscopy_demo();
        let mix_a = polariton_at_drive(&a, 0.0);
        assert_relative_eq!(mix_a.tan_sq_theta, 3.2631378486294795e-8, max_relative = 1e-14);
        assert_relative_eq!(
            mix_a.group_velocity_ratio,
            9.9999996736862258e-1,
            max_relative = 1e-14
        );
        let b = presets::modulation_demo();
        let mix_b = polariton_at_drive(&b, 0.0);
        assert_relative_eq!(mix_b.tan_sq_theta, 8.3535633824779147e-6, max_relative = 1e-14);
        assert_relative_eq!(
            mix_b.group_velocity_ratio,
            9.9999164650639896e-1,
            max_relative = 1e-14
        );
    }

    #[test]
    fn balanced_mixing_halves_the_group_velocity_exactly() {
        let mut p = presets::spectroscopy_demo();
        let n_c = 7.25;
        p.medium.n_atoms = n_c + 1.0;
        let mix = polariton_mix(&p, n_c);
        assert_eq!(mix.tan_sq_theta, 1.0);
        assert_eq!(mix.group_velocity_ratio, 0.5);
    }

    #[test]
    fn window_width_shrinks_and_then_the_window_closes() {
        let p = presets::spectroscopy_demo();
        let w0 = eit_width(&p, 0.0).unwrap().expect("rest window");
        let w1 = eit_width(&p, 1.0).unwrap().expect("window at one volt squared");
        let w4 = eit_width(&p, 4.0).unwrap().expect("window at two volts");
        assert!(w0 > w1 && w1 > w4, "{w0} {w1} {w4}");
        assert!(eit_width(&p, 100.0).unwrap().is_none());
    }

    #[test]
    fn rest_window_spans_the_dressed_doublet() {
        // With a strong control the window edges sit near the dressed states,
        // so the width is of the order of the full splitting 2 g sqrt(n_c+1).
        let p = presets::spectroscopy_demo();
        let w = eit_width(&p, 0.0).unwrap().unwrap();
        let split = 2.0 * p.medium.g * (steady::photon_number(&p, 0.0) + 1.0).sqrt();
        assert!(w > 0.5 * split && w < 2.0 * split, "width {w} vs splitting {split}");
    }

    #[test]
    fn window_measurement_follows_a_shifted_two_photon_resonance() {
        let mut p = presets::spectroscopy_demo();
        p.medium.delta = 0.2 * p.medium.gamma;
        let w = eit_width(&p, 1.0).unwrap().expect("shifted window");
        assert!(w > 0.0);
        p.medium.delta = 0.0;
        let w0 = eit_width(&p, 1.0).unwrap().unwrap();
        assert!((w / w0) > 0.3 && (w / w0) < 3.0, "shifted {w} vs centered {w0}");
    }

    #[test]
    fn sweep_covers_the_grid_in_order() {
        let p = presets::spectroscopy_demo();
        let dps = linspace(-1e7, 1e7, 5);
        let us = linspace(0.0, 10.0, 3);
        let table = spectrum_sweep(&p, &dps, &us).unwrap();
        assert_eq!(table.rows.len(), 15);
        assert_eq!(table.rows[0].delta_p, -1e7);
        assert_eq!(table.rows[0].u_sq, 0.0);
        assert_eq!(table.rows[4].u_sq, 10.0);
        assert_eq!(table.rows[14].delta_p, 1e7);
        let again = spectrum_sweep(&p, &dps, &us).unwrap();
        assert_eq!(table, again);
    }

    #[test]
    fn sweep_rows_match_the_pointwise_chain() {
        let p = presets::modulation_demo();
        let dps = [0.0, 2.3e6];
        let us = [0.0, 1.7];
        let table = spectrum_sweep(&p, &dps, &us).unwrap();
        for row in &table.rows {
            let n_c = steady::photon_number(&p, steady::steady_detuning(&p, row.u_sq));
            let chi = steady::chi_normalized(&p, row.delta_p, n_c).unwrap();
            assert_eq!(row.absorption.to_bits(), chi.im.to_bits());
            assert_eq!(row.dispersion.to_bits(), chi.re.to_bits());
        }
    }

    #[test]
    fn metrics_tie_back_to_their_sources() {
        let p = presets::modulation_demo();
        let m = modulation_metrics(&p, 4.0).unwrap();
        assert_eq!(m.extinction_db, extinction_db(&p, 4.0));
        assert_eq!(m.n_c_rest, steady::photon_number(&p, 0.0));
        assert_eq!(m.absorption_floor, steady::resonant_absorption(&p, m.n_c_rest));
        assert_eq!(m.eit_width_rest, eit_width(&p, 0.0).unwrap());
        assert_eq!(m.polariton_rest, polariton_mix(&p, m.n_c_rest));
        assert!(m.extinction_db < m.extinction_db_limit);
    }

    #[test]
    fn linspace_endpoints_are_exact() {
        let g = linspace(-3.0, 7.0, 11);
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], -3.0);
        assert_eq!(g[10], 7.0);
        assert_relative_eq!(g[5], 2.0);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
        assert!(linspace(1.0, 2.0, 0).is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn window_width_is_monotone_in_the_drive(
            u_lo in 0.0..30.0f64,
            bump in 0.5..20.0f64,
        ) {
            let p = presets::spectroscopy_demo();
            let wide = eit_width(&p, u_lo).unwrap();
            let narrow = eit_width(&p, u_lo + bump).unwrap();
            match (wide, narrow) {
                (Some(w), Some(n)) => prop_assert!(n < w, "width grew from {w} to {n}"),
                (Some(_), None) => {}
                (None, None) => {}
                (None, Some(_)) => prop_assert!(false, "window reopened at higher drive"),
            }
        }

        #[test]
        fn group_velocity_falls_as_the_drive_rises(
            u_lo in 0.0..50.0f64,
            bump in 0.1..50.0f64,
        ) {
            let p = presets::modulation_demo();
            let slow = polariton_at_drive(&p, u_lo + bump);
            let fast = polariton_at_drive(&p, u_lo);
            prop_assert!(slow.group_velocity_ratio < fast.group_velocity_ratio);
            prop_assert!(slow.tan_sq_theta > fast.tan_sq_theta);
        }

        #[test]
        fn extinction_is_monotone_in_the_drive(
            u_lo in 0.01..100.0f64,
            bump in 0.1..100.0f64,
        ) {
            let p = presets::spectroscopy_demo();
            prop_assert!(extinction_db(&p, u_lo + bump) > extinction_db(&p, u_lo));
            prop_assert!(extinction_db(&p, u_lo) < extinction_db_limit(&p));
        }
    }
}
