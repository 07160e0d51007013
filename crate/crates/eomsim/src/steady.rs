//! Steady-state maps from drive voltage to optical response.
//!
//! The chain runs in one direction: a squared voltage U^2 pushes the charged
//! beam to a displacement q, the displacement detunes the cavity by
//! detuning_factor * G0 * q, the detuning sets the intracavity photon number,
//! and the photon number dresses the medium whose susceptibility the probe
//! reads out. Every link is algebraic, so the whole chain evaluates in closed
//! form and serves as the reference the time-domain solver is checked against.

use num_complex::Complex64;
use thiserror::Error;

use crate::params::{DeviceParams, HBAR};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteadyError {
    #[error("susceptibility denominator vanished at delta_p = {delta_p:.6e} rad/s")]
    DegenerateDenominator { delta_p: f64 },
    #[error("radiation-pressure balance did not settle within {iterations} iterations")]
    ForceBalanceDiverged { iterations: usize },
}

/// Beam displacement under a static squared voltage (m).
///
/// Without radiation pressure this is the Coulomb force over the spring
/// constant. With it, the photon field pushes the beam as well and the
/// balance point is found by fixed-point iteration; the optical force changes
/// so slowly with q that a handful of passes settles it to machine precision.
pub fn steady_displacement(p: &DeviceParams, u_sq: f64) -> Result<f64, SteadyError> {
    let coulomb = p.derived.eta * u_sq;
    if !p.mech.include_radiation_pressure {
        return Ok(coulomb / p.derived.spring);
    }
    let mut q = coulomb / p.derived.spring;
    for _ in 0..128 {
        let n_c = photon_number(p, detuning_for_displacement(p, q));
        let next = (coulomb + HBAR * p.cavity.g0 * n_c) / p.derived.spring;
        if (next - q).abs() <= 1e-15 * next.abs().max(q.abs()) {
            return Ok(next);
        }
        q = next;
    }
    Err(SteadyError::ForceBalanceDiverged { iterations: 128 })
}

/// Cavity detuning produced by a beam displacement (rad/s).
pub fn detuning_for_displacement(p: &DeviceParams, q: f64) -> f64 {
    p.cavity.detuning_factor * p.cavity.g0 * q
}

/// Cavity detuning under a static squared voltage, ignoring radiation
/// pressure (rad/s). Equal to `detune_coeff * u_sq`.
pub fn steady_detuning(p: &DeviceParams, u_sq: f64) -> f64 {
    p.derived.detune_coeff * u_sq
}

/// Steady intracavity field amplitude at a given detuning.
pub fn cavity_amplitude(p: &DeviceParams, delta: f64) -> Complex64 {
    p.cavity.eps_c / Complex64::new(p.cavity.kappa, delta)
}

/// Steady intracavity photon number at a given detuning.
pub fn photon_number(p: &DeviceParams, delta: f64) -> f64 {
    let c = &p.cavity;
    c.eps_c * c.eps_c / (c.kappa * c.kappa + delta * delta)
}

/// Magnitude of the cavity response denominator, sqrt(kappa^2 + delta^2)
/// (rad/s). The steady field amplitude is eps_c over this.
pub fn effective_linewidth(p: &DeviceParams, delta: f64) -> f64 {
    p.cavity.kappa.hypot(delta)
}

/// Normalized probe susceptibility of the dressed medium.
///
/// `delta_p` is the probe detuning from the bare transition; `n_c` is the
/// intracavity photon number dressing the g-coupled transition. Scaled so the
/// imaginary part at line center of an undressed medium is gamma / gamma
/// = order one; multiply by `chi0` for the physical susceptibility.
pub fn chi_normalized(p: &DeviceParams, delta_p: f64, n_c: f64) -> Result<Complex64, SteadyError> {
    let m = &p.medium;
    let two_photon = Complex64::new(m.gamma_s, delta_p - m.delta);
    let denom =
        Complex64::new(m.gamma, delta_p) * two_photon + m.g * m.g * (n_c + 1.0);
    if denom.norm_sqr() < 1e-60 * m.gamma.powi(4) {
        return Err(SteadyError::DegenerateDenominator { delta_p });
    }
    Ok(Complex64::i() * m.gamma * two_photon / denom)
}

/// Physical probe susceptibility, `chi0` times the normalized form.
pub fn susceptibility(p: &DeviceParams, delta_p: f64, n_c: f64) -> Result<Complex64, SteadyError> {
    Ok(p.medium.chi0 * chi_normalized(p, delta_p, n_c)?)
}

/// Normalized probe absorption, the imaginary part of [`chi_normalized`].
pub fn absorption(p: &DeviceParams, delta_p: f64, n_c: f64) -> Result<f64, SteadyError> {
    Ok(chi_normalized(p, delta_p, n_c)?.im)
}

/// Normalized absorption at probe line center under a static squared voltage.
/// This is the full chain U^2 -> q -> detuning -> n_c -> Im chi in one call.
pub fn steady_absorption(p: &DeviceParams, delta_p: f64, u_sq: f64) -> Result<f64, SteadyError> {
    let q = steady_displacement(p, u_sq)?;
    let n_c = photon_number(p, detuning_for_displacement(p, q));
    absorption(p, delta_p, n_c)
}

/// Line-center absorption at two-photon resonance for a given photon number:
/// gamma gamma_s / (gamma gamma_s + g^2 (n_c + 1)).
pub fn resonant_absorption(p: &DeviceParams, n_c: f64) -> f64 {
    let m = &p.medium;
    let gg = m.gamma * m.gamma_s;
    gg / (gg + m.g * m.g * (n_c + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Expected values below were computed independently at 50-digit precision
    // from the closed-form expressions and rounded to 17 significant digits.

    #[test]
    fn unit_voltage_displacement_matches_reference() {
        let p = presets::spectroscopy_demo();
        let q = steady_displacement(&p, 1.0).unwrap();
        assert_relative_eq!(q, 3.1824967352506810e-10, max_relative = 1e-14);
    }

    #[test]
    fn detuning_chain_is_consistent() {
        let p = presets::spectroscopy_demo();
        let q = steady_displacement(&p, 1.0).unwrap();
        assert_relative_eq!(
            detuning_for_displacement(&p, q),
            steady_detuning(&p, 1.0),
            max_relative = 1e-14
        );
        assert_relative_eq!(steady_detuning(&p, 1.0), 5.9988650181222243e7, max_relative = 1e-14);
    }

    #[test]
    fn photon_numbers_match_reference() {
        let a = presets::spectroscopy_demo();
        assert_relative_eq!(photon_number(&a, 0.0), 3.0645348549667379e7, max_relative = 1e-14);
        assert_relative_eq!(
            photon_number(&a, steady_detuning(&a, 1.0)),
            4.3825430233526357e5,
            max_relative = 1e-14
        );
        let b = presets::modulation_demo();
        assert_relative_eq!(photon_number(&b, 0.0), 1.1970839277213820e5, max_relative = 1e-14);
        assert_relative_eq!(
            photon_number(&b, steady_detuning(&b, 1.0)),
            6.5660244306907867e3,
            max_relative = 1e-14
        );
    }

    #[test]
    fn effective_linewidth_matches_reference() {
        let a = presets::spectroscopy_demo();
        assert_relative_eq!(
            effective_linewidth(&a, steady_detuning(&a, 1.0)),
            6.0422250519546342e7,
            max_relative = 1e-14
        );
        let b = presets::modulation_demo();
        assert_relative_eq!(
            effective_linewidth(&b, steady_detuning(&b, 1.0)),
            6.1704772746458651e7,
            max_relative = 1e-14
        );
    }

    #[test]
    fn line_center_absorption_matches_reference() {
        let a = presets::spectroscopy_demo();
        assert_relative_eq!(
            resonant_absorption(&a, photon_number(&a, 0.0)),
            3.2631272005956064e-6,
            max_relative = 1e-14
        );
        assert_relative_eq!(resonant_absorption(&a, 0.0), 9.9009900990099010e-1, max_relative = 1e-14);
        assert_relative_eq!(
            steady_absorption(&a, 0.0, 1.0).unwrap(),
            2.2812544861957173e-4,
            max_relative = 1e-13
        );
        let b = presets::modulation_demo();
        assert_relative_eq!(
            resonant_absorption(&b, photon_number(&b, 0.0)),
            8.3465910047793103e-4,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            steady_absorption(&b, 0.0, 1.0).unwrap(),
            1.4999195074141757e-2,
            max_relative = 1e-13
        );
    }

    #[test]
    fn chi_at_line_center_agrees_with_resonant_form() {
        let p = presets::spectroscopy_demo();
        for n_c in [0.0, 1.0, 4.3825430233526357e5, 3.0645348549667379e7] {
            let chi = chi_normalized(&p, 0.0, n_c).unwrap();
            assert_relative_eq!(chi.im, resonant_absorption(&p, n_c), max_relative = 1e-14);
            assert!(chi.re.abs() < 1e-16);
        }
    }

    #[test]
    fn radiation_pressure_shifts_the_balance_point_forward() {
        let mut p = presets::spectroscopy_demo();
        p.mech.include_radiation_pressure = true;
        let with = steady_displacement(&p, 1.0).unwrap();
        p.mech.include_radiation_pressure = false;
        let without = steady_displacement(&p, 1.0).unwrap();
        assert!(with > without);
        // The settled point balances spring force against both drives.
        p.mech.include_radiation_pressure = true;
        let n_c = photon_number(&p, detuning_for_displacement(&p, with));
        let residual = p.derived.spring * with - p.derived.eta - HBAR * p.cavity.g0 * n_c;
        assert!(residual.abs() < 1e-12 * p.derived.spring * with);
    }

    proptest! {
        #[test]
        fn displacement_is_linear_in_squared_voltage(u_sq in 1e-6..1e4f64) {
            let p = presets::spectroscopy_demo();
            let q1 = steady_displacement(&p, u_sq).unwrap();
            let q2 = steady_displacement(&p, 2.0 * u_sq).unwrap();
            // Doubling a float is exact, so linearity holds bitwise.
            prop_assert_eq!(q2.to_bits(), (2.0 * q1).to_bits());
        }

        #[test]
        fn photon_number_is_squared_amplitude(delta in -1e9..1e9f64) {
            let p = presets::modulation_demo();
            let a = cavity_amplitude(&p, delta);
            prop_assert!((a.norm_sqr() - photon_number(&p, delta)).abs()
                <= 1e-12 * photon_number(&p, delta));
        }

        #[test]
        fn absorption_is_even_and_dispersion_odd_in_probe_detuning(
            delta_p in 1e2..1e9f64,
            n_c in 0.0..1e8f64,
        ) {
            let p = presets::spectroscopy_demo();
            let plus = chi_normalized(&p, delta_p, n_c).unwrap();
            let minus = chi_normalized(&p, -delta_p, n_c).unwrap();
            let scale = plus.norm();
            prop_assert!((plus.im - minus.im).abs() <= 1e-12 * scale);
            prop_assert!((plus.re + minus.re).abs() <= 1e-12 * scale);
        }

        #[test]
        fn line_center_absorption_grows_with_voltage(
            u_lo in 0.0..100.0f64,
            bump in 1e-3..10.0f64,
        ) {
            let p = presets::spectroscopy_demo();
            let lo = steady_absorption(&p, 0.0, u_lo).unwrap();
            let hi = steady_absorption(&p, 0.0, u_lo + bump).unwrap();
            prop_assert!(hi > lo, "absorption must grow as the cavity detunes: {lo} vs {hi}");
        }
    }
}
