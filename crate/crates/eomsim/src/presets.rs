//! Ready-made parameter sets.
//!
//! Both sets describe the same device, a charged nanobeam electrode pair
//! pulling on an optical cavity that dresses a three-level medium. They differ
//! in how hard the cavity is driven and how lossy the beam is, which moves the
//! operating point between a narrow-window spectroscopy regime and a wider,
//! faster modulation regime.

use std::f64::consts::PI;

use crate::params::{CavityParams, DeviceParams, MechParams, MediumParams};

/// Narrow transparency window, strongly driven cavity. Suited to sweeping
/// spectra and reading off window widths and extinction ratios.
pub fn spectroscopy_demo() -> DeviceParams {
    let gamma = 2.0 * PI * 5.75e6;
    let medium = MediumParams {
        gamma,
        gamma_s: 1e-4 * gamma,
        g: 1e-3 * gamma,
        g_p: 1e-3 * gamma,
        probe_drive: 1.0,
        delta: 0.0,
        n_atoms: 1.0,
        chi0: 1.0,
    };
    let cavity = CavityParams {
        kappa: 0.2 * gamma,
        eps_c: 4e10,
        g0: 2.0 * PI * 1.5e16,
        omega_c: None,
        detuning_factor: 2.0,
    };
    let mech = MechParams {
        mass: 145e-12,
        omega_m: gamma,
        gamma_m: gamma,
        plate_area: 0.6e-6,
        plate_gap: 0.21e-6,
        include_radiation_pressure: false,
    };
    DeviceParams::assemble(medium, cavity, mech)
}

/// Weaker cavity drive, broader cavity line, overdamped beam. The absorption
/// swing per volt is larger and the mechanics settles without ringing, which
/// is the regime for synthesizing waveforms.
pub fn modulation_demo() -> DeviceParams {
    let mut p = spectroscopy_demo();
    p.cavity.eps_c = 0.5e10;
    p.cavity.kappa = 0.4 * p.medium.gamma;
    p.mech.gamma_m = 3.0 * p.medium.gamma;
    DeviceParams::assemble(p.medium, p.cavity, p.mech)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate;

    #[test]
    fn presets_validate_cleanly() {
        for p in [spectroscopy_demo(), modulation_demo()] {
            let (_, warnings) = validate(&p).unwrap();
            assert!(warnings.is_empty());
        }
    }

    #[test]
    fn modulation_set_differs_only_in_drive_linewidth_damping() {
        let a = spectroscopy_demo();
        let b = modulation_demo();
        assert_eq!(a.medium, b.medium);
        assert_eq!(a.mech.mass, b.mech.mass);
        assert_eq!(a.mech.omega_m, b.mech.omega_m);
        assert_eq!(a.mech.plate_area, b.mech.plate_area);
        assert_eq!(a.mech.plate_gap, b.mech.plate_gap);
        assert_eq!(b.cavity.eps_c, 0.5e10);
        assert_eq!(b.cavity.kappa, 0.4 * b.medium.gamma);
        assert_eq!(b.mech.gamma_m, 3.0 * b.medium.gamma);
    }
}
