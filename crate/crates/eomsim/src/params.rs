//! Device parameters and validation.
//!
//! Everything here is kept in SI with angular rates in rad/s. Catalog values
//! quoted as "2 pi x f" must be converted before they land in these structs;
//! the presets do that once so the rest of the code never multiplies by 2 pi.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054571817e-34;
/// Vacuum permittivity (F/m).
pub const EPS0: f64 = 8.8541878128e-12;
/// Speed of light in vacuum (m/s).
pub const C_LIGHT: f64 = 2.99792458e8;

/// Three-level medium and probe settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumParams {
    /// Optical coherence decay rate of the probe transition (rad/s).
    pub gamma: f64,
    /// Ground-state coherence decay rate (rad/s). Expected well below `gamma`.
    pub gamma_s: f64,
    /// Single-photon coupling of the cavity mode to the control transition (rad/s).
    pub g: f64,
    /// Coupling of the probe field to the medium (rad/s). Defaults to `g`.
    pub g_p: f64,
    /// Probe drive amplitude g_p * eps_p (rad/s). Normalized observables do not
    /// depend on it; it only scales the raw coherences.
    pub probe_drive: f64,
    /// Detuning of the cavity control field from its transition (rad/s).
    pub delta: f64,
    /// Number of atoms addressed by the probe. Enters only the polariton mixing angle.
    pub n_atoms: f64,
    /// Susceptibility scale chi_0. Cancels out of every normalized quantity.
    pub chi0: f64,
}

/// Optical cavity settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Cavity field decay rate (rad/s).
    pub kappa: f64,
    /// Cavity drive amplitude (rad/s).
    pub eps_c: f64,
    /// Optomechanical frequency pull per unit displacement (rad/s per m).
    pub g0: f64,
    /// Bare cavity frequency (rad/s), only needed to report a quality factor.
    pub omega_c: Option<f64>,
    /// Multiplier on G0*q in the detuning map. The working value is 2; kept
    /// configurable so the factor-1 variant of the same map can be compared.
    pub detuning_factor: f64,
}

/// Charged mechanical oscillator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechParams {
    /// Oscillator mass (kg).
    pub mass: f64,
    /// Mechanical resonance frequency (rad/s).
    pub omega_m: f64,
    /// Mechanical energy decay rate (rad/s). Zero is allowed (lossless oscillator).
    pub gamma_m: f64,
    /// Electrode plate area (m^2).
    pub plate_area: f64,
    /// Electrode plate separation (m).
    pub plate_gap: f64,
    /// Include the radiation-pressure force hbar*G0*n_c/m in the mechanics.
    pub include_radiation_pressure: bool,
}

/// Quantities derived once from the raw parameters and reused everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    /// Coulomb force coefficient eta = eps0 * S / (2 r^2) (N/V^2).
    pub eta: f64,
    /// Static stiffness m * omega_m^2 (N/m).
    pub spring: f64,
    /// Cavity detuning per unit squared voltage:
    /// detuning_factor * G0 * eta / (m omega_m^2) (rad/s per V^2).
    pub detune_coeff: f64,
}

/// Complete, validated device description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub medium: MediumParams,
    pub cavity: CavityParams,
    pub mech: MechParams,
    pub derived: Derived,
}

/// Instantaneous state of the coupled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    /// Time (s).
    pub t: f64,
    /// Oscillator displacement (m).
    pub q: f64,
    /// Oscillator velocity (m/s).
    pub qdot: f64,
    /// Intracavity field amplitude (dimensionless, |a|^2 is the photon number).
    pub a: Complex64,
    /// Probe-transition coherence.
    pub sigma_ba: Complex64,
    /// Ground-state coherence.
    pub sigma_bc: Complex64,
}

impl SystemState {
    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && self.q.is_finite()
            && self.qdot.is_finite()
            && self.a.re.is_finite()
            && self.a.im.is_finite()
            && self.sigma_ba.re.is_finite()
            && self.sigma_ba.im.is_finite()
            && self.sigma_bc.re.is_finite()
            && self.sigma_bc.im.is_finite()
    }
}

/// A single validation failure. Validation reports every failure it finds,
/// not just the first one.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamIssue {
    #[error("{field} must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("{field} must be non-negative, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("{field} must be finite, got {value}")]
    NotFinite { field: &'static str, value: f64 },
    #[error("n_atoms must be at least 1, got {value}")]
    AtomCountBelowOne { value: f64 },
}

/// Collected validation failures.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid device parameters: {}", .issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationErrors {
    pub issues: Vec<ParamIssue>,
}

/// Non-fatal observations about a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamWarning {
    /// gamma_s is not small against gamma, so the transparency window physics
    /// is marginal. Raised at gamma_s >= 0.1 * gamma.
    GammaOrder { gamma_s: f64, gamma: f64 },
    /// The probe drive is strong enough that the linear-response treatment of
    /// the medium is questionable (steady |sigma_ba| ~ probe_drive / gamma).
    WeakField { probe_drive: f64, gamma: f64 },
}

impl std::fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamWarning::GammaOrder { gamma_s, gamma } => write!(
                f,
                "gamma_s = {gamma_s:.6e} is not small against gamma = {gamma:.6e}; \
                 transparency window will be washed out"
            ),
            ParamWarning::WeakField { probe_drive, gamma } => write!(
                f,
                "probe_drive = {probe_drive:.6e} is not weak against gamma = {gamma:.6e}; \
                 linear response in the probe is questionable"
            ),
        }
    }
}

/// Coulomb force coefficient of a parallel-plate electrode pair:
/// eta = eps0 * area / (2 gap^2), so that F = eta * U^2.
pub fn coulomb_eta(plate_area: f64, plate_gap: f64) -> Result<f64, ValidationErrors> {
    let mut issues = Vec::new();
    check_positive(&mut issues, "plate_area", plate_area);
    check_positive(&mut issues, "plate_gap", plate_gap);
    if !issues.is_empty() {
        return Err(ValidationErrors { issues });
    }
    Ok(EPS0 * plate_area / (2.0 * plate_gap * plate_gap))
}

fn check_positive(issues: &mut Vec<ParamIssue>, field: &'static str, value: f64) {
    if !value.is_finite() {
        issues.push(ParamIssue::NotFinite { field, value });
    } else if value <= 0.0 {
        issues.push(ParamIssue::NonPositive { field, value });
    }
}

fn check_non_negative(issues: &mut Vec<ParamIssue>, field: &'static str, value: f64) {
    if !value.is_finite() {
        issues.push(ParamIssue::NotFinite { field, value });
    } else if value < 0.0 {
        issues.push(ParamIssue::Negative { field, value });
    }
}

impl DeviceParams {
    /// Assemble a device description, computing the derived coefficients.
    /// The result is not yet checked; run it through [`validate`].
    pub fn assemble(medium: MediumParams, cavity: CavityParams, mech: MechParams) -> Self {
        let eta = EPS0 * mech.plate_area / (2.0 * mech.plate_gap * mech.plate_gap);
        let spring = mech.mass * mech.omega_m * mech.omega_m;
        let detune_coeff = cavity.detuning_factor * cavity.g0 * eta / spring;
        DeviceParams {
            medium,
            cavity,
            mech,
            derived: Derived { eta, spring, detune_coeff },
        }
    }
}

/// Check every invariant of a parameter set and recompute the derived fields.
///
/// All violations are collected before returning. Soft conditions (a marginal
/// gamma ordering, a strong probe) come back as warnings next to the validated
/// parameters. Running the output through `validate` again reproduces it
/// bit for bit.
pub fn validate(p: &DeviceParams) -> Result<(DeviceParams, Vec<ParamWarning>), ValidationErrors> {
    let mut issues = Vec::new();
    let m = &p.medium;
    check_positive(&mut issues, "gamma", m.gamma);
    check_positive(&mut issues, "gamma_s", m.gamma_s);
    check_positive(&mut issues, "g", m.g);
    check_positive(&mut issues, "g_p", m.g_p);
    check_positive(&mut issues, "probe_drive", m.probe_drive);
    check_positive(&mut issues, "chi0", m.chi0);
    if !m.delta.is_finite() {
        issues.push(ParamIssue::NotFinite { field: "delta", value: m.delta });
    }
    if !m.n_atoms.is_finite() {
        issues.push(ParamIssue::NotFinite { field: "n_atoms", value: m.n_atoms });
    } else if m.n_atoms < 1.0 {
        issues.push(ParamIssue::AtomCountBelowOne { value: m.n_atoms });
    }

    let c = &p.cavity;
    check_positive(&mut issues, "kappa", c.kappa);
    check_non_negative(&mut issues, "eps_c", c.eps_c);
    check_positive(&mut issues, "G0", c.g0);
    check_positive(&mut issues, "detuning_factor", c.detuning_factor);
    if let Some(w) = c.omega_c {
        check_positive(&mut issues, "omega_c", w);
    }

    let mech = &p.mech;
    check_positive(&mut issues, "mass", mech.mass);
    check_positive(&mut issues, "omega_m", mech.omega_m);
    check_non_negative(&mut issues, "gamma_m", mech.gamma_m);
    check_positive(&mut issues, "plate_area", mech.plate_area);
    check_positive(&mut issues, "plate_gap", mech.plate_gap);

    if !issues.is_empty() {
        return Err(ValidationErrors { issues });
    }

    let mut warnings = Vec::new();
    if m.gamma_s >= 0.1 * m.gamma {
        warnings.push(ParamWarning::GammaOrder { gamma_s: m.gamma_s, gamma: m.gamma });
    }
    if m.probe_drive >= 0.1 * m.gamma {
        warnings.push(ParamWarning::WeakField { probe_drive: m.probe_drive, gamma: m.gamma });
    }

    Ok((DeviceParams::assemble(p.medium, p.cavity, p.mech), warnings))
}

/// Flat configuration document, the JSON form a device is described in.
///
/// Key names are part of the interface; unknown keys are rejected so a typo
/// cannot silently fall back to a default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub gamma: f64,
    pub gamma_s: f64,
    pub g: f64,
    /// Defaults to `g` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_p: Option<f64>,
    #[serde(default = "default_probe_drive")]
    pub probe_drive: f64,
    #[serde(default)]
    pub delta: f64,
    #[serde(default = "default_n_atoms")]
    pub n_atoms: f64,
    #[serde(default = "default_chi0")]
    pub chi0: f64,
    pub kappa: f64,
    pub eps_c: f64,
    #[serde(rename = "G0")]
    pub g0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    #[serde(default = "default_detuning_factor")]
    pub detuning_factor: f64,
    pub mass: f64,
    pub omega_m: f64,
    pub gamma_m: f64,
    pub plate_area: f64,
    pub plate_gap: f64,
    #[serde(default)]
    pub include_radiation_pressure: bool,
}

fn default_probe_drive() -> f64 {
    1.0
}
fn default_n_atoms() -> f64 {
    1.0
}
fn default_chi0() -> f64 {
    1.0
}
fn default_detuning_factor() -> f64 {
    2.0
}

impl Config {
    /// Parse a JSON configuration document.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Build and validate the device this configuration describes.
    pub fn device(&self) -> Result<(DeviceParams, Vec<ParamWarning>), ValidationErrors> {
        let medium = MediumParams {
            gamma: self.gamma,
            gamma_s: self.gamma_s,
            g: self.g,
            g_p: self.g_p.unwrap_or(self.g),
            probe_drive: self.probe_drive,
            delta: self.delta,
            n_atoms: self.n_atoms,
            chi0: self.chi0,
        };
        let cavity = CavityParams {
            kappa: self.kappa,
            eps_c: self.eps_c,
            g0: self.g0,
            omega_c: self.omega_c,
            detuning_factor: self.detuning_factor,
        };
        let mech = MechParams {
            mass: self.mass,
            omega_m: self.omega_m,
            gamma_m: self.gamma_m,
            plate_area: self.plate_area,
            plate_gap: self.plate_gap,
            include_radiation_pressure: self.include_radiation_pressure,
        };
        validate(&DeviceParams::assemble(medium, cavity, mech))
    }

    /// Export the configuration that reproduces a device description.
    pub fn from_device(p: &DeviceParams) -> Self {
        Config {
            gamma: p.medium.gamma,
            gamma_s: p.medium.gamma_s,
            g: p.medium.g,
            g_p: Some(p.medium.g_p),
            probe_drive: p.medium.probe_drive,
            delta: p.medium.delta,
            n_atoms: p.medium.n_atoms,
            chi0: p.medium.chi0,
            kappa: p.cavity.kappa,
            eps_c: p.cavity.eps_c,
            g0: p.cavity.g0,
            omega_c: p.cavity.omega_c,
            detuning_factor: p.cavity.detuning_factor,
            mass: p.mech.mass,
            omega_m: p.mech.omega_m,
            gamma_m: p.mech.gamma_m,
            plate_area: p.mech.plate_area,
            plate_gap: p.mech.plate_gap,
            include_radiation_pressure: p.mech.include_radiation_pressure,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_relative_eq;

    #[test]
    fn demo_set_validates_without_warnings() {
        let p = presets::spectroscopy_demo();
        let (v, warnings) = validate(&p).unwrap();
        assert!(warnings.is_empty(), "unexpected warnings: {warnings:?}");
        assert_eq!(v, p);
    }

    #[test]
    fn derived_coefficients_match_reference_values() {
        // Reference values computed independently at 50-digit precision.
        let p = presets::spectroscopy_demo();
        assert_relative_eq!(p.derived.eta, 6.0232570155102041e-5, max_relative = 1e-14);
        assert_relative_eq!(p.derived.spring, 1.8926200139638981e5, max_relative = 1e-14);
        assert_relative_eq!(p.derived.detune_coeff, 5.9988650181222243e7, max_relative = 1e-14);
    }

    #[test]
    fn eta_scales_linearly_in_area_and_inverse_square_in_gap() {
        let area = 0.6e-6;
        let gap = 0.21e-6;
        let base = coulomb_eta(area, gap).unwrap();
        // Doubling is exact in binary arithmetic, so these hold bitwise.
        assert_eq!(coulomb_eta(2.0 * area, gap).unwrap(), 2.0 * base);
        assert_eq!(coulomb_eta(area, 2.0 * gap).unwrap(), base / 4.0);
    }

    #[test]
    fn validate_is_idempotent() {
        let p = presets::modulation_demo();
        let (once, _) = validate(&p).unwrap();
        let (twice, _) = validate(&once).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.derived.eta.to_bits(), twice.derived.eta.to_bits());
        assert_eq!(once.derived.spring.to_bits(), twice.derived.spring.to_bits());
        assert_eq!(
            once.derived.detune_coeff.to_bits(),
            twice.derived.detune_coeff.to_bits()
        );
    }

    #[test]
    fn validate_collects_every_violation() {
        let mut p = presets::spectroscopy_demo();
        p.mech.mass = 0.0;
        p.cavity.kappa = -1.0;
        p.medium.n_atoms = 0.5;
        let err = validate(&p).unwrap_err();
        assert_eq!(err.issues.len(), 3);
        assert!(err
            .issues
            .contains(&ParamIssue::NonPositive { field: "mass", value: 0.0 }));
        assert!(err
            .issues
            .contains(&ParamIssue::NonPositive { field: "kappa", value: -1.0 }));
        assert!(err.issues.contains(&ParamIssue::AtomCountBelowOne { value: 0.5 }));
    }

    #[test]
    fn gamma_order_and_strong_probe_warn_but_pass() {
        let mut p = presets::spectroscopy_demo();
        p.medium.gamma_s = 0.5 * p.medium.gamma;
        p.medium.probe_drive = p.medium.gamma;
        let (_, warnings) = validate(&p).unwrap();
        assert_eq!(warnings.len(), 2);
        assert!(matches!(warnings[0], ParamWarning::GammaOrder { .. }));
        assert!(matches!(warnings[1], ParamWarning::WeakField { .. }));
    }

    #[test]
    fn zero_mechanical_damping_is_allowed() {
        let mut p = presets::spectroscopy_demo();
        p.mech.gamma_m = 0.0;
        assert!(validate(&p).is_ok());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let text = serde_json::to_string(&Config::from_device(&presets::spectroscopy_demo()))
            .unwrap()
            .replace('}', ",\"kappa_eff\":1.0}");
        let err = Config::from_json(&text).unwrap_err();
        assert!(err.to_string().contains("kappa_eff"), "{err}");
    }

    #[test]
    fn config_rejects_missing_required_keys() {
        assert!(Config::from_json("{}").is_err());
    }

    #[test]
    fn config_defaults_fill_in() {
        let p = presets::spectroscopy_demo();
        let mut value = serde_json::to_value(Config::from_device(&p)).unwrap();
        let obj = value.as_object_mut().unwrap();
        for key in ["g_p", "probe_drive", "delta", "n_atoms", "chi0", "detuning_factor"] {
            obj.remove(key);
        }
        let cfg = Config::from_json(&serde_json::to_string(&value).unwrap()).unwrap();
        let (device, _) = cfg.device().unwrap();
        assert_eq!(device.medium.g_p, device.medium.g);
        assert_eq!(device.medium.probe_drive, 1.0);
        assert_eq!(device.medium.delta, 0.0);
        assert_eq!(device.medium.n_atoms, 1.0);
        assert_eq!(device.medium.chi0, 1.0);
        assert_eq!(device.cavity.detuning_factor, 2.0);
    }

    #[test]
    fn config_round_trips_through_device() {
        let p = presets::modulation_demo();
        let cfg = Config::from_device(&p);
        let (rebuilt, _) = cfg.device().unwrap();
        assert_eq!(rebuilt, p);
    }
}
