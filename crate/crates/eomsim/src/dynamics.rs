//! Time-domain integration of the driven beam, cavity, and medium.
//!
//! The coupled system splits into three blocks with a one-way influence chain
//! on short times: the drive pushes the beam, the beam detunes the cavity, the
//! cavity dresses the medium. Within a step each block is a linear ODE with
//! constant coefficients, so the default solver freezes the neighbors for one
//! step and applies the exact propagator of each block in chain order. Every
//! block update is exact; the only error is the splitting itself, which
//! vanishes as the step shrinks.
//!
//! A conventional adaptive Runge-Kutta integrator over the full coupled
//! system is kept alongside as an independent cross-check. It shares nothing
//! with the split solver beyond the derivative definitions.
//!
//! The medium is propagated per unit probe drive. The probe enters the Bloch
//! block only as an inhomogeneous term, so the unit response carries all the
//! physics and the physical coherences are the unit response scaled by
//! `probe_drive`. Absorption and dispersion reported here are gamma times the
//! imaginary and real parts of the unit-drive coherence, which makes them
//! exactly independent of the probe level.

use num_complex::Complex64;
use thiserror::Error;

use crate::params::{DeviceParams, SystemState, HBAR};
use crate::steady::{self, SteadyError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Frozen-coefficient exact propagators applied block by block.
    ClosedForm,
    /// Classic fourth-order Runge-Kutta with step-doubling error control.
    Rk4Adaptive,
}

/// Where a run starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartState {
    /// Steady state of the full chain at the drive's initial value.
    SteadyAtInitialDrive,
    /// Everything at zero: beam at rest, cavity empty, medium dark.
    Rest,
    /// An explicit state, physical coherences included.
    Explicit(SystemState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Base step (s). The closed-form solver divides the duration into whole
    /// steps near this size; the adaptive solver starts from it.
    pub dt: f64,
    pub method: Method,
    /// Per-component relative tolerance of the adaptive controller, taken
    /// against each component's running magnitude.
    pub rel_tol: f64,
    /// Absolute error floor added to every weight, in raw state units. Zero
    /// leaves the control purely relative.
    pub abs_tol: f64,
    /// Hard ceiling on solver steps, attempted ones included.
    pub max_steps: u64,
    /// Record every k-th step; the first and last states are always kept.
    pub record_stride: usize,
    /// Probe detuning from the bare transition during the run (rad/s).
    pub delta_p: f64,
    pub start: StartState,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-9,
            method: Method::ClosedForm,
            rel_tol: 1e-8,
            abs_tol: 0.0,
            max_steps: 50_000_000,
            record_stride: 1,
            delta_p: 0.0,
            start: StartState::SteadyAtInitialDrive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("duration must be positive and finite, got {value}")]
    InvalidDuration { value: f64 },
    #[error("step must be positive and finite, got {value}")]
    InvalidStep { value: f64 },
    #[error("run needs {needed} steps, above the limit of {max}")]
    MaxStepsExceeded { needed: u64, max: u64 },
    #[error("state stopped being finite at t = {t:.9e} s")]
    StateNotFinite { t: f64 },
    #[error("adaptive step shrank below {h:.3e} s at t = {t:.9e} s without meeting tolerance")]
    StepUnderflow { t: f64, h: f64 },
    #[error(transparent)]
    Steady(#[from] SteadyError),
}

/// One recorded sample of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    /// Time (s).
    pub t: f64,
    /// Instantaneous squared drive voltage (V^2).
    pub u_sq: f64,
    /// Beam displacement (m).
    pub q: f64,
    /// Beam velocity (m/s).
    pub qdot: f64,
    /// Intracavity field amplitude.
    pub a: Complex64,
    /// Intracavity photon number |a|^2.
    pub n_c: f64,
    /// Probe-transition coherence at the configured probe drive.
    pub sigma_ba: Complex64,
    /// Ground-state coherence at the configured probe drive.
    pub sigma_bc: Complex64,
    /// Normalized absorption, gamma * Im of the unit-drive coherence.
    pub absorption: f64,
    /// Normalized dispersion, gamma * Re of the unit-drive coherence.
    pub dispersion: f64,
}

/// Result of a run: the recorded rows plus whole-run diagnostics gathered at
/// every step, recorded or not.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub rows: Vec<TrajectoryRow>,
    /// Smallest absorption seen at any step. Negative values mean transient
    /// gain, which a fast-moving window does produce.
    pub min_absorption: f64,
    /// Largest absorption seen at any step.
    pub max_absorption: f64,
    /// Largest |sigma_ba| seen at any step, probe scaling included.
    pub max_coherence: f64,
    /// Steps the solver took, attempted ones included for the adaptive method.
    pub steps: u64,
}

impl Trajectory {
    pub fn final_row(&self) -> &TrajectoryRow {
        self.rows.last().expect("a trajectory always records its final state")
    }
}

/// Advance a damped oscillator one step under a constant applied force,
/// exactly. `force` is the total non-spring force (N); the oscillator relaxes
/// toward q_eq = force / spring. Handles underdamped, overdamped, and
/// near-critical damping in one closed form.
pub fn step_mechanics(p: &DeviceParams, q: f64, qdot: f64, force: f64, dt: f64) -> (f64, f64) {
    let omega_sq = p.mech.omega_m * p.mech.omega_m;
    let half_gm = 0.5 * p.mech.gamma_m;
    let q_eq = force / p.derived.spring;
    let x = q - q_eq;
    let v = qdot;

    // dc, dsn are the damping-weighted solutions of y'' = d * y with initial
    // slopes (1, 0) and (0, 1); d > 0 is the overdamped branch, d < 0 the
    // ringing one. The overdamped case is assembled from the two decay modes
    // directly: both exponents are non-positive, so nothing overflows even
    // for steps far beyond the relaxation time.
    let d = half_gm * half_gm - omega_sq;
    let z_sq = d * dt * dt;
    let (dc, dsn) = if z_sq.abs() < 1e-12 {
        let decay = (-half_gm * dt).exp();
        (
            decay * (1.0 + z_sq * (0.5 + z_sq / 24.0)),
            decay * dt * (1.0 + z_sq * (1.0 / 6.0 + z_sq / 120.0)),
        )
    } else if d > 0.0 {
        let root = d.sqrt();
        // half_gm - root written to avoid cancellation when root ~ half_gm.
        let lam_slow = omega_sq / (half_gm + root);
        let slow = (-lam_slow * dt).exp();
        let fast = (-(half_gm + root) * dt).exp();
        (0.5 * (slow + fast), 0.5 * (slow - fast) / root)
    } else {
        let root = (-d).sqrt();
        let decay = (-half_gm * dt).exp();
        let w = root * dt;
        (decay * w.cos(), decay * w.sin() / root)
    };
    let x_new = x * dc + (v + half_gm * x) * dsn;
    let v_new = v * dc - (omega_sq * x + half_gm * v) * dsn;
    (q_eq + x_new, v_new)
}

/// Advance the cavity field one step at a frozen detuning, exactly. The field
/// decays toward the steady amplitude at that detuning.
pub fn step_cavity(p: &DeviceParams, a: Complex64, delta: f64, dt: f64) -> Complex64 {
    let pole = Complex64::new(p.cavity.kappa, delta);
    let a_inf = p.cavity.eps_c / pole;
    a_inf + (a - a_inf) * (-pole * dt).exp()
}

/// Control field the medium sees: the cavity amplitude with the vacuum photon
/// folded in, |a~|^2 = |a|^2 + 1, keeping the phase of the field. An empty
/// cavity still couples with unit strength.
pub fn augmented_field(a: Complex64) -> Complex64 {
    let n = a.norm_sqr();
    if n < 1e-200 {
        Complex64::new(1.0, 0.0)
    } else {
        a * (1.0 + 1.0 / n).sqrt()
    }
}

fn sinch(z: Complex64) -> Complex64 {
    if z.norm() < 1e-6 {
        Complex64::new(1.0, 0.0) + z * z / 6.0
    } else {
        z.sinh() / z
    }
}

struct BlochMatrix {
    m11: Complex64,
    m12: Complex64,
    m21: Complex64,
    m22: Complex64,
}

fn bloch_matrix(p: &DeviceParams, a_tilde: Complex64, delta_p: f64) -> BlochMatrix {
    let m = &p.medium;
    BlochMatrix {
        m11: Complex64::new(m.gamma, delta_p),
        m12: -Complex64::i() * m.g * a_tilde,
        m21: -Complex64::i() * m.g * a_tilde.conj(),
        m22: Complex64::new(m.gamma_s, delta_p - m.delta),
    }
}

/// Steady coherences under a frozen control field: the point the Bloch block
/// relaxes toward. `drive` is the inhomogeneous probe term.
pub fn bloch_fixed_point(
    p: &DeviceParams,
    a_tilde: Complex64,
    delta_p: f64,
    drive: Complex64,
) -> (Complex64, Complex64) {
    let m = bloch_matrix(p, a_tilde, delta_p);
    let det = m.m11 * m.m22 - m.m12 * m.m21;
    ((m.m22 * drive) / det, (-m.m21 * drive) / det)
}

/// Advance the two coherences one step under a frozen control field, exactly.
///
/// The 2x2 propagator comes from the Cayley-Hamilton split exp(-M dt) =
/// exp(-mean dt) (cosh(s dt) I - dt sinch(s dt) (M - mean I)) with s^2 the
/// squared half-gap of the eigenvalues. The update is written around the
/// fixed point so a state already at rest stays put to rounding.
pub fn step_bloch(
    p: &DeviceParams,
    sigma_ba: Complex64,
    sigma_bc: Complex64,
    a_tilde: Complex64,
    delta_p: f64,
    drive: Complex64,
    dt: f64,
) -> (Complex64, Complex64) {
    let m = bloch_matrix(p, a_tilde, delta_p);
    let det = m.m11 * m.m22 - m.m12 * m.m21;
    let mean = 0.5 * (m.m11 + m.m22);
    let (inf_ba, inf_bc) = ((m.m22 * drive) / det, (-m.m21 * drive) / det);

    let s = (mean * mean - det).sqrt();
    let z = s * dt;
    let ch = z.cosh();
    let sh_dt = dt * sinch(z);
    let scale = (-mean * dt).exp();
    // exp(-B dt) with B = M - mean I, applied to the offset from the fixed point.
    let e11 = scale * (ch - sh_dt * (m.m11 - mean));
    let e12 = scale * (-sh_dt * m.m12);
    let e21 = scale * (-sh_dt * m.m21);
    let e22 = scale * (ch - sh_dt * (m.m22 - mean));

    let d_ba = sigma_ba - inf_ba;
    let d_bc = sigma_bc - inf_bc;
    (
        inf_ba + e11 * d_ba + e12 * d_bc,
        inf_bc + e21 * d_ba + e22 * d_bc,
    )
}

struct RunAccumulator {
    rows: Vec<TrajectoryRow>,
    min_absorption: f64,
    max_absorption: f64,
    max_unit_coherence: f64,
}

impl RunAccumulator {
    fn new() -> Self {
        RunAccumulator {
            rows: Vec::new(),
            min_absorption: f64::INFINITY,
            max_absorption: f64::NEG_INFINITY,
            max_unit_coherence: 0.0,
        }
    }

    fn observe(&mut self, absorption: f64, unit_coherence: f64) {
        self.min_absorption = self.min_absorption.min(absorption);
        self.max_absorption = self.max_absorption.max(absorption);
        self.max_unit_coherence = self.max_unit_coherence.max(unit_coherence);
    }
}

/// Unit-probe internal state: beam, cavity, and the medium response per unit
/// probe drive.
#[derive(Debug, Clone, Copy)]
struct UnitState {
    q: f64,
    qdot: f64,
    a: Complex64,
    r_ba: Complex64,
    r_bc: Complex64,
}

impl UnitState {
    fn is_finite(&self) -> bool {
        self.q.is_finite()
            && self.qdot.is_finite()
            && self.a.is_finite()
            && self.r_ba.is_finite()
            && self.r_bc.is_finite()
    }
}

const UNIT_DRIVE: Complex64 = Complex64::new(0.0, 1.0);

fn initial_state<F: Fn(f64) -> f64>(
    p: &DeviceParams,
    drive: &F,
    cfg: &SolverConfig,
) -> Result<UnitState, SolverError> {
    match cfg.start {
        StartState::SteadyAtInitialDrive => {
            let u_sq = drive(0.0);
            let q = steady::steady_displacement(p, u_sq)?;
            let delta = steady::detuning_for_displacement(p, q);
            let a = steady::cavity_amplitude(p, delta);
            let (r_ba, r_bc) = bloch_fixed_point(p, augmented_field(a), cfg.delta_p, UNIT_DRIVE);
            Ok(UnitState { q, qdot: 0.0, a, r_ba, r_bc })
        }
        StartState::Rest => Ok(UnitState {
            q: 0.0,
            qdot: 0.0,
            a: Complex64::new(0.0, 0.0),
            r_ba: Complex64::new(0.0, 0.0),
            r_bc: Complex64::new(0.0, 0.0),
        }),
        StartState::Explicit(s) => Ok(UnitState {
            q: s.q,
            qdot: s.qdot,
            a: s.a,
            r_ba: s.sigma_ba / p.medium.probe_drive,
            r_bc: s.sigma_bc / p.medium.probe_drive,
        }),
    }
}

fn row_from_state<F: Fn(f64) -> f64>(
    p: &DeviceParams,
    drive: &F,
    t: f64,
    s: &UnitState,
) -> TrajectoryRow {
    let pd = p.medium.probe_drive;
    TrajectoryRow {
        t,
        u_sq: drive(t),
        q: s.q,
        qdot: s.qdot,
        a: s.a,
        n_c: s.a.norm_sqr(),
        sigma_ba: pd * s.r_ba,
        sigma_bc: pd * s.r_bc,
        absorption: p.medium.gamma * s.r_ba.im,
        dispersion: p.medium.gamma * s.r_ba.re,
    }
}

/// Integrate the coupled system for `duration` seconds under a squared-voltage
/// drive `drive(t)`.
pub fn simulate<F: Fn(f64) -> f64>(
    p: &DeviceParams,
    drive: F,
    duration: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(SolverError::InvalidDuration { value: duration });
    }
    if !(cfg.dt > 0.0) || !cfg.dt.is_finite() {
        return Err(SolverError::InvalidStep { value: cfg.dt });
    }
    match cfg.method {
        Method::ClosedForm => simulate_closed_form(p, drive, duration, cfg),
        Method::Rk4Adaptive => simulate_rk4(p, drive, duration, cfg),
    }
}

fn simulate_closed_form<F: Fn(f64) -> f64>(
    p: &DeviceParams,
    drive: F,
    duration: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    let n = (duration / cfg.dt).round().max(1.0);
    if n > cfg.max_steps as f64 {
        return Err(SolverError::MaxStepsExceeded { needed: n as u64, max: cfg.max_steps });
    }
    let n = n as u64;
    let h = duration / n as f64;
    let stride = cfg.record_stride.max(1) as u64;

    let mut state = initial_state(p, &drive, cfg)?;
    let mut acc = RunAccumulator::new();
    acc.observe(p.medium.gamma * state.r_ba.im, state.r_ba.norm());
    acc.rows.push(row_from_state(p, &drive, 0.0, &state));

    let rp = p.mech.include_radiation_pressure;
    for k in 0..n {
        let t = k as f64 * h;
        let u_sq = drive(t);
        let force = p.derived.eta * u_sq
            + if rp { HBAR * p.cavity.g0 * state.a.norm_sqr() } else { 0.0 };
        let (q, qdot) = step_mechanics(p, state.q, state.qdot, force, h);
        let delta = steady::detuning_for_displacement(p, q);
        let a = step_cavity(p, state.a, delta, h);
        let (r_ba, r_bc) = step_bloch(
            p,
            state.r_ba,
            state.r_bc,
            augmented_field(a),
            cfg.delta_p,
            UNIT_DRIVE,
            h,
        );
        state = UnitState { q, qdot, a, r_ba, r_bc };

        let t_next = if k + 1 == n { duration } else { (k + 1) as f64 * h };
        if !state.is_finite() {
            return Err(SolverError::StateNotFinite { t: t_next });
        }
        acc.observe(p.medium.gamma * state.r_ba.im, state.r_ba.norm());
        if (k + 1) % stride == 0 || k + 1 == n {
            acc.rows.push(row_from_state(p, &drive, t_next, &state));
        }
    }

    Ok(Trajectory {
        rows: acc.rows,
        min_absorption: acc.min_absorption,
        max_absorption: acc.max_absorption,
        max_coherence: p.medium.probe_drive * acc.max_unit_coherence,
        steps: n,
    })
}

type RkVec = [f64; 8];

fn pack(s: &UnitState) -> RkVec {
    [s.q, s.qdot, s.a.re, s.a.im, s.r_ba.re, s.r_ba.im, s.r_bc.re, s.r_bc.im]
}

fn unpack(y: &RkVec) -> UnitState {
    UnitState {
        q: y[0],
        qdot: y[1],
        a: Complex64::new(y[2], y[3]),
        r_ba: Complex64::new(y[4], y[5]),
        r_bc: Complex64::new(y[6], y[7]),
    }
}

fn derivative<F: Fn(f64) -> f64>(
    p: &DeviceParams,
    drive: &F,
    delta_p: f64,
    t: f64,
    y: &RkVec,
) -> RkVec {
    let s = unpack(y);
    let force = p.derived.eta * drive(t)
        + if p.mech.include_radiation_pressure {
            HBAR * p.cavity.g0 * s.a.norm_sqr()
        } else {
            0.0
        };
    let qddot = (force - p.derived.spring * s.q) / p.mech.mass - p.mech.gamma_m * s.qdot;
    let delta = steady::detuning_for_displacement(p, s.q);
    let adot = p.cavity.eps_c - Complex64::new(p.cavity.kappa, delta) * s.a;
    let m = bloch_matrix(p, augmented_field(s.a), delta_p);
    let rdot_ba = UNIT_DRIVE - m.m11 * s.r_ba - m.m12 * s.r_bc;
    let rdot_bc = -m.m21 * s.r_ba - m.m22 * s.r_bc;
    [
        s.qdot,
        qddot,
        adot.re,
        adot.im,
        rdot_ba.re,
        rdot_ba.im,
        rdot_bc.re,
        rdot_bc.im,
    ]
}

fn rk4_step<F: Fn(f64) -> f64>(
    p: &DeviceParams,
    drive: &F,
    delta_p: f64,
    t: f64,
    y: &RkVec,
    h: f64,
) -> RkVec {
    let k1 = derivative(p, drive, delta_p, t, y);
    let mut y2 = *y;
    for i in 0..8 {
        y2[i] = y[i] + 0.5 * h * k1[i];
    }
    let k2 = derivative(p, drive, delta_p, t + 0.5 * h, &y2);
    for i in 0..8 {
        y2[i] = y[i] + 0.5 * h * k2[i];
    }
    let k3 = derivative(p, drive, delta_p, t + 0.5 * h, &y2);
    for i in 0..8 {
        y2[i] = y[i] + h * k3[i];
    }
    let k4 = derivative(p, drive, delta_p, t + h, &y2);
    let mut out = *y;
    for i in 0..8 {
        out[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn simulate_rk4<F: Fn(f64) -> f64>(
    p: &DeviceParams,
    drive: F,
    duration: f64,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    let mut state = initial_state(p, &drive, cfg)?;
    let mut acc = RunAccumulator::new();
    acc.observe(p.medium.gamma * state.r_ba.im, state.r_ba.norm());
    acc.rows.push(row_from_state(p, &drive, 0.0, &state));

    let mut y = pack(&state);
    // Running magnitude per component keeps relative control meaningful when
    // a component crosses zero.
    let mut typ: RkVec = y;
    for v in &mut typ {
        *v = v.abs().max(1e-290);
    }

    let mut t = 0.0f64;
    let mut h = cfg.dt.min(duration);
    let h_floor = duration * 1e-15;
    let mut steps: u64 = 0;
    let mut accepted: u64 = 0;
    let stride = cfg.record_stride.max(1) as u64;

    while t < duration {
        if steps >= cfg.max_steps {
            return Err(SolverError::MaxStepsExceeded { needed: steps + 1, max: cfg.max_steps });
        }
        steps += 1;
        if t + h > duration {
            h = duration - t;
        }

        let full = rk4_step(p, &drive, cfg.delta_p, t, &y, h);
        let half = rk4_step(p, &drive, cfg.delta_p, t, &y, 0.5 * h);
        let fine = rk4_step(p, &drive, cfg.delta_p, t + 0.5 * h, &half, 0.5 * h);

        let mut ratio = 0.0f64;
        for i in 0..8 {
            let err = (fine[i] - full[i]).abs() / 15.0;
            let scale = typ[i].max(fine[i].abs());
            let weight = cfg.abs_tol + cfg.rel_tol * scale;
            if weight > 0.0 {
                ratio = ratio.max(err / weight);
            } else if err > 0.0 {
                ratio = f64::INFINITY;
            }
        }

        if ratio <= 1.0 {
            t += h;
            y = fine;
            for i in 0..8 {
                typ[i] = typ[i].max(y[i].abs());
            }
            state = unpack(&y);
            if !state.is_finite() {
                return Err(SolverError::StateNotFinite { t });
            }
            accepted += 1;
            acc.observe(p.medium.gamma * state.r_ba.im, state.r_ba.norm());
            if accepted % stride == 0 || t >= duration {
                acc.rows.push(row_from_state(p, &drive, t, &state));
            }
        }

        let shrink = if ratio > 0.0 { 0.9 * ratio.powf(-0.2) } else { 5.0 };
        h *= shrink.clamp(0.2, 5.0);
        if h < h_floor {
            return Err(SolverError::StepUnderflow { t, h });
        }
    }

    if acc.rows.last().map(|r| r.t) != Some(duration) {
        acc.rows.push(row_from_state(p, &drive, duration, &state));
    }

    Ok(Trajectory {
        rows: acc.rows,
        min_absorption: acc.min_absorption,
        max_absorption: acc.max_absorption,
        max_coherence: p.medium.probe_drive * acc.max_unit_coherence,
        steps,
    })
}
