//! Simulator and waveform-synthesis toolchain for an electro-optic modulator
//! built from a charged mechanical oscillator, an optical cavity, and a
//! three-level medium.
//!
//! A squared drive voltage pushes a charged beam, the beam detunes the
//! cavity, the cavity photon number dresses the medium, and the probe reads
//! the result as absorption. [`steady`] evaluates that chain in closed form,
//! [`dynamics`] integrates it in time, [`synthesis`] inverts it to compile
//! absorption targets into voltage programs, and [`analysis`] extracts
//! spectra and figures of merit. [`io`] defines the file formats and
//! [`cli`] the command-line front end.

pub mod analysis;
pub mod cli;
pub mod dynamics;
pub mod io;
pub mod params;
pub mod presets;
pub mod steady;
pub mod synthesis;
