//! File formats: CSV tables, canonical JSON, content digests, run manifests.
//!
//! Every float is written with 17 significant digits, enough to reproduce the
//! exact bits on read-back, so a written table is a lossless record of a run.
//! JSON documents are canonicalized (sorted keys, compact separators) before
//! hashing so digests do not depend on key order or whitespace.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::SpectrumTable;
use crate::dynamics::Trajectory;
use crate::synthesis::{ClipEvent, DriveProgram, TargetWaveform};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("expected header {expected:?}, got {got:?}")]
    Header { expected: &'static str, got: String },
}

/// Render a float with 17 significant digits, the shortest count that is
/// always enough to reproduce the exact value.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub const TRAJECTORY_HEADER: &str =
    "t,u_sq,q,qdot,re_a,im_a,n_c,re_sigma_ba,im_sigma_ba,re_sigma_bc,im_sigma_bc,absorption,dispersion";
pub const SPECTRUM_HEADER: &str = "delta_p,u_sq,im_chi,re_chi";
pub const PROGRAM_HEADER: &str = "t,u_sq";
pub const TARGET_HEADER: &str = "t,a_target";

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 + traj.rows.len() * 280);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in &traj.rows {
        let fields = [
            r.t,
            r.u_sq,
            r.q,
            r.qdot,
            r.a.re,
            r.a.im,
            r.n_c,
            r.sigma_ba.re,
            r.sigma_ba.im,
            r.sigma_bc.re,
            r.sigma_bc.im,
            r.absorption,
            r.dispersion,
        ];
        push_row(&mut out, &fields);
    }
    out
}

pub fn spectrum_csv(table: &SpectrumTable) -> String {
    let mut out = String::with_capacity(64 + table.rows.len() * 95);
    out.push_str(SPECTRUM_HEADER);
    out.push('\n');
    for r in &table.rows {
        push_row(&mut out, &[r.delta_p, r.u_sq, r.absorption, r.dispersion]);
    }
    out
}

pub fn program_csv(program: &DriveProgram) -> String {
    let mut out = String::with_capacity(16 + program.times.len() * 46);
    out.push_str(PROGRAM_HEADER);
    out.push('\n');
    for (&t, &u) in program.times.iter().zip(&program.u_sq) {
        push_row(&mut out, &[t, u]);
    }
    out
}

pub fn target_csv(target: &TargetWaveform) -> String {
    let mut out = String::with_capacity(16 + target.times.len() * 46);
    out.push_str(TARGET_HEADER);
    out.push('\n');
    for (&t, &a) in target.times.iter().zip(&target.absorption) {
        push_row(&mut out, &[t, a]);
    }
    out
}

fn push_row(out: &mut String, fields: &[f64]) {
    for (i, x) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt17(*x));
    }
    out.push('\n');
}

fn parse_rows(text: &str, expected: &'static str) -> Result<Vec<Vec<f64>>, FormatError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").trim_end_matches('\r');
    if header != expected {
        return Err(FormatError::Header { expected, got: header.to_string() });
    }
    let width = expected.split(',').count();
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(width);
        for field in line.split(',') {
            let value: f64 = field.trim().parse().map_err(|e| FormatError::Csv {
                line: idx + 2,
                message: format!("bad float {field:?}: {e}"),
            })?;
            row.push(value);
        }
        if row.len() != width {
            return Err(FormatError::Csv {
                line: idx + 2,
                message: format!("expected {width} fields, got {}", row.len()),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_program_csv(text: &str) -> Result<DriveProgram, FormatError> {
    let rows = parse_rows(text, PROGRAM_HEADER)?;
    Ok(DriveProgram {
        times: rows.iter().map(|r| r[0]).collect(),
        u_sq: rows.iter().map(|r| r[1]).collect(),
    })
}

pub fn parse_target_csv(text: &str) -> Result<TargetWaveform, FormatError> {
    let rows = parse_rows(text, TARGET_HEADER)?;
    Ok(TargetWaveform {
        times: rows.iter().map(|r| r[0]).collect(),
        absorption: rows.iter().map(|r| r[1]).collect(),
    })
}

pub fn clips_json(clips: &[ClipEvent]) -> String {
    let value = serde_json::to_value(clips).expect("clip events serialize");
    serde_json::to_string_pretty(&value).expect("clip json renders")
}

/// Compact JSON with sorted keys: the canonical form used for hashing.
pub fn canonical_json(value: &serde_json::Value) -> String {
    // serde_json maps iterate in sorted key order, so a value round-trip
    // plus compact rendering is already canonical.
    serde_json::to_string(value).expect("json value renders")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reproducibility record written next to every output file set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Producing tool, always "eomsim".
    pub tool: String,
    pub version: String,
    /// Subcommand that produced the outputs.
    pub command: String,
    /// Wall-clock creation time, RFC 3339 UTC. Informational only; it is the
    /// one field two identical runs do not share.
    pub created_utc: String,
    /// SHA-256 of the canonical effective configuration, overrides applied.
    pub config_digest: String,
    /// Effective run parameters beyond the device configuration.
    pub parameters: serde_json::Value,
    /// SHA-256 per input file, keyed by role.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 per output file, keyed by file name.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("manifest serializes");
        serde_json::to_string_pretty(&value).expect("manifest renders")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn program_csv_round_trips_exact_bits() {
        let program = DriveProgram {
            times: vec![0.0, 1.0 / 3.0, 2e-300, 1.7976931348623157e308],
            u_sq: vec![0.1 + 0.2, std::f64::consts::PI, 4.9e-324, 0.0],
        };
        let text = program_csv(&program);
        let back = parse_program_csv(&text).unwrap();
        for (a, b) in program.times.iter().zip(&back.times) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in program.u_sq.iter().zip(&back.u_sq) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn target_csv_round_trips() {
        let target = TargetWaveform {
            times: vec![0.0, 2.5e-4, 5.0e-4],
            absorption: vec![1e-3, 2e-2, 1e-3],
        };
        let back = parse_target_csv(&target_csv(&target)).unwrap();
        assert_eq!(back, target);
    }

    #[test]
    fn wrong_headers_are_rejected() {
        let err = parse_target_csv("t,u_sq\n0,1\n").unwrap_err();
        assert!(matches!(err, FormatError::Header { .. }));
        let err = parse_program_csv("").unwrap_err();
        assert!(matches!(err, FormatError::Header { .. }));
        assert!(parse_target_csv("t,a_target\n0,1e-3\n").is_ok());
    }

    #[test]
    fn malformed_rows_are_located() {
        let err = parse_program_csv("t,u_sq\n0,1\nnope,2\n").unwrap_err();
        match err {
            FormatError::Csv { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
        let err = parse_program_csv("t,u_sq\n0,1,2\n").unwrap_err();
        assert!(matches!(err, FormatError::Csv { line: 2, .. }));
    }

    #[test]
    fn blank_lines_and_crlf_are_tolerated() {
        let program = parse_program_csv("t,u_sq\r\n0,1\r\n\r\n1e-3,2\r\n").unwrap();
        assert_eq!(program.times, vec![0.0, 1e-3]);
        assert_eq!(program.u_sq, vec![1.0, 2.0]);
    }

    #[test]
    fn canonical_json_sorts_keys_and_strips_space() {
        let value: serde_json::Value =
            serde_json::from_str("{\"zeta\": 1, \"alpha\": {\"b\": 2, \"a\": 3}}").unwrap();
        assert_eq!(canonical_json(&value), "{\"alpha\":{\"a\":3,\"b\":2},\"zeta\":1}");
    }

    #[test]
    fn digest_matches_known_vectors() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let mut outputs = BTreeMap::new();
        outputs.insert("run.csv".to_string(), sha256_hex(b"abc"));
        let manifest = RunManifest {
            tool: "eomsim".into(),
            version: "0.1.0".into(),
            command: "simulate".into(),
            created_utc: "2026-01-01T00:00:00Z".into(),
            config_digest: sha256_hex(b"{}"),
            parameters: serde_json::json!({"dt": 1e-9}),
            inputs: BTreeMap::new(),
            outputs,
        };
        let back: RunManifest = serde_json::from_str(&manifest.to_json()).unwrap();
        assert_eq!(back, manifest);
    }

    proptest! {
        #[test]
        fn fmt17_round_trips_any_finite_float(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let parsed: f64 = fmt17(x).parse().unwrap();
            prop_assert_eq!(parsed.to_bits(), x.to_bits());
        }
    }
}
