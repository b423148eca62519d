//! CSV output with a comment-header run manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, which
//! always uses `.` as the decimal separator and never depends on locale.

use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::perturbation::EncoderKind;
use crate::precoder::{Constellation, Criterion};
use crate::simulator::{BerRecord, SimConfig};

pub const HEADER: &str =
    "snr_db,encoder,criterion,n_t,n_u,n_r,modulation,a,m,p,bits_sent,bit_errors,ber,mean_gamma,mean_evals";

/// One data row of the output file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub snr_db: f64,
    pub encoder: EncoderKind,
    pub criterion: Criterion,
    pub n_t: usize,
    pub n_u: usize,
    pub n_r: usize,
    pub modulation: Constellation,
    pub a: u32,
    pub m: usize,
    pub p: usize,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub mean_gamma: f64,
    pub mean_evals: f64,
}

impl CsvRow {
    pub fn new(config: &SimConfig, record: &BerRecord) -> Self {
        Self {
            snr_db: record.snr_db,
            encoder: record.encoder,
            criterion: config.criterion,
            n_t: config.dims.transmit_antennas(),
            n_u: config.dims.users(),
            n_r: config.dims.receive_antennas(),
            modulation: config.constellation,
            a: config.a,
            m: config.m,
            p: config.p,
            bits_sent: record.bits_sent,
            bit_errors: record.bit_errors,
            ber: record.ber,
            mean_gamma: record.mean_gamma,
            mean_evals: record.mean_evals,
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.snr_db,
            self.encoder,
            self.criterion,
            self.n_t,
            self.n_u,
            self.n_r,
            self.modulation,
            self.a,
            self.m,
            self.p,
            self.bits_sent,
            self.bit_errors,
            self.ber,
            self.mean_gamma,
            self.mean_evals
        )
    }

    pub fn parse(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 15 {
            return Err(format!("expected 15 fields, found {}", fields.len()));
        }
        fn get<T: FromStr>(fields: &[&str], i: usize) -> Result<T, String> {
            fields[i]
                .parse()
                .map_err(|_| format!("field {} ('{}') is malformed", i + 1, fields[i]))
        }
        Ok(Self {
            snr_db: get(&fields, 0)?,
            encoder: get(&fields, 1)?,
            criterion: get(&fields, 2)?,
            n_t: get(&fields, 3)?,
            n_u: get(&fields, 4)?,
            n_r: get(&fields, 5)?,
            modulation: get(&fields, 6)?,
            a: get(&fields, 7)?,
            m: get(&fields, 8)?,
            p: get(&fields, 9)?,
            bits_sent: get(&fields, 10)?,
            bit_errors: get(&fields, 11)?,
            ber: get(&fields, 12)?,
            mean_gamma: get(&fields, 13)?,
            mean_evals: get(&fields, 14)?,
        })
    }
}

/// Provenance written as `#` comment lines ahead of the data.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config_echo: Vec<String>,
    pub version: String,
    pub seed: u64,
    pub started: String,
    pub finished: String,
    /// SHA-256 of each data row, in row order.
    pub checksums: Vec<String>,
}

impl RunManifest {
    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("# bdvp {}", self.version),
            format!("# seed: {}", self.seed),
            format!("# started: {}", self.started),
            format!("# finished: {}", self.finished),
        ];
        out.extend(self.config_echo.iter().map(|l| format!("# config: {l}")));
        out.extend(
            self.checksums
                .iter()
                .enumerate()
                .map(|(i, c)| format!("# row {} sha256: {c}", i + 1)),
        );
        out
    }
}

pub fn row_checksum(line: &str) -> String {
    Sha256::digest(line.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Renders a complete output file.
pub fn render(manifest: &RunManifest, rows: &[CsvRow]) -> String {
    let mut out = String::new();
    for line in manifest.lines() {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str(HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_line());
        out.push('\n');
    }
    out
}

/// Data rows of a rendered file, skipping comments and the header.
pub fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .filter(|l| !l.starts_with('#') && *l != HEADER && !l.is_empty())
}
