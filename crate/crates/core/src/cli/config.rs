//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Lists are comma
//! separated. Recognized keys:
//!
//! ```text
//! n_t, n_u, n_r          antenna configuration (n_t = n_u · n_r)
//! modulation             qpsk | qam16
//! criterion              zf | mmse
//! encoder                thp | fse | qrdme | exhaustive, or a list of them
//! a                      candidate bound, T = 2a + 1
//! m                      QRDM-E breadth (default T)
//! p                      FSE full-expansion depth (default 1)
//! snr_list               SNR points in dB
//! min_channel_uses       minimum channel uses per point
//! min_bit_errors         error target per point (default 0)
//! seed                   master seed (default 0)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::channel::SystemDims;
use crate::perturbation::EncoderKind;
use crate::precoder::{Constellation, Criterion};
use crate::simulator::SimConfig;

const KEYS: [&str; 13] = [
    "n_t",
    "n_u",
    "n_r",
    "modulation",
    "criterion",
    "encoder",
    "a",
    "m",
    "p",
    "snr_list",
    "min_channel_uses",
    "min_bit_errors",
    "seed",
];

/// A configuration problem, anchored to a line of the file when possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn whole(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parsed configuration. Several encoders may share one file; each becomes
/// its own [`SimConfig`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dims: SystemDims,
    pub constellation: Constellation,
    pub criterion: Criterion,
    pub encoders: Vec<EncoderKind>,
    pub a: u32,
    /// `None` means "same as T".
    pub m: Option<usize>,
    pub p: usize,
    pub snr_db: Vec<f64>,
    pub min_channel_uses: u64,
    pub min_bit_errors: u64,
    pub seed: u64,
    /// Canonical `key=value` lines, in file order.
    pub echo: Vec<String>,
}

impl RunConfig {
    pub fn m_or_default(&self, a: u32) -> usize {
        self.m.unwrap_or(2 * a as usize + 1)
    }

    /// One simulation per encoder, with candidate bound `a`.
    pub fn sim_configs(&self, a: u32) -> Vec<SimConfig> {
        self.encoders
            .iter()
            .map(|&encoder| SimConfig {
                dims: self.dims,
                constellation: self.constellation,
                criterion: self.criterion,
                encoder,
                a,
                m: self.m_or_default(a),
                p: self.p,
                snr_db: self.snr_db.clone(),
                min_channel_uses: self.min_channel_uses,
                min_bit_errors: self.min_bit_errors,
                seed: self.seed,
            })
            .collect()
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| ConfigError::at(line, format!("invalid value '{value}' for {key}: {e}")))
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_value(line, key, v))
        .collect()
}

/// Parses configuration text.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    let mut echo = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::at(line, format!("expected key=value, got '{content}'")))?;
        let key = key.trim();
        let value = value.trim();
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(ConfigError::at(line, format!("unknown key '{key}'")));
        };
        if let Some((first, _)) = entries.insert(known, (line, value)) {
            return Err(ConfigError::at(
                line,
                format!("duplicate key '{key}' (first set on line {first})"),
            ));
        }
        echo.push(format!("{known}={value}"));
    }

    let required = |key: &str| -> Result<(usize, &str), ConfigError> {
        entries
            .get(key)
            .copied()
            .ok_or_else(|| ConfigError::whole(format!("missing required key '{key}'")))
    };

    let (l_nt, v) = required("n_t")?;
    let n_t: usize = parse_value(l_nt, "n_t", v)?;
    let (l, v) = required("n_u")?;
    let n_u: usize = parse_value(l, "n_u", v)?;
    let (l, v) = required("n_r")?;
    let n_r: usize = parse_value(l, "n_r", v)?;
    let dims = SystemDims::new(n_t, n_u, n_r).map_err(|e| ConfigError::at(l_nt, e.to_string()))?;

    let (l, v) = required("modulation")?;
    let constellation: Constellation = parse_value(l, "modulation", v)?;
    let (l, v) = required("criterion")?;
    let criterion: Criterion = parse_value(l, "criterion", v)?;
    let (l, v) = required("encoder")?;
    let encoders: Vec<EncoderKind> = parse_list(l, "encoder", v)?;
    if encoders.is_empty() {
        return Err(ConfigError::at(l, "encoder list is empty"));
    }
    let (l, v) = required("a")?;
    let a: u32 = parse_value(l, "a", v)?;

    let m = match entries.get("m") {
        Some(&(l, v)) => {
            let m: usize = parse_value(l, "m", v)?;
            if m == 0 {
                return Err(ConfigError::at(l, "m must be at least 1"));
            }
            Some(m)
        }
        None => None,
    };
    let p = match entries.get("p") {
        Some(&(l, v)) => {
            let p: usize = parse_value(l, "p", v)?;
            if p == 0 || p > dims.search_dim() {
                return Err(ConfigError::at(l, format!("p must be in 1..={}", dims.search_dim())));
            }
            p
        }
        None => 1,
    };

    let (l, v) = required("snr_list")?;
    let snr_db: Vec<f64> = parse_list(l, "snr_list", v)?;
    if snr_db.is_empty() {
        return Err(ConfigError::at(l, "snr_list is empty"));
    }
    if snr_db.iter().any(|x| !x.is_finite()) {
        return Err(ConfigError::at(l, "snr_list entries must be finite"));
    }
    let (l, v) = required("min_channel_uses")?;
    let min_channel_uses: u64 = parse_value(l, "min_channel_uses", v)?;
    if min_channel_uses == 0 {
        return Err(ConfigError::at(l, "min_channel_uses must be at least 1"));
    }
    let min_bit_errors = match entries.get("min_bit_errors") {
        Some(&(l, v)) => parse_value(l, "min_bit_errors", v)?,
        None => 0,
    };
    let seed = match entries.get("seed") {
        Some(&(l, v)) => parse_value(l, "seed", v)?,
        None => 0,
    };

    let config = RunConfig {
        dims,
        constellation,
        criterion,
        encoders,
        a,
        m,
        p,
        snr_db,
        min_channel_uses,
        min_bit_errors,
        seed,
        echo,
    };
    for sim in config.sim_configs(a) {
        sim.validate().map_err(|e| {
            let line = entries.get("encoder").map(|&(l, _)| l);
            ConfigError {
                line,
                message: format!("{} encoder: {e}", sim.encoder),
            }
        })?;
    }
    Ok(config)
}
