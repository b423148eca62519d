//! Integer (unnormalized) square QAM constellations with per-dimension Gray
//! mapping.
//!
//! Each complex symbol is two independent real PAM symbols. Per real
//! dimension the alphabets are `{-1, +1}` (QPSK) and `{-3, -1, +1, +3}`
//! (16-QAM), with spacing 2.

use std::fmt;
use std::str::FromStr;

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constellation {
    Qpsk,
    Qam16,
}

impl Constellation {
    /// Per-dimension alphabet in ascending order.
    pub fn alphabet(self) -> &'static [i32] {
        match self {
            Constellation::Qpsk => &[-1, 1],
            Constellation::Qam16 => &[-3, -1, 1, 3],
        }
    }

    /// Distance between neighbouring points.
    pub fn spacing(self) -> f64 {
        2.0
    }

    /// Largest per-dimension magnitude.
    pub fn max_amplitude(self) -> f64 {
        match self {
            Constellation::Qpsk => 1.0,
            Constellation::Qam16 => 3.0,
        }
    }

    /// Cardinality of the complex constellation.
    pub fn size(self) -> usize {
        self.alphabet().len().pow(2)
    }

    /// Modulo half-range `K = √|Ω|`.
    pub fn modulo_half_range(self) -> f64 {
        (self.size() as f64).sqrt()
    }

    /// Average energy of a complex symbol.
    pub fn symbol_energy(self) -> f64 {
        let a = self.alphabet();
        2.0 * a.iter().map(|&x| f64::from(x * x)).sum::<f64>() / a.len() as f64
    }

    pub fn bits_per_symbol(self) -> usize {
        2 * self.bits_per_dim()
    }

    pub fn bits_per_dim(self) -> usize {
        match self {
            Constellation::Qpsk => 1,
            Constellation::Qam16 => 2,
        }
    }

    /// Maps `bits_per_dim` bits (MSB first, each 0 or 1) to one real symbol.
    ///
    /// QPSK: `0 → -1`, `1 → +1`. 16-QAM: `00 → -3`, `01 → -1`, `11 → +1`,
    /// `10 → +3`.
    pub fn map_bits(self, bits: &[u8]) -> i32 {
        debug_assert_eq!(bits.len(), self.bits_per_dim());
        let label = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1));
        // Gray label to alphabet position.
        let position = match self {
            Constellation::Qpsk => label,
            Constellation::Qam16 => [0, 1, 3, 2][label],
        };
        self.alphabet()[position]
    }

    /// Writes the Gray label of `symbol` into `out`.
    pub fn demap_symbol(self, symbol: i32, out: &mut [u8]) {
        let position = self
            .alphabet()
            .iter()
            .position(|&a| a == symbol)
            .expect("symbol outside alphabet");
        let label = match self {
            Constellation::Qpsk => position,
            Constellation::Qam16 => [0, 1, 3, 2][position],
        };
        let n = out.len();
        for (k, bit) in out.iter_mut().enumerate() {
            *bit = ((label >> (n - 1 - k)) & 1) as u8;
        }
    }

    /// Nearest alphabet point; a value exactly between two points goes to the
    /// smaller one.
    pub fn slice(self, z: f64) -> i32 {
        let a = self.alphabet();
        let mut best = a[0];
        let mut best_dist = (z - f64::from(best)).abs();
        for &x in &a[1..] {
            let d = (z - f64::from(x)).abs();
            if d < best_dist {
                best = x;
                best_dist = d;
            }
        }
        best
    }
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constellation::Qpsk => "qpsk",
            Constellation::Qam16 => "qam16",
        })
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qpsk" | "4qam" | "qam4" => Ok(Constellation::Qpsk),
            "qam16" | "16qam" => Ok(Constellation::Qam16),
            other => Err(Error::Parameter(format!("unknown modulation '{other}'"))),
        }
    }
}
