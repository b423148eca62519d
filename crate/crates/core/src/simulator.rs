//! Monte Carlo bit-error-rate engine.
//!
//! One channel use draws a fresh Rayleigh channel, random bits for every
//! user, and complex noise, all from the random stream addressed by
//! `(seed, use index)`. The stream does not depend on the SNR point or the
//! encoder, so every point and every encoder sees the same channels, bits
//! and normalized noise samples (common random numbers).
//!
//! Per user the transmitter perturbs the real symbol vector, precodes it,
//! scales it to the power budget `P_i = n_R · E_s` and beamforms it. The
//! receiver multiplies by the same `√γ_i` (genie normalization), applies the
//! modulo and slices. SNR is `E_s / σ²` per receive antenna.

use rand::Rng;
use rayon::prelude::*;

use crate::bd::block_diagonalize;
use crate::channel::{
    complex_normal, complex_to_real, complex_vec_to_real, real_vec_to_complex, sample_channel, SystemDims,
};
use crate::linalg::{CMatrix, CVector, RMatrix, RVector};
use crate::perturbation::{CandidateSet, Encoder, EncoderKind, Problem};
use crate::precoder::{mmse_alpha, modulo, search_factor, tau, Constellation, Criterion};
use crate::{rng, Error, Result};

/// Channel uses simulated between two checks of the stopping rule.
pub const BATCH: u64 = 2048;

/// Hard cap on channel uses, as a multiple of `min_channel_uses`.
pub const CAP_FACTOR: u64 = 100;

/// One BER experiment: a single encoder swept over a list of SNR points.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dims: SystemDims,
    pub constellation: Constellation,
    pub criterion: Criterion,
    pub encoder: EncoderKind,
    /// Candidate bound `a`, `T = 2a + 1`.
    pub a: u32,
    /// QRDM-E breadth.
    pub m: usize,
    /// FSE full-expansion depth.
    pub p: usize,
    pub snr_db: Vec<f64>,
    pub min_channel_uses: u64,
    pub min_bit_errors: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_channel_uses == 0 {
            return Err(Error::Parameter("min_channel_uses must be at least 1".into()));
        }
        if self.snr_db.is_empty() {
            return Err(Error::Parameter("snr_list must not be empty".into()));
        }
        if let Some(bad) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return Err(Error::Parameter(format!("SNR {bad} is not finite")));
        }
        if self.m == 0 {
            return Err(Error::Parameter("m must be at least 1".into()));
        }
        let n = self.dims.search_dim();
        if self.p == 0 || self.p > n {
            return Err(Error::Parameter(format!("p must be in 1..={n}, got {}", self.p)));
        }
        self.encoder_instance()
            .and_then(|e| crate::perturbation::eval_count(e, n, self.candidates().size()))?;
        if self.encoder == EncoderKind::Exhaustive {
            let size = (self.candidates().size() as u128)
                .checked_pow(n as u32)
                .unwrap_or(u128::MAX);
            if size > crate::perturbation::EXHAUSTIVE_LIMIT {
                return Err(Error::SearchSpaceTooLarge {
                    size,
                    limit: crate::perturbation::EXHAUSTIVE_LIMIT,
                });
            }
        }
        Ok(())
    }

    pub fn candidates(&self) -> CandidateSet {
        CandidateSet::new(self.a)
    }

    pub fn encoder_instance(&self) -> Result<Encoder> {
        Ok(match self.encoder {
            EncoderKind::Thp => Encoder::Thp,
            EncoderKind::Fse => Encoder::Fse { depth: self.p },
            EncoderKind::Qrdme => Encoder::Qrdme { breadth: self.m },
            EncoderKind::Exhaustive => Encoder::Exhaustive,
        })
    }

    /// Per-user power budget `n_R · E_s`.
    pub fn user_power(&self) -> f64 {
        self.dims.receive_antennas() as f64 * self.constellation.symbol_energy()
    }

    pub fn bits_per_use(&self) -> u64 {
        (self.dims.users() * self.dims.receive_antennas() * self.constellation.bits_per_symbol()) as u64
    }
}

/// Noise variance per complex receive sample at `snr_db`.
pub fn noise_variance(constellation: Constellation, snr_db: f64) -> f64 {
    constellation.symbol_energy() * 10f64.powf(-snr_db / 10.0)
}

/// BER statistics of one `(SNR, encoder)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub snr_db: f64,
    pub encoder: EncoderKind,
    pub channel_uses: u64,
    pub bit_errors: u64,
    pub bits_sent: u64,
    pub ber: f64,
    /// Mean normalization factor `γ_i = ‖G s̃‖² / P_i` over users and uses.
    pub mean_gamma: f64,
    /// Mean search metric over users and uses.
    pub mean_metric: f64,
    /// Mean metric evaluations per user search.
    pub mean_evals: f64,
    /// Channel draws skipped because block diagonalization failed.
    pub degenerate_draws: u64,
}

/// Precodes, normalizes and beamforms one user's perturbed vector.
///
/// Returns `x_i = B_i · u / √γ_i` with `u = G s̃` and `γ_i = ‖u‖² / P_i`.
pub fn transmit_user(
    perturbed: &RVector,
    precoder: &RMatrix,
    beamformer: &CMatrix,
    power: f64,
) -> Result<(CVector, f64)> {
    if precoder.ncols() != perturbed.len() || 2 * beamformer.ncols() != precoder.nrows() {
        return Err(Error::Dimension(format!(
            "G is {:?}, s̃ has {} entries, B_i is {:?}",
            precoder.shape(),
            perturbed.len(),
            beamformer.shape()
        )));
    }
    if !(power > 0.0) {
        return Err(Error::Parameter(format!("power budget must be positive, got {power}")));
    }
    let u = precoder * perturbed;
    let gamma = u.norm_squared() / power;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::DegenerateInput(format!("normalization factor is {gamma}")));
    }
    let u_c = real_vec_to_complex(&u)?;
    Ok((beamformer * u_c.unscale(gamma.sqrt()), gamma))
}

/// Undoes the normalization, embeds to real and applies the modulo.
pub fn receive_user(y: &CVector, gamma: f64, k: f64) -> RVector {
    modulo(&complex_vec_to_real(&y.scale(gamma.sqrt())), k)
}

/// Hard decisions per real dimension followed by inverse Gray mapping.
pub fn demodulate(z: &RVector, constellation: Constellation) -> Vec<u8> {
    let bpd = constellation.bits_per_dim();
    let mut bits = vec![0u8; z.len() * bpd];
    for (k, &v) in z.iter().enumerate() {
        constellation.demap_symbol(constellation.slice(v), &mut bits[k * bpd..(k + 1) * bpd]);
    }
    bits
}

/// Per-dimension Gray mapping of a user's bits to its real symbol vector.
pub fn modulate(bits: &[u8], constellation: Constellation) -> RVector {
    let bpd = constellation.bits_per_dim();
    RVector::from_iterator(
        bits.len() / bpd,
        bits.chunks(bpd).map(|c| f64::from(constellation.map_bits(c))),
    )
}

/// Outcome of one channel use.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UseOutcome {
    pub bit_errors: u64,
    pub gamma_sum: f64,
    pub metric_sum: f64,
    pub evals: u64,
    pub degenerate: bool,
}

/// Everything needed to simulate channel uses at one SNR point.
#[derive(Debug, Clone)]
pub struct Link {
    pub dims: SystemDims,
    pub constellation: Constellation,
    pub criterion: Criterion,
    pub encoder: Encoder,
    pub candidates: CandidateSet,
    pub noise_variance: f64,
}

impl Link {
    pub fn new(config: &SimConfig, snr_db: f64) -> Result<Self> {
        Ok(Self {
            dims: config.dims,
            constellation: config.constellation,
            criterion: config.criterion,
            encoder: config.encoder_instance()?,
            candidates: config.candidates(),
            noise_variance: noise_variance(config.constellation, snr_db),
        })
    }

    fn user_power(&self) -> f64 {
        self.dims.receive_antennas() as f64 * self.constellation.symbol_energy()
    }

    /// Simulates channel use `index` of the stream keyed by `seed`.
    pub fn channel_use(&self, seed: u64, index: u64) -> Result<UseOutcome> {
        let mut rng = rng::stream(seed, index);
        self.channel_use_with(&mut rng)
    }

    /// Simulates one channel use with draws taken from `rng` in the order:
    /// channel, bits (user by user), noise.
    pub fn channel_use_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<UseOutcome> {
        let n_u = self.dims.users();
        let n_r = self.dims.receive_antennas();
        let n = self.dims.search_dim();
        let h = sample_channel(self.dims, rng);
        let bits_per_user = n * self.constellation.bits_per_dim();
        let bits: Vec<u8> = (0..n_u * bits_per_user)
            .map(|_| u8::from(rng.random::<bool>()))
            .collect();
        let noise: Vec<_> = (0..n_u * n_r).map(|_| complex_normal(rng)).collect();

        let bd = match block_diagonalize(&h) {
            Ok(bd) => bd,
            Err(Error::DegenerateChannel(_)) => {
                return Ok(UseOutcome {
                    degenerate: true,
                    ..UseOutcome::default()
                })
            }
            Err(e) => return Err(e),
        };

        let power = self.user_power();
        let tau = tau(self.constellation);
        let alpha = match self.criterion {
            Criterion::Zf => 0.0,
            Criterion::Mmse => mmse_alpha(n, self.noise_variance, power)?,
        };
        let mut out = UseOutcome::default();
        let mut x = CVector::zeros(self.dims.transmit_antennas());
        let mut gammas = Vec::with_capacity(n_u);
        for (i, (b_i, h_eff)) in bd.beamformers.iter().zip(&bd.effective_channels).enumerate() {
            let symbols = modulate(&bits[i * bits_per_user..(i + 1) * bits_per_user], self.constellation);
            let factor = search_factor(&complex_to_real(h_eff), self.criterion, alpha, tau)?;
            let problem = Problem::new(&factor.lower, symbols.as_slice(), tau, self.candidates)?;
            let result = self.encoder.encode(&problem)?;
            let perturbed = RVector::from_vec(result.perturbed);
            let (x_i, gamma) = transmit_user(&perturbed, &factor.precoder, b_i, power)?;
            x += x_i;
            gammas.push(gamma);
            out.gamma_sum += gamma;
            out.metric_sum += result.metric;
            out.evals += result.evals;
        }

        let sigma = self.noise_variance.sqrt();
        let y = h.entries() * x + CVector::from_iterator(n_u * n_r, noise.iter().map(|z| z * sigma));
        let k = self.constellation.modulo_half_range();
        for (i, gamma) in gammas.into_iter().enumerate() {
            let y_i = y.rows(i * n_r, n_r).into_owned();
            let detected = demodulate(&receive_user(&y_i, gamma, k), self.constellation);
            let sent = &bits[i * bits_per_user..(i + 1) * bits_per_user];
            out.bit_errors += detected.iter().zip(sent).filter(|(a, b)| a != b).count() as u64;
        }
        Ok(out)
    }
}

/// Running totals for one SNR point.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    draws: u64,
    uses: u64,
    bit_errors: u64,
    gamma_sum: f64,
    metric_sum: f64,
    evals: u64,
    degenerate: u64,
}

impl Tally {
    fn add(&mut self, o: &UseOutcome) {
        self.draws += 1;
        if o.degenerate {
            self.degenerate += 1;
            return;
        }
        self.uses += 1;
        self.bit_errors += o.bit_errors;
        self.gamma_sum += o.gamma_sum;
        self.metric_sum += o.metric_sum;
        self.evals += o.evals;
    }
}

/// Runs one SNR point until the stopping rule is met.
///
/// Uses are simulated in fixed batches and reduced in index order, so the
/// totals do not depend on the number of worker threads.
pub fn run_point(config: &SimConfig, snr_db: f64) -> Result<BerRecord> {
    config.validate()?;
    let link = Link::new(config, snr_db)?;
    let min_uses = config.min_channel_uses;
    let cap = min_uses.saturating_mul(CAP_FACTOR);
    let mut tally = Tally::default();
    loop {
        let done = tally.uses >= min_uses && (tally.bit_errors >= config.min_bit_errors || tally.uses >= cap);
        if done {
            break;
        }
        let target = if tally.uses < min_uses { min_uses } else { cap };
        let batch = BATCH.min(target - tally.uses);
        let start = tally.draws;
        let outcomes: Vec<UseOutcome> = (start..start + batch)
            .into_par_iter()
            .map(|idx| link.channel_use(config.seed, idx))
            .collect::<Result<_>>()?;
        for o in &outcomes {
            tally.add(o);
        }
    }
    if tally.degenerate > 0 && tally.degenerate * 1000 >= tally.draws {
        return Err(Error::DegenerateChannel(format!(
            "{} of {} channel draws were degenerate",
            tally.degenerate, tally.draws
        )));
    }
    let bits_sent = tally.uses * config.bits_per_use();
    let searches = (tally.uses * config.dims.users() as u64) as f64;
    Ok(BerRecord {
        snr_db,
        encoder: config.encoder,
        channel_uses: tally.uses,
        bit_errors: tally.bit_errors,
        bits_sent,
        ber: tally.bit_errors as f64 / bits_sent as f64,
        mean_gamma: tally.gamma_sum / searches,
        mean_metric: tally.metric_sum / searches,
        mean_evals: tally.evals as f64 / searches,
        degenerate_draws: tally.degenerate,
    })
}

/// Runs every SNR point of `config`, in order.
pub fn run_ber(config: &SimConfig) -> Result<Vec<BerRecord>> {
    config.validate()?;
    config.snr_db.iter().map(|&snr| run_point(config, snr)).collect()
}
