//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::process::Command;
use std::time::Instant;

use bdvp::bd::block_diagonalize;
use bdvp::channel::{complex_to_real, generate_channel, SystemDims};
use bdvp::cli::csv::data_lines;
use bdvp::linalg::{CMatrix, RMatrix, RVector};
use bdvp::perturbation::{eval_count, tie_order, CandidateSet, Encoder, EncoderKind, Problem};
use bdvp::precoder::{mmse_alpha, modulo_scalar, search_factor, tau, Constellation, Criterion};
use bdvp::simulator::{noise_variance, run_point, BerRecord, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dims(n_t: usize, n_u: usize, n_r: usize) -> SystemDims {
    SystemDims::new(n_t, n_u, n_r).unwrap()
}

fn zero_iui() -> Outcome {
    let mut worst_leak = 0.0f64;
    let mut worst_orth = 0.0f64;
    for (n_t, n_u, n_r) in [(8, 2, 4), (8, 4, 2), (4, 2, 2)] {
        let d = dims(n_t, n_u, n_r);
        for seed in 0..200 {
            let h = generate_channel(d, 10_000 + seed);
            let bd = block_diagonalize(&h).map_err(|e| e.to_string())?;
            for i in 0..n_u {
                let h_i = h.entries().rows(i * n_r, n_r);
                for (j, b_j) in bd.beamformers.iter().enumerate() {
                    if i != j {
                        worst_leak = worst_leak.max((h_i * b_j).norm() / h_i.norm());
                    }
                }
                let b = &bd.beamformers[i];
                worst_orth = worst_orth.max((b.adjoint() * b - CMatrix::identity(n_r, n_r)).norm());
            }
        }
    }
    verdict(
        worst_leak <= 1e-9 && worst_orth <= 1e-10,
        format!("600 channels, max leak ratio {worst_leak:.2e} (<= 1e-9), max |B^H B - I| {worst_orth:.2e} (<= 1e-10)"),
    )
}

fn factor_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_zf = 0.0f64;
    let mut worst_mmse = 0.0f64;
    for seed in 0..100 {
        let h = complex_to_real(generate_channel(dims(4, 1, 4), 20_000 + seed).entries());
        let x = RVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let zf = search_factor(&h, Criterion::Zf, 0.0, 4.0).map_err(|e| e.to_string())?;
        let h_inv_x = h.clone().lu().solve(&x).ok_or("singular channel")?;
        let target = h_inv_x.norm();
        worst_zf = worst_zf.max(((&zf.lower * &x).norm() - target).abs() / target);

        let alpha = 10f64.powf(rng.random_range(-3.0..1.0));
        let mmse = search_factor(&h, Criterion::Mmse, alpha, 4.0).map_err(|e| e.to_string())?;
        let gram = &h * h.transpose() + RMatrix::identity(8, 8) * alpha;
        let target = alpha * x.dot(&gram.lu().solve(&x).ok_or("singular Gram matrix")?);
        worst_mmse = worst_mmse.max(((&mmse.lower * &x).norm_squared() - target).abs() / target);
    }
    verdict(
        worst_zf <= 1e-9 && worst_mmse <= 1e-8,
        format!(
            "100 factors, ZF worst rel err {worst_zf:.2e} (<= 1e-9), MMSE worst rel err {worst_mmse:.2e} (<= 1e-8)"
        ),
    )
}

struct Instance {
    lower: RMatrix,
    s: Vec<f64>,
    tau: f64,
}

/// Factor of a random 2x2 complex effective channel (N = 4), alternating ZF
/// and MMSE, with symbols from QPSK or 16-QAM.
fn channel_instance(rng: &mut ChaCha8Rng, k: u64) -> Instance {
    let h = generate_channel(dims(4, 2, 2), 30_000 + k);
    let bd = block_diagonalize(&h).unwrap();
    let h_eff = complex_to_real(&bd.effective_channels[(k % 2) as usize]);
    let c = if k % 4 < 2 {
        Constellation::Qpsk
    } else {
        Constellation::Qam16
    };
    let t = tau(c);
    let factor = if k.is_multiple_of(2) {
        search_factor(&h_eff, Criterion::Zf, 0.0, t).unwrap()
    } else {
        let snr = rng.random_range(0.0..25.0);
        let power = 2.0 * c.symbol_energy();
        let alpha = mmse_alpha(4, noise_variance(c, snr), power).unwrap();
        search_factor(&h_eff, Criterion::Mmse, alpha, t).unwrap()
    };
    let alphabet = c.alphabet();
    let s = (0..4)
        .map(|_| f64::from(alphabet[rng.random_range(0..alphabet.len())]))
        .collect();
    Instance {
        lower: factor.lower,
        s,
        tau: t,
    }
}

/// Enumerates the whole candidate set.
fn brute_force(inst: &Instance, a: u32) -> (Vec<i32>, f64) {
    let n = inst.s.len();
    let values: Vec<i32> = (-(a as i32)..=a as i32).collect();
    let total = values.len().pow(n as u32);
    let mut best: Option<(Vec<i32>, f64)> = None;
    for code in 0..total {
        let mut rest = code;
        let t: Vec<i32> = (0..n)
            .map(|_| {
                let v = values[rest % values.len()];
                rest /= values.len();
                v
            })
            .collect();
        let x: Vec<f64> = (0..n).map(|j| inst.s[j] + inst.tau * f64::from(t[j])).collect();
        let metric: f64 = (0..n)
            .map(|i| {
                let r: f64 = (0..=i).map(|j| inst.lower[(i, j)] * x[j]).sum();
                r * r
            })
            .sum();
        let better = match &best {
            None => true,
            Some((bt, bm)) => metric < *bm || (metric == *bm && tie_order(&t, bt).is_lt()),
        };
        if better {
            best = Some((t, metric));
        }
    }
    best.unwrap()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let candidates = CandidateSet::new(1);
    let mut t_ties = 0;
    for k in 0..500 {
        let inst = channel_instance(&mut rng, k);
        let problem = Problem::new(&inst.lower, &inst.s, inst.tau, candidates).map_err(|e| e.to_string())?;
        let exact = Encoder::Exhaustive.encode(&problem).map_err(|e| e.to_string())?;
        let fse = Encoder::Fse { depth: 4 }.encode(&problem).map_err(|e| e.to_string())?;
        let qrdm = Encoder::Qrdme { breadth: 27 }
            .encode(&problem)
            .map_err(|e| e.to_string())?;
        for (name, r) in [("FSE(p=N)", &fse), ("QRDM-E(M=T^(N-1))", &qrdm)] {
            if r.metric != exact.metric {
                return Err(format!(
                    "instance {k}: {name} metric {} != exhaustive {}",
                    r.metric, exact.metric
                ));
            }
            if r.t != exact.t {
                if problem.metric_of(&r.t) != problem.metric_of(&exact.t) {
                    return Err(format!(
                        "instance {k}: {name} t {:?} vs {:?} without a tie",
                        r.t, exact.t
                    ));
                }
                t_ties += 1;
            }
        }
    }
    Ok(format!(
        "500 instances (N=4, a=1): metrics identical, t identical except {t_ties} exact ties"
    ))
}

fn oracle_dominance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut fse_above_zero = 0;
    let mut worst_fse_excess = f64::NEG_INFINITY;
    for k in 0..500u64 {
        let a = 1 + (k % 2) as u32;
        let inst = channel_instance(&mut rng, 1000 + k);
        let candidates = CandidateSet::new(a);
        let problem = Problem::new(&inst.lower, &inst.s, inst.tau, candidates).map_err(|e| e.to_string())?;
        let (t_ref, m_ref) = brute_force(&inst, a);
        let exact = Encoder::Exhaustive.encode(&problem).map_err(|e| e.to_string())?;
        if exact.t != t_ref || (exact.metric - m_ref).abs() > 1e-9 * m_ref.max(1.0) {
            return Err(format!(
                "instance {k}: exhaustive {:?} disagrees with enumeration {t_ref:?}",
                exact.t
            ));
        }
        for e in [
            Encoder::Thp,
            Encoder::Fse { depth: 1 },
            Encoder::Qrdme {
                breadth: candidates.size(),
            },
        ] {
            let r = e.encode(&problem).map_err(|e| e.to_string())?;
            if r.metric < exact.metric {
                return Err(format!(
                    "instance {k}: {:?} metric {} below exhaustive {}",
                    e, r.metric, exact.metric
                ));
            }
        }
        let fse = Encoder::Fse { depth: 1 }.encode(&problem).map_err(|e| e.to_string())?;
        let zero = problem.metric_of(&[0; 4]);
        worst_fse_excess = worst_fse_excess.max((fse.metric - zero) / zero);
        if fse.metric > zero {
            fse_above_zero += 1;
        }
    }
    verdict(
        fse_above_zero == 0,
        format!(
            "500 instances (N=4, a in {{1,2}}): all encoders >= exhaustive; FSE(p=1) > |Ls|^2 on {fse_above_zero} \
             instances (worst relative excess {worst_fse_excess:.3e})"
        ),
    )
}

fn eval_counts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lower3 = RMatrix::from_fn(3, 3, |i, j| {
        if j < i {
            rng.random_range(-2.0..2.0)
        } else if i == j {
            1.0
        } else {
            0.0
        }
    });
    let p3 = Problem::new(&lower3, &[1.0, -1.0, 1.0], 4.0, CandidateSet::new(1)).map_err(|e| e.to_string())?;
    let qrdm = Encoder::Qrdme { breadth: 3 };
    let counted_qrdm = qrdm.encode(&p3).map_err(|e| e.to_string())?.evals;
    let formula_qrdm = eval_count(qrdm, 3, 3).map_err(|e| e.to_string())?.evals;

    let h = complex_to_real(generate_channel(dims(4, 1, 4), 40_000).entries());
    let lower8 = search_factor(&h, Criterion::Zf, 0.0, 4.0)
        .map_err(|e| e.to_string())?
        .lower;
    let s8 = [1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, -1.0];
    let p8 = Problem::new(&lower8, &s8, 4.0, CandidateSet::new(3)).map_err(|e| e.to_string())?;
    let counted_thp = Encoder::Thp.encode(&p8).map_err(|e| e.to_string())?.evals;
    let formula_thp = eval_count(Encoder::Thp, 8, 7).map_err(|e| e.to_string())?.evals;

    verdict(
        counted_qrdm == 21 && formula_qrdm == 21 && counted_thp == 56 && formula_thp == 56,
        format!(
            "QRDM-E(M=T=3, N=3) counted {counted_qrdm} / formula {formula_qrdm} (want 21); \
             THP(N=8, T=7) counted {counted_thp} / formula {formula_thp} (want 56)"
        ),
    )
}

fn modulo_round_trip() -> Outcome {
    let mut worst = 0.0f64;
    for c in [Constellation::Qpsk, Constellation::Qam16] {
        for &s in c.alphabet() {
            for t in -100..=100 {
                let y = f64::from(s) + tau(c) * f64::from(t);
                worst = worst.max((modulo_scalar(y, c.modulo_half_range()) - f64::from(s)).abs());
            }
        }
    }
    verdict(
        worst <= 1e-12,
        format!("qpsk and qam16, t in [-100, 100], worst error {worst:e}"),
    )
}

fn sim(d: SystemDims, encoder: EncoderKind, a: u32, min_uses: u64, min_errors: u64) -> SimConfig {
    SimConfig {
        dims: d,
        constellation: Constellation::Qpsk,
        criterion: Criterion::Mmse,
        encoder,
        a,
        m: 2 * a as usize + 1,
        p: 1,
        snr_db: Vec::new(),
        min_channel_uses: min_uses,
        min_bit_errors: min_errors,
        seed: 1,
    }
}

fn point(config: &SimConfig, snr: f64) -> Result<BerRecord, String> {
    let config = SimConfig {
        snr_db: vec![snr],
        ..config.clone()
    };
    run_point(&config, snr).map_err(|e| e.to_string())
}

fn combined_se(a: &BerRecord, b: &BerRecord) -> f64 {
    let var = |r: &BerRecord| r.ber * (1.0 - r.ber) / r.bits_sent as f64;
    (var(a) + var(b)).sqrt()
}

fn ber_ordering() -> Outcome {
    let d = dims(8, 4, 2);
    let run = |e| point(&sim(d, e, 3, 20_000, 0), 15.0);
    let qrdm = run(EncoderKind::Qrdme)?;
    let fse = run(EncoderKind::Fse)?;
    let thp = run(EncoderKind::Thp)?;
    let gap1 = (fse.ber - qrdm.ber) / combined_se(&fse, &qrdm);
    let gap2 = (thp.ber - fse.ber) / combined_se(&thp, &fse);
    verdict(
        gap1 >= 2.0 && gap2 >= 2.0,
        format!(
            "(8,4,2) 15 dB, {} uses: QRDM-E {:.3e} < FSE {:.3e} < THP {:.3e}; separations {gap1:.1} and {gap2:.1} SE (>= 2)",
            qrdm.channel_uses, qrdm.ber, fse.ber, thp.ber
        ),
    )
}

fn t_saturation() -> Outcome {
    let d = dims(8, 2, 4);
    let mut lines = Vec::new();
    let mut ok = true;
    for e in [EncoderKind::Fse, EncoderKind::Qrdme] {
        let mut ber = Vec::new();
        let mut desc = Vec::new();
        for a in 1..=3 {
            let r = point(&sim(d, e, a, 20_000, 100), 20.0)?;
            desc.push(format!(
                "T={}: {:.2e} ({} err/{} uses)",
                2 * a + 1,
                r.ber,
                r.bit_errors,
                r.channel_uses
            ));
            ber.push(r.ber);
        }
        let first = ber[0] - ber[1];
        let second = ber[1] - ber[2];
        ok &= first > second;
        lines.push(format!("{e}: {} -> gains {first:.2e} vs {second:.2e}", desc.join(", ")));
    }
    verdict(ok, format!("(8,2,4) 20 dB; {}", lines.join("; ")))
}

/// SNR at which BER crosses `target`, log-linear between 1 dB grid points.
fn crossing(points: &[(f64, f64, u64)], target: f64) -> Option<f64> {
    points.windows(2).find_map(|w| {
        let (s1, b1, n1) = w[0];
        let (s2, b2, n2) = w[1];
        let floor1 = 0.5 / n1 as f64;
        let floor2 = 0.5 / n2 as f64;
        let (l1, l2) = (b1.max(floor1).log10(), b2.max(floor2).log10());
        (b1 > target && b2 <= target).then(|| s1 + (l1 - target.log10()) / (l1 - l2) * (s2 - s1))
    })
}

/// Walks a 1 dB grid upward from a point above `target` until BER drops to
/// `stop`.
fn ber_curve(config: &SimConfig, start: f64, target: f64, stop: f64) -> Result<Vec<(f64, f64, u64)>, String> {
    let mut snr = start;
    let mut first = point(config, snr)?;
    while first.ber <= target {
        snr -= 1.0;
        first = point(config, snr)?;
    }
    let mut points = vec![(snr, first.ber, first.bits_sent)];
    while points.last().unwrap().1 > stop {
        snr += 1.0;
        if snr > 40.0 {
            return Err(format!("{} BER did not reach {stop:e} by 40 dB", config.encoder));
        }
        let r = point(config, snr)?;
        points.push((snr, r.ber, r.bits_sent));
    }
    Ok(points)
}

fn db_gaps() -> Outcome {
    let d = dims(8, 2, 4);
    let mut at3 = Vec::new();
    let mut at4 = Vec::new();
    for e in [EncoderKind::Thp, EncoderKind::Fse, EncoderKind::Qrdme] {
        let curve = ber_curve(&sim(d, e, 3, 100_000, 0), 5.0, 1e-3, 1e-4)?;
        at3.push(crossing(&curve, 1e-3).ok_or("no 1e-3 crossing")?);
        at4.push(crossing(&curve, 1e-4).ok_or("no 1e-4 crossing")?);
    }
    let qrdm_vs_fse = at3[1] - at3[2];
    let fse_vs_thp = at3[0] - at3[1];
    verdict(
        (1.0..=3.0).contains(&qrdm_vs_fse) && fse_vs_thp >= 3.0,
        format!(
            "(8,2,4) at 1e-3: THP {:.2} dB, FSE {:.2} dB, QRDM-E {:.2} dB; gap QRDM-E vs FSE {qrdm_vs_fse:.2} dB \
             (want [1, 3]), gap FSE vs THP {fse_vs_thp:.2} dB (want >= 3); for reference at 1e-4 the gaps are \
             {:.2} and {:.2} dB",
            at3[0],
            at3[1],
            at3[2],
            at4[1] - at4[2],
            at4[0] - at4[1]
        ),
    )
}

fn thp_floor() -> Outcome {
    let d = dims(8, 2, 4);
    let thp = point(&sim(d, EncoderKind::Thp, 3, 100_000, 0), 25.0)?;
    let fse = point(&sim(d, EncoderKind::Fse, 3, 100_000, 0), 25.0)?;
    verdict(
        thp.ber >= 5.0 * fse.ber,
        format!(
            "(8,2,4) 25 dB, {} uses: THP {:.2e} ({} err), FSE {:.2e} ({} err)",
            thp.channel_uses, thp.ber, thp.bit_errors, fse.ber, fse.bit_errors
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("run.cfg");
    fs::write(
        &config,
        "n_t=8\nn_u=2\nn_r=4\nmodulation=qpsk\ncriterion=mmse\nencoder=thp,fse,qrdme\na=3\n\
         snr_list=10,15\nmin_channel_uses=20000\nmin_bit_errors=0\nseed=99\n",
    )
    .map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (k, threads) in ["0", "1"].into_iter().enumerate() {
        let out = dir.path().join(format!("run{k}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_bdvp"))
            .args([
                "simulate",
                "--config",
                config.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ])
            .args(["--threads", threads])
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        outputs.push(fs::read_to_string(out).map_err(|e| e.to_string())?);
    }
    let a: Vec<&str> = data_lines(&outputs[0]).collect();
    let b: Vec<&str> = data_lines(&outputs[1]).collect();
    verdict(
        a == b && a.len() == 6,
        format!("two CLI runs, {} data rows, byte-identical: {}", a.len(), a == b),
    )
}

fn main() {
    let criteria: [Check; 11] = [
        ("zero inter-user interference", zero_iui),
        ("search factor identities", factor_identities),
        ("oracle equivalence", oracle_equivalence),
        ("oracle dominance and FSE bound", oracle_dominance),
        ("eval counts", eval_counts),
        ("modulo round trip", modulo_round_trip),
        ("BER ordering", ber_ordering),
        ("T saturation", t_saturation),
        ("dB gaps at 1e-3", db_gaps),
        ("THP error floor", thp_floor),
        ("determinism", determinism),
    ];
    // Optional numeric arguments select a subset of criteria.
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut run = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        if !selected.is_empty() && !selected.contains(&(k + 1)) {
            continue;
        }
        run += 1;
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        let (status, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {:>2} {status} {name} [{secs:.1}s]: {detail}", k + 1);
    }
    println!("acceptance: {} of {run} criteria passed", run - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
