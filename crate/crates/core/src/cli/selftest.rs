//! Quick invariant suite behind `bdvp selftest`.

use rand::Rng;

use crate::bd::{block_diagonalize, verify_block_diagonal};
use crate::channel::{complex_to_real, generate_channel, SystemDims};
use crate::linalg::{RMatrix, RVector};
use crate::perturbation::{eval_count, CandidateSet, Encoder, Problem};
use crate::precoder::{modulo, search_factor, tau, zf_matrix, Constellation, Criterion};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<String, String>) -> Check {
    match outcome {
        Ok(detail) => Check {
            name,
            passed: true,
            detail,
        },
        Err(detail) => Check {
            name,
            passed: false,
            detail,
        },
    }
}

fn bd_zero_iui() -> Result<String, String> {
    let mut worst = 0.0f64;
    for (n_t, n_u, n_r) in [(8, 2, 4), (8, 4, 2), (4, 2, 2)] {
        let dims = SystemDims::new(n_t, n_u, n_r).map_err(|e| e.to_string())?;
        for seed in 0..20 {
            let h = generate_channel(dims, seed);
            let bd = block_diagonalize(&h).map_err(|e| e.to_string())?;
            let c = verify_block_diagonal(&h, &bd.composite, 1e-9).map_err(|e| e.to_string())?;
            if !c.holds {
                return Err(format!("({n_t},{n_u},{n_r}) seed {seed}: ratio {:e}", c.worst_ratio));
            }
            worst = worst.max(c.worst_ratio);
        }
    }
    Ok(format!("60 channels, worst ratio {worst:.1e}"))
}

fn random_channel(seed: u64, n_r: usize) -> RMatrix {
    let dims = SystemDims::new(n_r, 1, n_r).expect("square single-user dims");
    complex_to_real(generate_channel(dims, seed).entries())
}

fn factor_identities() -> Result<String, String> {
    let mut rng = rng::stream(11, 0);
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let h = random_channel(seed, 2);
        let x = RVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let zf = search_factor(&h, Criterion::Zf, 0.0, 4.0).map_err(|e| e.to_string())?;
        let target = (zf_matrix(&h).map_err(|e| e.to_string())? * &x).norm();
        worst = worst.max(((&zf.lower * &x).norm() - target).abs() / target);

        let alpha = 0.3;
        let mmse = search_factor(&h, Criterion::Mmse, alpha, 4.0).map_err(|e| e.to_string())?;
        let gram = &h * h.transpose() + RMatrix::identity(4, 4) * alpha;
        let solved = gram.lu().solve(&x).ok_or("singular regularized Gram matrix")?;
        let target = alpha * x.dot(&solved);
        worst = worst.max(((&mmse.lower * &x).norm_squared() - target).abs() / target);
    }
    if worst <= 1e-9 {
        Ok(format!("20 channels, worst relative error {worst:.1e}"))
    } else {
        Err(format!("worst relative error {worst:e}"))
    }
}

fn oracle_dominance() -> Result<String, String> {
    let mut rng = rng::stream(12, 0);
    let candidates = CandidateSet::new(1);
    let encoders = [Encoder::Thp, Encoder::Fse { depth: 1 }, Encoder::Qrdme { breadth: 3 }];
    for seed in 0..100 {
        let h = random_channel(1000 + seed, 2);
        let f = search_factor(&h, Criterion::Mmse, 0.1, 4.0).map_err(|e| e.to_string())?;
        let s: Vec<f64> = (0..4).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let problem = Problem::new(&f.lower, &s, 4.0, candidates).map_err(|e| e.to_string())?;
        let best = Encoder::Exhaustive.encode(&problem).map_err(|e| e.to_string())?.metric;
        for e in encoders {
            let m = e.encode(&problem).map_err(|e| e.to_string())?.metric;
            if m < best {
                return Err(format!(
                    "instance {seed}: {} metric {m} below exhaustive {best}",
                    e.kind()
                ));
            }
        }
    }
    Ok("100 instances, N=4, a=1".into())
}

fn modulo_round_trip() -> Result<String, String> {
    for c in [Constellation::Qpsk, Constellation::Qam16] {
        let k = c.modulo_half_range();
        let tau = tau(c);
        for &s in c.alphabet() {
            for t in -100..=100 {
                let y = RVector::from_element(1, f64::from(s) + tau * f64::from(t));
                let r = modulo(&y, k)[0];
                if (r - f64::from(s)).abs() > 1e-12 {
                    return Err(format!("{c}: s={s}, t={t} gives {r}"));
                }
            }
        }
    }
    Ok("qpsk and qam16, t in [-100, 100]".into())
}

fn eval_counts() -> Result<String, String> {
    let fixed = [(Encoder::Qrdme { breadth: 3 }, 3, 3, 21), (Encoder::Thp, 8, 7, 56)];
    for (e, n, size, want) in fixed {
        let got = eval_count(e, n, size).map_err(|e| e.to_string())?.evals;
        if got != want {
            return Err(format!("{} N={n} T={size}: {got}, expected {want}", e.kind()));
        }
    }
    let h = random_channel(5, 2);
    let f = search_factor(&h, Criterion::Zf, 0.0, 4.0).map_err(|e| e.to_string())?;
    let s = [1.0, -1.0, -1.0, 1.0];
    for a in 1..=2 {
        let candidates = CandidateSet::new(a);
        let problem = Problem::new(&f.lower, &s, 4.0, candidates).map_err(|e| e.to_string())?;
        for e in [
            Encoder::Thp,
            Encoder::Fse { depth: 1 },
            Encoder::Fse { depth: 2 },
            Encoder::Qrdme { breadth: 4 },
            Encoder::Exhaustive,
        ] {
            let counted = e.encode(&problem).map_err(|e| e.to_string())?.evals;
            let predicted = eval_count(e, 4, candidates.size()).map_err(|e| e.to_string())?.evals;
            if counted != predicted {
                return Err(format!("{e:?} a={a}: counted {counted}, predicted {predicted}"));
            }
        }
    }
    Ok("closed form matches instrumented counters".into())
}

fn worked_example() -> Result<String, String> {
    let l = RMatrix::from_row_slice(2, 2, &[1.0, 0.0, 10.0, 1.0]);
    let problem = Problem::new(&l, &[1.0, 1.0], 4.0, CandidateSet::new(1)).map_err(|e| e.to_string())?;
    let r = Encoder::Exhaustive.encode(&problem).map_err(|e| e.to_string())?;
    if r.t == [0, -1] && r.metric == 50.0 && r.evals == 12 {
        Ok("t=[0,-1] metric=50 evals=12".into())
    } else {
        Err(format!("got t={:?} metric={} evals={}", r.t, r.metric, r.evals))
    }
}

/// Runs every check.
pub fn run_all() -> Vec<Check> {
    vec![
        check("bd zero inter-user interference", bd_zero_iui()),
        check("search factor identities", factor_identities()),
        check("oracle dominance", oracle_dominance()),
        check("modulo round trip", modulo_round_trip()),
        check("eval counts", eval_counts()),
        check("two-level worked example", worked_example()),
    ]
}
