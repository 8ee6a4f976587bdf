//! Independent reference computations checked against the library.

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use sctperc::estimators::{coupled_run, hitting_time_sample, sample_stream, RunConfig};
use sctperc::gw::{sample_gw, Offspring};
use sctperc::model::{
    compute_eta, compute_pc, descending_height_tail, increment_pmf, wide_probability,
};
use sctperc::peeling::Budgets;
use sctperc::ModelParams;

fn params(alpha: f64, p: f64) -> ModelParams {
    ModelParams::new(alpha, p).unwrap()
}

#[test]
fn eta_at_three_quarters_matches_exact_rationals() {
    // m = 3: η = (1/2) Σ_{k≥1} 1/(3^k − 1); the tail past k = 80 is below 3^{-79}.
    let mut s = BigRational::zero();
    for k in 1..=80u32 {
        s += BigRational::new(
            BigInt::one(),
            num::pow(BigInt::from(3), k as usize) - BigInt::one(),
        );
    }
    let eta = (s / BigRational::from_integer(BigInt::from(2)))
        .to_f64()
        .unwrap();
    let q = params(0.75, 0.5);
    assert!((compute_eta(q, 1e-15) - eta).abs() < 1e-13);
    assert!((compute_pc(q, 1e-15) - eta / (1.0 + eta)).abs() < 1e-13);
    assert!((eta - 0.341_076_751_3).abs() < 1e-10);
}

#[test]
fn descending_tail_matches_generating_function_iteration() {
    // q_n = P(height < n) obeys q_{n+1} = f(q_n) with f(s) = α / (1 − (1−α)s),
    // the pgf of the geometric law with ratio 1 − α.
    for alpha in [0.55, 2.0 / 3.0, 0.75, 0.9] {
        let q = params(alpha, 0.5);
        let mut below = 0.0;
        for n in 0..=40u32 {
            assert!(
                (descending_height_tail(q, n) - (1.0 - below)).abs() < 1e-13,
                "α={alpha} n={n}"
            );
            below = alpha / (1.0 - (1.0 - alpha) * below);
        }
    }
}

#[test]
fn wide_probability_is_survival_of_the_pruned_process() {
    // Pruned offspring pgf g(s) = (1−α) + α(1−α)/(1 − αs); survival is
    // 1 − (smallest fixed point of g).
    for alpha in [0.6, 0.62, 2.0 / 3.0, 0.75, 0.9] {
        let g = |s: f64| (1.0 - alpha) + alpha * (1.0 - alpha) / (1.0 - alpha * s);
        let mut s = 0.0;
        for _ in 0..200_000 {
            s = g(s);
        }
        let want = 1.0 - s;
        let got = wide_probability(params(alpha, 0.5), 1e-14);
        assert!((got - want).abs() < 1e-6, "α={alpha}: {got} vs {want}");
    }
}

#[test]
fn increment_pmf_has_unit_mass_and_the_drift_as_mean() {
    let q = params(2.0 / 3.0, 0.3);
    assert!((increment_pmf(q, 1).unwrap() - 0.3).abs() < 1e-15);
    let mut total = 0.3;
    for h in (-40..=0).rev() {
        total += increment_pmf(q, h).unwrap();
    }
    assert!((total - 1.0).abs() < 1e-10);
    let mean: f64 = (-200..=1)
        .map(|h| h as f64 * increment_pmf(q, h).unwrap())
        .sum();
    let eta = compute_eta(q, 1e-15);
    assert!((mean - (0.3 - 0.7 * eta)).abs() < 1e-12);
}

#[test]
fn gw_offspring_passes_chi_square() {
    let q = params(2.0 / 3.0, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 40_000;
    let mut counts = [0u64; 13];
    for _ in 0..n {
        let t = sample_gw(q, Offspring::Alpha, 1, &mut rng, 1 << 20).unwrap();
        let k = t.tree.children(t.tree.root()).len().min(12);
        counts[k] += 1;
    }
    let a: f64 = 2.0 / 3.0;
    let mut probs: Vec<f64> = (0..12).map(|k| a.powi(k) * (1.0 - a)).collect();
    probs.push(a.powi(12));
    let stat: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&c, &p)| {
            let e = p * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let pv = 1.0 - ChiSquared::new(12.0).unwrap().cdf(stat);
    assert!(pv > 1e-3, "χ²={stat} p={pv}");
}

#[test]
fn descending_tree_heights_follow_the_closed_form() {
    let q = params(2.0 / 3.0, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let n = 50_000;
    let mut heights = Vec::with_capacity(n);
    for _ in 0..n {
        let t = sample_gw(q, Offspring::OneMinusAlpha, 64, &mut rng, 1 << 20).unwrap();
        heights.push(sctperc::gw::tree_height(&t.tree));
    }
    for k in 1..=5u32 {
        let p = descending_height_tail(q, k);
        let hat = heights.iter().filter(|&&h| h >= k).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hat - p).abs() < 4.0 * se, "k={k}: {hat} vs {p}");
    }
}

/// P(T ≥ n) from direct walks against P(T ≥ n) read off coupled
/// explorations. The two channels share no code beyond the parameters.
#[test]
fn direct_and_coupled_walks_agree_on_hitting_times() {
    let q = params(2.0 / 3.0, 0.3);
    let n = 20_000u64;
    let direct = hitting_time_sample(q, 1000, &RunConfig::new(5, n)).unwrap();
    let coupled: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = sample_stream(6, i);
            let (trace, stop, _) = coupled_run(q, &mut rng, Budgets::default());
            assert!(stop.is_none());
            trace.walk().t.expect("finished exploration has a T") as f64
        })
        .collect();
    for k in [2.0, 5.0, 20.0] {
        let a = direct.iter().filter(|&&t| t >= k).count() as f64 / n as f64;
        let b = coupled.iter().filter(|&&t| t >= k).count() as f64 / n as f64;
        let pooled = (a + b) / 2.0;
        let se = (2.0 * pooled * (1.0 - pooled) / n as f64).sqrt();
        assert!((a - b).abs() < 4.0 * se, "P(T≥{k}): direct {a} coupled {b}");
    }
}
