use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::ModelParams;

/// Draws increments of the height walk by inverting the closed-form CDF.
/// The map from a uniform to an increment is non-increasing in the uniform
/// and non-decreasing in p, so walks sharing uniforms are coupled in p.
#[derive(Debug, Clone, Copy)]
pub struct WalkSampler {
    p: f64,
    zero_cut: f64,
    drop_mass: f64,
    m: f64,
    ln_m: f64,
}

impl WalkSampler {
    pub fn new(params: ModelParams) -> Self {
        let (a, p) = (params.alpha(), params.p());
        let m = params.m();
        Self {
            p,
            zero_cut: p + a * (1.0 - p),
            drop_mass: (1.0 - a) * (1.0 - p),
            m,
            ln_m: m.ln(),
        }
    }

    #[inline]
    fn tail(&self, n: u32) -> f64 {
        if n == 0 {
            return 1.0;
        }
        (self.m - 1.0) / (self.m.powi(n as i32 + 1) - 1.0)
    }

    /// Height of a descending tree whose survival function exceeds `w`
    /// exactly `h` times: the smallest h with P(H ≥ h+1) < w.
    #[inline]
    fn height_from_survival(&self, w: f64) -> u32 {
        let x = (1.0 + (self.m - 1.0) / w).ln() / self.ln_m;
        let mut h = (x.floor() - 1.0).max(0.0) as u32;
        while self.tail(h + 1) >= w {
            h += 1;
        }
        while h > 0 && self.tail(h) < w {
            h -= 1;
        }
        h
    }

    #[inline]
    pub fn increment_from_uniform(&self, u: f64) -> i64 {
        if u < self.p {
            1
        } else if u < self.zero_cut {
            0
        } else {
            let v = ((u - self.zero_cut) / self.drop_mass).min(1.0 - f64::EPSILON);
            -1 - self.height_from_survival(1.0 - v) as i64
        }
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        self.increment_from_uniform(rng.gen::<f64>())
    }
}

/// A height walk started at 0, with its hitting times of the negatives (T)
/// and of the non-positives after time 0 (T′).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HeightWalk {
    pub increments: Vec<i64>,
    pub heights: Vec<i64>,
    pub t: Option<u64>,
    pub t_prime: Option<u64>,
}

impl HeightWalk {
    pub fn from_increments(increments: Vec<i64>) -> Self {
        let mut heights = Vec::with_capacity(increments.len() + 1);
        heights.push(0);
        let mut h = 0;
        let mut t = None;
        let mut t_prime = None;
        for (i, &d) in increments.iter().enumerate() {
            debug_assert!(d <= 1);
            h += d;
            heights.push(h);
            let n = i as u64 + 1;
            if t_prime.is_none() && h <= 0 {
                t_prime = Some(n);
            }
            if t.is_none() && h < 0 {
                t = Some(n);
            }
        }
        Self {
            increments,
            heights,
            t,
            t_prime,
        }
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    pub fn max_height(&self) -> i64 {
        self.heights.iter().copied().max().unwrap_or(0)
    }
}

/// Direct walk without any map, stopped at T or after `max_steps` steps.
pub fn simulate_walk<R: Rng + ?Sized>(
    params: ModelParams,
    max_steps: u64,
    rng: &mut R,
) -> HeightWalk {
    assert!(max_steps >= 1, "max_steps must be at least 1");
    let s = WalkSampler::new(params);
    let mut inc = Vec::new();
    let mut h = 0i64;
    for _ in 0..max_steps {
        let d = s.step(rng);
        inc.push(d);
        h += d;
        if h < 0 {
            break;
        }
    }
    HeightWalk::from_increments(inc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{descending_height_tail, increment_pmf};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inverse_cdf_matches_pmf_on_a_grid() {
        let q = ModelParams::new(2.0 / 3.0, 0.4).unwrap();
        let s = WalkSampler::new(q);
        // Exact quantile check: the measure of uniforms mapped to each value.
        let n = 2_000_000;
        let mut counts = std::collections::HashMap::new();
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64;
            *counts.entry(s.increment_from_uniform(u)).or_insert(0u64) += 1;
        }
        for h in -8..=1i64 {
            let got = *counts.get(&h).unwrap_or(&0) as f64 / n as f64;
            let want = increment_pmf(q, h).unwrap();
            assert!((got - want).abs() < 2e-6, "h={h}: {got} vs {want}");
        }
        let _ = descending_height_tail(q, 1);
    }

    #[test]
    fn increments_are_monotone_in_p() {
        let lo = WalkSampler::new(ModelParams::new(0.7, 0.2).unwrap());
        let hi = WalkSampler::new(ModelParams::new(0.7, 0.5).unwrap());
        for i in 0..10_000 {
            let u = i as f64 / 10_000.0;
            assert!(hi.increment_from_uniform(u) >= lo.increment_from_uniform(u));
        }
    }

    #[test]
    fn all_open_walk_climbs() {
        let q = ModelParams::new(2.0 / 3.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = simulate_walk(q, 50, &mut rng);
        assert_eq!(w.t, None);
        assert_eq!(w.heights, (0..=50).collect::<Vec<i64>>());
    }

    #[test]
    fn hitting_times() {
        let w = HeightWalk::from_increments(vec![1, -1, 1, 0, -2]);
        assert_eq!(w.t_prime, Some(2));
        assert_eq!(w.t, Some(5));
    }
}
