//! Event-level simulation of the multiplexed source, used to check the
//! analytic photon statistics independently.
//!
//! Each trial draws a thermal pair number per unit, thins the idler photons
//! photon-by-photon with the detector efficiency, routes the first unit that
//! saw exactly one idler click and thins its signal photons with the arm
//! transmission. Trials are split into fixed-size blocks; block `b` draws
//! from ChaCha8 seeded with the master seed on stream `b`, so the merged
//! histogram does not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::statistics::{ArmVector, PhotonStatistics, LAMBDA_MAX};

/// Trials per RNG stream.
pub const BLOCK_TRIALS: u64 = 1 << 16;

pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), one stream per 65536-trial block";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub arms: ArmVector<f64>,
    pub lambda: f64,
    pub v_d: f64,
    pub trials: u64,
    pub seed: u64,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= LAMBDA_MAX) {
            return Err(Error::InvalidLambda(self.lambda));
        }
        if !(self.v_d > 0.0 && self.v_d <= 1.0) {
            return Err(Error::InvalidProbability {
                name: "v_d",
                value: self.v_d,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// `counts[i]`: trials with `i` output photons.
    pub counts: Vec<u64>,
    pub p_hat: Vec<f64>,
    pub stderr: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub rng: String,
}

impl SimResult {
    fn from_counts(counts: Vec<u64>, trials: u64, seed: u64) -> Self {
        let n = trials as f64;
        let p_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
        let stderr = p_hat.iter().map(|&p| (p * (1.0 - p) / n).sqrt()).collect();
        Self {
            counts,
            p_hat,
            stderr,
            trials,
            seed,
            rng: RNG_ALGORITHM.to_string(),
        }
    }

    pub fn p(&self, i: usize) -> f64 {
        self.p_hat.get(i).copied().unwrap_or(0.0)
    }

    pub fn se(&self, i: usize) -> f64 {
        self.stderr.get(i).copied().unwrap_or(0.0)
    }
}

/// Thermal pair number by inversion of `P(l) = (1-q) q^l`, `q = λ/(1+λ)`.
pub fn sample_thermal<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> u64 {
    let q = lambda / (1.0 + lambda);
    let u: f64 = rng.random();
    ((1.0 - u).ln() / q.ln()).floor() as u64
}

/// Number of successes among `n` independent trials of probability `p`, one draw each.
pub fn thin<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    (0..n).filter(|_| rng.random::<f64>() < p).count() as u64
}

/// Output photon number of one pulse.
pub fn simulate_pulse<R: Rng + ?Sized>(rng: &mut R, arms: &[f64], lambda: f64, v_d: f64) -> u64 {
    for &v in arms {
        let l = sample_thermal(rng, lambda);
        if thin(rng, l, v_d) == 1 {
            return thin(rng, l, v);
        }
    }
    0
}

pub fn block_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    rng
}

pub fn simulate(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let n_blocks = config.trials.div_ceil(BLOCK_TRIALS);
    let arms = config.arms.as_slice();
    let counts = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = block_rng(config.seed, block);
            let start = block * BLOCK_TRIALS;
            let len = BLOCK_TRIALS.min(config.trials - start);
            let mut hist = vec![0u64; 8];
            for _ in 0..len {
                let i = simulate_pulse(&mut rng, arms, config.lambda, config.v_d) as usize;
                if i >= hist.len() {
                    hist.resize(i + 1, 0);
                }
                hist[i] += 1;
            }
            hist
        })
        .reduce(Vec::new, merge_hist);
    let mut counts = counts;
    while counts.len() > 1 && counts.last() == Some(&0) {
        counts.pop();
    }
    Ok(SimResult::from_counts(counts, config.trials, config.seed))
}

fn merge_hist(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Pearson χ² significance level used for the pass/fail decision.
pub const CHI2_ALPHA: f64 = 1e-3;
/// Minimum expected count for a bin to enter the statistic.
pub const CHI2_MIN_EXPECTED: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Outcome {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub p_value: f64,
    pub pass: bool,
    /// Photon numbers with their own bin; the rest is pooled.
    pub bins: Vec<usize>,
    pub pooled: bool,
}

/// Pearson χ² of a simulated histogram against the analytic distribution.
///
/// Photon numbers whose expected count is below ten are pooled together
/// with the overflow bin; the pool enters only if it reaches ten as well.
pub fn chi2_compare(sim: &SimResult, analytic: &PhotonStatistics<f64>) -> Result<Chi2Outcome> {
    if sim.trials == 0 {
        return Err(Error::InvalidConfig("simulation has zero trials".into()));
    }
    let n = sim.trials as f64;
    let observed = |i: usize| sim.counts.get(i).copied().unwrap_or(0) as f64;

    let mut terms = Vec::new();
    let mut bins = Vec::new();
    let mut pool_obs = 0.0;
    let mut pool_exp = analytic.overflow * n;
    for (i, &p) in analytic.p.iter().enumerate() {
        let expected = p * n;
        if expected >= CHI2_MIN_EXPECTED {
            terms.push((observed(i), expected));
            bins.push(i);
        } else {
            pool_obs += observed(i);
            pool_exp += expected;
        }
    }
    pool_obs += (analytic.p.len()..sim.counts.len()).map(observed).sum::<f64>();
    let pooled = pool_exp >= CHI2_MIN_EXPECTED;
    if pooled {
        terms.push((pool_obs, pool_exp));
    }
    if terms.len() < 2 {
        return Err(Error::Inconclusive(format!(
            "only {} bin(s) reach an expected count of {CHI2_MIN_EXPECTED}",
            terms.len()
        )));
    }
    let statistic: f64 = terms.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = terms.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let critical = dist.inverse_cdf(1.0 - CHI2_ALPHA);
    Ok(Chi2Outcome {
        statistic,
        dof,
        critical,
        p_value: 1.0 - dist.cdf(statistic),
        pass: statistic < critical,
        bins,
        pooled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statistics::{output_distribution, SeriesConfig};

    fn config(arms: Vec<f64>, lambda: f64, v_d: f64, trials: u64) -> SimConfig {
        SimConfig {
            arms: ArmVector::new(arms).unwrap(),
            lambda,
            v_d,
            trials,
            seed: 7,
        }
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(simulate(&config(vec![0.9], 0.5, 0.9, 0)).is_err());
    }

    #[test]
    fn tiny_lambda_gives_vacuum() {
        let r = simulate(&config(vec![0.9, 0.8], 1e-9, 0.9, 100_000)).unwrap();
        assert_eq!(r.counts, vec![100_000]);
    }

    #[test]
    fn stderr_matches_binomial_formula() {
        let r = simulate(&config(vec![0.95], 0.5, 0.9, 50_000)).unwrap();
        assert_eq!(r.counts.iter().sum::<u64>(), 50_000);
        for (p, s) in r.p_hat.iter().zip(&r.stderr) {
            assert!((s - (p * (1.0 - p) / 50_000.0).sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn partial_last_block() {
        let r = simulate(&config(vec![0.95], 0.5, 0.9, BLOCK_TRIALS + 17)).unwrap();
        assert_eq!(r.counts.iter().sum::<u64>(), BLOCK_TRIALS + 17);
    }

    #[test]
    fn chi2_guards() {
        let arms = ArmVector::new(vec![0.9]).unwrap();
        let analytic = output_distribution(&arms, 0.5, 0.9, &SeriesConfig::default()).unwrap();
        let empty = SimResult::from_counts(vec![], 0, 0);
        assert!(chi2_compare(&empty, &analytic).is_err());
        let few = simulate(&config(vec![0.9], 0.5, 0.9, 5)).unwrap();
        assert!(matches!(chi2_compare(&few, &analytic), Err(Error::Inconclusive(_))));
    }
}
