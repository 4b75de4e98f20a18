//! Monte Carlo simulation of the N-copy protocol.
//!
//! Each trial draws joint outcome strings for copies `1..N−1` from the exact
//! per-copy distribution over the `2^Q` participant outcomes. Copy `N` is held
//! back: it becomes the output, unfiltered, only when no earlier copy passed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, Discrete};

use crate::error::{Error, Result};
use crate::ted::{outcome_distribution, ProtocolConfig};

/// Tolerance on the total mass of the per-copy outcome distribution.
pub const DISTRIBUTION_TOL: f64 = 1e-12;

/// One simulated run of the protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    /// `outcome_strings[k][u]` is the outcome of the `k`-th participant
    /// (ascending party order) on copy `u` (0-based).
    pub outcome_strings: Vec<Vec<u8>>,
    /// 0-based indices of copies on which every participant reported 0.
    pub kept_copies: Vec<usize>,
    pub success: bool,
    pub final_copy_is_unfiltered: bool,
}

impl TrialRecord {
    /// Kept copies among `1..N−1`.
    pub fn distilled_count(&self) -> usize {
        self.kept_copies.len() - usize::from(self.final_copy_is_unfiltered)
    }
}

/// Precomputed sampler for one configuration.
#[derive(Debug, Clone)]
pub struct TrialSampler {
    n_copies: usize,
    q: usize,
    cumulative: Vec<f64>,
    p_all_zero: f64,
}

impl TrialSampler {
    pub fn new(config: &ProtocolConfig) -> Result<Self> {
        let assignment = config.assignment()?;
        let probs = outcome_distribution(&config.initial_state()?, &assignment)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOL {
            return Err(Error::InvalidConfig(format!(
                "outcome distribution sums to {total}"
            )));
        }
        let cumulative = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p / total;
                Some(*acc)
            })
            .collect();
        Ok(TrialSampler {
            n_copies: config.n_copies(),
            q: assignment.q(),
            cumulative,
            p_all_zero: probs[0],
        })
    }

    pub fn p_all_zero(&self) -> f64 {
        self.p_all_zero
    }

    fn draw_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> TrialRecord {
        let n = self.n_copies;
        let mut strings = vec![vec![0u8; n]; self.q];
        let mut kept = Vec::new();
        for u in 0..n - 1 {
            let mask = self.draw_mask(rng);
            for (k, s) in strings.iter_mut().enumerate() {
                s[u] = ((mask >> k) & 1) as u8;
            }
            if mask == 0 {
                kept.push(u);
            }
        }
        let success = !kept.is_empty();
        if success {
            // The reserve copy is not needed and is discarded.
            for s in &mut strings {
                s[n - 1] = 1;
            }
        } else {
            kept.push(n - 1);
        }
        TrialRecord {
            outcome_strings: strings,
            kept_copies: kept,
            success,
            final_copy_is_unfiltered: !success,
        }
    }
}

pub fn simulate_trial<R: Rng + ?Sized>(
    config: &ProtocolConfig,
    rng: &mut R,
) -> Result<TrialRecord> {
    Ok(TrialSampler::new(config)?.sample(rng))
}

/// Substream `trial` of the master `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalStats {
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    /// `kept_count_histogram[k]` counts trials with exactly `k` distilled
    /// copies among `1..N−1`.
    pub kept_count_histogram: Vec<u64>,
    /// Fraction of filtered copies on which every participant reported 0.
    pub all_zero_frequency: f64,
    pub rng_seed: u64,
}

#[derive(Default)]
struct Tally {
    successes: u64,
    all_zero: u64,
    histogram: Vec<u64>,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.successes += other.successes;
        self.all_zero += other.all_zero;
        if self.histogram.len() < other.histogram.len() {
            self.histogram.resize(other.histogram.len(), 0);
        }
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        self
    }
}

/// Runs `trials` independent trials in parallel. Trial `i` draws from
/// substream `i`, so the result does not depend on scheduling.
pub fn run_stats(config: &ProtocolConfig, trials: u64, seed: u64) -> Result<EmpiricalStats> {
    if trials == 0 {
        return Err(Error::InvalidConfig(
            "at least one trial is required".into(),
        ));
    }
    let sampler = TrialSampler::new(config)?;
    let n = config.n_copies();
    let tally = (0..trials)
        .into_par_iter()
        .fold(Tally::default, |mut t, i| {
            let rec = sampler.sample(&mut trial_rng(seed, i));
            let k = rec.distilled_count();
            if t.histogram.is_empty() {
                t.histogram = vec![0; n];
            }
            t.histogram[k] += 1;
            t.all_zero += k as u64;
            t.successes += u64::from(rec.success);
            t
        })
        .reduce(Tally::default, Tally::merge);
    let mut histogram = tally.histogram;
    histogram.resize(n, 0);
    Ok(EmpiricalStats {
        trials,
        successes: tally.successes,
        success_rate: tally.successes as f64 / trials as f64,
        kept_count_histogram: histogram,
        all_zero_frequency: tally.all_zero as f64 / (trials * (n as u64 - 1)) as f64,
        rng_seed: seed,
    })
}

/// `|rate − p| ≤ k·√(p(1−p)/trials)`
pub fn within_sigma(rate: f64, p: f64, trials: u64, k: f64) -> bool {
    let sigma = (p * (1.0 - p) / trials as f64).sqrt();
    (rate - p).abs() <= k * sigma
}

/// Expected histogram of Binomial(`n`, `p`) over `trials` draws.
pub fn binomial_expected(n: u64, p: f64, trials: u64) -> Result<Vec<f64>> {
    let binom = Binomial::new(p, n).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    Ok((0..=n).map(|k| binom.pmf(k) * trials as f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquaredTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit of a histogram over `0..=n` against
/// Binomial(`n`, `p`). Neighbouring bins are merged until each expects at
/// least 5 counts.
pub fn binomial_chi_squared(histogram: &[u64], n: u64, p: f64) -> Result<ChiSquaredTest> {
    if histogram.len() != n as usize + 1 {
        return Err(Error::DimensionMismatch {
            expected: n as usize + 1,
            found: histogram.len(),
        });
    }
    let expected = binomial_expected(n, p, histogram.iter().sum())?;

    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (k, &count) in histogram.iter().enumerate() {
        obs += count as f64;
        exp += expected[k];
        if exp >= 5.0 {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => bins.push((obs, exp)),
        }
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        1.0 - dist.cdf(statistic)
    };
    Ok(ChiSquaredTest {
        statistic,
        dof,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{perfect_ghz, GhzSpec, WSpec};

    fn ghz3(n: usize) -> ProtocolConfig {
        let spec = GhzSpec::new(
            vec![
                (1.0f64 / 8.0).sqrt(),
                (7.0f64 / 16.0).sqrt(),
                (7.0f64 / 16.0).sqrt(),
            ],
            3,
        )
        .unwrap();
        ProtocolConfig::ghz(spec, n, 1).unwrap()
    }

    #[test]
    fn perfect_spec_always_keeps_every_copy() {
        let cfg = ProtocolConfig::ghz(perfect_ghz(3, 3).unwrap(), 4, 2).unwrap();
        let mut rng = trial_rng(1, 0);
        for _ in 0..50 {
            let rec = simulate_trial(&cfg, &mut rng).unwrap();
            assert!(rec.success);
            assert_eq!(rec.kept_copies, vec![0, 1, 2]);
        }
    }

    #[test]
    fn last_copy_rule() {
        let cfg = ghz3(2);
        let sampler = TrialSampler::new(&cfg).unwrap();
        let mut rng = trial_rng(7, 0);
        let mut saw_fallback = false;
        for _ in 0..200 {
            let rec = sampler.sample(&mut rng);
            assert_eq!(rec.success, rec.kept_copies.first().is_some_and(|&u| u < 1));
            if rec.final_copy_is_unfiltered {
                saw_fallback = true;
                assert_eq!(rec.kept_copies, vec![1]);
                assert!(rec.outcome_strings.iter().all(|s| s[1] == 0));
            }
        }
        assert!(saw_fallback);
    }

    #[test]
    fn single_trial_uses_substream_zero() {
        let cfg = ghz3(5);
        let stats = run_stats(&cfg, 1, 99).unwrap();
        let rec = simulate_trial(&cfg, &mut trial_rng(99, 0)).unwrap();
        assert_eq!(stats.successes, u64::from(rec.success));
        assert_eq!(stats.kept_count_histogram[rec.distilled_count()], 1);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = ghz3(5);
        let a = run_stats(&cfg, 20_000, 42).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| run_stats(&cfg, 20_000, 42).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.kept_count_histogram.iter().sum::<u64>(), 20_000);
    }

    #[test]
    fn ghz3_success_rate_within_three_sigma() {
        let stats = run_stats(&ghz3(5), 100_000, 42).unwrap();
        let expected = 0.847_412_109_375;
        assert!(within_sigma(
            stats.success_rate,
            expected,
            stats.trials,
            3.0
        ));
        assert!(within_sigma(
            stats.all_zero_frequency,
            0.375,
            stats.trials * 4,
            3.0
        ));
        let chi = binomial_chi_squared(&stats.kept_count_histogram, 4, 0.375).unwrap();
        assert!(chi.p_value > 1e-3, "{chi:?}");
    }

    #[test]
    fn w3_success_rate_within_three_sigma() {
        let spec = WSpec::new(vec![0.5, 0.5, 0.5f64.sqrt()]).unwrap();
        let cfg = ProtocolConfig::w(spec, 3).unwrap();
        let stats = run_stats(&cfg, 100_000, 7).unwrap();
        assert!(within_sigma(
            stats.success_rate,
            0.609_375,
            stats.trials,
            3.0
        ));
    }

    #[test]
    fn chi_squared_rejects_wrong_parameter() {
        let stats = run_stats(&ghz3(5), 50_000, 3).unwrap();
        let chi = binomial_chi_squared(&stats.kept_count_histogram, 4, 0.3).unwrap();
        assert!(chi.p_value < 1e-3);
    }
}
