//! Critical offspring laws with an α-stable tail.
//!
//! The law is the one with generating function `φ(s) = s + c_phi (1 - s)^α`.
//! It is critical for every `c_phi ∈ (0, 1/α]` and its weights are
//!
//! ```text
//! p(0) = c_phi,  p(1) = 1 - α c_phi,  p(k) = c_phi (-1)^k C(α, k)  (k >= 2)
//! ```
//!
//! For `k >= 2` the survival function has the closed form
//! `S(k) = μ[k, ∞) = k p(k) / α`, and the tail of the mean is
//! `Σ_{j >= k} j p(j) = k (k - 1) p(k) / (α - 1)`. Both follow from
//! telescoping `Γ(j - α) / Γ(j + 1)` and make the table exact without any
//! truncation error. Asymptotically `S(k) ~ c k^{-α}` with
//! `c = c_phi / (α Γ(-α))`.

use alloc::vec::Vec;

use rand::Rng;

use crate::special::gamma;
use crate::{Error, Result};

/// Default size of the exact inversion table.
pub const DEFAULT_K_CUT: usize = 1 << 16;

#[derive(Debug, Clone)]
pub struct OffspringLaw {
    alpha: f64,
    c_phi: f64,
    k_cut: usize,
    /// `p(k)` for `k = 0..=k_cut + 1`.
    pmf: Vec<f64>,
    /// `S(k) = μ[k, ∞)` for `k = 0..=k_cut + 1`.
    survival: Vec<f64>,
    tail_constant: f64,
}

impl OffspringLaw {
    /// Builds the law; `c_phi` defaults to `1/alpha`, which makes `p(1) = 0`.
    pub fn new(alpha: f64, c_phi: Option<f64>, k_cut: usize) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(Error::Domain("alpha must lie in (1, 2)"));
        }
        let c_phi = c_phi.unwrap_or(1.0 / alpha);
        if !(c_phi > 0.0 && c_phi <= 1.0 / alpha) {
            return Err(Error::Domain("c_phi must lie in (0, 1/alpha]"));
        }
        if k_cut < 64 {
            return Err(Error::Domain("k_cut must be at least 64"));
        }

        let len = k_cut + 2;
        let mut pmf = Vec::with_capacity(len);
        pmf.push(c_phi);
        pmf.push((1.0 - c_phi * alpha).max(0.0));
        pmf.push(c_phi * alpha * (alpha - 1.0) / 2.0);
        for k in 2..len - 1 {
            let next = pmf[k] * (k as f64 - alpha) / (k as f64 + 1.0);
            pmf.push(next);
        }

        let mut survival = Vec::with_capacity(len);
        survival.push(1.0);
        survival.push(0.0);
        for (k, &p) in pmf.iter().enumerate().skip(2) {
            survival.push(k as f64 * p / alpha);
        }
        // S(1) = S(2) + p(1) keeps S(1) == S(2) exactly when p(1) = 0.
        survival[1] = survival[2] + pmf[1];

        // Sum small terms first.
        let top = len - 1;
        let mass = pmf[..top].iter().rev().sum::<f64>() + survival[top];
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::Construction("total mass differs from 1 by more than 1e-12"));
        }
        let tail_mean = top as f64 * (top as f64 - 1.0) * pmf[top] / (alpha - 1.0);
        let mean = pmf[..top]
            .iter()
            .enumerate()
            .rev()
            .map(|(k, &p)| k as f64 * p)
            .sum::<f64>()
            + tail_mean;
        if (mean - 1.0).abs() > 1e-9 {
            return Err(Error::Construction("mean differs from 1 by more than 1e-9"));
        }

        let tail_constant = c_phi / (alpha * gamma(-alpha));
        Ok(Self { alpha, c_phi, k_cut, pmf, survival, tail_constant })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_phi(&self) -> f64 {
        self.c_phi
    }

    pub fn k_cut(&self) -> usize {
        self.k_cut
    }

    /// The constant `c` in `μ[x, ∞) ~ c x^{-α}`.
    pub fn tail_constant(&self) -> f64 {
        self.tail_constant
    }

    /// Table entries `p(0..=k_cut)`.
    pub fn pmf_table(&self) -> &[f64] {
        &self.pmf[..=self.k_cut]
    }

    /// `μ({k})`. Beyond the table the product recurrence is continued on the fly.
    pub fn pmf(&self, k: u64) -> f64 {
        let last = self.pmf.len() - 1;
        if k <= last as u64 {
            return self.pmf[k as usize];
        }
        let mut p = self.pmf[last];
        let mut j = last as f64;
        let stop = k as f64;
        while j < stop {
            p *= (j - self.alpha) / (j + 1.0);
            j += 1.0;
        }
        p
    }

    /// `μ[x, ∞)`.
    pub fn tail_mass(&self, x: u64) -> f64 {
        match x {
            0 | 1 => self.survival[x as usize],
            _ => x as f64 * self.pmf(x) / self.alpha,
        }
    }

    /// Exact mean computed from the table plus the closed-form tail remainder.
    pub fn mean(&self) -> f64 {
        let top = self.pmf.len() - 1;
        let tail = top as f64 * (top as f64 - 1.0) * self.pmf[top] / (self.alpha - 1.0);
        self.pmf[..top].iter().enumerate().rev().map(|(k, &p)| k as f64 * p).sum::<f64>() + tail
    }

    /// Total mass of the table plus the closed-form tail remainder.
    pub fn total_mass(&self) -> f64 {
        let top = self.pmf.len() - 1;
        self.pmf[..top].iter().rev().sum::<f64>() + self.survival[top]
    }

    /// Conditional hazard `μ({k}) / μ[k, ∞)`.
    pub(crate) fn hazard(&self, k: u64) -> f64 {
        match k {
            0 => self.c_phi,
            1 => self.pmf[1] / self.survival[1],
            _ => self.alpha / k as f64,
        }
    }

    /// One draw from the law.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.sample_at_least(0, u64::MAX, rng)
    }

    /// One draw from the law conditioned on `k >= min`, truncated at
    /// `cap + 1`: every value above `cap` is reported as `cap + 1`.
    ///
    /// Sampling is by inversion of the exact survival function, so the
    /// truncation only saves work and never changes the law below the cap.
    pub fn sample_at_least<R: Rng + ?Sized>(&self, min: u64, cap: u64, rng: &mut R) -> u64 {
        // u ∈ (0, S(min)]
        let u = self.tail_mass(min) * (1.0 - rng.random::<f64>());
        self.invert_survival(u, min, cap)
    }

    /// Largest `k >= min` with `S(k) >= u`, or `cap + 1` if that exceeds `cap`.
    fn invert_survival(&self, u: f64, min: u64, cap: u64) -> u64 {
        let last = self.survival.len() - 1;
        let k = if (min as usize) < last && self.survival[last] < u {
            // Inside the table, where S is nonincreasing.
            let idx = self.survival.partition_point(|&s| s >= u);
            ((idx - 1) as u64).max(min)
        } else {
            let mut j = (min as usize).max(last) as u64;
            let mut s = self.tail_mass(j);
            loop {
                if j > cap {
                    break;
                }
                let next = s * (j as f64 - self.alpha) / j as f64;
                if next < u {
                    break;
                }
                s = next;
                j += 1;
            }
            j
        };
        if k > cap {
            cap.saturating_add(1)
        } else {
            k
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::vec;

    fn law15() -> OffspringLaw {
        OffspringLaw::new(1.5, Some(2.0 / 3.0), DEFAULT_K_CUT).unwrap()
    }

    /// Coefficients of (1 - s)^α by the plain binomial-series recurrence
    /// a_{k+1} = a_k (k - α) / (k + 1), a_0 = 1.
    fn binomial_series(alpha: f64, upto: usize) -> std::vec::Vec<f64> {
        let mut a = vec![1.0];
        for k in 0..upto {
            let next = a[k] * (k as f64 - alpha) / (k as f64 + 1.0);
            a.push(next);
        }
        a
    }

    #[test]
    fn first_weights_match_series_expansion() {
        let law = law15();
        let a = binomial_series(1.5, 10);
        // φ(s) = s + c_phi (1 - s)^α
        let c = 2.0 / 3.0;
        assert!((law.pmf(0) - c * a[0]).abs() < 1e-15);
        assert!((law.pmf(1) - (1.0 + c * a[1])).abs() < 1e-15);
        for k in 2..10 {
            assert!((law.pmf(k as u64) - c * a[k]).abs() < 1e-15);
        }
        assert!((law.pmf(0) - 0.666_667).abs() < 1e-6);
        assert!(law.pmf(1).abs() < 1e-15);
        assert!((law.pmf(2) - 0.25).abs() < 1e-15);
        assert!((law.pmf(3) - 0.041_666_7).abs() < 1e-7);
    }

    #[test]
    fn criticality_and_normalization() {
        for alpha in [1.1, 1.2, 1.5, 1.8, 1.95] {
            let law = OffspringLaw::new(alpha, None, 4096).unwrap();
            assert!((law.mean() - 1.0).abs() < 1e-9);
            assert!((law.total_mass() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tail_constant_alpha_15() {
        let law = law15();
        let g = 4.0 * libm::sqrt(core::f64::consts::PI) / 3.0;
        let expected = (2.0 / 3.0) / (1.5 * g);
        assert!((law.tail_constant() - expected).abs() < 1e-13);
        assert!((law.tail_constant() - 0.1881).abs() < 1e-4);
    }

    #[test]
    fn tail_mass_matches_brute_force_summation() {
        let law = law15();
        // Oracle: 1 - Σ_{k < x} p(k), summed directly.
        let mut acc = 0.0;
        for x in 0..2000u64 {
            let brute = 1.0 - acc;
            assert!((law.tail_mass(x) - brute).abs() < 1e-12, "x = {x}");
            acc += law.pmf(x);
        }
        // 10^6 · S(10^4) ≈ c
        let scaled = 1e6 * law.tail_mass(10_000);
        assert!((scaled / 0.188 - 1.0).abs() < 0.05);
    }

    #[test]
    fn tail_mass_monotone_and_regularly_varying() {
        for alpha in [1.2, 1.5, 1.8] {
            let law = OffspringLaw::new(alpha, None, DEFAULT_K_CUT).unwrap();
            let mut prev = 1.0;
            for x in (0..5000).step_by(7) {
                let t = law.tail_mass(x);
                assert!(t <= prev);
                prev = t;
            }
            let mut last_err = f64::INFINITY;
            for x in [1_000u64, 10_000, 100_000, 1_000_000] {
                let err = (libm::pow(x as f64, alpha) * law.tail_mass(x) / law.tail_constant() - 1.0).abs();
                assert!(err < last_err);
                last_err = err;
            }
            assert!(last_err < 0.05);
        }
    }

    #[test]
    fn pmf_beyond_table_continues_recurrence() {
        let small = OffspringLaw::new(1.5, None, 64).unwrap();
        let big = OffspringLaw::new(1.5, None, 4096).unwrap();
        for k in [65u64, 100, 1000, 4000] {
            assert!((small.pmf(k) / big.pmf(k) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(OffspringLaw::new(1.0, None, 100), Err(Error::Domain(_))));
        assert!(matches!(OffspringLaw::new(2.0, None, 100), Err(Error::Domain(_))));
        assert!(matches!(OffspringLaw::new(1.5, Some(0.7), 100), Err(Error::Domain(_))));
        assert!(matches!(OffspringLaw::new(1.5, Some(0.0), 100), Err(Error::Domain(_))));
        assert!(matches!(OffspringLaw::new(1.5, None, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn empirical_zero_frequency_and_determinism() {
        let law = law15();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000;
        let zeros = (0..n).filter(|_| law.sample(&mut rng) == 0).count();
        let f = zeros as f64 / n as f64;
        assert!((f - 0.6667).abs() < 0.003, "{f}");

        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..1000 {
            assert_eq!(law.sample(&mut a), law.sample(&mut b));
        }
    }

    #[test]
    fn chi_square_on_small_values() {
        let law = OffspringLaw::new(1.5, Some(0.5), DEFAULT_K_CUT).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 1_000_000usize;
        let mut counts = [0usize; 22];
        for _ in 0..n {
            let k = law.sample(&mut rng) as usize;
            counts[k.min(21)] += 1;
        }
        let mut chi2 = 0.0;
        for (k, &obs) in counts.iter().enumerate() {
            let p = if k < 21 { law.pmf(k as u64) } else { law.tail_mass(21) };
            let e = p * n as f64;
            chi2 += (obs as f64 - e) * (obs as f64 - e) / e;
        }
        // 21 degrees of freedom, upper 1e-3 quantile is 46.8.
        assert!(chi2 < 46.8, "chi2 = {chi2}");
    }

    #[test]
    fn empirical_mean_median_of_means() {
        let law = law15();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let blocks = 20;
        let per_block = 500_000;
        let mut means: std::vec::Vec<f64> = (0..blocks)
            .map(|_| (0..per_block).map(|_| law.sample(&mut rng) as f64).sum::<f64>() / per_block as f64)
            .collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (means[9] + means[10]);
        // Heavy right tail: the median of block means sits slightly below 1.
        assert!((median - 1.0).abs() < 0.02, "{median}");
    }

    #[test]
    fn tail_sampling_is_exact_beyond_table() {
        // Conditioned on exceeding the table, P(k >= 2m | k >= m) ≈ 2^{-α}.
        let law = OffspringLaw::new(1.5, None, 64).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let hits = (0..n).filter(|_| law.sample_at_least(1000, u64::MAX, &mut rng) >= 2000).count();
        let expected = law.tail_mass(2000) / law.tail_mass(1000);
        let f = hits as f64 / n as f64;
        let sd = libm::sqrt(expected * (1.0 - expected) / n as f64);
        assert!((f - expected).abs() < 4.0 * sd, "{f} vs {expected}");
    }

    #[test]
    fn capped_sampling_reports_overflow() {
        let law = law15();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let k = law.sample_at_least(0, 3, &mut rng);
            assert!(k <= 4);
        }
        assert_eq!(law.sample_at_least(10, 5, &mut rng), 6);
    }
}
