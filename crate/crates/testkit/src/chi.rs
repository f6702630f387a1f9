//! Two-sample chi-square comparison of byte histograms, for transcript
//! distribution smoke tests.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// p-value of the two-sample chi-square test over 256-bin byte histograms
/// with equal totals. Bins empty in both samples are dropped.
pub fn chi_square_p(hist_a: &[u64; 256], hist_b: &[u64; 256]) -> f64 {
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for k in 0..256 {
        let a = hist_a[k] as f64;
        let b = hist_b[k] as f64;
        if a + b > 0.0 {
            bins += 1;
            statistic += (a - b) * (a - b) / (a + b);
        }
    }
    if bins <= 1 {
        return 1.0;
    }
    let dist = ChiSquared::new((bins - 1) as f64).expect("positive dof");
    1.0 - dist.cdf(statistic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn identical_distributions_score_high() {
        let mut rng = StdRng::seed_from_u64(4);
        let mut a = [0u64; 256];
        let mut b = [0u64; 256];
        for _ in 0..100_000 {
            a[rng.gen::<u8>() as usize] += 1;
            b[rng.gen::<u8>() as usize] += 1;
        }
        assert!(chi_square_p(&a, &b) > 0.01);
    }

    #[test]
    fn disjoint_distributions_score_low() {
        let mut a = [0u64; 256];
        let mut b = [0u64; 256];
        for k in 0..128 {
            a[k] = 100;
            b[k + 128] = 100;
        }
        assert!(chi_square_p(&a, &b) < 1e-6);
    }
}
