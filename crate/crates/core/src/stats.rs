//! Goodness-of-fit helpers for the Born-rule checks.

use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square of observed counts against expected probabilities.
///
/// Categories with zero expected probability are dropped; an observation in
/// such a category makes the p-value 0.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), probs.len(), "observed/expected length mismatch");
    let n: u64 = observed.iter().sum();
    let total_p: f64 = probs.iter().sum();
    let nf = n as f64;
    let mut stat = 0.0;
    let mut cats = 0usize;
    let mut impossible = false;
    for (&o, &p) in observed.iter().zip(probs) {
        let p = p / total_p;
        if p <= 0.0 {
            impossible |= o > 0;
            continue;
        }
        let e = nf * p;
        stat += (o as f64 - e).powi(2) / e;
        cats += 1;
    }
    let dof = cats.saturating_sub(1);
    let p_value = if impossible {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
        dist.sf(stat)
    };
    ChiSquare { statistic: stat, dof, p_value }
}

/// Total-variation distance between two discrete distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    0.5 * p.iter().zip(q).map(|(a, b)| (a / sp - b / sq).abs()).sum::<f64>()
}

/// `k`-sigma half-width of a binomial proportion.
pub fn binomial_band(n: u64, p: f64, k: f64) -> f64 {
    k * (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_counts_reference_value() {
        let r = chi_square(&[28, 31, 40, 35], &[0.25; 4]);
        assert!((r.statistic - 2.417_910_447_761_194).abs() < 1e-12);
        assert!((r.p_value - 0.490_309_306_965_388_3).abs() < 1e-9);
        assert_eq!(r.dof, 3);
    }

    #[test]
    fn observation_in_impossible_cell() {
        let r = chi_square(&[10, 1], &[1.0, 0.0]);
        assert_eq!(r.p_value, 0.0);
        let r = chi_square(&[10, 0], &[1.0, 0.0]);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn total_variation_basics() {
        assert_eq!(total_variation(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert!(total_variation(&[0.2, 0.8], &[2.0, 8.0]) < 1e-15);
    }
}
