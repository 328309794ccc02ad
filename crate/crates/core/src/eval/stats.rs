use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooShort(usize),
    #[error("input is constant")]
    Constant,
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = alloc::vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn check(xs: &[f64], ys: &[f64]) -> Result<(), StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooShort(xs.len()));
    }
    Ok(())
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::Constant);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    check(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Two-sided permutation p-value for `spearman(xs, ys)`: `ys` is shuffled
/// `shuffles` times and `p = (hits + 1) / (shuffles + 1)`, where a hit is a
/// shuffled |rho| at least as large as the observed one.
pub fn permutation_test(xs: &[f64], ys: &[f64], shuffles: usize, seed: u64) -> Result<f64, StatsError> {
    check(xs, ys)?;
    let rx = average_ranks(xs);
    let mut ry = average_ranks(ys);
    let observed = pearson(&rx, &ry)?.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..shuffles {
        ry.shuffle(&mut rng);
        let r = pearson(&rx, &ry)?.abs();
        if r >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (shuffles + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), [1.5, 3.0, 1.5, 4.0]);
        assert_eq!(average_ranks(&[]), Vec::<f64>::new());
    }

    #[test]
    fn spearman_examples() {
        let up = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(spearman(&up, &up).unwrap(), 1.0);
        let down = [5.0, 4.0, 3.0, 2.0, 1.0];
        assert_eq!(spearman(&up, &down).unwrap(), -1.0);
        // d = (1, 1, 1, 1, 0): 1 - 6 * 4 / (5 * 24)
        let r = spearman(&up, &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((r - 0.8).abs() <= 1e-9);
        assert_eq!(spearman(&up, &[1.0; 5]), Err(StatsError::Constant));
        assert_eq!(spearman(&up, &[1.0]), Err(StatsError::LengthMismatch(5, 1)));
        assert_eq!(spearman(&[1.0], &[1.0]), Err(StatsError::TooShort(1)));
    }

    #[test]
    fn permutation_p_values() {
        let xs: Vec<f64> = (0..12).map(f64::from).collect();
        let p = permutation_test(&xs, &xs, 2000, 1).unwrap();
        assert!(p < 0.01, "{p}");
        let ys = [3.0, 9.0, 1.0, 11.0, 0.0, 7.0, 5.0, 2.0, 10.0, 4.0, 8.0, 6.0];
        let q = permutation_test(&xs, &ys, 2000, 1).unwrap();
        assert!(q > 0.1, "{q}");
        assert_eq!(q, permutation_test(&xs, &ys, 2000, 1).unwrap());
    }
}
