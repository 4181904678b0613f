//! Exhaustive search over all `p`-subsets; ground truth for tiny instances.

use crate::error::{Error, Result};
use crate::estimation::{aopt_objective, SensorSet};
use crate::rom_noise::{NoiseModel, ReducedOrderModel};

/// Largest number of subsets [`exhaustive_best`] will enumerate.
pub const MAX_SUBSETS: u128 = 1_000_000;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Visits every `k`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        // Rightmost position that can still advance.
        let Some(pos) = (0..k).rev().find(|&j| idx[j] < n - k + j) else {
            return;
        };
        idx[pos] += 1;
        for j in pos + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Global minimizer of the A-optimality criterion over all `p`-subsets.
/// Subsets with a singular information matrix are skipped; ties go to the
/// lexicographically first subset.
pub fn exhaustive_best(rom: &ReducedOrderModel, noise: &NoiseModel, p: usize) -> Result<(SensorSet, f64)> {
    let (n, r1) = (rom.n(), rom.r1());
    if p < r1 || p > n {
        return Err(Error::InfeasibleBudget { p, r1, n });
    }
    let count = binomial(n, p);
    if count > MAX_SUBSETS {
        return Err(Error::TooLarge(count));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut failure = None;
    for_each_subset(n, p, |subset| {
        let set = SensorSet::new(subset.to_vec()).expect("subsets are distinct");
        match aopt_objective(rom, noise, &set) {
            Ok(f) => {
                if best.as_ref().is_none_or(|(_, b)| f < *b) {
                    best = Some((subset.to_vec(), f));
                }
            }
            Err(e @ (Error::SingularFim(_) | Error::NumericalFailure(_))) => failure = Some(e),
            Err(e) => failure = Some(e),
        }
    });
    match best {
        Some((idx, f)) => Ok((SensorSet::new(idx)?, f)),
        None => Err(failure.unwrap_or(Error::SingularFim(f64::INFINITY))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Matrix, Vector};

    #[test]
    fn binomials() {
        assert_eq!(binomial(12, 4), 495);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn enumerates_in_lexicographic_order() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut count = 0;
        for_each_subset(7, 3, |_| count += 1);
        assert_eq!(count, 35);
    }

    fn identity_rom(n: usize, r1: usize) -> ReducedOrderModel {
        let s = Vector::from_iterator(n, (0..n).map(|k| 1.0 / (k + 1) as f64));
        ReducedOrderModel::from_factors(Matrix::identity(n, n), s, Matrix::identity(n, n), r1, r1 + 1).unwrap()
    }

    #[test]
    fn single_subset() {
        let rom = identity_rom(4, 2);
        let noise = NoiseModel::white(4);
        let (set, f) = exhaustive_best(&rom, &noise, 4).unwrap();
        assert_eq!(set.indices(), &[0, 1, 2, 3]);
        assert!((f - aopt_objective(&rom, &noise, &set).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn symmetric_optima_pick_first() {
        let rom = identity_rom(6, 2);
        let (set, f) = exhaustive_best(&rom, &NoiseModel::white(6), 3).unwrap();
        assert_eq!(set.indices(), &[0, 1, 2]);
        assert!((f - 2.0).abs() < 1e-14);
    }

    #[test]
    fn refuses_large_enumerations() {
        let rom = identity_rom(40, 2);
        assert!(matches!(exhaustive_best(&rom, &NoiseModel::white(40), 20), Err(Error::TooLarge(_))));
    }
}
