//! Seeded train/test partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Index partition; both halves sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn check_fraction(f: f64) -> Result<()> {
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train fraction must lie in (0, 1), got {f}"
        )));
    }
    Ok(())
}

/// Per-class training sizes by largest remainder: floors of `f * n_k`, then
/// the remaining `round(f * N) - sum(floors)` slots go to the largest
/// fractional parts (smaller class index first). Each class keeps at least
/// one item on each side.
pub fn allocate(counts: &[usize], fraction: f64) -> Vec<usize> {
    let total: usize = counts.iter().sum();
    let target = (fraction * total as f64).round() as usize;
    let exact: Vec<f64> = counts.iter().map(|&n| fraction * n as f64).collect();
    let mut alloc: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut remaining = target.saturating_sub(alloc.iter().sum());
    for &j in order.iter().cycle().take(order.len() * 2) {
        if remaining == 0 {
            break;
        }
        if alloc[j] < counts[j] {
            alloc[j] += 1;
            remaining -= 1;
        }
    }
    for (a, &n) in alloc.iter_mut().zip(counts) {
        if n >= 2 {
            *a = (*a).clamp(1, n - 1);
        }
    }
    alloc
}

/// Stratified split over 1-based `labels` in `1..=k`.
pub fn stratified_split(labels: &[usize], k: usize, fraction: f64, seed: u64) -> Result<Split> {
    check_fraction(fraction)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 || l > k {
            return Err(Error::InvalidParameter(format!("label {l} outside 1..={k}")));
        }
        members[l - 1].push(i);
    }
    if let Some(j) = members.iter().position(|m| m.len() < 2) {
        return Err(Error::InvalidParameter(format!(
            "class {} has {} member(s); stratification needs at least 2",
            j + 1,
            members[j].len()
        )));
    }
    let counts: Vec<usize> = members.iter().map(Vec::len).collect();
    let alloc = allocate(&counts, fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (mut m, n_train) in members.into_iter().zip(alloc) {
        m.shuffle(&mut rng);
        split.train.extend_from_slice(&m[..n_train]);
        split.test.extend_from_slice(&m[n_train..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Unstratified split of `0..n`.
pub fn random_split(n: usize, fraction: f64, seed: u64) -> Result<Split> {
    check_fraction(fraction)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * n as f64).round() as usize).min(n);
    let mut train = idx[..n_train].to_vec();
    let mut test = idx[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn four_class_mri_allocation() {
        let counts = [926, 937, 901, 500];
        let alloc = allocate(&counts, 2606.0 / 3264.0);
        assert_eq!(alloc.iter().sum::<usize>(), 2606);
        assert_eq!(alloc, vec![739, 748, 720, 399]);
    }

    #[test]
    fn balanced_example() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4 + 1).collect();
        let s = stratified_split(&labels, 4, 0.8, 3).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (80, 20));
        for c in 1..=4 {
            assert_eq!(s.train.iter().filter(|&&i| labels[i] == c).count(), 20);
        }
        assert_eq!(s, stratified_split(&labels, 4, 0.8, 3).unwrap());
        assert_ne!(s, stratified_split(&labels, 4, 0.8, 4).unwrap());
    }

    #[test]
    fn rejects_tiny_classes_and_bad_fraction() {
        assert!(stratified_split(&[1, 1, 2], 2, 0.5, 0).is_err());
        assert!(stratified_split(&[1, 1, 2, 2], 2, 1.0, 0).is_err());
        assert!(random_split(4, 0.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_exact(labels in proptest::collection::vec(1usize..4, 6..60), f in 0.05f64..0.95, seed in any::<u64>()) {
            let mut labels = labels;
            labels.extend([1, 1, 2, 2, 3, 3]);
            let s = stratified_split(&labels, 3, f, seed).unwrap();
            let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for c in 1..=3 {
                prop_assert!(s.train.iter().any(|&i| labels[i] == c));
                prop_assert!(s.test.iter().any(|&i| labels[i] == c));
            }
        }
    }
}
