use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng::SplitMix64;

/// Assignment of sample indices to `k` test folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub repeat: usize,
    /// Ascending sample indices of each test fold.
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn n_samples(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    /// Everything outside fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn test_indices(&self, f: usize) -> &[usize] {
        &self.folds[f]
    }
}

/// Shuffles each class's indices with [`SplitMix64`] seeded by `seed`, then
/// deals them round-robin to the folds. The dealing position carries over
/// from one class to the next so fold sizes stay within one of each other
/// as well.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldPlan, EvalError> {
    if k < 2 {
        return Err(EvalError::TooFewFolds(k));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    if let Some((class, m)) = members.iter().enumerate().find(|(_, m)| !m.is_empty() && m.len() < k) {
        return Err(EvalError::ClassTooSmall {
            class,
            count: m.len(),
            k,
        });
    }
    let mut rng = SplitMix64::new(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for class in members.iter_mut() {
        rng.shuffle(class);
        for &i in class.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldPlan {
        k,
        seed,
        repeat: 0,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(counts: &[usize]) -> Vec<usize> {
        counts.iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect()
    }

    fn per_fold_counts(plan: &FoldPlan, labels: &[usize], class: usize) -> Vec<usize> {
        plan.folds
            .iter()
            .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
            .collect()
    }

    #[test]
    fn dataset_counts() {
        let l = labels(&[219, 1341, 1345]);
        let plan = stratified_kfold(&l, 5, 3).unwrap();
        let mut covid = per_fold_counts(&plan, &l, 0);
        covid.sort_unstable();
        assert_eq!(covid, vec![43, 44, 44, 44, 44]);
        assert_eq!(plan.n_samples(), 2905);
    }

    #[test]
    fn degenerate_k_and_small_classes() {
        assert!(matches!(stratified_kfold(&[0, 1], 1, 0), Err(EvalError::TooFewFolds(1))));
        let l = labels(&[5, 4]);
        assert!(matches!(
            stratified_kfold(&l, 5, 0),
            Err(EvalError::ClassTooSmall { class: 1, count: 4, k: 5 })
        ));
    }

    #[test]
    fn seeds_change_assignment_not_counts() {
        let l = labels(&[23, 40, 17]);
        let a = stratified_kfold(&l, 5, 1).unwrap();
        let b = stratified_kfold(&l, 5, 2).unwrap();
        assert_ne!(a.folds, b.folds);
        for c in 0..3 {
            assert_eq!(per_fold_counts(&a, &l, c), per_fold_counts(&b, &l, c));
        }
        assert_eq!(stratified_kfold(&l, 5, 1).unwrap(), a);
    }

    #[test]
    fn train_and_test_split_the_indices() {
        let l = labels(&[6, 7]);
        let plan = stratified_kfold(&l, 3, 9).unwrap();
        for f in 0..3 {
            let mut all = plan.train_indices(f);
            all.extend_from_slice(plan.test_indices(f));
            all.sort_unstable();
            assert_eq!(all, (0..13).collect::<Vec<_>>());
        }
    }
}
