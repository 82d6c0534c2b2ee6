//! Subject-wise cross-validation folds: every IPF subject appears in
//! exactly one fold's test set; healthy subjects rotate through
//! train/val/test per fold (seeded).

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Condition, DataError, SubjectRecord};
use crate::seeds::splitmix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: BTreeSet<String>,
    pub val: BTreeSet<String>,
    pub test: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// Per-fold disjointness + coverage, and the IPF-once-in-test property.
    pub fn validate(&self, subjects: &[SubjectRecord]) -> Result<(), DataError> {
        let all: BTreeSet<String> = subjects.iter().map(|s| s.subject_id.clone()).collect();
        for (i, fold) in self.folds.iter().enumerate() {
            if !fold.train.is_disjoint(&fold.val)
                || !fold.train.is_disjoint(&fold.test)
                || !fold.val.is_disjoint(&fold.test)
            {
                return Err(DataError::AnnotationError(format!("fold {i}: sets overlap")));
            }
            let union: BTreeSet<String> =
                fold.train.union(&fold.val).chain(fold.test.iter()).cloned().collect();
            if union != all {
                return Err(DataError::AnnotationError(format!(
                    "fold {i}: subjects not partitioned"
                )));
            }
        }
        let ipf: Vec<&SubjectRecord> =
            subjects.iter().filter(|s| s.condition == Condition::Ipf).collect();
        for s in ipf {
            let appearances = self
                .folds
                .iter()
                .filter(|f| f.test.contains(&s.subject_id))
                .count();
            if appearances != 1 {
                return Err(DataError::AnnotationError(format!(
                    "IPF subject {} in {appearances} test sets",
                    s.subject_id
                )));
            }
        }
        Ok(())
    }
}

/// Build `n_folds` folds. Fold i tests the i-th slice of the (sorted) IPF
/// subjects; one IPF subject from the next slice joins the validation set
/// so it contains a crackle-bearing subject; healthy subjects are shuffled
/// per fold (seeded) with two to val, two to test, the rest to train.
pub fn build_folds(
    subjects: &[SubjectRecord],
    n_folds: usize,
    seed: u64,
) -> Result<FoldPlan, DataError> {
    let mut ipf: Vec<String> = subjects
        .iter()
        .filter(|s| s.condition == Condition::Ipf)
        .map(|s| s.subject_id.clone())
        .collect();
    let mut healthy: Vec<String> = subjects
        .iter()
        .filter(|s| s.condition != Condition::Ipf)
        .map(|s| s.subject_id.clone())
        .collect();
    ipf.sort();
    healthy.sort();
    if n_folds == 0 || ipf.len() < n_folds {
        return Err(DataError::InsufficientSubjects { have: ipf.len(), need: n_folds });
    }

    // slice the IPF list into n_folds contiguous test groups
    let base = ipf.len() / n_folds;
    let extra = ipf.len() % n_folds;
    let mut slices: Vec<Vec<String>> = Vec::with_capacity(n_folds);
    let mut at = 0usize;
    for i in 0..n_folds {
        let take = base + usize::from(i < extra);
        slices.push(ipf[at..at + take].to_vec());
        at += take;
    }

    let mut folds = Vec::with_capacity(n_folds);
    for i in 0..n_folds {
        let mut test: BTreeSet<String> = slices[i].iter().cloned().collect();
        let mut val: BTreeSet<String> = BTreeSet::new();
        if n_folds > 1 {
            // first IPF subject of the next slice validates this fold
            val.insert(slices[(i + 1) % n_folds][0].clone());
        }
        let mut train: BTreeSet<String> = ipf
            .iter()
            .filter(|s| !test.contains(*s) && !val.contains(*s))
            .cloned()
            .collect();

        let mut order = healthy.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ (i as u64).wrapping_mul(0x517c_c1b7)));
        order.shuffle(&mut rng);
        for (k, subject) in order.into_iter().enumerate() {
            match k {
                0 | 1 => {
                    val.insert(subject);
                }
                2 | 3 => {
                    test.insert(subject);
                }
                _ => {
                    train.insert(subject);
                }
            }
        }
        folds.push(Fold { train, val, test });
    }
    let plan = FoldPlan { folds };
    plan.validate(subjects)?;
    Ok(plan)
}
