//! Model rankings and the Vygotsky distance between tasks.
//!
//! Each task column induces a ranking of the models. The distance between two
//! tasks is the number of model pairs the two rankings order differently,
//! computed as the inversion count of `a ∘ b⁻¹` and scaled by `n(n-1)/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::leaderboard::Leaderboard;

/// Tolerance used when checking metric axioms on scaled distances.
pub const METRIC_TOLERANCE: f64 = 1e-12;

/// `ranks[i]` is the rank of model `i` (0 = best).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    ranks: Vec<usize>,
}

impl Permutation {
    pub fn new(ranks: Vec<usize>) -> Result<Self> {
        let n = ranks.len();
        if n < 2 {
            return Err(Error::TooFewModels(n));
        }
        let mut seen = vec![false; n];
        for &r in &ranks {
            if r >= n || seen[r] {
                return Err(Error::InvalidPermutation(format!(
                    "{ranks:?} is not a bijection on 0..{n}"
                )));
            }
            seen[r] = true;
        }
        Ok(Self { ranks })
    }

    /// Builds the permutation from a best-first list of model indices.
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let mut ranks = vec![usize::MAX; order.len()];
        for (rank, &model) in order.iter().enumerate() {
            if model >= order.len() {
                return Err(Error::InvalidPermutation(format!("{order:?}")));
            }
            ranks[model] = rank;
        }
        Self::new(ranks)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn rank_of(&self, model: usize) -> usize {
        self.ranks[model]
    }

    /// Best-first list of models: `order()[k]` holds rank `k`.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.ranks.len()];
        for (model, &rank) in self.ranks.iter().enumerate() {
            order[rank] = model;
        }
        order
    }
}

/// How equal scores are ordered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// Lower model index ranks first.
    #[default]
    ModelIndex,
    /// Models earlier in this list rank first. Must list every model once.
    Priority(Vec<usize>),
}

/// Ranks models by descending score; rank 0 is the highest score.
pub fn ranking_from_scores(scores: &[f64], tie_break: &TieBreak) -> Result<Permutation> {
    let n = scores.len();
    if n < 2 {
        return Err(Error::TooFewModels(n));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score of model {i}")));
    }
    let priority: Vec<usize> = match tie_break {
        TieBreak::ModelIndex => (0..n).collect(),
        TieBreak::Priority(order) => {
            // position of each model in the priority list
            Permutation::from_order(order)
                .map_err(|_| Error::InvalidPermutation("tie-break order".into()))?
                .ranks
        }
    };
    if priority.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: priority.len(),
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(priority[a].cmp(&priority[b]))
    });
    Permutation::from_order(&order)
}

/// Number of pairs `i < j` with `p[i] > p[j]`, by merge counting in O(n log n).
pub fn inversions(p: &Permutation) -> u64 {
    count_inversions(p.ranks())
}

/// Merge-sort inversion count over any slice of distinct values.
pub(crate) fn count_inversions(values: &[usize]) -> u64 {
    let mut buf = values.to_vec();
    let mut scratch = vec![0; buf.len()];
    merge_count(&mut buf, &mut scratch)
}

fn merge_count(v: &mut [usize], scratch: &mut [usize]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = v.split_at_mut(mid);
        let (sl, sr) = scratch.split_at_mut(mid);
        merge_count(left, sl) + merge_count(right, sr)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            scratch[k] = v[i];
            i += 1;
        } else {
            scratch[k] = v[j];
            // every remaining left element is greater than v[j]
            count += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    scratch[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    scratch[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&scratch[..n]);
    count
}

/// Unscaled distance `inv(a ∘ b⁻¹)`: the number of model pairs ordered
/// oppositely by the two rankings.
pub fn discordant_pairs(a: &Permutation, b: &Permutation) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    // composed[k] = rank under `a` of the model holding rank k under `b`
    let composed: Vec<usize> = b.order().iter().map(|&m| a.rank_of(m)).collect();
    Ok(count_inversions(&composed))
}

/// Largest possible inversion count for `n` models.
pub fn max_inversions(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Vygotsky distance scaled to `[0, 1]`; a full reversal scores 1.
pub fn vygotsky_weight(a: &Permutation, b: &Permutation) -> Result<f64> {
    let d = discordant_pairs(a, b)?;
    Ok(d as f64 / max_inversions(a.len()) as f64)
}

/// Symmetric task-to-task distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    #[serde(rename = "tasks")]
    task_names: Vec<String>,
    n_models: usize,
    #[serde(rename = "matrix")]
    values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    /// Checks shape, symmetry, zero diagonal, range and the triangle inequality.
    pub fn new(task_names: Vec<String>, values: Vec<Vec<f64>>, n_models: usize) -> Result<Self> {
        let dm = Self {
            task_names,
            n_models,
            values,
        };
        dm.check()?;
        Ok(dm)
    }

    fn check(&self) -> Result<()> {
        let n = self.task_names.len();
        let bad = |msg: String| Err(Error::InvalidDistanceMatrix(msg));
        if self.values.len() != n || self.values.iter().any(|r| r.len() != n) {
            return bad(format!("matrix is not {n}x{n}"));
        }
        if self.n_models == 0 {
            return bad("n_models must be positive".into());
        }
        for i in 0..n {
            if self.values[i][i] != 0.0 {
                return bad(format!("diagonal entry {i} is {}", self.values[i][i]));
            }
            for j in 0..n {
                let v = self.values[i][j];
                if !(0.0..=1.0).contains(&v) {
                    return bad(format!("entry ({i}, {j}) = {v} outside [0, 1]"));
                }
                if (v - self.values[j][i]).abs() > METRIC_TOLERANCE {
                    return bad(format!("asymmetric at ({i}, {j})"));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let direct = self.values[i][j];
                    let detour = self.values[i][k] + self.values[k][j];
                    if direct > detour + METRIC_TOLERANCE {
                        return bad(format!("triangle inequality fails for ({i}, {j}) via {k}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Re-checks invariants, e.g. after deserializing.
    pub fn validate(&self) -> Result<()> {
        self.check()
    }

    pub fn task_names(&self) -> &[String] {
        &self.task_names
    }

    pub fn n_tasks(&self) -> usize {
        self.task_names.len()
    }

    pub fn n_models(&self) -> usize {
        self.n_models
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn index_of(&self, task: &str) -> Result<usize> {
        self.task_names
            .iter()
            .position(|t| t == task)
            .ok_or_else(|| Error::UnknownTask(task.to_string()))
    }

    pub fn between(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.values[self.index_of(a)?][self.index_of(b)?])
    }
}

/// Rankings of every task column using the default tie-break.
pub fn task_rankings(lb: &Leaderboard) -> Result<Vec<Permutation>> {
    (0..lb.n_tasks())
        .map(|j| ranking_from_scores(&lb.column(j), &TieBreak::ModelIndex))
        .collect()
}

/// Pairwise Vygotsky distances between all tasks of a normalized board.
pub fn distance_matrix(lb: &Leaderboard) -> Result<DistanceMatrix> {
    if !lb.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let perms = task_rankings(lb)?;
    let n = perms.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let w = vygotsky_weight(&perms[i], &perms[j])?;
            values[i][j] = w;
            values[j][i] = w;
        }
    }
    DistanceMatrix::new(lb.task_names().to_vec(), values, lb.n_models())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perm(r: &[usize]) -> Permutation {
        Permutation::new(r.to_vec()).unwrap()
    }

    fn brute_inversions(v: &[usize]) -> u64 {
        let mut c = 0;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                if v[i] > v[j] {
                    c += 1;
                }
            }
        }
        c
    }

    #[test]
    fn ranks_by_descending_score() {
        let p = ranking_from_scores(&[0.9, 0.7, 0.8], &TieBreak::default()).unwrap();
        assert_eq!(p.ranks(), &[0, 2, 1]);
    }

    #[test]
    fn ties_follow_model_index() {
        let p = ranking_from_scores(&[0.5, 0.5], &TieBreak::default()).unwrap();
        assert_eq!(p.ranks(), &[0, 1]);
        let p = ranking_from_scores(&[0.5, 0.5], &TieBreak::Priority(vec![1, 0])).unwrap();
        assert_eq!(p.ranks(), &[1, 0]);
    }

    #[test]
    fn ranking_errors() {
        let err = ranking_from_scores(&[0.3], &TieBreak::default()).unwrap_err();
        assert!(err.to_string().contains("need >= 2 models"));
        assert!(ranking_from_scores(&[0.3, f64::NAN], &TieBreak::default()).is_err());
    }

    #[test]
    fn permutation_rejects_non_bijection() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        assert!(Permutation::new(vec![0]).is_err());
    }

    #[test]
    fn inversion_examples() {
        assert_eq!(inversions(&perm(&[0, 1, 2])), 0);
        assert_eq!(inversions(&perm(&[2, 1, 0])), 3);
        let p = [1, 3, 0, 2];
        assert_eq!(brute_inversions(&p), 3);
        assert_eq!(inversions(&perm(&p)), 3);
    }

    #[test]
    fn weight_examples() {
        let a = perm(&[2, 0, 3, 1]);
        assert_eq!(vygotsky_weight(&a, &a).unwrap(), 0.0);
        assert_eq!(
            vygotsky_weight(&perm(&[0, 1, 2, 3]), &perm(&[3, 2, 1, 0])).unwrap(),
            1.0
        );
        // one discordant pair (models 0 and 1) out of three
        let w = vygotsky_weight(&perm(&[0, 1, 2]), &perm(&[1, 0, 2])).unwrap();
        assert!((w - 1.0 / 3.0).abs() < 1e-15);
        assert!(vygotsky_weight(&perm(&[0, 1]), &perm(&[0, 1, 2])).is_err());
    }

    fn board(cols: &[&[f64]]) -> Leaderboard {
        let n = cols[0].len();
        let scores = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        Leaderboard::new(
            (0..n).map(|i| format!("m{i}")).collect(),
            (0..cols.len()).map(|j| format!("t{j}")).collect(),
            scores,
            vec!["score".into(); cols.len()],
        )
        .unwrap()
        .assume_normalized()
        .unwrap()
    }

    #[test]
    fn matrix_of_identical_columns() {
        let lb = board(&[&[0.1, 0.5, 0.3], &[0.1, 0.5, 0.3], &[0.9, 0.5, 0.3]]);
        let dm = distance_matrix(&lb).unwrap();
        assert_eq!(dm.get(0, 1), 0.0);
        assert!((0..3).all(|i| dm.get(i, i) == 0.0));
    }

    #[test]
    fn matrix_matches_pairwise_brute_force() {
        let cols: [&[f64]; 3] = [
            &[0.9, 0.2, 0.5, 0.7],
            &[0.1, 0.8, 0.4, 0.6],
            &[0.6, 0.3, 0.9, 0.2],
        ];
        let dm = distance_matrix(&board(&cols)).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let mut disc = 0;
                for i in 0..4 {
                    for j in i + 1..4 {
                        if (cols[a][i] - cols[a][j]) * (cols[b][i] - cols[b][j]) < 0.0 {
                            disc += 1;
                        }
                    }
                }
                assert!((dm.get(a, b) - disc as f64 / 6.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn matrix_requires_normalized_board() {
        let lb = Leaderboard::new(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec!["s".into(); 2],
        )
        .unwrap();
        assert_eq!(distance_matrix(&lb), Err(Error::NotNormalized));
    }

    #[test]
    fn json_shape() {
        let dm = DistanceMatrix::new(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 1.0 / 3.0], vec![1.0 / 3.0, 0.0]],
            3,
        )
        .unwrap();
        let s = crate::numfmt::canonical_json(&dm).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["tasks"][1], "b");
        assert_eq!(v["n_models"], 3);
        assert_eq!(v["matrix"][0][1].as_f64().unwrap(), 0.333333333333);
        let back: DistanceMatrix = serde_json::from_str(&s).unwrap();
        back.validate().unwrap();
    }

    #[test]
    fn rejects_non_metric_matrix() {
        let bad = DistanceMatrix::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![
                vec![0.0, 0.1, 0.9],
                vec![0.1, 0.0, 0.1],
                vec![0.9, 0.1, 0.0],
            ],
            4,
        );
        assert!(matches!(bad, Err(Error::InvalidDistanceMatrix(_))));
    }

    fn arb_perm(max_n: usize) -> impl Strategy<Value = Vec<usize>> {
        (2..=max_n).prop_flat_map(|n| Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    }

    proptest! {
        #[test]
        fn merge_count_matches_definition(v in arb_perm(60)) {
            prop_assert_eq!(inversions(&Permutation::new(v.clone()).unwrap()), brute_inversions(&v));
        }

        #[test]
        fn weight_is_discordant_pair_count(
            (a, b) in (2usize..20).prop_flat_map(|n| {
                let base: Vec<usize> = (0..n).collect();
                (Just(base.clone()).prop_shuffle(), Just(base).prop_shuffle())
            })
        ) {
            let n = a.len();
            let mut disc = 0u64;
            for x in 0..n {
                for y in 0..n {
                    if a[x] < a[y] && b[y] < b[x] {
                        disc += 1;
                    }
                }
            }
            let pa = Permutation::new(a).unwrap();
            let pb = Permutation::new(b).unwrap();
            prop_assert_eq!(discordant_pairs(&pa, &pb).unwrap(), disc);
            prop_assert_eq!(discordant_pairs(&pb, &pa).unwrap(), disc);
        }
    }
}
