//! Miss-ranked pair counting in `O(N log N)`.
//!
//! For ordered pairs `(j, k)` let `a = p_j < p_k` and `b = y_j < y_k`. Then
//! `a XOR b = a + b - 2ab`, so the loss is `A + B - 2C` where `A` and `B`
//! count strictly increasing pairs in each ordering and `C` counts pairs
//! increasing in both. `C` is a two-dimensional dominance count computed
//! with a Fenwick tree over the ranks of `y`.

/// Number of ordered pairs whose predicted order disagrees with the
/// observed order.
pub fn ranking_loss(preds: &[f64], ys: &[f64]) -> u64 {
    weighted_ranking_loss(preds, ys, &vec![1; ys.len()])
}

/// [`ranking_loss`] where point `i` appears `weights[i]` times, i.e. the
/// loss restricted to the pairs of a resampled index multiset.
pub fn weighted_ranking_loss(preds: &[f64], ys: &[f64], weights: &[u64]) -> u64 {
    assert!(preds.len() == ys.len() && ys.len() == weights.len());
    let n = ys.len();
    if n < 2 {
        return 0;
    }
    let a = increasing_pairs(preds, weights);
    let b = increasing_pairs(ys, weights);

    let ranks = dense_ranks(ys);
    let mut by_pred: Vec<usize> = (0..n).collect();
    by_pred.sort_by(|&i, &j| preds[i].total_cmp(&preds[j]));

    let mut tree = Fenwick::new(n);
    let mut c = 0u64;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && preds[by_pred[end]] == preds[by_pred[start]] {
            end += 1;
        }
        for &k in &by_pred[start..end] {
            c += weights[k] * tree.prefix(ranks[k]);
        }
        for &k in &by_pred[start..end] {
            tree.add(ranks[k], weights[k]);
        }
        start = end;
    }
    a + b - 2 * c
}

/// Weighted count of ordered pairs `(j, k)` with `v_j < v_k`.
fn increasing_pairs(values: &[f64], weights: &[u64]) -> u64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut below = 0u64;
    let mut total = 0u64;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let group: u64 = idx[start..end].iter().map(|&i| weights[i]).sum();
        total += group * below;
        below += group;
        start = end;
    }
    total
}

/// 0-based dense ranks; equal values share a rank.
fn dense_ranks(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0; values.len()];
    let mut rank = 0;
    for w in 0..idx.len() {
        if w > 0 && values[idx[w]] != values[idx[w - 1]] {
            rank += 1;
        }
        ranks[idx[w]] = rank;
    }
    ranks
}

struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, rank: usize, w: u64) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            self.tree[i] += w;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of weights with rank strictly below `rank`.
    fn prefix(&self, rank: usize) -> u64 {
        let mut i = rank;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}
