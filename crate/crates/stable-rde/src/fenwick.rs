//! Fenwick (binary indexed) tree over nonnegative integer weights, with
//! prefix-sum selection. Drives the O(log k) weighted picks in the growth
//! chain and the restaurant process.

#[derive(Clone, Debug, Default)]
pub(crate) struct Fenwick {
    /// 1-based implicit binary indexed tree.
    tree: Vec<u64>,
    total: u64,
}

impl Fenwick {
    pub fn new() -> Self {
        Fenwick { tree: Vec::new(), total: 0 }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Appends a new position holding weight `w`.
    pub fn push(&mut self, w: u64) {
        // slot j (1-based) covers the range (j - lowbit(j), j]; seed it with
        // the sum over the already-present part of that range
        let j = self.tree.len() + 1;
        let stop = j - (j & j.wrapping_neg());
        let mut init = 0;
        let mut k = j - 1;
        while k > stop {
            init += self.tree[k - 1];
            k -= k & k.wrapping_neg();
        }
        self.tree.push(init + w);
        self.total += w;
    }

    /// Adds `delta` to the weight at position `i` (0-based).
    pub fn add(&mut self, i: usize, delta: u64) {
        self.total += delta;
        let mut j = i + 1;
        while j <= self.tree.len() {
            self.tree[j - 1] += delta;
            j += j & j.wrapping_neg();
        }
    }

    /// Index of the k-th unit of weight (0-based, `k < total`): the smallest
    /// position whose inclusive prefix sum exceeds `k`.
    pub fn select(&self, k: u64) -> usize {
        debug_assert!(k < self.total, "select past total weight");
        let mut pos = 0usize; // 1-based prefix position already accounted for
        let mut rem = k;
        let mut step = self.tree.len().next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= self.tree.len() && self.tree[next - 1] <= rem {
                rem -= self.tree[next - 1];
                pos = next;
            }
            step >>= 1;
        }
        pos // first index with prefix > k, as 0-based position
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_matches_linear_scan() {
        let weights = [3u64, 0, 5, 1, 0, 2];
        let mut f = Fenwick::new();
        for &w in &weights {
            f.push(w);
        }
        assert_eq!(f.total(), 11);
        let mut expect = Vec::new();
        for (i, &w) in weights.iter().enumerate() {
            for _ in 0..w {
                expect.push(i);
            }
        }
        for (k, &e) in expect.iter().enumerate() {
            assert_eq!(f.select(k as u64), e, "unit {k}");
        }
    }

    #[test]
    fn add_shifts_selection() {
        let mut f = Fenwick::new();
        f.push(1);
        f.push(1);
        f.add(0, 3);
        assert_eq!(f.total(), 5);
        assert_eq!(f.select(3), 0);
        assert_eq!(f.select(4), 1);
    }
}
