//! Posterior weight vectors over coin intervals.
//!
//! The Bayesian learner keeps one positive weight per interval between
//! consecutive candidate coins and needs four operations per round: prefix-sum
//! quantile lookup, single prefix sum, range multiply, and point assignment.
//! [`DenseWeights`] is the plain-array reference (O(K) per round);
//! [`TreeWeights`] backs the same interface with a lazy segment tree so every
//! round costs O(log K), which is what makes million-coin domains practical.

pub trait PosteriorWeights {
    /// Number of intervals K.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of all weights.
    fn total(&self) -> f64;

    /// `W(i)`: sum of the first `i` weights (1-based; `W(0) = 0`).
    fn prefix_sum(&self, i: usize) -> f64;

    /// `w(i)` for `1 <= i <= K`.
    fn weight(&self, i: usize) -> f64;

    /// Smallest `i` with `W(i) >= q`. `q` must lie in `(0, total]`; callers
    /// pass quantiles of a normalized vector so `i = K` is always feasible.
    fn quantile_index(&self, q: f64) -> usize;

    /// Multiplies `w(l..=r)` by `d` (1-based, inclusive; no-op when `l > r`).
    fn mul_range(&mut self, l: usize, r: usize, d: f64);

    /// Sets `w(i) = v`.
    fn set(&mut self, i: usize, v: f64);
}

// ---------------------------------------------------------------------------
// Dense reference
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DenseWeights {
    w: Vec<f64>,
}

impl DenseWeights {
    pub fn uniform(k: usize) -> Self {
        Self {
            w: vec![1.0 / k as f64; k],
        }
    }
}

impl PosteriorWeights for DenseWeights {
    fn len(&self) -> usize {
        self.w.len()
    }

    fn total(&self) -> f64 {
        self.w.iter().sum()
    }

    fn prefix_sum(&self, i: usize) -> f64 {
        self.w[..i].iter().sum()
    }

    fn weight(&self, i: usize) -> f64 {
        self.w[i - 1]
    }

    fn quantile_index(&self, q: f64) -> usize {
        let mut acc = 0.0;
        for (i, &w) in self.w.iter().enumerate() {
            acc += w;
            if acc >= q {
                return i + 1;
            }
        }
        self.w.len()
    }

    fn mul_range(&mut self, l: usize, r: usize, d: f64) {
        if l > r {
            return;
        }
        for w in &mut self.w[l - 1..r] {
            *w *= d;
        }
    }

    fn set(&mut self, i: usize, v: f64) {
        self.w[i - 1] = v;
    }
}

// ---------------------------------------------------------------------------
// Lazy segment tree
// ---------------------------------------------------------------------------

/// Segment tree with subtree sums and pending multiplicative tags.
#[derive(Debug, Clone)]
pub struct TreeWeights {
    k: usize,
    /// Padded leaf count (power of two).
    size: usize,
    sum: Vec<f64>,
    lazy: Vec<f64>,
}

impl TreeWeights {
    pub fn uniform(k: usize) -> Self {
        let size = k.next_power_of_two();
        let mut t = Self {
            k,
            size,
            sum: vec![0.0; 2 * size],
            lazy: vec![1.0; 2 * size],
        };
        let w = 1.0 / k as f64;
        for i in 0..k {
            t.sum[size + i] = w;
        }
        for node in (1..size).rev() {
            t.sum[node] = t.sum[2 * node] + t.sum[2 * node + 1];
        }
        t
    }

    fn apply(&mut self, node: usize, d: f64) {
        self.sum[node] *= d;
        if node < self.size {
            self.lazy[node] *= d;
        }
    }

    fn push(&mut self, node: usize) {
        let d = self.lazy[node];
        if d != 1.0 {
            self.apply(2 * node, d);
            self.apply(2 * node + 1, d);
            self.lazy[node] = 1.0;
        }
    }

    fn mul_rec(&mut self, node: usize, nl: usize, nr: usize, l: usize, r: usize, d: f64) {
        if r < nl || nr < l {
            return;
        }
        if l <= nl && nr <= r {
            self.apply(node, d);
            return;
        }
        self.push(node);
        let mid = (nl + nr) / 2;
        self.mul_rec(2 * node, nl, mid, l, r, d);
        self.mul_rec(2 * node + 1, mid + 1, nr, l, r, d);
        self.sum[node] = self.sum[2 * node] + self.sum[2 * node + 1];
    }

    fn prefix_rec(&self, node: usize, nl: usize, nr: usize, r: usize, pending: f64) -> f64 {
        if nr <= r {
            return self.sum[node] * pending;
        }
        let mid = (nl + nr) / 2;
        let pending = pending * self.lazy[node];
        let mut acc = self.prefix_rec(2 * node, nl, mid, r, pending);
        if r > mid {
            acc += self.prefix_rec(2 * node + 1, mid + 1, nr, r, pending);
        }
        acc
    }
}

impl PosteriorWeights for TreeWeights {
    fn len(&self) -> usize {
        self.k
    }

    fn total(&self) -> f64 {
        self.sum[1]
    }

    fn prefix_sum(&self, i: usize) -> f64 {
        if i == 0 {
            return 0.0;
        }
        self.prefix_rec(1, 0, self.size - 1, i - 1, 1.0)
    }

    fn weight(&self, i: usize) -> f64 {
        let mut node = 1;
        let (mut nl, mut nr) = (0, self.size - 1);
        let target = i - 1;
        let mut pending = 1.0;
        while node < self.size {
            pending *= self.lazy[node];
            let mid = (nl + nr) / 2;
            if target <= mid {
                node = 2 * node;
                nr = mid;
            } else {
                node = 2 * node + 1;
                nl = mid + 1;
            }
        }
        self.sum[node] * pending
    }

    fn quantile_index(&self, q: f64) -> usize {
        // Descend toward the leftmost leaf where the running prefix reaches q.
        // A child's own tag is already folded into its sum by apply(), so the
        // true subtree total only needs the ancestors' pending multipliers.
        let mut node = 1;
        let mut need = q;
        let mut pending = 1.0;
        while node < self.size {
            pending *= self.lazy[node];
            let left = self.sum[2 * node] * pending;
            if left >= need {
                node = 2 * node;
            } else {
                need -= left;
                node = 2 * node + 1;
            }
        }
        (node - self.size + 1).min(self.k)
    }

    fn mul_range(&mut self, l: usize, r: usize, d: f64) {
        if l > r {
            return;
        }
        self.mul_rec(1, 0, self.size - 1, l - 1, r - 1, d);
    }

    fn set(&mut self, i: usize, v: f64) {
        // Push tags down the path, assign the leaf, pull sums back up.
        let target = i - 1;
        let mut path = Vec::with_capacity(32);
        let mut node = 1;
        let (mut nl, mut nr) = (0, self.size - 1);
        while node < self.size {
            path.push(node);
            self.push(node);
            let mid = (nl + nr) / 2;
            if target <= mid {
                node = 2 * node;
                nr = mid;
            } else {
                node = 2 * node + 1;
                nl = mid + 1;
            }
        }
        self.sum[node] = v;
        for &p in path.iter().rev() {
            self.sum[p] = self.sum[2 * p] + self.sum[2 * p + 1];
        }
    }
}
