/// Binary indexed tree over `u64` counts, 0-based positions.
#[derive(Debug, Clone)]
pub(crate) struct Fenwick {
    tree: Vec<u64>,
    total: u64,
}

impl Fenwick {
    pub fn new(n: usize) -> Self {
        Self {
            tree: vec![0; n + 1],
            total: 0,
        }
    }

    pub fn add(&mut self, pos: usize, by: u64) {
        self.total += by;
        let mut i = pos + 1;
        while i < self.tree.len() {
            self.tree[i] += by;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum over positions `< end`.
    pub fn prefix(&self, end: usize) -> u64 {
        let mut i = end;
        let mut s = 0;
        while i > 0 {
            s += self.tree[i];
            i &= i - 1;
        }
        s
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `(below, at, above)` counts relative to `pos`.
    pub fn split_at(&self, pos: usize) -> (u64, u64, u64) {
        let below = self.prefix(pos);
        let through = self.prefix(pos + 1);
        (below, through - below, self.total - through)
    }
}
