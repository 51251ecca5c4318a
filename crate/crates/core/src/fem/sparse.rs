//! Compressed sparse row matrices assembled from triplets.

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

/// Triplet accumulator; duplicates are summed on conversion.
#[derive(Debug, Default, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        Self {
            n,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CsrMatrix {
        // Stable sort keeps summation order, and therefore results,
        // deterministic.
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; self.n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n: self.n,
            row_ptr,
            cols,
            values,
        }
    }
}

impl CsrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|A_ij − A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Adds `v` to the diagonal entry of row `i`, which must be stored.
    pub fn add_to_diagonal(&mut self, i: usize, v: f64) {
        let slot = self.row_ptr[i] + self.cols[self.row_ptr[i]..self.row_ptr[i + 1]].partition_point(|&c| c < i);
        assert!(self.cols.get(slot) == Some(&i), "diagonal ({i}, {i}) not stored");
        self.values[slot] += v;
    }

    /// Principal submatrix on `keep` (old index → new index, or `None`).
    pub fn restrict(&self, keep: &[Option<usize>], new_n: usize) -> CsrMatrix {
        let kept: Vec<usize> = keep.iter().flatten().copied().collect();
        if kept.windows(2).all(|w| w[0] < w[1]) {
            // Order-preserving: rows and columns stay sorted.
            let mut row_ptr = Vec::with_capacity(new_n + 1);
            let mut cols = Vec::with_capacity(self.nnz());
            let mut values = Vec::with_capacity(self.nnz());
            row_ptr.push(0);
            for i in 0..self.n {
                if keep[i].is_none() {
                    continue;
                }
                for (j, v) in self.row(i) {
                    if let Some(rj) = keep[j] {
                        cols.push(rj);
                        values.push(v);
                    }
                }
                row_ptr.push(cols.len());
            }
            return CsrMatrix {
                n: new_n,
                row_ptr,
                cols,
                values,
            };
        }
        let mut b = TripletBuilder::with_capacity(new_n, self.nnz());
        for i in 0..self.n {
            let Some(ri) = keep[i] else { continue };
            for (j, v) in self.row(i) {
                if let Some(rj) = keep[j] {
                    b.add(ri, rj, v);
                }
            }
        }
        b.build()
    }
}

/// Sparsity of a 3-DOF-per-node operator coupling every pair of nodes that
/// share an element, with direct slots for 3×3 block accumulation.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPattern {
    neighbors: Vec<Vec<usize>>,
    row_ptr: Vec<usize>,
}

impl BlockPattern {
    pub fn from_elements(num_nodes: usize, elements: &[[usize; 4]]) -> Self {
        let mut neighbors = vec![Vec::new(); num_nodes];
        for e in elements {
            for &a in e {
                neighbors[a].extend_from_slice(e);
            }
        }
        for (a, n) in neighbors.iter_mut().enumerate() {
            n.push(a);
            n.sort_unstable();
            n.dedup();
        }
        let mut row_ptr = Vec::with_capacity(3 * num_nodes + 1);
        row_ptr.push(0);
        for n in &neighbors {
            for _ in 0..3 {
                row_ptr.push(row_ptr.last().expect("non-empty") + 3 * n.len());
            }
        }
        Self { neighbors, row_ptr }
    }

    /// All-zero matrix with this pattern.
    pub fn zeros(&self) -> CsrMatrix {
        let nnz = *self.row_ptr.last().expect("non-empty");
        let mut cols = Vec::with_capacity(nnz);
        for n in &self.neighbors {
            for _ in 0..3 {
                for &c in n {
                    cols.extend([3 * c, 3 * c + 1, 3 * c + 2]);
                }
            }
        }
        CsrMatrix {
            n: 3 * self.neighbors.len(),
            row_ptr: self.row_ptr.clone(),
            cols,
            values: vec![0.0; nnz],
        }
    }

    /// Adds the 3×3 block `block[i][j]` at node rows `a`, node columns `c`.
    pub fn add_block(&self, m: &mut CsrMatrix, a: usize, c: usize, block: impl Fn(usize, usize) -> f64) {
        let k = self.neighbors[a]
            .binary_search(&c)
            .expect("node pair outside the pattern");
        for i in 0..3 {
            let base = self.row_ptr[3 * a + i] + 3 * k;
            for j in 0..3 {
                m.values[base + j] += block(i, j);
            }
        }
    }
}
