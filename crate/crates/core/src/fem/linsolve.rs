//! Linear solvers for the Newton step, selectable by name.
//!
//! * `direct-sparse`: reverse Cuthill–McKee reordering followed by an
//!   envelope (skyline) LDLᵀ factorization. Deterministic to the bit.
//! * `conjugate-gradient`: Jacobi-preconditioned CG, stopping at a
//!   relative residual.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use super::FemError;
use crate::registry::Registry;

pub trait LinearSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// Solves `A x = b` for symmetric `A`. `tolerance` is the relative
    /// residual target for iterative methods.
    fn solve(&self, a: &CsrMatrix, b: &[f64], tolerance: f64) -> Result<Vec<f64>, FemError>;
}

pub fn builtin() -> Registry<dyn LinearSolver> {
    let mut reg: Registry<dyn LinearSolver> = Registry::new("linear solver");
    reg.register("direct-sparse", || Box::new(SkylineLdlt));
    reg.register("conjugate-gradient", || Box::new(ConjugateGradient::default()));
    reg
}

/// Reverse Cuthill–McKee ordering of the matrix graph. Returns `perm` with
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| (degree[i], i))
            .expect("unvisited node exists");
        let start = pseudo_peripheral(&adj, &degree, seed);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Repeated BFS to the farthest low-degree node.
fn pseudo_peripheral(adj: &[Vec<usize>], degree: &[usize], seed: usize) -> usize {
    let mut current = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let dist = bfs_levels(adj, current);
        let far = dist.iter().copied().filter(|&d| d != usize::MAX).max().unwrap_or(0);
        if far <= ecc && current != seed {
            break;
        }
        ecc = far;
        let candidate = (0..adj.len())
            .filter(|&i| dist[i] == far)
            .min_by_key(|&i| (degree[i], i))
            .expect("farthest level non-empty");
        if candidate == current {
            break;
        }
        current = candidate;
    }
    current
}

fn bfs_levels(adj: &[Vec<usize>], start: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &u in &adj[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    dist
}

/// Envelope LDLᵀ on an RCM-permuted matrix.
#[derive(Debug, Default, Clone, Copy)]
pub struct SkylineLdlt;

impl LinearSolver for SkylineLdlt {
    fn name(&self) -> &'static str {
        "direct-sparse"
    }

    fn solve(&self, a: &CsrMatrix, b: &[f64], _tolerance: f64) -> Result<Vec<f64>, FemError> {
        let n = a.n();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }

        // Row i of the lower triangle spans columns first[i]..=i.
        let mut first: Vec<usize> = (0..n).collect();
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, _) in a.row(old_i) {
                let j = inv[old_j];
                if j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut env = vec![0.0; start[n]];
        for old_i in 0..n {
            let i = inv[old_i];
            for (old_j, v) in a.row(old_i) {
                let j = inv[old_j];
                if j <= i {
                    env[start[i] + j - first[i]] += v;
                }
            }
        }

        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let fi = first[i];
            let (done, rest) = env.split_at_mut(start[i]);
            let row_i = &mut rest[..i - fi + 1];
            // g_ij = L_ij D_j, built left to right.
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &done[start[j]..start[j + 1]];
                let mut s = row_i[j - fi];
                for k in k0..j {
                    s -= row_i[k - fi] * row_j[k - fj];
                }
                row_i[j - fi] = s;
            }
            let mut d = row_i[i - fi];
            for j in fi..i {
                let g = row_i[j - fi];
                let l = g / diag[j];
                d -= g * l;
                row_i[j - fi] = l;
            }
            if !d.is_finite() || d.abs() <= 1e-14 * scale {
                return Err(FemError::SingularSystem(format!("zero pivot at reordered row {i}")));
            }
            row_i[i - fi] = 1.0;
            diag[i] = d;
        }

        let mut y: Vec<f64> = perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = first[i];
            let row = &env[start[i]..start[i + 1]];
            let mut s = y[i];
            for j in fi..i {
                s -= row[j - fi] * y[j];
            }
            y[i] = s;
        }
        for i in 0..n {
            y[i] /= diag[i];
        }
        for i in (0..n).rev() {
            let fi = first[i];
            let row = &env[start[i]..start[i + 1]];
            let yi = y[i];
            for j in fi..i {
                y[j] -= row[j - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConjugateGradient {
    pub max_iterations: Option<usize>,
}

impl LinearSolver for ConjugateGradient {
    fn name(&self) -> &'static str {
        "conjugate-gradient"
    }

    fn solve(&self, a: &CsrMatrix, b: &[f64], tolerance: f64) -> Result<Vec<f64>, FemError> {
        let n = a.n();
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let inv_diag: Vec<f64> = a
            .diagonal()
            .iter()
            .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
            .collect();
        let b_norm = dot(b, b).sqrt();
        let mut x = vec![0.0; n];
        if b_norm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        let limit = self.max_iterations.unwrap_or(10 * n.max(10));
        for _ in 0..limit {
            a.mul_vec_into(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 || !pap.is_finite() {
                return Err(FemError::SingularSystem(
                    "matrix is not positive definite along a search direction".into(),
                ));
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if dot(&r, &r).sqrt() <= tolerance * b_norm {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(FemError::SingularSystem(format!(
            "conjugate gradient did not reach relative residual {tolerance} in {limit} iterations"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::super::sparse::TripletBuilder;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// 1D Laplacian plus random symmetric coupling, diagonally dominant.
    fn spd(n: usize, seed: u64) -> CsrMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 4.0);
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
                b.add(i + 1, i, -1.0);
            }
        }
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                let v = rng.random_range(-0.5..0.5);
                b.add(i, j, v);
                b.add(j, i, v);
                b.add(i, i, 1.0);
                b.add(j, j, 1.0);
            }
        }
        b.build()
    }

    fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
        a.mul_vec(x)
            .iter()
            .zip(b)
            .map(|(ax, b)| (ax - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn both_solvers_agree() {
        let a = spd(60, 3);
        let b: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let reg = builtin();
        let xd = reg.create("direct-sparse").unwrap().solve(&a, &b, 0.0).unwrap();
        let xc = reg.create("conjugate-gradient").unwrap().solve(&a, &b, 1e-12).unwrap();
        assert!(residual(&a, &xd, &b) < 1e-12);
        assert!(residual(&a, &xc, &b) < 1e-10);
        for (d, c) in xd.iter().zip(&xc) {
            assert!((d - c).abs() < 1e-9);
        }
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = spd(40, 9);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(0, 1, 1.0);
        b.add(1, 0, 1.0);
        b.add(1, 1, 1.0);
        let a = b.build();
        assert!(matches!(
            SkylineLdlt.solve(&a, &[1.0, 1.0], 0.0),
            Err(FemError::SingularSystem(_))
        ));
    }

    #[test]
    fn indefinite_but_nonsingular_direct_solve() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(1, 1, -2.0);
        let x = SkylineLdlt.solve(&b.build(), &[1.0, 1.0], 0.0).unwrap();
        assert_eq!(x, vec![1.0, -0.5]);
    }
}
