//! Minimal sparse symmetric kernel used by the operator assembly and the
//! eigensolver: triplet accumulation into CSR, reverse Cuthill-McKee
//! ordering, and an envelope (skyline) Cholesky factorization.
//!
//! Everything here is deterministic: assembly accumulates in a fixed order
//! and the factorization is a direct method.

/// Symmetric sparse matrix in CSR layout; both triangles are stored so the
/// matvec is a plain row sweep.
#[derive(Debug, Clone)]
pub struct SymCsr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SymCsr {
    /// Builds from unsorted triplets, summing duplicates. Only entries with
    /// `row <= col` need to be supplied for a symmetric matrix when
    /// `mirror` is set; the transpose entries are filled in.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)], mirror: bool) -> SymCsr {
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len() * 2);
        for &(r, c, v) in triplets {
            entries.push((r, c, v));
            if mirror && r != c {
                entries.push((c, r, v));
            }
        }
        entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_counts = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_counts[r + 1] += 1;
                last = Some((r, c));
            }
        }
        let mut row_ptr = row_counts;
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        SymCsr {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn quadratic_form(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.n {
            let mut row = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.values[k] * y[self.col_idx[k]];
            }
            acc += x[r] * row;
        }
        acc
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        for k in self.row_ptr[r]..self.row_ptr[r + 1] {
            if self.col_idx[k] == c {
                return self.values[k];
            }
        }
        0.0
    }

    /// Sum of all entries.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Row sums (for the constants-in-kernel check on stiffness matrices).
    pub fn row_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.n];
        let mut out = vec![0.0; self.n];
        self.mul_vec(&ones, &mut out);
        out
    }

    /// A + s * B over the union sparsity pattern.
    pub fn add_scaled(&self, other: &SymCsr, s: f64) -> SymCsr {
        assert_eq!(self.n, other.n);
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((r, self.col_idx[k], self.values[k]));
            }
            for k in other.row_ptr[r]..other.row_ptr[r + 1] {
                triplets.push((r, other.col_idx[k], s * other.values[k]));
            }
        }
        SymCsr::from_triplets(self.n, &triplets, false)
    }
}

/// Reverse Cuthill-McKee ordering of the matrix graph. Returns `perm` where
/// `perm[new] = old`; ties and component seeds are resolved by vertex index,
/// so the ordering is deterministic.
pub fn reverse_cuthill_mckee(a: &SymCsr) -> Vec<usize> {
    let n = a.n;
    let degree: Vec<usize> = (0..n).map(|r| a.row_ptr[r + 1] - a.row_ptr[r]).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = std::collections::VecDeque::new();

    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.sort_unstable_by_key(|&v| (degree[v], v));

    for &seed in &seeds {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        queue.push_back(seed);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut neighbors: Vec<usize> = (a.row_ptr[v]..a.row_ptr[v + 1])
                .map(|k| a.col_idx[k])
                .filter(|&u| u != v && !visited[u])
                .collect();
            neighbors.sort_unstable_by_key(|&u| (degree[u], u));
            for u in neighbors {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Applies a symmetric permutation: `out[new_r][new_c] = a[perm[new_r]][perm[new_c]]`.
pub fn permute_symmetric(a: &SymCsr, perm: &[usize]) -> SymCsr {
    let n = a.n;
    let mut inv = vec![0usize; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut triplets = Vec::with_capacity(a.nnz());
    for r in 0..n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            triplets.push((inv[r], inv[a.col_idx[k]], a.values[k]));
        }
    }
    SymCsr::from_triplets(n, &triplets, false)
}

/// Envelope Cholesky factor of a symmetric positive definite matrix.
/// Rows store the lower triangle from the first structural nonzero to the
/// diagonal; fill-in stays inside the envelope, which RCM keeps tight.
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    offsets: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
#[error("matrix is not positive definite at pivot {pivot} (value {value:.3e})")]
pub struct NotPositiveDefinite {
    pub pivot: usize,
    pub value: f64,
}

impl SkylineCholesky {
    pub fn factor(a: &SymCsr) -> Result<SkylineCholesky, NotPositiveDefinite> {
        let n = a.n;
        let mut first = vec![0usize; n];
        for r in 0..n {
            let mut f = r;
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col_idx[k];
                if c < f {
                    f = c;
                }
            }
            first[r] = f;
        }
        let mut offsets = vec![0usize; n + 1];
        for r in 0..n {
            offsets[r + 1] = offsets[r] + (r - first[r] + 1);
        }
        let mut data = vec![0.0; offsets[n]];
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let c = a.col_idx[k];
                if c <= r {
                    data[offsets[r] + (c - first[r])] = a.values[k];
                }
            }
        }

        // in-place factorization; L[r][c] lives at data[offsets[r] + c - first[r]]
        for r in 0..n {
            let fr = first[r];
            for c in fr..r {
                let fc = first[c];
                let lo = fr.max(fc);
                let mut sum = data[offsets[r] + (c - fr)];
                for k in lo..c {
                    sum -= data[offsets[r] + (k - fr)] * data[offsets[c] + (k - fc)];
                }
                let pivot = data[offsets[c] + (c - fc)];
                data[offsets[r] + (c - fr)] = sum / pivot;
            }
            let mut diag = data[offsets[r] + (r - fr)];
            for k in fr..r {
                let l = data[offsets[r] + (k - fr)];
                diag -= l * l;
            }
            if !(diag > 0.0) {
                return Err(NotPositiveDefinite {
                    pivot: r,
                    value: diag,
                });
            }
            data[offsets[r] + (r - fr)] = diag.sqrt();
        }

        Ok(SkylineCholesky {
            n,
            first,
            offsets,
            data,
        })
    }

    /// Solves L L^T x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.n);
        for r in 0..self.n {
            let fr = self.first[r];
            let mut sum = b[r];
            for k in fr..r {
                sum -= self.data[self.offsets[r] + (k - fr)] * b[k];
            }
            b[r] = sum / self.data[self.offsets[r] + (r - fr)];
        }
        for r in (0..self.n).rev() {
            let fr = self.first[r];
            let x = b[r] / self.data[self.offsets[r] + (r - fr)];
            b[r] = x;
            for k in fr..r {
                b[k] -= self.data[self.offsets[r] + (k - fr)] * x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> (SymCsr, nalgebra::DMatrix<f64>) {
        // banded random SPD: diagonally dominant
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(3)..i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                dense[(i, j)] = v;
                dense[(j, i)] = v;
                triplets.push((i, j, v));
                triplets.push((j, i, v));
            }
            let d: f64 = 8.0 + rng.gen_range(0.0..1.0);
            dense[(i, i)] = d;
            triplets.push((i, i, d));
        }
        (SymCsr::from_triplets(n, &triplets, false), dense)
    }

    #[test]
    fn csr_matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, dense) = random_spd(25, &mut rng);
        let x: Vec<f64> = (0..25).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; 25];
        a.mul_vec(&x, &mut y);
        let xd = nalgebra::DVector::from_column_slice(&x);
        let yd = &dense * xd;
        for i in 0..25 {
            assert!((y[i] - yd[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn from_triplets_sums_duplicates() {
        let a = SymCsr::from_triplets(2, &[(0, 1, 1.0), (0, 1, 2.5), (1, 1, 1.0)], false);
        assert_eq!(a.get(0, 1), 3.5);
        assert_eq!(a.get(1, 1), 1.0);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn skyline_solves_against_dense_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (a, dense) = random_spd(40, &mut rng);
        let chol = SkylineCholesky::factor(&a).unwrap();
        let b: Vec<f64> = (0..40).map(|i| (i as f64 * 0.11).cos()).collect();
        let mut x = b.clone();
        chol.solve_in_place(&mut x);
        let xd = dense
            .clone()
            .cholesky()
            .unwrap()
            .solve(&nalgebra::DVector::from_column_slice(&b));
        for i in 0..40 {
            assert!((x[i] - xd[i]).abs() < 1e-10, "mismatch at {i}");
        }
    }

    #[test]
    fn skyline_rejects_indefinite() {
        let a = SymCsr::from_triplets(2, &[(0, 0, 1.0), (1, 1, -1.0)], false);
        assert!(SkylineCholesky::factor(&a).is_err());
    }

    #[test]
    fn rcm_is_a_permutation_and_shrinks_envelope() {
        // an 8x8 grid graph under a scrambled numbering
        let side = 8;
        let n = side * side;
        let scramble: Vec<usize> = {
            let mut v: Vec<usize> = (0..n).collect();
            // fixed odd multiplier modulo n permutes the indices
            for (i, slot) in v.iter_mut().enumerate() {
                *slot = (i * 37 + 11) % n;
            }
            v
        };
        let mut triplets = Vec::new();
        for r in 0..side {
            for c in 0..side {
                let i = scramble[r * side + c];
                triplets.push((i, i, 4.0));
                if c + 1 < side {
                    let j = scramble[r * side + c + 1];
                    triplets.push((i, j, -1.0));
                    triplets.push((j, i, -1.0));
                }
                if r + 1 < side {
                    let j = scramble[(r + 1) * side + c];
                    triplets.push((i, j, -1.0));
                    triplets.push((j, i, -1.0));
                }
            }
        }
        let a = SymCsr::from_triplets(n, &triplets, false);
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());

        let envelope = |m: &SymCsr| -> usize {
            (0..m.n)
                .map(|r| {
                    let mut f = r;
                    for k in m.row_ptr[r]..m.row_ptr[r + 1] {
                        f = f.min(m.col_idx[k]);
                    }
                    r - f
                })
                .sum()
        };
        let permuted = permute_symmetric(&a, &perm);
        assert!(envelope(&permuted) < envelope(&a));
    }

    #[test]
    fn permute_round_trip_preserves_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, _) = random_spd(30, &mut rng);
        let perm = reverse_cuthill_mckee(&a);
        let p = permute_symmetric(&a, &perm);
        let x: Vec<f64> = (0..30).map(|i| (i as f64).sin()).collect();
        let px: Vec<f64> = perm.iter().map(|&old| x[old]).collect();
        let qa = a.quadratic_form(&x, &x);
        let qp = p.quadratic_form(&px, &px);
        assert!((qa - qp).abs() < 1e-10 * qa.abs().max(1.0));
    }
}
