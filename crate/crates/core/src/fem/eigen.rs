//! Smallest eigenpairs of the generalized symmetric pencil (S, M).
//!
//! Contract: shift-invert iteration around sigma = -1e-8 (safe for the
//! positive semidefinite stiffness), residual tolerance 1e-9, iteration cap
//! 50 * p. Small problems are reduced to a dense solve through a Cholesky
//! factorization of the mass matrix; larger ones run M-Lanczos on
//! (S - sigma M)^-1 M with full reorthogonalization and deflation restarts,
//! which also recovers repeated eigenvalues one copy per restart.
//!
//! Determinism: start vectors come from a fixed counter-based stream, every
//! reduction is sequential, and ties in the sign convention resolve to the
//! lowest index.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::sparse::{permute_symmetric, reverse_cuthill_mckee, SkylineCholesky, SymCsr};
use crate::synth::rng::CounterRng;

pub const SHIFT: f64 = -1e-8;
pub const RESIDUAL_TOL: f64 = 1e-9;
pub const ITERATION_CAP_PER_PAIR: usize = 50;

const DENSE_LIMIT: usize = 600;
const MAX_KRYLOV_PER_SWEEP: usize = 420;

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Nondecreasing eigenvalues.
    pub values: Vec<f64>,
    /// Mass-orthonormal eigenvectors, one column per eigenvalue.
    pub vectors: DMatrix<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum EigenError {
    #[error("requested {requested} eigenpairs but the operator has only {dofs} dofs")]
    TooManyPairs { requested: usize, dofs: usize },
    #[error("eigensolver did not converge within {iterations} iterations (worst residual {residual:.3e})")]
    ConvergenceFailure { iterations: usize, residual: f64 },
    #[error("shifted operator is not positive definite: {0}")]
    IndefiniteShift(#[from] crate::sparse::NotPositiveDefinite),
}

/// Entry of largest magnitude made positive; ties by lowest index.
pub fn apply_sign_convention(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut best = 0;
        let mut best_abs = f64::NEG_INFINITY;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

pub fn solve_smallest(s: &SymCsr, m: &SymCsr, p: usize) -> Result<EigenPairs, EigenError> {
    let d = s.n;
    if p == 0 || p >= d {
        return Err(EigenError::TooManyPairs {
            requested: p,
            dofs: d,
        });
    }
    let mut pairs = if d <= DENSE_LIMIT || (d <= 2500 && p * 3 >= d) {
        solve_dense(s, m, p)?
    } else {
        solve_lanczos(s, m, p)?
    };
    apply_sign_convention(&mut pairs.vectors);
    Ok(pairs)
}

fn to_dense(a: &SymCsr) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.n, a.n);
    for r in 0..a.n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            out[(r, a.col_idx[k])] = a.values[k];
        }
    }
    out
}

fn solve_dense(s: &SymCsr, m: &SymCsr, p: usize) -> Result<EigenPairs, EigenError> {
    let d = s.n;
    let sd = to_dense(s);
    let md = to_dense(m);
    let chol = md
        .cholesky()
        .ok_or(EigenError::IndefiniteShift(crate::sparse::NotPositiveDefinite {
            pivot: 0,
            value: f64::NAN,
        }))?;
    let l = chol.l();
    // A = L^-1 S L^-T, symmetrized against rounding
    let y = l.solve_lower_triangular(&sd).expect("L is nonsingular");
    let a = l
        .solve_lower_triangular(&y.transpose())
        .expect("L is nonsingular");
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap()
            .then(i.cmp(&j))
    });

    let mut values = Vec::with_capacity(p);
    let mut vectors = DMatrix::zeros(d, p);
    let lt = l.transpose();
    for (k, &i) in order.iter().take(p).enumerate() {
        values.push(eig.eigenvalues[i]);
        let z = eig.eigenvectors.column(i).into_owned();
        let v = lt
            .solve_upper_triangular(&z)
            .expect("L^T is nonsingular");
        vectors.set_column(k, &v);
    }
    Ok(EigenPairs { values, vectors })
}

struct PencilScale {
    /// Fixed reference magnitude for residual normalization:
    /// trace(S)/trace(M), the mass-weighted mean eigenvalue of the pencil.
    /// Using one fixed scale keeps the acceptance bar identical between
    /// in-loop extraction and the final verification, and gives the zero
    /// mode a meaningful denominator.
    lambda_ref: f64,
}

impl PencilScale {
    fn of(s: &SymCsr, m: &SymCsr) -> PencilScale {
        let trace = |a: &SymCsr| -> f64 { (0..a.n).map(|i| a.get(i, i)).sum() };
        let ts = trace(s).abs();
        let tm = trace(m).abs().max(1e-300);
        PencilScale {
            lambda_ref: (ts / tm).max(1e-300),
        }
    }
}

fn residual_ok(
    s: &SymCsr,
    m: &SymCsr,
    lambda: f64,
    y: &DVector<f64>,
    scale: &PencilScale,
) -> (bool, f64) {
    let d = s.n;
    let mut sy = vec![0.0; d];
    let mut my = vec![0.0; d];
    s.mul_vec(y.as_slice(), &mut sy);
    m.mul_vec(y.as_slice(), &mut my);
    let mut r2 = 0.0;
    let mut sy2 = 0.0;
    let mut my2 = 0.0;
    for i in 0..d {
        let r = sy[i] - lambda * my[i];
        r2 += r * r;
        sy2 += sy[i] * sy[i];
        my2 += my[i] * my[i];
    }
    let rnorm = r2.sqrt();
    let denom = sy2
        .sqrt()
        .max(lambda.abs() * my2.sqrt())
        .max(scale.lambda_ref * my2.sqrt());
    (rnorm <= RESIDUAL_TOL * denom, rnorm / denom.max(1e-300))
}

fn solve_lanczos(s: &SymCsr, m: &SymCsr, p: usize) -> Result<EigenPairs, EigenError> {
    let d = s.n;
    let perm = reverse_cuthill_mckee(s);
    let sp = permute_symmetric(s, &perm);
    let mp = permute_symmetric(m, &perm);
    let shifted = sp.add_scaled(&mp, -SHIFT);
    let factor = SkylineCholesky::factor(&shifted)?;

    let m_apply = |x: &DVector<f64>| -> DVector<f64> {
        let mut out = vec![0.0; d];
        mp.mul_vec(x.as_slice(), &mut out);
        DVector::from_vec(out)
    };
    let op_apply = |x: &DVector<f64>| -> DVector<f64> {
        let mut w = m_apply(x);
        factor.solve_in_place(w.as_mut_slice());
        w
    };

    let mut rng = CounterRng::new(0x5BA5_1DEA_7E57_0001_u64 ^ d as u64);
    let scale = PencilScale::of(s, m);
    let mut locked_values: Vec<f64> = Vec::new();
    let mut locked_vecs = DMatrix::<f64>::zeros(d, 0);
    let budget = ITERATION_CAP_PER_PAIR * p;
    let mut steps_used = 0usize;
    let mut best_residual = f64::INFINITY;

    // Repeated eigenvalues surface one copy per Krylov run, so reaching p
    // locked pairs is not enough: deflated probe sweeps continue until a
    // full sweep finds nothing below the current p-th smallest value.
    let kth_smallest = |vals: &[f64], k: usize| -> f64 {
        let mut sorted = vals.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        sorted[k - 1]
    };
    let mut converged = false;

    'sweeps: while !converged && steps_used < budget {
        let bar = if locked_values.len() >= p {
            Some(kth_smallest(&locked_values, p))
        } else {
            None
        };
        let remaining = p.saturating_sub(locked_values.len());
        let cap = (2 * remaining + 30)
            .max(60)
            .min(MAX_KRYLOV_PER_SWEEP)
            .min(d - locked_values.len())
            .min(budget - steps_used)
            .max(1);

        // fresh start vector, deflated against everything locked
        let mut v = DVector::from_fn(d, |_, _| rng.next_symmetric());
        for _ in 0..2 {
            if locked_vecs.ncols() > 0 {
                let mv = m_apply(&v);
                let h = locked_vecs.tr_mul(&mv);
                v.gemv(-1.0, &locked_vecs, &h, 1.0);
            }
        }
        let mv = m_apply(&v);
        let nrm = v.dot(&mv).max(0.0).sqrt();
        if nrm < 1e-200 {
            steps_used += 1;
            continue 'sweeps;
        }
        v /= nrm;

        let mut vmat = DMatrix::<f64>::zeros(d, cap);
        vmat.set_column(0, &v);
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();

        let mut j = 0usize;
        loop {
            steps_used += 1;
            let vj = vmat.column(j).into_owned();
            let mut w = op_apply(&vj);
            if j > 0 {
                let prev = vmat.column(j - 1).into_owned();
                w.axpy(-betas[j - 1], &prev, 1.0);
            }
            let mw = m_apply(&w);
            let alpha = vj.dot(&mw);
            w.axpy(-alpha, &vj, 1.0);
            alphas.push(alpha);

            // two full reorthogonalization passes in the M inner product
            // against the locked block and the whole current basis; the
            // locked projection also purges the shift-amplified kernel
            // component that rounding reintroduces
            for _ in 0..2 {
                let mw = m_apply(&w);
                if locked_vecs.ncols() > 0 {
                    let h = locked_vecs.tr_mul(&mw);
                    w.gemv(-1.0, &locked_vecs, &h, 1.0);
                }
                let active = vmat.columns(0, j + 1);
                let h = active.tr_mul(&mw);
                w.gemv(-1.0, &active, &h, 1.0);
            }

            let mw = m_apply(&w);
            let beta = w.dot(&mw).max(0.0).sqrt();
            let alpha_scale = alphas.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let happy = beta <= 1e-13 * alpha_scale.max(1e-300);
            let grown = j + 1 >= cap;
            if !happy && !grown {
                betas.push(beta);
                vmat.set_column(j + 1, &(&w / beta));
            }

            let at_end = happy || grown || steps_used >= budget;
            let should_check =
                at_end || ((j + 1) % 25 == 0 && j + 1 >= remaining.min(20));
            if should_check {
                let (extracted, below_bar) = extract_converged(
                    s,
                    m,
                    &perm,
                    &vmat,
                    &alphas,
                    &betas,
                    &mut locked_values,
                    &mut locked_vecs,
                    p,
                    bar,
                    &m_apply,
                    &scale,
                    &mut best_residual,
                );
                if at_end && bar.is_some() && below_bar == 0 {
                    // a clean probe: nothing new enters the smallest p
                    converged = true;
                    break;
                }
                // restart after any extraction: purging converged pairs out
                // of the Krylov space keeps the tridiagonal well scaled once
                // the shift-amplified kernel mode is locked
                if extracted > 0 || at_end {
                    continue 'sweeps;
                }
            } else if at_end {
                continue 'sweeps;
            }
            j += 1;
        }
    }

    if locked_values.len() < p || !converged {
        return Err(EigenError::ConvergenceFailure {
            iterations: steps_used,
            residual: best_residual,
        });
    }

    let mut order: Vec<usize> = (0..locked_values.len()).collect();
    order.sort_by(|&a, &b| {
        locked_values[a]
            .partial_cmp(&locked_values[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    order.truncate(p);

    // final M-orthonormalization polish in ascending eigenvalue order
    let mut vectors = DMatrix::zeros(d, p);
    for (i, &src_col) in order.iter().enumerate() {
        let mut v = locked_vecs.column(src_col).into_owned();
        for prev in 0..i {
            let q = vectors.column(prev).into_owned();
            let h = q.dot(&m_apply(&v));
            v.axpy(-h, &q, 1.0);
        }
        let nrm = v.dot(&m_apply(&v)).max(0.0).sqrt();
        v /= nrm;
        vectors.set_column(i, &v);
    }

    // undo the RCM permutation: permuted index i corresponds to dof perm[i]
    let mut out = DMatrix::zeros(d, p);
    for i in 0..d {
        for c in 0..p {
            out[(perm[i], c)] = vectors[(i, c)];
        }
    }
    let values: Vec<f64> = order.iter().map(|&i| locked_values[i]).collect();

    // verify the spec tolerance on the original pencil
    let mut worst = 0.0f64;
    for c in 0..p {
        let y = out.column(c).into_owned();
        let (ok, r) = residual_ok(s, m, values[c], &y, &scale);
        worst = worst.max(r);
        if !ok {
            return Err(EigenError::ConvergenceFailure {
                iterations: steps_used,
                residual: worst,
            });
        }
    }

    Ok(EigenPairs {
        values,
        vectors: out,
    })
}

/// Ritz-extracts converged pairs from the current tridiagonal, locking them.
/// Returns how many new pairs were locked.
#[allow(clippy::too_many_arguments)]
fn extract_converged(
    s: &SymCsr,
    m: &SymCsr,
    perm: &[usize],
    vmat: &DMatrix<f64>,
    alphas: &[f64],
    betas: &[f64],
    locked_values: &mut Vec<f64>,
    locked_vecs: &mut DMatrix<f64>,
    p: usize,
    bar: Option<f64>,
    m_apply: &impl Fn(&DVector<f64>) -> DVector<f64>,
    scale: &PencilScale,
    best_residual: &mut f64,
) -> (usize, usize) {
    let j = alphas.len();
    if j == 0 {
        return (0, 0);
    }
    let mut t = DMatrix::zeros(j, j);
    for i in 0..j {
        t[(i, i)] = alphas[i];
        if i + 1 < j && i < betas.len() {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..j).collect();
    // descending theta = ascending lambda
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });

    let tail_beta = if betas.len() >= j { betas[j - 1] } else { 0.0 };
    let d = vmat.nrows();

    let basis = vmat.columns(0, j);
    let mut extracted = 0;
    let mut below_bar = 0;
    let take = p.saturating_sub(locked_values.len()) + 4;
    for &i in order.iter().take(take) {
        let theta = eig.eigenvalues[i];
        if theta <= 0.0 {
            continue;
        }
        // cheap trigger before paying for the direct residual
        let est = (tail_beta * eig.eigenvectors[(j - 1, i)]).abs();
        if est > 1e-8 * theta {
            continue;
        }
        let svec = eig.eigenvectors.column(i).into_owned();
        let mut y = DVector::zeros(d);
        y.gemv(1.0, &basis, &svec, 0.0);
        let my = m_apply(&y);
        let nrm = y.dot(&my).max(0.0).sqrt();
        if nrm < 1e-150 {
            continue;
        }
        let y = y / nrm;
        let my = my / nrm;
        // guard against re-extracting a locked direction
        let overlap = if locked_vecs.ncols() > 0 {
            locked_vecs
                .tr_mul(&my)
                .iter()
                .fold(0.0f64, |a, &h| a.max(h.abs()))
        } else {
            0.0
        };
        if overlap > 0.5 {
            continue;
        }
        let lambda = SHIFT + 1.0 / theta;

        // direct residual on the original pencil (unpermuted)
        let mut y_orig = DVector::zeros(d);
        for r in 0..d {
            y_orig[perm[r]] = y[r];
        }
        let (ok, r) = residual_ok(s, m, lambda, &y_orig, scale);
        *best_residual = best_residual.min(r);
        if ok {
            locked_values.push(lambda);
            let old = locked_vecs.clone();
            *locked_vecs = DMatrix::zeros(d, old.ncols() + 1);
            locked_vecs.columns_mut(0, old.ncols()).copy_from(&old);
            locked_vecs.set_column(old.ncols(), &y);
            extracted += 1;
            if bar.is_none_or(|b| lambda < b * (1.0 - 1e-9)) {
                below_bar += 1;
            }
        }
    }
    (extracted, below_bar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> (SymCsr, SymCsr) {
        // P1 interval FEM pencil on [0,1]: zero mode plus Neumann modes.
        let mut st = Vec::new();
        let mut mt = Vec::new();
        let h = 1.0 / (n as f64 - 1.0);
        for i in 0..n {
            let mut diag = 0.0;
            if i > 0 {
                st.push((i, i - 1, -1.0 / h));
                diag += 1.0 / h;
            }
            if i + 1 < n {
                st.push((i, i + 1, -1.0 / h));
                diag += 1.0 / h;
            }
            st.push((i, i, diag));
            // lumped-ish consistent mass for the interval mesh
            let m_diag = if i == 0 || i + 1 == n { h / 3.0 } else { 2.0 * h / 3.0 };
            mt.push((i, i, m_diag));
            if i + 1 < n {
                mt.push((i, i + 1, h / 6.0));
                mt.push((i + 1, i, h / 6.0));
            }
        }
        (
            SymCsr::from_triplets(n, &st, false),
            SymCsr::from_triplets(n, &mt, false),
        )
    }

    #[test]
    fn dense_and_lanczos_agree() {
        let (s, m) = laplacian_1d(900); // above DENSE_LIMIT -> lanczos
        let p = 8;
        let lanczos = solve_lanczos(&s, &m, p).unwrap();
        let dense = solve_dense(&s, &m, p).unwrap();
        for i in 0..p {
            let (a, b) = (lanczos.values[i], dense.values[i]);
            assert!(
                (a - b).abs() <= 1e-7 * b.abs().max(1.0),
                "eig {i}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn lanczos_finds_zero_mode_first() {
        let (s, m) = laplacian_1d(900);
        let sol = solve_lanczos(&s, &m, 3).unwrap();
        assert!(sol.values[0].abs() < 1e-6, "lambda0 = {}", sol.values[0]);
        // eigenvector of the zero mode is constant up to scale
        let v = sol.vectors.column(0);
        let mean = v.sum() / v.len() as f64;
        assert!(v.iter().all(|&x| (x - mean).abs() < 1e-6 * mean.abs()));
    }

    #[test]
    fn eigenvectors_are_mass_orthonormal() {
        let (s, m) = laplacian_1d(900);
        let sol = solve_lanczos(&s, &m, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let vi = sol.vectors.column(i).into_owned();
                let vj = sol.vectors.column(j).into_owned();
                let q = m.quadratic_form(vi.as_slice(), vj.as_slice());
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((q - expect).abs() < 1e-8, "({i},{j}) -> {q}");
            }
        }
    }

    #[test]
    fn rejects_p_out_of_range() {
        let (s, m) = laplacian_1d(10);
        assert!(matches!(
            solve_smallest(&s, &m, 10),
            Err(EigenError::TooManyPairs { .. })
        ));
        assert!(matches!(
            solve_smallest(&s, &m, 0),
            Err(EigenError::TooManyPairs { .. })
        ));
    }

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let mut m = DMatrix::from_column_slice(3, 2, &[0.1, -0.9, 0.2, 0.5, 0.5, -0.1]);
        apply_sign_convention(&mut m);
        assert!(m[(1, 0)] > 0.0); // column flipped
        assert!(m[(0, 1)] > 0.0); // tie between rows 0 and 1 resolves to row 0
    }
}
