//! Krylov-Schur (implicitly restarted Arnoldi) eigensolver for large sparse
//! operators, with optional shift-invert for interior targets. Used behind
//! the same eigentriplet contract as the dense backend; left eigenvectors
//! come from a second run on the adjoint operator.

use crate::error::{Error, Result};
use crate::linalg::dense_eig::{lu_factor, schur, Lu};
use crate::linalg::matrix::{c_zero, vdot, vnorm, ComplexMatrix, Dense};
use crate::linalg::{Eigentriplet, Perturbation, TargetSelector};
use crate::scalar::{cast, tol, C, Real};

/// Abstract y = M x (and y = M* x) for iterative eigensolvers.
pub trait LinearOperator<T: Real> {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C<T>]) -> Vec<C<T>>;
    fn apply_adjoint(&self, x: &[C<T>]) -> Vec<C<T>>;
}

/// A + eps E in factored form.
pub struct PerturbedOp<'a, T> {
    pub a: &'a ComplexMatrix<T>,
    pub eps: T,
    pub e: &'a Perturbation<T>,
}

impl<T: Real> LinearOperator<T> for PerturbedOp<'_, T> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        let mut y = self.a.matvec(x);
        if self.eps != T::zero() {
            let ep = self.e.apply(x);
            for (yi, ei) in y.iter_mut().zip(&ep) {
                *yi = *yi + ei.scale(self.eps);
            }
        }
        y
    }

    fn apply_adjoint(&self, x: &[C<T>]) -> Vec<C<T>> {
        let mut y = self.a.matvec_adj(x);
        if self.eps != T::zero() {
            let ep = self.e.apply_adj(x);
            for (yi, ei) in y.iter_mut().zip(&ep) {
                *yi = *yi + ei.scale(self.eps);
            }
        }
        y
    }
}

/// (M - sigma I)^{-1} through a dense LU factorization.
struct ShiftInvertOp<T: Real> {
    lu: Lu<T>,
}

impl<T: Real> LinearOperator<T> for ShiftInvertOp<T> {
    fn dim(&self) -> usize {
        self.lu.n()
    }

    fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        self.lu.solve(x)
    }

    fn apply_adjoint(&self, x: &[C<T>]) -> Vec<C<T>> {
        self.lu.solve_adj(x)
    }
}

struct AdjointOf<'a, T: Real, O: LinearOperator<T>> {
    inner: &'a O,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Real, O: LinearOperator<T>> LinearOperator<T> for AdjointOf<'_, T, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        self.inner.apply_adjoint(x)
    }
    fn apply_adjoint(&self, x: &[C<T>]) -> Vec<C<T>> {
        self.inner.apply(x)
    }
}

#[derive(Clone, Debug)]
pub struct ArnoldiOptions<T> {
    /// Ritz values required to converge before selection.
    pub n_wanted: usize,
    /// Maximum Krylov basis size before a restart.
    pub max_basis: usize,
    pub max_restarts: usize,
    /// Relative residual tolerance for Ritz pairs.
    pub tol: T,
    pub seed: u64,
    /// Largest n for which interior selectors may build a dense LU.
    pub shift_invert_max_n: usize,
}

impl<T: Real> Default for ArnoldiOptions<T> {
    fn default() -> Self {
        ArnoldiOptions {
            n_wanted: 6,
            max_basis: 48,
            max_restarts: 600,
            tol: tol(1e-12, 100.0),
            seed: 0x5eed,
            shift_invert_max_n: 4000,
        }
    }
}

/// One converged Ritz pair in original-problem coordinates.
struct RitzPair<T> {
    lambda: C<T>,
    vector: Vec<C<T>>,
}

/// Runs Krylov-Schur on `op`, converging the `n_wanted` Ritz values that
/// minimize `key` on the *operator* spectrum. Returns converged pairs
/// ordered by the key.
fn krylov_schur<T: Real, O: LinearOperator<T>>(
    op: &O,
    key: impl Fn(C<T>) -> T + Copy,
    opts: &ArnoldiOptions<T>,
) -> Result<Vec<RitzPair<T>>> {
    let n = op.dim();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m_max = opts.max_basis.clamp(2, n);
    let wanted = opts.n_wanted.clamp(1, m_max.saturating_sub(1).max(1));
    let keep = (wanted + 3).min(m_max.saturating_sub(1)).max(1);

    let mut rng = crate::linalg::random::Rng64::seeded(opts.seed);
    let v0 = crate::linalg::random::unit_cvec::<T>(n, &mut rng);

    let mut basis: Vec<Vec<C<T>>> = vec![v0];
    let mut h = Dense::<T>::zeros(m_max + 1, m_max);
    let mut ncols = 0usize; // columns of H currently valid
    let mut op_norm_est = T::zero();

    for _restart in 0..opts.max_restarts {
        // Expand the Arnoldi basis to m_max columns.
        while ncols < m_max {
            let j = ncols;
            let mut w = op.apply(&basis[j]);
            let wnorm0 = vnorm(&w);
            op_norm_est = op_norm_est.max(wnorm0);
            // Modified Gram-Schmidt with one re-orthogonalization pass.
            for _pass in 0..2 {
                for (i, vi) in basis.iter().enumerate() {
                    let hij = vdot(vi, &w);
                    if _pass == 0 {
                        h[(i, j)] = h[(i, j)] + hij;
                    } else if hij.norm() > T::epsilon() * wnorm0 {
                        h[(i, j)] = h[(i, j)] + hij;
                    } else {
                        continue;
                    }
                    for (wk, vk) in w.iter_mut().zip(vi) {
                        *wk = *wk - hij * *vk;
                    }
                }
            }
            let beta = vnorm(&w);
            let breakdown = beta <= T::epsilon() * (op_norm_est + T::one()) * cast(16.0);
            if breakdown {
                h[(j + 1, j)] = c_zero();
                if basis.len() >= n {
                    ncols = j + 1;
                    break;
                }
                // Extend with a fresh random direction orthogonal to the
                // current basis; the coupling stays exactly zero.
                let mut fresh = crate::linalg::random::cvec::<T>(n, &mut rng);
                for _ in 0..2 {
                    for vi in &basis {
                        let c = vdot(vi, &fresh);
                        for (fk, vk) in fresh.iter_mut().zip(vi) {
                            *fk = *fk - c * *vk;
                        }
                    }
                }
                let fn2 = vnorm(&fresh);
                if fn2 <= T::epsilon() * cast(16.0) {
                    ncols = j + 1;
                    break;
                }
                for fk in fresh.iter_mut() {
                    *fk = *fk / fn2;
                }
                basis.push(fresh);
                ncols = j + 1;
                continue;
            }
            h[(j + 1, j)] = C::new(beta, T::zero());
            for wk in w.iter_mut() {
                *wk = *wk / beta;
            }
            basis.push(w);
            ncols = j + 1;
        }

        let m = ncols;
        // Square block and coupling row of the Krylov relation
        //   Op V_m = V_m H_m + v_res r  (r a row vector).
        let mut hsq = Dense::<T>::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                hsq[(i, j)] = h[(i, j)];
            }
        }
        let mut form = schur(&hsq)?;
        form.order_leading_by_key(m, key);
        let coupling: Vec<C<T>> = (0..m).map(|j| h[(m, j)]).collect();

        // Residual of the i-th ordered Ritz pair: |r (Q w_i)|.
        let scale_floor = op_norm_est.max(T::min_positive_value());
        let n_check = wanted.min(m);
        let mut all_ok = true;
        for i in 0..n_check {
            let z = form.right_eigenvector(i);
            let mut rz = c_zero::<T>();
            for (ck, zk) in coupling.iter().zip(&z) {
                rz = rz + *ck * *zk;
            }
            let theta = form.t[(i, i)];
            if rz.norm() > opts.tol * theta.norm().max(scale_floor) {
                all_ok = false;
                break;
            }
        }

        if all_ok || m >= n {
            // Assemble converged pairs in selector order.
            let mut out = Vec::with_capacity(n_check);
            for i in 0..n_check {
                let z = form.right_eigenvector(i);
                let mut vec = vec![c_zero::<T>(); n];
                for (k, zk) in z.iter().enumerate() {
                    for (vi, bk) in vec.iter_mut().zip(&basis[k]) {
                        *vi = *vi + *zk * *bk;
                    }
                }
                let nv = vnorm(&vec);
                if nv > T::zero() {
                    for vi in vec.iter_mut() {
                        *vi = *vi / nv;
                    }
                }
                out.push(RitzPair {
                    lambda: form.t[(i, i)],
                    vector: vec,
                });
            }
            return Ok(out);
        }

        // Krylov-Schur restart: keep the leading `keep` Schur vectors plus
        // the residual vector.
        let p = keep.min(m.saturating_sub(1)).max(1);
        let mut new_basis: Vec<Vec<C<T>>> = Vec::with_capacity(p + 1);
        for i in 0..p {
            let mut vec = vec![c_zero::<T>(); n];
            for k in 0..m {
                let qki = form.q[(k, i)];
                for (vi, bk) in vec.iter_mut().zip(&basis[k]) {
                    *vi = *vi + qki * *bk;
                }
            }
            new_basis.push(vec);
        }
        new_basis.push(basis[m].clone());

        let mut new_h = Dense::<T>::zeros(m_max + 1, m_max);
        for i in 0..p {
            for j in i..p {
                new_h[(i, j)] = form.t[(i, j)];
            }
        }
        for j in 0..p {
            let mut rq = c_zero::<T>();
            for (k, ck) in coupling.iter().enumerate() {
                rq = rq + *ck * form.q[(k, j)];
            }
            new_h[(p, j)] = rq;
        }
        basis = new_basis;
        h = new_h;
        ncols = p;
    }
    Err(Error::EigConvergence {
        context: format!(
            "Arnoldi: {} Ritz values not converged after {} restarts",
            wanted, opts.max_restarts
        ),
    })
}

fn needs_shift_invert<T: Real>(sel: &TargetSelector<T>) -> Option<C<T>> {
    match sel {
        TargetSelector::SmallestModulus => Some(c_zero()),
        TargetSelector::ClosestTo(z0) => Some(*z0),
        _ => None,
    }
}

fn gap_flag<T: Real>(lambda: C<T>, others: &[C<T>]) -> bool {
    let scale = T::one() + lambda.norm();
    let mut min_gap = T::infinity();
    for &mu in others {
        let d = (mu - lambda).norm();
        if d > T::zero() || others.len() == 1 {
            min_gap = min_gap.min(d);
        }
    }
    min_gap.is_finite() && min_gap / scale < tol(1e-10, 16.0)
}

/// Arnoldi-backed eigentriplet of A + eps E.
pub fn eigentriplet_arnoldi<T: Real>(
    a: &ComplexMatrix<T>,
    eps: T,
    e: &Perturbation<T>,
    selector: TargetSelector<T>,
    opts: &ArnoldiOptions<T>,
) -> Result<Eigentriplet<T>> {
    let n = a.nrows();
    if let Some(sigma) = needs_shift_invert(&selector) {
        if n > opts.shift_invert_max_n {
            return Err(Error::EigConvergence {
                context: format!(
                    "interior selector needs shift-invert; n = {n} exceeds dense LU limit {}",
                    opts.shift_invert_max_n
                ),
            });
        }
        // Materialize M - sigma I and factor once.
        let mut m = a.to_dense();
        if eps != T::zero() {
            m.axpy(C::new(eps, T::zero()), &e.to_matrix().to_dense());
        }
        for i in 0..n {
            m[(i, i)] = m[(i, i)] - sigma;
        }
        let lu = lu_factor(&m)?;
        let op = ShiftInvertOp { lu };
        // Largest |theta| of (M - sigma)^{-1} maps to lambda nearest sigma.
        let pairs = krylov_schur(&op, |z: C<T>| -z.norm(), opts)?;
        let lambdas: Vec<C<T>> = pairs
            .iter()
            .map(|p| sigma + p.lambda.inv())
            .collect();
        let sel_idx = selector
            .select(&lambdas)
            .ok_or_else(|| Error::EigConvergence {
                context: "no Ritz values returned".into(),
            })?;
        let lambda = lambdas[sel_idx];
        let y = pairs[sel_idx].vector.clone();

        let adj_op = AdjointOf {
            inner: &op,
            _marker: std::marker::PhantomData,
        };
        let adj_pairs = krylov_schur(&adj_op, |z: C<T>| -z.norm(), opts)?;
        let target = lambda.conj();
        let adj_lambdas: Vec<C<T>> = adj_pairs
            .iter()
            .map(|p| sigma.conj() + p.lambda.inv())
            .collect();
        let xi = nearest(&adj_lambdas, target)?;
        check_pairing(adj_lambdas[xi], target)?;
        let x = adj_pairs[xi].vector.clone();
        Eigentriplet::from_raw(lambda, x, y, gap_flag(lambda, &drop_idx(&lambdas, sel_idx)))
    } else {
        let op = PerturbedOp { a, eps, e };
        let key = move |z: C<T>| selector.key(z);
        let pairs = krylov_schur(&op, key, opts)?;
        let lambdas: Vec<C<T>> = pairs.iter().map(|p| p.lambda).collect();
        let sel_idx = selector
            .select(&lambdas)
            .ok_or_else(|| Error::EigConvergence {
                context: "no Ritz values returned".into(),
            })?;
        let lambda = lambdas[sel_idx];
        let y = pairs[sel_idx].vector.clone();

        let adj_op = AdjointOf {
            inner: &op,
            _marker: std::marker::PhantomData,
        };
        let adj_sel = selector.adjoint();
        let adj_key = move |z: C<T>| adj_sel.key(z);
        let adj_pairs = krylov_schur(&adj_op, adj_key, opts)?;
        let adj_lambdas: Vec<C<T>> = adj_pairs.iter().map(|p| p.lambda).collect();
        let target = lambda.conj();
        let xi = nearest(&adj_lambdas, target)?;
        check_pairing(adj_lambdas[xi], target)?;
        let x = adj_pairs[xi].vector.clone();
        Eigentriplet::from_raw(lambda, x, y, gap_flag(lambda, &drop_idx(&lambdas, sel_idx)))
    }
}

fn drop_idx<T: Real>(v: &[C<T>], idx: usize) -> Vec<C<T>> {
    v.iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, &z)| z)
        .collect()
}

fn nearest<T: Real>(candidates: &[C<T>], target: C<T>) -> Result<usize> {
    candidates
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            (**a - target)
                .norm()
                .partial_cmp(&(**b - target).norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::EigConvergence {
            context: "adjoint Arnoldi returned no Ritz values".into(),
        })
}

fn check_pairing<T: Real>(got: C<T>, want: C<T>) -> Result<()> {
    let scale = T::one() + want.norm();
    if (got - want).norm() > tol::<T>(1e-6, 1e5) * scale {
        return Err(Error::EigConvergence {
            context: format!(
                "left/right eigenvalue pairing mismatch: |{:?} - {:?}| too large",
                got, want
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random::{sparse_real, Rng64};
    use crate::linalg::{Backend, EigEngine, EigOptions};

    /// Random sparse matrix, shifted so eigenvalues are well spread.
    fn test_matrix(n: usize, seed: u64) -> ComplexMatrix<f64> {
        let mut rng = Rng64::seeded(seed);
        let s = sparse_real::<f64>(n, 8.0 / n as f64, &mut rng);
        // Add a diagonal spread to separate the extremes.
        let mut entries = s.entries().to_vec();
        let mut missing = Vec::new();
        for i in 0..n {
            let bump = C::new(3.0 * (i as f64 / n as f64 - 0.5), 0.0);
            match entries.binary_search_by_key(&(i, i), |&(r, c, _)| (r, c)) {
                Ok(k) => entries[k].2 += bump,
                Err(_) => missing.push((i, i, bump)),
            }
        }
        entries.extend(missing);
        let s = crate::linalg::Sparse::from_triplets(n, n, entries).unwrap();
        ComplexMatrix::Sparse(s)
    }

    #[test]
    fn arnoldi_matches_dense_on_extremal_targets() {
        let a = test_matrix(240, 7);
        let dense = EigEngine::<f64>::new(EigOptions {
            backend: Backend::Dense,
            ..Default::default()
        });
        let sparse = EigEngine::<f64>::new(EigOptions {
            backend: Backend::Arnoldi,
            ..Default::default()
        });
        for sel in [TargetSelector::Rightmost, TargetSelector::LargestModulus] {
            let td = dense.eigentriplet_matrix(&a, sel).unwrap();
            let ta = sparse.eigentriplet_matrix(&a, sel).unwrap();
            assert!(
                (td.lambda - ta.lambda).norm() < 1e-8 * (1.0 + td.lambda.norm()),
                "{sel:?}: dense {} vs arnoldi {}",
                td.lambda,
                ta.lambda
            );
            // Residual check on the Arnoldi triplet.
            let mut r = a.matvec(&ta.y);
            for (ri, yi) in r.iter_mut().zip(&ta.y) {
                *ri = *ri - ta.lambda * *yi;
            }
            assert!(vnorm(&r) < 1e-8 * a.frobenius_norm());
            let mut l = a.matvec_adj(&ta.x);
            for (li, xi) in l.iter_mut().zip(&ta.x) {
                *li = *li - ta.lambda.conj() * *xi;
            }
            assert!(vnorm(&l) < 1e-8 * a.frobenius_norm());
        }
    }

    #[test]
    fn arnoldi_shift_invert_finds_smallest_modulus() {
        let a = test_matrix(160, 21);
        let dense = EigEngine::<f64>::new(EigOptions {
            backend: Backend::Dense,
            ..Default::default()
        });
        let sparse = EigEngine::<f64>::new(EigOptions {
            backend: Backend::Arnoldi,
            ..Default::default()
        });
        let td = dense
            .eigentriplet_matrix(&a, TargetSelector::SmallestModulus)
            .unwrap();
        let ta = sparse
            .eigentriplet_matrix(&a, TargetSelector::SmallestModulus)
            .unwrap();
        assert!(
            (td.lambda.norm() - ta.lambda.norm()).abs() < 1e-9 * (1.0 + td.lambda.norm()),
            "dense {} vs arnoldi {}",
            td.lambda,
            ta.lambda
        );
    }

    #[test]
    fn auto_backend_picks_arnoldi_for_large_sparse() {
        let a = test_matrix(600, 3);
        let eng = EigEngine::<f64>::default();
        let t = eng
            .eigentriplet_matrix(&a, TargetSelector::Rightmost)
            .unwrap();
        let mut r = a.matvec(&t.y);
        for (ri, yi) in r.iter_mut().zip(&t.y) {
            *ri = *ri - t.lambda * *yi;
        }
        assert!(vnorm(&r) < 1e-8 * a.frobenius_norm());
        assert_eq!(eng.n_eig(), 1);
    }
}
