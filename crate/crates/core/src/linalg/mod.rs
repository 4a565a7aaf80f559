//! Complex linear algebra kernels: matrices, the eigentriplet solver with
//! the normalization x*y > 0, and perturbed-operator application.

pub mod arnoldi;
pub mod dense_eig;
pub mod matrix;
pub mod random;

pub use matrix::{frobenius_inner, re_inner, ComplexMatrix, Dense, Sparse};

use crate::error::{Error, Result};
use crate::linalg::matrix::{c_zero, vdot, vnorm};
use crate::scalar::{tol, unit_phase, C, Real};
use std::cell::Cell;

/// Which eigenvalue of the matrix the optimization targets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TargetSelector<T> {
    /// Largest real part.
    Rightmost,
    /// Smallest real part.
    Leftmost,
    LargestModulus,
    SmallestModulus,
    ClosestTo(C<T>),
}

impl<T: Real> TargetSelector<T> {
    /// Selection key; the target minimizes this over the spectrum.
    pub fn key(&self, lambda: C<T>) -> T {
        match self {
            TargetSelector::Rightmost => -lambda.re,
            TargetSelector::Leftmost => lambda.re,
            TargetSelector::LargestModulus => -lambda.norm(),
            TargetSelector::SmallestModulus => lambda.norm(),
            TargetSelector::ClosestTo(z0) => (lambda - *z0).norm(),
        }
    }

    /// The selector that picks conj(lambda) on the adjoint's spectrum.
    pub fn adjoint(&self) -> TargetSelector<T> {
        match self {
            TargetSelector::ClosestTo(z0) => TargetSelector::ClosestTo(z0.conj()),
            other => *other,
        }
    }

    /// Index of the target eigenvalue with the deterministic tie-breaking
    /// rule: ties on the key fall back to larger imaginary part, then
    /// larger real part.
    pub fn select(&self, eigenvalues: &[C<T>]) -> Option<usize> {
        if eigenvalues.is_empty() {
            return None;
        }
        let keys: Vec<T> = eigenvalues.iter().map(|&l| self.key(l)).collect();
        let mut kmin = keys[0];
        for &k in &keys[1..] {
            if k < kmin {
                kmin = k;
            }
        }
        let tie: T = tol(1e-12, 16.0);
        let tie_abs = tie * (T::one() + kmin.abs());
        let mut best: Option<usize> = None;
        for (i, &k) in keys.iter().enumerate() {
            if k > kmin + tie_abs {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) => {
                    let (lb, li) = (eigenvalues[b], eigenvalues[i]);
                    let scale = T::one() + lb.norm();
                    if li.im > lb.im + tie_abs * scale {
                        best = Some(i);
                    } else if (li.im - lb.im).abs() <= tie_abs * scale && li.re > lb.re {
                        best = Some(i);
                    }
                }
            }
        }
        best
    }
}

/// A simple target eigenvalue with unit left/right eigenvectors normalized
/// so that x*y is real and positive, and kappa = 1/(x*y).
#[derive(Clone, Debug)]
pub struct Eigentriplet<T> {
    pub lambda: C<T>,
    /// Left eigenvector, unit norm: x* M = lambda x*.
    pub x: Vec<C<T>>,
    /// Right eigenvector, unit norm: M y = lambda y.
    pub y: Vec<C<T>>,
    /// Eigenvalue condition number 1/(x*y) > 0.
    pub kappa: T,
    /// Set when the gap to the nearest other computed eigenvalue is below
    /// the simplicity tolerance.
    pub gap_warning: bool,
}

impl<T: Real> Eigentriplet<T> {
    /// Phase-fixes a raw (lambda, x, y) pair into the canonical triplet.
    /// Fails when |x*y| is below tolerance (defective or near-defective).
    pub fn from_raw(lambda: C<T>, x: Vec<C<T>>, y: Vec<C<T>>, gap_warning: bool) -> Result<Self> {
        let mut x = x;
        let mut y = y;
        let nx = vnorm(&x);
        let ny = vnorm(&y);
        for xi in x.iter_mut() {
            *xi = *xi / nx;
        }
        for yi in y.iter_mut() {
            *yi = *yi / ny;
        }
        let s = vdot(&x, &y);
        let s_abs = s.norm();
        if s_abs < tol(1e-12, 16.0) {
            return Err(Error::IllConditionedEigenvalue {
                xy_abs: s_abs.to_f64().unwrap_or(0.0),
            });
        }
        // Rotate x so that x*y = |x*y| > 0.
        let ph = unit_phase(s);
        for xi in x.iter_mut() {
            *xi = *xi * ph;
        }
        // Joint phase freedom: make the largest component of y real positive
        // so repeated runs give a canonical representative.
        let mut i0 = 0;
        let mut m0 = T::zero();
        for (i, yi) in y.iter().enumerate() {
            let m = yi.norm();
            if m > m0 {
                m0 = m;
                i0 = i;
            }
        }
        let mu = unit_phase(y[i0]).conj();
        for yi in y.iter_mut() {
            *yi = *yi * mu;
        }
        for xi in x.iter_mut() {
            *xi = *xi * mu;
        }
        Ok(Eigentriplet {
            lambda,
            x,
            y,
            kappa: T::one() / s_abs,
            gap_warning,
        })
    }

    /// x*y (real positive by construction).
    pub fn xy(&self) -> T {
        T::one() / self.kappa
    }
}

/// A perturbation matrix in an efficiently applicable representation.
#[derive(Clone, Debug)]
pub enum Perturbation<T> {
    Zero { n: usize },
    /// Explicit matrix, dense or sparse.
    Matrix(ComplexMatrix<T>),
    /// Sum of scaled outer products: sum_i c_i u_i v_i*.
    LowRank(LowRank<T>),
}

/// E = sum_i coeffs[i] * cols[i] rows[i]*.
#[derive(Clone, Debug)]
pub struct LowRank<T> {
    pub n: usize,
    pub coeffs: Vec<C<T>>,
    pub cols: Vec<Vec<C<T>>>,
    pub rows: Vec<Vec<C<T>>>,
}

impl<T: Real> LowRank<T> {
    pub fn rank_bound(&self) -> usize {
        self.coeffs.len()
    }

    fn to_dense(&self) -> Dense<T> {
        let mut m = Dense::zeros(self.n, self.n);
        for ((c, u), v) in self.coeffs.iter().zip(&self.cols).zip(&self.rows) {
            m.add_outer(*c, u, v);
        }
        m
    }
}

impl<T: Real> Perturbation<T> {
    pub fn n(&self) -> usize {
        match self {
            Perturbation::Zero { n } => *n,
            Perturbation::Matrix(m) => m.nrows(),
            Perturbation::LowRank(l) => l.n,
        }
    }

    pub fn to_matrix(&self) -> ComplexMatrix<T> {
        match self {
            Perturbation::Zero { n } => ComplexMatrix::Sparse(Sparse::zeros(*n, *n)),
            Perturbation::Matrix(m) => m.clone(),
            Perturbation::LowRank(l) => ComplexMatrix::Dense(l.to_dense()),
        }
    }

    pub fn scale(&self, c: C<T>) -> Perturbation<T> {
        match self {
            Perturbation::Zero { n } => Perturbation::Zero { n: *n },
            Perturbation::Matrix(m) => Perturbation::Matrix(m.scale(c)),
            Perturbation::LowRank(l) => {
                let mut l = l.clone();
                for ci in l.coeffs.iter_mut() {
                    *ci = *ci * c;
                }
                Perturbation::LowRank(l)
            }
        }
    }

    /// E p.
    pub fn apply(&self, p: &[C<T>]) -> Vec<C<T>> {
        match self {
            Perturbation::Zero { n } => vec![c_zero(); *n],
            Perturbation::Matrix(m) => m.matvec(p),
            Perturbation::LowRank(l) => {
                let mut out = vec![c_zero::<T>(); l.n];
                for ((c, u), v) in l.coeffs.iter().zip(&l.cols).zip(&l.rows) {
                    let s = *c * vdot(v, p);
                    for (oi, ui) in out.iter_mut().zip(u) {
                        *oi = *oi + s * *ui;
                    }
                }
                out
            }
        }
    }

    /// E* p.
    pub fn apply_adj(&self, p: &[C<T>]) -> Vec<C<T>> {
        match self {
            Perturbation::Zero { n } => vec![c_zero(); *n],
            Perturbation::Matrix(m) => m.matvec_adj(p),
            Perturbation::LowRank(l) => {
                let mut out = vec![c_zero::<T>(); l.n];
                for ((c, u), v) in l.coeffs.iter().zip(&l.cols).zip(&l.rows) {
                    let s = c.conj() * vdot(u, p);
                    for (oi, vi) in out.iter_mut().zip(v) {
                        *oi = *oi + s * *vi;
                    }
                }
                out
            }
        }
    }

    /// Frobenius inner product <self, other>.
    pub fn inner(&self, other: &Perturbation<T>) -> C<T> {
        match (self, other) {
            (Perturbation::Zero { .. }, _) | (_, Perturbation::Zero { .. }) => c_zero(),
            (Perturbation::LowRank(a), Perturbation::LowRank(b)) => {
                // <sum_i a_i u_i v_i*, sum_j b_j w_j z_j*>
                //   = sum_ij conj(a_i) b_j (u_i* w_j)(z_j* v_i)
                let mut acc = c_zero::<T>();
                for ((ai, ui), vi) in a.coeffs.iter().zip(&a.cols).zip(&a.rows) {
                    for ((bj, wj), zj) in b.coeffs.iter().zip(&b.cols).zip(&b.rows) {
                        acc = acc + ai.conj() * *bj * vdot(ui, wj) * vdot(zj, vi);
                    }
                }
                acc
            }
            (Perturbation::LowRank(a), Perturbation::Matrix(m)) => {
                // <sum c_i u_i v_i*, M> = sum conj(c_i) u_i* (M v_i)
                let mut acc = c_zero::<T>();
                for ((ci, ui), vi) in a.coeffs.iter().zip(&a.cols).zip(&a.rows) {
                    acc = acc + ci.conj() * vdot(ui, &m.matvec(vi));
                }
                acc
            }
            (Perturbation::Matrix(_), Perturbation::LowRank(_)) => other.inner(self).conj(),
            (Perturbation::Matrix(a), Perturbation::Matrix(b)) => {
                frobenius_inner(a, b).expect("shapes checked at construction")
            }
        }
    }

    pub fn re_inner(&self, other: &Perturbation<T>) -> T {
        self.inner(other).re
    }

    pub fn frobenius_norm(&self) -> T {
        match self {
            Perturbation::Zero { .. } => T::zero(),
            Perturbation::Matrix(m) => m.frobenius_norm(),
            Perturbation::LowRank(_) => self.inner(self).re.max(T::zero()).sqrt(),
        }
    }

    /// Linear combination sum_i coeff_i * term_i, assuming all terms share a
    /// compatible representation (same sparsity pattern / same structure).
    pub fn combine(terms: &[(C<T>, &Perturbation<T>)]) -> Perturbation<T> {
        assert!(!terms.is_empty());
        let n = terms[0].1.n();
        let all_lowrank = terms
            .iter()
            .all(|(_, p)| matches!(p, Perturbation::LowRank(_) | Perturbation::Zero { .. }));
        if all_lowrank {
            let mut out = LowRank {
                n,
                coeffs: Vec::new(),
                cols: Vec::new(),
                rows: Vec::new(),
            };
            for (c, p) in terms {
                if let Perturbation::LowRank(l) = p {
                    for ((ci, ui), vi) in l.coeffs.iter().zip(&l.cols).zip(&l.rows) {
                        out.coeffs.push(*c * *ci);
                        out.cols.push(ui.clone());
                        out.rows.push(vi.clone());
                    }
                }
            }
            if out.coeffs.is_empty() {
                return Perturbation::Zero { n };
            }
            return Perturbation::LowRank(out);
        }
        let mut acc: Option<ComplexMatrix<T>> = None;
        for (c, p) in terms {
            let m = p.to_matrix();
            acc = Some(match acc {
                None => m.scale(*c),
                Some(a) => a.add_scaled(*c, &m).expect("uniform shapes"),
            });
        }
        Perturbation::Matrix(acc.unwrap())
    }
}

/// (A + eps E) p without materializing A + eps E.
///
/// The cost is one pass over the stored entries of `A` plus the cost of the
/// factored application of `E` (linear in n for low-rank and pattern forms).
pub fn apply_perturbed<T: Real>(
    a: &ComplexMatrix<T>,
    eps: T,
    e: &Perturbation<T>,
    p: &[C<T>],
) -> Result<Vec<C<T>>> {
    if p.len() != a.ncols() {
        return Err(Error::dim("apply_perturbed", format!("{}", a.ncols()), format!("{}", p.len())));
    }
    if e.n() != a.nrows() {
        return Err(Error::dim(
            "apply_perturbed",
            format!("{}", a.nrows()),
            format!("{}", e.n()),
        ));
    }
    let mut out = a.matvec(p);
    if eps != T::zero() {
        let ep = e.apply(p);
        for (oi, ei) in out.iter_mut().zip(&ep) {
            *oi = *oi + ei.scale(eps);
        }
    }
    Ok(out)
}

/// Eigensolver backend selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Dense below the size threshold / sparse Arnoldi above it.
    Auto,
    Dense,
    Arnoldi,
}

/// Options for the eigentriplet engine.
#[derive(Clone, Debug)]
pub struct EigOptions<T> {
    pub backend: Backend,
    /// Auto switches to Arnoldi for sparse matrices larger than this.
    pub dense_threshold: usize,
    pub arnoldi: arnoldi::ArnoldiOptions<T>,
}

impl<T: Real> Default for EigOptions<T> {
    fn default() -> Self {
        EigOptions {
            backend: Backend::Auto,
            dense_threshold: 500,
            arnoldi: arnoldi::ArnoldiOptions::default(),
        }
    }
}

/// Eigentriplet engine: dispatches to a backend and counts every evaluation
/// (accepted and rejected trial steps alike).
#[derive(Debug)]
pub struct EigEngine<T> {
    pub opts: EigOptions<T>,
    count: Cell<usize>,
}

impl<T: Real> Default for EigEngine<T> {
    fn default() -> Self {
        Self::new(EigOptions::default())
    }
}

impl<T: Real> EigEngine<T> {
    pub fn new(opts: EigOptions<T>) -> Self {
        EigEngine {
            opts,
            count: Cell::new(0),
        }
    }

    pub fn n_eig(&self) -> usize {
        self.count.get()
    }

    pub fn reset_count(&self) {
        self.count.set(0);
    }

    /// Eigentriplet of A + eps E for the selected target eigenvalue.
    pub fn eigentriplet(
        &self,
        a: &ComplexMatrix<T>,
        eps: T,
        e: &Perturbation<T>,
        selector: TargetSelector<T>,
    ) -> Result<Eigentriplet<T>> {
        self.count.set(self.count.get() + 1);
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::dim(
                "eigentriplet",
                "square matrix",
                format!("{}x{}", a.nrows(), a.ncols()),
            ));
        }
        let use_arnoldi = match self.opts.backend {
            Backend::Dense => false,
            Backend::Arnoldi => true,
            Backend::Auto => n > self.opts.dense_threshold && a.is_sparse(),
        };
        if use_arnoldi {
            arnoldi::eigentriplet_arnoldi(a, eps, e, selector, &self.opts.arnoldi)
        } else {
            eigentriplet_dense_perturbed(a, eps, e, selector)
        }
    }

    /// Eigentriplet of a plain matrix.
    pub fn eigentriplet_matrix(
        &self,
        m: &ComplexMatrix<T>,
        selector: TargetSelector<T>,
    ) -> Result<Eigentriplet<T>> {
        let zero = Perturbation::Zero { n: m.nrows() };
        self.eigentriplet(m, T::zero(), &zero, selector)
    }
}

/// Relative simplicity gap below which the warning flag is raised.
fn gap_tolerance<T: Real>() -> T {
    tol(1e-10, 16.0)
}

fn materialize<T: Real>(a: &ComplexMatrix<T>, eps: T, e: &Perturbation<T>) -> Dense<T> {
    let mut m = a.to_dense();
    if eps != T::zero() {
        match e {
            Perturbation::Zero { .. } => {}
            Perturbation::Matrix(em) => m.axpy(C::new(eps, T::zero()), &em.to_dense()),
            Perturbation::LowRank(l) => {
                for ((c, u), v) in l.coeffs.iter().zip(&l.cols).zip(&l.rows) {
                    m.add_outer(c.scale(eps), u, v);
                }
            }
        }
    }
    m
}

/// Dense backend: balancing, Schur form, eigenvector extraction for the
/// selected eigenvalue, paired left vector from the same Schur form.
fn eigentriplet_dense_perturbed<T: Real>(
    a: &ComplexMatrix<T>,
    eps: T,
    e: &Perturbation<T>,
    selector: TargetSelector<T>,
) -> Result<Eigentriplet<T>> {
    let mut m = materialize(a, eps, e);
    let d = dense_eig::balance(&mut m);
    let form = dense_eig::schur(&m)?;
    let eigenvalues = form.eigenvalues();
    let j = selector
        .select(&eigenvalues)
        .ok_or_else(|| Error::InvalidProblem("empty matrix has no eigenvalues".into()))?;
    let lambda = eigenvalues[j];

    let mut gap_warning = false;
    let scale = T::one() + lambda.norm();
    let mut min_gap = T::infinity();
    for (i, &mu) in eigenvalues.iter().enumerate() {
        if i != j {
            min_gap = min_gap.min((mu - lambda).norm());
        }
    }
    if min_gap / scale < gap_tolerance::<T>() {
        gap_warning = true;
    }

    let mut y = form.right_eigenvector(j);
    let mut x = form.left_eigenvector(j);
    // Undo balancing: y <- D y, x <- D^{-1} x.
    for (yi, &di) in y.iter_mut().zip(&d) {
        *yi = yi.scale(di);
    }
    for (xi, &di) in x.iter_mut().zip(&d) {
        *xi = xi.scale(T::one() / di);
    }
    Eigentriplet::from_raw(lambda, x, y, gap_warning)
}
