//! The linear structure space S and its orthogonal projection with respect
//! to the real Frobenius inner product Re<.,.>.
//!
//! Supported classes: prescribed sparsity patterns, matrices with prescribed
//! range and co-range (B Delta C), Toeplitz, Hankel, real Hamiltonian, and
//! the full space. Each class is available over the real or complex field
//! (Hamiltonian is real by definition).

use crate::error::{Error, Result};
use crate::linalg::dense_eig::orthonormal_range;
use crate::linalg::matrix::{c_re, c_zero, vnorm, Dense, Sparse};
use crate::linalg::{ComplexMatrix, LowRank, Perturbation};
use crate::scalar::{cast, C, Real};

/// Whether S is a real-linear or complex-linear subspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    RealLinear,
    ComplexLinear,
}

impl FieldKind {
    pub fn is_real(self) -> bool {
        matches!(self, FieldKind::RealLinear)
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldKind::RealLinear => "real",
            FieldKind::ComplexLinear => "complex",
        }
    }
}

#[derive(Clone, Debug)]
enum Kind<T> {
    /// Matrices supported on a fixed set of positions.
    SparsityPattern { pattern: Vec<(usize, usize)> },
    /// { B Delta C } with B (n x k), C (l x n) real of full rank.
    /// Cached orthonormal bases give B B~ = Qb Qb* and C~ C = Qc Qc*.
    RangeCorange {
        k: usize,
        l: usize,
        qb: Dense<T>,
        qc: Dense<T>,
    },
    /// Constant along diagonals.
    Toeplitz,
    /// Constant along anti-diagonals.
    Hankel,
    /// Real 2d x 2d matrices with J H symmetric.
    HamiltonianReal,
    /// All of C^{n,n} or R^{n,n}.
    Full,
}

/// A linear structure space with its orthogonal projection.
#[derive(Clone, Debug)]
pub struct StructureSpace<T> {
    n: usize,
    field: FieldKind,
    kind: Kind<T>,
}

impl<T: Real> StructureSpace<T> {
    pub fn sparsity_pattern(
        n: usize,
        mut pattern: Vec<(usize, usize)>,
        field: FieldKind,
    ) -> Result<Self> {
        for &(i, j) in &pattern {
            if i >= n || j >= n {
                return Err(Error::dim(
                    "sparsity pattern",
                    format!("indices < {n}"),
                    format!("({i}, {j})"),
                ));
            }
        }
        pattern.sort_unstable();
        pattern.dedup();
        Ok(StructureSpace {
            n,
            field,
            kind: Kind::SparsityPattern { pattern },
        })
    }

    /// B must be n x k and C l x n, both real-valued and of full rank.
    pub fn range_corange(b: &Dense<T>, c: &Dense<T>, field: FieldKind) -> Result<Self> {
        let n = b.nrows();
        if c.ncols() != n {
            return Err(Error::dim(
                "range_corange",
                format!("C with {n} columns"),
                format!("{}x{}", c.nrows(), c.ncols()),
            ));
        }
        let (k, l) = (b.ncols(), c.nrows());
        if k > n || l > n {
            return Err(Error::InvalidProblem(
                "range_corange requires k <= n and l <= n".into(),
            ));
        }
        if b.max_imag_abs() != T::zero() || c.max_imag_abs() != T::zero() {
            return Err(Error::InvalidProblem(
                "range_corange factors B, C must be real".into(),
            ));
        }
        let qb = orthonormal_range(b, "range factor B")?;
        let qc = orthonormal_range(&c.transpose(), "co-range factor C")?;
        Ok(StructureSpace {
            n,
            field,
            kind: Kind::RangeCorange { k, l, qb, qc },
        })
    }

    pub fn toeplitz(n: usize, field: FieldKind) -> Self {
        StructureSpace {
            n,
            field,
            kind: Kind::Toeplitz,
        }
    }

    pub fn hankel(n: usize, field: FieldKind) -> Self {
        StructureSpace {
            n,
            field,
            kind: Kind::Hankel,
        }
    }

    pub fn hamiltonian(n: usize) -> Result<Self> {
        if n % 2 != 0 {
            return Err(Error::InvalidProblem(format!(
                "Hamiltonian structure needs even size, got {n}"
            )));
        }
        Ok(StructureSpace {
            n,
            field: FieldKind::RealLinear,
            kind: Kind::HamiltonianReal,
        })
    }

    pub fn full(n: usize, field: FieldKind) -> Self {
        StructureSpace {
            n,
            field,
            kind: Kind::Full,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn field(&self) -> FieldKind {
        self.field
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::SparsityPattern { .. } => "sparsity-pattern",
            Kind::RangeCorange { .. } => "range-corange",
            Kind::Toeplitz => "toeplitz",
            Kind::Hankel => "hankel",
            Kind::HamiltonianReal => "hamiltonian",
            Kind::Full => "full",
        }
    }

    pub fn pattern(&self) -> Option<&[(usize, usize)]> {
        match &self.kind {
            Kind::SparsityPattern { pattern } => Some(pattern),
            _ => None,
        }
    }

    /// Real dimension of S.
    pub fn dim(&self) -> usize {
        let real = self.field.is_real();
        let n = self.n;
        match &self.kind {
            Kind::SparsityPattern { pattern } => {
                if real {
                    pattern.len()
                } else {
                    2 * pattern.len()
                }
            }
            Kind::RangeCorange { k, l, .. } => {
                if real {
                    k * l
                } else {
                    2 * k * l
                }
            }
            // 2n - 1 diagonals (the standard count for n x n Toeplitz).
            Kind::Toeplitz | Kind::Hankel => {
                if real {
                    2 * n - 1
                } else {
                    2 * (2 * n - 1)
                }
            }
            // Sym(2d) has dimension d(2d + 1) = 2d^2 + d.
            Kind::HamiltonianReal => {
                let d = n / 2;
                2 * d * d + d
            }
            Kind::Full => {
                if real {
                    n * n
                } else {
                    2 * n * n
                }
            }
        }
    }

    fn check_size(&self, nrows: usize, ncols: usize, op: &'static str) -> Result<()> {
        if nrows != self.n || ncols != self.n {
            return Err(Error::dim(
                op,
                format!("{0}x{0}", self.n),
                format!("{nrows}x{ncols}"),
            ));
        }
        Ok(())
    }

    /// Orthogonal projection of Z onto S.
    pub fn project(&self, z: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        self.check_size(z.nrows(), z.ncols(), "project")?;
        let real = self.field.is_real();
        let n = self.n;
        Ok(match &self.kind {
            Kind::SparsityPattern { pattern } => {
                let mut entries = Vec::with_capacity(pattern.len());
                for &(i, j) in pattern {
                    let v = z.get(i, j);
                    let v = if real { c_re(v.re) } else { v };
                    entries.push((i, j, v));
                }
                ComplexMatrix::Sparse(
                    Sparse::from_triplets(n, n, entries).expect("pattern is valid"),
                )
            }
            Kind::RangeCorange { qb, qc, .. } => {
                let zd = if real {
                    z.to_dense().real_part()
                } else {
                    z.to_dense()
                };
                // Qb (Qb* Z Qc) Qc*
                let mid = qb.adjoint().matmul(&zd.matmul(qc));
                ComplexMatrix::Dense(qb.matmul(&mid.matmul(&qc.adjoint())))
            }
            Kind::Toeplitz => {
                let zd = z.to_dense();
                let mut sums = vec![c_zero::<T>(); 2 * n - 1];
                for i in 0..n {
                    for j in 0..n {
                        let v = zd[(i, j)];
                        let v = if real { c_re(v.re) } else { v };
                        let d = (j + n - 1) - i;
                        sums[d] = sums[d] + v;
                    }
                }
                let mut out = Dense::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let d = (j + n - 1) - i;
                        let count = n - i.abs_diff(j);
                        out[(i, j)] = sums[d] / cast::<T>(count as f64);
                    }
                }
                ComplexMatrix::Dense(out)
            }
            Kind::Hankel => {
                let zd = z.to_dense();
                let mut sums = vec![c_zero::<T>(); 2 * n - 1];
                for i in 0..n {
                    for j in 0..n {
                        let v = zd[(i, j)];
                        let v = if real { c_re(v.re) } else { v };
                        sums[i + j] = sums[i + j] + v;
                    }
                }
                let mut out = Dense::zeros(n, n);
                for i in 0..n {
                    for j in 0..n {
                        let s = i + j;
                        let count = (s + 1).min(n).min(2 * n - 1 - s);
                        out[(i, j)] = sums[s] / cast::<T>(count as f64);
                    }
                }
                ComplexMatrix::Dense(out)
            }
            Kind::HamiltonianReal => {
                let zd = z.to_dense().real_part();
                ComplexMatrix::Dense(hamiltonian_project(&zd))
            }
            Kind::Full => {
                if real {
                    match z {
                        ComplexMatrix::Dense(m) => ComplexMatrix::Dense(m.real_part()),
                        ComplexMatrix::Sparse(s) => {
                            let entries = s
                                .entries()
                                .iter()
                                .map(|&(i, j, v)| (i, j, c_re(v.re)))
                                .collect();
                            ComplexMatrix::Sparse(
                                Sparse::from_triplets(n, n, entries).expect("copy of valid"),
                            )
                        }
                    }
                } else {
                    z.clone()
                }
            }
        })
    }

    /// Pi^S(c * u v*) in a representation that never forms the n x n outer
    /// product when the structure allows it (patterns stay sparse, range /
    /// co-range spaces stay low-rank).
    pub fn project_outer(&self, coeff: C<T>, u: &[C<T>], v: &[C<T>]) -> Result<Perturbation<T>> {
        self.check_size(u.len(), v.len(), "project_outer")?;
        let real = self.field.is_real();
        let n = self.n;
        Ok(match &self.kind {
            Kind::SparsityPattern { pattern } => {
                let mut entries = Vec::with_capacity(pattern.len());
                for &(i, j) in pattern {
                    let w = coeff * u[i] * v[j].conj();
                    let w = if real { c_re(w.re) } else { w };
                    entries.push((i, j, w));
                }
                Perturbation::Matrix(ComplexMatrix::Sparse(
                    Sparse::from_triplets(n, n, entries).expect("pattern is valid"),
                ))
            }
            Kind::RangeCorange { qb, qc, .. } => {
                let p = qb.matvec(&qb.matvec_adj(u));
                let q = qc.matvec(&qc.matvec_adj(v));
                if real {
                    // B B~ Re(c u v*) C~ C = (c p q* + conj(c p q*)) / 2
                    let half = cast::<T>(0.5);
                    let pc: Vec<C<T>> = p.iter().map(|z| z.conj()).collect();
                    let qc2: Vec<C<T>> = q.iter().map(|z| z.conj()).collect();
                    Perturbation::LowRank(LowRank {
                        n,
                        coeffs: vec![coeff.scale(half), coeff.conj().scale(half)],
                        cols: vec![p, pc],
                        rows: vec![q, qc2],
                    })
                } else {
                    Perturbation::LowRank(LowRank {
                        n,
                        coeffs: vec![coeff],
                        cols: vec![p],
                        rows: vec![q],
                    })
                }
            }
            _ => {
                // Toeplitz / Hankel / Hamiltonian / Full: project the scaled
                // outer product through the general path.
                let mut outer = Dense::zeros(n, n);
                outer.add_outer(coeff, u, v);
                self.project(&ComplexMatrix::Dense(outer))?
                    .into_perturbation()
            }
        })
    }

    /// Pi^S(u v*) for unit vectors, as a plain matrix.
    pub fn project_rank1(&self, u: &[C<T>], v: &[C<T>]) -> Result<ComplexMatrix<T>> {
        let tol_unit = crate::scalar::tol::<T>(1e-8, 1e6);
        if (vnorm(u) - T::one()).abs() > tol_unit || (vnorm(v) - T::one()).abs() > tol_unit {
            return Err(Error::InvalidProblem(
                "project_rank1 expects unit-norm factors".into(),
            ));
        }
        Ok(self
            .project_outer(C::new(T::one(), T::zero()), u, v)?
            .to_matrix())
    }

    /// Membership test up to absolute tolerance on the defect.
    pub fn is_member(&self, m: &ComplexMatrix<T>, tol: T) -> bool {
        if m.nrows() != self.n || m.ncols() != self.n {
            return false;
        }
        let real_ok = |d: &Dense<T>| d.max_imag_abs() <= tol;
        let n = self.n;
        match &self.kind {
            Kind::SparsityPattern { pattern } => {
                let d = m.to_dense();
                if self.field.is_real() && !real_ok(&d) {
                    return false;
                }
                let pat: std::collections::BTreeSet<(usize, usize)> =
                    pattern.iter().copied().collect();
                for i in 0..n {
                    for j in 0..n {
                        if !pat.contains(&(i, j)) && d[(i, j)].norm() > tol {
                            return false;
                        }
                    }
                }
                true
            }
            Kind::Toeplitz | Kind::Hankel | Kind::RangeCorange { .. } => {
                let p = match self.project(m) {
                    Ok(p) => p.to_dense(),
                    Err(_) => return false,
                };
                let mut diff = p;
                diff.axpy(C::new(-T::one(), T::zero()), &m.to_dense());
                diff.max_abs() <= tol
            }
            Kind::HamiltonianReal => {
                let d = m.to_dense();
                if !real_ok(&d) {
                    return false;
                }
                let jz = j_times(&d);
                let mut asym = jz.clone();
                asym.axpy(C::new(-T::one(), T::zero()), &jz.transpose());
                asym.max_abs() <= tol
            }
            Kind::Full => !self.field.is_real() || real_ok(&m.to_dense()),
        }
    }
}

impl<T: Real> ComplexMatrix<T> {
    fn into_perturbation(self) -> Perturbation<T> {
        Perturbation::Matrix(self)
    }
}

/// J Z for the symplectic form J = [0 I; -I 0].
fn j_times<T: Real>(z: &Dense<T>) -> Dense<T> {
    let n = z.nrows();
    let d = n / 2;
    let mut out = Dense::zeros(n, n);
    for i in 0..d {
        for j in 0..n {
            out[(i, j)] = z[(i + d, j)];
            out[(i + d, j)] = -z[(i, j)];
        }
    }
    out
}

/// J^{-1} Sym(J Z) for real Z.
fn hamiltonian_project<T: Real>(z: &Dense<T>) -> Dense<T> {
    let n = z.nrows();
    let d = n / 2;
    let jz = j_times(z);
    let half = cast::<T>(0.5);
    let mut sym = Dense::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            sym[(i, j)] = (jz[(i, j)] + jz[(j, i)]).scale(half);
        }
    }
    // J^{-1} M = -J M
    let mut out = Dense::zeros(n, n);
    for i in 0..d {
        for j in 0..n {
            out[(i, j)] = -sym[(i + d, j)];
            out[(i + d, j)] = sym[(i, j)];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix::{frobenius_inner, re_inner};
    use crate::linalg::random::{dense_complex, pattern, unit_cvec, Rng64};

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    fn all_kinds(n: usize, rng: &mut Rng64) -> Vec<StructureSpace<f64>> {
        let mut out = Vec::new();
        let pat = pattern(n, n * n / 4, rng);
        for field in [FieldKind::RealLinear, FieldKind::ComplexLinear] {
            out.push(StructureSpace::sparsity_pattern(n, pat.clone(), field).unwrap());
            out.push(StructureSpace::toeplitz(n, field));
            out.push(StructureSpace::hankel(n, field));
            out.push(StructureSpace::full(n, field));
            let b = crate::linalg::random::dense_real::<f64>(n, 3, rng);
            let cc = crate::linalg::random::dense_real::<f64>(4, n, rng);
            out.push(StructureSpace::range_corange(&b, &cc, field).unwrap());
        }
        if n % 2 == 0 {
            out.push(StructureSpace::hamiltonian(n).unwrap());
        }
        out
    }

    #[test]
    fn full_complex_projection_is_identity() {
        let mut rng = Rng64::seeded(1);
        let z = ComplexMatrix::Dense(dense_complex::<f64>(5, 5, &mut rng));
        let s = StructureSpace::full(5, FieldKind::ComplexLinear);
        let p = s.project(&z).unwrap();
        assert_eq!(p.to_dense(), z.to_dense());
    }

    #[test]
    fn toeplitz_diagonal_averaging_hand_value() {
        // [[1, 2], [3, 5]]: main diagonal {1, 5} averages to 3.
        let z = ComplexMatrix::Dense(Dense::from_real_rows(&[&[1.0, 2.0], &[3.0, 5.0]]));
        let s = StructureSpace::toeplitz(2, FieldKind::ComplexLinear);
        let p = s.project(&z).unwrap().to_dense();
        assert_eq!(p[(0, 0)], c(3.0, 0.0));
        assert_eq!(p[(0, 1)], c(2.0, 0.0));
        assert_eq!(p[(1, 0)], c(3.0, 0.0));
        assert_eq!(p[(1, 1)], c(3.0, 0.0));
    }

    #[test]
    fn hamiltonian_matrix_is_fixed_point() {
        // H = [[A, S1], [S2, -A^T]] with S1, S2 symmetric is Hamiltonian.
        let a = Dense::from_real_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let mut h = Dense::<f64>::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                h[(i, j)] = a[(i, j)];
                h[(i + 2, j + 2)] = -a[(j, i)];
            }
        }
        h[(0, 2)] = c(5.0, 0.0);
        h[(0, 3)] = c(1.0, 0.0);
        h[(1, 2)] = c(1.0, 0.0);
        h[(1, 3)] = c(-2.0, 0.0);
        h[(2, 0)] = c(7.0, 0.0);
        h[(2, 1)] = c(0.5, 0.0);
        h[(3, 0)] = c(0.5, 0.0);
        h[(3, 1)] = c(3.0, 0.0);
        let s = StructureSpace::hamiltonian(4).unwrap();
        let hm = ComplexMatrix::Dense(h.clone());
        assert!(s.is_member(&hm, 1e-14));
        let p = s.project(&hm).unwrap().to_dense();
        let mut diff = p;
        diff.axpy(c(-1.0, 0.0), &h);
        assert!(diff.max_abs() < 1e-14);
    }

    #[test]
    fn empty_pattern_projects_to_zero() {
        let s = StructureSpace::sparsity_pattern(3, vec![], FieldKind::ComplexLinear).unwrap();
        let mut rng = Rng64::seeded(2);
        let u = unit_cvec::<f64>(3, &mut rng);
        let v = unit_cvec::<f64>(3, &mut rng);
        let p = s.project_rank1(&u, &v).unwrap();
        assert_eq!(p.frobenius_norm(), 0.0);
    }

    #[test]
    fn single_entry_pattern_rank1() {
        let s = StructureSpace::sparsity_pattern(2, vec![(0, 0)], FieldKind::RealLinear).unwrap();
        let e1 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let p = s.project_rank1(&e1, &e1).unwrap();
        assert_eq!(p.get(0, 0), c(1.0, 0.0));
        assert_eq!(p.nnz_stored(), 1);
    }

    #[test]
    fn project_rank1_matches_dense_oracle_all_kinds() {
        let mut rng = Rng64::seeded(77);
        let n = 10;
        for s in all_kinds(n, &mut rng) {
            let u = unit_cvec::<f64>(n, &mut rng);
            let v = unit_cvec::<f64>(n, &mut rng);
            let fast = s.project_rank1(&u, &v).unwrap().to_dense();
            let mut outer = Dense::zeros(n, n);
            outer.add_outer(c(1.0, 0.0), &u, &v);
            let slow = s.project(&ComplexMatrix::Dense(outer)).unwrap().to_dense();
            let mut diff = fast.clone();
            diff.axpy(c(-1.0, 0.0), &slow);
            assert!(
                diff.max_abs() < 1e-14,
                "mismatch for {} ({})",
                s.kind_name(),
                s.field().name()
            );
        }
    }

    #[test]
    fn projection_invariants_all_kinds() {
        let mut rng = Rng64::seeded(4242);
        let n = 8;
        for s in all_kinds(n, &mut rng) {
            for _ in 0..6 {
                let z = ComplexMatrix::Dense(dense_complex::<f64>(n, n, &mut rng));
                let w = ComplexMatrix::Dense(dense_complex::<f64>(n, n, &mut rng));
                let pz = s.project(&z).unwrap();
                let pw = s.project(&w).unwrap();
                // Idempotency
                let ppz = s.project(&pz).unwrap();
                let mut diff = ppz.to_dense();
                diff.axpy(c(-1.0, 0.0), &pz.to_dense());
                assert!(diff.max_abs() < 1e-14, "idempotency {}", s.kind_name());
                // Self-adjointness in Re<.,.>
                let lhs = re_inner(&pz, &w).unwrap();
                let rhs = re_inner(&z, &pw).unwrap();
                assert!(
                    (lhs - rhs).abs() < 1e-12,
                    "self-adjointness {} {}",
                    s.kind_name(),
                    s.field().name()
                );
                // Nonexpansiveness
                assert!(pz.frobenius_norm() <= z.frobenius_norm() * (1.0 + 1e-13));
                // Membership
                assert!(s.is_member(&pz, 1e-12), "membership {}", s.kind_name());
                // Defining property of the orthogonal projection:
                // Re<Pi Z, W> = Re<Z, W> for all W in S.
                let wi = s.project(&w).unwrap();
                let l = re_inner(&pz, &wi).unwrap();
                let r = re_inner(&z, &wi).unwrap();
                assert!((l - r).abs() < 1e-12, "Pi-S property {}", s.kind_name());
            }
        }
    }

    #[test]
    fn dims_match_the_counting_rules() {
        let mut rng = Rng64::seeded(9);
        let n = 6;
        let pat = pattern(n, 11, &mut rng);
        let s =
            StructureSpace::<f64>::sparsity_pattern(n, pat.clone(), FieldKind::RealLinear).unwrap();
        assert_eq!(s.dim(), 11);
        let s = StructureSpace::<f64>::sparsity_pattern(n, pat, FieldKind::ComplexLinear).unwrap();
        assert_eq!(s.dim(), 22);
        assert_eq!(StructureSpace::<f64>::toeplitz(n, FieldKind::RealLinear).dim(), 2 * n - 1);
        assert_eq!(
            StructureSpace::<f64>::toeplitz(n, FieldKind::ComplexLinear).dim(),
            2 * (2 * n - 1)
        );
        assert_eq!(StructureSpace::<f64>::hamiltonian(6).unwrap().dim(), 2 * 9 + 3);
        let b = crate::linalg::random::dense_real::<f64>(n, 2, &mut rng);
        let cc = crate::linalg::random::dense_real::<f64>(3, n, &mut rng);
        let s = StructureSpace::range_corange(&b, &cc, FieldKind::RealLinear).unwrap();
        assert_eq!(s.dim(), 6);
        assert_eq!(StructureSpace::<f64>::full(n, FieldKind::ComplexLinear).dim(), 2 * n * n);
    }

    #[test]
    fn range_corange_matches_pinv_formula() {
        // Pi Z = B B~ Z C~ C with pseudo-inverses; check against the
        // normal-equation pseudo-inverse computed directly.
        let mut rng = Rng64::seeded(31);
        let n = 7;
        let b = crate::linalg::random::dense_real::<f64>(n, 3, &mut rng);
        let cc = crate::linalg::random::dense_real::<f64>(2, n, &mut rng);
        let s = StructureSpace::range_corange(&b, &cc, FieldKind::ComplexLinear).unwrap();
        let z = dense_complex::<f64>(n, n, &mut rng);
        let p = s.project(&ComplexMatrix::Dense(z.clone())).unwrap().to_dense();

        // B (B^T B)^{-1} B^T Z C^T (C C^T)^{-1} C via LU solves.
        let btb = b.adjoint().matmul(&b);
        let lu_b = crate::linalg::dense_eig::lu_factor(&btb).unwrap();
        let ctc = cc.matmul(&cc.adjoint());
        let lu_c = crate::linalg::dense_eig::lu_factor(&ctc).unwrap();
        let btz = b.adjoint().matmul(&z.matmul(&cc.adjoint())); // k x l
        let mut mid = Dense::zeros(3, 2);
        for j in 0..2 {
            let col = btz.col(j);
            let sol = lu_b.solve(&col);
            mid.set_col(j, &sol);
        }
        // Apply (C C^T)^{-1} from the right: row-wise solves, C C^T symmetric.
        let mut mid3 = Dense::zeros(3, 2);
        for i in 0..3 {
            let row: Vec<C<f64>> = (0..2).map(|j| mid[(i, j)]).collect();
            let sol = lu_c.solve(&row);
            for j in 0..2 {
                mid3[(i, j)] = sol[j];
            }
        }
        let oracle = b.matmul(&mid3.matmul(&cc));
        let mut diff = p;
        diff.axpy(c(-1.0, 0.0), &oracle);
        assert!(diff.max_abs() < 1e-11, "defect {}", diff.max_abs());
    }

    #[test]
    fn hamiltonian_needs_even_size() {
        assert!(StructureSpace::<f64>::hamiltonian(5).is_err());
    }

    #[test]
    fn rank_deficient_factors_rejected() {
        let mut rng = Rng64::seeded(5);
        let mut b = crate::linalg::random::dense_real::<f64>(6, 3, &mut rng);
        let col = b.col(0);
        b.set_col(1, &col);
        let cc = crate::linalg::random::dense_real::<f64>(2, 6, &mut rng);
        assert!(matches!(
            StructureSpace::range_corange(&b, &cc, FieldKind::RealLinear),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn sparse_input_stays_sparse_through_pattern_projection() {
        let mut rng = Rng64::seeded(8);
        let n = 30;
        let a = crate::linalg::random::sparse_real::<f64>(n, 0.1, &mut rng);
        let pat: Vec<(usize, usize)> = a.entries().iter().map(|&(i, j, _)| (i, j)).collect();
        let s = StructureSpace::sparsity_pattern(n, pat, FieldKind::RealLinear).unwrap();
        let z = ComplexMatrix::Sparse(a);
        let p = s.project(&z).unwrap();
        assert!(p.is_sparse());
        // Projection of a member is itself.
        let ip = frobenius_inner(&p, &z).unwrap();
        assert!((ip.re - z.frobenius_norm().powi(2)).abs() < 1e-10);
    }
}
