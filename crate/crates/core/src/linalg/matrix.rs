//! Dense and coordinate-sparse complex matrices with the Frobenius
//! inner-product kernels used throughout the crate.

use crate::error::{Error, Result};
use crate::scalar::{C, Real};

/// Conjugating dot product x* y.
pub fn vdot<T: Real>(x: &[C<T>], y: &[C<T>]) -> C<T> {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = C::new(T::zero(), T::zero());
    for (a, b) in x.iter().zip(y) {
        acc = acc + a.conj() * *b;
    }
    acc
}

/// Euclidean norm of a complex vector.
pub fn vnorm<T: Real>(x: &[C<T>]) -> T {
    // Two-pass scaling keeps this robust against overflow.
    let mut m = T::zero();
    for z in x {
        m = m.max(z.re.abs()).max(z.im.abs());
    }
    if m == T::zero() || !m.is_finite() {
        return m + m;
    }
    let mut acc = T::zero();
    for z in x {
        let re = z.re / m;
        let im = z.im / m;
        acc = acc + re * re + im * im;
    }
    m * acc.sqrt()
}

/// y += c * x
pub fn vaxpy<T: Real>(y: &mut [C<T>], c: C<T>, x: &[C<T>]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + c * *xi;
    }
}

/// x *= c
pub fn vscale<T: Real>(x: &mut [C<T>], c: C<T>) {
    for xi in x.iter_mut() {
        *xi = *xi * c;
    }
}

/// x / ||x||; returns an error when x is numerically zero.
pub fn vnormalize<T: Real>(x: &[C<T>]) -> Result<Vec<C<T>>> {
    let n = vnorm(x);
    if n <= T::zero() {
        return Err(Error::InvalidProblem("cannot normalize zero vector".into()));
    }
    Ok(x.iter().map(|z| z / n).collect())
}

/// Dense complex matrix, row major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Dense {
            nrows,
            ncols,
            data: vec![C::new(T::zero(), T::zero()); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C<T>>]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Dense { nrows, ncols, data }
    }

    /// Builds from a real row-major slice (imaginary parts zero).
    pub fn from_real_rows(rows: &[&[T]]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows == 0 { 0 } else { rows[0].len() };
        let mut m = Self::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = C::new(v, T::zero());
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn data(&self) -> &[C<T>] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C<T>] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [C<T>] {
        &mut self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn col(&self, j: usize) -> Vec<C<T>> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[C<T>]) {
        for i in 0..self.nrows {
            self[(i, j)] = v[i];
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Dense<T> {
        let mut out = Dense::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn transpose(&self) -> Dense<T> {
        let mut out = Dense::zeros(self.ncols, self.nrows);
        for i in 0..self.nrows {
            for j in 0..self.ncols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn conj(&self) -> Dense<T> {
        let mut out = self.clone();
        for z in out.data.iter_mut() {
            *z = z.conj();
        }
        out
    }

    pub fn scale(&self, c: C<T>) -> Dense<T> {
        let mut out = self.clone();
        for z in out.data.iter_mut() {
            *z = *z * c;
        }
        out
    }

    pub fn add(&self, other: &Dense<T>) -> Dense<T> {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a = *a + *b;
        }
        out
    }

    /// self += c * other
    pub fn axpy(&mut self, c: C<T>, other: &Dense<T>) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + c * *b;
        }
    }

    /// self += c * u v*
    pub fn add_outer(&mut self, c: C<T>, u: &[C<T>], v: &[C<T>]) {
        assert_eq!(u.len(), self.nrows);
        assert_eq!(v.len(), self.ncols);
        for i in 0..self.nrows {
            let cu = c * u[i];
            let row = self.row_mut(i);
            for (j, vj) in v.iter().enumerate() {
                row[j] = row[j] + cu * vj.conj();
            }
        }
    }

    pub fn matmul(&self, other: &Dense<T>) -> Dense<T> {
        assert_eq!(self.ncols, other.nrows);
        let mut out = Dense::zeros(self.nrows, other.ncols);
        for i in 0..self.nrows {
            for k in 0..self.ncols {
                let a = self[(i, k)];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                let orow = other.row(k).to_vec();
                let row = out.row_mut(i);
                for (j, &b) in orow.iter().enumerate() {
                    row[j] = row[j] + a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| {
                let mut acc = C::new(T::zero(), T::zero());
                for (j, &xj) in x.iter().enumerate() {
                    acc = acc + self[(i, j)] * xj;
                }
                acc
            })
            .collect()
    }

    /// A* x without forming the adjoint.
    pub fn matvec_adj(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.nrows);
        let mut out = vec![C::new(T::zero(), T::zero()); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for (j, out_j) in out.iter_mut().enumerate() {
                *out_j = *out_j + self[(i, j)].conj() * xi;
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        vnorm(&self.data)
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |m, z| m.max(z.re.abs()).max(z.im.abs()))
    }

    /// Re Z entrywise.
    pub fn real_part(&self) -> Dense<T> {
        let mut out = self.clone();
        for z in out.data.iter_mut() {
            *z = C::new(z.re, T::zero());
        }
        out
    }

    pub fn max_imag_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, z| m.max(z.im.abs()))
    }
}

impl<T: Real> std::ops::Index<(usize, usize)> for Dense<T> {
    type Output = C<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.data[i * self.ncols + j]
    }
}

impl<T: Real> std::ops::IndexMut<(usize, usize)> for Dense<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.data[i * self.ncols + j]
    }
}

/// Coordinate-sparse complex matrix. Entries are sorted by (row, col) and
/// contain no duplicates; this makes floating-point reductions reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct Sparse<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, C<T>)>,
}

impl<T: Real> Sparse<T> {
    /// Builds from triplets; rejects out-of-bounds indices and duplicates.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut entries: Vec<(usize, usize, C<T>)>,
    ) -> Result<Self> {
        for &(i, j, _) in &entries {
            if i >= nrows || j >= ncols {
                return Err(Error::dim(
                    "sparse construction",
                    format!("indices < ({nrows}, {ncols})"),
                    format!("({i}, {j})"),
                ));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::InvalidProblem(format!(
                    "duplicate sparse entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        Ok(Sparse {
            nrows,
            ncols,
            entries,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Sparse {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, C<T>)] {
        &self.entries
    }

    pub fn to_dense(&self) -> Dense<T> {
        let mut m = Dense::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] = v;
        }
        m
    }

    pub fn matvec(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.ncols);
        let mut out = vec![C::new(T::zero(), T::zero()); self.nrows];
        for &(i, j, v) in &self.entries {
            out[i] = out[i] + v * x[j];
        }
        out
    }

    pub fn matvec_adj(&self, x: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(x.len(), self.nrows);
        let mut out = vec![C::new(T::zero(), T::zero()); self.ncols];
        for &(i, j, v) in &self.entries {
            out[j] = out[j] + v.conj() * x[i];
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        let vals: Vec<C<T>> = self.entries.iter().map(|&(_, _, v)| v).collect();
        vnorm(&vals)
    }

    pub fn scale(&self, c: C<T>) -> Sparse<T> {
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            e.2 = e.2 * c;
        }
        out
    }

    /// Merge self + c*other over the union of the two (sorted) patterns.
    pub fn add_scaled(&self, c: C<T>, other: &Sparse<T>) -> Sparse<T> {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut entries = Vec::with_capacity(self.entries.len().max(other.entries.len()));
        let (mut a, mut b) = (0usize, 0usize);
        while a < self.entries.len() || b < other.entries.len() {
            let ka = self.entries.get(a).map(|e| (e.0, e.1));
            let kb = other.entries.get(b).map(|e| (e.0, e.1));
            match (ka, kb) {
                (Some(x), Some(y)) if x == y => {
                    entries.push((x.0, x.1, self.entries[a].2 + c * other.entries[b].2));
                    a += 1;
                    b += 1;
                }
                (Some(x), Some(y)) if x < y => {
                    entries.push(self.entries[a]);
                    a += 1;
                }
                (Some(_), Some(y)) => {
                    entries.push((y.0, y.1, c * other.entries[b].2));
                    b += 1;
                }
                (Some(_), None) => {
                    entries.push(self.entries[a]);
                    a += 1;
                }
                (None, Some(y)) => {
                    entries.push((y.0, y.1, c * other.entries[b].2));
                    b += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        Sparse {
            nrows: self.nrows,
            ncols: self.ncols,
            entries,
        }
    }
}

/// Complex matrix in either dense or coordinate-sparse layout.
#[derive(Clone, Debug, PartialEq)]
pub enum ComplexMatrix<T> {
    Dense(Dense<T>),
    Sparse(Sparse<T>),
}

impl<T: Real> ComplexMatrix<T> {
    pub fn nrows(&self) -> usize {
        match self {
            ComplexMatrix::Dense(m) => m.nrows(),
            ComplexMatrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            ComplexMatrix::Dense(m) => m.ncols(),
            ComplexMatrix::Sparse(m) => m.ncols(),
        }
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols()
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, ComplexMatrix::Sparse(_))
    }

    pub fn get(&self, i: usize, j: usize) -> C<T> {
        match self {
            ComplexMatrix::Dense(m) => m[(i, j)],
            ComplexMatrix::Sparse(m) => m
                .entries()
                .binary_search_by_key(&(i, j), |&(r, c, _)| (r, c))
                .map(|k| m.entries()[k].2)
                .unwrap_or_else(|_| C::new(T::zero(), T::zero())),
        }
    }

    pub fn to_dense(&self) -> Dense<T> {
        match self {
            ComplexMatrix::Dense(m) => m.clone(),
            ComplexMatrix::Sparse(m) => m.to_dense(),
        }
    }

    pub fn matvec(&self, x: &[C<T>]) -> Vec<C<T>> {
        match self {
            ComplexMatrix::Dense(m) => m.matvec(x),
            ComplexMatrix::Sparse(m) => m.matvec(x),
        }
    }

    pub fn matvec_adj(&self, x: &[C<T>]) -> Vec<C<T>> {
        match self {
            ComplexMatrix::Dense(m) => m.matvec_adj(x),
            ComplexMatrix::Sparse(m) => m.matvec_adj(x),
        }
    }

    pub fn frobenius_norm(&self) -> T {
        match self {
            ComplexMatrix::Dense(m) => m.frobenius_norm(),
            ComplexMatrix::Sparse(m) => m.frobenius_norm(),
        }
    }

    pub fn scale(&self, c: C<T>) -> ComplexMatrix<T> {
        match self {
            ComplexMatrix::Dense(m) => ComplexMatrix::Dense(m.scale(c)),
            ComplexMatrix::Sparse(m) => ComplexMatrix::Sparse(m.scale(c)),
        }
    }

    /// self + c * other. Stays sparse when both operands are sparse.
    pub fn add_scaled(&self, c: C<T>, other: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>> {
        if (self.nrows(), self.ncols()) != (other.nrows(), other.ncols()) {
            return Err(Error::dim(
                "add_scaled",
                format!("{}x{}", self.nrows(), self.ncols()),
                format!("{}x{}", other.nrows(), other.ncols()),
            ));
        }
        Ok(match (self, other) {
            (ComplexMatrix::Sparse(a), ComplexMatrix::Sparse(b)) => {
                ComplexMatrix::Sparse(a.add_scaled(c, b))
            }
            _ => {
                let mut d = self.to_dense();
                d.axpy(c, &other.to_dense());
                ComplexMatrix::Dense(d)
            }
        })
    }

    pub fn nnz_stored(&self) -> usize {
        match self {
            ComplexMatrix::Dense(m) => m.nrows() * m.ncols(),
            ComplexMatrix::Sparse(m) => m.nnz(),
        }
    }
}

impl<T: Real> From<Dense<T>> for ComplexMatrix<T> {
    fn from(m: Dense<T>) -> Self {
        ComplexMatrix::Dense(m)
    }
}

impl<T: Real> From<Sparse<T>> for ComplexMatrix<T> {
    fn from(m: Sparse<T>) -> Self {
        ComplexMatrix::Sparse(m)
    }
}

/// Frobenius inner product <X, Y> = sum conj(x_ij) y_ij.
pub fn frobenius_inner<T: Real>(x: &ComplexMatrix<T>, y: &ComplexMatrix<T>) -> Result<C<T>> {
    if (x.nrows(), x.ncols()) != (y.nrows(), y.ncols()) {
        return Err(Error::dim(
            "frobenius_inner",
            format!("{}x{}", x.nrows(), x.ncols()),
            format!("{}x{}", y.nrows(), y.ncols()),
        ));
    }
    let zero = C::new(T::zero(), T::zero());
    Ok(match (x, y) {
        (ComplexMatrix::Dense(a), ComplexMatrix::Dense(b)) => vdot(a.data(), b.data()),
        (ComplexMatrix::Sparse(a), ComplexMatrix::Sparse(b)) => {
            // Off-pattern entries are zero, so only the pattern intersection
            // contributes; both lists are sorted.
            let (mut i, mut j, mut acc) = (0usize, 0usize, zero);
            let (ea, eb) = (a.entries(), b.entries());
            while i < ea.len() && j < eb.len() {
                let ka = (ea[i].0, ea[i].1);
                let kb = (eb[j].0, eb[j].1);
                match ka.cmp(&kb) {
                    std::cmp::Ordering::Equal => {
                        acc = acc + ea[i].2.conj() * eb[j].2;
                        i += 1;
                        j += 1;
                    }
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                }
            }
            acc
        }
        (ComplexMatrix::Sparse(a), ComplexMatrix::Dense(b)) => {
            let mut acc = zero;
            for &(i, j, v) in a.entries() {
                acc = acc + v.conj() * b[(i, j)];
            }
            acc
        }
        (ComplexMatrix::Dense(a), ComplexMatrix::Sparse(b)) => {
            let mut acc = zero;
            for &(i, j, v) in b.entries() {
                acc = acc + a[(i, j)].conj() * v;
            }
            acc
        }
    })
}

/// Re <X, Y>, the real inner product used by all gradient formulas.
pub fn re_inner<T: Real>(x: &ComplexMatrix<T>, y: &ComplexMatrix<T>) -> Result<T> {
    Ok(frobenius_inner(x, y)?.re)
}

/// Relative comparison helper used in tests and certificates.
pub fn rel_err<T: Real>(approx: T, exact: T) -> T {
    (approx - exact).abs() / (T::one() + exact.abs())
}

pub(crate) fn c_zero<T: Real>() -> C<T> {
    C::new(T::zero(), T::zero())
}

pub(crate) fn c_one<T: Real>() -> C<T> {
    C::new(T::one(), T::zero())
}

pub(crate) fn c_re<T: Real>(x: T) -> C<T> {
    C::new(x, T::zero())
}
