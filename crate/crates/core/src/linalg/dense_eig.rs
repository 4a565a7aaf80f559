//! Dense complex nonsymmetric eigensolver: Parlett-Reinsch balancing,
//! Householder reduction to Hessenberg form, single-shift QR iteration with
//! Wilkinson shifts to a triangular Schur form, and eigenvector recovery by
//! back-substitution on the Schur factor (both left and right vectors come
//! from the same decomposition, which keeps them consistently paired).

use crate::error::{Error, Result};
use crate::linalg::matrix::{c_one, c_re, c_zero, vnorm, Dense};
use crate::scalar::{abs1, cast, C, Real};

/// Unitary Schur decomposition A = Q T Q* with T upper triangular.
#[derive(Clone, Debug)]
pub struct SchurForm<T> {
    pub q: Dense<T>,
    pub t: Dense<T>,
}

/// Parlett-Reinsch balancing (diagonal similarity, radix-2 scaling only).
/// Transforms `a` in place to D^{-1} A D and returns the diagonal of D.
pub(crate) fn balance<T: Real>(a: &mut Dense<T>) -> Vec<T> {
    let n = a.nrows();
    let two = cast::<T>(2.0);
    let four = cast::<T>(4.0);
    let gamma = cast::<T>(0.95);
    let mut d = vec![T::one(); n];
    loop {
        let mut converged = true;
        for i in 0..n {
            let mut c = T::zero();
            let mut r = T::zero();
            for j in 0..n {
                if j != i {
                    c = c + abs1(a[(j, i)]);
                    r = r + abs1(a[(i, j)]);
                }
            }
            if c == T::zero() || r == T::zero() || !c.is_finite() || !r.is_finite() {
                continue;
            }
            let s = c + r;
            let mut f = T::one();
            let g = r / two;
            while c < g {
                f = f * two;
                c = c * four;
            }
            let g = r * two;
            while c >= g {
                f = f / two;
                c = c / four;
            }
            if (c + r) / f < gamma * s {
                converged = false;
                d[i] = d[i] * f;
                let inv_f = T::one() / f;
                for j in 0..n {
                    let z = a[(i, j)];
                    a[(i, j)] = C::new(z.re * inv_f, z.im * inv_f);
                }
                for j in 0..n {
                    let z = a[(j, i)];
                    a[(j, i)] = C::new(z.re * f, z.im * f);
                }
            }
        }
        if converged {
            break;
        }
    }
    d
}

/// Complex Householder reflector for x: returns (v, tau, beta) with
/// (I - tau v v*) x = beta e1, v[0] = 1 and beta real.
fn householder<T: Real>(x: &[C<T>]) -> (Vec<C<T>>, C<T>, T) {
    let alpha = x[0];
    let xnorm = vnorm(&x[1..]);
    if xnorm == T::zero() && alpha.im == T::zero() {
        return (vec![c_zero(); x.len()], c_zero(), alpha.re);
    }
    let anorm = vnorm(&[alpha, C::new(xnorm, T::zero())]);
    let beta = if alpha.re >= T::zero() { -anorm } else { anorm };
    // P = I - tau v v* maps x to beta e1; unitarity forces this tau.
    let tau = (C::new(beta, T::zero()) - alpha.conj()) / beta;
    let denom = alpha - beta;
    let mut v = Vec::with_capacity(x.len());
    v.push(c_one());
    for &xi in &x[1..] {
        v.push(xi / denom);
    }
    (v, tau, beta)
}

/// In-place reduction to upper Hessenberg form; accumulates the unitary
/// transform into `q` (pass identity) so that A_in = Q H Q*.
pub(crate) fn hessenberg<T: Real>(h: &mut Dense<T>, q: &mut Dense<T>) {
    let n = h.nrows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let x: Vec<C<T>> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let (v, tau, beta) = householder(&x);
        if tau == c_zero() {
            continue;
        }
        // H <- (I - tau v v*) H on rows k+1.., cols k..
        for j in k..n {
            let mut s = c_zero::<T>();
            for (idx, vi) in v.iter().enumerate() {
                s = s + vi.conj() * h[(k + 1 + idx, j)];
            }
            s = s * tau;
            for (idx, vi) in v.iter().enumerate() {
                let e = h[(k + 1 + idx, j)];
                h[(k + 1 + idx, j)] = e - s * *vi;
            }
        }
        // H <- H (I - conj(tau) v v*) on cols k+1.., all rows
        let tauc = tau.conj();
        for i in 0..n {
            let mut s = c_zero::<T>();
            for (idx, vi) in v.iter().enumerate() {
                s = s + h[(i, k + 1 + idx)] * *vi;
            }
            s = s * tauc;
            for (idx, vi) in v.iter().enumerate() {
                let e = h[(i, k + 1 + idx)];
                h[(i, k + 1 + idx)] = e - s * vi.conj();
            }
        }
        // Q <- Q (I - conj(tau) v v*)
        for i in 0..n {
            let mut s = c_zero::<T>();
            for (idx, vi) in v.iter().enumerate() {
                s = s + q[(i, k + 1 + idx)] * *vi;
            }
            s = s * tauc;
            for (idx, vi) in v.iter().enumerate() {
                let e = q[(i, k + 1 + idx)];
                q[(i, k + 1 + idx)] = e - s * vi.conj();
            }
        }
        h[(k + 1, k)] = c_re(beta);
        for i in k + 2..n {
            h[(i, k)] = c_zero();
        }
    }
}

/// Givens rotation [c s; -conj(s) c] with real c annihilating b:
/// returns (c, s, r) with c*a + s*b = r, -conj(s)*a + c*b = 0.
fn givens<T: Real>(a: C<T>, b: C<T>) -> (T, C<T>, C<T>) {
    let an = a.norm();
    let bn = b.norm();
    if bn == T::zero() {
        return (T::one(), c_zero(), a);
    }
    if an == T::zero() {
        return (T::zero(), crate::scalar::unit_phase(b.conj()), C::new(bn, T::zero()));
    }
    let scale = an.max(bn);
    let rn = scale * ((an / scale) * (an / scale) + (bn / scale) * (bn / scale)).sqrt();
    let c = an / rn;
    let phase = a / an;
    let s = phase * b.conj() / rn;
    let r = phase * rn;
    (c, s, r)
}

/// Eigenvalues of a complex 2x2 matrix [[a, b], [c, d]].
fn eig2x2<T: Real>(a: C<T>, b: C<T>, c: C<T>, d: C<T>) -> (C<T>, C<T>) {
    let half = cast::<T>(0.5);
    let mid = (a + d) * half;
    let delta = (a - d) * half;
    let disc = (delta * delta + b * c).sqrt();
    (mid + disc, mid - disc)
}

/// Single-shift QR iteration on an upper Hessenberg matrix, accumulating the
/// rotations into `q`. On return `h` is upper triangular.
pub(crate) fn hessenberg_qr<T: Real>(h: &mut Dense<T>, q: &mut Dense<T>) -> Result<()> {
    let n = h.nrows();
    if n == 0 {
        return Ok(());
    }
    let eps = T::epsilon();
    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm = anorm + abs1(h[(i, j)]);
        }
    }
    if anorm == T::zero() {
        return Ok(());
    }
    let smlnum = T::min_positive_value() / eps;

    let mut hi = n - 1;
    let mut its = 0usize;
    let mut total = 0usize;
    let budget = 60 * n.max(1);
    loop {
        // Deflation scan: find lo such that h[lo, lo-1] is negligible.
        let mut lo = hi;
        while lo > 0 {
            let sub = abs1(h[(lo, lo - 1)]);
            let mut tst = abs1(h[(lo - 1, lo - 1)]) + abs1(h[(lo, lo)]);
            if tst == T::zero() {
                tst = anorm;
            }
            if sub <= (eps * tst).max(smlnum) {
                h[(lo, lo - 1)] = c_zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            // 1x1 block converged.
            if hi == 0 {
                return Ok(());
            }
            hi -= 1;
            its = 0;
            continue;
        }

        its += 1;
        total += 1;
        if its > 120 || total > budget {
            return Err(Error::EigConvergence {
                context: format!("QR iteration stalled at block [{lo}, {hi}]"),
            });
        }

        // Shift selection.
        let mu = if its % 30 == 0 {
            // Exceptional shift.
            let w = abs1(h[(hi, hi - 1)])
                + if hi >= 2 { abs1(h[(hi - 1, hi - 2)]) } else { T::zero() };
            h[(hi, hi)] + C::new(w, T::zero())
        } else {
            let (l1, l2) = eig2x2(
                h[(hi - 1, hi - 1)],
                h[(hi - 1, hi)],
                h[(hi, hi - 1)],
                h[(hi, hi)],
            );
            let d = h[(hi, hi)];
            if (l1 - d).norm() <= (l2 - d).norm() {
                l1
            } else {
                l2
            }
        };

        // Explicit shifted QR sweep on the window [lo, hi].
        for i in lo..=hi {
            h[(i, i)] = h[(i, i)] - mu;
        }
        let mut rots: Vec<(T, C<T>)> = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let (c, s, r) = givens(h[(i, i)], h[(i + 1, i)]);
            h[(i, i)] = r;
            h[(i + 1, i)] = c_zero();
            for j in i + 1..n {
                let x = h[(i, j)];
                let y = h[(i + 1, j)];
                h[(i, j)] = x * c + s * y;
                h[(i + 1, j)] = -s.conj() * x + y * c;
            }
            rots.push((c, s));
        }
        for (idx, &(c, s)) in rots.iter().enumerate() {
            let i = lo + idx;
            // Columns i, i+1 of H over rows 0..=i+1, and of Q over all rows.
            for r in 0..=(i + 1).min(hi) {
                let x = h[(r, i)];
                let y = h[(r, i + 1)];
                h[(r, i)] = x * c + y * s.conj();
                h[(r, i + 1)] = -s * x + y * c;
            }
            for r in 0..n {
                let x = q[(r, i)];
                let y = q[(r, i + 1)];
                q[(r, i)] = x * c + y * s.conj();
                q[(r, i + 1)] = -s * x + y * c;
            }
        }
        for i in lo..=hi {
            h[(i, i)] = h[(i, i)] + mu;
        }
    }
}

/// Unitary Schur decomposition of a general complex matrix.
pub fn schur<T: Real>(a: &Dense<T>) -> Result<SchurForm<T>> {
    if !a.is_square() {
        return Err(Error::dim(
            "schur",
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    let n = a.nrows();
    let mut t = a.clone();
    let mut q = Dense::identity(n);
    hessenberg(&mut t, &mut q);
    hessenberg_qr(&mut t, &mut q)?;
    // Clean the (exactly known) zero strictly-lower part.
    for i in 0..n {
        for j in 0..i {
            t[(i, j)] = c_zero();
        }
    }
    Ok(SchurForm { q, t })
}

impl<T: Real> SchurForm<T> {
    pub fn n(&self) -> usize {
        self.t.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<C<T>> {
        (0..self.n()).map(|i| self.t[(i, i)]).collect()
    }

    /// Right eigenvector for the eigenvalue at diagonal position `j`,
    /// by back-substitution on the triangular factor. Unit norm.
    pub fn right_eigenvector(&self, j: usize) -> Vec<C<T>> {
        let n = self.n();
        let t = &self.t;
        let lambda = t[(j, j)];
        let tnorm = t.max_abs().max(T::min_positive_value());
        let smin = (T::epsilon() * tnorm).max(T::min_positive_value() / T::epsilon());
        let big = T::one() / (T::epsilon() * T::epsilon());
        let mut w = vec![c_zero::<T>(); j + 1];
        w[j] = c_one();
        for i in (0..j).rev() {
            let mut sum = c_zero::<T>();
            for (k, wk) in w.iter().enumerate().take(j + 1).skip(i + 1) {
                sum = sum + t[(i, k)] * *wk;
            }
            let mut den = t[(i, i)] - lambda;
            if abs1(den) < smin {
                den = C::new(smin, T::zero());
            }
            w[i] = -sum / den;
            let mag = abs1(w[i]);
            if mag > big {
                let sc = T::one() / mag;
                for wk in w.iter_mut().skip(i) {
                    *wk = wk.scale(sc);
                }
            }
        }
        // y = Q[:, 0..=j] w
        let mut y = vec![c_zero::<T>(); n];
        for (k, wk) in w.iter().enumerate() {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = *yi + self.q[(i, k)] * *wk;
            }
        }
        let nrm = vnorm(&y);
        y.iter().map(|z| z / nrm).collect()
    }

    /// Left eigenvector for the eigenvalue at diagonal position `j`:
    /// x with x* A = lambda x*. Unit norm.
    pub fn left_eigenvector(&self, j: usize) -> Vec<C<T>> {
        let n = self.n();
        let t = &self.t;
        let lambda = t[(j, j)];
        let tnorm = t.max_abs().max(T::min_positive_value());
        let smin = (T::epsilon() * tnorm).max(T::min_positive_value() / T::epsilon());
        let big = T::one() / (T::epsilon() * T::epsilon());
        // wbar[i] = conj(z_i) for the row vector z* T = lambda z*.
        let mut wbar = vec![c_zero::<T>(); n];
        wbar[j] = c_one();
        for i in j + 1..n {
            let mut sum = c_zero::<T>();
            for (k, wk) in wbar.iter().enumerate().take(i).skip(j) {
                sum = sum + *wk * t[(k, i)];
            }
            let mut den = t[(i, i)] - lambda;
            if abs1(den) < smin {
                den = C::new(smin, T::zero());
            }
            wbar[i] = -sum / den;
            let mag = abs1(wbar[i]);
            if mag > big {
                let sc = T::one() / mag;
                for wk in wbar.iter_mut().take(i + 1).skip(j) {
                    *wk = wk.scale(sc);
                }
            }
        }
        let mut x = vec![c_zero::<T>(); n];
        for (k, wk) in wbar.iter().enumerate().skip(j) {
            let zk = wk.conj();
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = *xi + self.q[(i, k)] * zk;
            }
        }
        let nrm = vnorm(&x);
        x.iter().map(|z| z / nrm).collect()
    }

    /// Swaps the adjacent diagonal entries at positions (i, i+1) by a
    /// unitary similarity, keeping T triangular and updating Q.
    pub(crate) fn swap_adjacent(&mut self, i: usize) {
        let n = self.n();
        let t11 = self.t[(i, i)];
        let t12 = self.t[(i, i + 1)];
        let t22 = self.t[(i + 1, i + 1)];
        // Eigenvector of the 2x2 block for t22 is [t12, t22 - t11].
        let w1 = t12;
        let w2 = t22 - t11;
        let nrm = vnorm(&[w1, w2]);
        if nrm == T::zero() {
            return; // equal eigenvalues, nothing to reorder
        }
        // Unitary G = [g11 g12; g21 g22] with first column w / ||w||.
        let g11 = w1 / nrm;
        let g21 = w2 / nrm;
        let g12 = -g21.conj();
        let g22 = g11.conj();
        // T <- G* T G on rows/cols (i, i+1); Q <- Q G.
        for jj in i..n {
            let a = self.t[(i, jj)];
            let b = self.t[(i + 1, jj)];
            self.t[(i, jj)] = g11.conj() * a + g21.conj() * b;
            self.t[(i + 1, jj)] = g12.conj() * a + g22.conj() * b;
        }
        for r in 0..=i + 1 {
            let a = self.t[(r, i)];
            let b = self.t[(r, i + 1)];
            self.t[(r, i)] = a * g11 + b * g21;
            self.t[(r, i + 1)] = a * g12 + b * g22;
        }
        for r in 0..self.q.nrows() {
            let a = self.q[(r, i)];
            let b = self.q[(r, i + 1)];
            self.q[(r, i)] = a * g11 + b * g21;
            self.q[(r, i + 1)] = a * g12 + b * g22;
        }
        self.t[(i + 1, i)] = c_zero();
    }

    /// Stable selection-sort of the diagonal by ascending key, via adjacent
    /// unitary swaps. Only the leading `k` positions are guaranteed sorted.
    pub(crate) fn order_leading_by_key(&mut self, k: usize, key: impl Fn(C<T>) -> T) {
        let n = self.n();
        for pos in 0..k.min(n) {
            let mut best = pos;
            let mut best_key = key(self.t[(best, best)]);
            for cand in pos + 1..n {
                let ck = key(self.t[(cand, cand)]);
                if ck < best_key {
                    best = cand;
                    best_key = ck;
                }
            }
            // Bubble `best` down to `pos`.
            let mut m = best;
            while m > pos {
                self.swap_adjacent(m - 1);
                m -= 1;
            }
        }
    }
}

/// Householder QR with column pivoting; returns an orthonormal basis of the
/// range of `a` (m x k, requires m >= k) after verifying full column rank.
pub(crate) fn orthonormal_range<T: Real>(a: &Dense<T>, what: &'static str) -> Result<Dense<T>> {
    let m = a.nrows();
    let k = a.ncols();
    if m < k {
        return Err(Error::dim(what, "tall matrix (rows >= cols)", format!("{m}x{k}")));
    }
    let mut r = a.clone();
    let mut reflectors: Vec<(usize, Vec<C<T>>, C<T>)> = Vec::with_capacity(k);
    let mut col_norms: Vec<T> = (0..k).map(|j| vnorm(&r.col(j))).collect();
    let mut rdiag: Vec<T> = Vec::with_capacity(k);
    for j in 0..k {
        // Column pivot: swap in the column of largest remaining norm.
        let mut p = j;
        for cnd in j + 1..k {
            if col_norms[cnd] > col_norms[p] {
                p = cnd;
            }
        }
        if p != j {
            for i in 0..m {
                let tmp = r[(i, j)];
                r[(i, j)] = r[(i, p)];
                r[(i, p)] = tmp;
            }
            col_norms.swap(j, p);
        }
        let x: Vec<C<T>> = (j..m).map(|i| r[(i, j)]).collect();
        let (v, tau, beta) = householder(&x);
        rdiag.push(beta.abs());
        if tau != c_zero() {
            for jj in j..k {
                let mut s = c_zero::<T>();
                for (idx, vi) in v.iter().enumerate() {
                    s = s + vi.conj() * r[(j + idx, jj)];
                }
                s = s * tau;
                for (idx, vi) in v.iter().enumerate() {
                    let e = r[(j + idx, jj)];
                    r[(j + idx, jj)] = e - s * *vi;
                }
            }
        }
        reflectors.push((j, v, tau));
        for (cnd, norm) in col_norms.iter_mut().enumerate().skip(j + 1) {
            *norm = vnorm(&(j + 1..m).map(|i| r[(i, cnd)]).collect::<Vec<_>>());
        }
    }
    let tol_rank = cast::<T>(m.max(k) as f64) * T::epsilon() * rdiag[0].max(T::min_positive_value());
    if rdiag.iter().any(|&d| d <= tol_rank) {
        return Err(Error::RankDeficient { what });
    }
    // Q = P_0* ... P_{k-1}* applied to the leading k columns of the identity.
    let mut q = Dense::<T>::zeros(m, k);
    for j in 0..k {
        q[(j, j)] = c_one();
    }
    for (j, v, tau) in reflectors.iter().rev() {
        if *tau == c_zero() {
            continue;
        }
        let tauc = tau.conj();
        for jj in 0..k {
            let mut s = c_zero::<T>();
            for (idx, vi) in v.iter().enumerate() {
                s = s + vi.conj() * q[(*j + idx, jj)];
            }
            s = s * tauc;
            for (idx, vi) in v.iter().enumerate() {
                let e = q[(*j + idx, jj)];
                q[(*j + idx, jj)] = e - s * *vi;
            }
        }
    }
    Ok(q)
}

/// LU factorization with partial pivoting of a square complex matrix.
pub struct Lu<T> {
    lu: Dense<T>,
    piv: Vec<usize>,
}

pub fn lu_factor<T: Real>(a: &Dense<T>) -> Result<Lu<T>> {
    if !a.is_square() {
        return Err(Error::dim(
            "lu",
            "square matrix",
            format!("{}x{}", a.nrows(), a.ncols()),
        ));
    }
    let n = a.nrows();
    let mut lu = a.clone();
    let mut piv = Vec::with_capacity(n);
    for k in 0..n {
        let mut p = k;
        let mut pmax = abs1(lu[(k, k)]);
        for i in k + 1..n {
            let m = abs1(lu[(i, k)]);
            if m > pmax {
                pmax = m;
                p = i;
            }
        }
        if pmax == T::zero() {
            return Err(Error::RankDeficient { what: "LU factor" });
        }
        piv.push(p);
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            let m = lu[(i, k)] / pivot;
            lu[(i, k)] = m;
            if m != c_zero() {
                for j in k + 1..n {
                    let e = lu[(k, j)];
                    lu[(i, j)] = lu[(i, j)] - m * e;
                }
            }
        }
    }
    Ok(Lu { lu, piv })
}

impl<T: Real> Lu<T> {
    pub fn n(&self) -> usize {
        self.lu.nrows()
    }

    /// Solves A x = b.
    pub fn solve(&self, b: &[C<T>]) -> Vec<C<T>> {
        let n = self.n();
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for k in 0..n {
            let xk = x[k];
            for i in k + 1..n {
                x[i] = x[i] - self.lu[(i, k)] * xk;
            }
        }
        for k in (0..n).rev() {
            x[k] = x[k] / self.lu[(k, k)];
            let xk = x[k];
            for i in 0..k {
                x[i] = x[i] - self.lu[(i, k)] * xk;
            }
        }
        x
    }

    /// Solves A* x = b using the same factorization.
    pub fn solve_adj(&self, b: &[C<T>]) -> Vec<C<T>> {
        // P A = L U  =>  A* = U* L* P, so solve U* z = b, L* w = z, x = P^T w.
        let n = self.n();
        let mut z = b.to_vec();
        for k in 0..n {
            let mut s = z[k];
            for i in 0..k {
                s = s - self.lu[(i, k)].conj() * z[i];
            }
            z[k] = s / self.lu[(k, k)].conj();
        }
        for k in (0..n).rev() {
            let mut s = z[k];
            for i in k + 1..n {
                s = s - self.lu[(i, k)].conj() * z[i];
            }
            z[k] = s;
        }
        for k in (0..n).rev() {
            z.swap(k, self.piv[k]);
        }
        z
    }
}
