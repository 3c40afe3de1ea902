//! Dense complex linear algebra for operator dimensions up to 2^N.
//!
//! Everything here is sized for desk-scale quantum simulation (N <= 10
//! qubits): Hermitian eigendecomposition via cyclic Jacobi, Kronecker
//! products, Cholesky solves for ridge systems, and Hilbert-Schmidt inner
//! products. All operations are pure functions of their inputs.

use num_complex::Complex64;

use crate::{tol, Error, Result};

/// Dense complex matrix in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(rows * cols, data.len(), "entry count must match dimensions");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Build from a nested array of (re, im) pairs; test and example helper.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len());
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for r in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..self.cols {
                acc += self.get(r, c) * v[c];
            }
            out[r] = acc;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let data = self.data.iter().map(|a| a * s).collect();
        Self::new(self.rows, self.cols, data)
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// In-place accumulate `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &Self) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max entrywise deviation from Hermiticity, max |A - A^dag|.
    pub fn hermiticity_deviation(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut max = 0.0f64;
        for r in 0..self.rows {
            for c in r..self.cols {
                let d = (self.get(r, c) - self.get(c, r).conj()).norm();
                if d > max {
                    max = d;
                }
            }
        }
        max
    }

    pub fn check_hermitian(&self, tolerance: f64) -> Result<()> {
        let deviation = self.hermiticity_deviation();
        if deviation > tolerance {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    /// (A + A^dag) / 2, used to absorb roundoff before eigensolving.
    pub fn symmetrize(&self) -> Self {
        let mut out = self.clone();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = (self.get(r, c) + self.get(c, r).conj()) * 0.5;
                out.set(r, c, v);
            }
        }
        out
    }

    /// Outer product |u><v| of two column vectors.
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Self {
        let mut out = Self::zeros(u.len(), v.len());
        for r in 0..u.len() {
            for c in 0..v.len() {
                out.set(r, c, u[r] * v[c].conj());
            }
        }
        out
    }

    /// Conjugation U A U^dag.
    pub fn conjugate_by(&self, u: &Self) -> Self {
        u.mul(self).mul(&u.adjoint())
    }
}

/// Dense real matrix in row-major order; used for Gram matrices, feature
/// matrices and readout weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "entry count must match dimensions");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_column(v: &[f64]) -> Self {
        Self::new(v.len(), 1, v.to_vec())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c));
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions must agree");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(self.rows, self.cols, data)
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Self::new(self.rows, self.cols, data)
    }

    pub fn scale(&self, s: f64) -> Self {
        let data = self.data.iter().map(|a| a * s).collect();
        Self::new(self.rows, self.cols, data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Add `s` to every diagonal entry (ridge shift).
    pub fn shifted_diagonal(&self, s: f64) -> Self {
        assert_eq!(self.rows, self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            out.set(i, i, out.get(i, i) + s);
        }
        out
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors.
    pub eigenvectors: ComplexMatrix,
}

impl EigenDecomposition {
    /// Reassemble V diag(f(lambda)) V^dag.
    pub fn assemble(&self, f: impl Fn(f64) -> Complex64) -> ComplexMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let flam = f(lambda);
            for r in 0..n {
                let vr = v.get(r, k);
                for c in 0..n {
                    let val = out.get(r, c) + flam * vr * v.get(c, k).conj();
                    out.set(r, c, val);
                }
            }
        }
        out
    }
}

/// Kronecker product; the first factor occupies the more significant index
/// bits (qubit 0 is most significant throughout the crate).
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let mut out = ComplexMatrix::zeros(a.rows() * b.rows(), a.cols() * b.cols());
    for ar in 0..a.rows() {
        for ac in 0..a.cols() {
            let av = a.get(ar, ac);
            if av.norm_sqr() == 0.0 {
                continue;
            }
            for br in 0..b.rows() {
                for bc in 0..b.cols() {
                    out.set(ar * b.rows() + br, ac * b.cols() + bc, av * b.get(br, bc));
                }
            }
        }
    }
    out
}

/// Kronecker product of two state vectors.
pub fn kron_vec(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

/// Eigendecomposition of a Hermitian matrix via cyclic Jacobi sweeps.
///
/// The input is checked for Hermiticity and symmetrized before iterating,
/// so accumulated roundoff from upstream matrix products cannot push the
/// solver off the Hermitian manifold. Eigenvalues are returned ascending.
pub fn hermitian_eig(h: &ComplexMatrix) -> Result<EigenDecomposition> {
    hermitian_eig_tol(h, tol::HERMITICITY)
}

/// Same as [`hermitian_eig`] with a caller-supplied Hermiticity tolerance.
pub fn hermitian_eig_tol(h: &ComplexMatrix, herm_tol: f64) -> Result<EigenDecomposition> {
    if h.rows() != h.cols() {
        return Err(Error::dim(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            h.rows(),
            h.cols()
        )));
    }
    h.check_hermitian(herm_tol)?;
    let n = h.rows();
    let mut a = h.symmetrize();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let threshold = tol::JACOBI_OFFDIAG * scale;

    for _sweep in 0..tol::JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a.get(p, q).norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors.set(r, k, v.get(r, src));
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// One complex Jacobi rotation annihilating the (p, q) entry of `a`.
fn jacobi_rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    let r = apq.norm();
    if r == 0.0 {
        return;
    }
    // Phase factor turning the off-diagonal entry real, then a real
    // Jacobi rotation on the phase-adjusted 2x2 block.
    let phase = apq / r;
    let app = a.get(p, p).re;
    let aqq = a.get(q, q).re;
    let tau = (aqq - app) / (2.0 * r);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // Combined unitary J = diag(1, conj(phase)) * [[c, s], [-s, c]] on the
    // (p, q) block: J_pp = c, J_pq = s, J_qp = -s*conj(phase),
    // J_qq = c*conj(phase). A <- J^dag A J, V <- V J.
    let sp = Complex64::new(s, 0.0) * phase;
    let n = a.rows();

    // Rows: row_p' = c*row_p - s*phase*row_q, row_q' = s*row_p + c*phase*row_q.
    for col in 0..n {
        let apc = a.get(p, col);
        let aqc = a.get(q, col);
        a.set(p, col, apc * c - aqc * sp);
        a.set(q, col, apc * s + aqc * (phase * c));
    }
    // Columns: col_p' = c*col_p - s*conj(phase)*col_q,
    //          col_q' = s*col_p + c*conj(phase)*col_q.
    for row in 0..n {
        let arp = a.get(row, p);
        let arq = a.get(row, q);
        a.set(row, p, arp * c - arq * sp.conj());
        a.set(row, q, arp * s + arq * (phase.conj() * c));
    }
    for row in 0..n {
        let vrp = v.get(row, p);
        let vrq = v.get(row, q);
        v.set(row, p, vrp * c - vrq * sp.conj());
        v.set(row, q, vrp * s + vrq * (phase.conj() * c));
    }
    // Clean the annihilated pair exactly.
    a.set(p, q, Complex64::new(0.0, 0.0));
    a.set(q, p, Complex64::new(0.0, 0.0));
}

/// exp(-i t H) for Hermitian H, via eigendecomposition.
pub fn hermitian_expm(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(h)?;
    Ok(eig.assemble(|lambda| Complex64::from_polar(1.0, -t * lambda)))
}

/// Solve A X = B for symmetric positive-definite A via Cholesky (no pivoting).
pub fn spd_solve(a: &RealMatrix, b: &RealMatrix) -> Result<RealMatrix> {
    if a.rows() != a.cols() {
        return Err(Error::dim(format!(
            "SPD solve needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if a.rows() != b.rows() {
        return Err(Error::dim(format!(
            "right-hand side has {} rows, expected {}",
            b.rows(),
            a.rows()
        )));
    }
    let n = a.rows();
    // Lower-triangular Cholesky factor, row-major.
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPositiveDefinite {
                        index: i,
                        pivot: sum,
                    });
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }

    let mut x = RealMatrix::zeros(n, b.cols());
    for col in 0..b.cols() {
        // Forward substitution L y = b.
        let mut y = vec![0.0f64; n];
        for i in 0..n {
            let mut sum = b.get(i, col);
            for k in 0..i {
                sum -= l[i * n + k] * y[k];
            }
            y[i] = sum / l[i * n + i];
        }
        // Back substitution L^T x = y.
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in (i + 1)..n {
                sum -= l[k * n + i] * x.get(k, col);
            }
            x.set(i, col, sum / l[i * n + i]);
        }
    }
    Ok(x)
}

/// Hilbert-Schmidt inner product tr(A B) of two Hermitian matrices.
///
/// For Hermitian A, B the trace is real; any imaginary residue above
/// [`tol::REAL_TRACE`] is reported as an error, smaller residues are
/// discarded.
pub fn hs_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    if a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols() {
        return Err(Error::dim(format!(
            "HS inner product needs equal square matrices, got {}x{} and {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    let n = a.rows();
    let mut acc = Complex64::new(0.0, 0.0);
    // tr(AB) = sum_{r,k} A[r,k] B[k,r]
    for r in 0..n {
        for k in 0..n {
            acc += a.get(r, k) * b.get(k, r);
        }
    }
    if acc.im.abs() > tol::REAL_TRACE {
        return Err(Error::NonRealResult { imag: acc.im.abs() });
    }
    Ok(acc.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn sigma_x() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]])
    }

    pub fn sigma_z() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[vec![c(1., 0.), c(0., 0.)], vec![c(0., 0.), c(-1., 0.)]])
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            m.set(r, r, c(rng.gen_range(-1.0..1.0), 0.0));
            for col in (r + 1)..n {
                let v = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                m.set(r, col, v);
                m.set(col, r, v.conj());
            }
        }
        m
    }

    #[test]
    fn kron_pauli_x_z() {
        let k = kron(&sigma_x(), &sigma_z());
        let expected = ComplexMatrix::from_rows(&[
            vec![c(0., 0.), c(0., 0.), c(1., 0.), c(0., 0.)],
            vec![c(0., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)],
            vec![c(1., 0.), c(0., 0.), c(0., 0.), c(0., 0.)],
            vec![c(0., 0.), c(-1., 0.), c(0., 0.), c(0., 0.)],
        ]);
        assert!(k.sub(&expected).frobenius_norm() < 1e-15);
    }

    #[test]
    fn kron_identity_is_block_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_hermitian(3, &mut rng);
        let k = kron(&ComplexMatrix::identity(2), &a);
        for r in 0..3 {
            for col in 0..3 {
                assert_eq!(k.get(r, col), a.get(r, col));
                assert_eq!(k.get(3 + r, 3 + col), a.get(r, col));
                assert_eq!(k.get(r, 3 + col), c(0., 0.));
            }
        }
    }

    #[test]
    fn kron_norm_is_product_of_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_hermitian(3, &mut rng);
        let b = random_hermitian(3, &mut rng);
        let k = kron(&a, &b);
        let expected = a.frobenius_norm() * b.frobenius_norm();
        assert!((k.frobenius_norm() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn eig_sigma_z_spectrum() {
        let eig = hermitian_eig(&sigma_z()).unwrap();
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_identity() {
        let eig = hermitian_eig(&ComplexMatrix::identity(4)).unwrap();
        for lambda in &eig.eigenvalues {
            assert!((lambda - 1.0).abs() < 1e-14);
        }
        let v = &eig.eigenvectors;
        let vvd = v.mul(&v.adjoint());
        assert!(vvd.sub(&ComplexMatrix::identity(4)).frobenius_norm() < 1e-10);
    }

    #[test]
    fn eig_reconstruction_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let h = random_hermitian(8, &mut rng);
            let eig = hermitian_eig(&h).unwrap();
            let rec = eig.assemble(|l| c(l, 0.0));
            let rel = rec.sub(&h).frobenius_norm() / h.frobenius_norm();
            assert!(rel <= 1e-10, "reconstruction residual {rel:e}");
            let v = &eig.eigenvectors;
            let unit = v.mul(&v.adjoint()).sub(&ComplexMatrix::identity(8));
            assert!(unit.frobenius_norm() < 1e-10);
            for w in eig.eigenvalues.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn eig_trace_equals_eigenvalue_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_hermitian(6, &mut rng);
        let eig = hermitian_eig(&h).unwrap();
        let sum: f64 = eig.eigenvalues.iter().sum();
        assert!((sum - h.trace().re).abs() < 1e-10);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let mut m = ComplexMatrix::identity(2);
        m.set(0, 1, c(0.5, 0.0));
        assert!(matches!(
            hermitian_eig(&m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn expm_sigma_z_pi() {
        let u = hermitian_expm(&sigma_z(), std::f64::consts::PI).unwrap();
        let minus_one = ComplexMatrix::identity(2).scale_re(-1.0);
        assert!(u.sub(&minus_one).frobenius_norm() < 1e-12);
    }

    #[test]
    fn expm_zero_time_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = random_hermitian(4, &mut rng);
        let u = hermitian_expm(&h, 0.0).unwrap();
        assert!(u.sub(&ComplexMatrix::identity(4)).frobenius_norm() < 1e-12);
    }

    /// Scaled-and-squared Taylor series, independent of the eigensolver path.
    fn expm_taylor(h: &ComplexMatrix, t: f64) -> ComplexMatrix {
        let n = h.rows();
        let scaled = h.scale(c(0.0, -t / 1024.0));
        let mut term = ComplexMatrix::identity(n);
        let mut sum = ComplexMatrix::identity(n);
        for k in 1..20 {
            term = term.mul(&scaled).scale_re(1.0 / k as f64);
            sum = sum.add(&term);
        }
        for _ in 0..10 {
            sum = sum.mul(&sum);
        }
        sum
    }

    #[test]
    fn expm_matches_taylor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_hermitian(4, &mut rng);
        let u = hermitian_expm(&h, 0.7).unwrap();
        let oracle = expm_taylor(&h, 0.7);
        assert!(u.sub(&oracle).frobenius_norm() < 1e-9);
    }

    #[test]
    fn expm_inverse_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(5, &mut rng);
        let u = hermitian_expm(&h, 1.3).unwrap();
        let uinv = hermitian_expm(&h, -1.3).unwrap();
        let prod = u.mul(&uinv);
        assert!(prod.sub(&ComplexMatrix::identity(5)).frobenius_norm() < 1e-10);
    }

    #[test]
    fn spd_solve_identity() {
        let a = RealMatrix::identity(3);
        let b = RealMatrix::from_column(&[1.0, -2.0, 3.0]);
        let x = spd_solve(&a, &b).unwrap();
        assert_eq!(x.data(), b.data());
    }

    #[test]
    fn spd_solve_diagonal() {
        let a = RealMatrix::new(2, 2, vec![2.0, 0.0, 0.0, 4.0]);
        let b = RealMatrix::from_column(&[2.0, 8.0]);
        let x = spd_solve(&a, &b).unwrap();
        assert!((x.get(0, 0) - 1.0).abs() < 1e-14);
        assert!((x.get(1, 0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn spd_solve_residual_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 50;
        // A = M M^T + I is SPD.
        let mut m = RealMatrix::zeros(n, n);
        for r in 0..n {
            for col in 0..n {
                m.set(r, col, rng.gen_range(-1.0..1.0));
            }
        }
        let a = m.mul(&m.transpose()).shifted_diagonal(1.0);
        let b = RealMatrix::new(n, 1, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let x = spd_solve(&a, &b).unwrap();
        let resid = a.mul(&x).sub(&b).frobenius_norm() / b.frobenius_norm();
        assert!(resid <= 1e-10, "residual {resid:e}");
    }

    #[test]
    fn spd_solve_rejects_indefinite() {
        let a = RealMatrix::new(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        let b = RealMatrix::from_column(&[1.0, 1.0]);
        assert!(matches!(
            spd_solve(&a, &b),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn hs_inner_pauli_orthogonality() {
        assert!((hs_inner(&sigma_x(), &sigma_x()).unwrap() - 2.0).abs() < 1e-14);
        assert!(hs_inner(&sigma_x(), &sigma_z()).unwrap().abs() < 1e-14);
    }

    #[test]
    fn hs_inner_symmetric_bilinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let a = random_hermitian(4, &mut rng);
            let b = random_hermitian(4, &mut rng);
            let cm = random_hermitian(4, &mut rng);
            let ab = hs_inner(&a, &b).unwrap();
            let ba = hs_inner(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-10);
            let lin = hs_inner(&a.add(&cm), &b).unwrap();
            let split = ab + hs_inner(&cm, &b).unwrap();
            assert!((lin - split).abs() < 1e-10);
        }
    }

    #[test]
    fn hs_inner_dimension_mismatch() {
        let a = ComplexMatrix::identity(2);
        let b = ComplexMatrix::identity(4);
        assert!(matches!(
            hs_inner(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
