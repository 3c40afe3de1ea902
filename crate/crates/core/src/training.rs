//! Readout training: constrained primal ridge regression over a chosen
//! operator set, unconstrained primal over the full operator space, and the
//! dual (kernel) solve producing the optimal measurement operator.
//!
//! The dual route solves (K + lambda 1) alpha = Y with K_ij = tr(rho_i rho_j)
//! and assembles the optimal observables M*_c = sum_j alpha_jc rho_j. The
//! primal route fits weights over measured expectation values, optionally
//! expanded with monomial readout features.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::numerics::{hermitian_eig, hs_inner, spd_solve, ComplexMatrix, RealMatrix};
use crate::quantum::{
    expectation, pauli_expectation, pauli_matrix, state_overlap, EncodingScheme, EncodingSpec,
    PauliString, QuantumState,
};
use crate::{tol, Error, Result};

/// A measurement operator: either a Pauli string (with an O(2^N) expectation
/// fast path) or an arbitrary dense Hermitian matrix.
#[derive(Debug, Clone)]
pub enum Observable {
    Pauli(PauliString),
    Dense(ComplexMatrix),
}

impl Observable {
    pub fn expectation(&self, rho: &QuantumState) -> Result<f64> {
        match self {
            Observable::Pauli(p) => pauli_expectation(rho, p),
            Observable::Dense(m) => expectation(rho, m),
        }
    }

    pub fn matrix(&self) -> ComplexMatrix {
        match self {
            Observable::Pauli(p) => pauli_matrix(p),
            Observable::Dense(m) => m.clone(),
        }
    }
}

/// The complete Pauli operator basis on `n` qubits, in code order.
pub fn complete_pauli_basis(n: usize) -> Vec<Observable> {
    (0..1usize << (2 * n))
        .map(|code| Observable::Pauli(PauliString::new(n, code)))
        .collect()
}

// ---------------------------------------------------------------------------
// Gram matrix and dual solve
// ---------------------------------------------------------------------------

/// Kernel Gram matrix K_ij = tr(rho_i rho_j).
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: RealMatrix,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &RealMatrix {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }

    /// Minimum eigenvalue relative to the maximum; test/diagnostic helper.
    pub fn min_eigenvalue_ratio(&self) -> Result<f64> {
        let n = self.size();
        let mut complex = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                complex.set(r, c, Complex64::new(self.entries.get(r, c), 0.0));
            }
        }
        let eig = hermitian_eig(&complex)?;
        let max = eig.eigenvalues.last().copied().unwrap_or(0.0);
        Ok(eig.eigenvalues[0] / max.max(f64::MIN_POSITIVE))
    }
}

/// Pairwise Hilbert-Schmidt overlaps of training states; the upper triangle
/// is computed in parallel and mirrored.
pub fn gram(states: &[QuantumState]) -> Result<GramMatrix> {
    let p = states.len();
    if p == 0 {
        return Ok(GramMatrix {
            entries: RealMatrix::zeros(0, 0),
        });
    }
    let n = states[0].n_qubits();
    for s in states {
        if s.n_qubits() != n {
            return Err(Error::dim("gram requires equal qubit counts".to_string()));
        }
    }
    let rows: Vec<Vec<f64>> = (0..p)
        .into_par_iter()
        .map(|i| {
            (i..p)
                .map(|j| state_overlap(&states[i], &states[j]).expect("checked dimensions"))
                .collect()
        })
        .collect();
    let mut entries = RealMatrix::zeros(p, p);
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            entries.set(i, i + off, v);
            entries.set(i + off, i, v);
        }
    }
    Ok(GramMatrix { entries })
}

/// Dual (kernel ridge regression) coefficients, one column per output channel.
#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: RealMatrix,
    pub ridge: f64,
}

/// Solve (K + lambda 1) alpha = Y.
pub fn dual_solve(k: &GramMatrix, y: &RealMatrix, ridge: f64) -> Result<DualSolution> {
    if ridge <= 0.0 {
        return Err(Error::validation("ridge", "ridge parameter must be > 0"));
    }
    if y.rows() != k.size() {
        return Err(Error::dim(format!(
            "targets have {} rows, Gram matrix is {}x{}",
            y.rows(),
            k.size(),
            k.size()
        )));
    }
    let shifted = k.entries.shifted_diagonal(ridge);
    let alpha = spd_solve(&shifted, y)?;
    Ok(DualSolution { alpha, ridge })
}

/// Optimal observables M*_c = sum_j alpha_jc rho_j, one per output channel.
#[derive(Debug, Clone)]
pub struct OptimalObservableSet {
    pub observables: Vec<ComplexMatrix>,
}

pub fn optimal_observable(
    states: &[QuantumState],
    solution: &DualSolution,
) -> Result<OptimalObservableSet> {
    if states.len() != solution.alpha.rows() {
        return Err(Error::dim(format!(
            "{} states vs {} dual coefficients",
            states.len(),
            solution.alpha.rows()
        )));
    }
    let dim = states.first().map(|s| s.dim()).unwrap_or(0);
    let channels = solution.alpha.cols();
    let densities: Vec<ComplexMatrix> = states.par_iter().map(|s| s.density()).collect();
    let observables = (0..channels)
        .into_par_iter()
        .map(|c| {
            let mut m = ComplexMatrix::zeros(dim, dim);
            for (j, rho) in densities.iter().enumerate() {
                m.axpy(Complex64::new(solution.alpha.get(j, c), 0.0), rho);
            }
            // The sum is Hermitian up to accumulated roundoff; make it exact.
            m.symmetrize()
        })
        .collect();
    Ok(OptimalObservableSet { observables })
}

/// Kernel predictor f_c(x) = sum_i alpha_ic tr(rho_i rho(x)).
pub fn predict_dual(
    solution: &DualSolution,
    train_states: &[QuantumState],
    x: &QuantumState,
) -> Result<Vec<f64>> {
    let kvec: Vec<f64> = train_states
        .iter()
        .map(|s| state_overlap(s, x))
        .collect::<Result<_>>()?;
    let channels = solution.alpha.cols();
    let mut out = vec![0.0; channels];
    for (i, &ki) in kvec.iter().enumerate() {
        for (c, slot) in out.iter_mut().enumerate() {
            *slot += solution.alpha.get(i, c) * ki;
        }
    }
    Ok(out)
}

/// Predictor through the assembled optimal observables, tr(M*_c rho(x)).
pub fn predict_observables(set: &OptimalObservableSet, x: &QuantumState) -> Result<Vec<f64>> {
    set.observables
        .iter()
        .map(|m| expectation(x, m))
        .collect()
}

// ---------------------------------------------------------------------------
// Primal route
// ---------------------------------------------------------------------------

/// Feature matrix Phi_ik = tr(M_k rho_i).
pub fn feature_matrix(states: &[QuantumState], operators: &[Observable]) -> Result<RealMatrix> {
    let rows: Vec<Vec<f64>> = states
        .par_iter()
        .map(|s| {
            operators
                .iter()
                .map(|op| op.expectation(s))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let m = operators.len();
    let mut phi = RealMatrix::zeros(states.len(), m);
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            phi.set(i, k, v);
        }
    }
    Ok(phi)
}

/// Number of distinct monomials of total degree 1..=p_max in m variables.
pub fn monomial_count(m: usize, p_max: usize) -> usize {
    // C(m + p_max, p_max) - 1
    let mut c: usize = 1;
    for i in 1..=p_max {
        c = c * (m + i) / i;
    }
    c - 1
}

/// All distinct monomials of the components of `v` with total degree in
/// [1, p_max], in graded lexicographic order (degree-major; within a degree,
/// the exponent of the first component decreases first).
pub fn monomial_expand(v: &[f64], p_max: usize) -> Vec<f64> {
    assert!(p_max >= 1, "monomial order must be at least 1");
    let mut out = Vec::with_capacity(monomial_count(v.len(), p_max));
    for degree in 1..=p_max {
        monomials_of_degree(v, degree, 1.0, &mut out);
    }
    out
}

fn monomials_of_degree(v: &[f64], degree: usize, prefix: f64, out: &mut Vec<f64>) {
    if v.is_empty() {
        if degree == 0 {
            out.push(prefix);
        }
        return;
    }
    if v.len() == 1 {
        out.push(prefix * v[0].powi(degree as i32));
        return;
    }
    for e in (0..=degree).rev() {
        monomials_of_degree(&v[1..], degree - e, prefix * v[0].powi(e as i32), out);
    }
}

/// Readout trained in the primal form: weights over (optionally monomial-
/// expanded) expectation values of a fixed operator set.
#[derive(Debug, Clone)]
pub struct PrimalSolution {
    /// m_ro x C weight matrix.
    pub weights: RealMatrix,
    pub operators: Vec<Observable>,
    pub monomial_order: usize,
    /// Optional basis rotation applied to states before measuring
    /// (diagonalization mode measures Z-strings of V^dag rho V).
    pub pre_rotation: Option<ComplexMatrix>,
    pub ridge: f64,
}

impl PrimalSolution {
    /// Measure the operator set on a state (after the pre-rotation, when
    /// present) and expand with monomials.
    pub fn readout_vector(&self, x: &QuantumState) -> Result<Vec<f64>> {
        let rotated;
        let state = match &self.pre_rotation {
            None => x,
            Some(v) => {
                let vdag = v.adjoint();
                rotated = QuantumState::mixed(
                    x.n_qubits(),
                    vdag.mul(&x.density()).mul(v),
                );
                &rotated
            }
        };
        let raw: Vec<f64> = self
            .operators
            .iter()
            .map(|op| op.expectation(state))
            .collect::<Result<_>>()?;
        Ok(if self.monomial_order > 1 {
            monomial_expand(&raw, self.monomial_order)
        } else {
            raw
        })
    }

    pub fn predict(&self, x: &QuantumState) -> Result<Vec<f64>> {
        let r = self.readout_vector(x)?;
        if r.len() != self.weights.rows() {
            return Err(Error::dim(format!(
                "readout vector length {} vs weight rows {}",
                r.len(),
                self.weights.rows()
            )));
        }
        let channels = self.weights.cols();
        let mut out = vec![0.0; channels];
        for (k, &rv) in r.iter().enumerate() {
            for (c, slot) in out.iter_mut().enumerate() {
                *slot += self.weights.get(k, c) * rv;
            }
        }
        Ok(out)
    }
}

/// Ridge solution W = (Phi^T Phi + lambda 1)^-1 Phi^T Y, solved in the dual
/// form Phi^T (Phi Phi^T + lambda 1)^-1 Y when the sample count is smaller
/// than the feature count.
pub fn primal_solve(phi: &RealMatrix, y: &RealMatrix, ridge: f64) -> Result<RealMatrix> {
    if ridge <= 0.0 {
        return Err(Error::validation("ridge", "ridge parameter must be > 0"));
    }
    if phi.rows() != y.rows() {
        return Err(Error::dim(format!(
            "{} feature rows vs {} target rows",
            phi.rows(),
            y.rows()
        )));
    }
    let p = phi.rows();
    let m = phi.cols();
    if p < m {
        let k = phi.mul(&phi.transpose()).shifted_diagonal(ridge);
        let alpha = spd_solve(&k, y)?;
        Ok(phi.transpose().mul(&alpha))
    } else {
        let cov = phi.transpose().mul(phi).shifted_diagonal(ridge);
        let rhs = phi.transpose().mul(y);
        spd_solve(&cov, &rhs)
    }
}

/// Fit a primal readout over measured expectation values of `operators`,
/// monomial-expanded up to `p_max`.
pub fn fit_primal(
    states: &[QuantumState],
    operators: Vec<Observable>,
    pre_rotation: Option<ComplexMatrix>,
    p_max: usize,
    y: &RealMatrix,
    ridge: f64,
) -> Result<PrimalSolution> {
    let template = PrimalSolution {
        weights: RealMatrix::zeros(0, 0),
        operators,
        monomial_order: p_max,
        pre_rotation,
        ridge,
    };
    let rows: Vec<Vec<f64>> = states
        .par_iter()
        .map(|s| template.readout_vector(s))
        .collect::<Result<_>>()?;
    let m_ro = rows.first().map(|r| r.len()).unwrap_or(0);
    let mut phi = RealMatrix::zeros(states.len(), m_ro);
    for (i, row) in rows.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            phi.set(i, k, v);
        }
    }
    let weights = primal_solve(&phi, y, ridge)?;
    Ok(PrimalSolution {
        weights,
        ..template
    })
}

/// Project the dual solution onto an operator set: w = G^+ Phi^T alpha with
/// G_kl = tr(M_k M_l). With the `orthonormal` flag the set is validated to be
/// HS-orthogonal and the projection reduces to (Phi^T alpha)_k / tr(M_k^2).
pub fn dual_to_primal_weights(
    solution: &DualSolution,
    states: &[QuantumState],
    operators: &[Observable],
    orthonormal: bool,
) -> Result<RealMatrix> {
    let phi = feature_matrix(states, operators)?;
    let phit_alpha = phi.transpose().mul(&solution.alpha);
    let matrices: Vec<ComplexMatrix> = operators.iter().map(|op| op.matrix()).collect();
    let m = operators.len();

    if orthonormal {
        for k in 0..m {
            for l in (k + 1)..m {
                let overlap = hs_inner(&matrices[k], &matrices[l])?;
                if overlap.abs() > tol::REAL_TRACE {
                    return Err(Error::NotOrthogonal {
                        k,
                        l,
                        overlap: overlap.abs(),
                    });
                }
            }
        }
        let mut w = phit_alpha;
        for k in 0..m {
            let norm_sq = hs_inner(&matrices[k], &matrices[k])?;
            for c in 0..w.cols() {
                w.set(k, c, w.get(k, c) / norm_sq);
            }
        }
        return Ok(w);
    }

    // General path: pseudo-inverse of the operator Gram matrix.
    let mut g = ComplexMatrix::zeros(m, m);
    for k in 0..m {
        for l in k..m {
            let v = Complex64::new(hs_inner(&matrices[k], &matrices[l])?, 0.0);
            g.set(k, l, v);
            g.set(l, k, v);
        }
    }
    let eig = hermitian_eig(&g)?;
    let max_eig = eig
        .eigenvalues
        .iter()
        .fold(0.0f64, |a, &b| a.max(b.abs()));
    let cutoff = tol::PINV_CUTOFF * max_eig;
    // G^+ = V diag(1/lambda where |lambda| > cutoff) V^T (real symmetric G).
    let mut g_pinv = RealMatrix::zeros(m, m);
    for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= cutoff {
            continue;
        }
        for r in 0..m {
            let vr = eig.eigenvectors.get(r, idx).re;
            for c in 0..m {
                let vc = eig.eigenvectors.get(c, idx).re;
                g_pinv.set(r, c, g_pinv.get(r, c) + vr * vc / lambda);
            }
        }
    }
    Ok(g_pinv.mul(&phit_alpha))
}

/// Argmax class index; ties resolve to the lowest index.
pub fn classify(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// One-hot target matrix for class labels.
pub fn one_hot_targets(labels: &[usize], n_classes: usize) -> RealMatrix {
    let mut y = RealMatrix::zeros(labels.len(), n_classes);
    for (i, &l) in labels.iter().enumerate() {
        y.set(i, l, 1.0);
    }
    y
}

// ---------------------------------------------------------------------------
// Trained readout container
// ---------------------------------------------------------------------------

/// Portable container for a trained readout. Versioned text format with a
/// leading magic string "QRCK1"; field order as written below. Floats are
/// printed with 17 significant digits, which round-trips f64 exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedReadout {
    pub n_qubits: usize,
    pub encoding: EncodingSpec,
    pub ridge: f64,
    /// Dual coefficients (P x C), when trained via the kernel route.
    pub alpha: Option<RealMatrix>,
    /// Operator codes of the primal operator set (Pauli codes).
    pub operator_codes: Vec<usize>,
    /// Primal weights (m_ro x C), when a primal readout was fitted.
    pub weights: Option<RealMatrix>,
    pub monomial_order: usize,
}

pub const READOUT_MAGIC: &str = "QRCK1";

impl TrainedReadout {
    pub fn to_string_repr(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{READOUT_MAGIC}");
        let _ = writeln!(s, "n_qubits {}", self.n_qubits);
        let _ = writeln!(
            s,
            "encoding {} {}",
            self.encoding.scheme.name(),
            self.encoding.input_dim
        );
        let _ = writeln!(s, "lambda {:.17e}", self.ridge);
        match &self.alpha {
            Some(a) => {
                let _ = writeln!(s, "alpha {} {}", a.rows(), a.cols());
                for r in 0..a.rows() {
                    let row: Vec<String> =
                        a.row(r).iter().map(|v| format!("{v:.17e}")).collect();
                    let _ = writeln!(s, "{}", row.join(" "));
                }
            }
            None => {
                let _ = writeln!(s, "alpha 0 0");
            }
        }
        let _ = writeln!(s, "operators {}", self.operator_codes.len());
        for code in &self.operator_codes {
            let _ = writeln!(s, "{code}");
        }
        match &self.weights {
            Some(w) => {
                let _ = writeln!(s, "weights {} {}", w.rows(), w.cols());
                for r in 0..w.rows() {
                    let row: Vec<String> =
                        w.row(r).iter().map(|v| format!("{v:.17e}")).collect();
                    let _ = writeln!(s, "{}", row.join(" "));
                }
            }
            None => {
                let _ = writeln!(s, "weights 0 0");
            }
        }
        let _ = writeln!(s, "monomial_order {}", self.monomial_order);
        let _ = writeln!(s, "end");
        s
    }

    pub fn from_string_repr(text: &str) -> Result<Self> {
        struct Cursor<'a> {
            lines: Vec<&'a str>,
            pos: usize,
        }
        impl<'a> Cursor<'a> {
            fn next(&mut self, expect: &str) -> Result<(usize, String)> {
                let item = self
                    .lines
                    .get(self.pos)
                    .map(|l| (self.pos + 1, l.to_string()))
                    .ok_or_else(|| Error::ParseError {
                        line: 0,
                        message: format!("unexpected end of file, expected {expect}"),
                    })?;
                self.pos += 1;
                Ok(item)
            }

            fn read_matrix(&mut self, tag: &str) -> Result<Option<RealMatrix>> {
                let (line, l) = self.next(tag)?;
                let parts: Vec<&str> = l.split_whitespace().collect();
                if parts.len() != 3 || parts[0] != tag {
                    return Err(Error::ParseError {
                        line,
                        message: format!("expected '{tag} <rows> <cols>'"),
                    });
                }
                let rows: usize = parts[1].parse().map_err(|e| Error::ParseError {
                    line,
                    message: format!("rows: {e}"),
                })?;
                let cols: usize = parts[2].parse().map_err(|e| Error::ParseError {
                    line,
                    message: format!("cols: {e}"),
                })?;
                if rows == 0 {
                    return Ok(None);
                }
                let mut data = Vec::with_capacity(rows * cols);
                let mut last_line = line;
                for _ in 0..rows {
                    let (line, l) = self.next("matrix row")?;
                    last_line = line;
                    for tok in l.split_whitespace() {
                        data.push(tok.parse::<f64>().map_err(|e| Error::ParseError {
                            line,
                            message: format!("value: {e}"),
                        })?);
                    }
                }
                if data.len() != rows * cols {
                    return Err(Error::ParseError {
                        line: last_line,
                        message: "matrix entry count mismatch".into(),
                    });
                }
                Ok(Some(RealMatrix::new(rows, cols, data)))
            }
        }
        let mut cur = Cursor {
            lines: text.lines().collect(),
            pos: 0,
        };
        let parse_err = |line: usize, message: String| Error::ParseError { line, message };

        let (line, magic) = cur.next("magic")?;
        if magic.trim() != READOUT_MAGIC {
            return Err(parse_err(line, format!("bad magic '{}'", magic.trim())));
        }
        let (line, l) = cur.next("n_qubits")?;
        let n_qubits: usize = field(&l, "n_qubits", line)?
            .parse()
            .map_err(|e| parse_err(line, format!("n_qubits: {e}")))?;
        let (line, l) = cur.next("encoding")?;
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "encoding" {
            return Err(parse_err(line, "expected 'encoding <scheme> <dim>'".into()));
        }
        let scheme = EncodingScheme::parse(parts[1])?;
        let input_dim: usize = parts[2]
            .parse()
            .map_err(|e| parse_err(line, format!("input_dim: {e}")))?;
        let encoding = EncodingSpec::new(scheme, input_dim)?;
        let (line, l) = cur.next("lambda")?;
        let ridge: f64 = field(&l, "lambda", line)?
            .parse()
            .map_err(|e| parse_err(line, format!("lambda: {e}")))?;

        let alpha = cur.read_matrix("alpha")?;
        let (line, l) = cur.next("operators")?;
        let n_ops: usize = field(&l, "operators", line)?
            .parse()
            .map_err(|e| parse_err(line, format!("operators: {e}")))?;
        let mut operator_codes = Vec::with_capacity(n_ops);
        for _ in 0..n_ops {
            let (line, l) = cur.next("operator code")?;
            operator_codes.push(
                l.trim()
                    .parse::<usize>()
                    .map_err(|e| parse_err(line, format!("operator code: {e}")))?,
            );
        }
        let weights = cur.read_matrix("weights")?;
        let (line, l) = cur.next("monomial_order")?;
        let monomial_order: usize = field(&l, "monomial_order", line)?
            .parse()
            .map_err(|e| parse_err(line, format!("monomial_order: {e}")))?;
        let (line, l) = cur.next("end")?;
        if l.trim() != "end" {
            return Err(parse_err(line, "expected trailing 'end'".into()));
        }
        Ok(Self {
            n_qubits,
            encoding,
            ridge,
            alpha,
            operator_codes,
            weights,
            monomial_order,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string_repr())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_string_repr(&text)
    }
}

fn field<'a>(line: &'a str, tag: &str, line_no: usize) -> Result<&'a str> {
    line.strip_prefix(tag)
        .map(str::trim)
        .ok_or_else(|| Error::ParseError {
            line: line_no,
            message: format!("expected '{tag} <value>'"),
        })
}
