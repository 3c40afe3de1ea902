//! Decomposition of the optimal observable into implementable measurement
//! sets: Pauli-basis projection with ranking and truncation certificates, and
//! diagonalization with Z-string Walsh-Hadamard coefficients.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::numerics::{hermitian_eig, ComplexMatrix, RealMatrix};
use crate::quantum::{pauli_matrix, PauliString, QuantumState};
use crate::training::{fit_primal, Observable, PrimalSolution};
use crate::{tol, Error, Result};

/// Pauli-basis expansion M = sum_k c_k P_k of one output channel, with
/// c_k = tr(M P_k) / 2^N over all 4^N string codes.
#[derive(Debug, Clone)]
pub struct PauliDecomposition {
    pub n_qubits: usize,
    pub channel: usize,
    pub coefficients: Vec<f64>,
}

/// Trace of M P_k in O(4^N) per string: P_k maps each basis state to exactly
/// one basis state with a phase, so the trace touches one matrix entry per
/// row and no 4^N x 4^N object is ever formed.
fn pauli_trace(m: &ComplexMatrix, p: &PauliString) -> Complex64 {
    let n = p.n_qubits();
    let dim = 1usize << n;
    let mut flip = 0usize;
    for j in 0..n {
        let l = p.letter(j);
        if l == 1 || l == 2 {
            flip |= 1 << (n - 1 - j);
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        // phase of P|i> = phase * |i ^ flip>
        let mut phase = Complex64::new(1.0, 0.0);
        for j in 0..n {
            let bit = (i >> (n - 1 - j)) & 1;
            match p.letter(j) {
                2 => {
                    phase *= if bit == 0 {
                        Complex64::new(0.0, 1.0)
                    } else {
                        Complex64::new(0.0, -1.0)
                    };
                }
                3 => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
                _ => {}
            }
        }
        total += m.get(i, i ^ flip) * phase;
    }
    total
}

pub fn pauli_decompose(m_star: &ComplexMatrix, channel: usize) -> Result<PauliDecomposition> {
    m_star.check_hermitian(tol::HERMITICITY)?;
    let dim = m_star.rows();
    let n_qubits = dim.trailing_zeros() as usize;
    if dim != 1usize << n_qubits {
        return Err(Error::dim(format!("matrix dimension {dim} is not a power of two")));
    }
    let norm = m_star.frobenius_norm().max(1.0);
    let scale = 1.0 / dim as f64;
    let coefficients = (0..1usize << (2 * n_qubits))
        .into_par_iter()
        .map(|code| {
            let t = pauli_trace(m_star, &PauliString::new(n_qubits, code));
            if t.im.abs() > tol::REAL_TRACE * norm {
                return Err(Error::NonRealResult { imag: t.im.abs() });
            }
            Ok(t.re * scale)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PauliDecomposition {
        n_qubits,
        channel,
        coefficients,
    })
}

impl PauliDecomposition {
    /// Dense reconstruction sum_k c_k P_k (test/diagnostic helper).
    pub fn reconstruct(&self) -> ComplexMatrix {
        let dim = 1usize << self.n_qubits;
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (code, &c) in self.coefficients.iter().enumerate() {
            if c != 0.0 {
                m.axpy(
                    Complex64::new(c, 0.0),
                    &pauli_matrix(&PauliString::new(self.n_qubits, code)),
                );
            }
        }
        m
    }
}

// ---------------------------------------------------------------------------
// Diagonalization and Walsh-Hadamard Z-string coefficients
// ---------------------------------------------------------------------------

/// Spectral form M = V Lambda V^dag with the Z-string expansion of Lambda:
/// beta_s = 2^-N sum_b lambda_b (-1)^{s.b}, so that sum_s beta_s Z_s = Lambda.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub n_qubits: usize,
    pub channel: usize,
    pub v: ComplexMatrix,
    pub eigenvalues: Vec<f64>,
    pub z_coefficients: Vec<f64>,
}

/// In-place fast Walsh-Hadamard butterfly, O(N 2^N), unnormalized.
fn wht_in_place(data: &mut [f64]) {
    let n = data.len();
    assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in (0..n).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (data[i], data[i + h]);
                data[i] = a + b;
                data[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// Spectrum -> Z-string coefficients, beta_s = 2^-N sum_b lambda_b (-1)^{s.b}.
pub fn wht_forward(spectrum: &[f64]) -> Vec<f64> {
    let mut beta = spectrum.to_vec();
    wht_in_place(&mut beta);
    let scale = 1.0 / spectrum.len() as f64;
    for b in &mut beta {
        *b *= scale;
    }
    beta
}

/// Z-string coefficients -> spectrum, lambda_b = sum_s beta_s (-1)^{s.b}.
pub fn wht_inverse(beta: &[f64]) -> Vec<f64> {
    let mut spectrum = beta.to_vec();
    wht_in_place(&mut spectrum);
    spectrum
}

pub fn diagonalize(m_star: &ComplexMatrix, channel: usize) -> Result<SpectralDecomposition> {
    let eig = hermitian_eig(m_star)?;
    let dim = m_star.rows();
    let n_qubits = dim.trailing_zeros() as usize;
    if dim != 1usize << n_qubits {
        return Err(Error::dim(format!("matrix dimension {dim} is not a power of two")));
    }
    let z_coefficients = wht_forward(&eig.eigenvalues);
    Ok(SpectralDecomposition {
        n_qubits,
        channel,
        v: eig.eigenvectors,
        eigenvalues: eig.eigenvalues,
        z_coefficients,
    })
}

impl SpectralDecomposition {
    /// Prediction through the diagonal form:
    /// tr(M rho) = sum_b lambda_b <b| V^dag rho V |b>.
    pub fn predict(&self, rho: &QuantumState) -> Result<f64> {
        let rotated = self.rotate_state(rho)?;
        let mut acc = 0.0;
        for (b, &lambda) in self.eigenvalues.iter().enumerate() {
            acc += lambda * rotated.get(b, b).re;
        }
        Ok(acc)
    }

    /// V^dag rho V as a dense matrix.
    pub fn rotate_state(&self, rho: &QuantumState) -> Result<ComplexMatrix> {
        if rho.dim() != self.v.rows() {
            return Err(Error::dim(format!(
                "state dimension {} vs rotation dimension {}",
                rho.dim(),
                self.v.rows()
            )));
        }
        Ok(self.v.adjoint().mul(&rho.density()).mul(&self.v))
    }
}

// ---------------------------------------------------------------------------
// Ranking, truncation, re-fit
// ---------------------------------------------------------------------------

/// What the identifiers in an [`OperatorSubset`] denote.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetMode {
    /// Pauli string codes, measured directly.
    Pauli,
    /// Z-string bitmasks, measured after the per-channel rotation V^dag.
    ZString,
    /// Eigenbasis projector labels |b><b|, measured after V^dag (the
    /// alternative ranking by eigenvalue magnitude).
    Projector,
}

/// Ranking criterion for the diagonalization route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankBy {
    /// Rank Z-strings by the channel norm of |beta_s| (default).
    ZCoefficient,
    /// Rank eigenbasis projectors by the channel norm of |lambda_b|.
    Eigenvalue,
}

/// Ranked, ordered operator selection shared across output channels.
#[derive(Debug, Clone)]
pub struct OperatorSubset {
    pub mode: SubsetMode,
    pub n_qubits: usize,
    /// Operator identifiers, scores non-increasing (the identity, when
    /// selected, is pinned to the front regardless of its score so that
    /// truncation never drops the constant offset).
    pub selection: Vec<usize>,
    pub rank_scores: Vec<f64>,
    /// Per-channel basis rotations for the diagonalization modes.
    pub pre_rotations: Vec<ComplexMatrix>,
}

fn rank_by_scores(scores: &[f64], pin_identity: Option<usize>) -> (Vec<usize>, Vec<f64>) {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] != 0.0).collect();
    // Descending by score; ties break toward the lower code.
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores are finite")
            .then(a.cmp(&b))
    });
    if let Some(id) = pin_identity {
        if let Some(pos) = order.iter().position(|&c| c == id) {
            let code = order.remove(pos);
            order.insert(0, code);
        }
    }
    let ranked_scores = order.iter().map(|&i| scores[i]).collect();
    (order, ranked_scores)
}

fn channel_norms(per_channel: &[&[f64]]) -> Vec<f64> {
    let len = per_channel[0].len();
    (0..len)
        .map(|i| {
            per_channel
                .iter()
                .map(|c| c[i] * c[i])
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Rank Pauli strings by the Euclidean norm of their coefficients across
/// channels, optionally restricted to strings of at most `max_weight`
/// non-identity letters.
pub fn rank_pauli(
    decomps: &[PauliDecomposition],
    max_weight: Option<usize>,
) -> Result<OperatorSubset> {
    let n = require_shared_n(decomps.iter().map(|d| d.n_qubits))?;
    let slices: Vec<&[f64]> = decomps.iter().map(|d| d.coefficients.as_slice()).collect();
    let mut scores = channel_norms(&slices);
    if let Some(w) = max_weight {
        for (code, s) in scores.iter_mut().enumerate() {
            if PauliString::new(n, code).weight() > w {
                *s = 0.0;
            }
        }
    }
    let (selection, rank_scores) = rank_by_scores(&scores, Some(0));
    Ok(OperatorSubset {
        mode: SubsetMode::Pauli,
        n_qubits: n,
        selection,
        rank_scores,
        pre_rotations: Vec::new(),
    })
}

/// Rank the diagonalization route: Z-strings by |beta_s| (default) or
/// eigenbasis projectors by |lambda_b|, with channel-norm scores.
pub fn rank_spectral(
    decomps: &[SpectralDecomposition],
    rank_by: RankBy,
) -> Result<OperatorSubset> {
    let n = require_shared_n(decomps.iter().map(|d| d.n_qubits))?;
    let (mode, scores) = match rank_by {
        RankBy::ZCoefficient => {
            let slices: Vec<&[f64]> =
                decomps.iter().map(|d| d.z_coefficients.as_slice()).collect();
            (SubsetMode::ZString, channel_norms(&slices))
        }
        RankBy::Eigenvalue => {
            let slices: Vec<&[f64]> =
                decomps.iter().map(|d| d.eigenvalues.as_slice()).collect();
            (SubsetMode::Projector, channel_norms(&slices))
        }
    };
    let pin = match mode {
        SubsetMode::ZString => Some(0),
        _ => None,
    };
    let (selection, rank_scores) = rank_by_scores(&scores, pin);
    Ok(OperatorSubset {
        mode,
        n_qubits: n,
        selection,
        rank_scores,
        pre_rotations: decomps.iter().map(|d| d.v.clone()).collect(),
    })
}

fn require_shared_n(mut ns: impl Iterator<Item = usize>) -> Result<usize> {
    let first = ns
        .next()
        .ok_or_else(|| Error::dim("ranking requires at least one channel".to_string()))?;
    if ns.any(|n| n != first) {
        return Err(Error::dim(
            "all channels must share the qubit count".to_string(),
        ));
    }
    Ok(first)
}

impl OperatorSubset {
    pub fn len(&self) -> usize {
        self.selection.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selection.is_empty()
    }

    /// The same subset truncated to its first `keep` identifiers.
    pub fn truncated(&self, keep: usize) -> OperatorSubset {
        let keep = keep.min(self.selection.len());
        OperatorSubset {
            mode: self.mode,
            n_qubits: self.n_qubits,
            selection: self.selection[..keep].to_vec(),
            rank_scores: self.rank_scores[..keep].to_vec(),
            pre_rotations: self.pre_rotations.clone(),
        }
    }

    /// Observables for the identifiers. For the rotated modes the
    /// observables are meant to be measured on V^dag rho V.
    pub fn observables(&self) -> Vec<Observable> {
        self.selection
            .iter()
            .map(|&id| match self.mode {
                SubsetMode::Pauli => Observable::Pauli(PauliString::new(self.n_qubits, id)),
                SubsetMode::ZString => {
                    Observable::Pauli(PauliString::z_string(self.n_qubits, id))
                }
                SubsetMode::Projector => {
                    let dim = 1usize << self.n_qubits;
                    let mut proj = ComplexMatrix::zeros(dim, dim);
                    proj.set(id, id, Complex64::new(1.0, 0.0));
                    Observable::Dense(proj)
                }
            })
            .collect()
    }
}

/// Truncated reconstruction of a single-channel Pauli decomposition.
#[derive(Debug, Clone)]
pub struct TruncationResult {
    pub m_trunc: ComplexMatrix,
    /// Hilbert-Schmidt error bound ||M - M_trunc||_HS = (2^N sum_omitted
    /// c_k^2)^(1/2); by Cauchy-Schwarz it dominates |tr((M - M_trunc) rho)|
    /// for any state with ||rho||_HS <= 1.
    pub bound: f64,
    /// The squared coefficient tail sum_omitted c_k^2 (diagnostic).
    pub squared_tail: f64,
    pub kept_codes: Vec<usize>,
}

/// Keep the `keep` top-ranked strings of one channel's decomposition.
pub fn truncate(decomp: &PauliDecomposition, keep: usize) -> Result<TruncationResult> {
    let total = decomp.coefficients.len();
    if keep > total {
        return Err(Error::RangeViolation {
            index: 0,
            value: keep as f64,
            lo: 0.0,
            hi: total as f64,
        });
    }
    let (order, _) = rank_by_scores(
        &decomp.coefficients.iter().map(|c| c.abs()).collect::<Vec<f64>>(),
        Some(0),
    );
    let kept_codes: Vec<usize> = order.into_iter().take(keep).collect();
    let dim = 1usize << decomp.n_qubits;
    let mut m_trunc = ComplexMatrix::zeros(dim, dim);
    let mut kept_mask = vec![false; total];
    for &code in &kept_codes {
        kept_mask[code] = true;
        m_trunc.axpy(
            Complex64::new(decomp.coefficients[code], 0.0),
            &pauli_matrix(&PauliString::new(decomp.n_qubits, code)),
        );
    }
    let squared_tail: f64 = decomp
        .coefficients
        .iter()
        .enumerate()
        .filter(|(code, _)| !kept_mask[*code])
        .map(|(_, c)| c * c)
        .sum();
    let bound = (dim as f64 * squared_tail).sqrt();
    Ok(TruncationResult {
        m_trunc,
        bound,
        squared_tail,
        kept_codes,
    })
}

/// Re-fit readout: shared weights over Pauli features, or one solution per
/// channel when the subset carries per-channel basis rotations.
#[derive(Debug, Clone)]
pub enum RefitModel {
    Shared(PrimalSolution),
    PerChannel(Vec<PrimalSolution>),
}

impl RefitModel {
    pub fn predict(&self, x: &QuantumState) -> Result<Vec<f64>> {
        match self {
            RefitModel::Shared(sol) => sol.predict(x),
            RefitModel::PerChannel(sols) => sols
                .iter()
                .map(|sol| Ok(sol.predict(x)?[0]))
                .collect(),
        }
    }
}

/// Fit a primal readout on the subset's measured features. For the rotated
/// modes each channel measures in its own eigenbasis, so channels are fitted
/// independently against their target column.
pub fn refit_subset(
    subset: &OperatorSubset,
    states: &[QuantumState],
    targets: &RealMatrix,
    ridge: f64,
    p_max: usize,
) -> Result<RefitModel> {
    if subset.is_empty() {
        return Err(Error::validation("subset", "operator subset is empty"));
    }
    match subset.mode {
        SubsetMode::Pauli => {
            let sol = fit_primal(states, subset.observables(), None, p_max, targets, ridge)?;
            Ok(RefitModel::Shared(sol))
        }
        SubsetMode::ZString | SubsetMode::Projector => {
            if subset.pre_rotations.len() != targets.cols() {
                return Err(Error::dim(format!(
                    "{} rotations vs {} target channels",
                    subset.pre_rotations.len(),
                    targets.cols()
                )));
            }
            let sols = (0..targets.cols())
                .map(|c| {
                    let yc = RealMatrix::from_column(&targets.column(c));
                    fit_primal(
                        states,
                        subset.observables(),
                        Some(subset.pre_rotations[c].clone()),
                        p_max,
                        &yc,
                        ridge,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RefitModel::PerChannel(sols))
        }
    }
}

/// Plot-ready decomposition table: one line per (channel, operator).
pub fn export_table(decomps: &[PauliDecomposition], subset: &OperatorSubset) -> String {
    let mut out = String::from("channel,operator_code,operator_label,coefficient,rank_score\n");
    for (rank, (&code, &score)) in subset
        .selection
        .iter()
        .zip(subset.rank_scores.iter())
        .enumerate()
    {
        let _ = rank;
        for d in decomps {
            let label = match subset.mode {
                SubsetMode::Pauli => PauliString::new(subset.n_qubits, code).label(),
                SubsetMode::ZString => PauliString::z_string(subset.n_qubits, code).label(),
                SubsetMode::Projector => format!("P{code}"),
            };
            let coeff = match subset.mode {
                SubsetMode::Pauli => d.coefficients[code],
                _ => f64::NAN,
            };
            let _ = writeln!(
                out,
                "{},{},{},{:.17e},{:.17e}",
                d.channel, code, label, coeff, score
            );
        }
    }
    out
}
