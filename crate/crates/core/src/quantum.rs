//! Quantum states, data encodings, Pauli strings, reservoir dynamics.
//!
//! Conventions used consistently across the crate:
//! - Register order is input (x) memory, with qubit 0 the most significant
//!   index bit. `kron(a, b)` places `a` on the more significant bits.
//! - Computational basis index `b` carries the bit of qubit `j` at position
//!   `N - 1 - j` (qubit 0 = most significant bit).
//! - Pauli string codes are base-4 over qubits, qubit 0 = most significant
//!   digit, letters I=0, X=1, Y=2, Z=3.
//!
//! QELM states stay as state vectors (O(2^N) memory per state); stateful
//! QRC states are density matrices because the partial trace over the input
//! register produces mixed states.

use num_complex::Complex64;

use crate::numerics::{hermitian_eig, hermitian_expm, hs_inner, kron, kron_vec, ComplexMatrix, RealMatrix};
use crate::{tol, Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Pure or mixed N-qubit state.
#[derive(Debug, Clone)]
pub enum StateRep {
    /// State vector of 2^N amplitudes.
    Pure(Vec<Complex64>),
    /// Density matrix of size 2^N x 2^N.
    Mixed(ComplexMatrix),
}

#[derive(Debug, Clone)]
pub struct QuantumState {
    n_qubits: usize,
    rep: StateRep,
}

impl QuantumState {
    pub fn pure(n_qubits: usize, amplitudes: Vec<Complex64>) -> Self {
        assert_eq!(amplitudes.len(), 1 << n_qubits);
        Self {
            n_qubits,
            rep: StateRep::Pure(amplitudes),
        }
    }

    pub fn mixed(n_qubits: usize, rho: ComplexMatrix) -> Self {
        assert_eq!(rho.rows(), 1 << n_qubits);
        assert_eq!(rho.cols(), 1 << n_qubits);
        Self {
            n_qubits,
            rep: StateRep::Mixed(rho),
        }
    }

    /// Maximally mixed state 1 / 2^N.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1usize << n_qubits;
        Self::mixed(
            n_qubits,
            ComplexMatrix::identity(d).scale_re(1.0 / d as f64),
        )
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn rep(&self) -> &StateRep {
        &self.rep
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.rep, StateRep::Pure(_))
    }

    /// Density matrix view; expands pure states to the outer product.
    pub fn density(&self) -> ComplexMatrix {
        match &self.rep {
            StateRep::Pure(psi) => ComplexMatrix::outer(psi, psi),
            StateRep::Mixed(rho) => rho.clone(),
        }
    }

    /// tr(rho^2); 1 for pure states.
    pub fn purity(&self) -> f64 {
        match &self.rep {
            StateRep::Pure(_) => 1.0,
            StateRep::Mixed(rho) => hs_inner(rho, rho).unwrap_or(f64::NAN),
        }
    }

    /// Check normalization / Hermiticity / positivity invariants.
    pub fn validate(&self) -> Result<()> {
        match &self.rep {
            StateRep::Pure(psi) => {
                let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > tol::STATE_NORM {
                    return Err(Error::validation(
                        "state_norm",
                        format!("pure state norm {norm} deviates from 1"),
                    ));
                }
            }
            StateRep::Mixed(rho) => {
                rho.check_hermitian(tol::DENSITY)?;
                let tr = rho.trace();
                if (tr.re - 1.0).abs() > tol::DENSITY || tr.im.abs() > tol::DENSITY {
                    return Err(Error::validation(
                        "state_trace",
                        format!("density matrix trace {tr} deviates from 1"),
                    ));
                }
                let eig = hermitian_eig(rho)?;
                if eig.eigenvalues[0] < -tol::DENSITY {
                    return Err(Error::validation(
                        "state_psd",
                        format!("negative eigenvalue {:e}", eig.eigenvalues[0]),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Hilbert-Schmidt overlap tr(rho sigma) of two states, using the pure-state
/// fast path |<psi|phi>|^2 where available.
pub fn state_overlap(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::dim(format!(
            "state overlap of {} vs {} qubits",
            a.n_qubits, b.n_qubits
        )));
    }
    match (&a.rep, &b.rep) {
        (StateRep::Pure(x), StateRep::Pure(y)) => {
            let ip: Complex64 = x.iter().zip(y).map(|(u, v)| u.conj() * v).sum();
            Ok(ip.norm_sqr())
        }
        (StateRep::Pure(x), StateRep::Mixed(rho)) | (StateRep::Mixed(rho), StateRep::Pure(x)) => {
            let rx = rho.mul_vec(x);
            let val: Complex64 = x.iter().zip(&rx).map(|(u, v)| u.conj() * v).sum();
            Ok(val.re)
        }
        (StateRep::Mixed(r1), StateRep::Mixed(r2)) => hs_inner(r1, r2),
    }
}

/// Trace distance (1/2) ||rho - sigma||_1.
pub fn trace_distance(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    let diff = a.density().sub(&b.density());
    let eig = hermitian_eig(&diff)?;
    Ok(0.5 * eig.eigenvalues.iter().map(|l| l.abs()).sum::<f64>())
}

// ---------------------------------------------------------------------------
// Pauli strings
// ---------------------------------------------------------------------------

/// Tensor product of single-qubit operators from {I, X, Y, Z}, identified by
/// a base-4 code with qubit 0 as the most significant digit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    code: usize,
}

impl PauliString {
    pub fn new(n_qubits: usize, code: usize) -> Self {
        assert!(code < 1usize << (2 * n_qubits), "code out of range");
        Self { n_qubits, code }
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::new(n_qubits, 0)
    }

    /// Z-string from a bitmask `s` (qubit 0 = most significant bit).
    pub fn z_string(n_qubits: usize, s: usize) -> Self {
        let mut code = 0usize;
        for j in 0..n_qubits {
            let bit = (s >> (n_qubits - 1 - j)) & 1;
            code = code * 4 + 3 * bit;
        }
        Self::new(n_qubits, code)
    }

    pub fn from_label(label: &str) -> Result<Self> {
        let mut code = 0usize;
        for ch in label.chars() {
            let digit = match ch {
                'I' => 0,
                'X' => 1,
                'Y' => 2,
                'Z' => 3,
                _ => {
                    return Err(Error::validation(
                        "pauli_label",
                        format!("invalid Pauli letter '{ch}'"),
                    ))
                }
            };
            code = code * 4 + digit;
        }
        Ok(Self::new(label.len(), code))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn code(&self) -> usize {
        self.code
    }

    /// Letter on qubit `j`: 0=I, 1=X, 2=Y, 3=Z.
    pub fn letter(&self, j: usize) -> usize {
        (self.code >> (2 * (self.n_qubits - 1 - j))) & 3
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> usize {
        (0..self.n_qubits).filter(|&j| self.letter(j) != 0).count()
    }

    pub fn contains_y(&self) -> bool {
        (0..self.n_qubits).any(|j| self.letter(j) == 2)
    }

    /// True when the string consists of I and Z only.
    pub fn is_z_string(&self) -> bool {
        (0..self.n_qubits).all(|j| self.letter(j) == 0 || self.letter(j) == 3)
    }

    pub fn label(&self) -> String {
        (0..self.n_qubits)
            .map(|j| ['I', 'X', 'Y', 'Z'][self.letter(j)])
            .collect()
    }

    /// Apply the string to a state vector in O(2^N).
    ///
    /// Each Pauli string maps every basis state to exactly one basis state
    /// with a phase, so no dense matrix is needed.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n_qubits;
        let dim = 1usize << n;
        assert_eq!(v.len(), dim);
        // Bits to flip (X or Y letters), phase factors from Y and Z letters.
        let mut flip = 0usize;
        for j in 0..n {
            let l = self.letter(j);
            if l == 1 || l == 2 {
                flip |= 1 << (n - 1 - j);
            }
        }
        let mut out = vec![ZERO; dim];
        for (i, &amp) in v.iter().enumerate() {
            if amp == ZERO {
                continue;
            }
            let mut phase = ONE;
            for j in 0..n {
                let bit = (i >> (n - 1 - j)) & 1;
                match self.letter(j) {
                    2 => {
                        // sigma_y |0> = i|1>, sigma_y |1> = -i|0>
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
            out[i ^ flip] += phase * amp;
        }
        out
    }
}

/// Single-qubit Pauli matrix for letter 0..4.
pub fn pauli_1q(letter: usize) -> ComplexMatrix {
    match letter {
        0 => ComplexMatrix::identity(2),
        1 => ComplexMatrix::from_rows(&[vec![ZERO, ONE], vec![ONE, ZERO]]),
        2 => ComplexMatrix::from_rows(&[
            vec![ZERO, Complex64::new(0.0, -1.0)],
            vec![Complex64::new(0.0, 1.0), ZERO],
        ]),
        3 => ComplexMatrix::from_rows(&[vec![ONE, ZERO], vec![ZERO, -ONE]]),
        _ => panic!("invalid Pauli letter {letter}"),
    }
}

/// Dense 2^N x 2^N matrix of a Pauli string.
pub fn pauli_matrix(p: &PauliString) -> ComplexMatrix {
    let mut m = pauli_1q(p.letter(0));
    for j in 1..p.n_qubits() {
        m = kron(&m, &pauli_1q(p.letter(j)));
    }
    m
}

// ---------------------------------------------------------------------------
// Encodings
// ---------------------------------------------------------------------------

/// Product-state encoding schemes for classical input vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingScheme {
    /// R_Y(2 pi z)|0>, one scalar per qubit, z in [0, 1].
    RotationalY,
    /// R_Z(2 pi z2) R_Y(2 pi z1)|0>, two scalars per qubit, z in [0, 1].
    RotationalPairedYZ,
    /// sqrt(z)|0> + sqrt(1-z)|1>, z in [0, 1].
    AmplitudeSqrt,
    /// z|0> + sqrt(1-z^2)|1>, z in [-1, 1].
    AmplitudeSymmetric,
}

impl EncodingScheme {
    /// Valid input range (inclusive) per scalar component.
    pub fn range(&self) -> (f64, f64) {
        match self {
            EncodingScheme::AmplitudeSymmetric => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EncodingScheme::RotationalY => "rotational_y",
            EncodingScheme::RotationalPairedYZ => "rotational_paired_yz",
            EncodingScheme::AmplitudeSqrt => "amplitude_sqrt",
            EncodingScheme::AmplitudeSymmetric => "amplitude_symmetric",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "rotational_y" => Ok(EncodingScheme::RotationalY),
            "rotational_paired_yz" => Ok(EncodingScheme::RotationalPairedYZ),
            "amplitude_sqrt" => Ok(EncodingScheme::AmplitudeSqrt),
            "amplitude_symmetric" => Ok(EncodingScheme::AmplitudeSymmetric),
            _ => Err(Error::validation(
                "encoding",
                format!("unknown encoding scheme '{name}'"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodingSpec {
    pub scheme: EncodingScheme,
    pub input_dim: usize,
    pub qubits_used: usize,
}

impl EncodingSpec {
    pub fn new(scheme: EncodingScheme, input_dim: usize) -> Result<Self> {
        let qubits_used = match scheme {
            EncodingScheme::RotationalPairedYZ => {
                if input_dim % 2 != 0 {
                    return Err(Error::validation(
                        "input_dim",
                        "paired YZ encoding requires an even input dimension",
                    ));
                }
                input_dim / 2
            }
            _ => input_dim,
        };
        Ok(Self {
            scheme,
            input_dim,
            qubits_used,
        })
    }
}

/// Single-qubit encoded state for one (or two, paired) scalar inputs.
fn encode_1q(scheme: EncodingScheme, z: &[f64]) -> Vec<Complex64> {
    use std::f64::consts::PI;
    match scheme {
        EncodingScheme::RotationalY => {
            let a = PI * z[0];
            vec![Complex64::new(a.cos(), 0.0), Complex64::new(a.sin(), 0.0)]
        }
        EncodingScheme::RotationalPairedYZ => {
            // R_Y first, then R_Z, so the second scalar lands in the
            // relative phase rather than a global one.
            let a = PI * z[0];
            let phi = PI * z[1];
            vec![
                Complex64::from_polar(a.cos(), -phi),
                Complex64::from_polar(a.sin(), phi),
            ]
        }
        EncodingScheme::AmplitudeSqrt => {
            vec![
                Complex64::new(z[0].sqrt(), 0.0),
                Complex64::new((1.0 - z[0]).sqrt(), 0.0),
            ]
        }
        EncodingScheme::AmplitudeSymmetric => {
            vec![
                Complex64::new(z[0], 0.0),
                Complex64::new((1.0 - z[0] * z[0]).max(0.0).sqrt(), 0.0),
            ]
        }
    }
}

/// Encode a classical vector into a pure product state on `qubits_used` qubits.
pub fn encode(z: &[f64], spec: &EncodingSpec) -> Result<QuantumState> {
    if z.len() != spec.input_dim {
        return Err(Error::dim(format!(
            "encoding expects {} inputs, got {}",
            spec.input_dim,
            z.len()
        )));
    }
    let (lo, hi) = spec.scheme.range();
    for (index, &value) in z.iter().enumerate() {
        if !(lo..=hi).contains(&value) || !value.is_finite() {
            return Err(Error::RangeViolation {
                index,
                value,
                lo,
                hi,
            });
        }
    }
    let per_qubit = if spec.scheme == EncodingScheme::RotationalPairedYZ {
        2
    } else {
        1
    };
    let mut psi = vec![ONE];
    for j in 0..spec.qubits_used {
        let chunk = &z[j * per_qubit..(j + 1) * per_qubit];
        psi = kron_vec(&psi, &encode_1q(spec.scheme, chunk));
    }
    Ok(QuantumState::pure(spec.qubits_used, psi))
}

// ---------------------------------------------------------------------------
// Reservoir
// ---------------------------------------------------------------------------

/// Which Pauli axis carries the field vs. the coupling in the Ising chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfimAxisVariant {
    /// H = -h sum sigma_x - J sum sigma_z sigma_z (standard).
    XFieldZzCoupling,
    /// Variant with sigma_x and sigma_z exchanged.
    ZFieldXxCoupling,
}

#[derive(Debug, Clone)]
pub struct ReservoirSpec {
    pub n_input: usize,
    pub n_ancilla: usize,
    pub encoding: EncodingSpec,
    pub tfim_h: f64,
    pub tfim_j: f64,
    pub evolution_time: f64,
    pub tfim_axis_variant: TfimAxisVariant,
    /// Washout / equilibration steps discarded at the start of a run.
    pub washout: usize,
}

impl ReservoirSpec {
    pub fn n_total(&self) -> usize {
        self.n_input + self.n_ancilla
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_total() > 12 {
            return Err(Error::validation(
                "n_qubits",
                format!("{} qubits exceeds the memory guard of 12", self.n_total()),
            ));
        }
        if self.n_total() == 0 {
            return Err(Error::validation("n_qubits", "reservoir needs at least one qubit"));
        }
        if self.encoding.qubits_used != self.n_input {
            return Err(Error::validation(
                "encoding",
                format!(
                    "encoding uses {} qubits but the input register has {}",
                    self.encoding.qubits_used, self.n_input
                ),
            ));
        }
        Ok(())
    }
}

/// Open-chain transverse field Ising Hamiltonian on all N qubits.
pub fn build_tfim(spec: &ReservoirSpec) -> ComplexMatrix {
    let n = spec.n_total();
    let d = 1usize << n;
    let (field_letter, coupling_letter) = match spec.tfim_axis_variant {
        TfimAxisVariant::XFieldZzCoupling => (1usize, 3usize),
        TfimAxisVariant::ZFieldXxCoupling => (3usize, 1usize),
    };
    let mut h = ComplexMatrix::zeros(d, d);
    for j in 0..n {
        let mut code = 0usize;
        for k in 0..n {
            code = code * 4 + if k == j { field_letter } else { 0 };
        }
        h.axpy(
            Complex64::new(-spec.tfim_h, 0.0),
            &pauli_matrix(&PauliString::new(n, code)),
        );
    }
    for j in 0..n.saturating_sub(1) {
        let mut code = 0usize;
        for k in 0..n {
            code = code * 4
                + if k == j || k == j + 1 {
                    coupling_letter
                } else {
                    0
                };
        }
        h.axpy(
            Complex64::new(-spec.tfim_j, 0.0),
            &pauli_matrix(&PauliString::new(n, code)),
        );
    }
    h
}

/// U = exp(-i t H_R) for the reservoir Hamiltonian.
pub fn reservoir_unitary(spec: &ReservoirSpec) -> Result<ComplexMatrix> {
    hermitian_expm(&build_tfim(spec), spec.evolution_time)
}

/// Stateless QELM feature map: rho(x) = U eta_I(x) U^dag, kept pure.
pub fn qelm_state(
    x: &[f64],
    spec: &ReservoirSpec,
    u: Option<&ComplexMatrix>,
) -> Result<QuantumState> {
    if spec.n_ancilla > 0 {
        return Err(Error::AncillaPresent {
            n_ancilla: spec.n_ancilla,
        });
    }
    let encoded = encode(x, &spec.encoding)?;
    match u {
        None => Ok(encoded),
        Some(u) => {
            let StateRep::Pure(psi) = encoded.rep() else {
                unreachable!("encode always produces a pure state");
            };
            if u.rows() != psi.len() {
                return Err(Error::dim(format!(
                    "unitary dimension {} vs state dimension {}",
                    u.rows(),
                    psi.len()
                )));
            }
            Ok(QuantumState::pure(spec.n_input, u.mul_vec(psi)))
        }
    }
}

/// Partial trace over the input register (most significant qubits),
/// returning the reduced state on the `n_ancilla` memory qubits.
pub fn partial_trace_input(rho: &QuantumState, layout: &ReservoirSpec) -> Result<QuantumState> {
    let n = layout.n_total();
    if rho.n_qubits() != n {
        return Err(Error::dim(format!(
            "partial trace expects {} qubits, got {}",
            n,
            rho.n_qubits()
        )));
    }
    let d_mem = 1usize << layout.n_ancilla;
    let d_in = 1usize << layout.n_input;
    let full = rho.density();
    let mut out = ComplexMatrix::zeros(d_mem, d_mem);
    for m1 in 0..d_mem {
        for m2 in 0..d_mem {
            let mut acc = ZERO;
            for k in 0..d_in {
                acc += full.get(k * d_mem + m1, k * d_mem + m2);
            }
            out.set(m1, m2, acc);
        }
    }
    Ok(QuantumState::mixed(layout.n_ancilla, out))
}

/// One step of the stateful QRC update: encode, join with the carried
/// memory, evolve, and trace out the input register.
pub fn qrc_step(
    eta_m: &QuantumState,
    z: &[f64],
    u: &ComplexMatrix,
    spec: &ReservoirSpec,
) -> Result<(QuantumState, QuantumState)> {
    if eta_m.n_qubits() != spec.n_ancilla {
        return Err(Error::dim(format!(
            "memory state has {} qubits, expected {}",
            eta_m.n_qubits(),
            spec.n_ancilla
        )));
    }
    let eta_i = encode(z, &spec.encoding)?;
    let joint = kron(&eta_i.density(), &eta_m.density());
    if u.rows() != joint.rows() {
        return Err(Error::dim(format!(
            "unitary dimension {} vs joint state dimension {}",
            u.rows(),
            joint.rows()
        )));
    }
    // Symmetrize: U is unitary only to roundoff, and the drift would
    // otherwise accumulate over long input sequences.
    let rho_full = QuantumState::mixed(spec.n_total(), joint.conjugate_by(u).symmetrize());
    let eta_m_next = partial_trace_input(&rho_full, spec)?;
    Ok((rho_full, eta_m_next))
}

/// Drive the reservoir over a time series and collect the output states
/// after the washout period. `series` is T x d'.
///
/// The initial memory is maximally mixed; with no ancilla qubits this
/// reduces to the per-sample stateless feature map.
pub fn run_reservoir(
    series: &RealMatrix,
    spec: &ReservoirSpec,
    u: &ComplexMatrix,
) -> Result<Vec<QuantumState>> {
    spec.validate()?;
    let t_eq = spec.washout;
    let total = series.rows();
    let mut states = Vec::with_capacity(total.saturating_sub(t_eq));

    if spec.n_ancilla == 0 {
        for t in 0..total {
            let state = qelm_state(series.row(t), spec, Some(u)).map_err(|e| at_sample(e, t))?;
            if t >= t_eq {
                states.push(state);
            }
        }
        return Ok(states);
    }

    let mut eta_m = QuantumState::maximally_mixed(spec.n_ancilla);
    for t in 0..total {
        let (rho_full, next) =
            qrc_step(&eta_m, series.row(t), u, spec).map_err(|e| at_sample(e, t))?;
        eta_m = next;
        if t >= t_eq {
            states.push(rho_full);
        }
    }
    Ok(states)
}

/// Rewrite a range violation so the index refers to the offending sample.
fn at_sample(e: Error, t: usize) -> Error {
    match e {
        Error::RangeViolation {
            value, lo, hi, ..
        } => Error::RangeViolation {
            index: t,
            value,
            lo,
            hi,
        },
        other => other,
    }
}

/// Expectation value tr(M rho), required real.
pub fn expectation(rho: &QuantumState, m: &ComplexMatrix) -> Result<f64> {
    if m.rows() != rho.dim() || m.cols() != rho.dim() {
        return Err(Error::dim(format!(
            "observable is {}x{}, state dimension {}",
            m.rows(),
            m.cols(),
            rho.dim()
        )));
    }
    match rho.rep() {
        StateRep::Pure(psi) => {
            let mpsi = m.mul_vec(psi);
            let val: Complex64 = psi.iter().zip(&mpsi).map(|(u, v)| u.conj() * v).sum();
            if val.im.abs() > tol::REAL_TRACE {
                return Err(Error::NonRealResult { imag: val.im.abs() });
            }
            Ok(val.re)
        }
        StateRep::Mixed(r) => hs_inner(m, r),
    }
}

/// Pauli-string expectation with the O(2^N) fast path for pure states.
pub fn pauli_expectation(rho: &QuantumState, p: &PauliString) -> Result<f64> {
    if p.n_qubits() != rho.n_qubits() {
        return Err(Error::dim(format!(
            "Pauli string on {} qubits, state on {}",
            p.n_qubits(),
            rho.n_qubits()
        )));
    }
    match rho.rep() {
        StateRep::Pure(psi) => {
            let ppsi = p.apply(psi);
            let val: Complex64 = psi.iter().zip(&ppsi).map(|(u, v)| u.conj() * v).sum();
            if val.im.abs() > tol::REAL_TRACE {
                return Err(Error::NonRealResult { imag: val.im.abs() });
            }
            Ok(val.re)
        }
        StateRep::Mixed(r) => {
            // tr(P rho) = sum_i <i|P rho|i>; apply P to each column of rho.
            let n = rho.n_qubits();
            let dim = 1usize << n;
            let mut acc = ZERO;
            for col in 0..dim {
                let column: Vec<Complex64> = (0..dim).map(|row| r.get(row, col)).collect();
                let pc = p.apply(&column);
                acc += pc[col];
            }
            if acc.im.abs() > tol::REAL_TRACE {
                return Err(Error::NonRealResult { imag: acc.im.abs() });
            }
            Ok(acc.re)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rot_y_spec(dim: usize) -> EncodingSpec {
        EncodingSpec::new(EncodingScheme::RotationalY, dim).unwrap()
    }

    fn qelm_spec(n_input: usize, scheme: EncodingScheme) -> ReservoirSpec {
        let input_dim = if scheme == EncodingScheme::RotationalPairedYZ {
            2 * n_input
        } else {
            n_input
        };
        ReservoirSpec {
            n_input,
            n_ancilla: 0,
            encoding: EncodingSpec::new(scheme, input_dim).unwrap(),
            tfim_h: 1.0,
            tfim_j: 1.0,
            evolution_time: 1.0,
            tfim_axis_variant: TfimAxisVariant::XFieldZzCoupling,
            washout: 0,
        }
    }

    #[test]
    fn encode_zero_rotation_is_ground_state() {
        let s = encode(&[0.0], &rot_y_spec(1)).unwrap();
        let StateRep::Pure(psi) = s.rep() else { panic!() };
        assert!((psi[0].re - 1.0).abs() < 1e-15);
        assert!(psi[1].norm() < 1e-15);
    }

    #[test]
    fn encode_amplitude_sqrt_x_expectation() {
        let spec = EncodingSpec::new(EncodingScheme::AmplitudeSqrt, 1).unwrap();
        let s = encode(&[0.5], &spec).unwrap();
        let x = pauli_expectation(&s, &PauliString::from_label("X").unwrap()).unwrap();
        assert!((x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encode_rotational_quarter_turn() {
        let s = encode(&[0.25], &rot_y_spec(1)).unwrap();
        let z = pauli_expectation(&s, &PauliString::from_label("Z").unwrap()).unwrap();
        let x = pauli_expectation(&s, &PauliString::from_label("X").unwrap()).unwrap();
        assert!(z.abs() < 1e-12);
        assert!((x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let err = encode(&[1.5], &rot_y_spec(1)).unwrap_err();
        assert!(matches!(err, Error::RangeViolation { index: 0, .. }));
    }

    #[test]
    fn paired_yz_second_scalar_lands_in_phase() {
        let spec = EncodingSpec::new(EncodingScheme::RotationalPairedYZ, 2).unwrap();
        let a = encode(&[0.25, 0.0], &spec).unwrap();
        let b = encode(&[0.25, 0.25], &spec).unwrap();
        // Same polar angle, different azimuth: overlap must differ from 1.
        let k = state_overlap(&a, &b).unwrap();
        assert!(k < 1.0 - 1e-3);
        // <sigma_x> = sin(2 pi z1) cos(2 pi z2), <sigma_y> = sin(2 pi z1) sin(2 pi z2)
        let x = pauli_expectation(&b, &PauliString::from_label("X").unwrap()).unwrap();
        let y = pauli_expectation(&b, &PauliString::from_label("Y").unwrap()).unwrap();
        assert!(x.abs() < 1e-12);
        assert!((y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tfim_single_site() {
        let mut spec = qelm_spec(1, EncodingScheme::RotationalY);
        spec.tfim_h = 1.0;
        spec.tfim_j = 7.0; // irrelevant without a coupling pair
        let h = build_tfim(&spec);
        let minus_x = pauli_matrix(&PauliString::from_label("X").unwrap()).scale_re(-1.0);
        assert!(h.sub(&minus_x).frobenius_norm() < 1e-15);
    }

    #[test]
    fn tfim_pure_zz_is_diagonal() {
        let mut spec = qelm_spec(2, EncodingScheme::RotationalY);
        spec.tfim_h = 0.0;
        spec.tfim_j = 1.0;
        let h = build_tfim(&spec);
        let expected = [-1.0, 1.0, 1.0, -1.0];
        for (i, &e) in expected.iter().enumerate() {
            assert!((h.get(i, i).re - e).abs() < 1e-15);
        }
        assert!(h.hermiticity_deviation() < 1e-15);
    }

    #[test]
    fn tfim_traceless() {
        let spec = qelm_spec(3, EncodingScheme::RotationalY);
        let h = build_tfim(&spec);
        assert!(h.trace().norm() < 1e-12);
    }

    #[test]
    fn reservoir_unitary_zero_time() {
        let mut spec = qelm_spec(2, EncodingScheme::RotationalY);
        spec.evolution_time = 0.0;
        let u = reservoir_unitary(&spec).unwrap();
        assert!(u.sub(&ComplexMatrix::identity(4)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn reservoir_unitary_single_qubit_closed_form() {
        // H = -sigma_x, t = pi/2: U = exp(i (pi/2) sigma_x) = i sigma_x.
        let mut spec = qelm_spec(1, EncodingScheme::RotationalY);
        spec.tfim_h = 1.0;
        spec.evolution_time = std::f64::consts::FRAC_PI_2;
        let u = reservoir_unitary(&spec).unwrap();
        let expected = pauli_matrix(&PauliString::from_label("X").unwrap())
            .scale(Complex64::new(0.0, 1.0));
        assert!(u.sub(&expected).frobenius_norm() < 1e-10);
    }

    #[test]
    fn reservoir_unitary_is_unitary() {
        let spec = qelm_spec(3, EncodingScheme::RotationalY);
        let u = reservoir_unitary(&spec).unwrap();
        let uu = u.mul(&u.adjoint());
        assert!(uu.sub(&ComplexMatrix::identity(8)).frobenius_norm() < 1e-10);
    }

    #[test]
    fn qelm_state_rejects_ancilla() {
        let mut spec = qelm_spec(1, EncodingScheme::RotationalY);
        spec.n_ancilla = 1;
        assert!(matches!(
            qelm_state(&[0.5], &spec, None),
            Err(Error::AncillaPresent { n_ancilla: 1 })
        ));
    }

    #[test]
    fn qelm_kernel_analytic_overlap() {
        // Single-qubit rotational encoding: K(x, x') = cos^2(pi (x - x')),
        // with or without a data-independent unitary.
        let spec = qelm_spec(1, EncodingScheme::RotationalY);
        let u = reservoir_unitary(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = rng.gen_range(0.0..1.0);
            let xp = rng.gen_range(0.0..1.0);
            let expected = (std::f64::consts::PI * (x - xp)).cos().powi(2);
            let bare = state_overlap(
                &qelm_state(&[x], &spec, None).unwrap(),
                &qelm_state(&[xp], &spec, None).unwrap(),
            )
            .unwrap();
            let evolved = state_overlap(
                &qelm_state(&[x], &spec, Some(&u)).unwrap(),
                &qelm_state(&[xp], &spec, Some(&u)).unwrap(),
            )
            .unwrap();
            assert!((bare - expected).abs() < 1e-12);
            assert!((evolved - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let spec = ReservoirSpec {
            n_ancilla: 1,
            ..qelm_spec(1, EncodingScheme::RotationalY)
        };
        let eta_i = encode(&[rng.gen_range(0.0..1.0)], &spec.encoding).unwrap();
        let eta_m = encode(&[rng.gen_range(0.0..1.0)], &rot_y_spec(1)).unwrap();
        let joint = QuantumState::mixed(2, kron(&eta_i.density(), &eta_m.density()));
        let reduced = partial_trace_input(&joint, &spec).unwrap();
        assert!(
            reduced
                .density()
                .sub(&eta_m.density())
                .frobenius_norm()
                < 1e-12
        );
    }

    #[test]
    fn partial_trace_bell_state_is_maximally_mixed() {
        let spec = ReservoirSpec {
            n_ancilla: 1,
            ..qelm_spec(1, EncodingScheme::RotationalY)
        };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = QuantumState::pure(
            2,
            vec![
                Complex64::new(s, 0.0),
                ZERO,
                ZERO,
                Complex64::new(s, 0.0),
            ],
        );
        let reduced = partial_trace_input(&bell, &spec).unwrap();
        let expected = ComplexMatrix::identity(2).scale_re(0.5);
        assert!(reduced.density().sub(&expected).frobenius_norm() < 1e-12);
    }

    #[test]
    fn partial_trace_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let spec = ReservoirSpec {
            n_ancilla: 2,
            ..qelm_spec(1, EncodingScheme::RotationalY)
        };
        // Random PSD trace-one input via a random pure state.
        let dim = 8;
        let mut psi: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|z| *z /= norm);
        let rho = QuantumState::pure(3, psi);
        let reduced = partial_trace_input(&rho, &spec).unwrap();
        assert!((reduced.density().trace().re - 1.0).abs() < 1e-12);
        reduced.validate().unwrap();
    }

    #[test]
    fn qrc_step_identity_unitary_keeps_memory() {
        let spec = ReservoirSpec {
            n_ancilla: 1,
            ..qelm_spec(1, EncodingScheme::RotationalY)
        };
        let eta_m = encode(&[0.3], &rot_y_spec(1)).unwrap();
        let identity = ComplexMatrix::identity(4);
        let (rho_full, next) = qrc_step(&eta_m, &[0.7], &identity, &spec).unwrap();
        assert!((rho_full.density().trace().re - 1.0).abs() < 1e-12);
        assert!(
            next.density().sub(&eta_m.density()).frobenius_norm() < 1e-12
        );
    }

    #[test]
    fn qrc_step_valid_states() {
        let spec = ReservoirSpec {
            n_ancilla: 1,
            ..qelm_spec(1, EncodingScheme::RotationalY)
        };
        let u = reservoir_unitary(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let mut eta_m = QuantumState::maximally_mixed(1);
        for _ in 0..5 {
            let (rho_full, next) =
                qrc_step(&eta_m, &[rng.gen_range(0.0..1.0)], &u, &spec).unwrap();
            rho_full.validate().unwrap();
            next.validate().unwrap();
            eta_m = next;
        }
    }

    #[test]
    fn echo_state_two_trajectories_converge() {
        let spec = ReservoirSpec {
            n_ancilla: 1,
            washout: 60,
            ..qelm_spec(1, EncodingScheme::RotationalY)
        };
        let u = reservoir_unitary(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let inputs: Vec<f64> = (0..80).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut a = QuantumState::maximally_mixed(1);
        let mut b = encode(&[0.9], &rot_y_spec(1)).unwrap();
        for &z in &inputs {
            a = qrc_step(&a, &[z], &u, &spec).unwrap().1;
            b = qrc_step(&b, &[z], &u, &spec).unwrap().1;
        }
        let dist = trace_distance(&a, &b).unwrap();
        assert!(dist < 1e-3, "trace distance after washout: {dist:e}");
    }

    #[test]
    fn run_reservoir_constant_input_fixed_point() {
        let spec = ReservoirSpec {
            n_ancilla: 1,
            washout: 0,
            ..qelm_spec(1, EncodingScheme::RotationalY)
        };
        let u = reservoir_unitary(&spec).unwrap();
        let series = RealMatrix::new(200, 1, vec![0.4; 200]);
        let states = run_reservoir(&series, &spec, &u).unwrap();
        let d = trace_distance(&states[199], &states[198]).unwrap();
        assert!(d < 1e-6, "consecutive state distance {d:e}");
    }

    #[test]
    fn run_reservoir_stateless_reduction() {
        let spec = qelm_spec(1, EncodingScheme::RotationalY);
        let u = reservoir_unitary(&spec).unwrap();
        let samples = vec![0.1, 0.7, 0.3];
        let series = RealMatrix::new(3, 1, samples.clone());
        let states = run_reservoir(&series, &spec, &u).unwrap();
        for (t, z) in samples.iter().enumerate() {
            let direct = qelm_state(&[*z], &spec, Some(&u)).unwrap();
            assert!((state_overlap(&states[t], &direct).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn run_reservoir_bookkeeping() {
        let spec = ReservoirSpec {
            n_ancilla: 1,
            washout: 0,
            ..qelm_spec(1, EncodingScheme::RotationalY)
        };
        let u = reservoir_unitary(&spec).unwrap();
        let series = RealMatrix::new(5, 1, vec![0.2; 5]);
        assert_eq!(run_reservoir(&series, &spec, &u).unwrap().len(), 5);
    }

    #[test]
    fn run_reservoir_reports_offending_sample() {
        let spec = ReservoirSpec {
            n_ancilla: 1,
            washout: 0,
            ..qelm_spec(1, EncodingScheme::RotationalY)
        };
        let u = reservoir_unitary(&spec).unwrap();
        let series = RealMatrix::new(3, 1, vec![0.2, 1.4, 0.2]);
        let err = run_reservoir(&series, &spec, &u).unwrap_err();
        assert!(matches!(err, Error::RangeViolation { index: 1, .. }));
    }

    #[test]
    fn pauli_matrix_z_on_first_of_two() {
        let p = PauliString::from_label("ZI").unwrap();
        let m = pauli_matrix(&p);
        // Qubit 0 most significant: diag(1, 1, -1, -1).
        let expected = [1.0, 1.0, -1.0, -1.0];
        for (i, &e) in expected.iter().enumerate() {
            assert!((m.get(i, i).re - e).abs() < 1e-15);
        }
    }

    #[test]
    fn pauli_orthogonality_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let n = 3;
        for _ in 0..20 {
            let k = rng.gen_range(0..64usize);
            let l = rng.gen_range(0..64usize);
            let pk = pauli_matrix(&PauliString::new(n, k));
            let pl = pauli_matrix(&PauliString::new(n, l));
            let ip = hs_inner(&pk, &pl).unwrap();
            let expected = if k == l { 8.0 } else { 0.0 };
            assert!((ip - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn pauli_apply_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 3;
        for _ in 0..20 {
            let p = PauliString::new(n, rng.gen_range(0..64usize));
            let mut psi: Vec<Complex64> = (0..8)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            psi.iter_mut().for_each(|z| *z /= norm);
            let fast = p.apply(&psi);
            let dense = pauli_matrix(&p).mul_vec(&psi);
            let diff: f64 = fast
                .iter()
                .zip(&dense)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(diff < 1e-13);
        }
    }

    #[test]
    fn expectation_ground_state_z() {
        let s = encode(&[0.0], &rot_y_spec(1)).unwrap();
        let z = pauli_matrix(&PauliString::from_label("Z").unwrap());
        assert!((expectation(&s, &z).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn y_expectations_vanish_on_real_product_encodings() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for scheme in [
            EncodingScheme::RotationalY,
            EncodingScheme::AmplitudeSqrt,
            EncodingScheme::AmplitudeSymmetric,
        ] {
            let spec = EncodingSpec::new(scheme, 3).unwrap();
            let (lo, hi) = scheme.range();
            for _ in 0..10 {
                let z: Vec<f64> = (0..3).map(|_| rng.gen_range(lo..hi)).collect();
                let s = encode(&z, &spec).unwrap();
                for code in 0..64usize {
                    let p = PauliString::new(3, code);
                    if p.contains_y() {
                        let v = pauli_expectation(&s, &p).unwrap();
                        assert!(v.abs() < 1e-14, "{} gave {v:e}", p.label());
                    }
                }
            }
        }
    }

    #[test]
    fn product_expectation_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let spec = EncodingSpec::new(EncodingScheme::RotationalY, 3).unwrap();
        let single = rot_y_spec(1);
        for _ in 0..10 {
            let z: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s = encode(&z, &spec).unwrap();
            for code in 0..64usize {
                let p = PauliString::new(3, code);
                let full = pauli_expectation(&s, &p).unwrap();
                let mut product = 1.0;
                for j in 0..3 {
                    let sj = encode(&z[j..j + 1], &single).unwrap();
                    product *=
                        pauli_expectation(&sj, &PauliString::new(1, p.letter(j))).unwrap();
                }
                assert!((full - product).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_invariant_under_global_conjugation() {
        let spec = qelm_spec(2, EncodingScheme::RotationalY);
        let u = reservoir_unitary(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..10 {
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.0)).collect();
            let y: Vec<f64> = (0..2).map(|_| rng.gen_range(0.0..1.0)).collect();
            let a = qelm_state(&x, &spec, None).unwrap();
            let b = qelm_state(&y, &spec, None).unwrap();
            let ua = qelm_state(&x, &spec, Some(&u)).unwrap();
            let ub = qelm_state(&y, &spec, Some(&u)).unwrap();
            let bare = state_overlap(&a, &b).unwrap();
            let conj = state_overlap(&ua, &ub).unwrap();
            assert!((bare - conj).abs() < 1e-12);
        }
    }

    #[test]
    fn z_string_codes() {
        let p = PauliString::z_string(3, 0b101);
        assert_eq!(p.label(), "ZIZ");
        assert!(p.is_z_string());
        assert_eq!(p.weight(), 2);
    }
}
