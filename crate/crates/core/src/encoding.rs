//! Quantum encoding `w_Q = B^{1/2} w` with Hermitian `H = i B^{-1/2} A B^{-1/2}`.
//!
//! A register holds `M` stacked sub-states of padded length `L` (the next
//! power of two above the physical DOF count), optionally behind one
//! auxiliary qubit. The basis index of auxiliary bit `a`, stack `m` and
//! data index `l` is `a * M * L + m * L + l`, i.e. the auxiliary qubit is
//! the most significant one and the data qubits the least significant.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::discretization::WaveOperators;
use crate::error::{Error, Result};
use crate::sparse::ComplexCsr;

/// Largest register this crate will simulate as a dense statevector.
pub const MAX_QUBITS: u32 = 26;

/// Hermiticity tolerance on `max |H - H^dagger|`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterLayout {
    /// Physical DOFs per sub-state.
    pub physical: usize,
    /// Padded sub-state length `L`, a power of two.
    pub block: usize,
    /// Number of stacked sub-states `M`, a power of two.
    pub stacks: usize,
    /// Whether a leading auxiliary qubit is present.
    pub auxiliary: bool,
}

impl RegisterLayout {
    pub fn new(physical: usize, stacks: usize, auxiliary: bool) -> Result<Self> {
        if physical == 0 {
            return Err(Error::InvalidArgument("register needs at least one physical DOF".into()));
        }
        if !stacks.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(stacks));
        }
        let layout = Self { physical, block: physical.next_power_of_two(), stacks, auxiliary };
        let qubits = layout.num_qubits();
        if qubits > MAX_QUBITS {
            return Err(Error::DimensionOverflow { qubits, limit: MAX_QUBITS });
        }
        Ok(layout)
    }

    pub fn single(physical: usize) -> Result<Self> {
        Self::new(physical, 1, false)
    }

    pub fn len(&self) -> usize {
        self.stacks * self.block * if self.auxiliary { 2 } else { 1 }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn data_qubits(&self) -> u32 {
        self.block.trailing_zeros()
    }

    pub fn stack_qubits(&self) -> u32 {
        self.stacks.trailing_zeros()
    }

    pub fn num_qubits(&self) -> u32 {
        self.data_qubits() + self.stack_qubits() + u32::from(self.auxiliary)
    }

    pub fn index(&self, aux: usize, stack: usize, dof: usize) -> usize {
        (aux * self.stacks + stack) * self.block + dof
    }

    fn is_pad(&self, index: usize) -> bool {
        index % self.block >= self.physical
    }
}

/// Normalized amplitudes plus the norm of the unnormalized physical vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumRegisterState {
    amplitudes: Vec<Complex64>,
    scale: f64,
    layout: RegisterLayout,
}

impl QuantumRegisterState {
    /// Normalizes `values` (length `layout.len()`, zero on the padding).
    /// A zero vector gives scale 0 and all-zero amplitudes.
    pub fn from_unnormalized(values: Vec<Complex64>, layout: RegisterLayout) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::DimensionMismatch { expected: layout.len(), found: values.len() });
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("register amplitudes".into()));
        }
        if let Some(i) = (0..values.len()).find(|&i| layout.is_pad(i) && values[i] != ZERO) {
            return Err(Error::Encoding(alloc::format!("padding amplitude {i} is nonzero")));
        }
        let scale = l2_norm(&values);
        let amplitudes = if scale > 0.0 { values.into_iter().map(|v| v / scale).collect() } else { values };
        Ok(Self { amplitudes, scale, layout })
    }

    /// Wraps already normalized amplitudes without touching them.
    pub fn from_parts(amplitudes: Vec<Complex64>, scale: f64, layout: RegisterLayout) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::NonFinite("register scale".into()));
        }
        let probe = Self::from_unnormalized(amplitudes.clone(), layout)?;
        let expected = if scale > 0.0 { 1.0 } else { 0.0 };
        if (probe.scale - expected).abs() > 1e-10 {
            return Err(Error::Encoding("amplitude norm does not match the scale".into()));
        }
        Ok(Self { amplitudes, scale, layout })
    }

    /// Stacks already transformed sub-states (each of physical length),
    /// padding the count with zero blocks up to a power of two.
    pub fn stack(blocks: &[Vec<Complex64>], physical: usize) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("no sub-states to stack".into()));
        }
        let layout = RegisterLayout::new(physical, blocks.len().next_power_of_two(), false)?;
        let mut values = vec![ZERO; layout.len()];
        for (m, block) in blocks.iter().enumerate() {
            if block.len() != physical {
                return Err(Error::DimensionMismatch { expected: physical, found: block.len() });
            }
            let start = layout.index(0, m, 0);
            values[start..start + physical].copy_from_slice(block);
        }
        Self::from_unnormalized(values, layout)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn num_qubits(&self) -> u32 {
        self.layout.num_qubits()
    }

    pub fn is_zero(&self) -> bool {
        self.scale == 0.0
    }

    /// Same layout and scale, new amplitudes.
    pub(crate) fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes, scale: self.scale, layout: self.layout }
    }

    /// Physical part of sub-state `m` (auxiliary bit 0), times `scale`.
    pub fn block_unnormalized(&self, m: usize) -> Result<Vec<Complex64>> {
        if m >= self.layout.stacks {
            return Err(Error::IndexOutOfRange { index: m, len: self.layout.stacks });
        }
        let start = self.layout.index(0, m, 0);
        Ok(self.amplitudes[start..start + self.layout.physical].iter().map(|a| a * self.scale).collect())
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }
}

pub(crate) fn l2_norm(v: &[Complex64]) -> f64 {
    libm::sqrt(v.iter().map(|z| z.norm_sqr()).sum())
}

fn validated_sqrt_metric(b_diag: &[f64]) -> Result<Vec<f64>> {
    b_diag
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value > 0.0 && value.is_finite() {
                Ok(libm::sqrt(value))
            } else {
                Err(Error::Encoding(alloc::format!("B entry {index} = {value} is not positive")))
            }
        })
        .collect()
}

/// `B^{1/2} w` as a complex vector (no normalization).
pub fn transform(w: &[f64], b_diag: &[f64]) -> Result<Vec<Complex64>> {
    if w.len() != b_diag.len() {
        return Err(Error::DimensionMismatch { expected: b_diag.len(), found: w.len() });
    }
    let root = validated_sqrt_metric(b_diag)?;
    Ok(w.iter().zip(&root).map(|(x, r)| Complex64::new(x * r, 0.0)).collect())
}

/// Encodes a real field as a single-block register state.
pub fn encode(w: &[f64], b_diag: &[f64]) -> Result<QuantumRegisterState> {
    let transformed = transform(w, b_diag)?;
    QuantumRegisterState::stack(&[transformed], w.len())
}

/// Inverse transform of one sub-state: `Re(B^{-1/2} scale * psi_m)`.
/// A zero-scale state decodes to the zero field.
pub fn decode_block(state: &QuantumRegisterState, m: usize, b_diag: &[f64]) -> Result<Vec<f64>> {
    if b_diag.len() != state.layout.physical {
        return Err(Error::DimensionMismatch { expected: state.layout.physical, found: b_diag.len() });
    }
    let root = validated_sqrt_metric(b_diag)?;
    let block = state.block_unnormalized(m)?;
    Ok(block.iter().zip(&root).map(|(v, r)| v.re / r).collect())
}

/// Decodes a single-block state back to the real field `w`.
pub fn decode(state: &QuantumRegisterState, b_diag: &[f64]) -> Result<Vec<f64>> {
    if state.layout.stacks != 1 || state.layout.auxiliary {
        return Err(Error::Encoding("decode expects a single unaugmented sub-state; use decode_block".into()));
    }
    decode_block(state, 0, b_diag)
}

/// `(w|w)_B = scale^2`.
pub fn energy(state: &QuantumRegisterState) -> f64 {
    state.scale * state.scale
}

/// `sum_i B_i w_i^2` evaluated directly on the classical field.
pub fn classical_energy(w: &[f64], b_diag: &[f64]) -> f64 {
    w.iter().zip(b_diag).map(|(x, b)| b * x * x).sum()
}

/// Block-diagonal Hamiltonian `diag(f_0, ..., f_{S-1}) (x) H_base` acting on
/// `S` stacked sub-registers of padded length `L`. A plain Hamiltonian has
/// a single unit factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    base: ComplexCsr,
    block_len: usize,
    factors: Vec<f64>,
}

impl Hamiltonian {
    /// Validates Hermiticity of the base matrix and wraps it with one block.
    pub fn from_csr(base: ComplexCsr) -> Result<Self> {
        let defect = base.hermiticity_defect();
        if defect > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian { defect });
        }
        let layout = RegisterLayout::single(base.dim())?;
        Ok(Self { base, block_len: layout.block, factors: vec![1.0] })
    }

    /// From complex triplets in any order (duplicates rejected).
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        entries.sort_by_key(|a| (a.0, a.1));
        for e in &entries {
            if e.0 >= n || e.1 >= n {
                return Err(Error::IndexOutOfRange { index: e.0.max(e.1), len: n });
            }
        }
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::DuplicateEntry { row: w[0].0, col: w[0].1 });
        }
        Self::from_csr(ComplexCsr::from_sorted(n, &entries))
    }

    /// Copy with `S = factors.len()` blocks scaled by `factors`.
    pub(crate) fn with_block_factors(&self, factors: Vec<f64>) -> Result<Self> {
        if !factors.len().is_power_of_two() {
            return Err(Error::NotPowerOfTwo(factors.len()));
        }
        if factors.iter().any(|f| !f.is_finite()) {
            return Err(Error::NonFinite("block factor".into()));
        }
        let layout = RegisterLayout::new(self.base.dim(), factors.len(), false)?;
        Ok(Self { base: self.base.clone(), block_len: layout.block, factors })
    }

    pub fn base(&self) -> &ComplexCsr {
        &self.base
    }

    /// Physical dimension `N` of one block.
    pub fn physical_dim(&self) -> usize {
        self.base.dim()
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn block_factors(&self) -> &[f64] {
        &self.factors
    }

    /// Full register dimension `S * L`.
    pub fn dim(&self) -> usize {
        self.factors.len() * self.block_len
    }

    pub fn num_qubits(&self) -> u32 {
        self.dim().trailing_zeros()
    }

    /// `max |H_jk|` over the full block operator.
    pub fn max_norm(&self) -> f64 {
        self.factors.iter().fold(0.0, |m: f64, f| m.max(f.abs())) * self.base.max_abs()
    }

    /// Maximum number of nonzeros in any row.
    pub fn sparsity(&self) -> usize {
        if self.factors.iter().all(|&f| f == 0.0) {
            0
        } else {
            self.base.max_row_nnz()
        }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.factors.iter().fold(0.0, |m: f64, f| m.max(f.abs())) * self.base.hermiticity_defect()
    }

    /// Induced infinity norm of the full operator.
    pub fn inf_norm(&self) -> f64 {
        self.factors.iter().fold(0.0, |m: f64, f| m.max(f.abs())) * self.base.inf_norm()
    }

    /// True when every entry is purely imaginary.
    pub fn is_purely_imaginary(&self) -> bool {
        self.base.triplets().all(|(_, _, v)| v.re == 0.0)
    }

    /// `y = H x` on the full register.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<()> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len().min(y.len()) });
        }
        let (l, n) = (self.block_len, self.base.dim());
        for (s, &f) in self.factors.iter().enumerate() {
            let range = s * l..(s + 1) * l;
            let (xs, ys) = (&x[range.clone()], &mut y[range]);
            if f == 0.0 {
                ys.iter_mut().for_each(|v| *v = ZERO);
            } else {
                self.base.matvec_scaled_into(f, xs, ys);
                ys[n..].iter_mut().for_each(|v| *v = ZERO);
            }
        }
        Ok(())
    }

    /// Full `(row, col, value)` list in canonical order.
    pub fn triplets(&self) -> Vec<(usize, usize, Complex64)> {
        let l = self.block_len;
        let mut out = Vec::new();
        for (s, &f) in self.factors.iter().enumerate() {
            if f != 0.0 {
                out.extend(self.base.triplets().map(|(r, c, v)| (s * l + r, s * l + c, v * f)));
            }
        }
        out
    }

    /// Dense `N x N` base matrix (no padding, no block factors).
    pub fn base_dense(&self) -> DMatrix<Complex64> {
        self.base.to_dense()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }
}

/// `H = i B^{-1/2} A B^{-1/2}` for a system with diagonal positive `B`.
pub fn build_hamiltonian<S: WaveOperators + ?Sized>(system: &S) -> Result<Hamiltonian> {
    let b = system.b();
    if !b.is_diagonal() {
        return Err(Error::Encoding("only diagonal B can be encoded".into()));
    }
    let root = validated_sqrt_metric(&b.diagonal())?;
    let a = system.a();
    // Each entry divides by the same product regardless of orientation, so
    // an exactly anti-symmetric A yields an exactly Hermitian H.
    let entries: Vec<_> = a
        .triplets()
        .iter()
        .filter(|e| e.2 != 0.0)
        .map(|&(r, c, v)| (r, c, Complex64::new(0.0, v / (root[r] * root[c]))))
        .collect();
    Hamiltonian::from_csr(ComplexCsr::from_sorted(a.rows(), &entries))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{OperatorPair, WaveOperators};
    use crate::sparse::SparseOperator;

    fn two_by_two(b: [f64; 2]) -> OperatorPair {
        use crate::discretization::{BlockLayout, Family};
        let a = SparseOperator::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        let layout = BlockLayout {
            family: Family::Acoustic,
            dimension: 1,
            primary: 1,
            secondary_x: 1,
            secondary_y: 0,
            spacing: [1.0, 0.0],
        };
        OperatorPair::new(a, SparseOperator::from_diagonal(&b).unwrap(), layout).unwrap()
    }

    #[test]
    fn identity_metric_hamiltonian() {
        let h = build_hamiltonian(&two_by_two([1.0, 1.0])).unwrap();
        assert_eq!(h.base().get(0, 1), Complex64::new(0.0, 1.0));
        assert_eq!(h.base().get(1, 0), Complex64::new(0.0, -1.0));
        assert_eq!(h.hermiticity_defect(), 0.0);
    }

    #[test]
    fn scaled_metric_hamiltonian() {
        let p = two_by_two([4.0, 1.0]);
        let h = build_hamiltonian(&p).unwrap();
        assert_eq!(h.base().get(0, 1), Complex64::new(0.0, 0.5));
        assert_eq!(h.base().get(1, 0), Complex64::new(0.0, -0.5));
        assert_eq!((h.max_norm(), h.sparsity()), (0.5, 1));
        assert!(p.len() == 2 && h.is_purely_imaginary());
    }

    #[test]
    fn encode_three_four() {
        let s = encode(&[3.0, 4.0], &[1.0, 1.0]).unwrap();
        assert_eq!(s.scale(), 5.0);
        assert_eq!(s.amplitudes(), &[Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)]);
        assert_eq!(energy(&s), 25.0);
    }

    #[test]
    fn encode_with_metric() {
        let s = encode(&[1.0, 1.0], &[9.0, 1.0]).unwrap();
        let r10 = libm::sqrt(10.0);
        assert!((s.scale() - r10).abs() < 1e-15);
        assert!((s.amplitudes()[0].re - 3.0 / r10).abs() < 1e-15);
        assert!((s.amplitudes()[1].re - 1.0 / r10).abs() < 1e-15);
    }

    #[test]
    fn encode_pads_with_zeros() {
        let s = encode(&[1.0, 2.0, 3.0], &[1.0; 3]).unwrap();
        assert_eq!(s.amplitudes().len(), 4);
        assert_eq!(s.amplitudes()[3], ZERO);
        assert_eq!(s.num_qubits(), 2);
    }

    #[test]
    fn zero_field_has_zero_scale() {
        let s = encode(&[0.0, 0.0], &[1.0, 2.0]).unwrap();
        assert!(s.is_zero());
        assert_eq!(energy(&s), 0.0);
        assert_eq!(decode(&s, &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn nonpositive_metric_rejected() {
        assert!(matches!(encode(&[1.0], &[0.0]), Err(Error::Encoding(_))));
    }

    #[test]
    fn non_hermitian_rejected() {
        let r = Hamiltonian::from_triplets(2, vec![(0, 1, Complex64::new(1.0, 0.0))]);
        assert!(matches!(r, Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn padding_must_be_zero() {
        let layout = RegisterLayout::single(3).unwrap();
        let mut v = vec![ZERO; 4];
        v[3] = Complex64::new(1.0, 0.0);
        assert!(QuantumRegisterState::from_unnormalized(v, layout).is_err());
    }

    #[test]
    fn register_limit() {
        assert!(matches!(
            RegisterLayout::new(1 << 20, 1 << 8, false),
            Err(Error::DimensionOverflow { qubits: 28, .. })
        ));
    }
}
