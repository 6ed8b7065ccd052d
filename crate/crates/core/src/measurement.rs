//! Subspace l2-norms of stacked register states through Pauli observables.
//!
//! A stacked state `[w_1; ...; w_M] / ||.||` is augmented with one auxiliary
//! qubit that separates each sub-state into its subspace part (auxiliary 0)
//! and complement (auxiliary 1). On the augmented register
//!
//! ```text
//! O_sum = 1/2 (I + Z)_aux (x) sum_{A in {I,X}^k} A (x) I_data
//! ```
//!
//! has expectation `||sum_m P_S w_m||^2 / ||[w_1; ...; w_M]||^2`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoding::{QuantumRegisterState, RegisterLayout};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Diagonal 0/1 projector over the physical DOFs of one sub-state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceProjector {
    mask: Vec<bool>,
}

impl SubspaceProjector {
    pub fn new(mask: Vec<bool>) -> Self {
        Self { mask }
    }

    pub fn full(n: usize) -> Self {
        Self { mask: vec![true; n] }
    }

    pub fn empty(n: usize) -> Self {
        Self { mask: vec![false; n] }
    }

    /// Projector onto the union of half-open index ranges.
    pub fn from_ranges(n: usize, ranges: &[(usize, usize)]) -> Result<Self> {
        let mut mask = vec![false; n];
        for &(lo, hi) in ranges {
            if lo > hi || hi > n {
                return Err(Error::IndexOutOfRange { index: hi, len: n });
            }
            mask[lo..hi].iter_mut().for_each(|m| *m = true);
        }
        Ok(Self { mask })
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    /// `d`, the number of selected DOFs.
    pub fn cardinality(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    /// `sum_i p_i |x_i|^2`.
    pub fn norm_sqr(&self, x: &[Complex64]) -> f64 {
        x.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(z, _)| z.norm_sqr()).sum()
    }
}

/// Adds the auxiliary qubit: amplitude `(0, m, l)` keeps `p_l phi[m, l]`,
/// amplitude `(1, m, l)` keeps `(1 - p_l) phi[m, l]`.
pub fn augment_state(phi: &QuantumRegisterState, projector: &SubspaceProjector) -> Result<QuantumRegisterState> {
    let layout = phi.layout();
    if layout.auxiliary {
        return Err(Error::InvalidArgument("state is already augmented".into()));
    }
    if projector.len() != layout.physical {
        return Err(Error::DimensionMismatch { expected: layout.physical, found: projector.len() });
    }
    let aug = RegisterLayout::new(layout.physical, layout.stacks, true)?;
    let mut out = vec![ZERO; aug.len()];
    for m in 0..layout.stacks {
        for (l, &p) in projector.mask().iter().enumerate() {
            let a = phi.amplitudes()[layout.index(0, m, l)];
            out[aug.index(usize::from(!p), m, l)] = a;
        }
    }
    QuantumRegisterState::from_parts(out, phi.scale(), aug)
}

/// Inverse of [`augment_state`].
pub fn deaugment_state(psi: &QuantumRegisterState, projector: &SubspaceProjector) -> Result<QuantumRegisterState> {
    let aug = psi.layout();
    if !aug.auxiliary {
        return Err(Error::InvalidArgument("state is not augmented".into()));
    }
    if projector.len() != aug.physical {
        return Err(Error::DimensionMismatch { expected: aug.physical, found: projector.len() });
    }
    let layout = RegisterLayout::new(aug.physical, aug.stacks, false)?;
    let mut out = vec![ZERO; layout.len()];
    for m in 0..aug.stacks {
        for (l, &p) in projector.mask().iter().enumerate() {
            out[layout.index(0, m, l)] = psi.amplitudes()[aug.index(usize::from(!p), m, l)];
        }
    }
    QuantumRegisterState::from_parts(out, psi.scale(), layout)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    I,
    X,
    Z,
}

impl Pauli {
    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of single-qubit Paulis; letter 0 acts on the most
/// significant qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    pub letters: Vec<Pauli>,
    pub coefficient: f64,
}

impl PauliString {
    pub fn num_qubits(&self) -> usize {
        self.letters.len()
    }

    fn mask_of(&self, which: Pauli) -> usize {
        let n = self.letters.len();
        self.letters
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == which)
            .fold(0, |m, (q, _)| m | (1 << (n - 1 - q)))
    }

    pub fn x_mask(&self) -> usize {
        self.mask_of(Pauli::X)
    }

    pub fn z_mask(&self) -> usize {
        self.mask_of(Pauli::Z)
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    pub fn label(&self) -> String {
        self.letters.iter().map(|p| p.symbol()).collect()
    }

    /// `<psi| P |psi>` (real, since `P` is Hermitian).
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        let (x, z) = (self.x_mask(), self.z_mask());
        psi.iter()
            .enumerate()
            .map(|(j, a)| {
                let sign = if (j & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                (psi[j ^ x].conj() * a).re * sign
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservableDecomposition {
    pub strings: Vec<PauliString>,
    /// Number of stacked sub-states `M`.
    pub arity: usize,
}

impl ObservableDecomposition {
    pub fn num_qubits(&self) -> usize {
        self.strings.first().map_or(0, PauliString::num_qubits)
    }

    pub fn coefficients(&self) -> Vec<f64> {
        self.strings.iter().map(|s| s.coefficient).collect()
    }

    /// `sum_j c_j <psi|O_j|psi>`.
    pub fn expectation(&self, psi: &[Complex64]) -> f64 {
        self.strings.iter().map(|s| s.coefficient * s.expectation(psi)).sum()
    }

    /// Dense matrix, for inspection on small registers.
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = 1usize << self.num_qubits();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for s in &self.strings {
            let (x, z) = (s.x_mask(), s.z_mask());
            for j in 0..n {
                let sign = if (j & z).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                m[(j ^ x, j)] += s.coefficient * sign;
            }
        }
        m
    }
}

fn string_with(prefix: &[Pauli], data_qubits: u32, coefficient: f64) -> PauliString {
    let mut letters = prefix.to_vec();
    letters.extend(core::iter::repeat_n(Pauli::I, data_qubits as usize));
    PauliString { letters, coefficient }
}

/// The four-string loss observable `{I I, I X, Z I, Z X} (x) I_data` with
/// coefficients `[0.5, -0.5, 0.5, -0.5]`, for a two-sub-state register
/// `[a; b]`; its scaled expectation is `||P_S (a - b)||^2`.
pub fn two_state_observable(data_qubits: u32) -> ObservableDecomposition {
    use Pauli::{I, X, Z};
    let strings = [([I, I], 0.5), ([I, X], -0.5), ([Z, I], 0.5), ([Z, X], -0.5)]
        .iter()
        .map(|(p, c)| string_with(p, data_qubits, *c))
        .collect();
    ObservableDecomposition { strings, arity: 2 }
}

/// `1/2 (I + Z)_aux (x) sum_{A in {I,X}^k} A (x) I_data`, `k = log2 M`;
/// `2M` strings, all with coefficient `1/2`.
pub fn multi_state_observable(m: usize, data_qubits: u32) -> Result<ObservableDecomposition> {
    if !m.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(m));
    }
    let k = m.trailing_zeros() as usize;
    let mut strings = Vec::with_capacity(2 * m);
    for aux in [Pauli::I, Pauli::Z] {
        for pattern in 0..m {
            let mut prefix = vec![aux];
            prefix.extend((0..k).map(|q| if pattern >> (k - 1 - q) & 1 == 1 { Pauli::X } else { Pauli::I }));
            strings.push(string_with(&prefix, data_qubits, 0.5));
        }
    }
    Ok(ObservableDecomposition { strings, arity: m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    Exact,
    Shots,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    /// Shots per Pauli string (shot mode).
    pub shots: usize,
    /// Required in shot mode.
    pub seed: Option<u64>,
}

impl EstimatorConfig {
    pub fn exact() -> Self {
        Self { mode: EstimatorMode::Exact, shots: 0, seed: None }
    }

    pub fn shots(shots: usize, seed: u64) -> Self {
        Self { mode: EstimatorMode::Shots, shots, seed: Some(seed) }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self::exact()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StringEstimate {
    pub label: String,
    pub coefficient: f64,
    pub expectation: f64,
    /// Single-shot variance of the +-1 outcomes (0 in exact mode).
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    /// Shots per string; 0 in exact mode.
    pub shots: usize,
    pub strings: Vec<StringEstimate>,
    /// Subspace cardinality `d`.
    pub cardinality: usize,
    /// Multi-controlled-X count of a direct permutation synthesis, `min(d, L-d) * n`.
    pub mcx_gate_estimate: usize,
    pub warnings: Vec<String>,
}

/// Applies Hadamards on every qubit set in `mask` (bit positions).
fn hadamards(psi: &mut [Complex64], mask: usize) {
    let r = core::f64::consts::FRAC_1_SQRT_2;
    let mut bits = mask;
    while bits != 0 {
        let bit = bits & bits.wrapping_neg();
        bits &= bits - 1;
        for j in 0..psi.len() {
            if j & bit == 0 {
                let (a, b) = (psi[j], psi[j | bit]);
                psi[j] = (a + b) * r;
                psi[j | bit] = (a - b) * r;
            }
        }
    }
}

/// Sample mean and single-shot variance of `shots` measurements of `string`.
fn sample_string(psi: &[Complex64], string: &PauliString, shots: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let mut rotated = psi.to_vec();
    hadamards(&mut rotated, string.x_mask());
    let mut cdf = Vec::with_capacity(rotated.len());
    let mut acc = 0.0;
    for z in &rotated {
        acc += z.norm_sqr();
        cdf.push(acc);
    }
    let support = string.x_mask() | string.z_mask();
    let mut sum = 0.0;
    for _ in 0..shots {
        let u: f64 = rng.random::<f64>() * acc;
        let outcome = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        sum += if (outcome & support).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    }
    let mean = sum / shots as f64;
    // Unbiased variance of +-1 samples.
    let variance = if shots > 1 { (1.0 - mean * mean) * shots as f64 / (shots - 1) as f64 } else { 1.0 };
    (mean, variance)
}

/// Estimates `scale^2 * sum_j c_j <psi|O_j|psi>` for the augmented `psi`.
pub fn estimate_observable(
    psi: &QuantumRegisterState,
    observable: &ObservableDecomposition,
    cfg: &EstimatorConfig,
) -> Result<Vec<StringEstimate>> {
    if observable.num_qubits() != psi.num_qubits() as usize {
        return Err(Error::DimensionMismatch { expected: psi.num_qubits() as usize, found: observable.num_qubits() });
    }
    let amps = psi.amplitudes();
    let mut out = Vec::with_capacity(observable.strings.len());
    match cfg.mode {
        EstimatorMode::Exact => {
            for s in &observable.strings {
                out.push(StringEstimate {
                    label: s.label(),
                    coefficient: s.coefficient,
                    expectation: s.expectation(amps),
                    variance: 0.0,
                });
            }
        }
        EstimatorMode::Shots => {
            let seed = cfg.seed.ok_or(Error::MissingSeed)?;
            if cfg.shots == 0 {
                return Err(Error::InvalidArgument("shot mode needs at least one shot".into()));
            }
            for (j, s) in observable.strings.iter().enumerate() {
                let (expectation, variance) = if s.is_identity() || psi.is_zero() {
                    (if psi.is_zero() { 0.0 } else { 1.0 }, 0.0)
                } else {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(j as u64);
                    sample_string(amps, s, cfg.shots, &mut rng)
                };
                out.push(StringEstimate { label: s.label(), coefficient: s.coefficient, expectation, variance });
            }
        }
    }
    Ok(out)
}

/// `||sum_m P_S w_m||^2` for the stacked state `phi = [w_1; ...; w_M]`
/// (normalized, with its scale), via the `2M`-string observable.
pub fn estimate(phi: &QuantumRegisterState, projector: &SubspaceProjector, cfg: &EstimatorConfig) -> Result<Estimate> {
    let layout = *phi.layout();
    let observable = multi_state_observable(layout.stacks, layout.data_qubits())?;
    estimate_with(phi, projector, &observable, cfg)
}

/// Like [`estimate`] with an explicit observable (for example
/// [`two_state_observable`]).
pub fn estimate_with(
    phi: &QuantumRegisterState,
    projector: &SubspaceProjector,
    observable: &ObservableDecomposition,
    cfg: &EstimatorConfig,
) -> Result<Estimate> {
    let layout = *phi.layout();
    if observable.arity != layout.stacks {
        return Err(Error::DimensionMismatch { expected: layout.stacks, found: observable.arity });
    }
    let psi = augment_state(phi, projector)?;
    let strings = estimate_observable(&psi, observable, cfg)?;
    let s2 = phi.scale() * phi.scale();
    let value = s2 * strings.iter().map(|s| s.coefficient * s.expectation).sum::<f64>();
    let shots = if cfg.mode == EstimatorMode::Shots { cfg.shots } else { 0 };
    let stderr = if shots > 0 {
        s2 * libm::sqrt(strings.iter().map(|s| s.coefficient * s.coefficient * s.variance).sum::<f64>() / shots as f64)
    } else {
        0.0
    };

    let d = projector.cardinality();
    let l = layout.block;
    let n = psi.num_qubits() as usize;
    let small = d.min(l - d);
    let polylog = (layout.data_qubits() as usize).pow(2).max(1);
    let mut warnings = Vec::new();
    if small > polylog {
        warnings.push(alloc::format!(
            "neither d = {d} nor L - d = {} is polylogarithmic in L = {l}; the subspace permutation is not efficient",
            l - d
        ));
    }
    Ok(Estimate { value, stderr, shots, strings, cardinality: d, mcx_gate_estimate: small * n, warnings })
}

/// `||P_S (a - b)||^2` for two transformed fields via the four-string observable.
pub fn l2_distance(
    a: &[Complex64],
    b: &[Complex64],
    projector: &SubspaceProjector,
    cfg: &EstimatorConfig,
) -> Result<Estimate> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let phi = QuantumRegisterState::stack(&[a.to_vec(), b.to_vec()], a.len())?;
    let observable = two_state_observable(phi.layout().data_qubits());
    estimate_with(&phi, projector, &observable, cfg)
}

/// `sum_j v_j l^2_{S_j}` over disjoint partitions.
pub fn weighted_l2(
    phi: &QuantumRegisterState,
    partitions: &[(SubspaceProjector, f64)],
    cfg: &EstimatorConfig,
) -> Result<f64> {
    let n = phi.layout().physical;
    let mut owner = vec![false; n];
    for (index, (p, v)) in partitions.iter().enumerate() {
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: p.len() });
        }
        if !(*v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("partition weight {v} must be positive")));
        }
        for (o, &m) in owner.iter_mut().zip(p.mask()) {
            if m && *o {
                return Err(Error::OverlappingPartitions { index });
            }
            *o |= m;
        }
    }
    let mut total = 0.0;
    for (p, v) in partitions {
        total += v * estimate(phi, p, cfg)?.value;
    }
    Ok(total)
}

/// Groups DOFs by identical metric value and weights each group by
/// `1/B`, so that `weighted_l2` of transformed fields returns the plain
/// l2-norm of the untransformed fields.
pub fn metric_partitions(b_diag: &[f64]) -> Vec<(SubspaceProjector, f64)> {
    let mut values: Vec<f64> = b_diag.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
        .into_iter()
        .map(|b| (SubspaceProjector::new(b_diag.iter().map(|&x| x == b).collect()), 1.0 / b))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn stacked(blocks: &[&[f64]]) -> QuantumRegisterState {
        let b: Vec<Vec<Complex64>> = blocks.iter().map(|x| x.iter().map(|&v| c(v)).collect()).collect();
        QuantumRegisterState::stack(&b, blocks[0].len()).unwrap()
    }

    #[test]
    fn augmented_example() {
        let phi = stacked(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let psi = augment_state(&phi, &SubspaceProjector::new(vec![true, false])).unwrap();
        let expect = [1.0, 0.0, 3.0, 0.0, 0.0, 2.0, 0.0, 4.0];
        for (z, e) in psi.amplitudes().iter().zip(expect) {
            assert!((z.re * phi.scale() - e).abs() < 1e-14);
        }
    }

    #[test]
    fn full_and_empty_projectors() {
        let phi = stacked(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let full = augment_state(&phi, &SubspaceProjector::full(2)).unwrap();
        assert!(full.amplitudes()[4..].iter().all(|z| *z == ZERO));
        let empty = augment_state(&phi, &SubspaceProjector::empty(2)).unwrap();
        assert!(empty.amplitudes()[..4].iter().all(|z| *z == ZERO));
    }

    #[test]
    fn two_state_dense_form() {
        let o = two_state_observable(0).to_dense();
        let expect = [[1.0, -1.0, 0.0, 0.0], [-1.0, 1.0, 0.0, 0.0], [0.0; 4], [0.0; 4]];
        for (i, row) in expect.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(o[(i, j)], v);
            }
        }
        assert_eq!(two_state_observable(3).coefficients().iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn string_counts() {
        assert_eq!(two_state_observable(5).strings.len(), 4);
        for m in [1, 2, 4, 8] {
            assert_eq!(multi_state_observable(m, 2).unwrap().strings.len(), 2 * m);
        }
        assert!(multi_state_observable(3, 2).is_err());
    }

    #[test]
    fn exact_known_values() {
        let cfg = EstimatorConfig::exact();
        let a = [c(3.0), c(4.0)];
        let e = l2_distance(&a, &[c(0.0), c(0.0)], &SubspaceProjector::full(2), &cfg).unwrap();
        assert!((e.value - 25.0).abs() < 1e-12);
        let same = l2_distance(&a, &a, &SubspaceProjector::new(vec![true, false]), &cfg).unwrap();
        assert_eq!(same.value, 0.0);
    }

    #[test]
    fn shots_need_seed() {
        let phi = stacked(&[&[1.0, 2.0]]);
        let cfg = EstimatorConfig { mode: EstimatorMode::Shots, shots: 10, seed: None };
        assert_eq!(estimate(&phi, &SubspaceProjector::full(2), &cfg), Err(Error::MissingSeed));
    }

    #[test]
    fn shot_mode_is_reproducible() {
        let phi = stacked(&[&[1.0, 2.0, 0.5], &[-0.3, 1.0, 2.0]]);
        let p = SubspaceProjector::new(vec![true, true, false]);
        let a = estimate(&phi, &p, &EstimatorConfig::shots(1000, 7)).unwrap();
        let b = estimate(&phi, &p, &EstimatorConfig::shots(1000, 7)).unwrap();
        assert_eq!(a, b);
        assert!(a.stderr > 0.0);
    }

    #[test]
    fn overlapping_partitions_rejected() {
        let phi = stacked(&[&[1.0, 2.0]]);
        let parts = [(SubspaceProjector::full(2), 1.0), (SubspaceProjector::new(vec![true, false]), 1.0)];
        assert_eq!(
            weighted_l2(&phi, &parts, &EstimatorConfig::exact()),
            Err(Error::OverlappingPartitions { index: 1 })
        );
    }

    #[test]
    fn deaugment_inverts() {
        let phi = stacked(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let p = SubspaceProjector::new(vec![false, true, true]);
        let back = deaugment_state(&augment_state(&phi, &p).unwrap(), &p).unwrap();
        assert_eq!(back, phi);
    }
}
