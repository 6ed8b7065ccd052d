//! Unitary action `e^{-iHt}` on register states and the block
//! Hamiltonians used to synchronize and co-evolve stacked sub-states.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::encoding::{l2_norm, Hamiltonian, QuantumRegisterState, HERMITIAN_TOLERANCE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolutionMethod {
    /// Dense below `dense_cutoff`, iterative above.
    Auto,
    DenseEigen,
    /// Truncated Taylor series with substeps of unit `||H|| tau`.
    Taylor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig {
    /// l2 error budget per application.
    pub tolerance: f64,
    pub method: EvolutionMethod,
    /// Largest block dimension handled by dense eigendecomposition.
    pub dense_cutoff: usize,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self { tolerance: 1e-12, method: EvolutionMethod::Auto, dense_cutoff: 4096 }
    }
}

impl EvolutionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("evolution tolerance must be positive".into()));
        }
        Ok(())
    }

    fn use_dense(&self, n: usize) -> bool {
        match self.method {
            EvolutionMethod::Auto => n <= self.dense_cutoff,
            EvolutionMethod::DenseEigen => true,
            EvolutionMethod::Taylor => false,
        }
    }
}

#[derive(Debug, Clone)]
enum Engine {
    Dense { vectors: DMatrix<Complex64>, values: Vec<f64> },
    Taylor { tolerance: f64 },
}

/// Reusable `e^{-iHt}` for one Hamiltonian. The dense engine diagonalizes
/// the base block once; every block factor and time reuses it.
#[derive(Debug, Clone)]
pub struct Propagator {
    hamiltonian: Hamiltonian,
    engine: Engine,
}

impl Propagator {
    pub fn new(h: &Hamiltonian, cfg: &EvolutionConfig) -> Result<Self> {
        cfg.validate()?;
        let defect = h.base().hermiticity_defect();
        if defect > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian { defect });
        }
        let engine = if cfg.use_dense(h.physical_dim()) {
            let eig = SymmetricEigen::new(h.base_dense());
            Engine::Dense { vectors: eig.eigenvectors, values: eig.eigenvalues.iter().copied().collect() }
        } else {
            Engine::Taylor { tolerance: cfg.tolerance }
        };
        Ok(Self { hamiltonian: h.clone(), engine })
    }

    /// Propagator for another Hamiltonian over the same base block (for
    /// example its synchronization or multi-copy form), reusing the
    /// decomposition.
    pub fn rebind(&self, h: &Hamiltonian) -> Result<Self> {
        if h.base() != self.hamiltonian.base() {
            return Err(Error::InvalidArgument("rebind needs the same base Hamiltonian".into()));
        }
        Ok(Self { hamiltonian: h.clone(), engine: self.engine.clone() })
    }

    pub fn hamiltonian(&self) -> &Hamiltonian {
        &self.hamiltonian
    }

    /// Eigenvalues of the base block, when the dense engine is in use.
    pub fn spectrum(&self) -> Option<&[f64]> {
        match &self.engine {
            Engine::Dense { values, .. } => Some(values),
            Engine::Taylor { .. } => None,
        }
    }

    /// `e^{-iHt} |psi>`; scale and layout are carried over unchanged.
    pub fn apply(&self, state: &QuantumRegisterState, t: f64) -> Result<QuantumRegisterState> {
        let layout = state.layout();
        if layout.auxiliary || layout.len() != self.hamiltonian.dim() {
            return Err(Error::DimensionMismatch { expected: self.hamiltonian.dim(), found: layout.len() });
        }
        if !t.is_finite() {
            return Err(Error::NonFinite("evolution time".into()));
        }
        let (l, n) = (self.hamiltonian.block_len(), self.hamiltonian.physical_dim());
        let mut out = state.amplitudes().to_vec();
        for (s, &f) in self.hamiltonian.block_factors().iter().enumerate() {
            let tau = f * t;
            let block = &mut out[s * l..s * l + n];
            if tau == 0.0 || block.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                continue;
            }
            match &self.engine {
                Engine::Dense { vectors, values } => dense_apply(vectors, values, tau, block),
                Engine::Taylor { tolerance } => taylor_apply(&self.hamiltonian, tau, *tolerance, block),
            }
        }
        Ok(state.with_amplitudes(out))
    }
}

fn dense_apply(vectors: &DMatrix<Complex64>, values: &[f64], tau: f64, block: &mut [Complex64]) {
    let x = DVector::from_column_slice(block);
    let mut coeffs = vectors.ad_mul(&x);
    for (c, &lambda) in coeffs.iter_mut().zip(values) {
        let phase = -lambda * tau;
        *c *= Complex64::new(libm::cos(phase), libm::sin(phase));
    }
    let y = vectors * coeffs;
    block.copy_from_slice(y.as_slice());
}

/// `e^{-i H_base tau} x` by Taylor series on substeps with `||H|| dt <= 1`.
fn taylor_apply(h: &Hamiltonian, tau: f64, tolerance: f64, block: &mut [Complex64]) {
    let base = h.base();
    let norm = base.inf_norm();
    let steps = libm::ceil(norm * tau.abs()).max(1.0) as usize;
    let dt = tau / steps as f64;
    let budget = tolerance / steps as f64;
    let n = block.len();
    let mut term = vec![Complex64::new(0.0, 0.0); n];
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..steps {
        let scale = l2_norm(block);
        term.copy_from_slice(block);
        // Terms shrink at least like 1/k! since ||H dt|| <= 1.
        for k in 1..64 {
            base.matvec_scaled_into(1.0, &term, &mut next);
            let factor = Complex64::new(0.0, -dt / k as f64);
            for (t, v) in term.iter_mut().zip(&next) {
                *t = v * factor;
            }
            for (b, t) in block.iter_mut().zip(&term) {
                *b += t;
            }
            if l2_norm(&term) <= 0.1 * budget * scale {
                break;
            }
        }
    }
}

/// One-shot `e^{-iHt}`; build a [`Propagator`] to amortize repeated calls.
pub fn evolve(
    state: &QuantumRegisterState,
    h: &Hamiltonian,
    t: f64,
    cfg: &EvolutionConfig,
) -> Result<QuantumRegisterState> {
    Propagator::new(h, cfg)?.apply(state, t)
}

fn require_single_block(h: &Hamiltonian) -> Result<()> {
    if h.block_factors() != [1.0] {
        return Err(Error::InvalidArgument("expected a single-block Hamiltonian".into()));
    }
    Ok(())
}

/// `H^sync = diag((T_sync - T_s^end) H)`, padded with zero blocks to a power
/// of two. Evolving it for unit time moves every sub-state to `T_sync`.
pub fn build_sync_hamiltonian(h: &Hamiltonian, t_ends: &[f64], t_sync: f64) -> Result<Hamiltonian> {
    require_single_block(h)?;
    if t_ends.is_empty() {
        return Err(Error::InvalidSchedule("no sub-states".into()));
    }
    if let Some(&late) = t_ends.iter().find(|&&t| !(t <= t_sync) || !t.is_finite()) {
        return Err(Error::InvalidSchedule(alloc::format!("end time {late} is after T_sync = {t_sync}")));
    }
    let mut factors: Vec<f64> = t_ends.iter().map(|t| t_sync - t).collect();
    factors.resize(t_ends.len().next_power_of_two(), 0.0);
    h.with_block_factors(factors)
}

/// `H^mult = I_S (x) H`.
pub fn build_mult_hamiltonian(h: &Hamiltonian, copies: usize) -> Result<Hamiltonian> {
    require_single_block(h)?;
    if !copies.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(copies));
    }
    h.with_block_factors(vec![1.0; copies])
}
