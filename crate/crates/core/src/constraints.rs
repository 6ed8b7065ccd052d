//! Linear constraints `R w = b(t)` eliminated from `B dw/dt = A w`.
//!
//! Splitting `w = [w_f; w_c]`, the constrained part is solved as
//! `w_c = R_c^{-1} (b - R_f w_f)` and the free part obeys
//! `B_ dw_f/dt = A_ w_f + s_c(t)` with
//!
//! ```text
//! B_  = B_ff - B_fc R_c^{-1} R_f
//! A_  = A_ff - A_fc R_c^{-1} R_f
//! s_c = A_fc R_c^{-1} b - B_fc R_c^{-1} db/dt
//! ```
//!
//! The reduction is only usable for unitary evolution when `B_` stays
//! symmetric and `A_` anti-symmetric; this is checked after the fact.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::discretization::{OperatorPair, StaggeredGrid, WaveOperators};
use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// Absolute tolerance on `max |B_ - B_^T|` and `max |A_ + A_^T|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Piecewise-linear vector-valued time series. A single sample is a
/// constant; no samples means identically zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorSeries {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl VectorSeries {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
        }
        if let Some(first) = values.first() {
            if let Some(bad) = values.iter().find(|v| v.len() != first.len()) {
                return Err(Error::DimensionMismatch { expected: first.len(), found: bad.len() });
            }
        }
        if times.iter().chain(values.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("constraint series".into()));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: Vec<f64>) -> Self {
        Self { times: vec![0.0], values: vec![value] }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Per-sample width, or `None` for the empty series.
    pub fn width(&self) -> Option<usize> {
        self.values.first().map(Vec::len)
    }

    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let hi = self.times.partition_point(|&s| s <= t);
        let lo = hi - 1;
        (lo, hi, (t - self.times[lo]) / (self.times[hi] - self.times[lo]))
    }

    fn interpolate(&self, samples: &[Vec<f64>], t: f64, out: &mut [f64]) {
        if samples.is_empty() {
            out.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        let (lo, hi, s) = self.bracket(t);
        for (k, o) in out.iter_mut().enumerate() {
            *o = (1.0 - s) * samples[lo][k] + s * samples[hi][k];
        }
    }

    /// Linear interpolation, held constant outside the sampled range.
    pub fn value_into(&self, t: f64, out: &mut [f64]) {
        self.interpolate(&self.values, t, out);
    }

    /// Second-order finite-difference derivative at the samples (central
    /// in the interior, one-sided at the ends), interpolated linearly.
    pub fn derivative_samples(&self) -> Vec<Vec<f64>> {
        let n = self.times.len();
        let width = self.width().unwrap_or(0);
        if n < 2 {
            return vec![vec![0.0; width]; n];
        }
        let t = &self.times;
        let y = &self.values;
        let mut d = vec![vec![0.0; width]; n];
        if n == 2 {
            let h = t[1] - t[0];
            for k in 0..width {
                let slope = (y[1][k] - y[0][k]) / h;
                d[0][k] = slope;
                d[1][k] = slope;
            }
            return d;
        }
        // Three-point Lagrange derivative on a nonuniform stencil, evaluated at
        // node `at` of the stencil (i0, i0+1, i0+2).
        let lagrange = |i0: usize, at: usize, k: usize| {
            let (x0, x1, x2) = (t[i0], t[i0 + 1], t[i0 + 2]);
            let x = t[i0 + at];
            let l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
            let l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
            let l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
            l0 * y[i0][k] + l1 * y[i0 + 1][k] + l2 * y[i0 + 2][k]
        };
        for k in 0..width {
            d[0][k] = lagrange(0, 0, k);
            for i in 1..n - 1 {
                d[i][k] = lagrange(i - 1, 1, k);
            }
            d[n - 1][k] = lagrange(n - 3, 2, k);
        }
        d
    }
}

/// Constraint rows `[R_f, R_c] [w_f; w_c] = b(t)`. Free DOFs are the
/// complement of `constrained`, kept in increasing order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    total: usize,
    constrained: Vec<usize>,
    free: Vec<usize>,
    r_f: SparseOperator,
    r_c: SparseOperator,
    b: VectorSeries,
}

impl ConstraintSet {
    pub fn new(
        total: usize,
        constrained: Vec<usize>,
        r_f: SparseOperator,
        r_c: SparseOperator,
        b: VectorSeries,
    ) -> Result<Self> {
        let n_c = constrained.len();
        let mut mark = vec![false; total];
        for &i in &constrained {
            if i >= total {
                return Err(Error::IndexOutOfRange { index: i, len: total });
            }
            if mark[i] {
                return Err(Error::InvalidArgument(alloc::format!("DOF {i} constrained twice")));
            }
            mark[i] = true;
        }
        let free: Vec<usize> = (0..total).filter(|&i| !mark[i]).collect();
        if r_f.rows() != n_c || r_f.cols() != free.len() {
            return Err(Error::DimensionMismatch { expected: n_c * free.len(), found: r_f.rows() * r_f.cols() });
        }
        if r_c.rows() != n_c || r_c.cols() != n_c {
            return Err(Error::DimensionMismatch { expected: n_c, found: r_c.rows() });
        }
        if let Some(w) = b.width() {
            if w != n_c {
                return Err(Error::DimensionMismatch { expected: n_c, found: w });
            }
        }
        Ok(Self { total, constrained, free, r_f, r_c, b })
    }

    /// The empty constraint set over `total` DOFs.
    pub fn none(total: usize) -> Self {
        Self {
            total,
            constrained: Vec::new(),
            free: (0..total).collect(),
            r_f: SparseOperator::zeros(0, total),
            r_c: SparseOperator::zeros(0, 0),
            b: VectorSeries::default(),
        }
    }

    /// Replaces the right-hand side series `b(t)`.
    pub fn with_rhs(mut self, b: VectorSeries) -> Result<Self> {
        if let Some(w) = b.width() {
            if w != self.constrained.len() {
                return Err(Error::DimensionMismatch { expected: self.constrained.len(), found: w });
            }
        }
        self.b = b;
        Ok(self)
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn constrained(&self) -> &[usize] {
        &self.constrained
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn r_f(&self) -> &SparseOperator {
        &self.r_f
    }

    pub fn r_c(&self) -> &SparseOperator {
        &self.r_c
    }

    pub fn rhs(&self) -> &VectorSeries {
        &self.b
    }

    pub fn is_empty(&self) -> bool {
        self.constrained.is_empty()
    }
}

/// Homogeneous Dirichlet constraints (`R_f = 0`, `R_c = I`, `b = 0`) on
/// the given pressure DOFs.
pub fn dirichlet_constraints(grid: &StaggeredGrid, pressure_dofs: &[usize]) -> Result<ConstraintSet> {
    let n_u = grid.n_u();
    let mut dofs = pressure_dofs.to_vec();
    if let Some(&bad) = dofs.iter().find(|&&i| i >= n_u) {
        return Err(Error::IndexOutOfRange { index: bad, len: n_u });
    }
    dofs.sort_unstable();
    dofs.dedup();
    let n_c = dofs.len();
    let total = grid.n_total();
    ConstraintSet::new(
        total,
        dofs,
        SparseOperator::zeros(n_c, total - n_c),
        SparseOperator::identity(n_c),
        VectorSeries::default(),
    )
}

/// `R_c^{-1}`: transposed reciprocal for scaled permutations, dense LU otherwise.
fn invert_rc(r_c: &SparseOperator) -> Result<SparseOperator> {
    let n = r_c.rows();
    let mut row_seen = vec![false; n];
    let mut col_seen = vec![false; n];
    let scaled_permutation = r_c.nnz() == n
        && r_c.triplets().iter().all(|&(r, c, v)| {
            let fresh = !row_seen[r] && !col_seen[c] && v != 0.0;
            row_seen[r] = true;
            col_seen[c] = true;
            fresh
        });
    if scaled_permutation {
        let entries = r_c.triplets().iter().map(|&(r, c, v)| (c, r, 1.0 / v)).collect();
        return SparseOperator::from_triplets(n, n, entries);
    }
    let dense = r_c.to_dense();
    let scale = dense.amax();
    let lu = dense.lu();
    let pivot_floor = scale * n as f64 * f64::EPSILON;
    if scale == 0.0 || lu.u().diagonal().iter().any(|p| p.abs() <= pivot_floor) {
        return Err(Error::SingularConstraint);
    }
    let inv: DMatrix<f64> = lu.try_inverse().ok_or(Error::SingularConstraint)?;
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularConstraint);
    }
    Ok(SparseOperator::from_dense(&inv, 0.0))
}

/// System over the free DOFs after eliminating a [`ConstraintSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    a: SparseOperator,
    b: SparseOperator,
    free: Vec<usize>,
    constrained: Vec<usize>,
    total: usize,
    primary: usize,
    min_spacing: f64,
    dimension: usize,
    /// `A_fc R_c^{-1}` and `B_fc R_c^{-1}`, applied to `b` and `db/dt`.
    a_fc_rc_inv: SparseOperator,
    b_fc_rc_inv: SparseOperator,
    /// `R_c^{-1} R_f` and `R_c^{-1}`, used to rebuild `w_c`.
    rc_inv_rf: SparseOperator,
    rc_inv: SparseOperator,
    rhs: VectorSeries,
    rhs_derivative: Vec<Vec<f64>>,
}

/// Eliminates `cs` from `pair` and validates that the reduced `B` is
/// symmetric and the reduced `A` anti-symmetric.
pub fn reduce_system(pair: &OperatorPair, cs: &ConstraintSet) -> Result<ReducedSystem> {
    let n = pair.len();
    if cs.total() != n {
        return Err(Error::DimensionMismatch { expected: n, found: cs.total() });
    }
    let (f, c) = (cs.free(), cs.constrained());
    let a_ff = pair.a().submatrix(f, f)?;
    let a_fc = pair.a().submatrix(f, c)?;
    let b_ff = pair.b().submatrix(f, f)?;
    let b_fc = pair.b().submatrix(f, c)?;
    let rc_inv = invert_rc(cs.r_c())?;
    let rc_inv_rf = rc_inv.matmul(cs.r_f())?;
    let a_fc_rc_inv = a_fc.matmul(&rc_inv)?;
    let b_fc_rc_inv = b_fc.matmul(&rc_inv)?;
    let a = a_ff.add(&a_fc_rc_inv.matmul(cs.r_f())?.scaled(-1.0))?;
    let b = b_ff.add(&b_fc_rc_inv.matmul(cs.r_f())?.scaled(-1.0))?;

    let defect = a.antisymmetry_defect().max(b.symmetry_defect());
    if defect > SYMMETRY_TOLERANCE {
        return Err(Error::IncompatibleConstraints { defect });
    }
    if b.is_diagonal() {
        if let Some((index, &value)) = b.diagonal().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveMaterial { index, value });
        }
    } else if b.to_dense().cholesky().is_none() {
        return Err(Error::IncompatibleConstraints { defect: f64::INFINITY });
    }

    let primary = f.partition_point(|&i| i < pair.primary_len());
    let rhs_derivative = cs.rhs().derivative_samples();
    Ok(ReducedSystem {
        a,
        b,
        free: f.to_vec(),
        constrained: c.to_vec(),
        total: n,
        primary,
        min_spacing: pair.min_spacing(),
        dimension: pair.dimension(),
        a_fc_rc_inv,
        b_fc_rc_inv,
        rc_inv_rf,
        rc_inv,
        rhs: cs.rhs().clone(),
        rhs_derivative,
    })
}

impl ReducedSystem {
    /// Free DOF `k` of the reduced system is DOF `free_dofs()[k]` of the full grid.
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn constrained_dofs(&self) -> &[usize] {
        &self.constrained
    }

    pub fn full_len(&self) -> usize {
        self.total
    }

    /// True when `s_c` vanishes identically (no or all-zero `b`).
    pub fn is_homogeneous(&self) -> bool {
        self.rhs.samples().iter().flatten().all(|&v| v == 0.0)
    }

    /// `s_c(t) = A_fc R_c^{-1} b(t) - B_fc R_c^{-1} db/dt(t)`, written into `out`.
    pub fn induced_source_into(&self, t: f64, out: &mut [f64]) -> Result<()> {
        let n_c = self.constrained.len();
        let mut b = vec![0.0; n_c];
        let mut db = vec![0.0; n_c];
        self.rhs.value_into(t, &mut b);
        self.rhs.interpolate(&self.rhs_derivative, t, &mut db);
        self.a_fc_rc_inv.matvec_into(&b, out)?;
        let mut tmp = vec![0.0; out.len()];
        self.b_fc_rc_inv.matvec_into(&db, &mut tmp)?;
        out.iter_mut().zip(&tmp).for_each(|(o, d)| *o -= d);
        Ok(())
    }

    pub fn induced_source(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.free.len()];
        // Dimensions are fixed at construction.
        self.induced_source_into(t, &mut out).expect("consistent reduced dimensions");
        out
    }

    /// Picks the free DOFs out of a full-grid vector.
    pub fn restrict(&self, full: &[f64]) -> Result<Vec<f64>> {
        if full.len() != self.total {
            return Err(Error::DimensionMismatch { expected: self.total, found: full.len() });
        }
        Ok(self.free.iter().map(|&i| full[i]).collect())
    }

    /// Rebuilds the full vector, filling `w_c = R_c^{-1} (b(t) - R_f w_f)`.
    pub fn expand(&self, w_f: &[f64], t: f64) -> Result<Vec<f64>> {
        if w_f.len() != self.free.len() {
            return Err(Error::DimensionMismatch { expected: self.free.len(), found: w_f.len() });
        }
        let mut b = vec![0.0; self.constrained.len()];
        self.rhs.value_into(t, &mut b);
        let from_b = self.rc_inv.matvec(&b)?;
        let from_f = self.rc_inv_rf.matvec(w_f)?;
        let mut full = vec![0.0; self.total];
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = w_f[k];
        }
        for (k, &i) in self.constrained.iter().enumerate() {
            full[i] = from_b[k] - from_f[k];
        }
        Ok(full)
    }
}

impl WaveOperators for ReducedSystem {
    fn a(&self) -> &SparseOperator {
        &self.a
    }
    fn b(&self) -> &SparseOperator {
        &self.b
    }
    fn primary_len(&self) -> usize {
        self.primary
    }
    fn min_spacing(&self) -> f64 {
        self.min_spacing
    }
    fn dimension(&self) -> usize {
        self.dimension
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_operator_pair, MaterialModel, Side};

    fn pair_1d(n: usize) -> (StaggeredGrid, OperatorPair) {
        let g = StaggeredGrid::new(1, &[(0.0, 1.0)], &[n]).unwrap();
        let m = MaterialModel::acoustic_homogeneous(&g, 1.0, 1.0);
        let p = assemble_operator_pair(&g, &m).unwrap();
        (g, p)
    }

    #[test]
    fn dirichlet_on_4x4_perimeter() {
        let g = StaggeredGrid::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[4, 4]).unwrap();
        let dofs = g.boundary_pressure_dofs_union(&[Side::Left, Side::Right, Side::Bottom, Side::Top]).unwrap();
        let cs = dirichlet_constraints(&g, &dofs).unwrap();
        assert_eq!(cs.constrained().len(), 12);
    }

    #[test]
    fn empty_constraints_are_identity() {
        let (g, p) = pair_1d(5);
        let cs = dirichlet_constraints(&g, &[]).unwrap();
        let r = reduce_system(&p, &cs).unwrap();
        assert_eq!(r.a(), p.a());
        assert_eq!(r.b(), p.b());
        assert!(r.induced_source(0.3).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn out_of_range_dirichlet_rejected() {
        let (g, _) = pair_1d(5);
        assert!(dirichlet_constraints(&g, &[5]).is_err());
    }

    #[test]
    fn constant_rhs_source_uses_a_fc_only() {
        let (g, p) = pair_1d(4);
        let cs = dirichlet_constraints(&g, &[0]).unwrap().with_rhs(VectorSeries::constant(vec![2.0])).unwrap();
        let r = reduce_system(&p, &cs).unwrap();
        let s = r.induced_source(1.0);
        let a_fc = p.a().submatrix(cs.free(), cs.constrained()).unwrap();
        assert_eq!(s, a_fc.matvec(&[2.0]).unwrap());
        assert!(s.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn derivative_is_exact_on_quadratics() {
        let times = vec![0.0, 0.1, 0.35, 0.5, 0.9];
        let values = times.iter().map(|&t| vec![t * t - 3.0 * t]).collect();
        let s = VectorSeries::new(times.clone(), values).unwrap();
        for (t, d) in times.iter().zip(s.derivative_samples()) {
            assert!((d[0] - (2.0 * t - 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_rc_rejected() {
        let rc = SparseOperator::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]).unwrap();
        assert_eq!(invert_rc(&rc), Err(Error::SingularConstraint));
    }

    #[test]
    fn general_rc_inverse() {
        let rc = SparseOperator::from_triplets(2, 2, vec![(0, 0, 2.0), (0, 1, 1.0), (1, 1, 4.0)]).unwrap();
        let inv = invert_rc(&rc).unwrap();
        let prod = rc.matmul(&inv).unwrap().to_dense();
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn expand_restores_constrained_values() {
        let (g, p) = pair_1d(4);
        let cs = dirichlet_constraints(&g, &[3]).unwrap().with_rhs(VectorSeries::constant(vec![0.5])).unwrap();
        let r = reduce_system(&p, &cs).unwrap();
        let wf: Vec<f64> = (0..r.len()).map(|k| k as f64).collect();
        let full = r.expand(&wf, 0.0).unwrap();
        assert_eq!(full[3], 0.5);
        assert_eq!(r.restrict(&full).unwrap(), wf);
    }
}
