//! Staggered grids, discrete gradient/divergence pairs and the `(B, A)`
//! operator pair of the acoustic (1D/2D) and 1D TEM Maxwell systems.
//!
//! DOF ordering is fixed: pressure (or `E`) first, then `v_x` (or `H`),
//! then `v_y`. Inside each block points are enumerated row-major with `x`
//! fastest, so pressure point `(i, j)` has index `i + j * n_x`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sparse::SparseOperator;

/// Which field block a DOF belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldBlock {
    Pressure,
    VelocityX,
    VelocityY,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Acoustic,
    Maxwell1d,
}

/// Domain boundary. `Bottom`/`Top` are `y = y0`/`y = y1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredGrid {
    dimension: usize,
    bounds: [(f64, f64); 2],
    nodes: [usize; 2],
    spacing: [f64; 2],
}

impl StaggeredGrid {
    /// Builds a uniform staggered grid. `bounds` and `nodes` must have
    /// `dimension` entries; every axis needs at least two nodes.
    pub fn new(dimension: usize, bounds: &[(f64, f64)], nodes: &[usize]) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::InvalidGrid(alloc::format!("dimension {dimension} not in {{1, 2}}")));
        }
        if bounds.len() != dimension || nodes.len() != dimension {
            return Err(Error::InvalidGrid("bounds/node counts do not match the dimension".into()));
        }
        let mut b = [(0.0, 0.0); 2];
        let mut n = [1usize; 2];
        let mut h = [0.0; 2];
        for axis in 0..dimension {
            let (lo, hi) = bounds[axis];
            if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
                return Err(Error::InvalidGrid(alloc::format!("degenerate bounds [{lo}, {hi}] on axis {axis}")));
            }
            if nodes[axis] < 2 {
                return Err(Error::InvalidGrid(alloc::format!("axis {axis} needs at least 2 nodes")));
            }
            b[axis] = (lo, hi);
            n[axis] = nodes[axis];
            h[axis] = (hi - lo) / (nodes[axis] - 1) as f64;
        }
        Ok(Self { dimension, bounds: b, nodes: n, spacing: h })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn nx(&self) -> usize {
        self.nodes[0]
    }

    /// 1 for one-dimensional grids.
    pub fn ny(&self) -> usize {
        self.nodes[1]
    }

    pub fn dx(&self) -> f64 {
        self.spacing[0]
    }

    /// 0 for one-dimensional grids.
    pub fn dy(&self) -> f64 {
        self.spacing[1]
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds[..self.dimension]
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dimension].iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn n_u(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn n_vx(&self) -> usize {
        (self.nodes[0] - 1) * self.nodes[1]
    }

    pub fn n_vy(&self) -> usize {
        if self.dimension == 2 {
            self.nodes[0] * (self.nodes[1] - 1)
        } else {
            0
        }
    }

    pub fn n_v(&self) -> usize {
        self.n_vx() + self.n_vy()
    }

    pub fn n_total(&self) -> usize {
        self.n_u() + self.n_v()
    }

    pub fn pressure_index(&self, i: usize, j: usize) -> usize {
        i + j * self.nodes[0]
    }

    pub fn pressure_coords(&self, k: usize) -> (usize, usize) {
        (k % self.nodes[0], k / self.nodes[0])
    }

    pub fn vx_index(&self, i: usize, j: usize) -> usize {
        i + j * (self.nodes[0] - 1)
    }

    pub fn vx_coords(&self, k: usize) -> (usize, usize) {
        (k % (self.nodes[0] - 1), k / (self.nodes[0] - 1))
    }

    pub fn vy_index(&self, i: usize, j: usize) -> usize {
        i + j * self.nodes[0]
    }

    pub fn vy_coords(&self, k: usize) -> (usize, usize) {
        (k % self.nodes[0], k / self.nodes[0])
    }

    fn node_x(&self, i: f64) -> f64 {
        self.bounds[0].0 + i * self.spacing[0]
    }

    fn node_y(&self, j: f64) -> f64 {
        self.bounds[1].0 + j * self.spacing[1]
    }

    /// Physical position of a DOF in the global `[u; v_x; v_y]` ordering.
    pub fn dof_position(&self, dof: usize) -> Result<(FieldBlock, [f64; 2])> {
        let (n_u, n_vx) = (self.n_u(), self.n_vx());
        if dof < n_u {
            let (i, j) = self.pressure_coords(dof);
            Ok((FieldBlock::Pressure, [self.node_x(i as f64), self.node_y(j as f64)]))
        } else if dof < n_u + n_vx {
            let (i, j) = self.vx_coords(dof - n_u);
            Ok((FieldBlock::VelocityX, [self.node_x(i as f64 + 0.5), self.node_y(j as f64)]))
        } else if dof < self.n_total() {
            let (i, j) = self.vy_coords(dof - n_u - n_vx);
            Ok((FieldBlock::VelocityY, [self.node_x(i as f64), self.node_y(j as f64 + 0.5)]))
        } else {
            Err(Error::IndexOutOfRange { index: dof, len: self.n_total() })
        }
    }

    /// Pressure DOFs lying on one side of the domain, in increasing order.
    pub fn boundary_pressure_dofs(&self, side: Side) -> Result<Vec<usize>> {
        let (nx, ny) = (self.nodes[0], self.nodes[1]);
        let dofs = match side {
            Side::Left => (0..ny).map(|j| self.pressure_index(0, j)).collect(),
            Side::Right => (0..ny).map(|j| self.pressure_index(nx - 1, j)).collect(),
            Side::Bottom | Side::Top if self.dimension == 1 => {
                return Err(Error::InvalidGrid("top/bottom boundaries need a 2D grid".into()))
            }
            Side::Bottom => (0..nx).map(|i| self.pressure_index(i, 0)).collect(),
            Side::Top => (0..nx).map(|i| self.pressure_index(i, ny - 1)).collect(),
        };
        Ok(dofs)
    }

    /// Pressure DOFs on any of `sides`, deduplicated and sorted.
    pub fn boundary_pressure_dofs_union(&self, sides: &[Side]) -> Result<Vec<usize>> {
        let mut all = Vec::new();
        for &side in sides {
            all.extend(self.boundary_pressure_dofs(side)?);
        }
        all.sort_unstable();
        all.dedup();
        Ok(all)
    }
}

/// Discrete gradient `G` (pressure -> velocity) and divergence `Dv`
/// (velocity -> pressure), each built from its own stencil so that
/// `G = -Dv^T` is a property of the construction rather than an assumption.
pub fn gradient_divergence(grid: &StaggeredGrid) -> Result<(SparseOperator, SparseOperator)> {
    let (n_u, n_vx, n_vy) = (grid.n_u(), grid.n_vx(), grid.n_vy());
    let (nx, ny) = (grid.nx(), grid.ny());
    let (ix, iy) = (1.0 / grid.dx(), if grid.dimension() == 2 { 1.0 / grid.dy() } else { 0.0 });

    let mut g = Vec::with_capacity(2 * (n_vx + n_vy));
    for j in 0..ny {
        for i in 0..nx - 1 {
            let row = grid.vx_index(i, j);
            g.push((row, grid.pressure_index(i + 1, j), ix));
            g.push((row, grid.pressure_index(i, j), -ix));
        }
    }
    if grid.dimension() == 2 {
        for j in 0..ny - 1 {
            for i in 0..nx {
                let row = n_vx + grid.vy_index(i, j);
                g.push((row, grid.pressure_index(i, j + 1), iy));
                g.push((row, grid.pressure_index(i, j), -iy));
            }
        }
    }

    // Divergence at a pressure node: (v(+1/2) - v(-1/2)) / h, with velocities
    // outside the domain absent (zero normal velocity).
    let mut d = Vec::with_capacity(2 * (n_vx + n_vy));
    for j in 0..ny {
        for i in 0..nx {
            let row = grid.pressure_index(i, j);
            if i + 1 < nx {
                d.push((row, grid.vx_index(i, j), ix));
            }
            if i > 0 {
                d.push((row, grid.vx_index(i - 1, j), -ix));
            }
            if grid.dimension() == 2 {
                if j + 1 < ny {
                    d.push((row, n_vx + grid.vy_index(i, j), iy));
                }
                if j > 0 {
                    d.push((row, n_vx + grid.vy_index(i, j - 1), -iy));
                }
            }
        }
    }
    Ok((
        SparseOperator::from_triplets(n_vx + n_vy, n_u, g)?,
        SparseOperator::from_triplets(n_u, n_vx + n_vy, d)?,
    ))
}

/// Per-DOF material coefficients sampled at the staggered points they
/// multiply (pointwise, no averaging).
#[derive(Debug, Clone, PartialEq)]
pub enum MaterialModel {
    /// `rho` at velocity points, `rho * c^2` at pressure points.
    Acoustic { rho_velocity: Vec<f64>, rho_c2_pressure: Vec<f64> },
    /// Permittivity at `E` (node) points, permeability at `H` (midpoint) points.
    Maxwell1d { permittivity: Vec<f64>, permeability: Vec<f64> },
}

impl MaterialModel {
    pub fn acoustic_homogeneous(grid: &StaggeredGrid, rho: f64, c: f64) -> Self {
        Self::acoustic_from_fn(grid, |_| (rho, c))
    }

    /// Samples `(rho, c)` at every staggered point.
    pub fn acoustic_from_fn(grid: &StaggeredGrid, mut rho_c: impl FnMut([f64; 2]) -> (f64, f64)) -> Self {
        let n_u = grid.n_u();
        let mut rho_c2_pressure = Vec::with_capacity(n_u);
        let mut rho_velocity = Vec::with_capacity(grid.n_v());
        for dof in 0..grid.n_total() {
            // dof is in range by construction
            let (block, x) = grid.dof_position(dof).expect("dof in range");
            let (rho, c) = rho_c(x);
            match block {
                FieldBlock::Pressure => rho_c2_pressure.push(rho * c * c),
                _ => rho_velocity.push(rho),
            }
        }
        Self::Acoustic { rho_velocity, rho_c2_pressure }
    }

    pub fn maxwell1d_homogeneous(grid: &StaggeredGrid, permittivity: f64, permeability: f64) -> Self {
        Self::maxwell1d_from_fn(grid, |_| (permittivity, permeability))
    }

    pub fn maxwell1d_from_fn(grid: &StaggeredGrid, mut eps_mu: impl FnMut(f64) -> (f64, f64)) -> Self {
        let mut permittivity = Vec::with_capacity(grid.n_u());
        let mut permeability = Vec::with_capacity(grid.n_vx());
        for dof in 0..grid.n_u() + grid.n_vx() {
            let (block, x) = grid.dof_position(dof).expect("dof in range");
            let (eps, mu) = eps_mu(x[0]);
            match block {
                FieldBlock::Pressure => permittivity.push(eps),
                _ => permeability.push(mu),
            }
        }
        Self::Maxwell1d { permittivity, permeability }
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Acoustic { .. } => Family::Acoustic,
            Self::Maxwell1d { .. } => Family::Maxwell1d,
        }
    }

    /// Diagonal of `B` in global DOF order.
    pub fn metric_diagonal(&self) -> Result<Vec<f64>> {
        let diag: Vec<f64> = match self {
            Self::Acoustic { rho_velocity, rho_c2_pressure } => {
                rho_c2_pressure.iter().map(|k| 1.0 / k).chain(rho_velocity.iter().copied()).collect()
            }
            Self::Maxwell1d { permittivity, permeability } => {
                permittivity.iter().chain(permeability.iter()).copied().collect()
            }
        };
        let raw: Vec<f64> = match self {
            Self::Acoustic { rho_velocity, rho_c2_pressure } => {
                rho_c2_pressure.iter().chain(rho_velocity.iter()).copied().collect()
            }
            Self::Maxwell1d { permittivity, permeability } => {
                permittivity.iter().chain(permeability.iter()).copied().collect()
            }
        };
        if let Some((index, &value)) = raw.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::NonPositiveMaterial { index, value });
        }
        Ok(diag)
    }
}

/// Block structure of an operator pair: `primary` leading DOFs (pressure
/// or `E`) followed by the secondary ones (velocities or `H`).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    pub family: Family,
    pub dimension: usize,
    pub primary: usize,
    pub secondary_x: usize,
    pub secondary_y: usize,
    pub spacing: [f64; 2],
}

impl BlockLayout {
    pub fn len(&self) -> usize {
        self.primary + self.secondary_x + self.secondary_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing[..self.dimension].iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Anything that provides the semi-discrete system `B dw/dt = A w` with a
/// primary/secondary block split.
pub trait WaveOperators {
    fn a(&self) -> &SparseOperator;
    fn b(&self) -> &SparseOperator;
    /// Number of leading DOFs in the primary (pressure / `E`) block.
    fn primary_len(&self) -> usize;
    fn min_spacing(&self) -> f64;
    fn dimension(&self) -> usize;

    fn len(&self) -> usize {
        self.a().rows()
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest local wave speed `1/sqrt(B_p B_s)` over coupled
    /// primary/secondary pairs. Requires diagonal `B`.
    fn max_wave_speed(&self) -> f64 {
        let b = self.b().diagonal();
        let p = self.primary_len();
        self.a()
            .triplets()
            .iter()
            .filter(|e| e.0 < p && e.1 >= p)
            .map(|&(r, c, _)| 1.0 / libm::sqrt(b[r] * b[c]))
            .fold(0.0, f64::max)
    }
}

/// `A` (anti-symmetric) and `B` (positive diagonal) of a discretized
/// lossless wave equation.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorPair {
    a: SparseOperator,
    b: SparseOperator,
    layout: BlockLayout,
}

impl OperatorPair {
    /// Validates and wraps an externally built pair.
    pub fn new(a: SparseOperator, b: SparseOperator, layout: BlockLayout) -> Result<Self> {
        let n = layout.len();
        if a.rows() != n || a.cols() != n || b.rows() != n || b.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: a.rows() });
        }
        let defect = a.antisymmetry_defect();
        if defect != 0.0 {
            return Err(Error::IncompatibleConstraints { defect });
        }
        if !b.is_diagonal() {
            return Err(Error::Encoding("B must be diagonal".into()));
        }
        if let Some((index, &value)) = b.diagonal().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveMaterial { index, value });
        }
        Ok(Self { a, b, layout })
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn metric_diagonal(&self) -> Vec<f64> {
        self.b.diagonal()
    }
}

impl WaveOperators for OperatorPair {
    fn a(&self) -> &SparseOperator {
        &self.a
    }
    fn b(&self) -> &SparseOperator {
        &self.b
    }
    fn primary_len(&self) -> usize {
        self.layout.primary
    }
    fn min_spacing(&self) -> f64 {
        self.layout.min_spacing()
    }
    fn dimension(&self) -> usize {
        self.layout.dimension
    }
}

/// Assembles `(B, A)` for the grid's equation family.
///
/// Acoustic: `A = [[0, -Dv], [-G, 0]]`, `B = diag(1/(rho c^2), rho)`.
/// Maxwell 1D (`E_z`, `H_y`): `A = [[0, Dv], [-Dv^T, 0]]`, `B = diag(eps, mu)`.
pub fn assemble_operator_pair(grid: &StaggeredGrid, material: &MaterialModel) -> Result<OperatorPair> {
    let (g, dv) = gradient_divergence(grid)?;
    let (n_u, n_v) = (grid.n_u(), grid.n_v());
    let n = n_u + n_v;
    let expected_len = match material {
        MaterialModel::Acoustic { rho_velocity, rho_c2_pressure } => {
            if rho_c2_pressure.len() != n_u {
                return Err(Error::DimensionMismatch { expected: n_u, found: rho_c2_pressure.len() });
            }
            rho_velocity.len()
        }
        MaterialModel::Maxwell1d { permittivity, permeability } => {
            if grid.dimension() != 1 {
                return Err(Error::InvalidGrid("Maxwell operators are implemented for 1D TEM only".into()));
            }
            if permittivity.len() != n_u {
                return Err(Error::DimensionMismatch { expected: n_u, found: permittivity.len() });
            }
            permeability.len()
        }
    };
    if expected_len != n_v {
        return Err(Error::DimensionMismatch { expected: n_v, found: expected_len });
    }
    let diag = material.metric_diagonal()?;
    let a = match material.family() {
        Family::Acoustic => SparseOperator::assemble_blocks(n, n, &[(0, n_u, &dv, -1.0), (n_u, 0, &g, -1.0)])?,
        Family::Maxwell1d => {
            let dvt = dv.transpose();
            SparseOperator::assemble_blocks(n, n, &[(0, n_u, &dv, 1.0), (n_u, 0, &dvt, -1.0)])?
        }
    };
    let layout = BlockLayout {
        family: material.family(),
        dimension: grid.dimension(),
        primary: n_u,
        secondary_x: grid.n_vx(),
        secondary_y: grid.n_vy(),
        spacing: grid.spacing(),
    };
    OperatorPair::new(a, SparseOperator::from_diagonal(&diag)?, layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn grid_counts_1d() {
        let g = StaggeredGrid::new(1, &[(0.0, 3.0)], &[4]).unwrap();
        assert_eq!(g.dx(), 1.0);
        assert_eq!((g.n_u(), g.n_v()), (4, 3));
    }

    #[test]
    fn grid_counts_2d() {
        let g = StaggeredGrid::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[4, 4]).unwrap();
        assert_eq!((g.n_u(), g.n_vx(), g.n_vy()), (16, 12, 12));
    }

    #[test]
    fn pressure_linearization_matches_row_major() {
        let g = StaggeredGrid::new(2, &[(0.0, 1.0), (0.0, 2.0)], &[2, 3]).unwrap();
        // k = i + j * N_x
        let mut seen = [false; 6];
        for j in 0..3 {
            for i in 0..2 {
                let k = g.pressure_index(i, j);
                assert_eq!(k, i + j * 2);
                assert_eq!(g.pressure_coords(k), (i, j));
                seen[k] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn invalid_grids_rejected() {
        assert!(StaggeredGrid::new(1, &[(1.0, 1.0)], &[4]).is_err());
        assert!(StaggeredGrid::new(1, &[(0.0, 1.0)], &[1]).is_err());
        assert!(StaggeredGrid::new(3, &[(0.0, 1.0); 3], &[4; 3]).is_err());
        assert!(StaggeredGrid::new(2, &[(0.0, 1.0)], &[4]).is_err());
    }

    #[test]
    fn velocity_points_are_midpoints() {
        let g = StaggeredGrid::new(2, &[(0.0, 3.0), (0.0, 2.0)], &[4, 3]).unwrap();
        for k in 0..g.n_vx() {
            let (_, p) = g.dof_position(g.n_u() + k).unwrap();
            let (i, j) = g.vx_coords(k);
            let (_, left) = g.dof_position(g.pressure_index(i, j)).unwrap();
            let (_, right) = g.dof_position(g.pressure_index(i + 1, j)).unwrap();
            assert_eq!(p[0], 0.5 * (left[0] + right[0]));
            assert_eq!(p[1], left[1]);
        }
        for k in 0..g.n_vy() {
            let (_, p) = g.dof_position(g.n_u() + g.n_vx() + k).unwrap();
            let (i, j) = g.vy_coords(k);
            let (_, lo) = g.dof_position(g.pressure_index(i, j)).unwrap();
            let (_, hi) = g.dof_position(g.pressure_index(i, j + 1)).unwrap();
            assert_eq!(p[1], 0.5 * (lo[1] + hi[1]));
        }
    }

    #[test]
    fn gradient_on_small_1d_grid() {
        let g = StaggeredGrid::new(1, &[(0.0, 2.0)], &[3]).unwrap();
        let (grad, _) = gradient_divergence(&g).unwrap();
        assert_eq!(grad.matvec(&[5.0, 5.0, 5.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(grad.matvec(&[0.0, 1.0, 2.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn gradient_rows_have_two_entries() {
        let g = StaggeredGrid::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[5, 4]).unwrap();
        let (grad, div) = gradient_divergence(&g).unwrap();
        let mut per_row = vec![0; grad.rows()];
        for e in grad.triplets() {
            per_row[e.0] += 1;
        }
        assert!(per_row.iter().all(|&c| c == 2));
        assert_eq!(grad.add(&div.transpose()).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn acoustic_metric_entries() {
        let g = StaggeredGrid::new(1, &[(0.0, 1.0)], &[3]).unwrap();
        let m = MaterialModel::acoustic_homogeneous(&g, 2.0, 3.0);
        let pair = assemble_operator_pair(&g, &m).unwrap();
        let d = pair.metric_diagonal();
        assert_eq!(d[0], 1.0 / 18.0);
        assert_eq!(d[3], 2.0);
        assert_eq!(pair.a().antisymmetry_defect(), 0.0);
        assert!((pair.max_wave_speed() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_material_rejected() {
        let g = StaggeredGrid::new(1, &[(0.0, 1.0)], &[3]).unwrap();
        let m = MaterialModel::acoustic_from_fn(&g, |x| if x[0] > 0.6 { (-1.0, 1.0) } else { (1.0, 1.0) });
        assert!(matches!(assemble_operator_pair(&g, &m), Err(Error::NonPositiveMaterial { .. })));
    }

    #[test]
    fn maxwell_requires_1d() {
        let g = StaggeredGrid::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[3, 3]).unwrap();
        let m = MaterialModel::Maxwell1d { permittivity: vec![1.0; 9], permeability: vec![1.0; 12] };
        assert!(assemble_operator_pair(&g, &m).is_err());
    }

    #[test]
    fn boundary_dofs_2d() {
        let g = StaggeredGrid::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[4, 4]).unwrap();
        let all = g
            .boundary_pressure_dofs_union(&[Side::Left, Side::Right, Side::Bottom, Side::Top])
            .unwrap();
        assert_eq!(all.len(), 12);
        let one_d = StaggeredGrid::new(1, &[(0.0, 1.0)], &[4]).unwrap();
        assert!(one_d.boundary_pressure_dofs(Side::Top).is_err());
    }
}
