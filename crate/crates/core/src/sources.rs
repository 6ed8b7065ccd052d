//! Point sources turned into initial conditions.
//!
//! A pulse source is pre-simulated classically inside the ball its waves
//! can reach during the source's active time; the result is a sparse
//! initial field stamped with the source's end time. Long source time
//! functions are cut by smooth double-sigmoid windows into slices that each
//! fit the homogeneous ball around the source.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::PI;

use crate::discretization::{
    assemble_operator_pair, FieldBlock, MaterialModel, OperatorPair, StaggeredGrid, WaveOperators,
};
use crate::encoding::{transform, QuantumRegisterState};
use crate::error::{Error, Result};
use crate::reference::{default_dt, leapfrog_evolve, Forcing, LeapfrogOptions, ModalSolver};

/// Scalar source time function `f(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceTimeFunction {
    /// `amplitude * exp(-((t - center)/width)^2 / 2)`.
    Gaussian { center: f64, width: f64, amplitude: f64 },
    /// Second derivative of a Gaussian with peak frequency `frequency`.
    Ricker { center: f64, frequency: f64, amplitude: f64 },
    /// `sin(2 pi f (t - start)) sin^2(pi (t - start) / duration)` on
    /// `[start, start + duration]`, zero elsewhere.
    WindowedSine { start: f64, duration: f64, frequency: f64, amplitude: f64 },
    /// Linear interpolation of samples, zero outside them.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
    /// Another time function multiplied by a double-sigmoid window.
    Windowed { inner: Box<SourceTimeFunction>, start: f64, width: f64, steepness: f64 },
}

impl SourceTimeFunction {
    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() || times.is_empty() {
            return Err(Error::DimensionMismatch { expected: times.len(), found: values.len() });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("tabulated times must be strictly increasing".into()));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("tabulated source".into()));
        }
        Ok(Self::Tabulated { times, values })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Gaussian { center, width, amplitude } => {
                let x = (t - center) / width;
                amplitude * libm::exp(-0.5 * x * x)
            }
            Self::Ricker { center, frequency, amplitude } => {
                let a = PI * frequency * (t - center);
                let a2 = a * a;
                amplitude * (1.0 - 2.0 * a2) * libm::exp(-a2)
            }
            Self::WindowedSine { start, duration, frequency, amplitude } => {
                let s = t - start;
                if s < 0.0 || s > *duration {
                    return 0.0;
                }
                let taper = libm::sin(PI * s / duration);
                amplitude * libm::sin(2.0 * PI * frequency * s) * taper * taper
            }
            Self::Tabulated { times, values } => {
                if t < times[0] || t > times[times.len() - 1] {
                    return 0.0;
                }
                let hi = times.partition_point(|&s| s < t).max(1).min(times.len() - 1);
                let lo = hi - 1;
                let s = (t - times[lo]) / (times[hi] - times[lo]);
                (1.0 - s) * values[lo] + s * values[hi]
            }
            Self::Windowed { inner, start, width, steepness } => {
                double_sigmoid(t - start, *width, *steepness) * inner.eval(t)
            }
        }
    }
}

/// Point source `chi delta(x - x_s) f(t)`, active on `[t_start, t_end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSource {
    /// Pressure (or `E`) grid point index.
    pub location: usize,
    /// Weights on the (pressure, x-velocity, y-velocity) components. The
    /// velocity weights are split over the two velocity points adjacent to
    /// the source node.
    pub polarization: [f64; 3],
    pub signal: SourceTimeFunction,
    pub t_start: f64,
    pub t_end: f64,
}

impl PointSource {
    pub fn pressure(location: usize, signal: SourceTimeFunction, t_start: f64, t_end: f64) -> Self {
        Self { location, polarization: [1.0, 0.0, 0.0], signal, t_start, t_end }
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// `f(t)` clipped to the active interval.
    pub fn eval(&self, t: f64) -> f64 {
        if t < self.t_start || t > self.t_end {
            0.0
        } else {
            self.signal.eval(t)
        }
    }

    fn validate(&self, grid: &StaggeredGrid) -> Result<()> {
        if self.location >= grid.n_u() {
            return Err(Error::IndexOutOfRange { index: self.location, len: grid.n_u() });
        }
        if !(self.t_end >= self.t_start) || !self.t_start.is_finite() || !self.t_end.is_finite() {
            return Err(Error::InvalidArgument("source needs t_start <= t_end".into()));
        }
        Ok(())
    }

    /// Spatial vector `chi` over all DOFs of `grid`, using the discrete
    /// delta `1/h^D` at the source node.
    pub fn profile(&self, grid: &StaggeredGrid) -> Result<Vec<f64>> {
        self.validate(grid)?;
        let weight = if grid.dimension() == 2 { 1.0 / (grid.dx() * grid.dy()) } else { 1.0 / grid.dx() };
        let mut s = vec![0.0; grid.n_total()];
        let (i, j) = grid.pressure_coords(self.location);
        s[self.location] = self.polarization[0] * weight;
        let (n_u, n_vx) = (grid.n_u(), grid.n_vx());
        if self.polarization[1] != 0.0 {
            for ii in [i.wrapping_sub(1), i] {
                if ii < grid.nx() - 1 {
                    s[n_u + grid.vx_index(ii, j)] += 0.5 * self.polarization[1] * weight;
                }
            }
        }
        if self.polarization[2] != 0.0 {
            if grid.dimension() != 2 {
                return Err(Error::InvalidArgument("y polarization needs a 2D grid".into()));
            }
            for jj in [j.wrapping_sub(1), j] {
                if jj < grid.ny() - 1 {
                    s[n_u + n_vx + grid.vy_index(i, jj)] += 0.5 * self.polarization[2] * weight;
                }
            }
        }
        Ok(s)
    }

    pub fn position(&self, grid: &StaggeredGrid) -> Result<[f64; 2]> {
        self.validate(grid)?;
        Ok(grid.dof_position(self.location)?.1)
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

/// Distance from `x` to the nearest domain boundary.
fn boundary_distance(grid: &StaggeredGrid, x: [f64; 2]) -> f64 {
    grid.bounds().iter().enumerate().map(|(k, &(lo, hi))| (x[k] - lo).min(hi - x[k])).fold(f64::INFINITY, f64::min)
}

/// Pre-simulated sparse initial field of one source.
#[derive(Debug, Clone, PartialEq)]
pub struct PreSimResult {
    /// Field over every DOF of the grid; exactly zero outside the ball.
    pub field: Vec<f64>,
    /// Global time at which `field` is valid.
    pub t_end: f64,
    /// Truncation radius around the source.
    pub radius: f64,
    /// `B`-norm of the part removed by truncation.
    pub truncated_norm: f64,
    pub nonzero_count: usize,
}

impl PreSimResult {
    /// Largest distance from `center` of a nonzero DOF.
    pub fn support_radius(&self, grid: &StaggeredGrid, center: [f64; 2]) -> f64 {
        self.field
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, _)| distance(grid.dof_position(k).expect("field matches grid").1, center))
            .fold(0.0, f64::max)
    }
}

fn truncate_to_ball(grid: &StaggeredGrid, field: &mut [f64], b_diag: &[f64], center: [f64; 2], radius: f64) -> f64 {
    let mut removed = 0.0;
    for (k, v) in field.iter_mut().enumerate() {
        let x = grid.dof_position(k).expect("field matches grid").1;
        if distance(x, center) > radius && *v != 0.0 {
            removed += b_diag[k] * *v * *v;
            *v = 0.0;
        }
    }
    libm::sqrt(removed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresimOptions {
    /// Extra cells beyond `c_max * duration` kept around the source.
    pub margin_cells: f64,
    /// Bound on the wave speed. The default, the largest `1/sqrt(b_r b_c)`
    /// over coupled DOFs, overestimates it across material interfaces.
    pub wave_speed: Option<f64>,
}

impl Default for PresimOptions {
    fn default() -> Self {
        Self { margin_cells: 2.0, wave_speed: None }
    }
}

/// Solves the forced system from rest over the source's active interval
/// with the leapfrog reference solver and keeps the causal ball.
///
/// `dt = None` uses the default CFL fraction.
pub fn presimulate_pulse(
    source: &PointSource,
    grid: &StaggeredGrid,
    pair: &OperatorPair,
    dt: Option<f64>,
    opts: &PresimOptions,
) -> Result<PreSimResult> {
    if pair.len() != grid.n_total() {
        return Err(Error::DimensionMismatch { expected: grid.n_total(), found: pair.len() });
    }
    let center = source.position(grid)?;
    let duration = source.duration();
    let radius = opts.wave_speed.unwrap_or_else(|| pair.max_wave_speed()) * duration + opts.margin_cells * grid.min_spacing();
    let available = boundary_distance(grid, center);
    if radius > available {
        return Err(Error::Causality { required_radius: radius, available_radius: available });
    }
    let profile = source.profile(grid)?;
    let forcing = |t: f64, s: &mut [f64]| {
        let f = source.eval(t);
        if f != 0.0 {
            for (o, p) in s.iter_mut().zip(&profile) {
                *o = p * f;
            }
        }
    };
    let zero = vec![0.0; pair.len()];
    let mut field = if duration > 0.0 {
        let step = dt.unwrap_or_else(|| default_dt(pair));
        let traj = leapfrog_evolve(
            pair,
            &zero,
            Some(&forcing),
            step,
            duration,
            &LeapfrogOptions { t0: source.t_start, record_every: 0 },
        )?;
        traj.final_state().to_vec()
    } else {
        zero
    };
    let truncated_norm = truncate_to_ball(grid, &mut field, &pair.metric_diagonal(), center, radius);
    let nonzero_count = field.iter().filter(|v| **v != 0.0).count();
    Ok(PreSimResult { field, t_end: source.t_end, radius, truncated_norm, nonzero_count })
}

/// Stacks `B^{1/2} w_s` for every pre-simulated source (count padded to a
/// power of two with zero blocks) and normalizes.
pub fn assemble_multisource_state(presims: &[PreSimResult], b_diag: &[f64]) -> Result<QuantumRegisterState> {
    let blocks = presims.iter().map(|p| transform(&p.field, b_diag)).collect::<Result<Vec<_>>>()?;
    QuantumRegisterState::stack(&blocks, b_diag.len())
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `sigma(z t) - sigma(z (t - width))`; the box `[0, width)` when `z` is infinite.
pub fn double_sigmoid(t: f64, width: f64, steepness: f64) -> f64 {
    if steepness.is_infinite() {
        return if t >= 0.0 && t < width { 1.0 } else { 0.0 };
    }
    sigmoid(steepness * t) - sigmoid(steepness * (t - width))
}

/// Double-sigmoid windows between consecutive breakpoints `tau_1 < ... < tau_{J+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSpec {
    pub steepness: f64,
    pub breakpoints: Vec<f64>,
}

/// `16 / min(tau_{j+1} - tau_j)`: the interior partition-of-unity error is
/// then about `2 e^{-8}`.
pub fn default_steepness(breakpoints: &[f64]) -> f64 {
    16.0 / min_gap(breakpoints)
}

fn min_gap(breakpoints: &[f64]) -> f64 {
    breakpoints.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

impl WindowSpec {
    pub fn new(steepness: f64, breakpoints: Vec<f64>) -> Result<Self> {
        if !(steepness > 0.0) {
            return Err(Error::InvalidArgument("window steepness must be positive".into()));
        }
        if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("need at least two strictly increasing breakpoints".into()));
        }
        Ok(Self { steepness, breakpoints })
    }

    /// Uniform breakpoints over `[lo, hi]` with the default steepness.
    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 || !(hi > lo) {
            return Err(Error::InvalidArgument("uniform windows need count >= 1 and hi > lo".into()));
        }
        let breakpoints: Vec<f64> = (0..=count).map(|k| lo + (hi - lo) * k as f64 / count as f64).collect();
        Self::new(default_steepness(&breakpoints), breakpoints)
    }

    pub fn count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn width(&self, j: usize) -> f64 {
        self.breakpoints[j + 1] - self.breakpoints[j]
    }

    /// `W_j(t - tau_j)`.
    pub fn window(&self, j: usize, t: f64) -> f64 {
        double_sigmoid(t - self.breakpoints[j], self.width(j), self.steepness)
    }

    pub fn sum(&self, t: f64) -> f64 {
        (0..self.count()).map(|j| self.window(j, t)).sum()
    }

    /// `[tau_1 + gap/2, tau_{J+1} - gap/2]`, where the windows sum to one
    /// up to the sigmoid tails.
    pub fn interior(&self) -> (f64, f64) {
        let half = 0.5 * min_gap(&self.breakpoints);
        (self.breakpoints[0] + half, self.breakpoints[self.count()] - half)
    }

    /// Largest `|sum_j W_j - 1|` over the samples inside [`interior`](Self::interior).
    pub fn partition_deviation(&self, samples: &[f64]) -> f64 {
        let (lo, hi) = self.interior();
        samples
            .iter()
            .filter(|&&t| t >= lo && t <= hi)
            .map(|&t| (self.sum(t) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Time beyond a window edge after which its tail is below `tolerance`.
    pub fn tail_length(&self, tolerance: f64) -> f64 {
        if self.steepness.is_infinite() {
            0.0
        } else {
            libm::log(1.0 / tolerance) / self.steepness
        }
    }
}

/// `W_j(t - tau_j)` sampled on `t_grid`, one array per window.
pub fn make_windows(t_grid: &[f64], steepness: f64, breakpoints: &[f64]) -> Result<Vec<Vec<f64>>> {
    let spec = WindowSpec::new(steepness, breakpoints.to_vec())?;
    Ok((0..spec.count()).map(|j| t_grid.iter().map(|&t| spec.window(j, t)).collect()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreensMethod {
    /// Exact semi-discrete response on a homogeneous grid patch around the source.
    Discrete,
    /// Continuous 1D d'Alembert solution sampled on the staggered points.
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreensOptions {
    pub method: GreensMethod,
    /// Number of windows; `None` picks the fewest that fit the ball.
    pub windows: Option<usize>,
    /// Sigmoid tails and partition-of-unity error are kept below this.
    pub tail_tolerance: f64,
    /// Extra cells beyond each slice's causal radius kept in the field.
    pub margin_cells: f64,
}

impl Default for GreensOptions {
    fn default() -> Self {
        Self { method: GreensMethod::Discrete, windows: None, tail_tolerance: 1e-12, margin_cells: 4.0 }
    }
}

/// Windowed slices of a long source, each pre-simulated inside the
/// homogeneous ball.
#[derive(Debug, Clone, PartialEq)]
pub struct GreensDecomposition {
    pub slices: Vec<PreSimResult>,
    pub windows: WindowSpec,
    /// Total initialized values over all slices divided by the values of
    /// their union; 1 for non-overlapping slices.
    pub overlap_growth: f64,
    /// `max |sum_j W_j - 1|` over the active interval of the source.
    pub partition_error: f64,
}

/// Windows for a source of duration `T_s` in a ball with travel time
/// `T_hom`: a single box window if the source fits, otherwise uniform
/// sigmoid windows reaching half a window beyond the source on both sides,
/// steep enough that their tails fall below `tol` within half a window.
fn plan_windows(source: &PointSource, t_hom: f64, requested: Option<usize>, tol: f64) -> Result<WindowSpec> {
    let duration = source.duration();
    let needed = if duration <= t_hom { 1 } else { libm::ceil(2.0 * duration / t_hom) as usize + 1 };
    let count = requested.unwrap_or(needed);
    if count == 0 {
        return Err(Error::InvalidArgument("at least one window is required".into()));
    }
    if count == 1 {
        if duration > t_hom {
            return Err(Error::WindowTooLong { duration, limit: t_hom });
        }
        // Half-open box: extend past t_end so the last instant is covered.
        let end = source.t_end + 1e-9 * duration.max(1.0);
        return WindowSpec::new(f64::INFINITY, vec![source.t_start, end]);
    }
    let gap = duration / (count - 1) as f64;
    let breakpoints: Vec<f64> =
        (0..=count).map(|k| source.t_start - 0.5 * gap + k as f64 * gap).collect();
    WindowSpec::new(2.0 * libm::log(1.0 / tol) / gap, breakpoints)
}

/// Splits a point source into windowed slices `W_j(t - tau_j) f(t)` and
/// computes each slice's field at its own end time inside the homogeneous
/// ball of radius `r_s` (speed `c_hom`, density `rho_hom`).
pub fn greens_decompose(
    source: &PointSource,
    c_hom: f64,
    rho_hom: f64,
    r_s: f64,
    grid: &StaggeredGrid,
    opts: &GreensOptions,
) -> Result<GreensDecomposition> {
    if !(c_hom > 0.0 && rho_hom > 0.0 && r_s > 0.0) {
        return Err(Error::InvalidArgument("c_hom, rho_hom and r_s must be positive".into()));
    }
    let center = source.position(grid)?;
    let t_hom = r_s / c_hom;
    let windows = plan_windows(source, t_hom, opts.windows, opts.tail_tolerance)?;
    let tail = windows.tail_length(opts.tail_tolerance);

    // Slice j is active where its window is above the tail tolerance.
    let mut spans = Vec::new();
    for j in 0..windows.count() {
        let lo = (windows.breakpoints[j] - tail).max(source.t_start);
        let hi = (windows.breakpoints[j + 1] + tail).min(source.t_end);
        if hi > lo {
            if hi - lo > t_hom * (1.0 + 1e-12) {
                return Err(Error::WindowTooLong { duration: hi - lo, limit: t_hom });
            }
            spans.push((j, lo, hi));
        }
    }

    let h = grid.min_spacing();
    let reach = |lo: f64, hi: f64| c_hom * (hi - lo) + opts.margin_cells * h;
    let homogeneous_b = |grid: &StaggeredGrid| -> Result<Vec<f64>> {
        MaterialModel::acoustic_homogeneous(grid, rho_hom, c_hom).metric_diagonal()
    };
    let b_full = homogeneous_b(grid)?;

    let slices = match opts.method {
        GreensMethod::Discrete => {
            let radius = spans.iter().map(|&(_, lo, hi)| reach(lo, hi)).fold(0.0, f64::max);
            let patch = LocalPatch::new(grid, source.location, radius + 4.0 * h)?;
            let local_pair = assemble_operator_pair(
                &patch.grid,
                &MaterialModel::acoustic_homogeneous(&patch.grid, rho_hom, c_hom),
            )?;
            let solver = ModalSolver::new(&local_pair)?;
            let local_source = PointSource { location: patch.local_location, ..source.clone() };
            let profile = local_source.profile(&patch.grid)?;
            let zero = vec![0.0; local_pair.len()];
            let mut panel = 0.0625 * min_gap(&windows.breakpoints);
            if windows.steepness.is_finite() {
                panel = panel.min(0.5 / windows.steepness);
            }
            let mut out = Vec::with_capacity(spans.len());
            for &(j, lo, hi) in &spans {
                let signal = |t: f64| windows.window(j, t) * source.eval(t);
                let forcing = Forcing {
                    profile: profile.clone(),
                    signal: &signal,
                    support: (lo, hi),
                    breakpoints: vec![windows.breakpoints[j], windows.breakpoints[j + 1]],
                };
                let local = solver.forced_response(&zero, lo, hi, &[forcing], panel)?;
                let mut field = patch.embed(grid, &local)?;
                let radius = reach(lo, hi);
                let truncated_norm = truncate_to_ball(grid, &mut field, &b_full, center, radius);
                let nonzero_count = field.iter().filter(|v| **v != 0.0).count();
                out.push(PreSimResult { field, t_end: hi, radius, truncated_norm, nonzero_count });
            }
            out
        }
        GreensMethod::Analytic => {
            if grid.dimension() != 1 || source.polarization[1] != 0.0 {
                return Err(Error::InvalidArgument("analytic Green's function covers 1D pressure sources".into()));
            }
            let amp = source.polarization[0];
            let mut out = Vec::with_capacity(spans.len());
            for &(j, lo, hi) in &spans {
                let g = |t: f64| if t < lo { 0.0 } else { windows.window(j, t) * source.eval(t) };
                let mut field = vec![0.0; grid.n_total()];
                for (k, v) in field.iter_mut().enumerate() {
                    let (block, x) = grid.dof_position(k)?;
                    let r = x[0] - center[0];
                    let retarded = g(hi - r.abs() / c_hom);
                    *v = amp
                        * match block {
                            FieldBlock::Pressure => 0.5 * rho_hom * c_hom * retarded,
                            _ => 0.5 * r.signum() * retarded,
                        };
                }
                let radius = reach(lo, hi);
                let truncated_norm = truncate_to_ball(grid, &mut field, &b_full, center, radius);
                let nonzero_count = field.iter().filter(|v| **v != 0.0).count();
                out.push(PreSimResult { field, t_end: hi, radius, truncated_norm, nonzero_count });
            }
            out
        }
    };

    let total: usize = slices.iter().map(|s| s.nonzero_count).sum();
    let union = (0..grid.n_total()).filter(|&k| slices.iter().any(|s| s.field[k] != 0.0)).count();
    let overlap_growth = if union == 0 { 1.0 } else { total as f64 / union as f64 };
    let samples: Vec<f64> =
        (0..=1000).map(|k| source.t_start + source.duration() * k as f64 / 1000.0).collect();
    let partition_error = samples.iter().map(|&t| (windows.sum(t) - 1.0).abs()).fold(0.0, f64::max);
    Ok(GreensDecomposition { slices, windows, overlap_growth, partition_error })
}

/// Rectangular sub-grid around a node, with the same spacing.
struct LocalPatch {
    grid: StaggeredGrid,
    offset: [usize; 2],
    local_location: usize,
}

impl LocalPatch {
    fn new(grid: &StaggeredGrid, location: usize, radius: f64) -> Result<Self> {
        let (i, j) = grid.pressure_coords(location);
        let dims = [(grid.nx(), grid.dx(), i), (grid.ny(), grid.dy(), j)];
        let mut offset = [0; 2];
        let mut nodes = [1; 2];
        let mut bounds = [(0.0, 0.0); 2];
        for axis in 0..grid.dimension() {
            let (n, h, c) = dims[axis];
            let cells = libm::ceil(radius / h) as usize;
            let lo = c.saturating_sub(cells);
            let hi = (c + cells).min(n - 1);
            offset[axis] = lo;
            nodes[axis] = hi - lo + 1;
            let origin = grid.bounds()[axis].0;
            bounds[axis] = (origin + lo as f64 * h, origin + hi as f64 * h);
        }
        let d = grid.dimension();
        let local = StaggeredGrid::new(d, &bounds[..d], &nodes[..d])?;
        let local_location = local.pressure_index(i - offset[0], j - offset[1]);
        Ok(Self { grid: local, offset, local_location })
    }

    fn embed(&self, grid: &StaggeredGrid, local: &[f64]) -> Result<Vec<f64>> {
        let (lg, [oi, oj]) = (&self.grid, self.offset);
        let mut out = vec![0.0; grid.n_total()];
        for (k, &v) in local.iter().enumerate() {
            let (block, _) = lg.dof_position(k)?;
            let global = match block {
                FieldBlock::Pressure => {
                    let (i, j) = lg.pressure_coords(k);
                    grid.pressure_index(i + oi, j + oj)
                }
                FieldBlock::VelocityX => {
                    let (i, j) = lg.vx_coords(k - lg.n_u());
                    grid.n_u() + grid.vx_index(i + oi, j + oj)
                }
                FieldBlock::VelocityY => {
                    let (i, j) = lg.vy_coords(k - lg.n_u() - lg.n_vx());
                    grid.n_u() + grid.n_vx() + grid.vy_index(i + oi, j + oj)
                }
            };
            out[global] = v;
        }
        Ok(out)
    }
}

/// True when every slice's field lies inside its causal ball.
pub fn slices_are_causal(decomp: &GreensDecomposition, grid: &StaggeredGrid, center: [f64; 2]) -> bool {
    decomp.slices.iter().all(|s| s.support_radius(grid, center) <= s.radius)
}
