//! Classical reference solvers for `B dw/dt = A w + s(t)`.
//!
//! [`leapfrog_evolve`] is the staggered-in-time explicit scheme used for
//! pre-simulation and convergence checks. [`ModalSolver`] integrates the
//! same semi-discrete system exactly in the eigenbasis of the encoded
//! Hamiltonian, with forcing terms handled by Gauss-Legendre quadrature of
//! the Duhamel integral.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::discretization::WaveOperators;
use crate::encoding::build_hamiltonian;
use crate::error::{Error, Result};

/// Default fraction of the stability limit used for the time step.
pub const CFL_FACTOR: f64 = 0.9;

/// Largest stable leapfrog step `h_min / (c_max sqrt(D))`.
pub fn cfl_limit<S: WaveOperators + ?Sized>(system: &S) -> f64 {
    let c = system.max_wave_speed();
    if c == 0.0 {
        return f64::INFINITY;
    }
    system.min_spacing() / (c * libm::sqrt(system.dimension() as f64))
}

/// `CFL_FACTOR * cfl_limit`.
pub fn default_dt<S: WaveOperators + ?Sized>(system: &S) -> f64 {
    CFL_FACTOR * cfl_limit(system)
}

/// Sampled trajectory of a leapfrog run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Vec<f64>>,
    /// `(w|w)_B` at each sample.
    pub energy: Vec<f64>,
    /// The scheme's exactly conserved quadratic form
    /// `u.B_u.u + v^{-1/2}.B_v.v^{+1/2}`; equals `energy` up to `O(dt^2)`.
    pub invariant: Vec<f64>,
    /// Step actually used (the requested one, shortened to land on the end time).
    pub dt: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.snapshots.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Largest relative deviation of the conserved invariant from its start value.
    pub fn invariant_drift(&self) -> f64 {
        let e0 = self.invariant.first().copied().unwrap_or(0.0);
        if e0 == 0.0 {
            return self.invariant.iter().fold(0.0, |m, e| m.max(e.abs()));
        }
        self.invariant.iter().fold(0.0, |m, e| m.max(((e - e0) / e0).abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeapfrogOptions {
    /// Global time of `w0`.
    pub t0: f64,
    /// Record every n-th step (the final step is always recorded); 0 keeps
    /// only the start and end states.
    pub record_every: usize,
}

impl Default for LeapfrogOptions {
    fn default() -> Self {
        Self { t0: 0.0, record_every: 1 }
    }
}

/// Source term `s(t)` in `B dw/dt = A w + s(t)`, written into the slice.
pub type SourceFn<'a> = &'a dyn Fn(f64, &mut [f64]);

struct Split {
    p: usize,
    inv_b: Vec<f64>,
    b: Vec<f64>,
}

fn split_system<S: WaveOperators + ?Sized>(system: &S) -> Result<Split> {
    if !system.b().is_diagonal() {
        return Err(Error::InvalidArgument("leapfrog needs a diagonal B".into()));
    }
    let p = system.primary_len();
    if system.a().triplets().iter().any(|&(r, c, _)| (r < p) == (c < p)) {
        return Err(Error::InvalidArgument("leapfrog needs A to couple only primary and secondary blocks".into()));
    }
    let b = system.b().diagonal();
    Ok(Split { p, inv_b: b.iter().map(|x| 1.0 / x).collect(), b })
}

/// `w += h B^{-1} (A w + s)` restricted to rows in `range`.
fn kick(
    system: &(impl WaveOperators + ?Sized),
    split: &Split,
    w: &mut [f64],
    rows: core::ops::Range<usize>,
    h: f64,
    s: Option<&[f64]>,
) {
    let mut delta = vec![0.0; rows.len()];
    let triplets = system.a().triplets();
    let start = triplets.partition_point(|e| e.0 < rows.start);
    for &(r, c, v) in &triplets[start..] {
        if r >= rows.end {
            break;
        }
        delta[r - rows.start] += v * w[c];
    }
    for (k, d) in delta.iter().enumerate() {
        let r = rows.start + k;
        let forcing = s.map_or(0.0, |s| s[r]);
        w[r] += h * split.inv_b[r] * (d + forcing);
    }
}

fn weighted_dot(b: &[f64], x: &[f64], y: &[f64]) -> f64 {
    b.iter().zip(x).zip(y).map(|((b, x), y)| b * x * y).sum()
}

/// Kick-drift-kick leapfrog over `duration` (may be negative to run
/// backwards). The step is `dt` shortened so that an integer number of
/// steps lands on the end time; it must satisfy the CFL bound.
pub fn leapfrog_evolve<S: WaveOperators + ?Sized>(
    system: &S,
    w0: &[f64],
    source: Option<SourceFn<'_>>,
    dt: f64,
    duration: f64,
    opts: &LeapfrogOptions,
) -> Result<Trajectory> {
    let n = system.len();
    if w0.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w0.len() });
    }
    if !(dt > 0.0) || !duration.is_finite() || w0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("leapfrog needs dt > 0 and finite inputs".into()));
    }
    let max_dt = cfl_limit(system);
    if dt > max_dt {
        return Err(Error::Cfl { dt, max_dt });
    }
    let split = split_system(system)?;
    let steps = libm::ceil(duration.abs() / dt) as usize;
    let h = if steps == 0 { 0.0 } else { duration / steps as f64 };
    let (p, prim, sec) = (split.p, 0..split.p, split.p..n);

    let mut w = w0.to_vec();
    let mut s = vec![0.0; n];
    let sample_source = |t: f64, s: &mut Vec<f64>| -> Option<()> {
        let f = source?;
        s.iter_mut().for_each(|v| *v = 0.0);
        f(t, s);
        Some(())
    };

    // v^{-1/2} relative to the current integer step, for the invariant.
    let invariant = |w: &[f64], split: &Split| -> f64 {
        let mut half = w.to_vec();
        kick(system, split, &mut half, p..n, -0.5 * h, None);
        let mut ahead = w.to_vec();
        kick(system, split, &mut ahead, p..n, 0.5 * h, None);
        weighted_dot(&split.b[..p], &w[..p], &w[..p]) + weighted_dot(&split.b[p..], &half[p..], &ahead[p..])
    };

    let mut traj = Trajectory {
        times: vec![opts.t0],
        snapshots: vec![w.clone()],
        energy: vec![weighted_dot(&split.b, &w, &w)],
        invariant: vec![invariant(&w, &split)],
        dt: h.abs(),
    };
    for step in 0..steps {
        let t = opts.t0 + step as f64 * h;
        let s0 = sample_source(t, &mut s).map(|_| s.clone());
        kick(system, &split, &mut w, sec.clone(), 0.5 * h, s0.as_deref());
        let sm = sample_source(t + 0.5 * h, &mut s).map(|_| s.clone());
        kick(system, &split, &mut w, prim.clone(), h, sm.as_deref());
        let s1 = sample_source(t + h, &mut s).map(|_| s.clone());
        kick(system, &split, &mut w, sec.clone(), 0.5 * h, s1.as_deref());

        let last = step + 1 == steps;
        if last || (opts.record_every > 0 && (step + 1) % opts.record_every == 0) {
            traj.times.push(opts.t0 + (step + 1) as f64 * h);
            traj.energy.push(weighted_dot(&split.b, &w, &w));
            traj.invariant.push(invariant(&w, &split));
            traj.snapshots.push(w.clone());
        }
    }
    Ok(traj)
}

/// Eight-point Gauss-Legendre rule on [-1, 1].
const GAUSS_NODES: [f64; 8] = [
    -0.960_289_856_497_536_2,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_2,
];
const GAUSS_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

/// Separable forcing `s(x, t) = profile(x) * signal(t)`, nonzero only on
/// `support`.
pub struct Forcing<'a> {
    pub profile: Vec<f64>,
    pub signal: &'a dyn Fn(f64) -> f64,
    pub support: (f64, f64),
    /// Interior points where `signal` is not smooth; quadrature panels are
    /// aligned to them.
    pub breakpoints: Vec<f64>,
}

/// Exact integrator in the eigenbasis of `H = i B^{-1/2} A B^{-1/2}`.
#[derive(Debug, Clone)]
pub struct ModalSolver {
    vectors: DMatrix<Complex64>,
    values: Vec<f64>,
    root_b: Vec<f64>,
}

impl ModalSolver {
    pub fn new<S: WaveOperators + ?Sized>(system: &S) -> Result<Self> {
        let h = build_hamiltonian(system)?;
        let eig = SymmetricEigen::new(h.base_dense());
        let root_b = system.b().diagonal().iter().map(|b| libm::sqrt(*b)).collect();
        Ok(Self { vectors: eig.eigenvectors, values: eig.eigenvalues.iter().copied().collect(), root_b })
    }

    pub fn len(&self) -> usize {
        self.root_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.root_b.is_empty()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn modal(&self, w: &[f64]) -> Result<DVector<Complex64>> {
        if w.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: w.len() });
        }
        let q = DVector::from_iterator(w.len(), w.iter().zip(&self.root_b).map(|(x, r)| Complex64::new(x * r, 0.0)));
        Ok(self.vectors.ad_mul(&q))
    }

    fn physical(&self, coeffs: &DVector<Complex64>) -> Vec<f64> {
        let q = &self.vectors * coeffs;
        q.iter().zip(&self.root_b).map(|(z, r)| z.re / r).collect()
    }

    /// Homogeneous solution after time `t`.
    pub fn propagate(&self, w: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut c = self.modal(w)?;
        for (z, &l) in c.iter_mut().zip(&self.values) {
            *z *= Complex64::new(libm::cos(-l * t), libm::sin(-l * t));
        }
        Ok(self.physical(&c))
    }

    /// State at `t1` of the forced system started from `w0` at `t0`.
    /// Quadrature panels never exceed `max_panel` nor `0.5 / spectral_radius`.
    pub fn forced_response(
        &self,
        w0: &[f64],
        t0: f64,
        t1: f64,
        forcing: &[Forcing<'_>],
        max_panel: f64,
    ) -> Result<Vec<f64>> {
        if !(t1 >= t0) || !(max_panel > 0.0) {
            return Err(Error::InvalidArgument("forced response needs t1 >= t0 and a positive panel width".into()));
        }
        let mut total = self.modal(w0)?;
        for (z, &l) in total.iter_mut().zip(&self.values) {
            *z *= Complex64::new(libm::cos(-l * (t1 - t0)), libm::sin(-l * (t1 - t0)));
        }
        let panel = max_panel.min(0.5 / self.spectral_radius().max(f64::MIN_POSITIVE));
        for f in forcing {
            if f.profile.len() != self.len() {
                return Err(Error::DimensionMismatch { expected: self.len(), found: f.profile.len() });
            }
            // B^{-1} profile, so that the modal projection of B^{1/2}(.) gives B^{-1/2} chi.
            let scaled: Vec<f64> = f.profile.iter().zip(&self.root_b).map(|(x, r)| x / (r * r)).collect();
            let drive = self.modal(&scaled)?;
            let (lo, hi) = (t0.max(f.support.0), t1.min(f.support.1));
            if !(hi > lo) {
                continue;
            }
            let mut cuts = vec![lo];
            cuts.extend(f.breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
            cuts.push(hi);
            cuts.sort_by(f64::total_cmp);
            let mut weights = vec![Complex64::new(0.0, 0.0); self.values.len()];
            for seg in cuts.windows(2) {
                let count = libm::ceil((seg[1] - seg[0]) / panel).max(1.0) as usize;
                let width = (seg[1] - seg[0]) / count as f64;
                for k in 0..count {
                    let a = seg[0] + k as f64 * width;
                    for (x, w) in GAUSS_NODES.iter().zip(&GAUSS_WEIGHTS) {
                        let tau = a + 0.5 * width * (x + 1.0);
                        let g = (f.signal)(tau) * 0.5 * width * w;
                        if g == 0.0 {
                            continue;
                        }
                        for (acc, &l) in weights.iter_mut().zip(&self.values) {
                            let phase = -l * (t1 - tau);
                            *acc += Complex64::new(libm::cos(phase), libm::sin(phase)) * g;
                        }
                    }
                }
            }
            for ((z, d), w) in total.iter_mut().zip(drive.iter()).zip(&weights) {
                *z += d * w;
            }
        }
        Ok(self.physical(&total))
    }
}
