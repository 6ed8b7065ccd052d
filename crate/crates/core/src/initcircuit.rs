//! Gate-level initialization of rotationally covariant planar vector
//! fields on a polar grid, from field values along a single ray.
//!
//! Register order, most significant first: component qubits, radial
//! qubits, angular qubits. Qubit 0 is the most significant bit. The angular
//! index `k = b_1 b_2 ... b_K` (binary, `b_1` most significant) maps to the
//! angle `sum_m b_m pi / 2^m = pi k / Theta`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::encoding::{QuantumRegisterState, RegisterLayout};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Polar grid with `A` radii `r_a = a * radial_step` (`a = 1..=A`) and
/// `Theta = A` angles around `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarGridSpec {
    pub radial: usize,
    /// Field components `C`; padded scalar channels ride along.
    pub components: usize,
    pub center: [f64; 2],
    pub radial_step: f64,
    /// The rotated plane is spanned by components `rotation_plane` and
    /// `rotation_plane + 1`.
    pub rotation_plane: usize,
}

impl PolarGridSpec {
    pub fn planar(radial: usize, center: [f64; 2], radial_step: f64) -> Self {
        Self { radial, components: 2, center, radial_step, rotation_plane: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.radial.is_power_of_two() || self.radial < 2 {
            return Err(Error::NotPowerOfTwo(self.radial));
        }
        if !self.components.is_power_of_two() || self.components < 2 {
            return Err(Error::NotPowerOfTwo(self.components));
        }
        if self.rotation_plane + 1 >= self.components {
            return Err(Error::IndexOutOfRange { index: self.rotation_plane + 1, len: self.components });
        }
        if !(self.radial_step > 0.0) || !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("polar grid needs a positive radial step and finite center".into()));
        }
        Ok(())
    }

    pub fn angular(&self) -> usize {
        self.radial
    }

    /// `N = A * Theta`.
    pub fn points(&self) -> usize {
        self.radial * self.angular()
    }

    pub fn angle(&self, k: usize) -> f64 {
        core::f64::consts::PI * k as f64 / self.angular() as f64
    }

    pub fn radius(&self, a: usize) -> f64 {
        (a + 1) as f64 * self.radial_step
    }

    /// Grid point for radial index `a` (0-based) and angular index `k`.
    pub fn point(&self, a: usize, k: usize) -> [f64; 2] {
        let (r, th) = (self.radius(a), self.angle(k));
        [self.center[0] + r * libm::cos(th), self.center[1] + r * libm::sin(th)]
    }

    pub fn component_qubits(&self) -> usize {
        self.components.trailing_zeros() as usize
    }

    pub fn radial_qubits(&self) -> usize {
        self.radial.trailing_zeros() as usize
    }

    pub fn angular_qubits(&self) -> usize {
        self.angular().trailing_zeros() as usize
    }

    pub fn num_qubits(&self) -> usize {
        self.component_qubits() + self.radial_qubits() + self.angular_qubits()
    }

    /// Amplitude index of `|c>|a>|k>`.
    pub fn index(&self, c: usize, a: usize, k: usize) -> usize {
        (c * self.radial + a) * self.angular() + k
    }
}

/// Field values along `center + r_a e_1`, component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRay {
    pub values: Vec<Complex64>,
    /// `N' = sum |w_c(x_{a,0})|^2`.
    pub norm_sqr: f64,
    /// Classical field evaluations spent.
    pub evaluations: usize,
}

/// Evaluates `field` once per radius along the first axis.
pub fn sample_reference_ray<F>(field: F, spec: &PolarGridSpec) -> Result<ReferenceRay>
where
    F: Fn([f64; 2]) -> Vec<f64>,
{
    spec.validate()?;
    let mut values = vec![ZERO; spec.components * spec.radial];
    let mut evaluations = 0;
    for a in 0..spec.radial {
        let w = field(spec.point(a, 0));
        evaluations += 1;
        if w.len() != spec.components {
            return Err(Error::DimensionMismatch { expected: spec.components, found: w.len() });
        }
        for (c, v) in w.into_iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite("reference ray".into()));
            }
            values[c * spec.radial + a] = Complex64::new(v, 0.0);
        }
    }
    let norm_sqr: f64 = values.iter().map(|z| z.norm_sqr()).sum();
    if norm_sqr == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(ReferenceRay { values, norm_sqr, evaluations })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    /// Prepares the normalized reference ray on the given (leading) qubits
    /// from `|0...0>`.
    StatePrep { qubits: Vec<usize> },
    Hadamard { qubit: usize },
    /// Rotation by `angle` in the plane of components `(plane, plane + 1)`,
    /// applied when `control` is 1.
    ControlledRotation { control: usize, plane: usize, angle: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateCircuit {
    pub spec: PolarGridSpec,
    pub gates: Vec<Gate>,
}

impl GateCircuit {
    pub fn num_qubits(&self) -> usize {
        self.spec.num_qubits()
    }

    /// Smallest rotation angle, `pi / Theta`; it shrinks as the grid grows.
    pub fn min_angle(&self) -> f64 {
        self.gates
            .iter()
            .filter_map(|g| match g {
                Gate::ControlledRotation { angle, .. } => Some(*angle),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn build_circuit(spec: &PolarGridSpec) -> Result<GateCircuit> {
    spec.validate()?;
    let prep = spec.component_qubits() + spec.radial_qubits();
    let mut gates = vec![Gate::StatePrep { qubits: (0..prep).collect() }];
    gates.extend((0..spec.angular_qubits()).map(|m| Gate::Hadamard { qubit: prep + m }));
    let mut angle = core::f64::consts::PI;
    for m in 0..spec.angular_qubits() {
        angle *= 0.5;
        gates.push(Gate::ControlledRotation { control: prep + m, plane: spec.rotation_plane, angle });
    }
    Ok(GateCircuit { spec: spec.clone(), gates })
}

/// Householder-based unitary with first column `target` (unit norm).
fn state_prep_column(target: &[Complex64], j: usize) -> impl Iterator<Item = Complex64> + '_ {
    // U = e^{i alpha} (I - 2 u u^H / |u|^2), u = e^{i alpha} e_0 - target.
    let alpha = if target[0] == ZERO { Complex64::new(1.0, 0.0) } else { target[0] / target[0].norm() };
    let u0 = alpha - target[0];
    let denom: f64 = u0.norm_sqr() + target[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
    let u = move |i: usize| if i == 0 { u0 } else { -target[i] };
    (0..target.len()).map(move |i| {
        let delta = if i == j { Complex64::new(1.0, 0.0) } else { ZERO };
        if denom == 0.0 {
            alpha * delta
        } else {
            alpha * (delta - u(i) * u(j).conj() * (2.0 / denom))
        }
    })
}

/// Runs the circuit on `|0...0>` with the ray loaded by the state-prep block.
/// The result carries the scale `sqrt(Theta * N')`.
pub fn simulate_circuit(circuit: &GateCircuit, ray: &ReferenceRay) -> Result<QuantumRegisterState> {
    let spec = &circuit.spec;
    spec.validate()?;
    let n = circuit.num_qubits();
    let bit = |q: usize| 1usize << (n - 1 - q);
    let mut psi = vec![ZERO; 1 << n];
    psi[0] = Complex64::new(1.0, 0.0);
    for gate in &circuit.gates {
        match gate {
            Gate::StatePrep { qubits } => {
                let k = qubits.len();
                if qubits.iter().enumerate().any(|(i, &q)| q != i) || (1 << k) != ray.values.len() {
                    return Err(Error::DimensionMismatch { expected: 1 << k, found: ray.values.len() });
                }
                let norm = libm::sqrt(ray.norm_sqr);
                let target: Vec<Complex64> = ray.values.iter().map(|z| z / norm).collect();
                let columns: Vec<Vec<Complex64>> =
                    (0..target.len()).map(|j| state_prep_column(&target, j).collect()).collect();
                let stride = 1 << (n - k);
                for low in 0..stride {
                    let x: Vec<Complex64> = (0..1 << k).map(|h| psi[h * stride + low]).collect();
                    if x.iter().all(|z| *z == ZERO) {
                        continue;
                    }
                    for h in 0..1 << k {
                        psi[h * stride + low] = ZERO;
                    }
                    for (j, &xj) in x.iter().enumerate().filter(|(_, z)| **z != ZERO) {
                        for (h, u) in columns[j].iter().enumerate() {
                            psi[h * stride + low] += u * xj;
                        }
                    }
                }
            }
            Gate::Hadamard { qubit } => {
                if *qubit >= n {
                    return Err(Error::IndexOutOfRange { index: *qubit, len: n });
                }
                let b = bit(*qubit);
                let r = core::f64::consts::FRAC_1_SQRT_2;
                for j in (0..psi.len()).filter(|j| j & b == 0) {
                    let (x, y) = (psi[j], psi[j | b]);
                    psi[j] = (x + y) * r;
                    psi[j | b] = (x - y) * r;
                }
            }
            Gate::ControlledRotation { control, plane, angle } => {
                let cq = spec.component_qubits();
                if *control >= n || *control < cq || plane + 1 >= spec.components {
                    return Err(Error::InvalidArgument("controlled rotation outside its registers".into()));
                }
                let b = bit(*control);
                let (c, s) = (libm::cos(*angle), libm::sin(*angle));
                let block = 1 << (n - cq);
                for low in (0..block).filter(|j| j & b != 0) {
                    let (i0, i1) = (plane * block + low, (plane + 1) * block + low);
                    let (x, y) = (psi[i0], psi[i1]);
                    psi[i0] = x * c - y * s;
                    psi[i1] = x * s + y * c;
                }
            }
        }
    }
    let layout = RegisterLayout::single(psi.len())?;
    let scale = libm::sqrt(spec.angular() as f64 * ray.norm_sqr);
    QuantumRegisterState::from_parts(psi, scale, layout)
}

/// `psi` built by evaluating `field` at every polar grid point (N
/// evaluations), normalized with `N = sum |w|^2`.
pub fn direct_state<F>(field: F, spec: &PolarGridSpec) -> Result<QuantumRegisterState>
where
    F: Fn([f64; 2]) -> Vec<f64>,
{
    spec.validate()?;
    let mut amps = vec![ZERO; 1 << spec.num_qubits()];
    for a in 0..spec.radial {
        for k in 0..spec.angular() {
            let w = field(spec.point(a, k));
            if w.len() != spec.components {
                return Err(Error::DimensionMismatch { expected: spec.components, found: w.len() });
            }
            for (c, v) in w.into_iter().enumerate() {
                amps[spec.index(c, a, k)] = Complex64::new(v, 0.0);
            }
        }
    }
    QuantumRegisterState::from_unnormalized(amps, RegisterLayout::single(1 << spec.num_qubits())?)
}

/// `|<a|b>|` for two states on the same register.
pub fn fidelity(a: &QuantumRegisterState, b: &QuantumRegisterState) -> Result<f64> {
    if a.amplitudes().len() != b.amplitudes().len() {
        return Err(Error::DimensionMismatch { expected: a.amplitudes().len(), found: b.amplitudes().len() });
    }
    Ok(a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm())
}

/// `1 - |<circuit|direct>|`; nonzero for fields that are not rotationally
/// covariant on the grid. Evaluates the field at all `N` points.
pub fn covariance_defect<F>(field: F, spec: &PolarGridSpec) -> Result<f64>
where
    F: Fn([f64; 2]) -> Vec<f64>,
{
    let ray = sample_reference_ray(&field, spec)?;
    let circuit = simulate_circuit(&build_circuit(spec)?, &ray)?;
    Ok(1.0 - fidelity(&circuit, &direct_state(&field, spec)?)?)
}
