//! Built-in property suites run by `qwave verify`.

use std::fmt;

use num_complex::Complex64;
use qwave_core::{
    assemble_multisource_state, assemble_operator_pair, build_circuit, build_hamiltonian, build_mult_hamiltonian,
    build_sync_hamiltonian, classical_energy, decode, default_dt, direct_state, encode, energy, estimate, fidelity,
    greens_decompose, leapfrog_evolve, sample_reference_ray, simulate_circuit, transform, EstimatorConfig,
    EvolutionConfig, FieldBlock, Forcing, GreensOptions, LeapfrogOptions, MaterialModel, ModalSolver, OperatorPair,
    PointSource, PolarGridSpec, Propagator, QuantumRegisterState, SourceTimeFunction, StaggeredGrid,
    SubspaceProjector, WaveOperators, WindowSpec,
};

use crate::error::{CliError, CliResult};

pub const SUITES: [&str; 5] = ["symmetry", "conservation", "estimator", "initcircuit", "sources"];

/// One row of the report table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// `value <= tolerance`.
    fn at_most(&mut self, suite: &'static str, name: impl Into<String>, value: f64, tolerance: f64) {
        self.checks.push(Check { suite, name: name.into(), value, tolerance, pass: value <= tolerance });
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<12} {:<width$} {:>12} {:>12}  result", "suite", "check", "value", "tolerance")?;
        for c in &self.checks {
            let verdict = if c.pass { "pass" } else { "FAIL" };
            writeln!(f, "{:<12} {:<width$} {:>12.3e} {:>12.3e}  {verdict}", c.suite, c.name, c.value, c.tolerance)?;
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

/// Runs one suite (or `all`). Unknown names are a usage error.
pub fn run_suite(name: &str, seed: u64) -> CliResult<Report> {
    let mut report = Report::default();
    let names: Vec<&str> = if name == "all" { SUITES.to_vec() } else { vec![name] };
    for suite in names {
        match suite {
            "symmetry" => symmetry(&mut report),
            "conservation" => conservation(&mut report),
            "estimator" => estimator(&mut report, seed),
            "initcircuit" => initcircuit(&mut report),
            "sources" => sources(&mut report),
            other => {
                return Err(CliError::validation(
                    "verify",
                    format!("unknown suite `{other}`; expected one of {} or all", SUITES.join(", ")),
                ))
            }
        }
        .map_err(|e| CliError::Numerical(format!("suite {suite}: {e}")))?;
    }
    Ok(report)
}

type SuiteResult = Result<(), qwave_core::Error>;

fn wobble(x: f64, k: f64) -> f64 {
    1.0 + 0.8 * (k * x + 0.3 * k).sin().abs()
}

fn line(n: usize) -> qwave_core::Result<StaggeredGrid> {
    StaggeredGrid::new(1, &[(0.0, 1.0)], &[n])
}

fn symmetry(report: &mut Report) -> SuiteResult {
    let mut systems: Vec<(String, OperatorPair)> = Vec::new();
    for n in [8, 64, 256] {
        let g = line(n)?;
        let m = MaterialModel::acoustic_from_fn(&g, |x| (wobble(x[0], 7.0), wobble(x[0], 3.0)));
        systems.push((format!("acoustic 1D N={n}"), assemble_operator_pair(&g, &m)?));
    }
    for n in [4, 16] {
        let g = StaggeredGrid::new(2, &[(0.0, 1.0), (0.0, 2.0)], &[n, n])?;
        let m = MaterialModel::acoustic_from_fn(&g, |x| (wobble(x[0] + x[1], 5.0), wobble(x[0] - x[1], 2.0)));
        systems.push((format!("acoustic 2D {n}x{n}"), assemble_operator_pair(&g, &m)?));
    }
    for n in [16, 128] {
        let g = line(n)?;
        let m = MaterialModel::maxwell1d_from_fn(&g, |x| (wobble(x, 4.0), wobble(x, 9.0)));
        systems.push((format!("maxwell1d N={n}"), assemble_operator_pair(&g, &m)?));
    }
    for (label, pair) in &systems {
        report.at_most("symmetry", format!("{label} |A+A^T|"), pair.a().antisymmetry_defect(), 0.0);
        report.at_most("symmetry", format!("{label} |H-H^dag|"), build_hamiltonian(pair)?.hermiticity_defect(), 1e-12);
    }
    Ok(())
}

fn pulse(g: &StaggeredGrid, center: f64, width: f64) -> Vec<f64> {
    (0..g.n_total())
        .map(|k| {
            let (block, x) = g.dof_position(k).expect("k < n_total");
            if block == FieldBlock::Pressure { (-0.5 * ((x[0] - center) / width).powi(2)).exp() } else { 0.0 }
        })
        .collect()
}

fn conservation(report: &mut Report) -> SuiteResult {
    let g = line(128)?;
    let m = MaterialModel::acoustic_from_fn(&g, |x| (1.0 + x[0], 1.0 + 0.5 * (6.0 * x[0]).sin().abs()));
    let pair = assemble_operator_pair(&g, &m)?;
    let b = pair.metric_diagonal();
    let w0 = pulse(&g, 0.4, 0.05);
    let state = encode(&w0, &b)?;
    let prop = Propagator::new(&build_hamiltonian(&pair)?, &EvolutionConfig::default())?;
    let e0 = classical_energy(&w0, &b);
    let (mut norm_err, mut energy_err) = (0.0f64, 0.0f64);
    for k in 1..=10 {
        let out = prop.apply(&state, 0.5 * k as f64)?;
        norm_err = norm_err.max((out.norm() - 1.0).abs());
        energy_err = energy_err.max((energy(&out) - e0).abs() / e0);
        energy_err = energy_err.max((classical_energy(&decode(&out, &b)?, &b) - e0).abs() / e0);
    }
    report.at_most("conservation", "unitary norm drift, 5 crossings", norm_err, 1e-10);
    report.at_most("conservation", "unitary energy drift, 5 crossings", energy_err, 1e-10);
    let traj = leapfrog_evolve(&pair, &w0, None, default_dt(&pair), 5.0, &LeapfrogOptions::default())?;
    report.at_most("conservation", "leapfrog invariant drift", traj.invariant_drift(), 1e-10);
    Ok(())
}

/// Small deterministic generator for test data (splitmix64).
fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}

fn estimator(report: &mut Report, seed: u64) -> SuiteResult {
    let mut gen = 5u64;
    let blocks: Vec<Vec<Complex64>> =
        (0..2).map(|_| (0..8).map(|_| Complex64::new(splitmix(&mut gen), 0.0)).collect()).collect();
    let phi = QuantumRegisterState::stack(&blocks, 8)?;
    let projector = SubspaceProjector::from_ranges(8, &[(2, 6)])?;
    let exact = estimate(&phi, &projector, &EstimatorConfig::exact())?.value;
    let reps = 100u64;
    let rms = |shots: usize| -> qwave_core::Result<f64> {
        let mut sq = 0.0;
        for rep in 0..reps {
            let e = estimate(&phi, &projector, &EstimatorConfig::shots(shots, seed.wrapping_add(rep)))?;
            sq += (e.value - exact).powi(2);
        }
        Ok((sq / reps as f64).sqrt())
    };
    let ratio = rms(10_000)? / rms(40_000)?;
    report.at_most("estimator", "RMS ratio for 4x shots, |ratio/2 - 1|", (ratio / 2.0 - 1.0).abs(), 0.3);
    let a = estimate(&phi, &projector, &EstimatorConfig::shots(1000, seed))?;
    let b = estimate(&phi, &projector, &EstimatorConfig::shots(1000, seed))?;
    report.at_most("estimator", "same seed, same estimate", (a.value - b.value).abs(), 0.0);
    Ok(())
}

fn initcircuit(report: &mut Report) -> SuiteResult {
    for radial in [2, 4, 8, 16] {
        let spec = PolarGridSpec::planar(radial, [0.1, -0.2], 0.25);
        let field = move |x: [f64; 2]| {
            let (dx, dy) = (x[0] - 0.1, x[1] + 0.2);
            let r = dx.hypot(dy);
            let (f, g) = ((-r).exp(), 0.5 * r - 0.2 * r * r);
            vec![(f * dx - g * dy) / r, (f * dy + g * dx) / r]
        };
        let ray = sample_reference_ray(field, &spec)?;
        let circuit = build_circuit(&spec)?;
        let state = simulate_circuit(&circuit, &ray)?;
        let fid = fidelity(&state, &direct_state(field, &spec)?)?;
        report.at_most("initcircuit", format!("A={radial} infidelity"), 1.0 - fid, 1e-10);
        report.at_most("initcircuit", format!("A={radial} field evaluations - A"), (ray.evaluations as f64 - radial as f64).abs(), 0.0);
    }
    Ok(())
}

fn sources(report: &mut Report) -> SuiteResult {
    let spec = WindowSpec::uniform(0.0, 2.0, 4)?;
    let (lo, hi) = spec.interior();
    let samples: Vec<f64> = (0..=1000).map(|k| lo + (hi - lo) * k as f64 / 1000.0).collect();
    report.at_most("sources", "window partition deviation", spec.partition_deviation(&samples), 1e-3);

    // Sliced pipeline against the monolithic forced solution.
    let grid = line(101)?;
    let material =
        MaterialModel::acoustic_from_fn(&grid, |x| if (x[0] - 0.5).abs() < 0.3 { (1.0, 1.0) } else { (2.0, 1.5) });
    let pair = assemble_operator_pair(&grid, &material)?;
    let b = pair.metric_diagonal();
    let source = PointSource::pressure(
        50,
        SourceTimeFunction::WindowedSine { start: 0.0, duration: 0.6, frequency: 5.0, amplitude: 1.0 },
        0.0,
        0.6,
    );
    let t_final = 0.8;
    let mask = (0..grid.n_total())
        .map(|k| {
            let (block, x) = grid.dof_position(k).expect("k < n_total");
            block == FieldBlock::Pressure && (0.1..=0.35).contains(&x[0])
        })
        .collect();
    let projector = SubspaceProjector::new(mask);
    let decomp = greens_decompose(&source, 1.0, 1.0, 0.25, &grid, &GreensOptions::default())?;
    let phi = assemble_multisource_state(&decomp.slices, &b)?;
    let h = build_hamiltonian(&pair)?;
    let prop = Propagator::new(&h, &EvolutionConfig::default())?;
    let t_ends: Vec<f64> = decomp.slices.iter().map(|s| s.t_end).collect();
    let t_sync = t_ends.iter().copied().fold(f64::MIN, f64::max);
    let phi = prop.rebind(&build_sync_hamiltonian(&h, &t_ends, t_sync)?)?.apply(&phi, 1.0)?;
    let phi = prop.rebind(&build_mult_hamiltonian(&h, phi.layout().stacks)?)?.apply(&phi, t_final - t_sync)?;
    let sliced = estimate(&phi, &projector, &EstimatorConfig::exact())?.value;

    let signal = |t: f64| source.eval(t);
    let forcing = Forcing { profile: source.profile(&grid)?, signal: &signal, support: (0.0, 0.6), breakpoints: vec![] };
    let w = ModalSolver::new(&pair)?.forced_response(&vec![0.0; pair.len()], 0.0, t_final, &[forcing], 0.002)?;
    let monolithic = projector.norm_sqr(&transform(&w, &b)?);
    report.at_most("sources", format!("{} slices vs monolithic, relative", decomp.slices.len()), (sliced - monolithic).abs() / monolithic, 1e-6);
    Ok(())
}
