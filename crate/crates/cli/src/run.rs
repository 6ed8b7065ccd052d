//! The wave commands. Each builds a complete [`Bundle`] in memory; files
//! are written by the caller only after every step succeeded.

use num_complex::Complex64;
use qwave_core::{
    assemble_multisource_state, build_circuit, build_hamiltonian, build_mult_hamiltonian, build_sync_hamiltonian,
    classical_energy, covariance_defect, decode_block, default_dt, direct_state, encode, estimate, fidelity,
    greens_decompose, leapfrog_evolve, sample_reference_ray, simulate_circuit, transform, Estimate, FieldBlock,
    Forcing, Gate, GreensDecomposition, Hamiltonian, LeapfrogOptions, ModalSolver, PreSimResult, Propagator,
    QuantumRegisterState, SourceTimeFunction, WaveOperators,
};
use serde::Serialize;

use crate::error::{CliError, CliResult, Context};
use crate::io::{csv_bytes, fmt_f64, state_files, triplet_csv, Bundle};
use crate::scenario::{Engine, FamilyName, LoadedScenario, Model, Overrides};

/// Fields and register states at every output time.
struct Evolution {
    times: Vec<f64>,
    fields: Vec<Vec<f64>>,
    states: Vec<QuantumRegisterState>,
    hamiltonian: Hamiltonian,
    decompositions: Vec<GreensDecomposition>,
    dt: Option<f64>,
}

fn evolve_model(model: &Model) -> CliResult<Evolution> {
    let reduced = &model.reduced;
    let hamiltonian = build_hamiltonian(reduced).context("hamiltonian")?;
    let times = model.output_times();
    match model.engine {
        Engine::Quantum => evolve_quantum(model, hamiltonian, times),
        Engine::Leapfrog => evolve_leapfrog(model, hamiltonian, times),
    }
}

fn decompose(model: &Model) -> CliResult<Vec<GreensDecomposition>> {
    model
        .sources
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let radius = s.ball_radius.ok_or_else(|| CliError::validation(format!("sources[{k}].ball_radius"), "missing"))?;
            greens_decompose(&s.source, s.c_hom, s.rho_hom, radius, &model.grid, &s.options).context(format!("sources[{k}]"))
        })
        .collect()
}

fn evolve_quantum(model: &Model, hamiltonian: Hamiltonian, times: Vec<f64>) -> CliResult<Evolution> {
    let reduced = &model.reduced;
    let b = reduced.b().diagonal();
    let decompositions = decompose(model)?;

    let mut blocks: Vec<(Vec<Complex64>, f64)> = Vec::new();
    if model.initial.iter().any(|&v| v != 0.0) || decompositions.is_empty() {
        let w = reduced.restrict(&model.initial).context("initial")?;
        blocks.push((transform(&w, &b).context("initial")?, 0.0));
    }
    for (k, d) in decompositions.iter().enumerate() {
        for slice in &d.slices {
            let w = reduced.restrict(&slice.field).context(format!("sources[{k}]"))?;
            blocks.push((transform(&w, &b).context(format!("sources[{k}]"))?, slice.t_end));
        }
    }
    let fields: Vec<Vec<Complex64>> = blocks.iter().map(|(f, _)| f.clone()).collect();
    let t_ends: Vec<f64> = blocks.iter().map(|(_, t)| *t).collect();
    let t_sync = t_ends.iter().copied().fold(0.0, f64::max);
    let mut phi = QuantumRegisterState::stack(&fields, reduced.len()).context("register")?;

    let prop = Propagator::new(&hamiltonian, &model.evolution).context("evolution")?;
    if t_ends.iter().any(|&t| t != t_sync) {
        let sync = build_sync_hamiltonian(&hamiltonian, &t_ends, t_sync).context("synchronization")?;
        phi = prop.rebind(&sync).context("synchronization")?.apply(&phi, 1.0).context("synchronization")?;
    }
    let mult = build_mult_hamiltonian(&hamiltonian, phi.layout().stacks).context("evolution")?;
    let mult = prop.rebind(&mult).context("evolution")?;

    let mut out_fields = Vec::with_capacity(times.len());
    let mut states = Vec::with_capacity(times.len());
    for &t in &times {
        let state = mult.apply(&phi, t - t_sync).context(format!("evolution to t = {t}"))?;
        let mut w = vec![0.0; reduced.len()];
        for m in 0..state.layout().stacks {
            let block = decode_block(&state, m, &b).context("decode")?;
            w.iter_mut().zip(block).for_each(|(a, v)| *a += v);
        }
        out_fields.push(reduced.expand(&w, t).context("decode")?);
        states.push(state);
    }
    Ok(Evolution { times, fields: out_fields, states, hamiltonian, decompositions, dt: None })
}

fn evolve_leapfrog(model: &Model, hamiltonian: Hamiltonian, times: Vec<f64>) -> CliResult<Evolution> {
    let reduced = &model.reduced;
    let b = reduced.b().diagonal();
    let profiles = source_profiles(model)?;
    let homogeneous = reduced.is_homogeneous();
    let forcing = |t: f64, out: &mut [f64]| {
        if homogeneous {
            out.iter_mut().for_each(|v| *v = 0.0);
        } else {
            reduced.induced_source_into(t, out).expect("sizes checked at validation");
        }
        for (profile, source) in profiles.iter().zip(&model.sources) {
            let f = source.source.eval(t);
            if f != 0.0 {
                out.iter_mut().zip(profile).for_each(|(o, p)| *o += f * p);
            }
        }
    };
    let has_forcing = !homogeneous || !profiles.is_empty();
    let dt = model.dt.unwrap_or_else(|| default_dt(reduced));

    let mut w = reduced.restrict(&model.initial).context("initial")?;
    let mut t_prev = 0.0;
    let mut fields = Vec::with_capacity(times.len());
    let mut states = Vec::with_capacity(times.len());
    for &t in &times {
        if t > t_prev {
            let opts = LeapfrogOptions { t0: t_prev, record_every: 0 };
            let traj = leapfrog_evolve(reduced, &w, has_forcing.then_some(&forcing as _), dt, t - t_prev, &opts)
                .context(format!("leapfrog to t = {t}"))?;
            w = traj.final_state().to_vec();
            t_prev = t;
        }
        fields.push(reduced.expand(&w, t).context("expand")?);
        states.push(encode(&w, &b).context(format!("encoding at t = {t}"))?);
    }
    Ok(Evolution { times, fields, states, hamiltonian, decompositions: Vec::new(), dt: Some(dt) })
}

fn source_profiles(model: &Model) -> CliResult<Vec<Vec<f64>>> {
    model
        .sources
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let full = s.source.profile(&model.grid).context(format!("sources[{k}]"))?;
            model.reduced.restrict(&full).context(format!("sources[{k}]"))
        })
        .collect()
}

/// Shortest time scale of the source signals, for quadrature panels.
fn signal_time_scale(model: &Model) -> f64 {
    fn scale(f: &SourceTimeFunction) -> f64 {
        match f {
            SourceTimeFunction::Gaussian { width, .. } => *width,
            SourceTimeFunction::Ricker { frequency, .. } => 1.0 / frequency,
            SourceTimeFunction::WindowedSine { duration, frequency, .. } => duration.min(1.0 / frequency.abs().max(1e-300)),
            SourceTimeFunction::Tabulated { times, .. } => {
                times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
            }
            SourceTimeFunction::Windowed { inner, width, .. } => scale(inner).min(*width),
        }
    }
    model.sources.iter().map(|s| scale(&s.source.signal).min(s.source.duration().max(f64::MIN_POSITIVE))).fold(f64::INFINITY, f64::min)
}

/// Classical monolithic values of every measurement, from the exact
/// modal integrator of the forced system.
fn reference_values(model: &Model) -> CliResult<Vec<f64>> {
    let reduced = &model.reduced;
    let b = reduced.b().diagonal();
    let solver = ModalSolver::new(reduced).context("reference")?;
    let profiles = source_profiles(model)?;
    let signals: Vec<_> = model.sources.iter().map(|s| move |t: f64| s.source.eval(t)).collect();
    let forcing: Vec<Forcing<'_>> = profiles
        .iter()
        .zip(&signals)
        .zip(&model.sources)
        .map(|((profile, signal), s)| Forcing {
            profile: profile.clone(),
            signal,
            support: (s.source.t_start, s.source.t_end),
            breakpoints: Vec::new(),
        })
        .collect();
    let panel = (signal_time_scale(model) / 50.0).min(model.final_time.max(1e-3));
    let w0 = reduced.restrict(&model.initial).context("reference")?;
    model
        .measurements
        .iter()
        .map(|m| {
            let w = solver.forced_response(&w0, 0.0, m.time, &forcing, panel).context("reference")?;
            Ok(m.projector.norm_sqr(&transform(&w, &b).context("reference")?))
        })
        .collect()
}

#[derive(Serialize)]
struct StringRecord {
    label: String,
    coefficient: f64,
    expectation: f64,
    variance: f64,
}

#[derive(Serialize)]
struct ReferenceRecord {
    value: f64,
    relative_difference: f64,
}

#[derive(Serialize)]
struct MeasurementRecord {
    name: String,
    time: f64,
    value: f64,
    stderr: f64,
    shots: usize,
    strings: Vec<StringRecord>,
    cardinality: usize,
    stacks: usize,
    mcx_gate_estimate: usize,
    warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<ReferenceRecord>,
}

fn measurement_record(name: &str, time: f64, est: Estimate, stacks: usize, reference: Option<f64>) -> MeasurementRecord {
    MeasurementRecord {
        name: name.to_owned(),
        time,
        value: est.value,
        stderr: est.stderr,
        shots: est.shots,
        strings: est
            .strings
            .into_iter()
            .map(|s| StringRecord { label: s.label, coefficient: s.coefficient, expectation: s.expectation, variance: s.variance })
            .collect(),
        cardinality: est.cardinality,
        stacks,
        mcx_gate_estimate: est.mcx_gate_estimate,
        warnings: est.warnings,
        reference: reference.map(|r| ReferenceRecord {
            value: r,
            relative_difference: if r == 0.0 { (est.value - r).abs() } else { (est.value - r).abs() / r.abs() },
        }),
    }
}

fn measure_all(model: &Model, evo: &Evolution) -> CliResult<Vec<MeasurementRecord>> {
    let references = if model.reference_check { Some(reference_values(model)?) } else { None };
    model
        .measurements
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let idx = evo.times.iter().position(|&t| t == m.time).expect("measurement times are output times");
            let state = &evo.states[idx];
            let est = estimate(state, &m.projector, &m.estimator).context(format!("measurements[{k}]"))?;
            Ok(measurement_record(&m.name, m.time, est, state.layout().stacks, references.as_ref().map(|r| r[k])))
        })
        .collect()
}

#[derive(Serialize)]
struct HamiltonianInfo {
    max_norm: f64,
    sparsity: usize,
    qubits: u32,
    dimension: usize,
    hermiticity_defect: f64,
}

#[derive(Serialize)]
struct ScalingReport {
    dimension: usize,
    grid_dofs: usize,
    /// Time for a wave at the largest speed to cross the longest extent.
    crossing_time: f64,
    classical_cost_exponent: f64,
    quantum_cost_exponent: f64,
    speedup_order: usize,
    speedup: &'static str,
    /// Nonzeros of `A` times explicit steps at the CFL limit.
    classical_operations: f64,
    /// Leading term `d ||H||_max t` of the Hamiltonian query count.
    hamiltonian_queries: f64,
    /// Order `N^(1/D)` of data the oracle may take without losing the speed-up.
    oracle_data_bound: f64,
}

fn scaling_report(model: &Model, h: &Hamiltonian) -> ScalingReport {
    let d = model.grid.dimension();
    let n = model.grid.n_total();
    let extent = model.grid.bounds().iter().map(|(lo, hi)| hi - lo).fold(0.0, f64::max);
    let speed = model.reduced.max_wave_speed();
    let steps = (model.final_time / default_dt(&model.reduced)).ceil();
    ScalingReport {
        dimension: d,
        grid_dofs: n,
        crossing_time: extent / speed,
        classical_cost_exponent: 1.0 + 1.0 / d as f64,
        quantum_cost_exponent: 1.0 / d as f64,
        speedup_order: d + 1,
        speedup: match d {
            1 => "quadratic",
            2 => "cubic",
            _ => "quartic",
        },
        classical_operations: model.reduced.a().triplets().len() as f64 * steps,
        hamiltonian_queries: h.sparsity() as f64 * h.max_norm() * model.final_time,
        oracle_data_bound: (n as f64).powf(1.0 / d as f64),
    }
}

#[derive(Serialize)]
struct WindowRecord {
    count: usize,
    /// `null` for box windows.
    steepness: Option<f64>,
    breakpoints: Vec<f64>,
}

#[derive(Serialize)]
struct SliceRecord {
    t_end: f64,
    radius: f64,
    nonzero_count: usize,
    truncated_norm: f64,
}

#[derive(Serialize)]
struct SourceRecord {
    node: usize,
    position: [f64; 2],
    t_start: f64,
    t_end: f64,
    c_hom: f64,
    rho_hom: f64,
    ball_radius: f64,
    windows: WindowRecord,
    partition_error: f64,
    overlap_growth: f64,
    slices: Vec<SliceRecord>,
}

fn source_records(model: &Model, decompositions: &[GreensDecomposition]) -> Vec<SourceRecord> {
    model
        .sources
        .iter()
        .zip(decompositions)
        .map(|(s, d)| SourceRecord {
            node: s.source.location,
            position: model.grid.dof_position(s.source.location).expect("validated").1,
            t_start: s.source.t_start,
            t_end: s.source.t_end,
            c_hom: s.c_hom,
            rho_hom: s.rho_hom,
            ball_radius: s.ball_radius.unwrap_or(0.0),
            windows: WindowRecord {
                count: d.windows.count(),
                steepness: d.windows.steepness.is_finite().then_some(d.windows.steepness),
                breakpoints: d.windows.breakpoints.clone(),
            },
            partition_error: d.partition_error,
            overlap_growth: d.overlap_growth,
            slices: d
                .slices
                .iter()
                .map(|p: &PreSimResult| SliceRecord {
                    t_end: p.t_end,
                    radius: p.radius,
                    nonzero_count: p.nonzero_count,
                    truncated_norm: p.truncated_norm,
                })
                .collect(),
        })
        .collect()
}

#[derive(Serialize)]
struct GridRecord {
    dimension: usize,
    nodes: Vec<usize>,
    bounds: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct DofRecord {
    total: usize,
    free: usize,
    constrained: usize,
}

#[derive(Serialize)]
struct RegisterRecord {
    stacks: usize,
    qubits: u32,
    /// Including the auxiliary qubit of the subspace measurement.
    measurement_qubits: u32,
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    scenario: String,
    engine: &'static str,
    family: &'static str,
    grid: GridRecord,
    dofs: DofRecord,
    hamiltonian: HamiltonianInfo,
    register: RegisterRecord,
    scaling: ScalingReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    leapfrog_dt: Option<f64>,
    times: Vec<f64>,
    sources: Vec<SourceRecord>,
    files: Vec<String>,
}

fn manifest(command: &'static str, loaded: &LoadedScenario, model: &Model, evo: &Evolution, files: Vec<String>) -> Manifest {
    let h = &evo.hamiltonian;
    let grid = &model.grid;
    let nodes = if grid.dimension() == 2 { vec![grid.nx(), grid.ny()] } else { vec![grid.nx()] };
    let final_layout = *evo.states.last().expect("at least the final time").layout();
    Manifest {
        command,
        scenario: loaded.path.display().to_string(),
        engine: match model.engine {
            Engine::Quantum => "quantum",
            Engine::Leapfrog => "leapfrog",
        },
        family: match model.family {
            FamilyName::Acoustic => "acoustic",
            FamilyName::Maxwell1d => "maxwell1d",
        },
        grid: GridRecord { dimension: grid.dimension(), nodes, bounds: grid.bounds().iter().map(|&(a, b)| [a, b]).collect() },
        dofs: DofRecord {
            total: grid.n_total(),
            free: model.reduced.free_dofs().len(),
            constrained: model.reduced.constrained_dofs().len(),
        },
        hamiltonian: HamiltonianInfo {
            max_norm: h.max_norm(),
            sparsity: h.sparsity(),
            qubits: h.num_qubits(),
            dimension: h.dim(),
            hermiticity_defect: h.hermiticity_defect(),
        },
        register: RegisterRecord {
            stacks: final_layout.stacks,
            qubits: final_layout.num_qubits(),
            measurement_qubits: final_layout.num_qubits() + 1,
        },
        scaling: scaling_report(model, h),
        leapfrog_dt: evo.dt,
        times: evo.times.clone(),
        sources: source_records(model, &evo.decompositions),
        files,
    }
}

fn block_name(block: FieldBlock) -> &'static str {
    match block {
        FieldBlock::Pressure => "p",
        FieldBlock::VelocityX => "vx",
        FieldBlock::VelocityY => "vy",
    }
}

/// `simulate`: snapshots, energies, measurements, operators, final state
/// and the manifest.
pub fn simulate(loaded: &LoadedScenario, overrides: &Overrides) -> CliResult<Bundle> {
    let model = loaded.model(overrides)?;
    let evo = evolve_model(&model)?;
    let records = measure_all(&model, &evo)?;
    let full_b = model.pair.metric_diagonal();
    let grid = &model.grid;

    let mut bundle = Bundle::default();
    let snapshot_rows = model.snapshot_times.iter().flat_map(|&t| {
        let idx = evo.times.iter().position(|&s| s == t).expect("snapshot times are output times");
        evo.fields[idx].iter().enumerate().map(move |(k, v)| vec![fmt_f64(t), k.to_string(), fmt_f64(*v)])
    });
    bundle.add("snapshots.csv", csv_bytes(&["time", "dof", "value"], snapshot_rows));
    bundle.add(
        "dofs.csv",
        csv_bytes(
            &["dof", "block", "x", "y"],
            (0..grid.n_total()).map(|k| {
                let (block, x) = grid.dof_position(k).expect("k < n_total");
                vec![k.to_string(), block_name(block).to_owned(), fmt_f64(x[0]), fmt_f64(x[1])]
            }),
        ),
    );
    bundle.add(
        "energy.csv",
        csv_bytes(
            &["time", "energy"],
            model.snapshot_times.iter().map(|&t| {
                let idx = evo.times.iter().position(|&s| s == t).expect("snapshot times are output times");
                vec![fmt_f64(t), fmt_f64(classical_energy(&evo.fields[idx], &full_b))]
            }),
        ),
    );
    for r in &records {
        bundle.add_json(format!("measurement_{}.json", r.name), r);
    }
    bundle.add("operator_a.csv", triplet_csv(model.pair.a()));
    bundle.add("operator_b.csv", triplet_csv(model.pair.b()));
    let final_free = model.reduced.restrict(evo.fields.last().expect("final time")).context("final state")?;
    let final_state = encode(&final_free, &model.reduced.b().diagonal()).context("final state")?;
    let (csv, sidecar) = state_files(&final_state);
    bundle.add("state.csv", csv);
    bundle.add_json("state.json", &sidecar);
    let mut files = bundle.names();
    files.push("manifest.json".into());
    bundle.add_json("manifest.json", &manifest("simulate", loaded, &model, &evo, files));
    Ok(bundle)
}

/// `measure`: measurement results and the manifest only.
pub fn measure(loaded: &LoadedScenario, overrides: &Overrides) -> CliResult<Bundle> {
    let model = loaded.model(overrides)?;
    if model.measurements.is_empty() {
        return Err(CliError::validation(format!("{}: measurements", loaded.path.display()), "nothing to measure"));
    }
    let evo = evolve_model(&model)?;
    let records = measure_all(&model, &evo)?;
    let mut bundle = Bundle::default();
    for r in &records {
        bundle.add_json(format!("measurement_{}.json", r.name), r);
    }
    let mut files = bundle.names();
    files.push("manifest.json".into());
    bundle.add_json("manifest.json", &manifest("measure", loaded, &model, &evo, files));
    Ok(bundle)
}

#[derive(Serialize)]
struct PresimReport {
    scenario: String,
    sources: Vec<SourceRecord>,
    stacks: usize,
    qubits: u32,
}

/// `presim`: sliced source fields and their stacked register state.
pub fn presim(loaded: &LoadedScenario, overrides: &Overrides) -> CliResult<Bundle> {
    let model = loaded.model(overrides)?;
    if model.sources.is_empty() {
        return Err(CliError::validation(format!("{}: sources", loaded.path.display()), "no sources to pre-simulate"));
    }
    for (k, s) in model.sources.iter().enumerate() {
        if s.ball_radius.is_none() {
            return Err(CliError::validation(
                format!("{}: sources[{k}].ball_radius", loaded.path.display()),
                "required for pre-simulation",
            ));
        }
    }
    let decompositions = decompose(&model)?;
    let reduced = &model.reduced;
    let slices: Vec<PreSimResult> = decompositions
        .iter()
        .flat_map(|d| d.slices.iter())
        .map(|s| Ok(PreSimResult { field: reduced.restrict(&s.field).context("presim")?, ..s.clone() }))
        .collect::<CliResult<_>>()?;
    let state = assemble_multisource_state(&slices, &reduced.b().diagonal()).context("presim")?;

    let mut bundle = Bundle::default();
    let rows = decompositions.iter().enumerate().flat_map(|(k, d)| {
        d.slices.iter().enumerate().flat_map(move |(j, s)| {
            s.field
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(move |(dof, v)| vec![k.to_string(), j.to_string(), fmt_f64(s.t_end), dof.to_string(), fmt_f64(*v)])
        })
    });
    bundle.add("slices.csv", csv_bytes(&["source", "slice", "t_end", "dof", "value"], rows));
    let (csv, sidecar) = state_files(&state);
    bundle.add("presim_state.csv", csv);
    bundle.add_json("presim_state.json", &sidecar);
    bundle.add_json(
        "presim.json",
        &PresimReport {
            scenario: loaded.path.display().to_string(),
            sources: source_records(&model, &decompositions),
            stacks: state.layout().stacks,
            qubits: state.num_qubits(),
        },
    );
    Ok(bundle)
}

#[derive(Serialize)]
struct GateRecord {
    kind: &'static str,
    qubits: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
    /// Components `(plane, plane + 1)` rotated by a controlled rotation.
    #[serde(skip_serializing_if = "Option::is_none")]
    plane: Option<usize>,
}

#[derive(Serialize)]
struct RegisterSplit {
    component: usize,
    radial: usize,
    angular: usize,
}

#[derive(Serialize)]
struct CircuitRecord {
    num_qubits: usize,
    registers: RegisterSplit,
    gates: Vec<GateRecord>,
}

#[derive(Serialize)]
struct CircuitReport {
    scenario: String,
    points: usize,
    field_evaluations: usize,
    fidelity: f64,
    covariance_defect: f64,
    min_angle: f64,
    scale: f64,
}

/// `initcircuit`: gate list, simulated state and a fidelity report.
pub fn initcircuit(loaded: &LoadedScenario) -> CliResult<Bundle> {
    let (spec, field) = loaded.circuit_spec()?;
    let f = |x: [f64; 2]| field.eval(x, spec.center, spec.components, spec.rotation_plane);
    let ray = sample_reference_ray(f, &spec).context("initcircuit.field")?;
    let circuit = build_circuit(&spec).context("initcircuit")?;
    let state = simulate_circuit(&circuit, &ray).context("initcircuit")?;
    let direct = direct_state(f, &spec).context("initcircuit")?;
    let report = CircuitReport {
        scenario: loaded.path.display().to_string(),
        points: spec.points(),
        field_evaluations: ray.evaluations,
        fidelity: fidelity(&state, &direct).context("initcircuit")?,
        covariance_defect: covariance_defect(f, &spec).context("initcircuit")?,
        min_angle: circuit.min_angle(),
        scale: state.scale(),
    };
    let component_qubits: Vec<usize> = (0..spec.component_qubits()).collect();
    let gates = circuit
        .gates
        .iter()
        .map(|g| match g {
            Gate::StatePrep { qubits } => GateRecord { kind: "state_prep", qubits: qubits.clone(), angle: None, plane: None },
            Gate::Hadamard { qubit } => GateRecord { kind: "h", qubits: vec![*qubit], angle: None, plane: None },
            Gate::ControlledRotation { control, plane, angle } => GateRecord {
                kind: "controlled_rotation",
                qubits: std::iter::once(*control).chain(component_qubits.iter().copied()).collect(),
                angle: Some(*angle),
                plane: Some(*plane),
            },
        })
        .collect();
    let record = CircuitRecord {
        num_qubits: circuit.num_qubits(),
        registers: RegisterSplit {
            component: spec.component_qubits(),
            radial: spec.radial_qubits(),
            angular: spec.angular_qubits(),
        },
        gates,
    };
    let mut bundle = Bundle::default();
    bundle.add_json("circuit.json", &record);
    let (csv, sidecar) = state_files(&state);
    bundle.add("circuit_state.csv", csv);
    bundle.add_json("circuit_state.json", &sidecar);
    bundle.add_json("initcircuit.json", &report);
    Ok(bundle)
}
