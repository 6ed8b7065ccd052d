use qwave_core::*;

/// Homogeneous ball of radius 0.3 around x = 0.5 inside a faster, denser medium.
fn ball_scenario(n: usize) -> (StaggeredGrid, OperatorPair) {
    let grid = StaggeredGrid::new(1, &[(0.0, 1.0)], &[n]).unwrap();
    let material =
        MaterialModel::acoustic_from_fn(&grid, |x| if (x[0] - 0.5).abs() < 0.3 { (1.0, 1.0) } else { (2.0, 1.5) });
    let pair = assemble_operator_pair(&grid, &material).unwrap();
    (grid, pair)
}

fn long_source(location: usize) -> PointSource {
    PointSource::pressure(
        location,
        SourceTimeFunction::WindowedSine { start: 0.0, duration: 0.6, frequency: 10.0, amplitude: 1.0 },
        0.0,
        0.6,
    )
}

fn receivers(grid: &StaggeredGrid, lo: f64, hi: f64) -> SubspaceProjector {
    let mask = (0..grid.n_total())
        .map(|k| {
            let (block, x) = grid.dof_position(k).unwrap();
            block == FieldBlock::Pressure && x[0] >= lo && x[0] <= hi
        })
        .collect();
    SubspaceProjector::new(mask)
}

fn pipeline_loss(
    grid: &StaggeredGrid,
    pair: &OperatorPair,
    decomp: &GreensDecomposition,
    t_final: f64,
    projector: &SubspaceProjector,
) -> f64 {
    let b = pair.metric_diagonal();
    let phi = assemble_multisource_state(&decomp.slices, &b).unwrap();
    let h = build_hamiltonian(pair).unwrap();
    let prop = Propagator::new(&h, &EvolutionConfig::default()).unwrap();
    let t_ends: Vec<f64> = decomp.slices.iter().map(|s| s.t_end).collect();
    let t_sync = t_ends.iter().copied().fold(f64::MIN, f64::max);
    let sync = prop.rebind(&build_sync_hamiltonian(&h, &t_ends, t_sync).unwrap()).unwrap();
    let phi = sync.apply(&phi, 1.0).unwrap();
    let mult = prop.rebind(&build_mult_hamiltonian(&h, phi.layout().stacks).unwrap()).unwrap();
    let phi = mult.apply(&phi, t_final - t_sync).unwrap();
    assert_eq!(grid.n_total(), phi.layout().physical);
    estimate(&phi, projector, &EstimatorConfig::exact()).unwrap().value
}

fn monolithic_loss(pair: &OperatorPair, source: &PointSource, grid: &StaggeredGrid, t_final: f64, p: &SubspaceProjector) -> f64 {
    let solver = ModalSolver::new(pair).unwrap();
    let signal = |t: f64| source.eval(t);
    let forcing = Forcing {
        profile: source.profile(grid).unwrap(),
        signal: &signal,
        support: (source.t_start, source.t_end),
        breakpoints: vec![],
    };
    let w = solver.forced_response(&vec![0.0; pair.len()], 0.0, t_final, &[forcing], 0.002).unwrap();
    p.norm_sqr(&transform(&w, &pair.metric_diagonal()).unwrap())
}

#[test]
fn windowed_pipeline_matches_monolithic_forcing() {
    let (grid, pair) = ball_scenario(201);
    let source = long_source(100);
    let decomp = greens_decompose(&source, 1.0, 1.0, 0.25, &grid, &GreensOptions::default()).unwrap();
    assert!(decomp.slices.len() > 1);
    let p = receivers(&grid, 0.1, 0.35);
    let reference = monolithic_loss(&pair, &source, &grid, 0.8, &p);
    let loss = pipeline_loss(&grid, &pair, &decomp, 0.8, &p);
    let rel = (loss - reference).abs() / reference;
    assert!(rel < 1e-6, "relative mismatch {rel:e}");
}

fn presim_opts() -> PresimOptions {
    PresimOptions { wave_speed: Some(1.5), ..Default::default() }
}

fn ricker(location: usize, frequency: f64) -> PointSource {
    let half = 1.2 / frequency;
    PointSource::pressure(
        location,
        SourceTimeFunction::Ricker { center: half, frequency, amplitude: 1.0 },
        0.0,
        2.0 * half,
    )
}

#[test]
fn short_source_single_slice_matches_presimulation() {
    let (grid, pair) = ball_scenario(201);
    let source = ricker(100, 10.0);
    let decomp = greens_decompose(&source, 1.0, 1.0, 0.25, &grid, &GreensOptions::default()).unwrap();
    assert_eq!(decomp.slices.len(), 1);
    assert_eq!(decomp.slices[0].t_end, source.t_end);
    let presim = presimulate_pulse(&source, &grid, &pair, None, &presim_opts()).unwrap();
    let diff: f64 = decomp.slices[0].field.iter().zip(&presim.field).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = presim.field.iter().map(|a| a * a).sum::<f64>().sqrt();
    assert!(diff / norm < 2e-2, "relative difference {}", diff / norm);
}

#[test]
fn presimulated_support_stays_in_causal_ball() {
    let (grid, pair) = ball_scenario(201);
    let source = ricker(100, 10.0);
    let presim = presimulate_pulse(&source, &grid, &pair, None, &presim_opts()).unwrap();
    let center = source.position(&grid).unwrap();
    assert!(presim.support_radius(&grid, center) <= presim.radius);
    assert!(presim.nonzero_count > 0);
    assert!(presim.truncated_norm < 1e-3 * pair.metric_diagonal().iter().zip(&presim.field).map(|(b, w)| b * w * w).sum::<f64>().sqrt());
}

#[test]
fn initialized_count_constant_under_refinement() {
    let coarse = {
        let (grid, pair) = ball_scenario(201);
        presimulate_pulse(&ricker(100, 10.0), &grid, &pair, None, &presim_opts()).unwrap()
    };
    let fine = {
        let (grid, pair) = ball_scenario(401);
        presimulate_pulse(&ricker(200, 20.0), &grid, &pair, None, &presim_opts()).unwrap()
    };
    let ratio = fine.nonzero_count as f64 / coarse.nonzero_count as f64;
    assert!((ratio - 1.0).abs() <= 0.1, "{} vs {}", fine.nonzero_count, coarse.nonzero_count);
}

#[test]
fn analytic_slices_approximate_discrete_ones() {
    let grid = StaggeredGrid::new(1, &[(0.0, 1.0)], &[401]).unwrap();
    let source = PointSource::pressure(
        200,
        SourceTimeFunction::WindowedSine { start: 0.0, duration: 0.2, frequency: 5.0, amplitude: 1.0 },
        0.0,
        0.2,
    );
    let discrete = greens_decompose(&source, 1.0, 1.0, 0.25, &grid, &GreensOptions::default()).unwrap();
    let analytic = greens_decompose(
        &source,
        1.0,
        1.0,
        0.25,
        &grid,
        &GreensOptions { method: GreensMethod::Analytic, ..Default::default() },
    )
    .unwrap();
    assert_eq!(discrete.slices.len(), analytic.slices.len());
    for (d, a) in discrete.slices.iter().zip(&analytic.slices) {
        assert_eq!(d.t_end, a.t_end);
        let diff: f64 = d.field.iter().zip(&a.field).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = a.field.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(diff <= 2e-2 * norm, "relative {}", diff / norm);
    }
}

#[test]
fn slices_sum_to_the_source() {
    let (grid, _) = ball_scenario(201);
    let source = long_source(100);
    let decomp = greens_decompose(&source, 1.0, 1.0, 0.25, &grid, &GreensOptions::default()).unwrap();
    assert!(decomp.partition_error < 1e-10);
    assert!(decomp.overlap_growth >= 1.0);
    let windows = &decomp.windows;
    for k in 0..=600 {
        let t = k as f64 * 1e-3;
        let sliced: f64 = (0..windows.count()).map(|j| windows.window(j, t) * source.eval(t)).sum();
        assert!((sliced - source.eval(t)).abs() < 1e-10);
    }
}

#[test]
fn box_windows_do_not_add_values() {
    let t: Vec<f64> = (0..1000).map(|k| k as f64 * 1e-3).collect();
    let f: Vec<f64> = t.iter().map(|&t| if (0.2..0.7).contains(&t) { (40.0 * t).sin() } else { 0.0 }).collect();
    let windows = make_windows(&t, f64::INFINITY, &[0.0, 0.3, 0.45, 1.0]).unwrap();
    let whole = f.iter().filter(|v| **v != 0.0).count();
    let sliced: usize =
        windows.iter().map(|w| w.iter().zip(&f).filter(|(w, f)| **w * **f != 0.0).count()).sum();
    assert_eq!(whole, sliced);
}

#[test]
fn multisource_state_stacks_transformed_fields() {
    let (grid, pair) = ball_scenario(129);
    let b = pair.metric_diagonal();
    let a = presimulate_pulse(&ricker(50, 10.0), &grid, &pair, None, &presim_opts()).unwrap();
    let c = presimulate_pulse(&ricker(70, 10.0), &grid, &pair, None, &presim_opts()).unwrap();
    let phi = assemble_multisource_state(&[a.clone(), c], &b).unwrap();
    assert_eq!(phi.layout().stacks, 2);
    let block = phi.block_unnormalized(0).unwrap();
    let expected = transform(&a.field, &b).unwrap();
    let err = block.iter().zip(&expected).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    assert!(err < 1e-12);
    let other = StaggeredGrid::new(1, &[(0.0, 1.0)], &[65]).unwrap();
    let small = assemble_operator_pair(&other, &MaterialModel::acoustic_homogeneous(&other, 1.0, 1.0)).unwrap();
    assert!(assemble_multisource_state(&[a], &small.metric_diagonal()).is_err());
}

#[test]
fn evolved_slices_superpose_linearly() {
    let (grid, pair) = ball_scenario(129);
    let b = pair.metric_diagonal();
    let source = PointSource::pressure(
        64,
        SourceTimeFunction::WindowedSine { start: 0.0, duration: 0.3, frequency: 8.0, amplitude: 1.0 },
        0.0,
        0.3,
    );
    let decomp = greens_decompose(&source, 1.0, 1.0, 0.2, &grid, &GreensOptions::default()).unwrap();
    let solver = ModalSolver::new(&pair).unwrap();
    let t = 0.5;
    let mut summed = vec![0.0; pair.len()];
    for s in &decomp.slices {
        let w = solver.propagate(&s.field, t - s.t_end).unwrap();
        summed.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
    }
    let phi = assemble_multisource_state(&decomp.slices, &b).unwrap();
    let h = build_hamiltonian(&pair).unwrap();
    let t_ends: Vec<f64> = decomp.slices.iter().map(|s| s.t_end).collect();
    let t_sync = t_ends.iter().copied().fold(f64::MIN, f64::max);
    let phi = evolve(&phi, &build_sync_hamiltonian(&h, &t_ends, t_sync).unwrap(), 1.0, &Default::default()).unwrap();
    let phi = evolve(&phi, &build_mult_hamiltonian(&h, phi.layout().stacks).unwrap(), t - t_sync, &Default::default()).unwrap();
    let mut decoded = vec![0.0; pair.len()];
    for m in 0..decomp.slices.len() {
        let w = decode_block(&phi, m, &b).unwrap();
        decoded.iter_mut().zip(&w).for_each(|(a, b)| *a += b);
    }
    let err = decoded.iter().zip(&summed).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = summed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(err <= 1e-10 * scale, "{err} vs {scale}");
}

#[test]
fn reconstruction_improves_with_steepness() {
    let f = |t: f64| (7.0 * t).sin() + 0.5;
    let t: Vec<f64> = (0..=2000).map(|k| k as f64 * 1e-3).collect();
    let breakpoints = [0.0, 0.5, 1.0, 1.5, 2.0];
    let mut last = f64::INFINITY;
    for z in [4.0, 8.0, 16.0, 32.0, 64.0] {
        let spec = WindowSpec::new(z, breakpoints.to_vec()).unwrap();
        let (lo, hi) = spec.interior();
        let err = t
            .iter()
            .filter(|&&s| s >= lo && s <= hi)
            .map(|&s| (spec.sum(s) * f(s) - f(s)).abs())
            .fold(0.0, f64::max);
        assert!(err < last, "z = {z}: {err} !< {last}");
        last = err;
    }
}
