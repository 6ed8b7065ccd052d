use proptest::prelude::*;
use qwave_core::*;

fn pair_1d(n: usize) -> (StaggeredGrid, OperatorPair) {
    let g = StaggeredGrid::new(1, &[(0.0, 1.0)], &[n]).unwrap();
    let m = MaterialModel::acoustic_from_fn(&g, |x| (1.0 + 0.3 * x[0], 1.2 - 0.4 * x[0]));
    (g.clone(), assemble_operator_pair(&g, &m).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deleting_dofs_keeps_symmetry(n in 3usize..40, picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8),
                                    scales in prop::collection::vec(0.2f64..4.0, 8)) {
        let (g, pair) = pair_1d(n);
        let total = g.n_total();
        let mut dofs: Vec<usize> = picks.iter().map(|i| i.index(total)).collect();
        dofs.sort_unstable();
        dofs.dedup();
        let k = dofs.len();
        let rc = SparseOperator::from_diagonal(&scales[..k]).unwrap();
        let cs = ConstraintSet::new(total, dofs, SparseOperator::zeros(k, total - k), rc, VectorSeries::default()).unwrap();
        let reduced = reduce_system(&pair, &cs).unwrap();
        prop_assert_eq!(reduced.a().antisymmetry_defect(), 0.0);
        prop_assert_eq!(reduced.b().symmetry_defect(), 0.0);
        prop_assert!(build_hamiltonian(&reduced).unwrap().hermiticity_defect() <= 1e-12);
    }
}

#[test]
fn coupled_constraint_is_rejected() {
    let (g, pair) = pair_1d(10);
    let n = g.n_total();
    let rf = SparseOperator::from_triplets(1, n - 1, vec![(0, 3, 0.5)]).unwrap();
    let cs = ConstraintSet::new(n, vec![4], rf, SparseOperator::identity(1), VectorSeries::default()).unwrap();
    assert!(matches!(reduce_system(&pair, &cs), Err(Error::IncompatibleConstraints { .. })));
    let singular = SparseOperator::zeros(1, 1);
    let cs = ConstraintSet::new(n, vec![4], SparseOperator::zeros(1, n - 1), singular, VectorSeries::default()).unwrap();
    assert!(matches!(reduce_system(&pair, &cs), Err(Error::SingularConstraint)));
}

/// Dense exponential oracle: the full system with the constrained rows and
/// columns of `A` removed keeps those DOFs pinned at zero.
#[test]
fn reduced_evolution_equals_pinned_full_evolution() {
    let (g, pair) = pair_1d(24);
    let pinned = [0, 11, 23];
    let cs = dirichlet_constraints(&g, &pinned).unwrap();
    let reduced = reduce_system(&pair, &cs).unwrap();

    let entries = pair
        .a()
        .triplets()
        .iter()
        .copied()
        .filter(|(r, c, _)| !pinned.contains(r) && !pinned.contains(c))
        .collect();
    let a = SparseOperator::from_triplets(pair.len(), pair.len(), entries).unwrap();
    let full = OperatorPair::new(a, pair.b().clone(), pair.layout().clone()).unwrap();

    let w0: Vec<f64> = (0..g.n_total())
        .map(|k| {
            let x = g.dof_position(k).unwrap().1[0];
            if pinned.contains(&k) { 0.0 } else { (-60.0 * (x - 0.3).powi(2)).exp() }
        })
        .collect();
    let t = 0.7;
    let expected = ModalSolver::new(&full).unwrap().propagate(&w0, t).unwrap();

    let b = reduced.b().diagonal();
    let state = encode(&reduced.restrict(&w0).unwrap(), &b).unwrap();
    let out = evolve(&state, &build_hamiltonian(&reduced).unwrap(), t, &Default::default()).unwrap();
    let got = reduced.expand(&decode(&out, &b).unwrap(), t).unwrap();
    for (x, y) in got.iter().zip(&expected) {
        assert!((x - y).abs() < 1e-10, "{x} vs {y}");
    }
    assert!(pinned.iter().all(|&k| got[k] == 0.0));
}

#[test]
fn boundary_reflections_flip_or_keep_polarity() {
    let g = StaggeredGrid::new(1, &[(0.0, 1.0)], &[201]).unwrap();
    let pair = assemble_operator_pair(&g, &MaterialModel::acoustic_homogeneous(&g, 1.0, 1.0)).unwrap();
    let w0: Vec<f64> = (0..g.n_total())
        .map(|k| (-0.5 * ((g.dof_position(k).unwrap().1[0] - 0.6) / 0.03).powi(2)).exp())
        .collect();
    let reflected_sign = |cs: ConstraintSet| {
        let reduced = reduce_system(&pair, &cs).unwrap();
        let traj = leapfrog_evolve(
            &reduced,
            &reduced.restrict(&w0).unwrap(),
            None,
            default_dt(&reduced),
            0.6,
            &LeapfrogOptions { record_every: 0, ..Default::default() },
        )
        .unwrap();
        let w = reduced.expand(traj.final_state(), 0.6).unwrap();
        let peak = (0..g.n_u()).max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs())).unwrap();
        w[peak].signum()
    };
    let right = g.boundary_pressure_dofs(Side::Right).unwrap();
    assert_eq!(reflected_sign(dirichlet_constraints(&g, &right).unwrap()), -1.0);
    assert_eq!(reflected_sign(ConstraintSet::none(g.n_total())), 1.0);
}

#[test]
fn inhomogeneous_dirichlet_values_drive_the_interior() {
    let (g, pair) = pair_1d(33);
    let left = g.boundary_pressure_dofs(Side::Left).unwrap();
    let series = VectorSeries::new(vec![0.0, 0.1, 0.2, 1.0], vec![vec![0.0], vec![1.0], vec![1.0], vec![1.0]]).unwrap();
    let cs = dirichlet_constraints(&g, &left).unwrap().with_rhs(series).unwrap();
    let reduced = reduce_system(&pair, &cs).unwrap();
    assert!(!reduced.is_homogeneous());
    let src = |t: f64, s: &mut [f64]| reduced.induced_source_into(t, s).unwrap();
    let zero = vec![0.0; reduced.len()];
    let traj = leapfrog_evolve(&reduced, &zero, Some(&src), default_dt(&reduced), 0.5, &LeapfrogOptions::default()).unwrap();
    let w = reduced.expand(traj.final_state(), 0.5).unwrap();
    assert_eq!(w[left[0]], 1.0);
    // The boundary value has propagated into the domain.
    assert!(w[5] > 0.5, "interior pressure {}", w[5]);
}
