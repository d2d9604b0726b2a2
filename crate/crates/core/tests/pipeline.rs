use dqchaos::cache::{load_or_compute, CacheOutcome};
use dqchaos::models::*;
use dqchaos::ssqt::*;
use dqchaos::trajectories::*;
use dqchaos::*;

fn kerr() -> ModelSpec {
    build_kerr_resonator(&KerrParams {
        detuning: 1.0,
        interaction: 0.5,
        drive: 1.2,
        loss: 1.0,
        cutoff: 6,
    })
    .unwrap()
}

#[test]
fn cached_eigenbasis_gives_identical_ssqt() {
    let dir = tempfile::tempdir().unwrap();
    let m = kerr();
    let (fresh, o1) = load_or_compute(&m, dir.path(), false).unwrap();
    let (cached, o2) = load_or_compute(&m, dir.path(), false).unwrap();
    assert_eq!(o1, CacheOutcome::Miss);
    assert_eq!(o2, CacheOutcome::Hit);
    assert_eq!(fresh.eigenvalues(), cached.eigenvalues());

    let cfg = SsqtConfig {
        t_snapshot: 3.0,
        trajectories: 6,
        base_seed: 4,
        initial: InitialState::coherent(C64::new(0.8, 0.1)),
        dynamics: TrajectoryConfig::new(1e-3),
        cmin: CminChoice::default(),
        bulk: BulkChoice::Off,
        pooled: true,
    };
    let engine = TrajectoryEngine::new(&m);
    let a = ssqt_statistics(&fresh, &engine, &cfg).unwrap();
    let b = ssqt_statistics(&cached, &engine, &cfg).unwrap();
    assert_eq!(a.c_min, b.c_min);
    assert_eq!(a.selected_union, b.selected_union);
    assert_eq!(a.n_lambda.mean, b.n_lambda.mean);
    assert!(a.pooled.is_some());
}

#[test]
fn trajectory_average_approaches_propagated_state() {
    let m = kerr();
    let spec = diagonalize(assemble(&m).unwrap(), false).unwrap();
    let engine = TrajectoryEngine::new(&m);
    let psi0 = dqchaos::states::coherent(7, C64::new(0.5, 0.0));
    let t = 1.5;
    let res = ensemble_average(
        &engine,
        &InitialState::given(&psi0),
        &[t],
        400,
        1,
        &TrajectoryConfig::new(5e-4).with_integrator(Integrator::SecondOrder),
        &[],
        true,
    )
    .unwrap();
    let avg = &res.density.as_ref().unwrap()[0];
    let exact = spec
        .propagate(&Operator::projector(m.space(), &psi0).unwrap(), t)
        .unwrap();
    // 400 samples: entries fluctuate at the 1/sqrt(400) level.
    assert!(avg.max_abs_diff(&exact) < 0.08, "{}", avg.max_abs_diff(&exact));
    assert!((avg.trace().re - 1.0).abs() < 1e-12);
}

#[test]
fn eigenvalue_files_round_trip() {
    let m = kerr();
    let spec = diagonalize(assemble(&m).unwrap(), false).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("e.csv");
    dqchaos::io::write_eigenvalues_file(&p, spec.eigenvalues(), Some("first\nsecond")).unwrap();
    let back = dqchaos::io::read_eigenvalues_file(&p).unwrap();
    assert_eq!(back.len(), spec.dim());
    for (a, b) in back.iter().zip(spec.eigenvalues()) {
        assert!((a - b).norm() <= 1e-15 * b.norm().max(1.0));
    }
}
