use edgelab_core::algebraic::{
    build_companion, build_random_split, random_isometry, run_trials, verify_split_isometry,
    PASS_TOL,
};
use edgelab_core::Error;
use proptest::prelude::*;

#[test]
fn hundred_seeded_instances() {
    let start = std::time::Instant::now();
    let s = run_trials(8, 8, 100, 2024).unwrap();
    assert_eq!((s.trials, s.passed, s.failed), (100, 100, 0));
    assert!(s.max_deviation <= PASS_TOL);
    assert_eq!(s.scaled_rejected, 100);
    // generous for unoptimised builds; release runs well under a second
    assert!(start.elapsed().as_secs_f64() < 30.0);
}

#[test]
fn trials_are_reproducible() {
    assert_eq!(
        run_trials(6, 5, 20, 9).unwrap(),
        run_trials(6, 5, 20, 9).unwrap()
    );
}

#[test]
fn scaled_isometry_rejected() {
    let s1 = build_random_split(4, 3, 11).unwrap();
    let s2 = build_companion(&s1, 12).unwrap();
    let phi = random_isometry(&s1, &s2, 13).unwrap();
    assert!(verify_split_isometry(&s1, &s2, &phi).unwrap().pass);
    assert!(matches!(
        verify_split_isometry(&s1, &s2, &(phi * 2.0)),
        Err(Error::InvalidParameter(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn induced_map_preserves_norms(dj in 1usize..9, d_o in 1usize..9, seed in any::<u64>()) {
        let s1 = build_random_split(dj, d_o, seed).unwrap();
        let s2 = build_companion(&s1, seed ^ 0xabcdef).unwrap();
        let phi = random_isometry(&s1, &s2, seed.wrapping_add(1)).unwrap();
        let c = verify_split_isometry(&s1, &s2, &phi).unwrap();
        prop_assert!(c.pass, "deviation {}", c.max_deviation);
    }
}
