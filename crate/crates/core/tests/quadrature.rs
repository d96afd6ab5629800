use edgelab_core::fredholm::bump;
use edgelab_core::mesh::{build_graded, integrate, refinement_sequence};
use proptest::prelude::*;

// Γ(0.2)·2^{−0.2}, adaptive quadrature
const GAMMA_ORACLE: f64 = 3.9965615794850272;

#[test]
fn singular_integrand_matches_oracle() {
    let mut errs = Vec::new();
    for level in 0..4 {
        let m = build_graded(20.0, 512, 8.0, level).unwrap();
        let v = integrate(&m, &m.sample(|r| r.powf(-0.8) * (-2.0 * r).exp())).unwrap();
        errs.push((v - GAMMA_ORACLE).abs() / GAMMA_ORACLE);
    }
    // the missing piece ∫_0^{r_min} shrinks with r_min^{0.2}
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] < 1e-2, "{errs:?}");
}

#[test]
fn exponential_integral() {
    let m = build_graded(20.0, 2048, 2.0, 0).unwrap();
    let v = integrate(&m, &m.sample(|r| (-2.0 * r).exp())).unwrap();
    assert!((v - 0.5).abs() < 1e-6, "{v}");
}

#[test]
fn exponential_stable_across_levels() {
    let base = build_graded(20.0, 64, 4.0, 0).unwrap();
    let seq = refinement_sequence(&base, 4).unwrap();
    let vals: Vec<f64> = seq
        .iter()
        .map(|m| integrate(m, &m.sample(|r| (-2.0 * r).exp())).unwrap())
        .collect();
    for w in vals[1..].windows(2) {
        assert!((w[1] - w[0]).abs() < 1e-8, "{vals:?}");
    }
}

#[test]
fn second_order_for_compact_support() {
    let exact = 0.22199690808403972; // ∫ bump over (0,1), adaptive quadrature
    let f = |r: f64| bump(r - 2.0);
    let errs: Vec<f64> = (0..5)
        .map(|l| {
            let m = build_graded(20.0, 64, 3.0, l).unwrap();
            (integrate(&m, &m.sample(f)).unwrap() - exact).abs()
        })
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 3.5, "{errs:?}");
    }
}

#[test]
fn grading_clusters_at_tip() {
    for p in [1.5, 2.0, 4.0] {
        let m = build_graded(20.0, 64, p, 1).unwrap();
        let n = m.len();
        assert!(m.nodes[1] - m.nodes[0] < m.nodes[n - 1] - m.nodes[n - 2]);
    }
}

proptest! {
    #[test]
    fn quadrature_is_linear(a in -10.0..10.0f64, b in -10.0..10.0f64, p in 1.0..5.0f64) {
        let m = build_graded(20.0, 64, p, 0).unwrap();
        let f = m.sample(|r| (-r).exp());
        let g = m.sample(|r| r.sin());
        let h: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
        let lhs = integrate(&m, &h).unwrap();
        let rhs = a * integrate(&m, &f).unwrap() + b * integrate(&m, &g).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn refinement_invariants(n in 16usize..200, p in 1.0..5.0f64) {
        let base = build_graded(20.0, n, p, 0).unwrap();
        let seq = refinement_sequence(&base, 3).unwrap();
        for w in seq.windows(2) {
            prop_assert!(w[1].r_min <= 0.5 * w[0].r_min * (1.0 + 1e-12));
            prop_assert!(w[1].len() >= 2 * w[0].len());
            prop_assert!(w[1].quad_weights.iter().all(|&x| x > 0.0));
            prop_assert_eq!(*w[1].nodes.last().unwrap(), 20.0);
        }
    }
}
