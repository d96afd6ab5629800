use edgelab_core::edgesym::{
    adjoint, assemble, assemble_with_order, check_twisted_homogeneity, homogeneity_deviation,
};
use edgelab_core::fredholm::{analyze, CaseLabel, TrendPolicy};
use edgelab_core::mesh::{build_graded, refinement_sequence, GradedMesh};

const GAMMAS: [f64; 7] = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75];

fn seq(r_max: f64, n: usize, levels: usize) -> Vec<GradedMesh> {
    refinement_sequence(&build_graded(r_max, n, 4.0, 0).unwrap(), levels).unwrap()
}

fn expected(g: f64) -> CaseLabel {
    match g {
        g if g < 0.5 => CaseLabel::Case1,
        g if g == 0.5 || g == 1.5 => CaseLabel::Case4NonFredholm,
        g if g > 1.5 => CaseLabel::Case2,
        _ => CaseLabel::Case3,
    }
}

fn labels(r_max: f64, xi: f64, sigma0: f64) -> Vec<CaseLabel> {
    let ms = seq(r_max, 128, 4);
    GAMMAS
        .iter()
        .map(|&g| {
            let op = assemble(g, xi, sigma0, &ms[0]).unwrap();
            analyze(&op, &ms, &TrendPolicy::default())
                .unwrap()
                .case_label
        })
        .collect()
}

#[test]
fn regimes_over_gamma() {
    let want: Vec<CaseLabel> = GAMMAS.iter().map(|&g| expected(g)).collect();
    assert_eq!(labels(20.0, 1.0, 1.0), want);
}

#[test]
fn dimensions_follow_labels() {
    let ms = seq(20.0, 128, 4);
    for g in GAMMAS {
        let r = analyze(
            &assemble(g, 1.0, 1.0, &ms[0]).unwrap(),
            &ms,
            &TrendPolicy::default(),
        )
        .unwrap();
        let dims = match r.case_label {
            CaseLabel::Case1 => (1, 0),
            CaseLabel::Case2 => (0, 1),
            _ => (0, 0),
        };
        assert_eq!((r.kernel_dim, r.cokernel_dim), dims, "gamma={g}");
        assert_eq!(r.smin_trace.len(), 4);
    }
}

#[test]
fn labels_stable_under_truncation_conductivity_and_frequency() {
    let base = labels(20.0, 1.0, 1.0);
    assert_eq!(labels(40.0, 1.0, 1.0), base);
    for s0 in [0.5, 3.0] {
        assert_eq!(labels(20.0, 1.0, s0), base, "sigma0={s0}");
    }
    assert_eq!(labels(20.0, 2.0, 1.0), base);
}

#[test]
fn order_bookkeeping_does_not_change_labels() {
    let ms = seq(20.0, 128, 4);
    for g in GAMMAS {
        let a = analyze(
            &assemble_with_order(g, 1.0, 1.0, &ms[0], 2).unwrap(),
            &ms,
            &TrendPolicy::default(),
        );
        let b = analyze(
            &assemble_with_order(g, 1.0, 1.0, &ms[0], 0).unwrap(),
            &ms,
            &TrendPolicy::default(),
        );
        assert_eq!(a.unwrap().case_label, b.unwrap().case_label, "gamma={g}");
    }
}

#[test]
fn kernel_vector_aligns_with_profile() {
    let ms = seq(20.0, 128, 4);
    let r = analyze(
        &assemble(0.25, 1.0, 1.0, &ms[0]).unwrap(),
        &ms,
        &TrendPolicy::default(),
    )
    .unwrap();
    let a: Vec<f64> = r.diagnostics.iter().map(|d| d.kernel_angle).collect();
    assert!(a[3] <= 1e-2 && a[3] <= a[2], "{a:?}");
}

#[test]
fn adjoint_kernel_is_cokernel_profile() {
    let ms = seq(20.0, 512, 4);
    let op = adjoint(&assemble(1.75, 1.0, 1.0, &ms[0]).unwrap());
    let r = analyze(&op, &ms, &TrendPolicy::default()).unwrap();
    assert_eq!(r.case_label, CaseLabel::Case1);
    let a: Vec<f64> = r.diagnostics.iter().map(|d| d.kernel_angle).collect();
    assert!(a[3] <= 1e-3, "{a:?}");
    assert!(a.windows(2).all(|w| w[1] <= w[0]), "{a:?}");
}

#[test]
fn kernel_residual_order() {
    let res: Vec<f64> = seq(20.0, 128, 4)
        .iter()
        .map(|m| assemble(0.25, 1.0, 1.0, m).unwrap().kernel_residual())
        .collect();
    for w in res.windows(2) {
        // order in h: h halves per level
        assert!((w[0] / w[1]).log2() >= 1.8, "{res:?}");
    }
}

fn ratios_at_least(d: &[f64], min: f64) -> bool {
    d.windows(2).all(|w| w[0] / w[1] >= min)
}

#[test]
fn twisted_homogeneity_converges() {
    let quadratic = refinement_sequence(&build_graded(20.0, 128, 2.0, 0).unwrap(), 4).unwrap();
    for g in [0.25, 1.0, 1.75] {
        let d: Vec<f64> = quadratic
            .iter()
            .map(|m| check_twisted_homogeneity(g, 1.0, 2.0, m).unwrap())
            .collect();
        assert!(ratios_at_least(&d, 3.5), "gamma={g}: {d:?}");
    }
    let ms = seq(20.0, 128, 4);
    for g in [0.25, 1.0] {
        let d: Vec<f64> = ms
            .iter()
            .map(|m| check_twisted_homogeneity(g, 1.0, 2.0, m).unwrap())
            .collect();
        assert!(ratios_at_least(&d, 3.5), "gamma={g}: {d:?}");
    }
}

#[test]
fn homogeneity_single_function() {
    let m = build_graded(20.0, 1024, 4.0, 0).unwrap();
    let d = homogeneity_deviation(0.25, 1.0, 2.0, &m, |r| (-3.0 * r).exp()).unwrap();
    assert!(d <= 1e-3, "{d}");
    assert_eq!(check_twisted_homogeneity(0.25, 1.0, 1.0, &m).unwrap(), 0.0);
}
