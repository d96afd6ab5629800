//! Weighted cone Sobolev spaces `K^{s,γ}` on graded meshes.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::fit_slope;
use crate::mesh::{integrate, GradedMesh};
use crate::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSpace {
    pub s: u8,
    pub gamma: f64,
    pub mesh: GradedMesh,
}

impl WeightedSpace {
    pub fn new(s: u8, gamma: f64, mesh: GradedMesh) -> Result<Self> {
        if s > 2 {
            return Err(invalid(format!("Sobolev order must be 0, 1 or 2, got {s}")));
        }
        if !gamma.is_finite() {
            return Err(invalid("gamma must be finite"));
        }
        Ok(Self { s, gamma, mesh })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Member,
    Divergent,
    Borderline,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Member => "member",
            Verdict::Divergent => "divergent",
            Verdict::Borderline => "borderline",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub verdict: Verdict,
    pub norm_trace: Vec<(usize, f64)>,
    pub fitted_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MembershipPolicy {
    /// Bound on last/first norm ratio for a bounded trace.
    pub tol_trend: f64,
    /// Smallest fitted exponent counted as divergence.
    pub rate_floor: f64,
}

impl Default for MembershipPolicy {
    fn default() -> Self {
        Self {
            tol_trend: 0.05,
            rate_floor: 0.05,
        }
    }
}

/// First derivative, second order on non-uniform nodes.
pub fn first_derivative(r: &[f64], u: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    for j in 1..n - 1 {
        let hm = r[j] - r[j - 1];
        let hp = r[j + 1] - r[j];
        d[j] = -hp / (hm * (hm + hp)) * u[j - 1]
            + (hp - hm) / (hm * hp) * u[j]
            + hm / (hp * (hm + hp)) * u[j + 1];
    }
    let (h1, h2) = (r[1] - r[0], r[2] - r[1]);
    d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * u[0] + (h1 + h2) / (h1 * h2) * u[1]
        - h1 / (h2 * (h1 + h2)) * u[2];
    let (h1, h2) = (r[n - 1] - r[n - 2], r[n - 2] - r[n - 3]);
    d[n - 1] = (2.0 * h1 + h2) / (h1 * (h1 + h2)) * u[n - 1] - (h1 + h2) / (h1 * h2) * u[n - 2]
        + h1 / (h2 * (h1 + h2)) * u[n - 3];
    d
}

/// Second derivative; the end values reuse the parabola through the three end nodes.
pub fn second_derivative(r: &[f64], u: &[f64]) -> Vec<f64> {
    let n = r.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    for j in 1..n - 1 {
        let hm = r[j] - r[j - 1];
        let hp = r[j + 1] - r[j];
        d[j] = 2.0 / (hm + hp) * ((u[j + 1] - u[j]) / hp - (u[j] - u[j - 1]) / hm);
    }
    d[0] = d[1];
    d[n - 1] = d[n - 2];
    d
}

fn check_samples(space: &WeightedSpace, samples: &[f64]) -> Result<()> {
    if samples.len() != space.mesh.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for {} nodes",
            samples.len(),
            space.mesh.len()
        )));
    }
    if let Some(j) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteRule {
            r: space.mesh.nodes[j],
        });
    }
    Ok(())
}

pub fn weighted_norm(space: &WeightedSpace, samples: &[f64]) -> Result<f64> {
    check_samples(space, samples)?;
    let r = &space.mesh.nodes;
    let weight: Vec<f64> = r.iter().map(|x| x.powf(-2.0 * space.gamma)).collect();
    let mut terms = vec![samples.to_vec()];
    if space.s >= 1 {
        terms.push(first_derivative(r, samples));
    }
    if space.s >= 2 {
        terms.push(second_derivative(r, samples));
    }
    let mut total = 0.0;
    for d in &terms {
        let f: Vec<f64> = d.iter().zip(&weight).map(|(v, w)| w * v * v).collect();
        total += integrate(&space.mesh, &f)?;
    }
    Ok(total.sqrt())
}

pub fn membership_test<F: Fn(f64) -> f64>(
    u_rule: F,
    s: u8,
    gamma: f64,
    meshes: &[GradedMesh],
) -> Result<MembershipVerdict> {
    membership_test_with(u_rule, s, gamma, meshes, MembershipPolicy::default())
}

pub fn membership_test_with<F: Fn(f64) -> f64>(
    u_rule: F,
    s: u8,
    gamma: f64,
    meshes: &[GradedMesh],
    policy: MembershipPolicy,
) -> Result<MembershipVerdict> {
    if meshes.len() < 3 {
        return Err(invalid(format!(
            "membership needs at least 3 refinement levels, got {}",
            meshes.len()
        )));
    }
    let mut norm_trace = Vec::with_capacity(meshes.len());
    for m in meshes {
        let space = WeightedSpace::new(s, gamma, m.clone())?;
        let v = weighted_norm(&space, &m.sample(&u_rule))?;
        norm_trace.push((m.level, v));
    }
    let norms: Vec<f64> = norm_trace.iter().map(|x| x.1).collect();
    // growth of norm² between levels scales like r_min^{-ρ}, whatever the finite part
    let increments: Vec<f64> = norms
        .windows(2)
        .map(|w| w[1] * w[1] - w[0] * w[0])
        .collect();
    let fitted_rate = if increments.iter().all(|&d| d > 0.0) {
        let x: Vec<f64> = meshes[1..].iter().map(|m| m.r_min.ln()).collect();
        let y: Vec<f64> = increments.iter().map(|d| d.ln()).collect();
        Some(-fit_slope(&x, &y))
    } else {
        None
    };
    let first = norms[0];
    let last = *norms.last().unwrap();
    let bounded = last <= (1.0 + policy.tol_trend) * first;
    let increasing = norms.windows(2).all(|w| w[1] > w[0]);
    let verdict = match fitted_rate {
        _ if bounded => Verdict::Member,
        Some(rho) if rho <= -policy.rate_floor => Verdict::Member,
        Some(rho) if increasing && rho >= policy.rate_floor => Verdict::Divergent,
        _ => Verdict::Borderline,
    };
    Ok(MembershipVerdict {
        verdict,
        norm_trace,
        fitted_rate,
    })
}

/// Membership in the dual space of order `2 − s` and weight `2 − γ`.
pub fn dual_membership_test<F: Fn(f64) -> f64>(
    u_rule: F,
    s: u8,
    gamma: f64,
    meshes: &[GradedMesh],
) -> Result<MembershipVerdict> {
    if s > 2 {
        return Err(invalid(format!("Sobolev order must be 0, 1 or 2, got {s}")));
    }
    membership_test(u_rule, 2 - s, 2.0 - gamma, meshes)
}

/// The inverse pair `M_γ v = r^{−γ} v` and `M_γ⁻¹ w = r^{γ} w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conjugation {
    pub forward: Vec<f64>,
    pub inverse: Vec<f64>,
}

impl Conjugation {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.forward).map(|(a, b)| a * b).collect()
    }

    pub fn apply_inverse(&self, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.inverse).map(|(a, b)| a * b).collect()
    }
}

pub fn conjugation_to_reference(space: &WeightedSpace) -> Conjugation {
    let g = space.gamma;
    let (forward, inverse) = if g == 0.0 {
        (vec![1.0; space.mesh.len()], vec![1.0; space.mesh.len()])
    } else {
        (
            space.mesh.nodes.iter().map(|r| r.powf(-g)).collect(),
            space.mesh.nodes.iter().map(|r| r.powf(g)).collect(),
        )
    };
    Conjugation { forward, inverse }
}

/// Norm of the unweighted reference space `K^{0,0}`.
pub fn reference_norm(mesh: &GradedMesh, w: &[f64]) -> Result<f64> {
    let sq: Vec<f64> = w.iter().map(|x| x * x).collect();
    Ok(integrate(mesh, &sq)?.sqrt())
}

pub fn gram_diagonal(space: &WeightedSpace) -> Vec<f64> {
    space
        .mesh
        .quad_weights
        .iter()
        .zip(&space.mesh.nodes)
        .map(|(w, r)| w * r.powf(-2.0 * space.gamma))
        .collect()
}

pub fn gram_matrix(space: &WeightedSpace) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(gram_diagonal(space)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_graded, refinement_sequence};
    use nalgebra::DVector;
    use proptest::prelude::*;

    fn space(s: u8, gamma: f64) -> WeightedSpace {
        WeightedSpace::new(s, gamma, build_graded(20.0, 2048, 3.0, 0).unwrap()).unwrap()
    }

    #[test]
    fn norm_of_exponential() {
        let sp = space(0, 0.0);
        let v = weighted_norm(&sp, &sp.mesh.sample(|r| (-r).exp())).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn zero_has_zero_norm() {
        let sp = space(2, 0.3);
        assert_eq!(weighted_norm(&sp, &vec![0.0; sp.mesh.len()]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_finite_samples() {
        let sp = space(0, 0.0);
        let mut v = vec![1.0; sp.mesh.len()];
        v[3] = f64::NAN;
        assert!(matches!(
            weighted_norm(&sp, &v),
            Err(Error::NonFiniteRule { .. })
        ));
        assert!(weighted_norm(&sp, &[1.0]).is_err());
    }

    #[test]
    fn derivatives_exact_on_quadratics() {
        let m = build_graded(3.0, 32, 2.0, 0).unwrap();
        let u = m.sample(|r| 1.0 + 2.0 * r - 0.5 * r * r);
        let d1 = first_derivative(&m.nodes, &u);
        let d2 = second_derivative(&m.nodes, &u);
        for (j, r) in m.nodes.iter().enumerate() {
            assert!((d1[j] - (2.0 - r)).abs() < 1e-9, "j={j}");
            assert!((d2[j] + 1.0).abs() < 1e-8, "j={j}");
        }
    }

    #[test]
    fn conjugation_identity_at_zero_weight() {
        let sp = space(0, 0.0);
        let c = conjugation_to_reference(&sp);
        assert!(c.forward.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn conjugation_cancels_power() {
        let sp = space(0, 0.4);
        let c = conjugation_to_reference(&sp);
        let v = sp.mesh.sample(|r| r.powf(0.4) * (-r).exp());
        let w = c.apply(&v);
        for (wi, r) in w.iter().zip(&sp.mesh.nodes) {
            assert!((wi - (-r).exp()).abs() < 1e-14);
        }
        assert!((reference_norm(&sp.mesh, &w).unwrap() - 0.5f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn gram_quadratic_form() {
        let sp = space(0, 0.0);
        let g = gram_matrix(&sp);
        let u = DVector::from_vec(sp.mesh.sample(|r| (-r).exp()));
        let q = (u.transpose() * &g * &u)[(0, 0)];
        assert!((q - 0.5).abs() < 1e-4);
        assert_eq!(g[(3, 3)], sp.mesh.quad_weights[3]);
    }

    #[test]
    fn too_few_levels() {
        let base = build_graded(20.0, 64, 3.0, 0).unwrap();
        let seq = refinement_sequence(&base, 2).unwrap();
        assert!(membership_test(|r| (-r).exp(), 0, 0.0, &seq).is_err());
    }

    proptest! {
        #[test]
        fn conjugation_isometry_and_round_trip(
            gamma in -1.0f64..2.0,
            v in proptest::collection::vec(-1.0f64..1.0, 64),
        ) {
            let sp = WeightedSpace::new(0, gamma, build_graded(5.0, 64, 2.0, 0).unwrap()).unwrap();
            let c = conjugation_to_reference(&sp);
            let nw = weighted_norm(&sp, &v).unwrap();
            let nr = reference_norm(&sp.mesh, &c.apply(&v)).unwrap();
            prop_assert!((nw - nr).abs() <= 1e-12 * nw.max(1e-300));
            let back = c.apply_inverse(&c.apply(&v));
            for (a, b) in back.iter().zip(&v) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
            }
            let g = gram_diagonal(&sp);
            let q: f64 = v.iter().zip(&g).map(|(x, w)| w * x * x).sum();
            prop_assert!((q - nw * nw).abs() <= 1e-12 * q.max(1e-300));
        }

        #[test]
        fn norm_axioms(
            s in 0u8..3,
            gamma in -0.5f64..1.5,
            a in -3.0f64..3.0,
            u in proptest::collection::vec(-1.0f64..1.0, 48),
            v in proptest::collection::vec(-1.0f64..1.0, 48),
        ) {
            let sp = WeightedSpace::new(s, gamma, build_graded(4.0, 48, 2.0, 0).unwrap()).unwrap();
            let nu = weighted_norm(&sp, &u).unwrap();
            let nv = weighted_norm(&sp, &v).unwrap();
            let au: Vec<f64> = u.iter().map(|x| a * x).collect();
            let sum: Vec<f64> = u.iter().zip(&v).map(|(x, y)| x + y).collect();
            let nau = weighted_norm(&sp, &au).unwrap();
            prop_assert!((nau - a.abs() * nu).abs() <= 1e-12 * nu.max(1e-300) * a.abs().max(1.0));
            prop_assert!(weighted_norm(&sp, &sum).unwrap() <= (nu + nv) * (1.0 + 1e-12));
            prop_assert!(nu > 0.0 || u.iter().all(|&x| x == 0.0));
        }
    }
}
