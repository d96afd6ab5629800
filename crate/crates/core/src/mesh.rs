//! Graded meshes on the truncated half-line `(0, r_max]`.
//!
//! Nodes follow `r_j = r_max · (j/N)^p` for `j = 1..=N` with `N = n · 2^level`,
//! so every refinement contains the previous mesh as its even-indexed nodes.
//! Quadrature is the trapezoid rule in the uniform variable `t = j/N`,
//! pulled back through `r = r_max · t^p`.

use serde::{Deserialize, Serialize};

use crate::{invalid, Error, Result};

pub const MIN_POINTS: usize = 16;
pub const DEFAULT_R_MAX: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedMesh {
    pub nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub grading_exponent: f64,
    pub level: usize,
    /// Node count at level 0.
    pub base_points: usize,
}

pub fn build_graded(
    r_max: f64,
    n_points: usize,
    grading_exponent: f64,
    level: usize,
) -> Result<GradedMesh> {
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::MeshTooCoarse(format!(
            "r_max must be positive, got {r_max}"
        )));
    }
    if n_points < MIN_POINTS {
        return Err(Error::MeshTooCoarse(format!(
            "n_points must be at least {MIN_POINTS}, got {n_points}"
        )));
    }
    if !(grading_exponent >= 1.0) || !grading_exponent.is_finite() {
        return Err(invalid(format!(
            "grading_exponent must be >= 1, got {grading_exponent}"
        )));
    }
    if level > 20 {
        return Err(invalid(format!("level {level} is too deep")));
    }
    let n = n_points << level;
    let p = grading_exponent;
    let dt = 1.0 / n as f64;
    let mut nodes = Vec::with_capacity(n);
    let mut quad_weights = Vec::with_capacity(n);
    for j in 1..=n {
        let t = j as f64 * dt;
        // the last node is pinned so that nodes[last] == r_max exactly
        let r = if j == n { r_max } else { r_max * t.powf(p) };
        nodes.push(r);
        quad_weights.push(r_max * p * t.powf(p - 1.0) * dt);
    }
    quad_weights[n - 1] *= 0.5;
    if p == 1.0 {
        // trapezoid over [0, r_1] with f(0) taken as f(r_1)
        quad_weights[0] += 0.5 * r_max * dt;
    }
    Ok(GradedMesh {
        r_min: nodes[0],
        r_max,
        grading_exponent: p,
        level,
        base_points: n_points,
        nodes,
        quad_weights,
    })
}

impl GradedMesh {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest gap between consecutive nodes (the gap `[0, r_min]` included).
    pub fn max_spacing(&self) -> f64 {
        let mut h = self.r_min;
        for w in self.nodes.windows(2) {
            h = h.max(w[1] - w[0]);
        }
        h
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }

    /// Next level of the same family.
    pub fn refined(&self) -> Result<GradedMesh> {
        build_graded(
            self.r_max,
            self.base_points,
            self.grading_exponent,
            self.level + 1,
        )
    }
}

pub fn integrate(mesh: &GradedMesh, samples: &[f64]) -> Result<f64> {
    if samples.len() != mesh.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for {} nodes",
            samples.len(),
            mesh.len()
        )));
    }
    Ok(mesh
        .quad_weights
        .iter()
        .zip(samples)
        .map(|(w, f)| w * f)
        .sum())
}

/// Meshes at levels `base.level .. base.level + depth`.
pub fn refinement_sequence(base: &GradedMesh, depth: usize) -> Result<Vec<GradedMesh>> {
    if depth < 2 {
        return Err(invalid(format!(
            "refinement depth must be >= 2, got {depth}"
        )));
    }
    let mut out = Vec::with_capacity(depth);
    out.push(base.clone());
    for _ in 1..depth {
        let next = out.last().unwrap().refined()?;
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_mesh_has_constant_spacing() {
        let m = build_graded(1.0, 16, 1.0, 0).unwrap();
        assert_eq!(m.len(), 16);
        for (j, r) in m.nodes.iter().enumerate() {
            assert!((r - (j + 1) as f64 / 16.0).abs() < 1e-15);
        }
        assert!((m.max_spacing() - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_grading_nodes() {
        let m = build_graded(1.0, 16, 2.0, 0).unwrap();
        assert_eq!(m.r_min, 1.0 / 256.0);
        assert!((m.nodes[4] - 25.0 / 256.0).abs() < 1e-15);
        assert_eq!(*m.nodes.last().unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_graded(1.0, 15, 1.0, 0).is_err());
        assert!(build_graded(0.0, 16, 1.0, 0).is_err());
        assert!(build_graded(1.0, 16, 0.5, 0).is_err());
    }

    #[test]
    fn level_two_refinement() {
        let m0 = build_graded(20.0, 512, 3.0, 0).unwrap();
        let m2 = build_graded(20.0, 512, 3.0, 2).unwrap();
        assert!(m2.r_min <= 0.25 * m0.r_min);
        assert!(m2.len() >= 4 * 512);
    }

    #[test]
    fn meshes_are_nested() {
        let m0 = build_graded(20.0, 32, 4.0, 0).unwrap();
        let m1 = m0.refined().unwrap();
        for (j, r) in m0.nodes.iter().enumerate() {
            assert!((m1.nodes[2 * j + 1] - r).abs() <= 1e-14 * r);
        }
    }

    #[test]
    fn integrates_linear_on_uniform_mesh() {
        let m = build_graded(1.0, 4096, 1.0, 0).unwrap();
        let v = integrate(&m, &m.sample(|r| r)).unwrap();
        assert!((v - 0.5).abs() < 1e-6);
    }

    #[test]
    fn integrates_exponential() {
        let m = build_graded(20.0, 2048, 2.0, 0).unwrap();
        let v = integrate(&m, &m.sample(|r| (-2.0 * r).exp())).unwrap();
        assert!((v - 0.5).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch_is_error() {
        let m = build_graded(1.0, 16, 1.0, 0).unwrap();
        assert!(integrate(&m, &[1.0; 3]).is_err());
    }

    #[test]
    fn sequence_doubles() {
        let base = build_graded(20.0, 64, 2.0, 0).unwrap();
        let seq = refinement_sequence(&base, 3).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq[1].len(), 128);
        assert_eq!(seq[2].len(), 256);
        for w in seq.windows(2) {
            assert!(w[1].r_min <= 0.5 * w[0].r_min);
        }
        assert!(refinement_sequence(&base, 1).is_err());
    }
}
