//! Finite-dimensional check of the splitting lemma: for split exact
//! sequences `0 → J_i → A_i → O → 0` and an isometry `φ: J₁ → J₂`, the map
//! `ψ(j, o) = (φ(j), o)` is an isometric isomorphism `A₁ → A₂` inducing an
//! isometry on the quotients.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSequence {
    pub dim_j: usize,
    pub dim_o: usize,
    pub gram_j: DMatrix<f64>,
    pub gram_o: DMatrix<f64>,
    pub gram_a: DMatrix<f64>,
    /// `J → A`
    pub inclusion: DMatrix<f64>,
    /// `A → J`, left inverse of the inclusion
    pub retraction: DMatrix<f64>,
    /// `A → O`
    pub quotient: DMatrix<f64>,
    /// `O → A`, right inverse of the quotient
    pub section: DMatrix<f64>,
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &m * m.transpose() + DMatrix::identity(n, n) * (0.5 + n as f64 * 0.1)
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = (a.nrows(), b.nrows());
    let mut m = DMatrix::zeros(p + q, p + q);
    m.view_mut((0, 0), (p, p)).copy_from(a);
    m.view_mut((p, p), (q, q)).copy_from(b);
    m
}

impl SplitSequence {
    pub fn from_grams(gram_j: DMatrix<f64>, gram_o: DMatrix<f64>) -> Result<Self> {
        let (dj, d_o) = (gram_j.nrows(), gram_o.nrows());
        if dj < 1 || d_o < 1 {
            return Err(invalid("split dimensions must be at least 1"));
        }
        if gram_j.clone().cholesky().is_none() || gram_o.clone().cholesky().is_none() {
            return Err(invalid(
                "inner products must be symmetric positive-definite",
            ));
        }
        let da = dj + d_o;
        let mut inclusion = DMatrix::zeros(da, dj);
        inclusion.view_mut((0, 0), (dj, dj)).fill_with_identity();
        let mut section = DMatrix::zeros(da, d_o);
        section.view_mut((dj, 0), (d_o, d_o)).fill_with_identity();
        Ok(Self {
            dim_j: dj,
            dim_o: d_o,
            gram_a: block_diag(&gram_j, &gram_o),
            retraction: inclusion.transpose(),
            quotient: section.transpose(),
            inclusion,
            section,
            gram_j,
            gram_o,
        })
    }

    pub fn dim_a(&self) -> usize {
        self.dim_j + self.dim_o
    }

    /// Largest violation of the structural invariants; zero for exact data.
    pub fn invariant_defect(&self) -> f64 {
        let dj = self.dim_j;
        let d_o = self.dim_o;
        let id_j = DMatrix::<f64>::identity(dj, dj);
        let id_o = DMatrix::<f64>::identity(d_o, d_o);
        let mut worst: f64 = 0.0;
        worst = worst.max((&self.retraction * &self.inclusion - &id_j).amax());
        worst = worst.max((&self.quotient * &self.section - &id_o).amax());
        worst = worst.max((&self.quotient * &self.inclusion).amax());
        let restricted_j = self.inclusion.transpose() * &self.gram_a * &self.inclusion;
        let restricted_o = self.section.transpose() * &self.gram_a * &self.section;
        worst = worst.max((restricted_j - &self.gram_j).amax());
        worst = worst.max((restricted_o - &self.gram_o).amax());
        worst = worst.max((self.inclusion.transpose() * &self.gram_a * &self.section).amax());
        worst = worst.max((&self.gram_a - self.gram_a.transpose()).amax());
        worst
    }
}

pub fn build_random_split(dim_j: usize, dim_o: usize, seed: u64) -> Result<SplitSequence> {
    if dim_j < 1 || dim_o < 1 {
        return Err(invalid(format!(
            "split dimensions must be at least 1, got ({dim_j}, {dim_o})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gram_j = random_spd(dim_j, &mut rng);
    let gram_o = random_spd(dim_o, &mut rng);
    SplitSequence::from_grams(gram_j, gram_o)
}

/// A second sequence over the same quotient `O`, with a fresh inner product on `J`.
pub fn build_companion(s: &SplitSequence, seed: u64) -> Result<SplitSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    SplitSequence::from_grams(random_spd(s.dim_j, &mut rng), s.gram_o.clone())
}

/// `φ = L₂^{−T} Q L₁ᵀ` with `G_i = L_i L_iᵀ` and a random orthogonal `Q`;
/// then `φᵀ G₂ φ = G₁`.
pub fn random_isometry(s1: &SplitSequence, s2: &SplitSequence, seed: u64) -> Result<DMatrix<f64>> {
    if s1.dim_j != s2.dim_j {
        return Err(Error::DimensionMismatch(format!(
            "dim_J {} vs {}",
            s1.dim_j, s2.dim_j
        )));
    }
    let n = s1.dim_j;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let q = g.qr().q();
    let l1 = s1
        .gram_j
        .clone()
        .cholesky()
        .ok_or_else(|| invalid("G_J1 not SPD"))?
        .l();
    let l2 = s2
        .gram_j
        .clone()
        .cholesky()
        .ok_or_else(|| invalid("G_J2 not SPD"))?
        .l();
    let rhs = q * l1.transpose();
    l2.transpose()
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Singular("triangular solve failed".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCheck {
    pub max_deviation: f64,
    pub pass: bool,
}

pub const ISOMETRY_PRE_TOL: f64 = 1e-12;
pub const PASS_TOL: f64 = 1e-10;

fn rel(m: &DMatrix<f64>, scale: &DMatrix<f64>) -> f64 {
    m.norm() / scale.norm()
}

fn a_norm(g: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    (v.transpose() * g * v)[(0, 0)].sqrt()
}

pub fn verify_split_isometry(
    s1: &SplitSequence,
    s2: &SplitSequence,
    phi: &DMatrix<f64>,
) -> Result<SplitCheck> {
    if s1.dim_j != s2.dim_j || s1.dim_o != s2.dim_o {
        return Err(Error::DimensionMismatch(format!(
            "({}, {}) vs ({}, {})",
            s1.dim_j, s1.dim_o, s2.dim_j, s2.dim_o
        )));
    }
    if phi.nrows() != s2.dim_j || phi.ncols() != s1.dim_j {
        return Err(Error::DimensionMismatch(format!(
            "phi is {}x{}, expected {}x{}",
            phi.nrows(),
            phi.ncols(),
            s2.dim_j,
            s1.dim_j
        )));
    }
    // ‖φ e_k‖ = ‖e_k‖ and polarisation on the basis
    let pulled = phi.transpose() * &s2.gram_j * phi;
    let pre = rel(&(&pulled - &s1.gram_j), &s1.gram_j);
    if !(pre <= ISOMETRY_PRE_TOL) {
        return Err(invalid(format!(
            "phi is not an isometry J1 -> J2 (relative defect {pre:e})"
        )));
    }
    let (dj, d_o) = (s1.dim_j, s1.dim_o);
    let mut psi = DMatrix::zeros(s2.dim_a(), s1.dim_a());
    psi.view_mut((0, 0), (dj, dj)).copy_from(phi);
    psi.view_mut((dj, dj), (d_o, d_o)).fill_with_identity();

    let mut worst: f64 = 0.0;
    // bijectivity
    let sv = psi.clone().svd(false, false).singular_values;
    let bijective = sv.min() > 1e-12 * sv.max();
    // ψ carries J₁ into J₂ and commutes with the quotient maps
    worst = worst.max((&s2.quotient * &psi * &s1.inclusion).amax());
    worst = worst.max((&s2.quotient * &psi - &s1.quotient).amax());
    // inner product preserved on all of A
    let gram_pull = psi.transpose() * &s2.gram_a * &psi;
    worst = worst.max(rel(&(&gram_pull - &s1.gram_a), &s1.gram_a));
    let mut rng = ChaCha8Rng::seed_from_u64(0xa11ce);
    for _ in 0..100 {
        let a = DMatrix::from_fn(s1.dim_a(), 1, |_, _| rng.gen_range(-1.0..1.0));
        let n1 = a_norm(&s1.gram_a, &a);
        let n2 = a_norm(&s2.gram_a, &(&psi * &a));
        worst = worst.max((n2 - n1).abs() / n1);
    }
    // induced quotient map O₁ → O₂
    let induced = &s2.quotient * &psi * &s1.section;
    let q_pull = induced.transpose() * &s2.gram_o * &induced;
    worst = worst.max(rel(&(&q_pull - &s1.gram_o), &s1.gram_o));
    Ok(SplitCheck {
        max_deviation: worst,
        pass: bijective && worst <= PASS_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub max_deviation: f64,
    /// Trials in which `2φ` was refused by the isometry precondition.
    pub scaled_rejected: usize,
    pub seed: u64,
}

/// Random instances with `dim_J ≤ max_j`, `dim_O ≤ max_o`.
pub fn run_trials(max_j: usize, max_o: usize, trials: usize, seed: u64) -> Result<TrialSummary> {
    if max_j < 1 || max_o < 1 {
        return Err(invalid("dimensions must be at least 1"));
    }
    if trials < 1 {
        return Err(invalid("need at least one trial"));
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = seed
                .wrapping_mul(0x2545_f491_4f6c_dd1d)
                .wrapping_add(t as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let dj = rng.gen_range(1..=max_j);
            let d_o = rng.gen_range(1..=max_o);
            let s1 = build_random_split(dj, d_o, rng.gen())?;
            let s2 = build_companion(&s1, rng.gen())?;
            let phi = random_isometry(&s1, &s2, rng.gen())?;
            let check = verify_split_isometry(&s1, &s2, &phi)?;
            let scaled = verify_split_isometry(&s1, &s2, &(phi * 2.0)).is_err();
            Ok((check, scaled))
        })
        .collect::<Result<Vec<_>>>()?;
    let passed = outcomes.iter().filter(|o| o.0.pass).count();
    Ok(TrialSummary {
        trials,
        passed,
        failed: trials - passed,
        max_deviation: outcomes
            .iter()
            .map(|o| o.0.max_deviation)
            .fold(0.0, f64::max),
        scaled_rejected: outcomes.iter().filter(|o| o.1).count(),
        seed,
    })
}
