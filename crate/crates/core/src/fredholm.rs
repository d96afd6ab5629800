//! Kernel/cokernel detection from singular-value trends under refinement,
//! case classification, and bordered augmentations.

use serde::{Deserialize, Serialize};

use crate::edgesym::{adjoint, assemble_with_order, EdgeSymbolOperator};
use crate::linalg::{
    line_angle, norm2, smallest_singular, BorderedTridiag, SquareOperator, TridiagOperator,
};
use crate::mesh::{integrate, GradedMesh};
use crate::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    Case1,
    Case2,
    Case3,
    #[serde(rename = "Case4_nonFredholm")]
    Case4NonFredholm,
}

impl CaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::Case1 => "Case1",
            CaseLabel::Case2 => "Case2",
            CaseLabel::Case3 => "Case3",
            CaseLabel::Case4NonFredholm => "Case4_nonFredholm",
        }
    }
}

impl std::fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendPolicy {
    /// Largest relative level-to-level change of a bounded-below trace.
    pub stable_tol: f64,
    /// Smallest per-level decay factor of a kernel direction.
    pub kernel_decay: f64,
    /// Largest angle (rad) between a detected vector and its analytic profile.
    pub align_tol: f64,
}

impl Default for TrendPolicy {
    fn default() -> Self {
        Self {
            stable_tol: 0.02,
            kernel_decay: 1.5,
            align_tol: 1e-2,
        }
    }
}

/// Per-level data behind a classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTrend {
    pub level: usize,
    pub smin: f64,
    pub second: f64,
    /// Angle of the smallest right singular vector to `r^{−γ} e^{−|ξ| r}`.
    pub kernel_angle: f64,
    /// Angle of the smallest left singular vector to `r^{γ−2} e^{−|ξ| r}`.
    pub cokernel_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FredholmReport {
    pub gamma: f64,
    pub kernel_dim: usize,
    pub cokernel_dim: usize,
    pub smin_trace: Vec<(usize, f64)>,
    pub case_label: CaseLabel,
    pub mapping_spaces: String,
    #[serde(skip)]
    pub diagnostics: Vec<LevelTrend>,
}

fn sqrt_weighted(weights: &[f64], v: &[f64]) -> Vec<f64> {
    v.iter().zip(weights).map(|(x, w)| x * w.sqrt()).collect()
}

fn level_trend(op: &EdgeSymbolOperator) -> Result<LevelTrend> {
    let b = TridiagOperator::new(op.reference_matrix())?;
    let t = smallest_singular(&b, 2)?;
    let w = op.weights();
    let (kern, cokern) = if op.is_adjoint {
        (op.cokernel_samples(), op.kernel_samples())
    } else {
        (op.kernel_samples(), op.cokernel_samples())
    };
    Ok(LevelTrend {
        level: op.mesh.level,
        smin: t[0].value,
        second: t[1].value,
        kernel_angle: line_angle(&t[0].right, &sqrt_weighted(w, &kern)),
        cokernel_angle: line_angle(&t[0].left, &sqrt_weighted(w, &cokern)),
    })
}

fn rebuild(op: &EdgeSymbolOperator, mesh: &GradedMesh) -> Result<EdgeSymbolOperator> {
    let s = if op.is_adjoint {
        -op.codomain_space.s
    } else {
        op.domain_space.s
    };
    let base = assemble_with_order(op.gamma, op.xi_norm, op.sigma0, mesh, s)?;
    Ok(if op.is_adjoint { adjoint(&base) } else { base })
}

fn aligned(angles: &[f64], tol: f64) -> bool {
    let n = angles.len();
    angles[n - 1] <= tol && angles[n - 1] <= angles[n - 2]
}

/// Classifies `op` (only its parameters are used) on every mesh of the sequence.
pub fn analyze(
    op: &EdgeSymbolOperator,
    meshes: &[GradedMesh],
    tol: &TrendPolicy,
) -> Result<FredholmReport> {
    if meshes.len() < 3 {
        return Err(invalid(format!(
            "classification needs at least 3 refinement levels, got {}",
            meshes.len()
        )));
    }
    let trends = meshes
        .iter()
        .map(|m| level_trend(&rebuild(op, m)?))
        .collect::<Result<Vec<_>>>()?;
    let smin: Vec<f64> = trends.iter().map(|t| t.smin).collect();
    let second: Vec<f64> = trends.iter().map(|t| t.second).collect();
    let factors: Vec<f64> = smin.windows(2).map(|w| w[0] / w[1]).collect();
    let kangles: Vec<f64> = trends.iter().map(|t| t.kernel_angle).collect();
    let cangles: Vec<f64> = trends.iter().map(|t| t.cokernel_angle).collect();
    let stable = smin
        .windows(2)
        .all(|w| ((w[1] - w[0]) / w[0]).abs() <= tol.stable_tol);
    let fast = factors.iter().all(|&f| f >= tol.kernel_decay);
    let slow = factors
        .iter()
        .all(|&f| f > 1.0 + tol.stable_tol && f < tol.kernel_decay);
    let second_decays = second.windows(2).all(|w| w[0] / w[1] >= tol.kernel_decay);
    let right = aligned(&kangles, tol.align_tol);
    let left = aligned(&cangles, tol.align_tol);

    let describe = || {
        format!(
            "gamma={}: smin trace {:?}, decay factors {:?}, kernel angles {:?}, cokernel angles {:?}",
            op.gamma, smin, factors, kangles, cangles
        )
    };
    let (kernel_dim, cokernel_dim, case_label) = if stable {
        (0, 0, CaseLabel::Case3)
    } else if fast && !second_decays {
        match (right, left) {
            (true, false) => (1, 0, CaseLabel::Case1),
            (false, true) => (0, 1, CaseLabel::Case2),
            _ => {
                return Err(Error::Unclassifiable(format!(
                    "decaying direction not aligned; {}",
                    describe()
                )))
            }
        }
    } else if slow && !right && !left {
        (0, 0, CaseLabel::Case4NonFredholm)
    } else {
        return Err(Error::Unclassifiable(describe()));
    };
    Ok(FredholmReport {
        gamma: op.gamma,
        kernel_dim,
        cokernel_dim,
        smin_trace: trends.iter().map(|t| (t.level, t.smin)).collect(),
        case_label,
        mapping_spaces: op.mapping_spaces(),
        diagnostics: trends,
    })
}

/// `φ(t) = exp(−1/(1 − (2t − 1)²))` on `(0, 1)`, zero elsewhere.
pub fn bump(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let x = 2.0 * t - 1.0;
    (-1.0 / (1.0 - x * x)).exp()
}

/// Profile `φ` of the border, evaluated at `|ξ| r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PhiRule {
    Bump,
    /// Piecewise-linear table over `t`, zero outside `[t_first, t_last]`.
    Table {
        t: Vec<f64>,
        phi: Vec<f64>,
    },
}

impl PhiRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            PhiRule::Bump => Ok(()),
            PhiRule::Table { t, phi } => {
                if t.len() < 3 || t.len() != phi.len() {
                    return Err(invalid(
                        "phi table needs matching t/phi arrays of length >= 3",
                    ));
                }
                if t[0] <= 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid(
                        "phi table abscissae must be positive and increasing",
                    ));
                }
                if phi.iter().any(|x| !x.is_finite()) {
                    return Err(invalid("phi table values must be finite"));
                }
                if phi[0] != 0.0 || phi[phi.len() - 1] != 0.0 {
                    return Err(invalid(
                        "phi table must vanish at both ends (compact support)",
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            PhiRule::Bump => bump(t),
            PhiRule::Table { t: ts, phi } => {
                if t <= ts[0] || t >= ts[ts.len() - 1] {
                    return 0.0;
                }
                let k = ts.partition_point(|&x| x <= t) - 1;
                let s = (t - ts[k]) / (ts[k + 1] - ts[k]);
                (1.0 - s) * phi[k] + s * phi[k + 1]
            }
        }
    }

    pub fn sample(&self, nodes: &[f64], xi_norm: f64) -> Vec<f64> {
        nodes.iter().map(|&r| self.eval(xi_norm * r)).collect()
    }

    fn support_end(&self) -> f64 {
        match self {
            PhiRule::Bump => 1.0,
            PhiRule::Table { t, .. } => t[t.len() - 1],
        }
    }
}

pub fn default_phi(mesh: &GradedMesh, xi_norm: f64) -> Vec<f64> {
    PhiRule::Bump.sample(&mesh.nodes, xi_norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BorderMode {
    BoundaryRow,
    CoboundaryColumn,
}

impl std::fmt::Display for BorderMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BorderMode::BoundaryRow => "boundary_row",
            BorderMode::CoboundaryColumn => "coboundary_column",
        })
    }
}

/// Edge symbol with one extra row or column, in orthonormal reference
/// coordinates. The complementary border is a unit vector at the node
/// closest to the tip.
#[derive(Debug, Clone)]
pub struct BorderedOperator {
    pub core: EdgeSymbolOperator,
    pub mode: BorderMode,
    pub phi: PhiRule,
    pub phi_samples: Vec<f64>,
    pub system: BorderedTridiag,
}

impl BorderedOperator {
    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn matrix(&self) -> nalgebra::DMatrix<f64> {
        self.system.to_dense()
    }

    pub fn mapping_spaces(&self) -> String {
        let s = self.core.domain_space.s as f64;
        let g = self.core.gamma;
        match self.mode {
            BorderMode::BoundaryRow => format!(
                "W^{{{s},{g}}}→W^{{{},{}}}⊕H^{{{}}}",
                s - 2.0,
                g - 2.0,
                s + 0.5
            ),
            BorderMode::CoboundaryColumn => format!(
                "W^{{{s},{g}}}⊕H^{{{}}}→W^{{{},{}}}",
                s - 2.5,
                s - 2.0,
                g - 2.0
            ),
        }
    }
}

pub fn border(
    op: &EdgeSymbolOperator,
    phi: &PhiRule,
    mode: BorderMode,
) -> Result<BorderedOperator> {
    if op.is_adjoint {
        return Err(invalid(
            "borders are attached to the edge symbol, not its adjoint",
        ));
    }
    phi.validate()?;
    if phi.support_end() / op.xi_norm >= op.mesh.r_max {
        return Err(invalid("phi support must end before r_max"));
    }
    let n = op.dim();
    let r = op.nodes();
    let w = op.weights();
    let phi_samples = phi.sample(r, op.xi_norm);
    // the kernel of the symbol and the annihilator of its range are both e^{−|ξ| r}
    let decay: Vec<f64> = r.iter().map(|x| (-op.xi_norm * x).exp()).collect();
    let inner: f64 = (0..n).map(|j| w[j] * phi_samples[j] * decay[j]).sum();
    let nphi = (0..n)
        .map(|j| w[j] * phi_samples[j].powi(2))
        .sum::<f64>()
        .sqrt();
    let nk = (0..n).map(|j| w[j] * decay[j].powi(2)).sum::<f64>().sqrt();
    if !(inner.abs() > 1e-8 * nphi * nk) {
        return Err(Error::Orthogonality(format!(
            "<phi, exp(-|xi| r)> = {inner:e} against norms {nphi:e}, {nk:e}"
        )));
    }
    let mut unit = vec![0.0; n];
    unit[0] = 1.0;
    let g = op.gamma;
    let (column, row) = match mode {
        BorderMode::BoundaryRow => {
            let row = (0..n)
                .map(|j| w[j].sqrt() * phi_samples[j] * r[j].powf(g))
                .collect();
            (unit, row)
        }
        BorderMode::CoboundaryColumn => {
            let col = (0..n)
                .map(|j| w[j].sqrt() * r[j].powf(2.0 - g) * phi_samples[j])
                .collect();
            (col, unit)
        }
    };
    let system = BorderedTridiag::new(op.reference_matrix(), column, row)?;
    Ok(BorderedOperator {
        core: op.clone(),
        mode,
        phi: phi.clone(),
        phi_samples,
        system,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyPolicy {
    /// Largest relative change of bordered smin between the two finest levels.
    pub stable_tol: f64,
    pub floor: f64,
}

impl Default for CertifyPolicy {
    fn default() -> Self {
        Self {
            stable_tol: 0.02,
            floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub gamma: f64,
    pub xi_norm: f64,
    pub sigma0: f64,
    pub mode: BorderMode,
    pub certified: bool,
    pub smin_trace: Vec<(usize, f64)>,
    pub mapping_spaces: String,
}

pub fn certify_invertible(b: &BorderedOperator, meshes: &[GradedMesh]) -> Result<Certification> {
    certify_invertible_with(b, meshes, &CertifyPolicy::default())
}

pub fn certify_invertible_with(
    b: &BorderedOperator,
    meshes: &[GradedMesh],
    policy: &CertifyPolicy,
) -> Result<Certification> {
    if meshes.len() < 3 {
        return Err(invalid(format!(
            "certification needs at least 3 refinement levels, got {}",
            meshes.len()
        )));
    }
    let mut smin_trace = Vec::with_capacity(meshes.len());
    for m in meshes {
        let core = rebuild(&b.core, m)?;
        let bm = border(&core, &b.phi, b.mode)?;
        let t = smallest_singular(&bm.system, 1)?;
        smin_trace.push((m.level, t[0].value));
    }
    let k = smin_trace.len();
    let (a, c) = (smin_trace[k - 2].1, smin_trace[k - 1].1);
    let certified =
        ((c - a) / a).abs() <= policy.stable_tol && a > policy.floor && c > policy.floor;
    Ok(Certification {
        gamma: b.core.gamma,
        xi_norm: b.core.xi_norm,
        sigma0: b.core.sigma0,
        mode: b.mode,
        certified,
        smin_trace,
        mapping_spaces: b.mapping_spaces(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorderedSolution {
    /// Solution in natural coordinates on the free nodes.
    pub v: Vec<f64>,
    /// Coefficient of `φ` (coboundary mode).
    pub mu: Option<f64>,
    /// Value of the edge slack variable (boundary mode).
    pub edge_slack: Option<f64>,
    /// Relative residual of the bordered system.
    pub residual: f64,
}

/// Solves `{σ_∧ v = F, ∫φ v = g}` (boundary mode) or `σ_∧ v + μ φ = F`
/// (coboundary mode, `g` is the pinned value of the tip node and is
/// normally zero). `f` holds natural samples of `F` on the free nodes.
pub fn solve_bordered(
    b: &BorderedOperator,
    cert: &Certification,
    f: &[f64],
    g: f64,
) -> Result<BorderedSolution> {
    if !cert.certified {
        return Err(Error::NotCertified(format!(
            "gamma={} mode={} smin trace {:?}",
            cert.gamma, cert.mode, cert.smin_trace
        )));
    }
    if cert.mode != b.mode
        || cert.gamma != b.core.gamma
        || cert.xi_norm != b.core.xi_norm
        || cert.sigma0 != b.core.sigma0
    {
        return Err(Error::NotCertified(
            "certificate belongs to a different operator".into(),
        ));
    }
    let n = b.core.dim();
    if f.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "rhs has {} entries, expected {n}",
            f.len()
        )));
    }
    let r = b.core.nodes();
    let w = b.core.weights();
    let g_exp = b.core.gamma;
    let mut rhs: Vec<f64> = (0..n)
        .map(|j| w[j].sqrt() * r[j].powf(2.0 - g_exp) * f[j])
        .collect();
    rhs.push(g);
    let x = b.system.solve(&rhs);
    let ax = b.system.apply(&x);
    let diff: Vec<f64> = ax.iter().zip(&rhs).map(|(a, c)| a - c).collect();
    let scale = norm2(&rhs).max(f64::MIN_POSITIVE);
    let residual = if norm2(&rhs) == 0.0 {
        norm2(&diff)
    } else {
        norm2(&diff) / scale
    };
    let v = (0..n)
        .map(|j| r[j].powf(g_exp) * x[j] / w[j].sqrt())
        .collect();
    let extra = x[n];
    let (mu, edge_slack) = match b.mode {
        BorderMode::BoundaryRow => (None, Some(extra)),
        BorderMode::CoboundaryColumn => (Some(extra), None),
    };
    Ok(BorderedSolution {
        v,
        mu,
        edge_slack,
        residual,
    })
}

/// `∫ φ(|ξ| r) e^{−|ξ| r} dr` by the mesh quadrature.
pub fn phi_kernel_inner(mesh: &GradedMesh, phi: &PhiRule, xi_norm: f64) -> Result<f64> {
    let s: Vec<f64> = mesh
        .nodes
        .iter()
        .map(|&r| phi.eval(xi_norm * r) * (-xi_norm * r).exp())
        .collect();
    integrate(mesh, &s)
}
