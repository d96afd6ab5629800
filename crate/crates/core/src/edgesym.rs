//! Discrete edge symbol `σ₀(∂_r² − |ξ|²)` in weight-conjugated coordinates.
//!
//! The unknowns live on every mesh node except `r_max`, where the Dirichlet
//! condition stands in for decay at infinity. Near `r = 0` the stencil is
//! truncated: the missing neighbour at the origin contributes nothing.

use serde::{Deserialize, Serialize};

use crate::linalg::Tridiag;
use crate::mesh::GradedMesh;
use crate::{invalid, Result};

/// Descriptor `K^{s,γ}` of a weighted space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceLabel {
    pub s: i32,
    pub gamma: f64,
}

impl std::fmt::Display for SpaceLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "K^{{{},{}}}", self.s, self.gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSymbolOperator {
    /// Conjugated matrix `M_{γ−2} ∘ σ₀(∂² − |ξ|²) ∘ M_γ⁻¹` on the free nodes.
    pub matrix: Tridiag,
    pub gamma: f64,
    pub xi_norm: f64,
    pub sigma0: f64,
    pub order: u32,
    pub domain_space: SpaceLabel,
    pub codomain_space: SpaceLabel,
    pub mesh: GradedMesh,
    pub is_adjoint: bool,
}

pub fn assemble(
    gamma: f64,
    xi_norm: f64,
    sigma0: f64,
    mesh: &GradedMesh,
) -> Result<EdgeSymbolOperator> {
    assemble_with_order(gamma, xi_norm, sigma0, mesh, 2)
}

/// Same matrix as [`assemble`], with the Sobolev order `s` of the domain
/// recorded in the space labels.
pub fn assemble_with_order(
    gamma: f64,
    xi_norm: f64,
    sigma0: f64,
    mesh: &GradedMesh,
    s: i32,
) -> Result<EdgeSymbolOperator> {
    if !(sigma0 > 0.0) || !sigma0.is_finite() {
        return Err(invalid(format!("sigma0 must be positive, got {sigma0}")));
    }
    if !(xi_norm > 0.0) || !xi_norm.is_finite() {
        return Err(invalid(format!("xi_norm must be positive, got {xi_norm}")));
    }
    if !gamma.is_finite() {
        return Err(invalid("gamma must be finite"));
    }
    let r = &mesh.nodes[..mesh.len() - 1];
    let n = r.len();
    let xi2 = xi_norm * xi_norm;
    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n - 1];
    for i in 0..n {
        let left = if i == 0 { 0.0 } else { r[i - 1] };
        let right = mesh.nodes[i + 1];
        let hm = r[i] - left;
        let hp = right - r[i];
        let c = 2.0 / (hm + hp);
        let scale = r[i].powf(2.0 - gamma);
        diag[i] = sigma0 * (r[i] * r[i] * (-c / hm - c / hp - xi2));
        if i > 0 {
            sub[i - 1] = sigma0 * (scale * (c / hm) * left.powf(gamma));
        }
        if i + 1 < n {
            sup[i] = sigma0 * (scale * (c / hp) * right.powf(gamma));
        }
    }
    Ok(EdgeSymbolOperator {
        matrix: Tridiag::new(sub, diag, sup),
        gamma,
        xi_norm,
        sigma0,
        order: 2,
        domain_space: SpaceLabel { s, gamma },
        codomain_space: SpaceLabel {
            s: s - 2,
            gamma: gamma - 2.0,
        },
        mesh: mesh.clone(),
        is_adjoint: false,
    })
}

impl EdgeSymbolOperator {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Free nodes (all mesh nodes but `r_max`).
    pub fn nodes(&self) -> &[f64] {
        &self.mesh.nodes[..self.dim()]
    }

    pub fn weights(&self) -> &[f64] {
        &self.mesh.quad_weights[..self.dim()]
    }

    /// Product with a reference-space grid function.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.matrix.mul(w)
    }

    /// Action on a grid function in natural (unweighted) coordinates.
    pub fn apply_natural(&self, v: &[f64]) -> Vec<f64> {
        let (din, dout) = if self.is_adjoint {
            (2.0 - self.gamma, -self.gamma)
        } else {
            (self.gamma, self.gamma - 2.0)
        };
        let w: Vec<f64> = v
            .iter()
            .zip(self.nodes())
            .map(|(x, r)| x * r.powf(-din))
            .collect();
        self.apply(&w)
            .iter()
            .zip(self.nodes())
            .map(|(x, r)| x * r.powf(dout))
            .collect()
    }

    /// Reference inner product on the free nodes.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(self.weights())
            .map(|((x, y), w)| w * x * y)
            .sum()
    }

    pub fn ref_norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// `W^{1/2} T W^{−1/2}`: the matrix in orthonormal reference coordinates,
    /// whose Euclidean singular values are those of the operator.
    pub fn reference_matrix(&self) -> Tridiag {
        let sw: Vec<f64> = self.weights().iter().map(|w| w.sqrt()).collect();
        let n = self.dim();
        let t = &self.matrix;
        Tridiag::new(
            (0..n - 1).map(|i| sw[i + 1] * t.sub[i] / sw[i]).collect(),
            t.diag.clone(),
            (0..n - 1).map(|i| sw[i] * t.sup[i] / sw[i + 1]).collect(),
        )
    }

    /// Reference samples `r^{−γ} e^{−|ξ| r}` of the decaying solution `e^{−|ξ| r}`.
    pub fn kernel_samples(&self) -> Vec<f64> {
        self.nodes()
            .iter()
            .map(|r| r.powf(-self.gamma) * (-self.xi_norm * r).exp())
            .collect()
    }

    /// Reference samples `r^{γ−2} e^{−|ξ| r}` spanning the kernel of the adjoint.
    pub fn cokernel_samples(&self) -> Vec<f64> {
        self.nodes()
            .iter()
            .map(|r| r.powf(self.gamma - 2.0) * (-self.xi_norm * r).exp())
            .collect()
    }

    /// Reference norm of `T·kernel_samples` over the rows away from both ends.
    pub fn kernel_residual(&self) -> f64 {
        let res = self.apply(&self.kernel_samples());
        let n = self.dim();
        let w = self.weights();
        (1..n - 1)
            .map(|i| w[i] * res[i] * res[i])
            .sum::<f64>()
            .sqrt()
    }

    pub fn mapping_spaces(&self) -> String {
        format!("{}->{}", self.domain_space, self.codomain_space)
    }
}

/// Adjoint with respect to the reference inner products: `W⁻¹ Tᵀ W`.
pub fn adjoint(op: &EdgeSymbolOperator) -> EdgeSymbolOperator {
    let w = op.weights();
    let t = &op.matrix;
    let n = op.dim();
    let matrix = Tridiag::new(
        (0..n - 1).map(|i| t.sup[i] * (w[i] / w[i + 1])).collect(),
        t.diag.clone(),
        (0..n - 1).map(|i| t.sub[i] * (w[i + 1] / w[i])).collect(),
    );
    let s = if op.is_adjoint {
        -op.codomain_space.s
    } else {
        op.domain_space.s
    };
    let (domain_space, codomain_space) = if op.is_adjoint {
        (
            SpaceLabel { s, gamma: op.gamma },
            SpaceLabel {
                s: s - 2,
                gamma: op.gamma - 2.0,
            },
        )
    } else {
        (
            SpaceLabel {
                s: 2 - s,
                gamma: 2.0 - op.gamma,
            },
            SpaceLabel {
                s: -s,
                gamma: -op.gamma,
            },
        )
    };
    EdgeSymbolOperator {
        matrix,
        domain_space,
        codomain_space,
        is_adjoint: !op.is_adjoint,
        mesh: op.mesh.clone(),
        gamma: op.gamma,
        xi_norm: op.xi_norm,
        sigma0: op.sigma0,
        order: op.order,
    }
}

/// Unitary dilation `κ_λ u(r) = λ^{1/2} u(λ r)` on the reference space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingAction {
    pub lambda: f64,
}

impl ScalingAction {
    pub const NORMALIZATION: f64 = 0.5;

    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    pub fn sample<F: Fn(f64) -> f64>(&self, u: F, nodes: &[f64]) -> Vec<f64> {
        let c = self.lambda.powf(Self::NORMALIZATION);
        nodes.iter().map(|&r| c * u(self.lambda * r)).collect()
    }

    pub fn sample_inverse<F: Fn(f64) -> f64>(&self, u: F, nodes: &[f64]) -> Vec<f64> {
        let c = self.lambda.powf(-Self::NORMALIZATION);
        nodes.iter().map(|&r| c * u(r / self.lambda)).collect()
    }
}

/// Piecewise-linear interpolation of `(x, y)` at `t`, with `x` increasing and
/// `x[0] <= t <= x[last]`. Exact at the nodes.
fn interp(x: &[f64], y: &[f64], t: f64) -> f64 {
    let k = x.partition_point(|&v| v <= t);
    if k == 0 {
        return y[0];
    }
    let k = k - 1;
    if k + 1 >= x.len() || x[k] == t {
        return y[k];
    }
    let s = (t - x[k]) / (x[k + 1] - x[k]);
    (1.0 - s) * y[k] + s * y[k + 1]
}

/// Relative deviation between `A(λ)u` and `λ² κ_λ A(1) κ_λ⁻¹ u` for one test
/// function, in the codomain reference norm. Rows next to the truncated
/// stencil and to `r_max` are left out, as are points whose dilate leaves
/// the reliable rows.
pub fn homogeneity_deviation<F: Fn(f64) -> f64>(
    gamma: f64,
    sigma0: f64,
    lambda: f64,
    mesh: &GradedMesh,
    u: F,
) -> Result<f64> {
    let kappa = ScalingAction::new(lambda)?;
    let a1 = assemble(gamma, 1.0, sigma0, mesh)?;
    let al = assemble(gamma, lambda, sigma0, mesh)?;
    let r = a1.nodes();
    let n = r.len();
    let lhs = al.apply_natural(&r.iter().map(|&x| u(x)).collect::<Vec<_>>());
    let h = a1.apply_natural(&kappa.sample_inverse(&u, r));
    let lo = 1;
    let hi = n - 2;
    let xs = &r[lo..hi];
    let hs = &h[lo..hi];
    let scale = lambda * lambda * lambda.powf(ScalingAction::NORMALIZATION);
    let w = a1.weights();
    let mut num = 0.0;
    let mut den = 0.0;
    for j in lo..hi {
        let t = lambda * r[j];
        if t < xs[0] || t > xs[xs.len() - 1] {
            continue;
        }
        let rhs = scale * interp(xs, hs, t);
        let m = w[j] * r[j].powf(2.0 * (2.0 - gamma));
        num += m * (lhs[j] - rhs).powi(2);
        den += m * rhs * rhs;
    }
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok((num / den).sqrt())
}

/// Battery of smooth decaying test functions used by the homogeneity check.
pub fn homogeneity_battery() -> Vec<(&'static str, fn(f64) -> f64)> {
    vec![
        ("exp(-3r)", |r| (-3.0 * r).exp()),
        ("r exp(-2r)", |r| r * (-2.0 * r).exp()),
        ("exp(-r^2)", |r| (-r * r).exp()),
    ]
}

pub fn check_twisted_homogeneity(
    gamma: f64,
    sigma0: f64,
    lambda: f64,
    mesh: &GradedMesh,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (_, u) in homogeneity_battery() {
        worst = worst.max(homogeneity_deviation(gamma, sigma0, lambda, mesh, u)?);
    }
    Ok(worst)
}

/// `⟨Lu, v⟩_cod − ⟨u, L*v⟩_dom`.
pub fn adjoint_defect(
    op: &EdgeSymbolOperator,
    adj: &EdgeSymbolOperator,
    u: &[f64],
    v: &[f64],
) -> f64 {
    let lu = op.apply(u);
    let lsv = adj.apply(v);
    let w = op.weights();
    let a: f64 = lu.iter().zip(v).zip(w).map(|((x, y), wi)| wi * x * y).sum();
    let b: f64 = u
        .iter()
        .zip(&lsv)
        .zip(w)
        .map(|((x, y), wi)| wi * x * y)
        .sum();
    a - b
}
