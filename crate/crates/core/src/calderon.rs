//! Radial Dirichlet-to-Neumann spectra on the unit disk.
//!
//! For radial σ the mode `u = u_n(r) e^{inθ}` solves
//! `(σ r u′)′ − σ n²/r · u = 0`. Writing `u = rⁿ y` turns this into the
//! divergence form `(σ r^{2n+1} y′)′ + n σ′ r^{2n} y = 0`, whose regular
//! solution has zero flux at the origin. The y-equation is discretised by
//! finite volumes with exact power-law conductances between nodes, so
//! piecewise-constant profiles are reproduced to rounding error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Tridiag;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PieceKind {
    /// `σ = c`
    Constant,
    /// `σ = a + b r`
    Linear,
    /// `σ = a e^{b r}`
    Exp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub r_lo: f64,
    pub r_hi: f64,
    pub kind: PieceKind,
    pub params: Vec<f64>,
}

impl Piece {
    pub fn value(&self, r: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            PieceKind::Constant => p[0],
            PieceKind::Linear => p[0] + p[1] * r,
            PieceKind::Exp => p[0] * (p[1] * r).exp(),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let p = &self.params;
        match self.kind {
            PieceKind::Constant => 0.0,
            PieceKind::Linear => p[1],
            PieceKind::Exp => p[0] * p[1] * (p[1] * r).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityProfile {
    pub pieces: Vec<Piece>,
    /// `continuity[i]`: σ is continuous across the interface after piece `i`.
    pub continuity: Vec<bool>,
    pub sigma_min: f64,
}

impl ConductivityProfile {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Profile("profile has no pieces".into()));
        }
        for (i, p) in pieces.iter().enumerate() {
            let want = match p.kind {
                PieceKind::Constant => 1,
                PieceKind::Linear | PieceKind::Exp => 2,
            };
            if p.params.len() != want {
                return Err(Error::Profile(format!(
                    "piece {i}: kind {:?} takes {want} params, got {}",
                    p.kind,
                    p.params.len()
                )));
            }
            if p.params.iter().any(|x| !x.is_finite()) || !p.r_lo.is_finite() || !p.r_hi.is_finite()
            {
                return Err(Error::Profile(format!("piece {i}: non-finite entry")));
            }
            if !(p.r_lo < p.r_hi) {
                return Err(Error::Profile(format!(
                    "piece {i}: empty interval [{}, {}]",
                    p.r_lo, p.r_hi
                )));
            }
        }
        if pieces[0].r_lo != 0.0 || pieces[pieces.len() - 1].r_hi != 1.0 {
            return Err(Error::Profile("pieces must cover [0, 1]".into()));
        }
        for (i, w) in pieces.windows(2).enumerate() {
            if w[0].r_hi != w[1].r_lo {
                return Err(Error::Profile(format!(
                    "gap or overlap between pieces {i} and {}",
                    i + 1
                )));
            }
        }
        // every kind is monotone on its interval, so endpoints bound it
        let mut sigma_min = f64::INFINITY;
        for (i, p) in pieces.iter().enumerate() {
            let m = p.value(p.r_lo).min(p.value(p.r_hi));
            if !(m > 0.0) {
                return Err(Error::Profile(format!(
                    "piece {i}: conductivity not positive (min {m})"
                )));
            }
            sigma_min = sigma_min.min(m);
        }
        let continuity = pieces
            .windows(2)
            .map(|w| {
                let a = w[0].value(w[0].r_hi);
                let b = w[1].value(w[1].r_lo);
                (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
            })
            .collect();
        Ok(Self {
            pieces,
            continuity,
            sigma_min,
        })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(vec![Piece {
            r_lo: 0.0,
            r_hi: 1.0,
            kind: PieceKind::Constant,
            params: vec![c],
        }])
    }

    /// `σ = inner` on `[0, a]`, `outer` on `(a, 1]`.
    pub fn two_layer(inner: f64, outer: f64, a: f64) -> Result<Self> {
        Self::new(vec![
            Piece {
                r_lo: 0.0,
                r_hi: a,
                kind: PieceKind::Constant,
                params: vec![inner],
            },
            Piece {
                r_lo: a,
                r_hi: 1.0,
                kind: PieceKind::Constant,
                params: vec![outer],
            },
        ])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let pieces: Vec<Piece> = serde_json::from_str(text)?;
        Self::new(pieces)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.pieces)?)
    }

    pub fn interfaces(&self) -> Vec<f64> {
        self.pieces[1..].iter().map(|p| p.r_lo).collect()
    }

    fn piece_index(&self, r: f64, from_left: bool) -> usize {
        let k = if from_left {
            self.pieces.partition_point(|p| p.r_hi < r)
        } else {
            self.pieces.partition_point(|p| p.r_hi <= r)
        };
        k.min(self.pieces.len() - 1)
    }

    /// σ(r), taking the piece on the right at an interface.
    pub fn sigma(&self, r: f64) -> f64 {
        self.pieces[self.piece_index(r, false)].value(r)
    }

    pub fn sigma_left(&self, r: f64) -> f64 {
        self.pieces[self.piece_index(r, true)].value(r)
    }
}

/// Nodes `0 = r_0 < … < r_M = 1` containing every interface of a profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMesh {
    pub nodes: Vec<f64>,
}

impl RadialMesh {
    /// About `cells` cells, split between pieces by length (at least 4 each),
    /// uniform inside each piece.
    pub fn for_profile(profile: &ConductivityProfile, cells: usize) -> Result<Self> {
        if cells < 8 {
            return Err(Error::MeshTooCoarse(format!(
                "radial mesh needs at least 8 cells, got {cells}"
            )));
        }
        let mut nodes = vec![0.0];
        for p in &profile.pieces {
            let k = (((p.r_hi - p.r_lo) * cells as f64).round() as usize).max(4);
            let h = (p.r_hi - p.r_lo) / k as f64;
            for j in 1..k {
                nodes.push(p.r_lo + j as f64 * h);
            }
            nodes.push(p.r_hi);
        }
        Ok(Self { nodes })
    }

    pub fn uniform(cells: usize) -> Result<Self> {
        Self::for_profile(&ConductivityProfile::constant(1.0)?, cells)
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    fn resolves(&self, profile: &ConductivityProfile) -> bool {
        profile
            .interfaces()
            .iter()
            .all(|a| self.nodes.binary_search_by(|x| x.total_cmp(a)).is_ok())
    }
}

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// `∫_a^b σ′(r) (r/s)^{2n} dr` over one piece (no jumps inside).
fn source_integral(piece: &Piece, a: f64, b: f64, n: usize, s: f64) -> f64 {
    if piece.kind == PieceKind::Constant || b <= a {
        return 0.0;
    }
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    GL5.iter()
        .map(|&(x, w)| {
            let r = c + h * x;
            w * piece.derivative(r) * (r / s).powi(2 * n as i32)
        })
        .sum::<f64>()
        * h
}

/// `∫_a^b σ′ (r/s)^{2n} dr` including jumps of σ at interior nodes.
fn cv_source(profile: &ConductivityProfile, a: f64, b: f64, node: f64, n: usize, s: f64) -> f64 {
    let left = &profile.pieces[profile.piece_index(node, true)];
    let right = &profile.pieces[profile.piece_index(node, false)];
    let mut total = source_integral(left, a, node, n, s) + source_integral(right, node, b, n, s);
    if !std::ptr::eq(left, right) {
        total += (right.value(node) - left.value(node)) * (node / s).powi(2 * n as i32);
    }
    total
}

/// Conductance between nodes `lo < hi`, divided by `lo^{2n}`:
/// `1 / ∫_lo^hi dr / (σ r^{2n+1})`, with σ averaged harmonically under the
/// weight `r^{−(2n+1)}` and the power integral done exactly.
fn scaled_conductance(profile: &ConductivityProfile, lo: f64, hi: f64, n: usize) -> f64 {
    let piece = &profile.pieces[profile.piece_index(0.5 * (lo + hi), false)];
    let sigma_bar = if piece.kind == PieceKind::Constant {
        piece.params[0]
    } else {
        let c = 0.5 * (lo + hi);
        let h = 0.5 * (hi - lo);
        let mut num = 0.0;
        let mut den = 0.0;
        for &(x, w) in &GL5 {
            let r = c + h * x;
            let wt = w * (lo / r).powi(2 * n as i32 + 1);
            num += wt / piece.value(r);
            den += wt;
        }
        den / num
    };
    let q = (lo / hi).ln();
    if n == 0 {
        sigma_bar / (-q)
    } else {
        let two_n = 2.0 * n as f64;
        // lo^{2n} ∫_lo^hi r^{−2n−1} dr = (1 − (lo/hi)^{2n}) / 2n
        sigma_bar * two_n / (-(two_n * q).exp_m1())
    }
}

/// DtN eigenvalue `λ_n = σ(1) u_n′(1)` for the mode with `u_n(1) = 1`.
pub fn solve_mode(profile: &ConductivityProfile, n: usize, mesh: &RadialMesh) -> Result<f64> {
    if !mesh.resolves(profile) {
        return Err(Error::MeshTooCoarse(
            "radial mesh does not contain every interface".into(),
        ));
    }
    let r = &mesh.nodes;
    let m = mesh.cells();
    // unknowns y_1 … y_{M−1}; row i is scaled by r_i^{−2n}
    let dim = m - 1;
    let mut sub = vec![0.0; dim - 1];
    let mut diag = vec![0.0; dim];
    let mut sup = vec![0.0; dim - 1];
    let mut rhs = vec![0.0; dim];
    let nf = n as f64;
    for i in 1..m {
        let row = i - 1;
        let s = r[i];
        let a = if i == 1 { 0.0 } else { 0.5 * (r[i - 1] + r[i]) };
        let b = 0.5 * (r[i] + r[i + 1]);
        // conductance to the right, scaled by r_i^{−2n}
        let kr = scaled_conductance(profile, r[i], r[i + 1], n);
        let kl = if i == 1 {
            0.0
        } else {
            scaled_conductance(profile, r[i - 1], r[i], n) * (r[i - 1] / s).powi(2 * n as i32)
        };
        let src = if n == 0 {
            0.0
        } else {
            nf * cv_source(profile, a, b, s, n, s)
        };
        diag[row] = -kl - kr + src;
        if row > 0 {
            sub[row - 1] = kl;
        }
        if i + 1 < m {
            sup[row] = kr;
        } else {
            rhs[row] = -kr;
        }
    }
    let y = if dim == 1 {
        vec![rhs[0] / diag[0]]
    } else {
        Tridiag::new(sub, diag, sup).lu()?.solve(&rhs)
    };
    let lo = r[m - 1];
    let mid = 0.5 * (lo + 1.0);
    let k_last = scaled_conductance(profile, lo, 1.0, n) * lo.powi(2 * n as i32);
    let face_flux = k_last * (1.0 - y[dim - 1]);
    let tail = if n == 0 {
        0.0
    } else {
        let piece = &profile.pieces[profile.pieces.len() - 1];
        nf * source_integral(piece, mid, 1.0, n, 1.0)
    };
    let sigma1 = profile.sigma_left(1.0);
    let lambda = nf * sigma1 + face_flux - tail;
    if !lambda.is_finite() {
        return Err(Error::Singular(format!(
            "mode {n} produced a non-finite eigenvalue"
        )));
    }
    Ok(lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtNSpectrum {
    pub modes: Vec<(usize, f64)>,
}

impl DtNSpectrum {
    pub fn lambda(&self, n: usize) -> Option<f64> {
        self.modes.iter().find(|m| m.0 == n).map(|m| m.1)
    }
}

pub fn dtn_spectrum(
    profile: &ConductivityProfile,
    max_mode: usize,
    mesh: &RadialMesh,
) -> Result<DtNSpectrum> {
    if max_mode < 1 {
        return Err(Error::InvalidParameter(
            "spectrum needs at least mode 1".into(),
        ));
    }
    let modes = (0..=max_mode)
        .into_par_iter()
        .map(|n| solve_mode(profile, n, mesh).map(|l| (n, l)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DtNSpectrum { modes })
}

pub const DISTINGUISHABLE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumComparison {
    pub max_abs_dev: f64,
    pub distinguishable: bool,
}

pub fn compare_spectra(a: &DtNSpectrum, b: &DtNSpectrum) -> Result<SpectrumComparison> {
    let na: Vec<usize> = a.modes.iter().map(|m| m.0).collect();
    let nb: Vec<usize> = b.modes.iter().map(|m| m.0).collect();
    if na != nb {
        return Err(Error::DimensionMismatch(format!(
            "mode ranges differ ({} vs {} modes)",
            na.len(),
            nb.len()
        )));
    }
    let max_abs_dev = a
        .modes
        .iter()
        .zip(&b.modes)
        .map(|(x, y)| (x.1 - y.1).abs())
        .fold(0.0, f64::max);
    Ok(SpectrumComparison {
        max_abs_dev,
        distinguishable: max_abs_dev > DISTINGUISHABLE,
    })
}

/// Ten pairwise-distinct positive profiles.
pub fn reference_catalog() -> Vec<(&'static str, ConductivityProfile)> {
    let c = |v| ConductivityProfile::constant(v).unwrap();
    let two = |a, b, r| ConductivityProfile::two_layer(a, b, r).unwrap();
    let one = |kind, params: Vec<f64>| {
        ConductivityProfile::new(vec![Piece {
            r_lo: 0.0,
            r_hi: 1.0,
            kind,
            params,
        }])
        .unwrap()
    };
    let three = ConductivityProfile::new(vec![
        Piece {
            r_lo: 0.0,
            r_hi: 0.3,
            kind: PieceKind::Constant,
            params: vec![1.0],
        },
        Piece {
            r_lo: 0.3,
            r_hi: 0.6,
            kind: PieceKind::Constant,
            params: vec![2.0],
        },
        Piece {
            r_lo: 0.6,
            r_hi: 1.0,
            kind: PieceKind::Constant,
            params: vec![1.0],
        },
    ])
    .unwrap();
    vec![
        ("constant 1", c(1.0)),
        ("constant 1.5", c(1.5)),
        ("constant 2", c(2.0)),
        ("two-layer 2|1 at 0.5", two(2.0, 1.0, 0.5)),
        ("two-layer 1|3 at 0.3", two(1.0, 3.0, 0.3)),
        ("two-layer 1|2 at 0.7", two(1.0, 2.0, 0.7)),
        ("linear 1+r", one(PieceKind::Linear, vec![1.0, 1.0])),
        ("linear 2-r", one(PieceKind::Linear, vec![2.0, -1.0])),
        ("exp e^r", one(PieceKind::Exp, vec![1.0, 1.0])),
        ("three-layer 1|2|1", three),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `σ₂ n (1 − ρ a^{2n}) / (1 + ρ a^{2n})`, `ρ = (σ₂ − σ₁)/(σ₂ + σ₁)`.
    fn two_layer_exact(inner: f64, outer: f64, a: f64, n: usize) -> f64 {
        let rho = (outer - inner) / (outer + inner);
        let t = rho * a.powi(2 * n as i32);
        outer * n as f64 * (1.0 - t) / (1.0 + t)
    }

    #[test]
    fn unit_conductivity_gives_mode_numbers() {
        let p = ConductivityProfile::constant(1.0).unwrap();
        let mesh = RadialMesh::for_profile(&p, 512).unwrap();
        assert!((solve_mode(&p, 3, &mesh).unwrap() - 3.0).abs() < 1e-9);
        assert!(solve_mode(&p, 0, &mesh).unwrap().abs() < 1e-10);
    }

    #[test]
    fn two_layer_matches_closed_form() {
        let p = ConductivityProfile::two_layer(2.0, 1.0, 0.5).unwrap();
        let mesh = RadialMesh::for_profile(&p, 256).unwrap();
        for n in 0..10 {
            let l = solve_mode(&p, n, &mesh).unwrap();
            let e = two_layer_exact(2.0, 1.0, 0.5, n);
            assert!((l - e).abs() <= 1e-10 * e.max(1.0), "n={n}: {l} vs {e}");
        }
    }

    #[test]
    fn smooth_profile_converges_quadratically() {
        let p = ConductivityProfile::new(vec![Piece {
            r_lo: 0.0,
            r_hi: 1.0,
            kind: PieceKind::Linear,
            params: vec![1.0, 1.0],
        }])
        .unwrap();
        let exact = 1.649724459903116;
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&m| {
                (solve_mode(&p, 1, &RadialMesh::for_profile(&p, m).unwrap()).unwrap() - exact).abs()
            })
            .collect();
        assert!(
            errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5,
            "{errs:?}"
        );
    }

    #[test]
    fn profile_validation() {
        assert!(ConductivityProfile::constant(0.0).is_err());
        assert!(ConductivityProfile::two_layer(1.0, 1.0, 1.5).is_err());
        let gap = vec![
            Piece {
                r_lo: 0.0,
                r_hi: 0.4,
                kind: PieceKind::Constant,
                params: vec![1.0],
            },
            Piece {
                r_lo: 0.5,
                r_hi: 1.0,
                kind: PieceKind::Constant,
                params: vec![1.0],
            },
        ];
        assert!(ConductivityProfile::new(gap).is_err());
        let negative = vec![Piece {
            r_lo: 0.0,
            r_hi: 1.0,
            kind: PieceKind::Linear,
            params: vec![1.0, -2.0],
        }];
        assert!(ConductivityProfile::new(negative).is_err());
        let wrong_arity = vec![Piece {
            r_lo: 0.0,
            r_hi: 1.0,
            kind: PieceKind::Exp,
            params: vec![1.0],
        }];
        assert!(ConductivityProfile::new(wrong_arity).is_err());
    }

    #[test]
    fn continuity_flags() {
        let p = ConductivityProfile::new(vec![
            Piece {
                r_lo: 0.0,
                r_hi: 0.5,
                kind: PieceKind::Linear,
                params: vec![1.0, 2.0],
            },
            Piece {
                r_lo: 0.5,
                r_hi: 0.8,
                kind: PieceKind::Constant,
                params: vec![2.0],
            },
            Piece {
                r_lo: 0.8,
                r_hi: 1.0,
                kind: PieceKind::Constant,
                params: vec![3.0],
            },
        ])
        .unwrap();
        assert_eq!(p.continuity, vec![true, false]);
        assert_eq!(p.sigma(0.8), 3.0);
        assert_eq!(p.sigma_left(0.8), 2.0);
    }

    #[test]
    fn json_round_trip() {
        let text = r#"[{"r_lo":0,"r_hi":0.5,"kind":"constant","params":[2]},
                       {"r_lo":0.5,"r_hi":1,"kind":"exp","params":[1,0.5]}]"#;
        let p = ConductivityProfile::from_json(text).unwrap();
        let q = ConductivityProfile::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, q);
        assert!(ConductivityProfile::from_json(
            r#"[{"r_lo":0,"r_hi":1,"kind":"cubic","params":[1]}]"#
        )
        .is_err());
    }

    #[test]
    fn unresolved_interface_rejected() {
        let p = ConductivityProfile::two_layer(1.0, 2.0, 0.3).unwrap();
        let mesh = RadialMesh {
            nodes: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        };
        assert!(solve_mode(&p, 1, &mesh).is_err());
    }

    #[test]
    fn comparison_rules() {
        let p = ConductivityProfile::constant(1.0).unwrap();
        let mesh = RadialMesh::for_profile(&p, 128).unwrap();
        let a = dtn_spectrum(&p, 4, &mesh).unwrap();
        let b = dtn_spectrum(&p, 5, &mesh).unwrap();
        assert!(compare_spectra(&a, &b).is_err());
        let same = compare_spectra(&a, &a).unwrap();
        assert_eq!(same.max_abs_dev, 0.0);
        assert!(!same.distinguishable);
        assert!(dtn_spectrum(&p, 0, &mesh).is_err());
    }
}
