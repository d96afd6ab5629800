use std::path::{Path, PathBuf};

use edgelab_core::algebraic::run_trials;
use edgelab_core::calderon::{
    compare_spectra, dtn_spectrum, reference_catalog, ConductivityProfile, RadialMesh,
};
use edgelab_core::edgesym::assemble;
use edgelab_core::fredholm::{
    analyze, border, certify_invertible, BorderMode, FredholmReport, PhiRule, TrendPolicy,
};
use edgelab_core::mesh::{build_graded, refinement_sequence, GradedMesh};
use edgelab_core::report::{emit_csv, emit_json, mode_rows, CsvRecord, RunManifest};
use edgelab_core::wspace::{dual_membership_test, membership_test};
use edgelab_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{
    at_least, finite, mesh_params, positive, required, CliConfig, ConfigError, MeshParams, Sweep,
    DEFAULT_EDGE_GRADING, DEFAULT_SPACE_GRADING,
};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Unclassifiable(String),
    NotCertified(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Unclassifiable(_) => 2,
            Failure::NotCertified(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) | Failure::Unclassifiable(m) | Failure::NotCertified(m) => {
                f.write_str(m)
            }
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Unclassifiable(_) => Failure::Unclassifiable(e.to_string()),
            Error::NotCertified(_) => Failure::NotCertified(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "both" => Ok(Format::Both),
            _ => Err(ConfigError(format!(
                "output.formats: expected csv, json or both, got {s:?}"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Both => "both",
        }
    }
}

/// Where and how records are written, plus the manifest being assembled.
pub struct Run {
    pub dir: PathBuf,
    pub format: Format,
    pub manifest_inputs: Vec<PathBuf>,
    pub seed: Option<u64>,
}

impl Run {
    pub fn new(dir: PathBuf, format: Format) -> Self {
        Self {
            dir,
            format,
            manifest_inputs: Vec::new(),
            seed: None,
        }
    }

    fn emit<R: CsvRecord + Serialize>(&mut self, slug: &str, records: &[R]) -> Result<(), Failure> {
        std::fs::create_dir_all(&self.dir).map_err(|e| {
            Failure::Config(format!("output.directory {}: {e}", self.dir.display()))
        })?;
        if matches!(self.format, Format::Csv | Format::Both) {
            let p = self.dir.join(format!("{slug}.csv"));
            emit_csv(records, &p)?;
        }
        if matches!(self.format, Format::Json | Format::Both) {
            let p = self.dir.join(format!("{slug}.json"));
            emit_json(records, &p)?;
        }
        Ok(())
    }

    pub fn finish(
        &self,
        command: &str,
        slug: &str,
        config: &CliConfig,
    ) -> Result<PathBuf, Failure> {
        let echo = serde_json::to_value(config).map_err(Error::from)?;
        let mut m = RunManifest::new(command, echo, self.seed);
        for p in &self.manifest_inputs {
            m.add_input(p)?;
        }
        Ok(m.write_for(&self.dir.join(slug))?)
    }
}

fn meshes(p: &MeshParams) -> Result<Vec<GradedMesh>, Failure> {
    let base = build_graded(p.r_max, p.n_points, p.grading_exponent, 0)?;
    Ok(refinement_sequence(&base, p.levels)?)
}

fn edge_mesh(cfg: &mut CliConfig) -> Result<MeshParams, Failure> {
    let p = mesh_params(&cfg.mesh, DEFAULT_EDGE_GRADING)?;
    write_back_mesh(cfg, &p);
    Ok(p)
}

fn write_back_mesh(cfg: &mut CliConfig, p: &MeshParams) {
    cfg.mesh.r_max = Some(p.r_max);
    cfg.mesh.n_points = Some(p.n_points);
    cfg.mesh.grading_exponent = Some(p.grading_exponent);
    cfg.mesh.levels = Some(p.levels);
}

fn edge_scalars(cfg: &mut CliConfig) -> Result<(f64, f64), Failure> {
    let xi = positive("edge.xi_norm", cfg.edge.xi_norm.unwrap_or(1.0))?;
    let sigma0 = positive("edge.sigma0", cfg.edge.sigma0.unwrap_or(1.0))?;
    cfg.edge.xi_norm = Some(xi);
    cfg.edge.sigma0 = Some(sigma0);
    Ok((xi, sigma0))
}

fn classify_all(
    gammas: &[f64],
    xi: f64,
    sigma0: f64,
    meshes: &[GradedMesh],
) -> Result<Vec<FredholmReport>, Failure> {
    let policy = TrendPolicy::default();
    gammas
        .par_iter()
        .map(|&g| {
            let op = assemble(g, xi, sigma0, &meshes[0])?;
            analyze(&op, meshes, &policy)
        })
        .collect::<Result<Vec<_>, Error>>()
        .map_err(Failure::from)
}

pub fn edge_classify(cfg: &mut CliConfig, run: &mut Run) -> Result<(), Failure> {
    let gamma = finite("edge.gamma", required("edge.gamma", cfg.edge.gamma)?)?;
    let (xi, sigma0) = edge_scalars(cfg)?;
    let mp = edge_mesh(cfg)?;
    let ms = meshes(&mp)?;
    let reports = classify_all(&[gamma], xi, sigma0, &ms)?;
    for r in &reports {
        println!("gamma = {}: {}", r.gamma, r.case_label);
    }
    run.emit("edge_classify", &reports)
}

pub fn sweep_values(s: &Sweep) -> Result<Vec<f64>, ConfigError> {
    finite("edge.sweep.from", s.from)?;
    finite("edge.sweep.to", s.to)?;
    at_least("edge.sweep.steps", s.steps, 1)?;
    if s.steps == 1 {
        return Ok(vec![s.from]);
    }
    let h = (s.to - s.from) / (s.steps - 1) as f64;
    Ok((0..s.steps).map(|k| s.from + k as f64 * h).collect())
}

pub fn edge_sweep(cfg: &mut CliConfig, run: &mut Run) -> Result<(), Failure> {
    let sweep = required("edge.sweep", cfg.edge.sweep)?;
    let gammas = sweep_values(&sweep)?;
    let (xi, sigma0) = edge_scalars(cfg)?;
    let mp = edge_mesh(cfg)?;
    let ms = meshes(&mp)?;
    let reports = classify_all(&gammas, xi, sigma0, &ms)?;
    for r in &reports {
        println!("gamma = {}: {}", r.gamma, r.case_label);
    }
    run.emit("edge_sweep_gamma", &reports)
}

fn parse_mode(s: &str) -> Result<BorderMode, ConfigError> {
    match s {
        "boundary_row" | "boundary" => Ok(BorderMode::BoundaryRow),
        "coboundary_column" | "coboundary" => Ok(BorderMode::CoboundaryColumn),
        _ => Err(ConfigError(format!(
            "borders.mode: expected boundary_row or coboundary_column, got {s:?}"
        ))),
    }
}

fn load_phi(spec: &str, run: &mut Run) -> Result<PhiRule, Failure> {
    if spec == "default" {
        return Ok(PhiRule::Bump);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("borders.phi: cannot read {spec}: {e}")))?;
    let rule: PhiRule = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("borders.phi: {spec}: {e}")))?;
    rule.validate()
        .map_err(|e| Failure::Config(format!("borders.phi: {e}")))?;
    run.manifest_inputs.push(path.to_path_buf());
    Ok(rule)
}

pub fn edge_augment(cfg: &mut CliConfig, run: &mut Run) -> Result<(), Failure> {
    let gamma = finite("edge.gamma", required("edge.gamma", cfg.edge.gamma)?)?;
    let mode = parse_mode(&required("borders.mode", cfg.borders.mode.clone())?)?;
    let phi_spec = cfg.borders.phi.clone().unwrap_or_else(|| "default".into());
    let phi = load_phi(&phi_spec, run)?;
    cfg.borders.mode = Some(mode.to_string());
    cfg.borders.phi = Some(phi_spec);
    let (xi, sigma0) = edge_scalars(cfg)?;
    let mp = edge_mesh(cfg)?;
    let ms = meshes(&mp)?;
    let op = assemble(gamma, xi, sigma0, &ms[0])?;
    let b = border(&op, &phi, mode).map_err(|e| Failure::Config(format!("borders.phi: {e}")))?;
    let cert = certify_invertible(&b, &ms)?;
    println!("gamma = {gamma}, {mode}: certified = {}", cert.certified);
    let certified = cert.certified;
    run.emit("edge_augment", &[cert])?;
    if !certified {
        return Err(Failure::NotCertified(format!(
            "bordered operator at gamma = {gamma} ({mode}) is not certified invertible"
        )));
    }
    Ok(())
}

pub fn space_member(cfg: &mut CliConfig, run: &mut Run) -> Result<(), Failure> {
    let gamma = finite("space.gamma", required("space.gamma", cfg.space.gamma)?)?;
    let s = cfg.space.s.unwrap_or(0);
    if s > 2 {
        return Err(Failure::Config(format!(
            "space.s: must be 0, 1 or 2, got {s}"
        )));
    }
    let alpha = finite("space.alpha", cfg.space.alpha.unwrap_or(0.0))?;
    let dual = cfg.space.dual.unwrap_or(false);
    cfg.space.s = Some(s);
    cfg.space.alpha = Some(alpha);
    cfg.space.dual = Some(dual);
    let mp = mesh_params(&cfg.mesh, DEFAULT_SPACE_GRADING)?;
    write_back_mesh(cfg, &mp);
    let ms = meshes(&mp)?;
    let u = move |r: f64| r.powf(alpha) * (-r).exp();
    let v = if dual {
        dual_membership_test(u, s, gamma, &ms)?
    } else {
        membership_test(u, s, gamma, &ms)?
    };
    println!("gamma = {gamma}, s = {s}, dual = {dual}: {}", v.verdict);
    run.emit("space_member", &[v])
}

fn load_profile(spec: &str, field: &str, run: &mut Run) -> Result<ConductivityProfile, Failure> {
    if let Some(idx) = spec.strip_prefix("catalog:") {
        let cat = reference_catalog();
        let i: usize = idx
            .parse()
            .map_err(|_| Failure::Config(format!("{field}: bad catalog index {idx:?}")))?;
        return cat.into_iter().nth(i).map(|(_, p)| p).ok_or_else(|| {
            Failure::Config(format!("{field}: catalog has 10 entries, got index {i}"))
        });
    }
    if let Some(c) = spec.strip_prefix("constant:") {
        let c: f64 = c
            .parse()
            .map_err(|_| Failure::Config(format!("{field}: bad constant {c:?}")))?;
        return ConductivityProfile::constant(c)
            .map_err(|e| Failure::Config(format!("{field}: {e}")));
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{field}: cannot read {spec}: {e}")))?;
    let p = ConductivityProfile::from_json(&text)
        .map_err(|e| Failure::Config(format!("{field}: {e}")))?;
    run.manifest_inputs.push(path.to_path_buf());
    Ok(p)
}

fn dtn_sizes(cfg: &mut CliConfig) -> Result<(usize, usize), Failure> {
    let modes = cfg.dtn.modes.unwrap_or(8);
    let cells = at_least("dtn.cells", cfg.dtn.cells.unwrap_or(4096), 16)?;
    if modes > 256 {
        return Err(Failure::Config(format!(
            "dtn.modes: must be at most 256, got {modes}"
        )));
    }
    cfg.dtn.modes = Some(modes);
    cfg.dtn.cells = Some(cells);
    Ok((modes, cells))
}

pub fn dtn_spectrum_cmd(cfg: &mut CliConfig, run: &mut Run) -> Result<(), Failure> {
    let spec = cfg
        .dtn
        .profile
        .clone()
        .unwrap_or_else(|| "constant:1".into());
    let profile = load_profile(&spec, "dtn.profile", run)?;
    cfg.dtn.profile = Some(spec);
    let (modes, cells) = dtn_sizes(cfg)?;
    let mesh = RadialMesh::for_profile(&profile, cells)?;
    let s = dtn_spectrum(&profile, modes, &mesh)?;
    run.emit("dtn_spectrum", &mode_rows(&s))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CompareModeRow {
    pub n: usize,
    pub lambda_n: f64,
    pub other_lambda_n: f64,
}

impl CsvRecord for CompareModeRow {
    fn header() -> Vec<&'static str> {
        vec!["n", "lambda_n", "other_lambda_n"]
    }
    fn row(&self) -> Vec<String> {
        use edgelab_core::report::fmt_f64;
        vec![
            self.n.to_string(),
            fmt_f64(self.lambda_n),
            fmt_f64(self.other_lambda_n),
        ]
    }
}

pub fn dtn_compare(cfg: &mut CliConfig, run: &mut Run) -> Result<(), Failure> {
    let a_spec = required("dtn.profile", cfg.dtn.profile.clone())?;
    let b_spec = required("dtn.other_profile", cfg.dtn.other_profile.clone())?;
    let a = load_profile(&a_spec, "dtn.profile", run)?;
    let b = load_profile(&b_spec, "dtn.other_profile", run)?;
    let (modes, cells) = dtn_sizes(cfg)?;
    let sa = dtn_spectrum(&a, modes, &RadialMesh::for_profile(&a, cells)?)?;
    let sb = dtn_spectrum(&b, modes, &RadialMesh::for_profile(&b, cells)?)?;
    let cmp = compare_spectra(&sa, &sb)?;
    println!(
        "max |dev| = {:e}, distinguishable = {}",
        cmp.max_abs_dev, cmp.distinguishable
    );
    let rows: Vec<CompareModeRow> = sa
        .modes
        .iter()
        .zip(&sb.modes)
        .map(|(&(n, x), &(_, y))| CompareModeRow {
            n,
            lambda_n: x,
            other_lambda_n: y,
        })
        .collect();
    run.emit("dtn_compare", &[cmp])?;
    run.emit("dtn_compare_modes", &rows)
}

pub fn splitting_check(
    cfg: &mut CliConfig,
    run: &mut Run,
    seed_flag: Option<u64>,
) -> Result<(), Failure> {
    let dim_j = at_least("algebra.dim_j", cfg.algebra.dim_j.unwrap_or(8), 1)?;
    let dim_o = at_least("algebra.dim_o", cfg.algebra.dim_o.unwrap_or(8), 1)?;
    if dim_j > 64 || dim_o > 64 {
        return Err(Failure::Config(
            "algebra.dim_j/dim_o: must be at most 64".into(),
        ));
    }
    let trials = at_least("algebra.trials", cfg.algebra.trials.unwrap_or(100), 1)?;
    let seed = seed_flag.or(cfg.algebra.seed).unwrap_or(1);
    cfg.algebra = crate::config::AlgebraSection {
        dim_j: Some(dim_j),
        dim_o: Some(dim_o),
        trials: Some(trials),
        seed: Some(seed),
    };
    run.seed = Some(seed);
    let summary = run_trials(dim_j, dim_o, trials, seed)?;
    println!(
        "{} of {} passed, max deviation {:e}, scaled rejected {}",
        summary.passed, summary.trials, summary.max_deviation, summary.scaled_rejected
    );
    let ok = summary.failed == 0;
    run.emit("algebra_splitting_check", &[summary])?;
    if !ok {
        return Err(Failure::NotCertified("splitting lemma check failed".into()));
    }
    Ok(())
}
