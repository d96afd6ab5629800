//! `edgelab` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 unclassifiable
//! analysis, 3 certification failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{Failure, Format, Run};
use config::{CliConfig, Sweep};

#[derive(Parser, Debug)]
#[command(
    name = "edgelab",
    version,
    about = "Edge-symbol, weighted-space and DtN analyses"
)]
struct Cli {
    /// JSON config file, or a run manifest to replay.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Both,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Edge-symbol classification and bordering.
    #[command(subcommand)]
    Edge(EdgeCmd),
    /// Weighted-space membership.
    #[command(subcommand)]
    Space(SpaceCmd),
    /// Radial Dirichlet-to-Neumann spectra.
    #[command(subcommand)]
    Dtn(DtnCmd),
    /// Splitting lemma checks.
    #[command(subcommand)]
    Algebra(AlgebraCmd),
}

#[derive(Subcommand, Debug)]
enum EdgeCmd {
    Classify(ClassifyArgs),
    SweepGamma(SweepArgs),
    Augment(AugmentArgs),
}

#[derive(Subcommand, Debug)]
enum SpaceCmd {
    Member(MemberArgs),
}

#[derive(Subcommand, Debug)]
enum DtnCmd {
    Spectrum(SpectrumArgs),
    Compare(CompareArgs),
}

#[derive(Subcommand, Debug)]
enum AlgebraCmd {
    SplittingCheck(SplitArgs),
}

#[derive(Args, Debug, Default)]
struct MeshArgs {
    #[arg(long)]
    r_max: Option<f64>,
    #[arg(long)]
    n_points: Option<usize>,
    #[arg(long)]
    grading: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
}

#[derive(Args, Debug)]
struct SymbolArgs {
    #[arg(long, allow_hyphen_values = true)]
    xi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    sigma0: Option<f64>,
    #[command(flatten)]
    mesh: MeshArgs,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[command(flatten)]
    symbol: SymbolArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[command(flatten)]
    symbol: SymbolArgs,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// boundary_row or coboundary_column.
    #[arg(long)]
    mode: Option<String>,
    /// `default` or a JSON φ table.
    #[arg(long)]
    phi: Option<String>,
    #[command(flatten)]
    symbol: SymbolArgs,
}

#[derive(Args, Debug)]
struct MemberArgs {
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[arg(long)]
    s: Option<u8>,
    /// Test `r^alpha e^{-r}`.
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    /// Test in the dual space of order 2 − s and weight 2 − γ.
    #[arg(long)]
    dual: bool,
    #[command(flatten)]
    mesh: MeshArgs,
}

#[derive(Args, Debug)]
struct DtnArgs {
    #[arg(long)]
    modes: Option<usize>,
    #[arg(long)]
    cells: Option<usize>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    /// Profile JSON file, `catalog:<i>` or `constant:<c>`.
    #[arg(long)]
    profile: Option<String>,
    #[command(flatten)]
    dtn: DtnArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    other: Option<String>,
    #[command(flatten)]
    dtn: DtnArgs,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    dim_j: Option<usize>,
    #[arg(long)]
    dim_o: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
}

fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

fn merge_mesh(cfg: &mut CliConfig, m: MeshArgs) {
    set(&mut cfg.mesh.r_max, m.r_max);
    set(&mut cfg.mesh.n_points, m.n_points);
    set(&mut cfg.mesh.grading_exponent, m.grading);
    set(&mut cfg.mesh.levels, m.levels);
}

fn merge_symbol(cfg: &mut CliConfig, s: SymbolArgs) {
    set(&mut cfg.edge.xi_norm, s.xi);
    set(&mut cfg.edge.sigma0, s.sigma0);
    merge_mesh(cfg, s.mesh);
}

fn merge_sweep(cfg: &mut CliConfig, a: &SweepArgs) -> Result<(), Failure> {
    let base = cfg.edge.sweep;
    let pick = |flag: Option<f64>, file: Option<f64>, field: &str| {
        flag.or(file)
            .ok_or_else(|| Failure::Config(format!("edge.sweep.{field}: is required")))
    };
    let from = pick(a.from, base.map(|s| s.from), "from")?;
    let to = pick(a.to, base.map(|s| s.to), "to")?;
    let steps = a
        .steps
        .or(base.map(|s| s.steps))
        .ok_or_else(|| Failure::Config("edge.sweep.steps: is required".into()))?;
    cfg.edge.sweep = Some(Sweep { from, to, steps });
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(p) => config::load(p)?,
        None => CliConfig::default(),
    };
    let mut inputs = Vec::new();
    if let Some(p) = &cli.config {
        inputs.push(p.clone());
    }
    if let Some(d) = cli.out {
        cfg.output.directory = Some(d);
    }
    if let Some(f) = cli.format {
        let s = match f {
            FormatArg::Csv => "csv",
            FormatArg::Json => "json",
            FormatArg::Both => "both",
        };
        cfg.output.formats = Some(s.into());
    }
    let format = Format::parse(cfg.output.formats.as_deref().unwrap_or("both"))?;
    let dir = cfg
        .output
        .directory
        .clone()
        .unwrap_or_else(|| PathBuf::from("."));
    cfg.output.formats = Some(format.as_str().into());
    cfg.output.directory = Some(dir.clone());
    let mut run = Run::new(dir, format);
    run.manifest_inputs = inputs;

    let (name, slug) = match cli.command {
        Command::Edge(EdgeCmd::Classify(a)) => {
            set(&mut cfg.edge.gamma, a.gamma);
            merge_symbol(&mut cfg, a.symbol);
            commands::edge_classify(&mut cfg, &mut run)?;
            ("edge classify", "edge_classify")
        }
        Command::Edge(EdgeCmd::SweepGamma(a)) => {
            merge_sweep(&mut cfg, &a)?;
            merge_symbol(&mut cfg, a.symbol);
            commands::edge_sweep(&mut cfg, &mut run)?;
            ("edge sweep-gamma", "edge_sweep_gamma")
        }
        Command::Edge(EdgeCmd::Augment(a)) => {
            set(&mut cfg.edge.gamma, a.gamma);
            set(&mut cfg.borders.mode, a.mode);
            set(&mut cfg.borders.phi, a.phi);
            merge_symbol(&mut cfg, a.symbol);
            let res = commands::edge_augment(&mut cfg, &mut run);
            if let Err(Failure::NotCertified(_)) = &res {
                run.finish("edge augment", "edge_augment", &cfg)?;
            }
            res?;
            ("edge augment", "edge_augment")
        }
        Command::Space(SpaceCmd::Member(a)) => {
            set(&mut cfg.space.gamma, a.gamma);
            set(&mut cfg.space.s, a.s);
            set(&mut cfg.space.alpha, a.alpha);
            if a.dual {
                cfg.space.dual = Some(true);
            }
            merge_mesh(&mut cfg, a.mesh);
            commands::space_member(&mut cfg, &mut run)?;
            ("space member", "space_member")
        }
        Command::Dtn(DtnCmd::Spectrum(a)) => {
            set(&mut cfg.dtn.profile, a.profile);
            set(&mut cfg.dtn.modes, a.dtn.modes);
            set(&mut cfg.dtn.cells, a.dtn.cells);
            commands::dtn_spectrum_cmd(&mut cfg, &mut run)?;
            ("dtn spectrum", "dtn_spectrum")
        }
        Command::Dtn(DtnCmd::Compare(a)) => {
            set(&mut cfg.dtn.profile, a.profile);
            set(&mut cfg.dtn.other_profile, a.other);
            set(&mut cfg.dtn.modes, a.dtn.modes);
            set(&mut cfg.dtn.cells, a.dtn.cells);
            commands::dtn_compare(&mut cfg, &mut run)?;
            ("dtn compare", "dtn_compare")
        }
        Command::Algebra(AlgebraCmd::SplittingCheck(a)) => {
            set(&mut cfg.algebra.dim_j, a.dim_j);
            set(&mut cfg.algebra.dim_o, a.dim_o);
            set(&mut cfg.algebra.trials, a.trials);
            commands::splitting_check(&mut cfg, &mut run, cli.seed)?;
            ("algebra splitting-check", "algebra_splitting_check")
        }
    };
    run.finish(name, slug, &cfg)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
