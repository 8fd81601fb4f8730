use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fcdg_core::analysis::{dispersion_relation, operator_spectrum};
use fcdg_core::dg1d::{solve_transport_1d, Mesh1D, Transport1dConfig};
use fcdg_core::discretization::{BasisSpec, Discretization};
use fcdg_core::fc_basis::FcParams;
use fcdg_core::harness::{
    self, basis_values, fmt_float, parse_toml, run_convergence_study, run_long_time_study, BasisConfig,
    DispersionConfig, SpectrumConfig, StudyConfig,
};
use fcdg_core::line_dg2d::{solve_transport_2d, Transport2dConfig};
use fcdg_core::maxwell2d::{solve_maxwell_2d, Maxwell2dConfig};
use fcdg_core::operators::{
    assemble_fc_operators, cache_dir_from_env, condition_number, store_cache, BasisId,
};
use fcdg_core::Error;

/// FC-DG solvers, analysis and convergence studies.
#[derive(Parser)]
#[command(name = "fcdg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output file; defaults to `<config stem>_<subcommand>.csv` in the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble FC element operators and write them to the operator cache.
    Assemble(Io),
    /// Evaluate the basis functions on a uniform grid of [-1, 1].
    BasisDump(Io),
    /// 1-D periodic transport; writes (t, L2 error).
    Transport1d(Io),
    /// 2-D periodic transport; writes the final error.
    Transport2d(Io),
    /// 2-D TE Maxwell; writes the energy history and requested snapshots.
    Maxwell2d(Io),
    /// Bloch-wave dispersion relation.
    Dispersion(Io),
    /// Eigenvalues of the periodic 1-D operator.
    Spectrum(Io),
    /// Convergence study with a least-squares rate fit.
    Converge(Io),
    /// Error history of a long 1-D transport run.
    Longtime(Io),
}

impl Command {
    fn parts(&self) -> (&'static str, &Io) {
        match self {
            Command::Assemble(io) => ("assemble", io),
            Command::BasisDump(io) => ("basis-dump", io),
            Command::Transport1d(io) => ("transport1d", io),
            Command::Transport2d(io) => ("transport2d", io),
            Command::Maxwell2d(io) => ("maxwell2d", io),
            Command::Dispersion(io) => ("dispersion", io),
            Command::Spectrum(io) => ("spectrum", io),
            Command::Converge(io) => ("converge", io),
            Command::Longtime(io) => ("longtime", io),
        }
    }
}

/// Failure with its exit status: 2 for unusable input, 1 for runtime errors.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure { code: 2, message: e.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fcdg: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: &Command) -> Outcome {
    let (name, io) = command.parts();
    let text = std::fs::read_to_string(&io.config)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", io.config.display())))?;
    let out = io.out.clone().unwrap_or_else(|| default_output(&io.config, name));
    let cache = cache_dir_from_env();
    let cache = cache.as_deref();
    match command {
        Command::Assemble(_) => assemble(&text, io.out.as_deref(), cache),
        Command::BasisDump(_) => basis_dump(&text, &out),
        Command::Transport1d(_) => transport1d(&text, &out, cache),
        Command::Transport2d(_) => transport2d(&text, &out, cache),
        Command::Maxwell2d(_) => maxwell2d(&text, &out, cache),
        Command::Dispersion(_) => dispersion(&text, &out, cache),
        Command::Spectrum(_) => spectrum(&text, &out, cache),
        Command::Converge(_) => converge(&text, &out, cache),
        Command::Longtime(_) => longtime(&text, &out, cache),
    }
}

fn default_output(config: &Path, subcommand: &str) -> PathBuf {
    let stem = config.file_stem().map_or("fcdg".into(), |s| s.to_string_lossy().into_owned());
    PathBuf::from(format!("{stem}_{subcommand}.csv"))
}

/// `base` with `suffix` appended to its stem, keeping the extension.
fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map_or("fcdg".into(), |s| s.to_string_lossy().into_owned());
    let ext = base.extension().map_or("csv".into(), |e| e.to_string_lossy().into_owned());
    base.with_file_name(format!("{stem}_{suffix}.{ext}"))
}

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, Failure> {
    parse_toml(text).map_err(Failure::config)
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    let file = File::create(path).map_err(|e| Failure {
        code: 1,
        message: format!("cannot write {}: {e}", path.display()),
    })?;
    Ok(BufWriter::new(file))
}

fn discretization(spec: BasisSpec, quad: &fcdg_core::operators::QuadConfig, cache: Option<&Path>) -> Result<Discretization, Failure> {
    Discretization::new(spec, quad, cache).map_err(|e| match e {
        Error::InvalidParameter(_) => Failure::config(e),
        other => other.into(),
    })
}

fn assemble(text: &str, out: Option<&Path>, cache: Option<&Path>) -> Outcome {
    let cfg: BasisConfig = parse(text)?;
    let BasisSpec::Fc { n, p, m } = cfg.basis else {
        return Err(Failure::config("assemble applies to the fc basis; Legendre operators are closed-form"));
    };
    let params = FcParams::new(n, p, m).map_err(Failure::config)?;
    let ops = assemble_fc_operators(&params, &cfg.quadrature)?;
    let name = BasisId::fc(&params, &cfg.quadrature).file_name();
    let path = match (out, cache) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(dir)) => {
            std::fs::create_dir_all(dir)?;
            dir.join(name)
        }
        (None, None) => PathBuf::from(name),
    };
    store_cache(&ops, &path)?;
    println!("wrote {}", path.display());
    println!("mass condition number {}", fmt_float(condition_number(&ops.mass)?));
    Ok(())
}

fn basis_dump(text: &str, out: &Path) -> Outcome {
    let cfg: BasisConfig = parse(text)?;
    if cfg.samples < 1 {
        return Err(Failure::config("samples must be at least 1"));
    }
    let points: Vec<f64> = (0..=cfg.samples).map(|i| -1.0 + 2.0 * i as f64 / cfg.samples as f64).collect();
    let values = basis_values(cfg.basis, &points).map_err(|e| match e {
        Error::InvalidParameter(_) => Failure::config(e),
        other => other.into(),
    })?;
    harness::write_basis_csv(create(out)?, &points, &values)?;
    Ok(())
}

fn transport1d(text: &str, out: &Path, cache: Option<&Path>) -> Outcome {
    let cfg: Transport1dConfig = parse(text)?;
    cfg.validate().map_err(Failure::config)?;
    let disc = discretization(cfg.basis, &Default::default(), cache)?;
    let run = solve_transport_1d(&cfg, &disc)?;
    harness::write_history_csv(create(out)?, &run.history, "t,l2_error")?;
    println!("final L2 error {} after {} steps", fmt_float(run.final_error()), run.steps);
    Ok(())
}

fn transport2d(text: &str, out: &Path, cache: Option<&Path>) -> Outcome {
    let cfg: Transport2dConfig = parse(text)?;
    cfg.validate().map_err(Failure::config)?;
    let disc = discretization(cfg.basis, &Default::default(), cache)?;
    let run = solve_transport_2d(&cfg, &disc)?;
    harness::write_history_csv(create(out)?, &[(cfg.t_final, run.l2_error)], "t,l2_error")?;
    println!("final L2 error {} after {} steps", fmt_float(run.l2_error), run.steps);
    Ok(())
}

fn maxwell2d(text: &str, out: &Path, cache: Option<&Path>) -> Outcome {
    let cfg: Maxwell2dConfig = parse(text)?;
    cfg.validate().map_err(Failure::config)?;
    let disc = discretization(cfg.basis, &Default::default(), cache)?;
    let run = solve_maxwell_2d(&cfg, &disc)?;
    harness::write_history_csv(create(out)?, &run.energy, "t,energy")?;
    for snap in &run.snapshots {
        let path = sibling(out, &format!("t{}", snap.time));
        harness::write_snapshot_csv(create(&path)?, snap)?;
        println!("snapshot t = {} -> {}", snap.time, path.display());
    }
    if let Some(err) = run.hz_error {
        println!("Hz L2 error {}", fmt_float(err));
    }
    Ok(())
}

fn dispersion(text: &str, out: &Path, cache: Option<&Path>) -> Outcome {
    let cfg: DispersionConfig = parse(text)?;
    if !(cfg.k_max > 0.0) || cfg.samples == 0 {
        return Err(Failure::config("k_max and samples must be positive"));
    }
    let disc = discretization(cfg.basis, &cfg.quadrature, cache)?;
    let result = dispersion_relation(&disc, cfg.flux, &cfg.wavenumbers())?;
    harness::write_dispersion_csv(create(out)?, &result)?;
    let flagged = result.points.iter().filter(|p| p.ambiguous).count();
    if flagged > 0 {
        println!("{flagged} wavenumbers with ambiguous branch selection");
    }
    Ok(())
}

fn spectrum(text: &str, out: &Path, cache: Option<&Path>) -> Outcome {
    let cfg: SpectrumConfig = parse(text)?;
    let mesh = Mesh1D::uniform(cfg.domain[0], cfg.domain[1], cfg.n_el).map_err(Failure::config)?;
    let disc = discretization(cfg.basis, &cfg.quadrature, cache)?;
    let result = operator_spectrum(&disc, &mesh, cfg.flux)?;
    harness::write_spectrum_csv(create(out)?, &result)?;
    println!(
        "spectral radius {} max |Im| {} max Re {}",
        fmt_float(result.spectral_radius),
        fmt_float(result.max_imag),
        fmt_float(result.max_real())
    );
    Ok(())
}

fn study(text: &str) -> Result<StudyConfig, Failure> {
    let cfg = StudyConfig::from_toml(text).map_err(Failure::config)?;
    cfg.problem().map_err(Failure::config)?;
    Ok(cfg)
}

fn converge(text: &str, out: &Path, cache: Option<&Path>) -> Outcome {
    let cfg = study(text)?;
    if cfg.n_el.is_empty() {
        return Err(Failure::config("`n_el` sweep must not be empty"));
    }
    let report = run_convergence_study(&cfg, cache)?;
    harness::write_convergence_csv(create(out)?, &report)?;
    harness::write_fit_csv(create(&sibling(out, "fit"))?, &report)?;
    println!("fitted rate {:.2}", report.rate);
    if let Some(s) = report.saturation {
        println!("saturation {s:.3e}");
    }
    Ok(())
}

fn longtime(text: &str, out: &Path, cache: Option<&Path>) -> Outcome {
    let cfg = study(text)?;
    let rows = run_long_time_study(&cfg, cache)?;
    harness::write_history_csv(create(out)?, &rows, "t,l2_error")?;
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        println!("L2 error {} at t = 0, {} at t = {}", fmt_float(first.1), fmt_float(last.1), last.0);
    }
    Ok(())
}
