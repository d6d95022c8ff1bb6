use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand as ClapSubcommand};
use tfmhd_core::diagnostics::max_relative_drift;
use tfmhd_core::harness::{convergence_study, lemma_rate_study, simulate, ExperimentKind, LemmaKind, Startup};
use tfmhd_core::stepper::Formulation;
use tfmhd_core::verify::identity_suite;
use tfmhd_core::MhdError;

mod config;
mod output;

use config::{parse_dts, resolve, CliConfig, ConfigError, Settings, Subcommand};
use output::{CsvSink, DIAG_COLUMNS, LEMMA_COLUMNS, RATE_COLUMNS};

#[derive(Parser, Debug)]
#[command(name = "tfmhd", version, about = "Time-filtered backward Euler solver for 2D periodic MHD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(ClapSubcommand, Debug)]
enum Command {
    /// Manufactured-solution convergence study; writes rates.csv
    Converge,
    /// Ideal Orszag–Tang conservation run; writes a diagnostics CSV
    OrszagTang,
    /// Single run of the kind chosen by --kind or [run] kind
    Run,
    /// Consistency rates of the filter and BDF2 stencils; writes lemma_rates.csv
    LemmaRates,
    /// Randomised checks of the algebraic identities the scheme relies on
    Verify {
        /// Random trials per check
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

#[derive(Clone, Debug)]
struct DtList(Vec<f64>);

fn dt_list(s: &str) -> Result<DtList, String> {
    parse_dts(s).map(DtList)
}

#[derive(Args, Debug)]
struct Options {
    /// INI config file; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Side length of the periodic square
    #[arg(long, global = true)]
    length: Option<f64>,
    /// Inverse Reynolds number
    #[arg(long, global = true)]
    re_inv: Option<f64>,
    /// Inverse magnetic Reynolds number
    #[arg(long, global = true)]
    rem_inv: Option<f64>,
    /// Coupling number
    #[arg(long, global = true)]
    s: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    t_end: Option<f64>,
    #[arg(long, global = true)]
    picard_tol: Option<f64>,
    #[arg(long, global = true)]
    picard_max_iters: Option<usize>,
    /// two_step or combined
    #[arg(long, global = true)]
    formulation: Option<Formulation>,
    /// Plain backward Euler (no time filter)
    #[arg(long, global = true)]
    no_filter: bool,
    /// Keep the unfiltered pressure
    #[arg(long, global = true)]
    no_filter_pressure: bool,
    /// manufactured or orszag_tang
    #[arg(long, global = true)]
    kind: Option<ExperimentKind>,
    /// Comma-separated step sizes, largest first
    #[arg(long, global = true, value_parser = dt_list)]
    dts: Option<DtList>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// exact or be
    #[arg(long, global = true)]
    startup: Option<Startup>,
    /// More log output (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Options {
    fn settings(&self) -> Settings {
        Settings {
            n: self.n,
            length: self.length,
            re_inv: self.re_inv,
            rem_inv: self.rem_inv,
            s: self.s,
            dt: self.dt,
            t_end: self.t_end,
            picard_tol: self.picard_tol,
            picard_max_iters: self.picard_max_iters,
            formulation: self.formulation,
            filter: self.no_filter.then_some(false),
            filter_pressure: self.no_filter_pressure.then_some(false),
            kind: self.kind,
            dts: self.dts.clone().map(|d| d.0),
            output_dir: self.output_dir.clone(),
            seed: self.seed,
            startup: self.startup,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.opts.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<MhdError>() {
        Some(MhdError::InvalidParams(_) | MhdError::InvalidGrid(_)) => 2,
        _ => 1,
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let cmd = match cli.command {
        Command::Converge => Subcommand::Converge,
        Command::OrszagTang => Subcommand::OrszagTang,
        Command::Run => Subcommand::Run,
        Command::LemmaRates => Subcommand::LemmaRates,
        Command::Verify { .. } => Subcommand::Verify,
    };
    let file = match &cli.opts.config {
        Some(path) => Settings::from_file(path)?,
        None => Settings::default(),
    };
    let cfg = resolve(cmd, file, cli.opts.settings())?;
    log::info!("{} with {:?}", cmd.name(), cfg.run);
    if cmd != Subcommand::Verify {
        std::fs::create_dir_all(&cfg.output_dir)
            .with_context(|| format!("cannot create output directory {}", cfg.output_dir.display()))?;
    }
    match cli.command {
        Command::Converge => converge(&cfg),
        Command::OrszagTang | Command::Run => run(&cfg),
        Command::LemmaRates => lemma_rates(&cfg),
        Command::Verify { trials } => verify(&cfg, trials),
    }
}

fn converge(cfg: &CliConfig) -> Result<()> {
    let path = cfg.output_dir.join("rates.csv");
    let mut sink = CsvSink::create(&path, &RATE_COLUMNS)?;
    let rows = match convergence_study(&cfg.run) {
        Ok(rows) => rows,
        Err(e) => {
            sink.truncate()?;
            return Err(e.into());
        }
    };
    for r in &rows {
        sink.row(&output::rate_fields(r))?;
    }
    let max_div = rows.iter().map(|r| r.max_div).fold(0.0, f64::max);
    let mut out = std::io::stdout().lock();
    output::print_rates(&mut out, &rows)?;
    writeln!(out, "max relative divergence {max_div:.3e}")?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn run(cfg: &CliConfig) -> Result<()> {
    let kind = match cfg.run.kind {
        ExperimentKind::Manufactured => "manufactured",
        ExperimentKind::OrszagTang => "orszag_tang",
    };
    let filter = if cfg.run.params.filter_enabled { "filtered" } else { "unfiltered" };
    let path = cfg.output_dir.join(format!("{kind}_{filter}.csv"));
    let mut sink = CsvSink::create(&path, &DIAG_COLUMNS)?;

    let mut first = None;
    let mut last = None;
    let mut composites = (Vec::new(), Vec::new());
    let (mut worst_identity, mut worst_div) = (0.0f64, 0.0f64);
    let result = simulate(&cfg.run, |rec, _| {
        sink.row(&output::diag_fields(rec)).map_err(|e| MhdError::Aborted(format!("{e:#}")))?;
        if rec.step >= 1 {
            composites.0.push(rec.energy_composite);
            composites.1.push(rec.helicity_composite);
        }
        worst_identity = worst_identity.max(rec.energy_identity_residual).max(rec.helicity_identity_residual);
        worst_div = worst_div.max(rec.div_u).max(rec.div_b);
        first.get_or_insert_with(|| rec.clone());
        last = Some(rec.clone());
        Ok(())
    });
    if let Err(e) = result {
        sink.truncate()?;
        return Err(e.into());
    }
    let (Some(first), Some(last)) = (first, last) else { bail!("run produced no records") };
    let mut out = std::io::stdout().lock();
    writeln!(out, "steps            {}", last.step)?;
    writeln!(out, "energy           {:.12e} -> {:.12e}", first.energy, last.energy)?;
    writeln!(out, "relative change  {:.3e}", ((last.energy - first.energy) / first.energy).abs())?;
    writeln!(out, "cross helicity   {:.12e} -> {:.12e}", first.cross_helicity, last.cross_helicity)?;
    writeln!(out, "composite drift  energy {:.3e}, helicity {:.3e}", max_relative_drift(composites.0), max_relative_drift(composites.1))?;
    writeln!(out, "identity residual max {worst_identity:.3e}")?;
    writeln!(out, "divergence max   {worst_div:.3e}")?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn lemma_rates(cfg: &CliConfig) -> Result<()> {
    let path = cfg.output_dir.join("lemma_rates.csv");
    let mut sink = CsvSink::create(&path, &LEMMA_COLUMNS)?;
    let mut out = std::io::stdout().lock();
    for kind in [LemmaKind::FilterConsistency, LemmaKind::Bdf2Consistency] {
        for row in lemma_rate_study(kind, &cfg.run.dts) {
            sink.row(&output::lemma_fields(&row))?;
            let slope = row.slope.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into());
            writeln!(out, "{:<20} dt {:<10} quantity {:.6e} slope {slope}", kind.name(), row.dt, row.quantity)?;
        }
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn verify(cfg: &CliConfig, trials: usize) -> Result<()> {
    let outcomes = identity_suite(cfg.seed, trials, cfg.run.n)?;
    let mut out = std::io::stdout().lock();
    for o in &outcomes {
        writeln!(out, "{o}")?;
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        bail!("{failed} of {} identity checks failed", outcomes.len());
    }
    Ok(())
}
