use clap::{Parser, Subcommand};
use rotorlab_cli::{experiments, plot, run_experiment, sweep, CliError, CliResult, RunConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "rotorlab", version, about = "Kicked-rotor experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config.
    Run {
        config: PathBuf,
        /// Override a parameter, as key=value. Repeatable.
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a config once per value of one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated; brackets group list values.
        #[arg(long)]
        values: String,
        #[arg(long = "set")]
        set: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract plot-ready data for a figure of a finished run.
    Plotdata {
        manifest: PathBuf,
        #[arg(long)]
        figure: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List experiments with their parameters and figures.
    ListExperiments,
}

fn load(path: &PathBuf, set: &[String]) -> CliResult<RunConfig> {
    let mut c = RunConfig::load(path)?;
    for s in set {
        c.apply_set(s)?;
    }
    Ok(c)
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run { config, set, seed, out } => {
            let mut c = load(&config, &set)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            if out.is_some() {
                c.out = out;
            }
            let m = run_experiment(&c)?;
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", rotorlab_cli::out_dir(&c).display());
        }
        Command::Sweep { config, axis, values, set, out } => {
            let c = load(&config, &set)?;
            let root = out.unwrap_or_else(|| rotorlab_cli::out_dir(&c).join(format!("sweep_{axis}")));
            sweep::run_sweep(&c, &axis, &values, &root)?;
            println!("{}", root.display());
        }
        Command::Plotdata { manifest, figure, out } => {
            let dir = plot::emit_plotdata(&manifest, &figure, out.as_deref())?;
            println!("{}", dir.display());
        }
        Command::ListExperiments => {
            for e in experiments::registry() {
                println!("{}  {}", e.id, e.summary);
                for p in (e.schema)() {
                    println!("    {:<18} {:<10} {}  ({})", p.key, format!("{:?}", p.kind), p.default, p.help);
                }
                let figs: Vec<&str> = e.figures.iter().map(|f| f.id).collect();
                println!("    figures: {}", figs.join(", "));
            }
        }
    }
    Ok(())
}

fn main() {
    if let Some(n) = std::env::var("ROTORLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        let e: &CliError = &e;
        std::process::exit(e.exit_code());
    }
}
