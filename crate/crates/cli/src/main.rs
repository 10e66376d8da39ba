use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use quasipar_cli::{output_dir, run, CliError, Mode, RunConfig};

/// Run checks and solvers for quasilinear parabolic systems on the torus.
#[derive(Parser, Debug)]
#[command(name = "quasipar", version)]
struct Args {
    /// TOML run configuration; without it `--mode` must be given and defaults apply.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output root (the mode name is appended); defaults to $QUASIPAR_OUT or ./quasipar-out.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel sections.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
}

fn main_inner(args: Args) -> Result<PathBuf, CliError> {
    let mut cfg = match (&args.config, args.mode) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(m)) => RunConfig::with_mode(m),
        (None, None) => return Err(CliError::Usage("either --config or --mode is required".into())),
    };
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let dir = output_dir(args.out.as_deref(), &cfg);
    run(&cfg, &dir)?;
    Ok(dir)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("bad arguments").trim_start_matches("error: ");
            eprintln!("{}", CliError::Usage(first.to_string()).line());
            return ExitCode::from(CliError::USAGE as u8);
        }
    };
    match main_inner(args) {
        Ok(dir) => {
            println!("{}", dir.join("report.kv").display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.code() as u8)
        }
    }
}
