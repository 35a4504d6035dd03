mod args;
mod commands;
mod error;
mod manifest;

use clap::Parser;

use args::{AnalysisArgs, Cli, Command};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    let file = match &cli.config {
        Some(p) => args::load_config(p)?,
        None => AnalysisArgs::default(),
    };
    match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Transform(a) => commands::transform(a, &file),
        Command::Match(a) => commands::matched(a, &file),
        Command::Ridges(a) => commands::ridges(a, &file),
        Command::Separate(a) => commands::separate_cmd(a, &file),
        Command::Benchmark(a) => commands::benchmark(a, &file),
        Command::Stream(a) => commands::stream(a, &file),
        Command::ExportPlot(a) => commands::export_plot(a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
