use std::process::ExitCode;

use clap::Parser;
use iotgen::cli::{merged_config, run, Cli};

fn init_logging(level: &str) {
    let env = env_logger::Env::default().default_filter_or(level);
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = merged_config(&cli).and_then(|cfg| {
        init_logging(&cfg.log_level);
        run(&cli, &cfg)
    });
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iotgen: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
