mod commands;

use std::process::ExitCode;

use clap::Parser;
use lpform_core::Error;

use commands::Cli;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::Shape { .. } | Error::SamplingExhausted { .. } => 2,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::Format(_)
        | Error::NodeOutOfRange { .. }
        | Error::FeatureRowMismatch { .. } => 3,
        Error::Numeric(_) => 4,
    }
}

fn kind(e: &Error) -> &'static str {
    match exit_code(e) {
        2 => "config",
        3 => "io",
        _ => "numeric",
    }
}

fn configure_threads() -> lpform_core::Result<()> {
    let Ok(raw) = std::env::var("LPFORM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("LPFORM_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| commands::run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace(['\n', '\t'], " ");
            eprintln!("error\t{}\t{msg}", kind(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
