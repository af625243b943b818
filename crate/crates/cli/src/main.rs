//! `ordpat` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 I/O error.

mod args;
mod run;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::{Cli, Command, OutputArgs};

const USAGE: u8 = 1;
const DATA: u8 = 2;
const IO: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

/// Resolves `--out` and `--output` to a format and an optional file.
fn destination(out: &OutputArgs) -> (Format, Option<PathBuf>) {
    let from_ext = |p: &Path| match p.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
        _ => Format::Json,
    };
    let (format, path) = match out.out.as_str() {
        "json" => (Format::Json, out.output.clone()),
        "csv" => (Format::Csv, out.output.clone()),
        other => {
            let p = PathBuf::from(other);
            (from_ext(&p), Some(p))
        }
    };
    let path = path.map(|p| match std::env::var_os("ORDPAT_OUTPUT_DIR") {
        Some(dir) if p.is_relative() => Path::new(&dir).join(p),
        _ => p,
    });
    (format, path)
}

fn output_args(command: &Command) -> &OutputArgs {
    match command {
        Command::Patterns(a) => &a.output,
        Command::Summary(a) => &a.output,
        Command::TestBm(a) => &a.output,
        Command::Bienayme(a) => &a.output,
        Command::Changepoint(a) => &a.output,
        Command::Segment(a) => &a.output,
        Command::Local(a) => &a.output,
        Command::Simulate(a) => &a.output,
        Command::VarianceLag(a) => &a.output,
    }
}

fn config_echo(command: &Command) -> serde_json::Value {
    let v = match command {
        Command::Patterns(a) => serde_json::to_value(a),
        Command::Summary(a) => serde_json::to_value(a),
        Command::TestBm(a) => serde_json::to_value(a),
        Command::Bienayme(a) => serde_json::to_value(a),
        Command::Changepoint(a) => serde_json::to_value(a),
        Command::Segment(a) => serde_json::to_value(a),
        Command::Local(a) => serde_json::to_value(a),
        Command::Simulate(a) => serde_json::to_value(a),
        Command::VarianceLag(a) => serde_json::to_value(a),
    };
    v.expect("arguments serialize")
}

fn exit_code(e: &ordpat::Error) -> u8 {
    if e.is_io_error() {
        IO
    } else if e.is_data_error() {
        DATA
    } else {
        USAGE
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let artifact = match run::execute(&cli.command) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };

    let (format, path) = destination(output_args(&cli.command));
    let body = match format {
        Format::Csv => artifact.csv,
        Format::Json => {
            let envelope = json!({
                "tool": "ordpat",
                "version": env!("CARGO_PKG_VERSION"),
                "command": cli.command.name(),
                "config": config_echo(&cli.command),
                "seed": artifact.seed,
                "result": artifact.result,
            });
            let mut s = serde_json::to_string_pretty(&envelope).expect("envelope serializes");
            s.push('\n');
            s
        }
    };
    let written = match &path {
        Some(p) => std::fs::write(p, body).map_err(|e| format!("{}: {e}", p.display())),
        None => std::io::stdout()
            .lock()
            .write_all(body.as_bytes())
            .map_err(|e| format!("stdout: {e}")),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(IO)
        }
    }
}
