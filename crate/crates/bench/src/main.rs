//! `dsbench`: generate data and workloads, build indexes, run query sweeps
//! and write CSV reports.
//!
//! Failures print one JSON object on stderr and exit with 1 (I/O, data or
//! parameter errors) or 2 (command-line usage).

mod cli;
mod commands;
mod report;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use cli::{Cli, Command};

fn error_kind(e: &anyhow::Error) -> &'static str {
    if let Some(d) = e.downcast_ref::<dsidx::Error>() {
        return d.kind();
    }
    if e.downcast_ref::<std::io::Error>().is_some() {
        return "io";
    }
    if e.downcast_ref::<csv::Error>().is_some() {
        return "csv";
    }
    "error"
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let args = match cli::expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return fail("config", format!("{e:#}"), 2),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim().to_string(), 2),
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::GenQueries(a) => commands::gen_queries_cmd(a),
        Command::GroundTruth(a) => commands::ground_truth(a),
        Command::Build(a) => commands::build(a),
        Command::Run(a) => commands::run(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(error_kind(&e), format!("{e:#}"), 1),
    }
}
