//! Command-line driver for the query-by-example pipeline.
//!
//! ```text
//! qbe <synth|train|index|query|eval|sweep> [--config PATH] [--seed U64] [--key value]...
//! ```
//!
//! Settings come from defaults, then the `--config` file, then `--key value`
//! overrides in order.

pub mod commands;
pub mod config;
pub mod error;
pub mod files;

use std::io::Write;

pub use config::RunConfig;
pub use error::{CliError, CliResult, EXIT_IO, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE};

pub const COMMANDS: [&str; 6] = ["synth", "train", "index", "query", "eval", "sweep"];

pub fn usage() -> String {
    format!(
        "usage: qbe <{}> [--config PATH] [--seed U64] [--key value]...",
        COMMANDS.join("|")
    )
}

/// Parses arguments (without the program name) into a command and config.
pub fn parse_args<S: AsRef<str>>(args: &[S]) -> CliResult<(String, RunConfig)> {
    let args: Vec<&str> = args.iter().map(AsRef::as_ref).collect();
    let Some((&cmd, rest)) = args.split_first() else {
        return Err(CliError::Usage(usage()));
    };
    if !COMMANDS.contains(&cmd) {
        return Err(CliError::Usage(format!("unknown command {cmd:?}; {}", usage())));
    }
    let mut pairs = Vec::new();
    let mut i = 0;
    while i < rest.len() {
        let Some(flag) = rest[i].strip_prefix("--") else {
            return Err(CliError::Usage(format!("unexpected argument {:?}", rest[i])));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k, v),
            None => {
                i += 1;
                let v = rest
                    .get(i)
                    .ok_or_else(|| CliError::Usage(format!("--{flag} needs a value")))?;
                (flag, *v)
            }
        };
        pairs.push((key.replace('-', "_"), value.to_owned()));
        i += 1;
    }
    let mut cfg = RunConfig::default();
    for (_, v) in pairs.iter().filter(|(k, _)| k == "config") {
        cfg.load_file(std::path::Path::new(v))?;
    }
    for (k, v) in pairs.iter().filter(|(k, _)| k != "config") {
        cfg.set(k, v)?;
    }
    Ok((cmd.to_owned(), cfg))
}

pub fn dispatch(cmd: &str, cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    match cmd {
        "synth" => commands::cmd_synth(cfg, out),
        "train" => commands::cmd_train(cfg, out),
        "index" => commands::cmd_index(cfg, out),
        "query" => commands::cmd_query(cfg, out),
        "eval" => commands::cmd_eval(cfg, out),
        "sweep" => commands::cmd_sweep(cfg, out),
        other => Err(CliError::Usage(format!("unknown command {other:?}"))),
    }
}

/// Runs one command and returns its exit code. Diagnostics go to `err`.
pub fn run<S: AsRef<str>>(args: &[S], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = parse_args(args).and_then(|(cmd, cfg)| dispatch(&cmd, &cfg, out));
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "qbe: {e}");
            e.exit_code()
        }
    }
}
