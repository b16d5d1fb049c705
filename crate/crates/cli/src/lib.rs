//! Command-line front end for the `epflow-core` experiments.
//!
//! Exit codes: 0 success, 1 invalid input, 2 results flagged low-confidence,
//! 3 internal error.

pub mod config;
pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context as _;
use clap::{CommandFactory, Parser};
use serde_json::{json, Map, Value};

use config::{ConfigError, Origin, Params, RawConfig};
use experiments::{Ctx, Experiment, EXPERIMENTS};
use output::{render, Format, Header};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_LOW_CONFIDENCE: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] epflow_core::Error),
    #[error(transparent)]
    Internal(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_INVALID,
            CliError::Core(epflow_core::Error::Divergent { .. }) => EXIT_INTERNAL,
            CliError::Core(_) => EXIT_INVALID,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

#[derive(Parser, Debug, Default)]
#[command(
    name = "epflow",
    version,
    about = "Run periodic-orbit, entropy and tear-chart experiments",
    override_usage = "epflow [OPTIONS] <EXPERIMENT> [--<key> <value>]...",
    after_help = experiment_list()
)]
struct Cli {
    /// Experiment to run (may also be given positionally)
    #[arg(long)]
    experiment: Option<String>,
    /// Configuration file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every random choice the experiment makes
    #[arg(long)]
    seed: Option<u64>,
    /// Results file; a `<out>.meta.json` sidecar is written next to it
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads (0 = one per core)
    #[arg(long)]
    threads: Option<usize>,
    /// Experiment name followed by `--key value` parameters
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, hide = true)]
    rest: Vec<String>,
}

fn experiment_list() -> String {
    let mut s = String::from("Experiments:\n");
    for e in EXPERIMENTS {
        s.push_str(&format!("  {:<14} {}\n", e.name, e.about));
    }
    s.push_str("\nRun `epflow <EXPERIMENT> --help` for its parameters.");
    s
}

fn experiment_help(e: &Experiment) -> String {
    let mut s = format!(
        "epflow {}: {}\n\nParameters (default in brackets):\n",
        e.name, e.about
    );
    for k in e.keys {
        s.push_str(&format!("  --{:<16} {} [{}]\n", k.name, k.help, k.default));
    }
    s.push_str(&format!("\nDefault format: {}\n", e.format.name()));
    s
}

/// Global settings after command line and config file are merged.
struct Globals {
    experiment: &'static Experiment,
    seed: u64,
    out: Option<PathBuf>,
    format: Format,
    threads: usize,
}

enum Parsed {
    Run(Globals, Params),
    Print(String),
}

fn parse_args(args: Vec<OsString>) -> Result<Parsed, CliError> {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(Parsed::Print(e.to_string())),
                _ => Err(CliError::Usage(e.to_string().trim_end().to_string())),
            };
        }
    };
    let Cli {
        mut experiment,
        mut config,
        mut seed,
        mut out,
        mut format,
        mut threads,
        rest,
    } = cli;

    // split the trailing words into an optional name and `--key value` pairs
    let mut flags: Vec<(String, String)> = Vec::new();
    let mut want_help = false;
    let mut it = rest.into_iter().peekable();
    if let Some(first) = it.peek() {
        if !first.starts_with("--") {
            let name = it.next().unwrap();
            if let Some(prev) = &experiment {
                if *prev != name {
                    return Err(CliError::Usage(format!(
                        "experiment given twice: `{prev}` and `{name}`"
                    )));
                }
            }
            experiment = Some(name);
        }
    }
    while let Some(tok) = it.next() {
        let Some(body) = tok.strip_prefix("--") else {
            return Err(CliError::Usage(format!(
                "unexpected argument `{tok}`; parameters are `--key value`"
            )));
        };
        if body == "help" {
            want_help = true;
            continue;
        }
        let (k, v) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => match it.next() {
                Some(v) => (body.to_string(), v),
                None => return Err(CliError::Usage(format!("flag `--{body}` needs a value"))),
            },
        };
        let k = config::normalize(&k);
        let bad = |what: &str| CliError::Usage(format!("flag `--{k}`: expected {what}, got `{v}`"));
        match k.as_str() {
            "experiment" => experiment = Some(v),
            "config" => config = Some(PathBuf::from(v)),
            "seed" => seed = Some(v.parse().map_err(|_| bad("a nonnegative integer"))?),
            "out" => out = Some(PathBuf::from(v)),
            "format" => format = Some(Format::parse(&v).ok_or_else(|| bad("csv or jsonl"))?),
            "threads" => threads = Some(v.parse().map_err(|_| bad("a nonnegative integer"))?),
            _ => flags.push((k, v)),
        }
    }

    let mut raw = match &config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    let file_experiment = raw.take("experiment");
    let file_seed = raw.take("seed");
    let file_out = raw.take("out");
    let file_format = raw.take("format");
    let file_threads = raw.take("threads");

    let name = match (experiment, file_experiment) {
        (Some(n), _) => n,
        (None, Some(e)) => e.value,
        (None, None) => {
            if want_help {
                return Ok(Parsed::Print(Cli::command().render_help().to_string()));
            }
            return Err(CliError::Usage(format!(
                "no experiment given\n\n{}",
                Cli::command().render_help()
            )));
        }
    };
    let Some(exp) = experiments::find(&name) else {
        return Err(CliError::Usage(format!(
            "unknown experiment `{name}`\n\n{}",
            experiment_list()
        )));
    };
    if want_help {
        return Ok(Parsed::Print(experiment_help(exp)));
    }

    let file_err = |e: &config::Entry, what: &str| -> CliError {
        ConfigError::At {
            origin: e.origin.clone(),
            msg: format!("expected {what}, got `{}`", e.value),
        }
        .into()
    };
    let seed = match (seed, &file_seed) {
        (Some(s), _) => s,
        (None, Some(e)) => e
            .value
            .parse()
            .map_err(|_| file_err(e, "a nonnegative integer seed"))?,
        (None, None) => DEFAULT_SEED,
    };
    let format = match (format, &file_format) {
        (Some(f), _) => f,
        (None, Some(e)) => Format::parse(&e.value).ok_or_else(|| file_err(e, "csv or jsonl"))?,
        (None, None) => exp.format,
    };
    let threads = match (threads, &file_threads) {
        (Some(t), _) => t,
        (None, Some(e)) => e.value.parse().map_err(|_| file_err(e, "a thread count"))?,
        (None, None) => 0,
    };
    let out = out.or(file_out.map(|e| PathBuf::from(e.value)));

    for (k, v) in &flags {
        raw.set_flag(k, v);
    }
    let params = Params::resolve(raw, exp.keys, exp.name)?;
    Ok(Parsed::Run(
        Globals {
            experiment: exp,
            seed,
            out,
            format,
            threads,
        },
        params,
    ))
}

fn header(g: &Globals, params: &Params) -> Header {
    let mut h = vec![
        (
            "tool".to_string(),
            format!("epflow {}", env!("CARGO_PKG_VERSION")),
        ),
        ("experiment".to_string(), g.experiment.name.to_string()),
        ("seed".to_string(), g.seed.to_string()),
    ];
    h.extend(params.iter().map(|(k, e)| (k.to_string(), e.value.clone())));
    h
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_os_string();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn metadata(g: &Globals, params: &Params, rows: usize, low_confidence: bool, secs: f64) -> Value {
    let resolved: Map<String, Value> = params
        .iter()
        .map(|(k, e)| {
            let source = match &e.origin {
                Origin::Default => "default".to_string(),
                other => other.to_string(),
            };
            (k.to_string(), json!({ "value": e.value, "source": source }))
        })
        .collect();
    json!({
        "tool": "epflow",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": g.experiment.name,
        "seed": g.seed,
        "format": g.format.name(),
        "parameters": resolved,
        "rows": rows,
        "low_confidence": low_confidence,
        "wall_time_secs": secs,
    })
}

fn execute(g: Globals, params: Params, stdout: &mut dyn std::io::Write) -> Result<u8, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(g.threads)
        .build()
        .context("cannot start worker threads")?;
    let started = Instant::now();
    let ctx = Ctx {
        params: &params,
        seed: g.seed,
    };
    let table = pool.install(|| (g.experiment.run)(&ctx))?;
    let secs = started.elapsed().as_secs_f64();
    let text = render(&table, &header(&g, &params), g.format);
    match &g.out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("cannot write {}", path.display()))?;
            let meta = metadata(&g, &params, table.rows.len(), table.low_confidence, secs);
            let side = sidecar_path(path);
            let body = serde_json::to_string_pretty(&meta).context("cannot encode metadata")?;
            std::fs::write(&side, body + "\n").with_context(|| format!("cannot write {}", side.display()))?;
        }
        None => stdout
            .write_all(text.as_bytes())
            .context("cannot write results")?,
    }
    Ok(if table.low_confidence {
        EXIT_LOW_CONFIDENCE
    } else {
        EXIT_OK
    })
}

/// Runs the command line `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let result = parse_args(args).and_then(|parsed| match parsed {
        Parsed::Print(text) => {
            stdout.write_all(text.as_bytes()).context("cannot write help")?;
            Ok(EXIT_OK)
        }
        Parsed::Run(g, params) => execute(g, params, stdout),
    });
    match result {
        Ok(code) => {
            if code == EXIT_LOW_CONFIDENCE {
                let _ = writeln!(stderr, "warning: results flagged low-confidence");
            }
            code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e:#}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (u8, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("epflow").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn every_experiment_has_unique_name_and_keys() {
        for (i, e) in EXPERIMENTS.iter().enumerate() {
            assert!(EXPERIMENTS[i + 1..].iter().all(|o| o.name != e.name));
            for (j, k) in e.keys.iter().enumerate() {
                assert!(
                    e.keys[j + 1..].iter().all(|o| o.name != k.name),
                    "{} {}",
                    e.name,
                    k.name
                );
                assert!(!["seed", "out", "format", "threads", "config", "experiment"].contains(&k.name));
            }
        }
    }

    #[test]
    fn empty_command_line_prints_usage() {
        let (code, _, err) = run_capture(&[]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("Usage"), "{err}");
    }

    #[test]
    fn experiment_help_lists_parameters() {
        let (code, out, _) = run_capture(&["abramov", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("--roof"));
    }

    #[test]
    fn unknown_flag_is_invalid() {
        let (code, _, err) = run_capture(&["census", "--bogus", "1"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("unknown key `bogus`"), "{err}");
    }

    #[test]
    fn flag_without_value_is_invalid() {
        let (code, _, err) = run_capture(&["census", "--flow"]);
        assert_eq!(code, EXIT_INVALID);
        assert!(err.contains("needs a value"));
    }

    #[test]
    fn sidecar_name_appends_suffix() {
        assert_eq!(
            sidecar_path(Path::new("a/b.csv")),
            PathBuf::from("a/b.csv.meta.json")
        );
    }
}
