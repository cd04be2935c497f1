use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::commands::{self, Ctx, Status};
use crate::{Cli, Command, ReplayArgs};

pub const FLAGGED: u8 = 1;
pub const VIOLATED: u8 = 2;
pub const USAGE: u8 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(e: impl Display) -> Self {
        CliError {
            code: USAGE,
            message: e.to_string(),
        }
    }

    pub fn violated(e: impl Display) -> Self {
        CliError {
            code: VIOLATED,
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command and check it reproduced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub argv: Vec<String>,
    pub command: String,
    pub seed: String,
    pub trials: u64,
    pub format: String,
    pub config: Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub exit_code: u8,
    pub summary: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::Pass => 0,
        Status::Flagged => FLAGGED,
        Status::Violated => VIOLATED,
    }
}

fn command_name(c: &Command) -> String {
    match serde_json::to_value(c) {
        Ok(Value::Object(m)) => m.keys().next().cloned().unwrap_or_default(),
        _ => String::new(),
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, body).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn execute(cli: Cli, argv: &[String]) -> Result<u8, CliError> {
    if let Command::Replay(args) = &cli.command {
        return replay(args);
    }
    let mut ctx = Ctx::new(&cli.global);
    let outcome = commands::dispatch(&cli.command, &mut ctx)?;
    let code = status_code(outcome.status);
    let output = match &cli.global.out {
        Some(path) => {
            write_file(path, &outcome.body)?;
            FileHash {
                path: path.display().to_string(),
                sha256: sha256_hex(outcome.body.as_bytes()),
            }
        }
        None => {
            print!("{}", outcome.body);
            FileHash {
                path: "-".into(),
                sha256: sha256_hex(outcome.body.as_bytes()),
            }
        }
    };
    let manifest = RunManifest {
        tool: "ergodic".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        argv: argv.to_vec(),
        command: command_name(&cli.command),
        seed: cli.global.seed.to_hex(),
        trials: cli.global.trials,
        format: format!("{:?}", cli.global.format).to_lowercase(),
        config: serde_json::to_value(&cli.command).map_err(CliError::usage)?,
        inputs: ctx.inputs,
        outputs: vec![output],
        exit_code: code,
        summary: outcome.summary,
    };
    let target = cli.global.run_manifest.clone().or_else(|| {
        cli.global.out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".run.json");
            PathBuf::from(s)
        })
    });
    match target {
        Some(path) => {
            let text = serde_json::to_string_pretty(&manifest).map_err(CliError::usage)? + "\n";
            write_file(&path, &text)?;
        }
        None => eprintln!(
            "{}",
            serde_json::to_string(&manifest).map_err(CliError::usage)?
        ),
    }
    Ok(code)
}

fn replay(args: &ReplayArgs) -> Result<u8, CliError> {
    let text = fs::read_to_string(&args.manifest)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.manifest.display())))?;
    let recorded: RunManifest = serde_json::from_str(&text).map_err(CliError::usage)?;
    let mut changed_inputs = Vec::new();
    for input in &recorded.inputs {
        let now = fs::read(&input.path)
            .map(|b| sha256_hex(&b))
            .unwrap_or_else(|_| "missing".into());
        if now != input.sha256 {
            changed_inputs
                .push(json!({"path": input.path, "expected": input.sha256, "actual": now}));
        }
    }
    let cli = Cli::try_parse_from(
        std::iter::once("ergodic".to_string()).chain(recorded.argv.iter().cloned()),
    )
    .map_err(|e| CliError::usage(format!("recorded command line does not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::usage("a replay cannot be replayed"));
    }
    let mut ctx = Ctx::new(&cli.global);
    let outcome = commands::dispatch(&cli.command, &mut ctx)?;
    let code = status_code(outcome.status);
    let sha = sha256_hex(outcome.body.as_bytes());
    let mut outputs = Vec::new();
    for expected in &recorded.outputs {
        let path = match (&args.into, &cli.global.out) {
            (Some(dir), Some(out)) => Some(dir.join(out.file_name().unwrap_or(out.as_os_str()))),
            (None, Some(out)) => Some(out.clone()),
            _ => None,
        };
        if let Some(p) = &path {
            write_file(p, &outcome.body)?;
        }
        outputs.push(json!({
            "recorded": expected.path,
            "written": path.map(|p| p.display().to_string()),
            "expected": expected.sha256,
            "actual": sha,
            "matched": expected.sha256 == sha,
        }));
    }
    let reproduced = changed_inputs.is_empty()
        && code == recorded.exit_code
        && outputs.iter().all(|o| o["matched"] == json!(true));
    let report = json!({
        "manifest": args.manifest.display().to_string(),
        "command": recorded.command,
        "inputs_changed": changed_inputs,
        "outputs": outputs,
        "exit_code": {"recorded": recorded.exit_code, "replayed": code},
        "reproduced": reproduced,
    });
    println!(
        "{}",
        serde_json::to_string(&report).map_err(CliError::usage)?
    );
    Ok(if reproduced { 0 } else { VIOLATED })
}
