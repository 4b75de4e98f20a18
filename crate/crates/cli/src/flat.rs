//! Flat `key = value` files: run configs and manifests share one format, so
//! a manifest can be fed back through `--config`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};

/// Manifest keys that describe a run rather than configure it.
const METADATA_KEYS: [&str; 5] = ["command", "version", "timestamp", "outputs", "manifest"];

/// Flags never echoed into a manifest.
const UNRECORDED_FLAGS: [&str; 2] = ["out", "config"];

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(ConfigError(format!(
                "line {}: expected `key = value`",
                lineno + 1
            )));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_path(args: &[String]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            return Some(PathBuf::from(path));
        }
    }
    None
}

/// Inserts flags from the `--config` file ahead of the command-line flags so
/// that explicit flags win.
pub fn expand_args(raw: Vec<String>) -> Result<Vec<String>> {
    if raw.len() < 2 || raw[1].starts_with('-') {
        return Ok(raw);
    }
    let Some(path) = config_path(&raw[2..]) else {
        return Ok(raw);
    };
    let text =
        fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let mut args = raw[..2].to_vec();
    for (key, value) in parse(&text)? {
        if METADATA_KEYS.contains(&key.as_str()) || UNRECORDED_FLAGS.contains(&key.as_str()) {
            continue;
        }
        args.push(format!("--{key}"));
        args.push(value);
    }
    args.extend_from_slice(&raw[2..]);
    Ok(args)
}

/// Effective `--flag value` pairs of an expanded argument list; later
/// occurrences override earlier ones.
pub fn effective_flags(args: &[String]) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut i = 0;
    while i < args.len() {
        let Some(flag) = args[i].strip_prefix("--") else {
            i += 1;
            continue;
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                i += 1;
                (flag.to_string(), args.get(i).cloned().unwrap_or_default())
            }
        };
        i += 1;
        if UNRECORDED_FLAGS.contains(&key.as_str()) {
            continue;
        }
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => out.push((key, value)),
        }
    }
    out
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

pub fn write_manifest(
    out: &Path,
    command: &str,
    flags: &[(String, String)],
    seed: Option<u64>,
) -> Result<PathBuf> {
    let path = manifest_path(out);
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut text = String::from("# qdistill run manifest\n");
    text += &format!("command = {command}\n");
    text += &format!("version = {}\n", env!("CARGO_PKG_VERSION"));
    text += &format!("timestamp = {timestamp}\n");
    text += &format!("outputs = {}\n", out.display());
    for (k, v) in flags {
        text += &format!("{k} = {v}\n");
    }
    if let Some(seed) = seed {
        if !flags.iter().any(|(k, _)| k == "seed") {
            text += &format!("seed = {seed}\n");
        }
    }
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
