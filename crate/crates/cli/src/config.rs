//! Run configuration: defaults, then a key=value file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use clap::Args;
use serde::Serialize;
use walklab::{Error, Result};

pub const KEYS: &[&str] = &[
    "group",
    "measure",
    "mode",
    "n-max",
    "truncation",
    "seed",
    "trajectories",
    "steps",
    "workers",
    "radius",
    "level",
    "k",
    "cache-dir",
    "emit-series",
    "function",
];

/// Flags shared by every subcommand. Unset flags fall back to the config file,
/// then to per-command defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct Flags {
    /// Group identifier: free:K, zd:D, lamplighter, heisenberg
    #[arg(long, global = true)]
    pub group: Option<String>,
    /// `srw` or inline atoms such as `a:1/4,A:1/4,b:1/4,B:1/4`
    #[arg(long, global = true)]
    pub measure: Option<String>,
    /// exact or float
    #[arg(long, global = true)]
    pub mode: Option<String>,
    #[arg(long = "n-max", global = true)]
    pub n_max: Option<usize>,
    /// Atoms lighter than this are dropped after each convolution
    #[arg(long, global = true)]
    pub truncation: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub trajectories: Option<usize>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// 0 uses every core
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub radius: Option<u32>,
    #[arg(long, global = true)]
    pub level: Option<usize>,
    /// Rank of the free group for boundary commands
    #[arg(long, global = true)]
    pub k: Option<u32>,
    #[arg(long = "cache-dir", global = true)]
    pub cache_dir: Option<String>,
    /// Write (n, value) rows as CSV to this path
    #[arg(long = "emit-series", global = true)]
    pub emit_series: Option<String>,
    /// Comma-separated function values for `factor`
    #[arg(long, global = true)]
    pub function: Option<String>,
    /// key=value file merged under the flags
    #[arg(long, global = true)]
    pub config: Option<String>,
}

pub type FileConfig = BTreeMap<String, String>;

pub fn read_config_file(path: &Path) -> Result<FileConfig> {
    parse_config(&fs::read_to_string(path)?)
}

pub fn parse_config(text: &str) -> Result<FileConfig> {
    let mut out = FileConfig::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse(format!("config line {}: unknown key '{key}'", lineno + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

/// Fully resolved settings, embedded verbatim in every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub group: String,
    pub measure: String,
    pub mode: String,
    pub n_max: usize,
    pub truncation: String,
    pub seed: u64,
    pub trajectories: usize,
    pub steps: usize,
    pub workers: usize,
    pub radius: u32,
    pub level: usize,
    pub k: u32,
    pub cache_dir: Option<String>,
    pub emit_series: Option<String>,
    pub function: Option<String>,
    pub inputs: Vec<String>,
}

/// Per-command fallbacks for settings the user did not give.
pub struct Defaults {
    pub mode: &'static str,
    pub n_max: usize,
    pub radius: u32,
    pub level: usize,
}

fn pick<T: std::str::FromStr>(flag: Option<T>, file: &FileConfig, key: &str, default: T) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(text) => text
            .parse()
            .map_err(|_| Error::Parse(format!("bad value '{text}' for config key '{key}'"))),
        None => Ok(default),
    }
}

fn pick_opt(flag: Option<String>, file: &FileConfig, key: &str) -> Option<String> {
    flag.or_else(|| file.get(key).cloned())
}

impl RunConfig {
    pub fn resolve(command: &str, flags: Flags, inputs: Vec<String>, defaults: Defaults) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => read_config_file(Path::new(path))?,
            None => FileConfig::new(),
        };
        let cache_dir = pick_opt(flags.cache_dir, &file, "cache-dir").or_else(|| {
            std::env::var(walklab::cache::CACHE_DIR_ENV)
                .ok()
                .filter(|v| !v.is_empty())
        });
        let mode = pick(flags.mode, &file, "mode", defaults.mode.to_string())?;
        mode.parse::<walklab::ArithmeticMode>()?;
        Ok(RunConfig {
            command: command.to_string(),
            group: pick(flags.group, &file, "group", "free:2".to_string())?,
            measure: pick(flags.measure, &file, "measure", "srw".to_string())?,
            mode,
            n_max: pick(flags.n_max, &file, "n-max", defaults.n_max)?,
            truncation: pick(flags.truncation, &file, "truncation", "0".to_string())?,
            seed: pick(flags.seed, &file, "seed", 0x5eed)?,
            trajectories: pick(flags.trajectories, &file, "trajectories", 0)?,
            steps: pick(flags.steps, &file, "steps", 2000)?,
            workers: pick(flags.workers, &file, "workers", 0)?,
            radius: pick(flags.radius, &file, "radius", defaults.radius)?,
            level: pick(flags.level, &file, "level", defaults.level)?,
            k: pick(flags.k, &file, "k", 2)?,
            cache_dir,
            emit_series: pick_opt(flags.emit_series, &file, "emit-series"),
            function: pick_opt(flags.function, &file, "function"),
            inputs,
        })
    }

    pub fn arithmetic(&self) -> walklab::ArithmeticMode {
        self.mode.parse().expect("validated in resolve")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse_config("group = free:2\nbogus = 1\n").is_err());
        let c = parse_config("# comment\nn_max = 4\nmode=float\n").unwrap();
        assert_eq!(c["n-max"], "4");
        assert_eq!(c["mode"], "float");
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config("seed = 7\nsteps = 10").unwrap();
        assert_eq!(pick(Some(3u64), &file, "seed", 0).unwrap(), 3);
        assert_eq!(pick(None, &file, "seed", 0u64).unwrap(), 7);
        assert_eq!(pick(None, &file, "trajectories", 5usize).unwrap(), 5);
        assert!(pick::<u64>(None, &parse_config("seed = x").unwrap(), "seed", 0).is_err());
    }
}
