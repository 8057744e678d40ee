use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::VERSION;

/// Resolves parameters from the flat key=value file plus command-line
/// overrides (flags win), and records every value a run actually consumed.
/// The provenance hash is computed over exactly that effective set, so two
/// invocations that compute the same thing hash the same regardless of how
/// the values were spelled or where they came from.
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: BTreeMap<String, String>,
}

fn parse_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("{}:{}: expected key=value, got `{line}`", path.display(), i + 1))
        })?;
        if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!(
                "{}:{}: duplicate key `{}`",
                path.display(),
                i + 1,
                k.trim()
            )));
        }
    }
    Ok(map)
}

impl Resolver {
    /// `command` goes into the hashed set so artifacts from different
    /// subcommands never collide on provenance.
    pub fn new(command: &str, config_path: Option<&Path>) -> Result<Self, CliError> {
        let file = match config_path {
            Some(p) => parse_file(p)?,
            None => BTreeMap::new(),
        };
        let mut used = BTreeMap::new();
        used.insert("cmd".to_string(), command.to_string());
        Ok(Resolver { file, used })
    }

    fn lookup<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::Config(format!("config key `{key}` = `{raw}`: {e}"))),
            None => Ok(None),
        }
    }

    /// Required parameter: flag, else file, else a config error.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self
            .lookup(key, flag)?
            .ok_or_else(|| CliError::Config(format!("missing required parameter `{key}`")))?;
        self.used.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Optional-with-default parameter; the effective value is recorded
    /// either way.
    pub fn default_to<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.used.insert(key.to_string(), v.to_string());
        Ok(v)
    }

    /// Record a value that was resolved outside the file/flag lookup (for
    /// example grid identity recovered from an input artifact) so the hash
    /// still covers it.
    pub fn record<T: Display>(&mut self, key: &str, value: T) {
        self.used.insert(key.to_string(), value.to_string());
    }

    /// Seed list `a,b,c`; a single `seed` is accepted as the degenerate list.
    pub fn seed_list(
        &mut self,
        seeds_flag: Option<String>,
        seed_flag: Option<u64>,
    ) -> Result<Vec<u64>, CliError> {
        let raw = match self.lookup::<String>("seeds", seeds_flag)? {
            Some(s) => s,
            None => self.require::<u64>("seed", seed_flag)?.to_string(),
        };
        let mut seeds = Vec::new();
        for part in raw.split(',') {
            let part = part.trim();
            seeds.push(part.parse::<u64>().map_err(|e| {
                CliError::Config(format!("seed list entry `{part}`: {e}"))
            })?);
        }
        if seeds.is_empty() {
            return Err(CliError::Config("empty seed list".into()));
        }
        let canonical: Vec<String> = seeds.iter().map(|s| s.to_string()).collect();
        self.used.insert("seeds".to_string(), canonical.join(","));
        Ok(seeds)
    }

    /// Output and input locations stay out of the hash: they name where
    /// bytes go, not what gets computed.
    pub fn path(&self, key: &str, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
        match flag {
            Some(p) => Ok(p),
            None => match self.file.get(key) {
                Some(raw) => Ok(PathBuf::from(raw)),
                None => Err(CliError::Config(format!("missing required parameter `{key}`"))),
            },
        }
    }

    pub fn path_opt(&self, key: &str, flag: Option<PathBuf>) -> Option<PathBuf> {
        flag.or_else(|| self.file.get(key).map(PathBuf::from))
    }

    /// Hex-truncated SHA-256 of the sorted effective `key=value` lines.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.used {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        let digest = h.finalize();
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    /// The provenance lines every CSV artifact carries.
    pub fn comments(&self, seed: u64) -> Vec<String> {
        vec![
            format!("version={VERSION}"),
            format!("config={}", self.hash()),
            format!("seed={seed}"),
        ]
    }
}
