//! Output directory handling and provenance headers.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// First line(s) of every output file: command, version, seed, settings and
/// SHA-256 digests of the inputs. Paths are left out so that identical inputs
/// give identical files wherever they live.
#[derive(Debug, Clone)]
pub struct Provenance {
    command: &'static str,
    seed: Option<u64>,
    settings: Vec<(String, String)>,
    digests: Vec<String>,
}

impl Provenance {
    pub fn new(command: &'static str, seed: Option<u64>) -> Self {
        Self {
            command,
            seed,
            settings: Vec::new(),
            digests: Vec::new(),
        }
    }

    pub fn setting(mut self, key: &str, value: impl ToString) -> Self {
        self.settings.push((key.to_string(), value.to_string()));
        self
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let bytes = fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        self.digests.push(format!("sha256:{:x}", Sha256::digest(&bytes)));
        Ok(())
    }

    pub fn line(&self) -> String {
        let mut s = format!("dse {} version={}", self.command, env!("CARGO_PKG_VERSION"));
        match self.seed {
            Some(seed) => s.push_str(&format!(" seed={seed}")),
            None => s.push_str(" seed=none"),
        }
        for (k, v) in &self.settings {
            s.push_str(&format!(" {k}={v}"));
        }
        s.push_str(&format!(" inputs={}", self.digests.join(",")));
        s
    }

    /// Provenance as a `#` comment line, for text tables.
    pub fn comment(&self) -> String {
        format!("# {}\n", self.line())
    }
}

/// Target directory for a command's files. Existing files are replaced only
/// with `force`.
pub struct OutputDir {
    dir: PathBuf,
    force: bool,
}

impl OutputDir {
    pub fn new(dir: &Path, force: bool) -> Self {
        Self {
            dir: dir.to_path_buf(),
            force,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Fails before any work is done if a planned file already exists.
    pub fn claim(&self, names: &[String]) -> CliResult<()> {
        if self.force {
            return Ok(());
        }
        let existing: Vec<&str> = names
            .iter()
            .filter(|n| self.path(n).exists())
            .map(String::as_str)
            .collect();
        if existing.is_empty() {
            Ok(())
        } else {
            Err(CliError::usage(format!(
                "output files already exist in {}: {}; pass --force to overwrite",
                self.dir.display(),
                existing.join(", ")
            )))
        }
    }

    pub fn write(&self, name: &str, contents: &[u8]) -> CliResult<()> {
        fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::data(format!("cannot create output directory {}: {e}", self.dir.display())))?;
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }
}

/// File-name-safe form of an entity name.
pub fn slug(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// File stem without the given suffix, used as a default label.
pub fn stem_label(path: &Path, suffixes: &[&str]) -> String {
    let stem = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    for suffix in suffixes {
        if let Some(s) = stem.strip_suffix(suffix) {
            if !s.is_empty() {
                return s.to_string();
            }
        }
    }
    stem
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs_and_labels() {
        assert_eq!(slug("Jayson Tatum"), "Jayson-Tatum");
        assert_eq!(slug("D'Angelo/Russell"), "D-Angelo-Russell");
        assert_eq!(
            stem_label(Path::new("out/BOS_game_dse_draws.csv"), &["_draws"]),
            "BOS_game_dse"
        );
        assert_eq!(stem_label(Path::new("_draws.csv"), &["_draws"]), "_draws");
    }

    #[test]
    fn provenance_has_no_paths() {
        let p = Provenance::new("acf", None).setting("max_lag", 10);
        let want = format!(
            "dse acf version={} seed=none max_lag=10 inputs=",
            env!("CARGO_PKG_VERSION")
        );
        assert_eq!(p.line(), want);
    }
}
