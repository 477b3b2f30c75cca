use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::models::ExperimentConfig;

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
}

impl ManifestFile {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        })
    }
}

/// Provenance of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub inputs: Vec<ManifestFile>,
    pub outputs: Vec<ManifestFile>,
    pub started_at: String,
    pub finished_at: String,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

/// Write to a temporary sibling, then rename over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Outputs are written into `<out_dir>/.staging` and moved into `out_dir`
/// only once every file is complete.
#[derive(Debug)]
pub struct StagedDir {
    target: PathBuf,
    staging: PathBuf,
    names: Vec<String>,
}

impl StagedDir {
    pub fn create(target: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(target).map_err(|e| CliError::io(target, e))?;
        let staging = target.join(".staging");
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| CliError::io(&staging, e))?;
        }
        fs::create_dir(&staging).map_err(|e| CliError::io(&staging, e))?;
        Ok(Self {
            target: target.to_path_buf(),
            staging,
            names: Vec::new(),
        })
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.staging.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
    }

    fn files(&self) -> Result<Vec<String>, CliError> {
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.staging).map_err(|e| CliError::io(&self.staging, e))? {
            let entry = entry.map_err(|e| CliError::io(&self.staging, e))?;
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
        names.sort();
        Ok(names)
    }

    /// Digests of the staged files, by name.
    pub fn digests(&self) -> Result<Vec<ManifestFile>, CliError> {
        self.files()?
            .into_iter()
            .map(|n| {
                Ok(ManifestFile {
                    sha256: sha256_file(&self.staging.join(&n))?,
                    path: n,
                })
            })
            .collect()
    }

    pub fn promote(mut self) -> Result<(), CliError> {
        self.names = self.files()?;
        for n in &self.names {
            let from = self.staging.join(n);
            let to = self.target.join(n);
            fs::rename(&from, &to).map_err(|e| CliError::io(&to, e))?;
        }
        fs::remove_dir(&self.staging).map_err(|e| CliError::io(&self.staging, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn staged_files_appear_only_after_promotion() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("run");
        let s = StagedDir::create(&out).unwrap();
        s.write("a.csv", b"x\n").unwrap();
        assert!(!out.join("a.csv").exists());
        let d = s.digests().unwrap();
        assert_eq!(d[0].path, "a.csv");
        assert_eq!(d[0].sha256.len(), 64);
        s.promote().unwrap();
        assert_eq!(fs::read(out.join("a.csv")).unwrap(), b"x\n");
        assert!(!out.join(".staging").exists());
    }
}
