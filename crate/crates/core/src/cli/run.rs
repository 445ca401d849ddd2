//! Output staging and run manifests.
//!
//! Every command writes into a hidden staging directory next to its
//! target. Success moves the files into place; failure moves them to
//! `<target>/.failed` so nothing half-written sits among real outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const RUN_FILE: &str = "run.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const FAILED_DIR: &str = ".failed";

pub struct Staging {
    target: PathBuf,
    dir: PathBuf,
}

impl Staging {
    /// Stages files destined for the directory `target`.
    pub fn for_dir(target: &Path) -> Result<Self> {
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let parent = target.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::create(target.to_path_buf(), parent.join(format!(".{name}.staging")))
    }

    /// Stages files destined for the directory holding `file`.
    pub fn for_file(file: &Path) -> Result<Self> {
        let parent = file.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let name = file
            .file_name()
            .ok_or_else(|| Error::Validation(format!("output path {} has no file name", file.display())))?
            .to_string_lossy()
            .into_owned();
        Self::create(parent.to_path_buf(), parent.join(format!(".{name}.staging")))
    }

    fn create(target: PathBuf, dir: PathBuf) -> Result<Self> {
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Staging { target, dir })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    pub fn commit(self) -> Result<()> {
        if !self.target.exists() {
            return fs::rename(&self.dir, &self.target).map_err(|e| Error::io(&self.target, e));
        }
        let failed = self.target.join(FAILED_DIR);
        if failed.exists() {
            fs::remove_dir_all(&failed).map_err(|e| Error::io(&failed, e))?;
        }
        for entry in fs::read_dir(&self.dir).map_err(|e| Error::io(&self.dir, e))? {
            let entry = entry.map_err(|e| Error::io(&self.dir, e))?;
            let dest = self.target.join(entry.file_name());
            if dest.is_dir() {
                fs::remove_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
            } else if dest.exists() {
                fs::remove_file(&dest).map_err(|e| Error::io(&dest, e))?;
            }
            fs::rename(entry.path(), &dest).map_err(|e| Error::io(&dest, e))?;
        }
        fs::remove_dir(&self.dir).map_err(|e| Error::io(&self.dir, e))
    }

    /// Moves whatever was staged to `<target>/.failed`. Returns its path,
    /// or `None` when nothing had been written.
    pub fn quarantine(self) -> Option<PathBuf> {
        let empty = fs::read_dir(&self.dir).map(|mut d| d.next().is_none()).unwrap_or(true);
        if empty {
            let _ = fs::remove_dir_all(&self.dir);
            return None;
        }
        let failed = self.target.join(FAILED_DIR);
        let moved = fs::create_dir_all(&self.target)
            .and_then(|_| if failed.exists() { fs::remove_dir_all(&failed) } else { Ok(()) })
            .and_then(|_| fs::rename(&self.dir, &failed));
        match moved {
            Ok(()) => Some(failed),
            Err(_) => Some(self.dir),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<FileDigest> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileDigest {
        path: path.to_string_lossy().replace('\\', "/"),
        bytes: data.len() as u64,
        sha256: hex::encode(Sha256::digest(&data)),
    })
}

fn files_under(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_dir() {
            files_under(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Digests of a file, or of every file below a directory, sorted by path.
pub fn digest_path(path: &Path) -> Result<Vec<FileDigest>> {
    if path.is_dir() {
        let mut files = Vec::new();
        files_under(path, &mut files)?;
        files.sort();
        files.iter().map(|f| sha256_file(f)).collect()
    } else {
        Ok(vec![sha256_file(path)?])
    }
}

/// Digests of staged outputs, with paths relative to the staging root.
fn output_digests(root: &Path, skip: &[String]) -> Result<Vec<FileDigest>> {
    let mut files = Vec::new();
    files_under(root, &mut files)?;
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let rel = f.strip_prefix(root).expect("under root").to_string_lossy().replace('\\', "/");
        if skip.contains(&rel) {
            continue;
        }
        let mut d = sha256_file(&f)?;
        d.path = rel;
        out.push(d);
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    parameters: &'a serde_json::Value,
    inputs: &'a [FileDigest],
    outputs: Vec<FileDigest>,
    warnings: &'a [String],
}

#[derive(Debug, Serialize)]
struct StageTime {
    stage: String,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct TimingFile<'a> {
    started_unix_s: f64,
    total_seconds: f64,
    stages: &'a [StageTime],
}

/// Collects what goes into the run manifest while a command runs.
pub struct RunLog {
    command: String,
    started: Instant,
    started_wall: SystemTime,
    stage_start: Instant,
    stages: Vec<StageTime>,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub warnings: Vec<String>,
}

impl RunLog {
    pub fn new(command: &str) -> Self {
        let now = Instant::now();
        RunLog {
            command: command.into(),
            started: now,
            started_wall: SystemTime::now(),
            stage_start: now,
            stages: Vec::new(),
            parameters: serde_json::Value::Null,
            inputs: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.extend(digest_path(path)?);
        Ok(())
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    /// Closes the current stage under `name`.
    pub fn stage(&mut self, name: &str) {
        let now = Instant::now();
        self.stages.push(StageTime { stage: name.into(), seconds: (now - self.stage_start).as_secs_f64() });
        log::info!("{name} done in {:.3} s", (now - self.stage_start).as_secs_f64());
        self.stage_start = now;
    }

    /// Writes the manifest and timings into `root` under the given names.
    pub fn finish(&self, root: &Path, run_name: &str, timings_name: &str) -> Result<()> {
        let outputs = output_digests(root, &[run_name.to_string(), timings_name.to_string()])?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            parameters: &self.parameters,
            inputs: &self.inputs,
            outputs,
            warnings: &self.warnings,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        write(&root.join(run_name), &text)?;
        let timing = TimingFile {
            started_unix_s: self.started_wall.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            total_seconds: self.started.elapsed().as_secs_f64(),
            stages: &self.stages,
        };
        let mut text = serde_json::to_string_pretty(&timing).expect("timings serialize");
        text.push('\n');
        write(&root.join(timings_name), &text)
    }
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
