use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::agent::Trajectory;
use crate::env::Task;

use super::PipelineError;

fn io(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes one JSON record per line.
pub fn save_jsonl<T: Serialize>(items: &[T], path: impl AsRef<Path>) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| io(path, e))?;
        w.write_all(b"\n").map_err(|e| io(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

/// Reads one JSON record per line; blank lines are skipped and a bad line
/// is reported by its 1-based number.
pub fn load_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, PipelineError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| PipelineError::Line {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn save_trajectories(trajs: &[Trajectory], path: impl AsRef<Path>) -> Result<(), PipelineError> {
    save_jsonl(trajs, path)
}

pub fn load_trajectories(path: impl AsRef<Path>) -> Result<Vec<Trajectory>, PipelineError> {
    load_jsonl(path)
}

pub fn save_tasks(tasks: &[Task], path: impl AsRef<Path>) -> Result<(), PipelineError> {
    save_jsonl(tasks, path)
}

pub fn load_tasks(path: impl AsRef<Path>) -> Result<Vec<Task>, PipelineError> {
    load_jsonl(path)
}
