use std::path::{Path, PathBuf};

use cama_core::attack::FlipLog;
use serde::Serialize;

use crate::HarnessError;

pub fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| HarnessError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Where a flip log lives: `flips/<id>.json` for evasion runs and
/// `flips/fold_<k>/<id>.json` for poisoning, where a training graph is
/// perturbed once per fold it belongs to.
pub fn flip_log_path(out: &Path, log: &FlipLog, per_fold: bool) -> PathBuf {
    let dir = out.join("flips");
    let dir = if per_fold { dir.join(format!("fold_{}", log.fold)) } else { dir };
    dir.join(format!("{}.json", log.graph_id))
}

pub fn read_flip_log(path: &Path) -> Result<FlipLog, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
