//! Class-per-directory dataset layout.

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// `(class name, sorted files)` for every subdirectory of `root` holding at
/// least one file whose extension is in `exts`, classes sorted by name.
pub fn class_dirs(root: &Path, exts: &[&str]) -> CliResult<Vec<(String, Vec<PathBuf>)>> {
    let mut classes = Vec::new();
    for entry in read_dir_sorted(root)? {
        if !entry.is_dir() {
            continue;
        }
        let Some(name) = entry.file_name().and_then(|n| n.to_str()).map(str::to_string) else {
            continue;
        };
        let files: Vec<PathBuf> = read_dir_sorted(&entry)?
            .into_iter()
            .filter(|p| p.is_file() && has_ext(p, exts))
            .collect();
        if !files.is_empty() {
            classes.push((name, files));
        }
    }
    Ok(classes)
}

fn has_ext(p: &Path, exts: &[&str]) -> bool {
    p.extension().and_then(|e| e.to_str()).is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn read_dir_sorted(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::io(dir, e))?;
    out.sort();
    Ok(out)
}
