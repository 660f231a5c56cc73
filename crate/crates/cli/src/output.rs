//! Output destinations and atomic file writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::{CliError, OUT_DIR_ENV};

/// File path for the run, or `None` for stdout.
pub fn destination(cfg: &RunConfig) -> Option<PathBuf> {
    if let Some(out) = &cfg.out {
        return Some(out.clone());
    }
    std::env::var_os(OUT_DIR_ENV)
        .filter(|d| !d.is_empty())
        .map(|dir| Path::new(&dir).join(format!("{}.{}", cfg.command.name(), cfg.format.extension())))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let err = |e: std::io::Error| CliError::Output(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    if !dir.is_dir() {
        return Err(CliError::Output(format!("{}: directory does not exist", dir.display())));
    }
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Output(format!("{}: not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(err)
}

/// CSV body prefixed with a `# config:` line holding the resolved configuration.
pub fn csv_with_config(cfg: &RunConfig, body: &str) -> String {
    format!("# config: {}\n{body}", cfg.to_json())
}

/// JSON object `{ "config": ..., "result": ... }`.
pub fn json_with_config<T: serde::Serialize>(cfg: &RunConfig, result: &T) -> String {
    let v = serde_json::json!({ "config": cfg, "result": result });
    let mut s = serde_json::to_string_pretty(&v).expect("results serialize");
    s.push('\n');
    s
}

/// Sends `contents` to the configured destination. Returns the stdout payload
/// when no file is used.
pub fn emit(cfg: &RunConfig, contents: String) -> Result<(Option<String>, String), CliError> {
    match destination(cfg) {
        Some(path) => {
            write_atomic(&path, &contents)?;
            Ok((None, path.display().to_string()))
        }
        None => Ok((Some(contents), "stdout".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn missing_directory_is_an_output_error() {
        let dir = tempfile::tempdir().unwrap();
        let err = write_atomic(&dir.path().join("no/such/x.csv"), "x").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
