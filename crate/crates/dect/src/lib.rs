//! Standard-library companion to `dect-core`: file formats, configuration,
//! rendering, and the command pipeline behind the `dect` binary.

pub mod arrayfile;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod render;

use std::io::Write;
use std::path::Path;

use error::AppError;

/// Atomic text write: temp file in the target directory, then rename.
pub fn write_text_atomic(path: &Path, text: &str) -> Result<(), AppError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| AppError::io_at(path, e))?;
    tmp.write_all(text.as_bytes()).map_err(|e| AppError::io_at(path, e))?;
    tmp.persist(path).map_err(|e| AppError::io_at(path, e.error))?;
    Ok(())
}

/// Resolve the `DECT_THREADS` cap.  All pipeline stages currently run on a
/// single thread, so any positive cap is honored; the variable is still
/// validated so misconfiguration fails fast.
pub fn thread_cap() -> Result<usize, AppError> {
    match std::env::var("DECT_THREADS") {
        Err(_) => Ok(1),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(AppError::config(format!(
                "DECT_THREADS must be a positive integer, got `{raw}`"
            ))),
        },
    }
}
