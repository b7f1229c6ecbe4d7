use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};

use cqmap_core::{Error, Result};

static STDOUT_USED: AtomicBool = AtomicBool::new(false);

/// Whether command output went to stdout, in which case the summary goes to stderr.
pub fn stdout_used() -> bool {
    STDOUT_USED.load(Ordering::Relaxed)
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Sends `bytes` to `out` when given, otherwise to stdout. Returns the
/// summary suffix naming the destination.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<String> {
    match out {
        Some(path) => {
            write_atomic(path, bytes)?;
            Ok(format!(" -> {}", path.display()))
        }
        None => {
            STDOUT_USED.store(true, Ordering::Relaxed);
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(String::new())
        }
    }
}

pub fn json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Numerical(format!("json encoding: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Validation(format!("cannot read {}: {e}", path.display())))
}
