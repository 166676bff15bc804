//! Artifact writing: atomic files, CSV with a config-hash header, JSON envelopes, manifests.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| io_error(&dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e))?;
    Ok(())
}

/// `{"config_hash": ..., <name>: value}` as pretty JSON.
pub fn json_envelope(hash: &str, name: &str, value: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut map = serde_json::Map::new();
    map.insert("config_hash".into(), json!(hash));
    map.insert(
        name.into(),
        serde_json::to_value(value)
            .map_err(|e| CliError::Io(format!("serializing {name}: {e}")))?,
    );
    let mut out = serde_json::to_vec_pretty(&serde_json::Value::Object(map)).expect("json value");
    out.push(b'\n');
    Ok(out)
}

/// CSV text whose first line is `# config_hash=<hash>`.
pub fn csv_with_hash<R: Serialize>(hash: &str, rows: &[R]) -> Result<Vec<u8>, CliError> {
    let mut buf = format!("# config_hash={hash}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for r in rows {
            w.serialize(r)
                .map_err(|e| CliError::Io(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| CliError::Io(format!("csv: {e}")))?;
    }
    Ok(buf)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Manifest next to the primary output: versions, the full configuration and its hash,
/// tolerances, the files produced and the exit code. `created_unix` is the only field that
/// varies between identical runs.
pub fn write_manifest(
    config: &RunConfig,
    outputs: &[PathBuf],
    exit_code: i32,
) -> Result<PathBuf, CliError> {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "tool": "bmdetect",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": bmdetect::VERSION,
        "command": config.command.name(),
        "config_hash": config.hash(),
        "config": config,
        "tolerances": {
            "run": config.tolerances,
            "psd": bmdetect::detector::PSD_TOLERANCE,
            "q_zero": bmdetect::bodies::Q_ZERO_TOLERANCE,
            "convexity_gap": bmdetect::bodies::CONVEXITY_GAP,
        },
        "outputs": outputs,
        "exit_code": exit_code,
        "created_unix": created,
    });
    let path = manifest_path(&config.out);
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("json value");
    bytes.push(b'\n');
    write_atomic(&path, &bytes)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: u32,
        b: f64,
    }

    #[test]
    fn csv_starts_with_hash() {
        let bytes = csv_with_hash("abc", &[Row { a: 1, b: 0.5 }]).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert_eq!(text, "# config_hash=abc\na,b\n1,0.5\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
