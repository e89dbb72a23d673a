use std::io::Write;
use std::path::Path;
use std::time::Instant;

use matcert::Error;
use serde_json::{json, Map, Value};

pub struct RunError {
    pub code: u8,
    pub message: String,
}

impl RunError {
    pub fn usage(message: impl Into<String>) -> Self {
        RunError { code: 2, message: message.into() }
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidInput(_) | Error::Domain { .. } => 2,
            _ => 1,
        };
        RunError { code, message: e.to_string() }
    }
}

/// Runs `job` on every item using up to `threads` scoped workers and returns
/// the results in item order, each with its wall time in seconds.
pub fn ordered_map<I, R, F>(items: &[I], threads: usize, job: F) -> Vec<(R, f64)>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync,
{
    let timed = |item: &I| {
        let start = Instant::now();
        let r = job(item);
        (r, start.elapsed().as_secs_f64())
    };
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(timed).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(timed).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Adds the `timing` section unless it is suppressed; everything else in the
/// body is a deterministic function of the configuration and seeds.
pub fn with_timing(mut body: Map<String, Value>, omit: bool, total: f64, per_record: &[f64]) -> Value {
    if !omit {
        body.insert("timing".into(), json!({ "wall_seconds": total, "record_seconds": per_record }));
    }
    Value::Object(body)
}

/// Writes pretty JSON to `path` through a temporary file in the same
/// directory and a rename, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, value: &Value) -> Result<(), RunError> {
    let text = serde_json::to_string_pretty(value).expect("report serialises") + "\n";
    match path {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(p) => write_atomic(p, &text),
    }
}

pub fn write_atomic(path: &Path, text: &str) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::usage(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(text.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}
