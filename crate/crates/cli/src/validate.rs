//! `escape validate`: load and certify room files.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use escape_core::{load_room, validate_room, ValidationReport};

#[derive(Debug)]
pub struct FileReport {
    pub path: PathBuf,
    /// Load errors are reported as text; a loaded room always gets a report.
    pub outcome: Result<ValidationReport, String>,
}

impl FileReport {
    pub fn is_valid(&self) -> bool {
        matches!(&self.outcome, Ok(r) if r.is_valid())
    }
}

pub fn validate_file(path: &Path) -> FileReport {
    let outcome = load_room(path).map(|spec| validate_room(&spec)).map_err(|e| e.to_string());
    FileReport {
        path: path.to_path_buf(),
        outcome,
    }
}

pub fn validate_paths(paths: &[PathBuf]) -> Vec<FileReport> {
    paths.iter().map(|p| validate_file(p)).collect()
}

/// One line per valid file when `verbose`, then every invalid file with its
/// problems. Returns whether all files were valid.
pub fn render(reports: &[FileReport], verbose: bool, out: &mut impl Write) -> io::Result<bool> {
    let invalid: Vec<&FileReport> = reports.iter().filter(|r| !r.is_valid()).collect();
    if verbose {
        for r in reports.iter().filter(|r| r.is_valid()) {
            if let Ok(v) = &r.outcome {
                writeln!(
                    out,
                    "ok   {} ({}: oracle {} steps, {} checkpoints, {} states, {} scenes)",
                    r.path.display(),
                    v.room_id,
                    v.oracle_length,
                    v.checkpoint_count,
                    v.reachable_states,
                    v.reachable_scene_count
                )?;
            }
        }
    }
    for r in &invalid {
        writeln!(out, "FAIL {}", r.path.display())?;
        match &r.outcome {
            Err(e) => writeln!(out, "  {e}")?,
            Ok(v) => {
                for p in &v.problems {
                    writeln!(out, "  {p}")?;
                }
            }
        }
    }
    writeln!(out, "{} of {} room files valid", reports.len() - invalid.len(), reports.len())?;
    Ok(invalid.is_empty())
}
