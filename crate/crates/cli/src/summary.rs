use std::path::Path;

use tightsurf::{Error, Result};

use crate::pipeline::Manifest;

/// One line per summary row: `label  headline  STATUS (target)`. Every
/// artifact listed in the manifest must exist under `dir`.
pub fn emit_summary(manifest: &Manifest, dir: &Path) -> Result<String> {
    let mut out = String::new();
    for task in &manifest.tasks {
        for a in &task.artifacts {
            if !dir.join(&a.path).is_file() {
                return Err(Error::Io(format!("missing artifact file `{}` of task `{}`", a.path, task.task.name())));
            }
        }
        for row in &task.rows {
            out.push_str(&format!("{}  {}  {}", row.label, row.headline, row.status.label()));
            if let Some(t) = &row.target {
                out.push_str(&format!(" ({t})"));
            }
            out.push('\n');
        }
    }
    Ok(out)
}
