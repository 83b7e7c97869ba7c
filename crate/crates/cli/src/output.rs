//! Output files are staged in memory and moved into place with a rename, so
//! an aborted run never leaves a truncated artifact behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    /// Writes every file as `.<name>.tmp` first, then renames all of them.
    pub fn commit(self, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let tmp = dir.join(format!(".{name}.tmp"));
            if let Err(e) = fs::write(&tmp, bytes) {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                return Err(e).with_context(|| format!("writing {}", tmp.display()));
            }
            staged.push((tmp, dir.join(name)));
        }
        let mut out = Vec::with_capacity(staged.len());
        for (tmp, dest) in staged {
            fs::rename(&tmp, &dest).with_context(|| format!("moving {} into place", dest.display()))?;
            out.push(dest);
        }
        Ok(out)
    }
}
