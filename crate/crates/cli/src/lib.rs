//! Configuration handling and study dispatch behind the `optsel` binary.

pub mod config;
pub mod studies;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub use config::{ConfigError, RunConfig, Study};
pub use studies::{run_study, StudyError, StudyOutput};

pub const MANIFEST: &str = "manifest.toml";
pub const SUMMARY: &str = "summary.txt";

/// Resolved config with the tool version, readable back as a config.
pub fn manifest(cfg: &RunConfig) -> String {
    format!("# optsel {}\n{}", env!("CARGO_PKG_VERSION"), config::dump(cfg))
}

/// Writes every artifact of `out` into `dir`; on failure nothing written
/// by this call is left behind.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, out: &StudyOutput) -> io::Result<Vec<PathBuf>> {
    let created = !dir.exists();
    let mut written = Vec::new();
    let result = (|| {
        fs::create_dir_all(dir)?;
        let extra = [
            (SUMMARY.to_string(), studies::summary_text(out)),
            (MANIFEST.to_string(), manifest(cfg)),
        ];
        for (name, body) in out.files.iter().chain(extra.iter()) {
            let path = dir.join(name);
            fs::write(&path, body)?;
            written.push(path);
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            if created {
                let _ = fs::remove_dir_all(dir);
            }
            Err(e)
        }
    }
}
