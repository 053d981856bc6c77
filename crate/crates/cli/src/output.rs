use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use spectral_ood::graph::{AdjacencyKind, GraphBundle};

use crate::CliError;

/// JSON artifact: the resolved configuration first, then the command body.
#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    config: &'a Value,
    #[serde(flatten)]
    body: &'a T,
}

pub struct OutputDir {
    root: PathBuf,
    config: Value,
}

impl OutputDir {
    pub fn create(root: &Path, config: Value) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), config })
    }

    pub fn config_line(&self) -> String {
        format!("# config {}\n", serde_json::to_string(&self.config).expect("config serializes"))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let doc = Document { config: &self.config, body };
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// CSV with the configuration comment line prepended.
    pub fn write_csv(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let mut text = self.config_line();
        text.push_str(body);
        self.write(name, &text)
    }

    pub fn write_adjacency(&self, bundle: &GraphBundle) -> Result<(), CliError> {
        for kind in [AdjacencyKind::SelfSupervised, AdjacencyKind::Supervised, AdjacencyKind::Combined, AdjacencyKind::Normalized] {
            self.write_csv(&format!("adjacency_{}.csv", kind.as_str()), &bundle.to_csv(kind))?;
        }
        Ok(())
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        fs::write(&path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        log::info!("wrote {}", path.display());
        Ok(path)
    }
}
