//! Report emission: format filtering and deterministic file writes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{OutputFormat, OutputSection};

/// Where reports go and which formats are wanted, after merging the config
/// section with command-line overrides.
pub struct Sink {
    pub directory: Option<PathBuf>,
    pub formats: Vec<OutputFormat>,
}

impl Sink {
    /// `--out` beats the config directory; `--format` beats the config list.
    pub fn new(
        section: &OutputSection,
        out_flag: Option<&Path>,
        format_flag: Option<OutputFormat>,
    ) -> Self {
        let directory = out_flag.map(Path::to_path_buf).or_else(|| section.directory.clone());
        let formats = match format_flag {
            Some(f) => vec![f],
            None => section.formats.clone(),
        };
        Sink { directory, formats }
    }

    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }

    fn write(&self, name: &str, bytes: &str) -> Result<(), String> {
        let Some(dir) = &self.directory else {
            return Ok(());
        };
        fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        println!("wrote {}", path.display());
        Ok(())
    }

    /// Write a CSV artifact if CSV output is enabled and a directory is set.
    pub fn csv(&self, name: &str, body: &str) -> Result<(), String> {
        if self.wants(OutputFormat::Csv) {
            self.write(name, body)?;
        }
        Ok(())
    }

    /// Serialize and write a JSON artifact; also returns the rendered text
    /// so callers can print it.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<String, String> {
        let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
        if self.wants(OutputFormat::Json) {
            self.write(name, &text)?;
        }
        Ok(text)
    }
}

/// Render one CSV row, escaping nothing: all emitted fields are numeric or
/// fixed labels.
pub fn csv_row(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

/// Full-precision float formatting shared by all CSV emitters.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}
