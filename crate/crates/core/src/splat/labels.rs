use std::path::Path;

use crate::error::{Error, Result};

/// Reads a joint-label sidecar: one non-negative integer per line.
pub fn load_labels(path: &Path) -> Result<Vec<u32>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, &path.display().to_string())
}

pub fn parse_labels(text: &str, source_name: &str) -> Result<Vec<u32>> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let label = line
            .parse::<u32>()
            .map_err(|_| Error::parse(source_name, i + 1, format!("invalid joint label {line:?}")))?;
        labels.push(label);
    }
    Ok(labels)
}

pub fn save_labels(labels: &[u32], path: &Path) -> Result<()> {
    let mut text = String::with_capacity(labels.len() * 2);
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
