use std::path::Path;

use super::ModelError;

/// Ordered lines of a job log.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LogDocument {
    pub lines: Vec<String>,
}

impl LogDocument {
    pub fn new(lines: Vec<String>) -> Self {
        LogDocument { lines }
    }

    pub fn from_text(text: &str) -> Self {
        LogDocument {
            lines: text.lines().map(str::to_string).collect(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ModelError> {
        let bytes =
            std::fs::read(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::from_text(&String::from_utf8_lossy(&bytes)))
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Lines `[start, end)`, clamped to the document.
    pub fn window(&self, start: usize, end: usize) -> &[String] {
        let end = end.min(self.lines.len());
        &self.lines[start.min(end)..end]
    }

    pub fn to_text(&self) -> String {
        let mut s = self.lines.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }
}
