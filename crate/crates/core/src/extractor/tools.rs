//! Read-only filesystem tools available to the extraction agent.

use std::fs;
use std::io::Read;
use std::path::{Component, Path, PathBuf};

use super::{AgentBudget, ExtractError};

pub const TREE_EXTENSIONS: [&str; 7] = ["py", "yaml", "yml", "json", "toml", "sh", "md"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeListing {
    /// Paths relative to the root, `/`-separated.
    pub entries: Vec<String>,
    /// Entries dropped by the budget.
    pub omitted: usize,
}

pub const TRUNCATION_PREFIX: &str = "[truncated:";

impl TreeListing {
    pub fn render(&self) -> String {
        let mut out = self.entries.join("\n");
        if self.omitted > 0 {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&format!("{TRUNCATION_PREFIX} {} more entries]", self.omitted));
        }
        out
    }
}

fn wanted(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| TREE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn hidden(name: &str) -> bool {
    name.starts_with('.')
}

/// Depth-first, lexicographic listing of source and config files under `root`.
pub fn file_tree(root: &Path, budget: &AgentBudget) -> Result<TreeListing, ExtractError> {
    if !root.is_dir() {
        return Err(ExtractError::Tool(format!(
            "{} is not a directory",
            root.display()
        )));
    }
    let mut all = Vec::new();
    walk(root, root, &mut all)?;
    let omitted = all.len().saturating_sub(budget.max_tree_entries);
    all.truncate(budget.max_tree_entries);
    Ok(TreeListing {
        entries: all,
        omitted,
    })
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<(), ExtractError> {
    let mut children: Vec<(String, PathBuf)> = fs::read_dir(dir)
        .map_err(|e| ExtractError::Tool(format!("{}: {e}", dir.display())))?
        .filter_map(Result::ok)
        .map(|e| (e.file_name().to_string_lossy().into_owned(), e.path()))
        .filter(|(name, _)| !hidden(name))
        .collect();
    children.sort();
    for (_, path) in children {
        let meta = match fs::symlink_metadata(&path) {
            Ok(m) => m,
            Err(_) => continue,
        };
        if meta.is_dir() {
            walk(root, &path, out)?;
        } else if meta.is_file() && wanted(&path) {
            let rel = path.strip_prefix(root).unwrap_or(&path);
            let parts: Vec<String> = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect();
            out.push(parts.join("/"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileContent {
    pub text: String,
    pub truncated: bool,
    /// Not valid UTF-8; decoded with replacement characters.
    pub lossy: bool,
}

impl FileContent {
    pub fn render(&self) -> String {
        let mut out = self.text.clone();
        if self.lossy {
            out.insert_str(0, "[binary content, decoded lossily]\n");
        }
        if self.truncated {
            out.push_str("\n[truncated: file exceeds read budget]");
        }
        out
    }
}

/// Resolves `rel` under `root`, refusing anything that escapes it.
pub fn resolve_within(root: &Path, rel: &str) -> Result<PathBuf, ExtractError> {
    let rel_path = Path::new(rel.trim());
    if rel_path.is_absolute()
        || rel_path
            .components()
            .any(|c| matches!(c, Component::ParentDir | Component::Prefix(_)))
    {
        return Err(ExtractError::Security(format!("`{rel}` escapes the repository")));
    }
    let root_c = root
        .canonicalize()
        .map_err(|e| ExtractError::Tool(format!("{}: {e}", root.display())))?;
    let full = root_c.join(rel_path);
    let canon = full
        .canonicalize()
        .map_err(|e| ExtractError::Tool(format!("{rel}: {e}")))?;
    if !canon.starts_with(&root_c) {
        return Err(ExtractError::Security(format!("`{rel}` escapes the repository")));
    }
    Ok(canon)
}

/// Reads at most `max_file_bytes` of `rel` (relative to `root`).
pub fn file_read(root: &Path, rel: &str, budget: &AgentBudget) -> Result<FileContent, ExtractError> {
    let path = resolve_within(root, rel)?;
    if !path.is_file() {
        return Err(ExtractError::Tool(format!("{rel} is not a regular file")));
    }
    let f = fs::File::open(&path).map_err(|e| ExtractError::Tool(format!("{rel}: {e}")))?;
    let mut buf = Vec::new();
    f.take(budget.max_file_bytes as u64 + 1)
        .read_to_end(&mut buf)
        .map_err(|e| ExtractError::Tool(format!("{rel}: {e}")))?;
    let truncated = buf.len() > budget.max_file_bytes;
    buf.truncate(budget.max_file_bytes);
    let (text, lossy) = match String::from_utf8(buf) {
        Ok(s) => (s, false),
        Err(e) => {
            let bytes = e.into_bytes();
            // A cut in the middle of a multi-byte character is not binary content.
            match std::str::from_utf8(&bytes) {
                Err(err) if truncated && err.error_len().is_none() => {
                    let valid = err.valid_up_to();
                    (String::from_utf8_lossy(&bytes[..valid]).into_owned(), false)
                }
                _ => (String::from_utf8_lossy(&bytes).into_owned(), true),
            }
        }
    };
    Ok(FileContent {
        text,
        truncated,
        lossy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn budget() -> AgentBudget {
        AgentBudget::default()
    }

    #[test]
    fn tree_filters_by_extension() {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("train.py"), "x").unwrap();
        fs::create_dir(d.path().join("conf")).unwrap();
        fs::write(d.path().join("conf/exp.yaml"), "a: 1").unwrap();
        fs::write(d.path().join("data.bin"), [0u8, 1, 2]).unwrap();
        fs::write(d.path().join(".secret.py"), "x").unwrap();
        let t = file_tree(d.path(), &budget()).unwrap();
        assert_eq!(t.entries, vec!["conf/exp.yaml", "train.py"]);
        assert_eq!(t.omitted, 0);
    }

    #[test]
    fn empty_and_missing_roots() {
        let d = tempfile::tempdir().unwrap();
        assert!(file_tree(d.path(), &budget()).unwrap().entries.is_empty());
        assert!(file_tree(&d.path().join("nope"), &budget()).is_err());
    }

    #[test]
    fn tree_truncates_at_budget() {
        let d = tempfile::tempdir().unwrap();
        for i in 0..1000 {
            fs::write(d.path().join(format!("f{i:04}.py")), "").unwrap();
        }
        let t = file_tree(d.path(), &budget()).unwrap();
        assert_eq!(t.entries.len(), 400);
        assert_eq!(t.omitted, 600);
        let rendered = t.render();
        assert_eq!(rendered.lines().count(), 401);
        assert!(rendered.lines().last().unwrap().starts_with(TRUNCATION_PREFIX));
    }

    #[test]
    fn read_small_and_large() {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("small.txt"), "a".repeat(1024)).unwrap();
        let c = file_read(d.path(), "small.txt", &budget()).unwrap();
        assert_eq!(c.text.len(), 1024);
        assert!(!c.truncated && !c.render().contains("[truncated"));

        fs::write(d.path().join("big.txt"), "b".repeat(1 << 20)).unwrap();
        let c = file_read(d.path(), "big.txt", &budget()).unwrap();
        assert_eq!(c.text.len(), 64 * 1024);
        assert!(c.truncated && c.render().ends_with("read budget]"));
    }

    #[test]
    fn escapes_are_security_errors() {
        let d = tempfile::tempdir().unwrap();
        fs::create_dir(d.path().join("repo")).unwrap();
        fs::write(d.path().join("secret"), "x").unwrap();
        let root = d.path().join("repo");
        assert!(matches!(
            file_read(&root, "../../etc/secret", &budget()),
            Err(ExtractError::Security(_))
        ));
        assert!(matches!(
            file_read(&root, "/etc/passwd", &budget()),
            Err(ExtractError::Security(_))
        ));
        #[cfg(unix)]
        {
            std::os::unix::fs::symlink(d.path().join("secret"), root.join("link")).unwrap();
            assert!(matches!(
                file_read(&root, "link", &budget()),
                Err(ExtractError::Security(_))
            ));
        }
    }

    #[test]
    fn binary_is_flagged() {
        let d = tempfile::tempdir().unwrap();
        fs::write(d.path().join("w.bin"), [0xffu8, 0xfe, b'a']).unwrap();
        let c = file_read(d.path(), "w.bin", &budget()).unwrap();
        assert!(c.lossy);
        assert!(c.text.contains('\u{fffd}'));
    }
}
