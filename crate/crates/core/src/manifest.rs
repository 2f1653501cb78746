//! Corpus manifests: one JSON object per line.
//!
//! ```text
//! {"id":"cat_01","foreground":"fg/cat.png","alpha":"alpha/cat.png","background":"bg/room.png","split":"test"}
//! ```
//!
//! | key          | required | meaning                                              |
//! |--------------|----------|------------------------------------------------------|
//! | `foreground` | yes      | foreground colour image                              |
//! | `alpha`      | yes      | ground-truth alpha matte                             |
//! | `background` | no       | background image; omitted records draw one by seed   |
//! | `split`      | yes      | `train`, `val` or `test`                             |
//! | `id`         | no       | record id; defaults to the alpha file stem           |
//!
//! Relative paths resolve against the manifest's directory. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{MatteError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = MatteError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(MatteError::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub foreground: PathBuf,
    pub alpha: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub background: Option<PathBuf>,
    pub split: Split,
}

impl ManifestRecord {
    /// Explicit id, or the alpha file stem.
    pub fn id(&self) -> String {
        match &self.id {
            Some(id) => id.clone(),
            None => self
                .alpha
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.foreground.as_os_str().is_empty() {
            return Err("`foreground` is empty".into());
        }
        if self.alpha.as_os_str().is_empty() {
            return Err("`alpha` is empty".into());
        }
        if matches!(&self.background, Some(b) if b.as_os_str().is_empty()) {
            return Err("`background` is empty".into());
        }
        if matches!(&self.id, Some(id) if id.is_empty() || id.contains(['/', '\\'])) {
            return Err("`id` must be non-empty and contain no path separators".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusManifest {
    pub records: Vec<ManifestRecord>,
    /// Directory that relative record paths resolve against.
    pub base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let record: ManifestRecord = serde_json::from_str(trimmed).map_err(|e| MatteError::ManifestParse {
                line: i + 1,
                message: e.to_string(),
            })?;
            record
                .check()
                .map_err(|message| MatteError::ManifestParse { line: i + 1, message })?;
            records.push(record);
        }
        Ok(CorpusManifest {
            records,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| MatteError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("manifest records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count_split(&self, split: Split) -> usize {
        self.records.iter().filter(|r| r.split == split).count()
    }
}
