//! In-memory context store and its on-disk form: one JSONL file per subject
//! under `contexts/`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::context::ContextInstance;
use crate::sequence::{export_sequence, import_contexts, LifeSequence, SequenceError};

pub const CONTEXTS_DIR: &str = "contexts";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: SequenceError },
    #[error("context {subject}/{index} is stored twice")]
    Duplicate { subject: String, index: u64 },
    #[error("{0} is not a context store (no {CONTEXTS_DIR}/ directory)")]
    NotAStore(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextStore {
    subjects: BTreeMap<String, Vec<ContextInstance>>,
}

impl ContextStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_contexts(contexts: impl IntoIterator<Item = ContextInstance>) -> Result<Self, StoreError> {
        let mut store = ContextStore::new();
        for c in contexts {
            store.insert(c)?;
        }
        Ok(store)
    }

    pub fn insert(&mut self, ctx: ContextInstance) -> Result<(), StoreError> {
        let list = self.subjects.entry(ctx.subject_id.clone()).or_default();
        let index = ctx.window.index;
        if list.last().is_none_or(|l| l.window.index < index) {
            list.push(ctx);
            return Ok(());
        }
        match list.binary_search_by_key(&index, |c| c.window.index) {
            Ok(_) => Err(StoreError::Duplicate {
                subject: ctx.subject_id,
                index,
            }),
            Err(pos) => {
                list.insert(pos, ctx);
                Ok(())
            }
        }
    }

    pub fn subjects(&self) -> impl Iterator<Item = &str> {
        self.subjects.keys().map(String::as_str)
    }

    /// A subject's contexts in window order.
    pub fn contexts(&self, subject: &str) -> &[ContextInstance] {
        self.subjects.get(subject).map_or(&[], Vec::as_slice)
    }

    pub fn get(&self, subject: &str, index: u64) -> Option<&ContextInstance> {
        let list = self.subjects.get(subject)?;
        list.binary_search_by_key(&index, |c| c.window.index)
            .ok()
            .map(|i| &list[i])
    }

    pub fn len(&self) -> usize {
        self.subjects.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reads every `contexts/*.jsonl` file under `dir`.
    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let cdir = dir.join(CONTEXTS_DIR);
        if !cdir.is_dir() {
            return Err(StoreError::NotAStore(dir.to_path_buf()));
        }
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| StoreError::Io { path, source }
        };
        let mut files: Vec<PathBuf> = fs::read_dir(&cdir)
            .map_err(io_err(&cdir))?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(io_err(&cdir))?;
        files.retain(|p| p.extension().is_some_and(|e| e == "jsonl"));
        files.sort();
        let mut store = ContextStore::new();
        for path in files {
            let file = fs::File::open(&path).map_err(io_err(&path))?;
            let contexts = import_contexts(BufReader::new(file)).map_err(|source| StoreError::Parse {
                path: path.clone(),
                source,
            })?;
            for c in contexts {
                store.insert(c)?;
            }
        }
        Ok(store)
    }

    /// Writes one file per subject under `dir/contexts/`.
    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        let cdir = dir.join(CONTEXTS_DIR);
        fs::create_dir_all(&cdir).map_err(|source| StoreError::Io {
            path: cdir.clone(),
            source,
        })?;
        for (subject, contexts) in &self.subjects {
            let path = cdir.join(subject_file_name(subject));
            let io = |source| StoreError::Io {
                path: path.clone(),
                source,
            };
            let mut w = BufWriter::new(fs::File::create(&path).map_err(io)?);
            let seq = LifeSequence::from_contexts(subject, contexts);
            export_sequence(&seq, self, &mut w).map_err(|e| match e {
                SequenceError::Io(source) => io(source),
                other => StoreError::Parse {
                    path: path.clone(),
                    source: other,
                },
            })?;
            w.flush().map_err(io)?;
        }
        Ok(())
    }
}

/// File name for a subject's contexts; characters outside `[A-Za-z0-9._-]`
/// are percent-encoded.
pub fn subject_file_name(subject: &str) -> String {
    let mut name = String::with_capacity(subject.len() + 6);
    for b in subject.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-') && !(name.is_empty() && b == b'.') {
            name.push(b as char);
        } else {
            name.push_str(&format!("%{b:02X}"));
        }
    }
    name.push_str(".jsonl");
    name
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_names_are_safe() {
        assert_eq!(subject_file_name("acc01"), "acc01.jsonl");
        assert_eq!(subject_file_name("a/b c"), "a%2Fb%20c.jsonl");
        assert_eq!(subject_file_name(".."), "%2E..jsonl");
    }
}
