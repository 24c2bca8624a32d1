//! Persistent identities for endurants.
//!
//! Labels are matched exactly after normalization (trim, case-fold,
//! whitespace collapse), per etype. Ids are minted sequentially per etype in
//! resolution order, so a run over the same input always mints the same ids.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::EntityId;
use crate::time::Timestamp;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegistryError {
    #[error("label is empty after normalization")]
    EmptyLabel,
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("alias {alias:?} already names {existing} under etype {etype}")]
    AliasConflict {
        alias: String,
        etype: String,
        existing: EntityId,
    },
    #[error("registry file is malformed: {0}")]
    Malformed(String),
}

pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

fn display_form(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub id: EntityId,
    pub etype: String,
    pub canonical: String,
    pub aliases: BTreeSet<String>,
    pub first_seen: Timestamp,
    pub last_seen: Timestamp,
}

#[derive(Debug, Clone, Default)]
pub struct EntityRegistry {
    entries: Vec<RegistryEntry>,
    index: HashMap<(String, String), usize>,
    by_id: HashMap<EntityId, usize>,
    counters: BTreeMap<String, u64>,
}

impl PartialEq for EntityRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

#[derive(Serialize, Deserialize)]
struct RegistryFile {
    entries: Vec<RegistryEntry>,
}

impl EntityRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[RegistryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &EntityId) -> Option<&RegistryEntry> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    pub fn lookup(&self, label: &str, etype: &str) -> Option<&RegistryEntry> {
        self.index
            .get(&(etype.to_string(), normalize_label(label)))
            .map(|&i| &self.entries[i])
    }

    /// Returns the id registered for `label` under `etype`, minting one on
    /// first sight.
    pub fn resolve(&mut self, label: &str, etype: &str, at: Timestamp) -> Result<EntityId, RegistryError> {
        let key = normalize_label(label);
        if key.is_empty() {
            return Err(RegistryError::EmptyLabel);
        }
        let surface = display_form(label);
        if let Some(&i) = self.index.get(&(etype.to_string(), key.clone())) {
            let e = &mut self.entries[i];
            e.first_seen = e.first_seen.min(at);
            e.last_seen = e.last_seen.max(at);
            if surface != e.canonical && !e.aliases.contains(&surface) {
                e.aliases.insert(surface);
            }
            return Ok(e.id.clone());
        }
        let seq = self.counters.entry(etype.to_string()).or_insert(0);
        *seq += 1;
        let id = EntityId::new(etype, *seq);
        let i = self.entries.len();
        self.entries.push(RegistryEntry {
            id: id.clone(),
            etype: etype.to_string(),
            canonical: surface,
            aliases: BTreeSet::new(),
            first_seen: at,
            last_seen: at,
        });
        self.index.insert((etype.to_string(), key), i);
        self.by_id.insert(id.clone(), i);
        Ok(id)
    }

    /// Makes `alias` resolve to `id` from now on.
    pub fn add_alias(&mut self, id: &EntityId, alias: &str) -> Result<(), RegistryError> {
        let &i = self
            .by_id
            .get(id)
            .ok_or_else(|| RegistryError::UnknownEntity(id.clone()))?;
        let key = normalize_label(alias);
        if key.is_empty() {
            return Err(RegistryError::EmptyLabel);
        }
        let etype = self.entries[i].etype.clone();
        match self.index.get(&(etype.clone(), key.clone())) {
            Some(&j) if j != i => {
                return Err(RegistryError::AliasConflict {
                    alias: alias.to_string(),
                    etype,
                    existing: self.entries[j].id.clone(),
                })
            }
            Some(_) => {}
            None => {
                self.index.insert((etype, key), i);
            }
        }
        self.entries[i].aliases.insert(display_form(alias));
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = RegistryFile {
            entries: self.entries.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("registry serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let file: RegistryFile = serde_json::from_str(text).map_err(|e| RegistryError::Malformed(e.to_string()))?;
        let mut reg = EntityRegistry::new();
        for entry in file.entries {
            let i = reg.entries.len();
            let seq = entry
                .id
                .as_str()
                .rsplit_once(':')
                .and_then(|(_, n)| n.parse::<u64>().ok())
                .ok_or_else(|| RegistryError::Malformed(format!("bad id {}", entry.id)))?;
            let counter = reg.counters.entry(entry.etype.clone()).or_insert(0);
            *counter = (*counter).max(seq);
            for label in std::iter::once(&entry.canonical).chain(&entry.aliases) {
                let key = (entry.etype.clone(), normalize_label(label));
                if let Some(&j) = reg.index.get(&key) {
                    if j != i {
                        return Err(RegistryError::Malformed(format!(
                            "label {label:?} maps to both {} and {}",
                            reg.entries[j].id, entry.id
                        )));
                    }
                }
                reg.index.insert(key, i);
            }
            if reg.by_id.insert(entry.id.clone(), i).is_some() {
                return Err(RegistryError::Malformed(format!("duplicate id {}", entry.id)));
            }
            reg.entries.push(entry);
        }
        Ok(reg)
    }
}

pub fn resolve_entity(
    label: &str,
    etype: &str,
    at: Timestamp,
    registry: &mut EntityRegistry,
) -> Result<EntityId, RegistryError> {
    registry.resolve(label, etype, at)
}
