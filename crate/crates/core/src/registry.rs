//! File-backed registry of published regexes keyed by (topic, language,
//! tier), holding stored-form (doubled-backslash) patterns so the file
//! can be pasted into string literals of SQL, PHP, Python or Java hosts.
//!
//! A registry is one JSON file with an append-only `entries` array.
//! Writes replace the whole file atomically (temp file + rename in the
//! same directory), so concurrent readers never observe a partial write.
//! History is never rewritten: superseded versions stay for audit.

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::matcher;
use crate::model::Tier;
use crate::render::unescape_from_store;
use crate::validate::{has_errors, validate_stored, BanList};

/// Default ceiling for how many language regexes may be concatenated into
/// one pattern. Beyond a few, the combined pattern gets slow and its
/// false-positive surface multiplies.
pub const DEFAULT_MAX_CONCAT: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegistryEntry {
    pub topic: String,
    pub language: String,
    pub tier: Tier,
    pub version: u32,
    /// Stored form: every backslash doubled.
    pub stored_regex: String,
    /// UTC ISO-8601, second precision, `Z` suffix.
    pub published_at: String,
    /// Hex SHA-256 of the live (unescaped) regex.
    pub fingerprint: String,
}

impl RegistryEntry {
    /// Live (unescaped) regex for this entry.
    pub fn live_regex(&self) -> Result<String, RegistryError> {
        unescape_from_store(&self.stored_regex)
            .map_err(|e| RegistryError::Corrupted { detail: e.to_string() })
    }
}

#[derive(Debug, Serialize, Deserialize, Default)]
struct RegistryFile {
    entries: Vec<RegistryEntry>,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("VALIDATION_FAILED: {detail}")]
    ValidationFailed { detail: String },
    #[error("VERSION_CONFLICT: {key} already has version {existing}, refusing {attempted}")]
    VersionConflict { key: String, existing: u32, attempted: u32 },
    #[error("NOT_FOUND: no entry for {key}")]
    NotFound { key: String },
    #[error("TOO_MANY_LANGS: {got} entries exceeds the concat limit of {max}")]
    TooManyLangs { got: usize, max: usize },
    #[error("COMPILE_FAIL: {detail}")]
    CompileFail { detail: String },
    #[error("registry is corrupted: {detail}")]
    Corrupted { detail: String },
    #[error("io error on {path}: {detail}")]
    Io { path: String, detail: String },
}

fn key_string(topic: &str, language: &str, tier: Tier) -> String {
    format!("{}/{}/{}", topic, language, tier)
}

pub struct Registry {
    path: PathBuf,
}

impl Registry {
    /// Opens a registry at `path`. A missing file is an empty registry;
    /// it is created on first publish.
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Registry { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn load(&self) -> Result<RegistryFile, RegistryError> {
        match fs::read_to_string(&self.path) {
            Ok(raw) => serde_json::from_str(&raw)
                .map_err(|e| RegistryError::Corrupted { detail: e.to_string() }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(RegistryFile::default()),
            Err(e) => Err(RegistryError::Io {
                path: self.path.display().to_string(),
                detail: e.to_string(),
            }),
        }
    }

    fn store(&self, file: &RegistryFile) -> Result<(), RegistryError> {
        let io_err = |e: std::io::Error| RegistryError::Io {
            path: self.path.display().to_string(),
            detail: e.to_string(),
        };
        let json = serde_json::to_string_pretty(file)
            .map_err(|e| RegistryError::Corrupted { detail: e.to_string() })?;
        // Temp file in the same directory so the rename stays on one
        // filesystem and is atomic.
        let tmp = self.path.with_extension(format!("tmp.{}", std::process::id()));
        fs::write(&tmp, json.as_bytes()).map_err(io_err)?;
        fs::rename(&tmp, &self.path).map_err(io_err)
    }

    /// Validates, stamps, and appends a new entry, returning its version.
    /// The version must be strictly greater than every already-published
    /// version of the same (topic, language, tier).
    pub fn publish(
        &self,
        topic: &str,
        language: &str,
        tier: Tier,
        version: u32,
        stored_regex: &str,
    ) -> Result<u32, RegistryError> {
        let findings = validate_stored(stored_regex, &BanList::default());
        if has_errors(&findings) {
            let detail = findings
                .iter()
                .map(|f| format!("{:?}@{}: {}", f.code, f.location, f.message))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(RegistryError::ValidationFailed { detail });
        }
        let mut file = self.load()?;
        let existing = file
            .entries
            .iter()
            .filter(|e| e.topic == topic && e.language == language && e.tier == tier)
            .map(|e| e.version)
            .max();
        if let Some(existing) = existing {
            if version <= existing {
                return Err(RegistryError::VersionConflict {
                    key: key_string(topic, language, tier),
                    existing,
                    attempted: version,
                });
            }
        }
        let live = unescape_from_store(stored_regex)
            .expect("validated stored form unescapes");
        file.entries.push(RegistryEntry {
            topic: topic.to_string(),
            language: language.to_string(),
            tier,
            version,
            stored_regex: stored_regex.to_string(),
            published_at: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
            fingerprint: matcher::fingerprint_of(&live),
        });
        self.store(&file)?;
        Ok(version)
    }

    /// Latest entry for the key, or the pinned version when given.
    /// Fetched entries are re-validated: a registry whose stored regex no
    /// longer passes is reported as corrupted rather than handed out.
    pub fn fetch(
        &self,
        topic: &str,
        language: &str,
        tier: Tier,
        version: Option<u32>,
    ) -> Result<RegistryEntry, RegistryError> {
        let file = self.load()?;
        let found = file
            .entries
            .into_iter()
            .filter(|e| e.topic == topic && e.language == language && e.tier == tier)
            .filter(|e| version.map(|v| e.version == v).unwrap_or(true))
            .max_by_key(|e| e.version);
        let entry = found.ok_or_else(|| RegistryError::NotFound {
            key: match version {
                Some(v) => format!("{} v{}", key_string(topic, language, tier), v),
                None => key_string(topic, language, tier),
            },
        })?;
        let findings = validate_stored(&entry.stored_regex, &BanList::default());
        if has_errors(&findings) {
            return Err(RegistryError::Corrupted {
                detail: format!(
                    "stored regex for {} v{} fails validation: {}",
                    key_string(topic, language, tier),
                    entry.version,
                    findings[0].message
                ),
            });
        }
        Ok(entry)
    }

    /// Every published entry, in publication order.
    pub fn list(&self) -> Result<Vec<RegistryEntry>, RegistryError> {
        Ok(self.load()?.entries)
    }
}

/// Alternation of each entry's live regex, each wrapped in a group, in
/// the order given. Used to run a primary-language regex together with
/// the English one, since English terms pervade posts in every language.
pub fn concat_entries(entries: &[RegistryEntry], max: usize) -> Result<String, RegistryError> {
    if entries.len() > max {
        return Err(RegistryError::TooManyLangs { got: entries.len(), max });
    }
    let mut parts = Vec::new();
    for e in entries {
        parts.push(format!("({})", e.live_regex()?));
    }
    let combined = parts.join("|");
    matcher::engine_compile(&combined).map_err(|detail| RegistryError::CompileFail { detail })?;
    Ok(combined)
}

/// The common two-language case: the post's language plus English.
pub fn concat_for_language(
    primary: &RegistryEntry,
    english: &RegistryEntry,
) -> Result<String, RegistryError> {
    concat_entries(&[primary.clone(), english.clone()], DEFAULT_MAX_CONCAT)
}
