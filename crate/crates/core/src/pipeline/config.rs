use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{PipelineError, Result};
use crate::corpus::Language;
use crate::detect::{ModelKind, TaggerConfig};
use crate::link::{default_top_n, CandidateSettings, RankerConfig};

/// Keys naming files or directories.
pub const PATH_KEYS: [&str; 14] = [
    "kb",
    "abbreviations",
    "zh_variants",
    "translations",
    "index",
    "md_docs",
    "md_gold",
    "el_docs",
    "el_gold",
    "docs",
    "gold",
    "system",
    "checkpoints",
    "output",
];

/// Settings of every command, read from `key=value` lines.
///
/// Tagger and ranker fields are addressed as `tagger.<field>` and
/// `ranker.<field>`, list cut-offs as `top_n.<LANG>`. Their own `seed`
/// fields are derived from `seed` per ensemble member.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub languages: BTreeSet<Language>,
    pub model_kinds: Vec<ModelKind>,
    /// Languages whose detectors may emit nominal mentions.
    pub nominal_languages: BTreeSet<Language>,
    /// Ensemble size of both the detectors and the ranker.
    pub members: usize,
    pub tagger: TaggerConfig,
    pub ranker: RankerConfig,
    pub top_n: BTreeMap<Language, usize>,
    pub fuzzy_limit: usize,
    pub document_limit: usize,
    pub seed: u64,
    /// Threads for document-level work; 0 uses every core.
    pub workers: usize,
    pub system_id: String,
    paths: BTreeMap<&'static str, PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let all: BTreeSet<Language> = Language::ALL.iter().copied().collect();
        PipelineConfig {
            nominal_languages: all.iter().copied().filter(|l| *l != Language::Spa).collect(),
            languages: all,
            model_kinds: vec![ModelKind::Crnnlm, ModelKind::Seq2Seq],
            members: 5,
            tagger: TaggerConfig::default(),
            ranker: RankerConfig::default(),
            top_n: Language::ALL.iter().map(|&l| (l, default_top_n(l))).collect(),
            fuzzy_limit: 20,
            document_limit: 20,
            seed: 1,
            workers: 0,
            system_id: "edl".into(),
            paths: BTreeMap::new(),
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> PipelineError {
    PipelineError::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn count(key: &str, value: &str) -> Result<usize> {
    value
        .parse()
        .map_err(|_| invalid(key, format!("`{value}` is not a count")))
}

fn languages(key: &str, value: &str) -> Result<BTreeSet<Language>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|v| invalid(key, format!("unknown language `{v}`"))))
        .collect()
}

impl PipelineConfig {
    /// Reads a config file. Blank lines and lines starting with `#` are
    /// skipped; relative paths are taken from the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut config = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| PipelineError::Config {
                key: format!("line {}", i + 1),
                reason: "expected key=value".into(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if PATH_KEYS.contains(&key) && Path::new(value).is_relative() {
                config.set(key, &base.join(value).to_string_lossy())?;
            } else {
                config.set(key, value)?;
            }
        }
        Ok(config)
    }

    /// Applies one `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| invalid(pair, "expected key=value"))?;
        self.set(key.trim(), value.trim())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if let Some(k) = PATH_KEYS.iter().find(|k| **k == key) {
            self.paths.insert(k, PathBuf::from(value));
            return Ok(());
        }
        if let Some(field) = key.strip_prefix("tagger.") {
            if field == "seed" {
                return Err(invalid(key, "member seeds derive from `seed`"));
            }
            return self.tagger.set(field, value).map_err(|e| invalid(key, e.to_string()));
        }
        if let Some(field) = key.strip_prefix("ranker.") {
            if field == "seed" {
                return Err(invalid(key, "member seeds derive from `seed`"));
            }
            return self.ranker.set(field, value).map_err(|e| invalid(key, e.to_string()));
        }
        if let Some(lang) = key.strip_prefix("top_n.") {
            let lang: Language = lang
                .parse()
                .map_err(|v| invalid(key, format!("unknown language `{v}`")))?;
            let n = count(key, value)?;
            if n == 0 {
                return Err(invalid(key, "must be at least 1"));
            }
            self.top_n.insert(lang, n);
            return Ok(());
        }
        match key {
            "languages" => self.languages = languages(key, value)?,
            "nominal_languages" => self.nominal_languages = languages(key, value)?,
            "model_kinds" => {
                self.model_kinds = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse().map_err(|e: String| invalid(key, e)))
                    .collect::<Result<_>>()?;
                self.model_kinds.sort_by_key(ToString::to_string);
                self.model_kinds.dedup();
            }
            "members" => self.members = count(key, value)?,
            "fuzzy_limit" => self.fuzzy_limit = count(key, value)?,
            "document_limit" => self.document_limit = count(key, value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| invalid(key, format!("`{value}` is not an integer")))?
            }
            "workers" => self.workers = count(key, value)?,
            "system_id" => {
                if value.is_empty() || value.contains(char::is_whitespace) {
                    return Err(invalid(key, "must be a non-empty word"));
                }
                self.system_id = value.to_string();
            }
            other => return Err(invalid(other, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.members == 0 {
            return Err(invalid("members", "must be at least 1"));
        }
        if self.model_kinds.is_empty() {
            return Err(invalid("model_kinds", "at least one model kind is required"));
        }
        self.tagger.validate().map_err(|e| invalid("tagger", e.to_string()))?;
        self.ranker.validate().map_err(|e| invalid("ranker", e.to_string()))?;
        Ok(())
    }

    /// The path under `key`, or an error naming the missing key.
    pub fn path(&self, key: &'static str) -> Result<&Path> {
        self.paths
            .get(key)
            .map(PathBuf::as_path)
            .ok_or(PipelineError::MissingSetting(key))
    }

    pub fn optional_path(&self, key: &'static str) -> Option<&Path> {
        self.paths.get(key).map(PathBuf::as_path)
    }

    pub fn candidate_settings(&self, language: Language) -> CandidateSettings {
        CandidateSettings {
            top_n: self
                .top_n
                .get(&language)
                .copied()
                .unwrap_or_else(|| default_top_n(language)),
            fuzzy_limit: self.fuzzy_limit,
            document_limit: self.document_limit,
        }
    }

    /// Every non-path setting as sorted `key=value` pairs.
    pub fn settings(&self) -> Vec<(String, String)> {
        let join = |set: &BTreeSet<Language>| set.iter().map(|l| l.as_str()).collect::<Vec<_>>().join(",");
        let mut out = vec![
            ("languages".to_string(), join(&self.languages)),
            ("nominal_languages".to_string(), join(&self.nominal_languages)),
            (
                "model_kinds".to_string(),
                self.model_kinds
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("members".to_string(), self.members.to_string()),
            ("fuzzy_limit".to_string(), self.fuzzy_limit.to_string()),
            ("document_limit".to_string(), self.document_limit.to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("system_id".to_string(), self.system_id.clone()),
        ];
        out.extend(self.top_n.iter().map(|(l, n)| (format!("top_n.{l}"), n.to_string())));
        out.extend(tagger_pairs(&self.tagger));
        out.extend(ranker_pairs(&self.ranker));
        out.sort();
        out
    }

    /// Hex SHA-256 of [`Self::settings`]. Paths and the worker count do not
    /// change results and are left out.
    pub fn settings_hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.settings() {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        hex::encode(h.finalize())
    }
}

pub(crate) fn tagger_pairs(c: &TaggerConfig) -> Vec<(String, String)> {
    c.to_pairs()
        .into_iter()
        .filter(|(k, _)| *k != "seed")
        .map(|(k, v)| (format!("tagger.{k}"), v))
        .collect()
}

pub(crate) fn ranker_pairs(c: &RankerConfig) -> Vec<(String, String)> {
    c.to_pairs()
        .into_iter()
        .filter(|(k, _)| *k != "seed")
        .map(|(k, v)| (format!("ranker.{k}"), v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_language_cut_offs() {
        let c = PipelineConfig::default();
        assert_eq!(c.candidate_settings(Language::Eng).top_n, 3);
        assert_eq!(c.candidate_settings(Language::Spa).top_n, 3);
        assert_eq!(c.candidate_settings(Language::Cmn).top_n, 30);
        assert!(!c.nominal_languages.contains(&Language::Spa));
        c.validate().unwrap();
    }

    #[test]
    fn overrides_and_errors() {
        let mut c = PipelineConfig::default();
        c.set_pair("tagger.max_epochs=3").unwrap();
        c.set_pair("ranker.hidden1 = 8").unwrap();
        c.set_pair("top_n.CMN=5").unwrap();
        c.set_pair("model_kinds=seq2seq").unwrap();
        assert_eq!((c.tagger.max_epochs, c.ranker.hidden1), (3, 8));
        assert_eq!(c.candidate_settings(Language::Cmn).top_n, 5);
        assert_eq!(c.model_kinds, vec![ModelKind::Seq2Seq]);
        assert!(c.set_pair("top_n.ENG=0").is_err());
        assert!(c.set_pair("tagger.seed=4").is_err());
        assert!(c.set_pair("colour=blue").is_err());
        assert!(c.set_pair("no_equals").is_err());
        assert!(matches!(c.path("kb"), Err(PipelineError::MissingSetting("kb"))));
    }

    #[test]
    fn file_paths_are_relative_to_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        fs::write(&file, "# comment\nkb = data/kb.tsv\nseed=9\n\n").unwrap();
        let c = PipelineConfig::load(&file).unwrap();
        assert_eq!(c.path("kb").unwrap(), dir.path().join("data/kb.tsv"));
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn hash_ignores_paths_and_workers() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.set("output", "/tmp/x").unwrap();
        b.set("workers", "3").unwrap();
        assert_eq!(a.settings_hash(), b.settings_hash());
        b.set("seed", "2").unwrap();
        assert_ne!(a.settings_hash(), b.settings_hash());
    }
}
