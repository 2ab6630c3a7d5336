//! Life-stage scenarios, loaded from one TOML document per scenario.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::narrative::{ChapterIndex, NAME_SLOT};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub title: String,
    pub setting_description: String,
    /// Chapter number → question template containing a `{protagonist_name}` slot.
    pub chapter_inquiry_templates: BTreeMap<ChapterIndex, String>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario directory {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario file {path}: {message}")]
    Parse { path: String, message: String },
    #[error("scenario `{id}`: {message}")]
    Invalid { id: String, message: String },
    #[error("duplicate scenario id `{0}`")]
    Duplicate(String),
    #[error("no scenario files found in {0}")]
    Empty(String),
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |message: String| ScenarioError::Invalid {
            id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(invalid("id must be a non-empty [A-Za-z0-9_-] identifier".into()));
        }
        if self.title.trim().is_empty() {
            return Err(invalid("title is empty".into()));
        }
        for chapter in ChapterIndex::all() {
            let template = self
                .chapter_inquiry_templates
                .get(&chapter)
                .filter(|t| !t.trim().is_empty())
                .ok_or_else(|| invalid(format!("missing template for chapter {chapter}")))?;
            if template.replace(NAME_SLOT, "").contains(['{', '}']) {
                return Err(invalid(format!(
                    "chapter {chapter} template has a slot other than {NAME_SLOT}"
                )));
            }
        }
        Ok(())
    }
}

/// The set of scenarios a service offers, keyed by stable id.
#[derive(Debug, Clone, Default)]
pub struct ScenarioRegistry {
    scenarios: BTreeMap<String, Scenario>,
}

const DEFAULT_SCENARIOS: [(&str, &str); 3] = [
    ("high_school.toml", include_str!("../../scenarios/high_school.toml")),
    ("university.toml", include_str!("../../scenarios/university.toml")),
    ("early_career.toml", include_str!("../../scenarios/early_career.toml")),
];

impl ScenarioRegistry {
    /// The three built-in life stages.
    pub fn defaults() -> Self {
        let mut registry = Self::default();
        for (name, text) in DEFAULT_SCENARIOS {
            let scenario = Scenario::from_toml(text)
                .unwrap_or_else(|e| panic!("built-in scenario {name} is invalid: {e}"));
            registry
                .insert(scenario)
                .unwrap_or_else(|e| panic!("built-in scenario {name} is invalid: {e}"));
        }
        registry
    }

    /// Loads every `*.toml` file in `dir`. Any malformed file fails the load.
    pub fn load_dir(dir: &Path) -> Result<Self, ScenarioError> {
        let io_err = |source| ScenarioError::Io {
            path: dir.display().to_string(),
            source,
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(io_err)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "toml"))
            .collect();
        paths.sort();

        let mut registry = Self::default();
        for path in &paths {
            let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let scenario = Scenario::from_toml(&text).map_err(|message| ScenarioError::Parse {
                path: path.display().to_string(),
                message,
            })?;
            registry.insert(scenario)?;
        }
        if registry.scenarios.is_empty() {
            return Err(ScenarioError::Empty(dir.display().to_string()));
        }
        Ok(registry)
    }

    pub fn insert(&mut self, scenario: Scenario) -> Result<(), ScenarioError> {
        scenario.validate()?;
        if self.scenarios.contains_key(&scenario.id) {
            return Err(ScenarioError::Duplicate(scenario.id));
        }
        self.scenarios.insert(scenario.id.clone(), scenario);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Scenario> {
        self.scenarios.values()
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}
