use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::jsonpath::JsonPath;
use super::predicate::Predicate;
use super::processors::{compile_rule, Processor, SplitMode, UpdateRule, SPLIT_INDEX, SPLIT_KEY};
use super::transform::TransformSpec;

fn default_root() -> JsonPath {
    JsonPath::root()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StageSpec {
    SplitJson {
        #[serde(default = "default_root")]
        path: JsonPath,
        #[serde(default)]
        mode: SplitMode,
    },
    EvaluateJsonPath {
        extract: IndexMap<String, JsonPath>,
    },
    RouteOnAttribute {
        predicate: String,
    },
    UpdateAttribute {
        rules: Vec<UpdateRule>,
    },
    Transform {
        spec: TransformSpec,
    },
    Sanitize,
}

impl StageSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            StageSpec::SplitJson { .. } => "split-json",
            StageSpec::EvaluateJsonPath { .. } => "evaluate-json-path",
            StageSpec::RouteOnAttribute { .. } => "route-on-attribute",
            StageSpec::UpdateAttribute { .. } => "update-attribute",
            StageSpec::Transform { .. } => "transform",
            StageSpec::Sanitize => "sanitize",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceSpec {
    HttpPoll {
        url: String,
        #[serde(default = "default_interval")]
        interval_seconds: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        token: Option<String>,
    },
    Tcp {
        address: String,
    },
    Capture {
        path: PathBuf,
    },
    /// Records are pushed in-process through the handle's input.
    Channel,
}

fn default_interval() -> u64 {
    60
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SinkSpec {
    /// POSTs every payload to `<url>/entities`.
    Broker { url: String },
    /// Writes every payload to a numbered file.
    Directory { path: PathBuf },
    /// Records are handed back in-process through the handle's output.
    Channel,
}

fn default_capacity() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub name: String,
    pub source: SourceSpec,
    #[serde(default)]
    pub stages: Vec<StageSpec>,
    pub sink: SinkSpec,
    #[serde(default = "default_capacity")]
    pub queue_capacity: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dead_letter: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("cannot parse {path}: {reason}")]
    Syntax { path: PathBuf, reason: String },
    #[error("invalid pipeline {name:?}:\n  {}", .errors.join("\n  "))]
    Invalid { name: String, errors: Vec<String> },
}

impl PipelineConfig {
    /// Loads a TOML or JSON document, chosen by extension.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let syntax = |reason: String| ConfigError::Syntax {
            path: path.to_path_buf(),
            reason,
        };
        let mut config: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| syntax(e.to_string()))?
        } else {
            Self::from_toml(&text).map_err(syntax)?
        };
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.compile()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Makes relative file paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let SourceSpec::Capture { path } = &mut self.source {
            fix(path);
        }
        if let SinkSpec::Directory { path } = &mut self.sink {
            fix(path);
        }
        if let Some(p) = &mut self.dead_letter {
            fix(p);
        }
    }

    /// Checks every stage and returns the runnable processors, or every
    /// problem found.
    pub fn compile(&self) -> Result<Vec<Processor>, ConfigError> {
        let mut errors = Vec::new();
        let mut processors = Vec::new();
        let mut declared: BTreeSet<String> = BTreeSet::new();

        if self.queue_capacity == 0 {
            errors.push("queue_capacity must be at least 1".into());
        }
        match &self.source {
            SourceSpec::HttpPoll {
                url, interval_seconds, ..
            } => {
                if *interval_seconds < 1 {
                    errors.push("source: interval_seconds must be at least 1".into());
                }
                if !(url.starts_with("http://") || url.starts_with("https://")) {
                    errors.push(format!("source: {url:?} is not an HTTP URL"));
                }
            }
            SourceSpec::Tcp { address } if address.is_empty() => errors.push("source: empty TCP address".into()),
            _ => {}
        }
        if let SinkSpec::Broker { url } = &self.sink {
            if !(url.starts_with("http://") || url.starts_with("https://")) {
                errors.push(format!("sink: {url:?} is not an HTTP URL"));
            }
        }

        let mut check_reads = |stage: usize, reads: Vec<String>, declared: &BTreeSet<String>| {
            for name in reads {
                if !declared.contains(&name) {
                    errors.push(format!(
                        "stage {stage}: attribute {name:?} is not set by an earlier stage"
                    ));
                }
            }
        };

        let mut stage_errors = Vec::new();
        for (i, stage) in self.stages.iter().enumerate() {
            let n = i + 1;
            match stage {
                StageSpec::SplitJson { path, mode } => {
                    declared.insert(SPLIT_INDEX.into());
                    if *mode == SplitMode::Object {
                        declared.insert(SPLIT_KEY.into());
                    }
                    processors.push(Processor::Split {
                        path: path.clone(),
                        mode: *mode,
                    });
                }
                StageSpec::EvaluateJsonPath { extract } => {
                    if extract.is_empty() {
                        stage_errors.push(format!("stage {n}: nothing to extract"));
                    }
                    declared.extend(extract.keys().cloned());
                    processors.push(Processor::Evaluate {
                        extractions: extract.clone(),
                    });
                }
                StageSpec::RouteOnAttribute { predicate } => match predicate.parse::<Predicate>() {
                    Ok(p) => {
                        check_reads(n, p.referenced_attributes().into_iter().collect(), &declared);
                        processors.push(Processor::Route { predicate: p });
                    }
                    Err(e) => stage_errors.push(format!("stage {n}: {e}")),
                },
                StageSpec::UpdateAttribute { rules } => {
                    let mut compiled = Vec::new();
                    for rule in rules {
                        check_reads(n, rule.reads(), &declared);
                        declared.insert(rule.writes());
                        match compile_rule(rule) {
                            Ok(c) => compiled.push(c),
                            Err(e) => stage_errors.push(format!("stage {n}: {e}")),
                        }
                    }
                    processors.push(Processor::Update { rules: compiled });
                }
                StageSpec::Transform { spec } => match spec.compile() {
                    Ok(t) => {
                        check_reads(n, t.referenced_attributes(), &declared);
                        processors.push(Processor::Transform { transform: Box::new(t) });
                    }
                    Err(es) => stage_errors.extend(es.into_iter().map(|e| format!("stage {n}: {e}"))),
                },
                StageSpec::Sanitize => processors.push(Processor::Sanitize),
            }
        }
        errors.extend(stage_errors);

        if errors.is_empty() {
            Ok(processors)
        } else {
            Err(ConfigError::Invalid {
                name: self.name.clone(),
                errors,
            })
        }
    }
}
