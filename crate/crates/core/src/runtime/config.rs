use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::broker::RetryPolicy;
use crate::engine::DEFAULT_DELAY_THRESHOLD_SECS;

pub const ENV_PREFIX: &str = "AEROTWIN__";

#[derive(Debug, thiserror::Error)]
pub enum RuntimeConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("cannot parse config: {0}")]
    Syntax(String),
    #[error("environment override {name}: {reason}")]
    Override { name: String, reason: String },
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClockSection {
    /// Simulated start; defaults to the scenario's start.
    pub start: Option<String>,
    /// Simulated seconds per wall second. Zero runs in lockstep: the clock
    /// only advances once every component has settled.
    pub scale: f64,
    /// Shut down once the scenario is over.
    pub stop_at_end: bool,
}

impl Default for ClockSection {
    fn default() -> Self {
        Self {
            start: None,
            scale: 60.0,
            stop_at_end: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrokerSection {
    pub enabled: bool,
    pub listen: String,
    /// Where the other components find the broker when it runs elsewhere.
    pub url: Option<String>,
    pub retry: RetryPolicy,
}

impl Default for BrokerSection {
    fn default() -> Self {
        Self {
            enabled: true,
            listen: "127.0.0.1:1026".into(),
            url: None,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSection {
    pub enabled: bool,
    pub scenario: Option<PathBuf>,
    pub rest_listen: String,
    pub tcp_listen: String,
    pub token: Option<String>,
    pub tick_seconds: u64,
    pub inject_null: bool,
}

impl Default for SimulatorSection {
    fn default() -> Self {
        Self {
            enabled: true,
            scenario: None,
            rest_listen: "127.0.0.1:8090".into(),
            tcp_listen: "127.0.0.1:8091".into(),
            token: Some("demo-token".into()),
            tick_seconds: 10,
            inject_null: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelinesSection {
    pub enabled: bool,
    pub configs: Vec<PathBuf>,
    pub status_listen: String,
    /// Where rejected records are logged; kept in memory only when unset.
    pub dead_letter_dir: Option<PathBuf>,
}

impl Default for PipelinesSection {
    fn default() -> Self {
        Self {
            enabled: true,
            configs: Vec::new(),
            status_listen: "127.0.0.1:8094".into(),
            dead_letter_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineSection {
    pub enabled: bool,
    pub listen: String,
    pub delay_threshold_secs: i64,
    /// Required from browsers on the live feed when set.
    pub session_token: Option<String>,
}

impl Default for EngineSection {
    fn default() -> Self {
        Self {
            enabled: true,
            listen: "127.0.0.1:8093".into(),
            delay_threshold_secs: DEFAULT_DELAY_THRESHOLD_SECS,
            session_token: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HistorySection {
    pub enabled: bool,
    pub listen: String,
    pub dir: PathBuf,
}

impl Default for HistorySection {
    fn default() -> Self {
        Self {
            enabled: true,
            listen: "127.0.0.1:8092".into(),
            dir: "data/history".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    pub log_level: String,
    pub home_airport: String,
    pub clock: ClockSection,
    pub broker: BrokerSection,
    pub simulator: SimulatorSection,
    pub pipelines: PipelinesSection,
    pub engine: EngineSection,
    pub history: HistorySection,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            log_level: "info".into(),
            home_airport: "ABZ".into(),
            clock: ClockSection::default(),
            broker: BrokerSection::default(),
            simulator: SimulatorSection::default(),
            pipelines: PipelinesSection::default(),
            engine: EngineSection::default(),
            history: HistorySection::default(),
        }
    }
}

/// Reads `AEROTWIN__SECTION__KEY=value` pairs. Values are parsed as TOML
/// scalars or arrays when possible, otherwise taken as strings.
fn apply_overrides(
    doc: &mut toml::Table,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<(), RuntimeConfigError> {
    for (name, raw) in vars {
        let Some(path) = name.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let keys: Vec<String> = path.split("__").map(|k| k.to_ascii_lowercase()).collect();
        if keys.iter().any(|k| k.is_empty()) {
            return Err(RuntimeConfigError::Override {
                name,
                reason: "empty key segment".into(),
            });
        }
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or(toml::Value::String(raw.clone()));
        let (last, parents) = keys.split_last().expect("non-empty path");
        let mut table = &mut *doc;
        for k in parents {
            let entry = table
                .entry(k.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry.as_table_mut().ok_or_else(|| RuntimeConfigError::Override {
                name: name.clone(),
                reason: format!("{k} is not a section"),
            })?;
        }
        table.insert(last.clone(), value);
    }
    Ok(())
}

impl RuntimeConfig {
    pub fn from_toml_with_env(
        text: &str,
        vars: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, RuntimeConfigError> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| RuntimeConfigError::Syntax(e.to_string()))?;
        apply_overrides(&mut doc, vars)?;
        let config: RuntimeConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| RuntimeConfigError::Syntax(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Loads `path` (or defaults when `None`), applies the process
    /// environment, resolves relative paths and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, RuntimeConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| RuntimeConfigError::Io {
                path: p.to_path_buf(),
                reason: e.to_string(),
            })?,
            None => String::new(),
        };
        let mut config = Self::from_toml_with_env(&text, std::env::vars())?;
        if let Some(base) = path.and_then(Path::parent) {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(s) = self.simulator.scenario.as_mut() {
            fix(s);
        }
        self.pipelines.configs.iter_mut().for_each(fix);
        fix(&mut self.history.dir);
        if let Some(d) = self.pipelines.dead_letter_dir.as_mut() {
            fix(d);
        }
    }

    pub fn broker_url(&self) -> String {
        match &self.broker.url {
            Some(url) => url.trim_end_matches('/').to_string(),
            None => format!("http://{}", self.broker.listen),
        }
    }

    pub fn is_lockstep(&self) -> bool {
        self.clock.scale == 0.0
    }

    /// Every enabled listener, by component.
    pub fn listeners(&self) -> Vec<(&'static str, &str)> {
        let mut out = Vec::new();
        if self.broker.enabled {
            out.push(("broker", self.broker.listen.as_str()));
        }
        if self.simulator.enabled {
            out.push(("simulator", self.simulator.rest_listen.as_str()));
            out.push(("simulator positions", self.simulator.tcp_listen.as_str()));
        }
        if self.pipelines.enabled {
            out.push(("pipeline status", self.pipelines.status_listen.as_str()));
        }
        if self.engine.enabled {
            out.push(("engine", self.engine.listen.as_str()));
        }
        if self.history.enabled {
            out.push(("history", self.history.listen.as_str()));
        }
        out
    }

    pub fn validate(&self) -> Result<(), RuntimeConfigError> {
        let mut errors = Vec::new();
        let mut ports: BTreeMap<u16, &str> = BTreeMap::new();
        for (component, listen) in self.listeners() {
            match listen.parse::<SocketAddr>() {
                Ok(addr) if addr.port() != 0 => {
                    if let Some(other) = ports.insert(addr.port(), component) {
                        errors.push(format!("{component} and {other} both use port {}", addr.port()));
                    }
                }
                Ok(_) => {}
                Err(_) => errors.push(format!("{component}: {listen:?} is not host:port")),
            }
        }
        if !(self.clock.scale >= 0.0 && self.clock.scale.is_finite()) {
            errors.push("clock.scale must be zero or positive".into());
        }
        if let Some(start) = &self.clock.start {
            if crate::time::parse_timestamp(start).is_err() {
                errors.push(format!("clock.start {start:?} is not a timestamp"));
            }
        }
        if self.simulator.enabled && self.simulator.scenario.is_none() {
            errors.push("simulator.scenario is required when the simulator is enabled".into());
        }
        if self.simulator.tick_seconds == 0 {
            errors.push("simulator.tick_seconds must be positive".into());
        }
        if self.pipelines.enabled && self.pipelines.configs.is_empty() {
            errors.push("pipelines.configs is empty".into());
        }
        if !self.broker.enabled
            && self.broker.url.is_none()
            && (self.pipelines.enabled || self.engine.enabled || self.history.enabled)
        {
            errors.push("broker.url is required when the broker runs elsewhere".into());
        }
        if self.engine.delay_threshold_secs < 0 {
            errors.push("engine.delay_threshold_secs must not be negative".into());
        }
        if self.home_airport.len() != 3 || !self.home_airport.chars().all(|c| c.is_ascii_uppercase()) {
            errors.push(format!("home_airport {:?} is not an IATA code", self.home_airport));
        }
        if self.is_lockstep() && !self.broker.enabled {
            errors.push("lockstep runs need the broker in-process".into());
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(RuntimeConfigError::Invalid(errors))
        }
    }
}
