//! Adapter contracts for the five external model roles.
//!
//! The pipeline never talks to a foundation model directly. Each role —
//! planner, generator, tracker, depth, judge — is an [`Adapter`] with a JSON
//! request/response schema ([`schema`]), a deterministic seedable fixture
//! implementation ([`fixture`]), and an HTTP client for remote sidecars
//! ([`remote`]). Payloads are schema-validated in both directions.

pub mod fixture;
pub mod remote;
pub mod schema;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use fixture::{FaultScript, FixtureAdapter};
use remote::RemoteAdapter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterRole {
    /// Abstracts demonstrations and produces grounded task plans.
    Planner,
    /// Imagines a subtask rollout conditioned on the observation and guide.
    Generator,
    /// Recovers an object's pixel track from rollout frames.
    Tracker,
    /// Answers depth queries against rollout frames.
    Depth,
    /// Commonsense judgment calls: grasp selection and outcome verdicts.
    Judge,
}

impl AdapterRole {
    pub fn name(&self) -> &'static str {
        match self {
            AdapterRole::Planner => "planner",
            AdapterRole::Generator => "generator",
            AdapterRole::Tracker => "tracker",
            AdapterRole::Depth => "depth",
            AdapterRole::Judge => "judge",
        }
    }

    pub fn all() -> [AdapterRole; 5] {
        [
            AdapterRole::Planner,
            AdapterRole::Generator,
            AdapterRole::Tracker,
            AdapterRole::Depth,
            AdapterRole::Judge,
        ]
    }
}

impl std::fmt::Display for AdapterRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

pub const MAX_RETRIES: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    Fixture,
    Remote,
}

/// How to reach one adapter role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterConfig {
    pub kind: AdapterKind,
    /// Required in remote mode. Overridable per role via the
    /// `DEMOPLAN_<ROLE>_ENDPOINT` environment variable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub timeout_secs: f64,
    pub retries: u32,
    /// Fixture determinism key; unused in remote mode.
    pub seed: u64,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self { kind: AdapterKind::Fixture, endpoint: None, timeout_secs: 10.0, retries: 2, seed: 0 }
    }
}

impl AdapterConfig {
    pub fn fixture(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        if self.kind == AdapterKind::Remote && self.endpoint.is_none() {
            return Err(AdapterError::Config("remote adapters require an endpoint".into()));
        }
        if self.retries > MAX_RETRIES {
            return Err(AdapterError::Config(format!(
                "retries capped at {MAX_RETRIES}, got {}",
                self.retries
            )));
        }
        if !(self.timeout_secs > 0.0) {
            return Err(AdapterError::Config("timeout must be positive".into()));
        }
        Ok(())
    }
}

/// A schema-valid payload, with call accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterResponse {
    pub payload: Value,
    /// Wall-clock seconds for remote calls; fixtures report 0 so that
    /// serialized artifacts stay deterministic.
    pub latency: f64,
    pub attempt_count: u32,
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("adapter `{role}` unavailable: {reason}")]
    Unavailable { role: String, reason: String },
    #[error("adapter `{role}` schema violation ({detail}); raw payload: {raw}")]
    SchemaViolation { role: String, detail: String, raw: String },
    #[error("remote adapter `{role}` failed with HTTP status {status}")]
    Remote { role: String, status: u16 },
    #[error("adapter configuration error: {0}")]
    Config(String),
    #[error("bad request for adapter `{role}`: {detail}")]
    BadRequest { role: String, detail: String },
}

/// One callable model role. Implementations must validate payloads against
/// the role schema in both directions.
pub trait Adapter: Send + Sync {
    fn role(&self) -> AdapterRole;
    fn call(&self, payload: &Value) -> Result<AdapterResponse, AdapterError>;
}

/// Dispatches one request according to `config`. Fixture mode is a pure
/// function of the payload and seed; remote mode performs HTTP with bounded
/// retries. The response is schema-validated before release.
pub fn call_adapter(
    role: AdapterRole,
    payload: &Value,
    config: &AdapterConfig,
) -> Result<AdapterResponse, AdapterError> {
    config.validate()?;
    match config.kind {
        AdapterKind::Fixture => FixtureAdapter::new(role, config.seed).call(payload),
        AdapterKind::Remote => RemoteAdapter::from_config(role, config)?.call(payload),
    }
}

/// The full set of five adapters the pipeline runs against.
#[derive(Clone)]
pub struct AdapterSuite {
    pub planner: Arc<dyn Adapter>,
    pub generator: Arc<dyn Adapter>,
    pub tracker: Arc<dyn Adapter>,
    pub depth: Arc<dyn Adapter>,
    pub judge: Arc<dyn Adapter>,
}

impl AdapterSuite {
    pub fn get(&self, role: AdapterRole) -> &dyn Adapter {
        match role {
            AdapterRole::Planner => self.planner.as_ref(),
            AdapterRole::Generator => self.generator.as_ref(),
            AdapterRole::Tracker => self.tracker.as_ref(),
            AdapterRole::Depth => self.depth.as_ref(),
            AdapterRole::Judge => self.judge.as_ref(),
        }
    }
}

/// Builds the five mutually consistent fixture adapters for one seed: the
/// generator tracks exactly the entities it is shown, and depth fixtures
/// cover every generated track pixel.
pub fn make_fixture_suite(seed: u64) -> AdapterSuite {
    make_fixture_suite_with_faults(seed, Arc::new(FaultScript::default()))
}

/// Fixture suite sharing a scripted fault plan, for exercising the error
/// taxonomy and replan recovery.
pub fn make_fixture_suite_with_faults(seed: u64, faults: Arc<FaultScript>) -> AdapterSuite {
    let build = |role| Arc::new(FixtureAdapter::with_faults(role, seed, Arc::clone(&faults)));
    AdapterSuite {
        planner: build(AdapterRole::Planner),
        generator: build(AdapterRole::Generator),
        tracker: build(AdapterRole::Tracker),
        depth: build(AdapterRole::Depth),
        judge: build(AdapterRole::Judge),
    }
}
