//! Scenario files: a world, a camera, a demonstration, and run parameters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::dynamics::{GenParams, RdpParams};
use crate::executor::{ExecConfig, GraspCandidate};
use crate::keyframe::{KeyframeParams, LandmarkStream};
use crate::model::{validate_scene, CameraExtrinsics, CameraIntrinsics, PlanMode, SceneState};
use crate::optimizer::OptParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraRig {
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
}

/// A frame in the demonstration known to carry an interaction, with its
/// action label. Labels feed the planner fixture; a real deployment would
/// caption keyframes with a vision model instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeLabel {
    pub frame: u32,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    /// Landmark stream file (CSV or JSON), relative to the scenario file.
    pub landmarks: String,
    pub keyframe_labels: Vec<KeyframeLabel>,
}

/// Per-scenario parameter overrides; every field defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ScenarioParams {
    pub keyframe: KeyframeParams,
    pub rdp: RdpParams,
    pub gen: GenParams,
    pub opt: OptParams,
    pub exec: ExecConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScenarioFile {
    name: String,
    mode: PlanMode,
    expected_subtasks: usize,
    #[serde(default)]
    language: Option<String>,
    scene: SceneState,
    camera: CameraRig,
    #[serde(default)]
    demonstration: Option<Demonstration>,
    #[serde(default)]
    grasp_candidates: BTreeMap<String, Vec<GraspCandidate>>,
    #[serde(default)]
    placement_jitter: Option<f64>,
    #[serde(default)]
    params: ScenarioParams,
}

/// A loaded, validated scenario with its demonstration stream resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub mode: PlanMode,
    pub expected_subtasks: usize,
    pub language: Option<String>,
    pub scene: SceneState,
    pub camera: CameraRig,
    pub demonstration: Option<Demonstration>,
    pub stream: Option<LandmarkStream>,
    pub grasp_candidates: BTreeMap<String, Vec<GraspCandidate>>,
    pub placement_jitter: Option<f64>,
    pub params: ScenarioParams,
    pub path: PathBuf,
}

/// Loads and validates a scenario. All cross-references (demonstration file,
/// label frames, grasp candidate ids) are resolved here so trials can assume
/// a well-formed world.
pub fn load_scenario(path: &Path) -> Result<Scenario, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
    let file: ScenarioFile = serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.display().to_string(),
        detail: format!("line {}, column {}: {e}", e.line(), e.column()),
    })?;

    if file.expected_subtasks < 1 {
        return Err(HarnessError::Validation("expected_subtasks must be at least 1".into()));
    }
    if file.name.is_empty() {
        return Err(HarnessError::Validation("scenario name must be non-empty".into()));
    }
    let diags = validate_scene(&file.scene);
    if !diags.is_empty() {
        let summary: Vec<String> =
            diags.iter().map(|d| format!("{} ({}): {}", d.invariant, d.id, d.detail)).collect();
        return Err(HarnessError::Validation(format!("scene invalid: {}", summary.join("; "))));
    }
    file.camera.intrinsics.validate().map_err(HarnessError::Validation)?;
    file.camera.extrinsics.validate().map_err(HarnessError::Validation)?;

    match file.mode {
        PlanMode::TextOnly => {
            if file.language.is_none() {
                return Err(HarnessError::Validation("text_only scenarios need a language command".into()));
            }
        }
        PlanMode::Constrained => {
            if file.demonstration.is_none() || file.language.is_none() {
                return Err(HarnessError::Validation(
                    "constrained scenarios need a demonstration and a language command".into(),
                ));
            }
        }
        PlanMode::Mimic | PlanMode::SkillTransfer => {
            if file.demonstration.is_none() {
                return Err(HarnessError::Validation(format!(
                    "{} scenarios need a demonstration",
                    file.mode
                )));
            }
        }
    }

    for (object, candidates) in &file.grasp_candidates {
        if file.scene.object(object).is_none() {
            return Err(HarnessError::Validation(format!(
                "grasp candidates reference unknown object `{object}`"
            )));
        }
        for c in candidates {
            if !(0.0..=1.0).contains(&c.stability) {
                return Err(HarnessError::Validation(format!(
                    "grasp candidate {} for `{object}` has stability {} outside [0, 1]",
                    c.id, c.stability
                )));
            }
        }
    }

    let stream = match &file.demonstration {
        Some(demo) => {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            let landmarks_path = base.join(&demo.landmarks);
            if !landmarks_path.exists() {
                return Err(HarnessError::MissingFile { path: landmarks_path.display().to_string() });
            }
            let stream = LandmarkStream::from_path(&landmarks_path)?;
            let (lo, hi) = match (stream.frames.first(), stream.frames.last()) {
                (Some(first), Some(last)) => (first.frame, last.frame),
                _ => return Err(HarnessError::Validation("demonstration stream is empty".into())),
            };
            for label in &demo.keyframe_labels {
                if label.frame < lo || label.frame > hi {
                    return Err(HarnessError::Validation(format!(
                        "keyframe label at frame {} outside the stream range {lo}..={hi}",
                        label.frame
                    )));
                }
            }
            Some(stream)
        }
        None => None,
    };

    Ok(Scenario {
        name: file.name,
        mode: file.mode,
        expected_subtasks: file.expected_subtasks,
        language: file.language,
        scene: file.scene,
        camera: file.camera,
        demonstration: file.demonstration,
        stream,
        grasp_candidates: file.grasp_candidates,
        placement_jitter: file.placement_jitter,
        params: file.params,
        path: path.to_path_buf(),
    })
}
