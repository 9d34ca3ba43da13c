//! Demonstration abstraction and unified subtask planning.
//!
//! Keyframe descriptors go through a planner adapter twice: once to abstract
//! the demonstrated actions into a baseline plan, and once to ground that
//! plan (optionally reshaped by a language command) against the current
//! scene. This module owns the request/plan invariants; prompt handling and
//! grounding heuristics live behind the adapter boundary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::schema::{PlannerRequest, PlannerResponse};
use crate::adapters::{Adapter, AdapterError, AdapterRole};
use crate::model::{PlanMode, Precondition, SceneState, SubtaskSpec, TaskPlan};

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("planner returned a malformed plan: {detail}; raw payload: {raw}")]
    MalformedPlan { detail: String, raw: String },
    #[error("could not ground identifiers {unresolved:?} in the current scene")]
    Grounding { unresolved: Vec<String> },
    #[error("plan preconditions are cyclic or reference later subtasks: {0}")]
    PlanCycle(String),
    #[error("language command not supported by the planner: {0}")]
    UnsupportedConstraint(String),
    #[error("invalid planning request: {0}")]
    InvalidRequest(String),
}

/// One extracted keyframe with the action label attached to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyframeDescriptor {
    pub frame: u32,
    pub label: String,
}

/// One abstracted demonstration step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineStep {
    pub action: String,
    pub object: String,
    pub destination: String,
    /// Source keyframes this step was abstracted from.
    pub keyframes: Vec<u32>,
}

/// The structured, descriptive baseline plan abstracted from a
/// demonstration, before grounding in the robot's scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePlan {
    pub steps: Vec<BaselineStep>,
}

impl BaselinePlan {
    pub fn validate(&self) -> Result<(), String> {
        if self.steps.is_empty() {
            return Err("baseline plan must have at least one step".into());
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.keyframes.is_empty() {
                return Err(format!("baseline step {i} maps to no keyframes"));
            }
        }
        Ok(())
    }
}

/// What the planner knows about one scene object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub id: String,
    pub category: String,
    /// Region currently containing the object, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

/// The scene as presented to the planner: object summaries plus the
/// destination regions available for grounding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSummary {
    pub objects: Vec<ObjectSummary>,
    pub regions: Vec<String>,
}

impl SceneSummary {
    pub fn from_scene(scene: &SceneState) -> Self {
        let objects = scene
            .objects
            .iter()
            .map(|o| ObjectSummary {
                id: o.id.clone(),
                category: category(&o.id).to_string(),
                region: scene
                    .regions
                    .iter()
                    .find(|r| r.contains(&o.position, 0.0))
                    .map(|r| r.id.clone()),
            })
            .collect();
        let regions = scene.regions.iter().map(|r| r.id.clone()).collect();
        Self { objects, regions }
    }
}

/// Instance identifiers follow `<category>_<n>`; the category is everything
/// before the numeric suffix.
pub fn category(id: &str) -> &str {
    match id.rsplit_once('_') {
        Some((prefix, suffix)) if !suffix.is_empty() && suffix.chars().all(|c| c.is_ascii_digit()) => prefix,
        _ => id,
    }
}

/// Input to the unified planning stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselinePlan>,
    pub scene: SceneSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    pub mode: PlanMode,
}

impl PlanningRequest {
    pub fn validate(&self) -> Result<(), PlanError> {
        match self.mode {
            PlanMode::Mimic => {
                if self.language.is_some() {
                    return Err(PlanError::InvalidRequest("mimic mode takes no language command".into()));
                }
                if self.baseline.is_none() {
                    return Err(PlanError::InvalidRequest("mimic mode requires a baseline plan".into()));
                }
            }
            PlanMode::Constrained => {
                if self.baseline.is_none() || self.language.is_none() {
                    return Err(PlanError::InvalidRequest(
                        "constrained mode requires both a baseline plan and a language command".into(),
                    ));
                }
            }
            PlanMode::SkillTransfer => {
                if self.baseline.is_none() {
                    return Err(PlanError::InvalidRequest("skill transfer requires a baseline plan".into()));
                }
            }
            PlanMode::TextOnly => {
                if self.baseline.is_some() {
                    return Err(PlanError::InvalidRequest("text-only mode takes no baseline plan".into()));
                }
                if self.language.is_none() {
                    return Err(PlanError::InvalidRequest("text-only mode requires a language command".into()));
                }
            }
        }
        if let Some(baseline) = &self.baseline {
            baseline.validate().map_err(PlanError::InvalidRequest)?;
        }
        Ok(())
    }
}

fn planner_round_trip(
    request: &PlannerRequest,
    adapter: &dyn Adapter,
) -> Result<PlannerResponse, PlanError> {
    debug_assert_eq!(adapter.role(), AdapterRole::Planner);
    let payload = serde_json::to_value(request)
        .map_err(|e| PlanError::InvalidRequest(format!("unserializable request: {e}")))?;
    let response = adapter.call(&payload)?;
    let raw = response.payload.to_string();
    serde_json::from_value(response.payload)
        .map_err(|e| PlanError::MalformedPlan { detail: e.to_string(), raw })
}

fn reject_structured_error(response: PlannerResponse) -> Result<PlannerResponse, PlanError> {
    if let PlannerResponse::Error { code, message, unresolved } = response {
        return Err(match code.as_str() {
            "grounding" => PlanError::Grounding { unresolved },
            "unsupported_constraint" => PlanError::UnsupportedConstraint(message),
            _ => PlanError::MalformedPlan { detail: format!("{code}: {message}"), raw: String::new() },
        });
    }
    Ok(response)
}

/// Abstracts labeled keyframes into a baseline plan via the planner adapter.
/// The adapter output is schema-validated and checked against the baseline
/// invariants before acceptance.
pub fn abstract_demonstration(
    keyframes: &[KeyframeDescriptor],
    adapter: &dyn Adapter,
) -> Result<BaselinePlan, PlanError> {
    if keyframes.is_empty() {
        return Err(PlanError::InvalidRequest("need at least one keyframe descriptor".into()));
    }
    let request = PlannerRequest::Abstract { keyframes: keyframes.to_vec() };
    let response = reject_structured_error(planner_round_trip(&request, adapter)?)?;
    let PlannerResponse::Baseline { baseline } = response else {
        return Err(PlanError::MalformedPlan {
            detail: "expected a baseline response".into(),
            raw: format!("{response:?}"),
        });
    };
    baseline
        .validate()
        .map_err(|detail| PlanError::MalformedPlan { detail, raw: String::new() })?;
    Ok(baseline)
}

/// Grounds a planning request into an executable task plan.
///
/// Post-conditions enforced here, regardless of adapter behavior: every
/// `obj` resolves to a scene object and every `loc` to a region, provenance
/// matches the request mode, mimic plans preserve baseline step order and
/// length, and precondition references are satisfiable in subtask order.
pub fn unify_plan(request: &PlanningRequest, adapter: &dyn Adapter) -> Result<TaskPlan, PlanError> {
    request.validate()?;
    let wire = PlannerRequest::Unify { request: request.clone() };
    let response = reject_structured_error(planner_round_trip(&wire, adapter)?)?;
    let PlannerResponse::Plan { plan } = response else {
        return Err(PlanError::MalformedPlan {
            detail: "expected a plan response".into(),
            raw: format!("{response:?}"),
        });
    };

    if plan.subtasks.is_empty() {
        return Err(PlanError::MalformedPlan { detail: "plan has no subtasks".into(), raw: String::new() });
    }
    if plan.provenance != request.mode {
        return Err(PlanError::MalformedPlan {
            detail: format!("provenance {} does not match request mode {}", plan.provenance, request.mode),
            raw: String::new(),
        });
    }
    for subtask in &plan.subtasks {
        subtask
            .validate()
            .map_err(|detail| PlanError::MalformedPlan { detail, raw: String::new() })?;
    }

    let mut unresolved = Vec::new();
    for subtask in &plan.subtasks {
        if !request.scene.objects.iter().any(|o| o.id == subtask.obj) {
            unresolved.push(subtask.obj.clone());
        }
        if !request.scene.regions.iter().any(|r| *r == subtask.loc) {
            unresolved.push(subtask.loc.clone());
        }
    }
    unresolved.dedup();
    if !unresolved.is_empty() {
        return Err(PlanError::Grounding { unresolved });
    }

    if request.mode == PlanMode::Mimic {
        let baseline = request.baseline.as_ref().expect("validated above");
        if plan.subtasks.len() != baseline.steps.len() {
            return Err(PlanError::MalformedPlan {
                detail: format!(
                    "mimic plan must preserve baseline length: {} steps became {} subtasks",
                    baseline.steps.len(),
                    plan.subtasks.len()
                ),
                raw: String::new(),
            });
        }
    }

    if let Some(problem) = precondition_order_problem(&plan.subtasks, None) {
        return Err(PlanError::PlanCycle(problem));
    }
    Ok(plan)
}

/// Checks that every precondition is satisfiable by the initial scene (when
/// given) or by a strictly earlier subtask outcome.
fn precondition_order_problem(subtasks: &[SubtaskSpec], scene: Option<&SceneState>) -> Option<String> {
    for (i, subtask) in subtasks.iter().enumerate() {
        for precond in &subtask.precond {
            match precond {
                Precondition::On { obj, region } => {
                    let initially_true = scene
                        .map(|s| {
                            s.object(obj)
                                .zip(s.region(region))
                                .map(|(o, r)| r.contains(&o.position, 0.0))
                                .unwrap_or(false)
                        })
                        .unwrap_or(false);
                    if initially_true {
                        continue;
                    }
                    let produced_earlier =
                        subtasks[..i].iter().any(|s| s.obj == *obj && s.loc == *region);
                    if !produced_earlier {
                        let produced_later =
                            subtasks[i + 1..].iter().any(|s| s.obj == *obj && s.loc == *region);
                        return Some(if produced_later {
                            format!(
                                "subtask {i} requires on({obj}, {region}), which only a later subtask produces"
                            )
                        } else {
                            format!("subtask {i} requires on({obj}, {region}), which nothing produces")
                        });
                    }
                }
                Precondition::Holding { obj } => {
                    let initially_held = scene
                        .map(|s| s.held_object.as_deref() == Some(obj.as_str()))
                        .unwrap_or(false);
                    if !initially_held {
                        return Some(format!(
                            "subtask {i} requires holding({obj}), which is never established"
                        ));
                    }
                }
            }
        }
    }
    None
}

/// One plan-validation finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostic {
    pub check: String,
    pub subtask: usize,
    pub detail: String,
}

/// Validates a plan against a concrete scene: all referenced identifiers
/// exist and precondition references resolve in order. Diagnostics, not
/// failures.
pub fn validate_plan(plan: &TaskPlan, scene: &SceneState) -> Vec<PlanDiagnostic> {
    let mut out = Vec::new();
    for (i, subtask) in plan.subtasks.iter().enumerate() {
        if let Err(detail) = subtask.validate() {
            out.push(PlanDiagnostic { check: "subtask-fields".into(), subtask: i, detail });
        }
        if scene.object(&subtask.obj).is_none() {
            out.push(PlanDiagnostic {
                check: "object-exists".into(),
                subtask: i,
                detail: format!("object `{}` is not in the scene", subtask.obj),
            });
        }
        if scene.region(&subtask.loc).is_none() {
            out.push(PlanDiagnostic {
                check: "region-exists".into(),
                subtask: i,
                detail: format!("destination `{}` is not a scene region", subtask.loc),
            });
        }
        for precond in &subtask.precond {
            let (obj, region) = match precond {
                Precondition::On { obj, region } => (obj, Some(region)),
                Precondition::Holding { obj } => (obj, None),
            };
            if scene.object(obj).is_none() {
                out.push(PlanDiagnostic {
                    check: "precondition-object".into(),
                    subtask: i,
                    detail: format!("precondition references unknown object `{obj}`"),
                });
            }
            if let Some(region) = region {
                if scene.region(region).is_none() {
                    out.push(PlanDiagnostic {
                        check: "precondition-region".into(),
                        subtask: i,
                        detail: format!("precondition references unknown region `{region}`"),
                    });
                }
            }
        }
    }
    if plan.subtasks.is_empty() {
        out.push(PlanDiagnostic { check: "non-empty".into(), subtask: 0, detail: "plan has no subtasks".into() });
    }
    if let Some(problem) = precondition_order_problem(&plan.subtasks, Some(scene)) {
        out.push(PlanDiagnostic { check: "precondition-order".into(), subtask: 0, detail: problem });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Point3D, Region, SceneObject};

    fn scene() -> SceneState {
        SceneState {
            objects: vec![
                SceneObject {
                    id: "apple_1".into(),
                    position: Point3D::new(0.2, 0.0, 0.02),
                    yaw: None,
                    radius: 0.02,
                    disturbed: false,
                },
                SceneObject {
                    id: "apple_2".into(),
                    position: Point3D::new(0.25, 0.1, 0.02),
                    yaw: None,
                    radius: 0.02,
                    disturbed: false,
                },
            ],
            regions: vec![
                Region {
                    id: "plate_1".into(),
                    min: Point3D::new(0.5, -0.1, 0.0),
                    max: Point3D::new(0.7, 0.1, 0.1),
                },
                Region {
                    id: "bin_1".into(),
                    min: Point3D::new(0.5, 0.15, 0.0),
                    max: Point3D::new(0.7, 0.3, 0.1),
                },
            ],
            obstacles: vec![],
            held_object: None,
        }
    }

    fn subtask(obj: &str, loc: &str, precond: Vec<Precondition>) -> SubtaskSpec {
        SubtaskSpec {
            desc: format!("move {obj} to {loc}"),
            obj: obj.into(),
            loc: loc.into(),
            guide: format!("move {obj} to {loc}"),
            precond,
        }
    }

    #[test]
    fn category_strips_numeric_suffix_only() {
        assert_eq!(category("apple_1"), "apple");
        assert_eq!(category("snack_box_12"), "snack_box");
        assert_eq!(category("plate"), "plate");
        assert_eq!(category("zone_a"), "zone_a");
    }

    #[test]
    fn scene_summary_reports_categories_and_containing_regions() {
        let mut s = scene();
        s.objects[0].position = Point3D::new(0.6, 0.0, 0.02);
        let summary = SceneSummary::from_scene(&s);
        assert_eq!(summary.objects[0].category, "apple");
        assert_eq!(summary.objects[0].region.as_deref(), Some("plate_1"));
        assert_eq!(summary.objects[1].region, None);
        assert_eq!(summary.regions, vec!["plate_1".to_string(), "bin_1".to_string()]);
    }

    #[test]
    fn request_invariants_by_mode() {
        let summary = SceneSummary::from_scene(&scene());
        let baseline = BaselinePlan {
            steps: vec![BaselineStep {
                action: "move".into(),
                object: "apple".into(),
                destination: "plate".into(),
                keyframes: vec![10, 40],
            }],
        };
        let ok = PlanningRequest {
            baseline: Some(baseline.clone()),
            scene: summary.clone(),
            language: None,
            mode: PlanMode::Mimic,
        };
        assert!(ok.validate().is_ok());

        let mimic_with_language = PlanningRequest {
            language: Some("move faster".into()),
            ..ok.clone()
        };
        assert!(matches!(mimic_with_language.validate(), Err(PlanError::InvalidRequest(_))));

        let text_only_with_baseline = PlanningRequest {
            baseline: Some(baseline),
            scene: summary.clone(),
            language: Some("tidy up".into()),
            mode: PlanMode::TextOnly,
        };
        assert!(matches!(text_only_with_baseline.validate(), Err(PlanError::InvalidRequest(_))));

        let text_only = PlanningRequest {
            baseline: None,
            scene: summary,
            language: Some("put the apples onto the plate".into()),
            mode: PlanMode::TextOnly,
        };
        assert!(text_only.validate().is_ok());
    }

    #[test]
    fn grounded_plan_has_no_diagnostics() {
        let plan = TaskPlan {
            subtasks: vec![
                subtask("apple_1", "plate_1", vec![]),
                subtask("apple_2", "bin_1", vec![]),
                subtask(
                    "apple_1",
                    "bin_1",
                    vec![Precondition::On { obj: "apple_1".into(), region: "plate_1".into() }],
                ),
            ],
            provenance: PlanMode::Mimic,
        };
        assert!(validate_plan(&plan, &scene()).is_empty());
    }

    #[test]
    fn absent_object_is_named_in_diagnostic() {
        let plan = TaskPlan {
            subtasks: vec![subtask("ghost_1", "plate_1", vec![])],
            provenance: PlanMode::Mimic,
        };
        let diags = validate_plan(&plan, &scene());
        assert_eq!(diags.len(), 1);
        assert!(diags[0].detail.contains("ghost_1"));
    }

    #[test]
    fn forward_precondition_reference_is_an_ordering_diagnostic() {
        // Subtask 1 (0-based) depends on what subtask 2 produces.
        let plan = TaskPlan {
            subtasks: vec![
                subtask("apple_1", "plate_1", vec![]),
                subtask(
                    "apple_2",
                    "plate_1",
                    vec![Precondition::On { obj: "apple_2".into(), region: "bin_1".into() }],
                ),
                subtask("apple_2", "bin_1", vec![]),
            ],
            provenance: PlanMode::Mimic,
        };
        let diags = validate_plan(&plan, &scene());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].check, "precondition-order");
        assert!(diags[0].detail.contains("later subtask"));
    }

    #[test]
    fn initially_satisfied_precondition_is_accepted() {
        let mut s = scene();
        s.objects[0].position = Point3D::new(0.6, 0.0, 0.02); // inside plate_1
        let plan = TaskPlan {
            subtasks: vec![subtask(
                "apple_1",
                "bin_1",
                vec![Precondition::On { obj: "apple_1".into(), region: "plate_1".into() }],
            )],
            provenance: PlanMode::Mimic,
        };
        assert!(validate_plan(&plan, &s).is_empty());
    }

    #[test]
    fn holding_precondition_requires_initial_grip() {
        let plan = TaskPlan {
            subtasks: vec![subtask(
                "apple_1",
                "plate_1",
                vec![Precondition::Holding { obj: "apple_1".into() }],
            )],
            provenance: PlanMode::Mimic,
        };
        assert_eq!(validate_plan(&plan, &scene()).len(), 1);
        let mut held = scene();
        held.held_object = Some("apple_1".into());
        assert!(validate_plan(&plan, &held).is_empty());
    }
}
