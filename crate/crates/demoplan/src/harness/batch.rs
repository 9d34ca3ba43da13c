//! Single trials and seeded batches.

use std::sync::Arc;

use super::scenario::{KeyframeLabel, Scenario};
use super::HarnessError;
use crate::adapters::fixture::FaultScript;
use crate::adapters::{make_fixture_suite, make_fixture_suite_with_faults};
use crate::dynamics::GenParams;
use crate::executor::{
    run_task, Ablation, FailureReason, PipelineComponents, TrialResult, TrialRun,
};
use crate::keyframe::extract_keyframes;
use crate::model::{PlanMode, SceneState, TaskPlan};
use crate::planner::{
    abstract_demonstration, unify_plan, validate_plan, KeyframeDescriptor, PlanningRequest,
    SceneSummary,
};
use crate::seeded::{fnv1a, trial_seed, SplitMix64};

/// Stability jitter applied to grasp candidates whenever trial noise is on.
const GRASP_STABILITY_JITTER: f64 = 0.05;

/// Per-trial switches layered over the scenario defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOptions {
    pub ablation: Ablation,
    /// Overrides the scenario's rollout noise amplitude when set.
    pub noise: Option<f64>,
    /// Overrides the scenario's planning mode when set.
    pub mode: Option<PlanMode>,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self { ablation: Ablation::None, noise: None, mode: None }
    }
}

/// Attaches labels to extracted keyframes: each keyframe takes the nearest
/// unused label within `window` frames, or an empty label when the pause was
/// not annotated.
pub fn label_keyframes(
    keyframes: &[u32],
    labels: &[KeyframeLabel],
    window: u32,
) -> Vec<KeyframeDescriptor> {
    let mut used = vec![false; labels.len()];
    keyframes
        .iter()
        .map(|&frame| {
            let nearest = labels
                .iter()
                .enumerate()
                .filter(|(i, l)| !used[*i] && l.frame.abs_diff(frame) <= window)
                .min_by_key(|(i, l)| (l.frame.abs_diff(frame), *i));
            match nearest {
                Some((i, label)) => {
                    used[i] = true;
                    KeyframeDescriptor { frame, label: label.label.clone() }
                }
                None => KeyframeDescriptor { frame, label: String::new() },
            }
        })
        .collect()
}

/// Builds the task plan for one trial: keyframe extraction (or the raw
/// frame feed under the parsing ablation), demonstration abstraction, then
/// unified planning against the current scene.
pub fn build_plan(
    scenario: &Scenario,
    scene: &SceneState,
    suite: &crate::adapters::AdapterSuite,
    options: &TrialOptions,
) -> Result<(TaskPlan, PlanningRequest), HarnessError> {
    let mode = options.mode.unwrap_or(scenario.mode);
    let summary = SceneSummary::from_scene(scene);

    let baseline = if mode == PlanMode::TextOnly {
        None
    } else {
        let demo = scenario
            .demonstration
            .as_ref()
            .zip(scenario.stream.as_ref())
            .ok_or_else(|| HarnessError::Validation(format!("mode {mode} needs a demonstration")))?;
        let (demo, stream) = demo;
        let window = (scenario.params.keyframe.min_interval + 1) / 2;
        let descriptors = if options.ablation == Ablation::Parsing {
            let all: Vec<u32> = stream.frames.iter().map(|f| f.frame).collect();
            label_keyframes(&all, &demo.keyframe_labels, window)
        } else {
            let keyframes = extract_keyframes(stream, &scenario.params.keyframe)?;
            if keyframes.is_empty() {
                return Err(HarnessError::InsufficientData(
                    "no keyframes found in the demonstration".into(),
                ));
            }
            label_keyframes(&keyframes, &demo.keyframe_labels, window)
        };
        Some(abstract_demonstration(&descriptors, suite.planner.as_ref())?)
    };

    let language = match mode {
        PlanMode::Mimic => None,
        _ => scenario.language.clone(),
    };
    let request = PlanningRequest { baseline, scene: summary, language, mode };
    let plan = unify_plan(&request, suite.planner.as_ref())?;
    Ok((plan, request))
}

fn jittered_scene(scenario: &Scenario, seed: u64) -> SceneState {
    let mut scene = scenario.scene.clone();
    if let Some(jitter) = scenario.placement_jitter.filter(|j| *j > 0.0) {
        for object in &mut scene.objects {
            let key = seed ^ fnv1a(b"placement") ^ fnv1a(object.id.as_bytes());
            let mut rng = SplitMix64::new(key);
            object.position.x += rng.range_f64(-jitter, jitter);
            object.position.y += rng.range_f64(-jitter, jitter);
        }
    }
    scene
}

/// Runs one seeded trial. Setup failures (ungroundable plans, adapter
/// outages during planning) fold into an all-failed trial rather than an
/// error, so batches never abort.
pub fn run_trial(
    scenario: &Scenario,
    seed: u64,
    options: &TrialOptions,
    faults: Option<Arc<FaultScript>>,
) -> TrialRun {
    let suite = match faults {
        Some(script) => make_fixture_suite_with_faults(seed, script),
        None => make_fixture_suite(seed),
    };
    let scene = jittered_scene(scenario, seed);
    let m = scenario.expected_subtasks;

    let (plan, request) = match build_plan(scenario, &scene, &suite, options) {
        Ok(built) => built,
        Err(e) => {
            return TrialRun {
                result: TrialResult::aborted(seed, m, FailureReason::Plan, &e.to_string()),
                logs: Vec::new(),
            }
        }
    };

    let diagnostics = validate_plan(&plan, &scene);
    if !diagnostics.is_empty() {
        let detail: Vec<String> = diagnostics.iter().map(|d| d.detail.clone()).collect();
        return TrialRun {
            result: TrialResult::aborted(seed, m, FailureReason::Plan, &detail.join("; ")),
            logs: Vec::new(),
        };
    }
    if plan.subtasks.len() != m {
        return TrialRun {
            result: TrialResult::aborted(
                seed,
                m,
                FailureReason::Plan,
                &format!("plan produced {} subtasks, scenario expects {m}", plan.subtasks.len()),
            ),
            logs: Vec::new(),
        };
    }

    let noise = options.noise.unwrap_or(scenario.params.gen.noise);
    let gen = GenParams { noise, ..scenario.params.gen };
    let components = PipelineComponents {
        suite: &suite,
        intrinsics: scenario.camera.intrinsics,
        extrinsics: scenario.camera.extrinsics,
        gen,
        rdp: scenario.params.rdp,
        opt: scenario.params.opt,
        exec: scenario.params.exec,
        grasp_candidates: &scenario.grasp_candidates,
        planning_request: Some(&request),
        ablation: options.ablation,
        grasp_noise: if noise > 0.0 { GRASP_STABILITY_JITTER } else { 0.0 },
        seed,
    };
    run_task(&scene, &plan, &components)
}

/// Runs `trials` independent trials, trial `i` seeded by `(seed, i)`.
/// Per-trial failures are recorded in the results, never propagated.
pub fn run_batch(
    scenario: &Scenario,
    trials: usize,
    seed: u64,
    options: &TrialOptions,
) -> Result<Vec<TrialRun>, HarnessError> {
    if trials < 1 {
        return Err(HarnessError::Validation("need at least one trial".into()));
    }
    Ok((0..trials)
        .map(|i| run_trial(scenario, trial_seed(seed, i as u64), options, None))
        .collect())
}
