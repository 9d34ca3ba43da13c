//! Deterministic fixture implementations of the five adapter roles.
//!
//! Each fixture is a pure function of (request, seed): planning is
//! rule-based over categories and identifiers, rollout synthesis is a
//! closed-form transfer arc projected through the request's camera, and
//! judgment applies the geometric predicates. A shared [`FaultScript`] can
//! inject timeouts, schema violations, and generator dropouts to exercise
//! the pipeline's error taxonomy.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use serde_json::Value;

use super::schema::{
    self, DepthEntry, DepthWire, GeneratorRequest, GeneratorResponse, JudgeRequest, JudgeResponse,
    PlannerRequest, PlannerResponse, RolloutFrameWire, TrackerRequest, TrackerResponse,
};
use super::{Adapter, AdapterError, AdapterResponse, AdapterRole};
use crate::dynamics::{project, EntityState, RolloutFrame};
use crate::model::{PlanMode, Point2D, Point3D, Precondition, Region, SubtaskSpec, TaskPlan};
use crate::planner::{
    category, BaselinePlan, BaselineStep, KeyframeDescriptor, PlanningRequest, SceneSummary,
};
use crate::seeded::{fnv1a, SplitMix64};

/// Free-spot search resolution inside destination regions, meters.
const PLACEMENT_GRID: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultKind {
    /// The adapter is unreachable for this call.
    Timeout,
    /// The adapter answers with a body violating its schema.
    SchemaViolation,
    /// Generator only: the rollout loses the target object's track.
    Dropout,
}

#[derive(Debug, Clone)]
pub struct Fault {
    pub role: AdapterRole,
    pub kind: FaultKind,
    /// Only trips on payloads containing this substring, when set.
    pub match_substring: Option<String>,
    /// How many matching calls to sabotage before the fault expires.
    pub remaining: u32,
}

/// Scripted fault plan shared by a fixture suite. Faults fire in insertion
/// order and expire after `remaining` hits, which makes transient outages
/// and recovery-by-replan reproducible.
#[derive(Debug, Default)]
pub struct FaultScript {
    faults: Mutex<Vec<Fault>>,
}

impl FaultScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn inject(&self, fault: Fault) {
        self.faults.lock().expect("fault script lock").push(fault);
    }

    fn take(&self, role: AdapterRole, payload: &str) -> Option<FaultKind> {
        let mut faults = self.faults.lock().expect("fault script lock");
        for fault in faults.iter_mut() {
            if fault.role != role || fault.remaining == 0 {
                continue;
            }
            if let Some(needle) = &fault.match_substring {
                if !payload.contains(needle.as_str()) {
                    continue;
                }
            }
            fault.remaining -= 1;
            return Some(fault.kind);
        }
        None
    }
}

/// One fixture-backed adapter role.
pub struct FixtureAdapter {
    role: AdapterRole,
    seed: u64,
    faults: Arc<FaultScript>,
}

impl FixtureAdapter {
    pub fn new(role: AdapterRole, seed: u64) -> Self {
        Self { role, seed, faults: Arc::new(FaultScript::default()) }
    }

    pub fn with_faults(role: AdapterRole, seed: u64, faults: Arc<FaultScript>) -> Self {
        Self { role, seed, faults }
    }

    fn request_rng(&self, raw: &str) -> SplitMix64 {
        let key = self.seed
            ^ fnv1a(self.role.name().as_bytes()).rotate_left(17)
            ^ fnv1a(raw.as_bytes());
        SplitMix64::new(key)
    }

    fn bad_request(&self, detail: impl Into<String>) -> AdapterError {
        AdapterError::BadRequest { role: self.role.name().to_string(), detail: detail.into() }
    }

    fn respond(&self, payload: &Value, raw: &str, dropout: bool) -> Result<Value, AdapterError> {
        let to_value = |v: Result<Value, serde_json::Error>| {
            v.map_err(|e| AdapterError::SchemaViolation {
                role: self.role.name().to_string(),
                detail: format!("fixture produced an unserializable body: {e}"),
                raw: String::new(),
            })
        };
        match self.role {
            AdapterRole::Planner => {
                let request: PlannerRequest = serde_json::from_value(payload.clone())
                    .expect("request validated against schema");
                let response = match request {
                    PlannerRequest::Abstract { keyframes } => abstract_plan(&keyframes),
                    PlannerRequest::Unify { request } => unify(&request),
                };
                to_value(serde_json::to_value(&response))
            }
            AdapterRole::Generator => {
                let request: GeneratorRequest = serde_json::from_value(payload.clone())
                    .expect("request validated against schema");
                let response = self.generate(&request, raw, dropout)?;
                to_value(serde_json::to_value(&response))
            }
            AdapterRole::Tracker => {
                let request: TrackerRequest = serde_json::from_value(payload.clone())
                    .expect("request validated against schema");
                let mut track = Vec::with_capacity(request.frames.len());
                for (i, frame) in request.frames.iter().enumerate() {
                    let pixel = frame.tracks.get(&request.object_id).ok_or_else(|| {
                        self.bad_request(format!(
                            "object `{}` is not visible in frame {i}",
                            request.object_id
                        ))
                    })?;
                    track.push(*pixel);
                }
                to_value(serde_json::to_value(&TrackerResponse { track }))
            }
            AdapterRole::Depth => {
                let request: schema::DepthRequest = serde_json::from_value(payload.clone())
                    .expect("request validated against schema");
                let tables: Vec<RolloutFrame> =
                    request.frames.iter().cloned().map(RolloutFrame::from).collect();
                let mut depths = Vec::with_capacity(request.queries.len());
                for query in &request.queries {
                    let frame = tables
                        .get(query.frame)
                        .ok_or_else(|| self.bad_request(format!("frame {} out of range", query.frame)))?;
                    depths.push(frame.depth.lookup(&Point2D::new(query.u as f64, query.v as f64)));
                }
                to_value(serde_json::to_value(&schema::DepthResponse { depths }))
            }
            AdapterRole::Judge => {
                let request: JudgeRequest = serde_json::from_value(payload.clone())
                    .expect("request validated against schema");
                let response = match request {
                    JudgeRequest::SelectGrasp { candidates } => {
                        if candidates.is_empty() {
                            return Err(self.bad_request("no grasp candidates to select from"));
                        }
                        let best = candidates
                            .iter()
                            .fold(None::<&crate::executor::GraspCandidate>, |acc, c| match acc {
                                Some(b)
                                    if b.stability > c.stability
                                        || (b.stability == c.stability && b.id < c.id) =>
                                {
                                    Some(b)
                                }
                                _ => Some(c),
                            })
                            .expect("non-empty candidates");
                        JudgeResponse::Grasp { id: best.id }
                    }
                    JudgeRequest::Verify { scene, subtask, tolerance } => {
                        match crate::executor::verify_subtask(&scene, &subtask, tolerance) {
                            Ok(verdict) => JudgeResponse::Verdict { pass: verdict.pass, reason: verdict.reason },
                            Err(_) => JudgeResponse::Verdict {
                                pass: false,
                                reason: Some("ungrounded".to_string()),
                            },
                        }
                    }
                };
                to_value(serde_json::to_value(&response))
            }
        }
    }

    fn generate(
        &self,
        request: &GeneratorRequest,
        raw: &str,
        dropout: bool,
    ) -> Result<GeneratorResponse, AdapterError> {
        if request.frames < 2 {
            return Err(self.bad_request(format!("need at least 2 frames, got {}", request.frames)));
        }
        let target = request
            .entities
            .iter()
            .find(|e| e.id == request.object_id)
            .ok_or_else(|| self.bad_request(format!("object `{}` is not in the observation", request.object_id)))?;
        let others: Vec<&EntityState> =
            request.entities.iter().filter(|e| e.id != request.object_id).collect();

        let mut goal = free_spot(&request.target_region, target, &others, &request.obstacles);
        if request.noise > 0.0 {
            let mut rng = self.request_rng(raw);
            let inset = target.radius;
            // Reflect at the region walls so jitter survives even when the
            // free spot sits in a corner.
            goal.x = reflect_into(
                goal.x + rng.range_f64(-request.noise, request.noise),
                request.target_region.min.x + inset,
                request.target_region.max.x - inset,
            );
            goal.y = reflect_into(
                goal.y + rng.range_f64(-request.noise, request.noise),
                request.target_region.min.y + inset,
                request.target_region.max.y - inset,
            );
        }

        let start = target.position;
        let q = request.frames as usize;
        let mut frames = Vec::with_capacity(q);
        for i in 0..q {
            let t = i as f64 / (q - 1) as f64;
            let arc = start
                .lerp(&goal, t)
                .add(&Point3D::new(0.0, 0.0, request.lift * 4.0 * t * (1.0 - t)));

            let mut tracks: BTreeMap<String, [f64; 2]> = BTreeMap::new();
            let mut depth: Vec<DepthEntry> = Vec::new();
            let mut place = |id: &str, world: &Point3D| -> Result<(), AdapterError> {
                let cam = request.extrinsics.world_to_camera(world);
                let pixel = project(&cam, &request.intrinsics)
                    .map_err(|_| self.bad_request(format!("`{id}` is behind the camera")))?;
                if !request.intrinsics.contains_pixel(&pixel) {
                    return Err(self.bad_request(format!(
                        "`{id}` projects outside the image at ({:.1}, {:.1})",
                        pixel.u, pixel.v
                    )));
                }
                tracks.insert(id.to_string(), [pixel.u, pixel.v]);
                depth.push(DepthEntry { u: pixel.u.round() as i64, v: pixel.v.round() as i64, z: cam.z });
                Ok(())
            };
            for entity in &others {
                place(&entity.id, &entity.position)?;
            }
            // Target last: its depth wins when an arc pixel shadows another
            // entity's pixel.
            if !dropout {
                place(&request.object_id, &arc)?;
            }
            frames.push(RolloutFrameWire { tracks, depth: DepthWire::Sparse(depth) });
        }
        Ok(GeneratorResponse { frames, intrinsics: request.intrinsics })
    }
}

impl Adapter for FixtureAdapter {
    fn role(&self) -> AdapterRole {
        self.role
    }

    fn call(&self, payload: &Value) -> Result<AdapterResponse, AdapterError> {
        let raw = payload.to_string();
        schema::validate_request(self.role, payload)?;
        let fault = self.faults.take(self.role, &raw);
        if fault == Some(FaultKind::Timeout) {
            return Err(AdapterError::Unavailable {
                role: self.role.name().to_string(),
                reason: "scripted timeout".into(),
            });
        }
        let dropout = fault == Some(FaultKind::Dropout);
        let mut response = self.respond(payload, &raw, dropout)?;
        if fault == Some(FaultKind::SchemaViolation) {
            response = serde_json::json!({ "malformed": true });
        }
        schema::validate_response(self.role, &response)?;
        Ok(AdapterResponse { payload: response, latency: 0.0, attempt_count: 1 })
    }
}

fn reflect_into(value: f64, lo: f64, hi: f64) -> f64 {
    if lo >= hi {
        return (lo + hi) / 2.0;
    }
    let mut v = value;
    if v < lo {
        v = lo + (lo - v);
    }
    if v > hi {
        v = hi - (v - hi);
    }
    v.clamp(lo, hi)
}

/// Places the object at the in-region grid point with the largest clearance
/// from other entities and obstacle points; ties keep the smallest (x, y).
fn free_spot(
    region: &Region,
    target: &EntityState,
    others: &[&EntityState],
    obstacles: &[Point3D],
) -> Point3D {
    let inset = target.radius;
    let z = target.position.z.clamp(region.min.z, region.max.z);
    let axis = |lo: f64, hi: f64| -> Vec<f64> {
        let (lo, hi) = (lo + inset, hi - inset);
        if lo >= hi {
            return vec![(lo + hi) / 2.0];
        }
        let n = ((hi - lo) / PLACEMENT_GRID).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * PLACEMENT_GRID).collect()
    };
    let mut best: Option<(f64, Point3D)> = None;
    for x in axis(region.min.x, region.max.x) {
        for y in axis(region.min.y, region.max.y) {
            let p = Point3D::new(x, y, z);
            let mut clearance = f64::INFINITY;
            for e in others {
                clearance = clearance.min(p.distance(&e.position) - e.radius);
            }
            for o in obstacles {
                clearance = clearance.min(p.distance(o));
            }
            if best.as_ref().map(|(c, _)| clearance > *c).unwrap_or(true) {
                best = Some((clearance, p));
            }
        }
    }
    best.expect("region grid is never empty").1
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum LabelVerb {
    Grasp,
    Release,
}

const STOPWORDS: [&str; 9] = ["over", "into", "onto", "in", "on", "to", "the", "a", "an"];
const CLAUSE_VERBS: [&str; 9] =
    ["put", "move", "place", "sort", "throw", "bring", "drop", "tidy", "stack"];
const PREPOSITIONS: [&str; 5] = ["into", "onto", "in", "on", "to"];

fn parse_label(label: &str) -> Option<(LabelVerb, String)> {
    let mut words = label.split_whitespace();
    let verb = match words.next()?.to_lowercase().as_str() {
        "grasp" | "pick" | "grab" => LabelVerb::Grasp,
        "release" | "place" | "put" | "drop" => LabelVerb::Release,
        _ => return None,
    };
    let rest: Vec<String> = words
        .map(|w| w.to_lowercase())
        .filter(|w| !STOPWORDS.contains(&w.as_str()))
        .collect();
    if rest.is_empty() {
        return None;
    }
    Some((verb, rest.join(" ")))
}

fn abstract_plan(keyframes: &[KeyframeDescriptor]) -> PlannerResponse {
    let mut steps: Vec<BaselineStep> = Vec::new();
    let mut pending: Option<(u32, String)> = None;
    for descriptor in keyframes {
        match parse_label(&descriptor.label) {
            Some((LabelVerb::Grasp, object)) => {
                if let Some((frame, prev)) = pending.take() {
                    steps.push(BaselineStep {
                        action: "move".into(),
                        object: prev,
                        destination: "unknown".into(),
                        keyframes: vec![frame],
                    });
                }
                pending = Some((descriptor.frame, object));
            }
            Some((LabelVerb::Release, destination)) => {
                if let Some((frame, object)) = pending.take() {
                    steps.push(BaselineStep {
                        action: "move".into(),
                        object,
                        destination,
                        keyframes: vec![frame, descriptor.frame],
                    });
                }
                // A release with no grasp in flight is demonstration noise.
            }
            None => {}
        }
    }
    if let Some((frame, object)) = pending {
        steps.push(BaselineStep {
            action: "move".into(),
            object,
            destination: "unknown".into(),
            keyframes: vec![frame],
        });
    }
    if steps.is_empty() {
        return PlannerResponse::Error {
            code: "empty_plan".into(),
            message: "no grasp/release structure found in the keyframe labels".into(),
            unresolved: vec![],
        };
    }
    PlannerResponse::Baseline { baseline: BaselinePlan { steps } }
}

fn normalize_desc(desc: &str) -> String {
    desc.to_lowercase().split_whitespace().collect::<Vec<_>>().join("_")
}

fn singular(term: &str) -> Option<String> {
    term.strip_suffix('s').filter(|s| !s.is_empty()).map(|s| s.to_string())
}

/// Deterministic grounding over a scene summary. Objects are consumed as
/// they are claimed so that repeated category mentions walk through the
/// instances in lexicographic order, wrapping around once exhausted (a
/// later mention of an exhausted category re-moves the first instance).
struct Grounder<'a> {
    scene: &'a SceneSummary,
    consumed: BTreeSet<String>,
}

impl<'a> Grounder<'a> {
    fn new(scene: &'a SceneSummary) -> Self {
        Self { scene, consumed: BTreeSet::new() }
    }

    fn ids_of_category(&self, cat: &str) -> Vec<String> {
        let mut ids: Vec<String> = self
            .scene
            .objects
            .iter()
            .filter(|o| o.category == cat)
            .map(|o| o.id.clone())
            .collect();
        ids.sort();
        ids
    }

    fn resolve_category(&self, desc: &str) -> Option<String> {
        let norm = normalize_desc(desc);
        if !self.ids_of_category(&norm).is_empty() {
            return Some(norm);
        }
        singular(&norm).filter(|s| !self.ids_of_category(s).is_empty())
    }

    fn ground_object(&mut self, desc: &str) -> Option<String> {
        let cat = self.resolve_category(desc)?;
        let ids = self.ids_of_category(&cat);
        let id = ids.iter().find(|id| !self.consumed.contains(*id)).or_else(|| ids.first())?;
        self.consumed.insert(id.clone());
        Some(id.clone())
    }

    fn ground_region(&self, desc: &str) -> Option<String> {
        let mut regions = self.scene.regions.clone();
        regions.sort();
        if desc == "unknown" {
            return regions.first().cloned();
        }
        let norm = normalize_desc(desc);
        if let Some(hit) = regions.iter().find(|r| category(r) == norm || **r == norm) {
            return Some(hit.clone());
        }
        // "trash bin" still grounds to bin_1: match on the last word.
        let last = norm.rsplit('_').next()?;
        regions.iter().find(|r| category(r) == last).cloned()
    }
}

fn build_subtasks(pairs: Vec<(String, String)>, mode: PlanMode) -> TaskPlan {
    let mut last_destination: BTreeMap<String, String> = BTreeMap::new();
    let subtasks = pairs
        .into_iter()
        .map(|(obj, loc)| {
            let precond = last_destination
                .get(&obj)
                .map(|region| vec![Precondition::On { obj: obj.clone(), region: region.clone() }])
                .unwrap_or_default();
            last_destination.insert(obj.clone(), loc.clone());
            SubtaskSpec {
                desc: format!("move {obj} to {loc}"),
                obj: obj.clone(),
                loc: loc.clone(),
                guide: format!("pick up {obj} and set it down inside {loc}"),
                precond,
            }
        })
        .collect();
    TaskPlan { subtasks, provenance: mode }
}

#[derive(Debug, Clone, PartialEq)]
struct Clause {
    /// `None` means "everything".
    category: Option<String>,
    destination: String,
}

fn parse_language(text: &str) -> Result<Vec<Clause>, String> {
    let lowered = text.to_lowercase();
    let mut clauses = Vec::new();
    let parts = lowered
        .split(" and ")
        .flat_map(|p| p.split(" then "))
        .flat_map(|p| p.split(';'))
        .map(str::trim)
        .filter(|p| !p.is_empty());
    for part in parts {
        let words: Vec<String> = part
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| c.is_ascii_punctuation()).to_string())
            .filter(|w| !w.is_empty())
            .collect();
        let Some(prep_idx) = words.iter().rposition(|w| PREPOSITIONS.contains(&w.as_str())) else {
            return Err(format!("clause `{part}` has no destination preposition"));
        };
        let subject: Vec<&String> = words[..prep_idx]
            .iter()
            .filter(|w| !CLAUSE_VERBS.contains(&w.as_str()) && !STOPWORDS.contains(&w.as_str()) && *w != "all")
            .collect();
        let destination: Vec<&String> = words[prep_idx + 1..]
            .iter()
            .filter(|w| !STOPWORDS.contains(&w.as_str()))
            .collect();
        if destination.is_empty() {
            return Err(format!("clause `{part}` names no destination"));
        }
        let category = if subject.is_empty() || subject.iter().any(|w| *w == "everything") {
            None
        } else {
            Some(subject.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" "))
        };
        clauses.push(Clause {
            category,
            destination: destination.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" "),
        });
    }
    if clauses.is_empty() {
        return Err("no clauses found".into());
    }
    Ok(clauses)
}

enum GroundingFailure {
    Unresolved(Vec<String>),
    Unsupported(String),
}

fn unify(request: &PlanningRequest) -> PlannerResponse {
    if let Err(e) = request.validate() {
        return PlannerResponse::Error {
            code: "invalid_request".into(),
            message: e.to_string(),
            unresolved: vec![],
        };
    }
    let result = match request.mode {
        PlanMode::Mimic => mimic_pairs(request),
        PlanMode::Constrained => constrained_pairs(request),
        PlanMode::SkillTransfer => transfer_pairs(request),
        PlanMode::TextOnly => text_pairs(request),
    };
    match result {
        Ok(pairs) => PlannerResponse::Plan { plan: build_subtasks(pairs, request.mode) },
        Err(GroundingFailure::Unresolved(mut unresolved)) => {
            unresolved.dedup();
            PlannerResponse::Error {
                code: "grounding".into(),
                message: format!("could not ground: {}", unresolved.join(", ")),
                unresolved,
            }
        }
        Err(GroundingFailure::Unsupported(message)) => PlannerResponse::Error {
            code: "unsupported_constraint".into(),
            message,
            unresolved: vec![],
        },
    }
}

fn mimic_pairs(request: &PlanningRequest) -> Result<Vec<(String, String)>, GroundingFailure> {
    let baseline = request.baseline.as_ref().expect("validated");
    let mut grounder = Grounder::new(&request.scene);
    let mut pairs = Vec::new();
    let mut unresolved = Vec::new();
    for step in &baseline.steps {
        let obj = grounder.ground_object(&step.object);
        let loc = grounder.ground_region(&step.destination);
        match (obj, loc) {
            (Some(obj), Some(loc)) => pairs.push((obj, loc)),
            (obj, loc) => {
                if obj.is_none() {
                    unresolved.push(step.object.clone());
                }
                if loc.is_none() {
                    unresolved.push(step.destination.clone());
                }
            }
        }
    }
    if !unresolved.is_empty() {
        return Err(GroundingFailure::Unresolved(unresolved));
    }
    Ok(pairs)
}

fn constrained_pairs(request: &PlanningRequest) -> Result<Vec<(String, String)>, GroundingFailure> {
    let language = request.language.as_ref().expect("validated");
    let clauses = parse_language(language).map_err(GroundingFailure::Unsupported)?;
    let mut pairs = mimic_pairs(request)?;
    let grounder = Grounder::new(&request.scene);
    let mut unresolved = Vec::new();
    for (obj, loc) in &mut pairs {
        let obj_category = category(obj).to_string();
        let clause = clauses.iter().find(|c| match &c.category {
            None => true,
            Some(cat) => {
                let norm = normalize_desc(cat);
                norm == obj_category || singular(&norm).as_deref() == Some(obj_category.as_str())
            }
        });
        if let Some(clause) = clause {
            match grounder.ground_region(&clause.destination) {
                Some(region) => *loc = region,
                None => unresolved.push(clause.destination.clone()),
            }
        }
    }
    if !unresolved.is_empty() {
        return Err(GroundingFailure::Unresolved(unresolved));
    }
    Ok(pairs)
}

fn transfer_pairs(request: &PlanningRequest) -> Result<Vec<(String, String)>, GroundingFailure> {
    let baseline = request.baseline.as_ref().expect("validated");
    let grounder = Grounder::new(&request.scene);

    // Demonstrated sorting rule: object category -> destination, in order of
    // first appearance.
    let mut demo_map: Vec<(String, String)> = Vec::new();
    for step in &baseline.steps {
        let key = normalize_desc(&step.object);
        if !demo_map.iter().any(|(k, _)| *k == key) {
            demo_map.push((key, step.destination.clone()));
        }
    }

    let mut containers = request.scene.regions.clone();
    containers.sort();
    if containers.is_empty() {
        return Err(GroundingFailure::Unresolved(vec!["<no regions>".into()]));
    }

    let mut categories: Vec<String> =
        request.scene.objects.iter().map(|o| o.category.clone()).collect();
    categories.sort();
    categories.dedup();

    let mut pairs = Vec::new();
    let mut unresolved = Vec::new();
    let mut novel_index = 0usize;
    for cat in categories {
        let demo_hit = demo_map.iter().find(|(k, _)| {
            *k == cat || singular(k).as_deref() == Some(cat.as_str())
        });
        let region = match demo_hit {
            Some((_, destination)) => match grounder.ground_region(destination) {
                Some(region) => region,
                None => {
                    unresolved.push(destination.clone());
                    continue;
                }
            },
            None => {
                // Novel category: assign the analogous container round-robin
                // in lexicographic category order.
                let region = containers[novel_index % containers.len()].clone();
                novel_index += 1;
                region
            }
        };
        for id in grounder.ids_of_category(&cat) {
            pairs.push((id, region.clone()));
        }
    }
    if !unresolved.is_empty() {
        return Err(GroundingFailure::Unresolved(unresolved));
    }
    if pairs.is_empty() {
        return Err(GroundingFailure::Unresolved(vec!["<no objects>".into()]));
    }
    Ok(pairs)
}

fn text_pairs(request: &PlanningRequest) -> Result<Vec<(String, String)>, GroundingFailure> {
    let language = request.language.as_ref().expect("validated");
    let clauses = parse_language(language).map_err(GroundingFailure::Unsupported)?;
    let grounder = Grounder::new(&request.scene);
    let mut pairs: Vec<(String, String)> = Vec::new();
    let mut planned: BTreeSet<String> = BTreeSet::new();
    let mut unresolved = Vec::new();
    for clause in &clauses {
        let Some(region) = grounder.ground_region(&clause.destination) else {
            unresolved.push(clause.destination.clone());
            continue;
        };
        let ids: Vec<String> = match &clause.category {
            None => {
                let mut ids: Vec<String> =
                    request.scene.objects.iter().map(|o| o.id.clone()).collect();
                ids.sort();
                ids
            }
            Some(cat) => match grounder.resolve_category(cat) {
                Some(resolved) => grounder.ids_of_category(&resolved),
                None => {
                    unresolved.push(cat.clone());
                    continue;
                }
            },
        };
        for id in ids {
            if planned.insert(id.clone()) {
                pairs.push((id, region.clone()));
            }
        }
    }
    if !unresolved.is_empty() {
        return Err(GroundingFailure::Unresolved(unresolved));
    }
    if pairs.is_empty() {
        return Err(GroundingFailure::Unresolved(vec!["<no objects>".into()]));
    }
    Ok(pairs)
}
