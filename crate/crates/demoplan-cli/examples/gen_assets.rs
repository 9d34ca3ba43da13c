//! Regenerates the bundled scenario files and demonstration streams under
//! `scenarios/`. Run from the workspace root:
//!
//! ```text
//! cargo run -p demoplan-cli --example gen_assets
//! ```
//!
//! The generator projects every demonstration stop through the scenario
//! camera, synthesizes a wrist stream that pauses at each stop, and
//! self-checks the result by extracting keyframes and running one full
//! trial per scenario.

use std::path::Path;

use demoplan::harness::KeyframeLabel;
use demoplan::keyframe::LandmarkFrame;
use demoplan::{
    dynamics, extract_keyframes, load_scenario, run_trial, CameraExtrinsics, CameraIntrinsics,
    KeyframeParams, LandmarkStream, Point2D, Point3D, TrialOptions,
};
use serde_json::{json, Value};

const HOLD_FRAMES: u32 = 20;
const TRAVEL_SPEED: f64 = 6.0;

fn intrinsics() -> CameraIntrinsics {
    CameraIntrinsics { fx: 600.0, fy: 600.0, cx: 320.0, cy: 240.0, width: 640, height: 480 }
}

fn extrinsics() -> CameraExtrinsics {
    CameraExtrinsics::look_at(Point3D::new(0.0, -0.75, 0.85), Point3D::new(0.0, 0.0, 0.0)).unwrap()
}

fn project_world(p: Point3D) -> Point2D {
    let cam = extrinsics().world_to_camera(&p);
    let pixel = dynamics::project(&cam, &intrinsics()).expect("stop in front of the camera");
    assert!(intrinsics().contains_pixel(&pixel), "stop {p} projects outside the image");
    pixel
}

/// One demonstration stop: where the wrist pauses and what the pause means.
struct Stop {
    world: Point3D,
    label: &'static str,
}

fn synthesize_demo(stops: &[Stop]) -> (LandmarkStream, Vec<KeyframeLabel>) {
    let mut frames: Vec<LandmarkFrame> = Vec::new();
    let mut labels = Vec::new();
    fn push(frames: &mut Vec<LandmarkFrame>, p: Point2D) {
        frames.push(LandmarkFrame { frame: frames.len() as u32, u: p.u, v: p.v, confidence: 1.0 });
    }
    // Lead-in from a rest pose so the first hold gets a proper approach.
    push(&mut frames, project_world(Point3D::new(0.0, -0.20, 0.10)));
    for (i, stop) in stops.iter().enumerate() {
        let pixel = project_world(stop.world);
        let prev = frames.last().copied().expect("lead-in frame exists");
        let from = Point2D::new(prev.u, prev.v);
        let steps = (from.distance(&pixel) / TRAVEL_SPEED).ceil() as u32;
        assert!(steps >= 8, "stops {i} too close: only {steps} travel frames");
        for k in 1..steps {
            let t = k as f64 / steps as f64;
            push(&mut frames, Point2D::new(from.u + (pixel.u - from.u) * t, from.v + (pixel.v - from.v) * t));
        }
        let hold_start = frames.len() as u32;
        for _ in 0..HOLD_FRAMES {
            push(&mut frames, pixel);
        }
        // The stationarity run's representative settles a few frames into
        // the hold; the label sits there so nearest-match is unambiguous.
        labels.push(KeyframeLabel { frame: hold_start + 3, label: stop.label.to_string() });
    }
    (LandmarkStream::new(frames).expect("valid stream"), labels)
}

fn camera_json() -> Value {
    json!({ "intrinsics": intrinsics(), "extrinsics": extrinsics() })
}

fn object(id: &str, x: f64, y: f64, radius: f64) -> Value {
    json!({ "id": id, "position": { "x": x, "y": y, "z": 0.02 }, "radius": radius })
}

fn region(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> Value {
    json!({
        "id": id,
        "min": { "x": x0, "y": y0, "z": 0.0 },
        "max": { "x": x1, "y": y1, "z": 0.12 },
    })
}

/// Obstacle lattice filling a box, `step` meters apart.
fn lattice(x0: f64, x1: f64, y0: f64, y1: f64, z0: f64, z1: f64, step: f64) -> Vec<Value> {
    let count = |lo: f64, hi: f64| ((hi - lo) / step).round() as i64;
    let mut points = Vec::new();
    for i in 0..=count(x0, x1) {
        for j in 0..=count(y0, y1) {
            for k in 0..=count(z0, z1) {
                points.push(json!({
                    "x": x0 + i as f64 * step,
                    "y": y0 + j as f64 * step,
                    "z": z0 + k as f64 * step,
                }));
            }
        }
    }
    points
}

fn write_scenario(dir: &Path, name: &str, scenario: Value, stops: &[Stop]) {
    let (stream, labels) = synthesize_demo(stops);
    let demo_rel = format!("demos/{name}.csv");
    std::fs::write(dir.join(&demo_rel), stream.to_csv_string()).expect("write demo");

    let keyframes = extract_keyframes(&stream, &KeyframeParams::default()).expect("keyframes");
    assert_eq!(
        keyframes.len(),
        labels.len(),
        "{name}: extracted {} keyframes for {} labeled stops",
        keyframes.len(),
        labels.len()
    );
    for (kf, label) in keyframes.iter().zip(&labels) {
        assert!(
            kf.abs_diff(label.frame) <= KeyframeParams::default().min_interval / 2,
            "{name}: keyframe {kf} too far from label at {}",
            label.frame
        );
    }

    let mut scenario = scenario;
    scenario["demonstration"] = json!({
        "landmarks": demo_rel,
        "keyframe_labels": labels,
    });
    let path = dir.join(format!("{name}.json"));
    let mut text = serde_json::to_string_pretty(&scenario).unwrap();
    text.push('\n');
    std::fs::write(&path, text).expect("write scenario");

    // Self-check: the bundled scenario must load and run to full success.
    let loaded = load_scenario(&path).expect("reload scenario");
    let run = run_trial(&loaded, 12345, &TrialOptions::default(), None);
    assert!(
        run.result.success,
        "{name}: perfect-fixture trial failed: {:?}",
        run.result
            .subtask_outcomes
            .iter()
            .filter(|o| !o.passed)
            .map(|o| (&o.desc, o.reason, &o.detail))
            .collect::<Vec<_>>()
    );
    println!(
        "{name}: {} frames, {} keyframes, trial passed {}/{}",
        loaded.stream.as_ref().unwrap().len(),
        keyframes.len(),
        run.result.subtasks_passed,
        loaded.expected_subtasks
    );
}

fn meal_prep(dir: &Path) {
    let fruit = [(-0.24, -0.10), (-0.20, 0.0), (-0.24, 0.10)];
    let snack = [(-0.14, -0.05), (-0.14, 0.06)];
    let plate_drop = Point3D::new(0.18, -0.09, 0.03);
    let basket_drop = Point3D::new(0.18, 0.11, 0.03);

    let mut stops = Vec::new();
    for &(x, y) in &fruit {
        stops.push(Stop { world: Point3D::new(x, y, 0.02), label: "grasp fruit" });
        stops.push(Stop { world: plate_drop, label: "release plate" });
    }
    for &(x, y) in &snack {
        stops.push(Stop { world: Point3D::new(x, y, 0.02), label: "grasp snack" });
        stops.push(Stop { world: basket_drop, label: "release basket" });
    }

    let scenario = json!({
        "name": "meal_prep",
        "mode": "mimic",
        "expected_subtasks": 5,
        "language": "put the fruits onto the plate and the snacks into the basket",
        "scene": {
            "objects": [
                object("fruit_1", fruit[0].0, fruit[0].1, 0.02),
                object("fruit_2", fruit[1].0, fruit[1].1, 0.02),
                object("fruit_3", fruit[2].0, fruit[2].1, 0.02),
                object("snack_1", snack[0].0, snack[0].1, 0.02),
                object("snack_2", snack[1].0, snack[1].1, 0.02),
            ],
            "regions": [
                region("plate_1", 0.10, -0.17, 0.26, -0.01),
                region("basket_1", 0.10, 0.03, 0.26, 0.19),
            ],
            "obstacles": [],
        },
        "camera": camera_json(),
        "grasp_candidates": {
            "fruit_1": [
                { "id": 0, "position": { "x": 0.004, "y": 0.0, "z": 0.008 }, "yaw": 0.3, "stability": 0.85 },
                { "id": 1, "position": { "x": -0.003, "y": 0.002, "z": 0.01 }, "yaw": 1.2, "stability": 0.92 },
            ],
        },
        "placement_jitter": null,
    });
    write_scenario(dir, "meal_prep", scenario, &stops);
}

fn tidy_up(dir: &Path) {
    let items: [(&str, f64, f64, &str, Point3D); 5] = [
        ("trash_1", -0.22, -0.08, "grasp trash", Point3D::new(0.18, -0.10, 0.03)),
        ("trash_2", -0.16, 0.10, "grasp trash", Point3D::new(0.18, -0.10, 0.03)),
        ("tool_1", -0.24, 0.02, "grasp tool", Point3D::new(0.18, 0.10, 0.03)),
        ("tool_2", -0.13, -0.02, "grasp tool", Point3D::new(0.18, 0.10, 0.03)),
        ("book_1", -0.19, 0.16, "grasp book", Point3D::new(0.18, 0.10, 0.03)),
    ];
    let mut stops = Vec::new();
    for (_, x, y, grasp, drop) in &items {
        stops.push(Stop { world: Point3D::new(*x, *y, 0.02), label: grasp });
        let release = if grasp.ends_with("trash") { "release bin" } else { "release basket" };
        stops.push(Stop { world: *drop, label: release });
    }

    let scenario = json!({
        "name": "tidy_up",
        "mode": "mimic",
        "expected_subtasks": 5,
        "language": "put the trash into the bin and the tools into the basket and the books into the basket",
        "scene": {
            "objects": items.iter().map(|(id, x, y, _, _)| object(id, *x, *y, 0.02)).collect::<Vec<_>>(),
            "regions": [
                region("bin_1", 0.10, -0.18, 0.26, -0.02),
                region("basket_1", 0.10, 0.02, 0.26, 0.18),
            ],
            "obstacles": [],
        },
        "camera": camera_json(),
        "grasp_candidates": {},
        "placement_jitter": null,
    });
    write_scenario(dir, "tidy_up", scenario, &stops);
}

fn irregular_traversal(dir: &Path) {
    let cube = Point3D::new(-0.22, -0.14, 0.02);
    let star = Point3D::new(-0.20, 0.0, 0.02);
    let ring = Point3D::new(-0.24, 0.07, 0.02);
    let zone = |id: &str| -> Point3D {
        match id {
            "zone_a" => Point3D::new(0.105, -0.15, 0.03),
            "zone_b" => Point3D::new(0.105, 0.15, 0.03),
            "zone_c" => Point3D::new(0.235, -0.15, 0.03),
            _ => Point3D::new(0.235, 0.15, 0.03),
        }
    };
    // Eight non-logical moves shuttling three objects through four zones.
    let moves: [(&str, Point3D, &str); 8] = [
        ("grasp cube", cube, "zone_a"),
        ("grasp star", star, "zone_b"),
        ("grasp cube", zone("zone_a"), "zone_c"),
        ("grasp ring", ring, "zone_a"),
        ("grasp star", zone("zone_b"), "zone_d"),
        ("grasp cube", zone("zone_c"), "zone_b"),
        ("grasp ring", zone("zone_a"), "zone_d"),
        ("grasp cube", zone("zone_b"), "zone_a"),
    ];
    let mut stops = Vec::new();
    for (grasp, from, dest) in &moves {
        stops.push(Stop { world: *from, label: grasp });
        let label: &'static str = match *dest {
            "zone_a" => "release zone_a",
            "zone_b" => "release zone_b",
            "zone_c" => "release zone_c",
            _ => "release zone_d",
        };
        stops.push(Stop { world: zone(dest), label });
    }

    // A wall of obstacle points between the pick area and the zones, spanning
    // the upper half of the desk, plus a blob occupying zone_a's center.
    let mut obstacles = lattice(-0.02, -0.02, -0.02, 0.22, 0.0, 0.06, 0.005);
    obstacles.extend(lattice(0.093, 0.117, -0.162, -0.138, 0.0, 0.028, 0.004));

    let scenario = json!({
        "name": "irregular_traversal",
        "mode": "mimic",
        "expected_subtasks": 8,
        "language": null,
        "scene": {
            "objects": [
                object("cube_1", cube.x, cube.y, 0.02),
                object("star_1", star.x, star.y, 0.02),
                object("ring_1", ring.x, ring.y, 0.02),
            ],
            "regions": [
                region("zone_a", 0.06, -0.20, 0.15, -0.10),
                region("zone_b", 0.06, 0.10, 0.15, 0.20),
                region("zone_c", 0.19, -0.20, 0.28, -0.10),
                region("zone_d", 0.19, 0.10, 0.28, 0.20),
            ],
            "obstacles": obstacles,
        },
        "camera": camera_json(),
        "grasp_candidates": {
            "cube_1": [
                { "id": 0, "position": { "x": 0.006, "y": 0.0, "z": 0.006 }, "yaw": 0.0, "stability": 0.7 },
                { "id": 1, "position": { "x": 0.0, "y": 0.004, "z": 0.01 }, "yaw": 0.8, "stability": 0.9 },
                { "id": 2, "position": { "x": -0.006, "y": 0.0, "z": 0.006 }, "yaw": 1.6, "stability": 0.9 },
            ],
        },
        "placement_jitter": null,
    });
    write_scenario(dir, "irregular_traversal", scenario, &stops);
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    std::fs::create_dir_all(dir.join("demos")).expect("create scenarios/demos");
    meal_prep(&dir);
    tidy_up(&dir);
    irregular_traversal(&dir);
    println!("assets written to {}", dir.display());
}
