//! Key-action frame extraction from a demonstration landmark stream.
//!
//! A frame is a keyframe candidate when the mean wrist speed over a local
//! temporal window falls below a stationarity threshold; candidates are
//! then temporally filtered so keyframes keep a minimum frame distance.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Point2D;

/// Landmark detections below this confidence are treated as missing and
/// bridged by linear interpolation of the wrist position.
pub const CONFIDENCE_FLOOR: f64 = 0.3;

#[derive(Debug, Error)]
pub enum KeyframeError {
    #[error("stream has too few usable frames (need at least 2)")]
    InsufficientData,
    #[error("frame position {index} out of range for stream of length {len} (positions start at {min})")]
    IndexOutOfRange { index: usize, len: usize, min: usize },
    #[error("invalid landmark stream: {0}")]
    InvalidStream(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One wrist detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFrame {
    pub frame: u32,
    pub u: f64,
    pub v: f64,
    pub confidence: f64,
}

impl LandmarkFrame {
    pub fn wrist(&self) -> Point2D {
        Point2D::new(self.u, self.v)
    }
}

/// Per-frame 2D wrist positions parsed from one demonstration video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkStream {
    pub frames: Vec<LandmarkFrame>,
}

impl LandmarkStream {
    pub fn new(frames: Vec<LandmarkFrame>) -> Result<Self, KeyframeError> {
        let stream = Self { frames };
        stream.validate()?;
        Ok(stream)
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<(), KeyframeError> {
        for pair in self.frames.windows(2) {
            if pair[1].frame <= pair[0].frame {
                return Err(KeyframeError::InvalidStream(format!(
                    "frame indices must be strictly increasing, got {} then {}",
                    pair[0].frame, pair[1].frame
                )));
            }
        }
        for f in &self.frames {
            if !(0.0..=1.0).contains(&f.confidence) {
                return Err(KeyframeError::InvalidStream(format!(
                    "confidence {} at frame {} outside [0, 1]",
                    f.confidence, f.frame
                )));
            }
            if !f.u.is_finite() || !f.v.is_finite() {
                return Err(KeyframeError::InvalidStream(format!("non-finite wrist position at frame {}", f.frame)));
            }
        }
        Ok(())
    }

    /// Parses the CSV form: header `frame,u,v,confidence`, one detection
    /// per line.
    pub fn from_csv_str(text: &str) -> Result<Self, KeyframeError> {
        let mut frames = Vec::new();
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "frame,u,v,confidence" => {}
            Some((_, header)) => {
                return Err(KeyframeError::Parse {
                    line: 1,
                    message: format!("expected header `frame,u,v,confidence`, got `{}`", header.trim()),
                })
            }
            None => return Err(KeyframeError::Parse { line: 1, message: "empty file".into() }),
        }
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(KeyframeError::Parse {
                    line: idx + 1,
                    message: format!("expected 4 fields, got {}", fields.len()),
                });
            }
            let parse_f = |s: &str, name: &str| -> Result<f64, KeyframeError> {
                s.trim().parse().map_err(|_| KeyframeError::Parse {
                    line: idx + 1,
                    message: format!("invalid {name} `{s}`"),
                })
            };
            let frame: u32 = fields[0].trim().parse().map_err(|_| KeyframeError::Parse {
                line: idx + 1,
                message: format!("invalid frame `{}`", fields[0]),
            })?;
            frames.push(LandmarkFrame {
                frame,
                u: parse_f(fields[1], "u")?,
                v: parse_f(fields[2], "v")?,
                confidence: parse_f(fields[3], "confidence")?,
            });
        }
        Self::new(frames)
    }

    /// Parses the JSON form: an array of `{frame, u, v, confidence}` objects.
    pub fn from_json_str(text: &str) -> Result<Self, KeyframeError> {
        let frames: Vec<LandmarkFrame> = serde_json::from_str(text)
            .map_err(|e| KeyframeError::Parse { line: e.line(), message: e.to_string() })?;
        Self::new(frames)
    }

    pub fn from_path(path: &Path) -> Result<Self, KeyframeError> {
        let text = std::fs::read_to_string(path).map_err(|source| KeyframeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            Self::from_json_str(&text)
        } else {
            Self::from_csv_str(&text)
        }
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("frame,u,v,confidence\n");
        for f in &self.frames {
            out.push_str(&format!("{},{},{},{}\n", f.frame, f.u, f.v, f.confidence));
        }
        out
    }

    /// Wrist positions with low-confidence detections bridged by linear
    /// interpolation (weighted by frame number); leading and trailing gaps
    /// take the nearest confident position.
    pub fn effective_positions(&self) -> Result<Vec<Point2D>, KeyframeError> {
        let valid: Vec<usize> = (0..self.frames.len())
            .filter(|&i| self.frames[i].confidence >= CONFIDENCE_FLOOR)
            .collect();
        if valid.is_empty() {
            return Err(KeyframeError::InsufficientData);
        }
        let mut out: Vec<Point2D> = self.frames.iter().map(|f| f.wrist()).collect();
        let first = valid[0];
        for i in 0..first {
            out[i] = self.frames[first].wrist();
        }
        let last = *valid.last().unwrap();
        for i in last + 1..self.frames.len() {
            out[i] = self.frames[last].wrist();
        }
        for pair in valid.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b > a + 1 {
                let pa = self.frames[a].wrist();
                let pb = self.frames[b].wrist();
                let fa = self.frames[a].frame as f64;
                let fb = self.frames[b].frame as f64;
                for i in a + 1..b {
                    let t = (self.frames[i].frame as f64 - fa) / (fb - fa);
                    out[i] = Point2D::new(pa.u + (pb.u - pa.u) * t, pa.v + (pb.v - pa.v) * t);
                }
            }
        }
        Ok(out)
    }
}

/// Stationarity-test parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyframeParams {
    /// Threshold on windowed mean wrist speed, pixels/frame.
    pub epsilon: f64,
    /// Window half-width in stream positions.
    pub half_window: usize,
    /// Minimum frame distance between returned keyframes.
    pub min_interval: u32,
}

impl Default for KeyframeParams {
    fn default() -> Self {
        // Tuned for 30 fps demonstrations; override per scenario.
        Self { epsilon: 2.0, half_window: 3, min_interval: 15 }
    }
}

impl KeyframeParams {
    pub fn validate(&self) -> Result<(), KeyframeError> {
        if !(self.epsilon > 0.0) {
            return Err(KeyframeError::InvalidStream(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if self.half_window < 1 {
            return Err(KeyframeError::InvalidStream("half_window must be >= 1".into()));
        }
        if self.min_interval < 1 {
            return Err(KeyframeError::InvalidStream("min_interval must be >= 1".into()));
        }
        Ok(())
    }
}

/// Wrist speed at stream position `i`: the distance between consecutive
/// effective positions, in pixels/frame.
pub fn frame_speed(stream: &LandmarkStream, i: usize) -> Result<f64, KeyframeError> {
    let pos = stream.effective_positions()?;
    if i == 0 || i >= pos.len() {
        return Err(KeyframeError::IndexOutOfRange { index: i, len: pos.len(), min: 1 });
    }
    Ok(pos[i].distance(&pos[i - 1]))
}

fn speeds(positions: &[Point2D]) -> Vec<f64> {
    (1..positions.len()).map(|i| positions[i].distance(&positions[i - 1])).collect()
}

fn window_mean(speeds: &[f64], t: usize, half_window: usize) -> f64 {
    // speeds[k] is the speed at stream position k+1; valid positions are
    // 1..=speeds.len(). Clip the window to that range and renormalize.
    let n = speeds.len() + 1;
    let lo = t.saturating_sub(half_window).max(1);
    let hi = (t + half_window).min(n - 1);
    let mut sum = 0.0;
    for i in lo..=hi {
        sum += speeds[i - 1];
    }
    sum / (hi - lo + 1) as f64
}

/// Mean wrist speed over the window `{t - half_window, ..., t + half_window}`
/// clipped to valid stream positions.
pub fn stationarity_score(
    stream: &LandmarkStream,
    t: usize,
    half_window: usize,
) -> Result<f64, KeyframeError> {
    if stream.len() < 2 {
        return Err(KeyframeError::InsufficientData);
    }
    if t >= stream.len() {
        return Err(KeyframeError::IndexOutOfRange { index: t, len: stream.len(), min: 0 });
    }
    let pos = stream.effective_positions()?;
    Ok(window_mean(&speeds(&pos), t, half_window))
}

/// Distills a landmark stream into sparse key-action frame indices.
///
/// Every returned frame satisfies the strict stationarity inequality; within
/// each maximal run of candidate positions the minimum-score frame is kept
/// (ties to the earliest), and representatives closer than `min_interval`
/// frames to the previously kept one are dropped.
pub fn extract_keyframes(
    stream: &LandmarkStream,
    params: &KeyframeParams,
) -> Result<Vec<u32>, KeyframeError> {
    params.validate()?;
    if stream.len() < 2 {
        return Err(KeyframeError::InsufficientData);
    }
    let pos = stream.effective_positions()?;
    let sp = speeds(&pos);
    let n = stream.len();
    let scores: Vec<f64> = (0..n).map(|t| window_mean(&sp, t, params.half_window)).collect();

    let mut keyframes: Vec<u32> = Vec::new();
    let mut run_start: Option<usize> = None;
    for t in 0..=n {
        let is_candidate = t < n && scores[t] < params.epsilon;
        match (run_start, is_candidate) {
            (None, true) => run_start = Some(t),
            (Some(start), false) => {
                let mut best = start;
                for i in start + 1..t {
                    if scores[i] < scores[best] {
                        best = i;
                    }
                }
                let frame = stream.frames[best].frame;
                let far_enough = keyframes
                    .last()
                    .map(|&prev| frame - prev >= params.min_interval)
                    .unwrap_or(true);
                if far_enough {
                    keyframes.push(frame);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(keyframes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream_from_positions(points: &[(f64, f64)]) -> LandmarkStream {
        LandmarkStream::new(
            points
                .iter()
                .enumerate()
                .map(|(i, &(u, v))| LandmarkFrame { frame: i as u32, u, v, confidence: 1.0 })
                .collect(),
        )
        .unwrap()
    }

    /// Independent brute-force reference: double loop per position, then run
    /// grouping and greedy interval filtering. Used as the test oracle for
    /// every keyframe operation.
    fn oracle_scores(stream: &LandmarkStream, half_window: usize) -> Vec<f64> {
        let pos = stream.effective_positions().unwrap();
        let n = pos.len();
        (0..n)
            .map(|t| {
                let lo = if t > half_window { t - half_window } else { 0 }.max(1);
                let hi = (t + half_window).min(n - 1);
                let mut sum = 0.0;
                for i in lo..=hi {
                    sum += pos[i].distance(&pos[i - 1]);
                }
                sum / (hi - lo + 1) as f64
            })
            .collect()
    }

    fn oracle_keyframes(stream: &LandmarkStream, params: &KeyframeParams) -> Vec<u32> {
        let scores = oracle_scores(stream, params.half_window);
        let n = scores.len();
        let mut runs: Vec<(usize, usize)> = Vec::new();
        let mut t = 0;
        while t < n {
            if scores[t] < params.epsilon {
                let start = t;
                while t < n && scores[t] < params.epsilon {
                    t += 1;
                }
                runs.push((start, t));
            } else {
                t += 1;
            }
        }
        let mut out: Vec<u32> = Vec::new();
        for (start, end) in runs {
            let mut best = start;
            for i in start..end {
                if scores[i] < scores[best] {
                    best = i;
                }
            }
            let frame = stream.frames[best].frame;
            if out.last().map(|&p| frame - p >= params.min_interval).unwrap_or(true) {
                out.push(frame);
            }
        }
        out
    }

    #[test]
    fn speed_is_zero_for_stationary_stream() {
        let stream = stream_from_positions(&[(100.0, 100.0); 10]);
        for i in 1..10 {
            assert_eq!(frame_speed(&stream, i).unwrap(), 0.0);
        }
    }

    #[test]
    fn speed_of_three_four_step_is_five() {
        let stream = stream_from_positions(&[(0.0, 0.0), (3.0, 4.0)]);
        assert_eq!(frame_speed(&stream, 1).unwrap(), 5.0);
    }

    #[test]
    fn speed_rejects_position_zero() {
        let stream = stream_from_positions(&[(0.0, 0.0), (1.0, 0.0)]);
        assert!(matches!(frame_speed(&stream, 0), Err(KeyframeError::IndexOutOfRange { .. })));
        assert!(matches!(frame_speed(&stream, 2), Err(KeyframeError::IndexOutOfRange { .. })));
    }

    #[test]
    fn speed_on_sinusoidal_stream_matches_direct_formula() {
        let points: Vec<(f64, f64)> = (0..32)
            .map(|i| {
                let t = i as f64 * 0.2;
                (160.0 + 40.0 * t.sin(), 120.0 + 25.0 * (2.0 * t).cos())
            })
            .collect();
        let stream = stream_from_positions(&points);
        let expected = {
            let (u1, v1) = points[10];
            let (u0, v0) = points[9];
            ((u1 - u0).powi(2) + (v1 - v0).powi(2)).sqrt()
        };
        assert_eq!(frame_speed(&stream, 10).unwrap(), expected);
    }

    #[test]
    fn score_is_zero_for_constant_stream() {
        let stream = stream_from_positions(&[(50.0, 60.0); 20]);
        for t in 0..20 {
            assert_eq!(stationarity_score(&stream, t, 3).unwrap(), 0.0);
        }
    }

    #[test]
    fn score_is_one_for_uniform_unit_motion() {
        let points: Vec<(f64, f64)> = (0..30).map(|i| (i as f64, 0.0)).collect();
        let stream = stream_from_positions(&points);
        for t in 5..25 {
            assert!((stationarity_score(&stream, t, 3).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn score_at_hold_center_is_zero() {
        // 20 frames moving 5 px/frame, then 20 frames holding still.
        let mut points = Vec::new();
        for i in 0..20 {
            points.push((5.0 * i as f64, 0.0));
        }
        for _ in 20..40 {
            points.push((95.0, 0.0));
        }
        let stream = stream_from_positions(&points);
        let t = 30; // hold center
        assert_eq!(stationarity_score(&stream, t, 3).unwrap(), 0.0);
        assert_eq!(stationarity_score(&stream, t, 3).unwrap(), oracle_scores(&stream, 3)[t]);
    }

    #[test]
    fn score_requires_two_frames() {
        let stream = stream_from_positions(&[(0.0, 0.0)]);
        assert!(matches!(stationarity_score(&stream, 0, 3), Err(KeyframeError::InsufficientData)));
    }

    #[test]
    fn constant_fast_motion_yields_no_keyframes() {
        let points: Vec<(f64, f64)> = (0..60).map(|i| (6.0 * i as f64, 0.0)).collect();
        let stream = stream_from_positions(&points);
        let kf = extract_keyframes(&stream, &KeyframeParams::default()).unwrap();
        assert!(kf.is_empty());
    }

    fn two_hold_stream() -> LandmarkStream {
        // Motion at 5 px/frame except two holds spanning frames 10..=20 and 50..=60.
        let mut points = Vec::new();
        let mut pos = 0.0;
        for i in 0..=80u32 {
            let moving = !((10..=20).contains(&i) || (50..=60).contains(&i));
            if moving && i > 0 {
                pos += 5.0;
            }
            points.push((pos, 0.0));
        }
        stream_from_positions(&points)
    }

    #[test]
    fn two_holds_yield_two_keyframes() {
        let stream = two_hold_stream();
        let params = KeyframeParams { epsilon: 0.5, half_window: 2, min_interval: 15 };
        let kf = extract_keyframes(&stream, &params).unwrap();
        assert_eq!(kf, oracle_keyframes(&stream, &params));
        assert_eq!(kf.len(), 2);
        assert!((12..=20).contains(&kf[0]), "first keyframe {} not inside first hold", kf[0]);
        assert!((52..=60).contains(&kf[1]), "second keyframe {} not inside second hold", kf[1]);
    }

    #[test]
    fn short_hold_yields_exactly_one_keyframe() {
        let mut points = Vec::new();
        let mut pos = 0.0;
        for i in 0..=50u32 {
            let moving = !(20..=27).contains(&i);
            if moving && i > 0 {
                pos += 5.0;
            }
            points.push((pos, 0.0));
        }
        let stream = stream_from_positions(&points);
        let params = KeyframeParams { epsilon: 0.5, half_window: 2, min_interval: 15 };
        let kf = extract_keyframes(&stream, &params).unwrap();
        assert_eq!(kf, oracle_keyframes(&stream, &params));
        assert_eq!(kf.len(), 1);
    }

    #[test]
    fn low_confidence_frames_are_bridged() {
        let mut frames: Vec<LandmarkFrame> = (0..10)
            .map(|i| LandmarkFrame { frame: i, u: 10.0 * i as f64, v: 0.0, confidence: 1.0 })
            .collect();
        // Knock out the middle; interpolation should restore the straight line.
        frames[4].confidence = 0.1;
        frames[4].u = 9999.0;
        frames[5].confidence = 0.0;
        frames[5].u = -9999.0;
        let stream = LandmarkStream::new(frames).unwrap();
        let pos = stream.effective_positions().unwrap();
        assert!((pos[4].u - 40.0).abs() < 1e-9);
        assert!((pos[5].u - 50.0).abs() < 1e-9);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let stream = two_hold_stream();
        let csv = stream.to_csv_string();
        let back = LandmarkStream::from_csv_str(&csv).unwrap();
        assert_eq!(back, stream);
    }

    #[test]
    fn csv_rejects_bad_header_and_bad_fields() {
        assert!(matches!(
            LandmarkStream::from_csv_str("t,u,v,c\n0,1,2,1\n"),
            Err(KeyframeError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            LandmarkStream::from_csv_str("frame,u,v,confidence\n0,1,nope,1\n"),
            Err(KeyframeError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn json_form_matches_csv_form() {
        let stream = two_hold_stream();
        let json = serde_json::to_string(&stream.frames).unwrap();
        assert_eq!(LandmarkStream::from_json_str(&json).unwrap(), stream);
    }

    fn arb_stream() -> impl Strategy<Value = LandmarkStream> {
        // Piecewise streams alternating motion and holds, the regime the
        // extractor has to segment. Integer pixel positions keep all speed
        // arithmetic exact, so translation invariance can be checked as
        // strict equality.
        proptest::collection::vec((0u32..8, 2usize..40), 1..12).prop_map(|segments| {
            let mut points = Vec::new();
            let mut u = 100i64;
            for (speed, len) in segments {
                for _ in 0..len {
                    points.push(LandmarkFrame {
                        frame: points.len() as u32,
                        u: u as f64,
                        v: 50.0,
                        confidence: 1.0,
                    });
                    u += speed as i64;
                }
            }
            if points.len() < 2 {
                points.push(LandmarkFrame { frame: points.len() as u32, u: u as f64, v: 50.0, confidence: 1.0 });
            }
            LandmarkStream::new(points).unwrap()
        })
    }

    fn arb_params() -> impl Strategy<Value = KeyframeParams> {
        (0.2f64..6.0, 1usize..6, 1u32..30).prop_map(|(epsilon, half_window, min_interval)| {
            KeyframeParams { epsilon, half_window, min_interval }
        })
    }

    proptest! {
        #[test]
        fn extraction_matches_brute_force_oracle(stream in arb_stream(), params in arb_params()) {
            let got = extract_keyframes(&stream, &params).unwrap();
            let want = oracle_keyframes(&stream, &params);
            prop_assert_eq!(got, want);
        }

        #[test]
        fn keyframes_are_increasing_subset_with_gaps(stream in arb_stream(), params in arb_params()) {
            let kf = extract_keyframes(&stream, &params).unwrap();
            let input: std::collections::BTreeSet<u32> =
                stream.frames.iter().map(|f| f.frame).collect();
            for pair in kf.windows(2) {
                prop_assert!(pair[1] > pair[0]);
                prop_assert!(pair[1] - pair[0] >= params.min_interval);
            }
            for f in &kf {
                prop_assert!(input.contains(f));
            }
        }

        #[test]
        fn translation_leaves_keyframes_unchanged(
            stream in arb_stream(),
            params in arb_params(),
            du in -500i64..500,
            dv in -500i64..500,
        ) {
            let shifted = LandmarkStream::new(
                stream
                    .frames
                    .iter()
                    .map(|f| LandmarkFrame {
                        frame: f.frame,
                        u: f.u + du as f64,
                        v: f.v + dv as f64,
                        confidence: f.confidence,
                    })
                    .collect(),
            )
            .unwrap();
            prop_assert_eq!(
                extract_keyframes(&stream, &params).unwrap(),
                extract_keyframes(&shifted, &params).unwrap()
            );
        }

        #[test]
        fn candidate_set_grows_with_epsilon(stream in arb_stream(), params in arb_params()) {
            let wider = KeyframeParams { epsilon: params.epsilon * 2.0, ..params };
            let narrow_candidates: Vec<usize> = (0..stream.len())
                .filter(|&t| stationarity_score(&stream, t, params.half_window).unwrap() < params.epsilon)
                .collect();
            let wide_candidates: std::collections::BTreeSet<usize> = (0..stream.len())
                .filter(|&t| stationarity_score(&stream, t, wider.half_window).unwrap() < wider.epsilon)
                .collect();
            for t in narrow_candidates {
                prop_assert!(wide_candidates.contains(&t));
            }
        }
    }
}
