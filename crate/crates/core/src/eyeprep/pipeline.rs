//! Eye stream conditioning: blink validity classification, interpolation of
//! invalid blinks and saccade sweeps, pupil differencing, fixation-frame
//! filtering, and uniform temporal resampling.

use serde::{Deserialize, Serialize};

use crate::diffkernel::tensor::Tensor;
use crate::error::{Error, Result};
use crate::eyeprep::stream::{EventType, EyeRecord, RawEyeStream};

/// Blink durations inside [75, 425] ms are physiological; anything outside
/// is treated as a tracking artifact and corrected.
pub const BLINK_MIN_MS: f64 = 75.0;
pub const BLINK_MAX_MS: f64 = 425.0;

/// What counts as evidence that a record belongs to a blink. Hardware
/// dropouts (missing pupil) present identically to flagged blinks, so the
/// default takes the union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlinkEvidence {
    EventOnly,
    DropoutOnly,
    #[default]
    Union,
}

impl BlinkEvidence {
    fn matches(self, r: &EyeRecord) -> bool {
        let flagged = r.event == EventType::Blink;
        let dropout = r.pupil_mm.is_none();
        match self {
            BlinkEvidence::EventOnly => flagged,
            BlinkEvidence::DropoutOnly => dropout,
            BlinkEvidence::Union => flagged || dropout,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlinkInterval {
    pub start_ms: f64,
    pub end_ms: f64,
    pub valid: bool,
}

impl BlinkInterval {
    pub fn duration_ms(&self) -> f64 {
        self.end_ms - self.start_ms
    }

    pub fn contains(&self, t: f64) -> bool {
        (self.start_ms..=self.end_ms).contains(&t)
    }
}

/// Maximal runs of consecutive indices where `pred` holds.
fn runs(records: &[EyeRecord], pred: impl Fn(&EyeRecord) -> bool) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, r) in records.iter().enumerate() {
        match (pred(r), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, records.len() - 1));
    }
    out
}

pub fn detect_blinks(stream: &RawEyeStream) -> Vec<BlinkInterval> {
    detect_blinks_with(stream, BlinkEvidence::default())
}

pub fn detect_blinks_with(stream: &RawEyeStream, evidence: BlinkEvidence) -> Vec<BlinkInterval> {
    runs(&stream.records, |r| evidence.matches(r))
        .into_iter()
        .map(|(s, e)| {
            let start_ms = stream.records[s].timestamp_ms;
            let end_ms = stream.records[e].timestamp_ms;
            let dur = end_ms - start_ms;
            BlinkInterval {
                start_ms,
                end_ms,
                valid: (BLINK_MIN_MS..=BLINK_MAX_MS).contains(&dur),
            }
        })
        .collect()
}

fn in_any_invalid(t: f64, intervals: &[BlinkInterval]) -> bool {
    intervals.iter().any(|iv| !iv.valid && iv.contains(t))
}

fn lerp(t: f64, t1: f64, v1: f64, t2: f64, v2: f64) -> f64 {
    if t2 == t1 {
        v1
    } else {
        v1 + (v2 - v1) * (t - t1) / (t2 - t1)
    }
}

/// One scalar channel with per-record availability. Fills `targets` by
/// linear interpolation between the nearest anchors; intervals touching the
/// stream boundary take the nearest anchor's value.
fn interpolate_channel(
    records: &mut [EyeRecord],
    targets: &[usize],
    is_anchor: &dyn Fn(&EyeRecord) -> bool,
    get: &dyn Fn(&EyeRecord) -> Option<f64>,
    set: &mut dyn FnMut(&mut EyeRecord, f64),
) -> Result<()> {
    let anchors: Vec<usize> = (0..records.len())
        .filter(|&i| is_anchor(&records[i]) && get(&records[i]).is_some())
        .collect();
    if anchors.is_empty() {
        return Err(Error::UnrecoverableStream(
            "no valid records to anchor interpolation".into(),
        ));
    }
    for &i in targets {
        let t = records[i].timestamp_ms;
        let left = anchors.iter().rev().find(|&&a| a < i).copied();
        let right = anchors.iter().find(|&&a| a > i).copied();
        let value = match (left, right) {
            (Some(l), Some(r)) => lerp(
                t,
                records[l].timestamp_ms,
                get(&records[l]).unwrap(),
                records[r].timestamp_ms,
                get(&records[r]).unwrap(),
            ),
            (Some(l), None) => get(&records[l]).unwrap(),
            (None, Some(r)) => get(&records[r]).unwrap(),
            (None, None) => unreachable!("anchors is non-empty"),
        };
        set(&mut records[i], value);
    }
    Ok(())
}

/// Replace gaze, gaze direction, and pupil over each *invalid* blink
/// interval by linear interpolation between the nearest records outside all
/// invalid intervals. Valid blinks are left untouched.
pub fn correct_blinks(stream: &RawEyeStream, intervals: &[BlinkInterval]) -> Result<RawEyeStream> {
    let mut records = stream.records.clone();
    let targets: Vec<usize> = (0..records.len())
        .filter(|&i| in_any_invalid(records[i].timestamp_ms, intervals))
        .collect();
    if targets.is_empty() {
        return Ok(stream.clone());
    }
    if targets.len() == records.len() {
        return Err(Error::UnrecoverableStream(
            "every record falls inside an invalid blink interval".into(),
        ));
    }
    let outside = |r: &EyeRecord| !in_any_invalid(r.timestamp_ms, intervals);
    for ch in 0..2 {
        interpolate_channel(
            &mut records,
            &targets,
            &outside,
            &move |r| Some(r.gaze[ch]),
            &mut move |r, v| r.gaze[ch] = v,
        )?;
        interpolate_channel(
            &mut records,
            &targets,
            &outside,
            &move |r| Some(r.gaze_dir[ch]),
            &mut move |r, v| r.gaze_dir[ch] = v,
        )?;
    }
    // Pupil anchors additionally need a recorded pupil value.
    interpolate_channel(
        &mut records,
        &targets,
        &outside,
        &|r| r.pupil_mm,
        &mut |r, v| r.pupil_mm = Some(v),
    )?;
    RawEyeStream::new(records)
}

/// Linear interpolation of gaze/pupil across saccade runs, anchored on the
/// nearest flanking fixation records. Event labels are preserved.
pub fn correct_saccades(stream: &RawEyeStream) -> Result<RawEyeStream> {
    let mut records = stream.records.clone();
    let saccade_runs = runs(&records, |r| r.event == EventType::Saccade);
    if saccade_runs.is_empty() {
        return Ok(stream.clone());
    }
    if !records.iter().any(|r| r.event == EventType::Fixation) {
        // Nothing to anchor on; leave the stream as recorded.
        return Ok(stream.clone());
    }
    let targets: Vec<usize> = saccade_runs
        .iter()
        .flat_map(|&(s, e)| s..=e)
        .collect();
    let is_fixation = |r: &EyeRecord| r.event == EventType::Fixation;
    for ch in 0..2 {
        interpolate_channel(
            &mut records,
            &targets,
            &is_fixation,
            &move |r| Some(r.gaze[ch]),
            &mut move |r, v| r.gaze[ch] = v,
        )?;
        interpolate_channel(
            &mut records,
            &targets,
            &is_fixation,
            &move |r| Some(r.gaze_dir[ch]),
            &mut move |r, v| r.gaze_dir[ch] = v,
        )?;
    }
    interpolate_channel(
        &mut records,
        &targets,
        &is_fixation,
        &|r| r.pupil_mm,
        &mut |r, v| r.pupil_mm = Some(v),
    )?;
    RawEyeStream::new(records)
}

/// Fill any pupil samples still missing (e.g. dropouts inside valid blinks)
/// by linear interpolation between the nearest recorded values.
pub fn fill_missing_pupil(stream: &RawEyeStream) -> Result<RawEyeStream> {
    if !stream.has_missing_pupil() {
        return Ok(stream.clone());
    }
    let mut records = stream.records.clone();
    let targets: Vec<usize> = (0..records.len())
        .filter(|&i| records[i].pupil_mm.is_none())
        .collect();
    interpolate_channel(
        &mut records,
        &targets,
        &|_| true,
        &|r| r.pupil_mm,
        &mut |r, v| r.pupil_mm = Some(v),
    )
    .map_err(|_| Error::UnrecoverableStream("no pupil samples recorded at all".into()))?;
    RawEyeStream::new(records)
}

/// Replace the model-facing pupil signal with its first difference:
/// `d_t = pupil_t - pupil_{t-1}`, `d_0 = 0`. The recorded diameter stays in
/// `pupil_mm`; the difference goes to `pupil_fluct`.
pub fn pupil_fluctuation(stream: &RawEyeStream) -> Result<RawEyeStream> {
    if stream.has_missing_pupil() {
        return Err(Error::Contract(
            "pupil_fluctuation requires a stream with no missing pupil values".into(),
        ));
    }
    let mut records = stream.records.clone();
    let mut prev: Option<f64> = None;
    for r in &mut records {
        let p = r.pupil_mm.unwrap();
        r.pupil_fluct = Some(match prev {
            None => 0.0,
            Some(q) => p - q,
        });
        prev = Some(p);
    }
    RawEyeStream::new(records)
}

/// A timestamped fixation-map frame (feature payload is opaque here).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationFrame {
    pub timestamp_ms: f64,
    pub features: Vec<f64>,
}

/// Drop frames whose timestamps fall inside invalid blink intervals.
pub fn filter_fixations(
    frames: Vec<FixationFrame>,
    intervals: &[BlinkInterval],
) -> Vec<FixationFrame> {
    let kept: Vec<FixationFrame> = frames
        .into_iter()
        .filter(|f| !in_any_invalid(f.timestamp_ms, intervals))
        .collect();
    if kept.is_empty() {
        eprintln!("warning: all fixation frames fell inside invalid intervals");
    }
    kept
}

/// Number of channels in the resampled representation.
pub const CHANNELS: usize = 8;

/// Resample to `target_len` instants evenly spaced in time, linearly
/// interpolating each channel. Channel order: gaze x/y, gaze direction x/y,
/// pupil (fluctuation once that stage has run, else diameter), eye position
/// x/y/z. Sample instants step by `span * n / ((n-1) * target_len)` so that
/// a uniform stream resampled to its own length is the identity and
/// halving a uniform stream picks every other record.
pub fn resample_uniform(stream: &RawEyeStream, target_len: usize) -> Result<Tensor> {
    if target_len < 2 {
        return Err(Error::InvalidParameter {
            name: "target_len",
            reason: format!("need at least 2 output rows, got {target_len}"),
        });
    }
    let n = stream.len();
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "stream",
            reason: format!("need at least 2 records to resample, got {n}"),
        });
    }
    if stream.has_missing_pupil() {
        return Err(Error::Contract(
            "resample_uniform requires a stream with no missing pupil values".into(),
        ));
    }
    let recs = &stream.records;
    let t0 = recs[0].timestamp_ms;
    let t_end = recs[n - 1].timestamp_ms;
    let step = (t_end - t0) * n as f64 / ((n - 1) as f64 * target_len as f64);

    let channel = |r: &EyeRecord, c: usize| -> f64 {
        match c {
            0 => r.gaze[0],
            1 => r.gaze[1],
            2 => r.gaze_dir[0],
            3 => r.gaze_dir[1],
            4 => r.pupil_fluct.unwrap_or_else(|| r.pupil_mm.unwrap()),
            5 => r.eye_pos[0],
            6 => r.eye_pos[1],
            _ => r.eye_pos[2],
        }
    };

    let mut data = Vec::with_capacity(target_len * CHANNELS);
    let mut cursor = 0usize;
    for i in 0..target_len {
        let t = (t0 + i as f64 * step).min(t_end);
        while cursor + 1 < n && recs[cursor + 1].timestamp_ms < t {
            cursor += 1;
        }
        let (l, r) = if recs[cursor].timestamp_ms >= t {
            (cursor, cursor)
        } else {
            (cursor, (cursor + 1).min(n - 1))
        };
        for c in 0..CHANNELS {
            let v = lerp(
                t,
                recs[l].timestamp_ms,
                channel(&recs[l], c),
                recs[r].timestamp_ms,
                channel(&recs[r], c),
            );
            data.push(v);
        }
    }
    Tensor::new(vec![target_len, CHANNELS], data)
}

/// Summary of what the conditioning pipeline did; serialized as the JSON
/// report next to the cleaned CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub record_count: usize,
    pub blink_intervals: Vec<BlinkInterval>,
    pub invalid_blinks_corrected: usize,
    pub saccade_runs_corrected: usize,
    pub pupil_samples_filled: usize,
}

/// Full conditioning pass: blink detection and correction, saccade
/// correction, residual pupil fill, pupil differencing.
pub fn preprocess_stream(raw: &RawEyeStream) -> Result<(RawEyeStream, PreprocessReport)> {
    if raw.is_empty() {
        return Err(Error::InvalidParameter {
            name: "stream",
            reason: "empty stream".into(),
        });
    }
    let intervals = detect_blinks(raw);
    let corrected = correct_blinks(raw, &intervals)?;
    let swept = correct_saccades(&corrected)?;
    let missing_before = swept.records.iter().filter(|r| r.pupil_mm.is_none()).count();
    let filled = fill_missing_pupil(&swept)?;
    let fluct = pupil_fluctuation(&filled)?;
    let report = PreprocessReport {
        record_count: raw.len(),
        invalid_blinks_corrected: intervals.iter().filter(|iv| !iv.valid).count(),
        saccade_runs_corrected: runs(&raw.records, |r| r.event == EventType::Saccade).len(),
        pupil_samples_filled: missing_before,
        blink_intervals: intervals,
    };
    Ok((fluct, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, pupil: Option<f64>, event: EventType) -> EyeRecord {
        EyeRecord {
            timestamp_ms: t,
            gaze: [t * 0.01, t * 0.02],
            gaze_dir: [0.1, 0.2],
            pupil_mm: pupil,
            eye_pos: [1.0, 2.0, 3.0],
            event,
            pupil_fluct: None,
        }
    }

    fn stream(records: Vec<EyeRecord>) -> RawEyeStream {
        RawEyeStream::new(records).unwrap()
    }

    /// Blink run spanning `dur` ms between two fixation records.
    fn blink_fixture(dur: f64) -> RawEyeStream {
        let mut records = vec![rec(0.0, Some(4.0), EventType::Fixation)];
        let steps = 5;
        for i in 0..=steps {
            records.push(rec(
                10.0 + dur * i as f64 / steps as f64,
                None,
                EventType::Blink,
            ));
        }
        records.push(rec(10.0 + dur + 10.0, Some(5.0), EventType::Fixation));
        stream(records)
    }

    #[test]
    fn blink_validity_boundaries() {
        for (dur, valid) in [(50.0, false), (200.0, true), (500.0, false)] {
            let s = blink_fixture(dur);
            let intervals = detect_blinks(&s);
            assert_eq!(intervals.len(), 1, "duration {dur}");
            assert!((intervals[0].duration_ms() - dur).abs() < 1e-9);
            assert_eq!(intervals[0].valid, valid, "duration {dur}");
        }
    }

    #[test]
    fn exact_bounds_are_valid() {
        for dur in [75.0, 425.0] {
            let s = blink_fixture(dur);
            assert!(detect_blinks(&s)[0].valid, "duration {dur}");
        }
    }

    #[test]
    fn missing_pupil_counts_as_blink_evidence_by_default() {
        let s = stream(vec![
            rec(0.0, Some(4.0), EventType::Fixation),
            rec(4.0, None, EventType::Fixation),
            rec(8.0, Some(4.1), EventType::Fixation),
        ]);
        assert_eq!(detect_blinks(&s).len(), 1);
        assert!(detect_blinks_with(&s, BlinkEvidence::EventOnly).is_empty());
    }

    #[test]
    fn invalid_blink_interpolates_midpoint() {
        // pupil 4.0, a 50 ms missing run, pupil 5.0; midpoint record -> 4.5
        let s = stream(vec![
            rec(0.0, Some(4.0), EventType::Fixation),
            rec(25.0, None, EventType::Blink),
            rec(50.0, Some(5.0), EventType::Fixation),
        ]);
        let intervals = detect_blinks(&s);
        assert!(!intervals[0].valid);
        let out = correct_blinks(&s, &intervals).unwrap();
        assert!((out.records[1].pupil_mm.unwrap() - 4.5).abs() < 1e-12);
        // gaze interpolated too
        let expect = lerp(25.0, 0.0, 0.0, 50.0, 0.5);
        assert!((out.records[1].gaze[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn valid_blink_left_untouched() {
        let s = blink_fixture(200.0);
        let mut with_pupil = s.clone();
        // a valid blink whose samples were still recorded by the hardware
        for r in &mut with_pupil.records {
            if r.event == EventType::Blink {
                r.pupil_mm = Some(3.0);
            }
        }
        let intervals = detect_blinks(&with_pupil);
        assert!(intervals[0].valid);
        let out = correct_blinks(&with_pupil, &intervals).unwrap();
        assert_eq!(out, with_pupil);
    }

    #[test]
    fn boundary_blink_takes_nearest_valid_value() {
        let s = stream(vec![
            rec(0.0, None, EventType::Blink),
            rec(10.0, None, EventType::Blink),
            rec(20.0, Some(4.2), EventType::Fixation),
            rec(30.0, Some(4.4), EventType::Fixation),
        ]);
        let intervals = detect_blinks(&s);
        assert!(!intervals[0].valid); // 10 ms run
        let out = correct_blinks(&s, &intervals).unwrap();
        assert_eq!(out.records[0].pupil_mm, Some(4.2));
        assert_eq!(out.records[1].pupil_mm, Some(4.2));
        assert_eq!(out.records[0].gaze, out.records[2].gaze);
    }

    #[test]
    fn fully_invalid_stream_is_unrecoverable() {
        let s = stream(vec![
            rec(0.0, None, EventType::Blink),
            rec(5.0, None, EventType::Blink),
        ]);
        let intervals = detect_blinks(&s);
        assert!(matches!(
            correct_blinks(&s, &intervals),
            Err(Error::UnrecoverableStream(_))
        ));
    }

    #[test]
    fn blink_correction_is_idempotent() {
        let s = blink_fixture(50.0);
        let intervals = detect_blinks(&s);
        let once = correct_blinks(&s, &intervals).unwrap();
        let twice = correct_blinks(&once, &detect_blinks(&once)).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn single_saccade_record_interpolates_between_fixations() {
        let s = stream(vec![
            rec(0.0, Some(4.0), EventType::Fixation),
            rec(10.0, Some(9.9), EventType::Saccade),
            rec(20.0, Some(6.0), EventType::Fixation),
        ]);
        let out = correct_saccades(&s).unwrap();
        assert!((out.records[1].pupil_mm.unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(out.records[1].event, EventType::Saccade);
    }

    #[test]
    fn no_saccades_is_identity() {
        let s = stream(vec![
            rec(0.0, Some(4.0), EventType::Fixation),
            rec(10.0, Some(4.5), EventType::Fixation),
        ]);
        assert_eq!(correct_saccades(&s).unwrap(), s);
    }

    #[test]
    fn two_saccade_records_at_thirds() {
        // saccades at 1/3 and 2/3 of the 4.0 -> 6.0 pupil gap
        let s = stream(vec![
            rec(0.0, Some(4.0), EventType::Fixation),
            rec(10.0, Some(0.0), EventType::Saccade),
            rec(20.0, Some(0.0), EventType::Saccade),
            rec(30.0, Some(6.0), EventType::Fixation),
        ]);
        let out = correct_saccades(&s).unwrap();
        assert!((out.records[1].pupil_mm.unwrap() - (4.0 + 2.0 / 3.0)).abs() < 1e-9);
        assert!((out.records[2].pupil_mm.unwrap() - (4.0 + 4.0 / 3.0)).abs() < 1e-9);
    }

    #[test]
    fn fluctuation_of_constant_pupil_is_zero() {
        let s = stream(vec![
            rec(0.0, Some(4.0), EventType::Fixation),
            rec(10.0, Some(4.0), EventType::Fixation),
            rec(20.0, Some(4.0), EventType::Fixation),
        ]);
        let out = pupil_fluctuation(&s).unwrap();
        assert!(out.records.iter().all(|r| r.pupil_fluct == Some(0.0)));
    }

    #[test]
    fn fluctuation_hand_difference() {
        let s = stream(vec![
            rec(0.0, Some(4.0), EventType::Fixation),
            rec(10.0, Some(4.2), EventType::Fixation),
            rec(20.0, Some(4.1), EventType::Fixation),
        ]);
        let out = pupil_fluctuation(&s).unwrap();
        let d: Vec<f64> = out.records.iter().map(|r| r.pupil_fluct.unwrap()).collect();
        assert!((d[0] - 0.0).abs() < 1e-15);
        assert!((d[1] - 0.2).abs() < 1e-12);
        assert!((d[2] + 0.1).abs() < 1e-12);
    }

    #[test]
    fn fluctuation_telescopes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let n = rng.gen_range(2..40);
            let records: Vec<EyeRecord> = (0..n)
                .map(|i| rec(i as f64 * 4.0, Some(rng.gen_range(2.0..8.0)), EventType::Fixation))
                .collect();
            let s = stream(records);
            let out = pupil_fluctuation(&s).unwrap();
            let sum: f64 = out.records.iter().map(|r| r.pupil_fluct.unwrap()).sum();
            let expect = s.records.last().unwrap().pupil_mm.unwrap()
                - s.records[0].pupil_mm.unwrap();
            assert!((sum - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn fixation_filter_drops_only_invalid_frames() {
        let frames: Vec<FixationFrame> = (0..100)
            .map(|i| FixationFrame {
                timestamp_ms: i as f64 * 10.0,
                features: vec![i as f64],
            })
            .collect();
        assert_eq!(filter_fixations(frames.clone(), &[]).len(), 100);

        let one = vec![BlinkInterval {
            start_ms: 500.0,
            end_ms: 505.0,
            valid: false,
        }];
        let kept = filter_fixations(frames.clone(), &one);
        assert_eq!(kept.len(), 99);
        assert!(kept.iter().all(|f| f.timestamp_ms != 500.0));

        // three invalid intervals covering 10 of the 100 frames
        let three = vec![
            BlinkInterval { start_ms: 0.0, end_ms: 25.0, valid: false },
            BlinkInterval { start_ms: 300.0, end_ms: 330.0, valid: false },
            BlinkInterval { start_ms: 700.0, end_ms: 725.0, valid: false },
        ];
        // frames at 0,10,20 | 300,310,320,330 | 700,710,720 = 10 frames
        let kept = filter_fixations(frames, &three);
        assert_eq!(kept.len(), 90);
    }

    #[test]
    fn valid_intervals_do_not_drop_frames() {
        let frames: Vec<FixationFrame> = (0..10)
            .map(|i| FixationFrame {
                timestamp_ms: i as f64,
                features: vec![],
            })
            .collect();
        let valid = vec![BlinkInterval {
            start_ms: 0.0,
            end_ms: 9.0,
            valid: true,
        }];
        assert_eq!(filter_fixations(frames, &valid).len(), 10);
    }

    #[test]
    fn resample_identity_on_uniform_stream() {
        let s = stream(
            (0..16)
                .map(|i| rec(i as f64 * 4.0, Some(4.0 + i as f64 * 0.1), EventType::Fixation))
                .collect(),
        );
        let t = resample_uniform(&s, 16).unwrap();
        for (i, r) in s.records.iter().enumerate() {
            assert!((t.at(i, 0) - r.gaze[0]).abs() < 1e-12);
            assert!((t.at(i, 4) - r.pupil_mm.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_half_picks_every_other_record() {
        let s = stream(
            (0..64)
                .map(|i| rec(i as f64, Some(i as f64), EventType::Fixation))
                .collect(),
        );
        let t = resample_uniform(&s, 32).unwrap();
        for i in 0..32 {
            assert!((t.at(i, 4) - (2 * i) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_preserves_linear_ramp() {
        // non-uniform timestamps, channel linear in time
        let times = [0.0, 3.0, 4.0, 9.0, 11.0, 20.0, 23.0, 31.0];
        let s = stream(
            times
                .iter()
                .map(|&t| {
                    let mut r = rec(t, Some(2.0 + 0.5 * t), EventType::Fixation);
                    r.gaze = [1.0 + 2.0 * t, -3.0 * t];
                    r
                })
                .collect(),
        );
        for len in [2, 5, 8, 13, 64] {
            let t = resample_uniform(&s, len).unwrap();
            let step = 31.0 * 8.0 / (7.0 * len as f64);
            for i in 0..len {
                let at = (i as f64 * step).min(31.0);
                assert!((t.at(i, 0) - (1.0 + 2.0 * at)).abs() < 1e-9, "len {len} i {i}");
                assert!((t.at(i, 4) - (2.0 + 0.5 * at)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn resample_rejects_short_inputs() {
        let s = stream(vec![rec(0.0, Some(4.0), EventType::Fixation)]);
        assert!(resample_uniform(&s, 8).is_err());
        let s2 = blink_fixture(200.0);
        assert!(resample_uniform(&s2, 1).is_err());
    }

    #[test]
    fn full_pipeline_leaves_no_missing_values_and_monotone_time() {
        let mut records = Vec::new();
        let mut t = 0.0;
        for i in 0..200 {
            let event = match i % 37 {
                0..=2 => EventType::Saccade,
                10..=12 => EventType::Blink,
                _ => EventType::Fixation,
            };
            let pupil = if i % 23 == 0 { None } else { Some(4.0 + (i as f64 * 0.37).sin()) };
            records.push(rec(t, pupil, event));
            t += 4.0;
        }
        let raw = stream(records);
        let (clean, report) = preprocess_stream(&raw).unwrap();
        assert!(!clean.has_missing_pupil());
        assert!(clean.records.iter().all(|r| r.pupil_fluct.is_some()));
        assert!(clean
            .records
            .windows(2)
            .all(|w| w[1].timestamp_ms > w[0].timestamp_ms));
        assert_eq!(clean.len(), raw.len());
        assert!(report.saccade_runs_corrected > 0);
        let resampled = resample_uniform(&clean, 32).unwrap();
        assert!(resampled.all_finite());
        assert_eq!(resampled.shape(), &[32, CHANNELS]);
    }
}
