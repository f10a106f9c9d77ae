//! Weighted chord symbol recall and segment utilities.

use crate::data::ChordLabel;
use crate::error::Error;
use crate::Result;

/// Non-overlapping, sorted, labelled time spans.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub start: f64,
    pub end: f64,
    pub label: ChordLabel,
}

#[derive(Debug, Clone, Default)]
pub struct LabelSegments {
    segments: Vec<LabeledSegment>,
}

impl LabelSegments {
    pub fn new(mut segments: Vec<LabeledSegment>) -> Result<LabelSegments> {
        segments.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
        for seg in &segments {
            if seg.start >= seg.end {
                return Err(Error::InvalidParam(format!(
                    "segment [{}, {}) must have start < end",
                    seg.start, seg.end
                )));
            }
        }
        for pair in segments.windows(2) {
            if pair[1].start < pair[0].end - 1e-9 {
                return Err(Error::InvalidParam("label segments overlap".into()));
            }
        }
        Ok(LabelSegments { segments })
    }

    pub fn segments(&self) -> &[LabeledSegment] {
        &self.segments
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// `(start, end, label)` rows in annotation-file spelling.
    pub fn to_lab_rows(&self) -> Vec<(f64, f64, String)> {
        self.segments.iter().map(|s| (s.start, s.end, s.label.to_string())).collect()
    }
}

/// Merges maximal runs of equal frame labels into segments. Interior
/// boundaries sit half a frame around the run edges; the first segment
/// starts at 0 and the last ends at `N/frame_rate`, so the total duration is
/// exactly `N/frame_rate` and converting back through frame targets is the
/// identity.
pub fn segments_from_frames(labels: &[ChordLabel], frame_rate: f64) -> Result<LabelSegments> {
    if frame_rate <= 0.0 {
        return Err(Error::InvalidParam("frame rate must be positive".into()));
    }
    if labels.is_empty() {
        return Ok(LabelSegments::default());
    }
    let n = labels.len();
    let boundary = |frame: usize| -> f64 {
        if frame == 0 {
            0.0
        } else if frame == n {
            n as f64 / frame_rate
        } else {
            (frame as f64 - 0.5) / frame_rate
        }
    };
    let mut segments = Vec::new();
    let mut run_start = 0usize;
    for frame in 1..=n {
        if frame == n || labels[frame] != labels[run_start] {
            segments.push(LabeledSegment {
                start: boundary(run_start),
                end: boundary(frame),
                label: labels[run_start],
            });
            run_start = frame;
        }
    }
    LabelSegments::new(segments)
}

/// Reduces an annotation track's raw labels into the 25-class alphabet.
pub fn segments_from_annotations(track: &crate::data::AnnotationTrack) -> Result<LabelSegments> {
    let segments = track
        .segments()
        .iter()
        .map(|s| {
            crate::data::reduce_label(&s.raw_label).map(|label| LabeledSegment {
                start: s.start,
                end: s.end,
                label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabelSegments::new(segments)
}

/// One song's recall bookkeeping: `t_a` is the annotated major/minor
/// duration, `t_c` the correctly predicted duration within it.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WcsrScore {
    pub t_a: f64,
    pub t_c: f64,
}

impl WcsrScore {
    /// `t_c / t_a`, or `None` when no major/minor time is annotated (an
    /// explicit "undefined" rather than 0/0).
    pub fn recall(&self) -> Option<f64> {
        if self.t_a > 0.0 {
            Some(self.t_c / self.t_a)
        } else {
            None
        }
    }
}

/// Weighted chord symbol recall of one song: exact interval intersection on
/// the merged boundary timeline, clipped to the annotation extent. Only
/// major/minor annotated time counts toward `t_a`; no-chord spans are
/// outside the support and neither reward nor penalise.
pub fn wcsr(predictions: &LabelSegments, annotations: &LabelSegments) -> WcsrScore {
    let horizon = annotations.end_time();
    let mut breakpoints: Vec<f64> = annotations
        .segments()
        .iter()
        .chain(predictions.segments())
        .flat_map(|s| [s.start, s.end])
        .filter(|&t| t >= 0.0 && t <= horizon)
        .collect();
    breakpoints.push(0.0);
    breakpoints.push(horizon);
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breakpoints.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let label_at = |segments: &LabelSegments, t: f64| -> Option<ChordLabel> {
        segments
            .segments()
            .iter()
            .find(|s| s.start <= t && t < s.end)
            .map(|s| s.label)
    };

    let mut score = WcsrScore::default();
    for window in breakpoints.windows(2) {
        let (lo, hi) = (window[0], window[1]);
        if hi <= lo {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let annotated = match label_at(annotations, mid) {
            Some(label) if !label.is_no_chord() => label,
            _ => continue,
        };
        score.t_a += hi - lo;
        if label_at(predictions, mid) == Some(annotated) {
            score.t_c += hi - lo;
        }
    }
    score
}

/// Corpus-level recall: `Σ t_c / Σ t_a` over songs (duration-weighted).
pub fn corpus_wcsr(per_song: &[WcsrScore]) -> Result<f64> {
    let total = per_song.iter().fold(WcsrScore::default(), |acc, s| WcsrScore {
        t_a: acc.t_a + s.t_a,
        t_c: acc.t_c + s.t_c,
    });
    total
        .recall()
        .ok_or(Error::UndefinedMetric("corpus recall needs at least one annotated major/minor span"))
}
