//! MIREX-style ".lab" annotation files and frame-level targets.

use std::path::Path;

use crate::error::Error;
use crate::Result;

use super::label::{reduce_label, ChordLabel};

/// One annotated time span with the raw label text preserved verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub raw_label: String,
}

/// Validated, time-sorted, non-overlapping annotation segments.
#[derive(Debug, Clone, Default)]
pub struct AnnotationTrack {
    segments: Vec<Segment>,
}

impl AnnotationTrack {
    /// Sorts by start time and validates the segment list.
    pub fn new(mut segments: Vec<Segment>) -> Result<AnnotationTrack> {
        segments.sort_by(|a, b| a.start.partial_cmp(&b.start).unwrap());
        for seg in &segments {
            if !(seg.start >= 0.0 && seg.start < seg.end) {
                return Err(Error::InvalidParam(format!(
                    "segment [{}, {}) must satisfy 0 <= start < end",
                    seg.start, seg.end
                )));
            }
        }
        for pair in segments.windows(2) {
            if pair[1].start < pair[0].end - 1e-9 {
                return Err(Error::InvalidParam(format!(
                    "segments overlap: [{}, {}) and [{}, {})",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                )));
            }
        }
        Ok(AnnotationTrack { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn end_time(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }
}

/// Parses whitespace-separated `start end label` lines. Out-of-order lines
/// are sorted; malformed lines and overlaps are reported with their line
/// number.
pub fn parse_lab_str(text: &str, origin: &str) -> Result<AnnotationTrack> {
    let mut segments = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let malformed = |reason: &str| Error::MalformedAnnotation {
            path: origin.to_string(),
            line: lineno + 1,
            reason: reason.to_string(),
        };
        let start: f64 = fields
            .next()
            .ok_or_else(|| malformed("missing start time"))?
            .parse()
            .map_err(|_| malformed("unparseable start time"))?;
        let end: f64 = fields
            .next()
            .ok_or_else(|| malformed("missing end time"))?
            .parse()
            .map_err(|_| malformed("unparseable end time"))?;
        let raw_label = fields.next().ok_or_else(|| malformed("missing label"))?.to_string();
        if end <= start {
            return Err(malformed("end before start"));
        }
        segments.push(Segment { start, end, raw_label });
    }
    AnnotationTrack::new(segments).map_err(|e| match e {
        Error::InvalidParam(reason) => Error::MalformedAnnotation {
            path: origin.to_string(),
            line: 0,
            reason,
        },
        other => other,
    })
}

pub fn parse_lab(path: &Path) -> Result<AnnotationTrack> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_lab_str(&text, &path.display().to_string())
}

/// Writes `start end label` lines.
pub fn write_lab(path: &Path, segments: &[(f64, f64, String)]) -> Result<()> {
    let mut text = String::new();
    for (start, end, label) in segments {
        text.push_str(&format!("{start:.6} {end:.6} {label}\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Frame-level chord targets: frame `i` takes the label of the segment with
/// the largest overlap with the window `[i/fr − 0.5/fr, i/fr + 0.5/fr]`;
/// frames not covered by any segment become no-chord.
pub fn frames_from_annotations(track: &AnnotationTrack, frame_rate: f64, num_frames: usize) -> Result<Vec<ChordLabel>> {
    if frame_rate <= 0.0 {
        return Err(Error::InvalidParam("frame rate must be positive".into()));
    }
    // reduce each raw label once
    let reduced: Vec<ChordLabel> = track
        .segments()
        .iter()
        .map(|s| reduce_label(&s.raw_label))
        .collect::<Result<_>>()?;

    let half = 0.5 / frame_rate;
    let mut labels = Vec::with_capacity(num_frames);
    let mut cursor = 0usize;
    for frame in 0..num_frames {
        let center = frame as f64 / frame_rate;
        let (lo, hi) = (center - half, center + half);
        while cursor < track.segments().len() && track.segments()[cursor].end <= lo {
            cursor += 1;
        }
        let mut best = (0.0f64, ChordLabel::NO_CHORD);
        for (seg, &label) in track.segments()[cursor..].iter().zip(&reduced[cursor..]) {
            if seg.start >= hi {
                break;
            }
            let overlap = seg.end.min(hi) - seg.start.max(lo);
            if overlap > best.0 {
                best = (overlap, label);
            }
        }
        labels.push(best.1);
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_segment_file_parses() {
        let track = parse_lab_str("0.0 1.0 C:maj\n1.0 2.0 N\n", "test").unwrap();
        assert_eq!(track.segments().len(), 2);
        assert_eq!(track.segments()[1].raw_label, "N");
        assert_eq!(track.end_time(), 2.0);
    }

    #[test]
    fn out_of_order_lines_are_sorted() {
        let track = parse_lab_str("1.0 2.0 A:min\n0.0 1.0 C\n", "test").unwrap();
        assert_eq!(track.segments()[0].raw_label, "C");
        assert_eq!(track.segments()[1].raw_label, "A:min");
    }

    #[test]
    fn end_before_start_is_rejected_with_line_number() {
        let err = parse_lab_str("0.0 1.0 C\n1.0 0.5 D\n", "test").unwrap_err();
        match err {
            Error::MalformedAnnotation { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn overlapping_segments_are_rejected() {
        assert!(parse_lab_str("0.0 1.5 C\n1.0 2.0 D\n", "test").is_err());
    }

    #[test]
    fn single_segment_covers_all_frames() {
        let track = parse_lab_str("0.0 10.0 G:maj\n", "test").unwrap();
        let labels = frames_from_annotations(&track, 10.0, 100).unwrap();
        assert_eq!(labels.len(), 100);
        assert!(labels.iter().all(|&l| l == ChordLabel::major(7)));
    }

    #[test]
    fn majority_overlap_decides_boundary_frames() {
        // boundary at 1.03 s: frame 10 covers [0.95, 1.05] → 80% in the first
        // segment; boundary at 0.97 s puts 70% in the second segment
        let track = parse_lab_str("0.0 0.97 C:maj\n0.97 2.0 A:min\n", "test").unwrap();
        let labels = frames_from_annotations(&track, 10.0, 20).unwrap();
        assert_eq!(labels[9], ChordLabel::major(0)); // [0.85, 0.95] fully inside
        assert_eq!(labels[10], ChordLabel::minor(9)); // 30%/70% split
    }

    #[test]
    fn uncovered_frames_are_no_chord() {
        let track = parse_lab_str("0.0 0.5 C\n", "test").unwrap();
        let labels = frames_from_annotations(&track, 10.0, 10).unwrap();
        assert_eq!(labels[0], ChordLabel::major(0));
        assert!(labels[7..].iter().all(|&l| l == ChordLabel::NO_CHORD));
        let empty = AnnotationTrack::default();
        let labels = frames_from_annotations(&empty, 10.0, 5).unwrap();
        assert!(labels.iter().all(|&l| l == ChordLabel::NO_CHORD));
    }
}
