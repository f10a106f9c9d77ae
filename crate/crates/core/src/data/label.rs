//! The 25-class chord alphabet and reduction of textual chord symbols.

use std::fmt;

use crate::error::Error;
use crate::Result;

/// 12 major classes (indices 0–11, chromatic from C), 12 minor classes
/// (12–23, chromatic from c) and a no-chord class (24).
pub const NUM_CLASSES: usize = 25;

pub const PITCH_CLASS_NAMES: [&str; 12] = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"];

/// One element of the reduced chord alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChordLabel(u8);

impl ChordLabel {
    pub const NO_CHORD: ChordLabel = ChordLabel(24);

    pub fn major(pitch_class: u8) -> ChordLabel {
        assert!(pitch_class < 12);
        ChordLabel(pitch_class)
    }

    pub fn minor(pitch_class: u8) -> ChordLabel {
        assert!(pitch_class < 12);
        ChordLabel(12 + pitch_class)
    }

    pub fn from_index(index: usize) -> Result<ChordLabel> {
        if index < NUM_CLASSES {
            Ok(ChordLabel(index as u8))
        } else {
            Err(Error::InvalidParam(format!("chord class index {index} out of range")))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_major(self) -> bool {
        self.0 < 12
    }

    pub fn is_minor(self) -> bool {
        (12..24).contains(&self.0)
    }

    pub fn is_no_chord(self) -> bool {
        self.0 == 24
    }

    /// Root pitch class for major/minor chords, `None` for no-chord.
    pub fn root(self) -> Option<u8> {
        match self.0 {
            0..=11 => Some(self.0),
            12..=23 => Some(self.0 - 12),
            _ => None,
        }
    }

    /// Transposes major/minor chords by `semitones` (mod 12); no-chord is
    /// fixed.
    pub fn transposed(self, semitones: i32) -> ChordLabel {
        match self.root() {
            None => self,
            Some(root) => {
                let new_root = (root as i32 + semitones).rem_euclid(12) as u8;
                if self.is_major() {
                    ChordLabel::major(new_root)
                } else {
                    ChordLabel::minor(new_root)
                }
            }
        }
    }

    pub fn all() -> impl Iterator<Item = ChordLabel> {
        (0..NUM_CLASSES).map(|i| ChordLabel(i as u8))
    }
}

impl fmt::Display for ChordLabel {
    /// Canonical annotation spelling: `C:maj`, `C:min` or `N`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.root() {
            None => write!(f, "N"),
            Some(root) => {
                let quality = if self.is_major() { "maj" } else { "min" };
                write!(f, "{}:{}", PITCH_CLASS_NAMES[root as usize], quality)
            }
        }
    }
}

/// Outcome of reducing a raw chord symbol, keeping track of qualities that
/// fall outside the major/minor alphabet (suspensions, power chords, unknown
/// shorthands). Those reduce to no-chord but are reported so callers can log
/// them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Mapped(ChordLabel),
    /// Parsed fine, but the quality has neither a major nor a minor third.
    Unmappable,
}

impl Reduction {
    pub fn label(self) -> ChordLabel {
        match self {
            Reduction::Mapped(label) => label,
            Reduction::Unmappable => ChordLabel::NO_CHORD,
        }
    }
}

/// Reduces a chord symbol in common `root[:quality][/bass]` syntax (or
/// `N`/`X`) to the 25-class alphabet: qualities containing a major third map
/// to major, ones containing a minor third to minor, everything else to
/// no-chord.
pub fn reduce_label(raw: &str) -> Result<ChordLabel> {
    reduce_label_checked(raw).map(Reduction::label)
}

pub fn reduce_label_checked(raw: &str) -> Result<Reduction> {
    let symbol = raw.trim();
    if symbol.is_empty() {
        return Err(Error::UnparseableLabel(raw.to_string()));
    }
    if symbol == "N" || symbol == "X" {
        return Ok(Reduction::Mapped(ChordLabel::NO_CHORD));
    }

    // strip the bass degree; it does not affect the quality reduction
    let without_bass = symbol.split('/').next().unwrap();
    let (root_text, quality_text) = match without_bass.split_once(':') {
        Some((r, q)) => (r, q),
        None => (without_bass, ""),
    };
    let root = parse_pitch_class(root_text).ok_or_else(|| Error::UnparseableLabel(raw.to_string()))?;
    let intervals = quality_intervals(quality_text).ok_or_else(|| Error::UnparseableLabel(raw.to_string()))?;

    if intervals.contains(&4) {
        Ok(Reduction::Mapped(ChordLabel::major(root)))
    } else if intervals.contains(&3) {
        Ok(Reduction::Mapped(ChordLabel::minor(root)))
    } else {
        Ok(Reduction::Unmappable)
    }
}

/// `A`–`G` with any number of `#`/`b` modifiers, resolved to a pitch class.
fn parse_pitch_class(text: &str) -> Option<u8> {
    let mut chars = text.chars();
    let natural = match chars.next()? {
        'C' => 0i32,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    };
    let mut pc = natural;
    for modifier in chars {
        match modifier {
            '#' => pc += 1,
            'b' => pc -= 1,
            _ => return None,
        }
    }
    Some(pc.rem_euclid(12) as u8)
}

/// Component intervals (semitones above the root, mod 12) of a quality given
/// as `shorthand`, `shorthand(degrees)` or `(degrees)`. Returns `None` for
/// unknown shorthands or malformed degree lists.
fn quality_intervals(quality: &str) -> Option<Vec<u8>> {
    let (shorthand, degrees) = match quality.split_once('(') {
        Some((s, rest)) => {
            let inner = rest.strip_suffix(')')?;
            (s, Some(inner))
        }
        None => (quality, None),
    };

    let mut intervals: Vec<u8> = if shorthand.is_empty() && degrees.is_some() {
        vec![0]
    } else {
        shorthand_intervals(shorthand)?.to_vec()
    };

    if let Some(list) = degrees {
        for entry in list.split(',') {
            let entry = entry.trim();
            if entry.is_empty() {
                return None;
            }
            if let Some(omitted) = entry.strip_prefix('*') {
                let semis = degree_semitones(omitted)?;
                intervals.retain(|&v| v != semis);
            } else {
                intervals.push(degree_semitones(entry)?);
            }
        }
    }
    intervals.sort_unstable();
    intervals.dedup();
    Some(intervals)
}

/// Shorthand table of the common chord syntax.
fn shorthand_intervals(shorthand: &str) -> Option<&'static [u8]> {
    Some(match shorthand {
        // a bare root means a major triad
        "" | "maj" => &[0, 4, 7],
        "min" => &[0, 3, 7],
        "dim" => &[0, 3, 6],
        "aug" => &[0, 4, 8],
        "maj7" => &[0, 4, 7, 11],
        "min7" => &[0, 3, 7, 10],
        "7" => &[0, 4, 7, 10],
        "dim7" => &[0, 3, 6, 9],
        "hdim7" => &[0, 3, 6, 10],
        "minmaj7" => &[0, 3, 7, 11],
        "maj6" | "6" => &[0, 4, 7, 9],
        "min6" => &[0, 3, 7, 9],
        "9" => &[0, 4, 7, 10, 2],
        "maj9" => &[0, 4, 7, 11, 2],
        "min9" => &[0, 3, 7, 10, 2],
        "11" => &[0, 4, 7, 10, 2, 5],
        "min11" => &[0, 3, 7, 10, 2, 5],
        "13" => &[0, 4, 7, 10, 2, 5, 9],
        "maj13" => &[0, 4, 7, 11, 2, 5, 9],
        "min13" => &[0, 3, 7, 10, 2, 5, 9],
        "sus2" => &[0, 2, 7],
        "sus4" => &[0, 5, 7],
        // power chord and bare root
        "5" => &[0, 7],
        "1" => &[0],
        _ => return None,
    })
}

/// Scale degree (optionally `#`/`b`-modified) to semitones mod 12.
fn degree_semitones(degree: &str) -> Option<u8> {
    let mut shift = 0i32;
    let mut digits = degree;
    loop {
        if let Some(rest) = digits.strip_prefix('#') {
            shift += 1;
            digits = rest;
        } else if let Some(rest) = digits.strip_prefix('b') {
            shift -= 1;
            digits = rest;
        } else {
            break;
        }
    }
    let number: u32 = digits.parse().ok()?;
    if number == 0 || number > 13 {
        return None;
    }
    // semitones of the major-scale degrees 1..7, octave-extended above
    const MAJOR_SCALE: [i32; 7] = [0, 2, 4, 5, 7, 9, 11];
    let base = MAJOR_SCALE[((number - 1) % 7) as usize];
    Some((base + shift).rem_euclid(12) as u8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_layout_is_majors_minors_nochord() {
        assert_eq!(ChordLabel::major(0).index(), 0);
        assert_eq!(ChordLabel::major(11).index(), 11);
        assert_eq!(ChordLabel::minor(0).index(), 12);
        assert_eq!(ChordLabel::minor(9).index(), 21);
        assert_eq!(ChordLabel::NO_CHORD.index(), 24);
    }

    #[test]
    fn reduction_covers_the_examples() {
        assert_eq!(reduce_label("C:maj7").unwrap(), ChordLabel::major(0));
        assert_eq!(reduce_label("A:min").unwrap(), ChordLabel::minor(9));
        assert_eq!(reduce_label("N").unwrap(), ChordLabel::NO_CHORD);
        assert_eq!(reduce_label("X").unwrap(), ChordLabel::NO_CHORD);
    }

    #[test]
    fn enharmonic_roots_resolve() {
        assert_eq!(reduce_label("Db").unwrap(), ChordLabel::major(1));
        assert_eq!(reduce_label("C#").unwrap(), ChordLabel::major(1));
        assert_eq!(reduce_label("Cb:min").unwrap(), ChordLabel::minor(11));
        assert_eq!(reduce_label("F##:maj").unwrap(), ChordLabel::major(7));
    }

    #[test]
    fn third_decides_the_quality() {
        // diminished and half-diminished contain a minor third
        assert_eq!(reduce_label("B:dim").unwrap(), ChordLabel::minor(11));
        assert_eq!(reduce_label("B:hdim7").unwrap(), ChordLabel::minor(11));
        // augmented contains a major third
        assert_eq!(reduce_label("E:aug").unwrap(), ChordLabel::major(4));
        assert_eq!(reduce_label("G:7").unwrap(), ChordLabel::major(7));
        assert_eq!(reduce_label("D:minmaj7").unwrap(), ChordLabel::minor(2));
    }

    #[test]
    fn thirdless_qualities_are_unmappable() {
        for raw in ["C:sus2", "C:sus4", "C:5", "C:1", "D:sus4/5"] {
            assert_eq!(reduce_label_checked(raw).unwrap(), Reduction::Unmappable);
            assert_eq!(reduce_label(raw).unwrap(), ChordLabel::NO_CHORD);
        }
    }

    #[test]
    fn degree_lists_modify_the_interval_set() {
        // explicit degree list forms a major triad
        assert_eq!(reduce_label("C:(1,3,5)").unwrap(), ChordLabel::major(0));
        assert_eq!(reduce_label("C:(1,b3,5)").unwrap(), ChordLabel::minor(0));
        // omitting the third makes maj unmappable
        assert_eq!(reduce_label_checked("C:maj(*3)").unwrap(), Reduction::Unmappable);
        // sus4 plus an added major third becomes major
        assert_eq!(reduce_label("C:sus4(3)").unwrap(), ChordLabel::major(0));
    }

    #[test]
    fn bass_notes_are_ignored_for_the_reduction() {
        assert_eq!(reduce_label("C:maj/3").unwrap(), ChordLabel::major(0));
        assert_eq!(reduce_label("A:min7/b7").unwrap(), ChordLabel::minor(9));
    }

    #[test]
    fn unparseable_roots_error() {
        assert!(reduce_label("H:maj").is_err());
        assert!(reduce_label("").is_err());
        assert!(reduce_label("C:nonsense").is_err());
    }

    #[test]
    fn transposition_wraps_and_fixes_no_chord() {
        assert_eq!(ChordLabel::major(0).transposed(2), ChordLabel::major(2));
        assert_eq!(ChordLabel::minor(9).transposed(-4), ChordLabel::minor(5));
        assert_eq!(ChordLabel::minor(9).transposed(-4).index(), 17);
        assert_eq!(ChordLabel::major(11).transposed(3), ChordLabel::major(2));
        assert_eq!(ChordLabel::NO_CHORD.transposed(5), ChordLabel::NO_CHORD);
    }

    #[test]
    fn display_round_trips_through_reduce() {
        for label in ChordLabel::all() {
            assert_eq!(reduce_label(&label.to_string()).unwrap(), label);
        }
    }

    #[test]
    fn interval_oracle_agrees_with_the_shorthand_table() {
        // independent oracle: stack thirds for the basic tertian qualities
        let stacked = |third: u8, fifth: u8| vec![0u8, third, third + fifth];
        let cases: [(&str, Vec<u8>); 4] = [
            ("maj", stacked(4, 3)),  // major third + minor third
            ("min", stacked(3, 4)),  // minor third + major third
            ("dim", stacked(3, 3)),
            ("aug", stacked(4, 4)),
        ];
        for (shorthand, expect) in cases {
            let mut got = shorthand_intervals(shorthand).unwrap().to_vec();
            got.sort_unstable();
            assert_eq!(got, expect, "{shorthand}");
        }
    }
}
