//! Interpretability analyses of the trained classification head: weight
//! correlations between chord classes, quality-selective feature maps and
//! pitch-class profiles, with CSV and image emitters.

use std::path::{Path, PathBuf};

use crate::data::label::{ChordLabel, NUM_CLASSES, PITCH_CLASS_NAMES};
use crate::error::Error;
use crate::model::ChordNet;
use crate::nn::Tensor;
use crate::scalar::Scalar;
use crate::Result;

/// Chord-class display order: majors through the circle of fifths, then
/// minors likewise, then no-chord.
pub fn circle_of_fifths_order() -> [ChordLabel; NUM_CLASSES] {
    let mut order = [ChordLabel::NO_CHORD; NUM_CLASSES];
    let mut root = 0u8;
    for i in 0..12 {
        order[i] = ChordLabel::major(root);
        order[i + 12] = ChordLabel::minor(root);
        root = (root + 7) % 12;
    }
    order
}

/// Display names in [`circle_of_fifths_order`]: upper case for majors, lower
/// case for minors.
pub fn class_display_names() -> Vec<String> {
    circle_of_fifths_order()
        .iter()
        .map(|label| match label.root() {
            None => "N".to_string(),
            Some(root) => {
                let name = PITCH_CLASS_NAMES[root as usize];
                if label.is_major() {
                    name.to_string()
                } else {
                    name.to_lowercase()
                }
            }
        })
        .collect()
}

/// The classification head's weights: one row of feature-map weights per
/// chord class, in [`ChordLabel`] index order.
#[derive(Debug, Clone)]
pub struct GapWeights<T> {
    /// `[classes, feature_maps]`
    weights: Tensor<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quality {
    Major,
    Minor,
}

impl<T: Scalar> GapWeights<T> {
    pub fn new(weights: Tensor<T>) -> Result<Self> {
        if weights.shape().len() != 2 || weights.shape()[0] != NUM_CLASSES {
            return Err(Error::ShapeMismatch {
                context: "head weights",
                expected: vec![NUM_CLASSES, 0],
                actual: weights.shape().to_vec(),
            });
        }
        if !weights.all_finite() {
            return Err(Error::NonFinite("head weights"));
        }
        Ok(GapWeights { weights })
    }

    pub fn from_network(model: &ChordNet<T>) -> Result<Self> {
        let (w, _) = model.head();
        GapWeights::new(w)
    }

    pub fn num_maps(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn class_row(&self, label: ChordLabel) -> &[T] {
        self.weights.row(label.index())
    }
}

/// Pearson correlation between all pairs of class weight vectors, rows and
/// columns in circle-of-fifths order. Classes whose weight row has zero
/// variance are reported in `degenerate` and produce NaN entries.
#[derive(Debug, Clone)]
pub struct CorrelationResult<T> {
    /// `[classes, classes]`, ordered by [`circle_of_fifths_order`].
    pub matrix: Tensor<T>,
    /// Class indices (label order) with zero-variance weight rows.
    pub degenerate: Vec<usize>,
}

pub fn weight_correlation<T: Scalar>(gw: &GapWeights<T>) -> CorrelationResult<T> {
    let order = circle_of_fifths_order();
    let maps = gw.num_maps();
    let inv = T::one() / T::from(maps).unwrap();

    // center each row and remember its norm
    let mut centered: Vec<Vec<T>> = Vec::with_capacity(NUM_CLASSES);
    let mut norms = Vec::with_capacity(NUM_CLASSES);
    let mut degenerate = Vec::new();
    for &label in &order {
        let row = gw.class_row(label);
        let mean = row.iter().copied().sum::<T>() * inv;
        let c: Vec<T> = row.iter().map(|&v| v - mean).collect();
        let norm = c.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm <= T::zero() {
            degenerate.push(label.index());
        }
        centered.push(c);
        norms.push(norm);
    }

    let mut matrix = Tensor::zeros(&[NUM_CLASSES, NUM_CLASSES]);
    for i in 0..NUM_CLASSES {
        for j in 0..=i {
            let value = if norms[i] <= T::zero() || norms[j] <= T::zero() {
                T::nan()
            } else if i == j {
                T::one()
            } else {
                let dot: T = centered[i].iter().zip(&centered[j]).map(|(&a, &b)| a * b).sum();
                dot / (norms[i] * norms[j])
            };
            matrix.row_mut(i)[j] = value;
            matrix.row_mut(j)[i] = value;
        }
    }
    CorrelationResult { matrix, degenerate }
}

/// The `k` feature maps with the highest mean connection weight to the 12
/// classes of the given quality; ties break toward the lower map index.
pub fn top_feature_maps<T: Scalar>(gw: &GapWeights<T>, quality: Quality, k: usize) -> Vec<usize> {
    assert!(k <= gw.num_maps(), "cannot select more maps than exist");
    let maps = gw.num_maps();
    let mut means = vec![T::zero(); maps];
    for root in 0..12 {
        let label = match quality {
            Quality::Major => ChordLabel::major(root),
            Quality::Minor => ChordLabel::minor(root),
        };
        for (m, &w) in means.iter_mut().zip(gw.class_row(label)) {
            *m += w;
        }
    }
    let mut indices: Vec<usize> = (0..maps).collect();
    indices.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap().then(a.cmp(&b)));
    indices.truncate(k);
    indices
}

/// For every pitch class, the elementwise product of the weight rows of the
/// six triads containing it (majors rooted at p, p−4, p−7; minors at p, p−3,
/// p−7). Multiplying signed weights can flip sign with factor parity; the
/// profiles are reported as computed.
pub fn pitch_class_profiles<T: Scalar>(gw: &GapWeights<T>) -> Tensor<T> {
    let maps = gw.num_maps();
    let mut profiles = Tensor::filled(&[12, maps], T::one());
    for p in 0..12i32 {
        let row = profiles.row_mut(p as usize);
        for label in chords_containing(p as u8) {
            for (dst, &w) in row.iter_mut().zip(gw.class_row(label)) {
                *dst = *dst * w;
            }
        }
    }
    profiles
}

/// The six major/minor triads whose pitch-class set contains `p`.
pub fn chords_containing(p: u8) -> [ChordLabel; 6] {
    let pc = |offset: i32| ((p as i32 + offset).rem_euclid(12)) as u8;
    [
        ChordLabel::major(pc(0)),
        ChordLabel::major(pc(-4)),
        ChordLabel::major(pc(-7)),
        ChordLabel::minor(pc(0)),
        ChordLabel::minor(pc(-3)),
        ChordLabel::minor(pc(-7)),
    ]
}

/// Writes the three analyses as CSV plus PNG renderings into `out_dir`;
/// returns the created paths.
pub fn emit_analysis<T: Scalar>(model: &ChordNet<T>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;
    let gw = GapWeights::from_network(model)?;
    let names = class_display_names();
    let mut created = Vec::new();

    // correlation matrix
    let corr = weight_correlation(&gw);
    created.push(write_csv(
        &out_dir.join("weight_correlation.csv"),
        &names,
        &names,
        &corr.matrix,
    )?);
    created.push(heatmap_png(
        &out_dir.join("weight_correlation.png"),
        &corr.matrix,
        16,
    )?);

    // quality-selected weight traces
    for (quality, tag) in [(Quality::Major, "major"), (Quality::Minor, "minor")] {
        let maps = top_feature_maps(&gw, quality, 4);
        let order = circle_of_fifths_order();
        let mut traces = Tensor::zeros(&[4, NUM_CLASSES]);
        for (row, &map) in maps.iter().enumerate() {
            for (col, &label) in order.iter().enumerate() {
                traces.row_mut(row)[col] = gw.class_row(label)[map];
            }
        }
        let row_names: Vec<String> = maps.iter().map(|m| format!("map{m}")).collect();
        created.push(write_csv(
            &out_dir.join(format!("{tag}_feature_maps.csv")),
            &names,
            &row_names,
            &traces,
        )?);
        created.push(traces_png(&out_dir.join(format!("{tag}_feature_maps.png")), &traces)?);
    }

    // pitch-class profiles
    let profiles = pitch_class_profiles(&gw);
    let pc_names: Vec<String> = PITCH_CLASS_NAMES.iter().map(|n| n.to_lowercase()).collect();
    let map_names: Vec<String> = (0..gw.num_maps()).map(|m| format!("map{m}")).collect();
    created.push(write_csv(
        &out_dir.join("pitch_class_profiles.csv"),
        &map_names,
        &pc_names,
        &profiles,
    )?);
    created.push(traces_png(&out_dir.join("pitch_class_profiles.png"), &profiles)?);

    Ok(created)
}

/// CSV layout: header `class,<col names>`, one named row per matrix row.
/// Values use the shortest representation that parses back to the same bits.
fn write_csv<T: Scalar>(path: &Path, col_names: &[String], row_names: &[String], matrix: &Tensor<T>) -> Result<PathBuf> {
    let mut text = String::from("class");
    for name in col_names {
        text.push(',');
        text.push_str(name);
    }
    text.push('\n');
    for (r, name) in row_names.iter().enumerate() {
        text.push_str(name);
        for &v in matrix.row(r) {
            text.push(',');
            text.push_str(&format!("{v}"));
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path.to_path_buf())
}

/// Parses a matrix written by [`write_csv`], dropping the header row and the
/// row-name column.
pub fn parse_csv_matrix<T: Scalar>(text: &str) -> Result<Tensor<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let values: Vec<T> = line
            .split(',')
            .skip(1)
            .map(|v| {
                v.parse::<f64>()
                    .ok()
                    .and_then(T::from)
                    .ok_or_else(|| Error::InvalidParam(format!("bad csv value {v:?}")))
            })
            .collect::<Result<_>>()?;
        rows.push(values);
    }
    let cols = rows.first().map_or(0, Vec::len);
    let shape = [rows.len(), cols];
    let data: Vec<T> = rows.into_iter().flatten().collect();
    Ok(Tensor::from_vec(&shape, data))
}

/// Diverging heatmap (blue ↔ white ↔ red over the symmetric value range).
fn heatmap_png<T: Scalar>(path: &Path, matrix: &Tensor<T>, cell: u32) -> Result<PathBuf> {
    let (rows, cols) = (matrix.shape()[0] as u32, matrix.shape()[1] as u32);
    let limit = matrix
        .data()
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, &v| m.max(v.to_f64().unwrap().abs()))
        .max(1e-12);
    let mut img = image::RgbImage::new(cols * cell, rows * cell);
    for (x, y, pixel) in img.enumerate_pixels_mut() {
        let (r, c) = ((y / cell) as usize, (x / cell) as usize);
        let v = matrix.at2(r, c).to_f64().unwrap();
        *pixel = if v.is_finite() {
            let t = (v / limit).clamp(-1.0, 1.0);
            if t >= 0.0 {
                image::Rgb([255, (255.0 * (1.0 - t)) as u8, (255.0 * (1.0 - t)) as u8])
            } else {
                image::Rgb([(255.0 * (1.0 + t)) as u8, (255.0 * (1.0 + t)) as u8, 255])
            }
        } else {
            image::Rgb([128, 128, 128])
        };
    }
    img.save(path)
        .map_err(|e| Error::Container { path: path.display().to_string(), reason: e.to_string() })?;
    Ok(path.to_path_buf())
}

/// One polyline per matrix row on a shared canvas.
fn traces_png<T: Scalar>(path: &Path, matrix: &Tensor<T>) -> Result<PathBuf> {
    const COLORS: [[u8; 3]; 12] = [
        [214, 39, 40],
        [31, 119, 180],
        [44, 160, 44],
        [255, 127, 14],
        [148, 103, 189],
        [140, 86, 75],
        [227, 119, 194],
        [127, 127, 127],
        [188, 189, 34],
        [23, 190, 207],
        [0, 0, 0],
        [255, 0, 255],
    ];
    let (rows, cols) = (matrix.shape()[0], matrix.shape()[1]);
    let (width, height) = (900u32, 420u32);
    let margin = 20.0f64;
    let mut img = image::RgbImage::from_pixel(width, height, image::Rgb([255, 255, 255]));

    let limit = matrix
        .data()
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.to_f64().unwrap().abs()))
        .max(1e-12);
    let to_xy = |col: usize, v: f64| -> (f64, f64) {
        let x = margin + (width as f64 - 2.0 * margin) * col as f64 / (cols.max(2) - 1) as f64;
        let y = height as f64 / 2.0 - v / limit * (height as f64 / 2.0 - margin);
        (x, y)
    };
    // zero axis
    for x in 0..width {
        img.put_pixel(x, height / 2, image::Rgb([220, 220, 220]));
    }
    for r in 0..rows {
        let color = image::Rgb(COLORS[r % COLORS.len()]);
        for c in 0..cols.saturating_sub(1) {
            let (x0, y0) = to_xy(c, matrix.at2(r, c).to_f64().unwrap());
            let (x1, y1) = to_xy(c + 1, matrix.at2(r, c + 1).to_f64().unwrap());
            draw_line(&mut img, x0, y0, x1, y1, color);
        }
    }
    img.save(path)
        .map_err(|e| Error::Container { path: path.display().to_string(), reason: e.to_string() })?;
    Ok(path.to_path_buf())
}

fn draw_line(img: &mut image::RgbImage, x0: f64, y0: f64, x1: f64, y1: f64, color: image::Rgb<u8>) {
    let steps = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
    for step in 0..=steps {
        let t = step as f64 / steps as f64;
        let x = (x0 + (x1 - x0) * t).round() as i64;
        let y = (y0 + (y1 - y0) * t).round() as i64;
        if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}
