//! Dataset generation and ingestion: the synthetic 1-D/2-D sets used by the
//! classifier experiments, a deterministic stroke-rendered digit corpus, and
//! a bit-exact IDX reader/writer.

use std::fs;
use std::path::Path;

use crate::numeric::{Matrix, RngState};
use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Feature matrix plus integer labels; the universal input for training,
/// attacking, and metric evaluation.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub name: String,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, num_classes: usize, name: String) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::ShapeMismatch {
                context: "dataset features vs labels",
                left: (features.rows(), features.cols()),
                right: (labels.len(), 1),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidParameter(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
            name,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimensionality.
    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn sample(&self, i: usize) -> (&[f64], usize) {
        (self.features.row(i), self.labels[i])
    }

    /// Row indices belonging to each class.
    pub fn class_indices(&self) -> Vec<Vec<usize>> {
        let mut idx = vec![Vec::new(); self.num_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            idx[l].push(i);
        }
        idx
    }
}

/// Seeded uniform draws over one interval per class.
pub fn make_uniform_1d(
    ranges: &[(f64, f64)],
    n_per_class: usize,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = RngState::from_seed(seed);
    let mut rows = Vec::with_capacity(ranges.len() * n_per_class);
    let mut labels = Vec::with_capacity(ranges.len() * n_per_class);
    for (c, &(lo, hi)) in ranges.iter().enumerate() {
        if !(lo < hi) {
            return Err(Error::EmptyRange(c));
        }
        for _ in 0..n_per_class {
            rows.push(vec![rng.uniform(lo, hi)]);
            labels.push(c);
        }
    }
    Dataset::new(
        Matrix::from_rows(&rows)?,
        labels,
        ranges.len(),
        format!("uniform1d-{}x{}", ranges.len(), n_per_class),
    )
}

/// Two interleaved half-circle arcs (the upper arc centered at the origin,
/// the lower arc shifted to (1, 0.5)) with Gaussian coordinate noise.
pub fn make_moons(n: usize, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::TooFewSamples { required: 2, got: n });
    }
    let mut rng = RngState::from_seed(seed);
    let n0 = n / 2;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.uniform(0.0, std::f64::consts::PI);
        let (mut x, mut y, label) = if i < n0 {
            (t.cos(), t.sin(), 0)
        } else {
            (1.0 - t.cos(), 0.5 - t.sin(), 1)
        };
        if noise_sd > 0.0 {
            x += rng.normal(0.0, noise_sd);
            y += rng.normal(0.0, noise_sd);
        }
        rows.push(vec![x, y]);
        labels.push(label);
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    Dataset::new(
        Matrix::from_rows(&rows)?,
        labels,
        2,
        format!("moons-{n}-sd{noise_sd}"),
    )
}

/// Spread of the linearly separable blobs around their centers at x = -1/+1.
pub const LINEAR_2D_BLOB_SD: f64 = 0.5;

/// Two Gaussian blobs, rejection-sampled so a vertical separator with
/// geometric margin `gap/2` always exists.
pub fn make_linear_2d(n: usize, gap: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::TooFewSamples { required: 2, got: n });
    }
    if !(gap >= 0.0) {
        return Err(Error::InvalidParameter(format!("gap must be >= 0, got {gap}")));
    }
    let mut rng = RngState::from_seed(seed);
    let half = gap / 2.0;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (label, cx) in [(0usize, -1.0f64), (1, 1.0)] {
        let quota = if label == 0 { n / 2 } else { n - n / 2 };
        let mut kept = 0;
        while kept < quota {
            let x = rng.normal(cx, LINEAR_2D_BLOB_SD);
            let y = rng.normal(0.0, LINEAR_2D_BLOB_SD);
            let inside = if label == 0 { x <= -half } else { x >= half };
            if inside {
                rows.push(vec![x, y]);
                labels.push(label);
                kept += 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    Dataset::new(
        Matrix::from_rows(&rows)?,
        labels,
        2,
        format!("linear2d-{n}-gap{gap}"),
    )
}

// ---------------------------------------------------------------------------
// Synthetic digit corpus
// ---------------------------------------------------------------------------

/// Image side for the synthetic digit corpus (matches the MNIST raster).
pub const DIGIT_SIDE: usize = 28;

/// Polyline skeletons for digits 0-9 in a unit box (x right, y up).
#[rustfmt::skip]
fn glyph_strokes(digit: u8) -> &'static [&'static [(f64, f64)]] {
    const G0: &[&[(f64, f64)]] = &[&[(0.3, 0.85), (0.7, 0.85), (0.85, 0.6), (0.85, 0.35), (0.7, 0.12), (0.3, 0.12), (0.15, 0.35), (0.15, 0.6), (0.3, 0.85)]];
    const G1: &[&[(f64, f64)]] = &[&[(0.35, 0.7), (0.55, 0.88)], &[(0.55, 0.88), (0.55, 0.12)], &[(0.35, 0.12), (0.75, 0.12)]];
    const G2: &[&[(f64, f64)]] = &[&[(0.2, 0.7), (0.35, 0.88), (0.65, 0.88), (0.8, 0.68), (0.7, 0.45), (0.3, 0.25), (0.2, 0.12)], &[(0.2, 0.12), (0.8, 0.12)]];
    const G3: &[&[(f64, f64)]] = &[&[(0.2, 0.82), (0.5, 0.9), (0.78, 0.75), (0.72, 0.58), (0.45, 0.52)], &[(0.45, 0.52), (0.78, 0.42), (0.75, 0.2), (0.45, 0.1), (0.18, 0.2)]];
    const G4: &[&[(f64, f64)]] = &[&[(0.65, 0.12), (0.65, 0.88)], &[(0.65, 0.88), (0.2, 0.35)], &[(0.2, 0.35), (0.85, 0.35)]];
    const G5: &[&[(f64, f64)]] = &[&[(0.75, 0.88), (0.25, 0.88), (0.22, 0.55), (0.55, 0.6), (0.78, 0.45), (0.72, 0.2), (0.4, 0.1), (0.2, 0.18)]];
    const G6: &[&[(f64, f64)]] = &[&[(0.7, 0.85), (0.4, 0.75), (0.22, 0.45), (0.3, 0.18), (0.6, 0.12), (0.78, 0.3), (0.65, 0.5), (0.3, 0.45)]];
    const G7: &[&[(f64, f64)]] = &[&[(0.18, 0.88), (0.82, 0.88)], &[(0.82, 0.88), (0.45, 0.12)], &[(0.35, 0.5), (0.7, 0.5)]];
    const G8: &[&[(f64, f64)]] = &[&[(0.5, 0.52), (0.72, 0.68), (0.65, 0.86), (0.35, 0.86), (0.28, 0.68), (0.5, 0.52), (0.75, 0.35), (0.65, 0.12), (0.35, 0.12), (0.25, 0.35), (0.5, 0.52)]];
    const G9: &[&[(f64, f64)]] = &[&[(0.72, 0.6), (0.4, 0.55), (0.25, 0.72), (0.38, 0.88), (0.68, 0.85), (0.72, 0.6)], &[(0.72, 0.6), (0.6, 0.15)]];
    match digit {
        0 => G0, 1 => G1, 2 => G2, 3 => G3, 4 => G4,
        5 => G5, 6 => G6, 7 => G7, 8 => G8, 9 => G9,
        _ => panic!("digit must be 0-9, got {digit}"),
    }
}

/// Renders one jittered digit glyph onto a `DIGIT_SIDE`^2 raster in [0, 1],
/// quantized to 255 levels so a round trip through the IDX byte format is
/// lossless.
fn render_digit(digit: u8, rng: &mut RngState) -> Vec<f64> {
    let side = DIGIT_SIDE;
    let mut img = vec![0.0f64; side * side];

    let angle = rng.uniform(-0.3, 0.3);
    let scale = rng.uniform(0.65, 1.15);
    let tx = rng.uniform(-3.0, 3.0);
    let ty = rng.uniform(-3.0, 3.0);
    let shear = rng.uniform(-0.25, 0.25);
    let thickness = rng.uniform(0.8, 2.2);
    let amplitude = rng.uniform(0.55, 1.0);
    let (ca, sa) = (angle.cos(), angle.sin());

    let transform = |p: (f64, f64)| -> (f64, f64) {
        let (mut x, y) = (p.0 - 0.5, p.1 - 0.5);
        x += shear * y;
        let (rx, ry) = (ca * x - sa * y, sa * x + ca * y);
        // y flips into raster coordinates
        (14.0 + scale * 22.0 * rx + tx, 14.0 - scale * 22.0 * ry + ty)
    };

    let two_t2 = 2.0 * thickness * thickness;
    for stroke in glyph_strokes(digit) {
        let pts: Vec<(f64, f64)> = stroke
            .iter()
            .map(|&p| {
                let (x, y) = transform(p);
                (x + rng.normal(0.0, 0.8), y + rng.normal(0.0, 0.8))
            })
            .collect();
        for seg in pts.windows(2) {
            let (x0, y0) = seg[0];
            let (x1, y1) = seg[1];
            let (dx, dy) = (x1 - x0, y1 - y0);
            let len2 = dx * dx + dy * dy + 1e-12;
            for py in 0..side {
                for px in 0..side {
                    let (fx, fy) = (px as f64, py as f64);
                    let t = (((fx - x0) * dx + (fy - y0) * dy) / len2).clamp(0.0, 1.0);
                    let (cx, cy) = (x0 + t * dx, y0 + t * dy);
                    let d2 = (fx - cx) * (fx - cx) + (fy - cy) * (fy - cy);
                    let v = amplitude * (-d2 / two_t2).exp();
                    let cell = &mut img[py * side + px];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
    }

    for v in &mut img {
        *v += rng.normal(0.0, 0.05);
        *v = v.clamp(0.0, 1.0);
        // quantize to the byte grid used by the IDX container
        *v = (*v * 255.0).round() / 255.0;
    }
    img
}

/// Deterministic stroke-rendered digit corpus, the stand-in for MNIST
/// subsets when the real IDX files are not available. Labels are the index
/// of the class within `classes` (so `[3, 7]` yields labels 0/1).
pub fn make_synth_digits(classes: &[u8], n_per_class: usize, seed: u64) -> Result<Dataset> {
    if classes.is_empty() {
        return Err(Error::InvalidParameter("no classes requested".into()));
    }
    let mut rng = RngState::from_seed(seed);
    let n = classes.len() * n_per_class;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for (label, &digit) in classes.iter().enumerate() {
        let mut class_rng = rng.split();
        for _ in 0..n_per_class {
            rows.push(render_digit(digit, &mut class_rng));
            labels.push(label);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let rows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
    let labels: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
    let tag: Vec<String> = classes.iter().map(u8::to_string).collect();
    Dataset::new(
        Matrix::from_rows(&rows)?,
        labels,
        classes.len(),
        format!("synthdigits-{}", tag.join("v")),
    )
}

// ---------------------------------------------------------------------------
// IDX container
// ---------------------------------------------------------------------------

/// Class filter and per-class cap applied while loading an IDX pair.
#[derive(Debug, Clone)]
pub struct SubsetSpec {
    /// Keep only these raw label values, remapped to 0..len in list order.
    pub classes: Option<Vec<u8>>,
    /// Cap the number of samples kept per (remapped) class.
    pub per_class_cap: Option<usize>,
    /// Seed for the subsampling shuffle.
    pub seed: u64,
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::IdxTruncated {
            path: path.display().to_string(),
            expected: end,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parses an IDX image/label pair bit-exactly: big-endian 32-bit headers,
/// magic numbers 0x00000803 / 0x00000801, unsigned byte pixels scaled to
/// [0, 1].
pub fn read_idx(
    images_path: &Path,
    labels_path: &Path,
    subset: Option<&SubsetSpec>,
) -> Result<Dataset> {
    let img_bytes = fs::read(images_path)?;
    let lbl_bytes = fs::read(labels_path)?;

    let magic = read_u32_be(&img_bytes, 0, images_path)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxFormat {
            path: images_path.display().to_string(),
            reason: format!("bad images magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}"),
        });
    }
    let count = read_u32_be(&img_bytes, 4, images_path)? as usize;
    let rows = read_u32_be(&img_bytes, 8, images_path)? as usize;
    let cols = read_u32_be(&img_bytes, 12, images_path)? as usize;
    let pixels = count * rows * cols;
    if img_bytes.len() != 16 + pixels {
        return Err(Error::IdxTruncated {
            path: images_path.display().to_string(),
            expected: 16 + pixels,
            found: img_bytes.len(),
        });
    }

    let magic = read_u32_be(&lbl_bytes, 0, labels_path)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxFormat {
            path: labels_path.display().to_string(),
            reason: format!("bad labels magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}"),
        });
    }
    let lbl_count = read_u32_be(&lbl_bytes, 4, labels_path)? as usize;
    if lbl_bytes.len() != 8 + lbl_count {
        return Err(Error::IdxTruncated {
            path: labels_path.display().to_string(),
            expected: 8 + lbl_count,
            found: lbl_bytes.len(),
        });
    }
    if lbl_count != count {
        return Err(Error::IdxFormat {
            path: labels_path.display().to_string(),
            reason: format!("{lbl_count} labels for {count} images"),
        });
    }

    let dim = rows * cols;
    let raw_labels = &lbl_bytes[8..];

    // Which raw classes to keep, and their remapped values.
    let class_map: Vec<(u8, usize)> = match subset.and_then(|s| s.classes.as_ref()) {
        Some(classes) => classes.iter().enumerate().map(|(i, &c)| (c, i)).collect(),
        None => {
            let max = raw_labels.iter().copied().max().unwrap_or(0);
            (0..=max).map(|c| (c, c as usize)).collect()
        }
    };
    let lookup = |raw: u8| class_map.iter().find(|(c, _)| *c == raw).map(|(_, m)| *m);

    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); class_map.len()];
    for (i, &raw) in raw_labels.iter().enumerate() {
        if let Some(mapped) = lookup(raw) {
            per_class[mapped].push(i);
        }
    }

    if let Some(spec) = subset {
        if let Some(cap) = spec.per_class_cap {
            let mut rng = RngState::from_seed(spec.seed);
            for indices in &mut per_class {
                rng.shuffle(indices);
                indices.truncate(cap);
                indices.sort_unstable();
            }
        }
    }

    let mut kept: Vec<(usize, usize)> = Vec::new();
    for (mapped, indices) in per_class.iter().enumerate() {
        kept.extend(indices.iter().map(|&i| (i, mapped)));
    }
    kept.sort_unstable();

    let mut data = Vec::with_capacity(kept.len() * dim);
    let mut labels = Vec::with_capacity(kept.len());
    for &(i, mapped) in &kept {
        let start = 16 + i * dim;
        data.extend(img_bytes[start..start + dim].iter().map(|&b| b as f64 / 255.0));
        labels.push(mapped);
    }

    let stem = images_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "images".into());
    let name = match subset.and_then(|s| s.classes.as_ref()) {
        Some(classes) => {
            let tag: Vec<String> = classes.iter().map(u8::to_string).collect();
            format!("idx-{stem}-classes{}", tag.join("v"))
        }
        None => format!("idx-{stem}"),
    };
    Dataset::new(Matrix::new(kept.len(), dim, data)?, labels, class_map.len(), name)
}

/// Writes a dataset as an IDX image/label pair. Features must be `[0, 1]`
/// values on the 255-level grid (anything else fails the bit-exact round
/// trip by construction, so this quantizes with rounding).
pub fn write_idx(
    ds: &Dataset,
    rows: usize,
    cols: usize,
    images_path: &Path,
    labels_path: &Path,
) -> Result<()> {
    if rows * cols != ds.dim() {
        return Err(Error::ShapeMismatch {
            context: "idx image shape vs feature dim",
            left: (rows, cols),
            right: (ds.dim(), 1),
        });
    }
    let n = ds.len() as u32;
    let mut img_bytes = Vec::with_capacity(16 + ds.len() * ds.dim());
    img_bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    img_bytes.extend_from_slice(&n.to_be_bytes());
    img_bytes.extend_from_slice(&(rows as u32).to_be_bytes());
    img_bytes.extend_from_slice(&(cols as u32).to_be_bytes());
    for v in ds.features.data() {
        img_bytes.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
    }

    let mut lbl_bytes = Vec::with_capacity(8 + ds.len());
    lbl_bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lbl_bytes.extend_from_slice(&n.to_be_bytes());
    lbl_bytes.extend(ds.labels.iter().map(|&l| l as u8));

    fs::write(images_path, img_bytes)?;
    fs::write(labels_path, lbl_bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_1d_reproducible() {
        let a = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 1, 5).unwrap();
        let b = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 1, 5).unwrap();
        assert_eq!(a.features.data(), b.features.data());
        assert_eq!(a.labels, b.labels);
    }

    #[test]
    fn uniform_1d_respects_ranges() {
        let ds = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 200, 5).unwrap();
        for i in 0..ds.len() {
            let (x, y) = ds.sample(i);
            let (lo, hi) = if y == 0 { (-2.0, -1.0) } else { (1.0, 2.0) };
            assert!(x[0] >= lo && x[0] <= hi);
        }
    }

    #[test]
    fn uniform_1d_means_near_midpoints() {
        let ds = make_uniform_1d(&[(-2.0, -1.0), (1.0, 2.0)], 10_000, 7).unwrap();
        let idx = ds.class_indices();
        for (c, mid) in [(0usize, -1.5f64), (1, 1.5)] {
            let mean: f64 =
                idx[c].iter().map(|&i| ds.features.get(i, 0)).sum::<f64>() / idx[c].len() as f64;
            assert!((mean - mid).abs() < 0.02, "class {c} mean {mean}");
        }
    }

    #[test]
    fn uniform_1d_empty_range_errors() {
        assert!(matches!(
            make_uniform_1d(&[(1.0, 1.0)], 5, 0),
            Err(Error::EmptyRange(0))
        ));
    }

    #[test]
    fn moons_noiseless_geometry() {
        let ds = make_moons(300, 0.0, 11).unwrap();
        for i in 0..ds.len() {
            let (p, y) = ds.sample(i);
            let r = if y == 0 {
                (p[0] * p[0] + p[1] * p[1]).sqrt()
            } else {
                let (dx, dy) = (p[0] - 1.0, p[1] - 0.5);
                (dx * dx + dy * dy).sqrt()
            };
            assert!((r - 1.0).abs() < 1e-12);
            if y == 0 {
                assert!(p[1] >= -1e-12);
            } else {
                assert!(p[1] <= 0.5 + 1e-12);
            }
        }
    }

    #[test]
    fn moons_reproducible() {
        let a = make_moons(40, 0.1, 3).unwrap();
        let b = make_moons(40, 0.1, 3).unwrap();
        assert_eq!(a.features.data(), b.features.data());
    }

    /// Angle-scan separator oracle: the best margin of any linear separator,
    /// found by brute force over 3600 directions.
    fn best_linear_margin(ds: &Dataset) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for step in 0..3600 {
            let theta = step as f64 * std::f64::consts::PI / 3600.0;
            let (dx, dy) = (theta.cos(), theta.sin());
            let (mut max0, mut min1) = (f64::NEG_INFINITY, f64::INFINITY);
            let (mut max1, mut min0) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..ds.len() {
                let (p, y) = ds.sample(i);
                let proj = p[0] * dx + p[1] * dy;
                if y == 0 {
                    max0 = max0.max(proj);
                    min0 = min0.min(proj);
                } else {
                    max1 = max1.max(proj);
                    min1 = min1.min(proj);
                }
            }
            best = best.max((min1 - max0) / 2.0).max((min0 - max1) / 2.0);
        }
        best
    }

    #[test]
    fn linear_2d_has_separator_with_declared_margin() {
        let ds = make_linear_2d(200, 1.0, 9).unwrap();
        let margin = best_linear_margin(&ds);
        assert!(margin >= 0.5 - 1e-6, "margin {margin}");
    }

    #[test]
    fn synth_digits_deterministic_and_quantized() {
        let a = make_synth_digits(&[3, 7], 4, 21).unwrap();
        let b = make_synth_digits(&[3, 7], 4, 21).unwrap();
        assert_eq!(a.features.data(), b.features.data());
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.dim(), DIGIT_SIDE * DIGIT_SIDE);
        for &v in a.features.data() {
            assert!((0.0..=1.0).contains(&v));
            let byte = (v * 255.0).round();
            assert!((v - byte / 255.0).abs() < 1e-15);
        }
    }

    #[test]
    fn synth_digits_classes_differ() {
        let ds = make_synth_digits(&[3, 7], 10, 21).unwrap();
        let idx = ds.class_indices();
        let mean_image = |ids: &[usize]| -> Vec<f64> {
            let mut m = vec![0.0; ds.dim()];
            for &i in ids {
                for (a, b) in m.iter_mut().zip(ds.features.row(i)) {
                    *a += b / ids.len() as f64;
                }
            }
            m
        };
        let m0 = mean_image(&idx[0]);
        let m1 = mean_image(&idx[1]);
        let dist: f64 = m0
            .iter()
            .zip(&m1)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(dist > 1.0, "class means too close: {dist}");
    }

    fn fixture_idx(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
        // One 2x2 image with pixels 0, 255, 128, 0 and label 1.
        let img = dir.join("images-idx3-ubyte");
        let lbl = dir.join("labels-idx1-ubyte");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&1u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&2u32.to_be_bytes());
        bytes.extend_from_slice(&[0, 255, 128, 0]);
        fs::write(&img, bytes).unwrap();
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        bytes.extend_from_slice(&1u32.to_be_bytes());
        bytes.push(1);
        fs::write(&lbl, bytes).unwrap();
        (img, lbl)
    }

    #[test]
    fn idx_fixture_parses() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_idx(dir.path());
        let ds = read_idx(&img, &lbl, None).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.labels, vec![1]);
        assert_eq!(
            ds.features.data(),
            &[0.0, 1.0, 128.0 / 255.0, 0.0]
        );
    }

    #[test]
    fn idx_bad_magic_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_idx(dir.path());
        let mut bytes = fs::read(&img).unwrap();
        bytes[3] = 0x99;
        fs::write(&img, bytes).unwrap();
        assert!(matches!(
            read_idx(&img, &lbl, None),
            Err(Error::IdxFormat { .. })
        ));
    }

    #[test]
    fn idx_truncated_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_idx(dir.path());
        let bytes = fs::read(&img).unwrap();
        fs::write(&img, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(
            read_idx(&img, &lbl, None),
            Err(Error::IdxTruncated { .. })
        ));
    }

    #[test]
    fn idx_class_filter_remaps_labels() {
        let dir = tempfile::tempdir().unwrap();
        let ds = make_synth_digits(&[0, 3, 7], 3, 33).unwrap();
        // raw labels as digits 0/3/7
        let raw = Dataset::new(
            ds.features.clone(),
            ds.labels
                .iter()
                .map(|&l| [0usize, 3, 7][l])
                .collect(),
            8,
            "raw".into(),
        )
        .unwrap();
        let img = dir.path().join("img");
        let lbl = dir.path().join("lbl");
        write_idx(&raw, DIGIT_SIDE, DIGIT_SIDE, &img, &lbl).unwrap();
        let subset = SubsetSpec {
            classes: Some(vec![3, 7]),
            per_class_cap: None,
            seed: 0,
        };
        let filtered = read_idx(&img, &lbl, Some(&subset)).unwrap();
        assert_eq!(filtered.len(), 6);
        assert_eq!(filtered.num_classes, 2);
        assert!(filtered.labels.iter().all(|&l| l < 2));
    }

    #[test]
    fn idx_per_class_cap_subsamples() {
        let dir = tempfile::tempdir().unwrap();
        let ds = make_synth_digits(&[3, 7], 10, 35).unwrap();
        let img = dir.path().join("img");
        let lbl = dir.path().join("lbl");
        write_idx(&ds, DIGIT_SIDE, DIGIT_SIDE, &img, &lbl).unwrap();
        let subset = SubsetSpec {
            classes: None,
            per_class_cap: Some(4),
            seed: 1,
        };
        let capped = read_idx(&img, &lbl, Some(&subset)).unwrap();
        assert_eq!(capped.len(), 8);
        let idx = capped.class_indices();
        assert_eq!(idx[0].len(), 4);
        assert_eq!(idx[1].len(), 4);
    }

    #[test]
    fn idx_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = make_synth_digits(&[3, 7], 5, 99).unwrap();
        let img1 = dir.path().join("a-img");
        let lbl1 = dir.path().join("a-lbl");
        write_idx(&ds, DIGIT_SIDE, DIGIT_SIDE, &img1, &lbl1).unwrap();
        let back = read_idx(&img1, &lbl1, None).unwrap();
        assert_eq!(back.features.data(), ds.features.data());
        assert_eq!(back.labels, ds.labels);

        let img2 = dir.path().join("b-img");
        let lbl2 = dir.path().join("b-lbl");
        write_idx(&back, DIGIT_SIDE, DIGIT_SIDE, &img2, &lbl2).unwrap();
        assert_eq!(fs::read(&img1).unwrap(), fs::read(&img2).unwrap());
        assert_eq!(fs::read(&lbl1).unwrap(), fs::read(&lbl2).unwrap());
    }

    proptest! {
        #[test]
        fn idx_round_trip_arbitrary_bytes(
            pixels in proptest::collection::vec(0u8..=255, 16),
            labels in proptest::collection::vec(0u8..4, 4),
        ) {
            let dir = tempfile::tempdir().unwrap();
            let data: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
            let ds = Dataset::new(
                Matrix::new(4, 4, data).unwrap(),
                labels.iter().map(|&l| l as usize).collect(),
                4,
                "prop".into(),
            ).unwrap();
            let img = dir.path().join("img");
            let lbl = dir.path().join("lbl");
            write_idx(&ds, 2, 2, &img, &lbl).unwrap();
            let back = read_idx(&img, &lbl, None).unwrap();
            prop_assert_eq!(back.features.data(), ds.features.data());
            let back_raw: Vec<u8> = fs::read(&img).unwrap()[16..].to_vec();
            prop_assert_eq!(back_raw, pixels);
        }
    }
}
