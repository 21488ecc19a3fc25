//! Robustness and conservativeness measurement: prediction margin, the
//! magnitude-margin ratio, tail-posterior probes, and misclassified-posterior
//! histograms.

use crate::data::Dataset;
use crate::generative::GenerativeClassifier;
use crate::models::{argmax, NeuralModel};
use crate::{Error, Result};

/// Anything that maps an input to a posterior over classes; lets the probes
/// treat generative and discriminative classifiers uniformly.
pub trait PosteriorModel {
    fn posterior_at(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn num_classes(&self) -> usize;
}

impl PosteriorModel for NeuralModel {
    fn posterior_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.posterior(x)
    }

    fn num_classes(&self) -> usize {
        self.k
    }
}

impl PosteriorModel for GenerativeClassifier {
    fn posterior_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 1 {
            return Err(Error::ShapeMismatch {
                context: "generative classifier expects 1-D probes",
                left: (1, 1),
                right: (x.len(), 1),
            });
        }
        Ok(self.posterior(x[0]))
    }

    fn num_classes(&self) -> usize {
        GenerativeClassifier::num_classes(self)
    }
}

/// Prediction margin: `z_y - max_{i != y} z_i`. Negative exactly when the
/// sample is misclassified.
pub fn prediction_margin(z: &[f64], y: usize) -> f64 {
    assert!(z.len() >= 2, "margin needs at least two classes");
    assert!(y < z.len());
    let runner_up = z
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != y)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    z[y] - runner_up
}

/// Per-sample margin statistics for the magnitude-margin ratio.
#[derive(Debug, Clone, Copy)]
pub struct MarginRecord {
    pub sample_id: usize,
    /// True-class latent output `z_y`.
    pub z_true: f64,
    /// Runner-up latent output.
    pub runner_up: f64,
    /// Prediction margin; positive for the records kept.
    pub margin: f64,
    /// Mean absolute input-gradient coordinate of `z_y - z_j`. The mean (not
    /// the max) makes `eps * m * n` the exact first-order loss bound for a
    /// sign attack of scale eps in n dimensions.
    pub gradient_magnitude: f64,
    /// `gradient_magnitude / margin`.
    pub ratio: f64,
}

/// Magnitude-margin ratio of one sample, or `None` as the skip signal for
/// misclassified samples (margin <= 0), which are excluded and counted by
/// the caller.
pub fn magnitude_margin_ratio(
    model: &NeuralModel,
    x: &[f64],
    y: usize,
    sample_id: usize,
) -> Result<Option<MarginRecord>> {
    let (z, _) = model.forward(x)?;
    let margin = prediction_margin(&z, y);
    if margin <= 0.0 {
        return Ok(None);
    }
    let runner_up_idx = z
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != y)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let grad = model.latent_diff_input_gradient(x, y, runner_up_idx)?;
    let magnitude = grad.iter().map(|g| g.abs()).sum::<f64>() / grad.len() as f64;
    Ok(Some(MarginRecord {
        sample_id,
        z_true: z[y],
        runner_up: z[runner_up_idx],
        margin,
        gradient_magnitude: magnitude,
        ratio: magnitude / margin,
    }))
}

/// Ratio records over a dataset plus the count of skipped (misclassified)
/// samples.
pub fn ratio_records(model: &NeuralModel, data: &Dataset) -> Result<(Vec<MarginRecord>, usize)> {
    let mut records = Vec::new();
    let mut skipped = 0;
    for i in 0..data.len() {
        let (x, y) = data.sample(i);
        match magnitude_margin_ratio(model, x, y, i)? {
            Some(rec) => records.push(rec),
            None => skipped += 1,
        }
    }
    Ok((records, skipped))
}

pub fn median_of(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// One probed posterior: direction index, radius, and the full posterior.
#[derive(Debug, Clone)]
pub struct ProbeRow {
    pub direction: usize,
    pub radius: f64,
    pub posterior: Vec<f64>,
}

/// Evaluates the model's posterior at `radius * direction` for every pair,
/// walking outward; used to assert conservativeness or saturation in the
/// distribution tails.
pub fn tail_posterior_probe<M: PosteriorModel + ?Sized>(
    model: &M,
    directions: &[Vec<f64>],
    radii: &[f64],
) -> Result<Vec<ProbeRow>> {
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "probe radii must be strictly increasing".into(),
        ));
    }
    let mut rows = Vec::with_capacity(directions.len() * radii.len());
    for (d_idx, dir) in directions.iter().enumerate() {
        for &radius in radii {
            let x: Vec<f64> = dir.iter().map(|v| v * radius).collect();
            rows.push(ProbeRow {
                direction: d_idx,
                radius,
                posterior: model.posterior_at(&x)?,
            });
        }
    }
    Ok(rows)
}

/// Fixed-width histogram over [0, 1].
#[derive(Debug, Clone)]
pub struct Histogram {
    pub bins: Vec<usize>,
}

impl Histogram {
    pub fn new(bins: usize) -> Self {
        assert!(bins > 0);
        Self {
            bins: vec![0; bins],
        }
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / self.bins.len() as f64
    }

    pub fn record(&mut self, v: f64) {
        assert!((0.0..=1.0).contains(&v), "histogram domain is [0,1], got {v}");
        let idx = ((v * self.bins.len() as f64) as usize).min(self.bins.len() - 1);
        self.bins[idx] += 1;
    }

    pub fn total(&self) -> usize {
        self.bins.iter().sum()
    }

    /// Index of the fullest bin.
    pub fn mode_bin(&self) -> Option<usize> {
        if self.total() == 0 {
            return None;
        }
        self.bins
            .iter()
            .enumerate()
            .max_by_key(|&(_, c)| c)
            .map(|(i, _)| i)
    }
}

/// Default bin count, giving width 0.05.
pub const POSTERIOR_HISTOGRAM_BINS: usize = 20;

/// Histogram over the predicted-class posterior of misclassified samples in
/// an attacked input set, plus the misclassified count.
pub fn misclassified_posterior_histogram(
    model: &NeuralModel,
    attacked_inputs: &[Vec<f64>],
    labels: &[usize],
    bins: usize,
) -> Result<(Histogram, usize)> {
    if attacked_inputs.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "attacked inputs vs labels",
            left: (attacked_inputs.len(), 1),
            right: (labels.len(), 1),
        });
    }
    let mut hist = Histogram::new(bins);
    let mut count = 0;
    for (x, &y) in attacked_inputs.iter().zip(labels) {
        let p = model.posterior(x)?;
        let pred = argmax(&p);
        if pred != y {
            hist.record(p[pred]);
            count += 1;
        }
    }
    debug_assert_eq!(hist.total(), count);
    Ok((hist, count))
}
