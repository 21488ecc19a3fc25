//! Adversarial example generation: FGSM, targeted FGSM, BIM, the model-free
//! average-sample attack, and a black-box substitute attack.
//!
//! All attacks use `sign(0) = 0`: coordinates with exactly zero gradient are
//! left untouched. Saturated softmax posteriors produce exactly this, and
//! masking it (e.g. with random perturbations) would hide the failure mode
//! the harness exists to measure.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::models::{train, NeuralModel, TrainConfig};
use crate::numeric::{sign, RngState};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct AttackConfig {
    /// Per-coordinate l-infinity budget.
    pub epsilon: f64,
    /// BIM iteration count T; step size is `epsilon / T`.
    pub steps: usize,
    /// Valid input bounds; `None` leaves synthetic unbounded data unclipped.
    pub clip_range: Option<(f64, f64)>,
}

impl AttackConfig {
    pub fn new(epsilon: f64, steps: usize, clip_range: Option<(f64, f64)>) -> Result<Self> {
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {epsilon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidParameter("steps must be >= 1".into()));
        }
        if let Some((lo, hi)) = clip_range {
            if !(lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "clip range must satisfy lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(Self {
            epsilon,
            steps,
            clip_range,
        })
    }

    fn clip(&self, v: f64) -> f64 {
        match self.clip_range {
            Some((lo, hi)) => v.clamp(lo, hi),
            None => v,
        }
    }
}

fn signed_step(x: &[f64], grad: &[f64], scale: f64, cfg: &AttackConfig) -> Vec<f64> {
    x.iter()
        .zip(grad)
        .map(|(&xi, &g)| cfg.clip(xi + scale * sign(g)))
        .collect()
}

/// Fast gradient sign attack: `x + eps * sign(grad_x J(w, x, y))`, clipped.
pub fn fgsm(m: &NeuralModel, x: &[f64], y: usize, cfg: &AttackConfig) -> Result<Vec<f64>> {
    let grad = m.input_gradient(x, y)?;
    Ok(signed_step(x, &grad, cfg.epsilon, cfg))
}

/// Targeted variant: steps *down* the loss gradient of the target class,
/// `x - eps * sign(grad_x J(w, x, y_t))`.
pub fn targeted_fgsm(
    m: &NeuralModel,
    x: &[f64],
    target: usize,
    cfg: &AttackConfig,
) -> Result<Vec<f64>> {
    if target >= m.k {
        return Err(Error::InvalidParameter(format!(
            "target class {target} out of range for {} classes",
            m.k
        )));
    }
    let grad = m.input_gradient(x, target)?;
    Ok(signed_step(x, &grad, -cfg.epsilon, cfg))
}

/// Iterative FGSM at step size `eps/T`, re-evaluating the gradient at each
/// iterate and clipping every step. `T = 1` reduces exactly to [`fgsm`].
pub fn bim(m: &NeuralModel, x: &[f64], y: usize, cfg: &AttackConfig) -> Result<Vec<f64>> {
    let alpha = cfg.epsilon / cfg.steps as f64;
    let mut current = x.to_vec();
    for _ in 0..cfg.steps {
        let grad = m.input_gradient(&current, y)?;
        current = signed_step(&current, &grad, alpha, cfg);
    }
    Ok(current)
}

/// Per-class mean inputs, precomputed on training data.
#[derive(Debug, Clone)]
pub struct ClassAverages {
    pub means: Vec<Vec<f64>>,
}

pub fn class_averages(data: &Dataset) -> ClassAverages {
    let mut means = vec![vec![0.0; data.dim()]; data.num_classes];
    let mut counts = vec![0usize; data.num_classes];
    for i in 0..data.len() {
        let (x, y) = data.sample(i);
        counts[y] += 1;
        for (m, v) in means[y].iter_mut().zip(x) {
            *m += v;
        }
    }
    for (mean, count) in means.iter_mut().zip(counts) {
        for v in mean {
            *v /= count.max(1) as f64;
        }
    }
    ClassAverages { means }
}

/// Model-free semi-black-box attack: perturbs toward the target class mean,
/// `x + eps * sign(Avg_t - Avg_y)`. Takes no model by construction.
pub fn average_sample_attack(
    x: &[f64],
    y: usize,
    target: usize,
    avgs: &ClassAverages,
    cfg: &AttackConfig,
) -> Result<Vec<f64>> {
    let k = avgs.means.len();
    if y >= k || target >= k || target == y {
        return Err(Error::InvalidTarget {
            target,
            label: y,
            k,
        });
    }
    let direction: Vec<f64> = avgs.means[target]
        .iter()
        .zip(&avgs.means[y])
        .map(|(t, s)| t - s)
        .collect();
    Ok(signed_step(x, &direction, cfg.epsilon, cfg))
}

/// Accuracy of `eval` on `data` after perturbing every sample with `attack`.
/// Per-sample work runs in parallel; the reduction is position-stable.
pub fn accuracy_under<F>(eval: &NeuralModel, data: &Dataset, attack: F) -> Result<f64>
where
    F: Fn(&[f64], usize) -> Result<Vec<f64>> + Sync,
{
    let correct: Vec<bool> = (0..data.len())
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let (x, y) = data.sample(i);
            let adv = attack(x, y)?;
            Ok(eval.predict(&adv)? == y)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(correct.iter().filter(|&&c| c).count() as f64 / data.len() as f64)
}

/// Perturbed copies of every sample, in dataset order.
pub fn attack_set<F>(data: &Dataset, attack: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64], usize) -> Result<Vec<f64>> + Sync,
{
    (0..data.len())
        .into_par_iter()
        .map(|i| {
            let (x, y) = data.sample(i);
            attack(x, y)
        })
        .collect()
}

/// Aggregates for targeted attacks run toward every class `t != y`.
#[derive(Debug, Clone, Copy)]
pub struct TargetedOutcome {
    /// Accuracy over all (sample, target) pairs.
    pub mean_accuracy_over_targets: f64,
    /// Minimum over targets of the per-target accuracy.
    pub worst_target_accuracy: f64,
}

/// Runs a targeted attack toward every `t != y` for every sample and scores
/// the `eval` model on the results.
pub fn targeted_eval<F>(eval: &NeuralModel, data: &Dataset, attack: F) -> Result<TargetedOutcome>
where
    F: Fn(&[f64], usize, usize) -> Result<Vec<f64>> + Sync,
{
    let k = eval.k;
    let rows: Vec<Vec<(usize, bool)>> = (0..data.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<(usize, bool)>> {
            let (x, y) = data.sample(i);
            let mut out = Vec::with_capacity(k.saturating_sub(1));
            for t in 0..k {
                if t == y {
                    continue;
                }
                let adv = attack(x, y, t)?;
                out.push((t, eval.predict(&adv)? == y));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut per_target_correct = vec![0usize; k];
    let mut per_target_total = vec![0usize; k];
    let mut correct = 0usize;
    let mut total = 0usize;
    for row in &rows {
        for &(t, ok) in row {
            per_target_total[t] += 1;
            total += 1;
            if ok {
                per_target_correct[t] += 1;
                correct += 1;
            }
        }
    }
    let worst = (0..k)
        .filter(|&t| per_target_total[t] > 0)
        .map(|t| per_target_correct[t] as f64 / per_target_total[t] as f64)
        .fold(f64::INFINITY, f64::min);
    Ok(TargetedOutcome {
        mean_accuracy_over_targets: correct as f64 / total.max(1) as f64,
        worst_target_accuracy: worst,
    })
}

/// Substitute width used by the black-box attack (matching the desk-scale
/// architecture of the models it imitates).
pub const SUBSTITUTE_HIDDEN_WIDTH: usize = 128;
/// Fraction of the pool held out to measure substitute/target agreement.
const AGREEMENT_HOLDOUT_FRACTION: f64 = 0.2;

#[derive(Debug)]
pub struct SubstituteAttack {
    pub substitute: NeuralModel,
    /// Agreement between substitute and target predictions on the held-out
    /// pool slice; a transfer attack is only meaningful when this is high.
    pub agreement: f64,
    /// Target-model accuracy under the transferred targeted attack.
    pub outcome: TargetedOutcome,
}

/// Black-box substitute attack: distills the target's decision boundary into
/// a fresh softmax network using only its predicted labels over `pool`
/// (which must be disjoint from the target's training data), then transfers
/// a targeted FGSM from the substitute onto `test` and scores the target.
pub fn blackbox_substitute_attack(
    target: &NeuralModel,
    pool: &Dataset,
    test: &Dataset,
    cfg: &AttackConfig,
    substitute_cfg: &TrainConfig,
    seed: u64,
) -> Result<SubstituteAttack> {
    use crate::activations::HeadActivation;
    use crate::data::Dataset as Ds;
    use crate::models::InitScheme;
    use crate::numeric::Matrix;

    // Label the pool with the target's own predictions.
    let labels: Vec<usize> = (0..pool.len())
        .into_par_iter()
        .map(|i| target.predict(pool.sample(i).0))
        .collect::<Result<Vec<_>>>()?;
    let labeled = Ds::new(
        pool.features.clone(),
        labels,
        target.k,
        format!("{}-distilled", pool.name),
    )?;

    // Deterministic train/holdout split of the pool.
    let mut rng = RngState::from_seed(seed);
    let mut order: Vec<usize> = (0..labeled.len()).collect();
    rng.shuffle(&mut order);
    let holdout = ((labeled.len() as f64 * AGREEMENT_HOLDOUT_FRACTION) as usize).max(1);
    let (held, kept) = order.split_at(holdout);
    let subset = |ids: &[usize]| -> Result<Ds> {
        let rows: Vec<Vec<f64>> = ids.iter().map(|&i| labeled.features.row(i).to_vec()).collect();
        Ds::new(
            Matrix::from_rows(&rows)?,
            ids.iter().map(|&i| labeled.labels[i]).collect(),
            labeled.num_classes,
            "pool-split".into(),
        )
    };
    let train_part = subset(kept)?;
    let held_part = subset(held)?;

    let substitute = NeuralModel::init(
        &[pool.dim(), SUBSTITUTE_HIDDEN_WIDTH, target.k],
        HeadActivation::Softmax,
        InitScheme::FanInBarycenter,
        &mut rng,
    )?;
    let run = train(substitute, &train_part, substitute_cfg)
        .map_err(|e| Error::SubstituteTraining(e.to_string()))?;
    let substitute = run.model;

    // Agreement with the target on held-out pool samples.
    let agree: Vec<bool> = (0..held_part.len())
        .into_par_iter()
        .map(|i| -> Result<bool> {
            let x = held_part.sample(i).0;
            Ok(substitute.predict(x)? == target.predict(x)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let agreement = agree.iter().filter(|&&a| a).count() as f64 / agree.len() as f64;

    // Craft adversarial inputs against the substitute, score the target.
    let outcome = targeted_eval(target, test, |x, _y, t| {
        targeted_fgsm(&substitute, x, t, cfg)
    })?;

    Ok(SubstituteAttack {
        substitute,
        agreement,
        outcome,
    })
}
