//! One function per experiment. Each returns a JSON payload (everything a
//! verifier needs) plus plot-ready CSVs; the runner wraps them in the
//! results/manifest envelope.

use serde_json::{json, Value};

use polymax::activations::HeadActivation;
use polymax::attacks::{
    accuracy_under, attack_set, average_sample_attack, bim, blackbox_substitute_attack,
    class_averages, fgsm, targeted_eval, targeted_fgsm, AttackConfig,
};
use polymax::data::{make_linear_2d, make_uniform_1d, Dataset};
use polymax::generative::{fit_generative, Family};
use polymax::metrics::{
    median_of, ratio_records, Histogram, POSTERIOR_HISTOGRAM_BINS,
};
use polymax::models::{
    accuracy, minimum_geometric_margin, train, InitScheme, NeuralModel, TrainConfig, TrainRun,
};
use polymax::numeric::RngState;
use polymax::shift::{run_shift_experiment, ShiftFamily};

use crate::config;
use crate::data_access::{load_digit_data, DigitData};
use crate::error::CliResult;
use crate::spec::{ExperimentId, ExperimentSpec};

pub struct ExperimentOutput {
    pub data: Value,
    /// (file name, contents) pairs written next to results.json.
    pub csvs: Vec<(String, String)>,
}

pub fn run_experiment(spec: &ExperimentSpec) -> CliResult<ExperimentOutput> {
    match spec.id {
        ExperimentId::Fig1 => fig1(spec),
        ExperimentId::Fig2 => fig2(spec),
        ExperimentId::Fig3 => fig3(spec),
        ExperimentId::Fig4 => fig4(spec),
        ExperimentId::Fig5 => fig5(spec),
        ExperimentId::Fig6 => fig6(spec),
        ExperimentId::Table1 => table1(spec),
        ExperimentId::Table2 => table2(spec),
    }
}

/// Both desk-scale models, trained on the same data with the same shuffle
/// seed and per-head step sizes.
pub struct DeskModels {
    pub softmax: TrainRun,
    pub softrmax: TrainRun,
}

impl DeskModels {
    pub fn heads(&self) -> [(&'static str, &NeuralModel); 2] {
        [
            ("softmax", &self.softmax.model),
            ("softrmax", &self.softrmax.model),
        ]
    }
}

pub fn train_desk_models(train_data: &Dataset, seed: u64) -> CliResult<DeskModels> {
    let dims = [
        train_data.dim(),
        config::HIDDEN_WIDTH,
        train_data.num_classes,
    ];
    let mut rng = RngState::from_seed(seed);
    let mut sm_rng = rng.split();
    let mut sr_rng = rng.split();
    let softmax_model = NeuralModel::init(
        &dims,
        HeadActivation::Softmax,
        InitScheme::FanInBarycenter,
        &mut sm_rng,
    )?;
    let softrmax_model = NeuralModel::init(
        &dims,
        HeadActivation::Softrmax,
        InitScheme::FanInBarycenter,
        &mut sr_rng,
    )?;
    let cfg = |lr: f64, epochs: usize| TrainConfig {
        learning_rate: lr,
        momentum: config::MOMENTUM,
        batch_size: config::BATCH_SIZE,
        epochs,
        seed,
    };
    Ok(DeskModels {
        softmax: train(
            softmax_model,
            train_data,
            &cfg(config::SOFTMAX_LR, config::SOFTMAX_EPOCHS),
        )?,
        softrmax: train(
            softrmax_model,
            train_data,
            &cfg(config::SOFTRMAX_LR, config::SOFTRMAX_EPOCHS),
        )?,
    })
}

fn digit_clip() -> Option<(f64, f64)> {
    Some(config::PIXEL_CLIP)
}

// ---------------------------------------------------------------------------
// fig1: 1-D posteriors of Gaussian vs t LDA and softmax vs softRmax linear
// models, with tail probes.
// ---------------------------------------------------------------------------

fn fig1(spec: &ExperimentSpec) -> CliResult<ExperimentOutput> {
    // Generative panel.
    let lda_data = make_uniform_1d(
        &config::FIG1_LDA_RANGES,
        config::FIG1_SAMPLES_PER_CLASS,
        spec.seed,
    )?;
    let gauss = fit_generative(&lda_data, Family::Gaussian, true)?;
    let t = fit_generative(&lda_data, Family::StudentT { nu: 1.0 }, true)?;

    let (lo, hi, step) = config::FIG1_GRID;
    let mut lda_csv = String::from("x,gaussian_p0,t_p0\n");
    let mut x = lo;
    while x <= hi + 1e-12 {
        lda_csv.push_str(&format!(
            "{},{},{}\n",
            x,
            gauss.posterior(x)[0],
            t.posterior(x)[0]
        ));
        x += step;
    }

    // Linear-model panel on the shifted supports.
    let reg_data = make_uniform_1d(
        &config::FIG1_REGRESSION_RANGES,
        config::FIG1_REGRESSION_PER_CLASS,
        spec.seed + 1,
    )?;
    let mut rng = RngState::from_seed(spec.seed);
    let mut sm_rng = rng.split();
    let mut sr_rng = rng.split();
    let cfg = |lr: f64| TrainConfig {
        learning_rate: lr,
        momentum: config::MOMENTUM,
        batch_size: config::BATCH_SIZE,
        epochs: config::FIG1_EPOCHS,
        seed: spec.seed,
    };
    let softmax_run = train(
        NeuralModel::init(
            &[1, 2],
            HeadActivation::Softmax,
            InitScheme::FanInBarycenter,
            &mut sm_rng,
        )?,
        &reg_data,
        &cfg(config::SOFTMAX_LR),
    )?;
    let softrmax_run = train(
        NeuralModel::init(
            &[1, 2],
            HeadActivation::Softrmax,
            InitScheme::FanInBarycenter,
            &mut sr_rng,
        )?,
        &reg_data,
        &cfg(config::SOFTRMAX_LR),
    )?;

    let mut reg_csv = String::from("x,softmax_p0,softrmax_p0\n");
    let mut x = lo;
    while x <= hi + 1e-12 {
        reg_csv.push_str(&format!(
            "{},{},{}\n",
            x,
            softmax_run.model.posterior(&[x])?[0],
            softrmax_run.model.posterior(&[x])?[0]
        ));
        x += step;
    }

    let p0 = |clf: &polymax::generative::GenerativeClassifier, x: f64| clf.posterior(x)[0];
    let data = json!({
        "lda": {
            "gaussian_p0_at_minus10": p0(&gauss, -10.0),
            "gaussian_p0_at_plus10": p0(&gauss, 10.0),
            "t_p0_at_minus100": p0(&t, -100.0),
            "t_p0_at_plus100": p0(&t, 100.0),
        },
        "regression": {
            "softmax_train_accuracy": accuracy(&softmax_run.model, &reg_data)?,
            "softrmax_train_accuracy": accuracy(&softrmax_run.model, &reg_data)?,
            "softmax_p0_at_minus1e4": softmax_run.model.posterior(&[-1e4])?[0],
            "softmax_p0_at_plus1e4": softmax_run.model.posterior(&[1e4])?[0],
            "softrmax_p0_at_minus1e4": softrmax_run.model.posterior(&[-1e4])?[0],
            "softrmax_p0_at_plus1e4": softrmax_run.model.posterior(&[1e4])?[0],
        },
    });

    Ok(ExperimentOutput {
        data,
        csvs: vec![
            ("fig1_lda.csv".into(), lda_csv),
            ("fig1_regression.csv".into(), reg_csv),
        ],
    })
}

// ---------------------------------------------------------------------------
// fig2: margin growth and weight-norm traces on linearly separable 2-D data.
// ---------------------------------------------------------------------------

fn fig2(spec: &ExperimentSpec) -> CliResult<ExperimentOutput> {
    let data = make_linear_2d(config::MARGIN_N, config::MARGIN_GAP, spec.seed)?;
    let mut rng = RngState::from_seed(spec.seed);
    let mut sm_rng = rng.split();
    let mut sr_rng = rng.split();
    let cfg = |lr: f64| TrainConfig {
        learning_rate: lr,
        momentum: config::MOMENTUM,
        batch_size: config::BATCH_SIZE,
        epochs: config::MARGIN_EPOCHS,
        seed: spec.seed,
    };
    let softmax_run = train(
        NeuralModel::init(
            &[2, 2],
            HeadActivation::Softmax,
            InitScheme::FanInBarycenter,
            &mut sm_rng,
        )?,
        &data,
        &cfg(config::MARGIN_SOFTMAX_LR),
    )?;
    let softrmax_run = train(
        NeuralModel::init(
            &[2, 2],
            HeadActivation::Softrmax,
            InitScheme::FanInBarycenter,
            &mut sr_rng,
        )?,
        &data,
        &cfg(config::MARGIN_SOFTRMAX_LR),
    )?;

    let mut norms_csv = String::from("epoch,softmax_norm,softrmax_norm\n");
    for (i, (a, b)) in softmax_run
        .final_layer_norms
        .iter()
        .zip(&softrmax_run.final_layer_norms)
        .enumerate()
    {
        norms_csv.push_str(&format!("{},{},{}\n", i + 1, a, b));
    }

    let reference = config::MARGIN_REFERENCE_EPOCH - 1;
    let growth = |run: &TrainRun| {
        run.final_layer_norms.last().unwrap() / run.final_layer_norms[reference]
    };
    let data_json = json!({
        "softmax": {
            "train_accuracy": accuracy(&softmax_run.model, &data)?,
            "margin": minimum_geometric_margin(&softmax_run.model, &data)?,
            "norm_growth": growth(&softmax_run),
        },
        "softrmax": {
            "train_accuracy": accuracy(&softrmax_run.model, &data)?,
            "margin": minimum_geometric_margin(&softrmax_run.model, &data)?,
            "norm_growth": growth(&softrmax_run),
        },
        "reference_epoch": config::MARGIN_REFERENCE_EPOCH,
        "epochs": config::MARGIN_EPOCHS,
    });

    Ok(ExperimentOutput {
        data: data_json,
        csvs: vec![("fig2_norms.csv".into(), norms_csv)],
    })
}

// ---------------------------------------------------------------------------
// fig3: covariate-shift importance weighting with and without outliers.
// ---------------------------------------------------------------------------

fn fig3(spec: &ExperimentSpec) -> CliResult<ExperimentOutput> {
    let lambdas = spec.lambdas_or(&config::DEFAULT_LAMBDAS);
    let clean = run_shift_experiment(spec.seed, &lambdas, false)?;
    let noisy = run_shift_experiment(spec.seed, &lambdas, true)?;

    let mut csv = String::from(
        "lambda,family,outliers,slope,intercept,target_error,median_source_weight,max_outlier_weight,capped\n",
    );
    for row in clean.rows.iter().chain(&noisy.rows) {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.lambda,
            row.family.name(),
            row.outliers,
            row.slope,
            row.intercept,
            row.target_error,
            row.median_source_weight,
            row.max_outlier_weight,
            row.capped
        ));
    }

    let pick = |exp: &polymax::shift::ShiftExperiment, family: ShiftFamily, lambda: f64| {
        exp.rows
            .iter()
            .find(|r| r.family == family && (r.lambda - lambda).abs() < 1e-12)
            .map(|r| {
                json!({
                    "target_error": r.target_error,
                    "median_source_weight": r.median_source_weight,
                    "max_outlier_weight": r.max_outlier_weight,
                })
            })
            .unwrap_or(Value::Null)
    };

    let data = json!({
        "clean": {
            "gaussian_lambda0": pick(&clean, ShiftFamily::Gaussian, 0.0),
            "gaussian_lambda1": pick(&clean, ShiftFamily::Gaussian, 1.0),
            "t_lambda0": pick(&clean, ShiftFamily::StudentT, 0.0),
            "t_lambda1": pick(&clean, ShiftFamily::StudentT, 1.0),
        },
        "outliers": {
            "gaussian_lambda0": pick(&noisy, ShiftFamily::Gaussian, 0.0),
            "gaussian_lambda1": pick(&noisy, ShiftFamily::Gaussian, 1.0),
            "t_lambda0": pick(&noisy, ShiftFamily::StudentT, 0.0),
            "t_lambda1": pick(&noisy, ShiftFamily::StudentT, 1.0),
        },
        "fitted": {
            "gaussian_source_mu": noisy.gaussian_source.mu,
            "gaussian_source_var": noisy.gaussian_source.sigma2,
            "gaussian_target_mu": noisy.gaussian_target.mu,
            "gaussian_target_var": noisy.gaussian_target.sigma2,
            "t_source_mu": noisy.t_source.mu,
            "t_source_scale": noisy.t_source.scale,
            "t_target_mu": noisy.t_target.mu,
            "t_target_scale": noisy.t_target.scale,
        },
    });

    Ok(ExperimentOutput {
        data,
        csvs: vec![("fig3.csv".into(), csv)],
    })
}

// ---------------------------------------------------------------------------
// fig4: BIM accuracy as a function of the iteration count.
// ---------------------------------------------------------------------------

fn fig4(spec: &ExperimentSpec) -> CliResult<ExperimentOutput> {
    let digits = load_digit_data(spec)?;
    let models = train_desk_models(&digits.train, spec.seed)?;
    let epsilons = spec.epsilons_or(&config::DEFAULT_EPSILONS);
    let steps = spec.bim_steps_or(&config::DEFAULT_BIM_SWEEP);

    let mut csv = String::from("epsilon,steps,head,accuracy\n");
    let mut acc_json = serde_json::Map::new();
    for (head, model) in models.heads() {
        let mut per_eps = serde_json::Map::new();
        for &eps in &epsilons {
            let mut per_t = serde_json::Map::new();
            for &t in &steps {
                let cfg = AttackConfig::new(eps, t, digit_clip())?;
                let acc =
                    accuracy_under(model, &digits.test, |x, y| bim(model, x, y, &cfg))?;
                csv.push_str(&format!("{eps},{t},{head},{acc}\n"));
                per_t.insert(t.to_string(), json!(acc));
            }
            per_eps.insert(eps.to_string(), Value::Object(per_t));
        }
        acc_json.insert(head.to_string(), Value::Object(per_eps));
    }

    let data = json!({
        "dataset": digits.train.name,
        "source": digits.source,
        "steps": steps,
        "epsilons": epsilons,
        "accuracies": acc_json,
    });

    Ok(ExperimentOutput {
        data,
        csvs: vec![("fig4.csv".into(), csv)],
    })
}

// ---------------------------------------------------------------------------
// fig5: posterior histograms of misclassified samples under FGSM.
// ---------------------------------------------------------------------------

fn fig5(spec: &ExperimentSpec) -> CliResult<ExperimentOutput> {
    let digits = load_digit_data(spec)?;
    let models = train_desk_models(&digits.train, spec.seed)?;
    let epsilons = spec.epsilons_or(&config::FIG5_EPSILONS);

    let mut csv = String::from("head,epsilon,bin_lo,bin_hi,count\n");
    let mut summary = serde_json::Map::new();
    for (head, model) in models.heads() {
        let mut per_eps = serde_json::Map::new();
        for &eps in &epsilons {
            // The far-out probe levels are deliberately unclipped; they test
            // tail behavior rather than valid-pixel attacks.
            let clip = if eps <= 1.0 { digit_clip() } else { None };
            let cfg = AttackConfig::new(eps, 1, clip)?;
            let attacked = attack_set(&digits.test, |x, y| fgsm(model, x, y, &cfg))?;

            let mut hist = Histogram::new(POSTERIOR_HISTOGRAM_BINS);
            let mut count = 0usize;
            let mut posterior_sum = 0.0;
            for (x, &y) in attacked.iter().zip(&digits.test.labels) {
                let p = model.posterior(x)?;
                let pred = polymax::models::argmax(&p);
                if pred != y {
                    hist.record(p[pred]);
                    posterior_sum += p[pred];
                    count += 1;
                }
            }
            let width = hist.bin_width();
            for (b, &c) in hist.bins.iter().enumerate() {
                csv.push_str(&format!(
                    "{head},{eps},{},{},{c}\n",
                    b as f64 * width,
                    (b + 1) as f64 * width
                ));
            }
            let mode_midpoint = hist.mode_bin().map(|b| (b as f64 + 0.5) * width);
            per_eps.insert(
                eps.to_string(),
                json!({
                    "misclassified": count,
                    "mean_predicted_posterior": if count > 0 {
                        json!(posterior_sum / count as f64)
                    } else {
                        Value::Null
                    },
                    "mode_bin_midpoint": mode_midpoint,
                }),
            );
        }
        summary.insert(head.to_string(), Value::Object(per_eps));
    }

    let data = json!({
        "dataset": digits.test.name,
        "source": digits.source,
        "epsilons": epsilons,
        "bins": POSTERIOR_HISTOGRAM_BINS,
        "histograms": summary,
    });

    Ok(ExperimentOutput {
        data,
        csvs: vec![("fig5.csv".into(), csv)],
    })
}

// ---------------------------------------------------------------------------
// fig6: magnitude-margin ratio distributions.
// ---------------------------------------------------------------------------

fn fig6(spec: &ExperimentSpec) -> CliResult<ExperimentOutput> {
    let digits = load_digit_data(spec)?;
    let models = train_desk_models(&digits.train, spec.seed)?;

    let mut csv = String::from("head,sample_id,margin,gradient_magnitude,ratio\n");
    let mut summary = serde_json::Map::new();
    for (head, model) in models.heads() {
        let (records, skipped) = ratio_records(model, &digits.test)?;
        for rec in &records {
            csv.push_str(&format!(
                "{head},{},{},{},{}\n",
                rec.sample_id, rec.margin, rec.gradient_magnitude, rec.ratio
            ));
        }
        let median = median_of(records.iter().map(|r| r.ratio).collect());
        summary.insert(
            head.to_string(),
            json!({
                "median_ratio": median,
                "records": records.len(),
                "skipped_misclassified": skipped,
            }),
        );
    }

    let data = json!({
        "dataset": digits.test.name,
        "source": digits.source,
        "ratios": summary,
    });

    Ok(ExperimentOutput {
        data,
        csvs: vec![("fig6.csv".into(), csv)],
    })
}

// ---------------------------------------------------------------------------
// table1: clean / FGSM / BIM accuracy for both heads.
// ---------------------------------------------------------------------------

fn table1(spec: &ExperimentSpec) -> CliResult<ExperimentOutput> {
    let digits = load_digit_data(spec)?;
    let models = train_desk_models(&digits.train, spec.seed)?;
    let epsilons = spec.epsilons_or(&config::DEFAULT_EPSILONS);
    let bim_t = spec
        .bim_steps_or(&[config::DEFAULT_BIM_STEPS])
        .first()
        .copied()
        .unwrap_or(config::DEFAULT_BIM_STEPS);

    let mut csv = String::from("head,attack,epsilon,steps,accuracy\n");
    let mut summary = serde_json::Map::new();
    for (head, model) in models.heads() {
        let clean = accuracy(model, &digits.test)?;
        csv.push_str(&format!("{head},clean,0,0,{clean}\n"));
        let mut head_json = serde_json::Map::new();
        head_json.insert("clean".into(), json!(clean));

        let mut fgsm_json = serde_json::Map::new();
        let mut bim_json = serde_json::Map::new();
        for &eps in &epsilons {
            let cfg = AttackConfig::new(eps, 1, digit_clip())?;
            let acc = accuracy_under(model, &digits.test, |x, y| fgsm(model, x, y, &cfg))?;
            csv.push_str(&format!("{head},fgsm,{eps},1,{acc}\n"));
            fgsm_json.insert(eps.to_string(), json!(acc));

            let cfg = AttackConfig::new(eps, bim_t, digit_clip())?;
            let acc = accuracy_under(model, &digits.test, |x, y| bim(model, x, y, &cfg))?;
            csv.push_str(&format!("{head},bim,{eps},{bim_t},{acc}\n"));
            bim_json.insert(eps.to_string(), json!(acc));
        }
        head_json.insert("fgsm".into(), Value::Object(fgsm_json));
        head_json.insert("bim".into(), Value::Object(bim_json));
        summary.insert(head.to_string(), Value::Object(head_json));
    }

    let data = json!({
        "dataset": digits.train.name,
        "source": digits.source,
        "train_size": digits.train.len(),
        "test_size": digits.test.len(),
        "bim_steps": bim_t,
        "epsilons": epsilons,
        "accuracies": summary,
    });

    Ok(ExperimentOutput {
        data,
        csvs: vec![("table1.csv".into(), csv)],
    })
}

// ---------------------------------------------------------------------------
// table2: targeted white-box, black-box substitute, and average-sample
// attacks.
// ---------------------------------------------------------------------------

fn table2(spec: &ExperimentSpec) -> CliResult<ExperimentOutput> {
    let digits = load_digit_data(spec)?;
    let models = train_desk_models(&digits.train, spec.seed)?;
    let epsilons = spec.epsilons_or(&config::DEFAULT_EPSILONS);
    let eps = epsilons.last().copied().unwrap_or(0.3);
    let cfg = AttackConfig::new(eps, 1, digit_clip())?;
    let avgs = class_averages(&digits.train);

    let substitute_cfg = TrainConfig {
        learning_rate: config::SOFTMAX_LR,
        momentum: config::MOMENTUM,
        batch_size: config::BATCH_SIZE,
        epochs: config::SUBSTITUTE_EPOCHS,
        seed: spec.seed,
    };

    let mut csv =
        String::from("head,attack,epsilon,mean_accuracy,worst_target_accuracy,agreement\n");
    let mut summary = serde_json::Map::new();
    for (head, model) in models.heads() {
        let clean = accuracy(model, &digits.test)?;
        let white = targeted_eval(model, &digits.test, |x, _y, t| {
            targeted_fgsm(model, x, t, &cfg)
        })?;
        let black = blackbox_substitute_attack(
            model,
            &digits.pool,
            &digits.test,
            &cfg,
            &substitute_cfg,
            spec.seed,
        )?;
        let avg = targeted_eval(model, &digits.test, |x, y, t| {
            average_sample_attack(x, y, t, &avgs, &cfg)
        })?;

        csv.push_str(&format!("{head},clean,0,{clean},{clean},\n"));
        csv.push_str(&format!(
            "{head},white,{eps},{},{},\n",
            white.mean_accuracy_over_targets, white.worst_target_accuracy
        ));
        csv.push_str(&format!(
            "{head},black,{eps},{},{},{}\n",
            black.outcome.mean_accuracy_over_targets,
            black.outcome.worst_target_accuracy,
            black.agreement
        ));
        csv.push_str(&format!(
            "{head},avg,{eps},{},{},\n",
            avg.mean_accuracy_over_targets, avg.worst_target_accuracy
        ));

        summary.insert(
            head.to_string(),
            json!({
                "clean": clean,
                "white": {
                    "mean": white.mean_accuracy_over_targets,
                    "worst_target": white.worst_target_accuracy,
                },
                "black": {
                    "mean": black.outcome.mean_accuracy_over_targets,
                    "worst_target": black.outcome.worst_target_accuracy,
                    "agreement": black.agreement,
                },
                "avg": {
                    "mean": avg.mean_accuracy_over_targets,
                    "worst_target": avg.worst_target_accuracy,
                },
            }),
        );
    }

    let data = json!({
        "dataset": digits.train.name,
        "source": digits.source,
        "epsilon": eps,
        "attacks": summary,
    });

    Ok(ExperimentOutput {
        data,
        csvs: vec![("table2.csv".into(), csv)],
    })
}

/// Re-exported for the acceptance suite, which shares one training run
/// across several criteria.
pub fn load_digits_for(spec: &ExperimentSpec) -> CliResult<DigitData> {
    load_digit_data(spec)
}
