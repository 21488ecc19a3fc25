//! Digit-corpus resolution: real MNIST IDX files when present, the generated
//! synthetic stand-in otherwise, with deterministic stratified splits for
//! train / substitute-pool / test.

use std::path::{Path, PathBuf};

use polymax::data::{
    make_synth_digits, read_idx, write_idx, Dataset, SubsetSpec, DIGIT_SIDE,
};
use polymax::numeric::Matrix;

use crate::config;
use crate::error::{CliError, CliResult};
use crate::spec::ExperimentSpec;

/// The train/pool/test triple used by every digit experiment. The pool is
/// disjoint from the training rows by construction and feeds the black-box
/// substitute attack.
pub struct DigitData {
    pub train: Dataset,
    pub pool: Dataset,
    pub test: Dataset,
    /// "mnist" or "synthetic".
    pub source: &'static str,
}

fn existing_quad(dir: &Path, names: &[&str; 4]) -> Option<[PathBuf; 4]> {
    let paths = names.map(|n| dir.join(n));
    if paths.iter().all(|p| p.is_file()) {
        Some(paths)
    } else {
        None
    }
}

/// First `per_class` rows of each class (in row order) go left, the rest go
/// right. Row order is already seeded-shuffled upstream, so this is a
/// deterministic random split.
fn split_stratified(ds: &Dataset, per_class: usize) -> CliResult<(Dataset, Dataset)> {
    let mut taken = vec![0usize; ds.num_classes];
    let mut left_rows = Vec::new();
    let mut left_labels = Vec::new();
    let mut right_rows = Vec::new();
    let mut right_labels = Vec::new();
    for i in 0..ds.len() {
        let (x, y) = ds.sample(i);
        if taken[y] < per_class {
            taken[y] += 1;
            left_rows.push(x.to_vec());
            left_labels.push(y);
        } else {
            right_rows.push(x.to_vec());
            right_labels.push(y);
        }
    }
    let left = Dataset::new(
        Matrix::from_rows(&left_rows)?,
        left_labels,
        ds.num_classes,
        format!("{}-head", ds.name),
    )?;
    let right = Dataset::new(
        Matrix::from_rows(&right_rows)?,
        right_labels,
        ds.num_classes,
        format!("{}-tail", ds.name),
    )?;
    Ok((left, right))
}

/// Loads the digit corpus for a spec, preferring real MNIST files.
pub fn load_digit_data(spec: &ExperimentSpec) -> CliResult<DigitData> {
    let k = spec.classes.len();
    if k < 2 {
        return Err(CliError::Config(
            "digit experiments need at least two classes".into(),
        ));
    }
    let per_class_train = spec.train_cap / k;
    let per_class_test = spec.test_cap / k;
    if per_class_train == 0 || per_class_test == 0 {
        return Err(CliError::Config(format!(
            "caps too small for {k} classes: train {} test {}",
            spec.train_cap, spec.test_cap
        )));
    }
    // The pool reuses the train file beyond the training rows.
    let per_class_with_pool = 2 * per_class_train;

    let (paths, source) = if let Some(p) = existing_quad(&spec.data_dir, &config::MNIST_FILES) {
        (p, "mnist")
    } else if let Some(p) = existing_quad(&spec.data_dir, &config::SYNTH_FILES) {
        (p, "synthetic")
    } else {
        let list = |names: &[&str; 4]| {
            names
                .map(|n| spec.data_dir.join(n).display().to_string())
                .join("\n  ")
        };
        return Err(CliError::MissingData {
            dir: spec.data_dir.clone(),
            mnist: list(&config::MNIST_FILES),
            synth: list(&config::SYNTH_FILES),
        });
    };

    let train_subset = SubsetSpec {
        classes: Some(spec.classes.clone()),
        per_class_cap: Some(per_class_with_pool),
        seed: spec.seed,
    };
    let full_train = read_idx(&paths[0], &paths[1], Some(&train_subset))?;
    let (train, pool) = split_stratified(&full_train, per_class_train)?;

    let test_subset = SubsetSpec {
        classes: Some(spec.classes.clone()),
        per_class_cap: Some(per_class_test),
        seed: spec.seed + config::SYNTH_TEST_SEED_OFFSET,
    };
    let test = read_idx(&paths[2], &paths[3], Some(&test_subset))?;

    Ok(DigitData {
        train,
        pool,
        test,
        source,
    })
}

/// Renders the synthetic digit corpus and writes it as IDX pairs with the
/// raw digit values as labels, so loading goes through the same class-filter
/// path as real MNIST.
pub fn make_data(
    data_dir: &Path,
    classes: &[u8],
    per_class_train: usize,
    per_class_test: usize,
    seed: u64,
) -> CliResult<[PathBuf; 4]> {
    std::fs::create_dir_all(data_dir)?;
    let paths = config::SYNTH_FILES.map(|n| data_dir.join(n));
    let splits = [
        (per_class_train, seed, 0usize),
        (per_class_test, seed + config::SYNTH_TEST_SEED_OFFSET, 2),
    ];
    for (per_class, corpus_seed, path_idx) in splits {
        let ds = make_synth_digits(classes, per_class, corpus_seed)?;
        // map list-index labels back to raw digit values
        let raw = Dataset::new(
            ds.features.clone(),
            ds.labels.iter().map(|&l| classes[l] as usize).collect(),
            10,
            ds.name.clone(),
        )?;
        write_idx(
            &raw,
            DIGIT_SIDE,
            DIGIT_SIDE,
            &paths[path_idx],
            &paths[path_idx + 1],
        )?;
    }
    Ok(paths)
}
