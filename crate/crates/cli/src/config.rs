//! Desk-scale experiment defaults. Every run records the values it actually
//! used in its manifest, and the CLI flags override them per run.

/// Digit classes for the binary desk-scale runs.
pub const DEFAULT_CLASSES: [u8; 2] = [3, 7];
/// Total training samples across classes.
pub const DEFAULT_TRAIN_CAP: usize = 2000;
/// Total test samples across classes.
pub const DEFAULT_TEST_CAP: usize = 1000;
/// Hidden width of the desk-scale network (input-128-k).
pub const HIDDEN_WIDTH: usize = 128;

/// SGD settings per head. softRmax needs the smaller step: its posterior is
/// flat far from the class anchors, so an early overshoot strands the latent
/// vector in a region without useful gradients.
pub const SOFTMAX_LR: f64 = 0.1;
pub const SOFTRMAX_LR: f64 = 0.01;
pub const MOMENTUM: f64 = 0.9;
pub const BATCH_SIZE: usize = 32;
pub const SOFTMAX_EPOCHS: usize = 15;
pub const SOFTRMAX_EPOCHS: usize = 25;

/// Attack grid defaults.
pub const DEFAULT_EPSILONS: [f64; 2] = [0.1, 0.3];
pub const DEFAULT_BIM_STEPS: usize = 10;
/// Iteration sweep for the BIM stabilization experiment.
pub const DEFAULT_BIM_SWEEP: [usize; 6] = [1, 5, 10, 25, 50, 100];
/// Pixel bounds for digit data.
pub const PIXEL_CLIP: (f64, f64) = (0.0, 1.0);

/// Weighting exponents for the covariate-shift experiment.
pub const DEFAULT_LAMBDAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Margin experiment (2-D linearly separable blobs, linear models).
/// The softmax rate is deliberately large so weight growth and posterior
/// saturation complete within the 50-epoch window being inspected.
pub const MARGIN_N: usize = 200;
pub const MARGIN_GAP: f64 = 1.0;
pub const MARGIN_EPOCHS: usize = 50;
pub const MARGIN_SOFTMAX_LR: f64 = 3.0;
pub const MARGIN_SOFTRMAX_LR: f64 = 0.01;
/// Epoch (1-based) against which final weight-norm growth is measured.
pub const MARGIN_REFERENCE_EPOCH: usize = 5;

/// Posterior-histogram attack levels; the last one is an unclipped synthetic
/// probe far outside the pixel range.
pub const FIG5_EPSILONS: [f64; 3] = [0.0, 0.3, 100.0];

/// Grid for the 1-D posterior curves.
pub const FIG1_GRID: (f64, f64, f64) = (-20.0, 20.0, 0.05);
/// Samples per class for the 1-D generative experiment.
pub const FIG1_SAMPLES_PER_CLASS: usize = 10_000;
/// Uniform class supports for the generative (LDA) panel.
pub const FIG1_LDA_RANGES: [(f64, f64); 2] = [(-2.0, -1.0), (1.0, 2.0)];
/// Uniform class supports for the linear-model panel.
pub const FIG1_REGRESSION_RANGES: [(f64, f64); 2] = [(-1.0, 0.0), (1.0, 2.0)];
/// Samples per class for the linear-model panel.
pub const FIG1_REGRESSION_PER_CLASS: usize = 2000;
/// Training epochs for the 1-D linear models.
pub const FIG1_EPOCHS: usize = 100;

/// Substitute training for the black-box attack.
pub const SUBSTITUTE_EPOCHS: usize = 15;

/// Defaults for `make-data` (per class, before caps are applied).
pub const SYNTH_PER_CLASS_TRAIN: usize = 2200;
pub const SYNTH_PER_CLASS_TEST: usize = 550;
/// Corpus seed offsets keep train/test/pool draws disjoint.
pub const SYNTH_TEST_SEED_OFFSET: u64 = 1;

/// Environment variable for the default data directory.
pub const DATA_DIR_ENV: &str = "POLYMAX_DATA_DIR";

/// MNIST file names looked for first; the `synth-` prefixed names are the
/// generated stand-in corpus.
pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte",
    "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte",
    "t10k-labels-idx1-ubyte",
];
pub const SYNTH_FILES: [&str; 4] = [
    "synth-train-images-idx3-ubyte",
    "synth-train-labels-idx1-ubyte",
    "synth-t10k-images-idx3-ubyte",
    "synth-t10k-labels-idx1-ubyte",
];
