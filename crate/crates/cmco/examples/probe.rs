use cmco::deeponet::{build_model, BranchConfig, BranchKind, TrunkConfig};
use cmco::nn::dense::Activation;
use cmco::nn::rng::RngStream;
use cmco::tasks::{generate, split_dataset, SplitSpec, TaskSpec};
use cmco::train::{attach_normalization, fit, PlateauConfig, TrainConfig};
use cmco::uq::relative_l2;

fn run(task: TaskSpec, epochs: usize, lr: f64, batch: usize, p_drop: f64, seed: u64, label: &str) {
    let started = std::time::Instant::now();
    let full = generate(&task).unwrap();
    let (train_split, _, test_split) = split_dataset(&full, &SplitSpec::Counts(600, 200, 200), 3).unwrap();
    let mut model = build_model(
        BranchConfig { kind: BranchKind::Gru, input_channels: 1, hidden: 32, layers: 1, dropout: p_drop, layer_norm: true },
        TrunkConfig { widths: vec![1, 64, 32], activation: Activation::Tanh, dropout: p_drop },
        RngStream::new(seed, 0),
    ).unwrap();
    attach_normalization(&mut model, &train_split).unwrap();
    let config = TrainConfig {
        epochs, batch_size: batch, learning_rate: lr, seed,
        plateau: PlateauConfig { factor: 0.5, patience: 20, rel_threshold: 1e-4, min_lr: 1e-5 },
        ..Default::default()
    };
    let hist = fit(&mut model, &train_split, &config).unwrap();
    let mut total = 0.0;
    for i in 0..test_split.len() {
        let pred = model.forward(&test_split.branch_inputs[i], &test_split.grid, false, RngStream::new(0, 0)).unwrap();
        total += relative_l2(&pred, test_split.fields.row(i)).unwrap();
    }
    println!(
        "{label}: final_loss={:.3e} lr_end={:.1e} test relL2={:.2}% in {:.1?}",
        hist.last().unwrap().train_loss,
        hist.last().unwrap().lr,
        total / test_split.len() as f64,
        started.elapsed()
    );
}

fn main() {
    run(TaskSpec::antiderivative(1000, 64, 256, 11), 400, 2e-3, 16, 0.05, 12, "anti E400 b16 p05");
    run(TaskSpec::heat1d(1000, 64, 256, 11), 300, 2e-3, 16, 0.05, 12, "heat E300 b16 p05");
}
