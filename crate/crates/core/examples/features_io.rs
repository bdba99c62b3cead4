//! Featurise once, save the bit-packed matrix, reload it and train.
//!
//!     cargo run --release --example features_io

use qks::ansatz::Ansatz;
use qks::experiments::{build_machine, featurize_pair, DatasetSource, RunConfig};
use qks::features::{load_features, save_features, FeatureMetadata};
use qks::linear::{evaluate, train, TrainOptions};
use qks::Split;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = DatasetSource::frames(1).load()?;
    let machine = build_machine(&data, &RunConfig::new(Ansatz::Cnot2, 1.0, 500, 3))?;
    let (train_x, test_x) = featurize_pair(&machine, &data)?;

    let dir = std::env::temp_dir().join("qks-features-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("train.qksf");
    save_features(
        &path,
        &train_x,
        &FeatureMetadata::describe(&machine, Split::Train, &train_x),
    )?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path)?.len());

    let (loaded, meta) = load_features(&path)?;
    assert_eq!(loaded, train_x);
    println!(
        "{} x {}, template {}, sigma {}, seed {}",
        meta.rows, meta.cols, meta.template, meta.sigma, meta.seed
    );

    // the first 100 episodes are a valid smaller machine
    let q = machine.num_qubits();
    for e in [100, 500] {
        let (model, _) = train(
            &loaded.truncate_cols(e * q),
            &data.train.labels,
            &TrainOptions::default(),
        )?;
        let err = evaluate(&model, &test_x.truncate_cols(e * q), &data.test.labels);
        println!("{e} episodes: test error {err:.4}");
    }
    Ok(())
}
