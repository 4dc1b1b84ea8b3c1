//! Draws a long-tailed Gaussian-mixture dataset and shows the head/tail split.
//!
//! `cargo run --example generate_data -- [out.csv]`

use ltshare::data::{generate, split_classes, GenConfig};

fn main() -> ltshare::Result<()> {
    let cfg = GenConfig {
        num_classes: 10,
        input_dim: 8,
        imbalance_ratio: 20.0,
        n_max: 200,
        class_mean_scale: 1.5,
        latent_dim: Some(3),
        seed: 1,
        ..GenConfig::default()
    };
    let data = generate(&cfg)?;
    let split = split_classes(&data.class_counts)?;
    println!("{} samples, {} features", data.len(), data.features.cols());
    println!("class counts {:?}", data.class_counts);
    println!("head (task A) {:?}", split.head);
    println!("tail (task B) {:?}", split.tail);
    let priors = data.priors();
    let head_mass: f64 = split.head.iter().map(|&c| priors[c]).sum();
    println!("head classes hold {:.1}% of the data", 100.0 * head_mass);

    if let Some(path) = std::env::args().nth(1) {
        data.save_csv(path.as_ref())?;
        println!("wrote {path}");
    }
    Ok(())
}
