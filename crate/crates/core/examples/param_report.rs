//! Parameter counts and the activation shape chain of the full-size network.
//!
//! ```text
//! cargo run --release --example param_report
//! ```

use mtl_mood::model::{Model, ModelConfig};

fn main() -> mtl_mood::Result<()> {
    for (n_mood, n_meta) in [(3, 0), (3, 50), (3, 59)] {
        let config = ModelConfig::new(n_mood, n_meta);
        let model = Model::<f32>::zeros(config.clone())?;
        let head = if n_meta == 0 {
            "no metadata head".to_string()
        } else {
            format!("{n_meta} metadata labels, alpha {:.2}", model.alpha())
        };
        println!("== {n_mood} moods, {head}");
        println!("{}", model.param_report());
    }

    let config = ModelConfig::default();
    let chain = config.spatial_chain()?;
    println!(
        "== shape chain for a {}x{} input",
        config.input_frames, config.input_bands
    );
    for (i, (h, w)) in chain.iter().enumerate().skip(1) {
        println!("block {i}: {h}x{w}x{}", config.filters_per_block);
    }
    println!("flatten width: {}", config.flatten_width()?);
    Ok(())
}
