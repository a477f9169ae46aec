//! Average precision, ROC-AUC and a macro-averaged report with an excluded label.
//!
//! ```text
//! cargo run --release --example metrics
//! ```

use mtl_mood::cli::format_metrics;
use mtl_mood::metrics::{average_precision, macro_metrics, roc_auc, MetricsError, ScoredLabelSet};

fn main() -> Result<(), MetricsError> {
    let scores = [0.9, 0.8, 0.1];
    let targets = [true, false, true];
    println!(
        "scores {scores:?}, targets {targets:?}: AP {:.4}, ROC-AUC {:.4}",
        average_precision(&scores, &targets)?,
        roc_auc(&scores, &targets)?
    );

    let tied = [0.5, 0.5, 0.5, 0.5];
    println!(
        "all scores tied: AP {:.4}, ROC-AUC {:.4}",
        average_precision(&tied, &[true, false, false, true])?,
        roc_auc(&tied, &[true, false, false, true])?
    );

    let set = ScoredLabelSet {
        labels: vec!["happy".into(), "sad".into(), "calm".into()],
        scores: vec![
            vec![0.9, 0.2, 0.4],
            vec![0.3, 0.8, 0.1],
            vec![0.6, 0.7, 0.3],
            vec![0.2, 0.1, 0.2],
        ],
        targets: vec![
            vec![true, false, false],
            vec![false, true, false],
            vec![true, true, false],
            vec![false, false, false],
        ],
    };
    println!("\n{}", format_metrics(&macro_metrics(&set)?));
    println!("(`calm` has no positive song, so it is excluded from both averages)");
    Ok(())
}
