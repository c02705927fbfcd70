//! ROC curve and AUC of a handful of scores, overall and per group.
//!
//! cargo run --example roc_evaluation

use meshgnn::pipeline::{roc_auc, stratified_metrics, Metrics};

fn main() -> meshgnn::Result<()> {
    let labels = [0, 0, 1, 1, 0, 1, 1, 0, 1, 0];
    let scores = [0.10, 0.40, 0.35, 0.80, 0.35, 0.90, 0.60, 0.20, 0.50, 0.70];
    let roc = roc_auc(&scores, &labels)?;
    println!("auc {:.4}", roc.auc);
    for (fpr, tpr) in &roc.points {
        println!("  fpr {fpr:.2}  tpr {tpr:.2}");
    }

    let predicted: Vec<usize> = scores.iter().map(|&s| (s >= 0.5) as usize).collect();
    print!("{}", Metrics::compute(&scores, &predicted, &labels)?.to_text());
    let site: Vec<String> = (0..10).map(|i| if i < 5 { "north" } else { "south" }.into()).collect();
    for (group, m) in stratified_metrics(&scores, &predicted, &labels, &site)? {
        println!("{group}: n {} auc {:?}", m.n, m.auc());
    }
    Ok(())
}
