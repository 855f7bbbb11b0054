//! Threshold metrics and AUC on a hand-made score vector.

use gbm_ssrf::metrics::{auc_roc, build_report, comparison_table, confusion, ComparisonRow};

fn main() -> gbm_ssrf::Result<()> {
    let labels = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let scores = [0.9, 0.6, 0.3, 0.7, 0.3, 0.2, 0.2, 0.1, 0.05, 0.0];

    println!("AUC-ROC {:.4}", auc_roc(&labels, &scores)?);
    for t in [0.1, 0.3, 0.5, 0.8] {
        let c = confusion(&labels, &scores, t)?;
        println!("threshold {t:.1}: tp {} fp {} tn {} fn {}", c.tp, c.fp, c.tn, c.fn_);
    }

    let report = build_report(&labels, &scores, 0.5)?;
    print!("{}", report.to_text());
    println!("{}", serde_json::to_string(&report).unwrap());

    // precision is undefined when nothing is flagged
    let none = build_report(&labels, &scores, 0.95)?;
    println!("precision at 0.95: {:?}", none.precision);

    let rows = [ComparisonRow::from_report("at 0.5", &report), ComparisonRow::from_report("at 0.95", &none)];
    print!("{}", comparison_table(&rows));
    Ok(())
}
