//! Per-class and overall metrics, and the support-weighted aggregation on its
//! own.

use punct_restore::eval::{confusion_counts, prf, support_weighted, Prf};
use punct_restore::text::PunctLabel::{self, *};

fn main() -> punct_restore::Result<()> {
    let gold = [None, Comma, None, Period, None, QuestionMark, Comma, Period];
    let pred = [None, Comma, Comma, Period, None, Period, None, Period];
    let report = prf(&confusion_counts(&pred, &gold)?);
    for c in &report.classes {
        println!(
            "{:<13} tp {} fp {} fn {}  P {:6.2} R {:6.2} F1 {:6.2}",
            c.label.as_str(),
            c.counts.tp,
            c.counts.fp,
            c.counts.fn_,
            c.metrics.precision,
            c.metrics.recall,
            c.metrics.f1
        );
    }
    println!("overall (weighted) F1 {:.2}, micro F1 {:.2}", report.overall.f1, report.micro.f1);

    // aggregating published per-class rows with their supports
    let rows: [(PunctLabel, f64, f64, f64, u64); 3] = [
        (Period, 72.57, 77.89, 75.14, 3880),
        (QuestionMark, 84.63, 63.91, 72.83, 629),
        (Comma, 77.23, 57.79, 66.11, 6503),
    ];
    let per_class: Vec<(Prf, u64)> = rows
        .iter()
        .map(|&(_, precision, recall, f1, s)| (Prf { precision, recall, f1 }, s))
        .collect();
    let o = support_weighted(&per_class);
    println!("weighted: P {:.2} R {:.2} F1 {:.2}", o.precision, o.recall, o.f1);
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    Ok(())
}
