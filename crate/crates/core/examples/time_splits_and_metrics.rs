// The three split protocols on dated records, and the metric report.

use svassess::eval::{compute_metrics, rounds10_wrap_splits, rounds12_splits, time_kfold_splits};
use svassess::synth::bundled_reports;
use svassess::Result;

pub fn run() -> Result<()> {
    let reports = bundled_reports().records;
    for plan in [
        time_kfold_splits(&reports, 5)?,
        rounds12_splits(&reports)?,
        rounds10_wrap_splits(&reports, 7)?,
    ] {
        let sizes: Vec<String> = plan
            .splits
            .iter()
            .map(|s| format!("{}/{}/{}", s.train.len(), s.validation.len(), s.test.as_ref().map_or(0, Vec::len)))
            .collect();
        println!(
            "{:<10} {} tuples, {} ordering violations: {}",
            plan.protocol.name(),
            plan.len(),
            plan.violations(&reports).len(),
            sizes.join(" ")
        );
    }

    let gold = ["High", "High", "Low", "Medium", "Low", "High"];
    let pred = ["High", "Medium", "Low", "Medium", "High", "High"];
    let m = compute_metrics(&gold, &pred)?;
    println!("{}", m.to_table());
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
