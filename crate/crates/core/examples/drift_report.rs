// New terms per year and how well a model of older reports covers newer ones.

use chrono::Datelike;

use svassess::drift::{drift_report, DatedDoc};
use svassess::features::{FeatureModel, NlpConfig};
use svassess::pipeline::report_tokens;
use svassess::synth::bundled_reports;
use svassess::Result;

pub fn run() -> Result<()> {
    let docs: Vec<DatedDoc> = bundled_reports()
        .records
        .iter()
        .map(|r| DatedDoc {
            id: r.id.clone(),
            year: r.published_date.year(),
            tokens: report_tokens(&r.description),
        })
        .collect();
    let from = 2016;
    let old: Vec<Vec<String>> = docs.iter().filter(|d| d.year < from).map(|d| d.tokens.clone()).collect();
    let config = NlpConfig::table(1)?;
    for (name, model) in [
        ("word", FeatureModel::fit_word(&old, &config)?),
        ("char-word", FeatureModel::fit_char_word(&old, &config)?),
    ] {
        let report = drift_report(&model, &docs, from);
        println!("{name} model fitted before {from}:");
        print!("{}", report.to_table());
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
