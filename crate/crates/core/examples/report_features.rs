// Word, char and aggregated char-word features of report descriptions.

use svassess::features::{FeatureModel, NlpConfig};
use svassess::pipeline::report_tokens;
use svassess::synth::bundled_reports;
use svassess::Result;

pub fn run() -> Result<()> {
    let reports = bundled_reports();
    let docs: Vec<Vec<String>> = reports.records.iter().map(|r| report_tokens(&r.description)).collect();
    println!("first description: {}", reports.records[0].description);
    println!("tokens: {:?}", docs[0]);

    let config = NlpConfig::table(2)?;
    let word = FeatureModel::fit_word(&docs, &config)?;
    let char = FeatureModel::fit_char(&docs, &config)?;
    let both = FeatureModel::fit_char_word(&docs, &config)?;
    println!("word width {}, char width {}, char-word width {}", word.width(), char.width(), both.width());

    let row = both.transform(&docs[0]);
    println!("report 0 has {} non-zero char-word features, norm {:.3}", row.nnz(), row.norm());
    let unseen = report_tokens("Heap overflow in the zzyzx codec lets attackers crash the player");
    println!("unseen text: {} word hits, {} char-word hits", word.transform(&unseen).nnz(), both.transform(&unseen).nnz());
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
