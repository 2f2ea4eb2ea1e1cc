// Latent semantic analysis of report features at a few ranks.

use svassess::features::{FeatureModel, NlpConfig};
use svassess::pipeline::report_tokens;
use svassess::reduce::lsa_fit;
use svassess::synth::bundled_reports;
use svassess::Result;

pub fn run() -> Result<()> {
    let docs: Vec<Vec<String>> = bundled_reports()
        .records
        .iter()
        .map(|r| report_tokens(&r.description))
        .collect();
    let model = FeatureModel::fit_word(&docs, &NlpConfig::table(2)?)?;
    let rows = model.transform_all(&docs);
    let total: f64 = rows.iter().map(|r| r.norm().powi(2)).sum::<f64>().sqrt();
    println!("{} documents x {} terms, Frobenius norm {total:.3}", rows.len(), model.width());
    for k in [2, 5, 10, 25, 50] {
        let lsa = lsa_fit(&rows, k, 0)?;
        let err = lsa.reconstruction_error(&rows)?;
        println!("k = {k:>2}: reconstruction error {err:.3} ({:.1}% of the norm)", 100.0 * err / total);
    }
    let lsa = lsa_fit(&rows, 5, 0)?;
    println!("report 0 in 5 dimensions: {:.3?}", lsa.transform(&rows[0])?);
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
