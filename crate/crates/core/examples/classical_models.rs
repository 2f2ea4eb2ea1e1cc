// Every classifier family on one task, trained on early years and tested
// on later ones, plus the clustering baseline over all tasks.

use chrono::Datelike;

use svassess::eval::compute_metrics;
use svassess::features::{FeatureModel, NlpConfig};
use svassess::models::{kmeans_fit, train_classifier, ClassifierSpec, KnnWeight, UcvaModel};
use svassess::pipeline::report_tokens;
use svassess::reduce::lsa_fit;
use svassess::synth::bundled_reports;
use svassess::Result;

pub fn run() -> Result<()> {
    let ds = bundled_reports();
    let (train, test): (Vec<_>, Vec<_>) = ds.records.iter().partition(|r| r.published_date.year() < 2017);
    let tokens = |rs: &[&svassess::corpus::SvReport]| -> Vec<Vec<String>> {
        rs.iter().map(|r| report_tokens(&r.description)).collect()
    };
    let (train_docs, test_docs) = (tokens(&train), tokens(&test));
    let model = FeatureModel::fit_char_word(&train_docs, &NlpConfig::table(2)?)?;
    let xtr = model.transform_all(&train_docs);
    let xte = model.transform_all(&test_docs);
    let task = "severity";
    let ytr: Vec<String> = train.iter().map(|r| r.labels[task].clone()).collect();
    let yte: Vec<String> = test.iter().map(|r| r.labels[task].clone()).collect();
    println!("{task}: {} training, {} test reports", train.len(), test.len());

    for spec in [
        ClassifierSpec::NaiveBayes,
        ClassifierSpec::LogisticRegression { c: 10.0 },
        ClassifierSpec::LinearSvm { c: 1.0 },
        ClassifierSpec::Knn {
            k: 5,
            weight: KnnWeight::Distance,
            p: 2,
        },
    ] {
        let fitted = train_classifier(&spec, &xtr, &ytr, 1)?;
        let m = compute_metrics(&yte, &fitted.predict_all(&xte)?)?;
        println!("{:<22} accuracy {:.3}  mcc {:.3}", spec.label(), m.accuracy, m.mcc);
    }

    let lsa = lsa_fit(&xtr, 10, 1)?;
    let points = lsa.transform_all(&xtr)?;
    let labels: Vec<_> = train.iter().map(|r| r.labels.clone()).collect();
    let ucva = UcvaModel::fit(kmeans_fit(&points, 8, 1)?, &points, &labels, &ds.tasks)?;
    let mut hits = 0;
    for (r, x) in test.iter().zip(&xte) {
        let assigned = ucva.assign(&lsa.transform(x)?);
        hits += ds.tasks.iter().filter(|t| assigned.get(*t) == r.labels.get(*t)).count();
    }
    println!("k-means baseline: {:.3} of test labels right", hits as f64 / (test.len() * ds.tasks.len()) as f64);
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
