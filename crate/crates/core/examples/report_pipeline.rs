// The full report-level run the `assess` binary performs: train with a
// grid search, score the held-out year, then assess a new description.

use svassess::eval::Policy;
use svassess::pipeline::{assess_text, evaluate, render_report, train, AssessModel, FeatureSpec, NlpVariant, PipelineConfig};
use svassess::synth::BUNDLED_REPORTS;
use svassess::{Error, Result};

pub fn run() -> Result<()> {
    let dir = tempfile::tempdir().map_err(|source| Error::Io {
        path: std::env::temp_dir(),
        source,
    })?;
    let data = dir.path().join("reports.jsonl");
    std::fs::write(&data, BUNDLED_REPORTS).map_err(|source| Error::Io {
        path: data.clone(),
        source,
    })?;
    let config = PipelineConfig {
        dataset: Some(data),
        features: vec![FeatureSpec::Nlp {
            config: 1,
            variant: NlpVariant::CharWord,
        }],
        classifiers: vec!["nb".into(), "lr".into()],
        policy: Policy::Ch3,
        folds: 3,
        seed: 1,
        out: dir.path().join("run"),
        ..PipelineConfig::default()
    };
    let summary = train(&config)?;
    for t in &summary.tasks {
        println!("{:<24} selected {}", t.task, t.selected);
    }
    print!("{}", render_report(&evaluate(&config.out)?));

    let model = AssessModel::load(&config.out.join("model.json"))?;
    let text = "Cross-site scripting in the admin panel allows remote attackers to inject arbitrary web script";
    for (task, label) in assess_text(&model, text)? {
        println!("{task:<24} {label}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
