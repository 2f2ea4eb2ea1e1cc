// Train the attention-based convolutional GRU on synthetic commits.

use svassess::neural::{predict_acgru, train_acgru, AcGruConfig, CodeVocabulary, CommitInput, Sample};
use svassess::scopes::commit_inputs;
use svassess::synth::synthetic_commits;
use svassess::Result;

pub fn run() -> Result<()> {
    let ds = synthetic_commits(48, 3);
    let streams: Vec<_> = ds.records.iter().map(commit_inputs).collect();
    let vocab = CodeVocabulary::build(streams.iter().flat_map(|s| s.streams()), 200);
    let labels: Vec<_> = ds.records.iter().map(|r| &r.labels).collect();
    let config = AcGruConfig {
        vocab_size: vocab.len(),
        input_len: 32,
        embed_dim: 8,
        filters: 6,
        gru_hidden: 8,
        attention_hidden: 8,
        task_hidden: 8,
        tasks: AcGruConfig::tasks_from_labels(&ds.tasks, labels.iter().copied()),
        epochs: 15,
        batch: 8,
        lr: 0.005,
        seed: 3,
        ..AcGruConfig::default()
    };
    let samples = ds
        .records
        .iter()
        .zip(&streams)
        .map(|(r, s)| {
            Ok(Sample {
                input: CommitInput::encode(&vocab, s.streams(), config.input_len),
                gold: config.encode_labels(&r.labels)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (train, val) = samples.split_at(36);
    let out = train_acgru(&config, train, val)?;
    print!("{}", out.history_csv());
    println!("best epoch {}", out.best_epoch);
    let first = predict_acgru(&out.params, &val[0].input)?;
    for (task, (class, probs)) in config.tasks.iter().zip(&first) {
        println!("{:<24} {:<10} p = {:.2}", task.name, task.labels[*class], probs[*class]);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
