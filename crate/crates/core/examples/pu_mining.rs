// Keyword filtering of posts, then positive-unlabeled learning over their
// LSA embeddings.

use svassess::corpus::{PostLabel, Site};
use svassess::pumine::{content_filter, pu_train, ContentFilterConfig, EmbeddedPost, KeywordSet, LsaEmbedder, PuConfig};
use svassess::synth::synthetic_posts;
use svassess::textprep::{preprocess_text, PrepConfig};
use svassess::Result;

pub fn run() -> Result<()> {
    let posts = synthetic_posts(40, 120, 0.3, 2);
    let so: Vec<_> = posts.iter().filter(|p| p.site == Site::StackOverflow).cloned().collect();
    let keywords = KeywordSet::bundled();
    let config = ContentFilterConfig::default();
    for step in [1, 2] {
        let kept = content_filter(&so, Site::StackOverflow, step, &config, &keywords)?;
        println!("step {step}: {} of {} SO posts pass", kept.len(), so.len());
    }

    let prep = PrepConfig::default();
    let docs: Vec<Vec<String>> = posts.iter().map(|p| preprocess_text(&p.full_text(), &prep)).collect();
    let embedder = LsaEmbedder::fit(&docs, 20, 2)?;
    let (mut p, mut u) = (Vec::new(), Vec::new());
    for (post, doc) in posts.iter().zip(&docs) {
        let e = EmbeddedPost::new(post.id.clone(), embedder.embed(doc)?);
        match post.label {
            PostLabel::Positive => p.push(e),
            PostLabel::Unlabeled => u.push(e),
        }
    }
    for alpha in [0.5, 1.0, 2.0] {
        let model = pu_train(&p, &u, &PuConfig { alpha, ..PuConfig::default() }, 2)?;
        let mut found = 0;
        for e in &u {
            found += usize::from(model.is_positive(&e.vector)?);
        }
        println!(
            "alpha {alpha}: {} reliable negatives, {found} of {} unlabeled posts predicted positive",
            model.reliable_negative_ids.len(),
            u.len()
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
