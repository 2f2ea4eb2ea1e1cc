//! Porter stemmer against a reference vocabulary (word, stem per line).

use svassess::textprep::porter_stem;

#[test]
fn reference_vocabulary() {
    let text = include_str!("fixtures/porter_vocabulary.txt");
    let mut wrong = Vec::new();
    let mut total = 0;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (word, stem) = line.split_once(' ').expect("word and stem");
        total += 1;
        let got = porter_stem(word);
        if got != stem {
            wrong.push(format!("{word}: {got} != {stem}"));
        }
    }
    assert!(total >= 100);
    assert!(wrong.is_empty(), "{}", wrong.join("\n"));
}

#[test]
fn short_words_untouched() {
    for w in ["a", "is", "as", "at"] {
        assert_eq!(porter_stem(w), w);
    }
}
