//! Filler and repetition cleanup, keeping punctuation labels aligned.

use punct_restore::text::{apply_labels, Normalizer};

fn main() {
    let mut n = Normalizer::default();
    let lines = [
        "Um, I I think so.",
        "uh can you can you hear me?",
        "So the the the account is, uh, closed.",
        "I want to I want to cancel my order.",
        "hmm",
    ];
    for line in lines {
        match n.normalize_line(line) {
            Ok(seq) => println!("{line:45} -> {}", apply_labels(&seq)),
            Err(e) => println!("{line:45} -> ({e})"),
        }
    }

    n.false_starts = true;
    let seq = n.normalize_line("i was i think it was monday.").unwrap();
    println!("with false starts: {}", apply_labels(&seq));
}
