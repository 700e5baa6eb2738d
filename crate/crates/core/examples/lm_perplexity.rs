//! Train a trigram Kneser-Ney model on in-domain transcripts and compare
//! perplexities of in-domain and out-of-domain lines.

use punct_restore::lm::{train_from_lines, Smoothing, BOS};

fn main() -> punct_restore::Result<()> {
    let corpus = [
        "thank you for calling how can i help you today",
        "can i have your account number please",
        "okay let me check that for you",
        "is there anything else i can help you with",
        "thank you for calling have a great day",
        "okay i can reset your password for you",
    ];
    let lm = train_from_lines(&corpus, 3, 1, Smoothing::default())?;
    println!("{} words, {} stored n-grams", lm.vocab().len(), lm.num_entries());

    for line in [
        "thank you for calling",
        "can i help you with your account",
        "the treaty was ratified in 1848",
    ] {
        println!("{:>10.3}  {line}", lm.line_perplexity(line).unwrap());
    }

    // every context defines a proper distribution over the scorable words
    let ctx = [BOS, lm.vocab().id("thank")];
    let total: f64 = lm.vocab().scorable_ids().map(|w| lm.prob(&ctx, w)).sum();
    println!("sum of p(w | <s> thank) = {total:.12}");
    Ok(())
}
