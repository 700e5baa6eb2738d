//! Inject ASR-like disfluencies into clean sentences, then undo them.

use punct_restore::noise::{inject_noise, NoiseConfig};
use punct_restore::text::{apply_labels, extract_labels, Normalizer};

fn main() -> punct_restore::Result<()> {
    let cfg = NoiseConfig {
        filler_prob: 0.2,
        repeat_prob: 0.15,
        ..Default::default()
    };
    let normalizer = Normalizer::default();
    for (i, text) in [
        "Okay, I can send the invoice for you.",
        "What is your zip code?",
        "Sure, let me check that. Is there anything else?",
    ]
    .iter()
    .enumerate()
    {
        let clean = extract_labels(text)?;
        let noisy = inject_noise(&clean, &cfg.for_utterance(i as u64))?;
        let restored = normalizer.clean_labeled(&noisy)?;
        println!("noisy:    {}", apply_labels(&noisy));
        println!("restored: {}", apply_labels(&restored));
        assert_eq!(restored, clean);
    }
    Ok(())
}
