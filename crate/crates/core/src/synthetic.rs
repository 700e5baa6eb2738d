//! Templated corpora for running the whole pipeline without proprietary data.
//!
//! Three sources:
//! - a target domain of customer-support phone turns,
//! - an external conversational style that shares its discourse patterns
//!   (greetings, acknowledgements, polite questions) but not its content,
//! - an external written style (news and encyclopedic prose).
//!
//! [`DeskScaleData`] assembles them into a noisy in-domain train/test split
//! and an external pool whose similar subset is known.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::noise::{inject_noise, NoiseConfig};
use crate::text::{extract_labels, LabeledSequence};

type Slots = &'static [(&'static str, &'static [&'static str])];

pub struct Grammar {
    templates: &'static [&'static str],
    slots: Slots,
}

impl Grammar {
    pub fn sentence<R: Rng>(&self, rng: &mut R) -> String {
        let t = self.templates.choose(rng).expect("non-empty grammar");
        let mut out = String::new();
        let mut rest = *t;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let close = open + rest[open..].find('}').expect("closed slot");
            let name = &rest[open + 1..close];
            let (_, values) = self
                .slots
                .iter()
                .find(|(n, _)| *n == name)
                .unwrap_or_else(|| panic!("unknown slot {name}"));
            out.push_str(values.choose(rng).expect("non-empty slot"));
            rest = &rest[close + 1..];
        }
        out.push_str(rest);
        out
    }

    /// One to `max_sentences` sentences joined by spaces.
    pub fn utterance<R: Rng>(&self, rng: &mut R, max_sentences: usize) -> String {
        let n = rng.random_range(1..=max_sentences.max(1));
        (0..n).map(|_| self.sentence(rng)).collect::<Vec<_>>().join(" ")
    }
}

pub const TARGET: Grammar = Grammar {
    templates: &[
        "{greet}, thank you for calling {company}. how can i help you today?",
        "{ack}, i can {action} for you.",
        "could you {request} please?",
        "what is your {info}?",
        "{ack}, let me {check} that for you.",
        "i see, so you want to {action}.",
        "is there anything else i can help you with?",
        "{ack}, that should be {state} by {day}.",
        "can i have your {info} please?",
        "well, i guess you could {action}.",
        "just hold on a second.",
        "do you have {item} with you?",
        "i will {action} and call you back {day}.",
        "{ack}, {ack}.",
        "and what was the {info} again?",
        "so, the {info} is on file.",
        "thanks, i really appreciate it.",
        "{ack}, have a great day.",
    ],
    slots: &[
        ("greet", &["hi", "hello", "good morning", "good afternoon"]),
        ("company", &["acme support", "globex", "initech billing", "our office"]),
        ("ack", &["okay", "sure", "alright", "yes", "great", "perfect", "got it"]),
        (
            "action",
            &[
                "reset your password",
                "update the account",
                "send the invoice",
                "schedule a meeting",
                "cancel the order",
                "transfer the call",
                "change the billing address",
                "renew the contract",
            ],
        ),
        (
            "request",
            &[
                "spell your last name",
                "repeat the number",
                "confirm the address",
                "verify your email",
                "read me the code",
            ],
        ),
        (
            "info",
            &[
                "account number",
                "email address",
                "phone number",
                "order number",
                "date of birth",
                "zip code",
            ],
        ),
        ("check", &["check", "look into", "confirm", "verify"]),
        ("state", &["fixed", "ready", "shipped", "updated", "processed"]),
        ("day", &["on monday", "on tuesday", "on friday", "tomorrow", "next week"]),
        ("item", &["the invoice", "your card", "the order number", "a pen"]),
    ],
};

pub const EXTERNAL_CONVERSATIONAL: Grammar = Grammar {
    templates: &[
        "{greet}, what are you doing here?",
        "{ack}, i can {mact} for you.",
        "could you {mreq} please?",
        "what is your {thing}?",
        "{ack}, let me {mact} first.",
        "well, i guess you could {mact}.",
        "is there anything else you need?",
        "i will {mact} and see you {day}.",
        "do you have {mitem} with you?",
        "{ack}, that should be {mstate} by {day}.",
        "can i have your {thing} please?",
        "just hold on a second.",
        "thanks, i really appreciate it.",
        "i see, so you want to {mact}.",
        "{ack}, {ack}.",
    ],
    slots: &[
        ("greet", &["hey", "hello", "hi there", "good evening"]),
        ("ack", &["okay", "sure", "alright", "yes", "fine", "right", "no"]),
        (
            "mact",
            &[
                "find the keys",
                "drive you home",
                "open the door",
                "call your mother",
                "fix the car",
                "take the boat",
                "wait outside",
            ],
        ),
        ("mreq", &["close the window", "tell me the truth", "stay here", "lower your voice"]),
        ("thing", &["name", "plan", "favorite song", "real name", "excuse"]),
        ("mitem", &["the gun", "your keys", "the money", "a map"]),
        ("mstate", &["safe", "done", "over", "gone"]),
        ("day", &["tonight", "tomorrow", "on sunday", "later"]),
    ],
};

pub const EXTERNAL_WRITTEN: Grammar = Grammar {
    templates: &[
        "the {adj} {noun} of {place} was {verb} in {year}, according to {source}.",
        "in {year}, the {org} announced a {adj} {noun} near {place}.",
        "{place}, which lies north of {place}, is known for its {adj} {noun}.",
        "according to {source}, the {noun} remained {adj} throughout the {period}.",
        "the {org} {verb} the {noun} after a {adj} debate in {year}.",
        "historians describe the {period} as a time of {adj} {noun} and {adj} reform.",
        "its population, mostly {adj} farmers, declined during the {period}.",
    ],
    slots: &[
        ("adj", &["ancient", "northern", "industrial", "colonial", "municipal", "coastal", "medieval"]),
        ("noun", &["cathedral", "railway", "parliament", "treaty", "harbor", "economy", "dynasty"]),
        ("place", &["lisbon", "the rhine valley", "prague", "the northern province", "kyoto"]),
        ("verb", &["established", "ratified", "abolished", "restored", "expanded"]),
        ("year", &["1848", "1912", "1756", "the early twentieth century"]),
        ("org", &["senate", "royal society", "city council", "railway company"]),
        ("source", &["contemporary records", "the census", "later scholars", "the chronicle"]),
        ("period", &["renaissance", "interwar period", "nineteenth century", "reign"]),
    ],
};

#[derive(Debug, Clone)]
pub struct DeskScaleConfig {
    pub seed: u64,
    pub train_utterances: usize,
    pub test_utterances: usize,
    pub lm_utterances: usize,
    pub external_similar: usize,
    pub external_dissimilar: usize,
    pub max_sentences: usize,
    pub noise: NoiseConfig,
}

impl Default for DeskScaleConfig {
    fn default() -> Self {
        DeskScaleConfig {
            seed: 7,
            train_utterances: 500,
            test_utterances: 300,
            lm_utterances: 2000,
            external_similar: 1500,
            external_dissimilar: 3000,
            max_sentences: 3,
            noise: NoiseConfig {
                filler_prob: 0.08,
                repeat_prob: 0.05,
                ..NoiseConfig::default()
            },
        }
    }
}

/// A line of the external pool with its provenance.
#[derive(Debug, Clone)]
pub struct ExternalLine {
    pub text: String,
    pub similar: bool,
}

#[derive(Debug, Clone)]
pub struct DeskScaleData {
    /// Noisy labeled in-domain training utterances.
    pub train: Vec<LabeledSequence>,
    /// Noisy labeled in-domain test utterances.
    pub test: Vec<LabeledSequence>,
    /// Unpunctuated in-domain transcripts for training the target LM.
    pub lm_lines: Vec<String>,
    /// Shuffled punctuated external pool.
    pub external: Vec<ExternalLine>,
}

impl DeskScaleData {
    pub fn generate(cfg: &DeskScaleConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let noisy = |rng: &mut ChaCha8Rng, idx: u64| {
            let text = TARGET.utterance(rng, cfg.max_sentences);
            let clean = extract_labels(&text).expect("templates contain words");
            inject_noise(&clean, &cfg.noise.for_utterance(cfg.seed.wrapping_mul(1_000_003) ^ idx))
                .expect("valid noise config")
        };
        let train: Vec<_> = (0..cfg.train_utterances as u64).map(|i| noisy(&mut rng, i)).collect();
        let test: Vec<_> = (0..cfg.test_utterances as u64)
            .map(|i| noisy(&mut rng, 1 << 32 | i))
            .collect();
        let lm_lines: Vec<String> = (0..cfg.lm_utterances as u64)
            .map(|i| noisy(&mut rng, 2 << 32 | i).tokens.join(" "))
            .collect();
        let mut external: Vec<ExternalLine> = Vec::new();
        for _ in 0..cfg.external_similar {
            external.push(ExternalLine {
                text: EXTERNAL_CONVERSATIONAL.utterance(&mut rng, cfg.max_sentences),
                similar: true,
            });
        }
        for _ in 0..cfg.external_dissimilar {
            external.push(ExternalLine {
                text: EXTERNAL_WRITTEN.utterance(&mut rng, 2),
                similar: false,
            });
        }
        external.shuffle(&mut rng);
        DeskScaleData {
            train,
            test,
            lm_lines,
            external,
        }
    }
}
