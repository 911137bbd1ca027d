//! Seeded synthetic project standing in for a real extractor run.
//!
//! Eight planted concepts, each a small vocabulary whose occurrences are
//! drawn around its own Gaussian center. Sentences mix words from several
//! concepts and carry one of two classes; in positive sentences containing
//! "captures" that word receives the largest attribution.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use conceptlens_core::{AttributionRecord, PipelineConfig, SentenceRecord, TokenOccurrence};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::formats::{self, EmbeddingMeta};

pub const CLASSES: [&str; 2] = ["negative", "positive"];

/// (words, part of speech, semantic tag per word)
const CONCEPTS: [(&[&str], &str, &[&str]); 8] = [
    (
        &["captures", "delivers", "shines", "embraces", "nails", "elevates"],
        "VBZ",
        &["EXS"; 6],
    ),
    (
        &["brilliant", "moving", "gorgeous", "witty", "tender", "stunning"],
        "JJ",
        &["POS"; 6],
    ),
    (
        &["dull", "tedious", "bland", "clumsy", "lifeless", "shallow"],
        "JJ",
        &["NEG"; 6],
    ),
    (&["film", "movie", "story", "script", "plot", "drama"], "NN", &["CON"; 6]),
    (
        &["January", "March", "June", "April", "August", "October"],
        "NNP",
        &["MOY"; 6],
    ),
    (
        &["the", "a", "this", "that", "every", "another"],
        "DT",
        &["DEF", "DIS", "PRX", "DST", "QUA", "DIS"],
    ),
    (
        &["actor", "director", "cast", "crew", "writer", "composer"],
        "NN",
        &["ROL"; 6],
    ),
    (
        &["greener", "taller", "happier", "longer", "darker", "warmer"],
        "JJR",
        &["COM"; 6],
    ),
];

pub const PLANTED: usize = CONCEPTS.len();
const CAPTURES: usize = 0;
const PRAISE: usize = 1;
const CRITICISM: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub sentences: usize,
    pub dim: usize,
    /// Standard deviation of the planted centers; occurrences add unit noise.
    pub spread: f64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 7,
            sentences: 200,
            dim: 32,
            spread: 4.0,
        }
    }
}

pub struct Fixture {
    pub spec: FixtureSpec,
    pub sentences: Vec<SentenceRecord>,
    pub tokens: Vec<TokenOccurrence>,
    /// Row-major, one row per token.
    pub embeddings: Vec<f32>,
    /// Planted concept of every token.
    pub planted: Vec<usize>,
    /// Tagset name → CoNLL text.
    pub tags: BTreeMap<String, String>,
    pub attributions: Vec<AttributionRecord>,
}

impl Fixture {
    pub fn generate(spec: FixtureSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let center_dist = Normal::new(0.0, spec.spread).expect("finite spread");
        let noise = Normal::new(0.0, 1.0).expect("unit noise");
        let centers: Vec<Vec<f64>> = (0..PLANTED)
            .map(|_| (0..spec.dim).map(|_| center_dist.sample(&mut rng)).collect())
            .collect();

        let mut sentences = Vec::with_capacity(spec.sentences);
        let mut word_concepts: Vec<Vec<(usize, usize)>> = Vec::with_capacity(spec.sentences);
        for sid in 0..spec.sentences {
            let class = rng.gen_range(0..CLASSES.len());
            let len = rng.gen_range(6..=10);
            let fillers = [3, 4, 5, 6, 7];
            let mut slots: Vec<(usize, usize)> = (0..len)
                .map(|_| {
                    let c = *fillers.choose(&mut rng).expect("nonempty");
                    (c, rng.gen_range(0..CONCEPTS[c].0.len()))
                })
                .collect();
            let sentiment = if class == 1 { PRAISE } else { CRITICISM };
            let at = rng.gen_range(0..len);
            slots[at] = (sentiment, rng.gen_range(0..6));
            if class == 1 && rng.gen_bool(0.5) {
                let other = (at + 1 + rng.gen_range(0..len - 1)) % len;
                slots[other] = (CAPTURES, 0);
            } else if rng.gen_bool(0.3) {
                let other = (at + 1 + rng.gen_range(0..len - 1)) % len;
                slots[other] = (CAPTURES, rng.gen_range(1..6));
            }
            let words: Vec<&str> = slots.iter().map(|&(c, w)| CONCEPTS[c].0[w]).collect();
            sentences.push(SentenceRecord::from_text(
                sid,
                &words.join(" "),
                Some(CLASSES[class].to_string()),
            ));
            word_concepts.push(slots);
        }

        let mut tokens = Vec::new();
        let mut planted = Vec::new();
        let mut embeddings = Vec::new();
        for (sid, slots) in word_concepts.iter().enumerate() {
            for (pos, &(c, _)) in slots.iter().enumerate() {
                tokens.push(TokenOccurrence {
                    occurrence_id: tokens.len(),
                    sentence_id: sid,
                    position: pos,
                    surface: sentences[sid].words[pos].clone(),
                });
                planted.push(c);
                embeddings.extend(centers[c].iter().map(|&x| (x + noise.sample(&mut rng)) as f32));
            }
        }

        let mut pos = String::new();
        let mut sem = String::new();
        for slots in &word_concepts {
            for &(c, w) in slots {
                let (words, p, s) = CONCEPTS[c];
                pos.push_str(&format!("{}\t{p}\n", words[w]));
                sem.push_str(&format!("{}\t{}\n", words[w], s[w]));
            }
            pos.push('\n');
            sem.push('\n');
        }
        let tags = BTreeMap::from([("pos".to_string(), pos), ("sem".to_string(), sem)]);

        let attributions = sentences
            .iter()
            .zip(&word_concepts)
            .map(|(s, slots)| {
                let gold = CLASSES.iter().position(|c| Some(*c) == s.gold_label.as_deref()).expect("gold");
                let predicted = if rng.gen_bool(0.9) { gold } else { 1 - gold };
                let p: f64 = rng.gen_range(0.6..0.99);
                let token_scores: Vec<f64> = slots
                    .iter()
                    .map(|&(c, w)| match (c, w) {
                        (CAPTURES, 0) => rng.gen_range(1.0..1.2),
                        (PRAISE | CRITICISM, _) => rng.gen_range(0.5..0.9),
                        _ => rng.gen_range(-0.2..0.3),
                    })
                    .collect();
                AttributionRecord {
                    sentence_id: s.sentence_id,
                    predicted_class: CLASSES[predicted].to_string(),
                    class_probabilities: BTreeMap::from([
                        (CLASSES[predicted].to_string(), p),
                        (CLASSES[1 - predicted].to_string(), 1.0 - p),
                    ]),
                    token_scores,
                    convergence_delta: rng.gen_range(0.0..1e-3),
                }
            })
            .collect();

        Fixture {
            spec,
            sentences,
            tokens,
            embeddings,
            planted,
            tags,
            attributions,
        }
    }

    /// Config that clusters every token into the planted number of concepts.
    pub fn config(&self) -> PipelineConfig {
        PipelineConfig {
            cluster_count: PLANTED,
            max_occurrences_per_type: None,
            ig_steps: Some(128),
            ..PipelineConfig::default()
        }
    }

    pub fn meta(&self) -> EmbeddingMeta {
        let bytes = formats::encode_embeddings(&self.embeddings);
        EmbeddingMeta {
            n: self.tokens.len(),
            d: self.spec.dim,
            layer: 12,
            model_name: Some("synthetic".into()),
            checksum: Some(formats::sha256_hex(&bytes)),
        }
    }

    pub fn corpus_text(&self) -> String {
        formats::write_corpus(&self.sentences)
    }

    pub fn tokens_ndjson(&self) -> Vec<u8> {
        formats::write_ndjson(&self.tokens)
    }

    pub fn embeddings_bytes(&self) -> Vec<u8> {
        formats::encode_embeddings(&self.embeddings)
    }

    pub fn attributions_ndjson(&self) -> Vec<u8> {
        formats::write_ndjson(&self.attributions)
    }

    /// Writes the artifact directory layout read by `run-local`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("tags"))?;
        fs::write(dir.join("corpus.txt"), self.corpus_text())?;
        fs::write(dir.join("tokens.ndjson"), self.tokens_ndjson())?;
        fs::write(dir.join("embeddings.f32"), self.embeddings_bytes())?;
        fs::write(dir.join("embeddings.meta.json"), serde_json::to_vec_pretty(&self.meta())?)?;
        fs::write(dir.join("attributions.ndjson"), self.attributions_ndjson())?;
        for (name, text) in &self.tags {
            fs::write(dir.join("tags").join(format!("{name}.tsv")), text)?;
        }
        fs::write(dir.join("config.json"), serde_json::to_vec_pretty(&self.config())?)?;
        fs::write(dir.join("planted.json"), serde_json::to_vec(&self.planted)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let a = Fixture::generate(FixtureSpec::default());
        let b = Fixture::generate(FixtureSpec::default());
        assert_eq!(a.corpus_text(), b.corpus_text());
        assert_eq!(a.embeddings, b.embeddings);
        assert_eq!(a.attributions_ndjson(), b.attributions_ndjson());
    }

    #[test]
    fn shapes_agree() {
        let f = Fixture::generate(FixtureSpec::default());
        assert_eq!(f.sentences.len(), 200);
        let words: usize = f.sentences.iter().map(|s| s.words.len()).sum();
        assert_eq!(f.tokens.len(), words);
        assert_eq!(f.embeddings.len(), words * 32);
        assert_eq!(f.planted.len(), words);
        assert!(f.attributions.iter().all(|r| r.validate(f.sentences[r.sentence_id].words.len()).is_ok()));
        assert!(formats::parse_tags(f.tags["pos"].as_bytes(), &f.sentences).is_ok());
        assert!((0..PLANTED).all(|c| f.planted.contains(&c)));
    }

    #[test]
    fn captures_is_top_word_where_present() {
        let f = Fixture::generate(FixtureSpec::default());
        let mut seen = 0;
        for (s, r) in f.sentences.iter().zip(&f.attributions) {
            if let Some(pos) = s.words.iter().position(|w| w == "captures") {
                let top = r
                    .token_scores
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                    .unwrap()
                    .0;
                assert_eq!(top, pos);
                seen += 1;
            }
        }
        assert!(seen > 10);
    }
}
