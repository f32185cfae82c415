//! Synthetic duration corpus with planted cue-word durations.
//!
//! Each cue word has a home unit and a typical quantity. Sentences mention
//! the cue next to a duration drawn log-normally around that typical value,
//! phrased so that it matches the extraction pattern and no filter. The
//! generator also writes held-out event rows and QA rows built from the same
//! cue table, so the whole pipeline can be exercised without external data.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::adapters::{Duration, McTacoRow, TimeBankRow};
use crate::duration::{closest_unit, normalize, LogSeconds, TemporalUnit, UnitInventory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cue {
    pub word: String,
    pub unit: TemporalUnit,
    pub typical: f64,
}

impl Cue {
    pub fn new(word: &str, unit: TemporalUnit, typical: f64) -> Self {
        Cue { word: word.to_string(), unit, typical }
    }
}

/// One cue per unit, second through decade.
pub fn default_cues() -> Vec<Cue> {
    use TemporalUnit::*;
    vec![
        Cue::new("sneeze", Second, 2.0),
        Cue::new("shower", Minute, 3.0),
        Cue::new("movie", Hour, 2.0),
        Cue::new("festival", Day, 1.0),
        Cue::new("vacation", Week, 1.0),
        Cue::new("renovation", Month, 1.0),
        Cue::new("degree", Year, 2.0),
        Cue::new("career", Decade, 3.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub sentences_per_cue: usize,
    pub heldout_per_cue: usize,
    pub finetune_per_cue: usize,
    pub questions_per_cue: usize,
    /// Log-normal spread of planted quantities.
    pub sigma: f64,
    /// Only cues whose unit is listed are used.
    pub units: Vec<TemporalUnit>,
    pub cues: Vec<Cue>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 17,
            sentences_per_cue: 250,
            heldout_per_cue: 50,
            finetune_per_cue: 50,
            questions_per_cue: 10,
            sigma: 0.3,
            units: TemporalUnit::ALL.to_vec(),
            cues: default_cues(),
        }
    }
}

/// A corpus sentence together with what was planted in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Planted {
    pub sentence: String,
    pub cue: String,
    pub quantity: u64,
    pub unit: TemporalUnit,
    pub exact_label: LogSeconds,
}

#[derive(Debug, Clone, Default)]
pub struct SynthCorpus {
    /// One sentence per line of raw text.
    pub corpus: Vec<Planted>,
    pub heldout: Vec<TimeBankRow>,
    pub finetune: Vec<TimeBankRow>,
    pub mctaco: Vec<McTacoRow>,
}

impl SynthCorpus {
    pub fn corpus_text(&self) -> String {
        self.corpus.iter().map(|p| format!("{}\n", p.sentence)).collect()
    }
}

const CORPUS_TEMPLATES: [&str; 6] = [
    "The {cue} took {d}.",
    "Her {cue} lasted {d}.",
    "Our {cue} went on for {d}.",
    "{head}, lasting {d}, {tail}.",
    "They spent {d} on the {cue}.",
    "{head}, lasting {d}, {tail}.",
];

// Openings and continuations around an appositive duration. They share
// vocabulary with the held-out and fine-tuning templates so that every
// context word the adapters produce has been seen during pre-training.
const HEADS: [&str; 5] =
    ["The {cue}", "A {cue}", "Everyone remembered the {cue}", "Nobody liked the {cue}", "Our {cue}"];
const TAILS: [&str; 7] = [
    "was memorable",
    "happened near the station",
    "began on Monday",
    "ended without warning",
    "was planned by the committee",
    "went well",
    "surprised nobody much",
];

const HELDOUT_TEMPLATES: [&str; 3] =
    ["The {cue} happened near the station.", "Everyone remembered the {cue} well.", "A {cue} began on Monday."];

const FINETUNE_TEMPLATES: [&str; 3] =
    ["A {cue} was planned by the committee.", "Nobody liked the {cue} much.", "The {cue} ended without warning."];

pub fn render_duration(quantity: u64, unit: TemporalUnit) -> String {
    if quantity == 1 {
        format!("1 {unit}")
    } else {
        format!("{quantity} {unit}s")
    }
}

struct Sampler<'a> {
    cue: &'a Cue,
    dist: LogNormal<f64>,
}

impl Sampler<'_> {
    fn draw(&self, rng: &mut ChaCha8Rng) -> u64 {
        (self.dist.sample(rng).round() as u64).max(1)
    }
}

fn event_row(template: &str, cue: &str, quantity: u64, unit: TemporalUnit) -> TimeBankRow {
    let sentence = template.replace("{cue}", cue);
    let byte_start = template.find("{cue}").expect("template names the cue");
    let start = sentence[..byte_start].chars().count();
    let d = Duration::new(quantity as f64, unit);
    TimeBankRow::new(sentence, start..start + cue.chars().count(), d, d)
}

impl SynthSpec {
    fn active_cues(&self) -> Result<Vec<&Cue>> {
        if self.units.is_empty() {
            return Err(Error::Config("synthetic spec needs at least one unit".into()));
        }
        let cues: Vec<&Cue> = self.cues.iter().filter(|c| self.units.contains(&c.unit)).collect();
        if cues.is_empty() {
            return Err(Error::Config("no cue matches the selected units".into()));
        }
        if let Some(c) = cues.iter().find(|c| !(c.typical.is_finite() && c.typical > 0.0) || c.word.trim().is_empty()) {
            return Err(Error::Config(format!("invalid cue {:?}", c.word)));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::Config(format!("sigma {} must be finite and >= 0", self.sigma)));
        }
        Ok(cues)
    }

    pub fn generate(&self) -> Result<SynthCorpus> {
        let cues = self.active_cues()?;
        let samplers: Vec<Sampler> = cues
            .iter()
            .map(|cue| Sampler { cue, dist: LogNormal::new(cue.typical.ln(), self.sigma).expect("validated") })
            .collect();
        let stream = |k: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(k);
            rng
        };

        let mut out = SynthCorpus::default();

        let mut rng = stream(0);
        for s in &samplers {
            for _ in 0..self.sentences_per_cue {
                let template = CORPUS_TEMPLATES
                    .choose(&mut rng)
                    .unwrap()
                    .replace("{head}", HEADS.choose(&mut rng).unwrap())
                    .replace("{tail}", TAILS.choose(&mut rng).unwrap());
                let quantity = s.draw(&mut rng);
                let sentence =
                    template.replace("{cue}", &s.cue.word).replace("{d}", &render_duration(quantity, s.cue.unit));
                out.corpus.push(Planted {
                    sentence,
                    cue: s.cue.word.clone(),
                    quantity,
                    unit: s.cue.unit,
                    exact_label: normalize(quantity as f64, s.cue.unit)?,
                });
            }
        }
        // interleave cues
        rand::seq::SliceRandom::shuffle(out.corpus.as_mut_slice(), &mut rng);

        let mut rng = stream(1);
        for s in &samplers {
            for _ in 0..self.heldout_per_cue {
                let template = HELDOUT_TEMPLATES.choose(&mut rng).unwrap();
                out.heldout.push(event_row(template, &s.cue.word, s.draw(&mut rng), s.cue.unit));
            }
        }

        let mut rng = stream(2);
        for s in &samplers {
            for _ in 0..self.finetune_per_cue {
                let template = FINETUNE_TEMPLATES.choose(&mut rng).unwrap();
                out.finetune.push(event_row(template, &s.cue.word, s.draw(&mut rng), s.cue.unit));
            }
        }

        let mut rng = stream(3);
        for s in &samplers {
            for _ in 0..self.questions_per_cue {
                let template = HELDOUT_TEMPLATES.choose(&mut rng).unwrap();
                let context = template.replace("{cue}", &s.cue.word);
                let question = format!("How long did the {} last?", s.cue.word);
                let quantity = s.draw(&mut rng);
                let planted = closest_unit(normalize(quantity as f64, s.cue.unit)?, UnitInventory::Eight);
                let mut answers = vec![(render_duration(quantity, s.cue.unit), true)];
                // Two wrong answers at least three units away from the planted one.
                let far: Vec<TemporalUnit> = TemporalUnit::ALL
                    .iter()
                    .copied()
                    .filter(|u| u.ordinal().abs_diff(planted.ordinal()) >= 3)
                    .collect();
                for u in far.choose_multiple(&mut rng, 2) {
                    answers.push((render_duration(1 + s.draw(&mut rng) % 3, *u), false));
                }
                for (answer, gold) in answers {
                    out.mctaco.push(McTacoRow { context: context.clone(), question: question.clone(), answer, gold });
                }
            }
        }
        Ok(out)
    }
}
