//! Test-only reference implementations.
//!
//! `oracle_extract` re-derives extraction output with plain byte scanning,
//! without the crate's regexes, tokenizer-based masking or unit table.
//! `check_gradients` compares analytic gradients with central differences.

#![allow(dead_code)]

use durpipe::adapters::ModelInput;
use durpipe::model::{DualHeadModel, Encoder, ModelConfig, Target};
use durpipe::tokens::{mask_positions, tokenize};
use durpipe::UnitInventory;
use rand::seq::IndexedRandom;
use rand::Rng;

pub const TRIGGERS: [&str; 11] =
    ["duration", "period", "for", "last", "lasting", "spend", "spent", "over", "take", "took", "taken"];
const UNITS: [(&str, f64); 8] = [
    ("second", 1.0),
    ("minute", 60.0),
    ("hour", 3600.0),
    ("day", 86400.0),
    ("week", 604800.0),
    ("month", 2592000.0),
    ("year", 31536000.0),
    ("decade", 315360000.0),
];
const EXCLUDED: &[u8] = b",.!?;";
const ORDINALS: [&str; 9] = ["first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth"];

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMatch {
    pub trigger: String,
    pub start: usize,
    pub expr_start: usize,
    pub expr_end: usize,
    pub quantity: String,
    pub unit: usize,
}

fn unit_at(lower: &[u8], pos: usize) -> Option<(usize, usize)> {
    for (i, (name, _)) in UNITS.iter().enumerate() {
        if lower[pos..].starts_with(name.as_bytes()) {
            let mut end = pos + name.len();
            if lower.get(end) == Some(&b's') {
                end += 1;
            }
            return Some((i, end));
        }
    }
    None
}

/// Leftmost start; at that start the first trigger in list order with any
/// continuation; for that trigger the shortest gap.
pub fn oracle_match(sentence: &str, triggers: &[&str]) -> Option<OracleMatch> {
    let lower = sentence.to_ascii_lowercase().into_bytes();
    for start in 0..lower.len() {
        for t in triggers {
            if !lower[start..].starts_with(t.as_bytes()) {
                continue;
            }
            let mut g = start + t.len();
            while g < lower.len() {
                let mut k = g;
                while k < lower.len() && lower[k].is_ascii_digit() {
                    k += 1;
                }
                if k > g && lower.get(k) == Some(&b' ') {
                    if let Some((unit, end)) = unit_at(&lower, k + 1) {
                        return Some(OracleMatch {
                            trigger: t.to_string(),
                            start,
                            expr_start: g,
                            expr_end: end,
                            quantity: sentence[g..k].to_string(),
                            unit,
                        });
                    }
                }
                if EXCLUDED.contains(&lower[g]) {
                    break;
                }
                g += 1;
            }
        }
    }
    None
}

fn words(s: &str) -> Vec<(usize, usize)> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i].is_ascii_alphanumeric() || b[i] == b'_' {
            let j = (i..b.len()).find(|&j| !(b[j].is_ascii_alphanumeric() || b[j] == b'_')).unwrap_or(b.len());
            out.push((i, j));
            i = j;
        } else {
            i += 1;
        }
    }
    out
}

pub fn oracle_filtered(sentence: &str, m: &OracleMatch) -> bool {
    let lower = sentence.to_ascii_lowercase();
    let sub = &lower[m.start..m.expr_end];
    let ws = words(sub);
    let word = |i: usize| &sub[ws[i].0..ws[i].1];
    for i in 0..ws.len() {
        if ["at", "age", "every", "next", "per"].contains(&word(i)) {
            return true;
        }
        if word(i) == "more" && i + 1 < ws.len() && word(i + 1) == "than" {
            let between = &sub[ws[i].1..ws[i + 1].0];
            if !between.is_empty() && between.chars().all(char::is_whitespace) {
                return true;
            }
        }
    }
    if ORDINALS.iter().any(|o| sub.contains(&format!("{o} time"))) {
        return true;
    }
    let b = lower.as_bytes();
    if (0..b.len()).any(|i| b[i].is_ascii_digit() && lower[i + 1..].starts_with(" secondary")) {
        return true;
    }
    UNITS.iter().any(|(u, _)| lower.contains(&format!("{u} old")) || lower.contains(&format!("{u}s old")))
}

pub fn oracle_sentences(text: &str) -> Vec<&str> {
    let b = text.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..b.len() {
        if matches!(b[i], b'.' | b'!' | b'?') && b.get(i + 1).is_some_and(|c| c.is_ascii_whitespace()) {
            out.push(text[start..=i].trim());
            start = i + 1;
        }
    }
    out.push(text[start..].trim());
    out.retain(|s| !s.is_empty());
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleInstance {
    pub source_id: String,
    pub masked_text: String,
    pub exact_label: f64,
    pub range_label: &'static str,
}

pub fn oracle_label(sentence: &str, m: &OracleMatch) -> Option<(String, f64, &'static str)> {
    let q: f64 = m.quantity.parse().ok()?;
    let seconds = q * UNITS[m.unit].1;
    if !(seconds.is_finite() && seconds > 0.0) {
        return None;
    }
    let v = seconds.ln();
    let mut best = 0;
    for (i, (_, secs)) in UNITS.iter().enumerate().skip(1) {
        if (v - secs.ln()).abs() < (v - UNITS[best].1.ln()).abs() {
            best = i;
        }
    }
    let masked = format!("{}[MASK] [MASK]{}", &sentence[..m.expr_start], &sentence[m.expr_end..]);
    Some((masked, v, UNITS[best].0))
}

#[derive(Debug, Default, PartialEq)]
pub struct OracleOutput {
    pub instances: Vec<OracleInstance>,
    pub matched: usize,
    pub filtered: usize,
}

pub fn oracle_extract(docs: &[(String, String)], triggers: &[&str]) -> OracleOutput {
    let mut out = OracleOutput::default();
    for (id, text) in docs {
        for (i, s) in oracle_sentences(text).into_iter().enumerate() {
            let Some(m) = oracle_match(s, triggers) else { continue };
            out.matched += 1;
            if oracle_filtered(s, &m) {
                out.filtered += 1;
                continue;
            }
            if let Some((masked_text, exact_label, range_label)) = oracle_label(s, &m) {
                out.instances.push(OracleInstance {
                    source_id: format!("{id}#{i}"),
                    masked_text,
                    exact_label,
                    range_label,
                });
            }
        }
    }
    out
}

const FILLER: [&str; 24] = [
    "the",
    "council",
    "he",
    "she",
    "waited",
    "worked",
    "in",
    "town",
    "market",
    "river",
    "before",
    "information",
    "forever",
    "overtime",
    "mistake",
    "latest",
    "station",
    "and",
    "then",
    "they",
    "school",
    "home",
    "it",
    "was",
];
const TRAPS: [&str; 12] = [
    "at",
    "age",
    "every",
    "next",
    "more than",
    "per",
    "first time",
    "third time",
    "secondary",
    "old",
    "years old",
    "later",
];

fn random_unit<R: Rng>(rng: &mut R) -> String {
    let (u, _) = UNITS.choose(rng).unwrap();
    let mut u = u.to_string();
    if rng.random_bool(0.5) {
        u.push('s');
    }
    if rng.random_bool(0.1) {
        u = u.to_uppercase();
    }
    u
}

/// A sentence mixing fillers, triggers, numerals, units and filter traps.
pub fn random_sentence<R: Rng>(rng: &mut R) -> String {
    let mut parts: Vec<String> = Vec::new();
    let len = rng.random_range(3..12);
    for _ in 0..len {
        let roll: f64 = rng.random();
        let piece = if roll < 0.45 {
            FILLER.choose(rng).unwrap().to_string()
        } else if roll < 0.58 {
            let t = TRIGGERS.choose(rng).unwrap().to_string();
            if rng.random_bool(0.15) {
                t.to_uppercase()
            } else {
                t
            }
        } else if roll < 0.70 {
            rng.random_range(0..150u32).to_string()
        } else if roll < 0.80 {
            random_unit(rng)
        } else if roll < 0.88 {
            TRAPS.choose(rng).unwrap().to_string()
        } else if roll < 0.94 {
            [",", ";", "-", "!"].choose(rng).unwrap().to_string()
        } else {
            format!("{} {}", rng.random_range(0..60u32), random_unit(rng))
        };
        parts.push(piece);
    }
    // plant a well-formed match half of the time
    if rng.random_bool(0.5) {
        let at = rng.random_range(0..=parts.len());
        let phrase = format!("{} {} {}", TRIGGERS.choose(rng).unwrap(), rng.random_range(1..99u32), random_unit(rng));
        parts.insert(at, phrase);
    }
    let mut s = parts.join(" ").replace(" ,", ",").replace(" ;", ";");
    s.push('.');
    s
}

/// Documents of 1–6 sentences holding `n_sentences` in total.
pub fn random_documents<R: Rng>(rng: &mut R, n_sentences: usize) -> Vec<(String, String)> {
    let mut docs = Vec::new();
    let mut made = 0;
    while made < n_sentences {
        let k = rng.random_range(1..=6).min(n_sentences - made);
        let text = (0..k).map(|_| random_sentence(rng)).collect::<Vec<_>>().join(" ");
        docs.push((format!("doc{}", docs.len()), text));
        made += k;
    }
    docs
}

/// Largest relative error between analytic and central-difference
/// gradients over every parameter. Entries where both are below `floor`
/// in magnitude are compared absolutely against `floor`.
pub fn check_gradients<E: Encoder + Clone>(
    model: &DualHeadModel<E>,
    input: &ModelInput,
    target: Target,
    step: f64,
    floor: f64,
) -> f64 {
    let (_, grads) = model.gradients(input, target).unwrap();
    let mut worst: f64 = 0.0;
    let mut compare = |analytic: f64, numeric: f64| {
        let scale = analytic.abs().max(numeric.abs());
        let err = if scale < floor { (analytic - numeric).abs() / floor } else { (analytic - numeric).abs() / scale };
        worst = worst.max(err);
    };
    let central = |m: &DualHeadModel<E>, bump: &dyn Fn(&mut DualHeadModel<E>, f64)| {
        let mut plus = m.clone();
        bump(&mut plus, step);
        let mut minus = m.clone();
        bump(&mut minus, -step);
        (plus.loss(input, target).unwrap() - minus.loss(input, target).unwrap()) / (2.0 * step)
    };
    for i in 0..model.w_e.len() {
        compare(grads.w_e[i], central(model, &|m, h| m.w_e[i] += h));
    }
    for i in 0..model.w_r.len() {
        compare(grads.w_r[i], central(model, &|m, h| m.w_r[i] += h));
    }
    for i in 0..model.encoder.params().len() {
        compare(grads.encoder[i], central(model, &|m, h| m.encoder.params_mut()[i] += h));
    }
    worst
}

/// Tiny model with every parameter uniform in [-1, 1].
pub fn random_model<R: Rng>(rng: &mut R) -> DualHeadModel {
    let cfg = ModelConfig { dim: 4, buckets: 16, window: 2, inventory: UnitInventory::Eight, seed: rng.random() };
    let mut m = DualHeadModel::from_config(&cfg).unwrap();
    for p in m.encoder.params_mut().iter_mut().chain(&mut m.w_e).chain(&mut m.w_r) {
        *p = rng.random_range(-1.0..1.0);
    }
    m
}

/// A short token sequence with one to three adjacent masks.
pub fn random_input<R: Rng>(rng: &mut R) -> ModelInput {
    let words = ["the", "movie", "took", "lasting", ",", "festival", "they", "spent", "on"];
    let n = rng.random_range(3..9);
    let mut toks: Vec<&str> = (0..n).map(|_| *words.choose(rng).unwrap()).collect();
    let at = rng.random_range(0..=toks.len());
    for _ in 0..rng.random_range(1..=3) {
        toks.insert(at, "[MASK]");
    }
    let text = toks.join(" ");
    let mask_positions = mask_positions(&tokenize(&text));
    ModelInput { text, mask_positions, exact_label: None, range_label: None }
}
