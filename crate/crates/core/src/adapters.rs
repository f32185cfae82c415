//! Conversion of event-annotation rows and duration QA rows into masked
//! model inputs.
//!
//! Event rows get `", lasting [MASK] [MASK],"` spliced in right after the
//! event word. QA rows have their question rewritten as a statement and
//! `", lasting [MASK] [MASK]."` appended after the context.

use std::collections::BTreeMap;
use std::io::{BufRead, Read};

use log::debug;
use serde::{Deserialize, Deserializer, Serialize};

use crate::duration::{closest_unit, normalize, CoarseLabel, LogSeconds, TemporalUnit, UnitInventory};
use crate::error::{Error, Result};
use crate::extract::LabeledInstance;
use crate::tokens::{tokenize, tokenize_spans, MASK_TOKEN};

pub const EVENT_INSERT: &str = ", lasting [MASK] [MASK],";
pub const STATEMENT_SUFFIX: &str = ", lasting [MASK] [MASK].";

/// Masked text ready for an encoder, with optional supervision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInput {
    pub text: String,
    pub mask_positions: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_label: Option<LogSeconds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_label: Option<TemporalUnit>,
}

impl ModelInput {
    pub fn tokens(&self) -> Vec<&str> {
        tokenize(&self.text)
    }
}

impl From<&LabeledInstance> for ModelInput {
    fn from(inst: &LabeledInstance) -> Self {
        ModelInput {
            text: inst.masked_text.clone(),
            mask_positions: inst.mask_positions.clone(),
            exact_label: Some(inst.exact_label),
            range_label: Some(inst.range_label),
        }
    }
}

/// A quantity in a unit, e.g. 3 weeks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Duration {
    pub quantity: f64,
    pub unit: TemporalUnit,
}

impl Duration {
    pub fn new(quantity: f64, unit: TemporalUnit) -> Self {
        Duration { quantity, unit }
    }

    pub fn seconds(self) -> f64 {
        self.quantity * self.unit.seconds()
    }
}

/// One annotated event. `event_start..event_end` are character offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeBankRow {
    pub sentence: String,
    pub event_start: usize,
    pub event_end: usize,
    pub min_duration: Option<Duration>,
    pub max_duration: Option<Duration>,
    /// Only for rows that carry a coarse gold label instead of durations.
    pub coarse: Option<CoarseLabel>,
}

impl TimeBankRow {
    pub fn new(sentence: impl Into<String>, event: std::ops::Range<usize>, min: Duration, max: Duration) -> Self {
        TimeBankRow {
            sentence: sentence.into(),
            event_start: event.start,
            event_end: event.end,
            min_duration: Some(min),
            max_duration: Some(max),
            coarse: None,
        }
    }

    /// The annotated event word.
    pub fn event_word(&self) -> Option<&str> {
        let (s, e) = char_range_to_bytes(&self.sentence, self.event_start, self.event_end)?;
        Some(&self.sentence[s..e])
    }

    /// Log of the arithmetic mean of min and max in seconds.
    pub fn exact_label(&self) -> Option<Result<LogSeconds>> {
        let (min, max) = (self.min_duration?, self.max_duration?);
        Some(LogSeconds::from_seconds((min.seconds() + max.seconds()) / 2.0))
    }

    pub fn coarse_label(&self) -> Option<CoarseLabel> {
        match self.exact_label() {
            Some(Ok(v)) => Some(crate::duration::coarse_of_value(v)),
            _ => self.coarse,
        }
    }
}

fn char_range_to_bytes(s: &str, start: usize, end: usize) -> Option<(usize, usize)> {
    if start >= end {
        return None;
    }
    let mut offsets = s.char_indices().map(|(b, _)| b).chain(std::iter::once(s.len()));
    let bs = offsets.nth(start)?;
    let be = offsets.nth(end - start - 1)?;
    Some((bs, be))
}

fn positions_within(text: &str, region: std::ops::Range<usize>) -> Vec<usize> {
    tokenize_spans(text)
        .into_iter()
        .enumerate()
        .filter(|(_, (s, e))| *s >= region.start && *e <= region.end && &text[*s..*e] == MASK_TOKEN)
        .map(|(i, _)| i)
        .collect()
}

/// Inserts the duration pattern after the event word and derives labels.
pub fn timebank_to_input(row: &TimeBankRow, inventory: UnitInventory) -> Result<ModelInput> {
    let malformed = |reason: String| Error::MalformedRow { line: 0, reason };
    let (_, end) = char_range_to_bytes(&row.sentence, row.event_start, row.event_end).ok_or_else(|| {
        malformed(format!(
            "event span {}..{} outside sentence of {} chars",
            row.event_start,
            row.event_end,
            row.sentence.chars().count()
        ))
    })?;
    let text = format!("{}{}{}", &row.sentence[..end], EVENT_INSERT, &row.sentence[end..]);
    let mask_positions = positions_within(&text, end..end + EVENT_INSERT.len());
    let exact_label = row.exact_label().transpose()?;
    if let (Some(min), Some(max)) = (row.min_duration, row.max_duration) {
        for d in [min, max] {
            normalize(d.quantity, d.unit)?;
        }
    }
    Ok(ModelInput { text, mask_positions, exact_label, range_label: exact_label.map(|v| closest_unit(v, inventory)) })
}

/// Outcome of the question rewrite. `rule` is `None` when nothing applied
/// and the text passed through unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    pub text: String,
    pub rule: Option<&'static str>,
}

impl Statement {
    pub fn flagged(&self) -> bool {
        self.rule.is_none()
    }
}

const AUXILIARIES: [&str; 12] =
    ["did", "does", "do", "would", "will", "has", "have", "had", "is", "was", "are", "were"];

// Tried in order; the first prefix that matches wins.
const QUESTION_RULES: [(&str, &[&str], bool); 3] = [
    ("for-how-long-aux", &["for", "how", "long"], true),
    ("how-long-aux", &["how", "long"], true),
    ("how-long", &["how", "long"], false),
];

/// Rewrites a "How long ..." question as a bare statement. Verbs are not
/// re-inflected.
pub fn question_to_statement(question: &str) -> Statement {
    let trimmed = question.trim();
    let words: Vec<&str> = trimmed.split_whitespace().collect();
    for (name, prefix, needs_aux) in QUESTION_RULES {
        if words.len() <= prefix.len() {
            continue;
        }
        let head_matches = words.iter().zip(prefix.iter()).all(|(w, p)| w.eq_ignore_ascii_case(p));
        if !head_matches {
            continue;
        }
        let mut rest = &words[prefix.len()..];
        if needs_aux {
            if !AUXILIARIES.iter().any(|a| rest[0].eq_ignore_ascii_case(a)) || rest.len() < 2 {
                continue;
            }
            rest = &rest[1..];
        }
        let mut text = rest.join(" ");
        while text.ends_with('?') {
            text.pop();
        }
        let text = text.trim_end().to_string();
        if text.is_empty() {
            continue;
        }
        return Statement { text, rule: Some(name) };
    }
    debug!("no question rule applied to {trimmed:?}");
    Statement { text: trimmed.to_string(), rule: None }
}

fn small_number(word: &str) -> Option<f64> {
    const WORDS: [&str; 12] =
        ["one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve"];
    let lower = word.to_ascii_lowercase();
    if lower == "a" || lower == "an" {
        return Some(1.0);
    }
    if let Some(i) = WORDS.iter().position(|w| *w == lower) {
        return Some((i + 1) as f64);
    }
    lower.parse::<f64>().ok().filter(|q| q.is_finite() && *q > 0.0)
}

/// First "quantity unit" pair in an answer string, as log seconds.
pub fn parse_duration_answer(answer: &str) -> Option<LogSeconds> {
    let tokens: Vec<&str> =
        answer.split_whitespace().map(|t| t.trim_matches(|c: char| ",;:!?()\"".contains(c))).collect();
    tokens.windows(2).find_map(|pair| {
        let quantity = small_number(pair[0])?;
        let unit = TemporalUnit::parse_word(pair[1].trim_end_matches('.'))?;
        normalize(quantity, unit).ok()
    })
}

/// One candidate answer of a duration question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct McTacoRow {
    pub context: String,
    pub question: String,
    pub answer: String,
    #[serde(deserialize_with = "deserialize_gold")]
    pub gold: bool,
}

fn deserialize_gold<'de, D: Deserializer<'de>>(deserializer: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Gold {
        Bool(bool),
        Text(String),
    }
    match Gold::deserialize(deserializer)? {
        Gold::Bool(b) => Ok(b),
        Gold::Text(s) => match s.trim().to_ascii_lowercase().as_str() {
            "yes" | "true" | "1" => Ok(true),
            "no" | "false" | "0" => Ok(false),
            other => Err(serde::de::Error::custom(format!("unrecognized gold label {other:?}"))),
        },
    }
}

pub fn mctaco_to_input(row: &McTacoRow) -> (ModelInput, Option<LogSeconds>) {
    let statement = question_to_statement(&row.question);
    let prefix = format!("{} {}", row.context.trim(), statement.text);
    let text = format!("{prefix}{STATEMENT_SUFFIX}");
    let mask_positions = positions_within(&text, prefix.len()..text.len());
    let input = ModelInput { text, mask_positions, exact_label: None, range_label: None };
    (input, parse_duration_answer(&row.answer))
}

/// Log-space mean of the parseable correct answers of one question.
pub fn mctaco_training_label(rows: &[McTacoRow]) -> Option<LogSeconds> {
    let values: Vec<f64> =
        rows.iter().filter(|r| r.gold).filter_map(|r| parse_duration_answer(&r.answer)).map(|v| v.0).collect();
    if values.is_empty() {
        return None;
    }
    Some(LogSeconds(values.iter().sum::<f64>() / values.len() as f64))
}

/// Rows grouped by (context, question) in order of first appearance.
#[derive(Debug, Clone)]
pub struct McTacoQuestion {
    pub id: String,
    pub rows: Vec<McTacoRow>,
}

pub fn group_questions(rows: Vec<McTacoRow>) -> Vec<McTacoQuestion> {
    let mut index: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut out: Vec<McTacoQuestion> = Vec::new();
    for row in rows {
        let key = (row.context.clone(), row.question.clone());
        let i = *index.entry(key).or_insert_with(|| {
            out.push(McTacoQuestion { id: format!("q{}", out.len()), rows: Vec::new() });
            out.len() - 1
        });
        out[i].rows.push(row);
    }
    out
}

#[derive(Debug, Deserialize)]
struct TimeBankRecord {
    sentence: String,
    event_start: usize,
    event_end: usize,
    #[serde(default)]
    min_quantity: Option<f64>,
    #[serde(default)]
    min_unit: Option<String>,
    #[serde(default)]
    max_quantity: Option<f64>,
    #[serde(default)]
    max_unit: Option<String>,
    #[serde(default)]
    coarse: Option<String>,
}

fn opt_duration(q: Option<f64>, u: Option<String>) -> Result<Option<Duration>> {
    match (q, u.filter(|s| !s.trim().is_empty())) {
        (Some(q), Some(u)) => Ok(Some(Duration::new(q, u.parse()?))),
        (None, None) => Ok(None),
        _ => Err(Error::Data("quantity and unit must both be present".into())),
    }
}

/// Reads tab-separated rows with a header naming the columns `sentence`,
/// `event_start`, `event_end`, `min_quantity`, `min_unit`, `max_quantity`,
/// `max_unit` and optionally `coarse`.
pub fn read_timebank_tsv<R: Read>(reader: R) -> Result<Vec<TimeBankRow>> {
    let mut rdr = csv::ReaderBuilder::new().delimiter(b'\t').quoting(false).flexible(true).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<TimeBankRecord>().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::MalformedRow { line, reason: e.to_string() })?;
        let wrap = |e: Error| Error::MalformedRow { line, reason: e.to_string() };
        let min = opt_duration(rec.min_quantity, rec.min_unit).map_err(wrap)?;
        let max = opt_duration(rec.max_quantity, rec.max_unit).map_err(wrap)?;
        let coarse = match rec.coarse.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(c) => Some(c.parse::<CoarseLabel>().map_err(wrap)?),
        };
        if min.is_some() != max.is_some() {
            return Err(wrap(Error::Data("min and max durations must both be given".into())));
        }
        if min.is_none() && coarse.is_none() {
            return Err(wrap(Error::Data("row has neither durations nor a coarse label".into())));
        }
        rows.push(TimeBankRow {
            sentence: rec.sentence,
            event_start: rec.event_start,
            event_end: rec.event_end,
            min_duration: min,
            max_duration: max,
            coarse,
        });
    }
    Ok(rows)
}

pub const TIMEBANK_HEADER: &str = "sentence\tevent_start\tevent_end\tmin_quantity\tmin_unit\tmax_quantity\tmax_unit";

/// Writes rows in the format read by [`read_timebank_tsv`]. Rows must carry durations.
pub fn write_timebank_tsv<W: std::io::Write>(mut w: W, rows: &[TimeBankRow]) -> Result<()> {
    writeln!(w, "{TIMEBANK_HEADER}")?;
    for r in rows {
        let (min, max) = r
            .min_duration
            .zip(r.max_duration)
            .ok_or_else(|| Error::Data("cannot write a row without durations".into()))?;
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.sentence, r.event_start, r.event_end, min.quantity, min.unit, max.quantity, max.unit
        )?;
    }
    Ok(())
}

pub fn read_mctaco_jsonl<R: BufRead>(reader: R) -> Result<Vec<McTacoRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRow { line: i + 1, reason: e.to_string() })?;
        rows.push(row);
    }
    Ok(rows)
}
