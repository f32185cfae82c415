//! Scoring protocols.
//!
//! * coarse: shorter vs longer than a day, per-class F1 and accuracy
//! * fine: unit prediction under approximate agreement (adjacent units match)
//! * mctaco: per-answer correctness verdicts, F1 of the "correct" class and
//!   question-level exact match

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::duration::{
    approx_match, closest_unit, coarse_of_unit, coarse_of_value, CoarseLabel, LogSeconds, TemporalUnit, UnitInventory,
};
use crate::error::{Error, Result};

pub const DEFAULT_RANGE: f64 = 3.0;
pub const DEFAULT_PROFILE_SIZE: usize = 15;

/// Output of either head, or a fixed coarse guess.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prediction {
    Exact(LogSeconds),
    Range(TemporalUnit),
    Coarse(CoarseLabel),
}

impl Prediction {
    pub fn coarse(self) -> CoarseLabel {
        match self {
            Prediction::Exact(v) => coarse_of_value(v),
            Prediction::Range(u) => coarse_of_unit(u),
            Prediction::Coarse(c) => c,
        }
    }
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prediction::Exact(v) => write!(f, "{v}"),
            Prediction::Range(u) => write!(f, "{u}"),
            Prediction::Coarse(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Coarse,
    Fine,
    Mctaco,
}

impl std::str::FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coarse" => Ok(Protocol::Coarse),
            "fine" => Ok(Protocol::Fine),
            "mctaco" => Ok(Protocol::Mctaco),
            other => Err(Error::Config(format!("unknown protocol {other:?}"))),
        }
    }
}

/// Answers within `range` of the predicted value (log seconds) count as correct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeRule {
    pub range: f64,
}

impl Default for RangeRule {
    fn default() -> Self {
        RangeRule { range: DEFAULT_RANGE }
    }
}

impl RangeRule {
    pub fn new(range: f64) -> Result<Self> {
        if range.is_nan() || range <= 0.0 {
            return Err(Error::Config(format!("range must be positive, got {range}")));
        }
        Ok(RangeRule { range })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ClassCounts {
    /// Undefined when the class is never predicted or never gold.
    pub fn f1(&self) -> Option<f64> {
        if self.tp + self.fp == 0 || self.tp + self.fn_ == 0 {
            return None;
        }
        Some(2.0 * self.tp as f64 / (2 * self.tp + self.fp + self.fn_) as f64)
    }

    pub fn precision(&self) -> Option<f64> {
        (self.tp + self.fp > 0).then(|| self.tp as f64 / (self.tp + self.fp) as f64)
    }

    pub fn recall(&self) -> Option<f64> {
        (self.tp + self.fn_ > 0).then(|| self.tp as f64 / (self.tp + self.fn_) as f64)
    }

    fn add(&mut self, predicted: bool, gold: bool) {
        match (predicted, gold) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
    pub prediction: String,
    pub gold: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub counts: BTreeMap<String, ClassCounts>,
    pub f1: BTreeMap<String, Option<f64>>,
    /// Mean of the per-item verdicts.
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_match: Option<f64>,
    /// Mean over questions of the fraction of answers judged correctly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<f64>,
    pub items: Vec<ItemRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl EvalReport {
    fn new(protocol: Protocol, counts: BTreeMap<String, ClassCounts>, items: Vec<ItemRecord>) -> Self {
        let f1 = counts.iter().map(|(k, c)| (k.clone(), c.f1())).collect();
        let accuracy =
            if items.is_empty() { 0.0 } else { items.iter().filter(|i| i.correct).count() as f64 / items.len() as f64 };
        EvalReport {
            protocol,
            counts,
            f1,
            accuracy,
            exact_match: None,
            question_accuracy: None,
            range: None,
            items,
            diagnostics: Vec::new(),
        }
    }

    /// Sets per-item keys (e.g. event words) in item order.
    pub fn attach_keys<I: IntoIterator<Item = String>>(&mut self, keys: I) {
        for (item, key) in self.items.iter_mut().zip(keys) {
            item.key = Some(key);
        }
    }

    pub fn f1_of(&self, class: &str) -> Option<f64> {
        self.f1.get(class).copied().flatten()
    }

    pub fn headline(&self) -> String {
        let pct = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{:.2}", 100.0 * v));
        match self.protocol {
            Protocol::Coarse => format!(
                "coarse: <day F1 {}  >day F1 {}  acc {}  (n={})",
                pct(self.f1_of("<day")),
                pct(self.f1_of(">day")),
                pct(Some(self.accuracy)),
                self.items.len()
            ),
            Protocol::Fine => format!("fine: acc {}  (n={})", pct(Some(self.accuracy)), self.items.len()),
            Protocol::Mctaco => format!(
                "mctaco: F1 {}  EM {}  (answers={}, range={})",
                pct(self.f1_of("correct")),
                pct(self.exact_match),
                self.items.len(),
                self.range.map_or("-".into(), |r| r.to_string())
            ),
        }
    }

    pub fn write_items_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "id\tkey\tprediction\tgold\tcorrect")?;
        for i in &self.items {
            writeln!(w, "{}\t{}\t{}\t{}\t{}", i.id, i.key.as_deref().unwrap_or(""), i.prediction, i.gold, i.correct)?;
        }
        Ok(())
    }
}

fn check_lengths(predictions: usize, golds: usize) -> Result<()> {
    if predictions != golds {
        return Err(Error::LengthMismatch { predictions, golds });
    }
    if golds == 0 {
        return Err(Error::Data("nothing to evaluate".into()));
    }
    Ok(())
}

pub fn eval_coarse(preds: &[Prediction], golds: &[CoarseLabel]) -> Result<EvalReport> {
    check_lengths(preds.len(), golds.len())?;
    let mut counts = BTreeMap::new();
    for class in [CoarseLabel::LessThanDay, CoarseLabel::MoreThanDay] {
        let c: &mut ClassCounts = counts.entry(class.as_str().to_string()).or_default();
        for (p, g) in preds.iter().zip(golds) {
            c.add(p.coarse() == class, *g == class);
        }
    }
    let items = preds
        .iter()
        .zip(golds)
        .enumerate()
        .map(|(i, (p, g))| ItemRecord {
            id: i.to_string(),
            key: None,
            prediction: format!("{} ({p})", p.coarse()),
            gold: g.to_string(),
            correct: p.coarse() == *g,
        })
        .collect();
    Ok(EvalReport::new(Protocol::Coarse, counts, items))
}

pub fn eval_fine(preds: &[TemporalUnit], golds: &[TemporalUnit], inventory: UnitInventory) -> Result<EvalReport> {
    check_lengths(preds.len(), golds.len())?;
    if let Some(u) = preds.iter().chain(golds).find(|u| !inventory.contains(**u)) {
        return Err(Error::Data(format!("unit {u} outside the {}-unit inventory", inventory.len())));
    }
    let items = preds
        .iter()
        .zip(golds)
        .enumerate()
        .map(|(i, (p, g))| ItemRecord {
            id: i.to_string(),
            key: None,
            prediction: p.to_string(),
            gold: g.to_string(),
            correct: approx_match(*p, *g),
        })
        .collect();
    Ok(EvalReport::new(Protocol::Fine, BTreeMap::new(), items))
}

/// One candidate answer, already parsed to log seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McTacoAnswer {
    pub question_id: String,
    pub value: LogSeconds,
    pub gold: bool,
}

/// Whether a head's prediction accepts an answer value.
pub fn answer_verdict(pred: Prediction, value: LogSeconds, rule: RangeRule, inventory: UnitInventory) -> Result<bool> {
    match pred {
        Prediction::Exact(d) => Ok((value.0 - d.0).abs() <= rule.range),
        Prediction::Range(u) => Ok(approx_match(u, closest_unit(value, inventory))),
        Prediction::Coarse(_) => Err(Error::Data("coarse predictions cannot judge QA answers".into())),
    }
}

/// `preds` maps question id to that question's prediction. Questions with
/// no prediction are skipped with a diagnostic.
pub fn eval_mctaco(
    preds: &BTreeMap<String, Prediction>,
    answers: &[McTacoAnswer],
    rule: RangeRule,
    inventory: UnitInventory,
) -> Result<EvalReport> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_question: BTreeMap<&str, Vec<(usize, &McTacoAnswer)>> = BTreeMap::new();
    for a in answers {
        let entry = by_question.entry(&a.question_id).or_default();
        if entry.is_empty() {
            order.push(&a.question_id);
        }
        entry.push((entry.len(), a));
    }
    let mut diagnostics = Vec::new();
    for q in preds.keys().filter(|q| !by_question.contains_key(q.as_str())) {
        diagnostics.push(format!("question {q} has no answers; skipped"));
    }

    let mut counts = ClassCounts::default();
    let mut items = Vec::new();
    let (mut exact, mut per_question, mut questions) = (0usize, 0.0f64, 0usize);
    for q in order {
        let Some(&pred) = preds.get(q) else {
            diagnostics.push(format!("question {q} has no prediction; skipped"));
            continue;
        };
        let group = &by_question[q];
        let mut right = 0;
        for (j, a) in group {
            let verdict = answer_verdict(pred, a.value, rule, inventory)?;
            counts.add(verdict, a.gold);
            right += usize::from(verdict == a.gold);
            items.push(ItemRecord {
                id: format!("{q}/{j}"),
                key: None,
                prediction: format!("{} ({pred})", if verdict { "correct" } else { "incorrect" }),
                gold: if a.gold { "correct" } else { "incorrect" }.to_string(),
                correct: verdict == a.gold,
            });
        }
        questions += 1;
        exact += usize::from(right == group.len());
        per_question += right as f64 / group.len() as f64;
    }
    for d in &diagnostics {
        warn!("{d}");
    }
    if questions == 0 {
        return Err(Error::Data("no question had both answers and a prediction".into()));
    }
    let mut report = EvalReport::new(Protocol::Mctaco, BTreeMap::from([("correct".to_string(), counts)]), items);
    report.exact_match = Some(exact as f64 / questions as f64);
    report.question_accuracy = Some(per_question / questions as f64);
    report.range = Some(rule.range);
    report.diagnostics = diagnostics;
    Ok(report)
}

/// Range grid `{0.5, 1.0, ..., 5.0}`.
pub fn default_range_grid() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) * 0.5).collect()
}

/// Picks the range with the best "correct"-class F1 on a dev set; ties go
/// to the smaller range.
pub fn tune_range(
    preds: &BTreeMap<String, Prediction>,
    answers: &[McTacoAnswer],
    inventory: UnitInventory,
    grid: &[f64],
) -> Result<(RangeRule, EvalReport)> {
    let mut best: Option<(RangeRule, EvalReport)> = None;
    for &r in grid {
        let rule = RangeRule::new(r)?;
        let report = eval_mctaco(preds, answers, rule, inventory)?;
        let score = report.f1_of("correct").unwrap_or(0.0);
        if best.as_ref().is_none_or(|(_, b)| score > b.f1_of("correct").unwrap_or(0.0)) {
            best = Some((rule, report));
        }
    }
    best.ok_or_else(|| Error::Config("empty range grid".into()))
}

/// Gold labels for the majority-class baseline.
#[derive(Debug, Clone, Copy)]
pub enum Golds<'a> {
    Coarse(&'a [CoarseLabel]),
    Fine(&'a [TemporalUnit], UnitInventory),
    Mctaco(&'a [McTacoAnswer], RangeRule, UnitInventory),
}

/// Constant predictor: "month" for unit-based protocols, the most frequent
/// gold label (ties to ">day") for the coarse protocol.
pub fn majority_baseline(golds: Golds<'_>) -> Result<EvalReport> {
    match golds {
        Golds::Coarse(g) => {
            if g.is_empty() {
                return Err(Error::Data("no gold labels".into()));
            }
            let less = g.iter().filter(|c| **c == CoarseLabel::LessThanDay).count();
            let majority = if less > g.len() - less { CoarseLabel::LessThanDay } else { CoarseLabel::MoreThanDay };
            eval_coarse(&vec![Prediction::Coarse(majority); g.len()], g)
        }
        Golds::Fine(g, inventory) => {
            if g.is_empty() {
                return Err(Error::Data("no gold labels".into()));
            }
            eval_fine(&vec![TemporalUnit::Month; g.len()], g, inventory)
        }
        Golds::Mctaco(answers, rule, inventory) => {
            if answers.is_empty() {
                return Err(Error::Data("no gold labels".into()));
            }
            let preds =
                answers.iter().map(|a| (a.question_id.clone(), Prediction::Range(TemporalUnit::Month))).collect();
            eval_mctaco(&preds, answers, rule, inventory)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub incorrect: Vec<(String, usize)>,
    pub correct: Vec<(String, usize)>,
}

fn ranked(counts: BTreeMap<String, usize>, top_k: usize) -> Vec<(String, usize)> {
    let mut v: Vec<_> = counts.into_iter().collect();
    // count descending, then key ascending
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(top_k);
    v
}

/// Most frequent keys among wrong and right items.
pub fn error_profile<F>(report: &EvalReport, key_fn: F, top_k: usize) -> ErrorProfile
where
    F: Fn(&ItemRecord) -> String,
{
    let (mut wrong, mut right) = (BTreeMap::new(), BTreeMap::new());
    for item in &report.items {
        let bucket = if item.correct { &mut right } else { &mut wrong };
        *bucket.entry(key_fn(item)).or_insert(0) += 1;
    }
    ErrorProfile { incorrect: ranked(wrong, top_k), correct: ranked(right, top_k) }
}
