//! Pattern-based harvesting of duration sentences from raw text.
//!
//! A sentence is kept when a trigger word ("for", "took", "lasting", ...) is
//! followed, without crossing `,.!?;`, by an integer numeral and a temporal
//! unit. Four filter families then reject common false positives (ages,
//! rates, ordinals, "secondary"). Surviving sentences are labeled with the
//! log-second value of the expression and its closest unit, and the
//! expression is replaced by one `[MASK]` per token.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use log::{debug, warn};
use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::duration::{closest_unit, normalize, LogSeconds, TemporalUnit, UnitInventory};
use crate::error::{Error, Result};
use crate::tokens::{tokenize_spans, MASK_TOKEN};

pub const DEFAULT_TRIGGERS: [&str; 11] =
    ["duration", "period", "for", "last", "lasting", "spend", "spent", "over", "take", "took", "taken"];

pub const DEFAULT_GAP_EXCLUDED: &str = ",.!?;";

const UNIT_ALTERNATION: &str = "second|minute|hour|day|week|month|year|decade";

/// Which trigger families are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternSet {
    #[default]
    All,
    ForOnly,
}

impl std::str::FromStr for PatternSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(PatternSet::All),
            "for-only" => Ok(PatternSet::ForOnly),
            other => Err(Error::Config(format!("unknown pattern set {other:?} (expected all or for-only)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractionConfig {
    pub trigger_words: Vec<String>,
    /// Characters that may not appear between trigger and numeral.
    pub gap_excluded: String,
    pub patterns: PatternSet,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            trigger_words: DEFAULT_TRIGGERS.iter().map(|s| s.to_string()).collect(),
            gap_excluded: DEFAULT_GAP_EXCLUDED.to_string(),
            patterns: PatternSet::All,
        }
    }
}

impl ExtractionConfig {
    pub fn for_only() -> Self {
        ExtractionConfig { patterns: PatternSet::ForOnly, ..Default::default() }
    }

    /// Trigger words after applying the pattern-set selector, in priority order.
    pub fn active_triggers(&self) -> Vec<String> {
        match self.patterns {
            PatternSet::All => self.trigger_words.clone(),
            PatternSet::ForOnly => {
                self.trigger_words.iter().filter(|t| t.eq_ignore_ascii_case("for")).cloned().collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurationExpression {
    pub quantity: f64,
    pub unit: TemporalUnit,
    /// Byte range in the source sentence.
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Trigger word as configured (lowercase), not as written.
    pub trigger: String,
    pub trigger_span: Range<usize>,
    pub expression: DurationExpression,
    /// Byte range of the whole match, trigger through unit.
    pub span: Range<usize>,
}

impl MatchResult {
    pub fn sub_sentence<'a>(&self, sentence: &'a str) -> &'a str {
        &sentence[self.span.clone()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FilterFamily {
    /// at / age / every / next / more than / per in the matched text
    FilterWord,
    /// "first time" ... "ninth time" in the matched text
    OrdinalTime,
    /// "<digits> secondary" anywhere in the sentence
    DigitSecondary,
    /// "<unit>[s] old" anywhere in the sentence
    UnitOld,
}

impl FilterFamily {
    pub const ALL: [FilterFamily; 4] =
        [FilterFamily::FilterWord, FilterFamily::OrdinalTime, FilterFamily::DigitSecondary, FilterFamily::UnitOld];

    pub fn name(self) -> &'static str {
        match self {
            FilterFamily::FilterWord => "filter_word",
            FilterFamily::OrdinalTime => "ordinal_time",
            FilterFamily::DigitSecondary => "digit_secondary",
            FilterFamily::UnitOld => "unit_old",
        }
    }
}

impl fmt::Display for FilterFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub masked_text: String,
    pub mask_positions: Vec<usize>,
    pub exact_label: LogSeconds,
    pub range_label: TemporalUnit,
    pub source_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionStats {
    pub documents: usize,
    pub undecodable_documents: usize,
    pub sentences: usize,
    pub matched: usize,
    pub per_trigger: BTreeMap<String, usize>,
    /// Sentences rejected by at least one filter.
    pub filtered: usize,
    /// Firings per filter family; one sentence may fire several.
    pub per_filter: BTreeMap<String, usize>,
    pub skipped_unparseable: usize,
    pub instances: usize,
}

impl ExtractionStats {
    pub fn merge(&mut self, other: &ExtractionStats) {
        self.documents += other.documents;
        self.undecodable_documents += other.undecodable_documents;
        self.sentences += other.sentences;
        self.matched += other.matched;
        for (k, v) in &other.per_trigger {
            *self.per_trigger.entry(k.clone()).or_default() += v;
        }
        self.filtered += other.filtered;
        for (k, v) in &other.per_filter {
            *self.per_filter.entry(k.clone()).or_default() += v;
        }
        self.skipped_unparseable += other.skipped_unparseable;
        self.instances += other.instances;
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExtractionOutput {
    pub instances: Vec<LabeledInstance>,
    pub stats: ExtractionStats,
}

/// Splits on `.`, `!` or `?` followed by whitespace. The terminator stays
/// with its sentence; empty pieces are dropped.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            if let Some(&(_, next)) = chars.peek() {
                if next.is_whitespace() {
                    let end = i + c.len_utf8();
                    let piece = text[start..end].trim();
                    if !piece.is_empty() {
                        out.push(piece);
                    }
                    start = end;
                }
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

pub struct Extractor {
    config: ExtractionConfig,
    triggers: Vec<String>,
    main: Regex,
    filter_words: Regex,
    ordinal_time: Regex,
    digit_secondary: Regex,
    unit_old: Regex,
}

fn case_insensitive(pattern: &str) -> Regex {
    RegexBuilder::new(pattern).case_insensitive(true).build().expect("static pattern")
}

impl Extractor {
    pub fn new(config: ExtractionConfig) -> Result<Extractor> {
        let triggers: Vec<String> = config.active_triggers().iter().map(|t| t.to_lowercase()).collect();
        if triggers.is_empty() || triggers.iter().any(|t| t.is_empty()) {
            return Err(Error::Config("extraction needs at least one non-empty trigger word".into()));
        }
        let alternation = triggers.iter().map(|t| regex::escape(t)).collect::<Vec<_>>().join("|");
        let excluded: String = config.gap_excluded.chars().map(|c| regex::escape(&c.to_string())).collect();
        let gap = if excluded.is_empty() { ".".to_string() } else { format!("[^{excluded}]") };
        // Lazy gap so the numeral is captured whole ("23", not "3").
        let main = format!("(?:{alternation}){gap}*?([0-9]+) ((?:{UNIT_ALTERNATION})s?)");
        let main = RegexBuilder::new(&main)
            .case_insensitive(true)
            .dot_matches_new_line(true)
            .build()
            .map_err(|e| Error::Config(format!("bad extraction pattern: {e}")))?;
        Ok(Extractor {
            config,
            triggers,
            main,
            filter_words: case_insensitive(r"\b(?:at|age|every|next|more\s+than|per)\b"),
            ordinal_time: case_insensitive(r"(?:first|second|third|fourth|fifth|sixth|seventh|eighth|ninth) time"),
            digit_secondary: case_insensitive(r"[0-9]+ secondary"),
            unit_old: case_insensitive(&format!("(?:{UNIT_ALTERNATION})s? old")),
        })
    }

    pub fn config(&self) -> &ExtractionConfig {
        &self.config
    }

    /// Leftmost match of the main pattern.
    pub fn match_sentence(&self, sentence: &str) -> Option<MatchResult> {
        let caps = self.main.captures(sentence)?;
        let whole = caps.get(0)?;
        let numeral = caps.get(1)?;
        let unit = caps.get(2)?;
        let matched = &sentence[whole.start()..];
        // The regex already chose the first alternative that succeeds, so the
        // first configured trigger that prefixes the match is the one used.
        let trigger = self.triggers.iter().find(|t| starts_with_ignore_case(matched, t))?.clone();
        let trigger_span = whole.start()..whole.start() + trigger.len();
        Some(MatchResult {
            trigger,
            trigger_span,
            expression: DurationExpression {
                quantity: numeral.as_str().parse::<f64>().unwrap_or(f64::INFINITY),
                unit: TemporalUnit::parse_word(unit.as_str())?,
                span: numeral.start()..unit.end(),
            },
            span: whole.range(),
        })
    }

    /// Every filter family that rejects this match.
    pub fn fired_filters(&self, m: &MatchResult, sentence: &str) -> Vec<FilterFamily> {
        let sub = m.sub_sentence(sentence);
        let mut fired = Vec::new();
        if self.filter_words.is_match(sub) {
            fired.push(FilterFamily::FilterWord);
        }
        if self.ordinal_time.is_match(sub) {
            fired.push(FilterFamily::OrdinalTime);
        }
        if self.digit_secondary.is_match(sentence) {
            fired.push(FilterFamily::DigitSecondary);
        }
        if self.unit_old.is_match(sentence) {
            fired.push(FilterFamily::UnitOld);
        }
        fired
    }

    pub fn passes_filters(&self, m: &MatchResult, sentence: &str) -> bool {
        self.fired_filters(m, sentence).is_empty()
    }

    /// Masks the duration expression and attaches both labels. Fails when the
    /// numeral does not give a positive finite duration (zero, overflow).
    pub fn label_sentence(&self, sentence: &str, m: &MatchResult, source_id: &str) -> Result<LabeledInstance> {
        let exact_label = normalize(m.expression.quantity, m.expression.unit)?;
        let span = &m.expression.span;
        let mask_count = sentence[span.clone()].split_whitespace().count();
        let masks = vec![MASK_TOKEN; mask_count].join(" ");
        let masked_text = format!("{}{}{}", &sentence[..span.start], masks, &sentence[span.end..]);
        let mask_region = span.start..span.start + masks.len();
        let mask_positions = tokenize_spans(&masked_text)
            .into_iter()
            .enumerate()
            .filter(|(_, (s, e))| *s >= mask_region.start && *e <= mask_region.end)
            .map(|(i, _)| i)
            .collect();
        Ok(LabeledInstance {
            masked_text,
            mask_positions,
            exact_label,
            range_label: closest_unit(exact_label, UnitInventory::Eight),
            source_id: source_id.to_string(),
        })
    }

    /// Runs segmentation, matching, filtering and labeling over one decoded document.
    pub fn extract_document(&self, doc_id: &str, text: &str) -> ExtractionOutput {
        let mut out = ExtractionOutput::default();
        out.stats.documents = 1;
        for (idx, sentence) in split_sentences(text).into_iter().enumerate() {
            out.stats.sentences += 1;
            let Some(m) = self.match_sentence(sentence) else { continue };
            out.stats.matched += 1;
            *out.stats.per_trigger.entry(m.trigger.clone()).or_default() += 1;
            let fired = self.fired_filters(&m, sentence);
            if !fired.is_empty() {
                out.stats.filtered += 1;
                for f in fired {
                    *out.stats.per_filter.entry(f.name().to_string()).or_default() += 1;
                }
                continue;
            }
            match self.label_sentence(sentence, &m, &format!("{doc_id}#{idx}")) {
                Ok(inst) => out.instances.push(inst),
                Err(e) => {
                    debug!("skipping sentence {idx} of {doc_id}: {e}");
                    out.stats.skipped_unparseable += 1;
                }
            }
        }
        out.stats.instances = out.instances.len();
        out
    }

    /// Extracts from a stream of `(doc_id, raw bytes)`. Documents that are not
    /// valid UTF-8 are skipped and counted.
    pub fn extract_corpus<I, B>(&self, documents: I) -> ExtractionOutput
    where
        I: IntoIterator<Item = (String, B)>,
        B: AsRef<[u8]>,
    {
        let mut out = ExtractionOutput::default();
        for (doc_id, bytes) in documents {
            match std::str::from_utf8(bytes.as_ref()) {
                Ok(text) => {
                    let doc = self.extract_document(&doc_id, text);
                    out.instances.extend(doc.instances);
                    out.stats.merge(&doc.stats);
                }
                Err(e) => {
                    warn!("document {doc_id} is not valid UTF-8 ({e}); skipped");
                    out.stats.documents += 1;
                    out.stats.undecodable_documents += 1;
                }
            }
        }
        out
    }
}

fn starts_with_ignore_case(haystack: &str, prefix: &str) -> bool {
    haystack.len() >= prefix.len()
        && haystack.is_char_boundary(prefix.len())
        && haystack[..prefix.len()].to_lowercase() == prefix
}

#[cfg(test)]
mod tests {
    use super::*;
    use TemporalUnit::*;

    fn ex() -> Extractor {
        Extractor::new(ExtractionConfig::default()).unwrap()
    }

    #[test]
    fn away_for_23_years() {
        let s = "He was away for 23 years.";
        let m = ex().match_sentence(s).unwrap();
        assert_eq!(m.trigger, "for");
        assert_eq!(m.expression.quantity, 23.0);
        assert_eq!(m.expression.unit, Year);
        assert_eq!(&s[m.expression.span.clone()], "23 years");
        assert!(ex().passes_filters(&m, s));

        let inst = ex().label_sentence(s, &m, "d#0").unwrap();
        assert_eq!(inst.masked_text, "He was away for [MASK] [MASK].");
        assert_eq!(inst.mask_positions, [4, 5]);
        assert!((inst.exact_label.0 - 20.40213452430379).abs() < 1e-9);
        assert_eq!(inst.range_label, Decade);
    }

    #[test]
    fn no_trigger_no_match() {
        assert!(ex().match_sentence("He smiled.").is_none());
    }

    #[test]
    fn leftmost_match_only() {
        let s = "It took 3 hours, then 2 days.";
        let m = ex().match_sentence(s).unwrap();
        assert_eq!(m.trigger, "took");
        assert_eq!(&s[m.expression.span.clone()], "3 hours");
    }

    #[test]
    fn lasting_resolves_to_first_alternative() {
        let m = ex().match_sentence("A storm lasting 2 days.").unwrap();
        assert_eq!(m.trigger, "last");
    }

    #[test]
    fn case_insensitive_trigger_and_unit() {
        let s = "For 5 MINUTES nothing moved.";
        let m = ex().match_sentence(s).unwrap();
        assert_eq!(m.trigger, "for");
        assert_eq!(m.expression.unit, Minute);
        assert_eq!(m.trigger_span, 0..3);
    }

    #[test]
    fn gap_stops_at_punctuation() {
        assert!(ex().match_sentence("We waited for him, 3 hours later he came.").is_none());
    }

    #[test]
    fn filter_examples() {
        let e = ex();
        let cases = [
            ("He spent 3 days with his 23 years old cousin.", FilterFamily::UnitOld),
            ("It lasted for more than 10 years.", FilterFamily::FilterWord),
            ("For the second time in 3 years he won.", FilterFamily::OrdinalTime),
            ("He spent 4 years in 2 secondary schools.", FilterFamily::DigitSecondary),
        ];
        for (s, fam) in cases {
            let m = e.match_sentence(s).unwrap_or_else(|| panic!("no match: {s}"));
            assert!(!e.passes_filters(&m, s), "{s}");
            assert!(e.fired_filters(&m, s).contains(&fam), "{s}");
        }
    }

    #[test]
    fn filter_words_are_whole_words() {
        let e = ex();
        let s = "The operation later took 3 hours.";
        let m = e.match_sentence(s).unwrap();
        assert!(e.passes_filters(&m, s));
        let s = "They met for 2 hours at noon.";
        // "at" lies outside the matched sub-sentence
        let m = e.match_sentence(s).unwrap();
        assert!(e.passes_filters(&m, s));
    }

    #[test]
    fn masks_at_sentence_start() {
        let e = ex();
        let s = "3 days passed over 2 weeks.";
        let m = e.match_sentence(s).unwrap();
        assert_eq!(&s[m.expression.span.clone()], "2 weeks");
        let s = "Spent 3 days there.";
        let m = e.match_sentence(s).unwrap();
        let inst = e.label_sentence(s, &m, "x").unwrap();
        assert_eq!(inst.masked_text, "Spent [MASK] [MASK] there.");
        assert_eq!(inst.mask_positions, [1, 2]);
    }

    #[test]
    fn took_one_hour() {
        let e = ex();
        let s = "It took 1 hour.";
        let inst = e.label_sentence(s, &e.match_sentence(s).unwrap(), "x").unwrap();
        assert_eq!(inst.masked_text, "It took [MASK] [MASK].");
        assert!((inst.exact_label.0 - 3600f64.ln()).abs() < 1e-12);
        assert_eq!(inst.range_label, Hour);
    }

    #[test]
    fn zero_and_overflowing_numerals_are_skipped() {
        let e = ex();
        let huge = format!("It took {} years.", "9".repeat(400));
        for s in ["It took 0 years.", huge.as_str()] {
            let out = e.extract_document("d", s);
            assert!(out.instances.is_empty());
            assert_eq!(out.stats.skipped_unparseable, 1);
        }
    }

    #[test]
    fn sentence_splitting() {
        assert_eq!(
            split_sentences("He ran. She sat!  Why? 3.5 is a number.Done"),
            ["He ran.", "She sat!", "Why?", "3.5 is a number.Done"]
        );
        assert!(split_sentences("  ").is_empty());
    }

    #[test]
    fn empty_stream() {
        let out = ex().extract_corpus(Vec::<(String, Vec<u8>)>::new());
        assert!(out.instances.is_empty());
        assert_eq!(out.stats, ExtractionStats::default());
    }

    #[test]
    fn undecodable_documents_are_counted() {
        let docs = vec![("bad".to_string(), vec![0xff, 0xfe]), ("ok".to_string(), b"It took 2 days.".to_vec())];
        let out = ex().extract_corpus(docs);
        assert_eq!(out.stats.undecodable_documents, 1);
        assert_eq!(out.stats.documents, 2);
        assert_eq!(out.instances.len(), 1);
    }

    #[test]
    fn empty_trigger_list_rejected() {
        let cfg = ExtractionConfig { trigger_words: vec![], ..Default::default() };
        assert!(matches!(Extractor::new(cfg), Err(Error::Config(_))));
    }
}
