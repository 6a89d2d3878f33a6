//! Lexicon-based daily sentiment scores, scaled by resident population.
//!
//! Tokenization: lowercase; drop whitespace-separated tokens that are URLs
//! (`http://`, `https://`, `www.`) or mentions (`@name`); every character
//! that is not alphanumeric, an apostrophe or a hyphen becomes a space;
//! leading/trailing apostrophes and hyphens are trimmed; split on whitespace.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconKind {
    /// Words tagged ±1; a document scores #positive − #negative.
    Binary,
    /// Integer word scores in [−5, 5], summed over tokens.
    Scored,
}

impl std::str::FromStr for LexiconKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "binary" | "bing" => Ok(LexiconKind::Binary),
            "scored" | "afinn" => Ok(LexiconKind::Scored),
            _ => Err(Error::invalid(format!("unknown lexicon kind '{s}' (binary|scored)"))),
        }
    }
}

impl fmt::Display for LexiconKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LexiconKind::Binary => "binary",
            LexiconKind::Scored => "scored",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    kind: LexiconKind,
    entries: BTreeMap<String, i32>,
}

impl Lexicon {
    pub fn new<I, S>(kind: LexiconKind, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, i32)>,
        S: Into<String>,
    {
        let mut map = BTreeMap::new();
        for (word, score) in entries {
            let word = word.into();
            check_entry(kind, &word, score)?;
            if map.insert(word.clone(), score).is_some() {
                return Err(Error::invalid(format!("lexicon: duplicate word '{word}'")));
            }
        }
        if map.is_empty() {
            return Err(Error::invalid("lexicon: no entries"));
        }
        Ok(Lexicon { kind, entries: map })
    }

    /// Parses `word<TAB>score` lines; blank lines and `#` comments skipped.
    pub fn parse_tsv(text: &str, kind: LexiconKind) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let row = i + 1;
            let (word, score) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::invalid(format!("lexicon line {row}: expected word<TAB>score")))?;
            let score: i32 = score
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("lexicon line {row}: score '{}' is not an integer", score.trim())))?;
            let word = word.trim().to_string();
            check_entry(kind, &word, score).map_err(|e| Error::invalid(format!("lexicon line {row}: {e}")))?;
            if map.insert(word.clone(), score).is_some() {
                return Err(Error::invalid(format!("lexicon line {row}: duplicate word '{word}'")));
            }
        }
        if map.is_empty() {
            return Err(Error::invalid("lexicon: no entries"));
        }
        Ok(Lexicon { kind, entries: map })
    }

    pub fn load(path: &Path, kind: LexiconKind) -> Result<Self> {
        Lexicon::parse_tsv(&std::fs::read_to_string(path)?, kind)
    }

    pub fn kind(&self) -> LexiconKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<i32> {
        self.entries.get(word).copied()
    }
}

fn check_entry(kind: LexiconKind, word: &str, score: i32) -> Result<()> {
    if word.is_empty() {
        return Err(Error::invalid("empty word"));
    }
    if word.chars().any(|c| c.is_uppercase()) {
        return Err(Error::invalid(format!("word '{word}' is not lowercase")));
    }
    let ok = match kind {
        LexiconKind::Binary => score == 1 || score == -1,
        LexiconKind::Scored => (-5..=5).contains(&score),
    };
    if !ok {
        return Err(Error::invalid(format!("score {score} for '{word}' out of range for a {kind} lexicon")));
    }
    Ok(())
}

fn is_url_or_mention(token: &str) -> bool {
    token.starts_with("http://") || token.starts_with("https://") || token.starts_with("www.") || token.starts_with('@')
}

pub fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let mut out = Vec::new();
    for raw in lower.split_whitespace() {
        if is_url_or_mention(raw) {
            continue;
        }
        let cleaned: String = raw
            .chars()
            .map(|c| if c.is_alphanumeric() || c == '\'' || c == '-' { c } else { ' ' })
            .collect();
        for piece in cleaned.split_whitespace() {
            let t = piece.trim_matches(|c| c == '\'' || c == '-');
            if !t.is_empty() {
                out.push(t.to_string());
            }
        }
    }
    out
}

pub fn score_tokens(tokens: &[String], lex: &Lexicon) -> f64 {
    let mut s = 0i64;
    for t in tokens {
        if let Some(v) = lex.get(t) {
            s += match lex.kind {
                LexiconKind::Binary => v.signum() as i64,
                LexiconKind::Scored => v as i64,
            };
        }
    }
    s as f64
}

pub fn score_document(text: &str, lex: &Lexicon) -> f64 {
    score_tokens(&tokenize(text), lex)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDocument {
    pub date: NaiveDate,
    pub raw_score: f64,
    pub token_count: usize,
}

pub fn score_corpus(docs: &[(NaiveDate, String)], lex: &Lexicon) -> Vec<ScoredDocument> {
    docs.iter()
        .map(|(date, text)| {
            let tokens = tokenize(text);
            ScoredDocument { date: *date, raw_score: score_tokens(&tokens, lex), token_count: tokens.len() }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DailySeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    /// Number of documents per day (the tweet-volume series).
    pub counts: Vec<usize>,
}

/// Per-day sum of raw scores divided by `population`; days in the range
/// with no documents score 0. The range defaults to the span of `docs`.
pub fn aggregate_daily(
    docs: &[ScoredDocument],
    population: u64,
    range: Option<(NaiveDate, NaiveDate)>,
) -> Result<DailySeries> {
    if population == 0 {
        return Err(Error::invalid("aggregate_daily: population must be positive"));
    }
    let (start, end) = match range {
        Some((a, b)) if a > b => return Err(Error::invalid(format!("aggregate_daily: range start {a} after end {b}"))),
        Some(r) => r,
        None => match (docs.iter().map(|d| d.date).min(), docs.iter().map(|d| d.date).max()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Ok(DailySeries { dates: vec![], values: vec![], counts: vec![] }),
        },
    };
    let days = (end - start).num_days() as usize + 1;
    let mut sums = vec![0.0; days];
    let mut counts = vec![0usize; days];
    for d in docs {
        if d.date < start || d.date > end {
            continue;
        }
        let k = (d.date - start).num_days() as usize;
        sums[k] += d.raw_score;
        counts[k] += 1;
    }
    let p = population as f64;
    Ok(DailySeries {
        dates: (0..days).map(|k| start + Duration::days(k as i64)).collect(),
        values: sums.into_iter().map(|s| s / p).collect(),
        counts,
    })
}

/// Reads a `date,text` CSV corpus.
pub fn read_corpus(path: &Path) -> Result<Vec<(NaiveDate, String)>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let di = headers.iter().position(|h| h.trim() == "date");
    let ti = headers.iter().position(|h| h.trim() == "text");
    let (Some(di), Some(ti)) = (di, ti) else {
        return Err(Error::invalid(format!("{}: corpus needs 'date' and 'text' columns", path.display())));
    };
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let raw = rec.get(di).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw, "%Y-%m-%d")
            .map_err(|_| Error::invalid(format!("{} row {row}: bad date '{raw}'", path.display())))?;
        out.push((date, rec.get(ti).unwrap_or("").to_string()));
    }
    Ok(out)
}

/// Writes `date,<name>` rows.
pub fn write_daily_csv<W: std::io::Write>(series: &DailySeries, name: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["date", name])?;
    for (d, v) in series.dates.iter().zip(&series.values) {
        w.write_record([d.format("%Y-%m-%d").to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
