use std::collections::{BTreeSet, HashMap};

use sha2::{Digest, Sha256};

use crate::datamodel::Caption;
use crate::error::{Result, SgnError};

pub const PAD: &str = "<pad>";
pub const SOS: &str = "<sos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// Function words ignored when deciding whether two captions overlap.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "being", "am", "of", "in", "on",
    "at", "to", "for", "with", "by", "from", "into", "onto", "and", "or", "but", "then", "while",
    "this", "that", "these", "those", "it", "its", "as",
];

/// Lowercases and splits on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(|w| w.to_lowercase()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Specials {
    pub pad: usize,
    pub sos: usize,
    pub eos: usize,
    pub unk: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    specials: Specials,
    stopwords: BTreeSet<usize>,
}

/// Builds a vocabulary keeping tokens seen at least `min_count` times.
///
/// Ordering is frequency descending, then lexicographic. Specials occupy
/// indices 0..4 (`<pad>` is 0).
pub fn build_vocabulary<S: AsRef<str>>(corpus: &[Vec<S>], min_count: usize) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(SgnError::Invalid("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for sentence in corpus {
        for tok in sentence {
            *counts.entry(tok.as_ref().to_lowercase()).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(tok, c)| *c >= min_count && ![PAD, SOS, EOS, UNK].contains(&tok.as_str()))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_words(kept.into_iter().map(|(t, _)| t))
}

impl Vocabulary {
    /// Specials followed by `words` in the given order. Duplicates are rejected.
    pub fn from_words<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tokens: Vec<String> = [PAD, SOS, EOS, UNK].iter().map(|s| s.to_string()).collect();
        tokens.extend(words.into_iter().map(Into::into));
        let specials = Specials {
            pad: 0,
            sos: 1,
            eos: 2,
            unk: 3,
        };
        Self::from_parts(tokens, specials)
    }

    fn from_parts(tokens: Vec<String>, specials: Specials) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(SgnError::Data(format!("invalid vocabulary token {t:?}")));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(SgnError::Data(format!("duplicate vocabulary token {t:?}")));
            }
        }
        let sp = [specials.pad, specials.sos, specials.eos, specials.unk];
        let distinct: BTreeSet<usize> = sp.iter().copied().collect();
        if distinct.len() != 4 || sp.iter().any(|&i| i >= tokens.len()) {
            return Err(SgnError::Data("special tokens must be distinct and present".into()));
        }
        let stopwords = STOPWORDS.iter().filter_map(|w| index.get(*w).copied()).collect();
        Ok(Vocabulary {
            tokens,
            index,
            specials,
            stopwords,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn specials(&self) -> Specials {
        self.specials
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn stopwords(&self) -> &BTreeSet<usize> {
        &self.stopwords
    }

    pub fn is_stopword(&self, idx: usize) -> bool {
        self.stopwords.contains(&idx)
    }

    pub fn is_special(&self, idx: usize) -> bool {
        let s = self.specials;
        idx == s.pad || idx == s.sos || idx == s.eos || idx == s.unk
    }

    /// Index of `token`, or `<unk>`.
    pub fn index_of(&self, token: &str) -> usize {
        self.index
            .get(&token.to_lowercase())
            .copied()
            .unwrap_or(self.specials.unk)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    /// Maps words to indices. No `<sos>`/`<eos>` is added.
    pub fn encode<S: AsRef<str>>(&self, text: &[S], max_len: usize) -> Result<Caption> {
        let ids: Vec<usize> = text.iter().map(|w| self.index_of(w.as_ref())).collect();
        Caption::new(ids, max_len, self.specials.pad)
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }

    pub fn decode_string(&self, ids: &[usize]) -> String {
        self.decode(ids).join(" ")
    }

    /// Newline-delimited token list preceded by a header naming the specials.
    pub fn to_text(&self) -> String {
        let s = self.specials;
        let mut out = format!(
            "#vocab pad={} sos={} eos={} unk={}\n",
            s.pad, s.sos, s.eos, s.unk
        );
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| SgnError::Data("empty vocabulary file".into()))?;
        let rest = header
            .strip_prefix("#vocab")
            .ok_or_else(|| SgnError::Data(format!("bad vocabulary header {header:?}")))?;
        let mut fields: HashMap<&str, usize> = HashMap::new();
        for kv in rest.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| SgnError::Data(format!("bad vocabulary header field {kv:?}")))?;
            let v = v
                .parse()
                .map_err(|_| SgnError::Data(format!("bad vocabulary header field {kv:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| SgnError::Data(format!("vocabulary header is missing `{k}`")))
        };
        let specials = Specials {
            pad: get("pad")?,
            sos: get("sos")?,
            eos: get("eos")?,
            unk: get("unk")?,
        };
        let tokens = lines.filter(|l| !l.is_empty()).map(str::to_string).collect();
        Self::from_parts(tokens, specials)
    }

    /// SHA-256 of the serialized form, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}
