use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{param_err, Error, Result};

/// One item of sparse word counts: a document for LDA or a user for the
/// mixture model. Entries are sorted by word with positive counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    id: String,
    entries: Vec<(u32, u32)>,
}

impl Document {
    /// Builds a document, merging repeated words and dropping zero counts.
    pub fn new(id: impl Into<String>, mut entries: Vec<(u32, u32)>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return param_err(format!("item id {id:?} must be non-empty without whitespace"));
        }
        entries.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(u32, u32)> = Vec::with_capacity(entries.len());
        for (w, c) in entries {
            if c == 0 {
                continue;
            }
            match merged.last_mut() {
                Some(last) if last.0 == w => last.1 += c,
                _ => merged.push((w, c)),
            }
        }
        Ok(Self { id, entries: merged })
    }

    /// A document from a token list.
    pub fn from_tokens(id: impl Into<String>, tokens: &[u32]) -> Result<Self> {
        Self::new(id, tokens.iter().map(|&w| (w, 1)).collect())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|e| e.1 as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tokens grouped by word in index order, so that a parity split gives
    /// every word either ⌈c/2⌉ or ⌊c/2⌋ of its `c` occurrences.
    pub fn tokens(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.total() as usize);
        for &(w, c) in &self.entries {
            out.extend(std::iter::repeat_n(w, c as usize));
        }
        out
    }

    fn max_word(&self) -> Option<u32> {
        self.entries.last().map(|e| e.0)
    }
}

/// A collection of sparse count vectors over a shared vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    vocab_size: usize,
    docs: Vec<Document>,
}

impl Corpus {
    pub fn new(vocab_size: usize, docs: Vec<Document>) -> Result<Self> {
        if vocab_size == 0 {
            return param_err("vocabulary must be non-empty");
        }
        for d in &docs {
            if let Some(w) = d.max_word() {
                if w as usize >= vocab_size {
                    return param_err(format!(
                        "item {} uses word {w} outside vocabulary of size {vocab_size}",
                        d.id
                    ));
                }
            }
        }
        Ok(Self { vocab_size, docs })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn total_tokens(&self) -> u64 {
        self.docs.iter().map(Document::total).sum()
    }

    /// Per-word totals over all items.
    pub fn word_totals(&self) -> Vec<u64> {
        let mut t = vec![0u64; self.vocab_size];
        for d in &self.docs {
            for (w, c) in d.iter() {
                t[w as usize] += c as u64;
            }
        }
        t
    }

    /// Splits off the last `heldout` items as a test set.
    pub fn split_heldout(&self, heldout: usize) -> Result<(Corpus, Corpus)> {
        if heldout >= self.docs.len() {
            return param_err(format!(
                "cannot hold out {heldout} of {} items",
                self.docs.len()
            ));
        }
        let cut = self.docs.len() - heldout;
        Ok((
            Corpus::new(self.vocab_size, self.docs[..cut].to_vec())?,
            Corpus::new(self.vocab_size, self.docs[cut..].to_vec())?,
        ))
    }

    /// Parses the text format: a `#vocab=V #items=L` header, then one
    /// `item_id<TAB>word:count word:count …` line per item.
    pub fn parse<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut header: Option<(usize, usize)> = None;
        let mut docs = Vec::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            if header.is_none() {
                header = Some(parse_header(&line).map_err(|m| parse_err(lineno, m))?);
                continue;
            }
            let (id, rest) = line.split_once('\t').unwrap_or((line.as_str(), ""));
            let mut entries = Vec::new();
            for tok in rest.split_ascii_whitespace() {
                let (w, c) = tok
                    .split_once(':')
                    .ok_or_else(|| parse_err(lineno, format!("expected word:count, got {tok:?}")))?;
                let w: u32 = w
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad word index {w:?}")))?;
                let c: u32 = c
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad count {c:?}")))?;
                entries.push((w, c));
            }
            let doc = Document::new(id, entries).map_err(|e| parse_err(lineno, e.to_string()))?;
            docs.push(doc);
        }
        let (vocab, items) = header.ok_or_else(|| parse_err(0, "missing #vocab header".into()))?;
        if items != docs.len() {
            return Err(parse_err(
                0,
                format!("header declares {items} items but file has {}", docs.len()),
            ));
        }
        Corpus::new(vocab, docs).map_err(|e| parse_err(0, e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = fs::File::open(path)?;
        Self::parse(f, path)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "#vocab={} #items={}", self.vocab_size, self.docs.len());
        for d in &self.docs {
            s.push_str(&d.id);
            s.push('\t');
            for (k, (w, c)) in d.iter().enumerate() {
                if k > 0 {
                    s.push(' ');
                }
                let _ = write!(s, "{w}:{c}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_header(line: &str) -> std::result::Result<(usize, usize), String> {
    let mut vocab = None;
    let mut items = None;
    for field in line.split_ascii_whitespace() {
        let field = field.trim_start_matches('#');
        match field.split_once('=') {
            Some(("vocab", v)) => vocab = v.parse().ok(),
            Some(("items", v)) => items = v.parse().ok(),
            _ => return Err(format!("unexpected header field {field:?}")),
        }
    }
    match (vocab, items) {
        (Some(v), Some(l)) => Ok((v, l)),
        _ => Err("header must be `#vocab=V #items=L`".into()),
    }
}
