//! Corpus records and JSON-lines I/O. A record is one JSON object per
//! line: `{"text": str, "category": str, "group": str}`. The category
//! field may be absent (some sources only carry the group label); models
//! that consume categories reject such examples at the point of use.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::hierarchy::LabelHierarchy;
use super::vocab::{tokenize, Vocab};
use super::DataError;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawRecord {
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<String>,
    group: String,
}

/// Text-level example; token ids are assigned later once a vocabulary
/// exists.
#[derive(Debug, Clone)]
pub struct TextExample {
    pub text: String,
    pub category: Option<usize>,
    pub group: usize,
}

#[derive(Debug, Clone, Default)]
pub struct TextCorpus {
    pub examples: Vec<TextExample>,
}

impl TextCorpus {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> TextCorpus {
        TextCorpus {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }
}

/// Token-id example. The group's parent category equals `category` when
/// present; sequence length is at least 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub tokens: Vec<usize>,
    pub category: Option<usize>,
    pub group: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub examples: Vec<Example>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Corpus {
        Corpus {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    pub fn group_counts(&self, n_groups: usize) -> Vec<usize> {
        let mut counts = vec![0usize; n_groups];
        for ex in &self.examples {
            counts[ex.group] += 1;
        }
        counts
    }

    pub fn group_labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.group).collect()
    }
}

/// Reads and validates a JSON-lines corpus: labels must exist in the
/// hierarchy, the category (when present) must be the group's parent, and
/// every text must produce at least one token. Errors carry line numbers.
pub fn load_corpus(path: &Path, hier: &LabelHierarchy) -> Result<TextCorpus, DataError> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| DataError::Io {
        path: display.clone(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut examples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| DataError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord = serde_json::from_str(&line).map_err(|e| DataError::Parse {
            path: display.clone(),
            line: line_no,
            message: e.to_string(),
        })?;

        let group = hier
            .group_index(&record.group)
            .ok_or_else(|| DataError::UnknownGroup {
                path: display.clone(),
                line: line_no,
                name: record.group.clone(),
            })?;
        let category = match &record.category {
            None => None,
            Some(name) => {
                let c = hier
                    .category_index(name)
                    .ok_or_else(|| DataError::UnknownCategory {
                        path: display.clone(),
                        line: line_no,
                        name: name.clone(),
                    })?;
                let expected = hier.group_parent(group);
                if c != expected {
                    return Err(DataError::InconsistentPair {
                        path: display.clone(),
                        line: line_no,
                        group: record.group.clone(),
                        expected: hier.category_name(expected).to_string(),
                        found: name.clone(),
                    });
                }
                Some(c)
            }
        };
        if tokenize(&record.text).is_empty() {
            return Err(DataError::EmptyText {
                path: display.clone(),
                line: line_no,
            });
        }
        examples.push(TextExample {
            text: record.text,
            category,
            group,
        });
    }
    Ok(TextCorpus { examples })
}

pub fn save_corpus(
    path: &Path,
    corpus: &TextCorpus,
    hier: &LabelHierarchy,
) -> Result<(), DataError> {
    let display = path.display().to_string();
    let io_err = |source| DataError::Io {
        path: display.clone(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for ex in &corpus.examples {
        let record = RawRecord {
            text: ex.text.clone(),
            category: ex.category.map(|c| hier.category_name(c).to_string()),
            group: hier.group_name(ex.group).to_string(),
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(w, "{line}").map_err(|source| DataError::Io {
            path: display.clone(),
            source,
        })?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: display.clone(),
        source,
    })?;
    Ok(())
}

/// Maps texts to token-id sequences with the given vocabulary, truncating
/// to `max_len`. Inputs validated by [`load_corpus`] always tokenize to
/// at least one id.
pub fn encode_corpus(text_corpus: &TextCorpus, vocab: &Vocab, max_len: usize) -> Corpus {
    Corpus {
        examples: text_corpus
            .examples
            .iter()
            .map(|ex| Example {
                tokens: vocab.encode(&ex.text, max_len),
                category: ex.category,
                group: ex.group,
            })
            .collect(),
    }
}
