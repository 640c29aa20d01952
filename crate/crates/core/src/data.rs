//! Labeled, unlabeled and stoplist text files.
//!
//! * labeled: one document per line, `label<TAB>text`; multiple labels are
//!   comma-separated.
//! * unlabeled: one document per line; blank lines are skipped.
//! * stoplist: one token per line, `#` starts a comment line.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use crate::corpus::tokenize;
use crate::error::{Error, Result};

/// Tokenized documents with their label ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    /// Label names; ids index into this list.
    pub label_names: Vec<String>,
    pub docs: Vec<Vec<String>>,
    pub labels: Vec<Vec<usize>>,
}

impl LabeledSet {
    /// Builds a set from string labels. Label ids follow sorted label order.
    pub fn from_pairs<L, T>(pairs: &[(L, T)]) -> Result<Self>
    where
        L: AsRef<str>,
        T: AsRef<str>,
    {
        let mut parsed = Vec::with_capacity(pairs.len());
        let mut names = BTreeSet::new();
        for (i, (labels, text)) in pairs.iter().enumerate() {
            let ls: Vec<String> = labels
                .as_ref()
                .split(',')
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect();
            if ls.is_empty() {
                return Err(Error::Format {
                    kind: "labeled data",
                    section: "labels".into(),
                    line: i + 1,
                    message: "document has no label".into(),
                });
            }
            names.extend(ls.iter().cloned());
            parsed.push((ls, tokenize(text.as_ref())));
        }
        let label_names: Vec<String> = names.into_iter().collect();
        let mut set = LabeledSet {
            label_names,
            ..Default::default()
        };
        for (ls, doc) in parsed {
            let mut ids: Vec<usize> = ls
                .iter()
                .map(|l| set.label_names.binary_search(l).expect("collected above"))
                .collect();
            ids.sort_unstable();
            ids.dedup();
            set.docs.push(doc);
            set.labels.push(ids);
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    /// True when some document carries more than one label.
    pub fn has_multi_labels(&self) -> bool {
        self.labels.iter().any(|l| l.len() > 1)
    }

    /// Subset by document index, keeping the full label list.
    pub fn subset(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            label_names: self.label_names.clone(),
            docs: indices.iter().map(|&i| self.docs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Re-expresses labels against another label list (e.g. a trained model's).
    pub fn relabel(&self, names: &[String]) -> Result<LabeledSet> {
        let mut labels = Vec::with_capacity(self.labels.len());
        for ls in &self.labels {
            let mut mapped = Vec::with_capacity(ls.len());
            for &l in ls {
                let name = &self.label_names[l];
                let id = names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Contract(format!("label `{name}` unknown to the model")))?;
                mapped.push(id);
            }
            mapped.sort_unstable();
            labels.push(mapped);
        }
        Ok(LabeledSet {
            label_names: names.to_vec(),
            docs: self.docs.clone(),
            labels,
        })
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn parse_labeled(content: &str) -> Result<LabeledSet> {
    let mut pairs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, text) = line.split_once('\t').ok_or_else(|| Error::Format {
            kind: "labeled data",
            section: "document".into(),
            line: i + 1,
            message: "expected `label<TAB>text`".into(),
        })?;
        pairs.push((label, text));
    }
    LabeledSet::from_pairs(&pairs)
}

pub fn load_labeled(path: &Path) -> Result<LabeledSet> {
    parse_labeled(&read(path)?)
}

pub fn parse_unlabeled(content: &str) -> Vec<Vec<String>> {
    content.lines().filter(|l| !l.trim().is_empty()).map(tokenize).collect()
}

pub fn load_unlabeled(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(parse_unlabeled(&read(path)?))
}

pub fn parse_stoplist(content: &str) -> HashSet<String> {
    content
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn load_stoplist(path: &Path) -> Result<HashSet<String>> {
    Ok(parse_stoplist(&read(path)?))
}
