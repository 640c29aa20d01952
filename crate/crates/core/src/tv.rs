//! Training targets for tv-embeddings.
//!
//! Each region of an unlabeled document becomes one example: the region
//! vector (view 1) and a representation of its adjacent context (view 2).
//! The context is either the bag of words of the neighbouring regions over a
//! controlled target vocabulary, or the concepts a trained supervised model's
//! convolution layer detects there.

use std::collections::HashSet;

use crate::corpus::{encode, vocab_control, TokenSeq, Vocabulary};
use crate::error::{Error, Result};
use crate::net::{EncodedDoc, Model};
use crate::regions::{context_regions, extract_regions, vectorize, Region, RegionSpec};
use crate::sparse::SparseVec;

/// Target vocabulary: unigrams of `view_vocab` minus the stoplist, capped at
/// `max_size` most frequent.
pub fn target_vocabulary(view_vocab: &Vocabulary, stoplist: &HashSet<String>, max_size: usize) -> Vocabulary {
    vocab_control(&view_vocab.unigrams(), stoplist).truncated(max_size)
}

/// Context bag-of-words target over a controlled vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct UnsupervisedTarget {
    target_vocab: Vocabulary,
    distinguish_sides: bool,
    /// view-vocabulary id -> target id
    id_map: Vec<Option<u32>>,
}

impl UnsupervisedTarget {
    pub fn new(view_vocab: &Vocabulary, target_vocab: Vocabulary, distinguish_sides: bool) -> Self {
        let id_map = view_vocab.entries().iter().map(|t| target_vocab.id(t)).collect();
        UnsupervisedTarget {
            target_vocab,
            distinguish_sides,
            id_map,
        }
    }

    pub fn target_vocab(&self) -> &Vocabulary {
        &self.target_vocab
    }

    pub fn distinguish_sides(&self) -> bool {
        self.distinguish_sides
    }

    pub fn dim(&self) -> usize {
        let v = self.target_vocab.len();
        if self.distinguish_sides {
            2 * v
        } else {
            v
        }
    }
}

#[derive(Debug, Clone)]
pub enum TargetSpec {
    Unsupervised(UnsupervisedTarget),
    /// Binarized convolution-layer output of a trained supervised model.
    PartiallySupervised {
        source: Box<Model>,
        tau: f64,
    },
}

impl TargetSpec {
    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::Unsupervised(t) => t.dim(),
            TargetSpec::PartiallySupervised { source, .. } => source.neurons(),
        }
    }
}

/// Presence of target-vocabulary words in the `p`-word windows left and right
/// of `region` (`p` = region length). `doc` is encoded with the view vocabulary.
pub fn make_unsupervised_target(doc: &TokenSeq, region: &Region, target: &UnsupervisedTarget) -> SparseVec {
    let (left, right) = context_regions(region, region.len);
    let v = target.target_vocab.len() as u32;
    let mut pairs = Vec::new();
    for (side, ctx) in [left, right].iter().enumerate() {
        let offset = if target.distinguish_sides { side as u32 * v } else { 0 };
        for pos in ctx.covered(doc.len()) {
            let mapped = doc.ids[pos].and_then(|id| target.id_map.get(id as usize).copied().flatten());
            if let Some(t) = mapped {
                pairs.push((offset + t, 1.0));
            }
        }
    }
    pairs.sort_unstable_by_key(|p| p.0);
    pairs.dedup_by_key(|p| p.0);
    SparseVec::from_sorted(target.dim(), pairs).expect("sorted and deduplicated")
}

/// Concepts the source model detects in the context of `region`: its
/// rectified convolution output on the left and right windows (width = the
/// source's region size), merged by component-wise max and thresholded at
/// `> tau`. `doc` must be encoded for the source model.
pub fn make_partially_supervised_target(
    source: &Model,
    doc: &EncodedDoc,
    region: &Region,
    tau: f64,
) -> Result<SparseVec> {
    let (left, right) = context_regions(region, source.spec().size);
    let l = source.conv_output(doc, &left)?;
    let r = source.conv_output(doc, &right)?;
    let pairs = l
        .iter()
        .zip(&r)
        .enumerate()
        .filter(|(_, (a, b))| a.max(**b) > tau)
        .map(|(i, _)| (i as u32, 1.0))
        .collect();
    SparseVec::from_sorted(source.neurons(), pairs)
}

/// One tv-embedding training example.
#[derive(Debug, Clone, PartialEq)]
pub struct TvTrainExample {
    pub view1: SparseVec,
    pub target: SparseVec,
}

/// Examples for every region of every document (always padded), in document
/// then offset order. Regions whose target is empty are skipped.
pub fn build_tv_dataset<D: AsRef<[String]>>(
    docs: &[D],
    view_vocab: &Vocabulary,
    spec: &RegionSpec,
    target: &TargetSpec,
) -> Result<Vec<TvTrainExample>> {
    let spec = RegionSpec { pad: true, ..*spec };
    spec.validate()?;
    let mut out = Vec::new();
    for tokens in docs {
        let tokens = tokens.as_ref();
        let doc = encode(tokens, view_vocab);
        let source_doc = match target {
            TargetSpec::PartiallySupervised { source, .. } => Some(source.encode(tokens)),
            TargetSpec::Unsupervised(_) => None,
        };
        for region in extract_regions(&doc, &spec) {
            let z = match target {
                TargetSpec::Unsupervised(t) => make_unsupervised_target(&doc, &region, t),
                TargetSpec::PartiallySupervised { source, tau } => make_partially_supervised_target(
                    source,
                    source_doc.as_ref().expect("encoded above"),
                    &region,
                    *tau,
                )?,
            };
            if z.is_zero() {
                continue;
            }
            out.push(TvTrainExample {
                view1: vectorize(&doc, &region, view_vocab, &spec),
                target: z,
            });
        }
    }
    Ok(out)
}

/// Builds the unsupervised target spec used by `train-tv`.
pub fn unsupervised_target_spec(
    view_vocab: &Vocabulary,
    stoplist: &HashSet<String>,
    target_vocab_size: usize,
    distinguish_sides: bool,
) -> Result<TargetSpec> {
    let tv = target_vocabulary(view_vocab, stoplist, target_vocab_size);
    if tv.is_empty() {
        return Err(Error::Empty("target vocabulary (everything was stoplisted)"));
    }
    Ok(TargetSpec::Unsupervised(UnsupervisedTarget::new(
        view_vocab,
        tv,
        distinguish_sides,
    )))
}
