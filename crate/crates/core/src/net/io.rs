//! Textual model files.
//!
//! ```text
//! RETEXT-MODEL 1
//! vocab <n> <ngram_max>        n lines `count<TAB>token`
//! spec size=.. stride=.. mode=.. pad=.. [pooling=.. segments=.. norm=.. multilabel=..]
//! conv <m> <d>                 m weight rows, then one bias row
//! tv <i>                       per attached embedding: vocab, spec, conv, then
//! coupling <m> <m_i>           m rows of V⁽ⁱ⁾
//! top <c> <f>                  c weight rows, then one bias row
//! labels <c>                   c lines
//! end
//! ```
//!
//! Floats are written with 17 significant digits so a load/save cycle is
//! bit-exact. A tv-embedding file has the same layout with an empty top
//! section and no labels.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::layers::{ConvLayer, PoolMode, Pooling, SemiConvLayer, TvEmbedding};
use super::model::{Architecture, Model, TopLayer};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::regions::{RegionMode, RegionSpec};

pub const MAGIC: &str = "RETEXT-MODEL";
pub const VERSION: u32 = 1;

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_row<'a>(out: &mut String, row: impl IntoIterator<Item = &'a f64>) {
    let mut first = true;
    for x in row {
        if !first {
            out.push(' ');
        }
        out.push_str(&fmt_f64(*x));
        first = false;
    }
    out.push('\n');
}

fn write_vocab(out: &mut String, vocab: &Vocabulary) {
    let _ = writeln!(out, "vocab {} {}", vocab.len(), vocab.ngram_max());
    for (tok, count) in vocab.entries().iter().zip(vocab.counts()) {
        let _ = writeln!(out, "{count}\t{tok}");
    }
}

fn region_fields(spec: &RegionSpec) -> String {
    format!(
        "size={} stride={} mode={} pad={}",
        spec.size, spec.stride, spec.mode, spec.pad as u8
    )
}

fn write_conv(out: &mut String, w: &Array2<f64>, b: &Array1<f64>) {
    let _ = writeln!(out, "conv {} {}", w.nrows(), w.ncols());
    for row in w.rows() {
        write_row(out, row);
    }
    write_row(out, b);
}

fn write_embedding_body(out: &mut String, emb: &TvEmbedding) {
    write_vocab(out, emb.vocab());
    let _ = writeln!(out, "spec {}", region_fields(emb.spec()));
    write_conv(out, &emb.layer().w, &emb.layer().b);
}

pub fn model_to_string(model: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    write_vocab(&mut out, model.vocab());
    let arch = model.architecture();
    let _ = writeln!(
        out,
        "spec {} pooling={} segments={} norm={} multilabel={}",
        region_fields(&arch.spec),
        arch.pooling.mode,
        arch.pooling.segments,
        arch.response_norm as u8,
        arch.multi_label as u8
    );
    write_conv(&mut out, &model.conv().w, &model.conv().b);
    for (i, (emb, v)) in model.embeddings().iter().zip(&model.conv().v).enumerate() {
        let _ = writeln!(out, "tv {i}");
        write_embedding_body(&mut out, emb);
        let _ = writeln!(out, "coupling {} {}", v.nrows(), v.ncols());
        for row in v.rows() {
            write_row(&mut out, row);
        }
    }
    let top = model.top();
    let _ = writeln!(out, "top {} {}", top.w.nrows(), top.w.ncols());
    for row in top.w.rows() {
        write_row(&mut out, row);
    }
    write_row(&mut out, &top.b);
    let _ = writeln!(out, "labels {}", model.labels().len());
    for l in model.labels() {
        let _ = writeln!(out, "{l}");
    }
    out.push_str("end\n");
    out
}

pub fn embedding_to_string(emb: &TvEmbedding) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    write_embedding_body(&mut out, emb);
    out.push_str("top 0 0\n\nlabels 0\nend\n");
    out
}

struct Cursor<'a> {
    kind: &'static str,
    lines: Vec<&'a str>,
    pos: usize,
    section: String,
}

impl<'a> Cursor<'a> {
    fn new(kind: &'static str, text: &'a str) -> Self {
        Cursor {
            kind,
            lines: text.split('\n').collect(),
            pos: 0,
            section: "header".into(),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            kind: self.kind,
            section: self.section.clone(),
            line: self.pos,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Result<&'a str> {
        // a trailing newline leaves one empty element that is not a line
        if self.pos >= self.lines.len() || (self.pos + 1 == self.lines.len() && self.lines[self.pos].is_empty()) {
            self.pos += 1;
            return Err(self.err("unexpected end of file"));
        }
        let line = self.lines[self.pos].strip_suffix('\r').unwrap_or(self.lines[self.pos]);
        self.pos += 1;
        Ok(line)
    }

    fn peek_keyword(&self) -> Option<&'a str> {
        self.lines.get(self.pos).and_then(|l| l.split_whitespace().next())
    }

    /// Reads a `<keyword> args...` header line and returns the args.
    fn header(&mut self, keyword: &str) -> Result<Vec<&'a str>> {
        self.section = keyword.to_string();
        let line = self.next_line()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}` section, found `{line}`")));
        }
        Ok(parts.collect())
    }

    fn usize_arg(&self, args: &[&str], i: usize) -> Result<usize> {
        args.get(i)
            .ok_or_else(|| self.err("missing size field"))?
            .parse()
            .map_err(|_| self.err(format!("invalid size `{}`", args[i])))
    }

    fn float_row(&mut self, cols: usize) -> Result<Vec<f64>> {
        let line = self.next_line()?;
        let row: Vec<f64> = line
            .split_ascii_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("invalid number `{t}`"))))
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(self.err(format!("expected {cols} values, found {}", row.len())));
        }
        Ok(row)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Array2<f64>> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.float_row(cols)?);
        }
        Ok(Array2::from_shape_vec((rows, cols), data).expect("shape checked per row"))
    }

    fn vocab(&mut self) -> Result<Vocabulary> {
        let args = self.header("vocab")?;
        let n = self.usize_arg(&args, 0)?;
        let ngram_max = self.usize_arg(&args, 1)?;
        let mut entries = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n);
        for _ in 0..n {
            let line = self.next_line()?;
            let (count, tok) = line
                .split_once('\t')
                .ok_or_else(|| self.err("expected `count<TAB>token`"))?;
            counts.push(
                count
                    .parse()
                    .map_err(|_| self.err(format!("invalid count `{count}`")))?,
            );
            entries.push(tok.to_string());
        }
        Vocabulary::from_entries(entries, counts, ngram_max).map_err(|e| self.err(e.to_string()))
    }

    fn spec(&mut self) -> Result<HashMap<&'a str, &'a str>> {
        let args = self.header("spec")?;
        args.iter()
            .map(|kv| {
                kv.split_once('=')
                    .ok_or_else(|| self.err(format!("expected key=value, found `{kv}`")))
            })
            .collect()
    }

    fn conv(&mut self) -> Result<(Array2<f64>, Array1<f64>)> {
        let args = self.header("conv")?;
        let (m, d) = (self.usize_arg(&args, 0)?, self.usize_arg(&args, 1)?);
        let w = self.matrix(m, d)?;
        let b = Array1::from(self.float_row(m)?);
        Ok((w, b))
    }
}

fn field<'a>(cur: &Cursor, kv: &HashMap<&str, &'a str>, key: &str) -> Result<&'a str> {
    kv.get(key).copied().ok_or_else(|| cur.err(format!("missing `{key}`")))
}

fn parse_flag(cur: &Cursor, s: &str) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(cur.err(format!("invalid flag `{s}`"))),
    }
}

fn region_spec(cur: &Cursor, kv: &HashMap<&str, &str>) -> Result<RegionSpec> {
    let num = |key: &str| -> Result<usize> {
        let s = field(cur, kv, key)?;
        s.parse().map_err(|_| cur.err(format!("invalid `{key}` value `{s}`")))
    };
    let mode: RegionMode = field(cur, kv, "mode")?
        .parse()
        .map_err(|e: Error| cur.err(e.to_string()))?;
    RegionSpec::new(
        num("size")?,
        num("stride")?,
        mode,
        parse_flag(cur, field(cur, kv, "pad")?)?,
    )
    .map_err(|e| cur.err(e.to_string()))
}

fn check_magic(cur: &mut Cursor) -> Result<()> {
    let line = cur.next_line()?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(cur.err(format!("not a model file (expected `{MAGIC} {VERSION}`)")));
    }
    match parts.next().map(str::parse::<u32>) {
        Some(Ok(VERSION)) => Ok(()),
        Some(Ok(v)) => Err(cur.err(format!(
            "unsupported model format version {v} (this build reads version {VERSION})"
        ))),
        _ => Err(cur.err("missing or invalid version")),
    }
}

fn embedding_body(cur: &mut Cursor) -> Result<TvEmbedding> {
    let vocab = cur.vocab()?;
    let kv = cur.spec()?;
    let spec = region_spec(cur, &kv)?;
    let (w, b) = cur.conv()?;
    let layer = ConvLayer::new(w, b).map_err(|e| cur.err(e.to_string()))?;
    TvEmbedding::new(layer, spec, vocab).map_err(|e| cur.err(e.to_string()))
}

fn top_and_labels(cur: &mut Cursor) -> Result<(TopLayer, Vec<String>)> {
    let args = cur.header("top")?;
    let (c, f) = (cur.usize_arg(&args, 0)?, cur.usize_arg(&args, 1)?);
    let w = cur.matrix(c, f)?;
    let b = Array1::from(cur.float_row(c)?);
    let args = cur.header("labels")?;
    let n = cur.usize_arg(&args, 0)?;
    let labels = (0..n)
        .map(|_| cur.next_line().map(str::to_string))
        .collect::<Result<Vec<_>>>()?;
    cur.header("end")?;
    Ok((TopLayer { w, b }, labels))
}

pub fn model_from_str(text: &str) -> Result<Model> {
    let mut cur = Cursor::new("model", text);
    check_magic(&mut cur)?;
    let vocab = cur.vocab()?;
    let kv = cur.spec()?;
    let spec = region_spec(&cur, &kv)?;
    let pooling = Pooling {
        mode: field(&cur, &kv, "pooling")?
            .parse::<PoolMode>()
            .map_err(|e| cur.err(e.to_string()))?,
        segments: field(&cur, &kv, "segments")?
            .parse()
            .map_err(|_| cur.err("invalid `segments`"))?,
    };
    let response_norm = parse_flag(&cur, field(&cur, &kv, "norm")?)?;
    let multi_label = parse_flag(&cur, field(&cur, &kv, "multilabel")?)?;
    let (w, b) = cur.conv()?;
    let mut embeddings = Vec::new();
    let mut couplings = Vec::new();
    while cur.peek_keyword() == Some("tv") {
        let args = cur.header("tv")?;
        let i = cur.usize_arg(&args, 0)?;
        if i != embeddings.len() {
            return Err(cur.err(format!("expected tv {}, found tv {i}", embeddings.len())));
        }
        embeddings.push(embedding_body(&mut cur)?);
        let args = cur.header("coupling")?;
        let (r, c) = (cur.usize_arg(&args, 0)?, cur.usize_arg(&args, 1)?);
        couplings.push(cur.matrix(r, c)?);
    }
    let (top, labels) = top_and_labels(&mut cur)?;
    let neurons = w.nrows();
    let conv = SemiConvLayer::new(w, b, couplings, embeddings).map_err(|e| cur.err(e.to_string()))?;
    let arch = Architecture {
        spec,
        neurons,
        pooling,
        response_norm,
        multi_label,
    };
    Model::from_parts(vocab, arch, conv, top, labels).map_err(|e| cur.err(e.to_string()))
}

pub fn embedding_from_str(text: &str) -> Result<TvEmbedding> {
    let mut cur = Cursor::new("tv-embedding", text);
    check_magic(&mut cur)?;
    let emb = embedding_body(&mut cur)?;
    if cur.peek_keyword() == Some("tv") {
        return Err(cur.err("a tv-embedding file cannot itself carry embeddings"));
    }
    let _ = top_and_labels(&mut cur)?;
    Ok(emb)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    write_file(path, &model_to_string(model))
}

pub fn load_model(path: &Path) -> Result<Model> {
    model_from_str(&read_file(path)?)
}

pub fn save_embedding(emb: &TvEmbedding, path: &Path) -> Result<()> {
    write_file(path, &embedding_to_string(emb))
}

pub fn load_embedding(path: &Path) -> Result<TvEmbedding> {
    embedding_from_str(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn emb(seed: u64) -> TvEmbedding {
        let vocab = Vocabulary::from_tokens(&["a", "b", "a b"]).unwrap();
        let spec = RegionSpec::new(2, 1, RegionMode::Bonv(2), true).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Array2::from_shape_simple_fn((2, 3), || rand::Rng::gen_range(&mut rng, -1.0..1.0));
        TvEmbedding::new(ConvLayer::new(w, Array1::from(vec![0.1, -0.0])).unwrap(), spec, vocab).unwrap()
    }

    fn model() -> Model {
        let vocab = Vocabulary::from_tokens(&["x", "y", "z"]).unwrap();
        let arch = Architecture {
            spec: RegionSpec::new(2, 1, RegionMode::Seq, true).unwrap(),
            neurons: 3,
            pooling: Pooling {
                mode: PoolMode::Average,
                segments: 2,
            },
            response_norm: true,
            multi_label: true,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        Model::init(
            vocab,
            arch,
            vec!["p".into(), "q".into()],
            vec![emb(1), emb(2)],
            1.0,
            &mut rng,
        )
        .unwrap()
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let m = model();
        let text = model_to_string(&m);
        let back = model_from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_string(&back), text);
        let bits = |m: &Model| m.conv().w.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn embedding_round_trip() {
        let e = emb(5);
        let text = embedding_to_string(&e);
        assert_eq!(embedding_from_str(&text).unwrap(), e);
    }

    #[test]
    fn truncated_file_names_section() {
        let text = model_to_string(&model());
        let conv = text.lines().position(|l| l.starts_with("conv ")).unwrap();
        let cut: String = text.lines().take(conv + 2).map(|l| format!("{l}\n")).collect();
        let err = model_from_str(&cut).unwrap_err().to_string();
        assert!(err.contains("section `conv`"), "{err}");
    }

    #[test]
    fn version_two_is_refused() {
        let text = model_to_string(&model()).replacen("RETEXT-MODEL 1", "RETEXT-MODEL 2", 1);
        let err = model_from_str(&text).unwrap_err().to_string();
        assert!(err.contains("unsupported model format version 2"), "{err}");
    }

    #[test]
    fn bad_number_reports_line() {
        let text = model_to_string(&model());
        let mut lines: Vec<&str> = text.lines().collect();
        let conv_line = lines.iter().position(|l| l.starts_with("conv")).unwrap();
        lines[conv_line + 1] = "1.0 nope 3.0 4 5 6";
        let err = model_from_str(&lines.join("\n")).unwrap_err();
        match err {
            Error::Format { section, line, .. } => {
                assert_eq!(section, "conv");
                assert_eq!(line, conv_line + 2);
            }
            other => panic!("unexpected {other}"),
        }
    }
}
