//! Reviewer-paper feature rows: title words, subject indicators, binned
//! TPMS and their pairwise crosses, with signed per-block hashing.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conference::Conference;
use crate::error::{Error, Result};
use crate::rng::{fnv1a, splitmix};
use crate::sparse::{CsrMatrix, SparseVector};
use crate::text::tokenize;

pub const TPMS_BINS: usize = 11;
pub const TV_DIM: usize = 1 + TPMS_BINS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockKind {
    #[serde(rename = "PT")]
    PaperTitle,
    #[serde(rename = "PS")]
    PaperSubjects,
    #[serde(rename = "RS")]
    ReviewerSubjects,
    #[serde(rename = "IS")]
    SharedSubjects,
    #[serde(rename = "TV")]
    Tpms,
    #[serde(rename = "RSxPS")]
    ReviewerSubjectsByPaperSubjects,
    #[serde(rename = "RSxPT")]
    ReviewerSubjectsByTitle,
    #[serde(rename = "ISxPT")]
    SharedSubjectsByTitle,
    #[serde(rename = "ISxTV")]
    SharedSubjectsByTpms,
}

impl BlockKind {
    pub const ALL: [BlockKind; 9] = [
        BlockKind::PaperTitle,
        BlockKind::PaperSubjects,
        BlockKind::ReviewerSubjects,
        BlockKind::SharedSubjects,
        BlockKind::Tpms,
        BlockKind::ReviewerSubjectsByPaperSubjects,
        BlockKind::ReviewerSubjectsByTitle,
        BlockKind::SharedSubjectsByTitle,
        BlockKind::SharedSubjectsByTpms,
    ];

    pub fn is_cross(self) -> bool {
        BlockKind::ALL.iter().position(|&k| k == self).unwrap() >= 5
    }

    fn ordinal(self) -> u8 {
        BlockKind::ALL.iter().position(|&k| k == self).unwrap() as u8
    }

    /// Salt bytes for bucket and sign hashes.
    pub fn salts(self) -> (u8, u8) {
        let k = self.ordinal();
        (2 * k, 2 * k + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub kind: BlockKind,
    pub raw_dim: u64,
    pub hashed: bool,
    pub bucket_count: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub blocks: Vec<BlockSpec>,
    pub total_dim: usize,
    pub hash_ratio: f64,
    pub n_subjects: usize,
    pub title_vocab: Vec<String>,
}

/// Buckets for a hashed block: `floor(raw * ratio)`, at least one. A tiny
/// slack absorbs products like `0.29 * 100` landing just under an integer.
pub fn bucket_count(raw_dim: u64, ratio: f64) -> usize {
    ((raw_dim as f64 * ratio + 1e-9).floor() as usize).max(1)
}

impl FeatureSchema {
    /// Schema from explicit raw block sizes: the five base blocks
    /// (PT, PS, RS, IS, TV) are kept as-is, the four crosses are hashed.
    pub fn from_block_dims(base: [u64; 5], cross: [u64; 4], hash_ratio: f64) -> Result<Self> {
        if !(hash_ratio > 0.0 && hash_ratio.is_finite()) {
            return Err(Error::param(format!("hash ratio must be positive, got {hash_ratio}")));
        }
        let mut blocks = Vec::with_capacity(9);
        let mut offset = 0;
        for (kind, raw) in BlockKind::ALL.iter().zip(base.iter().chain(cross.iter())) {
            let hashed = kind.is_cross();
            let buckets = if hashed { bucket_count(*raw, hash_ratio) } else { *raw as usize };
            blocks.push(BlockSpec { kind: *kind, raw_dim: *raw, hashed, bucket_count: buckets, offset });
            offset += buckets;
        }
        Ok(FeatureSchema {
            blocks,
            total_dim: offset,
            hash_ratio,
            n_subjects: base[1] as usize,
            title_vocab: Vec::new(),
        })
    }

    pub fn new(title_vocab: Vec<String>, n_subjects: usize, hash_ratio: f64) -> Result<Self> {
        let v = title_vocab.len() as u64;
        let s = n_subjects as u64;
        let tv = TV_DIM as u64;
        let mut schema = Self::from_block_dims([v, s, s, s, tv], [s * s, s * v, s * v, s * tv], hash_ratio)?;
        schema.title_vocab = title_vocab;
        Ok(schema)
    }

    /// Title vocabulary is every token of every submitted paper's title.
    pub fn for_conference(conf: &Conference, hash_ratio: f64) -> Result<Self> {
        let vocab: BTreeSet<String> = conf.papers().iter().flat_map(|p| tokenize(&p.title)).collect();
        Self::new(vocab.into_iter().collect(), conf.n_subjects(), hash_ratio)
    }

    pub fn block(&self, kind: BlockKind) -> &BlockSpec {
        self.blocks.iter().find(|b| b.kind == kind).expect("every kind present")
    }
}

/// Signed hashing of one block's raw entries into `bucket_count` buckets.
pub fn hash_index(raw: u64, salt: u8) -> u64 {
    let mut bytes = [0u8; 9];
    bytes[0] = salt;
    bytes[1..].copy_from_slice(&raw.to_be_bytes());
    // FNV alone leaves the high bits nearly constant for short inputs
    splitmix(fnv1a(&bytes))
}

pub fn hash_block(entries: &[(u64, f64)], bucket_count: usize, salts: (u8, u8)) -> Vec<(u32, f64)> {
    assert!(bucket_count >= 1, "bucket_count must be positive");
    let mut out: Vec<(u32, f64)> = entries
        .iter()
        .map(|&(i, v)| {
            let bucket = (hash_index(i, salts.0) % bucket_count as u64) as u32;
            let sign = if hash_index(i, salts.1) >> 63 == 1 { -1.0 } else { 1.0 };
            (bucket, sign * v)
        })
        .collect();
    out.sort_by_key(|e| e.0);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(out.len());
    for (b, v) in out {
        match merged.last_mut() {
            Some(last) if last.0 == b => last.1 += v,
            _ => merged.push((b, v)),
        }
    }
    merged.retain(|e| e.1 != 0.0);
    merged
}

/// Outer product of two sparse blocks at index `i * dim_b + j`.
pub fn quadratic_cross(a: &[(u64, f64)], b: &[(u64, f64)], dim_b: u64) -> Vec<(u64, f64)> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &(i, x) in a {
        for &(j, y) in b {
            if x != 0.0 && y != 0.0 {
                out.push((i * dim_b + j, x * y));
            }
        }
    }
    out
}

/// TPMS value followed by the bin-midpoint of its 11-way bin.
pub fn tpms_block(t: f64) -> Vec<(u64, f64)> {
    let bin = ((t * TPMS_BINS as f64).floor() as usize).min(TPMS_BINS - 1);
    let mut out = Vec::with_capacity(2);
    if t != 0.0 {
        out.push((0, t));
    }
    out.push((1 + bin as u64, (bin as f64 + 0.5) / TPMS_BINS as f64));
    out
}

/// Unhashed base blocks for one reviewer-paper pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BaseFeatures {
    pub title: Vec<(u64, f64)>,
    pub paper_subjects: Vec<(u64, f64)>,
    pub reviewer_subjects: Vec<(u64, f64)>,
    pub shared_subjects: Vec<(u64, f64)>,
    pub tpms: Vec<(u64, f64)>,
}

fn indicator(ids: impl IntoIterator<Item = u32>) -> Vec<(u64, f64)> {
    let set: BTreeSet<u32> = ids.into_iter().collect();
    set.into_iter().map(|s| (u64::from(s), 1.0)).collect()
}

/// Word counts of each paper title over the schema vocabulary.
pub fn title_counts(conf: &Conference, schema: &FeatureSchema) -> Vec<Vec<(u64, f64)>> {
    conf.papers()
        .iter()
        .map(|p| {
            let mut counts: Vec<(u64, f64)> = Vec::new();
            for t in tokenize(&p.title) {
                if let Ok(i) = schema.title_vocab.binary_search(&t) {
                    counts.push((i as u64, 1.0));
                }
            }
            counts.sort_by_key(|e| e.0);
            let mut merged: Vec<(u64, f64)> = Vec::new();
            for (i, v) in counts {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += v,
                    _ => merged.push((i, v)),
                }
            }
            merged
        })
        .collect()
}

/// Base blocks for pair (r, p); `titles` comes from [`title_counts`].
pub fn build_base_features(conf: &Conference, titles: &[Vec<(u64, f64)>], r: usize, p: usize) -> BaseFeatures {
    let rs = conf.reviewer_subjects(r);
    let ps = conf.paper_subjects(p);
    BaseFeatures {
        title: titles[p].clone(),
        paper_subjects: indicator(ps.iter().copied()),
        reviewer_subjects: indicator(rs.iter().copied()),
        shared_subjects: indicator(rs.iter().copied().filter(|s| ps.contains(s))),
        tpms: tpms_block(conf.tpms(r, p)),
    }
}

/// Concatenates base blocks and hashed crosses into one row of width d.
pub fn assemble_row(schema: &FeatureSchema, base: &BaseFeatures) -> Result<SparseVector> {
    let s = schema.n_subjects as u64;
    let v = schema.title_vocab.len() as u64;
    let mut pairs: Vec<(u32, f64)> = Vec::new();
    let push_plain = |kind: BlockKind, entries: &[(u64, f64)], pairs: &mut Vec<(u32, f64)>| -> Result<()> {
        let spec = schema.block(kind);
        for &(i, x) in entries {
            if i >= spec.raw_dim {
                return Err(Error::Dimension(format!("{kind:?} index {i} beyond {}", spec.raw_dim)));
            }
            if x != 0.0 {
                pairs.push(((spec.offset as u64 + i) as u32, x));
            }
        }
        Ok(())
    };
    push_plain(BlockKind::PaperTitle, &base.title, &mut pairs)?;
    push_plain(BlockKind::PaperSubjects, &base.paper_subjects, &mut pairs)?;
    push_plain(BlockKind::ReviewerSubjects, &base.reviewer_subjects, &mut pairs)?;
    push_plain(BlockKind::SharedSubjects, &base.shared_subjects, &mut pairs)?;
    push_plain(BlockKind::Tpms, &base.tpms, &mut pairs)?;
    let crosses = [
        (BlockKind::ReviewerSubjectsByPaperSubjects, quadratic_cross(&base.reviewer_subjects, &base.paper_subjects, s)),
        (BlockKind::ReviewerSubjectsByTitle, quadratic_cross(&base.reviewer_subjects, &base.title, v)),
        (BlockKind::SharedSubjectsByTitle, quadratic_cross(&base.shared_subjects, &base.title, v)),
        (BlockKind::SharedSubjectsByTpms, quadratic_cross(&base.shared_subjects, &base.tpms, TV_DIM as u64)),
    ];
    for (kind, raw) in crosses {
        let spec = schema.block(kind);
        for (b, x) in hash_block(&raw, spec.bucket_count, kind.salts()) {
            pairs.push((spec.offset as u32 + b, x));
        }
    }
    // blocks occupy increasing offsets and each block is sorted
    SparseVector::try_new(schema.total_dim, pairs.iter().map(|e| e.0).collect(), pairs.iter().map(|e| e.1).collect())
}

/// X with one row per (reviewer, paper), reviewer-major. Bids are never read.
pub fn assemble_feature_matrix(conf: &Conference, schema: &FeatureSchema) -> Result<CsrMatrix> {
    if schema.n_subjects != conf.n_subjects() {
        return Err(Error::Dimension(format!(
            "schema has {} subjects, conference has {}",
            schema.n_subjects,
            conf.n_subjects()
        )));
    }
    if schema.total_dim > u32::MAX as usize {
        return Err(Error::Dimension("feature dimension exceeds u32 indices".into()));
    }
    let (m, n) = (conf.n_reviewers(), conf.n_papers());
    let titles = title_counts(conf, schema);
    let rows: Vec<SparseVector> = (0..m * n)
        .into_par_iter()
        .map(|i| {
            let base = build_base_features(conf, &titles, i / n, i % n);
            assemble_row(schema, &base)
        })
        .collect::<Result<_>>()?;
    CsrMatrix::from_rows(schema.total_dim, rows)
}

pub fn save_features(x: &CsrMatrix, schema: &FeatureSchema, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(["row", "col", "value"]).expect("in-memory write");
        for (r, c, v) in x.triplets() {
            w.write_record(&[r.to_string(), c.to_string(), v.to_string()]).expect("in-memory write");
        }
        w.flush().expect("in-memory flush");
    }
    let path = dir.join("features.csv");
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("schema.json");
    let json = serde_json::to_vec_pretty(schema).expect("schema serializes");
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn load_features(dir: &Path, n_rows: usize) -> Result<(CsrMatrix, FeatureSchema)> {
    let path = dir.join("schema.json");
    if !path.exists() {
        return Err(Error::MissingFile("schema.json".into()));
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let schema: FeatureSchema =
        serde_json::from_slice(&bytes).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    let path = dir.join("features.csv");
    if !path.exists() {
        return Err(Error::MissingFile("features.csv".into()));
    }
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
    let mut triplets = Vec::new();
    for (i, rec) in rdr.deserialize::<(usize, u32, f64)>().enumerate() {
        let t = rec.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() })?;
        triplets.push(t);
    }
    let x = CsrMatrix::from_triplets(n_rows, schema.total_dim, triplets)?;
    Ok((x, schema))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_dims_sum() {
        let schema =
            FeatureSchema::from_block_dims([930, 368, 368, 368, 12], [135424, 342240, 342240, 4410], 0.01).unwrap();
        let buckets: Vec<usize> = schema.blocks[5..].iter().map(|b| b.bucket_count).collect();
        assert_eq!(buckets, vec![1354, 3422, 3422, 44]);
        assert_eq!(schema.total_dim, 10288);
        let mut expect = 0;
        for b in &schema.blocks {
            assert_eq!(b.offset, expect);
            expect += b.bucket_count;
        }
    }

    #[test]
    fn tpms_bins() {
        assert_eq!(tpms_block(1.0), vec![(0, 1.0), (11, 10.5 / 11.0)]);
        assert_eq!(tpms_block(0.0), vec![(1, 0.5 / 11.0)]);
        assert_eq!(tpms_block(0.5), vec![(0, 0.5), (6, 5.5 / 11.0)]);
    }

    #[test]
    fn cross_examples() {
        assert!(quadratic_cross(&[], &[(1, 2.0)], 2).is_empty());
        assert_eq!(quadratic_cross(&[(0, 1.0)], &[(1, 2.0)], 2), vec![(1, 2.0)]);
    }

    #[test]
    fn hashing_cancels_opposite_signs() {
        // find two raw indices sharing a bucket with opposite signs
        let salts = (10, 11);
        let buckets = 3;
        let mut found = None;
        'outer: for i in 0..200u64 {
            for j in i + 1..200u64 {
                let same = hash_index(i, salts.0) % buckets == hash_index(j, salts.0) % buckets;
                let opposite = (hash_index(i, salts.1) >> 63) != (hash_index(j, salts.1) >> 63);
                if same && opposite {
                    found = Some((i, j));
                    break 'outer;
                }
            }
        }
        let (i, j) = found.unwrap();
        assert!(hash_block(&[(i, 2.5), (j, 2.5)], buckets as usize, salts).is_empty());
    }

    #[test]
    fn bucket_floor() {
        assert_eq!(bucket_count(100, 0.29), 29);
        assert_eq!(bucket_count(5, 0.01), 1);
        assert_eq!(bucket_count(4410, 0.01), 44);
    }
}
