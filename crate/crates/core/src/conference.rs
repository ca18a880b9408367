//! Conference instances: papers, reviewers, subjects, TPMS and bids, plus
//! their on-disk directory format.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Paper;
use crate::error::{Error, Result};

/// Bid levels: 0 none, 1 in a pinch, 2 willing, 3 eager.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Bid(u8);

impl Bid {
    pub const NONE: Bid = Bid(0);
    pub const MAX: Bid = Bid(3);

    pub fn new(value: u8) -> Result<Self> {
        if value > 3 {
            return Err(Error::param(format!("bid {value} outside 0..=3")));
        }
        Ok(Bid(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

/// Sparse m x n bid matrix; zero bids are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BidMatrix {
    n_papers: usize,
    rows: Vec<Vec<(u32, u8)>>,
}

impl BidMatrix {
    pub fn new(n_reviewers: usize, n_papers: usize) -> Self {
        BidMatrix { n_papers, rows: vec![Vec::new(); n_reviewers] }
    }

    /// Builds from (reviewer, paper, bid) entries. Zero bids are dropped and
    /// repeated pairs are rejected.
    pub fn from_entries(
        n_reviewers: usize,
        n_papers: usize,
        entries: impl IntoIterator<Item = (usize, usize, u8)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(u32, u8)>> = vec![Vec::new(); n_reviewers];
        for (r, p, b) in entries {
            if r >= n_reviewers || p >= n_papers {
                return Err(Error::Sparse(format!("bid ({r},{p}) outside {n_reviewers}x{n_papers}")));
            }
            let b = Bid::new(b)?.value();
            if b > 0 {
                rows[r].push((p as u32, b));
            }
        }
        for (r, row) in rows.iter_mut().enumerate() {
            row.sort_unstable_by_key(|e| e.0);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Sparse(format!("reviewer {r} has a repeated bid entry")));
            }
        }
        Ok(BidMatrix { n_papers, rows })
    }

    /// From a dense label vector in reviewer-major order.
    pub fn from_labels(n_reviewers: usize, n_papers: usize, y: &[f64]) -> Result<Self> {
        if y.len() != n_reviewers * n_papers {
            return Err(Error::Dimension(format!("{} labels for a {n_reviewers}x{n_papers} matrix", y.len())));
        }
        let entries = y.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| {
            let b = if v.fract() == 0.0 && (0.0..=3.0).contains(&v) { v as u8 } else { 255 };
            (i / n_papers, i % n_papers, b)
        });
        Self::from_entries(n_reviewers, n_papers, entries)
    }

    pub fn n_reviewers(&self) -> usize {
        self.rows.len()
    }

    pub fn n_papers(&self) -> usize {
        self.n_papers
    }

    pub fn get(&self, r: usize, p: usize) -> u8 {
        let row = &self.rows[r];
        row.binary_search_by_key(&(p as u32), |e| e.0).map_or(0, |k| row[k].1)
    }

    /// Positive entries of reviewer `r`, ascending by paper.
    pub fn row(&self, r: usize) -> &[(u32, u8)] {
        &self.rows[r]
    }

    pub fn positive_count(&self, r: usize) -> usize {
        self.rows[r].len()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn paper_positive_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_papers];
        for row in &self.rows {
            for &(p, _) in row {
                counts[p as usize] += 1;
            }
        }
        counts
    }

    /// Replaces reviewer `r`'s bids with a dense vector over papers.
    pub fn set_row(&mut self, r: usize, dense: &[u8]) -> Result<()> {
        if dense.len() != self.n_papers {
            return Err(Error::Dimension(format!("row of length {} for {} papers", dense.len(), self.n_papers)));
        }
        let mut row = Vec::new();
        for (p, &b) in dense.iter().enumerate() {
            if Bid::new(b)?.value() > 0 {
                row.push((p as u32, b));
            }
        }
        self.rows[r] = row;
        Ok(())
    }

    pub fn dense_row(&self, r: usize) -> Vec<u8> {
        let mut out = vec![0; self.n_papers];
        for &(p, b) in &self.rows[r] {
            out[p as usize] = b;
        }
        out
    }

    /// Reviewer-major dense labels, `y[r * n + p]`.
    pub fn labels(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.rows.len() * self.n_papers];
        for (r, row) in self.rows.iter().enumerate() {
            for &(p, b) in row {
                y[r * self.n_papers + p as usize] = f64::from(b);
            }
        }
        y
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u8)> + '_ {
        self.rows.iter().enumerate().flat_map(|(r, row)| row.iter().map(move |&(p, b)| (r, p as usize, b)))
    }

    /// Keeps the listed reviewers and papers (in the given order).
    pub fn select(&self, reviewers: &[usize], papers: &[usize]) -> BidMatrix {
        let mut remap = vec![u32::MAX; self.n_papers];
        for (new, &old) in papers.iter().enumerate() {
            remap[old] = new as u32;
        }
        let rows = reviewers
            .iter()
            .map(|&r| {
                let mut row: Vec<(u32, u8)> = self.rows[r]
                    .iter()
                    .filter(|&&(p, _)| remap[p as usize] != u32::MAX)
                    .map(|&(p, b)| (remap[p as usize], b))
                    .collect();
                row.sort_unstable_by_key(|e| e.0);
                row
            })
            .collect();
        BidMatrix { n_papers: papers.len(), rows }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reviewer {
    pub reviewer_id: String,
    /// Authored corpus paper ids (the reviewer's publication profile).
    pub authored: Vec<String>,
    pub subjects: Vec<u32>,
}

/// Pipeline parameters echoed into dataset and run manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRecord {
    pub lambda: f64,
    pub u_cap: usize,
    pub k: usize,
    pub r: usize,
    pub p: usize,
    pub hash_ratio: f64,
    pub alpha: f64,
    pub mu: f64,
    pub beta: f64,
}

impl Default for ParamRecord {
    fn default() -> Self {
        ParamRecord { lambda: 1.0, u_cap: 60, k: 50, r: 3, p: 6, hash_ratio: 0.01, alpha: 0.2, mu: 80.0, beta: 1000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub params: ParamRecord,
    pub n_subjects: usize,
    /// File name -> lowercase hex SHA-256.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConferenceMeta {
    pub seed: u64,
    pub params: ParamRecord,
}

/// m reviewers x n papers, indexed by sorted id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Conference {
    papers: Vec<Paper>,
    reviewers: Vec<Reviewer>,
    paper_subjects: Vec<Vec<u32>>,
    n_subjects: usize,
    /// Reviewer-major, `tpms[r * n + p]`.
    tpms: Vec<f64>,
    bids: BidMatrix,
    meta: ConferenceMeta,
}

fn sorted_order<T>(items: &[T], key: impl Fn(&T) -> &str) -> Vec<usize> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| key(&items[a]).cmp(key(&items[b])));
    order
}

fn check_subjects(list: &[u32], n_subjects: usize, owner: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for &s in list {
        if s as usize >= n_subjects {
            return Err(Error::param(format!("{owner} references unknown subject {s}")));
        }
        if !seen.insert(s) {
            return Err(Error::param(format!("{owner} lists subject {s} twice")));
        }
    }
    if list.len() > 5 {
        return Err(Error::param(format!("{owner} has more than 5 subjects")));
    }
    Ok(())
}

impl Conference {
    /// Assembles a conference, reordering papers and reviewers by id.
    /// `tpms` is reviewer-major in the input order; `bids` entries use input
    /// indices.
    pub fn new(
        papers: Vec<Paper>,
        paper_subjects: Vec<Vec<u32>>,
        reviewers: Vec<Reviewer>,
        n_subjects: usize,
        tpms: Vec<f64>,
        bids: &BidMatrix,
    ) -> Result<Self> {
        let (n, m) = (papers.len(), reviewers.len());
        if paper_subjects.len() != n {
            return Err(Error::Dimension("one subject list per paper required".into()));
        }
        if tpms.len() != m * n {
            return Err(Error::Dimension(format!("tpms has {} entries, expected {}", tpms.len(), m * n)));
        }
        if bids.n_reviewers() != m || bids.n_papers() != n {
            return Err(Error::Dimension("bid matrix shape differs from conference".into()));
        }
        let p_order = sorted_order(&papers, |p| &p.paper_id);
        let r_order = sorted_order(&reviewers, |r| &r.reviewer_id);
        for w in p_order.windows(2) {
            if papers[w[0]].paper_id == papers[w[1]].paper_id {
                return Err(Error::DuplicateId(papers[w[0]].paper_id.clone()));
            }
        }
        for w in r_order.windows(2) {
            if reviewers[w[0]].reviewer_id == reviewers[w[1]].reviewer_id {
                return Err(Error::DuplicateId(reviewers[w[0]].reviewer_id.clone()));
            }
        }
        for (p, s) in papers.iter().zip(&paper_subjects) {
            check_subjects(s, n_subjects, &p.paper_id)?;
        }
        for r in &reviewers {
            check_subjects(&r.subjects, n_subjects, &r.reviewer_id)?;
        }
        for &t in &tpms {
            if !t.is_finite() {
                return Err(Error::NonFinite("tpms"));
            }
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::param(format!("tpms value {t} outside [0,1]")));
            }
        }
        let new_tpms =
            r_order.iter().flat_map(|&r| p_order.iter().map(move |&p| (r, p))).map(|(r, p)| tpms[r * n + p]).collect();
        let new_bids = bids.select(&r_order, &p_order);
        let mut papers_opt: Vec<Option<Paper>> = papers.into_iter().map(Some).collect();
        let mut reviewers_opt: Vec<Option<Reviewer>> = reviewers.into_iter().map(Some).collect();
        Ok(Conference {
            papers: p_order.iter().map(|&i| papers_opt[i].take().unwrap()).collect(),
            paper_subjects: p_order.iter().map(|&i| paper_subjects[i].clone()).collect(),
            reviewers: r_order.iter().map(|&i| reviewers_opt[i].take().unwrap()).collect(),
            n_subjects,
            tpms: new_tpms,
            bids: new_bids,
            meta: ConferenceMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: ConferenceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn meta(&self) -> &ConferenceMeta {
        &self.meta
    }

    pub fn n_papers(&self) -> usize {
        self.papers.len()
    }

    pub fn n_reviewers(&self) -> usize {
        self.reviewers.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn reviewers(&self) -> &[Reviewer] {
        &self.reviewers
    }

    pub fn paper_subjects(&self, p: usize) -> &[u32] {
        &self.paper_subjects[p]
    }

    pub fn reviewer_subjects(&self, r: usize) -> &[u32] {
        &self.reviewers[r].subjects
    }

    pub fn tpms(&self, r: usize, p: usize) -> f64 {
        self.tpms[r * self.papers.len() + p]
    }

    pub fn tpms_matrix(&self) -> &[f64] {
        &self.tpms
    }

    pub fn bids(&self) -> &BidMatrix {
        &self.bids
    }

    pub fn with_bids(&self, bids: BidMatrix) -> Result<Self> {
        if bids.n_reviewers() != self.n_reviewers() || bids.n_papers() != self.n_papers() {
            return Err(Error::Dimension("bid matrix shape differs from conference".into()));
        }
        let mut c = self.clone();
        c.bids = bids;
        Ok(c)
    }

    /// |subj(r) ∩ subj(p)|
    pub fn subject_overlap(&self, r: usize, p: usize) -> usize {
        let ps = &self.paper_subjects[p];
        self.reviewers[r].subjects.iter().filter(|s| ps.contains(s)).count()
    }

    /// True when every paper column has maximum exactly 1 (or there are no reviewers).
    pub fn tpms_columns_normalized(&self) -> bool {
        let (m, n) = (self.n_reviewers(), self.n_papers());
        m == 0 || (0..n).all(|p| (0..m).map(|r| self.tpms(r, p)).fold(f64::MIN, f64::max) == 1.0)
    }

    /// Sub-conference on the given reviewer and paper indices (kept in sorted
    /// id order). TPMS columns are re-normalized min-max over the kept reviewers.
    pub fn subset(&self, reviewers: &[usize], papers: &[usize]) -> Result<Self> {
        let mut rs = reviewers.to_vec();
        let mut ps = papers.to_vec();
        rs.sort_unstable();
        rs.dedup();
        ps.sort_unstable();
        ps.dedup();
        let n = self.n_papers();
        let mut tpms = Vec::with_capacity(rs.len() * ps.len());
        for &r in &rs {
            for &p in &ps {
                tpms.push(self.tpms[r * n + p]);
            }
        }
        crate::synth::tpms::normalize_columns(&mut tpms, rs.len(), ps.len());
        let bids = self.bids.select(&rs, &ps);
        let conf = Conference::new(
            ps.iter().map(|&p| self.papers[p].clone()).collect(),
            ps.iter().map(|&p| self.paper_subjects[p].clone()).collect(),
            rs.iter().map(|&r| self.reviewers[r].clone()).collect(),
            self.n_subjects,
            tpms,
            &bids,
        )?;
        Ok(conf.with_meta(self.meta.clone()))
    }
}

pub const CONFERENCE_FILES: [&str; 5] =
    ["papers.jsonl", "reviewers.jsonl", "paper_subjects.csv", "tpms.csv", "bids.csv"];

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Vec<u8>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut buf);
        w.write_record(header).expect("in-memory write");
        fill(&mut w).expect("in-memory write");
        w.flush().expect("in-memory flush");
    }
    buf
}

fn jsonl_bytes<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it).expect("serializable");
        buf.push(b'\n');
    }
    buf
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the conference directory and returns its manifest.
pub fn save_conference(conf: &Conference, dir: &Path) -> Result<DatasetManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = conf.n_papers();
    let mut contents: Vec<(&str, Vec<u8>)> = Vec::new();
    contents.push(("papers.jsonl", jsonl_bytes(&conf.papers)));
    contents.push(("reviewers.jsonl", jsonl_bytes(&conf.reviewers)));
    contents.push((
        "paper_subjects.csv",
        csv_bytes(&["paper_index", "rank", "cluster_id"], |w| {
            for (p, subs) in conf.paper_subjects.iter().enumerate() {
                for (k, s) in subs.iter().enumerate() {
                    w.write_record(&[p.to_string(), k.to_string(), s.to_string()])?;
                }
            }
            Ok(())
        }),
    ));
    contents.push((
        "tpms.csv",
        csv_bytes(&["reviewer_index", "paper_index", "value"], |w| {
            for (i, v) in conf.tpms.iter().enumerate() {
                w.write_record(&[(i / n).to_string(), (i % n).to_string(), v.to_string()])?;
            }
            Ok(())
        }),
    ));
    contents.push((
        "bids.csv",
        csv_bytes(&["reviewer_index", "paper_index", "bid"], |w| {
            for (r, p, b) in conf.bids.entries() {
                w.write_record(&[r.to_string(), p.to_string(), b.to_string()])?;
            }
            Ok(())
        }),
    ));
    let mut files = BTreeMap::new();
    for (name, bytes) in &contents {
        write_file(dir, name, bytes)?;
        files.insert(name.to_string(), sha256_hex(bytes));
    }
    let manifest =
        DatasetManifest { seed: conf.meta.seed, params: conf.meta.params, n_subjects: conf.n_subjects, files };
    let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    write_file(dir, "manifest.json", &json)?;
    Ok(manifest)
}

fn read_checked(dir: &Path, name: &str, manifest: &DatasetManifest) -> Result<Vec<u8>> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::MissingFile(name.to_string()));
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let actual = sha256_hex(&bytes);
    match manifest.files.get(name) {
        Some(expected) if *expected == actual => Ok(bytes),
        Some(expected) => Err(Error::Checksum { file: name.to_string(), expected: expected.clone(), actual }),
        None => Err(Error::Checksum { file: name.to_string(), expected: "<absent>".into(), actual }),
    }
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Parse { line: i + 1, message: e.to_string() }))
        .collect()
}

fn parse_csv<T: for<'de> Deserialize<'de>>(bytes: &[u8]) -> Result<Vec<T>> {
    let mut rdr = csv::Reader::from_reader(bytes);
    rdr.deserialize()
        .enumerate()
        .map(|(i, rec)| rec.map_err(|e| Error::Parse { line: i + 2, message: e.to_string() }))
        .collect()
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join("manifest.json");
    if !path.exists() {
        return Err(Error::MissingFile("manifest.json".into()));
    }
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })
}

/// Loads a conference directory, verifying every file against the manifest.
pub fn load_conference(dir: &Path) -> Result<Conference> {
    let manifest = read_manifest(dir)?;
    for name in CONFERENCE_FILES {
        if !dir.join(name).exists() {
            return Err(Error::MissingFile(name.to_string()));
        }
    }
    let papers: Vec<Paper> = parse_jsonl(&read_checked(dir, "papers.jsonl", &manifest)?)?;
    let reviewers: Vec<Reviewer> = parse_jsonl(&read_checked(dir, "reviewers.jsonl", &manifest)?)?;
    let (m, n) = (reviewers.len(), papers.len());

    let mut paper_subjects = vec![Vec::new(); n];
    let rows: Vec<(usize, usize, u32)> = parse_csv(&read_checked(dir, "paper_subjects.csv", &manifest)?)?;
    for (p, k, s) in rows {
        let list = paper_subjects.get_mut(p).ok_or_else(|| Error::param(format!("paper index {p} out of range")))?;
        if k != list.len() {
            return Err(Error::param(format!("paper {p} subject ranks out of order")));
        }
        list.push(s);
    }

    let mut tpms = vec![f64::NAN; m * n];
    let rows: Vec<(usize, usize, f64)> = parse_csv(&read_checked(dir, "tpms.csv", &manifest)?)?;
    for (r, p, v) in rows {
        if r >= m || p >= n {
            return Err(Error::param(format!("tpms entry ({r},{p}) out of range")));
        }
        tpms[r * n + p] = v;
    }
    if tpms.iter().any(|v| v.is_nan()) {
        return Err(Error::param("tpms.csv does not cover every reviewer-paper pair"));
    }

    let rows: Vec<(usize, usize, u8)> = parse_csv(&read_checked(dir, "bids.csv", &manifest)?)?;
    let bids = BidMatrix::from_entries(m, n, rows)?;
    let conf = Conference::new(papers, paper_subjects, reviewers, manifest.n_subjects, tpms, &bids)?;
    Ok(conf.with_meta(ConferenceMeta { seed: manifest.seed, params: manifest.params }))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn toy_paper(id: &str, title: &str) -> Paper {
        Paper {
            paper_id: id.into(),
            title: title.into(),
            abstract_text: String::new(),
            venue: "v".into(),
            year: 2015,
            author_ids: vec![],
            out_citations: vec![],
        }
    }

    pub(crate) fn toy_conference() -> Conference {
        let papers = vec![toy_paper("p1", "deep learning"), toy_paper("p0", "convex optimization")];
        let reviewers = vec![
            Reviewer { reviewer_id: "r1".into(), authored: vec![], subjects: vec![1] },
            Reviewer { reviewer_id: "r0".into(), authored: vec!["x".into()], subjects: vec![0, 1] },
        ];
        // input order: reviewers (r1, r0) x papers (p1, p0)
        let tpms = vec![1.0, 0.25, 0.0, 1.0];
        let bids = BidMatrix::from_entries(2, 2, [(0, 0, 3), (1, 1, 2)]).unwrap();
        Conference::new(papers, vec![vec![0], vec![1, 0]], reviewers, 2, tpms, &bids).unwrap()
    }

    #[test]
    fn construction_sorts_by_id() {
        let c = toy_conference();
        assert_eq!(c.papers()[0].paper_id, "p0");
        assert_eq!(c.reviewers()[0].reviewer_id, "r0");
        // r1 bid 3 on p1 -> (1,1); r0 bid 2 on p0 -> (0,0)
        assert_eq!(c.bids().get(1, 1), 3);
        assert_eq!(c.bids().get(0, 0), 2);
        assert_eq!(c.tpms(1, 1), 1.0);
        assert_eq!(c.tpms(1, 0), 0.25);
        assert_eq!(c.tpms(0, 1), 0.0);
        assert_eq!(c.paper_subjects(0), &[1, 0]);
        assert_eq!(c.subject_overlap(0, 0), 2);
    }

    #[test]
    fn bid_values_validated() {
        assert!(Bid::new(4).is_err());
        assert!(BidMatrix::from_entries(1, 1, [(0, 0, 4)]).is_err());
        let b = BidMatrix::from_entries(1, 3, [(0, 2, 1), (0, 0, 0)]).unwrap();
        assert_eq!(b.nnz(), 1);
        assert_eq!(b.labels(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let c = toy_conference();
        save_conference(&c, dir.path()).unwrap();
        assert_eq!(load_conference(dir.path()).unwrap(), c);

        let tp = dir.path().join("tpms.csv");
        let mut bytes = fs::read(&tp).unwrap();
        let last = bytes.len() - 2;
        bytes[last] ^= 0x01;
        fs::write(&tp, bytes).unwrap();
        assert!(matches!(load_conference(dir.path()), Err(Error::Checksum { ref file, .. }) if file == "tpms.csv"));

        fs::remove_file(dir.path().join("bids.csv")).unwrap();
        assert!(matches!(load_conference(dir.path()), Err(Error::MissingFile(ref f)) if f == "bids.csv"));
    }

    #[test]
    fn csv_is_lf_terminated() {
        let dir = tempfile::tempdir().unwrap();
        save_conference(&toy_conference(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("tpms.csv")).unwrap();
        assert!(!text.contains('\r'));
        assert!(text.starts_with("reviewer_index,paper_index,value\n0,0,1\n"));
    }
}
