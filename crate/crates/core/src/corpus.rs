//! Citation corpus: papers, authors and the resolved citation graph.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paper {
    pub paper_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub venue: String,
    pub year: u32,
    pub author_ids: Vec<String>,
    pub out_citations: Vec<String>,
}

/// Validated corpus with dense indices in file order.
#[derive(Debug, Clone)]
pub struct Corpus {
    papers: Vec<Paper>,
    index: HashMap<String, usize>,
    /// author id -> authored paper indices (ascending).
    authors: BTreeMap<String, Vec<usize>>,
    out_resolved: Vec<Vec<usize>>,
    in_citations: Vec<Vec<usize>>,
    neighborhoods: Vec<Vec<usize>>,
    dangling: usize,
}

impl Corpus {
    pub fn new(papers: Vec<Paper>) -> Result<Self> {
        let mut index = HashMap::with_capacity(papers.len());
        for (i, p) in papers.iter().enumerate() {
            if p.year == 0 {
                return Err(Error::param(format!("paper {} has year 0", p.paper_id)));
            }
            if index.insert(p.paper_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(p.paper_id.clone()));
            }
        }
        let mut authors: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, p) in papers.iter().enumerate() {
            for a in &p.author_ids {
                let list = authors.entry(a.clone()).or_default();
                if list.last() != Some(&i) {
                    list.push(i);
                }
            }
        }
        let n = papers.len();
        let mut out_resolved = vec![Vec::new(); n];
        let mut in_citations = vec![Vec::new(); n];
        let mut dangling = 0;
        for (i, p) in papers.iter().enumerate() {
            for c in &p.out_citations {
                match index.get(c) {
                    Some(&j) => out_resolved[i].push(j),
                    None => dangling += 1,
                }
            }
            out_resolved[i].sort_unstable();
            out_resolved[i].dedup();
            for &j in &out_resolved[i] {
                in_citations[j].push(i);
            }
        }
        let neighborhoods = (0..n)
            .map(|i| {
                let mut nb: Vec<usize> = out_resolved[i].iter().chain(&in_citations[i]).copied().collect();
                nb.sort_unstable();
                nb.dedup();
                nb
            })
            .collect();
        Ok(Corpus { papers, index, authors, out_resolved, in_citations, neighborhoods, dangling })
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn papers(&self) -> &[Paper] {
        &self.papers
    }

    pub fn paper(&self, i: usize) -> &Paper {
        &self.papers[i]
    }

    pub fn index_of(&self, paper_id: &str) -> Option<usize> {
        self.index.get(paper_id).copied()
    }

    pub fn authors(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.authors
    }

    pub fn authored(&self, author_id: &str) -> &[usize] {
        self.authors.get(author_id).map_or(&[], Vec::as_slice)
    }

    /// Resolved out-citations of paper `i`, deduplicated and ascending.
    pub fn out_citations(&self, i: usize) -> &[usize] {
        &self.out_resolved[i]
    }

    pub fn in_citations(&self, i: usize) -> &[usize] {
        &self.in_citations[i]
    }

    /// Union of resolved in- and out-citations, ascending.
    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.neighborhoods[i]
    }

    pub fn dangling_citations(&self) -> usize {
        self.dangling
    }

    pub fn total_in_citations(&self) -> usize {
        self.in_citations.iter().map(Vec::len).sum()
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        for p in &self.papers {
            let line = serde_json::to_string(p).expect("paper serializes");
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Reads a JSONL corpus; blank lines are ignored.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    if !path.exists() {
        return Err(Error::MissingFile(path.display().to_string()));
    }
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut papers = Vec::new();
    for (lineno, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let paper: Paper =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: lineno + 1, message: e.to_string() })?;
        if paper.year == 0 {
            return Err(Error::Parse { line: lineno + 1, message: "year must be a positive integer".into() });
        }
        papers.push(paper);
    }
    Corpus::new(papers)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn paper(id: &str, cites: &[&str]) -> Paper {
        Paper {
            paper_id: id.into(),
            title: format!("title {id}"),
            abstract_text: String::new(),
            venue: "v".into(),
            year: 2015,
            author_ids: vec![format!("au_{id}")],
            out_citations: cites.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn neighborhoods_and_dangling() {
        let c = Corpus::new(vec![paper("a", &[]), paper("b", &["a", "zz"]), paper("c", &["a", "b", "a"])]).unwrap();
        assert_eq!(c.neighborhood(0), &[1, 2]);
        assert_eq!(c.neighborhood(1), &[0, 2]);
        assert_eq!(c.out_citations(2), &[0, 1]);
        assert_eq!(c.dangling_citations(), 1);
        assert_eq!(c.total_in_citations(), 3);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Corpus::new(vec![paper("a", &[]), paper("a", &[])]).unwrap_err();
        assert!(matches!(err, Error::DuplicateId(ref id) if id == "a"));
    }
}
