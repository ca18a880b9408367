//! End-to-end orchestration: corpus, conference, features, model,
//! experiments and report files under one configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::conference::{load_conference, save_conference, sha256_hex, Conference};
use crate::corpus::{load_corpus, Corpus};
use crate::error::{Error, Result};
use crate::eval::{run_experiments, ExperimentConfig, QualityReport, Results, Study};
use crate::features::{assemble_feature_matrix, FeatureSchema};
use crate::sparse::CsrMatrix;
use crate::synth::{generate_corpus, simulate_conference, CorpusGenConfig, SynthConfig};

pub const REPORT_FILES: [&str; 6] = ["fig1.csv", "fig2.csv", "fig3.csv", "table1.csv", "table2.csv", "ap_at_k.csv"];
const STALE_MARKER: &str = "STALE";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Existing corpus in JSONL; generated from `corpus` when absent.
    pub corpus_path: Option<PathBuf>,
    pub corpus: CorpusGenConfig,
    /// Existing conference directory; simulated from `conference` when absent.
    pub conference_dir: Option<PathBuf>,
    pub conference: SynthConfig,
    pub hash_ratio: f64,
    pub lambda: f64,
    /// Positive bids kept per reviewer for training.
    pub u_cap: usize,
    pub experiment: ExperimentConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            corpus_path: None,
            corpus: CorpusGenConfig::default(),
            conference_dir: None,
            conference: SynthConfig::default(),
            hash_ratio: 0.01,
            lambda: 1.0,
            u_cap: 60,
            experiment: ExperimentConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::param(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks that need no data.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.hash_ratio > 0.0 && self.hash_ratio <= 1.0) {
            return Err(Error::param(format!("hash_ratio must lie in (0, 1], got {}", self.hash_ratio)));
        }
        if self.u_cap == 0 {
            return Err(Error::param("u_cap must be positive"));
        }
        self.conference.bids.validate()?;
        if self.conference_dir.is_none() {
            if let Some(m) = self.conference.n_reviewers {
                if self.experiment.k > m {
                    return Err(Error::param(format!("K = {} exceeds the {m} reviewers", self.experiment.k)));
                }
            }
        }
        Ok(())
    }
}

pub fn build_corpus(cfg: &PipelineConfig) -> Result<Corpus> {
    match &cfg.corpus_path {
        Some(path) => load_corpus(path),
        None => generate_corpus(&cfg.corpus, cfg.seed),
    }
}

pub fn build_conference(cfg: &PipelineConfig) -> Result<Conference> {
    match &cfg.conference_dir {
        Some(dir) => load_conference(dir),
        None => {
            let corpus = build_corpus(cfg).map_err(|e| e.in_stage("corpus"))?;
            Ok(simulate_conference(&corpus, &cfg.conference, cfg.seed)?.conference)
        }
    }
}

pub fn featurize(conf: &Conference, hash_ratio: f64) -> Result<(FeatureSchema, CsrMatrix)> {
    let schema = FeatureSchema::for_conference(conf, hash_ratio)?;
    let x = assemble_feature_matrix(conf, &schema)?;
    Ok((schema, x))
}

/// Runs every experiment on a prepared conference.
pub fn evaluate(conf: &Conference, x: &CsrMatrix, cfg: &PipelineConfig) -> Result<Results> {
    let study = Study::new(conf, x, &cfg.experiment, cfg.lambda, cfg.u_cap, cfg.seed)?;
    run_experiments(&study)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: PipelineConfig,
    pub n_reviewers: usize,
    pub n_papers: usize,
    pub feature_dim: usize,
    /// File name -> lowercase hex SHA-256.
    pub artifacts: BTreeMap<String, String>,
}

/// Full pipeline into `out`; `threads` sizes a dedicated worker pool and
/// does not affect any output byte.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path, threads: usize) -> Result<RunManifest> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param(format!("thread pool: {e}")))?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let stale = out.join(STALE_MARKER);
    fs::write(&stale, "incomplete run\n").map_err(|e| Error::io(&stale, e))?;
    let manifest = pool.install(|| run_stages(cfg, out))?;
    fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
    Ok(manifest)
}

fn run_stages(cfg: &PipelineConfig, out: &Path) -> Result<RunManifest> {
    let conf = build_conference(cfg).map_err(|e| e.in_stage("conference"))?;
    cfg.experiment.validate(conf.n_reviewers(), conf.n_papers()).map_err(|e| e.in_stage("config"))?;
    let conf_dir = out.join("conference");
    let conf_manifest = save_conference(&conf, &conf_dir).map_err(|e| e.in_stage("conference"))?;
    let (_, x) = featurize(&conf, cfg.hash_ratio).map_err(|e| e.in_stage("featurize"))?;
    let results = evaluate(&conf, &x, cfg).map_err(|e| e.in_stage("evaluate"))?;
    let mut artifacts = write_reports(&results, out, &cfg.experiment).map_err(|e| e.in_stage("report"))?;
    for (name, sum) in conf_manifest.files {
        artifacts.insert(format!("conference/{name}"), sum);
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        n_reviewers: conf.n_reviewers(),
        n_papers: conf.n_papers(),
        feature_dim: x.n_cols(),
        artifacts,
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn opt6(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_default()
}

fn quality_cells(q: &QualityReport) -> Vec<String> {
    vec![
        opt6(q.frac_positive_bids),
        opt6(q.avg_bid_score),
        opt6(q.avg_tpms),
        opt6(q.avg_max_tpms),
        q.n_under_reviewed.to_string(),
    ]
}

const QUALITY_HEADER: [&str; 5] =
    ["frac_positive_bids", "avg_bid_score", "avg_tpms", "avg_max_tpms", "n_under_reviewed"];

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn kebab<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

/// Writes every report CSV and returns their checksums.
pub fn write_reports(results: &Results, out: &Path, cfg: &ExperimentConfig) -> Result<BTreeMap<String, String>> {
    let mut sums = BTreeMap::new();
    let rate_cells = |r: &crate::eval::BinRate| {
        vec![r.lo.to_string(), r.hi.to_string(), r.trials.to_string(), opt6(r.honest_rate), opt6(r.attack_rate)]
    };

    let rows: Vec<Vec<String>> = results
        .fig1
        .iter()
        .map(|r| {
            let mut v = vec![kebab(&r.rule)];
            v.extend(rate_cells(&r.rate));
            v
        })
        .collect();
    let header = strings(&["rule", "bin_lo", "bin_hi", "trials", "honest_rate", "attack_rate"]);
    sums.insert("fig1.csv".into(), write_csv(&out.join("fig1.csv"), &header, &rows)?);

    let rows: Vec<Vec<String>> = results
        .fig2
        .iter()
        .map(|r| {
            let mut v = vec![kebab(&r.attack), r.party_size.to_string()];
            v.extend(rate_cells(&r.rate));
            v.push(opt6(r.rate.entry_rate));
            v
        })
        .collect();
    let header = strings(&[
        "attack",
        "party_size",
        "bin_lo",
        "bin_hi",
        "trials",
        "honest_rate",
        "attack_rate",
        "top_k_entry_rate",
    ]);
    sums.insert("fig2.csv".into(), write_csv(&out.join("fig2.csv"), &header, &rows)?);

    let rows: Vec<Vec<String>> = results
        .fig3
        .iter()
        .map(|r| {
            vec![
                kebab(&r.attack),
                kebab(&r.population),
                r.party_size.to_string(),
                r.detector_size.to_string(),
                r.attacks.to_string(),
                opt6(r.tpr),
            ]
        })
        .collect();
    let header = strings(&["attack", "population", "party_size", "detector_size", "attacks", "tpr"]);
    sums.insert("fig3.csv".into(), write_csv(&out.join("fig3.csv"), &header, &rows)?);

    let fpr_cols: Vec<usize> = cfg.fpr_top.iter().map(|&j| j.min(cfg.k)).collect();
    let mut header = vec!["setting".to_string()];
    header.extend(QUALITY_HEADER.iter().map(|s| s.to_string()));
    header.extend(fpr_cols.iter().map(|j| format!("fpr_top{j}")));
    let rows: Vec<Vec<String>> = results
        .table1
        .iter()
        .map(|r| {
            let mut v = vec![r.setting.clone()];
            v.extend(quality_cells(&r.quality));
            for &j in &fpr_cols {
                v.push(
                    r.quality.fpr.iter().find(|(jj, _)| *jj == j).and_then(|(_, f)| *f).map(fmt6).unwrap_or_default(),
                );
            }
            v
        })
        .collect();
    sums.insert("table1.csv".into(), write_csv(&out.join("table1.csv"), &header, &rows)?);

    let mut header = strings(&["defense", "param"]);
    header.extend(QUALITY_HEADER.iter().map(|s| s.to_string()));
    header.extend(cfg.comparison_party_sizes.iter().map(|ma| format!("tpr_party{ma}")));
    let rows: Vec<Vec<String>> = results
        .table2
        .iter()
        .map(|r| {
            let mut v = vec![r.defense.clone(), r.param.to_string()];
            v.extend(quality_cells(&r.quality));
            v.extend(r.tpr.iter().map(|(_, t)| opt6(*t)));
            v
        })
        .collect();
    sums.insert("table2.csv".into(), write_csv(&out.join("table2.csv"), &header, &rows)?);

    let rows: Vec<Vec<String>> =
        results.ap_at_k.iter().map(|r| vec![r.split.clone(), r.axis.clone(), r.k.to_string(), fmt6(r.ap)]).collect();
    let header = strings(&["split", "axis", "k", "ap"]);
    sums.insert("ap_at_k.csv".into(), write_csv(&out.join("ap_at_k.csv"), &header, &rows)?);
    Ok(sums)
}

/// A report CSV as header plus string records.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReportTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn value(&self, row: usize, name: &str) -> Option<f64> {
        self.column(name).and_then(|c| self.rows[row][c].parse().ok())
    }

    pub fn find_row(&self, key_col: &str, key: &str) -> Option<usize> {
        let c = self.column(key_col)?;
        self.rows.iter().position(|r| r[c] == key)
    }
}

pub fn read_report(dir: &Path, name: &str) -> Result<ReportTable> {
    let path = dir.join(name);
    if !path.exists() {
        return Err(Error::MissingFile(path.display().to_string()));
    }
    let mut rdr = csv::Reader::from_path(&path).map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
    let header =
        rdr.headers().map_err(|e| Error::io(&path, std::io::Error::other(e)))?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(ReportTable { header, rows })
}

/// Full-scale reference quality rows (frac pos, avg bid, avg TPMS, avg max TPMS).
const REFERENCE_QUALITY: [(&str, [f64; 4]); 8] = [
    ("neurips2014", [0.990, 2.732, 0.732, 0.737]),
    ("tpms-only", [0.323, 0.872, 0.949, 0.997]),
    ("md=0", [0.442, 1.200, 0.848, 0.943]),
    ("md=1", [0.443, 1.201, 0.849, 0.943]),
    ("md=2", [0.442, 1.199, 0.850, 0.944]),
    ("md=3", [0.439, 1.191, 0.852, 0.945]),
    ("md=4", [0.435, 1.181, 0.855, 0.947]),
    ("md=5", [0.433, 1.172, 0.859, 0.950]),
];

fn cell(t: &ReportTable, row: usize, col: &str) -> String {
    t.column(col).map(|c| t.rows[row][c].clone()).filter(|s| !s.is_empty()).unwrap_or_else(|| "-".into())
}

/// Human-readable digest of a reports directory.
pub fn emit_report(dir: &Path) -> Result<String> {
    let tables: Vec<ReportTable> = REPORT_FILES.iter().map(|f| read_report(dir, f)).collect::<Result<_>>()?;
    let [fig1, fig2, fig3, table1, table2, _] = &tables[..] else { unreachable!() };
    let mut s = String::new();

    s.push_str("== simple black-box attack: success by honest rank ==\n");
    for i in 0..fig1.rows.len() {
        s.push_str(&format!(
            "{:<12} ranks {:>4}-{:<4} trials {:>3}  honest {}  attacked {}\n",
            cell(fig1, i, "rule"),
            cell(fig1, i, "bin_lo"),
            cell(fig1, i, "bin_hi"),
            cell(fig1, i, "trials"),
            cell(fig1, i, "honest_rate"),
            cell(fig1, i, "attack_rate"),
        ));
    }

    s.push_str("\n== colluding attacks: success by honest rank ==\n");
    for i in 0..fig2.rows.len() {
        s.push_str(&format!(
            "{:<18} party {:>2} ranks {:>4}-{:<4} trials {:>3}  success {}  top-K entry {}\n",
            cell(fig2, i, "attack"),
            cell(fig2, i, "party_size"),
            cell(fig2, i, "bin_lo"),
            cell(fig2, i, "bin_hi"),
            cell(fig2, i, "trials"),
            cell(fig2, i, "attack_rate"),
            cell(fig2, i, "top_k_entry_rate"),
        ));
    }

    s.push_str("\n== detection TPR ==\n");
    for i in 0..fig3.rows.len() {
        s.push_str(&format!(
            "{:<18} {:<15} party {:>2} detector {:>2} attacks {:>4}  tpr {}\n",
            cell(fig3, i, "attack"),
            cell(fig3, i, "population"),
            cell(fig3, i, "party_size"),
            cell(fig3, i, "detector_size"),
            cell(fig3, i, "attacks"),
            cell(fig3, i, "tpr"),
        ));
    }

    s.push_str("\n== assignment quality (frac_pos avg_bid avg_tpms avg_max_tpms under_reviewed) ==\n");
    let fpr_cols: Vec<&String> = table1.header.iter().filter(|h| h.starts_with("fpr_")).collect();
    for i in 0..table1.rows.len() {
        let setting = cell(table1, i, "setting");
        let metrics: Vec<String> = QUALITY_HEADER.iter().map(|h| cell(table1, i, h)).collect();
        let fprs: Vec<String> = fpr_cols.iter().map(|h| format!("{h} {}", cell(table1, i, h))).collect();
        s.push_str(&format!("quality {:<12} {}  {}\n", setting, metrics.join(" "), fprs.join("  ")));
        if let Some((_, r)) = REFERENCE_QUALITY.iter().find(|(name, _)| *name == setting) {
            s.push_str(&format!("  full-scale reference   {:.3} {:.3} {:.3} {:.3}\n", r[0], r[1], r[2], r[3]));
        }
    }

    if !table2.rows.is_empty() {
        s.push_str("\n== TRIM vs robust filter ==\n");
        let tpr_cols: Vec<&String> = table2.header.iter().filter(|h| h.starts_with("tpr_")).collect();
        for i in 0..table2.rows.len() {
            let metrics: Vec<String> = QUALITY_HEADER[..4].iter().map(|h| cell(table2, i, h)).collect();
            let tprs: Vec<String> = tpr_cols.iter().map(|h| cell(table2, i, h)).collect();
            s.push_str(&format!(
                "{:<7} {:>6}  quality {}  tpr {}\n",
                cell(table2, i, "defense"),
                cell(table2, i, "param"),
                metrics.join(" "),
                tprs.join(" "),
            ));
        }
    }
    Ok(s)
}
