//! Python bindings: conferences, features, the ridge scorer, attacks, the
//! candidate filter and the assignment solver.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use bidguard::assign::{neurips2014_score, solve_assignment, tpms_only_score};
use bidguard::attack::{
    colluding_blackbox, simple_blackbox_bids, whitebox_colluding, AttackPlan, Instance, MemberBids,
};
use bidguard::conference::{load_conference, save_conference, Conference};
use bidguard::defense::{build_candidate_set, filter_candidates, CandidateSet, Detector, ExactStrategy};
use bidguard::features::FeatureSchema;
use bidguard::pipeline::{build_conference, PipelineConfig};
use bidguard::scoring::{cap_positive_bids, train_ridge, ScoreMatrix, ScoreModel};
use bidguard::sparse::CsrMatrix;
use bidguard::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::MissingFile(_) => PyOSError::new_err(e.to_string()),
        e if e.is_param() => PyValueError::new_err(e.to_string()),
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Pipeline configuration, held as the JSON-backed Rust struct.
#[pyclass(name = "Config")]
pub struct PyConfig(PipelineConfig);

#[pymethods]
impl PyConfig {
    /// Defaults, or the given JSON text (unknown keys are rejected).
    #[new]
    #[pyo3(signature = (json=None))]
    fn new(json: Option<&str>) -> PyResult<Self> {
        match json {
            Some(text) => PipelineConfig::from_json(text).map(PyConfig).map_err(to_py),
            None => Ok(PyConfig(PipelineConfig::default())),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        PipelineConfig::load(&path).map(PyConfig).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.0.seed = seed;
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn u_cap(&self) -> usize {
        self.0.u_cap
    }

    #[getter]
    fn hash_ratio(&self) -> f64 {
        self.0.hash_ratio
    }

    #[getter]
    fn k(&self) -> usize {
        self.0.experiment.k
    }
}

#[pyclass(name = "Conference", frozen)]
pub struct PyConference(Conference);

#[pymethods]
impl PyConference {
    /// Loads a saved conference directory, verifying checksums.
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        load_conference(&dir).map(PyConference).map_err(to_py)
    }

    /// Generates (or loads, if the config names a source) the conference.
    #[staticmethod]
    fn generate(py: Python<'_>, config: &PyConfig) -> PyResult<Self> {
        let cfg = config.0.clone();
        py.detach(|| build_conference(&cfg)).map(PyConference).map_err(to_py)
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        save_conference(&self.0, &dir).map(|_| ()).map_err(to_py)
    }

    #[getter]
    fn n_reviewers(&self) -> usize {
        self.0.n_reviewers()
    }

    #[getter]
    fn n_papers(&self) -> usize {
        self.0.n_papers()
    }

    #[getter]
    fn n_subjects(&self) -> usize {
        self.0.n_subjects()
    }

    /// Reviewer-major m*n TPMS values.
    fn tpms(&self) -> Vec<f64> {
        self.0.tpms_matrix().to_vec()
    }

    /// Positive bids as (reviewer, paper, bid).
    fn bids(&self) -> Vec<(usize, usize, u8)> {
        self.0.bids().entries().collect()
    }

    /// Training labels after keeping at most `u_cap` positive bids per reviewer.
    fn capped_labels(&self, u_cap: usize, seed: u64) -> PyResult<Vec<f64>> {
        cap_positive_bids(self.0.bids(), u_cap, seed).map(|b| b.labels()).map_err(to_py)
    }

    fn featurize(&self, py: Python<'_>, hash_ratio: f64) -> PyResult<PyFeatures> {
        py.detach(|| bidguard::pipeline::featurize(&self.0, hash_ratio)).map(|(_, x)| PyFeatures(x)).map_err(to_py)
    }

    fn neurips2014_scores(&self) -> PyResult<Vec<f64>> {
        neurips2014_score(&self.0).map(|s| s.values().to_vec()).map_err(to_py)
    }

    fn tpms_only_scores(&self) -> PyResult<Vec<f64>> {
        tpms_only_score(&self.0).map(|s| s.values().to_vec()).map_err(to_py)
    }
}

/// Sparse feature matrix, one row per (reviewer, paper), reviewer-major.
#[pyclass(name = "Features", frozen)]
pub struct PyFeatures(CsrMatrix);

#[pymethods]
impl PyFeatures {
    #[getter]
    fn n_rows(&self) -> usize {
        self.0.n_rows()
    }

    #[getter]
    fn n_cols(&self) -> usize {
        self.0.n_cols()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.0.nnz()
    }

    fn row(&self, i: usize) -> PyResult<Vec<(u32, f64)>> {
        if i >= self.0.n_rows() {
            return Err(PyValueError::new_err(format!("row {i} of {}", self.0.n_rows())));
        }
        Ok(self.0.row(i).iter().collect())
    }
}

#[pyclass(name = "Model", frozen)]
pub struct PyModel(ScoreModel);

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn train(py: Python<'_>, features: &PyFeatures, labels: Vec<f64>, lambda_: f64) -> PyResult<Self> {
        py.detach(|| train_ridge(&features.0, &labels, lambda_)).map(PyModel).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ScoreModel::load(&path).map(PyModel).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(&path).map_err(to_py)
    }

    #[getter]
    fn lambda_(&self) -> f64 {
        self.0.lambda()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn predict(&self, features: &PyFeatures) -> PyResult<Vec<f64>> {
        self.0.predict(&features.0).map_err(to_py)
    }
}

#[pyclass(name = "AttackPlan", frozen)]
pub struct PyAttackPlan(AttackPlan);

#[pymethods]
impl PyAttackPlan {
    #[getter]
    fn reviewer(&self) -> usize {
        self.0.reviewer
    }

    #[getter]
    fn paper(&self) -> usize {
        self.0.paper
    }

    /// (member, full bid vector) pairs, target reviewer first.
    #[getter]
    fn party(&self) -> Vec<(usize, Vec<u32>)> {
        self.0.party.iter().map(|b| (b.reviewer, b.bids.iter().map(|&v| u32::from(v)).collect())).collect()
    }

    #[getter]
    fn predicted_gain(&self) -> Option<f64> {
        self.0.predicted_gain
    }

    /// Labels with every member's row replaced by the overlay.
    fn apply_labels(&self, labels: Vec<f64>, n_papers: usize) -> PyResult<Vec<f64>> {
        let m = labels.len().checked_div(n_papers).unwrap_or(0);
        if n_papers == 0 || !labels.len().is_multiple_of(n_papers) {
            return Err(PyValueError::new_err("labels do not form whole reviewer rows"));
        }
        for b in &self.0.party {
            if b.reviewer >= m || b.bids.len() != n_papers {
                return Err(PyValueError::new_err(format!("member {} does not fit {m}x{n_papers}", b.reviewer)));
            }
        }
        Ok(self.0.apply_labels(&labels, n_papers))
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.0).expect("plan serializes")
    }
}

/// (reviewer, paper, score, robust_score, removed, party)
type VerdictTuple = (usize, usize, f64, f64, bool, Vec<usize>);

/// (pairs, deficit per paper, total score)
type AssignmentTuple = (Vec<(usize, usize)>, Vec<usize>, f64);

fn instance<'a>(features: &'a PyFeatures, labels: &'a [f64], m: usize, n: usize) -> PyResult<Instance<'a>> {
    Instance::new(&features.0, labels, m, n).map_err(to_py)
}

/// Optimal colluding white-box attack on s(reviewer, paper).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn whitebox_attack(
    model: &PyModel,
    features: &PyFeatures,
    labels: Vec<f64>,
    n_reviewers: usize,
    n_papers: usize,
    reviewer: usize,
    paper: usize,
    party_size: usize,
    u_cap: usize,
) -> PyResult<PyAttackPlan> {
    let inst = instance(features, &labels, n_reviewers, n_papers)?;
    whitebox_colluding(&model.0, &inst, reviewer, paper, party_size, u_cap).map(PyAttackPlan).map_err(to_py)
}

/// Colluding black-box attack: subject-sharing colluders bid on the papers
/// most aligned with the target pair.
#[pyfunction]
fn blackbox_attack(
    conference: &PyConference,
    features: &PyFeatures,
    reviewer: usize,
    paper: usize,
    party_size: usize,
    u_cap: usize,
) -> PyResult<PyAttackPlan> {
    colluding_blackbox(&conference.0, &features.0, reviewer, paper, party_size, u_cap).map(PyAttackPlan).map_err(to_py)
}

/// The lone reviewer bids only on the target paper.
#[pyfunction]
fn simple_attack(n_papers: usize, reviewer: usize, paper: usize) -> PyResult<PyAttackPlan> {
    if paper >= n_papers {
        return Err(PyValueError::new_err(format!("paper {paper} of {n_papers}")));
    }
    Ok(PyAttackPlan(AttackPlan {
        reviewer,
        paper,
        party: vec![MemberBids { reviewer, bids: simple_blackbox_bids(n_papers, paper) }],
        predicted_gain: None,
    }))
}

/// Screens the top-`k` candidates of every paper. Returns one tuple
/// (reviewer, paper, score, robust_score, removed, party) per candidate.
#[pyfunction]
#[pyo3(signature = (model, features, labels, n_reviewers, n_papers, k, party_size, detector="approx"))]
#[allow(clippy::too_many_arguments)]
fn detect(
    py: Python<'_>,
    model: &PyModel,
    features: &PyFeatures,
    labels: Vec<f64>,
    n_reviewers: usize,
    n_papers: usize,
    k: usize,
    party_size: usize,
    detector: &str,
) -> PyResult<Vec<VerdictTuple>> {
    let detector = match detector {
        "approx" => Detector::Approx,
        "exact" => Detector::Exact(ExactStrategy::Enumerate),
        "greedy" => Detector::Exact(ExactStrategy::GreedyRefit),
        other => return Err(PyValueError::new_err(format!("unknown detector {other:?}"))),
    };
    let inst = instance(features, &labels, n_reviewers, n_papers)?;
    let verdicts = py
        .detach(|| {
            let scores = ScoreMatrix::new(n_reviewers, n_papers, model.0.predict(&features.0)?)?;
            let candidates = build_candidate_set(&scores, k)?;
            filter_candidates(&candidates, &scores, &model.0, &inst, detector, party_size)
        })
        .map_err(to_py)?
        .1;
    Ok(verdicts.into_iter().map(|v| (v.reviewer, v.paper, v.score, v.robust_score, v.removed, v.party)).collect())
}

/// Max-score assignment with `per_paper` reviewers per paper and at most
/// `per_reviewer` papers per reviewer. `candidates[p]` lists the reviewers
/// permitted for paper p. Returns (pairs, deficit per paper, total score).
#[pyfunction]
#[pyo3(signature = (scores, n_reviewers, n_papers, per_paper, per_reviewer, candidates=None))]
fn assign(
    scores: Vec<f64>,
    n_reviewers: usize,
    n_papers: usize,
    per_paper: usize,
    per_reviewer: usize,
    candidates: Option<Vec<Vec<u32>>>,
) -> PyResult<AssignmentTuple> {
    let scores = ScoreMatrix::new(n_reviewers, n_papers, scores).map_err(to_py)?;
    let permitted = match candidates {
        Some(members) => {
            if members.len() != n_papers || members.iter().flatten().any(|&r| r as usize >= n_reviewers) {
                return Err(PyValueError::new_err("candidates must list valid reviewers for every paper"));
            }
            let k = members.iter().map(Vec::len).max().unwrap_or(0);
            Some(CandidateSet::from_members(n_reviewers, k, members))
        }
        None => None,
    };
    let a = solve_assignment(&scores, permitted.as_ref(), per_paper, per_reviewer).map_err(to_py)?;
    Ok((a.pairs, a.deficit, a.total_score))
}

/// Runs everything into `out`; returns the run manifest as JSON.
#[pyfunction]
#[pyo3(signature = (config, out, threads=1))]
fn run_pipeline(py: Python<'_>, config: &PyConfig, out: PathBuf, threads: usize) -> PyResult<String> {
    let cfg = config.0.clone();
    let manifest = py.detach(|| bidguard::pipeline::run_pipeline(&cfg, &out, threads)).map_err(to_py)?;
    Ok(serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
}

#[pyfunction]
fn emit_report(dir: PathBuf) -> PyResult<String> {
    bidguard::pipeline::emit_report(&dir).map_err(to_py)
}

/// Total feature dimension for raw block sizes (five base, four crosses).
#[pyfunction]
fn feature_dimension(base: [u64; 5], cross: [u64; 4], hash_ratio: f64) -> PyResult<usize> {
    FeatureSchema::from_block_dims(base, cross, hash_ratio).map(|s| s.total_dim).map_err(to_py)
}

#[pymodule]
pub fn pybidguard(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyConference>()?;
    m.add_class::<PyFeatures>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyAttackPlan>()?;
    m.add_function(wrap_pyfunction!(whitebox_attack, m)?)?;
    m.add_function(wrap_pyfunction!(blackbox_attack, m)?)?;
    m.add_function(wrap_pyfunction!(simple_attack, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(assign, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(emit_report, m)?)?;
    m.add_function(wrap_pyfunction!(feature_dimension, m)?)?;
    Ok(())
}
