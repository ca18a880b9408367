use std::fs;
use std::path::Path;

use bidguard::assign::solve_assignment;
use bidguard::attack::{
    colluding_blackbox, simple_blackbox_bids, whitebox_colluding, AttackPlan, Instance, MemberBids,
};
use bidguard::conference::{load_conference, save_conference, Conference};
use bidguard::corpus::load_corpus;
use bidguard::defense::{build_candidate_set, filter_candidates, CandidateSet, Detector, ExactStrategy};
use bidguard::features::{load_features, save_features};
use bidguard::pipeline::{build_corpus, fmt6, run_pipeline, PipelineConfig};
use bidguard::scoring::{cap_positive_bids, masked_xty, norm, predict_scores, train_ridge, ScoreModel};
use bidguard::sparse::CsrMatrix;
use bidguard::synth::simulate_conference;

use crate::files::{
    read_json, read_scores, read_verdicts, write_assignment, write_clusters, write_json, write_scores, write_verdicts,
};
use crate::{
    AssignArgs, AttackArgs, AttackKindArg, CliResult, Data, DefendArgs, DetectorArg, Failure, GenConferenceArgs,
    TrainArgs,
};

fn param(msg: impl Into<String>) -> Failure {
    Failure::Param(msg.into())
}

fn ensure_parent(path: &Path) -> CliResult<()> {
    match path.parent().filter(|d| !d.as_os_str().is_empty()) {
        Some(dir) => fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("{}: {e}", dir.display()))),
        None => Ok(()),
    }
}

pub fn gen_corpus(cfg: &PipelineConfig, out: &Path) -> CliResult<()> {
    let corpus = bidguard::synth::generate_corpus(&cfg.corpus, cfg.seed)?;
    ensure_parent(out)?;
    corpus.save_jsonl(out)?;
    println!("papers {}", corpus.len());
    println!("authors {}", corpus.authors().len());
    println!("dangling_citations {}", corpus.dangling_citations());
    Ok(())
}

pub fn gen_conference(mut cfg: PipelineConfig, args: GenConferenceArgs) -> CliResult<()> {
    let synth = &mut cfg.conference;
    if let Some(v) = args.clusters {
        synth.target_clusters = v;
    }
    if let Some(v) = args.min_cluster {
        synth.min_cluster = v;
    }
    if let Some(v) = args.alpha {
        synth.bids.alpha = v;
    }
    if let Some(v) = args.mu {
        synth.bids.mu = v;
    }
    if let Some(v) = args.beta {
        synth.bids.beta = v;
    }
    let corpus = match &args.corpus {
        Some(path) => load_corpus(path)?,
        None => build_corpus(&cfg)?,
    };
    let out = simulate_conference(&corpus, &cfg.conference, cfg.seed)?;
    let manifest = save_conference(&out.conference, &args.out)?;
    let members =
        out.clusters.clusters().iter().enumerate().flat_map(|(c, papers)| papers.iter().map(move |&q| (c, q)));
    write_clusters(&args.out.join("clusters.csv"), members.map(|(c, q)| (c, corpus.paper(q).paper_id.as_str())))?;
    let conf = &out.conference;
    println!("reviewers {}", conf.n_reviewers());
    println!("papers {}", conf.n_papers());
    println!("subjects {}", conf.n_subjects());
    println!("positive_bids {}", conf.bids().nnz());
    println!("files {}", manifest.files.len());
    Ok(())
}

pub fn featurize(conference: &Path, out: &Path, hash_ratio: f64) -> CliResult<()> {
    let conf = load_conference(conference)?;
    let (schema, x) = bidguard::pipeline::featurize(&conf, hash_ratio)?;
    save_features(&x, &schema, out)?;
    println!("rows {}", x.n_rows());
    println!("dim {}", schema.total_dim);
    println!("nnz {}", x.nnz());
    Ok(())
}

struct Loaded {
    conf: Conference,
    x: CsrMatrix,
    /// Capped labels with any attack overlay applied.
    y: Vec<f64>,
    u_cap: usize,
}

impl Loaded {
    fn instance(&self) -> Instance<'_> {
        Instance { x: &self.x, y: &self.y, m: self.conf.n_reviewers(), n: self.conf.n_papers() }
    }
}

fn load_data(cfg: &PipelineConfig, data: &Data) -> CliResult<Loaded> {
    let conf = load_conference(&data.conference)?;
    let (m, n) = (conf.n_reviewers(), conf.n_papers());
    let (x, _) = load_features(&data.features, m * n)?;
    let u_cap = data.u_cap.unwrap_or(cfg.u_cap);
    let mut y = cap_positive_bids(conf.bids(), u_cap, cfg.seed)?.labels();
    if let Some(path) = &data.plan {
        let plan: AttackPlan = read_json(path)?;
        for member in &plan.party {
            if member.reviewer >= m || member.bids.len() != n {
                return Err(param(format!("plan member {} does not fit a {m}x{n} conference", member.reviewer)));
            }
        }
        y = plan.apply_labels(&y, n);
    }
    Ok(Loaded { conf, x, y, u_cap })
}

/// The model must be the ridge fit of exactly these labels.
fn load_model(path: &Path, data: &Loaded) -> CliResult<ScoreModel> {
    let model = ScoreModel::load(path)?;
    if model.dim() != data.x.n_cols() {
        return Err(param(format!("model has {} weights, features have {} columns", model.dim(), data.x.n_cols())));
    }
    let xty = masked_xty(&data.x, &data.y, None);
    if norm(&model.residual(&data.x, &xty, None)) > 1e-6 * norm(&xty).max(1.0) {
        return Err(param("model was not trained on these labels; pass the same --seed, --u-cap and --plan as train"));
    }
    Ok(model)
}

pub fn train(cfg: &PipelineConfig, args: TrainArgs) -> CliResult<()> {
    let data = load_data(cfg, &args.data)?;
    let lambda = args.lambda.unwrap_or(cfg.lambda);
    let model = train_ridge(&data.x, &data.y, lambda)?;
    ensure_parent(&args.out)?;
    model.save(&args.out)?;
    let scores = predict_scores(&model, &data.x, data.conf.n_reviewers(), data.conf.n_papers())?;
    let scores_path = args.scores.unwrap_or_else(|| args.out.with_file_name("scores.csv"));
    write_scores(&scores_path, &scores)?;
    println!("dim {}", model.dim());
    println!("lambda {}", fmt6(lambda));
    println!("weight_norm {}", fmt6(norm(model.weights())));
    Ok(())
}

fn parse_target(s: &str) -> CliResult<(usize, usize)> {
    let bad = || param(format!("target must be REVIEWER,PAPER, got {s:?}"));
    let (r, p) = s.split_once(',').ok_or_else(bad)?;
    Ok((r.trim().parse().map_err(|_| bad())?, p.trim().parse().map_err(|_| bad())?))
}

pub fn attack(cfg: &PipelineConfig, args: AttackArgs) -> CliResult<()> {
    let data = load_data(cfg, &args.data)?;
    let (m, n) = (data.conf.n_reviewers(), data.conf.n_papers());
    let (r, p) = parse_target(&args.target)?;
    if r >= m || p >= n {
        return Err(param(format!("target ({r},{p}) outside {m}x{n}")));
    }
    let plan = match args.kind {
        AttackKindArg::Simple => {
            if args.ma != 1 {
                return Err(param("the simple attack has no colluders; use --ma 1"));
            }
            AttackPlan {
                reviewer: r,
                paper: p,
                party: vec![MemberBids { reviewer: r, bids: simple_blackbox_bids(n, p) }],
                predicted_gain: None,
            }
        }
        AttackKindArg::Blackbox => colluding_blackbox(&data.conf, &data.x, r, p, args.ma, data.u_cap)?,
        AttackKindArg::Whitebox => {
            let path = args.model.as_deref().ok_or_else(|| param("the white-box attack needs --model"))?;
            let model = load_model(path, &data)?;
            whitebox_colluding(&model, &data.instance(), r, p, args.ma, data.u_cap)?
        }
    };
    ensure_parent(&args.out)?;
    write_json(&args.out, &plan)?;
    let members: Vec<String> = plan.members().map(|t| t.to_string()).collect();
    println!("party {}", members.join("|"));
    if let Some(gain) = plan.predicted_gain {
        println!("predicted_gain {}", fmt6(gain));
    }
    Ok(())
}

pub fn defend(cfg: &PipelineConfig, args: DefendArgs) -> CliResult<()> {
    let data = load_data(cfg, &args.data)?;
    let model = load_model(&args.model, &data)?;
    let (m, n) = (data.conf.n_reviewers(), data.conf.n_papers());
    let scores = predict_scores(&model, &data.x, m, n)?;
    let k = args.k.unwrap_or(cfg.experiment.k);
    let candidates = build_candidate_set(&scores, k)?;
    let detector = match args.detector {
        DetectorArg::Approx => Detector::Approx,
        DetectorArg::Exact => Detector::Exact(ExactStrategy::Enumerate),
        DetectorArg::Greedy => Detector::Exact(ExactStrategy::GreedyRefit),
    };
    let (kept, verdicts) = filter_candidates(&candidates, &scores, &model, &data.instance(), detector, args.md)?;
    write_verdicts(&args.out, &verdicts)?;
    println!("candidates {}", candidates.len());
    println!("removed {}", candidates.len() - kept.len());
    println!("removed_fraction {}", fmt6((candidates.len() - kept.len()) as f64 / candidates.len() as f64));
    Ok(())
}

pub fn assign(cfg: &PipelineConfig, args: AssignArgs) -> CliResult<()> {
    let scores = read_scores(&args.scores)?;
    let (m, n) = (scores.n_reviewers(), scores.n_papers());
    let permitted = match &args.candidates {
        Some(path) => {
            let mut members = vec![Vec::new(); n];
            for v in read_verdicts(path)? {
                if v.reviewer_index >= m || v.paper_index >= n {
                    return Err(param(format!("verdict ({},{}) outside {m}x{n}", v.reviewer_index, v.paper_index)));
                }
                if !v.removed {
                    members[v.paper_index].push(v.reviewer_index as u32);
                }
            }
            let k = members.iter().map(Vec::len).max().unwrap_or(0);
            Some(CandidateSet::from_members(m, k, members))
        }
        None => None,
    };
    let per_paper = args.r.unwrap_or(cfg.experiment.reviewers_per_paper);
    let per_reviewer = args.p.unwrap_or(cfg.experiment.papers_per_reviewer);
    let a = solve_assignment(&scores, permitted.as_ref(), per_paper, per_reviewer)?;
    write_assignment(&args.out, &a)?;
    println!("pairs {}", a.pairs.len());
    println!("deficit {}", a.total_deficit());
    println!("total_score {}", fmt6(a.total_score));
    Ok(())
}

pub fn evaluate(cfg: &PipelineConfig, out: &Path, threads: usize) -> CliResult<()> {
    let manifest = run_pipeline(cfg, out, threads)?;
    println!("reviewers {}", manifest.n_reviewers);
    println!("papers {}", manifest.n_papers);
    println!("dim {}", manifest.feature_dim);
    for (name, digest) in &manifest.artifacts {
        println!("{name} {digest}");
    }
    Ok(())
}
