#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use bidguard::conference::Conference;
use bidguard::pipeline::{build_conference, featurize, PipelineConfig};
use bidguard::sparse::{CsrMatrix, SparseVector};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

pub fn demo_config() -> PipelineConfig {
    PipelineConfig::load(&config_path("demo.json")).expect("demo config")
}

/// The demo conference and its features, built once per test binary.
pub fn demo_data() -> &'static (Conference, CsrMatrix) {
    static DATA: OnceLock<(Conference, CsrMatrix)> = OnceLock::new();
    DATA.get_or_init(|| {
        let cfg = demo_config();
        let conf = build_conference(&cfg).expect("demo conference");
        let (_, x) = featurize(&conf, cfg.hash_ratio).expect("demo features");
        (conf, x)
    })
}

/// Random sparse design with every row non-empty.
pub fn random_design(rng: &mut ChaCha8Rng, rows: usize, d: usize, density: f64) -> CsrMatrix {
    let rows: Vec<SparseVector> = (0..rows)
        .map(|_| {
            let mut dense = vec![0.0; d];
            for v in dense.iter_mut() {
                if rng.random::<f64>() < density {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            let j = rng.random_range(0..d);
            if dense[j] == 0.0 {
                dense[j] = rng.random_range(0.1..1.0);
            }
            SparseVector::from_dense(&dense)
        })
        .collect();
    CsrMatrix::from_rows(d, rows).unwrap()
}

/// Bid labels with roughly `positive` share of nonzero entries.
pub fn random_labels(rng: &mut ChaCha8Rng, len: usize, positive: f64) -> Vec<f64> {
    (0..len).map(|_| if rng.random::<f64>() < positive { f64::from(rng.random_range(1u8..=3)) } else { 0.0 }).collect()
}

pub fn dense(x: &CsrMatrix) -> DMatrix<f64> {
    let rows = x.to_dense_rows();
    DMatrix::from_fn(x.n_rows(), x.n_cols(), |i, j| rows[i][j])
}

/// Ridge weights from the dense normal equations via LU, over the rows
/// flagged in `keep`.
pub fn dense_ridge(x: &DMatrix<f64>, y: &[f64], lambda: f64, keep: Option<&[bool]>) -> DVector<f64> {
    let d = x.ncols();
    let mut h = DMatrix::<f64>::identity(d, d) * lambda;
    let mut g = DVector::<f64>::zeros(d);
    for i in 0..x.nrows() {
        if keep.is_some_and(|k| !k[i]) {
            continue;
        }
        let row = x.row(i).transpose();
        h += &row * row.transpose();
        g += &row * y[i];
    }
    h.lu().solve(&g).expect("regularized system is nonsingular")
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Labels with at most `u_cap` positives per reviewer row.
pub fn cap_rows(y: &mut [f64], n: usize, u_cap: usize) {
    for row in y.chunks_mut(n) {
        let mut seen = 0;
        for v in row.iter_mut().filter(|v| **v > 0.0) {
            seen += 1;
            if seen > u_cap {
                *v = 0.0;
            }
        }
    }
}

/// Rank of `value` for paper `p` against the other reviewers' scores, with
/// ties going to the lower reviewer index.
pub fn rank_of(scores: &[f64], n: usize, r: usize, p: usize, value: f64) -> usize {
    let m = scores.len() / n;
    1 + (0..m)
        .filter(|&t| t != r)
        .filter(|&t| scores[t * n + p] > value || (scores[t * n + p] == value && t < r))
        .count()
}

/// All subsets of `0..m` of size `size` that contain every index in `base`.
pub fn supersets(m: usize, base: &[usize], size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << m) {
        if mask.count_ones() as usize == size && base.iter().all(|&b| mask & (1 << b) != 0) {
            out.push((0..m).filter(|&t| mask & (1 << t) != 0).collect());
        }
    }
    out
}

/// s(r,p) after refitting without the rows of `party`, via the dense oracle.
pub fn dense_refit_score(
    x: &DMatrix<f64>,
    y: &[f64],
    n: usize,
    lambda: f64,
    party: &[usize],
    r: usize,
    p: usize,
) -> f64 {
    let keep: Vec<bool> = (0..x.nrows()).map(|i| !party.contains(&(i / n))).collect();
    let w = dense_ridge(x, y, lambda, Some(&keep));
    (x.row(r * n + p) * w)[(0, 0)]
}

pub struct PlantedCase {
    pub x: CsrMatrix,
    /// Poisoned labels.
    pub y: Vec<f64>,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub reviewer: usize,
    pub paper: usize,
    pub attack_size: usize,
    pub detector_size: usize,
}

/// Planted white-box attacks with attack size <= detector size on small
/// instances. A case is kept when the attacker started beyond the top K,
/// entered the top K, and the refit score with some detector-sized superset
/// of the true party removed ranks beyond K again (computed with the dense
/// oracle). Returns the cases and the number of draws.
pub fn planted_suite(count: usize, seed: u64) -> (Vec<PlantedCase>, usize) {
    use bidguard::attack::{whitebox_colluding, Instance};
    use bidguard::scoring::{train_ridge, ScoreMatrix};
    let lambda = 1.0;
    let mut cases = Vec::new();
    let mut draws = 0;
    while cases.len() < count {
        draws += 1;
        let mut r = rng(seed.wrapping_mul(1_000_003).wrapping_add(draws as u64));
        let m = r.random_range(6..=12);
        let n = r.random_range(3..=5);
        let d = r.random_range(3..=8);
        let k = 2;
        let u_cap = r.random_range(1..=2);
        let x = random_design(&mut r, m * n, d, 0.5);
        let mut y = random_labels(&mut r, m * n, 0.3);
        cap_rows(&mut y, n, u_cap);
        let model = train_ridge(&x, &y, lambda).unwrap();
        let scores = ScoreMatrix::new(m, n, model.predict(&x).unwrap()).unwrap();
        let p = r.random_range(0..n);
        let start = r.random_range(k..m);
        let target = scores.ranking(p)[start] as usize;
        let detector_size = r.random_range(1..=3);
        let attack_size = r.random_range(1..=detector_size);
        let inst = Instance::new(&x, &y, m, n).unwrap();
        let plan = whitebox_colluding(&model, &inst, target, p, attack_size, u_cap).unwrap();
        let poisoned_y = plan.apply_labels(&y, n);
        let xd = dense(&x);
        let poisoned_w = dense_ridge(&xd, &poisoned_y, lambda, None);
        let poisoned: Vec<f64> = (&xd * poisoned_w).iter().copied().collect();
        let entered = rank_of(&poisoned, n, target, p, poisoned[target * n + p]) <= k;
        if !entered {
            continue;
        }
        let party: Vec<usize> = plan.members().collect();
        let beyond = supersets(m, &party, detector_size).iter().any(|set| {
            let v = dense_refit_score(&xd, &poisoned_y, n, lambda, set, target, p);
            rank_of(&poisoned, n, target, p, v) > k
        });
        if beyond {
            cases.push(PlantedCase {
                x,
                y: poisoned_y,
                m,
                n,
                k,
                reviewer: target,
                paper: p,
                attack_size,
                detector_size,
            });
        }
    }
    (cases, draws)
}
