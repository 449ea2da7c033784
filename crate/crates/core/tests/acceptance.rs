//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always print.
//! `ACCEPTANCE_ONLY=1,5` restricts the run to the listed criteria.
//! Failures are reported on their line; `ACCEPTANCE_STRICT=1` also turns
//! them into a nonzero exit status.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use labrisk::bundle::{train_bundle, ReportBundle};
use labrisk::config::StudyConfig;
use labrisk::dataio::{Cohort, ColumnKind};
use labrisk::interpret::{fisher_exact, mann_whitney, AnalyteMap};
use labrisk::metrics::{
    auprc, auroc, bootstrap_ci, bootstrap_values, confusion_at, decision_curve, default_dca_grid, resample_rows, MetricKind,
    ScoredSet,
};
use labrisk::models::logreg::objective_and_gradient;
use labrisk::models::svm::{dual_objective, kernel_matrix, solve_dual};
use labrisk::models::tree::{train_cart, SplitMode};
use labrisk::models::{gbm::negative_gradient, logistic_loss};
use labrisk::protocol::{run_study_with_split, stratified_split, StudySettings};
use labrisk::rng::stream;
use labrisk::synth::{generate, SynthConfig, DEFAULT_PLANTED};
use labrisk::Matrix;
use rand::Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

const SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

fn synthetic_config(cfg: &SynthConfig) -> (Vec<u8>, StudyConfig) {
    let (bytes, manifest) = generate(cfg).expect("default synthetic config is valid");
    (bytes, StudyConfig::for_synthetic(&manifest))
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool")
}

fn study_bundle(cfg: &SynthConfig, workers: usize) -> ReportBundle {
    let (bytes, study) = synthetic_config(cfg);
    pool(workers).install(|| train_bundle(&study, &bytes, &AnalyteMap::bundled())).expect("study runs")
}

fn c1_split() -> Outcome {
    let labels: Vec<bool> = (0..300).map(|i| i < 142).collect();
    let s = stratified_split(&labels, 0.2, 1).unwrap();
    let train_pos = s.train_rows.iter().filter(|&&r| labels[r]).count();
    let test_pos = s.test_rows.iter().filter(|&&r| labels[r]).count();
    let got = (s.train_rows.len(), s.test_rows.len(), train_pos, test_pos);
    outcome(got == (240, 60, 114, 28), format!("train/test {}/{}, positives {}/{}", got.0, got.1, got.2, got.3))
}

fn c2_table2() -> Outcome {
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for (p, y, k) in [(0.9, true, 21), (0.9, false, 6), (0.1, true, 7), (0.1, false, 26)] {
        probs.extend(std::iter::repeat_n(p, k));
        labels.extend(std::iter::repeat_n(y, k));
    }
    let c = confusion_at(&ScoredSet::new(probs, labels).unwrap(), 0.5);
    let got: Vec<String> = [c.accuracy(), c.sensitivity(), c.specificity(), c.ppv(), c.npv(), c.f1()]
        .iter()
        .map(|v| format!("{:.3}", v.unwrap()))
        .collect();
    let want = ["0.783", "0.750", "0.812", "0.778", "0.788", "0.764"];
    outcome(got == want, format!("accuracy/sens/spec/PPV/NPV/F1 = {}", got.join("/")))
}

fn pair_count_auroc(p: &[f64], y: &[bool]) -> f64 {
    let (mut score, mut pairs) = (0.0, 0.0);
    for i in (0..p.len()).filter(|&i| y[i]) {
        for j in (0..p.len()).filter(|&j| !y[j]) {
            pairs += 1.0;
            score += if p[i] > p[j] { 1.0 } else if p[i] == p[j] { 0.5 } else { 0.0 };
        }
    }
    score / pairs
}

/// Average precision by enumerating every distinct threshold prefix.
fn prefix_ap(p: &[f64], y: &[bool]) -> f64 {
    let pos = y.iter().filter(|&&v| v).count() as f64;
    let mut thresholds: Vec<f64> = p.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let tp = (0..p.len()).filter(|&i| p[i] >= t && y[i]).count() as f64;
        let called = (0..p.len()).filter(|&i| p[i] >= t).count() as f64;
        let recall = tp / pos;
        ap += (recall - prev_recall) * (tp / called);
        prev_recall = recall;
    }
    ap
}

fn c3_metric_oracles() -> Outcome {
    let mut rng = stream(3, &[]);
    let grid = default_dca_grid();
    let (mut worst_auc, mut worst_ap, mut worst_nb) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let n = rng.random_range(2..=50);
        let levels = rng.random_range(2..=10);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let mut y: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.45).collect();
        y[0] = true;
        y[1] = false;
        let s = ScoredSet::new(p.clone(), y.clone()).unwrap();
        worst_auc = worst_auc.max((auroc(&s).unwrap() - pair_count_auroc(&p, &y)).abs());
        worst_ap = worst_ap.max((auprc(&s).unwrap() - prefix_ap(&p, &y)).abs());
        let dca = decision_curve(&s, &grid).unwrap();
        for pt in &dca.points {
            let t = pt.threshold;
            let tp = (0..n).filter(|&i| p[i] >= t && y[i]).count() as f64;
            let fp = (0..n).filter(|&i| p[i] >= t && !y[i]).count() as f64;
            let direct = tp / n as f64 - fp / n as f64 * (t / (1.0 - t));
            worst_nb = worst_nb.max((pt.model - direct).abs());
        }
    }
    outcome(
        worst_auc <= 1e-12 && worst_ap <= 1e-12 && worst_nb <= 1e-12,
        format!("max |diff| AUROC {worst_auc:.1e}, AUPRC {worst_ap:.1e}, net benefit {worst_nb:.1e} over 200 sets"),
    )
}

fn mutate(cohort: &Cohort, rows: &[usize], seed: u64) -> Cohort {
    let mut out = cohort.clone();
    let mut rng = stream(seed, &[99]);
    for &r in rows {
        let values: Vec<Option<f64>> = cohort
            .columns()
            .iter()
            .map(|c| match c.kind {
                ColumnKind::Excluded => None,
                _ if rng.random::<f64>() < 0.3 => None,
                ColumnKind::Categorical => Some(rng.random_range(0..c.levels.len().max(1)) as f64),
                _ => Some(1000.0 * rng.sample::<f64, _>(StandardNormal)),
            })
            .collect();
        out.set_row(r, &values, rng.random());
    }
    out
}

fn c4_leakage() -> Outcome {
    let cfg = SynthConfig::with_seed(4);
    let (bytes, study) = synthetic_config(&cfg);
    let cohort = labrisk::bundle::ingest_with(&study, &bytes).unwrap().cohort;
    let mut settings: StudySettings = study.study_settings();
    settings.protocol.n_iter = 3;
    let split = stratified_split(cohort.labels(), settings.protocol.test_fraction, settings.protocol.seed).unwrap();
    let base = run_study_with_split(&cohort, &settings, split.clone()).unwrap();
    let fingerprint = |r: &labrisk::protocol::StudyResult| {
        let best: Vec<_> = r.candidates.iter().map(|c| (&c.best, c.mean_auroc.to_bits())).collect();
        serde_json::to_string(&(&r.preprocessor, r.selected, best, r.threshold.threshold.to_bits())).unwrap()
    };
    let want = fingerprint(&base);
    let mut identical = 0;
    for m in 0..5 {
        let mutated = mutate(&cohort, &split.test_rows, m);
        assert_ne!(mutated, cohort);
        let r = run_study_with_split(&mutated, &settings, split.clone()).unwrap();
        if fingerprint(&r) == want {
            identical += 1;
        }
    }
    outcome(identical == 5, format!("{identical}/5 test-row mutations left preprocessor, selection, hyperparameters and threshold bit-identical"))
}

fn c5_planted() -> (Outcome, Option<String>) {
    let strongest: BTreeSet<&str> = DEFAULT_PLANTED[..5].iter().map(|(f, _)| *f).collect();
    let mut good = 0;
    let mut lines = Vec::new();
    let mut digest_seed1 = None;
    let mut slowest = Duration::ZERO;
    for seed in SEEDS {
        let t = Instant::now();
        let b = study_bundle(&SynthConfig::with_seed(seed), 1);
        slowest = slowest.max(t.elapsed());
        if seed == 1 {
            digest_seed1 = Some(b.digest());
        }
        let auc = b.evaluation.value(MetricKind::Auroc).unwrap_or(0.0);
        let hits = b.features.rows.iter().filter(|r| strongest.contains(r.feature.as_str())).count();
        let ok = auc >= 0.85 && hits >= 3;
        good += ok as usize;
        lines.push(format!("seed {seed}: {} AUROC {auc:.3}, {hits}/5 in top-10", b.summary.selected.name()));
    }
    let pass = good >= 8 && slowest < Duration::from_secs(300);
    let detail = format!("{good}/10 seeds meet AUROC >= 0.85 and >= 3/5 strongest in top-10; slowest seed {:.0?} [{}]", slowest, lines.join("; "));
    (outcome(pass, detail), digest_seed1)
}

fn c6_null() -> Outcome {
    let mut inside = 0;
    let mut lines = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in SEEDS {
        let t = Instant::now();
        let b = study_bundle(&SynthConfig::null(seed), 1);
        slowest = slowest.max(t.elapsed());
        let auc = b.evaluation.value(MetricKind::Auroc).unwrap_or(f64::NAN);
        inside += ((auc - 0.5).abs() <= 0.12) as usize;
        lines.push(format!("{auc:.3}"));
    }
    outcome(
        inside == 10 && slowest < Duration::from_secs(180),
        format!("{inside}/10 null seeds with held-out AUROC in 0.5 +/- 0.12; slowest {:.0?} [{}]", slowest, lines.join(", ")),
    )
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 { diff } else { diff / scale }
}

fn c7_gradients() -> Outcome {
    let mut rng = stream(7, &[]);
    let (mut worst_lr, mut worst_gbm) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let n = rng.random_range(5..30);
        let d = rng.random_range(1..6);
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect());
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..2) as f64).collect();
        let lambda = 10f64.powf(rng.random_range(-3.0..1.0));
        let params: Vec<f64> = (0..=d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let (_, g) = objective_and_gradient(&x, &y, lambda, &params);
        let h = 1e-5;
        let fd: Vec<f64> = (0..=d)
            .map(|j| {
                let (mut up, mut dn) = (params.clone(), params.clone());
                up[j] += h;
                dn[j] -= h;
                (objective_and_gradient(&x, &y, lambda, &up).0 - objective_and_gradient(&x, &y, lambda, &dn).0) / (2.0 * h)
            })
            .collect();
        worst_lr = worst_lr.max(relative_error(&g, &fd));

        let scores: Vec<f64> = (0..n).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let analytic: Vec<f64> = scores.iter().zip(&y).map(|(&s, &t)| -negative_gradient(t, s)).collect();
        let numeric: Vec<f64> = scores
            .iter()
            .zip(&y)
            .map(|(&s, &t)| (logistic_loss(t, s + h) - logistic_loss(t, s - h)) / (2.0 * h))
            .collect();
        worst_gbm = worst_gbm.max(relative_error(&analytic, &numeric));
    }
    outcome(
        worst_lr < 1e-6 && worst_gbm < 1e-6,
        format!("max relative error: logistic regression {worst_lr:.1e}, boosting loss {worst_gbm:.1e} over 20 instances"),
    )
}

/// Best root split by exhaustive enumeration: `(score, feature, threshold)`
/// candidates within 1e-12 of the minimum weighted Gini.
fn brute_force_root(x: &Matrix, y: &[bool]) -> Vec<(f64, usize, f64)> {
    let mut all = Vec::new();
    for f in 0..x.cols() {
        let mut vals: Vec<f64> = x.column(f);
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let thr = w[0] + (w[1] - w[0]) / 2.0;
            all.push((split_score(x, y, f, thr), f, thr));
        }
    }
    let best = all.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    all.into_iter().filter(|c| c.0 <= best + 1e-12).collect()
}

fn split_score(x: &Matrix, y: &[bool], f: usize, thr: f64) -> f64 {
    let (mut lw, mut lp, mut rw, mut rp) = (0.0, 0.0, 0.0, 0.0);
    for r in 0..x.rows() {
        let pos = y[r] as u8 as f64;
        if x.get(r, f) <= thr {
            lw += 1.0;
            lp += pos;
        } else {
            rw += 1.0;
            rp += pos;
        }
    }
    let g = |w: f64, p: f64| if w == 0.0 { 0.0 } else { w * (1.0 - (p / w).powi(2) - (1.0 - p / w).powi(2)) };
    g(lw, lp) + g(rw, rp)
}

/// Projection onto `{0 <= a <= c, y.a = 0}` by bisection on the multiplier.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |mu: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - mu * yi).clamp(0.0, c)).collect() };
    let g = |mu: f64| -> f64 { at(mu).iter().zip(y).map(|(a, yi)| a * yi).sum() };
    let (mut lo, mut hi) = (-1e6, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Dense accelerated projected-gradient QP solve of the SVM dual.
fn qp_oracle(k: &Matrix, y: &[f64], c: f64) -> f64 {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k.get(i, j);
    let lipschitz = (0..n).map(|i| (0..n).map(|j| q(i, j).abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..30_000 {
        let grad: Vec<f64> = (0..n).map(|i| (0..n).map(|j| q(i, j) * z[j]).sum::<f64>() - 1.0).collect();
        let step: Vec<f64> = z.iter().zip(&grad).map(|(zi, gi)| zi - gi / lipschitz).collect();
        let next = project(&step, y, c);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        z = next.iter().zip(&a).map(|(nx, ax)| nx + (t - 1.0) / t_next * (nx - ax)).collect();
        a = next;
        t = t_next;
    }
    dual_objective(k, y, &a)
}

fn c8_brute_force() -> Outcome {
    let mut rng = stream(8, &[]);
    let mut cart_ok = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let d = rng.random_range(1..=4);
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(0..5) as f64).collect());
        let y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let tree = train_cart(&x, &y, 1, 1, None, SplitMode::Exhaustive, &mut stream(0, &[]));
        let oracle = brute_force_root(&x, &y);
        let pure = y.iter().all(|&v| v == y[0]);
        let ok = match tree.root_split() {
            None => pure || oracle.is_empty(),
            Some((f, thr)) => {
                let score = split_score(&x, &y, f, thr);
                let best = oracle.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
                let matches_unique = oracle.len() > 1 || (oracle[0].1 == f && (oracle[0].2 - thr).abs() <= 1e-12);
                !pure && (score - best).abs() <= 1e-12 && matches_unique
            }
        };
        cart_ok += ok as usize;
    }

    let mut worst_gap = 0.0f64;
    for _ in 0..10 {
        let n = rng.random_range(6..=30);
        let d = rng.random_range(1..=4);
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect());
        let mut y: Vec<f64> = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let c = 10f64.powf(rng.random_range(-1.0..0.7));
        let gamma = 10f64.powf(rng.random_range(-1.5..0.5));
        let k = kernel_matrix(&x, gamma);
        let smo = solve_dual(&k, &y, c, 1e-6, 1_000_000);
        let oracle = qp_oracle(&k, &y, c);
        worst_gap = worst_gap.max((smo.objective - oracle).abs());
    }
    outcome(
        cart_ok == 100 && worst_gap <= 1e-4,
        format!("CART root split optimal in {cart_ok}/100 draws; max SMO vs dense QP dual gap {worst_gap:.1e} over 10 problems"),
    )
}

/// Exact two-sided permutation p-value of U for tie-free samples.
fn exact_mw_p(a: &[f64], b: &[f64]) -> f64 {
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let rank = |v: f64| pooled.iter().position(|&p| p == v).unwrap() as f64 + 1.0;
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let u_obs: f64 = a.iter().map(|&v| rank(v)).sum::<f64>() - (n1 * (n1 + 1)) as f64 / 2.0;
    let mean = (n1 * n2) as f64 / 2.0;
    let obs = (u_obs - mean).abs();
    let (mut extreme, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        let u = rank_sum as f64 - (n1 * (n1 + 1)) as f64 / 2.0;
        total += 1;
        if (u - mean).abs() >= obs - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / total as f64
}

fn c9_statistics() -> Outcome {
    let mut rng = stream(9, &[]);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 60 {
        let n1 = rng.random_range(5..=8);
        let n2 = rng.random_range(5..=8);
        let shift = rng.random_range(0.0..1.5);
        let a: Vec<f64> = (0..n1).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect();
        let b: Vec<f64> = (0..n2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let exact = exact_mw_p(&a, &b);
        if !(0.05..=0.95).contains(&exact) {
            continue;
        }
        checked += 1;
        worst = worst.max((mann_whitney(&a, &b).unwrap().p_value - exact).abs());
    }
    let fisher = fisher_exact([[3, 0], [0, 3]]);
    let r = mann_whitney(&[5.0, 6.0, 7.0], &[1.0, 2.0, 7.0]).unwrap().r;
    outcome(
        worst <= 0.02 && fisher == 0.1 && r == 4.0 / 9.0,
        format!("max |p_normal - p_exact| {worst:.4} over {checked} draws; Fisher [[3,0],[0,3]] = {fisher}; r = {r}"),
    )
}

fn c10_determinism(digest_one: Option<String>) -> Outcome {
    let cfg = SynthConfig::with_seed(1);
    let one = digest_one.unwrap_or_else(|| study_bundle(&cfg, 1).digest());
    let four = study_bundle(&cfg, 4).digest();
    let eight = study_bundle(&cfg, 8).digest();
    outcome(
        one == four && four == eight,
        format!("bundle sha256 with 1/4/8 workers: {}/{}/{}", &one[..12], &four[..12], &eight[..12]),
    )
}

fn independent_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn c11_bootstrap() -> Outcome {
    let mut rng = stream(11, &[]);
    let n = 60;
    let y: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let p: Vec<f64> = y.iter().map(|&v| (if v { 0.6 } else { 0.4 } + 0.3 * rng.sample::<f64, _>(StandardNormal)).clamp(0.0, 1.0)).collect();
    let s = ScoredSet::new(p, y).unwrap();
    let metric = |s: &ScoredSet| auroc(s).ok();
    let (b, seed, level) = (1000, 17, 0.95);
    let values = bootstrap_values(metric, &s, b, seed);
    let ci = bootstrap_ci(metric, &s, b, seed, level).unwrap();
    let recomputed_ok = (0..b).step_by(97).all(|i| metric(&s.resample(&resample_rows(n, seed, i))) == values[i]);
    let mut sorted: Vec<f64> = values.iter().flatten().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let alpha = (1.0 - level) / 2.0;
    let (lo, hi) = (independent_quantile(&sorted, alpha), independent_quantile(&sorted, 1.0 - alpha));
    outcome(
        recomputed_ok && lo == ci.lower && hi == ci.upper && sorted.len() + ci.degenerate == b,
        format!("B = {b}: bounds {:.6}/{:.6} vs independent {lo:.6}/{hi:.6}; resample values reproduced: {recomputed_ok}", ci.lower, ci.upper),
    )
}

fn main() {
    let only: Option<BTreeSet<u32>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let wanted = |i: u32| only.as_ref().is_none_or(|o| o.contains(&i));
    let limits: [(u32, &str, Duration); 11] = [
        (1, "split arithmetic", Duration::from_millis(1)),
        (2, "confusion-table consistency", Duration::from_millis(1)),
        (3, "metric oracle equivalence", Duration::from_secs(5)),
        (4, "leakage firewall", Duration::from_secs(120)),
        (5, "planted-signal study", Duration::from_secs(3000)),
        (6, "null-signal control", Duration::from_secs(1800)),
        (7, "gradient checks", Duration::from_secs(5)),
        (8, "small-instance brute force", Duration::from_secs(30)),
        (9, "statistics oracles", Duration::from_secs(10)),
        (10, "determinism under parallelism", Duration::from_secs(900)),
        (11, "bootstrap definitional check", Duration::from_secs(5)),
    ];
    let mut failed = Vec::new();
    let mut digest_one = None;
    for (id, name, limit) in limits {
        if !wanted(id) {
            continue;
        }
        let t = Instant::now();
        let o = match id {
            1 => c1_split(),
            2 => c2_table2(),
            3 => c3_metric_oracles(),
            4 => c4_leakage(),
            5 => {
                let (o, d) = c5_planted();
                digest_one = d;
                o
            }
            6 => c6_null(),
            7 => c7_gradients(),
            8 => c8_brute_force(),
            9 => c9_statistics(),
            10 => c10_determinism(digest_one.take()),
            _ => c11_bootstrap(),
        };
        let elapsed = t.elapsed();
        // Sub-millisecond bounds are checked loosely; timer noise dominates there.
        let in_time = elapsed <= limit.max(Duration::from_millis(50));
        let pass = o.pass && in_time;
        if !pass {
            failed.push(id);
        }
        let timing = if in_time { String::new() } else { format!(" (over the {limit:?} bound)") };
        println!("{} {id:>2} {name}: {} [{elapsed:.2?}]{timing}", if pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        if std::env::var_os("ACCEPTANCE_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
