//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero when any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use ids_core::eval::{build_binary_hybrid, build_multiclass_hybrid, compute_metrics, confusion};
use ids_core::features::{assemble, extract_all, fit_one_hot, CidrTable};
use ids_core::flow::{load_dataset, Task};
use ids_core::model::{accuracy, Classifier, ModelError};
use ids_core::neural::ops::{categorical_cross_entropy, elu, glorot_bound, glorot_values, softmax};
use ids_core::neural::{build_ann, build_cnn, grad_check, train_network, AnnOptions, CnnOptions, Network, TrainParams};
use ids_core::pipeline::{
    cmd_synth, cmd_train, prepare, train_model, ExperimentConfig, Hyperparams, Model, ModelKind,
    Preprocessing, SynthSpec, TrainData, MANIFEST_FILE,
};
use ids_core::rng::seeded;
use ids_core::split::{k_fold, stratified_split};
use ids_core::trees::{fit_forest, fit_gbm, fit_tree, ForestParams, GbmParams, TreeParams};
use ids_core::Matrix;

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1. metrics against a brute-force recount

fn criterion_1() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = seeded(1);
    let k = 7;
    for case in 0..1000 {
        let n = rng.random_range(1..200);
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let cm = confusion(&t, &p, k).map_err(|e| e.to_string())?;
        let names = Task::Multiclass.class_names();
        let m = compute_metrics(&cm, "multiclass", names).map_err(|e| e.to_string())?;
        let hits = t.iter().zip(&p).filter(|(a, b)| a == b).count();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        ensure(close(m.accuracy, hits as f64 / n as f64), || format!("case {case}: accuracy"))?;
        let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
        for c in 0..k {
            let tp = (0..n).filter(|&i| t[i] == c && p[i] == c).count() as f64;
            let pred_c = p.iter().filter(|&&v| v == c).count() as f64;
            let true_c = t.iter().filter(|&&v| v == c).count() as f64;
            let prec = if pred_c == 0.0 { 0.0 } else { tp / pred_c };
            let rec = if true_c == 0.0 { 0.0 } else { tp / true_c };
            let f1 = if prec + rec == 0.0 { 0.0 } else { 2.0 * prec * rec / (prec + rec) };
            let pc = &m.per_class[c];
            ensure(close(pc.precision, prec) && close(pc.recall, rec) && close(pc.f1, f1), || {
                format!("case {case} class {c}: {pc:?} vs ({prec}, {rec}, {f1})")
            })?;
            sp += prec;
            sr += rec;
            sf += f1;
        }
        let kf = k as f64;
        ensure(
            close(m.macro_precision, sp / kf) && close(m.macro_recall, sr / kf) && close(m.macro_f1, sf / kf),
            || format!("case {case}: macro averages"),
        )?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!("1000 cases in {secs:.2}s"))
}

// 2. leakage guard

fn train_only_ranges(ds: &ids_core::flow::Dataset, train: &[usize]) -> Vec<(f64, f64)> {
    let rows = ds.subset(train);
    let feats = extract_all(rows.rows.iter().map(|r| &r.record), &CidrTable::default()).unwrap();
    let vocab = fit_one_hot(&feats);
    let (raw, _) = assemble(&feats, &vocab);
    (0..raw.cols())
        .map(|j| {
            let col = raw.column(j);
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (lo, hi)
        })
        .collect()
}

fn bitwise_equal(pre: &Preprocessing, oracle: &[(f64, f64)]) -> bool {
    pre.scaler.columns.len() == oracle.len()
        && pre
            .scaler
            .columns
            .iter()
            .zip(oracle)
            .all(|(c, (lo, hi))| c.min.to_bits() == lo.to_bits() && c.max.to_bits() == hi.to_bits())
}

fn criterion_2() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = SynthSpec {
        classes: 7,
        rows_per_class: 40,
        seed: 5,
        ..SynthSpec::default()
    };
    cmd_synth(&spec, dir.path()).map_err(|e| e.to_string())?;
    let mut ds = load_dataset(dir.path()).map_err(|e| e.to_string())?.restrict_to(Task::Multiclass);
    let cidr = CidrTable::default();
    for seed in 0..20u64 {
        let p = prepare(&ds, Task::Multiclass, [0.7, 0.2, 0.1], seed, &cidr, None).map_err(|e| e.to_string())?;
        ensure(bitwise_equal(&p.preprocessing, &train_only_ranges(&ds, &p.split.train)), || {
            format!("seed {seed}: scaler differs from train-only fit")
        })?;
    }
    // Push one test row beyond every training value; the split depends on
    // labels only, so it is unchanged.
    let p = prepare(&ds, Task::Multiclass, [0.7, 0.2, 0.1], 99, &cidr, None).map_err(|e| e.to_string())?;
    let victim = p.split.test[0];
    ds.rows[victim].record.orig_bytes = Some(10_000_000_000);
    let p = prepare(&ds, Task::Multiclass, [0.7, 0.2, 0.1], 99, &cidr, None).map_err(|e| e.to_string())?;
    let oracle = train_only_ranges(&ds, &p.split.train);
    ensure(bitwise_equal(&p.preprocessing, &oracle), || "extended fixture: pipeline leaked".into())?;
    let mut leaky_rows = p.split.train.clone();
    leaky_rows.extend(&p.split.test);
    let (leaky, _) = Preprocessing::fit_transform(&ds.subset(&leaky_rows), &cidr, None).map_err(|e| e.to_string())?;
    ensure(!bitwise_equal(&leaky, &oracle), || "train+test fit was not detected".into())?;
    Ok("20 seeds bitwise equal; train+test fit detected".into())
}

// 3. gradient checks

fn random_batch(rows: usize, width: usize, classes: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = seeded(seed);
    let data = (0..rows * width).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y = (0..rows).map(|i| i % classes).collect();
    (Matrix::from_vec(rows, width, data), y)
}

fn criterion_3() -> Result<String, String> {
    let start = Instant::now();
    let ann = build_ann(4, 2, &AnnOptions { hidden: vec![3], ..AnnOptions::default() }).map_err(|e| e.to_string())?;
    let cnn = build_cnn(8, 2, &CnnOptions { filters: 2, dense: 4, ..CnnOptions::default() }).map_err(|e| e.to_string())?;
    let mut worst = Vec::new();
    for (name, spec, width) in [("ann", ann, 4), ("cnn", cnn, 8)] {
        let net = Network::new(&spec, 3).map_err(|e| e.to_string())?;
        let (x, y) = random_batch(6, width, 2, 4);
        let err = grad_check(&net, &x, &y, 1e-4).map_err(|e| e.to_string())?;
        ensure(err <= 1e-4, || format!("{name}: max relative error {err:e}"))?;
        worst.push(format!("{name} {err:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.1}s"))?;
    Ok(worst.join(", "))
}

// 4. formula spot values

#[allow(clippy::approx_constant)]
fn criterion_4() -> Result<String, String> {
    ensure((elu(-1.0, 1.0) - -0.6321205588).abs() <= 1e-9, || "elu".into())?;
    let p = softmax(&[0.0, 3f64.ln()]);
    ensure((p[0] - 0.25).abs() <= 1e-12 && (p[1] - 0.75).abs() <= 1e-12, || format!("softmax {p:?}"))?;
    let uniform = vec![1.0 / 7.0; 7];
    let mut onehot = vec![0.0; 7];
    onehot[2] = 1.0;
    let cce = categorical_cross_entropy(&uniform, &onehot).map_err(|e| e.to_string())?;
    ensure((cce - 7f64.ln()).abs() <= 1e-12, || format!("cce {cce}"))?;
    let b = glorot_bound(6, 6);
    ensure((b - 0.7071067812).abs() <= 1e-9, || format!("glorot bound {b}"))?;
    let draws = glorot_values(100_000, 6, 6, &mut seeded(4));
    ensure(draws.len() == 100_000 && draws.iter().all(|&w| -b < w && w < b), || "draw outside open interval".into())?;
    Ok("all spot values within tolerance".into())
}

// 5. root split against exhaustive search

fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
}

fn brute_root(x: &Matrix, y: &[usize], classes: usize) -> Option<(usize, f64)> {
    let n = y.len();
    let mut all = vec![0; classes];
    y.iter().for_each(|&c| all[c] += 1);
    let parent = gini(&all);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..x.cols() {
        let mut vals = x.column(f);
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut l, mut r) = (vec![0; classes], vec![0; classes]);
            for i in 0..n {
                if x.get(i, f) <= t {
                    l[y[i]] += 1;
                } else {
                    r[y[i]] += 1;
                }
            }
            let nl: usize = l.iter().sum();
            let gain = parent - nl as f64 / n as f64 * gini(&l) - (n - nl) as f64 / n as f64 * gini(&r);
            // strictly better by more than rounding noise, else keep the
            // earlier (lower feature, lower threshold) candidate
            if best.is_none_or(|(g, _, _)| gain > g + 1e-9) {
                best = Some((gain, f, t));
            }
        }
    }
    best.filter(|(g, _, _)| *g > 1e-9).map(|(_, f, t)| (f, t))
}

fn criterion_5() -> Result<String, String> {
    let mut rng = seeded(55);
    for case in 0..50 {
        let n = rng.random_range(2..=200);
        let d = rng.random_range(1..=4);
        let classes = rng.random_range(2..=4);
        let levels = rng.random_range(2..=12);
        let data = (0..n * d).map(|_| rng.random_range(0..levels) as f64).collect();
        let x = Matrix::from_vec(n, d, data);
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let tree = fit_tree(&x, &y, None, classes, &TreeParams { max_depth: Some(1), ..TreeParams::default() })
            .map_err(|e| e.to_string())?;
        let expect = brute_root(&x, &y, classes);
        ensure(tree.root_split() == expect, || {
            format!("case {case}: got {:?}, expected {expect:?}", tree.root_split())
        })?;
    }
    Ok("50/50 root splits match".into())
}

// 6. voting against mode-with-priority

struct Fixed {
    votes: Vec<usize>,
    classes: usize,
}

impl Classifier for Fixed {
    fn n_features(&self) -> usize {
        1
    }
    fn n_classes(&self) -> usize {
        self.classes
    }
    fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ModelError> {
        Ok((0..x.rows()).map(|i| self.votes[x.get(i, 0) as usize]).collect())
    }
}

/// Most frequent vote; among equally frequent classes the one whose first
/// vote comes earliest in member order.
fn mode_with_priority(votes: &[usize]) -> usize {
    let count = |c: usize| votes.iter().filter(|&&v| v == c).count();
    let top = votes.iter().map(|&v| count(v)).max().unwrap();
    *votes.iter().find(|&&v| count(v) == top).unwrap()
}

fn check_votes(rows: &[Vec<usize>], classes: usize) -> Result<(), String> {
    let members = rows[0].len();
    let x = Matrix::from_vec(rows.len(), 1, (0..rows.len()).map(|i| i as f64).collect());
    let fixed: Vec<Fixed> = (0..members)
        .map(|m| Fixed {
            votes: rows.iter().map(|r| r[m]).collect(),
            classes,
        })
        .collect();
    let mut it = fixed.into_iter();
    let mut next = || it.next().unwrap();
    let pred = if classes == 2 {
        build_binary_hybrid(next(), next(), next(), next())
    } else {
        build_multiclass_hybrid(next(), next(), next())
    }
    .map_err(|e| e.to_string())?
    .predict(&x)
    .map_err(|e| e.to_string())?;
    for (r, p) in rows.iter().zip(pred) {
        ensure(p == mode_with_priority(r), || format!("votes {r:?}: got {p}"))?;
    }
    Ok(())
}

fn criterion_6() -> Result<String, String> {
    let binary: Vec<Vec<usize>> = (0..16).map(|m| (0..4).map(|b| (m >> b) & 1).collect()).collect();
    check_votes(&binary, 2)?;
    let mut multi: Vec<Vec<usize>> = Vec::new();
    for a in 0..7 {
        for b in 0..7 {
            for c in 0..7 {
                multi.push(vec![a, b, c]);
            }
        }
    }
    let mut rng = seeded(6);
    for _ in 0..500 {
        multi.push((0..3).map(|_| rng.random_range(0..7)).collect());
    }
    check_votes(&multi, 7)?;
    Ok(format!("16 binary and {} multiclass vote patterns", multi.len()))
}

// 7. synthetic end-to-end

/// Gaussian clusters around distinct hypercube corners, min-max scaled
/// with train-only ranges.
fn clusters(classes: usize, per_class: usize, width: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = seeded(seed);
    let mut corners: Vec<Vec<f64>> = Vec::new();
    while corners.len() < classes {
        let c: Vec<f64> = (0..width).map(|_| if rng.random::<bool>() { 3.0 } else { -3.0 }).collect();
        if !corners.contains(&c) {
            corners.push(c);
        }
    }
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut data = Vec::with_capacity(classes * per_class * width);
    let mut y = Vec::new();
    for (k, corner) in corners.iter().enumerate() {
        for _ in 0..per_class {
            data.extend(corner.iter().map(|&c| c + noise.sample(&mut rng)));
            y.push(k);
        }
    }
    (Matrix::from_vec(y.len(), width, data), y)
}

fn scale_by(train: &Matrix, m: &Matrix) -> Matrix {
    let params = ids_core::features::fit_min_max(train);
    params.transform(m).unwrap()
}

fn criterion_7() -> Result<String, String> {
    let start = Instant::now();
    let (x, y) = clusters(7, 2000, 20, 77);
    let split = stratified_split(&y, [0.7, 0.2, 0.1], 7).map_err(|e| e.to_string())?;
    let pick = |idx: &[usize]| (x.select_rows(idx), idx.iter().map(|&i| y[i]).collect::<Vec<_>>());
    let (xtr_raw, ytr) = pick(&split.train);
    let (xte_raw, yte) = pick(&split.test);
    let (xva_raw, yva) = pick(&split.val);
    let xtr = scale_by(&xtr_raw, &xtr_raw);
    let xte = scale_by(&xtr_raw, &xte_raw);
    let xva = scale_by(&xtr_raw, &xva_raw);
    let hp = Hyperparams::default();
    let mut report = Vec::new();
    let mut models = std::collections::BTreeMap::new();
    for task in [Task::Multiclass, Task::Binary] {
        // binary: class 0 against the rest
        let relabel = |v: &[usize]| -> Vec<usize> {
            v.iter().map(|&c| if task == Task::Binary { (c != 0) as usize } else { c }).collect()
        };
        let (ytr, yte, yva) = (relabel(&ytr), relabel(&yte), relabel(&yva));
        let data = TrainData {
            x: &xtr,
            y: &ytr,
            val: Some((&xva, &yva)),
            n_classes: task.n_classes(),
        };
        let kinds: &[ModelKind] = match task {
            Task::Multiclass => &ModelKind::ALL[..7],
            Task::Binary => ModelKind::hybrid_members(Task::Binary),
        };
        let mut acc = std::collections::BTreeMap::new();
        for &kind in kinds {
            let t0 = Instant::now();
            let m = train_model(kind, &hp, &data, 1000 + kind as u64).map_err(|e| format!("{}: {e}", kind.as_str()))?;
            let a = accuracy(&yte, &m.model.predict(&xte).map_err(|e| e.to_string())?);
            log_line(&format!("    {} {}: accuracy {a:.4} ({:.1}s)", task.as_str(), kind.as_str(), t0.elapsed().as_secs_f64()));
            if task == Task::Multiclass {
                ensure(a >= 0.95, || format!("{} accuracy {a:.4}", kind.as_str()))?;
            }
            acc.insert(kind, a);
            models.insert((task.as_str(), kind), m.model);
        }
        let member = |k| models[&(task.as_str(), k)].clone();
        let hybrid = match task {
            Task::Binary => build_binary_hybrid(member(ModelKind::Rf), member(ModelKind::Gbm), member(ModelKind::Svm), member(ModelKind::Knn)),
            Task::Multiclass => build_multiclass_hybrid(member(ModelKind::Rf), member(ModelKind::Gbm), member(ModelKind::Ada)),
        }
        .map_err(|e| e.to_string())?;
        let ha = accuracy(&yte, &Model::Hybrid(hybrid).predict(&xte).map_err(|e| e.to_string())?);
        let best = ModelKind::hybrid_members(task).iter().map(|k| acc[k]).fold(0.0, f64::max);
        ensure(ha >= best - 0.02, || format!("{} hybrid {ha:.4} vs best member {best:.4}", task.as_str()))?;
        report.push(format!("{} hybrid {ha:.4} (best member {best:.4})", task.as_str()));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 300.0, || format!("took {secs:.0}s"))?;
    Ok(format!("{}; {secs:.0}s", report.join(", ")))
}

// 8. early stopping on a planted minimum

/// Train labels are noisy copies of a simple rule; validation labels are
/// clean, so validation loss falls and then rises as the model memorizes.
fn planted(rows: usize, noise: f64, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = seeded(seed);
    let mut data = Vec::new();
    let mut y = Vec::new();
    for _ in 0..rows {
        let a: f64 = rng.random_range(0.0..1.0);
        let b: f64 = rng.random_range(0.0..1.0);
        data.extend([a, b, rng.random_range(0.0..1.0)]);
        let clean = (a + b > 1.0) as usize;
        y.push(if rng.random::<f64>() < noise { 1 - clean } else { clean });
    }
    (Matrix::from_vec(rows, 3, data), y)
}

fn first_argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

fn criterion_8() -> Result<String, String> {
    let (x, y) = planted(400, 0.3, 8);
    let (xv, yv) = planted(200, 0.0, 9);
    let gp = GbmParams {
        max_rounds: 300,
        learning_rate: 0.3,
        max_depth: 8,
        lambda: 0.0,
        patience: 10,
        ..GbmParams::default()
    };
    let (_, curve) = fit_gbm(&x, &y, &xv, &yv, 2, &gp).map_err(|e| e.to_string())?;
    let stopped = curve.val_loss.len() - 1;
    ensure(curve.best_round == first_argmin(&curve.val_loss), || format!("gbm best_round {} vs argmin {}", curve.best_round, first_argmin(&curve.val_loss)))?;
    ensure(stopped - curve.best_round <= gp.patience, || "gbm ran past patience".into())?;
    ensure(stopped < gp.max_rounds, || "gbm never stopped early; the fixture has no minimum".into())?;
    let mut out = vec![format!("gbm best {} stop {}", curve.best_round, stopped)];

    let tp = TrainParams {
        learning_rate: 0.02,
        batch_size: 16,
        max_epochs: 300,
        patience: 5,
        ..TrainParams::default()
    };
    let ann = build_ann(3, 2, &AnnOptions { dropout: 0.0, l1: 0.0, l2: 0.0, ..AnnOptions::default() }).map_err(|e| e.to_string())?;
    let cnn = build_cnn(3, 2, &CnnOptions { kernel: 2, pool: 1, dropout: 0.0, l1: 0.0, l2: 0.0, ..CnnOptions::default() }).map_err(|e| e.to_string())?;
    for (name, spec) in [("ann", ann), ("cnn", cnn)] {
        let (_, curve) = train_network(&spec, &x, &y, &xv, &yv, &tp, 8).map_err(|e| e.to_string())?;
        let losses: Vec<f64> = curve.epochs.iter().map(|e| e.val_loss).collect();
        let argmin = first_argmin(&losses) + 1;
        ensure(curve.best_epoch == argmin, || format!("{name} best_epoch {} vs argmin {argmin}", curve.best_epoch))?;
        ensure(curve.stopped_epoch() - curve.best_epoch <= tp.patience, || format!("{name} ran past patience"))?;
        ensure(curve.stopped_epoch() < tp.max_epochs, || format!("{name} never stopped early"))?;
        out.push(format!("{name} best {} stop {}", curve.best_epoch, curve.stopped_epoch()));
    }
    Ok(out.join(", "))
}

// 9. permutation importance

fn criterion_9() -> Result<String, String> {
    let mut rng = seeded(9);
    let (n, d) = (1500, 3);
    let mut data = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n {
        let signal: f64 = rng.random_range(0.0..1.0);
        let weak: f64 = rng.random_range(0.0..1.0);
        let noise: f64 = rng.random_range(0.0..1.0);
        data.extend([noise, signal, weak]);
        // the weak column only matters near the boundary
        y.push((signal + 0.1 * weak > 0.55) as usize);
    }
    let x = Matrix::from_vec(n, d, data);
    let idx: Vec<usize> = (0..n).collect();
    let (tr, te) = idx.split_at(1000);
    let ytr: Vec<usize> = tr.iter().map(|&i| y[i]).collect();
    let yte: Vec<usize> = te.iter().map(|&i| y[i]).collect();
    let model = fit_forest(&x.select_rows(tr), &ytr, 2, &ForestParams { n_trees: 50, ..ForestParams::default() }, 3)
        .map_err(|e| e.to_string())?;
    let names: Vec<String> = ["noise", "signal", "weak"].map(String::from).to_vec();
    let rep = ids_core::features::permutation_importance(&model, &x.select_rows(te), &yte, &names, 5, 7)
        .map_err(|e| e.to_string())?;
    let m: Vec<f64> = rep.features.iter().map(|f| f.mean).collect();
    ensure(m[1] > m[0] && m[1] > m[2], || format!("signal not strictly highest: {m:?}"))?;
    ensure(m[0].abs() <= 0.05, || format!("noise importance {}", m[0]))?;
    Ok(format!("signal {:.3}, weak {:.3}, noise {:.3}", m[1], m[2], m[0]))
}

// 10. split and fold contracts

fn criterion_10() -> Result<String, String> {
    let mut rng = seeded(10);
    for seed in 0..100u64 {
        let classes = rng.random_range(2..=7);
        let n = rng.random_range(classes * 5..400);
        let mut labels: Vec<usize> = (0..n).map(|i| i % classes).collect();
        labels.shuffle(&mut rng);
        let counts: Vec<usize> = (0..classes).map(|c| labels.iter().filter(|&&l| l == c).count()).collect();
        let f: [f64; 3] = [[0.7, 0.2, 0.1], [0.8, 0.2, 0.0], [0.6, 0.25, 0.15]][seed as usize % 3];

        let s = stratified_split(&labels, f, seed).map_err(|e| e.to_string())?;
        let parts = [&s.train, &s.test, &s.val];
        let mut seen = vec![0u8; n];
        parts.iter().flat_map(|p| p.iter()).for_each(|&i| seen[i] += 1);
        ensure(seen.iter().all(|&c| c == 1), || format!("seed {seed}: not a partition"))?;
        for (p, idx) in parts.iter().enumerate() {
            let want = n as f64 * f[p];
            ensure((idx.len() as f64 - want).abs() <= 1.0 + 1e-9, || format!("seed {seed}: part {p} size {} want {want} n {n} counts {counts:?} f {f:?} sizes {:?}", idx.len(), parts.map(|q| q.len())))?;
            for c in 0..classes {
                let got = idx.iter().filter(|&&i| labels[i] == c).count() as f64;
                ensure((got - counts[c] as f64 * f[p]).abs() <= 1.0 + 1e-9, || format!("seed {seed}: part {p} class {c}"))?;
            }
        }

        let k = rng.random_range(2..=5);
        let plan = k_fold(&labels, k, seed).map_err(|e| e.to_string())?;
        let mut seen = vec![0u8; n];
        plan.folds.iter().flatten().for_each(|&i| seen[i] += 1);
        ensure(plan.folds.len() == k && seen.iter().all(|&c| c == 1), || format!("seed {seed}: folds not a partition"))?;
        for fold in &plan.folds {
            ensure((fold.len() as f64 - n as f64 / k as f64).abs() <= 1.0, || format!("seed {seed}: fold size {}", fold.len()))?;
            for c in 0..classes {
                let got = fold.iter().filter(|&&i| labels[i] == c).count() as f64;
                ensure((got - counts[c] as f64 / k as f64).abs() <= 1.0, || format!("seed {seed}: fold class {c}"))?;
            }
        }
    }
    Ok("100 seeds".into())
}

// 11. end-to-end determinism

fn criterion_11() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = dir.path().join("data");
    cmd_synth(&SynthSpec { classes: 7, rows_per_class: 60, seed: 11, ..SynthSpec::default() }, &data).map_err(|e| e.to_string())?;
    let mut cfg = ExperimentConfig::new(Task::Multiclass, ModelKind::ALL.to_vec(), 11);
    cfg.hyperparams.rf.n_trees = 20;
    cfg.hyperparams.gbm.max_rounds = 20;
    cfg.hyperparams.network.max_epochs = 5;
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    cmd_train(&cfg, &data, &a).map_err(|e| e.to_string())?;
    cmd_train(&cfg, &data, &b).map_err(|e| e.to_string())?;
    let read = |p: std::path::PathBuf| std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()));
    ensure(read(a.join(MANIFEST_FILE))? == read(b.join(MANIFEST_FILE))?, || "manifests differ".into())?;
    for kind in ModelKind::ALL {
        let f = format!("{}/model.json", kind.as_str());
        ensure(read(a.join(&f))? == read(b.join(&f))?, || format!("{f} differs"))?;
    }
    Ok("manifest and 8 model files byte-identical".into())
}

fn log_line(s: &str) {
    println!("{s}");
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let checks: [(&str, Check); 11] = [
        ("metric oracle", criterion_1),
        ("leakage guard", criterion_2),
        ("gradient checks", criterion_3),
        ("formula spot values", criterion_4),
        ("tree oracle", criterion_5),
        ("voting oracle", criterion_6),
        ("synthetic end-to-end", criterion_7),
        ("early stopping", criterion_8),
        ("permutation importance", criterion_9),
        ("split and fold contracts", criterion_10),
        ("determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let id = (i + 1).to_string();
        if filter.as_deref().is_some_and(|f| f != id && !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
