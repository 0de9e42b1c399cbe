//! Independent reference implementations, shared by the oracle tests and the
//! acceptance run. Each `check_*` returns `Err` with a description of the
//! first mismatch.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::Cursor;
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use texturebench::Result as TbResult;
use texturebench::classifiers::mlp::MlpModel;
use texturebench::classifiers::svm::{rbf_kernel, solve_binary};
use texturebench::classifiers::tree::{Node, TreeModel, TreeParams, train_tree};
use texturebench::classifiers::{Classifier, Model};
use texturebench::dataset::GrayImage;
use texturebench::eval::kfold_split;
use texturebench::featstore::{self, FeatureMatrix, FeatureMeta};
use texturebench::hog::{HogParams, hog_features};
use texturebench::lbp::{LbpParams, NecklaceTable, lbp_histogram, necklace_count};

pub type Check = Result<(), String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.random_range(0..=255) as f64).unwrap()
}

// ---------------------------------------------------------------- necklaces

/// Orbits of `p`-bit words under rotation, found by flood-filling each orbit.
pub fn orbits_by_rotation(p: usize) -> Vec<u32> {
    let size = 1usize << p;
    let mask = (size - 1) as u32;
    let mut seen = vec![false; size];
    let mut reps = Vec::new();
    for start in 0..size as u32 {
        if seen[start as usize] {
            continue;
        }
        reps.push(start);
        let mut w = start;
        loop {
            seen[w as usize] = true;
            w = ((w << 1) | (w >> (p - 1))) & mask;
            if w == start {
                break;
            }
        }
    }
    reps
}

pub fn check_necklaces(max_p: usize) -> Check {
    for p in 1..=max_p {
        let orbits = orbits_by_rotation(p).len() as u64;
        let formula = necklace_count(p).map_err(|e| e.to_string())?;
        if orbits != formula {
            return Err(format!("P={p}: {orbits} orbits, necklace_count says {formula}"));
        }
        if p >= 2 {
            let table = NecklaceTable::get(p).map_err(|e| e.to_string())?;
            if table.len() as u64 != orbits {
                return Err(format!("P={p}: table has {} ids for {orbits} orbits", table.len()));
            }
        }
    }
    Ok(())
}

// --------------------------------------------------------------------- LBP

/// Dense ids: necklaces numbered by their smallest rotation, ascending.
fn necklace_ids(p: usize) -> Vec<usize> {
    let size = 1usize << p;
    let mask = (size - 1) as u32;
    let canon = |w: u32| (0..p).map(|r| ((w >> r) | (w << (p - r))) & mask).min().unwrap();
    let reps: BTreeSet<u32> = (0..size as u32).map(|w| canon(w & mask)).collect();
    let index: BTreeMap<u32, usize> = reps.into_iter().enumerate().map(|(i, r)| (r, i)).collect();
    (0..size as u32).map(|w| index[&canon(w)]).collect()
}

fn near_int(v: f64) -> f64 {
    if (v - v.round()).abs() < 1e-9 { v.round() } else { v }
}

/// Pixel-by-pixel LBP histogram. Neighbour `k` sits at angle `2πk/P`,
/// counter-clockwise from east with y pointing down; bit `k` is set when the
/// interpolated neighbour is at least the centre value.
pub fn naive_lbp(img: &GrayImage, p: usize, r: f64) -> Vec<f64> {
    let ids = necklace_ids(p);
    let n_bins = ids.iter().max().unwrap() + 1;
    let mut hist = vec![0.0; n_bins];
    let m = r.ceil() as usize;
    for cy in m..img.height() - m {
        for cx in m..img.width() - m {
            let c = img.get(cx, cy);
            let mut word = 0usize;
            for k in 0..p {
                let a = 2.0 * std::f64::consts::PI * k as f64 / p as f64;
                let x = near_int(cx as f64 + r * a.cos());
                let y = near_int(cy as f64 - r * a.sin());
                let (x0, y0) = (x.floor(), y.floor());
                let (fx, fy) = (x - x0, y - y0);
                let (x0, y0) = (x0 as usize, y0 as usize);
                let px =
                    |dx: usize, dy: usize| img.get((x0 + dx).min(img.width() - 1), (y0 + dy).min(img.height() - 1));
                // Sign of the interpolated difference to the centre.
                let diff = (1.0 - fx) * (1.0 - fy) * (px(0, 0) - c)
                    + fx * (1.0 - fy) * (px(1, 0) - c)
                    + (1.0 - fx) * fy * (px(0, 1) - c)
                    + fx * fy * (px(1, 1) - c);
                if diff >= 0.0 {
                    word |= 1 << k;
                }
            }
            hist[ids[word]] += 1.0;
        }
    }
    hist
}

pub fn check_lbp(n_images: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let configs = [(8, 1.0), (8, 2.0), (12, 1.5), (14, 4.0)];
    for i in 0..n_images {
        let mut img = random_image(&mut rng, 10, 10);
        // Flat patches exercise the `>=` tie on every other image.
        if i % 2 == 1 {
            let v = rng.random_range(0..=255) as f64;
            img = GrayImage::from_fn(10, 10, |x, y| if (x + y) % 3 == 0 { v } else { img.get(x, y) }).unwrap();
        }
        for &(p, r) in &configs {
            let params = LbpParams::new(p, r).map_err(|e| e.to_string())?;
            let got = lbp_histogram(&img, &params, false).map_err(|e| e.to_string())?.bins;
            let want = naive_lbp(&img, p, r);
            if got != want {
                let at = got.iter().zip(&want).position(|(a, b)| a != b);
                return Err(format!("image {i}, P={p} R={r}: first differing bin {at:?}"));
            }
        }
    }
    Ok(())
}

// --------------------------------------------------------------------- HOG

/// Straight-line HOG: gradients, per-cell triangular votes, block L2 norm.
pub fn naive_hog(img: &GrayImage, cell: usize, block: usize, bins: usize, signed: bool) -> Vec<f64> {
    let (w, h) = (img.width(), img.height());
    let range = if signed { 360.0 } else { 180.0 };
    let bw = range / bins as f64;
    let d = |a: f64, b: f64, two_step: bool| if two_step { (a - b) / 2.0 } else { a - b };
    let (ncx, ncy) = (w / cell, h / cell);
    let mut cells = vec![vec![0.0; bins]; ncx * ncy];
    for y in 0..ncy * cell {
        for x in 0..ncx * cell {
            let gx = match x {
                0 => d(img.get(1, y), img.get(0, y), false),
                _ if x == w - 1 => d(img.get(x, y), img.get(x - 1, y), false),
                _ => d(img.get(x + 1, y), img.get(x - 1, y), true),
            };
            let gy = match y {
                0 => d(img.get(x, 1), img.get(x, 0), false),
                _ if y == h - 1 => d(img.get(x, y), img.get(x, y - 1), false),
                _ => d(img.get(x, y + 1), img.get(x, y - 1), true),
            };
            let mag = (gx * gx + gy * gy).sqrt();
            let mut theta = gy.atan2(gx).to_degrees();
            while theta < 0.0 {
                theta += range;
            }
            while theta >= range {
                theta -= range;
            }
            let hist = &mut cells[(y / cell) * ncx + x / cell];
            for (b, slot) in hist.iter_mut().enumerate() {
                let centre = (b as f64 + 0.5) * bw;
                let mut dist = (theta - centre).abs();
                dist = dist.min(range - dist);
                let weight = 1.0 - dist / bw;
                if weight > 0.0 {
                    *slot += mag * weight;
                }
            }
        }
    }
    let mut out = Vec::new();
    for by in 0..ncy / block {
        for bx in 0..ncx / block {
            let mut v = Vec::new();
            for cy in by * block..(by + 1) * block {
                for cx in bx * block..(bx + 1) * block {
                    v.extend_from_slice(&cells[cy * ncx + cx]);
                }
            }
            let norm = (v.iter().map(|a| a * a).sum::<f64>() + 1e-10).sqrt();
            out.extend(v.into_iter().map(|a| a / norm));
        }
    }
    out
}

pub fn check_hog(n_images: usize, seed: u64) -> Check {
    let mut rng = rng(seed);
    let configs = [(8, 1, 8, false), (10, 2, 9, false), (6, 1, 12, true), (18, 1, 8, false)];
    for i in 0..n_images {
        let img = random_image(&mut rng, 40, 40);
        for &(cell, block, bins, signed) in &configs {
            let params = HogParams {
                cell_size: cell,
                block_size: block,
                orientation_bins: bins,
                signed,
            };
            let got = hog_features(&img, &params).map_err(|e| e.to_string())?.values;
            let want = naive_hog(&img, cell, block, bins, signed);
            if got.len() != want.len() {
                return Err(format!("image {i}, {params:?}: length {} vs {}", got.len(), want.len()));
            }
            let worst = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if worst > 1e-9 {
                return Err(format!("image {i}, {params:?}: max abs difference {worst:e}"));
            }
        }
    }
    Ok(())
}

// --------------------------------------------------------------------- MLP

/// Largest relative error between analytic and central-difference gradients.
/// Entries whose magnitudes are both below `floor` are compared absolutely.
pub fn mlp_gradient_error(seed: u64, h: f64, floor: f64) -> f64 {
    let mut r = rng(seed);
    let (d, k, n) = (6, 3, 5);
    let x = Array2::from_shape_simple_fn((n, d), || r.random_range(-1.0..1.0));
    let y: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
    let mut model = MlpModel::init(d, &[5, 4], k, seed);
    for layer in &mut model.layers {
        layer.bias.mapv_inplace(|_| r.random_range(-0.1..0.1));
    }
    let (_, grads) = model.loss_and_gradients(x.view(), &y);
    let mut worst = 0.0f64;
    for (l, grad) in grads.iter().enumerate() {
        let (rows, cols) = model.layers[l].weights.dim();
        for i in 0..rows {
            for j in 0..cols {
                let orig = model.layers[l].weights[[i, j]];
                model.layers[l].weights[[i, j]] = orig + h;
                let up = model.loss(x.view(), &y);
                model.layers[l].weights[[i, j]] = orig - h;
                let down = model.loss(x.view(), &y);
                model.layers[l].weights[[i, j]] = orig;
                worst = worst.max(rel_err(grad.0[[i, j]], (up - down) / (2.0 * h), floor));
            }
        }
        for j in 0..model.layers[l].bias.len() {
            let orig = model.layers[l].bias[j];
            model.layers[l].bias[j] = orig + h;
            let up = model.loss(x.view(), &y);
            model.layers[l].bias[j] = orig - h;
            let down = model.loss(x.view(), &y);
            model.layers[l].bias[j] = orig;
            worst = worst.max(rel_err(grad.1[j], (up - down) / (2.0 * h), floor));
        }
    }
    worst
}

fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn check_mlp_gradients(seeds: u64) -> Check {
    for seed in 0..seeds {
        let e = mlp_gradient_error(seed, 1e-5, 1e-6);
        if e.is_nan() || e >= 1e-4 {
            return Err(format!("seed {seed}: relative gradient error {e:e}"));
        }
    }
    Ok(())
}

// --------------------------------------------------------------------- SVM

/// Largest KKT violation of an SMO solution, measured on `y_i f(x_i)` with
/// `f` recomputed from the kernel, plus the equality-constraint residual.
pub fn svm_kkt_violation(seed: u64, c: f64, gamma: f64, tol: f64) -> (f64, f64, bool) {
    let mut r = rng(seed);
    let n = r.random_range(20..50);
    let shift = r.random_range(0.5..2.0);
    let mut pts = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let p: Vec<f64> = (0..3)
            .map(|_| r.random_range(-1.0..1.0) + label * shift * 0.5)
            .collect();
        pts.push(p);
        y.push(label);
    }
    let k = |i: usize, j: usize| rbf_kernel(&pts[i], &pts[j], gamma).unwrap();
    let sol = solve_binary(n, k, &y, c, tol, 100_000);
    let mut worst = 0.0f64;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| sol.alpha[j] * y[j] * k(i, j)).sum::<f64>() - sol.rho;
        let margin = y[i] * f;
        let a = sol.alpha[i];
        let v = if a < 0.0 || a > c {
            f64::INFINITY
        } else if a == 0.0 {
            (1.0 - margin).max(0.0)
        } else if a == c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
    }
    let balance: f64 = sol.alpha.iter().zip(&y).map(|(a, b)| a * b).sum();
    (worst, balance.abs(), sol.converged)
}

pub fn check_svm_kkt(problems: u64, tol: f64) -> Check {
    for seed in 0..problems {
        let c = [0.5, 1.0, 10.0][seed as usize % 3];
        let (v, balance, converged) = svm_kkt_violation(seed, c, 0.7, tol);
        if !converged {
            return Err(format!("problem {seed}: solver did not converge"));
        }
        if v > tol + 1e-9 || balance > 1e-9 {
            return Err(format!("problem {seed}: KKT violation {v:e}, Σαy = {balance:e}"));
        }
    }
    Ok(())
}

// -------------------------------------------------------------------- CART

/// Weighted child Gini of every admissible split, exhaustively.
fn all_splits(x: ArrayView2<'_, f64>, y: &[usize], idx: &[usize], k: usize) -> Vec<(f64, usize, f64)> {
    let gini = |set: &[usize]| {
        let mut counts = vec![0.0; k];
        for &i in set {
            counts[y[i]] += 1.0;
        }
        let n = set.len() as f64;
        1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
    };
    let mut out = Vec::new();
    for f in 0..x.ncols() {
        let values: BTreeSet<u64> = idx.iter().map(|&i| x[[i, f]].to_bits()).collect();
        let mut sorted: Vec<f64> = values.into_iter().map(f64::from_bits).collect();
        sorted.sort_by(f64::total_cmp);
        for w in sorted.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[[i, f]] <= t);
            let n = idx.len() as f64;
            let score = l.len() as f64 / n * gini(&l) + r.len() as f64 / n * gini(&r);
            out.push((score, f, t));
        }
    }
    out
}

#[derive(Debug, PartialEq)]
pub enum RefTree {
    Leaf(usize),
    Split(usize, f64, Box<RefTree>, Box<RefTree>),
}

/// Tree search that scores every candidate split at every node and keeps the
/// lowest weighted Gini, ties to the lowest feature and then the lowest
/// threshold.
pub fn reference_tree(x: ArrayView2<'_, f64>, y: &[usize], idx: &[usize], k: usize, depth_left: usize) -> RefTree {
    let mut counts = vec![0usize; k];
    for &i in idx {
        counts[y[i]] += 1;
    }
    let majority = (0..k).rev().max_by_key(|&c| counts[c]).unwrap();
    if depth_left == 0 || counts.iter().filter(|&&c| c > 0).count() <= 1 {
        return RefTree::Leaf(majority);
    }
    let splits = all_splits(x, y, idx, k);
    let Some(best) = splits.iter().map(|s| s.0).reduce(f64::min) else {
        return RefTree::Leaf(majority);
    };
    let &(_, f, t) = splits
        .iter()
        .filter(|s| s.0 <= best + 1e-12)
        .min_by(|a, b| (a.1, a.2).partial_cmp(&(b.1, b.2)).unwrap())
        .unwrap();
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[[i, f]] <= t);
    RefTree::Split(
        f,
        t,
        Box::new(reference_tree(x, y, &l, k, depth_left - 1)),
        Box::new(reference_tree(x, y, &r, k, depth_left - 1)),
    )
}

pub fn as_ref_tree(m: &TreeModel, at: usize) -> RefTree {
    match m.nodes[at] {
        Node::Leaf { class } => RefTree::Leaf(class),
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => RefTree::Split(
            feature,
            threshold,
            Box::new(as_ref_tree(m, left)),
            Box::new(as_ref_tree(m, right)),
        ),
    }
}

pub fn check_cart(problems: u64) -> Check {
    for seed in 0..problems {
        let mut r = rng(seed);
        let k = r.random_range(2..=3);
        let d = r.random_range(1..=3);
        let x = Array2::from_shape_simple_fn((8, d), || r.random_range(0..5) as f64);
        let y: Vec<usize> = (0..8).map(|_| r.random_range(0..k)).collect();
        let params = TreeParams {
            max_depth: Some(2),
            ..TreeParams::default()
        };
        let model = train_tree(x.view(), &y, k, &params).map_err(|e| e.to_string())?;
        let want = reference_tree(x.view(), &y, &(0..8).collect::<Vec<_>>(), k, 2);
        let got = as_ref_tree(&model, 0);
        if got != want {
            return Err(format!("problem {seed}: tree {got:?}, reference {want:?}"));
        }
    }
    Ok(())
}

// ------------------------------------------------------------------- folds

pub fn check_folds(triples: u64) -> Check {
    for seed in 0..triples {
        let mut r = rng(seed);
        let k = r.random_range(2..=10);
        let n_classes = r.random_range(1..=6);
        let per_class: Vec<usize> = (0..n_classes).map(|_| r.random_range(k..=k + 30)).collect();
        let y: Vec<usize> = per_class.iter().enumerate().flat_map(|(c, &m)| vec![c; m]).collect();
        let n = y.len();
        let fold_seed = r.random::<u64>();
        for stratified in [true, false] {
            let plan = kfold_split(n, &y, k, fold_seed, stratified).map_err(|e| e.to_string())?;
            let ctx = format!("n={n} k={k} seed={fold_seed} stratified={stratified}");
            let mut seen = vec![0usize; n];
            for f in 0..k {
                let test = plan.test_indices(f);
                let train = plan.train_indices(f);
                if test.is_empty() {
                    return Err(format!("{ctx}: fold {f} empty"));
                }
                if test.len() + train.len() != n || test.iter().any(|i| train.contains(i)) {
                    return Err(format!("{ctx}: fold {f} train/test not a partition"));
                }
                for &i in &test {
                    seen[i] += 1;
                }
            }
            if seen.iter().any(|&s| s != 1) {
                return Err(format!("{ctx}: some sample is not tested exactly once"));
            }
            let sizes = plan.fold_sizes();
            if sizes.iter().max().unwrap() - sizes.iter().min().unwrap() > 1 {
                return Err(format!("{ctx}: fold sizes {sizes:?}"));
            }
            if stratified {
                for (c, &m) in per_class.iter().enumerate() {
                    for f in 0..k {
                        let in_fold = plan.test_indices(f).iter().filter(|&&i| y[i] == c).count();
                        if in_fold != m / k && in_fold != m.div_ceil(k) {
                            return Err(format!("{ctx}: class {c} has {in_fold} of {m} in fold {f}"));
                        }
                    }
                }
            }
            if kfold_split(n, &y, k, fold_seed, stratified).map_err(|e| e.to_string())? != plan {
                return Err(format!("{ctx}: split is not reproducible"));
            }
        }
    }
    Ok(())
}

// --------------------------------------------------------------- featstore

pub fn random_feature_matrix(r: &mut ChaCha8Rng) -> FeatureMatrix {
    let n = r.random_range(0..12);
    let d = r.random_range(1..20);
    let specials = [
        0.0,
        -0.0,
        f64::MIN_POSITIVE,
        5e-324,
        f64::MAX,
        -f64::MAX,
        1e-300,
        0.1,
        1.0 / 3.0,
    ];
    let data = Array2::from_shape_simple_fn((n, d), || match r.random_range(0..4) {
        0 => specials[r.random_range(0..specials.len())],
        1 => r.random_range(0..1000) as f64,
        _ => f64::from_bits(r.random::<u64>() & !(0x7ffu64 << 52) | ((r.random_range(900..1150u64)) << 52)),
    });
    let alphabet: Vec<char> = "ABCxyz019_-. ()é".chars().collect();
    let labels = (0..n)
        .map(|_| {
            let len = r.random_range(1..6);
            let s: String = (0..len).map(|_| alphabet[r.random_range(0..alphabet.len())]).collect();
            if s.starts_with('#') { format!("c{s}") } else { s }
        })
        .collect();
    let meta = FeatureMeta {
        extractor: ["lbp", "hog", "vgg19"][r.random_range(0..3)].to_string(),
        params: format!("p={}", r.random_range(0..100)),
        source: r.random_bool(0.5).then(|| format!("{:016x}", r.random::<u64>())),
    };
    FeatureMatrix::new(data, labels, meta).unwrap()
}

pub fn check_featstore(matrices: u64, seed: u64) -> Check {
    let mut r = rng(seed);
    for i in 0..matrices {
        let m = random_feature_matrix(&mut r);
        let text = featstore::to_string(&m);
        let back = featstore::parse(Cursor::new(text.as_bytes()), Path::new("mem")).map_err(|e| e.to_string())?;
        let same_bits = back
            .data()
            .iter()
            .zip(m.data().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        if back.data().dim() != m.data().dim() || !same_bits || back.labels() != m.labels() || back.meta != m.meta {
            return Err(format!("matrix {i} did not round-trip"));
        }
        if featstore::to_string(&back) != text {
            return Err(format!("matrix {i}: re-serialisation differs"));
        }
    }
    Ok(())
}

// ------------------------------------------------------------- baselines

/// Nearest class mean under Euclidean distance.
pub struct NearestCentroid;

struct Centroids(Array2<f64>);

impl Model for Centroids {
    fn dim(&self) -> usize {
        self.0.ncols()
    }

    fn predict_one(&self, x: ArrayView1<'_, f64>) -> TbResult<usize> {
        let dist = |c: ArrayView1<'_, f64>| c.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.0.rows().into_iter().enumerate() {
            let d = dist(c);
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }
}

impl Classifier for NearestCentroid {
    fn name(&self) -> String {
        "centroid".into()
    }

    fn describe(&self) -> String {
        "metric=euclidean".into()
    }

    fn fit(&self, x: ArrayView2<'_, f64>, y: &[usize], n_classes: usize) -> TbResult<Box<dyn Model>> {
        let mut sums = Array2::<f64>::zeros((n_classes, x.ncols()));
        let mut counts = vec![0.0; n_classes];
        for (row, &c) in x.rows().into_iter().zip(y) {
            let mut s = sums.row_mut(c);
            s += &row;
            counts[c] += 1.0;
        }
        for (mut s, n) in sums.rows_mut().into_iter().zip(counts) {
            if n > 0.0 {
                s /= n;
            } else {
                s.fill(f64::INFINITY);
            }
        }
        Ok(Box::new(Centroids(sums)))
    }
}
