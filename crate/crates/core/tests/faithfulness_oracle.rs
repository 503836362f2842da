//! Faithfulness metrics against brute-force replays written from their
//! definitions: explicit pixel overwrites, sorted orders, textbook
//! correlations.

use proptest::prelude::*;
use rand::seq::index;

use saliency_eval::metrics::faithfulness::{
    faithfulness_correlation, faithfulness_estimate, monotonicity_arya_ratio, monotonicity_nguyen,
    pixel_flipping_curve, selectivity_curve, FaithfulnessConfig, SubsetSize,
};
use saliency_eval::metrics::MetricOutcome;
use saliency_eval::models::{PlantedEvidenceModel, Predictor};
use saliency_eval::perturbation::{BaselineSpec, PerturbationPlan};
use saliency_eval::seed;
use saliency_eval::tensor::{Granularity, ImageTensor, SaliencyMap, Shape};

const TOL: f64 = 1e-10;
const C: usize = 3;
const H: usize = 4;
const W: usize = 6;
const N: usize = H * W;

#[derive(Debug)]
struct Case {
    model: PlantedEvidenceModel,
    image: ImageTensor,
    map: SaliencyMap,
    class: usize,
}

impl Case {
    fn prob(&self, image: &ImageTensor) -> f64 {
        self.model.predict(image).unwrap()[self.class]
    }

    fn p0(&self) -> f64 {
        self.prob(&self.image)
    }
}

fn case(pixels: Vec<f64>, region: Vec<bool>, weights: Vec<f64>, bias: f64, attrs: Vec<i32>) -> Case {
    let shape = Shape::new(C, H, W);
    let region_idx: Vec<usize> = (0..N).filter(|&p| region[p]).collect();
    let w = region_idx.iter().map(|&p| weights[p]).collect();
    let model = PlantedEvidenceModel::new(shape, region_idx, w, bias).unwrap();
    let image = ImageTensor::new(C, H, W, pixels).unwrap();
    // quarter steps produce ties in the ordering
    let map = SaliencyMap::new(H, W, attrs.iter().map(|&a| a as f64 / 4.0).collect()).unwrap();
    let probs = model.predict(&image).unwrap();
    let class = usize::from(probs[1] > probs[0]);
    Case { model, image, map, class }
}

fn arb_case() -> impl Strategy<Value = Case> {
    (
        prop::collection::vec(0.0f64..1.0, C * N),
        prop::collection::vec(prop::bool::weighted(0.4), N),
        prop::collection::vec(-3.0f64..3.0, N),
        -1.0f64..1.0,
        prop::collection::vec(-8i32..=8, N),
    )
        .prop_map(|(px, region, w, b, a)| case(px, region, w, b, a))
}

fn fill(image: &mut ImageTensor, pixel: usize, value: f64) {
    let mut data = image.clone().into_data();
    for c in 0..C {
        data[c * N + pixel] = value;
    }
    *image = ImageTensor::new(C, H, W, data).unwrap();
}

fn baseline_value(spec: BaselineSpec) -> f64 {
    match spec {
        BaselineSpec::Black => 0.0,
        BaselineSpec::White => 1.0,
        _ => unreachable!("oracle covers constant baselines"),
    }
}

/// Indices by descending |score|, ties by ascending index.
fn descending(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].abs().partial_cmp(&scores[a].abs()).unwrap().then(a.cmp(&b)));
    idx
}

fn patch_pixels(patch: usize, size: usize) -> Vec<usize> {
    let per_row = W / size;
    let (pr, pc) = (patch / per_row, patch % per_row);
    let mut out = Vec::new();
    for r in pr * size..(pr + 1) * size {
        for c in pc * size..(pc + 1) * size {
            out.push(r * W + c);
        }
    }
    out
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum()
}

/// `Some(r)` for clearly non-degenerate series, `Some(NAN)` for exactly
/// constant ones, `None` when too close to call.
fn pearson_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    let (vx, vy) = (variance(x), variance(y));
    if vx == 0.0 || vy == 0.0 {
        return Some(f64::NAN);
    }
    if vx < 1e-12 || vy < 1e-12 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / (vx * vy).sqrt())
}

fn midranks_oracle(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let below = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn spearman_oracle(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson_oracle(&midranks_oracle(x), &midranks_oracle(y))
}

fn check_scalar(got: MetricOutcome, want: Option<f64>) -> Result<(), TestCaseError> {
    match want {
        None => Ok(()),
        Some(w) if w.is_nan() => {
            prop_assert!(got.is_undefined(), "expected undefined, got {:?}", got);
            Ok(())
        }
        Some(w) => {
            let g = got.scalar();
            prop_assert!(g.is_some_and(|g| (g - w).abs() <= TOL), "got {:?}, oracle {}", g, w);
            Ok(())
        }
    }
}

fn check_curve(got: MetricOutcome, x: &[f64], y: &[f64]) -> Result<(), TestCaseError> {
    let curve = got.curve().cloned().expect("a curve");
    prop_assert_eq!(curve.x.len(), x.len());
    for (a, b) in curve.x.iter().zip(x).chain(curve.y.iter().zip(y)) {
        prop_assert!((a - b).abs() <= TOL, "curve {:?} vs oracle {:?} {:?}", curve, x, y);
    }
    Ok(())
}

/// Chunks of `order` as the default plan cuts them: H equal chunks.
fn default_chunks(order: &[usize]) -> Vec<Vec<usize>> {
    order.chunks(W).map(<[usize]>::to_vec).collect()
}

fn cfg(baseline: BaselineSpec, per_feature: bool) -> FaithfulnessConfig {
    FaithfulnessConfig {
        baseline,
        plan: per_feature.then(|| PerturbationPlan::per_feature(H, W, Granularity::Pixel).unwrap()),
        ..Default::default()
    }
}

fn chunks_for(order: &[usize], per_feature: bool) -> Vec<Vec<usize>> {
    if per_feature {
        order.iter().map(|&p| vec![p]).collect()
    } else {
        default_chunks(order)
    }
}

fn baselines() -> impl Strategy<Value = BaselineSpec> {
    prop_oneof![Just(BaselineSpec::Black), Just(BaselineSpec::White)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn pixel_flipping_matches_replay(c in arb_case(), spec in baselines(), per_feature in any::<bool>()) {
        let v = baseline_value(spec);
        let chunks = chunks_for(&descending(c.map.data()), per_feature);
        let mut img = c.image.clone();
        let (mut x, mut y) = (vec![0.0], vec![c.p0()]);
        let mut removed = 0;
        for chunk in &chunks {
            for &p in chunk {
                fill(&mut img, p, v);
            }
            removed += chunk.len();
            x.push(removed as f64 / N as f64);
            y.push(c.prob(&img));
        }
        check_curve(pixel_flipping_curve(&c.model, &c.image, &c.map, &cfg(spec, per_feature)).unwrap(), &x, &y)?;
    }

    #[test]
    fn selectivity_matches_replay(c in arb_case(), spec in baselines()) {
        let v = baseline_value(spec);
        let patches = (H / 2) * (W / 2);
        let sums: Vec<f64> = (0..patches)
            .map(|q| patch_pixels(q, 2).iter().map(|&p| c.map.data()[p].abs()).sum())
            .collect();
        let mut img = c.image.clone();
        let (mut x, mut y) = (vec![0.0], vec![c.p0()]);
        for (k, &q) in descending(&sums).iter().enumerate() {
            for p in patch_pixels(q, 2) {
                fill(&mut img, p, v);
            }
            x.push((k + 1) as f64 / patches as f64);
            y.push(c.prob(&img));
        }
        let cfg = FaithfulnessConfig { baseline: spec, patch_size: 2, ..Default::default() };
        check_curve(selectivity_curve(&c.model, &c.image, &c.map, &cfg).unwrap(), &x, &y)?;
    }

    #[test]
    fn estimate_matches_replay(c in arb_case(), spec in baselines(), per_feature in any::<bool>()) {
        let v = baseline_value(spec);
        let chunks = chunks_for(&descending(c.map.data()), per_feature);
        let mut img = c.image.clone();
        let mut prev = c.p0();
        let (mut attrs, mut drops) = (Vec::new(), Vec::new());
        for chunk in &chunks {
            for &p in chunk {
                fill(&mut img, p, v);
            }
            let p = c.prob(&img);
            drops.push(prev - p);
            prev = p;
            attrs.push(chunk.iter().map(|&q| c.map.data()[q]).sum::<f64>());
        }
        let got = faithfulness_estimate(&c.model, &c.image, &c.map, &cfg(spec, per_feature)).unwrap();
        check_scalar(got, pearson_oracle(&attrs, &drops))?;
    }

    #[test]
    fn arya_matches_replay(c in arb_case(), spec in baselines(), per_feature in any::<bool>()) {
        let v = baseline_value(spec);
        let mut ascending = descending(c.map.data());
        ascending.reverse();
        let chunks = chunks_for(&ascending, per_feature);
        let mut img = c.image.clone();
        for p in 0..N {
            fill(&mut img, p, v);
        }
        let mut prev = c.prob(&img);
        let mut ok = 0;
        for chunk in &chunks {
            let mut data = img.clone().into_data();
            for &p in chunk {
                for ch in 0..C {
                    data[ch * N + p] = c.image.at(ch, p);
                }
            }
            img = ImageTensor::new(C, H, W, data).unwrap();
            let p = c.prob(&img);
            if p >= prev {
                ok += 1;
            }
            prev = p;
        }
        let want = ok as f64 / chunks.len() as f64;
        check_scalar(monotonicity_arya_ratio(&c.model, &c.image, &c.map, &cfg(spec, per_feature)).unwrap(), Some(want))?;
    }

    #[test]
    fn nguyen_matches_replay(c in arb_case(), spec in baselines(), per_feature in any::<bool>()) {
        let v = baseline_value(spec);
        let chunks = chunks_for(&descending(c.map.data()), per_feature);
        let p0 = c.p0();
        let (mut attrs, mut changes) = (Vec::new(), Vec::new());
        for chunk in &chunks {
            let mut img = c.image.clone();
            for &p in chunk {
                fill(&mut img, p, v);
            }
            changes.push((p0 - c.prob(&img)).abs());
            attrs.push(chunk.iter().map(|&q| c.map.data()[q]).sum::<f64>());
        }
        let got = monotonicity_nguyen(&c.model, &c.image, &c.map, &cfg(spec, per_feature)).unwrap();
        check_scalar(got, spearman_oracle(&attrs, &changes))?;
    }

    #[test]
    fn correlation_matches_replay(c in arb_case(), spec in baselines(), run_seed in any::<u64>(), k in 1usize..6) {
        let v = baseline_value(spec);
        let p0 = c.p0();
        let runs = 12;
        let (mut attrs, mut drops) = (Vec::new(), Vec::new());
        for run in 0..runs {
            let subset = index::sample(&mut seed::rng(seed::derive(run_seed, run as u64)), N, k).into_vec();
            let mut img = c.image.clone();
            for &p in &subset {
                fill(&mut img, p, v);
            }
            drops.push(p0 - c.prob(&img));
            attrs.push(subset.iter().map(|&p| c.map.data()[p]).sum::<f64>());
        }
        let cfg = FaithfulnessConfig {
            baseline: spec,
            subset: SubsetSize::Count(k),
            runs,
            seed: run_seed,
            ..Default::default()
        };
        let got = faithfulness_correlation(&c.model, &c.image, &c.map, &cfg).unwrap();
        check_scalar(got, pearson_oracle(&attrs, &drops))?;
    }
}

/// Deleting the highest-ground-truth pixel never lowers the evidence by
/// less than deleting a lower-attributed one (non-negative weights and
/// inputs, black baseline).
#[test]
fn monotone_evidence_under_deletion() {
    let shape = Shape::new(C, H, W);
    proptest!(|(px in prop::collection::vec(0.0f64..1.0, C * N), w in prop::collection::vec(0.0f64..2.0, N))| {
        let model = PlantedEvidenceModel::new(shape, (0..N).collect(), w, 0.0).unwrap();
        let image = ImageTensor::new(C, H, W, px).unwrap();
        let gt = model.ground_truth_map(&image).unwrap();
        let order = descending(gt.data());
        let e0 = model.evidence(&image);
        let loss = |p: usize| {
            let mut img = image.clone();
            fill(&mut img, p, 0.0);
            e0 - model.evidence(&img)
        };
        let top = loss(order[0]);
        for &p in &order[1..] {
            prop_assert!(top >= loss(p) - 1e-12);
        }
    });
}
