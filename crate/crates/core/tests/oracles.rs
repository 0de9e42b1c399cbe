mod support;

use std::io::Cursor;
use std::path::Path;

use proptest::prelude::*;
use texturebench::classifiers::tree::gini_impurity;
use texturebench::dataset::GrayImage;
use texturebench::featstore::{self, FeatureMatrix, FeatureMeta};
use texturebench::hog::{HogParams, hog_features};
use texturebench::lbp::{LbpParams, lbp_code, lbp_histogram};

#[test]
fn necklace_count_matches_rotation_orbits() {
    support::check_necklaces(16).unwrap();
}

#[test]
fn lbp_matches_naive_reference() {
    support::check_lbp(50, 7).unwrap();
}

#[test]
fn hog_matches_naive_reference() {
    support::check_hog(20, 11).unwrap();
}

#[test]
fn mlp_gradients_match_finite_differences() {
    support::check_mlp_gradients(20).unwrap();
}

#[test]
fn svm_solution_satisfies_kkt() {
    support::check_svm_kkt(10, 1e-3).unwrap();
}

#[test]
fn cart_matches_exhaustive_split_search() {
    support::check_cart(20).unwrap();
}

#[test]
fn fold_partition_laws() {
    support::check_folds(200).unwrap();
}

#[test]
fn featstore_round_trip() {
    support::check_featstore(100, 5).unwrap();
}

fn image_strategy(min: usize, max: usize, top: u8) -> impl Strategy<Value = GrayImage> {
    (min..=max, min..=max).prop_flat_map(move |(w, h)| {
        proptest::collection::vec(0..=top, w * h)
            .prop_map(move |v| GrayImage::new(w, h, v.into_iter().map(f64::from).collect()).unwrap())
    })
}

fn meta() -> FeatureMeta {
    FeatureMeta {
        extractor: "lbp".into(),
        params: "points=8,radius=1".into(),
        source: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lbp_code_is_rotation_invariant(
        neighbors in proptest::collection::vec(0.0..255.0f64, 2..=16),
        center in 0.0..255.0f64,
        shift in 0usize..16,
    ) {
        let mut rotated = neighbors.clone();
        rotated.rotate_left(shift % neighbors.len());
        prop_assert_eq!(lbp_code(&neighbors, center).unwrap(), lbp_code(&rotated, center).unwrap());
    }

    #[test]
    fn lbp_ignores_brightness_shift(img in image_strategy(10, 24, 200), shift in 1u8..=55) {
        let brighter = GrayImage::from_fn(img.width(), img.height(), |x, y| img.get(x, y) + f64::from(shift)).unwrap();
        let p = LbpParams::new(8, 2.0).unwrap();
        prop_assert_eq!(lbp_histogram(&img, &p, false).unwrap().bins, lbp_histogram(&brighter, &p, false).unwrap().bins);
    }

    #[test]
    fn lbp_histogram_counts_every_interior_pixel(img in image_strategy(8, 30, 255), p in 2usize..=12, r in 1.0..3.4f64) {
        let params = LbpParams::new(p, r).unwrap();
        let m = params.margin();
        prop_assume!(img.width() > 2 * m && img.height() > 2 * m);
        let raw = lbp_histogram(&img, &params, false).unwrap().bins;
        prop_assert_eq!(raw.iter().sum::<f64>(), ((img.width() - 2 * m) * (img.height() - 2 * m)) as f64);
        let norm = lbp_histogram(&img, &params, true).unwrap().bins;
        prop_assert!((norm.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hog_ignores_brightness_and_contrast(img in image_strategy(24, 40, 127), shift in 0u8..=100, scale in 0.25..2.0f64) {
        let p = HogParams { cell_size: 8, ..HogParams::default() };
        let base = hog_features(&img, &p).unwrap().values;
        let shifted = GrayImage::from_fn(img.width(), img.height(), |x, y| img.get(x, y) + f64::from(shift)).unwrap();
        prop_assert_eq!(&hog_features(&shifted, &p).unwrap().values, &base);
        let scaled = GrayImage::from_fn(img.width(), img.height(), |x, y| img.get(x, y) * scale).unwrap();
        let sv = hog_features(&scaled, &p).unwrap().values;
        // The norm regulariser makes contrast invariance approximate for near-flat blocks.
        for (a, b) in sv.iter().zip(&base) {
            prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
        }
    }

    #[test]
    fn hog_blocks_have_at_most_unit_norm(img in image_strategy(20, 40, 255)) {
        let p = HogParams { cell_size: 5, block_size: 2, orientation_bins: 9, signed: false };
        let d = hog_features(&img, &p).unwrap();
        let block = 2 * 2 * 9;
        prop_assert_eq!(d.values.len(), p.descriptor_len(img.width(), img.height()));
        for chunk in d.values.chunks(block) {
            let n: f64 = chunk.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(n <= 1.0 + 1e-12);
            prop_assert!(chunk.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn gini_stays_in_bounds(counts in proptest::collection::vec(0usize..50, 1..8)) {
        prop_assume!(counts.iter().sum::<usize>() > 0);
        let g = gini_impurity(&counts).unwrap();
        let k = counts.len() as f64;
        prop_assert!(g >= -1e-15 && g <= 1.0 - 1.0 / k + 1e-12);
        if counts.iter().filter(|&&c| c > 0).count() == 1 {
            prop_assert!(g.abs() < 1e-15);
        }
    }

    #[test]
    fn featstore_rejects_corrupted_files(
        rows in proptest::collection::vec(proptest::collection::vec(-1e6..1e6f64, 3), 1..6),
        which in 0usize..8,
        at in 0usize..100,
    ) {
        let labels: Vec<String> = (0..rows.len()).map(|i| format!("c{i}")).collect();
        let m = FeatureMatrix::from_rows(rows, labels, meta()).unwrap();
        let text = featstore::to_string(&m);
        let lines: Vec<&str> = text.lines().collect();
        let data_line = 4 + at % (lines.len() - 4);
        let mut edited: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
        match which {
            0 => edited[2] = "# dim=4".into(),
            1 => edited[3] = "label,f0,f1".into(),
            2 => edited[data_line].push_str(",1"),
            3 => {
                let cut = edited[data_line].rfind(',').unwrap();
                edited[data_line].truncate(cut);
            }
            4 => edited[data_line] = edited[data_line].replacen(',', ",NaN,", 1).rsplit_once(',').unwrap().0.to_string(),
            5 => edited[data_line] = format!(",{}", edited[data_line].split_once(',').unwrap().1),
            6 => edited[0] = "extractor=lbp".into(),
            _ => edited[data_line] = edited[data_line].replacen(',', ",x", 1),
        }
        let corrupted = edited.join("\n") + "\n";
        prop_assert!(featstore::parse(Cursor::new(corrupted.as_bytes()), Path::new("mem")).is_err());
    }
}
