//! Running an extractor over a whole image set.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{GrayImage, LabeledImageSet};
use crate::error::{Error, Result};
use crate::featstore::{FeatureMatrix, FeatureMeta, fingerprint};
use crate::hog::{HogParams, hog_features};
use crate::lbp::{LbpParams, lbp_histogram};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Extractor {
    Lbp { params: LbpParams, normalize: bool },
    Hog(HogParams),
}

impl Extractor {
    pub fn name(&self) -> &'static str {
        match self {
            Extractor::Lbp { .. } => "lbp",
            Extractor::Hog(_) => "hog",
        }
    }

    pub fn params_string(&self) -> String {
        match self {
            Extractor::Lbp { params, normalize } => format!(
                "points={},radius={},normalize={normalize}",
                params.points, params.radius
            ),
            Extractor::Hog(p) => format!(
                "cell={},block={},bins={},signed={}",
                p.cell_size, p.block_size, p.orientation_bins, p.signed
            ),
        }
    }

    pub fn extract(&self, img: &GrayImage) -> Result<Vec<f64>> {
        match self {
            Extractor::Lbp { params, normalize } => Ok(lbp_histogram(img, params, *normalize)?.bins),
            Extractor::Hog(p) => Ok(hog_features(img, p)?.values),
        }
    }
}

/// Stable identity of a corpus: file names and labels in load order.
pub fn dataset_fingerprint(set: &LabeledImageSet) -> String {
    let names: Vec<String> = set
        .paths
        .iter()
        .zip(&set.labels)
        .map(|(p, &l)| {
            let file = p
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            format!("{file}:{}", set.class_names[l])
        })
        .collect();
    fingerprint(names.iter().map(String::as_str))
}

/// Extracts one feature row per image, in parallel, preserving sample order.
pub fn extract_dataset(set: &LabeledImageSet, extractor: &Extractor) -> Result<FeatureMatrix> {
    if set.is_empty() {
        return Err(Error::Dataset("no images to extract features from".into()));
    }
    let rows = set
        .images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            extractor.extract(img).map_err(|e| match set.paths.get(i) {
                Some(p) => Error::Dataset(format!("{}: {e}", p.display())),
                None => e,
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let labels = (0..set.len()).map(|i| set.label_name(i).to_string()).collect();
    let source = (!set.paths.is_empty()).then(|| dataset_fingerprint(set));
    FeatureMatrix::from_rows(
        rows,
        labels,
        FeatureMeta {
            extractor: extractor.name().to_string(),
            params: extractor.params_string(),
            source,
        },
    )
}
