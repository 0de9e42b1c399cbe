//! Image corpus loading and grayscale conversion.
//!
//! Two on-disk layouts are understood:
//!
//! * [`Layout::Subdirs`]: `root/<class>/<image>`; the class is the directory name.
//! * [`Layout::Prefix`]: `root/<image>`; the class is encoded in the file name
//!   (`A12.tif` → `A`, `mucosa_03.png` → `mucosa`).
//!
//! Files are visited in lexicographic path order so two loads of the same tree
//! always yield the same sample order and labels.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;
const LUMA_B: f64 = 0.114;

const IMAGE_EXTENSIONS: &[&str] = &["tif", "tiff", "png", "bmp"];

/// Single-channel image with real-valued luminance in `[0, 255]`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension {
                expected: width * height,
                got: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::param(format!("pixel value {v} outside [0, 255]")));
        }
        Ok(GrayImage { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Area-averaging resample: every output pixel is the coverage-weighted mean
    /// of the input pixels its footprint overlaps.
    pub fn resize_area(&self, width: usize, height: usize) -> Result<GrayImage> {
        if width == 0 || height == 0 || self.width == 0 || self.height == 0 {
            return Err(Error::param("resize dimensions must be non-zero"));
        }
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let spans = |out: usize, scale: f64, limit: usize| -> Vec<(usize, f64)> {
            let start = out as f64 * scale;
            let end = start + scale;
            let mut v = Vec::new();
            let mut i = start.floor() as usize;
            while (i as f64) < end && i < limit {
                let lo = start.max(i as f64);
                let hi = end.min(i as f64 + 1.0);
                if hi > lo {
                    v.push((i, hi - lo));
                }
                i += 1;
            }
            v
        };
        let col_spans: Vec<_> = (0..width).map(|x| spans(x, sx, self.width)).collect();
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            let rows = spans(y, sy, self.height);
            for cols in &col_spans {
                let mut acc = 0.0;
                let mut area = 0.0;
                for &(ry, wy) in &rows {
                    for &(cx, wx) in cols {
                        acc += self.get(cx, ry) * wx * wy;
                        area += wx * wy;
                    }
                }
                data.push((acc / area).clamp(0.0, 255.0));
            }
        }
        GrayImage::new(width, height, data)
    }
}

/// BT.601 luma of one 8-bit-range RGB triple.
#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    (LUMA_R * r + LUMA_G * g + LUMA_B * b).clamp(0.0, 255.0)
}

/// Converts interleaved RGB samples in `[0, 255]` to a [`GrayImage`].
pub fn to_grayscale(width: usize, height: usize, rgb: &[f64]) -> Result<GrayImage> {
    if rgb.len() != width * height * 3 {
        return Err(Error::Dimension {
            expected: width * height * 3,
            got: rgb.len(),
        });
    }
    if let Some(v) = rgb.iter().find(|v| !(0.0..=255.0).contains(*v)) {
        return Err(Error::param(format!("channel value {v} outside [0, 255]")));
    }
    let data = rgb.chunks_exact(3).map(|p| luma(p[0], p[1], p[2])).collect();
    GrayImage::new(width, height, data)
}

fn convert_dynamic(img: &image::DynamicImage) -> Result<GrayImage> {
    use image::DynamicImage as D;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let rgb: Vec<f64> = match img {
        D::ImageLuma8(_) | D::ImageLumaA8(_) | D::ImageRgb8(_) | D::ImageRgba8(_) => {
            img.to_rgb8().into_raw().into_iter().map(f64::from).collect()
        }
        D::ImageLuma16(_) | D::ImageLumaA16(_) | D::ImageRgb16(_) | D::ImageRgba16(_) => img
            .to_rgb16()
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 257.0)
            .collect(),
        _ => img
            .to_rgb32f()
            .into_raw()
            .into_iter()
            .map(|v| (f64::from(v) * 255.0).clamp(0.0, 255.0))
            .collect(),
    };
    to_grayscale(w, h, &rgb)
}

/// Decodes one file (TIF, PNG or BMP) into a grayscale image.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let decode_err = |message: String| Error::Decode {
        path: path.to_path_buf(),
        message,
    };
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    let img = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    convert_dynamic(&img)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    /// One subdirectory per class.
    Subdirs,
    /// Class encoded as the file-name prefix.
    #[default]
    Prefix,
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subdirs" => Ok(Layout::Subdirs),
            "prefix" => Ok(Layout::Prefix),
            other => Err(Error::param(format!("unknown layout `{other}`"))),
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layout::Subdirs => "subdirs",
            Layout::Prefix => "prefix",
        })
    }
}

/// Images with 0-based class ids into `class_names`.
#[derive(Clone, Debug)]
pub struct LabeledImageSet {
    pub images: Vec<GrayImage>,
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub paths: Vec<PathBuf>,
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Label of sample `i` as a class name.
    pub fn label_name(&self, i: usize) -> &str {
        &self.class_names[self.labels[i]]
    }
}

/// Class label encoded in a file name.
///
/// The stem is cut at the first non-alphanumeric character. A stem that is
/// entirely alphanumeric has its trailing digits removed instead, so that
/// `A12` yields `A`.
pub fn label_from_filename(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    match stem.find(|c: char| !c.is_alphanumeric()) {
        Some(0) => None,
        Some(i) => Some(stem[..i].to_string()),
        None => {
            let trimmed = stem.trim_end_matches(|c: char| c.is_ascii_digit());
            if trimmed.is_empty() {
                Some(stem.to_string())
            } else {
                Some(trimmed.to_string())
            }
        }
    }
}

fn is_image_file(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
            .unwrap_or(false)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.sort();
    Ok(entries)
}

/// Collects `(path, class name)` pairs in lexicographic path order without decoding.
pub fn scan_dataset(root: &Path, layout: Layout) -> Result<Vec<(PathBuf, String)>> {
    if !root.is_dir() {
        return Err(Error::Dataset(format!(
            "dataset root {} is not a directory",
            root.display()
        )));
    }
    let mut files = Vec::new();
    match layout {
        Layout::Subdirs => {
            for dir in sorted_entries(root)?.into_iter().filter(|p| p.is_dir()) {
                let class = dir
                    .file_name()
                    .and_then(|n| n.to_str())
                    .ok_or_else(|| Error::Dataset(format!("non-UTF-8 class directory {}", dir.display())))?
                    .to_string();
                let before = files.len();
                for f in sorted_entries(&dir)?.into_iter().filter(|p| is_image_file(p)) {
                    files.push((f, class.clone()));
                }
                if files.len() == before {
                    return Err(Error::Dataset(format!("class `{class}` has no images")));
                }
            }
        }
        Layout::Prefix => {
            for f in sorted_entries(root)?.into_iter().filter(|p| is_image_file(p)) {
                let class = label_from_filename(&f)
                    .ok_or_else(|| Error::Dataset(format!("cannot derive a class label from {}", f.display())))?;
                files.push((f, class));
            }
        }
    }
    if files.is_empty() {
        return Err(Error::Dataset(format!("no images found under {}", root.display())));
    }
    Ok(files)
}

/// Loads and decodes a corpus. Decoding runs in parallel; the result order is
/// the lexicographic path order regardless.
pub fn load_dataset(root: &Path, layout: Layout, resize: Option<(usize, usize)>) -> Result<LabeledImageSet> {
    let files = scan_dataset(root, layout)?;
    let class_names: Vec<String> = files
        .iter()
        .map(|(_, c)| c.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = class_names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();

    let images = files
        .par_iter()
        .map(|(path, _)| {
            let img = load_image(path)?;
            match resize {
                Some((w, h)) => img.resize_area(w, h),
                None => Ok(img),
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let labels = files.iter().map(|(_, c)| index[c.as_str()]).collect();
    let paths = files.into_iter().map(|(p, _)| p).collect();
    Ok(LabeledImageSet {
        images,
        labels,
        class_names,
        paths,
    })
}

/// Parses `WxH`.
pub fn parse_size(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::param(format!("expected WxH, got `{s}`")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::param(format!("bad size component `{v}`")))
    };
    Ok((parse(w)?, parse(h)?))
}
