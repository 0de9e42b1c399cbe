//! Plain-text feature files shared with external feature exporters.
//!
//! ```text
//! # extractor=lbp
//! # params=points=14,radius=4
//! # source=kimia:3f9c0e1d22aa7b10      (optional)
//! # dim=3
//! label,f0,f1,f2
//! A,12,0,7.5
//! ```
//!
//! UTF-8, LF line endings. Values are written with the shortest decimal that
//! parses back to the identical `f64`. Labels are non-empty and contain no
//! comma, `#` prefix or line break.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FeatureMeta {
    pub extractor: String,
    pub params: String,
    /// Fingerprint of the corpus the features were computed from.
    pub source: Option<String>,
}

/// `n × d` finite values with one class name per row.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
    labels: Vec<String>,
    pub meta: FeatureMeta,
}

fn check_text(what: &str, s: &str) -> Result<()> {
    if s.contains(['\n', '\r']) {
        return Err(Error::param(format!("{what} must not contain line breaks")));
    }
    Ok(())
}

fn check_label(s: &str) -> std::result::Result<(), String> {
    if s.is_empty() {
        Err("empty label".into())
    } else if s.contains([',', '\n', '\r']) {
        Err(format!("label `{s}` contains a comma or line break"))
    } else if s.starts_with('#') {
        Err(format!("label `{s}` starts with `#`"))
    } else {
        Ok(())
    }
}

impl FeatureMatrix {
    pub fn new(data: Array2<f64>, labels: Vec<String>, meta: FeatureMeta) -> Result<Self> {
        if labels.len() != data.nrows() {
            return Err(Error::Dimension {
                expected: data.nrows(),
                got: labels.len(),
            });
        }
        if data.ncols() == 0 {
            return Err(Error::param("feature dimension must be >= 1"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("feature values must be finite"));
        }
        for l in &labels {
            check_label(l).map_err(Error::Param)?;
        }
        check_text("extractor name", &meta.extractor)?;
        check_text("params", &meta.params)?;
        if let Some(s) = &meta.source {
            check_text("source", s)?;
        }
        Ok(FeatureMatrix { data, labels, meta })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<String>, meta: FeatureMeta) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension {
                expected: d,
                got: bad.len(),
            });
        }
        let n = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let data = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::param(e.to_string()))?;
        FeatureMatrix::new(data, labels, meta)
    }

    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Sorted distinct class names and each row's index into them.
    pub fn encode_labels(&self) -> (Vec<usize>, Vec<String>) {
        let classes: Vec<String> = self
            .labels
            .iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let ids = self
            .labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label present"))
            .collect();
        (ids, classes)
    }
}

/// 64-bit FNV-1a over the given strings, as 16 hex digits.
pub fn fingerprint<'a>(items: impl IntoIterator<Item = &'a str>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in items {
        for b in s.bytes().chain(std::iter::once(0)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

pub fn write_features(path: &Path, m: &FeatureMatrix) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    write_to(&mut w, m).map_err(io)?;
    w.flush().map_err(io)
}

fn write_to(w: &mut impl Write, m: &FeatureMatrix) -> std::io::Result<()> {
    writeln!(w, "# extractor={}", m.meta.extractor)?;
    writeln!(w, "# params={}", m.meta.params)?;
    if let Some(src) = &m.meta.source {
        writeln!(w, "# source={src}")?;
    }
    writeln!(w, "# dim={}", m.dim())?;
    write!(w, "label")?;
    for j in 0..m.dim() {
        write!(w, ",f{j}")?;
    }
    writeln!(w)?;
    for (label, row) in m.labels.iter().zip(m.data.rows()) {
        write!(w, "{label}")?;
        for v in row {
            // Display prints the shortest digits that round-trip.
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Renders a matrix exactly as [`write_features`] would.
pub fn to_string(m: &FeatureMatrix) -> String {
    let mut buf = Vec::new();
    write_to(&mut buf, m).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse(BufReader::new(file), path)
}

/// Parses feature-file text; `origin` is used in error messages.
pub fn parse(reader: impl BufRead, origin: &Path) -> Result<FeatureMatrix> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |expect: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((n, Ok(l))) => Ok((n, l)),
            Some((n, Err(e))) => Err(err(n, e.to_string())),
            None => Err(err(0, format!("unexpected end of file, expected {expect}"))),
        }
    };
    let directive = |(n, line): (usize, String), key: &str| -> Result<String> {
        let prefix = format!("# {key}=");
        line.strip_prefix(&prefix)
            .map(str::to_string)
            .ok_or_else(|| err(n, format!("expected `{prefix}...`")))
    };

    let extractor = directive(next("extractor line")?, "extractor")?;
    let params = directive(next("params line")?, "params")?;
    let (n, line) = next("dim line")?;
    let (source, dim_line) = match line.strip_prefix("# source=") {
        Some(s) => (Some(s.to_string()), next("dim line")?),
        None => (None, (n, line)),
    };
    let dim_n = dim_line.0;
    let dim_text = directive(dim_line, "dim")?;
    let dim: usize = dim_text
        .parse()
        .ok()
        .filter(|&d| d >= 1 && dim_text.bytes().all(|b| b.is_ascii_digit()))
        .ok_or_else(|| err(dim_n, format!("invalid dimension `{dim_text}`")))?;

    let (hn, header) = next("header line")?;
    let mut fields = header.split(',');
    let mut ok = fields.next() == Some("label");
    let mut count = 0;
    for (j, f) in fields.enumerate() {
        ok &= f.strip_prefix('f') == Some(j.to_string().as_str());
        count += 1;
    }
    if !ok || count != dim {
        return Err(err(hn, format!("header must be `label,f0,...,f{}`", dim - 1)));
    }

    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| err(n, e.to_string()))?;
        let mut fields = line.split(',');
        let label = fields.next().unwrap_or_default();
        check_label(label).map_err(|m| err(n, m))?;
        let before = values.len();
        for f in fields {
            let v: f64 = f.parse().map_err(|_| err(n, format!("invalid number `{f}`")))?;
            if !v.is_finite() {
                return Err(err(n, format!("non-finite value `{f}`")));
            }
            values.push(v);
        }
        let got = values.len() - before;
        if got != dim {
            return Err(err(n, format!("expected {dim} values, found {got}")));
        }
        labels.push(label.to_string());
    }

    let data = Array2::from_shape_vec((labels.len(), dim), values).expect("shape checked per row");
    FeatureMatrix::new(
        data,
        labels,
        FeatureMeta {
            extractor,
            params,
            source,
        },
    )
}
