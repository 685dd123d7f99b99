//! Supervised per-pixel classification.
//!
//! The production classifier is a Gaussian maximum-likelihood model: one
//! full-covariance normal per class plus a prior, scored with the log-density
//! discriminant
//!
//! ```text
//! g_c(x) = ln p_c - 1/2 ln|S_c| - 1/2 (x - m_c)' S_c^-1 (x - m_c)
//! ```
//!
//! A brute-force k-nearest-neighbour classifier over the same training rows is
//! provided as an independent cross-check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{for_each_row_block, Workers};
use crate::raster::{ClassLegend, ClassMap, RasterGrid, CLASS_NODATA};
use crate::spectral::normalized_difference_value;

/// Ground-truth point in map coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub x: f64,
    pub y: f64,
    pub class_id: u8,
}

/// Which per-pixel features are fed to the classifiers.
///
/// Raw band values always come first; `ndvi` appends one normalized-difference
/// column computed from the given 0-based `(nir, red)` bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeatureOptions {
    pub ndvi: Option<(usize, usize)>,
}

impl FeatureOptions {
    pub fn feature_count(&self, band_count: usize) -> usize {
        band_count + usize::from(self.ndvi.is_some())
    }

    pub fn feature_names(&self, raster: &RasterGrid) -> Vec<String> {
        let mut names = raster.band_names().to_vec();
        if self.ndvi.is_some() {
            names.push("ndvi".to_string());
        }
        names
    }

    fn check(&self, raster: &RasterGrid) -> Result<()> {
        if let Some((nir, red)) = self.ndvi {
            if nir >= raster.band_count() || red >= raster.band_count() {
                return Err(Error::Config(format!(
                    "ndvi bands ({nir}, {red}) out of range for {} band(s)",
                    raster.band_count()
                )));
            }
        }
        Ok(())
    }

    /// Fills `out` with the features of pixel `idx`; false for nodata or non-finite pixels.
    #[inline]
    fn read(&self, raster: &RasterGrid, idx: usize, out: &mut [f64]) -> bool {
        let bands = raster.band_count();
        for (b, o) in out[..bands].iter_mut().enumerate() {
            let v = raster.value_at(b, idx);
            if raster.is_nodata_value(v) || !v.is_finite() {
                return false;
            }
            *o = v;
        }
        if let Some((nir, red)) = self.ndvi {
            match normalized_difference_value(out[nir], out[red]) {
                Some(v) => out[bands] = v as f64,
                None => return false,
            }
        }
        true
    }
}

/// Training design matrix: one row per sample, one column per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    names: Vec<String>,
    values: Vec<f64>,
    labels: Vec<u8>,
    legend: ClassLegend,
    options: FeatureOptions,
}

impl FeatureMatrix {
    /// Builds a matrix of raw-band features from explicit rows.
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>, legend: ClassLegend) -> Result<Self> {
        Self::with_options(names, rows, labels, legend, FeatureOptions::default())
    }

    pub fn with_options(
        names: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        legend: ClassLegend,
        options: FeatureOptions,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let cols = names.len();
        if cols == 0 {
            return Err(Error::Validation("feature matrix needs at least one column".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Validation(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        if let Some(&l) = labels.iter().find(|&&l| !legend.contains(l)) {
            return Err(Error::Validation(format!("label {l} is not in the legend")));
        }
        Ok(FeatureMatrix {
            names,
            values,
            labels,
            legend,
            options,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn legend(&self) -> &ClassLegend {
        &self.legend
    }

    pub fn options(&self) -> FeatureOptions {
        self.options
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols())
    }

    /// Row count per legend entry, in legend order.
    pub fn label_histogram(&self) -> Vec<usize> {
        let table = self.legend.position_table();
        let mut h = vec![0; self.legend.len()];
        for &l in &self.labels {
            if let Some(i) = table[l as usize] {
                h[i] += 1;
            }
        }
        h
    }
}

/// Samples left out of a training matrix, by input position.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkipReport {
    pub outside: Vec<usize>,
    pub nodata: Vec<usize>,
}

impl SkipReport {
    pub fn is_empty(&self) -> bool {
        self.outside.is_empty() && self.nodata.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractOptions {
    /// Fail on the first sample outside the raster instead of skipping it.
    pub strict: bool,
    pub features: FeatureOptions,
}

/// Looks up the feature vector under each sample.
pub fn extract_training(
    raster: &RasterGrid,
    samples: &[LabeledSample],
    legend: &ClassLegend,
    opts: ExtractOptions,
) -> Result<(FeatureMatrix, SkipReport)> {
    opts.features.check(raster)?;
    let n_cols = opts.features.feature_count(raster.band_count());
    let mut report = SkipReport::default();
    let mut values = Vec::with_capacity(samples.len() * n_cols);
    let mut labels = Vec::with_capacity(samples.len());
    let mut buf = vec![0.0; n_cols];
    for (i, s) in samples.iter().enumerate() {
        if !legend.contains(s.class_id) {
            return Err(Error::Validation(format!(
                "sample {i} has class {} which is not in the legend",
                s.class_id
            )));
        }
        let Some((col, row)) = raster.map_to_pixel(s.x, s.y)? else {
            if opts.strict {
                return Err(Error::Validation(format!(
                    "sample {i} at ({}, {}) lies outside the raster",
                    s.x, s.y
                )));
            }
            report.outside.push(i);
            continue;
        };
        if !opts.features.read(raster, row * raster.width() + col, &mut buf) {
            report.nodata.push(i);
            continue;
        }
        values.extend_from_slice(&buf);
        labels.push(s.class_id);
    }
    if labels.is_empty() {
        return Err(Error::EmptyTraining(format!(
            "{} outside the raster, {} on nodata pixels",
            report.outside.len(),
            report.nodata.len()
        )));
    }
    let fm = FeatureMatrix {
        names: opts.features.feature_names(raster),
        values,
        labels,
        legend: legend.clone(),
        options: opts.features,
    };
    Ok((fm, report))
}

/// Diagonal loading added to every class covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ridge {
    Absolute(f64),
    /// Multiple of the mean diagonal of the pooled covariance of all rows.
    Relative(f64),
}

impl Default for Ridge {
    fn default() -> Self {
        Ridge::Relative(1e-6)
    }
}

/// Trained per-class Gaussian statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_id: u8,
    pub n_samples: usize,
    pub mean: Vec<f64>,
    /// Row-major, ridge included.
    pub covariance: Vec<f64>,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Factor {
    /// Lower Cholesky factor, row-major.
    chol: Vec<f64>,
    /// ln p - 1/2 ln|S|
    offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianClassModel {
    legend: ClassLegend,
    band_names: Vec<String>,
    features: FeatureOptions,
    ridge: f64,
    classes: Vec<ClassStats>,
    factors: Vec<Factor>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    legend: ClassLegend,
    band_names: Vec<String>,
    features: FeatureOptions,
    ridge: f64,
    classes: Vec<ClassStats>,
}

/// Lower-triangular `L` with `L L' = a`, or `None` if `a` is not positive definite.
pub(crate) fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// `|L^-1 d|^2`, the quadratic form `d' (L L')^-1 d`.
#[inline]
fn quad_form(chol: &[f64], d: &mut [f64]) -> f64 {
    let n = d.len();
    let mut q = 0.0;
    for i in 0..n {
        let row = &chol[i * n..i * n + i];
        let mut s = d[i];
        for (lk, zk) in row.iter().zip(&d[..i]) {
            s -= lk * zk;
        }
        let z = s / chol[i * n + i];
        d[i] = z;
        q += z * z;
    }
    q
}

impl GaussianClassModel {
    /// Assembles a model from per-class statistics, factorizing each covariance.
    ///
    /// Priors are normalized to sum to one; classes are ordered by id.
    pub fn from_parts(
        legend: ClassLegend,
        band_names: Vec<String>,
        features: FeatureOptions,
        ridge: f64,
        mut classes: Vec<ClassStats>,
    ) -> Result<Self> {
        let dim = band_names.len();
        if dim == 0 {
            return Err(Error::Validation("model has no features".into()));
        }
        if classes.is_empty() {
            return Err(Error::Validation("model has no classes".into()));
        }
        classes.sort_by_key(|c| c.class_id);
        for w in classes.windows(2) {
            if w[0].class_id == w[1].class_id {
                return Err(Error::Validation(format!("class {} appears twice", w[0].class_id)));
            }
        }
        let mut total_prior = 0.0;
        for c in &classes {
            if !legend.contains(c.class_id) {
                return Err(Error::Validation(format!("class {} is not in the legend", c.class_id)));
            }
            if c.mean.len() != dim || c.covariance.len() != dim * dim {
                return Err(Error::Validation(format!(
                    "class {} statistics do not match {dim} features",
                    c.class_id
                )));
            }
            if !(c.prior > 0.0 && c.prior.is_finite()) {
                return Err(Error::Validation(format!(
                    "class {} prior {} must be positive",
                    c.class_id, c.prior
                )));
            }
            if c.mean.iter().chain(&c.covariance).any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "class {} has non-finite statistics",
                    c.class_id
                )));
            }
            for i in 0..dim {
                for j in 0..i {
                    if c.covariance[i * dim + j] != c.covariance[j * dim + i] {
                        return Err(Error::Validation(format!(
                            "class {} covariance is not symmetric",
                            c.class_id
                        )));
                    }
                }
            }
            total_prior += c.prior;
        }
        for c in &mut classes {
            c.prior /= total_prior;
        }
        let factors = classes
            .iter()
            .map(|c| {
                let chol = cholesky(&c.covariance, dim).ok_or_else(|| {
                    Error::Training(format!("covariance of class {} is not positive definite", c.class_id))
                })?;
                let log_det: f64 = (0..dim).map(|i| chol[i * dim + i].ln()).sum::<f64>() * 2.0;
                Ok(Factor {
                    chol,
                    offset: c.prior.ln() - 0.5 * log_det,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GaussianClassModel {
            legend,
            band_names,
            features,
            ridge,
            classes,
            factors,
        })
    }

    pub fn legend(&self) -> &ClassLegend {
        &self.legend
    }

    pub fn band_names(&self) -> &[String] {
        &self.band_names
    }

    pub fn features(&self) -> FeatureOptions {
        self.features
    }

    pub fn dim(&self) -> usize {
        self.band_names.len()
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn classes(&self) -> &[ClassStats] {
        &self.classes
    }

    pub fn class_ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.classes.iter().map(|c| c.class_id)
    }

    /// Classes trained on fewer than `dim + 1` samples, whose covariance is carried by the ridge.
    pub fn sparse_classes(&self) -> Vec<u8> {
        self.classes
            .iter()
            .filter(|c| c.n_samples < self.dim() + 1)
            .map(|c| c.class_id)
            .collect()
    }

    /// Same class statistics with replacement priors (normalized), in class-id order.
    pub fn with_priors(&self, priors: &[f64]) -> Result<Self> {
        if priors.len() != self.classes.len() {
            return Err(Error::Validation(format!(
                "{} priors for {} classes",
                priors.len(),
                self.classes.len()
            )));
        }
        let classes = self
            .classes
            .iter()
            .zip(priors)
            .map(|(c, &p)| ClassStats { prior: p, ..c.clone() })
            .collect();
        Self::from_parts(
            self.legend.clone(),
            self.band_names.clone(),
            self.features,
            self.ridge,
            classes,
        )
    }

    fn position(&self, class_id: u8) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c.class_id == class_id)
            .ok_or_else(|| Error::Validation(format!("class {class_id} is not in the model")))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Validation(format!(
                "feature vector has {} values, model expects {}",
                x.len(),
                self.dim()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("feature vector is not finite".into()));
        }
        Ok(())
    }

    /// Squared Mahalanobis distance of `x` from the mean of `class_id`.
    pub fn mahalanobis_sq(&self, x: &[f64], class_id: u8) -> Result<f64> {
        self.check_dim(x)?;
        let p = self.position(class_id)?;
        let mut d: Vec<f64> = x.iter().zip(&self.classes[p].mean).map(|(a, m)| a - m).collect();
        Ok(quad_form(&self.factors[p].chol, &mut d))
    }

    /// Log-density discriminant `g_c(x)`; larger is more likely.
    pub fn discriminant(&self, x: &[f64], class_id: u8) -> Result<f64> {
        let q = self.mahalanobis_sq(x, class_id)?;
        Ok(self.factors[self.position(class_id)?].offset - 0.5 * q)
    }

    /// Class with the largest discriminant; ties go to the lowest class id.
    #[inline]
    fn classify_into(&self, x: &[f64], scratch: &mut [f64]) -> u8 {
        let mut best = f64::NEG_INFINITY;
        let mut best_id = self.classes[0].class_id;
        for (c, f) in self.classes.iter().zip(&self.factors) {
            for ((s, xi), m) in scratch.iter_mut().zip(x).zip(&c.mean) {
                *s = xi - m;
            }
            let g = f.offset - 0.5 * quad_form(&f.chol, scratch);
            if g > best {
                best = g;
                best_id = c.class_id;
            }
        }
        best_id
    }

    pub fn classify_vector(&self, x: &[f64]) -> Result<u8> {
        self.check_dim(x)?;
        let mut scratch = vec![0.0; x.len()];
        Ok(self.classify_into(x, &mut scratch))
    }

    pub fn to_json(&self) -> Result<String> {
        crate::io::to_canonical_json(&ModelFile {
            legend: self.legend.clone(),
            band_names: self.band_names.clone(),
            features: self.features,
            ridge: self.ridge,
            classes: self.classes.clone(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Validation(format!("model file: {e}")))?;
        Self::from_parts(f.legend, f.band_names, f.features, f.ridge, f.classes)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str::<serde_json::Value>(&text).map_err(|e| Error::format(path, e.to_string()))?;
        Self::from_json(&text)
    }
}

/// Fits per-class mean, covariance (n-1 denominator, plus ridge on the diagonal) and prior.
///
/// Legend classes without any rows are left out of the model.
pub fn train_max_likelihood(features: &FeatureMatrix, ridge: Ridge) -> Result<GaussianClassModel> {
    let dim = features.n_cols();
    if features.n_rows() == 0 {
        return Err(Error::EmptyTraining("feature matrix has no rows".into()));
    }
    if let Some(i) = features.rows().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::Validation(format!("training row {i} has a non-finite feature")));
    }
    let ridge = match ridge {
        Ridge::Absolute(r) => r,
        Ridge::Relative(f) => {
            let all: Vec<usize> = (0..features.n_rows()).collect();
            let (_, cov) = mean_and_covariance(features, &all);
            let mean_diag = (0..dim).map(|i| cov[i * dim + i]).sum::<f64>() / dim as f64;
            if mean_diag > 0.0 && mean_diag.is_finite() {
                f * mean_diag
            } else {
                f
            }
        }
    };
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Config(format!(
            "ridge {ridge} must be a non-negative finite number"
        )));
    }

    let mut classes = Vec::new();
    for id in features.legend().ids() {
        let rows: Vec<usize> = (0..features.n_rows()).filter(|&i| features.labels()[i] == id).collect();
        if rows.is_empty() {
            continue;
        }
        if rows.len() < 2 {
            return Err(Error::Training(format!(
                "class {id} has {} sample(s); at least 2 are needed",
                rows.len()
            )));
        }
        let (mean, mut covariance) = mean_and_covariance(features, &rows);
        for i in 0..dim {
            covariance[i * dim + i] += ridge;
        }
        classes.push(ClassStats {
            class_id: id,
            n_samples: rows.len(),
            mean,
            covariance,
            prior: rows.len() as f64,
        });
    }
    let total: f64 = classes.iter().map(|c| c.prior).sum();
    for c in &mut classes {
        c.prior /= total;
    }
    GaussianClassModel::from_parts(
        features.legend().clone(),
        features.names().to_vec(),
        features.options(),
        ridge,
        classes,
    )
}

fn mean_and_covariance(features: &FeatureMatrix, rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let dim = features.n_cols();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; dim];
    for &r in rows {
        for (m, v) in mean.iter_mut().zip(features.row(r)) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; dim * dim];
    if rows.len() < 2 {
        return (mean, cov);
    }
    for &r in rows {
        let row = features.row(r);
        for i in 0..dim {
            let di = row[i] - mean[i];
            for j in 0..=i {
                cov[i * dim + j] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..=i {
            let v = cov[i * dim + j] / (n - 1.0);
            cov[i * dim + j] = v;
            cov[j * dim + i] = v;
        }
    }
    (mean, cov)
}

fn check_raster_for(features: FeatureOptions, dim: usize, raster: &RasterGrid) -> Result<()> {
    features.check(raster)?;
    let got = features.feature_count(raster.band_count());
    if got != dim {
        return Err(Error::Validation(format!(
            "raster yields {got} features per pixel, classifier expects {dim}"
        )));
    }
    Ok(())
}

/// Maximum-likelihood class map. Nodata pixels stay nodata.
pub fn predict(model: &GaussianClassModel, raster: &RasterGrid) -> Result<ClassMap> {
    predict_with(model, raster, Workers::default())
}

pub fn predict_with(model: &GaussianClassModel, raster: &RasterGrid, workers: Workers) -> Result<ClassMap> {
    check_raster_for(model.features, model.dim(), raster)?;
    let width = raster.width();
    let dim = model.dim();
    let mut out = vec![CLASS_NODATA; raster.pixel_count()];
    for_each_row_block(&mut out, width, workers, |row0, block| {
        let mut x = vec![0.0; dim];
        let mut scratch = vec![0.0; dim];
        let base = row0 * width;
        for (i, o) in block.iter_mut().enumerate() {
            if model.features.read(raster, base + i, &mut x) {
                *o = model.classify_into(&x, &mut scratch);
            }
        }
    });
    ClassMap::from_values(raster, out, model.legend.clone())
}

/// Majority vote among the `k` Euclidean-nearest training rows.
///
/// Neighbours at equal distance are ordered by class id, and vote ties go to
/// the lowest class id.
pub fn knn_predict(features: &FeatureMatrix, raster: &RasterGrid, k: usize) -> Result<ClassMap> {
    knn_predict_with(features, raster, k, Workers::default())
}

pub fn knn_predict_with(features: &FeatureMatrix, raster: &RasterGrid, k: usize, workers: Workers) -> Result<ClassMap> {
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::Config(format!("k must be a positive odd number, got {k}")));
    }
    if k > features.n_rows() {
        return Err(Error::Config(format!(
            "k = {k} exceeds the {} training rows",
            features.n_rows()
        )));
    }
    check_raster_for(features.options(), features.n_cols(), raster)?;
    let dim = features.n_cols();
    let width = raster.width();
    let n_classes = features.legend().len();
    let table = features.legend().position_table();
    let ids: Vec<u8> = features.legend().ids().collect();
    let mut out = vec![CLASS_NODATA; raster.pixel_count()];
    for_each_row_block(&mut out, width, workers, |row0, block| {
        let mut x = vec![0.0; dim];
        let mut best: Vec<(f64, u8)> = Vec::with_capacity(k + 1);
        let mut votes = vec![0usize; n_classes];
        let base = row0 * width;
        for (i, o) in block.iter_mut().enumerate() {
            if !features.options().read(raster, base + i, &mut x) {
                continue;
            }
            best.clear();
            for (row, &label) in features.rows().zip(features.labels()) {
                let d: f64 = row.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                let key = (d, label);
                if best.len() == k && !lt(key, best[k - 1]) {
                    continue;
                }
                let pos = best.partition_point(|&e| !lt(key, e));
                best.insert(pos, key);
                best.truncate(k);
            }
            votes.iter_mut().for_each(|v| *v = 0);
            for &(_, label) in &best {
                if let Some(p) = table[label as usize] {
                    votes[p] += 1;
                }
            }
            let mut winner = (0usize, u8::MAX);
            for (p, &v) in votes.iter().enumerate() {
                if v > winner.0 || (v == winner.0 && v > 0 && ids[p] < winner.1) {
                    winner = (v, ids[p]);
                }
            }
            *o = winner.1;
        }
    });
    ClassMap::from_values(raster, out, features.legend().clone())
}

#[inline]
fn lt(a: (f64, u8), b: (f64, u8)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{GeoTransform, RasterData};

    fn legend2() -> ClassLegend {
        ClassLegend::new(vec![(1, "A".into()), (2, "B".into())]).unwrap()
    }

    fn fm_1d(values: &[(f64, u8)]) -> FeatureMatrix {
        FeatureMatrix::new(
            vec!["b".into()],
            values.iter().map(|&(v, _)| vec![v]).collect(),
            values.iter().map(|&(_, l)| l).collect(),
            legend2(),
        )
        .unwrap()
    }

    fn line_raster(values: &[f32], nodata: Option<f64>) -> RasterGrid {
        RasterGrid::with_metadata(
            values.len(),
            1,
            1,
            nodata,
            GeoTransform::north_up(0.0, 0.0, 10.0, -10.0),
            "c",
            vec!["b".into()],
            RasterData::F32(values.to_vec()),
        )
        .unwrap()
    }

    fn model_1d(means: &[(u8, f64)], var: f64) -> GaussianClassModel {
        let classes = means
            .iter()
            .map(|&(id, m)| ClassStats {
                class_id: id,
                n_samples: 10,
                mean: vec![m],
                covariance: vec![var],
                prior: 1.0,
            })
            .collect();
        GaussianClassModel::from_parts(legend2(), vec!["b".into()], FeatureOptions::default(), 0.0, classes).unwrap()
    }

    #[test]
    fn extract_direct_lookup() {
        let g = RasterGrid::new(
            2,
            1,
            3,
            GeoTransform::north_up(0.0, 0.0, 10.0, -10.0),
            "c",
            RasterData::F32(vec![0.1, 9.0, 0.2, 9.0, 0.3, 9.0]),
        )
        .unwrap();
        let s = [LabeledSample {
            x: 5.0,
            y: -5.0,
            class_id: 1,
        }];
        let (fm, rep) = extract_training(&g, &s, &legend2(), ExtractOptions::default()).unwrap();
        assert!(rep.is_empty());
        assert_eq!(fm.n_rows(), 1);
        let row: Vec<f64> = fm.row(0).to_vec();
        assert_eq!(row, vec![0.1f32 as f64, 0.2f32 as f64, 0.3f32 as f64]);
    }

    #[test]
    fn extract_outside_strict_and_lenient() {
        let g = line_raster(&[1.0, 2.0], Some(2.0));
        let s = [
            LabeledSample {
                x: 5.0,
                y: -5.0,
                class_id: 1,
            },
            LabeledSample {
                x: 500.0,
                y: -5.0,
                class_id: 1,
            },
            LabeledSample {
                x: 15.0,
                y: -5.0,
                class_id: 2,
            },
        ];
        let strict = ExtractOptions {
            strict: true,
            ..Default::default()
        };
        match extract_training(&g, &s, &legend2(), strict) {
            Err(Error::Validation(msg)) => assert!(msg.contains("sample 1"), "{msg}"),
            r => panic!("unexpected {r:?}"),
        }
        let (fm, rep) = extract_training(&g, &s, &legend2(), ExtractOptions::default()).unwrap();
        assert_eq!(fm.n_rows(), 1);
        assert_eq!(rep.outside, vec![1]);
        assert_eq!(rep.nodata, vec![2]);
        let all_out = [LabeledSample {
            x: -50.0,
            y: 0.0,
            class_id: 1,
        }];
        assert!(matches!(
            extract_training(&g, &all_out, &legend2(), ExtractOptions::default()),
            Err(Error::EmptyTraining(_))
        ));
    }

    #[test]
    fn zero_variance_class_collapses_to_ridge() {
        let m = train_max_likelihood(&fm_1d(&[(0.0, 1), (0.0, 1), (0.0, 1), (0.0, 1)]), Ridge::Absolute(1e-6)).unwrap();
        assert_eq!(m.classes()[0].mean, vec![0.0]);
        assert_eq!(m.classes()[0].covariance, vec![1e-6]);
    }

    #[test]
    fn two_point_class_variance() {
        let r = 1e-6;
        let m = train_max_likelihood(&fm_1d(&[(-1.0, 1), (1.0, 1)]), Ridge::Absolute(r)).unwrap();
        assert_eq!(m.classes()[0].mean, vec![0.0]);
        assert_eq!(m.classes()[0].covariance, vec![2.0 + r]);
        assert_eq!(m.classes()[0].prior, 1.0);
    }

    #[test]
    fn single_sample_class_is_training_error() {
        let fm = fm_1d(&[(0.0, 1), (1.0, 1), (2.0, 1), (5.0, 2)]);
        match train_max_likelihood(&fm, Ridge::Absolute(1e-6)) {
            Err(Error::Training(msg)) => assert!(msg.contains("class 2"), "{msg}"),
            r => panic!("unexpected {r:?}"),
        }
    }

    #[test]
    fn non_finite_feature_rejected() {
        let fm = fm_1d(&[(0.0, 1), (f64::NAN, 1)]);
        assert!(matches!(
            train_max_likelihood(&fm, Ridge::Absolute(1e-6)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn singular_covariance_without_ridge_fails() {
        let fm = fm_1d(&[(3.0, 1), (3.0, 1)]);
        assert!(matches!(
            train_max_likelihood(&fm, Ridge::Absolute(0.0)),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn relative_ridge_scales_with_data() {
        let fm = fm_1d(&[(0.0, 1), (2.0, 1), (10.0, 2), (12.0, 2)]);
        let m = train_max_likelihood(&fm, Ridge::Relative(1e-6)).unwrap();
        // pooled variance of {0, 2, 10, 12}: mean 6, ss = 36+16+16+36 = 104, /3
        assert!((m.ridge() - 1e-6 * 104.0 / 3.0).abs() < 1e-18);
        assert!((m.priors_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discriminant_values() {
        let m = GaussianClassModel::from_parts(
            ClassLegend::new(vec![(1, "A".into())]).unwrap(),
            vec!["b".into()],
            FeatureOptions::default(),
            0.0,
            vec![ClassStats {
                class_id: 1,
                n_samples: 5,
                mean: vec![0.0],
                covariance: vec![1.0],
                prior: 1.0,
            }],
        )
        .unwrap();
        assert_eq!(m.discriminant(&[1.0], 1).unwrap(), -0.5);
        assert_eq!(m.discriminant(&[0.0], 1).unwrap(), 0.0);
        assert!(matches!(m.discriminant(&[1.0, 2.0], 1), Err(Error::Validation(_))));

        let m = model_1d(&[(1, 0.0), (2, 10.0)], 4.0);
        let at_mean = m.discriminant(&[10.0], 2).unwrap();
        assert!((at_mean - (0.5f64.ln() - 0.5 * 4.0f64.ln())).abs() < 1e-15);
        assert_eq!(m.discriminant(&[5.0], 1).unwrap(), m.discriminant(&[5.0], 2).unwrap());
    }

    #[test]
    fn predict_nearest_mean_and_ties() {
        let m = model_1d(&[(1, 0.0), (2, 10.0)], 4.0);
        let g = line_raster(&[1.0, 5.0, -9.0, 9.0], Some(-9.0));
        let map = predict(&m, &g).unwrap();
        assert_eq!(map.values(), &[1, 1, CLASS_NODATA, 2]);
        assert_eq!(map.class_at(2), None);
    }

    #[test]
    fn predict_band_mismatch() {
        let m = model_1d(&[(1, 0.0), (2, 10.0)], 4.0);
        let g = RasterGrid::new(
            1,
            1,
            2,
            GeoTransform::north_up(0.0, 0.0, 1.0, -1.0),
            "c",
            RasterData::F32(vec![0.0, 0.0]),
        )
        .unwrap();
        assert!(matches!(predict(&m, &g), Err(Error::Validation(_))));
    }

    #[test]
    fn model_json_round_trip() {
        let fm = fm_1d(&[(0.0, 1), (1.0, 1), (4.0, 1), (10.0, 2), (12.0, 2), (11.0, 2)]);
        let m = train_max_likelihood(&fm, Ridge::default()).unwrap();
        let text = m.to_json().unwrap();
        assert_eq!(GaussianClassModel::from_json(&text).unwrap(), m);
        let top_keys: Vec<&str> = text
            .lines()
            .filter(|l| l.starts_with("  \""))
            .map(|l| l.trim().split('"').nth(1).unwrap())
            .collect();
        assert_eq!(top_keys, ["band_names", "classes", "features", "legend", "ridge"]);
    }

    #[test]
    fn knn_basics() {
        let fm = fm_1d(&[(0.0, 1), (0.2, 1), (1.0, 2), (5.0, 2)]);
        let g = line_raster(&[5.0, 0.1, 0.6], None);
        let m1 = knn_predict(&fm, &g, 1).unwrap();
        assert_eq!(m1.values()[0], 2);
        // neighbours of 0.6 at k=3: 0.2(A), 1.0(B), 0.0(A)
        let m3 = knn_predict(&fm, &g, 3).unwrap();
        assert_eq!(m3.values(), &[2, 1, 1]);
    }

    #[test]
    fn knn_equidistant_prefers_lowest_id() {
        let fm = fm_1d(&[(2.0, 2), (0.0, 1)]);
        let g = line_raster(&[1.0], None);
        assert_eq!(knn_predict(&fm, &g, 1).unwrap().values(), &[1]);
    }

    #[test]
    fn knn_parameter_errors() {
        let fm = fm_1d(&[(0.0, 1), (1.0, 2)]);
        let g = line_raster(&[1.0], None);
        assert!(matches!(knn_predict(&fm, &g, 2), Err(Error::Config(_))));
        assert!(matches!(knn_predict(&fm, &g, 3), Err(Error::Config(_))));
        assert!(matches!(knn_predict(&fm, &g, 0), Err(Error::Config(_))));
    }

    #[test]
    fn ndvi_feature_column() {
        let g = RasterGrid::new(
            1,
            1,
            2,
            GeoTransform::north_up(0.0, 0.0, 10.0, -10.0),
            "c",
            RasterData::F32(vec![0.8, 0.2]),
        )
        .unwrap();
        let opts = ExtractOptions {
            strict: true,
            features: FeatureOptions { ndvi: Some((0, 1)) },
        };
        let s = [LabeledSample {
            x: 5.0,
            y: -5.0,
            class_id: 1,
        }];
        let (fm, _) = extract_training(&g, &s, &legend2(), opts).unwrap();
        assert_eq!(fm.n_cols(), 3);
        assert_eq!(fm.names().last().unwrap(), "ndvi");
        assert!((fm.row(0)[2] - 0.6).abs() < 1e-6);
    }

    impl GaussianClassModel {
        fn priors_sum(&self) -> f64 {
            self.classes.iter().map(|c| c.prior).sum()
        }
    }
}
