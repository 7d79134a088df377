//! Datasets: synthetic generators, CSV ingestion and column standardization.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{DataError, DkrError, Result};
use crate::points::Points;
use crate::rng::{self, stream};

/// Where a dataset came from. Generators record the RNG and seed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub source: String,
    pub rng: Option<String>,
    pub seed: Option<u64>,
    /// Rows drawn from the outlier noise regime, in dataset order.
    pub outlier_rows: Vec<usize>,
}

/// `N ≥ 1` labeled observations with finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    covariates: Points,
    labels: Vec<f64>,
    provenance: Option<Provenance>,
}

impl Dataset {
    pub fn new(covariates: Points, labels: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(DkrError::invalid(
                "dataset must contain at least one observation",
            ));
        }
        if covariates.len() != labels.len() {
            return Err(DkrError::invalid(format!(
                "{} covariate rows but {} labels",
                covariates.len(),
                labels.len()
            )));
        }
        if let Some(i) = labels.iter().position(|y| !y.is_finite()) {
            return Err(DataError::NonFinite {
                row: i,
                column: covariates.dim(),
            }
            .into());
        }
        if let Some(k) = covariates.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(DataError::NonFinite {
                row: k / covariates.dim(),
                column: k % covariates.dim(),
            }
            .into());
        }
        Ok(Dataset {
            covariates,
            labels,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.covariates.dim()
    }

    pub fn covariates(&self) -> &Points {
        &self.covariates
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Rows at `indices`, in that order. Provenance is dropped.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(DkrError::invalid(format!(
                "row index {bad} out of range for {} rows",
                self.len()
            )));
        }
        Dataset::new(
            self.covariates.select(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    None,
    Gaussian { sigma: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::None => Ok(()),
            NoiseSpec::Gaussian { sigma } if sigma.is_finite() && sigma >= 0.0 => Ok(()),
            NoiseSpec::Gaussian { sigma } => Err(DkrError::invalid(format!(
                "noise standard deviation must be nonnegative, got {sigma}"
            ))),
            NoiseSpec::Uniform { lo, hi } if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(()),
            NoiseSpec::Uniform { lo, hi } => Err(DkrError::invalid(format!(
                "uniform noise needs lo <= hi, got [{lo}, {hi}]"
            ))),
        }
    }

    fn sample(&self, rng: &mut ChaCha20Rng) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            NoiseSpec::Uniform { lo, hi } => {
                if lo == hi {
                    lo
                } else {
                    rng.random_range(lo..hi)
                }
            }
        }
    }

    fn describe(&self) -> String {
        match *self {
            NoiseSpec::None => "none".into(),
            NoiseSpec::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            NoiseSpec::Uniform { lo, hi } => format!("uniform({lo},{hi})"),
        }
    }
}

/// `sin(x)/x`, with value 1 at the origin.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Noise-free regression surface `sinc(20 x1 − 10) · sinc(20 x2 − 10)`.
pub fn sinc_surface(x: &[f64]) -> f64 {
    sinc(20.0 * x[0] - 10.0) * sinc(20.0 * x[1] - 10.0)
}

/// `n` points uniform on the unit square with labels `sinc_surface(x) + ε`.
///
/// Covariates and noise come from separate streams, so the same seed gives the
/// same covariates whatever the noise model.
pub fn gen_sinc(n: usize, noise: NoiseSpec, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(DkrError::invalid("sample size must be at least 1"));
    }
    noise.validate()?;
    let mut cov_rng = rng::stream_rng(seed, stream::TRAIN);
    let mut noise_rng = rng::stream_rng(seed, stream::OUTLIER);
    let mut values = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x = [cov_rng.random::<f64>(), cov_rng.random::<f64>()];
        values.extend_from_slice(&x);
        labels.push(sinc_surface(&x) + noise.sample(&mut noise_rng));
    }
    Ok(
        Dataset::new(Points::new(2, values)?, labels)?.with_provenance(Provenance {
            source: format!("sinc(noise={})", noise.describe()),
            rng: Some(rng::RNG_NAME.into()),
            seed: Some(seed),
            outlier_rows: Vec::new(),
        }),
    )
}

/// `n_clean` rows with Gaussian noise `σ` plus `n_outlier` rows with uniform
/// noise on `[lo, hi]`, shuffled together. Outlier rows are listed in the
/// provenance.
pub fn gen_sinc_mixture(
    n_clean: usize,
    n_outlier: usize,
    sigma: f64,
    lo: f64,
    hi: f64,
    seed: u64,
) -> Result<Dataset> {
    let total = n_clean + n_outlier;
    if total == 0 {
        return Err(DkrError::invalid("mixture needs at least one row"));
    }
    let clean_noise = NoiseSpec::Gaussian { sigma };
    let outlier_noise = NoiseSpec::Uniform { lo, hi };
    clean_noise.validate()?;
    outlier_noise.validate()?;

    let mut rows: Vec<(f64, f64, f64, bool)> = Vec::with_capacity(total);
    for (count, noise, salt, is_outlier) in [
        (n_clean, clean_noise, 0u64, false),
        (n_outlier, outlier_noise, 1u64, true),
    ] {
        if count == 0 {
            continue;
        }
        let part = gen_sinc(count, noise, rng::derive_seed(seed, salt))?;
        for (x, &y) in part.covariates().rows().zip(part.labels()) {
            rows.push((x[0], x[1], y, is_outlier));
        }
    }
    rows.shuffle(&mut rng::stream_rng(seed, stream::SHUFFLE));

    let values = rows.iter().flat_map(|r| [r.0, r.1]).collect();
    let labels = rows.iter().map(|r| r.2).collect();
    let outlier_rows = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.3)
        .map(|(i, _)| i)
        .collect();
    Ok(Dataset::new(Points::new(2, values)?, labels)?.with_provenance(Provenance {
        source: format!(
            "sinc-mixture(clean={n_clean} gaussian(sigma={sigma}), outliers={n_outlier} uniform({lo},{hi}))"
        ),
        rng: Some(rng::RNG_NAME.into()),
        seed: Some(seed),
        outlier_rows,
    }))
}

/// Linear model `y = xᵀβ + ε` with `x ~ N(0, I_d)`, `β_k ~ U[0, 1]` and
/// `ε ~ N(0, σ²)`. Returns the data and the true `β`.
pub fn gen_linear(n: usize, d: usize, sigma: f64, seed: u64) -> Result<(Dataset, Vec<f64>)> {
    if n == 0 || d == 0 {
        return Err(DkrError::invalid("gen_linear needs n >= 1 and d >= 1"));
    }
    let noise = Normal::new(0.0, sigma).map_err(|_| {
        DkrError::invalid(format!(
            "noise standard deviation must be nonnegative, got {sigma}"
        ))
    })?;
    let mut beta_rng = rng::stream_rng(seed, stream::COEFFICIENTS);
    let beta: Vec<f64> = (0..d).map(|_| beta_rng.random::<f64>()).collect();
    let mut cov_rng = rng::stream_rng(seed, stream::TRAIN);
    let mut noise_rng = rng::stream_rng(seed, stream::OUTLIER);
    let mut values = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let start = values.len();
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut cov_rng);
            values.push(z);
        }
        let signal: f64 = values[start..].iter().zip(&beta).map(|(x, b)| x * b).sum();
        let eps = if sigma == 0.0 {
            0.0
        } else {
            noise.sample(&mut noise_rng)
        };
        labels.push(signal + eps);
    }
    let data = Dataset::new(Points::new(d, values)?, labels)?.with_provenance(Provenance {
        source: format!("linear(d={d}, sigma={sigma})"),
        rng: Some(rng::RNG_NAME.into()),
        seed: Some(seed),
        outlier_rows: Vec::new(),
    });
    Ok((data, beta))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    /// A bare nonnegative integer is a column index; anything else is a name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.trim().to_string()),
        })
    }
}

/// Comma-separated, `.` decimal point, no quoting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsvOptions {
    pub has_header: bool,
}

struct Table {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path, options: CsvOptions) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::MissingFile {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let header = if options.has_header {
        lines.next().map(|(_, l)| {
            l.split(',')
                .map(|f| f.trim().to_string())
                .collect::<Vec<_>>()
        })
    } else {
        None
    };
    let mut width = header.as_ref().map(Vec::len);
    let mut rows = Vec::new();
    for (line_no, line) in lines {
        let row = line_no + 1;
        if line.contains('"') || line.contains('\'') {
            return Err(DataError::Quoted { row }.into());
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(DataError::RaggedRow {
                row,
                expected,
                found: fields.len(),
            }
            .into());
        }
        let values = fields
            .iter()
            .enumerate()
            .map(|(column, f)| {
                let v: f64 = f.trim().parse().map_err(|_| DataError::NonNumeric {
                    row,
                    column,
                    value: f.to_string(),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(DataError::NonFinite { row, column })
                }
            })
            .collect::<std::result::Result<Vec<f64>, DataError>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(DataError::EmptyTable.into());
    }
    Ok(Table { header, rows })
}

/// Reads a numeric CSV and splits out the label column.
///
/// Row numbers in errors are 1-based line numbers of the file.
pub fn load_csv(
    path: impl AsRef<Path>,
    label: &LabelColumn,
    options: CsvOptions,
) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path, options)?;
    let width = table.rows[0].len();
    let label_index = match label {
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => return Err(DataError::MissingLabelColumn(i.to_string()).into()),
        LabelColumn::Name(name) => table
            .header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| DataError::MissingLabelColumn(name.clone()))?,
    };
    if width < 2 {
        return Err(DataError::NoCovariates.into());
    }
    let mut values = Vec::with_capacity(table.rows.len() * (width - 1));
    let mut labels = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        for (j, &v) in row.iter().enumerate() {
            if j == label_index {
                labels.push(v);
            } else {
                values.push(v);
            }
        }
    }
    Ok(
        Dataset::new(Points::new(width - 1, values)?, labels)?.with_provenance(Provenance {
            source: format!("csv:{}", path.display()),
            ..Provenance::default()
        }),
    )
}

/// Reads a numeric CSV whose columns are all covariates.
pub fn load_points_csv(path: impl AsRef<Path>, options: CsvOptions) -> Result<Points> {
    let table = read_table(path.as_ref(), options)?;
    let dim = table.rows[0].len();
    Points::new(dim, table.rows.into_iter().flatten().collect())
}

/// Writes covariates then the label as the last column. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset, header: bool) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    if header {
        let names: Vec<String> = (0..data.dim())
            .map(|j| format!("x{j}"))
            .chain(["y".to_string()])
            .collect();
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for (x, y) in data.covariates().rows().zip(data.labels()) {
        for v in x {
            write!(out, "{v},").expect("writing to a String cannot fail");
        }
        writeln!(out, "{y}").expect("writing to a String cannot fail");
    }
    std::fs::write(path, out).map_err(|e| DkrError::io(path, e))
}

/// Per-column affine map `(x − mean) / scale` fitted on a training set.
///
/// Scales are sample standard deviations (denominator `N − 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn apply_points(&self, points: &Points) -> Result<Points> {
        points.check_dim(self.means.len())?;
        let d = self.means.len();
        let values = points
            .as_slice()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.means[k % d]) / self.scales[k % d])
            .collect();
        Points::new(d, values)
    }

    /// Transforms covariates; labels pass through.
    pub fn apply(&self, data: &Dataset) -> Result<Dataset> {
        let mut out = Dataset::new(
            self.apply_points(data.covariates())?,
            data.labels().to_vec(),
        )?;
        out.provenance = data.provenance.clone();
        Ok(out)
    }
}

pub fn standardize(data: &Dataset) -> Result<(Dataset, Standardizer)> {
    let n = data.len();
    if n < 2 {
        return Err(DkrError::invalid("standardization needs at least two rows"));
    }
    let d = data.dim();
    let mut means = vec![0.0; d];
    for x in data.covariates().rows() {
        for (m, v) in means.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut scales = vec![0.0; d];
    for x in data.covariates().rows() {
        for ((s, v), m) in scales.iter_mut().zip(x).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    for (column, s) in scales.iter_mut().enumerate() {
        *s = (*s / (n - 1) as f64).sqrt();
        if *s <= 0.0 || s.is_nan() {
            return Err(DataError::ZeroVariance { column }.into());
        }
    }
    let transform = Standardizer { means, scales };
    Ok((transform.apply(data)?, transform))
}
