//! Trajectory data: the CSV format (`trajectory_id,x,y`), JSON dataset
//! manifests, and a seeded generator of synthetic ensembles.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisDescriptor, BasisSet, ParisLawConfig};
use crate::linalg::psd_sqrt;
use crate::{Error, Result};

/// One realization of a degradation process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub id: String,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl Trajectory {
    /// Checks `xs` strictly increasing, equal lengths, at least one sample
    /// and finite values.
    pub fn new(id: impl Into<String>, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::invalid(format!(
                "trajectory {id}: need equally many (≥ 1) x and y values, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("trajectory {id}: non-finite sample")));
        }
        if let Some(i) = xs.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "trajectory {id}: x not strictly increasing at sample {}",
                i + 1
            )));
        }
        Ok(Trajectory { id, xs, ys })
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn last(&self) -> (f64, f64) {
        (*self.xs.last().unwrap(), *self.ys.last().unwrap())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub role: String,
    #[serde(default)]
    pub unit: String,
}

/// Divisors applied to the file columns before any axis flip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    #[serde(default = "one")]
    pub x_divisor: f64,
    #[serde(default = "one")]
    pub y_divisor: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization {
            x_divisor: 1.0,
            y_divisor: 1.0,
        }
    }
}

/// Which trajectories infer the model and which are predicted. Entries are
/// trajectory ids or inclusive numeric ranges such as `"1-47"`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub inference: Vec<String>,
    #[serde(default)]
    pub evaluation: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(default)]
    pub x_axis: AxisSpec,
    #[serde(default)]
    pub y_axis: AxisSpec,
    /// Swap x and y after normalization (e.g. crack length becomes the
    /// input and cycles the output).
    #[serde(default)]
    pub flip_axes: bool,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paris: Option<ParisLawConfig>,
    pub files: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
}

impl DatasetManifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            file: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// What was applied while loading, echoed alongside outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadEcho {
    pub manifest: DatasetManifest,
    pub x_divisor: f64,
    pub y_divisor: f64,
    pub flipped: bool,
    pub trajectory_count: usize,
    pub sample_count: usize,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub trajectories: Vec<Trajectory>,
    pub echo: LoadEcho,
}

fn selector_matches(sel: &str, id: &str) -> bool {
    if sel == id {
        return true;
    }
    if let Some((a, b)) = sel.split_once('-') {
        if let (Ok(a), Ok(b), Ok(v)) = (a.trim().parse::<i64>(), b.trim().parse::<i64>(), id.parse::<i64>()) {
            return a <= v && v <= b;
        }
    }
    false
}

impl Dataset {
    /// `(inference, evaluation)` per the manifest split, or `None` when the
    /// dataset is meant for leave-one-out evaluation. An empty evaluation
    /// list means "everything not used for inference".
    pub fn split(&self) -> Option<(Vec<Trajectory>, Vec<Trajectory>)> {
        let split = self.manifest.split.as_ref()?;
        let in_list = |sel: &[String], id: &str| sel.iter().any(|s| selector_matches(s, id));
        let inference: Vec<Trajectory> = self
            .trajectories
            .iter()
            .filter(|t| in_list(&split.inference, &t.id))
            .cloned()
            .collect();
        let evaluation: Vec<Trajectory> = self
            .trajectories
            .iter()
            .filter(|t| {
                !in_list(&split.inference, &t.id)
                    && (split.evaluation.is_empty() || in_list(&split.evaluation, &t.id))
            })
            .cloned()
            .collect();
        Some((inference, evaluation))
    }
}

struct Sample {
    row: usize,
    x: f64,
    y: f64,
}

fn read_samples<R: Read>(reader: R, file: &str) -> Result<Vec<(String, Vec<Sample>)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Schema {
            file: file.to_string(),
            message: format!("missing column `{name}`"),
        })
    };
    let (ci, cx, cy) = (col("trajectory_id")?, col("x")?, col("y")?);

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<Sample>> = HashMap::new();
    for (k, rec) in rdr.records().enumerate() {
        // header is row 1
        let row = k + 2;
        let rec = rec?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let parse = |c: usize, what: &str| -> Result<f64> {
            let s = field(c);
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    file: file.to_string(),
                    row,
                    message: format!("{what} value `{s}` is not a finite number"),
                })
        };
        let id = field(ci).to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                file: file.to_string(),
                row,
                message: "empty trajectory_id".into(),
            });
        }
        let sample = Sample {
            row,
            x: parse(cx, "x")?,
            y: parse(cy, "y")?,
        };
        groups
            .entry(id.clone())
            .or_insert_with(|| {
                order.push(id.clone());
                Vec::new()
            })
            .push(sample);
    }
    if order.is_empty() {
        return Err(Error::Schema {
            file: file.to_string(),
            message: "no trajectory rows".into(),
        });
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let s = groups.remove(&id).unwrap();
            (id, s)
        })
        .collect())
}

fn build_trajectories(
    groups: Vec<(String, Vec<Sample>)>,
    file: &str,
    norm: Normalization,
    flip: bool,
) -> Result<Vec<Trajectory>> {
    let mut out = Vec::with_capacity(groups.len());
    for (id, mut samples) in groups {
        for s in samples.iter_mut() {
            s.x /= norm.x_divisor;
            s.y /= norm.y_divisor;
            if flip {
                std::mem::swap(&mut s.x, &mut s.y);
            }
        }
        for w in samples.windows(2) {
            if w[1].x <= w[0].x {
                return Err(Error::Parse {
                    file: file.to_string(),
                    row: w[1].row,
                    message: format!(
                        "trajectory {id}: x must be strictly increasing ({} after {})",
                        w[1].x, w[0].x
                    ),
                });
            }
        }
        let xs = samples.iter().map(|s| s.x).collect();
        let ys = samples.iter().map(|s| s.y).collect();
        out.push(Trajectory::new(id, xs, ys)?);
    }
    Ok(out)
}

/// Reads a trajectory CSV without normalization.
pub fn read_csv(path: &Path) -> Result<Vec<Trajectory>> {
    let name = path.display().to_string();
    let groups = read_samples(File::open(path)?, &name)?;
    build_trajectories(groups, &name, Normalization::default(), false)
}

pub fn read_csv_from<R: Read>(reader: R, name: &str) -> Result<Vec<Trajectory>> {
    let groups = read_samples(reader, name)?;
    build_trajectories(groups, name, Normalization::default(), false)
}

/// Writes `trajectory_id,x,y` with shortest round-trip float formatting.
pub fn write_csv_to<W: Write>(writer: W, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(["trajectory_id", "x", "y"])?;
    for t in trajectories {
        for (x, y) in t.xs.iter().zip(&t.ys) {
            w.write_record([t.id.as_str(), &x.to_string(), &y.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    write_csv_to(File::create(path)?, trajectories)
}

/// Loads a manifest and its trajectory files, applying normalization and the
/// axis flip exactly once. File paths are relative to the manifest.
pub fn load(manifest_path: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::from_path(manifest_path)?;
    let base: PathBuf = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let norm = manifest.normalization;
    if !(norm.x_divisor.is_finite() && norm.x_divisor > 0.0 && norm.y_divisor.is_finite() && norm.y_divisor > 0.0)
    {
        return Err(Error::Schema {
            file: manifest_path.display().to_string(),
            message: "normalization divisors must be positive".into(),
        });
    }
    if manifest.files.is_empty() {
        return Err(Error::Schema {
            file: manifest_path.display().to_string(),
            message: "manifest lists no trajectory files".into(),
        });
    }
    if let Some(p) = &manifest.paris {
        p.validate()?;
    }
    let mut trajectories = Vec::new();
    for f in &manifest.files {
        let path = base.join(f);
        let name = path.display().to_string();
        let groups = read_samples(File::open(&path)?, &name)?;
        trajectories.extend(build_trajectories(groups, &name, norm, manifest.flip_axes)?);
    }
    let mut seen = std::collections::HashSet::new();
    for t in &trajectories {
        if !seen.insert(t.id.clone()) {
            return Err(Error::Schema {
                file: manifest_path.display().to_string(),
                message: format!("trajectory id {} appears in more than one file", t.id),
            });
        }
    }
    let echo = LoadEcho {
        manifest: manifest.clone(),
        x_divisor: norm.x_divisor,
        y_divisor: norm.y_divisor,
        flipped: manifest.flip_axes,
        trajectory_count: trajectories.len(),
        sample_count: trajectories.iter().map(Trajectory::len).sum(),
    };
    Ok(Dataset {
        manifest,
        trajectories,
        echo,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Sampling {
    /// Every trajectory observed at the same locations.
    Grid { xs: Vec<f64> },
    /// Sorted uniform draws per trajectory.
    Uniform { lower: f64, upper: f64, points: usize },
}

/// Recipe for a synthetic ensemble `y = Φ β_j + ε`, `β_j ~ N(μ, Σ)`,
/// `ε ~ N(0, σ²)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub basis: BasisDescriptor,
    pub coef_mean: Vec<f64>,
    pub coef_cov: Vec<Vec<f64>>,
    #[serde(default)]
    pub noise_sd: f64,
    pub sampling: Sampling,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Draws a synthetic ensemble. Deterministic for a given spec.
pub fn synthesize(spec: &GeneratorSpec) -> Result<Vec<Trajectory>> {
    let basis = BasisSet::from_descriptor(&spec.basis)?;
    let p = basis.len();
    if spec.coef_mean.len() != p {
        return Err(Error::InvalidSpec(format!(
            "coefficient mean has {} entries, basis has {p}",
            spec.coef_mean.len()
        )));
    }
    if spec.coef_cov.len() != p || spec.coef_cov.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidSpec(format!("coefficient covariance must be {p}×{p}")));
    }
    if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
        return Err(Error::InvalidSpec("noise_sd must be finite and non-negative".into()));
    }
    let cov = DMatrix::from_fn(p, p, |i, j| spec.coef_cov[i][j]);
    if (&cov - cov.transpose()).abs().max() > 1e-12 * cov.abs().max().max(1.0) {
        return Err(Error::InvalidSpec("coefficient covariance is not symmetric".into()));
    }
    let tol = 1e-10 * cov.trace().abs().max(f64::MIN_POSITIVE);
    let root = psd_sqrt(&cov, tol)
        .ok_or_else(|| Error::InvalidSpec("coefficient covariance is not positive semidefinite".into()))?;
    let mean = DVector::from_vec(spec.coef_mean.clone());

    match &spec.sampling {
        Sampling::Grid { xs } => basis.check_domain(xs)?,
        Sampling::Uniform {
            lower,
            upper,
            points,
        } => {
            if !(lower < upper) || *points == 0 {
                return Err(Error::InvalidSpec("uniform sampling needs lower < upper and points ≥ 1".into()));
            }
            basis.check_domain(&[*lower])?;
            if upper.is_finite() && basis.domain().1.is_finite() && *upper > basis.domain().1 {
                return Err(Error::InvalidSpec("uniform sampling exceeds basis domain".into()));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(spec.count);
    for j in 0..spec.count {
        let z = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta = &mean + &root * z;
        let xs: Vec<f64> = match &spec.sampling {
            Sampling::Grid { xs } => xs.clone(),
            Sampling::Uniform {
                lower,
                upper,
                points,
            } => {
                let mut v: Vec<f64> = (0..*points).map(|_| rng.random_range(*lower..*upper)).collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v.dedup();
                v
            }
        };
        let phi = basis.design(&xs);
        let f = phi * beta;
        let ys: Vec<f64> = f
            .iter()
            .map(|v| {
                let e: f64 = if spec.noise_sd > 0.0 {
                    spec.noise_sd * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                v + e
            })
            .collect();
        out.push(Trajectory::new((j + 1).to_string(), xs, ys)?);
    }
    Ok(out)
}
