//! Experiment configuration: the JSON file, its validation, and the resolved
//! form echoed into every output directory.

use std::path::{Path, PathBuf};

use priorgp::bench::MethodSpec;
use priorgp::dataset::load;
use priorgp::{DatasetManifest, ErrorEstimator, GeneratorSpec, Method, ParisLawConfig};
use serde::{Deserialize, Serialize};

fn default_order() -> u32 {
    2
}

fn default_starts() -> usize {
    8
}

fn default_repeats() -> usize {
    3
}

fn default_candidates() -> Vec<u32> {
    vec![1, 2, 3, 4]
}

fn default_method() -> Method {
    Method::IgpmPoly
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    /// One of the method labels, e.g. `IGPM-poly`.
    #[serde(default = "default_method")]
    pub label: Method,
    /// Row label in outputs; defaults to `label`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_order")]
    pub order: u32,
    /// Paris-law basis configuration (`IGPM-paris` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<ParisLawConfig>,
    /// `GPM-curr`: do not warm-start from parameters trained on previous data.
    #[serde(default)]
    pub cold_start: bool,
}

impl Default for MethodConfig {
    fn default() -> Self {
        MethodConfig {
            label: default_method(),
            name: None,
            order: default_order(),
            basis: None,
            cold_start: false,
        }
    }
}

impl MethodConfig {
    pub fn of(label: Method) -> Self {
        MethodConfig {
            label,
            ..MethodConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Flags {
    /// Add observation noise to predicted intervals. Unset means the
    /// command default (on for `calibrate`, off otherwise).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictive_noise: Option<bool>,
    /// Total optimizer starts for trained methods.
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub quadrature_direct: bool,
    #[serde(default)]
    pub no_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Timing repeats per prediction step.
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            predictive_noise: None,
            starts: default_starts(),
            quadrature_direct: false,
            no_timing: false,
            threads: None,
            repeats: default_repeats(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastConfig {
    /// Planned measurement locations, in order.
    pub schedule: Vec<f64>,
    pub target: f64,
    /// Step counts to report; defaults to `0..=schedule.len()`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lower];
        }
        let h = (self.upper - self.lower) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lower + h * i as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Synthetic ensemble recipe (`synthesize`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    /// Saved IGPM model file (`variance-forecast`, `diagnose`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub method: MethodConfig,
    /// Methods compared by `benchmark`; empty means `[method]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub methods: Vec<MethodConfig>,
    #[serde(default)]
    pub error_estimator: ErrorEstimator,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default = "default_candidates")]
    pub q_candidates: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forecast: Option<ForecastConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub pointer: String,
    pub message: String,
}

fn violation(pointer: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        pointer: pointer.into(),
        message: message.into(),
    }
}

/// `a.b[2].c` → `/a/b/2/c`.
fn pointer_from_path(path: &str) -> String {
    if path == "." || path.is_empty() {
        return String::new();
    }
    let mut out = String::new();
    for part in path.split('.') {
        let mut rest = part;
        if let Some(i) = rest.find('[') {
            out.push('/');
            out.push_str(&rest[..i]);
            rest = &rest[i..];
            while let Some(end) = rest.find(']') {
                out.push('/');
                out.push_str(&rest[1..end]);
                rest = &rest[end + 1..];
            }
        } else {
            out.push('/');
            out.push_str(rest);
        }
    }
    out
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    /// Parses a config, resolving relative paths against its directory.
    pub fn from_path(path: &Path) -> Result<Self, Vec<Violation>> {
        let text = std::fs::read_to_string(path).map_err(|e| vec![violation("", format!("{}: {e}", path.display()))])?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = pointer_from_path(&e.path().to_string());
            vec![violation(pointer, e.inner().to_string())]
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.dataset = cfg.dataset.map(|p| resolve(base, &p));
        cfg.model = cfg.model.map(|p| resolve(base, &p));
        cfg.output_dir = cfg.output_dir.map(|p| resolve(base, &p));
        Ok(cfg)
    }

    /// Methods run by `benchmark`.
    pub fn method_list(&self) -> Vec<MethodConfig> {
        if self.methods.is_empty() {
            vec![self.method.clone()]
        } else {
            self.methods.clone()
        }
    }

    /// Cross-field checks and dataset reachability; runs no computation.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let manifest = match &self.dataset {
            Some(p) => match DatasetManifest::from_path(p) {
                Ok(m) => {
                    let base = p.parent().unwrap_or(Path::new("."));
                    for (i, f) in m.files.iter().enumerate() {
                        if !resolve(base, Path::new(f)).is_file() {
                            out.push(violation("/dataset", format!("manifest file #{i} `{f}` does not exist")));
                        }
                    }
                    Some(m)
                }
                Err(e) => {
                    out.push(violation("/dataset", format!("{}: {e}", p.display())));
                    None
                }
            },
            None => None,
        };
        let manifest_paris = manifest.as_ref().and_then(|m| m.paris.as_ref());
        let mut check_method = |pointer: String, m: &MethodConfig| {
            match (m.label, &m.basis) {
                (Method::IgpmParis, None) if manifest_paris.is_none() => out.push(violation(
                    format!("{pointer}/basis"),
                    "IGPM-paris needs a Paris-law configuration here or in the dataset manifest",
                )),
                (Method::IgpmParis, Some(c)) => {
                    if let Err(e) = c.validate() {
                        out.push(violation(format!("{pointer}/basis"), e.to_string()));
                    }
                }
                (label, Some(_)) if label != Method::IgpmParis => out.push(violation(
                    format!("{pointer}/basis"),
                    format!("{label} does not use a Paris-law basis"),
                )),
                _ => {}
            }
            if matches!(m.label, Method::GpmCurr | Method::GpmPrevPoly) && m.order == 0 {
                out.push(violation(format!("{pointer}/order"), "polynomial kernels need order q ≥ 1"));
            }
        };
        check_method("/method".into(), &self.method);
        for (i, m) in self.methods.iter().enumerate() {
            check_method(format!("/methods/{i}"), m);
        }
        if self.q_candidates.is_empty() {
            out.push(violation("/q_candidates", "at least one candidate order is required"));
        }
        if self.flags.starts == 0 {
            out.push(violation("/flags/starts", "at least one optimizer start is required"));
        }
        if self.flags.repeats == 0 {
            out.push(violation("/flags/repeats", "at least one timing repeat is required"));
        }
        if self.flags.threads == Some(0) {
            out.push(violation("/flags/threads", "thread count must be positive"));
        }
        if let Some(model) = &self.model {
            if !model.is_file() {
                out.push(violation("/model", format!("{} does not exist", model.display())));
            }
        }
        if let Some(f) = &self.forecast {
            if f.schedule.windows(2).any(|w| !(w[1] > w[0])) || f.schedule.iter().any(|x| !x.is_finite()) {
                out.push(violation("/forecast/schedule", "schedule must be finite and strictly increasing"));
            }
            if let Some(steps) = &f.steps {
                if let Some(s) = steps.iter().find(|&&s| s > f.schedule.len()) {
                    out.push(violation(
                        "/forecast/steps",
                        format!("step {s} exceeds the schedule length {}", f.schedule.len()),
                    ));
                }
            }
        }
        if let Some(g) = &self.grid {
            if g.points == 0 || !(g.upper >= g.lower) {
                out.push(violation("/grid", "grid needs points ≥ 1 and upper ≥ lower"));
            }
        }
        out
    }

    pub fn method_spec(&self, m: &MethodConfig, manifest_paris: Option<&ParisLawConfig>) -> MethodSpec {
        let mut spec = MethodSpec::new(m.label, m.order);
        spec.label = m.name.clone();
        spec.error_estimator = self.error_estimator;
        spec.starts = self.flags.starts;
        spec.cold_start = m.cold_start;
        spec.quadrature_direct = self.flags.quadrature_direct;
        if m.label == Method::IgpmParis {
            spec.paris = m.basis.clone().or_else(|| manifest_paris.cloned());
        }
        spec
    }
}

/// Loads the dataset named by the config, if any.
pub fn dataset(cfg: &ExperimentConfig) -> priorgp::Result<priorgp::Dataset> {
    let path = cfg
        .dataset
        .as_ref()
        .ok_or_else(|| priorgp::Error::invalid("this command needs a dataset (`dataset` in the config or --dataset)"))?;
    load(path)
}
