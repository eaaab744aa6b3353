//! Experiment configuration: a flat `key = value` format with `[section]`
//! headers, and the presets shipped in `config/`.
//!
//! ```text
//! [experiment]
//! kind = dim_study
//! methods = lmmd, hz, ed
//! n_grid = 100:500:100
//!
//! [paper]          # applied by --paper-scale
//! replicates = 200
//!
//! [scenario.HA1]
//! law = mixture
//! weights = 0.5, 0.5
//! delta = 0, 1.5
//! lambda = 0.5, 0.5
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use kernorm_core::kernel::KernelSpec;

use crate::data::CsvOptions;
use crate::error::{HarnessError, Result};

/// Preset name and file contents, one per reproduced figure panel.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig1_type1_vs_b", include_str!("../../../config/fig1_type1_vs_b.conf")),
    ("fig1_type2_mean", include_str!("../../../config/fig1_type2_mean.conf")),
    ("fig1_type2_cov", include_str!("../../../config/fig1_type2_cov.conf")),
    ("fig2_dim_study", include_str!("../../../config/fig2_dim_study.conf")),
    ("fig4_real_data", include_str!("../../../config/fig4_real_data.conf")),
    ("fig5_exec_time", include_str!("../../../config/fig5_exec_time.conf")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Type1VsB,
    Type2VsNMean,
    Type2VsNCov,
    DimStudy,
    RealData,
    ExecTime,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Type1VsB => "Type1VsB",
            ExperimentKind::Type2VsNMean => "Type2VsN_Mean",
            ExperimentKind::Type2VsNCov => "Type2VsN_Cov",
            ExperimentKind::DimStudy => "DimStudy",
            ExperimentKind::RealData => "RealData",
            ExperimentKind::ExecTime => "ExecTime",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "type1_vs_b" => ExperimentKind::Type1VsB,
            "type2_vs_n_mean" | "type2_mean" => ExperimentKind::Type2VsNMean,
            "type2_vs_n_cov" | "type2_cov" => ExperimentKind::Type2VsNCov,
            "dim_study" => ExperimentKind::DimStudy,
            "real_data" => ExperimentKind::RealData,
            "exec_time" => ExperimentKind::ExecTime,
            other => return Err(HarnessError::Config(format!("unknown experiment kind '{other}'"))),
        })
    }

    /// The x axis of the experiment is `B` rather than `n`.
    pub fn sweeps_b(&self) -> bool {
        matches!(self, ExperimentKind::Type1VsB)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodKind {
    Lmmd,
    Lmmda,
    RandomProjection,
    HenzeZirkler,
    EnergyDistance,
}

impl MethodKind {
    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::Lmmd => "LMMD",
            MethodKind::Lmmda => "LMMDa",
            MethodKind::RandomProjection => "RP",
            MethodKind::HenzeZirkler => "HZ",
            MethodKind::EnergyDistance => "ED",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "").as_str() {
            "lmmd" => MethodKind::Lmmd,
            "lmmda" => MethodKind::Lmmda,
            "rp" | "randomprojection" => MethodKind::RandomProjection,
            "hz" | "henzezirkler" => MethodKind::HenzeZirkler,
            "ed" | "energy" | "energydistance" => MethodKind::EnergyDistance,
            other => return Err(HarnessError::Config(format!("unknown method '{other}'"))),
        })
    }
}

/// Structured Gaussian law: mean `δ·(1, 1/2, …)`, covariance `λ·diag(1, 1/4, …)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLaw {
    pub delta: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataLaw {
    /// Draws from the null law.
    Null,
    Gaussian(GaussianLaw),
    Mixture {
        weights: Vec<f64>,
        components: Vec<GaussianLaw>,
    },
    /// Subsamples without replacement from a CSV file.
    Dataset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub label: String,
    pub law: DataLaw,
}

impl Scenario {
    /// Rates under the null are rejection rates, otherwise non-rejection rates.
    pub fn is_null(&self) -> bool {
        self.law == DataLaw::Null
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullModelKind {
    /// The structured null law with known parameters.
    Known,
    /// Gaussian with the sample's mean and covariance.
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DataSource {
    pub path: Option<PathBuf>,
    pub options: CsvOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: ExperimentKind,
    pub methods: Vec<MethodKind>,
    pub dims: Vec<usize>,
    pub n_grid: Vec<usize>,
    /// All swept values for `Type1VsB`, a single value otherwise.
    pub b_grid: Vec<usize>,
    pub alpha: f64,
    pub replicates: usize,
    pub seed: u64,
    pub null: GaussianLaw,
    pub null_model: NullModelKind,
    pub scenarios: Vec<Scenario>,
    pub kernel: KernelSpec,
    /// Worker threads; `None` uses the available parallelism.
    pub workers: Option<usize>,
    /// Record wall-clock times; otherwise the column holds `NA`.
    pub timing: bool,
    pub rp_directions: usize,
    pub rp_mc_replicates: usize,
    pub energy_draws: usize,
    pub data: DataSource,
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_sections(text: &str) -> Result<(Sections, Vec<String>)> {
    let mut sections = Sections::new();
    let mut order = Vec::new();
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if sections.insert(current.clone(), BTreeMap::new()).is_some() {
                return Err(HarnessError::Config(format!(
                    "line {}: duplicate section [{current}]",
                    i + 1
                )));
            }
            order.push(current.clone());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| HarnessError::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        sections
            .entry(current.clone())
            .or_default()
            .insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok((sections, order))
}

fn bad(key: &str, value: &str) -> HarnessError {
    HarnessError::Config(format!("invalid value for '{key}': '{value}'"))
}

fn scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(key, s))
        .collect()
}

/// Integer list, either `a, b, c` or the range `start:stop:step` (inclusive).
pub fn parse_grid(key: &str, value: &str) -> Result<Vec<usize>> {
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, s): (usize, usize, usize) = (scalar(key, start)?, scalar(key, stop)?, scalar(key, step)?);
            if s == 0 || a > b {
                return Err(bad(key, value));
            }
            Ok((a..=b).step_by(s).collect())
        }
        [_] => list(key, value),
        _ => Err(bad(key, value)),
    }
}

fn gaussian_law(section: &BTreeMap<String, String>, name: &str) -> Result<GaussianLaw> {
    let get = |k: &str| {
        section
            .get(k)
            .ok_or_else(|| HarnessError::Config(format!("[{name}] needs '{k}'")))
            .and_then(|v| scalar::<f64>(k, v))
    };
    Ok(GaussianLaw {
        delta: get("delta")?,
        lambda: get("lambda")?,
    })
}

fn scenario(label: &str, section: &BTreeMap<String, String>) -> Result<Scenario> {
    let name = format!("scenario.{label}");
    let law = match section.get("law").map(String::as_str) {
        Some("null") => DataLaw::Null,
        Some("gaussian") => DataLaw::Gaussian(gaussian_law(section, &name)?),
        Some("dataset") => DataLaw::Dataset,
        Some("mixture") => {
            let field = |k: &str| -> Result<Vec<f64>> {
                let v = section
                    .get(k)
                    .ok_or_else(|| HarnessError::Config(format!("[{name}] needs '{k}'")))?;
                list(k, v)
            };
            let (weights, deltas, lambdas) = (field("weights")?, field("delta")?, field("lambda")?);
            if deltas.len() != weights.len() || lambdas.len() != weights.len() {
                return Err(HarnessError::Config(format!(
                    "[{name}] weights, delta and lambda need the same length"
                )));
            }
            let components = deltas
                .iter()
                .zip(&lambdas)
                .map(|(&delta, &lambda)| GaussianLaw { delta, lambda })
                .collect();
            DataLaw::Mixture { weights, components }
        }
        other => {
            return Err(HarnessError::Config(format!(
                "[{name}] law must be null, gaussian, mixture or dataset, got {other:?}"
            )))
        }
    };
    Ok(Scenario {
        label: label.to_string(),
        law,
    })
}

impl ExperimentConfig {
    /// Parses a configuration; `paper_scale` applies the `[paper]` overrides.
    pub fn parse(name: &str, text: &str, paper_scale: bool) -> Result<Self> {
        let (mut sections, order) = parse_sections(text)?;
        let mut exp = sections
            .remove("experiment")
            .ok_or_else(|| HarnessError::Config("missing [experiment] section".into()))?;
        if paper_scale {
            if let Some(paper) = sections.remove("paper") {
                exp.extend(paper);
            }
        }
        let known = [
            "kind",
            "methods",
            "alpha",
            "B",
            "b_grid",
            "d",
            "dims",
            "n_grid",
            "replicates",
            "seed",
            "null_model",
            "workers",
            "timing",
            "rp_directions",
            "rp_mc_replicates",
            "energy_draws",
        ];
        if let Some(k) = exp.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(HarnessError::Config(format!("unknown key '{k}' in [experiment]")));
        }
        let get = |k: &str| exp.get(k).map(String::as_str);
        let required = |k: &str| get(k).ok_or_else(|| HarnessError::Config(format!("[experiment] needs '{k}'")));

        let kind = ExperimentKind::parse(required("kind")?)?;
        let methods = required("methods")?
            .split(',')
            .map(|m| MethodKind::parse(m.trim()))
            .collect::<Result<Vec<_>>>()?;
        let dims = match (get("dims"), get("d")) {
            (Some(v), _) => list("dims", v)?,
            (None, Some(v)) => vec![scalar("d", v)?],
            (None, None) if kind == ExperimentKind::RealData => Vec::new(),
            _ => return Err(HarnessError::Config("[experiment] needs 'd' or 'dims'".into())),
        };
        let b_grid = match (get("b_grid"), get("B")) {
            (Some(v), _) => parse_grid("b_grid", v)?,
            (None, Some(v)) => vec![scalar("B", v)?],
            _ => return Err(HarnessError::Config("[experiment] needs 'B' or 'b_grid'".into())),
        };
        let timing = match get("timing") {
            Some(v) => scalar("timing", v)?,
            None => kind == ExperimentKind::ExecTime,
        };
        let null_model = match get("null_model").unwrap_or("known") {
            "known" => NullModelKind::Known,
            "estimated" => NullModelKind::Estimated,
            other => return Err(bad("null_model", other)),
        };

        let null = match sections.get("null") {
            Some(s) => gaussian_law(s, "null")?,
            None if kind == ExperimentKind::RealData => GaussianLaw {
                delta: 0.0,
                lambda: 0.0,
            },
            None => return Err(HarnessError::Config("missing [null] section".into())),
        };

        let kernel = match sections.get("kernel") {
            None => KernelSpec::Linear,
            Some(s) => match s.get("type").map(String::as_str) {
                None | Some("linear") => KernelSpec::Linear,
                Some("gaussian") => {
                    let v = s
                        .get("sigma_sq")
                        .ok_or_else(|| HarnessError::Config("[kernel] gaussian needs 'sigma_sq'".into()))?;
                    KernelSpec::gaussian(scalar("sigma_sq", v)?)?
                }
                Some(other) => return Err(bad("type", other)),
            },
        };

        let mut data = DataSource::default();
        if let Some(s) = sections.get("data") {
            data.path = s.get("path").filter(|p| !p.is_empty()).map(PathBuf::from);
            data.options.label_column = s.get("label_column").filter(|p| !p.is_empty()).cloned();
            data.options.keep_labels = s.get("keep_labels").map(|v| {
                v.split(',')
                    .map(|x| x.trim().to_string())
                    .filter(|x| !x.is_empty())
                    .collect()
            });
            data.options.scale = s.get("scale").map(|v| scalar("scale", v)).transpose()?;
        }

        let mut scenarios = Vec::new();
        for section in &order {
            if let Some(label) = section.strip_prefix("scenario.") {
                scenarios.push(scenario(label, &sections[section])?);
            }
        }
        if scenarios.is_empty() && kind == ExperimentKind::Type1VsB {
            scenarios.push(Scenario {
                label: "H0".into(),
                law: DataLaw::Null,
            });
        }

        let config = ExperimentConfig {
            name: name.to_string(),
            kind,
            methods,
            dims,
            n_grid: parse_grid("n_grid", required("n_grid")?)?,
            b_grid,
            alpha: scalar("alpha", get("alpha").unwrap_or("0.05"))?,
            replicates: scalar("replicates", required("replicates")?)?,
            seed: scalar("seed", get("seed").unwrap_or("0"))?,
            null,
            null_model,
            scenarios,
            kernel,
            workers: get("workers").map(|v| scalar("workers", v)).transpose()?,
            timing,
            rp_directions: scalar("rp_directions", get("rp_directions").unwrap_or("1"))?,
            rp_mc_replicates: scalar("rp_mc_replicates", get("rp_mc_replicates").unwrap_or("250"))?,
            energy_draws: scalar("energy_draws", get("energy_draws").unwrap_or("1000"))?,
            data,
        };
        Ok(config)
    }

    /// A shipped preset by name.
    pub fn preset(name: &str, paper_scale: bool) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            HarnessError::Config(format!("unknown preset '{name}'; available: {}", names.join(", ")))
        })?;
        Self::parse(name, text, paper_scale)
    }

    /// Checks every constraint that does not need data.
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.replicates == 0 {
            return fail("replicates must be ≥ 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return fail(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.methods.is_empty() {
            return fail("no methods selected".into());
        }
        if self.scenarios.is_empty() {
            return fail("no scenario defined".into());
        }
        for (key, grid) in [("n_grid", &self.n_grid), ("b_grid", &self.b_grid)] {
            if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
                return fail(format!("{key} must be non-empty and strictly increasing"));
            }
        }
        if !self.kind.sweeps_b() && self.b_grid.len() != 1 {
            return fail(format!("{} takes a single B", self.kind.name()));
        }
        if self.kind.sweeps_b() && self.n_grid.len() != 1 {
            return fail("Type1VsB takes a single n".into());
        }
        for &b in &self.b_grid {
            kernorm_core::lmmd::order_index(self.alpha, b)?;
        }
        if self.n_grid[0] < 2 {
            return fail("n must be ≥ 2".into());
        }
        let needs_data = self.scenarios.iter().any(|s| s.law == DataLaw::Dataset);
        if needs_data && self.data.path.is_none() {
            return fail("this experiment needs a dataset: set [data] path or pass --data".into());
        }
        if !needs_data && (self.dims.is_empty() || self.dims.contains(&0)) {
            return fail("dimensions must be ≥ 1".into());
        }
        if needs_data && self.null_model == NullModelKind::Known {
            return fail("a dataset scenario needs null_model = estimated".into());
        }
        if self.rp_directions == 0 {
            return fail("rp_directions must be ≥ 1".into());
        }
        if self.rp_directions > 1 {
            kernorm_core::lmmd::order_index(self.alpha, self.rp_mc_replicates)?;
        }
        let uses = |m| self.methods.contains(&m);
        let whitening = uses(MethodKind::HenzeZirkler) || uses(MethodKind::EnergyDistance);
        if whitening {
            if self.kernel != KernelSpec::Linear || needs_data {
                return fail("HZ and ED need Euclidean data with the linear kernel".into());
            }
            if let Some(&d) = self.dims.iter().max() {
                if self.n_grid[0] <= d {
                    return fail(format!("HZ and ED need n > d (n = {}, d = {d})", self.n_grid[0]));
                }
            }
        }
        if uses(MethodKind::EnergyDistance) && self.energy_draws < kernorm_core::baselines::MIN_NULL_DRAWS {
            return fail(format!(
                "energy_draws must be ≥ {}",
                kernorm_core::baselines::MIN_NULL_DRAWS
            ));
        }
        for s in &self.scenarios {
            if let DataLaw::Mixture { weights, .. } = &s.law {
                if (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return fail(format!("scenario {}: weights must sum to 1", s.label));
                }
            }
        }
        Ok(())
    }
}
