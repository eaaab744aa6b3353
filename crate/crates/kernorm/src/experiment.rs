//! Experiment runner: independent seeded trials per grid point, aggregated
//! into one result row per method.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use kernorm_core::baselines::{
    energy_null_threshold, energy_test_with_threshold, hz_null_threshold, hz_test_with_threshold, lmmda_test,
    random_projection_test, Calibration, DirectionLaw, EnergyNorm, EuclideanProjections, KernelProjections,
    LmmdaConfig, ProjectionConfig,
};
use kernorm_core::kernel::KernelSpec;
use kernorm_core::lmmd::{run_test, LmmdConfig};
use kernorm_core::null::{estimate_null_from_sample, CovarianceSpec};
use kernorm_core::rng::{derive_seed, tag, Stream};
use kernorm_core::synthetic::{sample_gaussian, sample_mixture, GaussianSpec, MixtureSpec};
use kernorm_core::Sample;
use rayon::prelude::*;

use crate::config::{DataLaw, ExperimentConfig, ExperimentKind, GaussianLaw, MethodKind, NullModelKind, Scenario};
use crate::data::load_csv;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub method: MethodKind,
    pub n: usize,
    pub b: usize,
    pub d: usize,
    pub alpha: f64,
    /// Rejection rate under the null, non-rejection rate (Type-II error) otherwise.
    pub rejection_rate: f64,
    pub replicates: usize,
    /// `None` when timing is disabled.
    pub mean_elapsed_ms: Option<f64>,
    pub seed: u64,
    /// Data drawn from the null law, so the rate is a Type-I error.
    pub under_null: bool,
}

fn gaussian(law: &GaussianLaw, d: usize) -> Result<GaussianSpec> {
    Ok(GaussianSpec::new(law.delta, law.lambda, d)?)
}

/// Stable per-grid-point seed.
fn point_seed(seed: u64, scenario: usize, d: usize, n: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(seed, scenario as u64), d as u64), n as u64)
}

fn method_code(m: MethodKind) -> u64 {
    match m {
        MethodKind::Lmmd => 1,
        MethodKind::Lmmda => 2,
        MethodKind::RandomProjection => 3,
        MethodKind::HenzeZirkler => 4,
        MethodKind::EnergyDistance => 5,
    }
}

fn draw(
    law: &DataLaw,
    config: &ExperimentConfig,
    dataset: Option<&Sample>,
    d: usize,
    n: usize,
    seed: u64,
) -> Result<Sample> {
    Ok(match law {
        DataLaw::Null => sample_gaussian(&gaussian(&config.null, d)?, n, seed),
        DataLaw::Gaussian(g) => sample_gaussian(&gaussian(g, d)?, n, seed),
        DataLaw::Mixture { weights, components } => {
            let components = components.iter().map(|c| gaussian(c, d)).collect::<Result<Vec<_>>>()?;
            sample_mixture(&MixtureSpec::new(weights.clone(), components)?, n, seed)
        }
        DataLaw::Dataset => {
            let data = dataset.ok_or_else(|| HarnessError::Config("no dataset loaded".into()))?;
            subsample(data, n, seed)?
        }
    })
}

/// `n` distinct rows chosen uniformly (partial Fisher-Yates).
fn subsample(data: &Sample, n: usize, seed: u64) -> Result<Sample> {
    if n > data.n() {
        return Err(HarnessError::Config(format!(
            "n = {n} exceeds the {} rows of the dataset",
            data.n()
        )));
    }
    let mut rng = Stream::new(seed);
    let mut idx: Vec<usize> = (0..data.n()).collect();
    for i in 0..n {
        let j = i + ((rng.uniform() * (data.n() - i) as f64) as usize).min(data.n() - i - 1);
        idx.swap(i, j);
    }
    Ok(data.select(&idx[..n]))
}

struct Point<'a> {
    scenario: &'a Scenario,
    scenario_index: usize,
    d: usize,
    n: usize,
    b: usize,
    /// Cached thresholds of the whitened baselines.
    thresholds: HashMap<MethodKind, f64>,
}

struct Runner<'a> {
    config: &'a ExperimentConfig,
    dataset: Option<Sample>,
    inner_parallel: bool,
}

type Outcome = (bool, Duration);

impl Runner<'_> {
    fn threshold(&self, method: MethodKind, n: usize, d: usize, b: usize) -> Result<Option<f64>> {
        let calibration = Calibration {
            alpha: self.config.alpha,
            replicates: b,
            seed: derive_seed(point_seed(self.config.seed, usize::MAX, d, n), method_code(method)),
            parallel: true,
        };
        let wrap = |source| HarnessError::Trial {
            method: method.name(),
            n,
            seed: calibration.seed,
            source,
        };
        Ok(match method {
            MethodKind::HenzeZirkler => Some(hz_null_threshold(n, d, &calibration).map_err(wrap)?),
            MethodKind::EnergyDistance => Some(
                energy_null_threshold(n, d, self.config.energy_draws, EnergyNorm::Euclidean, &calibration)
                    .map_err(wrap)?,
            ),
            _ => None,
        })
    }

    fn trial(&self, point: &Point, trial_seed: u64) -> Result<Vec<Outcome>> {
        let c = self.config;
        let (n, d, b) = (point.n, point.d, point.b);
        let data_seed = derive_seed(trial_seed, tag::DATA);
        let mut x = draw(&point.scenario.law, c, self.dataset.as_ref(), d, n, data_seed)?;

        let wrap = |method: MethodKind| {
            move |source| HarnessError::Trial {
                method: method.name(),
                n,
                seed: trial_seed,
                source,
            }
        };

        // Known null: shift the data so the null is centered.
        let mut known_variances = Vec::new();
        let cov = match c.null_model {
            NullModelKind::Known => {
                let null = gaussian(&c.null, d)?;
                let mean = null.mean();
                for i in 0..n {
                    for (v, m) in x.row_mut(i).iter_mut().zip(&mean) {
                        *v -= m;
                    }
                }
                known_variances = null.variances();
                CovarianceSpec::diagonal(known_variances.clone())?
            }
            NullModelKind::Estimated => estimate_null_from_sample(&c.kernel, &x).map_err(wrap(MethodKind::Lmmd))?,
        };

        let mut out = Vec::with_capacity(c.methods.len());
        for &method in &c.methods {
            let seed = derive_seed(trial_seed, method_code(method));
            let start = Instant::now();
            let reject = match method {
                MethodKind::Lmmd => {
                    let config = LmmdConfig {
                        alpha: c.alpha,
                        replicates: b,
                        seed,
                        parallel: self.inner_parallel,
                        ..LmmdConfig::default()
                    };
                    run_test(&x, &c.kernel, &cov, &config).map(|r| r.reject)
                }
                MethodKind::Lmmda => {
                    let config = LmmdaConfig {
                        alpha: c.alpha,
                        draws: b,
                        seed,
                        ..LmmdaConfig::default()
                    };
                    lmmda_test(&x, &c.kernel, &cov, &config).map(|r| r.reject)
                }
                MethodKind::RandomProjection => {
                    let config = ProjectionConfig {
                        n_directions: c.rp_directions,
                        alpha: c.alpha,
                        mc_replicates: c.rp_mc_replicates,
                        seed,
                        parallel: self.inner_parallel,
                    };
                    match (&c.kernel, c.null_model) {
                        (KernelSpec::Linear, NullModelKind::Known) => EuclideanProjections::diagonal_null(
                            &x,
                            DirectionLaw::DecayingDiagonal,
                            vec![0.0; d],
                            &known_variances,
                        )
                        .and_then(|m| random_projection_test(&m, &config)),
                        (KernelSpec::Linear, NullModelKind::Estimated) => {
                            EuclideanProjections::empirical_null(&x, DirectionLaw::DecayingDiagonal)
                                .and_then(|m| random_projection_test(&m, &config))
                        }
                        (kernel, _) => {
                            KernelProjections::new(kernel, &x).and_then(|m| random_projection_test(&m, &config))
                        }
                    }
                    .map(|r| r.reject)
                }
                MethodKind::HenzeZirkler => {
                    hz_test_with_threshold(&x, point.thresholds[&method], seed).map(|r| r.reject)
                }
                MethodKind::EnergyDistance => energy_test_with_threshold(
                    &x,
                    point.thresholds[&method],
                    c.energy_draws,
                    EnergyNorm::Euclidean,
                    seed,
                )
                .map(|r| r.reject),
            }
            .map_err(wrap(method))?;
            out.push((reject, start.elapsed()));
        }
        Ok(out)
    }

    fn run_point(&self, point: &Point, rows: &mut Vec<ResultRow>) -> Result<()> {
        let c = self.config;
        let base = point_seed(c.seed, point.scenario_index, point.d, point.n);
        let outcomes: Vec<Result<Vec<Outcome>>> = (0..c.replicates)
            .into_par_iter()
            .map(|t| self.trial(point, derive_seed(base, t as u64)))
            .collect();
        let mut rejections = vec![0usize; c.methods.len()];
        let mut elapsed = vec![Duration::ZERO; c.methods.len()];
        for outcome in outcomes {
            for (k, (reject, time)) in outcome?.into_iter().enumerate() {
                rejections[k] += usize::from(reject);
                elapsed[k] += time;
            }
        }
        let label = if c.scenarios.len() > 1 {
            format!("{}/{}", c.kind.name(), point.scenario.label)
        } else {
            c.kind.name().to_string()
        };
        let r = c.replicates as f64;
        for (k, &method) in c.methods.iter().enumerate() {
            let count = if point.scenario.is_null() {
                rejections[k]
            } else {
                c.replicates - rejections[k]
            };
            rows.push(ResultRow {
                experiment: label.clone(),
                method,
                n: point.n,
                b: point.b,
                d: point.d,
                alpha: c.alpha,
                rejection_rate: count as f64 / r,
                replicates: c.replicates,
                mean_elapsed_ms: c.timing.then(|| elapsed[k].as_secs_f64() * 1e3 / r),
                seed: c.seed,
                under_null: point.scenario.is_null(),
            });
        }
        Ok(())
    }
}

/// Runs every grid point of the experiment. Output is identical for any
/// number of workers: trials use derived seeds and are aggregated by count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    if config.null_model == NullModelKind::Known && config.kernel != KernelSpec::Linear {
        return Err(HarnessError::Config("a known null needs the linear kernel".into()));
    }
    let dataset = match &config.data.path {
        Some(path) if config.scenarios.iter().any(|s| s.law == DataLaw::Dataset) => {
            Some(load_csv(path, &config.data.options)?)
        }
        _ => None,
    };
    let dims = match &dataset {
        Some(data) => vec![data.dim()],
        None => config.dims.clone(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start workers: {e}")))?;
    let runner = Runner {
        config,
        dataset,
        inner_parallel: config.replicates == 1 && config.kind != ExperimentKind::ExecTime,
    };

    let grid: Vec<(usize, usize)> = if config.kind.sweeps_b() {
        config.b_grid.iter().map(|&b| (config.n_grid[0], b)).collect()
    } else {
        config.n_grid.iter().map(|&n| (n, config.b_grid[0])).collect()
    };

    pool.install(|| {
        let mut rows = Vec::new();
        // the whitened baselines' null laws only depend on (n, d)
        let mut cache: HashMap<(MethodKind, usize, usize, usize), Option<f64>> = HashMap::new();
        for (scenario_index, scenario) in config.scenarios.iter().enumerate() {
            for &d in &dims {
                for &(n, b) in &grid {
                    let mut thresholds = HashMap::new();
                    for &m in &config.methods {
                        let t = match cache.get(&(m, n, d, b)) {
                            Some(t) => *t,
                            None => {
                                let t = runner.threshold(m, n, d, b)?;
                                cache.insert((m, n, d, b), t);
                                t
                            }
                        };
                        if let Some(t) = t {
                            thresholds.insert(m, t);
                        }
                    }
                    let point = Point {
                        scenario,
                        scenario_index,
                        d,
                        n,
                        b,
                        thresholds,
                    };
                    runner.run_point(&point, &mut rows)?;
                }
            }
        }
        Ok(rows)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsample_is_a_permutation_prefix() {
        let data = Sample::new(10, 1, (0..10).map(f64::from).collect()).unwrap();
        let s = subsample(&data, 10, 3).unwrap();
        let mut v: Vec<f64> = s.rows().map(|r| r[0]).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, (0..10).map(f64::from).collect::<Vec<_>>());
        assert!(subsample(&data, 11, 3).is_err());
    }
}
