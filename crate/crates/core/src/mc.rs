//! Surrogate-based Monte Carlo uncertainty propagation.
//!
//! Manufacturing scatter is a normal distribution with diagonal covariance
//! ([`MvnSpec`]). A surrogate is trained on draws from a wider distribution
//! whose standard deviations are `kappa` times the device ones, and
//! [`mc_analyze`] then samples the device distribution in batches:
//!
//! ```text
//! sigma_rel = inf, N_tot = 0
//! while sigma_rel >= sigma_lb and N_tot < N_min:
//!     draw delta_n points, predict (y, s^2), keep the valid ones
//!     N_tot += delta_n
//!     sigma_MC = sqrt(Var(Y) / n)          population variance, n valid values
//!     sigma_rel = sigma_MC / |P50(Y)|
//! sigma_GP = sqrt(P50(S)),  sigma_median = sqrt(sigma_MC^2 + sigma_GP^2)
//! ```
//!
//! Point `i` is drawn from the counter-based stream `(seed, i)`, so batches
//! evaluate in parallel and still reproduce sequential results. Percentiles
//! interpolate linearly between order statistics (the "type 7" rule).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{FitOptions, GpHyper, GpModel};
use crate::rng;

/// Normal distribution with diagonal covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MvnRecord", into = "MvnRecord")]
pub struct MvnSpec {
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MvnRecord {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl TryFrom<MvnRecord> for MvnSpec {
    type Error = Error;
    fn try_from(r: MvnRecord) -> Result<MvnSpec> {
        MvnSpec::new(r.mean, r.std)
    }
}

impl From<MvnSpec> for MvnRecord {
    fn from(m: MvnSpec) -> MvnRecord {
        MvnRecord {
            mean: m.mean,
            std: m.std,
        }
    }
}

impl MvnSpec {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<MvnSpec> {
        if mean.len() != std.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: std.len(),
            });
        }
        if mean.is_empty() {
            return Err(Error::invalid("mean", "needs at least one dimension"));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("mean", "must be finite"));
        }
        if std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid(
                "std",
                "every standard deviation must be positive and finite",
            ));
        }
        Ok(MvnSpec { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    /// Same mean, standard deviations multiplied per dimension.
    pub fn scaled(&self, factors: &[f64]) -> Result<MvnSpec> {
        if factors.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: factors.len(),
            });
        }
        MvnSpec::new(
            self.mean.clone(),
            self.std.iter().zip(factors).map(|(s, k)| s * k).collect(),
        )
    }

    /// Draw number `index` of the stream keyed by `seed`.
    pub fn sample(&self, seed: u64, index: u64) -> Vec<f64> {
        rng::normals(seed, index, self.dim())
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| m + s * z)
            .collect()
    }
}

/// Training points from the enclosing distribution `N(mean, (kappa std)^2)`.
pub fn make_training_set(device: &MvnSpec, kappa: f64, w_train: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    make_training_set_scaled(device, &vec![kappa; device.dim()], w_train, seed)
}

/// As [`make_training_set`] with one scale factor per dimension.
pub fn make_training_set_scaled(device: &MvnSpec, kappas: &[f64], w_train: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if kappas.iter().any(|k| !(*k > 1.0) || !k.is_finite()) {
        return Err(Error::invalid("kappa", "every scale factor must exceed 1"));
    }
    let train = device.scaled(kappas)?;
    Ok((0..w_train as u64).map(|i| train.sample(seed, i)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    pub delta_n: usize,
    pub n_min: usize,
    pub sigma_lb: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            delta_n: 1000,
            n_min: 50_000,
            sigma_lb: 1e-3,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.delta_n < 1 {
            return Err(Error::invalid("delta_n", "must be at least 1"));
        }
        if self.n_min < self.delta_n {
            return Err(Error::invalid("n_min", "must be at least delta_n"));
        }
        if !(self.sigma_lb > 0.0) {
            return Err(Error::invalid("sigma_lb", "must be positive"));
        }
        Ok(())
    }
}

/// Which predicted values enter the statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "threshold")]
pub enum Validity {
    #[default]
    Always,
    /// Keep values strictly above the threshold, e.g. 1 for Purcell factors of
    /// resonant cavities.
    Above(f64),
}

impl Validity {
    pub fn accepts(&self, y: f64) -> bool {
        y.is_finite()
            && match self {
                Validity::Always => true,
                Validity::Above(t) => y > *t,
            }
    }
}

/// Fraction of discarded draws above which a report is flagged.
pub const DISCARD_WARNING_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub p16: f64,
    pub p50: f64,
    pub p84: f64,
    pub sigma_minus: f64,
    pub sigma_plus: f64,
    pub sigma_mc: f64,
    pub sigma_gp: f64,
    pub sigma_median: f64,
    pub sigma_rel: f64,
    /// All draws, valid or not.
    pub n_total: usize,
    pub n_valid: usize,
    pub n_discarded: usize,
    pub discard_fraction: f64,
    pub discard_warning: bool,
    pub batches: usize,
    pub seed: u64,
}

/// Linear interpolation between order statistics at `h = (n - 1) q`.
///
/// # Panics
/// If `sorted` is empty or `q` is outside `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    assert!((0.0..=1.0).contains(&q), "quantile level must lie in [0, 1]");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Monte Carlo analysis with separate mean and variance predictors.
pub fn mc_analyze<M, V, P>(
    mean_fn: M,
    var_fn: V,
    sample_dist: &MvnSpec,
    cfg: &McConfig,
    validity: P,
    seed: u64,
) -> Result<McReport>
where
    M: Fn(&[f64]) -> f64 + Sync,
    V: Fn(&[f64]) -> f64 + Sync,
    P: Fn(f64) -> bool + Sync,
{
    mc_analyze_joint(|p| (mean_fn(p), var_fn(p)), sample_dist, cfg, validity, seed)
}

/// Monte Carlo analysis with a predictor returning `(mean, variance)`.
pub fn mc_analyze_joint<F, P>(
    predict: F,
    sample_dist: &MvnSpec,
    cfg: &McConfig,
    validity: P,
    seed: u64,
) -> Result<McReport>
where
    F: Fn(&[f64]) -> (f64, f64) + Sync,
    P: Fn(f64) -> bool + Sync,
{
    cfg.validate()?;
    let mut y_tot: Vec<f64> = Vec::new();
    let mut s_tot: Vec<f64> = Vec::new();
    let mut n_tot = 0usize;
    let mut discarded = 0usize;
    let mut batches = 0usize;
    let mut sigma_mc = f64::INFINITY;
    let mut sigma_rel = f64::INFINITY;

    while sigma_rel >= cfg.sigma_lb && n_tot < cfg.n_min {
        let batch: Vec<(f64, f64)> = (n_tot..n_tot + cfg.delta_n)
            .into_par_iter()
            .map(|i| predict(&sample_dist.sample(seed, i as u64)))
            .collect();
        for (y, s) in batch {
            if validity(y) && y.is_finite() {
                y_tot.push(y);
                s_tot.push(s);
            } else {
                discarded += 1;
            }
        }
        n_tot += cfg.delta_n;
        batches += 1;
        if !y_tot.is_empty() {
            sigma_mc = (population_variance(&y_tot) / y_tot.len() as f64).sqrt();
            let p50 = percentile(&sorted(&y_tot), 0.5);
            sigma_rel = if p50 == 0.0 {
                f64::INFINITY
            } else {
                sigma_mc / p50.abs()
            };
        }
    }

    if y_tot.is_empty() {
        return Err(Error::AllInvalid);
    }
    let ys = sorted(&y_tot);
    let (p16, p50, p84) = (percentile(&ys, 0.16), percentile(&ys, 0.5), percentile(&ys, 0.84));
    let sigma_gp = percentile(&sorted(&s_tot), 0.5).max(0.0).sqrt();
    let discard_fraction = discarded as f64 / n_tot as f64;
    Ok(McReport {
        p16,
        p50,
        p84,
        sigma_minus: p50 - p16,
        sigma_plus: p84 - p50,
        sigma_mc,
        sigma_gp,
        sigma_median: (sigma_mc * sigma_mc + sigma_gp * sigma_gp).sqrt(),
        sigma_rel,
        n_total: n_tot,
        n_valid: y_tot.len(),
        n_discarded: discarded,
        discard_fraction,
        discard_warning: discard_fraction > DISCARD_WARNING_FRACTION,
        batches,
        seed,
    })
}

/// Local outlier rule: a point is removed when its value differs from the
/// median of its `k_neighbors` nearest neighbors by more than `threshold`
/// robust standard deviations (`1.4826 MAD`) of those neighbors' values.
///
/// Distances use coordinates divided by their sample standard deviation. The
/// robust scale is floored at `eps_abs`, or `1e-12` times the largest
/// magnitude among the values if that is bigger, so constant data remove
/// nothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlierFilter {
    pub k_neighbors: usize,
    pub threshold: f64,
    pub eps_abs: f64,
}

impl Default for OutlierFilter {
    fn default() -> Self {
        OutlierFilter {
            k_neighbors: 8,
            threshold: 5.0,
            eps_abs: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    /// Indices into the input of the removed points, ascending.
    pub removed: Vec<usize>,
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    percentile(&v, 0.5)
}

pub fn filter_outliers(points: &[Vec<f64>], values: &[f64], filter: &OutlierFilter) -> Result<Filtered> {
    let n = points.len();
    if values.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: values.len(),
        });
    }
    if filter.k_neighbors == 0 || filter.k_neighbors >= n {
        return Err(Error::invalid(
            "k_neighbors",
            format!(
                "must be between 1 and the point count minus one ({})",
                n.saturating_sub(1)
            ),
        ));
    }
    if !(filter.threshold > 0.0) {
        return Err(Error::invalid("threshold", "must be positive"));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: points.iter().map(|p| p.len()).find(|l| *l != dim).unwrap_or(dim),
        });
    }
    let scales: Vec<f64> = (0..dim)
        .map(|k| {
            let col: Vec<f64> = points.iter().map(|p| p[k]).collect();
            let s = population_variance(&col).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let z: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&scales).map(|(x, s)| x / s).collect())
        .collect();
    let floor = filter
        .eps_abs
        .max(1e-12 * values.iter().fold(0.0f64, |m, v| m.max(v.abs())));

    let outlier: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let dist = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                    (dist, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let nbr: Vec<f64> = d[..filter.k_neighbors].iter().map(|&(_, j)| values[j]).collect();
            let med = median_of(nbr.clone());
            let mad = median_of(nbr.iter().map(|v| (v - med).abs()).collect());
            let scale = (1.4826 * mad).max(floor);
            (values[i] - med).abs() > filter.threshold * scale
        })
        .collect();

    let mut kept_points = Vec::with_capacity(n);
    let mut kept_values = Vec::with_capacity(n);
    let mut removed = Vec::new();
    for i in 0..n {
        if outlier[i] {
            removed.push(i);
        } else {
            kept_points.push(points[i].clone());
            kept_values.push(values[i]);
        }
    }
    Ok(Filtered {
        points: kept_points,
        values: kept_values,
        removed,
    })
}

/// Settings for [`end_to_end_study`].
#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    /// Per-dimension training spread factors; `kappa` is used for every
    /// dimension when absent.
    pub kappas: Option<Vec<f64>>,
    pub filter: Option<OutlierFilter>,
    pub fit: FitOptions,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            kappas: None,
            filter: Some(OutlierFilter::default()),
            fit: FitOptions::default(),
        }
    }
}

/// Report of an end-to-end study together with its bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub report: McReport,
    pub w_train: usize,
    /// Training points whose expensive evaluation failed.
    pub n_failed: usize,
    /// Training points dropped by the outlier filter.
    pub n_removed: usize,
    /// Points the surrogate was trained on.
    pub n_used: usize,
    pub mu0: f64,
    pub sigma0_sq: f64,
    pub lengthscales: Vec<f64>,
    pub seed: u64,
}

/// Training set, expensive evaluations, outlier filter, surrogate fit and
/// Monte Carlo analysis in one call. `expensive_fn` returns `None` when an
/// evaluation fails; those points are left out.
#[allow(clippy::too_many_arguments)]
pub fn end_to_end_study<E, P>(
    expensive_fn: E,
    device: &MvnSpec,
    kappa: f64,
    w_train: usize,
    cfg: &McConfig,
    validity: P,
    seed: u64,
    opts: &StudyOptions,
) -> Result<(StudyReport, GpModel)>
where
    E: Fn(&[f64]) -> Option<f64> + Sync,
    P: Fn(f64) -> bool + Sync,
{
    cfg.validate()?;
    let kappas = opts.kappas.clone().unwrap_or_else(|| vec![kappa; device.dim()]);
    let train = make_training_set_scaled(device, &kappas, w_train, rng::derive(seed, 0))?;
    let evaluated: Vec<Option<f64>> = train
        .par_iter()
        .map(|p| expensive_fn(p).filter(|v| v.is_finite()))
        .collect();
    let (points, values): (Vec<Vec<f64>>, Vec<f64>) = train
        .iter()
        .zip(&evaluated)
        .filter_map(|(p, v)| v.map(|v| (p.clone(), v)))
        .unzip();
    let n_failed = w_train - points.len();

    let (points, values, n_removed) = match &opts.filter {
        Some(f) if points.len() > f.k_neighbors => {
            let r = filter_outliers(&points, &values, f)?;
            let removed = r.removed.len();
            (r.points, r.values, removed)
        }
        _ => (points, values, 0),
    };
    let fit = FitOptions {
        seed: rng::derive(seed, 1),
        ..opts.fit.clone()
    };
    let model = GpModel::fit(&points, &values, &fit)?;
    let report = mc_analyze_joint(|p| model.predict(p), device, cfg, validity, rng::derive(seed, 2))?;
    let GpHyper {
        mu0,
        sigma0_sq,
        lengthscales,
    } = model.hyper().clone();
    Ok((
        StudyReport {
            report,
            w_train,
            n_failed,
            n_removed,
            n_used: points.len(),
            mu0,
            sigma0_sq,
            lengthscales,
            seed,
        },
        model,
    ))
}

/// Resonance-like synthetic response over `(dT [nm], angle [deg], dg [nm])`
/// around `(0, 90, 0)`: a Lorentzian Purcell factor of peak 60 in a linear
/// detuning. Far-detuned points, where no resonance would be found, return
/// `None`.
pub fn synthetic_resonance(p: &[f64]) -> Option<f64> {
    let detuning = 0.5 * p[0] + 2.0 * (p[1] - 90.0) - 0.4 * p[2];
    if detuning.abs() > 6.0 {
        return None;
    }
    Some(60.0 / (1.0 + (detuning / 0.6).powi(2)))
}

/// Device scatter of the fabrication study: `(0.8 nm, 0.1 deg, 0.8 nm)` about
/// `(0 nm, 90 deg, 0 nm)`.
pub fn fabrication_device() -> MvnSpec {
    MvnSpec::new(vec![0.0, 90.0, 0.0], vec![0.8, 0.1, 0.8]).expect("valid fabrication spread")
}

/// Training spread of the fabrication study, `(3.75 nm, 1.35 deg, 3.75 nm)`,
/// as per-dimension factors of [`fabrication_device`].
pub fn fabrication_kappas() -> Vec<f64> {
    vec![3.75 / 0.8, 1.35 / 0.1, 3.75 / 0.8]
}
