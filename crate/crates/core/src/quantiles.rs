//! Quantile post-processing and combination: crossing repair, capacity
//! clipping, linear quantile-regression meta-models, and hybrid wind+solar
//! aggregation with a correlation adjustment.

use crate::error::{Error, Result};
use crate::scoring::{QuantileForecast, LEVELS};
use crate::time::Period;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Repair quantile crossing by rearrangement: sort the nine values and
/// reassign them to levels in order. Idempotent.
pub fn sort_quantiles(forecast: &QuantileForecast) -> QuantileForecast {
    let mut values = forecast.values;
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite by construction"));
    QuantileForecast {
        period: forecast.period,
        values,
    }
}

/// Cap every quantile at the available capacity and floor at zero.
pub fn clip_to_capacity(forecast: &QuantileForecast, capacity: f64) -> Result<QuantileForecast> {
    if !(capacity.is_finite() && capacity >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "capacity must be finite and non-negative, got {capacity}"
        )));
    }
    let mut values = forecast.values;
    for v in &mut values {
        *v = v.min(capacity).max(0.0);
    }
    Ok(QuantileForecast {
        period: forecast.period,
        values,
    })
}

/// Linear model predicting one target quantile from covariate quantiles.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileRegressionModel {
    pub level: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl QuantileRegressionModel {
    pub fn predict(&self, covariates: &[f64]) -> Result<f64> {
        if covariates.len() != self.coefficients.len() {
            return Err(Error::Shape {
                expected: self.coefficients.len(),
                got: covariates.len(),
            });
        }
        Ok(self.intercept
            + self
                .coefficients
                .iter()
                .zip(covariates)
                .map(|(c, x)| c * x)
                .sum::<f64>())
    }
}

/// Solver controls for [`fit_quantile_regression`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Exact vertex polish is attempted when the parameter count is at most
    /// this; larger models rely on the smoothed iterations alone.
    pub polish_max_params: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            tolerance: 1e-12,
            polish_max_params: 10,
        }
    }
}

/// Empirical pinball loss of a parameter vector over a dataset.
fn pinball_objective(rows: &[Vec<f64>], targets: &[f64], alpha: f64, params: &DVector<f64>) -> f64 {
    let mut total = 0.0;
    for (row, &y) in rows.iter().zip(targets) {
        let mut pred = params[0];
        for (j, &x) in row.iter().enumerate() {
            pred += params[j + 1] * x;
        }
        let r = y - pred;
        total += if r >= 0.0 { alpha * r } else { (alpha - 1.0) * r };
    }
    total
}

/// Fit a linear quantile regression minimising empirical pinball loss.
///
/// Covariates are rows of equal arity; an intercept is always included.
/// The solver runs iteratively reweighted least squares on a smoothed
/// objective with a decreasing smoothing parameter, then polishes small
/// models by exact search over interpolating vertices (the minimiser of a
/// piecewise-linear convex objective passes through as many observations as
/// there are parameters).
pub fn fit_quantile_regression(
    covariates: &[Vec<f64>],
    targets: &[f64],
    level: f64,
    options: &FitOptions,
) -> Result<QuantileRegressionModel> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    let n = covariates.len();
    if n != targets.len() {
        return Err(Error::Shape {
            expected: n,
            got: targets.len(),
        });
    }
    if n == 0 {
        return Err(Error::Fit("no observations".into()));
    }
    let arity = covariates[0].len();
    let p = arity + 1;
    if n < p {
        return Err(Error::Fit(format!(
            "{n} observations cannot identify {p} parameters"
        )));
    }
    for (i, row) in covariates.iter().enumerate() {
        if row.len() != arity {
            return Err(Error::Shape {
                expected: arity,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit(format!("non-finite covariate in row {i}")));
        }
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite target".into()));
    }

    // Design matrix with a leading intercept column.
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { covariates[i][j - 1] });
    let rank = design.clone().svd(false, false).rank(1e-9 * (n as f64).sqrt());
    if rank < p {
        return Err(Error::Fit(format!(
            "design matrix is rank deficient (rank {rank} < {p} parameters)"
        )));
    }

    let scale = targets.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut params = DVector::zeros(p);
    let mut best = params.clone();
    let mut best_loss = pinball_objective(covariates, targets, level, &params);

    // Continuation over the smoothing parameter.
    let mut eps = 1e-2 * scale;
    while eps > 1e-14 * scale {
        for _ in 0..options.max_iterations {
            let mut a = DMatrix::<f64>::zeros(p, p);
            let mut b = DVector::<f64>::zeros(p);
            for (i, &target) in targets.iter().enumerate() {
                let xi = design.row(i).transpose();
                let r = target - xi.dot(&params);
                let w = 0.5 / (r.abs() + eps);
                a.ger(w, &xi, &xi, 1.0);
                b.axpy(w * target + (level - 0.5), &xi, 1.0);
            }
            let next = a
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::Fit("weighted normal equations are singular".into()))?;
            let step = (&next - &params).norm();
            params = next;
            if step < options.tolerance * (1.0 + params.norm()) {
                break;
            }
        }
        let loss = pinball_objective(covariates, targets, level, &params);
        if loss < best_loss {
            best_loss = loss;
            best = params.clone();
        }
        eps *= 1e-2;
    }

    if p <= options.polish_max_params {
        if let Some((polished, loss)) =
            polish_by_vertex_search(&design, covariates, targets, level, &best)
        {
            if loss < best_loss {
                best_loss = loss;
                best = polished;
            }
        }
    }
    let _ = best_loss;

    Ok(QuantileRegressionModel {
        level,
        intercept: best[0],
        coefficients: best.iter().skip(1).copied().collect(),
    })
}

/// Try exact fits through the p observations nearest the current solution.
/// The optimum of the quantile-regression objective interpolates p data
/// points, so enumerating subsets of the smallest residuals usually lands on
/// the exact vertex.
fn polish_by_vertex_search(
    design: &DMatrix<f64>,
    rows: &[Vec<f64>],
    targets: &[f64],
    alpha: f64,
    current: &DVector<f64>,
) -> Option<(DVector<f64>, f64)> {
    let n = design.nrows();
    let p = design.ncols();
    let mut order: Vec<usize> = (0..n).collect();
    let residual = |i: usize| (targets[i] - design.row(i).transpose().dot(current)).abs();
    order.sort_by(|&a, &b| residual(a).partial_cmp(&residual(b)).unwrap());

    // Keep the candidate pool small enough that C(m, p) stays cheap.
    let mut m = (2 * p + 2).min(n);
    while binomial(m, p) > 20_000 && m > p {
        m -= 1;
    }
    let pool = &order[..m];

    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut subset = vec![0usize; p];
    enumerate_subsets(pool, p, &mut subset, 0, 0, &mut |chosen| {
        let a = DMatrix::from_fn(p, p, |r, c| design[(chosen[r], c)]);
        let b = DVector::from_fn(p, |r, _| targets[chosen[r]]);
        if let Some(candidate) = a.lu().solve(&b) {
            if candidate.iter().all(|v| v.is_finite()) {
                let loss = pinball_objective(rows, targets, alpha, &candidate);
                if best.as_ref().is_none_or(|(_, l)| loss < *l) {
                    best = Some((candidate, loss));
                }
            }
        }
    });
    best
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1usize;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

fn enumerate_subsets(
    pool: &[usize],
    k: usize,
    buf: &mut Vec<usize>,
    depth: usize,
    start: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        visit(buf);
        return;
    }
    for i in start..=pool.len().saturating_sub(k - depth) {
        buf[depth] = pool[i];
        enumerate_subsets(pool, k, buf, depth + 1, i + 1, visit);
    }
}

/// Predict all nine quantiles with one meta-model per level, then repair
/// crossing and floor at zero.
pub fn predict_meta(
    models: &[QuantileRegressionModel],
    base_quantiles: &[f64],
    period: Period,
) -> Result<QuantileForecast> {
    if models.len() != 9 {
        return Err(Error::Shape {
            expected: 9,
            got: models.len(),
        });
    }
    let mut values = [0.0; 9];
    for (i, model) in models.iter().enumerate() {
        values[i] = model.predict(base_quantiles)?.max(0.0);
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite predictions"));
    QuantileForecast::new(period, values)
}

/// Build the meta-model covariate vector from per-model quantile predictions,
/// filling any missing model with the level-wise mean of the available ones.
pub fn fill_missing_base(models: &[Option<[f64; 9]>]) -> Result<Vec<f64>> {
    let available: Vec<&[f64; 9]> = models.iter().flatten().collect();
    if available.is_empty() {
        return Err(Error::InsufficientData(
            "no base model predictions available".into(),
        ));
    }
    let mut level_mean = [0.0; 9];
    for q in &available {
        for i in 0..9 {
            level_mean[i] += q[i];
        }
    }
    for v in &mut level_mean {
        *v /= available.len() as f64;
    }
    let mut out = Vec::with_capacity(models.len() * 9);
    for m in models {
        out.extend_from_slice(m.as_ref().unwrap_or(&level_mean));
    }
    Ok(out)
}

/// Controls for hybrid wind+solar aggregation.
#[derive(Debug, Clone)]
pub struct AggregationConfig {
    pub rho: f64,
    pub sample_count: usize,
    pub seed: u64,
}

impl AggregationConfig {
    pub fn new(rho: f64, sample_count: usize, seed: u64) -> Result<Self> {
        if !(rho.is_finite() && (-1.0..=1.0).contains(&rho)) {
            return Err(Error::InvalidInput(format!(
                "correlation must lie in [-1, 1], got {rho}"
            )));
        }
        if sample_count < 1000 {
            return Err(Error::InvalidInput(format!(
                "sample_count must be at least 1000, got {sample_count}"
            )));
        }
        Ok(AggregationConfig {
            rho,
            sample_count,
            seed,
        })
    }
}

impl Default for AggregationConfig {
    /// Plain level-wise addition; the correlation adjustment is opt-in.
    fn default() -> Self {
        AggregationConfig {
            rho: 1.0,
            sample_count: 100_000,
            seed: 0,
        }
    }
}

/// Quantile function implied by nine quantiles: piecewise linear between
/// levels, flat beyond the 10% and 90% points.
pub fn interpolated_quantile(values: &[f64; 9], u: f64) -> f64 {
    if u <= LEVELS[0] {
        return values[0];
    }
    if u >= LEVELS[8] {
        return values[8];
    }
    let t = (u - LEVELS[0]) / 0.1;
    let i = (t.floor() as usize).min(7);
    let frac = t - i as f64;
    values[i] + frac * (values[i + 1] - values[i])
}

/// Mean of the distribution implied by nine quantiles under the same
/// interpolation: 0.15*(q10+q90) + 0.1*(q20+...+q80).
pub fn interpolated_mean(values: &[f64; 9]) -> f64 {
    0.15 * (values[0] + values[8]) + 0.1 * values[1..8].iter().sum::<f64>()
}

/// Linear-interpolation empirical quantile of a sorted sample.
pub fn empirical_quantile(sorted: &[f64], u: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "empty sample");
    let h = (n - 1) as f64 * u;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Combine wind and solar quantile forecasts into a hybrid total.
///
/// With `rho = 1` the margins are added level by level (comonotonic
/// addition). Otherwise the sum distribution is built by Monte Carlo with a
/// Gaussian dependence structure: correlated standard-normal pairs are mapped
/// through each margin's interpolated quantile function, summed, and the nine
/// empirical quantiles of the sums returned. A constant margin is folded in
/// as an exact shift. Deterministic for a given seed.
pub fn aggregate_hybrid(
    wind: &QuantileForecast,
    solar: &QuantileForecast,
    config: &AggregationConfig,
) -> Result<QuantileForecast> {
    if !wind.is_monotone() || !solar.is_monotone() {
        return Err(Error::Precondition(
            "aggregation needs monotone margins; apply sort_quantiles first".into(),
        ));
    }
    let shift_by = |base: &QuantileForecast, c: f64| {
        let mut values = base.values;
        for v in &mut values {
            *v += c;
        }
        QuantileForecast::new(wind.period, values)
    };
    // Degenerate margins add a constant, independent of the dependence model.
    if solar.values[0] == solar.values[8] {
        return shift_by(wind, solar.values[0]);
    }
    if wind.values[0] == wind.values[8] {
        return shift_by(solar, wind.values[0]);
    }
    if config.rho == 1.0 {
        let mut values = [0.0; 9];
        for (i, v) in values.iter_mut().enumerate() {
            *v = wind.values[i] + solar.values[i];
        }
        return QuantileForecast::new(wind.period, values);
    }

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cross = (1.0 - config.rho * config.rho).sqrt();
    let mut sums = Vec::with_capacity(config.sample_count);
    for _ in 0..config.sample_count {
        let z1: f64 = sample_standard_normal(&mut rng);
        let z2: f64 = config.rho * z1 + cross * sample_standard_normal(&mut rng);
        let u1 = normal.cdf(z1);
        let u2 = normal.cdf(z2);
        sums.push(
            interpolated_quantile(&wind.values, u1) + interpolated_quantile(&solar.values, u2),
        );
    }
    sums.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mut values = [0.0; 9];
    for (i, &alpha) in LEVELS.iter().enumerate() {
        values[i] = empirical_quantile(&sums, alpha).max(0.0);
    }
    QuantileForecast::new(wind.period, values)
}

/// Box-Muller draw; avoids depending on distribution crates for sampling so
/// the stream is pinned to the seeded generator alone.
fn sample_standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Serialize meta-models to the versioned text format, one model per line:
/// `level intercept c1,c2,...`.
pub fn models_to_text(models: &[QuantileRegressionModel]) -> String {
    let mut out = String::from("quantile-regression-models v1\n");
    for m in models {
        let coeffs: Vec<String> = m.coefficients.iter().map(|c| format!("{c:.17e}")).collect();
        out.push_str(&format!(
            "level={} intercept={:.17e} coefficients={}\n",
            m.level,
            m.intercept,
            coeffs.join(",")
        ));
    }
    out
}

/// Parse the text format produced by [`models_to_text`].
pub fn models_from_text(text: &str) -> Result<Vec<QuantileRegressionModel>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty model file".into()))?;
    if header.trim() != "quantile-regression-models v1" {
        return Err(Error::InvalidInput(format!(
            "unsupported model format header '{header}'"
        )));
    }
    let mut models = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut level = None;
        let mut intercept = None;
        let mut coefficients = None;
        for token in line.split_whitespace() {
            let (key, value) = token.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("model line {}: bad token '{token}'", lineno + 2))
            })?;
            match key {
                "level" => level = Some(parse_f64(value, lineno)?),
                "intercept" => intercept = Some(parse_f64(value, lineno)?),
                "coefficients" => {
                    let cs: Result<Vec<f64>> =
                        value.split(',').map(|c| parse_f64(c, lineno)).collect();
                    coefficients = Some(cs?);
                }
                other => {
                    return Err(Error::InvalidInput(format!(
                        "model line {}: unknown key '{other}'",
                        lineno + 2
                    )))
                }
            }
        }
        match (level, intercept, coefficients) {
            (Some(level), Some(intercept), Some(coefficients)) => {
                models.push(QuantileRegressionModel {
                    level,
                    intercept,
                    coefficients,
                })
            }
            _ => {
                return Err(Error::InvalidInput(format!(
                    "model line {}: missing level/intercept/coefficients",
                    lineno + 2
                )))
            }
        }
    }
    Ok(models)
}

fn parse_f64(s: &str, lineno: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|e| Error::InvalidInput(format!("model line {}: {e}", lineno + 2)))
}
