//! Matern-5/2 Gaussian-process regression over binary subset vectors.
//!
//! Inputs are points of `{0,1}^m`; the squared Euclidean distance between two
//! subsets is their Hamming distance, so the kernel is a function of how many
//! examples the two subsets disagree on. Targets are standardized before
//! fitting and every public prediction is reported in the original units.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::pool::SubsetVector;

const SQRT5: f64 = 2.236_067_977_499_79;

/// Number of grid-seeded restarts used by [`fit_gp`].
pub const FIT_STARTS: usize = 32;
/// Grid starts, best first, from which coordinate ascent is run.
pub const FIT_ASCENTS: usize = 4;
/// Maximum coordinate-descent sweeps per restart.
pub const FIT_MAX_STEPS: usize = 200;

/// Matern-5/2 kernel hyperparameters, in standardized-target units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub lengthscale: f64,
    pub signal_var: f64,
    pub noise_var: f64,
}

/// Box constraints on [`KernelParams`] for an `m`-dimensional input space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBounds {
    pub lengthscale: (f64, f64),
    pub signal_var: (f64, f64),
    pub noise_var: (f64, f64),
}

impl ParamBounds {
    pub fn for_dim(m: usize) -> Self {
        let root = (m.max(1) as f64).sqrt();
        ParamBounds {
            lengthscale: (0.1 * root, 10.0 * root),
            signal_var: (1e-2, 1e2),
            noise_var: (1e-6, 1.0),
        }
    }

    fn log_box(&self) -> [(f64, f64); 3] {
        [
            (self.lengthscale.0.ln(), self.lengthscale.1.ln()),
            (self.signal_var.0.ln(), self.signal_var.1.ln()),
            (self.noise_var.0.ln(), self.noise_var.1.ln()),
        ]
    }

    pub fn contains(&self, p: &KernelParams) -> bool {
        let within =
            |v: f64, (lo, hi): (f64, f64)| v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12);
        within(p.lengthscale, self.lengthscale)
            && within(p.signal_var, self.signal_var)
            && within(p.noise_var, self.noise_var)
    }
}

impl KernelParams {
    pub fn new(lengthscale: f64, signal_var: f64, noise_var: f64) -> Result<Self> {
        for (name, v) in [
            ("lengthscale", lengthscale),
            ("signal_var", signal_var),
            ("noise_var", noise_var),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(KernelParams {
            lengthscale,
            signal_var,
            noise_var,
        })
    }

    fn from_log(theta: [f64; 3]) -> Self {
        KernelParams {
            lengthscale: theta[0].exp(),
            signal_var: theta[1].exp(),
            noise_var: theta[2].exp(),
        }
    }

    fn to_log(self) -> [f64; 3] {
        [
            self.lengthscale.ln(),
            self.signal_var.ln(),
            self.noise_var.ln(),
        ]
    }

    /// Kernel value at squared input distance `d2`.
    pub fn eval_sq_dist(&self, d2: f64) -> f64 {
        let r = d2.max(0.0).sqrt() / self.lengthscale;
        let sr = SQRT5 * r;
        self.signal_var * (1.0 + sr + 5.0 / 3.0 * r * r) * (-sr).exp()
    }

    /// `d k / d x` for `k(x, y)` with `diff = x - y`, written into `out` scaled by `weight`.
    fn accumulate_grad(&self, diff: &[f64], weight: f64, out: &mut [f64]) {
        let d2: f64 = diff.iter().map(|d| d * d).sum();
        let r = d2.sqrt() / self.lengthscale;
        let sr = SQRT5 * r;
        let coef = -5.0 * self.signal_var / (3.0 * self.lengthscale * self.lengthscale)
            * (1.0 + sr)
            * (-sr).exp();
        for (o, d) in out.iter_mut().zip(diff) {
            *o += weight * coef * d;
        }
    }
}

/// Matern-5/2 covariance between two subsets.
pub fn kernel(a: &SubsetVector, b: &SubsetVector, params: &KernelParams) -> Result<f64> {
    let h = a.hamming(b)?;
    Ok(params.eval_sq_dist(h as f64))
}

/// A fitted GP surrogate. Immutable once built.
#[derive(Debug, Clone)]
pub struct GPModel {
    params: KernelParams,
    dim: usize,
    train_inputs: Vec<SubsetVector>,
    train_x: Vec<Vec<f64>>,
    train_targets: Vec<f64>,
    target_mean: f64,
    target_std: f64,
    factor: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GPModel {
    /// A model with no observations: predictions equal the prior.
    pub fn prior(dim: usize, params: KernelParams) -> Self {
        GPModel {
            params,
            dim,
            train_inputs: Vec::new(),
            train_x: Vec::new(),
            train_targets: Vec::new(),
            target_mean: 0.0,
            target_std: 1.0,
            factor: None,
            alpha: DVector::zeros(0),
            jitter: 0.0,
        }
    }

    /// Conditions on the data with fixed hyperparameters (no likelihood search).
    pub fn with_params(
        inputs: &[SubsetVector],
        targets: &[f64],
        params: KernelParams,
    ) -> Result<Self> {
        let data = Standardized::new(inputs, targets)?;
        data.condition(params)
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_train(&self) -> usize {
        self.train_inputs.len()
    }

    pub fn train_inputs(&self) -> &[SubsetVector] {
        &self.train_inputs
    }

    /// Training targets after standardization.
    pub fn train_targets(&self) -> &[f64] {
        &self.train_targets
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_std(&self) -> f64 {
        self.target_std
    }

    /// Diagonal jitter that was needed to factorize the kernel matrix.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular factor of `K + (noise + jitter) I`.
    pub fn factor_l(&self) -> Option<DMatrix<f64>> {
        self.factor.as_ref().map(|c| c.l())
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        match &self.factor {
            None => 0.0,
            Some(chol) => lml_from_factor(chol, &self.alpha, &self.train_targets),
        }
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }

    /// Posterior mean and variance at a subset, in original target units.
    pub fn posterior(&self, e: &SubsetVector) -> Result<(f64, f64)> {
        self.check_dim(e.len())?;
        Ok(self.mean_var_at(&e.to_f64()))
    }

    /// Posterior mean and variance at a point of the continuous relaxation `[0,1]^m`.
    pub fn posterior_relaxed(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x.len())?;
        Ok(self.mean_var_at(x))
    }

    fn cross_cov(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.train_x.len(),
            self.train_x
                .iter()
                .map(|xi| self.params.eval_sq_dist(sq_dist(x, xi))),
        )
    }

    fn mean_var_at(&self, x: &[f64]) -> (f64, f64) {
        let sf2 = self.params.signal_var;
        let std2 = self.target_std * self.target_std;
        let Some(chol) = &self.factor else {
            return (self.target_mean, sf2 * std2);
        };
        let k = self.cross_cov(x);
        let mean = k.dot(&self.alpha);
        let v = chol
            .l_dirty()
            .solve_lower_triangular(&k)
            .expect("cholesky factor has a nonzero diagonal");
        // Round-off can push the variance slightly below zero near training points.
        let var = (sf2 - v.norm_squared()).max(0.0);
        (mean * self.target_std + self.target_mean, var * std2)
    }

    /// Gradient of the posterior mean with respect to the input, evaluated
    /// at the relaxation of `e`.
    pub fn posterior_gradient(&self, e: &SubsetVector) -> Result<Vec<f64>> {
        self.check_dim(e.len())?;
        Ok(self.mean_gradient_at(&e.to_f64()))
    }

    /// Gradient of the posterior mean at a point of `[0,1]^m`.
    pub fn posterior_gradient_relaxed(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        Ok(self.mean_gradient_at(x))
    }

    fn mean_gradient_at(&self, x: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.dim];
        let mut diff = vec![0.0; self.dim];
        for (xi, &a) in self.train_x.iter().zip(self.alpha.iter()) {
            for ((d, &p), &q) in diff.iter_mut().zip(x).zip(xi) {
                *d = p - q;
            }
            self.params.accumulate_grad(&diff, a, &mut grad);
        }
        for g in &mut grad {
            *g *= self.target_std;
        }
        grad
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn lml_from_factor(chol: &Cholesky<f64, Dyn>, alpha: &DVector<f64>, y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let fit: f64 = y.iter().zip(alpha.iter()).map(|(a, b)| a * b).sum();
    let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum();
    -0.5 * fit - logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Training data after target standardization, with cached pairwise distances.
struct Standardized {
    dim: usize,
    inputs: Vec<SubsetVector>,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    mean: f64,
    std: f64,
    /// Pairwise Hamming distances, row-major.
    hamming: Vec<usize>,
}

impl Standardized {
    fn new(inputs: &[SubsetVector], targets: &[f64]) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidArgument(
                "fit_gp needs at least one input".into(),
            ));
        }
        if inputs.len() != targets.len() {
            return Err(Error::LengthMismatch {
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        let dim = inputs[0].len();
        for e in inputs {
            if e.len() != dim {
                return Err(Error::LengthMismatch {
                    expected: dim,
                    found: e.len(),
                });
            }
        }
        if let Some(bad) = targets.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("training target {bad}")));
        }
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = if targets.len() >= 2 && var > 0.0 {
            var.sqrt()
        } else {
            1.0
        };
        let y = targets.iter().map(|v| (v - mean) / std).collect();
        let x: Vec<Vec<f64>> = inputs.iter().map(SubsetVector::to_f64).collect();
        let mut hamming = Vec::with_capacity(inputs.len() * inputs.len());
        for a in inputs {
            for b in inputs {
                hamming.push(a.hamming(b)?);
            }
        }
        Ok(Standardized {
            dim,
            inputs: inputs.to_vec(),
            x,
            y,
            mean,
            std,
            hamming,
        })
    }

    fn kernel_matrix(&self, p: &KernelParams) -> DMatrix<f64> {
        // Squared distances between binary vectors are integers in 0..=dim.
        let table: Vec<f64> = (0..=self.dim).map(|d| p.eval_sq_dist(d as f64)).collect();
        let t = self.y.len();
        let mut k = DMatrix::from_fn(t, t, |i, j| table[self.hamming[i * t + j]]);
        for i in 0..t {
            k[(i, i)] += p.noise_var;
        }
        k
    }

    /// Cholesky factor of `K + noise I`, adding jitter when needed.
    fn factorize(&self, p: &KernelParams) -> Option<(Cholesky<f64, Dyn>, f64)> {
        let base = self.kernel_matrix(p);
        if let Some(c) = Cholesky::new(base.clone()) {
            return Some((c, 0.0));
        }
        let mut jitter = 1e-8 * p.signal_var;
        while jitter <= 1e-4 * p.signal_var * (1.0 + 1e-9) {
            let mut m = base.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            if let Some(c) = Cholesky::new(m) {
                return Some((c, jitter));
            }
            jitter *= 2.0;
        }
        None
    }

    fn lml(&self, p: &KernelParams) -> f64 {
        match self.factorize(p) {
            Some((chol, _)) => {
                let alpha = chol.solve(&DVector::from_column_slice(&self.y));
                let v = lml_from_factor(&chol, &alpha, &self.y);
                if v.is_finite() {
                    v
                } else {
                    f64::NEG_INFINITY
                }
            }
            None => f64::NEG_INFINITY,
        }
    }

    fn condition(self, params: KernelParams) -> Result<GPModel> {
        let (chol, jitter) = self.factorize(&params).ok_or(Error::IllConditioned)?;
        let alpha = chol.solve(&DVector::from_column_slice(&self.y));
        Ok(GPModel {
            params,
            dim: self.dim,
            train_inputs: self.inputs,
            train_x: self.x,
            train_targets: self.y,
            target_mean: self.mean,
            target_std: self.std,
            factor: Some(chol),
            alpha,
            jitter,
        })
    }
}

/// The deterministic restart grid used by [`fit_gp`] for an `m`-dimensional problem.
///
/// Four lengthscales by four signal variances by two noise variances, spaced
/// evenly in log space inside [`ParamBounds::for_dim`].
pub fn fit_grid(m: usize) -> Vec<KernelParams> {
    let bounds = ParamBounds::for_dim(m).log_box();
    let at =
        |(lo, hi): (f64, f64), i: usize, n: usize| lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
    let mut grid = Vec::with_capacity(FIT_STARTS);
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..2 {
                grid.push(KernelParams::from_log([
                    at(bounds[0], i, 4),
                    at(bounds[1], j, 4),
                    at(bounds[2], k, 2),
                ]));
            }
        }
    }
    grid
}

/// Fits a GP by maximizing the log marginal likelihood over the kernel
/// hyperparameters.
///
/// All [`fit_grid`] points are scored and the best [`FIT_ASCENTS`] of them
/// (earlier grid points first on ties) seed a coordinate ascent in
/// log-parameter space of at most [`FIT_MAX_STEPS`] sweeps. The best local
/// optimum wins, ties going to the earlier start.
pub fn fit_gp(inputs: &[SubsetVector], targets: &[f64]) -> Result<GPModel> {
    let data = Standardized::new(inputs, targets)?;
    let bounds = ParamBounds::for_dim(data.dim).log_box();
    let mut starts: Vec<(f64, [f64; 3])> = fit_grid(data.dim)
        .into_iter()
        .map(|p| (data.lml(&p), p.to_log()))
        .collect();
    starts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best: Option<(f64, [f64; 3])> = None;
    for &(_, start) in starts.iter().take(FIT_ASCENTS) {
        let (value, theta) = coordinate_ascent(&data, start, &bounds);
        if value.is_finite() && best.is_none_or(|(b, _)| value > b) {
            best = Some((value, theta));
        }
    }
    let (_, theta) = best.ok_or(Error::IllConditioned)?;
    data.condition(KernelParams::from_log(theta))
}

fn coordinate_ascent(
    data: &Standardized,
    start: [f64; 3],
    bounds: &[(f64, f64); 3],
) -> (f64, [f64; 3]) {
    let mut theta = start;
    let mut value = data.lml(&KernelParams::from_log(theta));
    let mut steps: [f64; 3] = std::array::from_fn(|d| (bounds[d].1 - bounds[d].0) / 8.0);
    for _ in 0..FIT_MAX_STEPS {
        for d in 0..3 {
            let mut moved = false;
            for dir in [1.0, -1.0] {
                let mut cand = theta;
                cand[d] = (theta[d] + dir * steps[d]).clamp(bounds[d].0, bounds[d].1);
                if cand[d] == theta[d] {
                    continue;
                }
                let v = data.lml(&KernelParams::from_log(cand));
                if v > value {
                    theta = cand;
                    value = v;
                    moved = true;
                    break;
                }
            }
            if !moved {
                steps[d] *= 0.5;
            }
        }
        if steps.iter().all(|&s| s < 1e-4) {
            break;
        }
    }
    (value, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::pool::sample_subset;

    fn unit() -> KernelParams {
        KernelParams::new(1.0, 1.0, 1e-6).unwrap()
    }

    fn random_design(m: usize, t: usize, rng: &mut ChaCha8Rng) -> (Vec<SubsetVector>, Vec<f64>) {
        let xs: Vec<_> = (0..t).map(|_| sample_subset(m, rng).unwrap()).collect();
        let ys = (0..t).map(|_| rng.random_range(-1.0..1.0)).collect();
        (xs, ys)
    }

    #[test]
    fn kernel_at_zero_distance_is_signal_variance() {
        let p = KernelParams::new(0.7, 2.5, 1e-3).unwrap();
        let e = SubsetVector::from_bit_str("10110").unwrap();
        assert_eq!(kernel(&e, &e, &p).unwrap(), 2.5);
    }

    #[test]
    fn kernel_at_unit_distance() {
        // Closed form at r = 1: (1 + sqrt5 + 5/3) exp(-sqrt5).
        let s5 = 5f64.sqrt();
        let expected = (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        assert!((expected - 0.52399).abs() < 5e-6);
        let a = SubsetVector::from_bit_str("1100").unwrap();
        let b = SubsetVector::from_bit_str("1000").unwrap();
        assert!((kernel(&a, &b, &unit()).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn kernel_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = KernelParams::new(1.3, 0.8, 1e-4).unwrap();
        for _ in 0..100 {
            let a = sample_subset(9, &mut rng).unwrap();
            let b = sample_subset(9, &mut rng).unwrap();
            assert_eq!(kernel(&a, &b, &p).unwrap(), kernel(&b, &a, &p).unwrap());
        }
    }

    #[test]
    fn kernel_rejects_length_mismatch() {
        let a = SubsetVector::full(3);
        let b = SubsetVector::full(4);
        assert!(matches!(
            kernel(&a, &b, &unit()),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn prior_model_returns_prior() {
        let p = KernelParams::new(1.0, 2.0, 1e-3).unwrap();
        let model = GPModel::prior(4, p);
        let (mean, var) = model.posterior(&SubsetVector::full(4)).unwrap();
        assert_eq!(mean, 0.0);
        assert_eq!(var, 2.0);
        assert!(model.posterior(&SubsetVector::full(5)).is_err());
    }

    #[test]
    fn single_point_fit_interpolates() {
        let e = SubsetVector::from_bit_str("0110").unwrap();
        let model = fit_gp(std::slice::from_ref(&e), &[0.37]).unwrap();
        assert_eq!(model.target_std(), 1.0);
        let (mean, _) = model.posterior(&e).unwrap();
        assert!((mean - 0.37).abs() < 1e-12);
    }

    #[test]
    fn training_point_interpolation_at_noise_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (xs, ys) = random_design(6, 5, &mut rng);
        let p = KernelParams::new(1.0, 1.0, ParamBounds::for_dim(6).noise_var.0).unwrap();
        let model = GPModel::with_params(&xs, &ys, p).unwrap();
        let std2 = model.target_std().powi(2);
        for (x, y) in xs.iter().zip(&ys) {
            let (mean, var) = model.posterior(x).unwrap();
            assert!((mean - y).abs() < 1e-4, "{mean} vs {y}");
            assert!(var <= 1e-4 * p.signal_var * std2);
        }
    }

    #[test]
    fn fit_beats_every_grid_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (xs, ys) = random_design(8, 5, &mut rng);
        let model = fit_gp(&xs, &ys).unwrap();
        let best = model.log_marginal_likelihood();
        assert!(ParamBounds::for_dim(8).contains(model.params()));
        for p in fit_grid(8) {
            let at_grid = GPModel::with_params(&xs, &ys, p)
                .unwrap()
                .log_marginal_likelihood();
            assert!(best >= at_grid - 1e-9, "{best} < {at_grid} at {p:?}");
        }
    }

    #[test]
    fn duplicate_inputs_force_noise_up() {
        let a = SubsetVector::from_bit_str("101100").unwrap();
        let b = SubsetVector::from_bit_str("010011").unwrap();
        let xs = vec![a.clone(), a.clone(), a, b.clone(), b];
        let ys = [0.1, 0.9, 0.5, 0.3, 0.8];
        let model = fit_gp(&xs, &ys).unwrap();
        let floor = ParamBounds::for_dim(6).noise_var.0;
        assert!(
            model.params().noise_var > 10.0 * floor,
            "{:?}",
            model.params()
        );
    }

    #[test]
    fn rejects_non_finite_targets() {
        let xs = vec![
            SubsetVector::full(2),
            SubsetVector::from_bit_str("10").unwrap(),
        ];
        assert!(matches!(
            fit_gp(&xs, &[0.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn zero_targets_give_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (xs, _) = random_design(7, 6, &mut rng);
        let model = fit_gp(&xs, &[0.0; 6]).unwrap();
        for x in &xs {
            assert!(model
                .posterior_gradient(x)
                .unwrap()
                .iter()
                .all(|&g| g == 0.0));
        }
    }

    #[test]
    fn self_point_contributes_no_gradient() {
        // With one training point the posterior mean is a function of the
        // distance to it only, which is flat at zero distance.
        let e = SubsetVector::from_bit_str("1010").unwrap();
        let model = GPModel::with_params(std::slice::from_ref(&e), &[2.0], unit()).unwrap();
        assert!(model
            .posterior_gradient(&e)
            .unwrap()
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn factor_reproduces_kernel_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (xs, ys) = random_design(10, 8, &mut rng);
        let model = fit_gp(&xs, &ys).unwrap();
        let p = model.params();
        let l = model.factor_l().unwrap();
        let t = xs.len();
        let k = DMatrix::from_fn(t, t, |i, j| {
            kernel(&xs[i], &xs[j], p).unwrap() + if i == j { p.noise_var } else { 0.0 }
        });
        let err = (&l * l.transpose() - &k).norm() / k.norm();
        assert!(err < 1e-8 + model.jitter(), "relative error {err}");
    }

    #[test]
    fn standardized_targets_have_unit_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (xs, ys) = random_design(5, 6, &mut rng);
        let model = fit_gp(&xs, &ys).unwrap();
        let y = model.train_targets();
        let n = y.len() as f64;
        let mean = y.iter().sum::<f64>() / n;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kernel_matrix_is_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let m = rng.random_range(2..12);
            let t = rng.random_range(2..15);
            let xs: Vec<_> = (0..t)
                .map(|_| sample_subset(m, &mut rng).unwrap())
                .collect();
            let p = KernelParams::new(rng.random_range(0.3..3.0), rng.random_range(0.1..5.0), 1e-6)
                .unwrap();
            let k = DMatrix::from_fn(t, t, |i, j| kernel(&xs[i], &xs[j], &p).unwrap());
            let min_eig = k.symmetric_eigenvalues().min();
            assert!(min_eig >= -1e-8 * p.signal_var, "{min_eig}");
        }
    }

    #[test]
    fn extra_observation_never_raises_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..30 {
            let m = 8;
            let (mut xs, mut ys) = random_design(m, 6, &mut rng);
            let p = KernelParams::new(1.5, 1.0, 1e-4).unwrap();
            let before = GPModel::with_params(&xs, &ys, p).unwrap();
            xs.push(sample_subset(m, &mut rng).unwrap());
            ys.push(rng.random_range(-1.0..1.0));
            // Variance in standardized units does not depend on the targets,
            // so compare after undoing each model's scaling.
            let after = GPModel::with_params(&xs, &ys, p).unwrap();
            for _ in 0..10 {
                let q = sample_subset(m, &mut rng).unwrap();
                let vb = before.posterior(&q).unwrap().1 / before.target_std().powi(2);
                let va = after.posterior(&q).unwrap().1 / after.target_std().powi(2);
                assert!(va <= vb + 1e-8, "{va} > {vb}");
            }
        }
    }
}
