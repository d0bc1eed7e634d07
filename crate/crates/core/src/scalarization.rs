//! Random-weight Tchebyshev scalarization of (performance, sparsity).

use rand::Rng;

use crate::error::{Error, Result};

/// Bounds of the uniform distribution the performance weight is drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarizationConfig {
    pub beta_lb: f64,
    pub beta_ub: f64,
}

impl Default for ScalarizationConfig {
    fn default() -> Self {
        ScalarizationConfig {
            beta_lb: 0.25,
            beta_ub: 1.0,
        }
    }
}

impl ScalarizationConfig {
    pub fn new(beta_lb: f64, beta_ub: f64) -> Result<Self> {
        let cfg = ScalarizationConfig { beta_lb, beta_ub };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.beta_lb)
            && (0.0..=1.0).contains(&self.beta_ub)
            && self.beta_lb <= self.beta_ub;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "beta bounds must satisfy 0 <= lb <= ub <= 1, got [{}, {}]",
                self.beta_lb, self.beta_ub
            )))
        }
    }
}

/// Scalarized values of every evaluated point under one weight draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarizedRecord {
    pub beta: f64,
    pub h_values: Vec<f64>,
}

/// Draws `beta ~ Uniform(beta_lb, beta_ub)`.
pub fn sample_beta<R: Rng + ?Sized>(cfg: &ScalarizationConfig, rng: &mut R) -> f64 {
    // Always consume one draw so the stream does not depend on the bounds.
    let u: f64 = rng.random();
    if cfg.beta_lb == cfg.beta_ub {
        return cfg.beta_lb;
    }
    cfg.beta_lb + (cfg.beta_ub - cfg.beta_lb) * u
}

/// Tchebyshev scalarization of evaluated points:
/// `h_i = max{ beta (g_i - max_k g_k), -(1 - beta) |e_i| }`.
pub fn tch(metrics: &[f64], cardinalities: &[usize], beta: f64) -> Result<Vec<f64>> {
    if metrics.is_empty() {
        return Err(Error::InvalidArgument(
            "tch needs at least one point".into(),
        ));
    }
    if metrics.len() != cardinalities.len() {
        return Err(Error::LengthMismatch {
            expected: metrics.len(),
            found: cardinalities.len(),
        });
    }
    if let Some(g) = metrics.iter().find(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("metric {g}")));
    }
    let g_max = metrics.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(metrics
        .iter()
        .zip(cardinalities)
        .map(|(&g, &c)| f64::max(beta * (g - g_max), -(1.0 - beta) * c as f64))
        .collect())
}

/// [`tch`] packaged with its weight.
pub fn scalarize(metrics: &[f64], cardinalities: &[usize], beta: f64) -> Result<ScalarizedRecord> {
    Ok(ScalarizedRecord {
        beta,
        h_values: tch(metrics, cardinalities, beta)?,
    })
}
