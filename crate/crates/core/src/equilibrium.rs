//! Model parameters, contracts, Nash efforts and direct profit accounting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::network::Network;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Peer-effect strength; negative values model substitutes.
    pub lambda: f64,
    /// CARA coefficient.
    pub r: f64,
    /// Variance of the output shock.
    pub sigma2: f64,
    /// Effort-cost scale.
    #[serde(default = "unit")]
    pub v: f64,
}

fn unit() -> f64 {
    1.0
}

impl ModelParams {
    pub fn new(lambda: f64, r: f64, sigma2: f64) -> Result<Self> {
        let params = ModelParams {
            lambda,
            r,
            sigma2,
            v: 1.0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_v(mut self, v: f64) -> Result<Self> {
        self.v = v;
        self.validate()?;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_sigma2(mut self, sigma2: f64) -> Self {
        self.sigma2 = sigma2;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() {
            return Err(Error::input(format!("lambda = {} is not finite", self.lambda)));
        }
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::input(format!("r = {} must be finite and non-negative", self.r)));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::input(format!(
                "sigma2 = {} must be finite and non-negative",
                self.sigma2
            )));
        }
        if !(self.v.is_finite() && self.v >= 1.0) {
            return Err(Error::input(format!("v = {} must be at least 1", self.v)));
        }
        Ok(())
    }

    /// The risk premium coefficient `r * sigma2`.
    pub fn risk(&self) -> f64 {
        self.r * self.sigma2
    }

    /// The homogeneous solvers work with unit effort cost; other values of
    /// `v` go through the heterogeneous model with `V = v I`.
    pub(crate) fn require_unit_cost(&self) -> Result<()> {
        self.validate()?;
        if self.v != 1.0 {
            return Err(Error::input(format!(
                "v = {} is only supported by the heterogeneous solver",
                self.v
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contract {
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
}

impl Contract {
    pub fn new(alpha: DVector<f64>, beta: DVector<f64>) -> Result<Self> {
        linalg::check_len("beta", &beta, alpha.len())?;
        linalg::check_len("alpha", &alpha, alpha.len())?;
        Ok(Contract { alpha, beta })
    }

    pub fn zero(n: usize) -> Self {
        Contract {
            alpha: DVector::zeros(n),
            beta: DVector::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumOutcome {
    pub efforts: DVector<f64>,
    pub expected_output: f64,
    /// Expected wages `beta_i + alpha_i * 1'e`.
    pub wages: DVector<f64>,
    pub certainty_equivalents: DVector<f64>,
    pub expected_profit: f64,
    /// Set when some equilibrium effort is negative (possible with substitutes).
    pub negative_effort: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Assumption2Report {
    pub threshold: f64,
    /// `lambda * mu_1`, with `mu_1` the spectral radius.
    pub lhs: f64,
    pub pass: bool,
    pub spectral_radius: f64,
}

/// `(1 + x - sqrt(1 + x)) / x`, evaluated as `sqrt(1+x) / (sqrt(1+x) + 1)`
/// which is exact at `x = 0` and free of cancellation for small `x`.
pub fn assumption2_threshold(x: f64) -> f64 {
    let s = (1.0 + x).sqrt();
    s / (s + 1.0)
}

/// `kappa` times the largest admissible `lambda` for spectral radius `mu1`;
/// zero for the empty network.
pub fn lambda_from_fraction(kappa: f64, mu1: f64, risk: f64) -> f64 {
    if mu1 > 0.0 {
        kappa * assumption2_threshold(risk) / mu1
    } else {
        0.0
    }
}

pub fn check_assumption2(network: &Network, params: &ModelParams) -> Assumption2Report {
    let rho = network.spectral_radius();
    let threshold = assumption2_threshold(params.risk());
    let lhs = params.lambda * rho;
    Assumption2Report {
        threshold,
        lhs,
        pass: lhs <= threshold,
        spectral_radius: rho,
    }
}

/// Like [`check_assumption2`] but turns a failure into `InvalidRegime`.
pub fn require_assumption2(network: &Network, params: &ModelParams) -> Result<Assumption2Report> {
    let report = check_assumption2(network, params);
    if !report.pass {
        return Err(Error::InvalidRegime {
            message: format!(
                "lambda * mu_1 = {:.6} exceeds the threshold {:.6}",
                report.lhs, report.threshold
            ),
            report: Some(report),
        });
    }
    Ok(report)
}

/// Effort costs `psi_i = e_i^2 / 2 - lambda e_i sum_j g_ij e_j`.
pub fn effort_costs(g: &DMatrix<f64>, lambda: f64, e: &DVector<f64>) -> DVector<f64> {
    let ge = g * e;
    e.zip_map(&ge, |ei, gi| 0.5 * ei * ei - lambda * ei * gi)
}

/// Solves `(I - lambda G) e = alpha`.
pub fn nash_efforts(network: &Network, params: &ModelParams, alpha: &DVector<f64>) -> Result<DVector<f64>> {
    params.require_unit_cost()?;
    linalg::check_len("alpha", alpha, network.size())?;
    network.check_resolvent_regime(params.lambda)?;
    let n = network.size();
    let a = DMatrix::<f64>::identity(n, n) - network.adjacency() * params.lambda;
    linalg::solve(&a, alpha)
}

/// `CE_i = beta_i + alpha_i 1'e - psi_i - alpha_i^2 r sigma2 / 2`.
pub fn certainty_equivalents(
    network: &Network,
    params: &ModelParams,
    contract: &Contract,
    e: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = network.size();
    linalg::check_len("alpha", &contract.alpha, n)?;
    linalg::check_len("beta", &contract.beta, n)?;
    linalg::check_len("efforts", e, n)?;
    let total = e.sum();
    let psi = effort_costs(network.adjacency(), params.lambda, e);
    let x = params.risk();
    Ok(DVector::from_fn(n, |i, _| {
        let a = contract.alpha[i];
        contract.beta[i] + a * total - psi[i] - 0.5 * a * a * x
    }))
}

/// Equilibrium efforts, wages, certainty equivalents and profit under `contract`.
pub fn evaluate(network: &Network, params: &ModelParams, contract: &Contract) -> Result<EquilibriumOutcome> {
    let e = nash_efforts(network, params, &contract.alpha)?;
    let ce = certainty_equivalents(network, params, contract, &e)?;
    let output = e.sum();
    let wages = &contract.beta + &contract.alpha * output;
    let expected_profit = output - wages.sum();
    Ok(EquilibriumOutcome {
        negative_effort: e.iter().any(|x| *x < 0.0),
        efforts: e,
        expected_output: output,
        wages,
        certainty_equivalents: ce,
        expected_profit,
    })
}

/// `E[pi] = 1'e - sum_i (beta_i + alpha_i 1'e)` at the Nash efforts.
pub fn expected_profit_direct(network: &Network, params: &ModelParams, contract: &Contract) -> Result<f64> {
    Ok(evaluate(network, params, contract)?.expected_profit)
}

/// Profit when every participation constraint binds:
/// `1'e - e'e/2 + lambda e'Ge - (r sigma2 / 2) alpha'alpha`.
pub fn ir_substituted_profit(network: &Network, params: &ModelParams, alpha: &DVector<f64>) -> Result<f64> {
    let e = nash_efforts(network, params, alpha)?;
    let ge = network.adjacency() * &e;
    Ok(e.sum() - 0.5 * e.dot(&e) + params.lambda * e.dot(&ge) - 0.5 * params.risk() * alpha.dot(alpha))
}
