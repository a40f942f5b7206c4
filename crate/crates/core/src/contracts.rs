//! First-best and optimal granular (per-worker) linear contracts.

use nalgebra::{DMatrix, DVector};

use crate::equilibrium::{
    self, require_assumption2, Assumption2Report, Contract, ModelParams,
};
use crate::error::{Error, Result};
use crate::linalg;
use crate::network::{resolvent_sums, Direction, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct FirstBest {
    pub contract: Contract,
    pub efforts: DVector<f64>,
    pub expected_profit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GranularSolution {
    pub contract: Contract,
    pub efforts: DVector<f64>,
    /// Common-influence weights `W`.
    pub weight_matrix: DMatrix<f64>,
    /// Outgoing Bonacich centralities `C'1`.
    pub bonacich_out: DVector<f64>,
    pub certainty_equivalents: DVector<f64>,
    pub expected_profit: f64,
    pub assumption2: Assumption2Report,
}

/// `I - lambda (G + G')`.
pub(crate) fn symmetric_cost_matrix(g: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let n = g.nrows();
    DMatrix::identity(n, n) - (g + g.transpose()) * lambda
}

/// Hessian of the negated principal objective in `alpha`:
/// `C'(I - lambda (G + G'))C + r sigma2 I`.
pub(crate) fn granular_hessian(g: &DMatrix<f64>, c: &DMatrix<f64>, lambda: f64, x: f64) -> DMatrix<f64> {
    let n = g.nrows();
    c.transpose() * symmetric_cost_matrix(g, lambda) * c + DMatrix::identity(n, n) * x
}

/// Optimal `alpha` for a raw adjacency matrix, no admissibility checks
/// beyond the solves themselves. Returns `(C, alpha)`.
pub(crate) fn granular_alpha_for_matrix(
    g: &DMatrix<f64>,
    lambda: f64,
    x: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = g.nrows();
    if lambda == 0.0 {
        // Independent agents: the system is diagonal.
        return Ok((DMatrix::identity(n, n), DVector::from_element(n, 1.0 / (1.0 + x))));
    }
    let c = linalg::inverse(&(DMatrix::identity(n, n) - g * lambda))?;
    let h = granular_hessian(g, &c, lambda, x);
    let rhs = resolvent_sums(&c, Direction::Outgoing);
    let alpha = linalg::spd_solve(&h, &rhs).ok_or_else(|| {
        Error::IndefiniteObjective("C'(I - lambda(G+G'))C + r sigma2 I is not positive definite".into())
    })?;
    Ok((c, alpha))
}

/// `beta_i = -alpha_i 1'e + psi_i + alpha_i^2 r sigma2 / 2`, the fixed pay
/// that makes every participation constraint bind.
pub fn binding_beta(
    g: &DMatrix<f64>,
    params: &ModelParams,
    alpha: &DVector<f64>,
    e: &DVector<f64>,
) -> DVector<f64> {
    let total = e.sum();
    let psi = equilibrium::effort_costs(g, params.lambda, e);
    let x = params.risk();
    DVector::from_fn(alpha.len(), |i, _| {
        -alpha[i] * total + psi[i] + 0.5 * alpha[i] * alpha[i] * x
    })
}

/// Vector form `1/2 [e o (I - 2 lambda G) e + alpha o (r sigma2 alpha - 2 (1'e) 1)]`.
pub fn binding_beta_hadamard(
    g: &DMatrix<f64>,
    params: &ModelParams,
    alpha: &DVector<f64>,
    e: &DVector<f64>,
) -> DVector<f64> {
    let n = e.len();
    let shifted = (DMatrix::identity(n, n) - g * (2.0 * params.lambda)) * e;
    let pay = alpha * params.risk() - linalg::ones(n) * (2.0 * e.sum());
    (e.component_mul(&shifted) + alpha.component_mul(&pay)) * 0.5
}

/// Contract under observable effort: full insurance, efforts maximize
/// `1'e - sum_i psi_i`, i.e. `e = (I - lambda (G + G'))^{-1} 1`.
pub fn first_best(network: &Network, params: &ModelParams) -> Result<FirstBest> {
    params.require_unit_cost()?;
    let g = network.adjacency();
    let n = network.size();
    let a = symmetric_cost_matrix(g, params.lambda);
    let e = linalg::spd_solve(&a, &linalg::ones(n)).ok_or_else(|| {
        Error::regime(format!(
            "I - lambda(G + G') is not positive definite at lambda = {}",
            params.lambda
        ))
    })?;
    let beta = equilibrium::effort_costs(g, params.lambda, &e);
    let expected_profit = e.sum() - beta.sum();
    Ok(FirstBest {
        contract: Contract {
            alpha: DVector::zeros(n),
            beta,
        },
        efforts: e,
        expected_profit,
    })
}

pub fn optimal_granular(network: &Network, params: &ModelParams) -> Result<GranularSolution> {
    params.require_unit_cost()?;
    let report = require_assumption2(network, params)?;
    network.check_resolvent_regime(params.lambda)?;
    let g = network.adjacency();
    let x = params.risk();
    let (c, alpha) = granular_alpha_for_matrix(g, params.lambda, x)?;
    let e = &c * &alpha;
    let beta = binding_beta(g, params, &alpha, &e);
    let contract = Contract { alpha, beta };
    let outcome = equilibrium::evaluate(network, params, &contract)?;
    let weight_matrix = weights_from_resolvent(g, &c, params.lambda, x)?;
    Ok(GranularSolution {
        contract,
        efforts: outcome.efforts,
        weight_matrix,
        bonacich_out: resolvent_sums(&c, Direction::Outgoing),
        certainty_equivalents: outcome.certainty_equivalents,
        expected_profit: outcome.expected_profit,
        assumption2: report,
    })
}

/// `(CG)'CG`: entry `(i, j)` aggregates third parties influenced by both.
pub fn common_influence_matrix(network: &Network, lambda: f64) -> Result<DMatrix<f64>> {
    let cg = network.resolvent(lambda)? * network.adjacency();
    Ok(cg.transpose() * cg)
}

fn weights_from_resolvent(g: &DMatrix<f64>, c: &DMatrix<f64>, lambda: f64, x: f64) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let cg = c * g;
    let k = cg.transpose() * cg;
    let scale = lambda * lambda / (1.0 + x);
    linalg::inverse(&(DMatrix::identity(n, n) - k * scale))
        .map_err(|_| Error::IndefiniteObjective("common-influence system is singular".into()))
}

/// `W = [I - lambda^2 / (1 + r sigma2) (CG)'CG]^{-1}`.
pub fn common_influence_weights(network: &Network, params: &ModelParams) -> Result<DMatrix<f64>> {
    params.require_unit_cost()?;
    require_assumption2(network, params)?;
    let c = network.resolvent(params.lambda)?;
    weights_from_resolvent(network.adjacency(), &c, params.lambda, params.risk())
}

/// Partial sums `sum_{k=0..=terms} (lambda^2 / (1 + r sigma2) (CG)'CG)^k`.
pub fn common_influence_series(network: &Network, params: &ModelParams, terms: usize) -> Result<DMatrix<f64>> {
    let n = network.size();
    let step = common_influence_matrix(network, params.lambda)?
        * (params.lambda * params.lambda / (1.0 + params.risk()));
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut sum = power.clone();
    for _ in 0..terms {
        power = &power * &step;
        sum += &power;
    }
    Ok(sum)
}

/// `alpha_i = 1/(1 + r sigma2) sum_j w_ij B_j` with `B = C'1`.
pub fn alpha_from_weights(weights: &DMatrix<f64>, bonacich_out: &DVector<f64>, risk: f64) -> DVector<f64> {
    weights * bonacich_out / (1.0 + risk)
}

/// Zero-risk contract `1/2 (1 + B(2 lambda))` with incoming centralities.
/// Coincides with the optimum on symmetric networks only; see
/// [`no_risk_alpha_general`].
pub fn no_risk_alpha(network: &Network, lambda: f64) -> Result<DVector<f64>> {
    let b = network.bonacich(2.0 * lambda, Direction::Incoming)?;
    Ok((b.add_scalar(1.0)) * 0.5)
}

/// Zero-risk optimum on any network: `(I - lambda G)(I - lambda (G + G'))^{-1} 1`.
pub fn no_risk_alpha_general(network: &Network, lambda: f64) -> Result<DVector<f64>> {
    let g = network.adjacency();
    let n = network.size();
    let y = linalg::solve(&symmetric_cost_matrix(g, lambda), &linalg::ones(n))?;
    Ok(&y - g * &y * lambda)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskRow {
    pub sigma2: f64,
    pub alpha: DVector<f64>,
    /// Cosine between `alpha` and `C'1`.
    pub cosine_outgoing: f64,
    /// Cosine between `alpha` and `C1`.
    pub cosine_incoming: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncreasingRiskReport {
    pub rows: Vec<RiskRow>,
    /// Every entry of `alpha` is non-increasing along the grid (slack 1e-12).
    pub monotone_decrease: bool,
    /// Cosine with `C'1` is non-decreasing along the grid.
    pub converges_outgoing: bool,
    /// Cosine with `C1` is non-decreasing along the grid.
    pub converges_incoming: bool,
}

fn cosine(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let denom = a.norm() * b.norm();
    if denom == 0.0 {
        0.0
    } else {
        a.dot(b) / denom
    }
}

pub fn increasing_risk_limit(
    network: &Network,
    params: &ModelParams,
    sigma2_grid: &[f64],
) -> Result<IncreasingRiskReport> {
    if sigma2_grid.is_empty() {
        return Err(Error::input("sigma2 grid is empty"));
    }
    if sigma2_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::input("sigma2 grid must be strictly ascending"));
    }
    let c = network.resolvent(params.lambda)?;
    let outgoing = resolvent_sums(&c, Direction::Outgoing);
    let incoming = resolvent_sums(&c, Direction::Incoming);
    let mut rows = Vec::with_capacity(sigma2_grid.len());
    for &sigma2 in sigma2_grid {
        let p = ModelParams { sigma2, ..*params };
        p.validate()?;
        let alpha = optimal_granular(network, &p)?.contract.alpha;
        rows.push(RiskRow {
            sigma2,
            cosine_outgoing: cosine(&alpha, &outgoing),
            cosine_incoming: cosine(&alpha, &incoming),
            alpha,
        });
    }
    const SLACK: f64 = 1e-12;
    let monotone_decrease = rows.windows(2).all(|w| {
        w[1].alpha
            .iter()
            .zip(w[0].alpha.iter())
            .all(|(later, earlier)| *later <= *earlier + SLACK)
    });
    let converges_outgoing = rows
        .windows(2)
        .all(|w| w[1].cosine_outgoing >= w[0].cosine_outgoing - SLACK);
    let converges_incoming = rows
        .windows(2)
        .all(|w| w[1].cosine_incoming >= w[0].cosine_incoming - SLACK);
    Ok(IncreasingRiskReport {
        rows,
        monotone_decrease,
        converges_outgoing,
        converges_incoming,
    })
}

/// Pairs `(i, j)` ordered strictly one way by `reference` and strictly the
/// other way by `values`; differences within `tie` count as ties.
pub fn order_violations(values: &DVector<f64>, reference: &DVector<f64>, tie: f64) -> Vec<(usize, usize)> {
    let n = values.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if reference[i] - reference[j] > tie && values[j] - values[i] > tie {
                out.push((i, j));
            }
        }
    }
    out
}
