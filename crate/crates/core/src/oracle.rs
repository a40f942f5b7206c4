//! Brute-force verification: first-order numeric maximization of expected
//! profit, independent of the closed-form solvers, plus finite differences.
//!
//! Objectives are evaluated from their definitions (solve the effort game,
//! then account for output, effort costs and risk premia); gradients come
//! from adjoint solves. No Hessian is ever formed.

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::coarse::Partition;
use crate::equilibrium::ModelParams;
use crate::error::{Error, Result};
use crate::heterogeneous::HeterogeneousParams;
use crate::modular::ModuleAssignment;
use crate::network::Network;

pub const MAX_ORACLE_SIZE: usize = 50;
pub const GRADIENT_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone)]
pub enum OracleProblem {
    Granular,
    Coarse(Partition),
    Modular(ModuleAssignment),
    Heterogeneous(HeterogeneousParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Worker-level incentives at the numeric optimum.
    pub alpha: DVector<f64>,
    pub objective: f64,
    /// Infinity norm of the gradient in the optimized coordinates.
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn finite_difference_gradient<F>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut probe = x.clone();
    DVector::from_fn(x.len(), |i, _| {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        (up - down) / (2.0 * h)
    })
}

/// A smooth objective with an analytic gradient.
trait Objective {
    fn value_and_gradient(&self, x: &DVector<f64>) -> (f64, DVector<f64>);
}

/// Homogeneous model as a function of `alpha`:
/// `1'e - e'e/2 + lambda e'Ge - (x/2) alpha'alpha` with `(I - lambda G) e = alpha`.
struct GranularObjective {
    g: DMatrix<f64>,
    lambda: f64,
    risk: f64,
    game: LU<f64, Dyn, Dyn>,
    game_t: LU<f64, Dyn, Dyn>,
}

impl GranularObjective {
    fn new(network: &Network, params: &ModelParams) -> Result<Self> {
        let n = network.size();
        let g = network.adjacency().clone();
        let a = DMatrix::identity(n, n) - &g * params.lambda;
        let game_t = a.transpose().lu();
        let game = a.lu();
        if !game.is_invertible() {
            return Err(Error::regime("I - lambda G is singular"));
        }
        Ok(GranularObjective {
            g,
            lambda: params.lambda,
            risk: params.risk(),
            game,
            game_t,
        })
    }
}

impl Objective for GranularObjective {
    fn value_and_gradient(&self, alpha: &DVector<f64>) -> (f64, DVector<f64>) {
        let e = self.game.solve(alpha).expect("invertible");
        let ge = &self.g * &e;
        let value = e.sum() - 0.5 * e.dot(&e) + self.lambda * e.dot(&ge) - 0.5 * self.risk * alpha.dot(alpha);
        // d value / d e, pulled back through e = (I - lambda G)^{-1} alpha.
        let gte = self.g.transpose() * &e;
        let de = DVector::from_fn(e.len(), |i, _| 1.0 - e[i] + self.lambda * (ge[i] + gte[i]));
        let grad = self.game_t.solve(&de).expect("invertible") - alpha * self.risk;
        (value, grad)
    }
}

/// Heterogeneous model: `theta'e - sum cost_i - (sigma2/2) sum r_i alpha_i^2 - sum U_i`
/// with `(V - lambda Lambda) e = Theta alpha`.
struct HeterogeneousObjective {
    p: HeterogeneousParams,
    game: LU<f64, Dyn, Dyn>,
    game_t: LU<f64, Dyn, Dyn>,
}

impl HeterogeneousObjective {
    fn new(p: &HeterogeneousParams) -> Result<Self> {
        p.validate()?;
        let a = DMatrix::from_diagonal(&p.v) - &p.spillovers * p.lambda;
        let game_t = a.transpose().lu();
        let game = a.lu();
        if !game.is_invertible() {
            return Err(Error::regime("V - lambda Lambda is singular"));
        }
        Ok(HeterogeneousObjective {
            p: p.clone(),
            game,
            game_t,
        })
    }
}

impl Objective for HeterogeneousObjective {
    fn value_and_gradient(&self, alpha: &DVector<f64>) -> (f64, DVector<f64>) {
        let p = &self.p;
        let pushed = alpha.component_mul(&p.theta);
        let e = self.game.solve(&pushed).expect("invertible");
        let le = &p.spillovers * &e;
        let lte = p.spillovers.transpose() * &e;
        let mut value = p.theta.dot(&e) - p.outside.sum();
        for i in 0..e.len() {
            value -= 0.5 * p.v[i] * e[i] * e[i] - p.lambda * e[i] * le[i];
            value -= 0.5 * p.sigma2 * p.r[i] * alpha[i] * alpha[i];
        }
        let de = DVector::from_fn(e.len(), |i, _| p.theta[i] - p.v[i] * e[i] + p.lambda * (le[i] + lte[i]));
        let adj = self.game_t.solve(&de).expect("invertible");
        let grad = DVector::from_fn(e.len(), |i, _| {
            p.theta[i] * adj[i] - p.sigma2 * p.r[i] * alpha[i]
        });
        (value, grad)
    }
}

/// Restriction of an objective to `x = T y`.
struct Reduced<'a, O> {
    inner: &'a O,
    t: DMatrix<f64>,
}

impl<O: Objective> Objective for Reduced<'_, O> {
    fn value_and_gradient(&self, y: &DVector<f64>) -> (f64, DVector<f64>) {
        let (v, g) = self.inner.value_and_gradient(&(&self.t * y));
        (v, self.t.transpose() * g)
    }
}

/// Modular model over efforts:
/// `mean(M e) - e'e/2 + lambda e'Ge - (x/2) |(I - lambda G) e|^2`,
/// with the gradient projected onto `{e : module totals equal}`.
struct ModularObjective {
    g: DMatrix<f64>,
    lambda: f64,
    risk: f64,
    m: DMatrix<f64>,
    projector: DMatrix<f64>,
}

impl ModularObjective {
    fn new(network: &Network, params: &ModelParams, modules: &ModuleAssignment) -> Result<Self> {
        let n = network.size();
        let m = modules.module_matrix();
        let k = m.nrows();
        let projector = if k == 1 {
            DMatrix::identity(n, n)
        } else {
            // Rows of B are M_k - M_{k+1}; project onto the null space of B.
            let b = DMatrix::from_fn(k - 1, n, |r, c| m[(r, c)] - m[(r + 1, c)]);
            let bbt = &b * b.transpose();
            let inv = bbt
                .try_inverse()
                .ok_or_else(|| Error::input("module constraints are degenerate"))?;
            DMatrix::identity(n, n) - b.transpose() * inv * &b
        };
        Ok(ModularObjective {
            g: network.adjacency().clone(),
            lambda: params.lambda,
            risk: params.risk(),
            m,
            projector,
        })
    }
}

impl Objective for ModularObjective {
    fn value_and_gradient(&self, e: &DVector<f64>) -> (f64, DVector<f64>) {
        let k = self.m.nrows() as f64;
        let ge = &self.g * e;
        let alpha = e - &ge * self.lambda;
        let value = (&self.m * e).sum() / k - 0.5 * e.dot(e) + self.lambda * e.dot(&ge)
            - 0.5 * self.risk * alpha.dot(&alpha);
        let gte = self.g.transpose() * e;
        let balpha = &alpha - self.g.transpose() * &alpha * self.lambda;
        let raw = self.m.row_sum().transpose() / k - e + (ge + gte) * self.lambda - balpha * self.risk;
        (value, &self.projector * raw)
    }
}

/// Nonlinear conjugate-gradient ascent (Polak-Ribiere+, restarted to the
/// gradient every `dim` steps or whenever the direction stops ascending).
/// Each step starts from the exact line maximizer of the local quadratic
/// model (curvature measured by a gradient difference) and backtracks until
/// the Armijo condition holds, so the objective never decreases.
fn ascend<O: Objective>(objective: &O, start: DVector<f64>) -> Result<(DVector<f64>, f64, f64, usize, bool)> {
    let dim = start.len().max(1);
    let mut x = start;
    let (mut value, mut grad) = objective.value_and_gradient(&x);
    let mut dir = grad.clone();
    let mut since_restart = 0;
    for iter in 0..MAX_ITERATIONS {
        let gnorm = grad.amax();
        if gnorm <= GRADIENT_TOLERANCE {
            return Ok((x, value, gnorm, iter, true));
        }
        if !value.is_finite() || x.amax() > 1e12 {
            return Err(Error::NonConcave("iterates diverged".into()));
        }
        let mut slope = grad.dot(&dir);
        if slope <= 0.0 || since_restart >= dim {
            dir = grad.clone();
            slope = grad.dot(&grad);
            since_restart = 0;
        }
        let probe = &x + &dir;
        let (_, grad_probe) = objective.value_and_gradient(&probe);
        let curvature = dir.dot(&(grad_probe - &grad));
        if curvature >= 0.0 {
            return Err(Error::NonConcave(format!(
                "non-negative curvature {curvature:.3e} along the search direction at iteration {iter}"
            )));
        }
        let mut step = slope / -curvature;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * step;
            let (tv, tg) = objective.value_and_gradient(&trial);
            if tv >= value + 1e-4 * step * slope {
                accepted = Some((trial, tv, tg));
                break;
            }
            step *= 0.5;
        }
        let Some((trial, tv, tg)) = accepted else {
            if since_restart > 0 {
                // Retry along the plain gradient before giving up.
                since_restart = dim;
                continue;
            }
            // Round-off floor: no measurable ascent remains.
            let gnorm = grad.amax();
            return Ok((x, value, gnorm, iter, gnorm <= GRADIENT_TOLERANCE));
        };
        let beta = (tg.dot(&(&tg - &grad)) / grad.dot(&grad)).max(0.0);
        dir = &tg + &dir * beta;
        x = trial;
        value = tv;
        grad = tg;
        since_restart += 1;
    }
    let gnorm = grad.amax();
    Ok((x, value, gnorm, MAX_ITERATIONS, gnorm <= GRADIENT_TOLERANCE))
}

/// Numerically maximizes expected profit for the chosen contract family.
/// Heterogeneous problems carry their own parameters and ignore `network`
/// and `params`.
pub fn numeric_optimal_alpha(
    network: &Network,
    params: &ModelParams,
    problem: &OracleProblem,
) -> Result<OracleResult> {
    let n = match problem {
        OracleProblem::Heterogeneous(p) => p.size(),
        _ => network.size(),
    };
    if n > MAX_ORACLE_SIZE {
        return Err(Error::input(format!("oracle is limited to n <= {MAX_ORACLE_SIZE}, got {n}")));
    }
    if !matches!(problem, OracleProblem::Heterogeneous(_)) {
        params.require_unit_cost()?;
        network.check_resolvent_regime(params.lambda)?;
    }
    let finish = |alpha: DVector<f64>, run: (DVector<f64>, f64, f64, usize, bool)| OracleResult {
        alpha,
        objective: run.1,
        gradient_norm: run.2,
        iterations: run.3,
        converged: run.4,
    };
    match problem {
        OracleProblem::Granular => {
            let obj = GranularObjective::new(network, params)?;
            let run = ascend(&obj, DVector::zeros(n))?;
            Ok(finish(run.0.clone(), run))
        }
        OracleProblem::Coarse(partition) => {
            partition.check_size(n)?;
            let inner = GranularObjective::new(network, params)?;
            let t = partition.type_matrix();
            let obj = Reduced { inner: &inner, t: t.clone() };
            let run = ascend(&obj, DVector::zeros(partition.group_count()))?;
            Ok(finish(&t * &run.0, run))
        }
        OracleProblem::Modular(modules) => {
            modules.0.check_size(n)?;
            let obj = ModularObjective::new(network, params, modules)?;
            let run = ascend(&obj, DVector::zeros(n))?;
            let e = &run.0;
            let alpha = e - network.adjacency() * e * params.lambda;
            Ok(finish(alpha, run))
        }
        OracleProblem::Heterogeneous(p) => {
            let obj = HeterogeneousObjective::new(p)?;
            let run = ascend(&obj, DVector::zeros(n))?;
            Ok(finish(run.0.clone(), run))
        }
    }
}

/// Value of the granular objective at an arbitrary `alpha`.
pub fn granular_objective(network: &Network, params: &ModelParams, alpha: &DVector<f64>) -> Result<f64> {
    Ok(GranularObjective::new(network, params)?.value_and_gradient(alpha).0)
}

/// Value of the heterogeneous objective at an arbitrary `alpha`.
pub fn heterogeneous_objective(params: &HeterogeneousParams, alpha: &DVector<f64>) -> Result<f64> {
    Ok(HeterogeneousObjective::new(params)?.value_and_gradient(alpha).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::optimal_granular;
    use crate::equilibrium::lambda_from_fraction;

    #[test]
    fn no_peer_effects_converge_to_half() {
        let net = Network::erdos_renyi(5, 0.5, 1).unwrap();
        let params = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        let res = numeric_optimal_alpha(&net, &params, &OracleProblem::Granular).unwrap();
        assert!(res.converged);
        assert!(res.alpha.iter().all(|a| (*a - 0.5).abs() < 1e-9));
    }

    #[test]
    fn matches_closed_form_profit() {
        let net = Network::erdos_renyi_directed(6, 0.4, 2, true).unwrap();
        let params = ModelParams::new(lambda_from_fraction(0.5, net.spectral_radius(), 1.0), 1.0, 1.0).unwrap();
        let res = numeric_optimal_alpha(&net, &params, &OracleProblem::Granular).unwrap();
        let closed = optimal_granular(&net, &params).unwrap();
        assert!(res.converged);
        assert!((res.objective - closed.expected_profit).abs() < 1e-8);
        assert!((res.alpha - closed.contract.alpha).amax() < 1e-5);
    }

    #[test]
    fn inadmissible_lambda_is_flagged() {
        let net = Network::complete(4).unwrap();
        // lambda * mu_1 = 0.9 exceeds the threshold 0.5 but keeps the resolvent finite.
        let params = ModelParams::new(0.3, 0.0, 0.0).unwrap();
        let err = numeric_optimal_alpha(&net, &params, &OracleProblem::Granular).unwrap_err();
        assert!(matches!(err, Error::NonConcave(_)));
    }

    #[test]
    fn size_guard() {
        let net = Network::empty(51).unwrap();
        let params = ModelParams::new(0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            numeric_optimal_alpha(&net, &params, &OracleProblem::Granular),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn finite_differences_on_quadratic() {
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 3.0]);
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let f = |x: &DVector<f64>| 0.5 * x.dot(&(&q * x)) + b.dot(x);
        let x = DVector::from_vec(vec![0.3, -0.7, 1.1]);
        let fd = finite_difference_gradient(f, &x, 1e-5);
        assert!((fd - (&q * &x + &b)).amax() < 1e-10);
    }

    #[test]
    fn closed_form_is_stationary_and_origin_gradient_is_bonacich() {
        let net = Network::erdos_renyi(6, 0.5, 7).unwrap();
        let params = ModelParams::new(lambda_from_fraction(0.7, net.spectral_radius(), 1.0), 1.0, 1.0).unwrap();
        let closed = optimal_granular(&net, &params).unwrap();
        let f = |a: &DVector<f64>| granular_objective(&net, &params, a).unwrap();
        let grad = finite_difference_gradient(f, &closed.contract.alpha, 1e-5);
        assert!(grad.amax() <= 1e-6);
        let at_zero = finite_difference_gradient(f, &DVector::zeros(6), 1e-5);
        assert!((at_zero - &closed.bonacich_out).amax() <= 1e-8);
    }
}
