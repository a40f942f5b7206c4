//! Min-of-modules production: firm output is the smallest module total, so
//! the principal equalizes module outputs in the maximal equilibrium.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::coarse::Partition;
use crate::contracts::{binding_beta, symmetric_cost_matrix};
use crate::equilibrium::{self, require_assumption2, Contract, ModelParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::network::Network;

/// Assignment of workers to `K` non-empty modules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleAssignment(pub Partition);

impl ModuleAssignment {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        Partition::new(assignment).map(ModuleAssignment)
    }

    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        Partition::from_sizes(sizes).map(ModuleAssignment)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Partition::parse(text).map(ModuleAssignment)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Partition::read(path).map(ModuleAssignment)
    }

    pub fn module_count(&self) -> usize {
        self.0.group_count()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `K x n` matrix with `M[k][i] = 1` iff worker `i` is in module `k`.
    pub fn module_matrix(&self) -> DMatrix<f64> {
        self.0.type_matrix().transpose()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModularSolution {
    pub contract: Contract,
    pub efforts: DVector<f64>,
    /// Common module output.
    pub e_hat: f64,
    pub expected_profit: f64,
    /// Lagrange multipliers on the module-output constraints; they sum to one.
    pub multipliers: DVector<f64>,
}

/// `I - lambda (G + G') + r sigma2 (I - lambda G)'(I - lambda G)`.
fn kkt_block(g: &DMatrix<f64>, lambda: f64, x: f64) -> DMatrix<f64> {
    let n = g.nrows();
    let b = DMatrix::identity(n, n) - g * lambda;
    symmetric_cost_matrix(g, lambda) + b.transpose() * b * x
}

/// Maximizes `e_hat - 1/2 e'Ae` subject to `M e = e_hat 1` by solving the
/// KKT system in `(e, e_hat, w)`:
///
/// ```text
/// A e - M'w = 0,   M e - e_hat 1 = 0,   1'w = 1.
/// ```
pub fn optimal_modular(
    network: &Network,
    params: &ModelParams,
    modules: &ModuleAssignment,
) -> Result<ModularSolution> {
    params.require_unit_cost()?;
    modules.0.check_size(network.size())?;
    require_assumption2(network, params)?;
    network.check_resolvent_regime(params.lambda)?;
    let g = network.adjacency();
    let n = network.size();
    let k = modules.module_count();
    let a = kkt_block(g, params.lambda, params.risk());
    if !linalg::is_positive_definite(&a) {
        return Err(Error::IndefiniteObjective(
            "I - lambda(G+G') + r sigma2 (I - lambda G)'(I - lambda G) is not positive definite".into(),
        ));
    }
    let m = modules.module_matrix();
    let size = n + k + 1;
    let mut kkt = DMatrix::<f64>::zeros(size, size);
    kkt.view_mut((0, 0), (n, n)).copy_from(&a);
    kkt.view_mut((0, n + 1), (n, k)).copy_from(&(-m.transpose()));
    kkt.view_mut((n, 0), (k, n)).copy_from(&m);
    for row in 0..k {
        kkt[(n + row, n)] = -1.0;
        kkt[(n + k, n + 1 + row)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(size);
    rhs[size - 1] = 1.0;
    let sol = linalg::solve(&kkt, &rhs)?;
    let e = sol.rows(0, n).into_owned();
    let e_hat = sol[n];
    let multipliers = sol.rows(n + 1, k).into_owned();

    let alpha = &e - g * &e * params.lambda;
    let beta = binding_beta_modular(g, params, &alpha, &e, e_hat);
    let ce = modular_certainty_equivalents(g, params, &alpha, &beta, &e, e_hat);
    debug_assert!(ce.amax() < 1e-6);
    let wages = &beta + &alpha * e_hat;
    let expected_profit = e_hat - wages.sum();
    Ok(ModularSolution {
        contract: Contract { alpha, beta },
        efforts: e,
        e_hat,
        expected_profit,
        multipliers,
    })
}

/// `beta_i = -alpha_i e_hat + psi_i + alpha_i^2 r sigma2 / 2`.
fn binding_beta_modular(
    g: &DMatrix<f64>,
    params: &ModelParams,
    alpha: &DVector<f64>,
    e: &DVector<f64>,
    e_hat: f64,
) -> DVector<f64> {
    // Same as the additive case with total output replaced by e_hat.
    let shift = e.sum() - e_hat;
    binding_beta(g, params, alpha, e) + alpha * shift
}

fn modular_certainty_equivalents(
    g: &DMatrix<f64>,
    params: &ModelParams,
    alpha: &DVector<f64>,
    beta: &DVector<f64>,
    e: &DVector<f64>,
    output: f64,
) -> DVector<f64> {
    let psi = equilibrium::effort_costs(g, params.lambda, e);
    let x = params.risk();
    DVector::from_fn(e.len(), |i, _| {
        beta[i] + alpha[i] * output - psi[i] - 0.5 * alpha[i] * alpha[i] * x
    })
}

/// Closed form for singleton modules:
/// `alpha_i = (1 - lambda d_i) / (sum_j (1 - 2 lambda d_j) + r sigma2 sum_j (1 - lambda d_j)^2)`
/// with `d_i = sum_j g_ij`.
pub fn singleton_module_contract(network: &Network, params: &ModelParams) -> Result<DVector<f64>> {
    params.require_unit_cost()?;
    require_assumption2(network, params)?;
    let lambda = params.lambda;
    let d = network.degrees();
    let denom: f64 = d.iter().map(|di| 1.0 - 2.0 * lambda * di).sum::<f64>()
        + params.risk() * d.iter().map(|di| (1.0 - lambda * di).powi(2)).sum::<f64>();
    if !(denom > 0.0) {
        return Err(Error::IndefiniteObjective(format!(
            "singleton-module denominator {denom} is not positive"
        )));
    }
    Ok(d.map(|di| (1.0 - lambda * di) / denom))
}

/// Firm output `min_k (M e)_k`.
pub fn min_module_output(modules: &ModuleAssignment, e: &DVector<f64>) -> f64 {
    (modules.module_matrix() * e).min()
}

/// Checks that no worker gains by unilaterally raising effort to any of
/// `probes` while everybody else stays at zero.
pub fn zero_is_equilibrium(
    network: &Network,
    params: &ModelParams,
    modules: &ModuleAssignment,
    contract: &Contract,
    probes: &[f64],
) -> Result<bool> {
    let n = network.size();
    modules.0.check_size(n)?;
    let g = network.adjacency();
    let zero = DVector::zeros(n);
    let base = modular_certainty_equivalents(g, params, &contract.alpha, &contract.beta, &zero, 0.0);
    for i in 0..n {
        for &delta in probes {
            let mut e = DVector::zeros(n);
            e[i] = delta;
            let output = min_module_output(modules, &e);
            let ce = modular_certainty_equivalents(g, params, &contract.alpha, &contract.beta, &e, output);
            if ce[i] > base[i] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contracts::optimal_granular;
    use crate::equilibrium::assumption2_threshold;
    use proptest::prelude::*;

    fn admissible(net: &Network, kappa: f64, r: f64, sigma2: f64) -> ModelParams {
        let rho = net.spectral_radius();
        let t = assumption2_threshold(r * sigma2);
        let lambda = if rho > 0.0 { kappa * t / rho } else { kappa };
        ModelParams::new(lambda, r, sigma2).unwrap()
    }

    #[test]
    fn module_matrix_examples() {
        let m = ModuleAssignment::from_sizes(&[3, 2]).unwrap().module_matrix();
        let expected = DMatrix::from_row_slice(2, 5, &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        assert_eq!(m, expected);
        assert_eq!(
            ModuleAssignment::new(vec![0; 4]).unwrap().module_matrix(),
            DMatrix::from_element(1, 4, 1.0)
        );
        assert_eq!(
            ModuleAssignment::new((0..4).collect()).unwrap().module_matrix(),
            DMatrix::identity(4, 4)
        );
        assert!(ModuleAssignment::new(vec![1, 1]).is_err());
    }

    #[test]
    fn single_module_equals_granular() {
        for seed in 0..5 {
            let net = Network::erdos_renyi_directed(7, 0.35, seed, true).unwrap();
            let params = admissible(&net, 0.5, 1.0, 1.0);
            let modular = optimal_modular(&net, &params, &ModuleAssignment::new(vec![0; 7]).unwrap()).unwrap();
            let granular = optimal_granular(&net, &params).unwrap();
            assert!((&modular.contract.alpha - &granular.contract.alpha).amax() < 1e-8);
            assert!((modular.expected_profit - granular.expected_profit).abs() < 1e-8);
        }
    }

    #[test]
    fn singleton_closed_form_examples() {
        let empty = Network::empty(4).unwrap();
        let params = ModelParams::new(0.1, 1.0, 2.0).unwrap();
        let a = singleton_module_contract(&empty, &params).unwrap();
        assert!(a.iter().all(|x| (*x - 1.0 / 12.0).abs() < 1e-15));

        let dyad = Network::complete_bipartite(1, 1).unwrap();
        let params = ModelParams::new(0.2, 1.0, 1.0).unwrap();
        let a = singleton_module_contract(&dyad, &params).unwrap();
        assert!(a.iter().all(|x| (*x - 0.8 / 2.48).abs() < 1e-15));

        let cube = Network::regular_union_of_cycles(&[6]).unwrap();
        let params = ModelParams::new(0.15, 1.0, 1.0).unwrap();
        let a = singleton_module_contract(&cube, &params).unwrap();
        let want = (1.0 - 0.3) / (6.0 * (1.0 - 0.6) + 6.0 * 0.49);
        assert!(a.iter().all(|x| (*x - want).abs() < 1e-15));
    }

    #[test]
    fn zero_equilibrium_needs_two_modules() {
        let net = Network::erdos_renyi(6, 0.5, 3).unwrap();
        let params = admissible(&net, 0.6, 1.0, 1.0);
        let probes = [1e-3, 0.1, 1.0];
        let two = ModuleAssignment::from_sizes(&[3, 3]).unwrap();
        let sol = optimal_modular(&net, &params, &two).unwrap();
        assert!(zero_is_equilibrium(&net, &params, &two, &sol.contract, &probes).unwrap());
        let one = ModuleAssignment::new(vec![0; 6]).unwrap();
        let sol = optimal_modular(&net, &params, &one).unwrap();
        assert!(!zero_is_equilibrium(&net, &params, &one, &sol.contract, &probes).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn modular_invariants(
            seed in 0u64..10_000,
            n in 2usize..10,
            p in 0.1f64..0.9,
            kappa in 0.05f64..0.9,
            directed in any::<bool>(),
            modules in prop::collection::vec(0usize..3, 10),
        ) {
            let net = if directed {
                Network::erdos_renyi_directed(n, p, seed, true).unwrap()
            } else {
                Network::erdos_renyi(n, p, seed).unwrap()
            };
            let params = admissible(&net, kappa, 1.0, 1.0);
            let mut labels: Vec<usize> = Vec::new();
            let assignment: Vec<usize> = modules[..n]
                .iter()
                .map(|g| match labels.iter().position(|l| l == g) {
                    Some(pos) => pos,
                    None => { labels.push(*g); labels.len() - 1 }
                })
                .collect();
            let modules = ModuleAssignment::new(assignment).unwrap();
            let sol = match optimal_modular(&net, &params, &modules) {
                Ok(s) => s,
                Err(Error::IndefiniteObjective(_)) if directed => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            let totals = modules.module_matrix() * &sol.efforts;
            prop_assert!(totals.iter().all(|t| (t - sol.e_hat).abs() <= 1e-8));
            let binding = &sol.efforts - net.adjacency() * &sol.efforts * params.lambda;
            prop_assert!((binding - &sol.contract.alpha).amax() <= 1e-10);
            prop_assert!((sol.multipliers.sum() - 1.0).abs() <= 1e-10);
            prop_assert!((sol.expected_profit - 0.5 * sol.e_hat).abs() <= 1e-8);
        }

        #[test]
        fn singleton_modules_match_kkt(
            seed in 0u64..10_000,
            n in 2usize..10,
            p in 0.1f64..0.9,
            kappa in 0.05f64..0.9,
        ) {
            let net = Network::erdos_renyi(n, p, seed).unwrap();
            let params = admissible(&net, kappa, 1.0, 1.0);
            let kkt = optimal_modular(&net, &params, &ModuleAssignment::new((0..n).collect()).unwrap()).unwrap();
            let closed = singleton_module_contract(&net, &params).unwrap();
            prop_assert!((closed - kkt.contract.alpha).amax() <= 1e-8);
        }
    }
}
