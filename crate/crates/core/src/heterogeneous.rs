//! Workers that differ in productivity, effort cost, risk aversion and
//! outside option, linked by an arbitrary spillover matrix.
//!
//! Output is `X = sum_i theta_i e_i + eps` and worker `i` bears the cost
//! `v_i e_i^2 / 2 - lambda e_i sum_j Lambda_ij e_j`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coarse::{group_max_and_rents, Partition};
use crate::equilibrium::{Contract, ModelParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::network::Network;

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousParams {
    pub theta: DVector<f64>,
    pub v: DVector<f64>,
    pub r: DVector<f64>,
    /// Spillover matrix; `spillovers[(i, j)]` lowers `i`'s cost per unit of `j`'s effort.
    pub spillovers: DMatrix<f64>,
    pub lambda: f64,
    pub sigma2: f64,
    /// Reservation certainty equivalents.
    pub outside: DVector<f64>,
}

/// On-disk form. `Lambda` may be given inline or as a path to an edge list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeterogeneousFile {
    pub theta: Vec<f64>,
    pub v: Vec<f64>,
    pub r: Vec<f64>,
    #[serde(rename = "U", default)]
    pub outside: Option<Vec<f64>>,
    #[serde(rename = "Lambda", default)]
    pub spillovers: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub edge_list: Option<String>,
    pub lambda: f64,
    pub sigma2: f64,
}

impl HeterogeneousParams {
    pub fn new(
        theta: DVector<f64>,
        v: DVector<f64>,
        r: DVector<f64>,
        spillovers: DMatrix<f64>,
        lambda: f64,
        sigma2: f64,
        outside: DVector<f64>,
    ) -> Result<Self> {
        let params = HeterogeneousParams {
            theta,
            v,
            r,
            spillovers,
            lambda,
            sigma2,
            outside,
        };
        params.validate()?;
        Ok(params)
    }

    /// Identity heterogeneity: `Theta = V = I`, `R = r I`, `Lambda = G`.
    pub fn from_homogeneous(network: &Network, params: &ModelParams) -> Result<Self> {
        let n = network.size();
        HeterogeneousParams::new(
            DVector::from_element(n, 1.0),
            DVector::from_element(n, params.v),
            DVector::from_element(n, params.r),
            network.adjacency().clone(),
            params.lambda,
            params.sigma2,
            DVector::zeros(n),
        )
    }

    pub fn size(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.theta.len();
        if n == 0 {
            return Err(Error::input("heterogeneous model needs at least one worker"));
        }
        linalg::check_len("theta", &self.theta, n)?;
        linalg::check_len("v", &self.v, n)?;
        linalg::check_len("r", &self.r, n)?;
        linalg::check_len("U", &self.outside, n)?;
        if self.theta.iter().any(|t| *t <= 0.0) {
            return Err(Error::input("theta must be positive"));
        }
        if self.v.iter().any(|v| *v < 1.0) {
            return Err(Error::input("v must be at least 1"));
        }
        if self.r.iter().any(|r| *r < 0.0) {
            return Err(Error::input("r must be non-negative"));
        }
        if !(self.sigma2.is_finite() && self.sigma2 >= 0.0) {
            return Err(Error::input("sigma2 must be finite and non-negative"));
        }
        if !self.lambda.is_finite() {
            return Err(Error::input("lambda must be finite"));
        }
        // Reuses the network checks: square, finite, non-negative, zero diagonal.
        Network::new(self.spillovers.clone(), true)?;
        if self.spillovers.nrows() != n {
            return Err(Error::input(format!(
                "Lambda is {}x{}, expected {n}x{n}",
                self.spillovers.nrows(),
                self.spillovers.ncols()
            )));
        }
        Ok(())
    }

    /// Builds parameters from the on-disk form; relative edge-list paths
    /// resolve against `base`.
    pub fn from_file_form(file: HeterogeneousFile, base: Option<&Path>) -> Result<Self> {
        let n = file.theta.len();
        let spillovers = match (file.spillovers, file.edge_list) {
            (Some(rows), None) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::input(format!("Lambda must be {n}x{n}")));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
            (None, Some(path)) => {
                let path = match base {
                    Some(dir) => dir.join(path),
                    None => path.into(),
                };
                Network::read_edge_list(&path)?.adjacency().clone()
            }
            _ => return Err(Error::input("give exactly one of Lambda or edge_list")),
        };
        HeterogeneousParams::new(
            DVector::from_vec(file.theta),
            DVector::from_vec(file.v),
            DVector::from_vec(file.r),
            spillovers,
            file.lambda,
            file.sigma2,
            DVector::from_vec(file.outside.unwrap_or_else(|| vec![0.0; n])),
        )
    }

    /// Reads a JSON (`.json`) or TOML parameter file.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parse_err = |message: String| Error::Parse { line: 0, message };
        let file: HeterogeneousFile = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))?
        };
        HeterogeneousParams::from_file_form(file, path.parent())
    }

    /// `V - lambda Lambda`, the matrix of the effort game's first-order conditions.
    pub(crate) fn game_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.v) - &self.spillovers * self.lambda
    }

    /// Effort costs `v_i e_i^2 / 2 - lambda e_i sum_j Lambda_ij e_j`.
    pub fn effort_costs(&self, e: &DVector<f64>) -> DVector<f64> {
        let le = &self.spillovers * e;
        DVector::from_fn(e.len(), |i, _| 0.5 * self.v[i] * e[i] * e[i] - self.lambda * e[i] * le[i])
    }

    /// `CE_i = beta_i + alpha_i theta'e - cost_i - alpha_i^2 r_i sigma2 / 2`.
    pub fn certainty_equivalents(&self, contract: &Contract, e: &DVector<f64>) -> DVector<f64> {
        let output = self.theta.dot(e);
        let cost = self.effort_costs(e);
        DVector::from_fn(e.len(), |i, _| {
            let a = contract.alpha[i];
            contract.beta[i] + a * output - cost[i] - 0.5 * a * a * self.r[i] * self.sigma2
        })
    }
}

/// `C~ = (I - lambda V^{-1} Lambda)^{-1} V^{-1} Theta`, so that Nash efforts are `C~ alpha`.
pub fn het_resolvent(params: &HeterogeneousParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let n = params.size();
    let scaled = DMatrix::from_fn(n, n, |i, j| params.lambda * params.spillovers[(i, j)] / params.v[i]);
    let rho = if scaled.iter().all(|x| *x == 0.0) {
        0.0
    } else {
        linalg::nonnegative_spectral_radius(&scaled)
    };
    if !(rho < 1.0) {
        return Err(Error::regime(format!(
            "spectral radius of lambda V^-1 Lambda is {rho:.6}, must be below 1"
        )));
    }
    let rhs = DMatrix::from_diagonal(&params.theta);
    let a = params.game_matrix();
    let lu = a.clone().lu();
    let mut c = lu.solve(&rhs).ok_or_else(|| Error::regime("V - lambda Lambda is singular"))?;
    let resid = &rhs - &a * &c;
    if let Some(dc) = lu.solve(&resid) {
        c += dc;
    }
    Ok(c)
}

/// `C~'(V - lambda (Lambda + Lambda'))C~ + sigma2 R`, the Hessian of the
/// negated principal objective.
pub fn het_hessian(params: &HeterogeneousParams, c: &DMatrix<f64>) -> DMatrix<f64> {
    let lam = &params.spillovers;
    let middle = DMatrix::from_diagonal(&params.v) - (lam + lam.transpose()) * params.lambda;
    c.transpose() * middle * c + DMatrix::from_diagonal(&(&params.r * params.sigma2))
}

/// `1/2 (C~'(V - 2 lambda Lambda)C~ + C~(V - 2 lambda Lambda')C~') + sigma2 R`.
/// Differs from [`het_hessian`] whenever `C~` is not symmetric; kept for comparison.
pub fn het_hessian_alternative(params: &HeterogeneousParams, c: &DMatrix<f64>) -> DMatrix<f64> {
    let v = DMatrix::from_diagonal(&params.v);
    let two = 2.0 * params.lambda;
    let left = c.transpose() * (&v - &params.spillovers * two) * c;
    let right = c * (&v - params.spillovers.transpose() * two) * c.transpose();
    (left + right) * 0.5 + DMatrix::from_diagonal(&(&params.r * params.sigma2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousSolution {
    pub contract: Contract,
    pub efforts: DVector<f64>,
    pub certainty_equivalents: DVector<f64>,
    pub expected_profit: f64,
}

fn het_profit(params: &HeterogeneousParams, contract: &Contract, e: &DVector<f64>) -> f64 {
    let output = params.theta.dot(e);
    let wages = &contract.beta + &contract.alpha * output;
    output - wages.sum()
}

/// Binding participation: `beta_i = U_i - alpha_i theta'e + cost_i + alpha_i^2 r_i sigma2 / 2`.
pub fn het_binding_beta(params: &HeterogeneousParams, alpha: &DVector<f64>, e: &DVector<f64>) -> DVector<f64> {
    let output = params.theta.dot(e);
    let cost = params.effort_costs(e);
    DVector::from_fn(alpha.len(), |i, _| {
        params.outside[i] - alpha[i] * output + cost[i] + 0.5 * alpha[i] * alpha[i] * params.r[i] * params.sigma2
    })
}

/// Vector form `U + 1/2 [e o (V - 2 lambda Lambda) e + alpha o (sigma2 R alpha - 2 (theta'e) 1)]`.
pub fn het_binding_beta_hadamard(
    params: &HeterogeneousParams,
    alpha: &DVector<f64>,
    e: &DVector<f64>,
) -> DVector<f64> {
    let n = e.len();
    let shifted = (DMatrix::from_diagonal(&params.v) - &params.spillovers * (2.0 * params.lambda)) * e;
    let pay = alpha.component_mul(&params.r) * params.sigma2 - linalg::ones(n) * (2.0 * params.theta.dot(e));
    &params.outside + (e.component_mul(&shifted) + alpha.component_mul(&pay)) * 0.5
}

pub fn optimal_heterogeneous(params: &HeterogeneousParams) -> Result<HeterogeneousSolution> {
    let c = het_resolvent(params)?;
    let h = het_hessian(params, &c);
    let rhs = c.transpose() * &params.theta;
    let alpha = linalg::spd_solve(&h, &rhs).ok_or_else(|| {
        Error::IndefiniteObjective("C~'(V - lambda(Lambda + Lambda'))C~ + sigma2 R is not positive definite".into())
    })?;
    let e = &c * &alpha;
    let beta = het_binding_beta(params, &alpha, &e);
    let contract = Contract { alpha, beta };
    let ce = params.certainty_equivalents(&contract, &e);
    let expected_profit = het_profit(params, &contract, &e);
    Ok(HeterogeneousSolution {
        contract,
        efforts: e,
        certainty_equivalents: ce,
        expected_profit,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousCoarseSolution {
    pub group_alpha: DVector<f64>,
    pub group_beta: DVector<f64>,
    pub contract: Contract,
    /// Certainty equivalent above the outside option.
    pub rents: DVector<f64>,
    pub efforts: DVector<f64>,
    pub certainty_equivalents: DVector<f64>,
    pub expected_profit: f64,
}

/// Group contracts. Within a group the fixed pay is set by the worker with the
/// largest `U_i + cost_i + alpha^2 r_i sigma2 / 2`; everyone else earns a rent.
pub fn optimal_heterogeneous_coarse(
    params: &HeterogeneousParams,
    partition: &Partition,
) -> Result<HeterogeneousCoarseSolution> {
    partition.check_size(params.size())?;
    let c = het_resolvent(params)?;
    let t = partition.type_matrix();
    let reduced = t.transpose() * het_hessian(params, &c) * &t;
    let rhs = t.transpose() * (c.transpose() * &params.theta);
    let group_alpha = linalg::spd_solve(&reduced, &rhs).ok_or_else(|| {
        Error::IndefiniteObjective("reduced heterogeneous Hessian is not positive definite".into())
    })?;
    let alpha = &t * &group_alpha;
    let e = &c * &alpha;
    let output = params.theta.dot(&e);
    let cost = params.effort_costs(&e);
    let required = DVector::from_fn(params.size(), |i, _| {
        params.outside[i] + cost[i] + 0.5 * alpha[i] * alpha[i] * params.r[i] * params.sigma2
    });
    let (top, rents) = group_max_and_rents(partition, &required);
    let group_beta = DVector::from_fn(partition.group_count(), |k, _| top[k] - group_alpha[k] * output);
    let contract = Contract {
        beta: &t * &group_beta,
        alpha,
    };
    let ce = params.certainty_equivalents(&contract, &e);
    let expected_profit = het_profit(params, &contract, &e);
    Ok(HeterogeneousCoarseSolution {
        group_alpha,
        group_beta,
        contract,
        rents,
        efforts: e,
        certainty_equivalents: ce,
        expected_profit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coarse::optimal_coarse;
    use crate::contracts::optimal_granular;
    use crate::equilibrium::assumption2_threshold;
    use proptest::prelude::*;

    fn admissible(net: &Network, kappa: f64) -> ModelParams {
        let rho = net.spectral_radius();
        let t = assumption2_threshold(1.0);
        ModelParams::new(if rho > 0.0 { kappa * t / rho } else { kappa }, 1.0, 1.0).unwrap()
    }

    fn random_params(seed: u64, n: usize) -> HeterogeneousParams {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let net = Network::erdos_renyi_directed(n, 0.5, seed, true).unwrap();
        let theta = DVector::from_fn(n, |_, _| 0.5 + rng.random::<f64>());
        let v = DVector::from_fn(n, |_, _| 1.0 + rng.random::<f64>());
        let r = DVector::from_fn(n, |_, _| 2.0 * rng.random::<f64>());
        let outside = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
        let rho = net.spectral_radius().max(1.0);
        HeterogeneousParams::new(theta, v, r, net.adjacency().clone(), 0.2 / rho, 1.0, outside).unwrap()
    }

    #[test]
    fn resolvent_collapses_to_homogeneous() {
        let net = Network::erdos_renyi(6, 0.5, 2).unwrap();
        let params = admissible(&net, 0.7);
        let het = HeterogeneousParams::from_homogeneous(&net, &params).unwrap();
        let c = net.resolvent(params.lambda).unwrap();
        assert!((het_resolvent(&het).unwrap() - c).amax() < 1e-12);

        let mut zero = het.clone();
        zero.lambda = 0.0;
        zero.theta = DVector::from_vec(vec![2.0, 1.0, 1.0, 3.0, 1.0, 1.0]);
        zero.v = DVector::from_vec(vec![1.0, 2.0, 1.0, 1.0, 4.0, 1.0]);
        let c = het_resolvent(&zero).unwrap();
        let expected = DMatrix::from_diagonal(&zero.theta.component_div(&zero.v));
        assert_eq!(c, expected);
    }

    #[test]
    fn two_by_two_resolvent() {
        // (V - lambda Lambda) C~ = Theta with V = diag(1, 2), Theta = diag(2, 1).
        let lam = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        let params = HeterogeneousParams::new(
            DVector::from_vec(vec![2.0, 1.0]),
            DVector::from_vec(vec![1.0, 2.0]),
            DVector::from_vec(vec![1.0, 1.0]),
            lam,
            0.1,
            1.0,
            DVector::zeros(2),
        )
        .unwrap();
        let det = 1.0 * 2.0 - 0.1 * 0.05;
        let inv = DMatrix::from_row_slice(2, 2, &[2.0 / det, 0.1 / det, 0.05 / det, 1.0 / det]);
        let expected = inv * DMatrix::from_diagonal(&params.theta);
        assert!((het_resolvent(&params).unwrap() - expected).amax() < 1e-15);
    }

    #[test]
    fn collapse_matches_granular_and_coarse() {
        let net = Network::erdos_renyi_directed(7, 0.4, 5, true).unwrap();
        let params = admissible(&net, 0.5);
        let het = HeterogeneousParams::from_homogeneous(&net, &params).unwrap();
        let a = optimal_heterogeneous(&het).unwrap();
        let b = optimal_granular(&net, &params).unwrap();
        assert!((&a.contract.alpha - &b.contract.alpha).amax() < 1e-10);
        assert!((&a.contract.beta - &b.contract.beta).amax() < 1e-10);
        assert!((a.expected_profit - b.expected_profit).abs() < 1e-10);

        let partition = Partition::from_sizes(&[3, 4]).unwrap();
        let hc = optimal_heterogeneous_coarse(&het, &partition).unwrap();
        let cc = optimal_coarse(&net, &params, &partition).unwrap();
        assert!((&hc.group_alpha - &cc.group_alpha).amax() < 1e-10);
        assert!((&hc.group_beta - &cc.group_beta).amax() < 1e-10);
        assert!((&hc.rents - &cc.rents).amax() < 1e-10);
        assert!((hc.expected_profit - cc.expected_profit).abs() < 1e-10);
    }

    #[test]
    fn outside_option_shift_moves_beta_only() {
        let base = random_params(3, 5);
        let mut shifted = base.clone();
        shifted.outside = base.outside.add_scalar(0.7);
        let a = optimal_heterogeneous(&base).unwrap();
        let b = optimal_heterogeneous(&shifted).unwrap();
        assert_eq!(a.contract.alpha, b.contract.alpha);
        assert!((&b.contract.beta - &a.contract.beta).add_scalar(-0.7).amax() < 1e-12);
    }

    #[test]
    fn alternative_hessian_is_not_the_optimum() {
        let params = random_params(11, 5);
        let c = het_resolvent(&params).unwrap();
        let rhs = c.transpose() * &params.theta;
        let alt = het_hessian_alternative(&params, &c).lu().solve(&rhs).unwrap();
        let best = optimal_heterogeneous(&params).unwrap();
        let profit_at = |alpha: &DVector<f64>| {
            let e = &c * alpha;
            let beta = het_binding_beta(&params, alpha, &e);
            het_profit(&params, &Contract { alpha: alpha.clone(), beta }, &e)
        };
        assert!(profit_at(&alt) < best.expected_profit);
    }

    #[test]
    fn single_group_symmetric_instance_has_no_rents() {
        let net = Network::regular_union_of_cycles(&[5]).unwrap();
        let params = admissible(&net, 0.6);
        let het = HeterogeneousParams::from_homogeneous(&net, &params).unwrap();
        let sol = optimal_heterogeneous_coarse(&het, &Partition::single(5).unwrap()).unwrap();
        assert!(sol.rents.amax() < 1e-12);
    }

    #[test]
    fn file_forms() {
        let dir = tempfile::tempdir().unwrap();
        let edges = dir.path().join("g.txt");
        std::fs::write(&edges, "n 2 directed 1\n0 1 1\n").unwrap();
        let toml_path = dir.path().join("p.toml");
        std::fs::write(
            &toml_path,
            "theta = [1.0, 2.0]\nv = [1.0, 1.5]\nr = [1.0, 0.5]\nU = [0.0, 0.1]\nedge_list = \"g.txt\"\nlambda = 0.2\nsigma2 = 1.0\n",
        )
        .unwrap();
        let p = HeterogeneousParams::read(&toml_path).unwrap();
        assert_eq!(p.spillovers[(0, 1)], 1.0);
        assert_eq!(p.outside[1], 0.1);

        let json_path = dir.path().join("p.json");
        std::fs::write(
            &json_path,
            r#"{"theta":[1,2],"v":[1,1.5],"r":[1,0.5],"Lambda":[[0,1],[0,0]],"lambda":0.2,"sigma2":1}"#,
        )
        .unwrap();
        let q = HeterogeneousParams::read(&json_path).unwrap();
        assert_eq!(q.spillovers, p.spillovers);
        assert_eq!(q.outside, DVector::zeros(2));

        std::fs::write(&json_path, r#"{"theta":[1],"v":[1],"r":[1],"lambda":0,"sigma2":1}"#).unwrap();
        assert!(HeterogeneousParams::read(&json_path).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn binding_participation(seed in 0u64..10_000, n in 2usize..8) {
            let params = random_params(seed, n);
            let sol = optimal_heterogeneous(&params).unwrap();
            prop_assert!((&sol.certainty_equivalents - &params.outside).amax() <= 1e-8);
            let hadamard = het_binding_beta_hadamard(&params, &sol.contract.alpha, &sol.efforts);
            prop_assert!((hadamard - &sol.contract.beta).amax() <= 1e-10);
            let game = params.game_matrix() * &sol.efforts;
            let pushed = sol.contract.alpha.component_mul(&params.theta);
            prop_assert!((game - pushed).amax() <= 1e-10);
        }
    }
}
