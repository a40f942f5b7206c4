//! Group-level (coarse) contracts: one `(alpha, beta)` pair per worker type.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::contracts::{granular_hessian, optimal_granular};
use crate::equilibrium::{self, require_assumption2, Contract, ModelParams};
use crate::error::{Error, Result};
use crate::linalg;
use crate::network::{resolvent_sums, Direction, Network};

/// Assignment of workers to `k` non-empty groups labelled `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::input("partition is empty"));
        }
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; k];
        for &g in &assignment {
            seen[g] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::input(format!("group {missing} has no members")));
        }
        Ok(Partition { assignment, k })
    }

    /// Consecutive groups of the given sizes.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::input("group sizes must be positive"));
        }
        let assignment = sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &s)| std::iter::repeat_n(g, s))
            .collect();
        Partition::new(assignment)
    }

    pub fn singletons(n: usize) -> Result<Self> {
        Partition::new((0..n).collect())
    }

    pub fn single(n: usize) -> Result<Self> {
        Partition::new(vec![0; n])
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn group_count(&self) -> usize {
        self.k
    }

    /// Member indices of each group, in worker order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &g) in self.assignment.iter().enumerate() {
            out[g].push(i);
        }
        out
    }

    /// The `n x k` type matrix `T` with `T[i][g] = 1` iff worker `i` is in group `g`.
    pub fn type_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), self.k, |i, g| {
            if self.assignment[i] == g {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Moves the listed members of `group` into a new group `k`.
    pub fn split(&self, group: usize, members: &[usize]) -> Result<Partition> {
        let mut assignment = self.assignment.clone();
        for &i in members {
            if assignment.get(i) != Some(&group) {
                return Err(Error::input(format!("worker {i} is not in group {group}")));
            }
            assignment[i] = self.k;
        }
        Partition::new(assignment)
    }

    /// Parses one line of comma-separated group ids.
    pub fn parse(text: &str) -> Result<Self> {
        let line = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .find(|l| !l.is_empty())
            .ok_or(Error::Parse {
                line: 1,
                message: "no group ids found".into(),
            })?;
        let ids = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<usize>().map_err(|e| Error::Parse {
                    line: 1,
                    message: format!("bad group id `{}`: {e}", tok.trim()),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(ids)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Partition::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_line(&self) -> String {
        let ids: Vec<String> = self.assignment.iter().map(|g| g.to_string()).collect();
        ids.join(",")
    }

    pub(crate) fn check_size(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(Error::input(format!(
                "partition covers {} workers, network has {n}",
                self.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseSolution {
    pub group_alpha: DVector<f64>,
    pub group_beta: DVector<f64>,
    /// Worker-level expansion of the group contract.
    pub contract: Contract,
    /// Centrality rents `mu_i`, the certainty equivalent each worker keeps.
    pub rents: DVector<f64>,
    pub efforts: DVector<f64>,
    pub certainty_equivalents: DVector<f64>,
    pub expected_profit: f64,
}

/// Group values `k -> max_{i in k} cost_i` and the gaps `max - cost_i`.
pub(crate) fn group_max_and_rents(partition: &Partition, cost: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let mut top = DVector::from_element(partition.group_count(), f64::NEG_INFINITY);
    for (i, &g) in partition.assignment().iter().enumerate() {
        top[g] = top[g].max(cost[i]);
    }
    let rents = DVector::from_fn(partition.len(), |i, _| top[partition.assignment()[i]] - cost[i]);
    (top, rents)
}

pub fn optimal_coarse(network: &Network, params: &ModelParams, partition: &Partition) -> Result<CoarseSolution> {
    params.require_unit_cost()?;
    partition.check_size(network.size())?;
    require_assumption2(network, params)?;
    let g = network.adjacency();
    let x = params.risk();
    let c = network.resolvent(params.lambda)?;
    let t = partition.type_matrix();
    let h = granular_hessian(g, &c, params.lambda, x);
    let reduced = t.transpose() * h * &t;
    let rhs = t.transpose() * resolvent_sums(&c, Direction::Outgoing);
    let group_alpha = linalg::spd_solve(&reduced, &rhs).ok_or_else(|| {
        Error::IndefiniteObjective("T'(C'(I - lambda(G+G'))C + r sigma2 I)T is not positive definite".into())
    })?;
    let alpha = &t * &group_alpha;
    let e = &c * &alpha;
    let total = e.sum();
    let psi = equilibrium::effort_costs(g, params.lambda, &e);
    let (top, rents) = group_max_and_rents(partition, &psi);
    let group_beta = DVector::from_fn(partition.group_count(), |k, _| {
        let a = group_alpha[k];
        0.5 * a * a * x - a * total + top[k]
    });
    let contract = Contract {
        beta: &t * &group_beta,
        alpha,
    };
    let outcome = equilibrium::evaluate(network, params, &contract)?;
    Ok(CoarseSolution {
        group_alpha,
        group_beta,
        contract,
        rents,
        efforts: outcome.efforts,
        certainty_equivalents: outcome.certainty_equivalents,
        expected_profit: outcome.expected_profit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossDecomposition {
    /// Output lost to distorted incentives, `1/2 1'C(alpha^G - alpha^C)`.
    pub alpha_component: f64,
    /// Rents left to workers, `1'mu`.
    pub beta_component: f64,
    pub total: f64,
    pub granular_profit: f64,
    pub coarse_profit: f64,
}

impl LossDecomposition {
    /// `|total - (granular_profit - coarse_profit)|`.
    pub fn gap(&self) -> f64 {
        (self.total - (self.granular_profit - self.coarse_profit)).abs()
    }
}

pub fn loss_decomposition(
    network: &Network,
    params: &ModelParams,
    partition: &Partition,
) -> Result<LossDecomposition> {
    let granular = optimal_granular(network, params)?;
    let coarse = optimal_coarse(network, params, partition)?;
    let c = network.resolvent(params.lambda)?;
    let diff = &granular.contract.alpha - &coarse.contract.alpha;
    let alpha_component = 0.5 * (c * diff).sum();
    let beta_component = coarse.rents.sum();
    Ok(LossDecomposition {
        alpha_component,
        beta_component,
        total: alpha_component + beta_component,
        granular_profit: granular.expected_profit,
        coarse_profit: coarse.expected_profit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::assumption2_threshold;
    use proptest::prelude::*;

    fn admissible(net: &Network, kappa: f64, r: f64, sigma2: f64) -> ModelParams {
        let rho = net.spectral_radius();
        let t = assumption2_threshold(r * sigma2);
        let lambda = if rho > 0.0 { kappa * t / rho } else { kappa };
        ModelParams::new(lambda, r, sigma2).unwrap()
    }

    #[test]
    fn type_matrix_examples() {
        let t = Partition::from_sizes(&[1, 2, 3]).unwrap().type_matrix();
        let expected = DMatrix::from_row_slice(
            6,
            3,
            &[
                1.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, //
                0.0, 1.0, 0.0, //
                0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0,
            ],
        );
        assert_eq!(t, expected);
        assert_eq!(Partition::singletons(4).unwrap().type_matrix(), DMatrix::identity(4, 4));
        assert_eq!(Partition::single(4).unwrap().type_matrix(), DMatrix::from_element(4, 1, 1.0));
        assert!(Partition::new(vec![0, 2, 2]).is_err());
    }

    #[test]
    fn partition_file_format() {
        let p = Partition::parse("# types\n0, 1,1,2\n").unwrap();
        assert_eq!(p.assignment(), &[0, 1, 1, 2]);
        assert_eq!(Partition::parse(&p.to_line()).unwrap(), p);
        assert!(Partition::parse("0,x\n").is_err());
        assert!(Partition::parse("\n").is_err());
    }

    #[test]
    fn singleton_partition_is_granular() {
        let net = Network::erdos_renyi(8, 0.4, 6).unwrap();
        let params = admissible(&net, 0.8, 1.0, 1.0);
        let coarse = optimal_coarse(&net, &params, &Partition::singletons(8).unwrap()).unwrap();
        let granular = optimal_granular(&net, &params).unwrap();
        assert!((&coarse.contract.alpha - &granular.contract.alpha).amax() < 1e-10);
        assert!((coarse.expected_profit - granular.expected_profit).abs() < 1e-10);
        assert!(coarse.rents.amax() == 0.0);
    }

    #[test]
    fn no_peer_effects_group_alpha() {
        let net = Network::erdos_renyi(6, 0.5, 1).unwrap();
        let params = ModelParams::new(0.0, 1.0, 3.0).unwrap();
        let sol = optimal_coarse(&net, &params, &Partition::from_sizes(&[2, 4]).unwrap()).unwrap();
        assert!(sol.group_alpha.iter().all(|a| (*a - 0.25).abs() < 1e-14));
    }

    #[test]
    fn cycle_single_group_has_no_rents() {
        let net = Network::regular_union_of_cycles(&[7]).unwrap();
        let params = admissible(&net, 0.8, 1.0, 1.0);
        let sol = optimal_coarse(&net, &params, &Partition::single(7).unwrap()).unwrap();
        assert!(sol.rents.amax() < 1e-12);
        let granular = optimal_granular(&net, &params).unwrap();
        assert!((sol.expected_profit - granular.expected_profit).abs() < 1e-10);
    }

    #[test]
    fn loss_on_trivial_cases() {
        let net = Network::erdos_renyi(6, 0.5, 9).unwrap();
        let params = admissible(&net, 0.8, 1.0, 1.0);
        let l = loss_decomposition(&net, &params, &Partition::singletons(6).unwrap()).unwrap();
        assert!(l.alpha_component.abs() < 1e-10 && l.beta_component.abs() < 1e-10);

        let empty = Network::empty(5).unwrap();
        let l = loss_decomposition(&empty, &params, &Partition::from_sizes(&[2, 3]).unwrap()).unwrap();
        assert!(l.alpha_component.abs() < 1e-14 && l.beta_component.abs() < 1e-14);
    }

    #[test]
    fn er_single_group_loss() {
        let net = Network::erdos_renyi(20, 0.3, 17).unwrap();
        let params = admissible(&net, 0.8, 1.0, 1.0);
        let l = loss_decomposition(&net, &params, &Partition::single(20).unwrap()).unwrap();
        assert!(l.total >= 0.0);
        assert!(l.gap() <= 1e-8);
    }

    #[test]
    fn refinement_can_lower_profit_net_of_rents() {
        // Group incentives ignore the rents they create, so a finer partition
        // can leave more surplus with workers than it gains in output.
        let net = Network::erdos_renyi(8, 0.1, 915).unwrap();
        let params = admissible(&net, 0.8946853116908345, 1.0, 1.0);
        let coarse = Partition::new(vec![0, 0, 0, 0, 0, 0, 1, 0]).unwrap();
        let members = &coarse.groups()[0];
        let finer = coarse.split(0, &members[..members.len() / 2]).unwrap();
        let a = optimal_coarse(&net, &params, &coarse).unwrap();
        let b = optimal_coarse(&net, &params, &finer).unwrap();
        assert!(b.expected_profit < a.expected_profit - 1e-9);
        assert!(b.efforts.sum() >= a.efforts.sum());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn coarse_invariants(
            seed in 0u64..10_000,
            n in 3usize..10,
            p in 0.1f64..0.9,
            kappa in 0.05f64..0.95,
            groups in prop::collection::vec(0usize..3, 10),
        ) {
            let net = Network::erdos_renyi(n, p, seed).unwrap();
            let params = admissible(&net, kappa, 1.0, 1.0);
            // Relabel to consecutive ids so every group is non-empty.
            let mut labels: Vec<usize> = Vec::new();
            let assignment: Vec<usize> = groups[..n]
                .iter()
                .map(|g| match labels.iter().position(|l| l == g) {
                    Some(pos) => pos,
                    None => { labels.push(*g); labels.len() - 1 }
                })
                .collect();
            let partition = Partition::new(assignment).unwrap();
            let sol = optimal_coarse(&net, &params, &partition).unwrap();

            let identity = 0.5 * sol.efforts.sum() - sol.rents.sum();
            prop_assert!((sol.expected_profit - identity).abs() <= 1e-8);
            prop_assert!(sol.rents.min() >= -1e-10);
            for members in partition.groups() {
                let least = members.iter().map(|&i| sol.rents[i]).fold(f64::INFINITY, f64::min);
                prop_assert!(least.abs() <= 1e-10);
                for &i in &members {
                    prop_assert_eq!(sol.contract.alpha[i], sol.contract.alpha[members[0]]);
                    prop_assert_eq!(sol.contract.beta[i], sol.contract.beta[members[0]]);
                    prop_assert!((sol.certainty_equivalents[i] - sol.rents[i]).abs() <= 1e-10);
                }
            }

            let granular = optimal_granular(&net, &params).unwrap();
            prop_assert!(sol.expected_profit <= granular.expected_profit + 1e-10);

            let loss = loss_decomposition(&net, &params, &partition).unwrap();
            prop_assert!(loss.gap() <= 1e-8);

            // Splitting a group enlarges the feasible set of the rent-free
            // objective, whose maximum is half the induced output.
            let groups = partition.groups();
            let (gid, members) = groups.iter().enumerate().max_by_key(|(_, m)| m.len()).unwrap();
            if members.len() >= 2 {
                let refined = partition.split(gid, &members[..members.len() / 2]).unwrap();
                let finer = optimal_coarse(&net, &params, &refined).unwrap();
                prop_assert!(0.5 * (finer.efforts.sum() - sol.efforts.sum()) >= -1e-9);
            }
        }
    }
}
