//! Invariant battery behind `peer-contracts validate`.

use nalgebra::DVector;

use super::output::emit;
use super::sweep::{sweep_er, LambdaRule, SweepConfig};
use super::{relative_error, ValidateArgs, EXIT_CHECK, EXIT_OK};
use crate::analysis;
use crate::coarse::{loss_decomposition, optimal_coarse, Partition};
use crate::contracts::{increasing_risk_limit, no_risk_alpha, optimal_granular};
use crate::equilibrium::{ir_substituted_profit, lambda_from_fraction, nash_efforts, ModelParams};
use crate::error::Result;
use crate::heterogeneous::{optimal_heterogeneous, HeterogeneousParams};
use crate::modular::{optimal_modular, singleton_module_contract, ModuleAssignment};
use crate::network::{Network, PlantedVariant};
use crate::oracle::{granular_objective, numeric_optimal_alpha, OracleProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Battery {
    pub checks: Vec<Check>,
    /// Known gaps between stated properties and the model, reported only.
    pub notes: Vec<String>,
}

impl Battery {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn check(&mut self, name: &'static str, worst: f64, tol: f64) {
        self.checks.push(Check {
            name,
            pass: worst <= tol,
            detail: format!("worst {worst:.3e} (tol {tol:.0e})"),
        });
    }

    fn flag(&mut self, name: &'static str, pass: bool, detail: String) {
        self.checks.push(Check { name, pass, detail });
    }

    pub fn render(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!("{status}  {:width$}  {}\n", c.name, c.detail));
        }
        for note in &self.notes {
            out.push_str(&format!("INFO  {note}\n"));
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        out.push_str(&format!("{} checks, {} failed\n", self.checks.len(), failed));
        out
    }
}

fn admissible(net: &Network, kappa: f64, r: f64, sigma2: f64) -> Result<ModelParams> {
    ModelParams::new(lambda_from_fraction(kappa, net.spectral_radius(), r * sigma2), r, sigma2)
}

fn figure_one() -> Result<Network> {
    Network::from_edge_list(5, &[(1, 0, 1.0), (1, 2, 1.0), (3, 2, 1.0), (3, 4, 1.0)], true)
}

/// Symmetric networks of the battery: random graphs plus the design families.
fn symmetric_battery() -> Result<Vec<Network>> {
    let mut nets = Vec::new();
    for seed in 0..12 {
        nets.push(Network::erdos_renyi(6 + (seed as usize % 10), 0.35, seed)?);
    }
    nets.push(Network::complete_bipartite(5, 5)?);
    for cycles in [vec![10], vec![5, 5], vec![4, 3, 3]] {
        nets.push(Network::regular_union_of_cycles(&cycles)?);
    }
    for (p, q) in [(0.4, 0.4), (0.6, 0.2), (0.75, 0.05)] {
        nets.push(Network::planted_partition(10, p, q, PlantedVariant::Expected)?);
    }
    Ok(nets)
}

fn directed_battery() -> Result<Vec<Network>> {
    let mut nets = vec![figure_one()?];
    for seed in 0..6 {
        nets.push(Network::erdos_renyi_directed(5 + seed as usize, 0.4, 100 + seed, true)?);
    }
    Ok(nets)
}

/// Runs the battery. With `inject`, alpha* is shifted by 1e-3 before the
/// profit identity is evaluated, which must make that check fail.
pub fn run_battery(inject: bool) -> Result<Battery> {
    let mut b = Battery::default();
    let symmetric = symmetric_battery()?;
    let directed = directed_battery()?;

    let mut worst = 0.0f64;
    for net in symmetric.iter().chain(&directed) {
        let params = admissible(net, 0.8, 1.0, 1.0)?;
        let mut alpha = optimal_granular(net, &params)?.contract.alpha;
        if inject {
            alpha.add_scalar_mut(1e-3);
        }
        let profit = ir_substituted_profit(net, &params, &alpha)?;
        let e = nash_efforts(net, &params, &alpha)?;
        worst = worst.max((profit - 0.5 * e.sum()).abs());
    }
    b.check("profit identity", worst, 1e-8);

    let mut worst = 0.0f64;
    for net in &symmetric {
        let params = admissible(net, 0.8, 1.0, 1.0)?;
        worst = worst.max(analysis::spectral_profit(net, &params)?.agreement_gap);
    }
    b.check("spectral agreement (symmetric)", worst, 1e-8);

    oracle_checks(&mut b)?;
    corollary_checks(&mut b, &symmetric)?;
    design_checks(&mut b)?;
    derivative_checks(&mut b)?;
    coarse_checks(&mut b)?;
    modular_checks(&mut b)?;
    heterogeneous_checks(&mut b, &symmetric, &directed)?;

    let sweep = sweep_er(&SweepConfig {
        n: 8,
        p_grid: vec![0.0, 0.5, 1.0],
        seeds_per_p: 3,
        lambda: LambdaRule::PerGraph { kappa: 0.8 },
        r: 1.0,
        sigma2: 1.0,
        base_seed: 0,
    })?;
    let ends = sweep[0].total_loss_mean.abs().max(sweep[2].total_loss_mean.abs());
    b.check("sweep losses vanish at p = 0, 1", ends, 1e-10);
    b.flag(
        "sweep interior loss positive",
        sweep[1].total_loss_mean > 0.0,
        format!("mean total loss {:.3e} at p = 0.5", sweep[1].total_loss_mean),
    );

    known_gap_notes(&mut b)?;
    Ok(b)
}

fn oracle_checks(b: &mut Battery) -> Result<()> {
    let mut worst_alpha = 0.0f64;
    let mut worst_obj = 0.0f64;
    for seed in 0..4 {
        let net = Network::erdos_renyi_directed(4, 0.5, 300 + seed, false)?;
        let params = admissible(&net, 0.5, 1.0, 1.0)?;
        let closed = optimal_granular(&net, &params)?;
        let num = numeric_optimal_alpha(&net, &params, &OracleProblem::Granular)?;
        worst_alpha = worst_alpha.max((&num.alpha - &closed.contract.alpha).amax());
        worst_obj = worst_obj.max((num.objective - closed.expected_profit).abs());

        let partition = Partition::new(vec![0, 0, 1, 1])?;
        let sym = Network::erdos_renyi(4, 0.6, 400 + seed)?;
        let sp = admissible(&sym, 0.7, 1.0, 1.0)?;
        let coarse = optimal_coarse(&sym, &sp, &partition)?;
        let num = numeric_optimal_alpha(&sym, &sp, &OracleProblem::Coarse(partition))?;
        worst_alpha = worst_alpha.max((&num.alpha - &coarse.contract.alpha).amax());
        let closed_obj = granular_objective(&sym, &sp, &coarse.contract.alpha)?;
        worst_obj = worst_obj.max((num.objective - closed_obj).abs());

        let modules = ModuleAssignment::new(vec![0, 1, 0, 1])?;
        let modular = optimal_modular(&sym, &sp, &modules)?;
        let num = numeric_optimal_alpha(&sym, &sp, &OracleProblem::Modular(modules))?;
        worst_alpha = worst_alpha.max((&num.alpha - &modular.contract.alpha).amax());
        worst_obj = worst_obj.max((num.objective - modular.expected_profit).abs());

        let het = HeterogeneousParams::new(
            DVector::from_vec(vec![1.0, 1.5, 0.8, 1.2]),
            DVector::from_vec(vec![1.0, 1.3, 1.6, 1.1]),
            DVector::from_vec(vec![1.0, 0.5, 2.0, 1.5]),
            net.adjacency().clone(),
            0.1,
            1.0,
            DVector::from_vec(vec![0.0, 0.1, 0.2, 0.0]),
        )?;
        let closed = optimal_heterogeneous(&het)?;
        let num = numeric_optimal_alpha(&net, &params, &OracleProblem::Heterogeneous(het))?;
        worst_alpha = worst_alpha.max((&num.alpha - &closed.contract.alpha).amax());
        worst_obj = worst_obj.max((num.objective - closed.expected_profit).abs());
    }
    b.check("oracle equivalence alpha", worst_alpha, 1e-5);
    b.check("oracle equivalence objective", worst_obj, 1e-8);
    Ok(())
}

fn corollary_checks(b: &mut Battery, symmetric: &[Network]) -> Result<()> {
    let mut worst_zero = 0.0f64;
    let mut worst_no_risk = 0.0f64;
    let mut monotone = true;
    for net in symmetric.iter().take(6) {
        let params = ModelParams::new(0.0, 2.0, 0.75)?;
        let alpha = optimal_granular(net, &params)?.contract.alpha;
        worst_zero = worst_zero.max(alpha.iter().map(|a| (a - 1.0 / 2.5).abs()).fold(0.0, f64::max));

        let params = admissible(net, 0.8, 1.0, 0.0)?;
        let alpha = optimal_granular(net, &params)?.contract.alpha;
        worst_no_risk = worst_no_risk.max((alpha - no_risk_alpha(net, params.lambda)?).amax());

        // The threshold rises with risk, so admissibility at sigma2 = 0 covers the grid.
        let params = admissible(net, 0.8, 1.0, 0.0)?;
        let rep = increasing_risk_limit(net, &params, &[0.0, 1.0, 10.0, 100.0])?;
        monotone &= rep.monotone_decrease && rep.converges_outgoing;
    }
    b.check("no peer effects: uniform alpha", worst_zero, 1e-15);
    b.check("no risk: alpha = (1 + B(2 lambda)) / 2", worst_no_risk, 1e-10);
    b.flag("increasing risk: monotone, aligns with C1", monotone, "symmetric battery".into());

    let net = figure_one()?;
    let params = ModelParams::new(0.3, 2.0, 0.5)?;
    let alpha = optimal_granular(&net, &params)?.contract.alpha;
    let gap = (alpha[1] - 0.5).abs().max((alpha[3] - 0.5).abs());
    b.check("five-node example: influencers get 1/(1+x)", gap, 1e-12);
    Ok(())
}

fn design_checks(b: &mut Battery) -> Result<()> {
    let params = ModelParams::new(lambda_from_fraction(0.8, 5.0, 1.0), 1.0, 1.0)?;
    let curve = analysis::bipartite_profit_curve(10, &params)?;
    b.flag(
        "bipartite N=10 argmax at (5,5)",
        curve.argmax == vec![(5, 5)] && curve.max_disagreement <= 1e-10,
        format!("argmax {:?}, closed form vs solver {:.1e}", curve.argmax, curve.max_disagreement),
    );

    let params = ModelParams::new(lambda_from_fraction(0.8, 2.0, 1.0), 1.0, 1.0)?;
    let spread = analysis::regular_invariance_check(&[vec![10], vec![5, 5], vec![4, 3, 3]], &params)?;
    b.check("2-regular trio profit gap", spread.max_gap, 1e-10);

    let pairs = [(0.4, 0.4), (0.6, 0.2), (0.75, 0.05)];
    let max_mu = pairs
        .iter()
        .map(|&(p, q)| Network::planted_partition(10, p, q, PlantedVariant::Expected).map(|g| g.spectral_radius()))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let params = ModelParams::new(lambda_from_fraction(0.8, max_mu, 1.0), 1.0, 1.0)?;
    let report = analysis::planted_partition_invariance(10, &pairs, &params)?;
    let worst = report
        .rows
        .iter()
        .map(|r| (r.profit - r.ones_term_profit).abs())
        .fold(0.0, f64::max);
    b.check("planted trio matches one-term spectral profit", worst, 1e-10);
    b.notes.push(format!(
        "planted trio at p+q=0.8: profit gap {:.3e}; profit depends on p through the ones-eigenvalue (n/2)(p+q) - p",
        report.max_gap
    ));
    Ok(())
}

fn derivative_checks(b: &mut Battery) -> Result<()> {
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let net = Network::erdos_renyi_directed(6, 0.4, 500 + seed, true)?;
        let params = admissible(&net, 0.6, 1.0, 1.0)?;
        let (i, j) = (seed as usize % 6, (seed as usize + 2) % 6);
        let a = analysis::link_derivative_alpha(&net, &params, i, j)?;
        let f = analysis::link_derivative_fd(&net, &params, i, j, 1e-6)?;
        worst = worst.max(relative_error(&a.alpha, &f.alpha));
        worst = worst.max(relative_error(&a.efforts, &f.efforts));
    }
    b.check("link derivative vs finite differences", worst, 1e-5);

    let net = figure_one()?;
    let d = analysis::link_derivative_alpha(&net, &ModelParams::new(0.3, 1.0, 1.0)?, 1, 0)?;
    let signs = [0, 2, 4].iter().all(|&k| d.alpha[k] > 0.0)
        && [1, 3].iter().all(|&k| d.alpha[k].abs() <= 1e-12)
        && d.efforts.iter().all(|x| *x >= 0.0);
    b.flag("five-node example derivative signs", signs, format!("d alpha = {:?}", d.alpha.as_slice()));
    Ok(())
}

fn coarse_checks(b: &mut Battery) -> Result<()> {
    let mut identity = 0.0f64;
    let mut reduce = 0.0f64;
    let mut decomposition = 0.0f64;
    let mut rents_ok = true;
    for seed in 0..6 {
        let net = Network::erdos_renyi(8, 0.4, 600 + seed)?;
        let params = admissible(&net, 0.8, 1.0, 1.0)?;
        let partition = Partition::new((0..8).map(|i| (i + seed as usize) % 3).collect())?;
        let sol = optimal_coarse(&net, &params, &partition)?;
        identity = identity.max((sol.expected_profit - (0.5 * sol.efforts.sum() - sol.rents.sum())).abs());
        for group in partition.groups() {
            let min = group.iter().map(|&i| sol.rents[i]).fold(f64::INFINITY, f64::min);
            rents_ok &= min == 0.0 && group.iter().all(|&i| sol.rents[i] >= 0.0);
        }
        let fine = optimal_coarse(&net, &params, &Partition::singletons(8)?)?;
        let granular = optimal_granular(&net, &params)?;
        reduce = reduce.max((fine.contract.alpha - &granular.contract.alpha).amax());
        decomposition = decomposition.max(loss_decomposition(&net, &params, &partition)?.gap());
    }
    b.check("coarse profit = 1'e/2 - 1'mu", identity, 1e-8);
    b.flag("coarse rents non-negative, zero minimum per group", rents_ok, "6 instances".into());
    b.check("coarse with k = n equals granular", reduce, 1e-10);
    b.check("loss decomposition sums to profit gap", decomposition, 1e-8);
    Ok(())
}

fn modular_checks(b: &mut Battery) -> Result<()> {
    let mut closed = 0.0f64;
    let mut equal = 0.0f64;
    let mut binding = 0.0f64;
    for seed in 0..6 {
        let net = Network::erdos_renyi(7, 0.4, 700 + seed)?;
        let params = admissible(&net, 0.6, 1.0, 1.0)?;
        let singletons = ModuleAssignment::new((0..7).collect())?;
        let kkt = optimal_modular(&net, &params, &singletons)?;
        closed = closed.max((singleton_module_contract(&net, &params)? - &kkt.contract.alpha).amax());
        let modules = ModuleAssignment::new((0..7).map(|i| i % 3).collect())?;
        let sol = optimal_modular(&net, &params, &modules)?;
        let outputs = modules.module_matrix() * &sol.efforts;
        equal = equal.max(outputs.iter().map(|o| (o - sol.e_hat).abs()).fold(0.0, f64::max));
        let implied = &sol.efforts - net.adjacency() * &sol.efforts * params.lambda;
        binding = binding.max((implied - &sol.contract.alpha).amax());
    }
    b.check("singleton modules closed form vs KKT", closed, 1e-8);
    b.check("module outputs equalized", equal, 1e-8);
    b.check("modular binding alpha = (I - lambda G) e", binding, 1e-10);
    Ok(())
}

fn heterogeneous_checks(b: &mut Battery, symmetric: &[Network], directed: &[Network]) -> Result<()> {
    let mut collapse = 0.0f64;
    for net in symmetric.iter().take(4).chain(directed.iter().take(3)) {
        let params = admissible(net, 0.7, 1.5, 0.8)?;
        let hom = optimal_granular(net, &params)?;
        let het = optimal_heterogeneous(&HeterogeneousParams::from_homogeneous(net, &params)?)?;
        collapse = collapse
            .max((&het.contract.alpha - &hom.contract.alpha).amax())
            .max((&het.contract.beta - &hom.contract.beta).amax())
            .max((&het.efforts - &hom.efforts).amax())
            .max((het.expected_profit - hom.expected_profit).abs());
    }
    b.check("heterogeneous collapses to homogeneous", collapse, 1e-10);

    let net = Network::erdos_renyi_directed(5, 0.5, 800, true)?;
    let het = HeterogeneousParams::new(
        DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5, 1.0]),
        DVector::from_vec(vec![1.0, 1.5, 1.8, 1.2, 2.0]),
        DVector::from_vec(vec![0.5, 1.0, 2.0, 1.0, 0.7]),
        net.adjacency().clone(),
        0.05,
        1.2,
        DVector::from_vec(vec![0.3, -0.1, 0.0, 0.5, 0.2]),
    )?;
    let sol = optimal_heterogeneous(&het)?;
    b.check(
        "heterogeneous CE equals outside option",
        (&sol.certainty_equivalents - &het.outside).amax(),
        1e-8,
    );
    Ok(())
}

fn known_gap_notes(b: &mut Battery) -> Result<()> {
    let net = Network::erdos_renyi_directed(6, 0.6, 1, true)?;
    let params = admissible(&net, 0.5, 1.0, 1.0)?;
    match analysis::spectral_profit(&net, &params) {
        Ok(rep) => b.notes.push(format!(
            "directed spectral formula vs direct profit on a random directed graph: gap {:.3e}",
            rep.agreement_gap
        )),
        Err(e) => b.notes.push(format!("directed spectral formula not evaluated: {e}")),
    }
    let net = Network::erdos_renyi(8, 0.1, 915)?;
    let params = ModelParams::new(
        lambda_from_fraction(0.8946853116908345, net.spectral_radius(), 1.0),
        1.0,
        1.0,
    )?;
    let coarse = Partition::new(vec![0, 0, 0, 0, 0, 0, 1, 0])?;
    let finer = coarse.split(0, &[0, 1, 2])?;
    let before = optimal_coarse(&net, &params, &coarse)?.expected_profit;
    let after = optimal_coarse(&net, &params, &finer)?.expected_profit;
    b.notes.push(format!(
        "coarse refinement can lower profit net of rents: {before:.6} -> {after:.6} on a frozen 8-node instance"
    ));
    Ok(())
}

pub(super) fn validate_command(args: &ValidateArgs) -> Result<i32> {
    let battery = run_battery(args.inject_perturbation)?;
    let text = battery.render();
    emit(&text, args.common.out.as_deref())?;
    Ok(if battery.all_pass() { EXIT_OK } else { EXIT_CHECK })
}
