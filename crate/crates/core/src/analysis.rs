//! Spectral profit formula, organizational-design comparisons, link
//! derivatives of the optimal contract, and the team-strength versus
//! productivity investment comparison.

use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;

use crate::contracts::{granular_alpha_for_matrix, optimal_granular};
use crate::equilibrium::{check_assumption2, require_assumption2, ModelParams};
use crate::error::{Error, Result};
use crate::heterogeneous::{optimal_heterogeneous, HeterogeneousParams};
use crate::network::{resolvent_sums, Direction, Network, PlantedVariant, Spectrum};

/// `(1 + x)(1 - lm)^2 - lm^2` with `lm = lambda * mu`.
pub fn spectral_denominator(x: f64, lm: f64) -> f64 {
    (1.0 + x) * (1.0 - lm).powi(2) - lm * lm
}

/// `(1 + x)(1 - 2 lm) + x lm^2`, algebraically equal to [`spectral_denominator`].
pub fn spectral_denominator_alt(x: f64, lm: f64) -> f64 {
    (1.0 + x) * (1.0 - 2.0 * lm) + x * lm * lm
}

fn complex_denominator(x: f64, lm: Complex<f64>) -> Complex<f64> {
    let one = Complex::new(1.0, 0.0);
    (one - lm) * (one - lm) * (1.0 + x) - lm * lm
}

fn complex_denominator_alt(x: f64, lm: Complex<f64>) -> Complex<f64> {
    let one = Complex::new(1.0, 0.0);
    (one - lm * 2.0) * (1.0 + x) + lm * lm * x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralTerm {
    pub eigenvalue: Complex<f64>,
    /// `(u'1)^2`, or `(v'1)(u'1)` on directed networks.
    pub weight: Complex<f64>,
    pub denominator: Complex<f64>,
    /// `weight / denominator`; the profit is half the sum of these.
    pub contribution: Complex<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfitReport {
    pub terms: Vec<SpectralTerm>,
    pub total: f64,
    /// Imaginary part of the spectral sum (round-off on real inputs).
    pub imaginary_residue: f64,
    /// `1/2 1'e*` from the granular solver.
    pub direct_total: f64,
    pub agreement_gap: f64,
    /// Largest gap between the two denominator forms over all terms.
    pub denominator_identity_gap: f64,
    /// Every term with a non-negligible weight has a positive real denominator.
    pub denominators_positive: bool,
}

pub fn spectral_profit(network: &Network, params: &ModelParams) -> Result<SpectralProfitReport> {
    params.require_unit_cost()?;
    require_assumption2(network, params)?;
    let spectrum = network.spectrum()?;
    let x = params.risk();
    let lambda = params.lambda;
    let mut terms = Vec::with_capacity(spectrum.len());
    let mut sum = Complex::new(0.0, 0.0);
    let mut identity_gap = 0.0_f64;
    let mut positive = true;
    for l in 0..spectrum.len() {
        let mu = spectrum.eigenvalue(l);
        let weight = spectrum.ones_weight(l);
        let lm = mu * lambda;
        let denominator = complex_denominator(x, lm);
        identity_gap = identity_gap.max((denominator - complex_denominator_alt(x, lm)).norm());
        if weight.norm() > 1e-12 && !(denominator.re > 0.0) {
            positive = false;
        }
        let contribution = weight / denominator;
        sum += contribution;
        terms.push(SpectralTerm {
            eigenvalue: mu,
            weight,
            denominator,
            contribution,
        });
    }
    let direct = optimal_granular(network, params)?;
    let direct_total = 0.5 * direct.efforts.sum();
    let total = 0.5 * sum.re;
    Ok(SpectralProfitReport {
        terms,
        total,
        imaginary_residue: 0.5 * sum.im,
        direct_total,
        agreement_gap: (total - direct_total).abs(),
        denominator_identity_gap: identity_gap,
        denominators_positive: positive,
    })
}

fn symmetric_parts(spectrum: &Spectrum) -> Result<(DVector<f64>, DVector<f64>)> {
    match spectrum {
        Spectrum::Symmetric {
            eigenvalues,
            eigenvectors,
        } => {
            let weights = DVector::from_iterator(
                eigenvalues.len(),
                eigenvectors.column_iter().map(|u| u.sum().powi(2)),
            );
            Ok((eigenvalues.clone(), weights))
        }
        Spectrum::Directed { .. } => Err(Error::input("operation requires a symmetric network")),
    }
}

/// `1/(2v) sum_l (u_l'1)^2 / ((1 + v x)(1 - (lambda/v) mu_l)^2 - ((lambda/v) mu_l)^2)`.
pub fn v_augmented_profit_from_parts(
    eigenvalues: &DVector<f64>,
    weights: &DVector<f64>,
    lambda: f64,
    v: f64,
    risk: f64,
) -> f64 {
    let scale = lambda / v;
    let sum: f64 = eigenvalues
        .iter()
        .zip(weights.iter())
        .map(|(mu, w)| w / spectral_denominator(v * risk, scale * mu))
        .sum();
    sum / (2.0 * v)
}

/// Spectral profit of the model with effort cost `v e_i^2 / 2` (symmetric networks).
pub fn v_augmented_spectral_profit(network: &Network, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let (mu, w) = symmetric_parts(&network.spectrum()?)?;
    Ok(v_augmented_profit_from_parts(&mu, &w, params.lambda, params.v, params.risk()))
}

/// Same model solved directly through the heterogeneous solver with `V = v I`.
pub fn v_augmented_direct_profit(network: &Network, params: &ModelParams) -> Result<f64> {
    let het = HeterogeneousParams::from_homogeneous(network, params)?;
    Ok(optimal_heterogeneous(&het)?.expected_profit)
}

/// Two-term closed form for the complete bipartite graph `K_{n,m}`:
/// `1/2 [(u_1'1)^2 / D(sqrt(nm)) + (u_N'1)^2 / D(-sqrt(nm))]`.
pub fn bipartite_two_term_profit(n: usize, m: usize, params: &ModelParams) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    let root = (nf * mf).sqrt();
    let plus = (mf / (2.0 * mf).sqrt() + nf / (2.0 * nf).sqrt()).powi(2);
    let minus = (mf / (2.0 * mf).sqrt() - nf / (2.0 * nf).sqrt()).powi(2);
    let x = params.risk();
    let lm = params.lambda * root;
    0.5 * (plus / spectral_denominator(x, lm) + minus / spectral_denominator(x, -lm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteRow {
    pub n_left: usize,
    pub n_right: usize,
    pub closed_form: f64,
    /// Granular solver profit, or the reason it could not be computed.
    pub direct: std::result::Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteCurve {
    pub rows: Vec<BipartiteRow>,
    /// Splits attaining the maximal closed-form profit (ties within 1e-12 relative).
    pub argmax: Vec<(usize, usize)>,
    pub max_disagreement: f64,
}

/// Evaluates every split `(n, N - n)`, `1 <= n < N`, at a common `lambda`.
pub fn bipartite_profit_curve(total: usize, params: &ModelParams) -> Result<BipartiteCurve> {
    if total < 2 {
        return Err(Error::input("a bipartite split needs at least two workers"));
    }
    let rows: Vec<BipartiteRow> = (1..total)
        .map(|n| {
            let m = total - n;
            let closed_form = bipartite_two_term_profit(n, m, params);
            let direct = Network::complete_bipartite(n, m)
                .and_then(|net| optimal_granular(&net, params))
                .map(|sol| sol.expected_profit)
                .map_err(|e| e.to_string());
            BipartiteRow {
                n_left: n,
                n_right: m,
                closed_form,
                direct,
            }
        })
        .collect();
    let best = rows.iter().map(|r| r.closed_form).fold(f64::NEG_INFINITY, f64::max);
    let argmax = rows
        .iter()
        .filter(|r| (best - r.closed_form).abs() <= 1e-12 * best.abs())
        .map(|r| (r.n_left, r.n_right))
        .collect();
    let max_disagreement = rows
        .iter()
        .filter_map(|r| r.direct.as_ref().ok().map(|d| (d - r.closed_form).abs()))
        .fold(0.0, f64::max);
    Ok(BipartiteCurve {
        rows,
        argmax,
        max_disagreement,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfitSpread {
    pub profits: Vec<f64>,
    pub max_gap: f64,
}

/// Optimal granular profits of several networks and their largest pairwise gap.
pub fn profit_spread(networks: &[Network], params: &ModelParams) -> Result<ProfitSpread> {
    let profits = networks
        .iter()
        .map(|net| optimal_granular(net, params).map(|s| s.expected_profit))
        .collect::<Result<Vec<_>>>()?;
    let hi = profits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = profits.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ProfitSpread {
        max_gap: if profits.is_empty() { 0.0 } else { hi - lo },
        profits,
    })
}

/// Profits of unions of cycles with a common node count.
pub fn regular_invariance_check(configurations: &[Vec<usize>], params: &ModelParams) -> Result<ProfitSpread> {
    let sizes: Vec<usize> = configurations.iter().map(|c| c.iter().sum()).collect();
    if sizes.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::input(format!("cycle configurations cover different node counts: {sizes:?}")));
    }
    let nets = configurations
        .iter()
        .map(|c| Network::regular_union_of_cycles(c))
        .collect::<Result<Vec<_>>>()?;
    profit_spread(&nets, params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedRow {
    pub p: f64,
    pub q: f64,
    pub profit: f64,
    /// Eigenvalue of the expected adjacency on the ones vector, `(n/2)(p+q) - p`.
    pub ones_eigenvalue: f64,
    /// `n / (2 D(lambda * ones_eigenvalue))`, the only surviving spectral term.
    pub ones_term_profit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedReport {
    pub rows: Vec<PlantedRow>,
    pub max_gap: f64,
}

fn check_equal_sums(pairs: &[(f64, f64)]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::input("no (p, q) pairs given"));
    }
    let s0 = pairs[0].0 + pairs[0].1;
    if let Some(bad) = pairs.iter().find(|(p, q)| (p + q - s0).abs() > 1e-12) {
        return Err(Error::input(format!(
            "pair {bad:?} has p + q = {}, expected {s0}",
            bad.0 + bad.1
        )));
    }
    Ok(())
}

/// Granular profits on the expected planted-partition adjacency for pairs with a common `p + q`.
pub fn planted_partition_invariance(n: usize, pairs: &[(f64, f64)], params: &ModelParams) -> Result<PlantedReport> {
    check_equal_sums(pairs)?;
    let x = params.risk();
    let rows = pairs
        .iter()
        .map(|&(p, q)| {
            let net = Network::planted_partition(n, p, q, PlantedVariant::Expected)?;
            let profit = optimal_granular(&net, params)?.expected_profit;
            let ones_eigenvalue = 0.5 * n as f64 * (p + q) - p;
            let ones_term_profit = 0.5 * n as f64 / spectral_denominator(x, params.lambda * ones_eigenvalue);
            Ok(PlantedRow {
                p,
                q,
                profit,
                ones_eigenvalue,
                ones_term_profit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hi = rows.iter().map(|r| r.profit).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.profit).fold(f64::INFINITY, f64::min);
    Ok(PlantedReport {
        rows,
        max_gap: hi - lo,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPlantedRow {
    pub p: f64,
    pub q: f64,
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    /// Draws rejected because they violated the admissibility conditions.
    pub rejected: usize,
}

/// Monte Carlo means of the granular profit over sampled planted partitions,
/// seeds `0..seeds` for every pair.
pub fn planted_partition_sampled(
    n: usize,
    pairs: &[(f64, f64)],
    params: &ModelParams,
    seeds: u64,
) -> Result<Vec<SampledPlantedRow>> {
    check_equal_sums(pairs)?;
    pairs
        .iter()
        .map(|&(p, q)| {
            let draws: Vec<Option<f64>> = (0..seeds)
                .into_par_iter()
                .map(|seed| {
                    let net = Network::planted_partition(n, p, q, PlantedVariant::Sampled { seed }).ok()?;
                    optimal_granular(&net, params).ok().map(|s| s.expected_profit)
                })
                .collect();
            let values: Vec<f64> = draws.iter().flatten().copied().collect();
            let k = values.len();
            if k < 2 {
                return Err(Error::regime(format!("fewer than two admissible draws for (p, q) = ({p}, {q})")));
            }
            let mean = values.iter().sum::<f64>() / k as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
            Ok(SampledPlantedRow {
                p,
                q,
                mean,
                std_error: (var / k as f64).sqrt(),
                samples: k,
                rejected: draws.len() - k,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkDerivative {
    pub alpha: DVector<f64>,
    pub efforts: DVector<f64>,
}

fn check_link(network: &Network, i: usize, j: usize) -> Result<()> {
    let n = network.size();
    if i >= n || j >= n || i == j {
        return Err(Error::input(format!("link ({i}, {j}) is not an off-diagonal entry for n = {n}")));
    }
    Ok(())
}

/// Analytic derivative of the optimal incentives and efforts with respect to
/// the single entry `g_ij` (the mirror entry is held fixed).
pub fn link_derivative_alpha(network: &Network, params: &ModelParams, i: usize, j: usize) -> Result<LinkDerivative> {
    params.require_unit_cost()?;
    check_link(network, i, j)?;
    let report = require_assumption2(network, params)?;
    if report.lhs >= report.threshold {
        return Err(Error::regime("derivative requires a strictly interior lambda"));
    }
    let g = network.adjacency();
    let n = network.size();
    let lambda = params.lambda;
    let x = params.risk();
    let (c, alpha) = granular_alpha_for_matrix(g, lambda, x)?;
    let cg = &c * g;
    let k = cg.transpose() * &cg;
    let s = lambda * lambda / (1.0 + x);
    let w = crate::linalg::inverse(&(DMatrix::identity(n, n) - k * s))?;
    let b = resolvent_sums(&c, Direction::Outgoing);

    // d(CG)/dg_ij = C E_ij C.
    let d_cg = c.column(i) * c.row(j);
    let d_k = d_cg.transpose() * &cg + cg.transpose() * &d_cg;
    let d_w = &w * d_k * &w * s;
    let d_b = c.row(j).transpose() * (lambda * c.column(i).sum());
    let d_alpha = (d_w * &b + &w * d_b) / (1.0 + x);

    let e = &c * &alpha;
    let mut pushed = d_alpha.clone();
    pushed[i] += lambda * e[j];
    let d_e = &c * pushed;
    Ok(LinkDerivative {
        alpha: d_alpha,
        efforts: d_e,
    })
}

/// Central finite differences of the same derivative with step `h`. The
/// perturbed matrices may leave the non-negative orthant when `g_ij < h`.
pub fn link_derivative_fd(
    network: &Network,
    params: &ModelParams,
    i: usize,
    j: usize,
    h: f64,
) -> Result<LinkDerivative> {
    params.require_unit_cost()?;
    check_link(network, i, j)?;
    if !(h > 0.0) {
        return Err(Error::input("finite-difference step must be positive"));
    }
    let solve = |delta: f64| -> Result<(DVector<f64>, DVector<f64>)> {
        let mut g = network.adjacency().clone();
        g[(i, j)] += delta;
        let (c, alpha) = granular_alpha_for_matrix(&g, params.lambda, params.risk())?;
        let e = c * &alpha;
        Ok((alpha, e))
    };
    let (a_plus, e_plus) = solve(h)?;
    let (a_minus, e_minus) = solve(-h)?;
    Ok(LinkDerivative {
        alpha: (a_plus - a_minus) / (2.0 * h),
        efforts: (e_plus - e_minus) / (2.0 * h),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvestmentTerm {
    pub eigenvalue: f64,
    pub weight: f64,
    /// `(1 - mu)(1 + r sigma2 (v - lambda mu))`.
    pub condition_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InvestmentVerdict {
    /// Condition below one half for every relevant eigenvalue.
    TeamStrength,
    /// Condition above one half for every relevant eigenvalue.
    Productivity,
    Mixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvestmentReport {
    pub terms: Vec<InvestmentTerm>,
    pub analytic_verdict: InvestmentVerdict,
    pub d_profit_d_lambda: f64,
    pub d_profit_d_v: f64,
    /// `d pi / d lambda > |d pi / d v|` by finite differences.
    pub finite_difference_favors_team: bool,
}

pub fn investment_comparison(network: &Network, params: &ModelParams) -> Result<InvestmentReport> {
    params.validate()?;
    let report = check_assumption2(network, params);
    if params.lambda * report.spectral_radius >= params.v * report.threshold {
        return Err(Error::InvalidRegime {
            message: "lambda / v violates the admissibility bound".into(),
            report: Some(report),
        });
    }
    let (mu, w) = symmetric_parts(&network.spectrum()?)?;
    let x = params.risk();
    let terms: Vec<InvestmentTerm> = mu
        .iter()
        .zip(w.iter())
        .filter(|(_, wt)| **wt > 1e-10)
        .map(|(&m, &wt)| InvestmentTerm {
            eigenvalue: m,
            weight: wt,
            condition_value: (1.0 - m) * (1.0 + x * (params.v - params.lambda * m)),
        })
        .collect();
    let analytic_verdict = if terms.iter().all(|t| t.condition_value < 0.5) {
        InvestmentVerdict::TeamStrength
    } else if terms.iter().all(|t| t.condition_value > 0.5) {
        InvestmentVerdict::Productivity
    } else {
        InvestmentVerdict::Mixed
    };
    let h = 1e-5;
    let f = |lambda: f64, v: f64| v_augmented_profit_from_parts(&mu, &w, lambda, v, x);
    let d_lambda = (f(params.lambda + h, params.v) - f(params.lambda - h, params.v)) / (2.0 * h);
    let d_v = (f(params.lambda, params.v + h) - f(params.lambda, params.v - h)) / (2.0 * h);
    Ok(InvestmentReport {
        terms,
        analytic_verdict,
        d_profit_d_lambda: d_lambda,
        d_profit_d_v: d_v,
        finite_difference_favors_team: d_lambda > d_v.abs(),
    })
}
