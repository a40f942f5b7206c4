//! Granular-vs-coarse loss sweep over Erdos-Renyi densities.

use rayon::prelude::*;

use super::config::Format;
use super::output::{emit, Document, Table};
use super::{apply_param_flags, base_config, SweepArgs};
use crate::coarse::{loss_decomposition, Partition};
use crate::equilibrium::{assumption2_threshold, lambda_from_fraction, ModelParams};
use crate::error::{Error, Result};
use crate::network::Network;

/// How lambda is chosen for each sampled graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `kappa * threshold / mu_1` for every graph (zero on empty graphs).
    PerGraph { kappa: f64 },
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    pub p_grid: Vec<f64>,
    pub seeds_per_p: u64,
    pub lambda: LambdaRule,
    pub r: f64,
    pub sigma2: f64,
    pub base_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphLoss {
    pub seed: u64,
    pub lambda: f64,
    pub spectral_radius: f64,
    pub alpha_loss: f64,
    pub beta_loss: f64,
    pub total_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub alpha_loss_mean: f64,
    pub alpha_loss_stderr: f64,
    pub beta_loss_mean: f64,
    pub beta_loss_stderr: f64,
    pub total_loss_mean: f64,
    pub total_loss_stderr: f64,
    pub graphs: Vec<GraphLoss>,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Seed of graph `s` at grid index `k`.
pub fn graph_seed(base: u64, k: usize, seeds_per_p: u64, s: u64) -> u64 {
    base.wrapping_add(k as u64 * seeds_per_p).wrapping_add(s)
}

/// Averages the single-group loss decomposition over `seeds_per_p` graphs
/// per density. Graphs run in parallel; rows come back in grid order.
pub fn sweep_er(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.seeds_per_p == 0 {
        return Err(Error::input("seeds_per_p must be positive"));
    }
    if let Some(p) = cfg.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::input(format!("grid value {p} is outside [0, 1]")));
    }
    let partition = Partition::single(cfg.n)?;
    let risk = cfg.r * cfg.sigma2;
    cfg.p_grid
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let graphs = (0..cfg.seeds_per_p)
                .into_par_iter()
                .map(|s| {
                    let seed = graph_seed(cfg.base_seed, k, cfg.seeds_per_p, s);
                    let net = Network::erdos_renyi(cfg.n, p, seed)?;
                    let mu1 = net.spectral_radius();
                    let lambda = match cfg.lambda {
                        LambdaRule::PerGraph { kappa } => lambda_from_fraction(kappa, mu1, risk),
                        LambdaRule::Fixed(l) => l,
                    };
                    let params = ModelParams::new(lambda, cfg.r, cfg.sigma2)?;
                    let loss = loss_decomposition(&net, &params, &partition)?;
                    Ok(GraphLoss {
                        seed,
                        lambda,
                        spectral_radius: mu1,
                        alpha_loss: loss.alpha_component,
                        beta_loss: loss.beta_component,
                        total_loss: loss.total,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let pick = |f: fn(&GraphLoss) -> f64| mean_stderr(&graphs.iter().map(f).collect::<Vec<_>>());
            let (am, ase) = pick(|g| g.alpha_loss);
            let (bm, bse) = pick(|g| g.beta_loss);
            let (tm, tse) = pick(|g| g.total_loss);
            Ok(SweepRow {
                p,
                alpha_loss_mean: am,
                alpha_loss_stderr: ase,
                beta_loss_mean: bm,
                beta_loss_stderr: bse,
                total_loss_mean: tm,
                total_loss_stderr: tse,
                graphs,
            })
        })
        .collect()
}

pub fn sweep_table(cfg: &SweepConfig, rows: &[SweepRow]) -> Table {
    let mut table = Table::new(&[
        "p",
        "alpha_loss_mean",
        "beta_loss_mean",
        "total_loss_mean",
        "alpha_loss_stderr",
        "beta_loss_stderr",
        "total_loss_stderr",
    ]);
    table.meta("n", cfg.n);
    table.meta("seeds_per_p", cfg.seeds_per_p);
    table.meta("base_seed", cfg.base_seed);
    table.meta("graph_seed", "base_seed + grid_index * seeds_per_p + s");
    table.meta("r", cfg.r);
    table.meta("sigma2", cfg.sigma2);
    table.meta("threshold", assumption2_threshold(cfg.r * cfg.sigma2));
    table.meta("partition", "single group");
    match cfg.lambda {
        LambdaRule::PerGraph { kappa } => {
            table.meta("lambda_fraction", kappa);
            table.meta("lambda_rule", "kappa * threshold / mu1 per graph, 0 when mu1 = 0");
        }
        LambdaRule::Fixed(l) => table.meta("lambda", l),
    }
    for row in rows {
        for g in &row.graphs {
            table.meta(
                "graph",
                format!("p={} seed={} mu1={} lambda={}", row.p, g.seed, g.spectral_radius, g.lambda),
            );
        }
        table.push(
            [
                row.p,
                row.alpha_loss_mean,
                row.beta_loss_mean,
                row.total_loss_mean,
                row.alpha_loss_stderr,
                row.beta_loss_stderr,
                row.total_loss_stderr,
            ]
            .iter()
            .map(|v| v.to_string())
            .collect(),
        );
    }
    table
}

pub(super) fn sweep_command(args: &SweepArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    apply_param_flags(&mut cfg.params, &args.params);
    let lambda = match (cfg.params.lambda, cfg.params.lambda_fraction) {
        (Some(l), _) => LambdaRule::Fixed(l),
        (None, k) => LambdaRule::PerGraph { kappa: k.unwrap_or(0.8) },
    };
    let sweep = SweepConfig {
        n: args.n,
        p_grid: args.p_grid.clone(),
        seeds_per_p: args.seeds_per_p,
        lambda,
        r: cfg.params.r.unwrap_or(1.0),
        sigma2: cfg.params.sigma2.unwrap_or(1.0),
        base_seed: args.common.seed.unwrap_or(0),
    };
    let rows = sweep_er(&sweep)?;
    let table = sweep_table(&sweep, &rows);
    let format = args.common.format.or(cfg.format).unwrap_or(Format::Csv);
    let doc = match format {
        Format::Csv => Document::Table(table),
        Format::Json => {
            let json_rows: Vec<serde_json::Value> = rows
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "p": r.p,
                        "alpha_loss_mean": r.alpha_loss_mean,
                        "alpha_loss_stderr": r.alpha_loss_stderr,
                        "beta_loss_mean": r.beta_loss_mean,
                        "beta_loss_stderr": r.beta_loss_stderr,
                        "total_loss_mean": r.total_loss_mean,
                        "total_loss_stderr": r.total_loss_stderr,
                        "graphs": r.graphs.iter().map(|g| serde_json::json!({
                            "seed": g.seed,
                            "lambda": g.lambda,
                            "spectral_radius": g.spectral_radius,
                            "alpha_loss": g.alpha_loss,
                            "beta_loss": g.beta_loss,
                            "total_loss": g.total_loss,
                        })).collect::<Vec<_>>(),
                    })
                })
                .collect();
            Document::Json(serde_json::json!({
                "metadata": table.metadata.iter().filter(|(k, _)| k != "graph").cloned().collect::<std::collections::BTreeMap<_, _>>(),
                "rows": json_rows,
            }))
        }
    };
    emit(&doc.render(format), args.common.out.as_deref().or(cfg.out.as_deref()))
}
