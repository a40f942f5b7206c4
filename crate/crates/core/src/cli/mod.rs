//! Command-line front end. `run` parses arguments, dispatches to a verb and
//! maps errors onto exit codes.

pub mod config;
pub mod output;
pub mod sweep;
pub mod validate;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::analysis;
use crate::coarse::{optimal_coarse, Partition};
use crate::contracts::{first_best, optimal_granular};
use crate::equilibrium::check_assumption2;
use crate::error::{Error, Result};
use crate::heterogeneous::{optimal_heterogeneous, HeterogeneousParams};
use crate::modular::{optimal_modular, ModuleAssignment};
use crate::network::Network;

use config::{Format, GeneratorSpec, Mode, ParamsConfig, ResolvedParams, RunConfig};
use output::{assumption2_json, emit, network_json, params_json, vec, Document, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_REGIME: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "peer-contracts", version, about = "Optimal linear contracts on peer-effects networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one contracting problem on one network.
    Solve(SolveArgs),
    /// Granular-vs-coarse losses on Erdos-Renyi graphs across densities.
    SweepEr(SweepArgs),
    /// Compare network designs at a common lambda.
    #[command(subcommand)]
    Design(DesignCommand),
    /// Analytic and finite-difference derivatives of alpha* in one link.
    Derivative(DerivativeArgs),
    /// Team-strength versus productivity investment comparison.
    InvestCompare(InvestArgs),
    /// Run the invariant battery and print a pass/fail table.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML (or .json) run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GeneratorKind {
    ErdosRenyi,
    ErdosRenyiDirected,
    CompleteBipartite,
    Cycles,
    Planted,
    Path,
    Star,
    Empty,
    Complete,
}

#[derive(Debug, Clone, Default, Args)]
pub struct NetworkArgs {
    /// Edge-list file.
    #[arg(long, conflicts_with = "generator")]
    pub network: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorKind>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    /// Part sizes for complete-bipartite, cycle lengths for cycles.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[arg(long)]
    pub directed: bool,
    #[arg(long)]
    pub weighted: bool,
    /// Planted partition: use the expected adjacency instead of a sample.
    #[arg(long)]
    pub expected: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    #[arg(long, conflicts_with = "lambda_fraction")]
    pub lambda: Option<f64>,
    /// Lambda as a fraction of the admissibility bound for the network.
    #[arg(long, alias = "kappa")]
    pub lambda_fraction: Option<f64>,
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub v: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Group assignment file (coarse mode).
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Module assignment file (modular mode).
    #[arg(long)]
    pub modules: Option<PathBuf>,
    /// Heterogeneous parameter file (heterogeneous mode).
    #[arg(long)]
    pub heterogeneous: Option<PathBuf>,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    pub p_grid: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub seeds_per_p: u64,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Subcommand)]
pub enum DesignCommand {
    /// Every split of N workers into a complete bipartite graph.
    Bipartite {
        #[arg(long, default_value_t = 10)]
        total: usize,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Unions of cycles with equal node counts, e.g. `10` `5,5` `4,3,3`.
    Regular {
        #[arg(long = "cycles", num_args = 1.., default_values_t = ["10".to_string(), "5,5".to_string(), "4,3,3".to_string()])]
        configurations: Vec<String>,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Two-block planted partitions with a common p + q, given as `p:q`.
    Planted {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.4:0.4,0.6:0.2,0.75:0.05")]
        pairs: Vec<String>,
        /// Monte Carlo draws per pair on sampled graphs (0 for expected adjacency only).
        #[arg(long, default_value_t = 0)]
        samples: u64,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Debug, Clone, Args)]
pub struct DerivativeArgs {
    /// Row of the perturbed entry g_ij (zero-based).
    #[arg(long)]
    pub i: usize,
    /// Column of the perturbed entry g_ij (zero-based).
    #[arg(long)]
    pub j: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InvestArgs {
    #[command(flatten)]
    pub network: NetworkArgs,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Perturb alpha* by 1e-3 inside the profit-identity check.
    #[arg(long)]
    pub inject_perturbation: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_) | Error::Parse { .. } | Error::Io(_) => EXIT_INPUT,
        Error::InvalidRegime { .. }
        | Error::IndefiniteObjective(_)
        | Error::NonDiagonalizable { .. }
        | Error::NonConcave(_) => EXIT_REGIME,
    }
}

/// Entry point used by the binary. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if let Error::InvalidRegime { report: Some(r), .. } = &err {
                eprintln!(
                    "admissibility: lambda*mu1 = {} vs threshold {} (mu1 = {})",
                    r.lhs, r.threshold, r.spectral_radius
                );
            }
            exit_code(&err)
        }
    }
}

pub fn execute(command: &Command) -> Result<i32> {
    match command {
        Command::Solve(args) => solve(args).map(|_| EXIT_OK),
        Command::SweepEr(args) => sweep::sweep_command(args).map(|_| EXIT_OK),
        Command::Design(cmd) => design(cmd).map(|_| EXIT_OK),
        Command::Derivative(args) => derivative(args).map(|_| EXIT_OK),
        Command::InvestCompare(args) => invest(args).map(|_| EXIT_OK),
        Command::Validate(args) => validate::validate_command(args),
    }
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::read(path),
        None => Ok(RunConfig::default()),
    }
}

fn require<T: Copy>(value: Option<T>, flag: &str, kind: GeneratorKind) -> Result<T> {
    value.ok_or_else(|| Error::input(format!("generator {kind:?} needs --{flag}")))
}

fn generator_spec(args: &NetworkArgs, kind: GeneratorKind, seed: u64) -> Result<GeneratorSpec> {
    let n = || require(args.n, "n", kind);
    let p = || require(args.p, "p", kind);
    Ok(match kind {
        GeneratorKind::ErdosRenyi => GeneratorSpec::ErdosRenyi { n: n()?, p: p()?, seed },
        GeneratorKind::ErdosRenyiDirected => GeneratorSpec::ErdosRenyiDirected {
            n: n()?,
            p: p()?,
            seed,
            weighted: args.weighted,
        },
        GeneratorKind::CompleteBipartite => match args.sizes.as_slice() {
            [a, b] => GeneratorSpec::CompleteBipartite { n_left: *a, n_right: *b },
            _ => return Err(Error::input("complete-bipartite needs --sizes A,B")),
        },
        GeneratorKind::Cycles => {
            if args.sizes.is_empty() {
                return Err(Error::input("cycles needs --sizes L1,L2,..."));
            }
            GeneratorSpec::Cycles {
                lengths: args.sizes.clone(),
            }
        }
        GeneratorKind::Planted => GeneratorSpec::Planted {
            n: n()?,
            p: p()?,
            q: require(args.q, "q", kind)?,
            seed: (!args.expected).then_some(seed),
        },
        GeneratorKind::Path => GeneratorSpec::Path { n: n()? },
        GeneratorKind::Star => GeneratorSpec::Star {
            leaves: n()?,
            directed: args.directed,
        },
        GeneratorKind::Empty => GeneratorSpec::Empty { n: n()? },
        GeneratorKind::Complete => GeneratorSpec::Complete { n: n()? },
    })
}

fn apply_network_flags(cfg: &mut RunConfig, args: &NetworkArgs, seed: Option<u64>) -> Result<()> {
    if let Some(file) = &args.network {
        cfg.network.file = Some(file.clone());
        cfg.network.generator = None;
    } else if let Some(kind) = args.generator {
        cfg.network.generator = Some(generator_spec(args, kind, seed.unwrap_or(0))?);
        cfg.network.file = None;
    } else if let (Some(seed), Some(spec)) = (seed, cfg.network.generator.as_mut()) {
        match spec {
            GeneratorSpec::ErdosRenyi { seed: s, .. } | GeneratorSpec::ErdosRenyiDirected { seed: s, .. } => *s = seed,
            GeneratorSpec::Planted { seed: Some(s), .. } => *s = seed,
            _ => {}
        }
    }
    Ok(())
}

fn apply_param_flags(cfg: &mut ParamsConfig, args: &ParamArgs) {
    if args.lambda.is_some() {
        cfg.lambda = args.lambda;
        cfg.lambda_fraction = None;
    }
    if args.lambda_fraction.is_some() {
        cfg.lambda_fraction = args.lambda_fraction;
        cfg.lambda = None;
    }
    cfg.r = args.r.or(cfg.r);
    cfg.sigma2 = args.sigma2.or(cfg.sigma2);
    cfg.v = args.v.or(cfg.v);
}

/// Merged configuration for verbs that act on one network.
fn network_run(
    network: &NetworkArgs,
    params: &ParamArgs,
    common: &CommonArgs,
) -> Result<(RunConfig, Network, ResolvedParams)> {
    let mut cfg = base_config(common)?;
    apply_network_flags(&mut cfg, network, common.seed)?;
    apply_param_flags(&mut cfg.params, params);
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    if common.format.is_some() {
        cfg.format = common.format;
    }
    let net = cfg.load_network()?;
    let resolved = cfg.params.resolve(net.spectral_radius())?;
    Ok((cfg, net, resolved))
}

fn finish(cfg: &RunConfig, doc: Document) -> Result<()> {
    emit(&doc.render(cfg.format.unwrap_or_default()), cfg.out.as_deref())
}

fn worker_table(columns: &[&str], data: &[Vec<f64>]) -> Table {
    let mut table = Table::new(columns);
    let n = data.first().map_or(0, |c| c.len());
    for i in 0..n {
        let mut row = vec![i.to_string()];
        row.extend(data.iter().map(|col| col[i].to_string()));
        table.push(row);
    }
    table
}

fn add_common_meta(table: &mut Table, resolved: &ResolvedParams, net: &Network) {
    let p = &resolved.params;
    table.meta("lambda", p.lambda);
    if let Some(k) = resolved.lambda_fraction {
        table.meta("lambda_fraction", k);
    }
    table.meta("r", p.r);
    table.meta("sigma2", p.sigma2);
    table.meta("v", p.v);
    table.meta("n", net.size());
    table.meta("directed", net.is_directed());
    table.meta("spectral_radius", net.spectral_radius());
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    if args.mode.is_some() {
        cfg.mode = args.mode;
    }
    for (slot, flag) in [
        (&mut cfg.partition, &args.partition),
        (&mut cfg.modules, &args.modules),
        (&mut cfg.heterogeneous, &args.heterogeneous),
    ] {
        if flag.is_some() {
            *slot = flag.clone();
        }
    }
    let mode = cfg.mode.unwrap_or(Mode::Granular);
    if mode == Mode::Heterogeneous {
        if args.common.out.is_some() {
            cfg.out = args.common.out.clone();
        }
        if args.common.format.is_some() {
            cfg.format = args.common.format;
        }
        let path = cfg
            .heterogeneous
            .clone()
            .ok_or_else(|| Error::input("heterogeneous mode needs a parameter file (--heterogeneous)"))?;
        let het = HeterogeneousParams::read(&path)?;
        let doc = solve_heterogeneous(&het, &cfg)?;
        return finish(&cfg, doc);
    }
    let (mut merged, net, resolved) = network_run(&args.network, &args.params, &args.common)?;
    merged.mode = Some(mode);
    merged.partition = cfg.partition;
    merged.modules = cfg.modules;
    let doc = solve_document(mode, &net, &resolved, &merged)?;
    finish(&merged, doc)
}

/// Builds the result document for a homogeneous solve.
pub fn solve_document(mode: Mode, net: &Network, resolved: &ResolvedParams, cfg: &RunConfig) -> Result<Document> {
    let params = &resolved.params;
    let report = check_assumption2(net, params);
    let mut doc = json!({
        "mode": mode,
        "network": network_json(net),
        "params": params_json(resolved),
        "assumption2": assumption2_json(&report),
    });
    let fields = doc.as_object_mut().expect("object");
    let table = match mode {
        Mode::FirstBest => {
            let fb = first_best(net, params)?;
            fields.insert("alpha".into(), json!(vec(&fb.contract.alpha)));
            fields.insert("beta".into(), json!(vec(&fb.contract.beta)));
            fields.insert("efforts".into(), json!(vec(&fb.efforts)));
            fields.insert("profit".into(), json!(fb.expected_profit));
            worker_table(
                &["worker", "alpha", "beta", "effort"],
                &[vec(&fb.contract.alpha), vec(&fb.contract.beta), vec(&fb.efforts)],
            )
        }
        Mode::Granular => {
            let sol = optimal_granular(net, params)?;
            fields.insert("alpha".into(), json!(vec(&sol.contract.alpha)));
            fields.insert("beta".into(), json!(vec(&sol.contract.beta)));
            fields.insert("efforts".into(), json!(vec(&sol.efforts)));
            fields.insert("certainty_equivalents".into(), json!(vec(&sol.certainty_equivalents)));
            fields.insert("bonacich_out".into(), json!(vec(&sol.bonacich_out)));
            fields.insert("profit".into(), json!(sol.expected_profit));
            worker_table(
                &["worker", "alpha", "beta", "effort", "ce"],
                &[
                    vec(&sol.contract.alpha),
                    vec(&sol.contract.beta),
                    vec(&sol.efforts),
                    vec(&sol.certainty_equivalents),
                ],
            )
        }
        Mode::Coarse => {
            let path = cfg
                .partition
                .as_ref()
                .ok_or_else(|| Error::input("coarse mode needs a partition file (--partition)"))?;
            let partition = Partition::read(path)?;
            let sol = optimal_coarse(net, params, &partition)?;
            fields.insert("partition".into(), json!(partition.assignment()));
            fields.insert("group_alpha".into(), json!(vec(&sol.group_alpha)));
            fields.insert("group_beta".into(), json!(vec(&sol.group_beta)));
            fields.insert("alpha".into(), json!(vec(&sol.contract.alpha)));
            fields.insert("beta".into(), json!(vec(&sol.contract.beta)));
            fields.insert("efforts".into(), json!(vec(&sol.efforts)));
            fields.insert("certainty_equivalents".into(), json!(vec(&sol.certainty_equivalents)));
            fields.insert("rents".into(), json!(vec(&sol.rents)));
            fields.insert("profit".into(), json!(sol.expected_profit));
            worker_table(
                &["worker", "alpha", "beta", "effort", "ce", "rent"],
                &[
                    vec(&sol.contract.alpha),
                    vec(&sol.contract.beta),
                    vec(&sol.efforts),
                    vec(&sol.certainty_equivalents),
                    vec(&sol.rents),
                ],
            )
        }
        Mode::Modular => {
            let path = cfg
                .modules
                .as_ref()
                .ok_or_else(|| Error::input("modular mode needs a module file (--modules)"))?;
            let modules = ModuleAssignment::read(path)?;
            let sol = optimal_modular(net, params, &modules)?;
            fields.insert("modules".into(), json!(modules.0.assignment()));
            fields.insert("alpha".into(), json!(vec(&sol.contract.alpha)));
            fields.insert("beta".into(), json!(vec(&sol.contract.beta)));
            fields.insert("efforts".into(), json!(vec(&sol.efforts)));
            fields.insert("module_output".into(), json!(sol.e_hat));
            fields.insert("multipliers".into(), json!(vec(&sol.multipliers)));
            fields.insert("profit".into(), json!(sol.expected_profit));
            worker_table(
                &["worker", "alpha", "beta", "effort"],
                &[vec(&sol.contract.alpha), vec(&sol.contract.beta), vec(&sol.efforts)],
            )
        }
        Mode::Spectral => {
            let rep = analysis::spectral_profit(net, params)?;
            let terms: Vec<Value> = rep
                .terms
                .iter()
                .map(|t| {
                    json!({
                        "eigenvalue": [t.eigenvalue.re, t.eigenvalue.im],
                        "weight": [t.weight.re, t.weight.im],
                        "denominator": [t.denominator.re, t.denominator.im],
                        "contribution": [t.contribution.re, t.contribution.im],
                    })
                })
                .collect();
            fields.insert("terms".into(), json!(terms));
            fields.insert("profit".into(), json!(rep.total));
            fields.insert("imaginary_residue".into(), json!(rep.imaginary_residue));
            fields.insert("direct_profit".into(), json!(rep.direct_total));
            fields.insert("agreement_gap".into(), json!(rep.agreement_gap));
            fields.insert("denominators_positive".into(), json!(rep.denominators_positive));
            let mut table = Table::new(&["term", "eigenvalue_re", "eigenvalue_im", "weight_re", "weight_im", "contribution_re"]);
            for (l, t) in rep.terms.iter().enumerate() {
                table.push(vec![
                    l.to_string(),
                    t.eigenvalue.re.to_string(),
                    t.eigenvalue.im.to_string(),
                    t.weight.re.to_string(),
                    t.weight.im.to_string(),
                    t.contribution.re.to_string(),
                ]);
            }
            table.meta("spectral_profit", rep.total);
            table.meta("direct_profit", rep.direct_total);
            table.meta("agreement_gap", rep.agreement_gap);
            table
        }
        Mode::Heterogeneous => return Err(Error::input("heterogeneous mode reads its own parameter file")),
    };
    let mut table = table;
    add_common_meta(&mut table, resolved, net);
    if let Some(profit) = fields.get("profit").and_then(Value::as_f64) {
        table.meta("profit", profit);
    }
    table.meta("assumption2_lhs", report.lhs);
    table.meta("assumption2_threshold", report.threshold);
    table.meta("assumption2_pass", report.pass);
    Ok(Document::Both { json: doc, table })
}

fn solve_heterogeneous(het: &HeterogeneousParams, cfg: &RunConfig) -> Result<Document> {
    let sol = match &cfg.partition {
        None => {
            let s = optimal_heterogeneous(het)?;
            (s.contract, s.efforts, s.certainty_equivalents, None, s.expected_profit)
        }
        Some(path) => {
            let partition = Partition::read(path)?;
            let s = crate::heterogeneous::optimal_heterogeneous_coarse(het, &partition)?;
            (s.contract, s.efforts, s.certainty_equivalents, Some(s.rents), s.expected_profit)
        }
    };
    let (contract, efforts, ce, rents, profit) = sol;
    let doc = json!({
        "mode": Mode::Heterogeneous,
        "n": het.size(),
        "lambda": het.lambda,
        "sigma2": het.sigma2,
        "alpha": vec(&contract.alpha),
        "beta": vec(&contract.beta),
        "efforts": vec(&efforts),
        "certainty_equivalents": vec(&ce),
        "rents": rents.as_ref().map(vec),
        "profit": profit,
    });
    let mut cols = vec![vec(&contract.alpha), vec(&contract.beta), vec(&efforts), vec(&ce)];
    let mut names = vec!["worker", "alpha", "beta", "effort", "ce"];
    if let Some(r) = &rents {
        cols.push(vec(r));
        names.push("rent");
    }
    let mut table = worker_table(&names, &cols);
    table.meta("lambda", het.lambda);
    table.meta("sigma2", het.sigma2);
    table.meta("profit", profit);
    Ok(Document::Both { json: doc, table })
}

/// Params for design comparisons: an absolute lambda, or by default
/// `kappa * threshold / max mu_1` over the compared structures.
fn design_params(args: &ParamArgs, common: &CommonArgs, max_mu: f64) -> Result<(RunConfig, ResolvedParams)> {
    let mut cfg = base_config(common)?;
    apply_param_flags(&mut cfg.params, args);
    if common.out.is_some() {
        cfg.out = common.out.clone();
    }
    if common.format.is_some() {
        cfg.format = common.format;
    }
    let resolved = cfg.params.resolve(max_mu)?;
    Ok((cfg, resolved))
}

fn parse_cycles(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| Error::input(format!("bad cycle length `{t}`: {e}"))))
        .collect()
}

fn parse_pair(spec: &str) -> Result<(f64, f64)> {
    let (p, q) = spec
        .split_once(':')
        .ok_or_else(|| Error::input(format!("expected p:q, got `{spec}`")))?;
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| Error::input(format!("bad probability `{t}`: {e}")));
    Ok((num(p)?, num(q)?))
}

pub fn design(cmd: &DesignCommand) -> Result<()> {
    let (cfg, doc) = match cmd {
        DesignCommand::Bipartite { total, params, common } => {
            let half = (*total / 2) as f64;
            let max_mu = (half * (*total as f64 - half)).sqrt();
            let (cfg, resolved) = design_params(params, common, max_mu)?;
            let curve = analysis::bipartite_profit_curve(*total, &resolved.params)?;
            let mut table = Table::new(&["n_left", "n_right", "closed_form", "direct"]);
            add_design_meta(&mut table, &resolved, max_mu);
            let rows: Vec<Value> = curve
                .rows
                .iter()
                .map(|r| {
                    table.push(vec![
                        r.n_left.to_string(),
                        r.n_right.to_string(),
                        r.closed_form.to_string(),
                        r.direct.as_ref().map_or("NA".to_string(), |d| d.to_string()),
                    ]);
                    json!({
                        "n_left": r.n_left,
                        "n_right": r.n_right,
                        "closed_form": r.closed_form,
                        "direct": r.direct.as_ref().ok(),
                    })
                })
                .collect();
            table.meta("argmax", format!("{:?}", curve.argmax));
            let doc = json!({
                "design": "bipartite",
                "params": params_json(&resolved),
                "rows": rows,
                "argmax": curve.argmax,
                "max_disagreement": curve.max_disagreement,
            });
            (cfg, Document::Both { json: doc, table })
        }
        DesignCommand::Regular { configurations, params, common } => {
            let configs = configurations.iter().map(|s| parse_cycles(s)).collect::<Result<Vec<_>>>()?;
            let max_mu = if configs.is_empty() { 0.0 } else { 2.0 };
            let (cfg, resolved) = design_params(params, common, max_mu)?;
            let spread = analysis::regular_invariance_check(&configs, &resolved.params)?;
            let mut table = Table::new(&["cycles", "profit"]);
            add_design_meta(&mut table, &resolved, max_mu);
            table.meta("max_gap", spread.max_gap);
            for (c, p) in configurations.iter().zip(&spread.profits) {
                table.push(vec![format!("\"{c}\""), p.to_string()]);
            }
            let doc = json!({
                "design": "regular",
                "params": params_json(&resolved),
                "configurations": configs,
                "profits": spread.profits,
                "max_gap": spread.max_gap,
            });
            (cfg, Document::Both { json: doc, table })
        }
        DesignCommand::Planted {
            n,
            pairs,
            samples,
            params,
            common,
        } => {
            let pairs = pairs.iter().map(|s| parse_pair(s)).collect::<Result<Vec<_>>>()?;
            let max_mu = pairs
                .iter()
                .map(|&(p, q)| {
                    Network::planted_partition(*n, p, q, crate::network::PlantedVariant::Expected)
                        .map(|g| g.spectral_radius())
                })
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let (cfg, resolved) = design_params(params, common, max_mu)?;
            let report = analysis::planted_partition_invariance(*n, &pairs, &resolved.params)?;
            let sampled = if *samples > 0 {
                analysis::planted_partition_sampled(*n, &pairs, &resolved.params, *samples)?
            } else {
                Vec::new()
            };
            let mut table = Table::new(&[
                "p",
                "q",
                "profit_expected",
                "ones_term_profit",
                "sampled_mean",
                "sampled_stderr",
                "sampled_rejected",
            ]);
            add_design_meta(&mut table, &resolved, max_mu);
            table.meta("n", n);
            table.meta("samples", samples);
            table.meta("max_gap_expected", report.max_gap);
            let mut rows = Vec::new();
            for (k, r) in report.rows.iter().enumerate() {
                let s = sampled.get(k);
                table.push(vec![
                    r.p.to_string(),
                    r.q.to_string(),
                    r.profit.to_string(),
                    r.ones_term_profit.to_string(),
                    s.map_or("NA".into(), |s| s.mean.to_string()),
                    s.map_or("NA".into(), |s| s.std_error.to_string()),
                    s.map_or("NA".into(), |s| s.rejected.to_string()),
                ]);
                rows.push(json!({
                    "p": r.p,
                    "q": r.q,
                    "profit_expected": r.profit,
                    "ones_eigenvalue": r.ones_eigenvalue,
                    "ones_term_profit": r.ones_term_profit,
                    "sampled": s.map(|s| json!({
                        "mean": s.mean,
                        "std_error": s.std_error,
                        "samples": s.samples,
                        "rejected": s.rejected,
                    })),
                }));
            }
            let doc = json!({
                "design": "planted",
                "n": n,
                "params": params_json(&resolved),
                "rows": rows,
                "max_gap_expected": report.max_gap,
            });
            (cfg, Document::Both { json: doc, table })
        }
    };
    finish(&cfg, doc)
}

fn add_design_meta(table: &mut Table, resolved: &ResolvedParams, max_mu: f64) {
    let p = &resolved.params;
    table.meta("lambda", p.lambda);
    if let Some(k) = resolved.lambda_fraction {
        table.meta("lambda_fraction", k);
        table.meta("lambda_rule", "kappa * threshold / max mu1 over compared networks");
    }
    table.meta("max_mu1", max_mu);
    table.meta("r", p.r);
    table.meta("sigma2", p.sigma2);
}

pub fn derivative(args: &DerivativeArgs) -> Result<()> {
    let (cfg, net, resolved) = network_run(&args.network, &args.params, &args.common)?;
    let params = &resolved.params;
    let analytic = analysis::link_derivative_alpha(&net, params, args.i, args.j)?;
    let fd = analysis::link_derivative_fd(&net, params, args.i, args.j, args.step)?;
    let rel = relative_error(&analytic.alpha, &fd.alpha).max(relative_error(&analytic.efforts, &fd.efforts));
    let doc = json!({
        "link": [args.i, args.j],
        "network": network_json(&net),
        "params": params_json(&resolved),
        "d_alpha": vec(&analytic.alpha),
        "d_efforts": vec(&analytic.efforts),
        "d_alpha_fd": vec(&fd.alpha),
        "d_efforts_fd": vec(&fd.efforts),
        "fd_step": args.step,
        "max_relative_error": rel,
    });
    let mut table = worker_table(
        &["worker", "d_alpha", "d_alpha_fd", "d_effort", "d_effort_fd"],
        &[vec(&analytic.alpha), vec(&fd.alpha), vec(&analytic.efforts), vec(&fd.efforts)],
    );
    add_common_meta(&mut table, &resolved, &net);
    table.meta("link", format!("{} {}", args.i, args.j));
    table.meta("fd_step", args.step);
    finish(&cfg, Document::Both { json: doc, table })
}

/// `max |a - b| / max(1, max |b|)`.
pub fn relative_error(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}

pub fn invest(args: &InvestArgs) -> Result<()> {
    let (cfg, net, resolved) = network_run(&args.network, &args.params, &args.common)?;
    let report = analysis::investment_comparison(&net, &resolved.params)?;
    let verdict = format!("{:?}", report.analytic_verdict);
    let terms: Vec<Value> = report
        .terms
        .iter()
        .map(|t| json!({"eigenvalue": t.eigenvalue, "weight": t.weight, "condition": t.condition_value}))
        .collect();
    let doc = json!({
        "network": network_json(&net),
        "params": params_json(&resolved),
        "terms": terms,
        "analytic_verdict": verdict,
        "d_profit_d_lambda": report.d_profit_d_lambda,
        "d_profit_d_v": report.d_profit_d_v,
        "finite_difference_favors_team": report.finite_difference_favors_team,
    });
    let mut table = Table::new(&["eigenvalue", "weight", "condition"]);
    add_common_meta(&mut table, &resolved, &net);
    table.meta("analytic_verdict", &verdict);
    table.meta("d_profit_d_lambda", report.d_profit_d_lambda);
    table.meta("d_profit_d_v", report.d_profit_d_v);
    for t in &report.terms {
        table.push(vec![t.eigenvalue.to_string(), t.weight.to_string(), t.condition_value.to_string()]);
    }
    finish(&cfg, Document::Both { json: doc, table })
}
