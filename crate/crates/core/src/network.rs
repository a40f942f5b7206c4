//! Peer-effects networks: construction, random generators, spectra,
//! resolvents and Bonacich centralities.
//!
//! Row convention: `g[(i, j)]` is the amount by which worker `j`'s effort
//! lowers worker `i`'s marginal cost of effort.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;

/// Eigenvector matrices with a condition number above this are treated as
/// defective.
pub const MAX_EIGENVECTOR_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    adjacency: DMatrix<f64>,
    directed: bool,
}

/// Which sums of the resolvent to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Row sums `C 1`: discounted walks arriving at a worker.
    Incoming,
    /// Column sums `C' 1`: discounted walks leaving a worker.
    Outgoing,
}

/// Sampled or expected adjacency for the two-block planted partition model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantedVariant {
    Sampled { seed: u64 },
    Expected,
}

impl Network {
    /// Validates and wraps a dense adjacency matrix.
    pub fn new(adjacency: DMatrix<f64>, directed: bool) -> Result<Self> {
        let n = adjacency.nrows();
        if n == 0 || adjacency.ncols() != n {
            return Err(Error::input(format!(
                "adjacency must be a non-empty square matrix, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let g = adjacency[(i, j)];
                if !g.is_finite() || g < 0.0 {
                    return Err(Error::input(format!(
                        "entry ({i}, {j}) = {g} must be finite and non-negative"
                    )));
                }
                if i == j && g != 0.0 {
                    return Err(Error::input(format!("diagonal entry ({i}, {i}) must be zero")));
                }
                if !directed && g != adjacency[(j, i)] {
                    return Err(Error::input(format!(
                        "undirected network is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Network {
            adjacency,
            directed,
        })
    }

    pub fn empty(n: usize) -> Result<Self> {
        Network::new(DMatrix::zeros(n, n), false)
    }

    pub fn size(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// True when the adjacency matrix equals its transpose entrywise,
    /// regardless of the `directed` flag.
    pub fn is_symmetric(&self) -> bool {
        let g = &self.adjacency;
        let n = self.size();
        (0..n).all(|i| (0..i).all(|j| g[(i, j)] == g[(j, i)]))
    }

    /// Weighted out-sums `d_i = sum_j g_ij`.
    pub fn degrees(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.size(),
            self.adjacency.row_iter().map(|row| row.sum()),
        )
    }

    pub fn edge_count(&self) -> usize {
        let nonzero = self.adjacency.iter().filter(|g| **g != 0.0).count();
        if self.directed {
            nonzero
        } else {
            nonzero / 2
        }
    }

    /// Copy of this network with a single entry replaced. The result is
    /// flagged directed unless it is still exactly symmetric.
    pub fn with_entry(&self, i: usize, j: usize, weight: f64) -> Result<Network> {
        let n = self.size();
        if i >= n || j >= n {
            return Err(Error::input(format!("entry ({i}, {j}) out of range for n = {n}")));
        }
        let mut g = self.adjacency.clone();
        g[(i, j)] = weight;
        let symmetric = (0..n).all(|a| (0..a).all(|b| g[(a, b)] == g[(b, a)]));
        Network::new(g, self.directed || !symmetric)
    }

    /// Builds a network from `(source, target, weight)` triples, setting
    /// `g[source][target] = weight` (and the mirror entry when undirected).
    pub fn from_edge_list(n: usize, edges: &[(usize, usize, f64)], directed: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("network must have at least one node"));
        }
        let mut g = DMatrix::zeros(n, n);
        for &(s, t, w) in edges {
            if s >= n || t >= n {
                return Err(Error::input(format!("edge ({s}, {t}) out of range for n = {n}")));
            }
            if s == t {
                return Err(Error::input(format!("self-loop at node {s}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::input(format!("edge ({s}, {t}) has non-positive weight {w}")));
            }
            if g[(s, t)] != 0.0 {
                return Err(Error::input(format!("duplicate edge ({s}, {t})")));
            }
            g[(s, t)] = w;
            if !directed {
                g[(t, s)] = w;
            }
        }
        Network::new(g, directed)
    }

    /// Undirected G(n, p): each unordered pair is linked independently.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self> {
        check_probability("p", p)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    g[(i, j)] = 1.0;
                    g[(j, i)] = 1.0;
                }
            }
        }
        Network::new(g, false)
    }

    /// Directed G(n, p). With `weighted`, present links get weights drawn
    /// uniformly from (0.5, 1.5], which makes repeated eigenvalues unlikely.
    pub fn erdos_renyi_directed(n: usize, p: f64, seed: u64, weighted: bool) -> Result<Self> {
        check_probability("p", p)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if rng.random::<f64>() < p {
                    g[(i, j)] = if weighted {
                        1.5 - rng.random::<f64>()
                    } else {
                        1.0
                    };
                }
            }
        }
        Network::new(g, true)
    }

    /// K_{n_left, n_right}; the left side occupies indices `0..n_left`.
    pub fn complete_bipartite(n_left: usize, n_right: usize) -> Result<Self> {
        if n_left == 0 || n_right == 0 {
            return Err(Error::input("both sides of a bipartite graph need at least one node"));
        }
        let n = n_left + n_right;
        let g = DMatrix::from_fn(n, n, |i, j| {
            if (i < n_left) != (j < n_left) {
                1.0
            } else {
                0.0
            }
        });
        Network::new(g, false)
    }

    pub fn complete(n: usize) -> Result<Self> {
        Network::new(DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 1.0 }), false)
    }

    /// Disjoint union of undirected cycles.
    pub fn regular_union_of_cycles(cycle_lengths: &[usize]) -> Result<Self> {
        if cycle_lengths.is_empty() {
            return Err(Error::input("at least one cycle is required"));
        }
        if let Some(&bad) = cycle_lengths.iter().find(|&&len| len < 3) {
            return Err(Error::input(format!("cycle length {bad} is below 3")));
        }
        let n: usize = cycle_lengths.iter().sum();
        let mut g = DMatrix::zeros(n, n);
        let mut offset = 0;
        for &len in cycle_lengths {
            for k in 0..len {
                let a = offset + k;
                let b = offset + (k + 1) % len;
                g[(a, b)] = 1.0;
                g[(b, a)] = 1.0;
            }
            offset += len;
        }
        Network::new(g, false)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i, 1.0)).collect();
        Network::from_edge_list(n, &edges, false)
    }

    /// Star with the hub at index 0. When directed, the hub influences the
    /// leaves (`g[leaf][0] = 1`) and nothing flows back.
    pub fn star(leaves: usize, directed: bool) -> Result<Self> {
        let edges: Vec<_> = (1..=leaves).map(|leaf| (leaf, 0, 1.0)).collect();
        Network::from_edge_list(leaves + 1, &edges, directed)
    }

    /// Two equal groups (`0..n/2` and `n/2..n`), within-group probability
    /// `p_within` and across-group probability `q_across`.
    pub fn planted_partition(
        n: usize,
        p_within: f64,
        q_across: f64,
        variant: PlantedVariant,
    ) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::input(format!("planted partition needs an even n, got {n}")));
        }
        check_probability("p_within", p_within)?;
        check_probability("q_across", q_across)?;
        if q_across > p_within {
            return Err(Error::input(format!(
                "q_across = {q_across} exceeds p_within = {p_within}"
            )));
        }
        let half = n / 2;
        let same = |i: usize, j: usize| (i < half) == (j < half);
        let mut g = DMatrix::zeros(n, n);
        match variant {
            PlantedVariant::Expected => {
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            g[(i, j)] = if same(i, j) { p_within } else { q_across };
                        }
                    }
                }
            }
            PlantedVariant::Sampled { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for i in 0..n {
                    for j in (i + 1)..n {
                        let prob = if same(i, j) { p_within } else { q_across };
                        if rng.random::<f64>() < prob {
                            g[(i, j)] = 1.0;
                            g[(j, i)] = 1.0;
                        }
                    }
                }
            }
        }
        Network::new(g, false)
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        if self.adjacency.iter().all(|g| *g == 0.0) {
            return 0.0;
        }
        if self.is_symmetric() {
            let eig = SymmetricEigen::new(self.adjacency.clone());
            eig.eigenvalues.iter().fold(0.0_f64, |acc, mu| acc.max(mu.abs()))
        } else if self.is_acyclic() {
            // Nilpotent: the computed eigenvalues of a defective zero
            // eigenvalue scatter far above machine precision.
            0.0
        } else {
            linalg::nonnegative_spectral_radius(&self.adjacency)
        }
    }

    /// No directed cycle among positive entries (Kahn's algorithm).
    pub fn is_acyclic(&self) -> bool {
        let n = self.size();
        let mut indegree: Vec<usize> = (0..n)
            .map(|j| (0..n).filter(|&i| self.adjacency[(i, j)] != 0.0).count())
            .collect();
        let mut ready: Vec<usize> = (0..n).filter(|&j| indegree[j] == 0).collect();
        let mut seen = 0;
        while let Some(i) = ready.pop() {
            seen += 1;
            for j in 0..n {
                if self.adjacency[(i, j)] != 0.0 {
                    indegree[j] -= 1;
                    if indegree[j] == 0 {
                        ready.push(j);
                    }
                }
            }
        }
        seen == n
    }

    /// Eigendecomposition sorted by descending real part.
    pub fn spectrum(&self) -> Result<Spectrum> {
        if self.is_symmetric() {
            Ok(symmetric_spectrum(&self.adjacency))
        } else {
            directed_spectrum(&self.adjacency)
        }
    }

    /// Fails unless the spectral radius of `lambda G` is below one.
    pub fn check_resolvent_regime(&self, lambda: f64) -> Result<()> {
        let rho = lambda.abs() * self.spectral_radius();
        if !(rho < 1.0) {
            return Err(Error::regime(format!(
                "spectral radius of lambda*G is {rho:.6} (lambda = {lambda}), must be below 1"
            )));
        }
        Ok(())
    }

    /// `C = (I - lambda G)^{-1}`.
    pub fn resolvent(&self, lambda: f64) -> Result<DMatrix<f64>> {
        self.check_resolvent_regime(lambda)?;
        let n = self.size();
        let a = DMatrix::<f64>::identity(n, n) - &self.adjacency * lambda;
        linalg::inverse(&a)
    }

    /// Bonacich (Katz) centralities at parameter `lambda`.
    pub fn bonacich(&self, lambda: f64, direction: Direction) -> Result<DVector<f64>> {
        let c = self.resolvent(lambda)?;
        Ok(resolvent_sums(&c, direction))
    }

    /// Truncated Neumann series `sum_{k=0..=terms} (lambda G)^k` together
    /// with the infinity-norm tail bound `q^{K+1} / (1 - q)`, `q = ||lambda G||`.
    /// The bound is infinite when `q >= 1`.
    pub fn neumann_resolvent(&self, lambda: f64, terms: usize) -> (DMatrix<f64>, f64) {
        let n = self.size();
        let step = &self.adjacency * lambda;
        let mut power = DMatrix::<f64>::identity(n, n);
        let mut sum = power.clone();
        for _ in 0..terms {
            power = &power * &step;
            sum += &power;
        }
        let q = linalg::inf_norm(&step);
        let bound = if q < 1.0 {
            q.powi(terms as i32 + 1) / (1.0 - q)
        } else {
            f64::INFINITY
        };
        (sum, bound)
    }

    /// Parses the edge-list text format:
    ///
    /// ```text
    /// # comment
    /// n 5 directed 1
    /// 1 0 1.0
    /// ```
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut header: Option<(usize, bool)> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            if header.is_none() {
                if fields.len() != 4 || fields[0] != "n" || fields[2] != "directed" {
                    return Err(parse_err(format!(
                        "expected header `n <count> directed <0|1>`, found `{line}`"
                    )));
                }
                let n = fields[1]
                    .parse::<usize>()
                    .map_err(|e| parse_err(format!("bad node count: {e}")))?;
                let directed = match fields[3] {
                    "0" => false,
                    "1" => true,
                    other => return Err(parse_err(format!("directed flag must be 0 or 1, got {other}"))),
                };
                header = Some((n, directed));
                continue;
            }
            if fields.len() != 3 {
                return Err(parse_err(format!("expected `source target weight`, found `{line}`")));
            }
            let s = fields[0]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad source: {e}")))?;
            let t = fields[1]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("bad target: {e}")))?;
            let w = fields[2]
                .parse::<f64>()
                .map_err(|e| parse_err(format!("bad weight: {e}")))?;
            edges.push((s, t, w));
        }
        let (n, directed) = header.ok_or(Error::Parse {
            line: 0,
            message: "missing header line".into(),
        })?;
        Network::from_edge_list(n, &edges, directed)
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        Network::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    /// Serializes to the edge-list format. Undirected edges are written once
    /// with `source < target`.
    pub fn to_edge_list(&self) -> String {
        let n = self.size();
        let mut out = format!("n {n} directed {}\n", u8::from(self.directed));
        for i in 0..n {
            for j in 0..n {
                let g = self.adjacency[(i, j)];
                if g != 0.0 && (self.directed || i < j) {
                    let _ = writeln!(out, "{i} {j} {g}");
                }
            }
        }
        out
    }
}

pub(crate) fn resolvent_sums(c: &DMatrix<f64>, direction: Direction) -> DVector<f64> {
    let n = c.nrows();
    match direction {
        Direction::Incoming => DVector::from_iterator(n, c.row_iter().map(|r| r.sum())),
        Direction::Outgoing => DVector::from_iterator(n, c.column_iter().map(|col| col.sum())),
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::input(format!("{name} = {p} is not a probability")));
    }
    Ok(())
}

/// Eigenpairs of an adjacency matrix.
#[derive(Debug, Clone)]
pub enum Spectrum {
    /// Real eigenvalues, orthonormal eigenvectors stored as columns.
    Symmetric {
        eigenvalues: DVector<f64>,
        eigenvectors: DMatrix<f64>,
    },
    /// Unit right eigenvectors as columns of `right`; `left` holds the rows
    /// of the inverse of `right`, so `left.row(l) * right.column(l) = 1`.
    Directed {
        eigenvalues: Vec<Complex<f64>>,
        right: DMatrix<Complex<f64>>,
        left: DMatrix<Complex<f64>>,
        condition: f64,
    },
}

impl Spectrum {
    pub fn len(&self) -> usize {
        match self {
            Spectrum::Symmetric { eigenvalues, .. } => eigenvalues.len(),
            Spectrum::Directed { eigenvalues, .. } => eigenvalues.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eigenvalue(&self, l: usize) -> Complex<f64> {
        match self {
            Spectrum::Symmetric { eigenvalues, .. } => Complex::new(eigenvalues[l], 0.0),
            Spectrum::Directed { eigenvalues, .. } => eigenvalues[l],
        }
    }

    /// `(u_l' 1)^2` in the symmetric case, `(v_l' 1)(u_l' 1)` otherwise.
    pub fn ones_weight(&self, l: usize) -> Complex<f64> {
        match self {
            Spectrum::Symmetric { eigenvectors, .. } => {
                let s = eigenvectors.column(l).sum();
                Complex::new(s * s, 0.0)
            }
            Spectrum::Directed { right, left, .. } => right.column(l).sum() * left.row(l).sum(),
        }
    }

    /// Largest `||G u_l - mu_l u_l||_inf` over all pairs.
    pub fn max_residual(&self, g: &DMatrix<f64>) -> f64 {
        match self {
            Spectrum::Symmetric {
                eigenvalues,
                eigenvectors,
            } => (0..eigenvalues.len())
                .map(|l| {
                    let u = eigenvectors.column(l);
                    linalg::inf_norm_vec(&(g * u - u * eigenvalues[l]))
                })
                .fold(0.0, f64::max),
            Spectrum::Directed {
                eigenvalues, right, ..
            } => {
                let gc = g.map(|x| Complex::new(x, 0.0));
                (0..eigenvalues.len())
                    .map(|l| {
                        let u = right.column(l);
                        (&gc * u - u * eigenvalues[l])
                            .iter()
                            .fold(0.0_f64, |acc, z| acc.max(z.norm()))
                    })
                    .fold(0.0, f64::max)
            }
        }
    }
}

fn symmetric_spectrum(g: &DMatrix<f64>) -> Spectrum {
    let n = g.nrows();
    let eig = SymmetricEigen::new(g.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
    });
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&l| eig.eigenvalues[l]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Spectrum::Symmetric {
        eigenvalues,
        eigenvectors,
    }
}

/// Eigenvalues come from the real Schur form; eigenvectors are null vectors
/// of `G - mu I` taken from a complex SVD, one SVD per cluster of
/// numerically coincident eigenvalues.
fn directed_spectrum(g: &DMatrix<f64>) -> Result<Spectrum> {
    let n = g.nrows();
    let scale = g.norm().max(1.0);
    let mut eigs = linalg::complex_eigenvalues(g)
        .ok_or(Error::NonDiagonalizable { condition: f64::INFINITY })?;
    eigs.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(Ordering::Equal))
    });

    let cluster_tol = 1e-6 * scale;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let mut members = vec![i];
        assigned[i] = true;
        let mut k = 0;
        while k < members.len() {
            let anchor = eigs[members[k]];
            for j in 0..n {
                if !assigned[j] && (eigs[j] - anchor).norm() <= cluster_tol {
                    assigned[j] = true;
                    members.push(j);
                }
            }
            k += 1;
        }
        members.sort_unstable();
        clusters.push(members);
    }

    let gc = g.map(|x| Complex::new(x, 0.0));
    let mut right = DMatrix::<Complex<f64>>::zeros(n, n);
    let mut values = vec![Complex::new(0.0, 0.0); n];
    for members in &clusters {
        let m = members.len();
        let centre = members.iter().map(|&i| eigs[i]).sum::<Complex<f64>>() / m as f64;
        let shifted = &gc - DMatrix::<Complex<f64>>::identity(n, n) * centre;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| {
            svd.singular_values[a]
                .partial_cmp(&svd.singular_values[b])
                .unwrap_or(Ordering::Equal)
        });
        if m > 1 && svd.singular_values[idx[m - 1]] > 1e-7 * scale {
            // Geometric multiplicity below algebraic multiplicity.
            return Err(Error::NonDiagonalizable {
                condition: f64::INFINITY,
            });
        }
        for (slot, &member) in members.iter().enumerate() {
            let row = v_t.row(idx[slot]);
            let mut u = DVector::from_iterator(n, row.iter().map(|z| z.conj()));
            let norm = u.norm();
            u /= Complex::new(norm, 0.0);
            // Rayleigh quotient gives the eigenvalue matching this vector.
            let mu = if m == 1 {
                eigs[member]
            } else {
                u.dotc(&(&gc * &u))
            };
            right.set_column(member, &u);
            values[member] = mu;
        }
    }

    let svd = right.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < MAX_EIGENVECTOR_CONDITION) {
        return Err(Error::NonDiagonalizable { condition });
    }
    let left = right
        .clone()
        .try_inverse()
        .ok_or(Error::NonDiagonalizable {
            condition: f64::INFINITY,
        })?;
    let spectrum = Spectrum::Directed {
        eigenvalues: values,
        right,
        left,
        condition,
    };
    if spectrum.max_residual(g) > 1e-8 * scale {
        return Err(Error::NonDiagonalizable { condition });
    }
    Ok(spectrum)
}
