//! α-divergences between discrete distributions and between densities
//! tabulated on a rectangular grid.
//!
//! `D_α(P, Q) = (1 - ∫ p^α q^(1-α)) / (α(1-α))`, with the limits
//! `α → 1: KL(P || Q)` and `α → 0: KL(Q || P)`. Values of α within
//! [`KL_LIMIT_TOLERANCE`] of 0 or 1 are evaluated by the KL formulas.
//!
//! `+inf` is an ordinary result: it is returned whenever absolute continuity
//! fails in the direction the chosen α cares about.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{kl_gaussian, ArmMarginal, GaussianBelief};

pub const KL_LIMIT_TOLERANCE: f64 = 1e-8;

/// Minimum integrated mass a gridded density must show.
pub const GRID_COVERAGE: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AlphaParam(f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaBranch {
    /// α = 0: `KL(Q || P)`.
    ReverseKl,
    /// α = 1: `KL(P || Q)`.
    ForwardKl,
    General(f64),
}

impl AlphaParam {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn branch(self) -> AlphaBranch {
        if self.0.abs() <= KL_LIMIT_TOLERANCE {
            AlphaBranch::ReverseKl
        } else if (self.0 - 1.0).abs() <= KL_LIMIT_TOLERANCE {
            AlphaBranch::ForwardKl
        } else {
            AlphaBranch::General(self.0)
        }
    }

    pub fn is_kl_limit(self) -> bool {
        !matches!(self.branch(), AlphaBranch::General(_))
    }
}

impl TryFrom<f64> for AlphaParam {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AlphaParam> for f64 {
    fn from(a: AlphaParam) -> f64 {
        a.0
    }
}

/// `p^α q^(1-α)` with the limiting conventions for zero arguments.
fn mixed_power(p: f64, q: f64, alpha: f64) -> f64 {
    match (p == 0.0, q == 0.0) {
        (true, true) => 0.0,
        (true, false) => {
            if alpha > 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
        (false, true) => {
            if alpha < 1.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }
        (false, false) => p.powf(alpha) * q.powf(1.0 - alpha),
    }
}

/// `p ln(p / q)` with `0 ln(0/x) = 0` and `x ln(x/0) = +inf`.
fn relative_entropy_term(p: f64, q: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else if q == 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).ln()
    }
}

fn general_from_integral(integral: f64, alpha: f64) -> f64 {
    if integral.is_infinite() {
        // Only reachable for α < 0 or α > 1, where α(1-α) < 0.
        return f64::INFINITY;
    }
    (1.0 - integral) / (alpha * (1.0 - alpha))
}

/// Weighted α-divergence over paired non-negative masses. `weights` are the
/// quadrature weights (all ones for a discrete distribution).
fn weighted_divergence<'a>(
    pairs: impl Iterator<Item = (f64, f64, f64)> + 'a,
    alpha: AlphaParam,
) -> f64 {
    match alpha.branch() {
        AlphaBranch::ForwardKl => pairs.map(|(w, p, q)| w * relative_entropy_term(p, q)).sum(),
        AlphaBranch::ReverseKl => pairs.map(|(w, p, q)| w * relative_entropy_term(q, p)).sum(),
        AlphaBranch::General(a) => {
            let integral: f64 = pairs.map(|(w, p, q)| w * mixed_power(p, q, a)).sum();
            general_from_integral(integral, a)
        }
    }
}

/// α-divergence between two mass vectors of equal length.
///
/// The masses need not be normalized exactly; region masses read off a grid
/// are passed here directly.
pub fn alpha_div_masses(p: &[f64], q: &[f64], alpha: AlphaParam) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if p.iter().chain(q).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::param("masses", "must be finite and non-negative"));
    }
    Ok(weighted_divergence(
        p.iter().zip(q).map(|(&p, &q)| (1.0, p, q)),
        alpha,
    ))
}

pub fn alpha_div_discrete(p: &ArmMarginal, q: &ArmMarginal, alpha: AlphaParam) -> Result<f64> {
    alpha_div_masses(p.probs(), q.probs(), alpha)
}

/// One axis of a tensor-product grid: `points` equally spaced nodes on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridAxis {
    pub fn new(lo: f64, hi: f64, points: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::param("grid", format!("axis bounds [{lo}, {hi}] are not increasing")));
        }
        if points < 2 {
            return Err(Error::param("grid", "each axis needs at least two points"));
        }
        Ok(Self { lo, hi, points })
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.hi
        } else {
            self.lo + i as f64 * self.step()
        }
    }

    fn weight(&self, i: usize) -> f64 {
        let h = self.step();
        if i == 0 || i + 1 == self.points {
            0.5 * h
        } else {
            h
        }
    }
}

/// Rectangular box with trapezoidal weights. Nodes are enumerated with the
/// last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<GridAxis>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(axes: Vec<GridAxis>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::param("grid", "at least one axis is required"));
        }
        let len: usize = axes.iter().map(|a| a.points).product();
        let mut weights = Vec::with_capacity(len);
        let mut index = vec![0usize; axes.len()];
        for _ in 0..len {
            weights.push(axes.iter().zip(&index).map(|(a, &i)| a.weight(i)).product());
            advance(&mut index, &axes);
        }
        Ok(Self { axes, weights })
    }

    /// Same bounds and resolution on each of `dim` axes.
    pub fn cube(dim: usize, lo: f64, hi: f64, points: usize) -> Result<Self> {
        let axis = GridAxis::new(lo, hi, points)?;
        Self::new(vec![axis; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn axes(&self) -> &[GridAxis] {
        &self.axes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Visits every node in enumeration order.
    pub fn for_each_node(&self, mut f: impl FnMut(usize, &[f64])) {
        let mut index = vec![0usize; self.axes.len()];
        let mut point = vec![0.0; self.axes.len()];
        for n in 0..self.len() {
            for (d, axis) in self.axes.iter().enumerate() {
                point[d] = axis.node(index[d]);
            }
            f(n, &point);
            advance(&mut index, &self.axes);
        }
    }

    /// Tabulates `density` on every node.
    pub fn tabulate(&self, density: impl Fn(&[f64]) -> f64) -> GriddedDensity {
        let mut values = vec![0.0; self.len()];
        self.for_each_node(|n, x| values[n] = density(x));
        GriddedDensity { values }
    }

    /// Fallible variant of [`Grid::tabulate`].
    pub fn try_tabulate(&self, density: impl Fn(&[f64]) -> Result<f64>) -> Result<GriddedDensity> {
        let mut values = vec![0.0; self.len()];
        let mut failure = None;
        self.for_each_node(|n, x| {
            if failure.is_none() {
                match density(x) {
                    Ok(v) => values[n] = v,
                    Err(e) => failure = Some(e),
                }
            }
        });
        match failure {
            Some(e) => Err(e),
            None => Ok(GriddedDensity { values }),
        }
    }

    pub fn integrate(&self, density: &GriddedDensity) -> f64 {
        self.weights.iter().zip(&density.values).map(|(w, v)| w * v).sum()
    }
}

fn advance(index: &mut [usize], axes: &[GridAxis]) {
    for d in (0..axes.len()).rev() {
        index[d] += 1;
        if index[d] < axes[d].points {
            return;
        }
        index[d] = 0;
    }
}

/// Density values on the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDensity {
    values: Vec<f64>,
}

impl GriddedDensity {
    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_density(grid: &Grid, density: &GriddedDensity, which: &'static str) -> Result<()> {
    if density.values.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            got: density.values.len(),
        });
    }
    if density.values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::param("density", format!("{which} density has negative or non-finite values")));
    }
    let mass = grid.integrate(density);
    if mass < GRID_COVERAGE {
        return Err(Error::GridCoverage {
            which,
            deficit: 1.0 - mass,
        });
    }
    Ok(())
}

/// Trapezoidal α-divergence between two tabulated densities.
pub fn alpha_div_grid(
    p: &GriddedDensity,
    q: &GriddedDensity,
    alpha: AlphaParam,
    grid: &Grid,
) -> Result<f64> {
    check_density(grid, p, "p")?;
    check_density(grid, q, "q")?;
    Ok(weighted_divergence(
        grid.weights
            .iter()
            .zip(p.values.iter().zip(&q.values))
            .map(|(&w, (&p, &q))| (w, p, q)),
        alpha,
    ))
}

/// Assignment of every grid node to exactly one region.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    labels: Vec<usize>,
    regions: usize,
}

impl Partition {
    /// Labels each node by `region_of(x)`; labels must be `< regions`.
    pub fn from_fn(grid: &Grid, regions: usize, region_of: impl Fn(&[f64]) -> usize) -> Result<Self> {
        let mut labels = vec![0; grid.len()];
        let mut bad = None;
        grid.for_each_node(|n, x| {
            let r = region_of(x);
            if r >= regions {
                bad = Some(r);
            }
            labels[n] = r;
        });
        if let Some(r) = bad {
            return Err(Error::Partition(format!("label {r} exceeds region count {regions}")));
        }
        Ok(Self { labels, regions })
    }

    /// Builds a partition from explicit node-index lists, rejecting overlaps
    /// and uncovered nodes.
    pub fn from_regions(grid: &Grid, regions: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; grid.len()];
        for (r, nodes) in regions.iter().enumerate() {
            for &n in nodes {
                if n >= grid.len() {
                    return Err(Error::Partition(format!("node {n} is outside the grid")));
                }
                if labels[n] != usize::MAX {
                    return Err(Error::Partition(format!(
                        "node {n} belongs to regions {} and {r}",
                        labels[n]
                    )));
                }
                labels[n] = r;
            }
        }
        if let Some(n) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::Partition(format!("node {n} is not covered by any region")));
        }
        Ok(Self {
            labels,
            regions: regions.len(),
        })
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    /// Integrated mass of `density` in each region.
    pub fn masses(&self, grid: &Grid, density: &GriddedDensity) -> Vec<f64> {
        let mut masses = vec![0.0; self.regions];
        for ((&label, &w), &v) in self.labels.iter().zip(grid.weights()).zip(density.values()) {
            masses[label] += w * v;
        }
        masses
    }
}

/// `D_α(P, Q) - D_α(P̄, Q̄)` where `P̄, Q̄` are the region masses of `P, Q`.
///
/// Both terms use the same quadrature weights, so the coarse-graining
/// inequality holds for the gridded quantities themselves and a margin below
/// zero signals a genuine defect rather than discretization error.
pub fn data_processing_check(
    p: &GriddedDensity,
    q: &GriddedDensity,
    partition: &Partition,
    alpha: AlphaParam,
    grid: &Grid,
) -> Result<f64> {
    if partition.labels.len() != grid.len() {
        return Err(Error::Partition("partition was built for a different grid".into()));
    }
    let fine = alpha_div_grid(p, q, alpha, grid)?;
    let coarse = alpha_div_masses(&partition.masses(grid, p), &partition.masses(grid, q), alpha)?;
    Ok(fine - coarse)
}

/// Distribution operand of a [`DivergenceQuery`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Operand {
    Gaussian { mean: Vec<f64>, covariance: Vec<Vec<f64>> },
    Discrete { masses: Vec<f64> },
}

impl Operand {
    fn gaussian(&self) -> Option<Result<GaussianBelief>> {
        match self {
            Operand::Gaussian { mean, covariance } => {
                let k = mean.len();
                if covariance.len() != k || covariance.iter().any(|row| row.len() != k) {
                    return Some(Err(Error::param("covariance", format!("must be {k}x{k}"))));
                }
                let flat: Vec<f64> = covariance.iter().flatten().copied().collect();
                Some(GaussianBelief::from_slices(mean, &flat))
            }
            Operand::Discrete { .. } => None,
        }
    }
}

/// A one-off divergence computation, as read from TOML:
///
/// ```toml
/// alphas = [0.0, 0.5, 1.0]
/// p = { kind = "gaussian", mean = [0.0], covariance = [[1.0]] }
/// q = { kind = "gaussian", mean = [0.0], covariance = [[20.25]] }
/// grid = { lo = -30.0, hi = 30.0, points = 6001 }   # per axis; Gaussian operands only
/// ```
///
/// Discrete operands use `{ kind = "discrete", masses = [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceQuery {
    pub alphas: Vec<f64>,
    pub p: Operand,
    pub q: Operand,
    #[serde(default)]
    pub grid: Option<GridAxis>,
}

/// One line of a query result. `method` is `discrete`, `grid` or
/// `closed_form` (Gaussian KL limits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceRow {
    pub alpha: f64,
    pub method: String,
    pub value: f64,
}

impl DivergenceQuery {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn evaluate(&self) -> Result<Vec<DivergenceRow>> {
        let alphas = self.alphas.iter().map(|&a| AlphaParam::new(a)).collect::<Result<Vec<_>>>()?;
        if alphas.is_empty() {
            return Err(Error::param("alphas", "at least one order is required"));
        }
        let row = |alpha: AlphaParam, method: &str, value: f64| DivergenceRow {
            alpha: alpha.value(),
            method: method.to_string(),
            value,
        };
        match (&self.p, &self.q) {
            (Operand::Discrete { masses: p }, Operand::Discrete { masses: q }) => {
                let (p, q) = (ArmMarginal::new(p.clone())?, ArmMarginal::new(q.clone())?);
                alphas
                    .iter()
                    .map(|&a| Ok(row(a, "discrete", alpha_div_discrete(&p, &q, a)?)))
                    .collect()
            }
            (Operand::Gaussian { .. }, Operand::Gaussian { .. }) => {
                let p = self.p.gaussian().expect("gaussian operand")?;
                let q = self.q.gaussian().expect("gaussian operand")?;
                if p.dim() != q.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: p.dim(),
                        got: q.dim(),
                    });
                }
                let axis = self
                    .grid
                    .ok_or_else(|| Error::param("grid", "Gaussian operands need a grid"))?;
                let axis = GridAxis::new(axis.lo, axis.hi, axis.points)?;
                let grid = Grid::new(vec![axis; p.dim()])?;
                let pd = grid.try_tabulate(|x| p.density(x))?;
                let qd = grid.try_tabulate(|x| q.density(x))?;
                let mut rows = Vec::new();
                for &a in &alphas {
                    match a.branch() {
                        AlphaBranch::ForwardKl => rows.push(row(a, "closed_form", kl_gaussian(&p, &q)?)),
                        AlphaBranch::ReverseKl => rows.push(row(a, "closed_form", kl_gaussian(&q, &p)?)),
                        AlphaBranch::General(_) => {}
                    }
                    rows.push(row(a, "grid", alpha_div_grid(&pd, &qd, a, &grid)?));
                }
                Ok(rows)
            }
            _ => Err(Error::param("q", "both operands must be of the same kind")),
        }
    }
}
