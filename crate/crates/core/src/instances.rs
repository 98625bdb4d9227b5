//! Benchmark instance generation and the brute-force tour oracle.
//!
//! Off-diagonal weights are drawn in row-major upper-triangle order
//! (`(0,1), (0,2), …, (0,n-1), (1,2), …`) from a [`crate::rng::Rng`] seeded
//! with the instance seed, and mirrored into the lower triangle.

use rand::distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Largest city count [`solve_exact`] will enumerate by default.
pub const DEFAULT_ENUMERATION_CAP: usize = 10;

/// Relative tolerance under which two tour lengths count as tied.
pub const LENGTH_TIE_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightRange {
    pub lo: f64,
    pub hi: f64,
}

impl WeightRange {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo < 0.0 || self.lo > self.hi {
            return Err(Error::InvalidWeightRange {
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(())
    }

    pub fn contains(&self, w: f64) -> bool {
        w >= self.lo && w <= self.hi
    }
}

impl Default for WeightRange {
    fn default() -> Self {
        Self::new(10.0, 50.0)
    }
}

/// Whether weights are continuous uniforms or uniform integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightKind {
    #[default]
    Continuous,
    Integer,
}

/// A symmetric TSP instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TspInstance {
    n: usize,
    dist: Vec<f64>,
    seed: u64,
    weight_range: WeightRange,
    kind: WeightKind,
}

impl TspInstance {
    /// Builds an instance from an explicit matrix. The recorded range is the
    /// observed span of off-diagonal weights and the seed is 0.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 3 {
            return Err(Error::TooFewCities(n));
        }
        let mut dist = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::InvalidMatrix(format!(
                    "row of length {} in a {n}-city matrix",
                    row.len()
                )));
            }
            dist.extend_from_slice(row);
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for u in 0..n {
            if dist[u * n + u] != 0.0 {
                return Err(Error::InvalidMatrix(format!("nonzero diagonal at {u}")));
            }
            for v in 0..n {
                let w = dist[u * n + v];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::InvalidMatrix(format!("bad weight {w} at ({u},{v})")));
                }
                if w != dist[v * n + u] {
                    return Err(Error::InvalidMatrix(format!("asymmetric at ({u},{v})")));
                }
                if u != v {
                    lo = lo.min(w);
                    hi = hi.max(w);
                }
            }
        }
        Ok(Self {
            n,
            dist,
            seed: 0,
            weight_range: WeightRange::new(lo, hi),
            kind: WeightKind::Continuous,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn weight_range(&self) -> WeightRange {
        self.weight_range
    }

    pub fn weight_kind(&self) -> WeightKind {
        self.kind
    }

    #[inline]
    pub fn dist(&self, u: usize, v: usize) -> f64 {
        self.dist[u * self.n + v]
    }

    /// Row-major distance matrix.
    pub fn matrix(&self) -> &[f64] {
        &self.dist
    }

    pub fn max_weight(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Same instance with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.dist.iter_mut().for_each(|w| *w *= factor);
        out.weight_range =
            WeightRange::new(self.weight_range.lo * factor, self.weight_range.hi * factor);
        out
    }

    /// Cyclic tour length `Σ dist[t_i][t_{i+1 mod n}]`.
    pub fn tour_length(&self, tour: &[usize]) -> Result<f64> {
        check_permutation(tour, self.n)?;
        Ok(self.tour_length_unchecked(tour))
    }

    pub(crate) fn tour_length_unchecked(&self, tour: &[usize]) -> f64 {
        let n = tour.len();
        (0..n).map(|i| self.dist(tour[i], tour[(i + 1) % n])).sum()
    }
}

pub(crate) fn check_permutation(seq: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if seq.len() != n {
        return Err(Error::NotAPermutation(seq.to_vec()));
    }
    for &c in seq {
        if c >= n || std::mem::replace(&mut seen[c], true) {
            return Err(Error::NotAPermutation(seq.to_vec()));
        }
    }
    Ok(())
}

/// Draws a random symmetric instance with continuous uniform weights.
pub fn generate_instance(n: usize, seed: u64, range: WeightRange) -> Result<TspInstance> {
    generate_instance_with(n, seed, range, WeightKind::Continuous)
}

pub fn generate_instance_with(
    n: usize,
    seed: u64,
    range: WeightRange,
    kind: WeightKind,
) -> Result<TspInstance> {
    if n < 3 {
        return Err(Error::TooFewCities(n));
    }
    range.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut dist = vec![0.0; n * n];
    let sample: Box<dyn FnMut() -> f64> = match kind {
        WeightKind::Continuous => {
            let u = Uniform::new_inclusive(range.lo, range.hi).map_err(|_| {
                Error::InvalidWeightRange {
                    lo: range.lo,
                    hi: range.hi,
                }
            })?;
            Box::new(move || u.sample(&mut rng))
        }
        WeightKind::Integer => {
            let (lo, hi) = (range.lo.ceil() as u64, range.hi.floor() as u64);
            let u = Uniform::new_inclusive(lo, hi).map_err(|_| Error::InvalidWeightRange {
                lo: range.lo,
                hi: range.hi,
            })?;
            Box::new(move || u.sample(&mut rng) as f64)
        }
    };
    let mut sample = sample;
    for u in 0..n {
        for v in (u + 1)..n {
            let w = sample();
            dist[u * n + v] = w;
            dist[v * n + u] = w;
        }
    }
    Ok(TspInstance {
        n,
        dist,
        seed,
        weight_range: range,
        kind,
    })
}

/// All minimum-length tours of an instance, each starting at city 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub optimal_length: f64,
    /// Sorted lexicographically.
    pub optimal_tours: Vec<Vec<usize>>,
}

impl ExactSolution {
    pub fn is_optimal(&self, tour: &[usize]) -> bool {
        self.optimal_tours.iter().any(|t| t == tour)
    }
}

pub fn solve_exact(inst: &TspInstance) -> Result<ExactSolution> {
    solve_exact_capped(inst, DEFAULT_ENUMERATION_CAP)
}

/// Enumerates all `(n-1)!` tours with city 0 fixed first.
pub fn solve_exact_capped(inst: &TspInstance, cap: usize) -> Result<ExactSolution> {
    let n = inst.n();
    if n > cap {
        return Err(Error::CapExceeded {
            what: "city count",
            value: n,
            cap,
        });
    }
    let mut tail: Vec<usize> = (1..n).collect();
    let mut scored = Vec::new();
    loop {
        let mut tour = Vec::with_capacity(n);
        tour.push(0);
        tour.extend_from_slice(&tail);
        scored.push((inst.tour_length_unchecked(&tour), tour));
        if !next_permutation(&mut tail) {
            break;
        }
    }
    let best = scored.iter().map(|(l, _)| *l).fold(f64::INFINITY, f64::min);
    let tol = LENGTH_TIE_RTOL * best.abs().max(1.0);
    let optimal_tours = scored
        .into_iter()
        .filter(|(l, _)| *l - best <= tol)
        .map(|(_, t)| t)
        .collect();
    Ok(ExactSolution {
        optimal_length: best,
        optimal_tours,
    })
}

/// Advances `xs` to the next lexicographic permutation; returns `false` and
/// leaves `xs` sorted descending once the last permutation has been reached.
pub fn next_permutation<T: Ord>(xs: &mut [T]) -> bool {
    if xs.len() < 2 {
        return false;
    }
    let mut i = xs.len() - 1;
    while i > 0 && xs[i - 1] >= xs[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = xs.len() - 1;
    while xs[j] <= xs[i - 1] {
        j -= 1;
    }
    xs.swap(i - 1, j);
    xs[i..].reverse();
    true
}

/// On-disk instance fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFixture {
    pub n: usize,
    pub seed: u64,
    pub weight_range: [f64; 2],
    #[serde(default)]
    pub weight_kind: WeightKind,
    /// Row-major `n*n` matrix.
    pub dist: Vec<f64>,
    pub optimal_length: f64,
    pub optimal_tours: Vec<Vec<usize>>,
}

impl InstanceFixture {
    pub fn new(inst: &TspInstance, sol: &ExactSolution) -> Self {
        Self {
            n: inst.n(),
            seed: inst.seed(),
            weight_range: [inst.weight_range.lo, inst.weight_range.hi],
            weight_kind: inst.kind,
            dist: inst.dist.clone(),
            optimal_length: sol.optimal_length,
            optimal_tours: sol.optimal_tours.clone(),
        }
    }

    pub fn instance(&self) -> Result<TspInstance> {
        if self.dist.len() != self.n * self.n {
            return Err(Error::SizeMismatch {
                expected: self.n * self.n,
                got: self.dist.len(),
            });
        }
        let rows: Vec<Vec<f64>> = self.dist.chunks(self.n).map(<[f64]>::to_vec).collect();
        let mut inst = TspInstance::from_matrix(&rows)?;
        inst.seed = self.seed;
        inst.weight_range = WeightRange::new(self.weight_range[0], self.weight_range[1]);
        inst.kind = self.weight_kind;
        Ok(inst)
    }

    pub fn solution(&self) -> ExactSolution {
        ExactSolution {
            optimal_length: self.optimal_length,
            optimal_tours: self.optimal_tours.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
