//! Readout noise, calibration, and measurement-error mitigation.
//!
//! A [`ConfusionModel`] is column stochastic: entry `(i, j)` is the
//! probability of reading outcome `i` after preparing basis state `j`.
//! Outcome indices use the same bit order as the qubits they cover.

use rand::Rng as _;
use rand_distr::{Binomial, Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

/// Inversion logs a warning when the 1-norm condition number exceeds this.
pub const CONDITION_WARN: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionModel {
    dim: usize,
    /// Row-major.
    r: Vec<f64>,
}

impl ConfusionModel {
    pub fn identity(dim: usize) -> Self {
        let mut r = vec![0.0; dim * dim];
        (0..dim).for_each(|i| r[i * dim + i] = 1.0);
        Self { dim, r }
    }

    /// Validates non-negativity and unit column sums (within `1e-12`).
    pub fn from_row_major(dim: usize, r: Vec<f64>) -> Result<Self> {
        if r.len() != dim * dim {
            return Err(Error::SizeMismatch {
                expected: dim * dim,
                got: r.len(),
            });
        }
        if r.iter().any(|&x| x.is_nan() || x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidConfusion(
                "negative or non-finite entry".into(),
            ));
        }
        for j in 0..dim {
            let col: f64 = (0..dim).map(|i| r[i * dim + j]).sum();
            if (col - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfusion(format!("column {j} sums to {col}")));
            }
        }
        Ok(Self { dim, r })
    }

    /// Tensor product of independent single-qubit flip channels with
    /// `p01 = P(read 1 | prepared 0)` and `p10 = P(read 0 | prepared 1)`.
    pub fn independent_flips(num_qubits: usize, p01: f64, p10: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p01) || !(0.0..=1.0).contains(&p10) {
            return Err(Error::InvalidConfusion(format!(
                "flip probabilities ({p01}, {p10}) outside [0, 1]"
            )));
        }
        let dim = 1usize << num_qubits;
        let single = |obs: usize, prep: usize| match (obs, prep) {
            (0, 0) => 1.0 - p01,
            (1, 0) => p01,
            (0, 1) => p10,
            _ => 1.0 - p10,
        };
        let mut r = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                r[i * dim + j] = (0..num_qubits)
                    .map(|q| single(i >> q & 1, j >> q & 1))
                    .product();
            }
        }
        Ok(Self { dim, r })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, observed: usize, prepared: usize) -> f64 {
        self.r[observed * self.dim + prepared]
    }

    pub fn row_major(&self) -> &[f64] {
        &self.r
    }

    pub fn column(&self, prepared: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, prepared)).collect()
    }

    /// `R p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j) * p[j]).sum())
            .collect()
    }

    /// Gauss-Jordan inverse with partial pivoting.
    pub fn inverse(&self) -> Result<Vec<f64>> {
        let d = self.dim;
        let mut a = self.r.clone();
        let mut inv = ConfusionModel::identity(d).r;
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&x, &y| a[x * d + col].abs().total_cmp(&a[y * d + col].abs()))
                .expect("non-empty range");
            if a[pivot * d + col].abs() < 1e-14 {
                return Err(Error::SingularMatrix);
            }
            if pivot != col {
                for k in 0..d {
                    a.swap(pivot * d + k, col * d + k);
                    inv.swap(pivot * d + k, col * d + k);
                }
            }
            let diag = a[col * d + col];
            for k in 0..d {
                a[col * d + k] /= diag;
                inv[col * d + k] /= diag;
            }
            for row in 0..d {
                if row != col {
                    let f = a[row * d + col];
                    if f != 0.0 {
                        for k in 0..d {
                            a[row * d + k] -= f * a[col * d + k];
                            inv[row * d + k] -= f * inv[col * d + k];
                        }
                    }
                }
            }
        }
        Ok(inv)
    }

    /// 1-norm condition number.
    pub fn condition_number(&self) -> Result<f64> {
        let inv = self.inverse()?;
        let d = self.dim;
        let norm1 = |m: &[f64]| {
            (0..d)
                .map(|j| (0..d).map(|i| m[i * d + j].abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        Ok(norm1(&self.r) * norm1(&inv))
    }
}

/// Normalized outcome distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    probs: Vec<f64>,
}

impl Histogram {
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidArgument("histogram has no counts".into()));
        }
        Ok(Self {
            probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    /// Validates and renormalizes a probability vector.
    pub fn from_probs(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(Error::InvalidArgument("negative probability".into()));
        }
        let total: f64 = p.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("probabilities sum to zero".into()));
        }
        Ok(Self {
            probs: p.into_iter().map(|x| x / total).collect(),
        })
    }

    pub fn uniform(dim: usize) -> Self {
        Self {
            probs: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Multinomial counts drawn by a chain of conditional binomials.
pub fn sample_counts(p: &[f64], shots: u64, rng: &mut Rng) -> Vec<u64> {
    let mut counts = vec![0u64; p.len()];
    let mut remaining = shots;
    let mut mass = 1.0f64;
    for (i, &pi) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == p.len() || mass <= 0.0 {
            counts[i] = remaining;
            break;
        }
        let q = (pi / mass).clamp(0.0, 1.0);
        let c = Binomial::new(remaining, q)
            .expect("probability in [0, 1]")
            .sample(rng);
        counts[i] = c;
        remaining -= c;
        mass -= pi;
    }
    counts
}

/// Estimates a confusion matrix by preparing every basis state
/// `shots_per_state` times and reading it through `truth`.
pub fn calibrate(
    truth: &ConfusionModel,
    shots_per_state: u64,
    seed: u64,
) -> Result<ConfusionModel> {
    if shots_per_state == 0 {
        return Err(Error::InvalidArgument(
            "shots_per_state must be positive".into(),
        ));
    }
    let d = truth.dim();
    let mut r = vec![0.0; d * d];
    for j in 0..d {
        let mut rng = rng_from_seed(derive_seed(seed, &[j as u64]));
        let counts = sample_counts(&truth.column(j), shots_per_state, &mut rng);
        for (i, c) in counts.into_iter().enumerate() {
            r[i * d + j] = c as f64 / shots_per_state as f64;
        }
    }
    Ok(ConfusionModel { dim: d, r })
}

/// `R^-1 m`, negative entries clipped to zero, renormalized.
pub fn mitigate_inversion(r: &ConfusionModel, m: &Histogram) -> Result<Histogram> {
    if m.len() != r.dim() {
        return Err(Error::SizeMismatch {
            expected: r.dim(),
            got: m.len(),
        });
    }
    let cond = r.condition_number()?;
    if cond > CONDITION_WARN {
        log::warn!("calibration matrix is ill-conditioned (cond1 = {cond:.3e})");
    }
    let inv = r.inverse()?;
    let d = r.dim();
    let raw: Vec<f64> = (0..d)
        .map(|i| (0..d).map(|j| inv[i * d + j] * m.probs()[j]).sum::<f64>())
        .collect();
    let clipped: Vec<f64> = raw.iter().map(|&x| x.max(0.0)).collect();
    Histogram::from_probs(clipped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IbuConfig {
    pub iterations: usize,
    /// Stop once successive iterates differ by less than this total variation.
    pub tolerance: f64,
}

impl Default for IbuConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            tolerance: 1e-8,
        }
    }
}

/// Iterative Bayesian unfolding:
/// `p_j <- p_j * sum_i R_ij m_i / (sum_k R_ik p_k)`.
pub fn mitigate_ibu(
    r: &ConfusionModel,
    m: &Histogram,
    cfg: IbuConfig,
    prior: &Histogram,
) -> Result<Histogram> {
    let mut last = prior.clone();
    ibu_iterates(r, m, cfg, prior, |p| last = p.clone())?;
    Ok(last)
}

/// Runs IBU and hands every iterate to `visit`.
pub fn ibu_iterates(
    r: &ConfusionModel,
    m: &Histogram,
    cfg: IbuConfig,
    prior: &Histogram,
    mut visit: impl FnMut(&Histogram),
) -> Result<()> {
    let d = r.dim();
    if m.len() != d || prior.len() != d {
        return Err(Error::SizeMismatch {
            expected: d,
            got: if m.len() != d { m.len() } else { prior.len() },
        });
    }
    if cfg.iterations == 0 {
        return Err(Error::InvalidArgument(
            "IBU needs at least one iteration".into(),
        ));
    }
    if prior.probs().iter().any(|&x| x <= 0.0) {
        return Err(Error::InvalidArgument(
            "IBU prior must be strictly positive".into(),
        ));
    }
    let mut p = prior.probs().to_vec();
    let mut ratio = vec![0.0; d];
    for _ in 0..cfg.iterations {
        for (i, ri) in ratio.iter_mut().enumerate() {
            let mi = m.probs()[i];
            if mi == 0.0 {
                *ri = 0.0;
                continue;
            }
            let denom: f64 = (0..d).map(|k| r.get(i, k) * p[k]).sum();
            if denom <= 0.0 {
                return Err(Error::ZeroDenominator(i));
            }
            *ri = mi / denom;
        }
        let next: Vec<f64> = (0..d)
            .map(|j| p[j] * (0..d).map(|i| r.get(i, j) * ratio[i]).sum::<f64>())
            .collect();
        // the update preserves total mass exactly in exact arithmetic
        let total: f64 = next.iter().sum();
        let next: Vec<f64> = next.into_iter().map(|x| x / total).collect();
        let shift = total_variation(&p, &next);
        p = next;
        visit(&Histogram { probs: p.clone() });
        if shift < cfg.tolerance {
            break;
        }
    }
    Ok(())
}

/// Serialized calibration result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub dim: usize,
    /// Row-major, `matrix[i * dim + j] = P(observe i | prepare j)`.
    pub matrix: Vec<f64>,
    pub shots_per_state: u64,
    pub seed: u64,
}

impl CalibrationRecord {
    pub fn new(model: &ConfusionModel, shots_per_state: u64, seed: u64) -> Self {
        Self {
            dim: model.dim(),
            matrix: model.row_major().to_vec(),
            shots_per_state,
            seed,
        }
    }

    pub fn model(&self) -> Result<ConfusionModel> {
        ConfusionModel::from_row_major(self.dim, self.matrix.clone())
    }
}

/// Perturbs every entry by a uniform draw in `[-amount, amount]`, clamps at
/// zero and renormalizes columns.
pub fn perturb(model: &ConfusionModel, amount: f64, rng: &mut Rng) -> ConfusionModel {
    let d = model.dim();
    let mut r: Vec<f64> = model
        .row_major()
        .iter()
        .map(|&x| (x + rng.random_range(-amount..=amount)).max(0.0))
        .collect();
    for j in 0..d {
        let s: f64 = (0..d).map(|i| r[i * d + j]).sum();
        (0..d).for_each(|i| r[i * d + j] /= s);
    }
    ConfusionModel { dim: d, r }
}

/// One perturbed-calibration comparison between IBU and inversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub qubits: usize,
    pub shots: u64,
    /// Entrywise half-width of the calibration error.
    pub perturbation: f64,
    pub p01: f64,
    pub p10: f64,
    pub ibu: IbuConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            qubits: 2,
            shots: 1024,
            perturbation: 0.02,
            p01: 0.03,
            p10: 0.07,
            ibu: IbuConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub tv_ibu: f64,
    pub tv_inversion: f64,
}

impl TrialOutcome {
    pub fn ibu_wins(&self) -> bool {
        self.tv_ibu <= self.tv_inversion
    }
}

/// Draws a flat-Dirichlet true distribution, measures it `shots` times
/// through the flip model, and unfolds with a perturbed copy of that model.
pub fn perturbed_calibration_trial(cfg: &StudyConfig, seed: u64) -> Result<TrialOutcome> {
    let truth = ConfusionModel::independent_flips(cfg.qubits, cfg.p01, cfg.p10)?;
    let d = truth.dim();
    let mut rng = rng_from_seed(seed);
    let w: Vec<f64> = (0..d).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = w.iter().sum();
    let p: Vec<f64> = w.iter().map(|x| x / total).collect();
    let m = Histogram::from_counts(&sample_counts(&truth.apply(&p), cfg.shots, &mut rng))?;
    let estimate = perturb(&truth, cfg.perturbation, &mut rng);
    let ibu = mitigate_ibu(&estimate, &m, cfg.ibu, &Histogram::uniform(d))?;
    let inv = mitigate_inversion(&estimate, &m)?;
    Ok(TrialOutcome {
        tv_ibu: total_variation(ibu.probs(), &p),
        tv_inversion: total_variation(inv.probs(), &p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_two() -> ConfusionModel {
        ConfusionModel::from_row_major(2, vec![0.9, 0.1, 0.1, 0.9]).unwrap()
    }

    #[test]
    fn flip_model_is_column_stochastic() {
        let r = ConfusionModel::independent_flips(2, 0.03, 0.07).unwrap();
        assert!(ConfusionModel::from_row_major(4, r.row_major().to_vec()).is_ok());
        // prepare |01> (qubit 0 set), read |00>: qubit 0 decays, qubit 1 stays
        assert!((r.get(0b00, 0b01) - 0.07 * 0.97).abs() < 1e-15);
        assert!(ConfusionModel::from_row_major(2, vec![0.9, 0.2, 0.1, 0.9]).is_err());
    }

    #[test]
    fn identity_calibration_is_exact() {
        let est = calibrate(&ConfusionModel::identity(4), 17, 5).unwrap();
        assert_eq!(est, ConfusionModel::identity(4));
    }

    #[test]
    fn large_calibration_is_close() {
        let truth = ConfusionModel::independent_flips(2, 0.05, 0.05).unwrap();
        let est = calibrate(&truth, 1_000_000, 11).unwrap();
        for (a, b) in est.row_major().iter().zip(truth.row_major()) {
            assert!((a - b).abs() < 0.005);
        }
    }

    #[test]
    fn inversion_examples() {
        let m = Histogram::from_probs(vec![0.2, 0.3, 0.5]).unwrap();
        let out = mitigate_inversion(&ConfusionModel::identity(3), &m).unwrap();
        assert_eq!(out, m);
        let out = mitigate_inversion(
            &two_by_two(),
            &Histogram::from_probs(vec![0.9, 0.1]).unwrap(),
        )
        .unwrap();
        assert!((out.probs()[0] - 1.0).abs() < 1e-12 && out.probs()[1].abs() < 1e-12);
        // raw inverse would be negative here
        let out = mitigate_inversion(
            &two_by_two(),
            &Histogram::from_probs(vec![0.95, 0.05]).unwrap(),
        )
        .unwrap();
        assert_eq!(out.probs(), &[1.0, 0.0]);
        let singular = ConfusionModel::from_row_major(2, vec![0.5, 0.5, 0.5, 0.5]).unwrap();
        assert!(matches!(
            mitigate_inversion(&singular, &Histogram::uniform(2)),
            Err(Error::SingularMatrix)
        ));
    }

    #[test]
    fn inversion_round_trips_without_clipping() {
        let r = ConfusionModel::independent_flips(2, 0.03, 0.07).unwrap();
        let p = [0.4, 0.3, 0.2, 0.1];
        let m = Histogram::from_probs(r.apply(&p)).unwrap();
        let fixed = mitigate_inversion(&r, &m).unwrap();
        let back = r.apply(fixed.probs());
        for (a, b) in back.iter().zip(m.probs()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ibu_with_identity_returns_measurement() {
        let m = Histogram::from_probs(vec![0.1, 0.6, 0.3]).unwrap();
        let cfg = IbuConfig {
            iterations: 1,
            tolerance: 0.0,
        };
        let out = mitigate_ibu(
            &ConfusionModel::identity(3),
            &m,
            cfg,
            &Histogram::uniform(3),
        )
        .unwrap();
        for (a, b) in out.probs().iter().zip(m.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn ibu_recovers_constructed_fixed_point() {
        let r = ConfusionModel::independent_flips(2, 0.03, 0.07).unwrap();
        let p = [0.55, 0.05, 0.3, 0.1];
        let m = Histogram::from_probs(r.apply(&p)).unwrap();
        let cfg = IbuConfig {
            iterations: 100,
            tolerance: 0.0,
        };
        let out = mitigate_ibu(&r, &m, cfg, &Histogram::uniform(4)).unwrap();
        assert!(total_variation(out.probs(), &p) < 1e-6);
    }

    #[test]
    fn ibu_iterates_stay_on_simplex() {
        let r = ConfusionModel::independent_flips(2, 0.1, 0.2).unwrap();
        let m = Histogram::from_counts(&[500, 0, 300, 224]).unwrap();
        let cfg = IbuConfig {
            iterations: 50,
            tolerance: 0.0,
        };
        let mut seen = 0;
        ibu_iterates(&r, &m, cfg, &Histogram::uniform(4), |h| {
            seen += 1;
            assert!(h.probs().iter().all(|&x| x >= 0.0));
            assert!((h.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        })
        .unwrap();
        assert_eq!(seen, 50);
    }

    #[test]
    fn ibu_rejects_bad_inputs() {
        let r = two_by_two();
        let m = Histogram::uniform(2);
        let zero_prior = Histogram::from_probs(vec![1.0, 0.0]).unwrap();
        assert!(mitigate_ibu(&r, &m, IbuConfig::default(), &zero_prior).is_err());
        let cfg = IbuConfig {
            iterations: 0,
            tolerance: 0.0,
        };
        assert!(mitigate_ibu(&r, &m, cfg, &Histogram::uniform(2)).is_err());
        let blind = ConfusionModel::from_row_major(2, vec![1.0, 1.0, 0.0, 0.0]).unwrap();
        let m = Histogram::from_probs(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            mitigate_ibu(&blind, &m, IbuConfig::default(), &Histogram::uniform(2)),
            Err(Error::ZeroDenominator(1))
        ));
    }

    #[test]
    fn sampled_counts_sum_to_shots() {
        let mut rng = rng_from_seed(1);
        let c = sample_counts(&[0.25, 0.0, 0.5, 0.25], 1000, &mut rng);
        assert_eq!(c.iter().sum::<u64>(), 1000);
        assert_eq!(c[1], 0);
    }
}
