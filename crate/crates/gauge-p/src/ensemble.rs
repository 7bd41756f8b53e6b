//! Weighted-trajectory ensembles.
//!
//! A trajectory sample is the triple (Ω, α⃗, β⃗): a complex quantum weight plus
//! ket and bra coherent amplitudes. An ensemble of such samples is the whole
//! representation — the underlying distribution exists only empirically.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::rng::{NoiseStream, StreamKind};

pub type C64 = Complex<f64>;

pub const DEFAULT_BATCH_COUNT: usize = 20;

/// One weighted phase-space sample at a point in time.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryState {
    /// Quantum weight Ω.
    pub omega: C64,
    /// Ket amplitudes α⃗ (length M).
    pub alpha: Vec<C64>,
    /// Bra amplitudes β⃗ (length M).
    pub beta: Vec<C64>,
    /// Time in the model's native units.
    pub time: f64,
}

impl TrajectoryState {
    pub fn mode_count(&self) -> usize {
        debug_assert_eq!(self.alpha.len(), self.beta.len());
        self.alpha.len()
    }

    pub fn is_finite(&self) -> bool {
        let ok = |z: &C64| z.re.is_finite() && z.im.is_finite();
        ok(&self.omega) && self.alpha.iter().all(ok) && self.beta.iter().all(ok)
    }
}

/// A fixed population of weighted trajectories plus the seed material that
/// makes every per-trajectory noise stream a pure function of
/// (master_seed, trajectory index).
#[derive(Clone, Debug)]
pub struct Ensemble {
    pub states: Vec<TrajectoryState>,
    pub master_seed: u64,
    /// Sub-ensemble partition used for batch-mean error bars.
    pub batch_count: usize,
    pub model_id: String,
    pub gauge_id: String,
}

impl Ensemble {
    pub fn n_traj(&self) -> usize {
        self.states.len()
    }

    pub fn batch_size(&self) -> usize {
        self.states.len() / self.batch_count
    }

    pub fn mode_count(&self) -> usize {
        self.states.first().map(|s| s.mode_count()).unwrap_or(0)
    }

    /// The dynamics noise stream of trajectory `i`.
    pub fn noise_stream(&self, i: usize) -> NoiseStream {
        NoiseStream::new(self.master_seed, i as u64, StreamKind::Dynamics)
    }
}

fn check_partition(n_traj: usize, batch_count: usize) -> Result<()> {
    if batch_count < 2 {
        return Err(Error::Config(format!(
            "batch_count must be at least 2, got {batch_count}"
        )));
    }
    if n_traj < batch_count {
        return Err(Error::Config(format!(
            "n_traj ({n_traj}) must be at least batch_count ({batch_count})"
        )));
    }
    if n_traj % batch_count != 0 {
        return Err(Error::Config(format!(
            "n_traj ({n_traj}) not divisible by batch_count ({batch_count})"
        )));
    }
    Ok(())
}

/// δ-function representation of a coherent state |α₀⟩: every trajectory starts
/// at α = α₀, β = α₀*, Ω = 1, which reduces to the positive-P construction.
pub fn init_coherent(alpha0: &[C64], n_traj: usize, seed: u64) -> Result<Ensemble> {
    init_coherent_batched(alpha0, n_traj, seed, DEFAULT_BATCH_COUNT)
}

pub fn init_coherent_batched(
    alpha0: &[C64],
    n_traj: usize,
    seed: u64,
    batch_count: usize,
) -> Result<Ensemble> {
    if alpha0.is_empty() {
        return Err(Error::Config("alpha0 must have at least one mode".into()));
    }
    check_partition(n_traj, batch_count)?;
    let state = TrajectoryState {
        omega: C64::new(1.0, 0.0),
        alpha: alpha0.to_vec(),
        beta: alpha0.iter().map(|a| a.conj()).collect(),
        time: 0.0,
    };
    Ok(Ensemble {
        states: vec![state; n_traj],
        master_seed: seed,
        batch_count,
        model_id: String::new(),
        gauge_id: String::new(),
    })
}

/// Gaussian vacuum-class representation of variance σ₀²: α and β drawn
/// independently with density ∝ exp{−(|α|²+|β|²)/2σ₀²}, i.e. each real
/// component is N(0, σ₀²) so that ⟨|α|²⟩ = 2σ₀². σ₀² = 0 degenerates to the
/// δ-function vacuum. Single-mode.
pub fn init_gaussian(sigma0sq: f64, n_traj: usize, seed: u64) -> Result<Ensemble> {
    init_gaussian_batched(sigma0sq, n_traj, seed, DEFAULT_BATCH_COUNT)
}

pub fn init_gaussian_batched(
    sigma0sq: f64,
    n_traj: usize,
    seed: u64,
    batch_count: usize,
) -> Result<Ensemble> {
    if !(sigma0sq >= 0.0) {
        return Err(Error::Config(format!(
            "sigma0sq must be non-negative, got {sigma0sq}"
        )));
    }
    check_partition(n_traj, batch_count)?;
    let sigma = sigma0sq.sqrt();
    let states = (0..n_traj)
        .map(|i| {
            let stream = NoiseStream::new(seed, i as u64, StreamKind::Init);
            let (ar, ai) = stream.normal_pair_at(0);
            let (br, bi) = stream.normal_pair_at(1);
            TrajectoryState {
                omega: C64::new(1.0, 0.0),
                alpha: vec![C64::new(sigma * ar, sigma * ai)],
                beta: vec![C64::new(sigma * br, sigma * bi)],
                time: 0.0,
            }
        })
        .collect();
    Ok(Ensemble {
        states,
        master_seed: seed,
        batch_count,
        model_id: String::new(),
        gauge_id: String::new(),
    })
}
