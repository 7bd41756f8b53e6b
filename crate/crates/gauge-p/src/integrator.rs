//! Time stepping for weighted trajectories: Ito Euler-Maruyama and the
//! semi-implicit Stratonovich midpoint scheme on the extended (Ω, α⃗, β⃗)
//! system, plus a deterministic parallel ensemble runner.
//!
//! Determinism contract: every noise increment is a pure function of
//! (master_seed, trajectory index, step); batches are integrated with their
//! trajectories in index order and merged in batch order, so output is
//! bit-identical for any worker count.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::ensemble::{C64, Ensemble, TrajectoryState};
use crate::error::{Error, Result};
use crate::gauges::{DriftGauge, GaugedSystem};
use crate::models::Model;

/// Integration calculus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    ItoEuler,
    StratSemiImplicit,
}

/// Stepping parameters. `dt` is in the model's native time.
#[derive(Clone, Debug)]
pub struct StepConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub midpoint_iters: usize,
    pub t_end: f64,
    pub record_stride: usize,
    /// A trajectory whose any component exceeds this magnitude is declared
    /// divergent, frozen, and excluded from later sums.
    pub overflow_guard: f64,
    /// The run aborts once more than this fraction of trajectories diverged.
    pub abort_fraction: f64,
}

impl StepConfig {
    pub fn new(dt: f64, scheme: Scheme, t_end: f64) -> Self {
        StepConfig {
            dt,
            scheme,
            midpoint_iters: 3,
            t_end,
            record_stride: 1,
            overflow_guard: 1e10,
            abort_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<u64> {
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_end < 0.0 {
            return Err(Error::Config("t_end must be non-negative".into()));
        }
        if self.t_end > 0.0 && self.dt > self.t_end * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt ({}) exceeds t_end ({})",
                self.dt, self.t_end
            )));
        }
        if self.midpoint_iters == 0 {
            return Err(Error::Config("midpoint_iters must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Config("record_stride must be at least 1".into()));
        }
        let steps = (self.t_end / self.dt).round();
        if (steps * self.dt - self.t_end).abs() > 1e-9 * self.dt.max(self.t_end) {
            return Err(Error::Config(format!(
                "t_end ({}) is not an integer number of steps of dt ({})",
                self.t_end, self.dt
            )));
        }
        let steps = steps as u64;
        if steps % self.record_stride as u64 != 0 {
            return Err(Error::Config(format!(
                "step count {} is not a multiple of record_stride {}",
                steps, self.record_stride
            )));
        }
        Ok(steps)
    }
}

/// Where and how a trajectory left the simulation domain.
#[derive(Clone, Debug)]
pub struct DivergenceReport {
    pub trajectory: usize,
    pub step: u64,
    pub variable: String,
    pub magnitude: f64,
}

/// One normally-ordered moment ⟨â†ⁿâᵐ⟩ to accumulate while running.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MomentSpec {
    pub n: u32,
    pub m: u32,
    pub mode: usize,
}

impl MomentSpec {
    pub fn occupation() -> Self {
        MomentSpec { n: 1, m: 1, mode: 0 }
    }
}

/// Raw weighted sums over one batch at one recorded time.
#[derive(Clone, Debug)]
pub struct BatchBlock {
    /// Σ (βⁿαᵐΩ + (αⁿβᵐΩ)*) per requested moment.
    pub numerators: Vec<C64>,
    /// Σ Ω.
    pub omega_sum: C64,
    /// Σ (Re Ω)², Σ (Im Ω)².
    pub re2_sum: f64,
    pub im2_sum: f64,
    pub min_re: f64,
    pub max_re: f64,
    pub neg_re: u64,
    pub alive: u64,
}

impl BatchBlock {
    fn new(n_moments: usize) -> Self {
        BatchBlock {
            numerators: vec![C64::new(0.0, 0.0); n_moments],
            omega_sum: C64::new(0.0, 0.0),
            re2_sum: 0.0,
            im2_sum: 0.0,
            min_re: f64::INFINITY,
            max_re: f64::NEG_INFINITY,
            neg_re: 0,
            alive: 0,
        }
    }

    fn add(&mut self, y: &[C64], modes: usize, moments: &[MomentSpec]) {
        let omega = y[0];
        for (acc, ms) in self.numerators.iter_mut().zip(moments) {
            let a = y[1 + ms.mode];
            let b = y[1 + modes + ms.mode];
            let ket = ipow(b, ms.n) * ipow(a, ms.m) * omega;
            let bra = ipow(a, ms.n) * ipow(b, ms.m) * omega;
            *acc += ket + bra.conj();
        }
        self.omega_sum += omega;
        self.re2_sum += omega.re * omega.re;
        self.im2_sum += omega.im * omega.im;
        self.min_re = self.min_re.min(omega.re);
        self.max_re = self.max_re.max(omega.re);
        if omega.re < 0.0 {
            self.neg_re += 1;
        }
        self.alive += 1;
    }
}

#[inline]
fn ipow(z: C64, k: u32) -> C64 {
    let mut out = C64::new(1.0, 0.0);
    for _ in 0..k {
        out *= z;
    }
    out
}

/// Trajectory records reduced to per-time, per-batch weighted sums; the raw
/// material for moments, error bars and weight diagnostics.
#[derive(Clone, Debug)]
pub struct RecordSet {
    /// Native model time of each record.
    pub times: Vec<f64>,
    /// Figure-axis time per native time unit.
    pub time_scale: f64,
    pub moments: Vec<MomentSpec>,
    pub n_traj: usize,
    pub batch_count: usize,
    /// `blocks[time][batch]`.
    pub blocks: Vec<Vec<BatchBlock>>,
    pub diverged_total: usize,
    pub divergence_reports: Vec<DivergenceReport>,
    /// Mean |Ω| of the initial ensemble, the denominator-floor reference.
    pub mean_abs_omega0: f64,
}

impl RecordSet {
    pub fn figure_times(&self) -> Vec<f64> {
        self.times.iter().map(|t| t * self.time_scale).collect()
    }

    pub fn alive_at(&self, time_idx: usize) -> u64 {
        self.blocks[time_idx].iter().map(|b| b.alive).sum()
    }

    pub fn diverged_at(&self, time_idx: usize) -> u64 {
        self.n_traj as u64 - self.alive_at(time_idx)
    }

    pub fn moment_index(&self, n: u32, m: u32, mode: usize) -> Option<usize> {
        self.moments
            .iter()
            .position(|ms| ms.n == n && ms.m == m && ms.mode == mode)
    }

    /// Single-time record of an explicit collection of states.
    pub fn snapshot(
        states: &[TrajectoryState],
        moments: &[MomentSpec],
        batch_count: usize,
        time_scale: f64,
    ) -> Result<RecordSet> {
        if states.is_empty() || batch_count < 2 || states.len() % batch_count != 0 {
            return Err(Error::Config(
                "snapshot needs a nonempty state list divisible into at least 2 batches".into(),
            ));
        }
        let modes = states[0].mode_count();
        let batch_size = states.len() / batch_count;
        let mut blocks = vec![BatchBlock::new(moments.len()); batch_count];
        let mut y = vec![C64::new(0.0, 0.0); 2 * modes + 1];
        for (i, s) in states.iter().enumerate() {
            y[0] = s.omega;
            y[1..1 + modes].copy_from_slice(&s.alpha);
            y[1 + modes..].copy_from_slice(&s.beta);
            blocks[i / batch_size].add(&y, modes, moments);
        }
        let mean_abs = states.iter().map(|s| s.omega.norm()).sum::<f64>() / states.len() as f64;
        Ok(RecordSet {
            times: vec![states[0].time],
            time_scale,
            moments: moments.to_vec(),
            n_traj: states.len(),
            batch_count,
            blocks: vec![blocks],
            diverged_total: 0,
            divergence_reports: Vec::new(),
            mean_abs_omega0: mean_abs,
        })
    }
}

/// Full result of an ensemble run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: RecordSet,
    /// States at t_end; diverged trajectories stay frozen at their last
    /// finite state.
    pub final_ensemble: Ensemble,
}

struct Workspace {
    y: Vec<C64>,
    ybar: Vec<C64>,
    ynew: Vec<C64>,
    drift: Vec<C64>,
    b: Vec<C64>,
    g: Vec<C64>,
    dw: Vec<f64>,
}

impl Workspace {
    fn new(dim: usize, modes: usize, w: usize) -> Self {
        let z = C64::new(0.0, 0.0);
        Workspace {
            y: vec![z; dim],
            ybar: vec![z; dim],
            ynew: vec![z; dim],
            drift: vec![z; dim],
            b: vec![z; 2 * modes * w],
            g: vec![z; w],
            dw: vec![0.0; w],
        }
    }
}

fn ito_update<M: Model, G: DriftGauge>(
    sys: &GaugedSystem<M, G>,
    ws: &mut Workspace,
    t: f64,
    dt: f64,
) {
    sys.drift(false, &ws.y, t, &mut ws.drift, &mut ws.b, &mut ws.g);
    for (out, (y, d)) in ws.ynew.iter_mut().zip(ws.y.iter().zip(&ws.drift)) {
        *out = y + d * dt;
    }
    sys.add_noise(&ws.y, t, &ws.dw, 1.0, &mut ws.ynew, &mut ws.b, &mut ws.g);
}

fn strat_update<M: Model, G: DriftGauge>(
    sys: &GaugedSystem<M, G>,
    ws: &mut Workspace,
    t: f64,
    dt: f64,
    iters: usize,
) {
    let t_mid = t + 0.5 * dt;
    ws.ybar.copy_from_slice(&ws.y);
    for _ in 0..iters {
        sys.drift(true, &ws.ybar, t_mid, &mut ws.drift, &mut ws.b, &mut ws.g);
        for (out, (y, d)) in ws.ynew.iter_mut().zip(ws.y.iter().zip(&ws.drift)) {
            *out = y + d * (0.5 * dt);
        }
        sys.add_noise(&ws.ybar, t_mid, &ws.dw, 0.5, &mut ws.ynew, &mut ws.b, &mut ws.g);
        std::mem::swap(&mut ws.ybar, &mut ws.ynew);
    }
    sys.drift(true, &ws.ybar, t_mid, &mut ws.drift, &mut ws.b, &mut ws.g);
    for (out, (y, d)) in ws.ynew.iter_mut().zip(ws.y.iter().zip(&ws.drift)) {
        *out = y + d * dt;
    }
    sys.add_noise(&ws.ybar, t_mid, &ws.dw, 1.0, &mut ws.ynew, &mut ws.b, &mut ws.g);
}

fn check_finite(y: &[C64], modes: usize, guard: f64) -> std::result::Result<(), (String, f64)> {
    for (idx, z) in y.iter().enumerate() {
        let mag = z.norm();
        if !mag.is_finite() || mag > guard {
            let name = if idx == 0 {
                "omega".to_string()
            } else if idx <= modes {
                format!("alpha[{}]", idx - 1)
            } else {
                format!("beta[{}]", idx - 1 - modes)
            };
            return Err((name, mag));
        }
    }
    Ok(())
}

/// One Ito Euler-Maruyama step of the extended system. `noise` must hold W
/// increments already scaled to variance dt. Returns the new state, or a
/// divergence report if it left the simulation domain.
pub fn step_ito<M: Model, G: DriftGauge>(
    state: &TrajectoryState,
    sys: &GaugedSystem<M, G>,
    noise: &[f64],
    dt: f64,
) -> std::result::Result<TrajectoryState, DivergenceReport> {
    single_step(state, sys, noise, dt, Scheme::ItoEuler, 1)
}

/// One semi-implicit Stratonovich midpoint step; `cfg`-equivalent iteration
/// count is passed explicitly.
pub fn step_strat<M: Model, G: DriftGauge>(
    state: &TrajectoryState,
    sys: &GaugedSystem<M, G>,
    noise: &[f64],
    dt: f64,
    midpoint_iters: usize,
) -> std::result::Result<TrajectoryState, DivergenceReport> {
    single_step(state, sys, noise, dt, Scheme::StratSemiImplicit, midpoint_iters)
}

fn single_step<M: Model, G: DriftGauge>(
    state: &TrajectoryState,
    sys: &GaugedSystem<M, G>,
    noise: &[f64],
    dt: f64,
    scheme: Scheme,
    iters: usize,
) -> std::result::Result<TrajectoryState, DivergenceReport> {
    let modes = sys.model.mode_count();
    let w = sys.model.noise_count();
    assert_eq!(noise.len(), w, "noise vector must have W entries");
    let mut ws = Workspace::new(2 * modes + 1, modes, w);
    ws.y[0] = state.omega;
    ws.y[1..1 + modes].copy_from_slice(&state.alpha);
    ws.y[1 + modes..].copy_from_slice(&state.beta);
    ws.dw.copy_from_slice(noise);
    match scheme {
        Scheme::ItoEuler => ito_update(sys, &mut ws, state.time, dt),
        Scheme::StratSemiImplicit => strat_update(sys, &mut ws, state.time, dt, iters),
    }
    if let Err((variable, magnitude)) = check_finite(&ws.ynew, modes, 1e10) {
        return Err(DivergenceReport { trajectory: 0, step: 0, variable, magnitude });
    }
    Ok(TrajectoryState {
        omega: ws.ynew[0],
        alpha: ws.ynew[1..1 + modes].to_vec(),
        beta: ws.ynew[1 + modes..].to_vec(),
        time: state.time + dt,
    })
}

struct BatchResult {
    blocks: Vec<BatchBlock>,
    finals: Vec<TrajectoryState>,
    reports: Vec<DivergenceReport>,
    diverged: usize,
}

const MAX_DIVERGENCE_REPORTS: usize = 1000;

/// Advances every trajectory to t_end, accumulating weighted sums at every
/// `record_stride`-th step. Aborts with a diagnostic once the diverged
/// fraction crosses `cfg.abort_fraction`.
pub fn run_ensemble<M: Model, G: DriftGauge>(
    ens: &Ensemble,
    sys: &GaugedSystem<M, G>,
    cfg: &StepConfig,
    moments: &[MomentSpec],
    workers: usize,
) -> Result<RunOutput> {
    let n_steps = cfg.validate()?;
    if workers == 0 {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    let modes = sys.model.mode_count();
    if ens.mode_count() != modes {
        return Err(Error::Dimension(format!(
            "ensemble has {} modes, model '{}' expects {}",
            ens.mode_count(),
            sys.model.id(),
            modes
        )));
    }
    if ens.batch_count < 2 || ens.n_traj() % ens.batch_count != 0 {
        return Err(Error::Config("ensemble batch partition is invalid".into()));
    }
    for ms in moments {
        if ms.mode >= modes {
            return Err(Error::Config(format!(
                "moment mode index {} out of range (M = {modes})",
                ms.mode
            )));
        }
    }
    if cfg.scheme == Scheme::StratSemiImplicit && !sys.supports_stratonovich() {
        return Err(Error::Config(format!(
            "gauge '{}' carries no analytic Stratonovich weight correction; use the ito_euler scheme",
            sys.gauge.id()
        )));
    }

    let w = sys.model.noise_count();
    let pairs_per_step = w.div_ceil(2) as u64;
    let sqrt_dt = cfg.dt.sqrt();
    let n_rec = (n_steps / cfg.record_stride as u64) as usize + 1;
    let batch_size = ens.batch_size();
    let n_traj = ens.n_traj();
    let abort_at = (cfg.abort_fraction * n_traj as f64).max(0.0) as usize;

    let diverged_ctr = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let abort_step = AtomicUsize::new(u64::MAX as usize);

    let run_batch = |batch: usize| -> BatchResult {
        let mut blocks: Vec<BatchBlock> =
            (0..n_rec).map(|_| BatchBlock::new(moments.len())).collect();
        let mut finals = Vec::with_capacity(batch_size);
        let mut reports = Vec::new();
        let mut diverged = 0usize;
        let mut ws = Workspace::new(2 * modes + 1, modes, w);

        for local in 0..batch_size {
            if abort.load(Ordering::Relaxed) {
                // Result discarded; bail out cheaply.
                break;
            }
            let traj = batch * batch_size + local;
            let state = &ens.states[traj];
            ws.y[0] = state.omega;
            ws.y[1..1 + modes].copy_from_slice(&state.alpha);
            ws.y[1 + modes..].copy_from_slice(&state.beta);
            let stream = ens.noise_stream(traj);
            let mut t = state.time;
            blocks[0].add(&ws.y, modes, moments);
            let mut alive = true;

            for step in 0..n_steps {
                for p in 0..pairs_per_step {
                    let (z1, z2) = stream.normal_pair_at(step * pairs_per_step + p);
                    let k = (2 * p) as usize;
                    ws.dw[k] = z1 * sqrt_dt;
                    if k + 1 < w {
                        ws.dw[k + 1] = z2 * sqrt_dt;
                    }
                }
                match cfg.scheme {
                    Scheme::ItoEuler => ito_update(sys, &mut ws, t, cfg.dt),
                    Scheme::StratSemiImplicit => {
                        strat_update(sys, &mut ws, t, cfg.dt, cfg.midpoint_iters)
                    }
                }
                if let Err((variable, magnitude)) =
                    check_finite(&ws.ynew, modes, cfg.overflow_guard)
                {
                    diverged += 1;
                    if reports.len() < MAX_DIVERGENCE_REPORTS {
                        reports.push(DivergenceReport {
                            trajectory: traj,
                            step: step + 1,
                            variable,
                            magnitude,
                        });
                    }
                    let total = diverged_ctr.fetch_add(1, Ordering::Relaxed) + 1;
                    if total > abort_at && !abort.swap(true, Ordering::Relaxed) {
                        abort_step.store((step + 1) as usize, Ordering::Relaxed);
                    }
                    alive = false;
                    break;
                }
                std::mem::swap(&mut ws.y, &mut ws.ynew);
                t = state.time + (step + 1) as f64 * cfg.dt;
                if (step + 1) % cfg.record_stride as u64 == 0 {
                    let r = ((step + 1) / cfg.record_stride as u64) as usize;
                    blocks[r].add(&ws.y, modes, moments);
                }
            }

            finals.push(TrajectoryState {
                omega: ws.y[0],
                alpha: ws.y[1..1 + modes].to_vec(),
                beta: ws.y[1 + modes..].to_vec(),
                time: if alive { state.time + n_steps as f64 * cfg.dt } else { t },
            });
        }
        BatchResult { blocks, finals, reports, diverged }
    };

    let batch_results: Vec<BatchResult> = if workers == 1 {
        (0..ens.batch_count).map(run_batch).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("failed to build worker pool: {e}")))?;
        pool.install(|| (0..ens.batch_count).into_par_iter().map(run_batch).collect())
    };

    if abort.load(Ordering::Relaxed) {
        return Err(Error::DivergenceAbort {
            diverged: diverged_ctr.load(Ordering::Relaxed),
            total: n_traj,
            threshold: cfg.abort_fraction,
            step: abort_step.load(Ordering::Relaxed) as u64,
        });
    }

    // Deterministic merge in batch order.
    let mut blocks: Vec<Vec<BatchBlock>> = (0..n_rec).map(|_| Vec::new()).collect();
    let mut finals = Vec::with_capacity(n_traj);
    let mut reports = Vec::new();
    let mut diverged_total = 0;
    for br in batch_results {
        for (r, blk) in br.blocks.into_iter().enumerate() {
            blocks[r].push(blk);
        }
        finals.extend(br.finals);
        diverged_total += br.diverged;
        if reports.len() < MAX_DIVERGENCE_REPORTS {
            reports.extend(br.reports);
            reports.truncate(MAX_DIVERGENCE_REPORTS);
        }
    }

    let times = (0..n_rec)
        .map(|r| ens.states[0].time + (r * cfg.record_stride) as f64 * cfg.dt)
        .collect();
    let mean_abs_omega0 =
        ens.states.iter().map(|s| s.omega.norm()).sum::<f64>() / n_traj as f64;

    let records = RecordSet {
        times,
        time_scale: sys.model.time_scale(),
        moments: moments.to_vec(),
        n_traj,
        batch_count: ens.batch_count,
        blocks,
        diverged_total,
        divergence_reports: reports,
        mean_abs_omega0,
    };
    let final_ensemble = Ensemble {
        states: finals,
        master_seed: ens.master_seed,
        batch_count: ens.batch_count,
        model_id: ens.model_id.clone(),
        gauge_id: ens.gauge_id.clone(),
    };
    Ok(RunOutput { records, final_ensemble })
}
