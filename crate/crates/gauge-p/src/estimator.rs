//! Weighted expectation values and diagnostics.
//!
//! Normally ordered moments are ratios of Ω-weighted phase-space averages to
//! ⟨Ω + Ω*⟩: ⟨â†ⁿâᵐ⟩ = ⟨βⁿαᵐΩ + (αⁿβᵐΩ)*⟩ / ⟨Ω + Ω*⟩. Error bars come from
//! batch means: each sub-ensemble forms its own ratio and the spread of batch
//! ratios gives the standard error, which stays honest under the weight skew
//! that strong gauges produce.

use crate::ensemble::C64;
use crate::error::{Error, Result};
use crate::integrator::RecordSet;

/// Relative denominator floor: below 1e-6 of the initial mean |Ω| (per
/// trajectory) the weight signs have cancelled and the ratio is meaningless.
const DENOM_FLOOR_REL: f64 = 1e-6;

/// Absolute floor used in z-scores when both series are error-free.
const Z_FLOOR: f64 = 1e-9;

/// A complex moment value with its batch-mean standard error.
#[derive(Clone, Copy, Debug)]
pub struct MomentEstimate {
    pub value: C64,
    /// RMS spread of batch ratios around their mean, over √n_batches.
    pub std_err: f64,
    pub numerator_mean: C64,
    pub denominator_mean: f64,
    pub n_batches: usize,
    /// False when the denominator fell below the cancellation floor.
    pub valid: bool,
}

/// Per-time moment estimates for the requested (n, m, mode).
pub fn moment(records: &RecordSet, n: u32, m: u32, mode: usize) -> Result<Vec<MomentEstimate>> {
    let idx = records.moment_index(n, m, mode).ok_or_else(|| {
        Error::Config(format!(
            "moment (n={n}, m={m}, mode={mode}) was not recorded during the run"
        ))
    })?;
    let floor = DENOM_FLOOR_REL * records.mean_abs_omega0 * records.n_traj as f64;
    let mut out = Vec::with_capacity(records.times.len());
    for blocks in &records.blocks {
        let mut num = C64::new(0.0, 0.0);
        let mut den = 0.0f64;
        let mut alive = 0u64;
        let mut ratios: Vec<C64> = Vec::with_capacity(blocks.len());
        for b in blocks {
            num += b.numerators[idx];
            den += 2.0 * b.omega_sum.re;
            alive += b.alive;
            let bden = 2.0 * b.omega_sum.re;
            if b.alive > 0 && bden.abs() > f64::MIN_POSITIVE {
                ratios.push(b.numerators[idx] / bden);
            }
        }
        let n_batches = ratios.len();
        let valid = den.abs() >= floor && alive > 0;
        let value = if valid {
            num / den
        } else {
            C64::new(f64::NAN, f64::NAN)
        };
        let std_err = if n_batches >= 2 {
            let mean = ratios.iter().sum::<C64>() / n_batches as f64;
            let var = ratios.iter().map(|r| (r - mean).norm_sqr()).sum::<f64>()
                / (n_batches - 1) as f64;
            (var / n_batches as f64).sqrt()
        } else {
            f64::NAN
        };
        out.push(MomentEstimate {
            value,
            std_err: if valid { std_err } else { f64::NAN },
            numerator_mean: if alive > 0 { num / alive as f64 } else { C64::new(0.0, 0.0) },
            denominator_mean: if alive > 0 { den / alive as f64 } else { 0.0 },
            n_batches,
            valid,
        })
    }
    Ok(out)
}

/// Weight-spread diagnostics at one recorded time.
#[derive(Clone, Copy, Debug)]
pub struct WeightDiagnostics {
    pub mean_re_omega: f64,
    pub mean_im_omega: f64,
    pub se_mean_re: f64,
    pub se_mean_im: f64,
    /// Central variances across the surviving ensemble.
    pub var_re_omega: f64,
    pub var_im_omega: f64,
    /// Raw second moments ⟨(Re Ω)²⟩, ⟨(Im Ω)²⟩ — the quantities the
    /// weight-variance growth laws are stated for.
    pub ms_re_omega: f64,
    pub ms_im_omega: f64,
    pub se_ms_re: f64,
    pub se_ms_im: f64,
    pub min_re_omega: f64,
    pub max_re_omega: f64,
    pub frac_negative_re: f64,
    pub alive: u64,
    pub diverged: u64,
}

/// Per-time weight diagnostics series.
pub fn weight_diagnostics(records: &RecordSet) -> Vec<WeightDiagnostics> {
    let mut out = Vec::with_capacity(records.times.len());
    for blocks in &records.blocks {
        let alive: u64 = blocks.iter().map(|b| b.alive).sum();
        let n = alive.max(1) as f64;
        let sum_re: f64 = blocks.iter().map(|b| b.omega_sum.re).sum();
        let sum_im: f64 = blocks.iter().map(|b| b.omega_sum.im).sum();
        let sum_re2: f64 = blocks.iter().map(|b| b.re2_sum).sum();
        let sum_im2: f64 = blocks.iter().map(|b| b.im2_sum).sum();
        let mean_re = sum_re / n;
        let mean_im = sum_im / n;
        let ms_re = sum_re2 / n;
        let ms_im = sum_im2 / n;

        let batch_means = |f: &dyn Fn(&crate::integrator::BatchBlock) -> f64| -> f64 {
            let means: Vec<f64> = blocks
                .iter()
                .filter(|b| b.alive > 0)
                .map(|b| f(b) / b.alive as f64)
                .collect();
            if means.len() < 2 {
                return f64::NAN;
            }
            let m = means.iter().sum::<f64>() / means.len() as f64;
            let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
                / (means.len() - 1) as f64;
            (var / means.len() as f64).sqrt()
        };

        out.push(WeightDiagnostics {
            mean_re_omega: mean_re,
            mean_im_omega: mean_im,
            se_mean_re: batch_means(&|b| b.omega_sum.re),
            se_mean_im: batch_means(&|b| b.omega_sum.im),
            var_re_omega: (ms_re - mean_re * mean_re).max(0.0),
            var_im_omega: (ms_im - mean_im * mean_im).max(0.0),
            ms_re_omega: ms_re,
            ms_im_omega: ms_im,
            se_ms_re: batch_means(&|b| b.re2_sum),
            se_ms_im: batch_means(&|b| b.im2_sum),
            min_re_omega: blocks.iter().map(|b| b.min_re).fold(f64::INFINITY, f64::min),
            max_re_omega: blocks
                .iter()
                .map(|b| b.max_re)
                .fold(f64::NEG_INFINITY, f64::max),
            frac_negative_re: blocks.iter().map(|b| b.neg_re).sum::<u64>() as f64 / n,
            alive,
            diverged: records.n_traj as u64 - alive,
        });
    }
    out
}

/// One point of a time series under comparison.
#[derive(Clone, Copy, Debug)]
pub struct SeriesPoint {
    pub time: f64,
    pub value: C64,
    pub std_err: f64,
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    /// (time, z) per compared point of the first series.
    pub z_scores: Vec<(f64, f64)>,
    pub max_z: f64,
    pub time_of_max: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Per-time z-scores z = |a − b| / √(σ_a² + σ_b²) between two series on a
/// common (or linearly interpolable) time grid; σ = 0 reference series are
/// allowed, with a tiny absolute floor guarding the all-deterministic case.
pub fn compare_series(
    a: &[SeriesPoint],
    b: &[SeriesPoint],
    z_threshold: f64,
) -> Result<ComparisonReport> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("cannot compare empty series".into()));
    }
    let (b_lo, b_hi) = (b[0].time, b[b.len() - 1].time);
    let span = (b_hi - b_lo).abs().max(1.0);
    let eps = 1e-9 * span;
    let mut z_scores = Vec::new();
    for pa in a {
        if pa.time < b_lo - eps || pa.time > b_hi + eps {
            continue;
        }
        let t = pa.time.clamp(b_lo, b_hi);
        let j = match b.iter().position(|p| p.time >= t - eps) {
            Some(j) => j,
            None => continue,
        };
        let pb = if j == 0 || (b[j].time - t).abs() <= eps {
            b[j]
        } else {
            let (p0, p1) = (b[j - 1], b[j]);
            let w = (t - p0.time) / (p1.time - p0.time);
            SeriesPoint {
                time: t,
                value: p0.value + (p1.value - p0.value) * w,
                std_err: p0.std_err + (p1.std_err - p0.std_err) * w,
            }
        };
        let diff = (pa.value - pb.value).norm();
        let sigma = (pa.std_err * pa.std_err + pb.std_err * pb.std_err)
            .sqrt()
            .max(Z_FLOOR);
        let z = if diff.is_finite() { diff / sigma } else { f64::INFINITY };
        z_scores.push((pa.time, z));
    }
    if z_scores.is_empty() {
        return Err(Error::Config(
            "series have disjoint time ranges; nothing to compare".into(),
        ));
    }
    let (time_of_max, max_z) = z_scores
        .iter()
        .fold((z_scores[0].0, f64::NEG_INFINITY), |acc, (t, z)| {
            if *z > acc.1 {
                (*t, *z)
            } else {
                acc
            }
        });
    Ok(ComparisonReport {
        z_scores,
        max_z,
        time_of_max,
        threshold: z_threshold,
        pass: max_z <= z_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::TrajectoryState;
    use crate::integrator::{MomentSpec, RecordSet};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn st(omega: C64, alpha: C64, beta: C64) -> TrajectoryState {
        TrajectoryState { omega, alpha: vec![alpha], beta: vec![beta], time: 0.0 }
    }

    fn snapshot(states: &[TrajectoryState]) -> RecordSet {
        RecordSet::snapshot(states, &[MomentSpec::occupation()], 2, 1.0).unwrap()
    }

    #[test]
    fn weight_one_positive_p_moment() {
        // Single state replicated into two batches: (0.5·2 + (2·0.5)*)/2 = 1.
        let s = st(c(1.0, 0.0), c(2.0, 0.0), c(0.5, 0.0));
        let rec = snapshot(&[s.clone(), s]);
        let est = &moment(&rec, 1, 1, 0).unwrap()[0];
        assert_eq!(est.value, c(1.0, 0.0));
        assert_eq!(est.std_err, 0.0);
        assert!(est.valid);
    }

    #[test]
    fn weights_cancel_for_equal_occupation() {
        let a = st(c(1.5, 0.0), c(1.0, 0.0), c(1.0, 0.0));
        let b = st(c(0.5, 0.0), c(1.0, 0.0), c(1.0, 0.0));
        let rec = snapshot(&[a, b]);
        let est = &moment(&rec, 1, 1, 0).unwrap()[0];
        assert!((est.value - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn imaginary_weights_invalidate_the_estimate() {
        let a = st(c(0.0, 1.0), c(1.0, 0.0), c(1.0, 0.0));
        let b = st(c(0.0, -0.5), c(1.0, 0.0), c(1.0, 0.0));
        let rec = snapshot(&[a, b]);
        let est = &moment(&rec, 1, 1, 0).unwrap()[0];
        assert!(!est.valid);
        assert!(est.value.re.is_nan());
    }

    #[test]
    fn unrecorded_moment_is_an_error() {
        let s = st(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0));
        let rec = snapshot(&[s.clone(), s]);
        assert!(moment(&rec, 2, 2, 0).is_err());
    }

    #[test]
    fn positive_p_reduction_when_all_weights_one() {
        // With Ω ≡ 1 the ratio reduces to the plain mean of (βⁿαᵐ + c.c.)/2.
        let states: Vec<TrajectoryState> = (0..8)
            .map(|i| {
                let x = 0.1 * i as f64;
                st(c(1.0, 0.0), c(0.5 + x, 0.2 - x), c(0.3 - x, 0.1 * x))
            })
            .collect();
        let rec = RecordSet::snapshot(&states, &[MomentSpec { n: 1, m: 2, mode: 0 }], 2, 1.0)
            .unwrap();
        let est = &moment(&rec, 1, 2, 0).unwrap()[0];
        let plain: C64 = states
            .iter()
            .map(|s| {
                let (a, b) = (s.alpha[0], s.beta[0]);
                (b * a * a + (a * b * b).conj()) / 2.0
            })
            .sum::<C64>()
            / states.len() as f64;
        assert!((est.value - plain).norm() < 1e-14);
    }

    #[test]
    fn hermiticity_by_construction() {
        let states: Vec<TrajectoryState> = (0..6)
            .map(|i| {
                let x = 0.3 * i as f64;
                st(c(1.0 - 0.1 * x, 0.2 * x), c(0.5 + x, -0.2), c(0.3, 0.4 - x))
            })
            .collect();
        let specs = [MomentSpec { n: 2, m: 1, mode: 0 }, MomentSpec { n: 1, m: 2, mode: 0 }];
        let rec = RecordSet::snapshot(&states, &specs, 2, 1.0).unwrap();
        let nm = moment(&rec, 2, 1, 0).unwrap()[0].value;
        let mn = moment(&rec, 1, 2, 0).unwrap()[0].value;
        assert_eq!(nm, mn.conj());
    }

    #[test]
    fn merged_ensemble_is_the_denominator_weighted_combination() {
        let group_a: Vec<TrajectoryState> = (0..4)
            .map(|i| st(c(1.0 + 0.2 * i as f64, 0.1), c(0.4, 0.1 * i as f64), c(0.2, -0.1)))
            .collect();
        let group_b: Vec<TrajectoryState> = (0..4)
            .map(|i| st(c(0.7, -0.2 * i as f64), c(-0.3, 0.2), c(0.5 * i as f64, 0.3)))
            .collect();
        let merged: Vec<TrajectoryState> =
            group_a.iter().chain(&group_b).cloned().collect();
        let num_den = |states: &[TrajectoryState]| {
            let rec = snapshot(states);
            let est = &moment(&rec, 1, 1, 0).unwrap()[0];
            let alive = states.len() as f64;
            (est.numerator_mean * alive, est.denominator_mean * alive)
        };
        let (na, da) = num_den(&group_a);
        let (nb, db) = num_den(&group_b);
        let rec = snapshot(&merged);
        let est = &moment(&rec, 1, 1, 0).unwrap()[0];
        let expect = (na + nb) / (da + db);
        assert!((est.value - expect).norm() < 1e-13 * (1.0 + expect.norm()));
    }

    #[test]
    fn reordering_and_rebatching_change_error_bars_not_values() {
        let states: Vec<TrajectoryState> = (0..12)
            .map(|i| {
                let x = i as f64;
                st(c(1.0 + 0.01 * x, 0.02 * x), c(0.5 + 0.1 * x, -0.3), c(0.4, 0.05 * x))
            })
            .collect();
        let rec1 = RecordSet::snapshot(&states, &[MomentSpec::occupation()], 3, 1.0).unwrap();
        let mut shuffled = states.clone();
        shuffled.swap(0, 11);
        shuffled.swap(3, 7);
        shuffled.swap(2, 9);
        let rec2 = RecordSet::snapshot(&shuffled, &[MomentSpec::occupation()], 3, 1.0).unwrap();
        let e1 = &moment(&rec1, 1, 1, 0).unwrap()[0];
        let e2 = &moment(&rec2, 1, 1, 0).unwrap()[0];
        assert!((e1.value - e2.value).norm() <= 1e-12 * (1.0 + e1.value.norm()));
        // A different batch split also leaves the value alone.
        let rec4 = RecordSet::snapshot(&states, &[MomentSpec::occupation()], 4, 1.0).unwrap();
        let e4 = &moment(&rec4, 1, 1, 0).unwrap()[0];
        assert!((e1.value - e4.value).norm() <= 1e-12 * (1.0 + e1.value.norm()));
    }

    #[test]
    fn diagnostics_of_unit_weights() {
        let s = st(c(1.0, 0.0), c(0.3, 0.0), c(0.3, 0.0));
        let rec = snapshot(&[s.clone(), s]);
        let d = &weight_diagnostics(&rec)[0];
        assert_eq!(d.mean_re_omega, 1.0);
        assert_eq!(d.var_re_omega, 0.0);
        assert_eq!(d.var_im_omega, 0.0);
        assert_eq!(d.frac_negative_re, 0.0);
        assert_eq!(d.min_re_omega, 1.0);
        assert_eq!(d.max_re_omega, 1.0);
    }

    #[test]
    fn identical_series_compare_at_zero() {
        let s: Vec<SeriesPoint> = (0..5)
            .map(|i| SeriesPoint {
                time: i as f64,
                value: c(0.5 + i as f64, 0.0),
                std_err: 0.01,
            })
            .collect();
        let rep = compare_series(&s, &s, 3.0).unwrap();
        assert_eq!(rep.max_z, 0.0);
        assert!(rep.pass);
    }

    #[test]
    fn interpolation_and_disjoint_ranges() {
        let a = vec![SeriesPoint { time: 0.5, value: c(1.5, 0.0), std_err: 0.0 }];
        let b: Vec<SeriesPoint> = (0..3)
            .map(|i| SeriesPoint { time: i as f64, value: c(1.0 + i as f64, 0.0), std_err: 0.0 })
            .collect();
        // Linear interpolation of b at t = 0.5 gives exactly 1.5.
        let rep = compare_series(&a, &b, 3.0).unwrap();
        assert!(rep.max_z < 1e-6);
        let far = vec![SeriesPoint { time: 99.0, value: c(0.0, 0.0), std_err: 0.0 }];
        assert!(compare_series(&far, &b, 3.0).is_err());
    }
}
