//! Built-in master-equation systems.
//!
//! Each model supplies its positive-P drift in both Ito and Stratonovich form,
//! the canonical noise matrix B⁽⁺⁾ with B⁽⁺⁾B⁽⁺⁾ᵀ equal to the analytic
//! diffusion matrix, and a potential term (identically zero for the three
//! shipped trace-preserving systems). Drift layout: indices 0..M are the α
//! rows, M..2M the β rows. Closed-form single-variable reductions live here
//! too; they are test and analysis surfaces, production runs always evolve
//! the full (Ω, α, β) system.

use crate::ensemble::C64;
use crate::error::{Error, Result};

/// A master-equation system in doubled phase space.
pub trait Model: Sync {
    fn id(&self) -> &str;

    fn mode_count(&self) -> usize {
        1
    }

    /// Number of real noises W driving the canonical noise matrix (2M × W).
    fn noise_count(&self) -> usize {
        2
    }

    /// Figure-axis time per unit of native time (the two-boson absorber
    /// literature plots τ = 2t).
    fn time_scale(&self) -> f64 {
        1.0
    }

    /// Ito drift A⁽⁺⁾ into `out` (length 2M).
    fn ito_drift(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]);

    /// Stratonovich drift into `out` (length 2M).
    fn strat_drift(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]);

    /// Canonical noise matrix B⁽⁺⁾ (2M × W, row-major) into `out`.
    fn noise_matrix(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]);

    /// Potential term V; zero for all shipped models.
    fn potential(&self, _alpha: &[C64], _beta: &[C64]) -> C64 {
        C64::new(0.0, 0.0)
    }

    /// Analytic diffusion matrix D = B⁽⁺⁾B⁽⁺⁾ᵀ (2M × 2M, row-major), used to
    /// validate noise factorizations.
    fn diffusion_matrix(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]);
}

/// Parameters of the driven one- and two-boson absorber. Time is scaled so the
/// two-boson loss rate is unity; `gamma` is the scaled one-boson loss and
/// `epsilon` the scaled coherent driving amplitude.
#[derive(Clone, Copy, Debug)]
pub struct AbsorberParams {
    pub gamma: f64,
    pub epsilon: C64,
}

/// Driven one- and two-boson absorber.
///
/// Stratonovich form: dα = [ε − α(αβ + (γ−1)/2)]dt + iα dW,
/// dβ = [ε* − β(αβ + (γ−1)/2)]dt + iβ dW̄, with two independent real noises.
/// The equivalent Ito drift replaces (γ−1)/2 by γ/2 (correction −α/2 from
/// B = diag(iα, iβ)).
#[derive(Clone, Copy, Debug)]
pub struct AbsorberModel {
    pub params: AbsorberParams,
}

pub fn absorber_model(params: AbsorberParams) -> Result<AbsorberModel> {
    if !(params.gamma >= 0.0) {
        return Err(Error::Config(format!(
            "absorber gamma must be non-negative, got {}",
            params.gamma
        )));
    }
    if !params.epsilon.re.is_finite() || !params.epsilon.im.is_finite() {
        return Err(Error::Config("absorber epsilon must be finite".into()));
    }
    Ok(AbsorberModel { params })
}

impl Model for AbsorberModel {
    fn id(&self) -> &str {
        "absorber"
    }

    fn time_scale(&self) -> f64 {
        2.0
    }

    fn ito_drift(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
        let (a, b) = (alpha[0], beta[0]);
        let n = a * b;
        let eps = self.params.epsilon;
        let shift = 0.5 * self.params.gamma;
        out[0] = eps - a * (n + shift);
        out[1] = eps.conj() - b * (n + shift);
    }

    fn strat_drift(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
        let (a, b) = (alpha[0], beta[0]);
        let n = a * b;
        let eps = self.params.epsilon;
        let shift = 0.5 * (self.params.gamma - 1.0);
        out[0] = eps - a * (n + shift);
        out[1] = eps.conj() - b * (n + shift);
    }

    fn noise_matrix(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
        let i = C64::new(0.0, 1.0);
        out[0] = i * alpha[0];
        out[1] = C64::new(0.0, 0.0);
        out[2] = C64::new(0.0, 0.0);
        out[3] = i * beta[0];
    }

    fn diffusion_matrix(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
        out[0] = -(alpha[0] * alpha[0]);
        out[1] = C64::new(0.0, 0.0);
        out[2] = C64::new(0.0, 0.0);
        out[3] = -(beta[0] * beta[0]);
    }
}

/// Stratonovich drift of the closed two-boson-absorber equation for n = αβ in
/// τ = 2t units: dn = −n(n + i·g̃ − 1/2) dτ (+ i n dW⁺ handled by the
/// integrator). Valid in the γ = ε = 0 regime.
pub fn absorber_n_closed(n: C64, g_tilde: C64) -> C64 {
    let i = C64::new(0.0, 1.0);
    -n * (n + i * g_tilde - 0.5)
}

/// Parameters of the single-mode laser model: gain G, noise parameter Q, and
/// the informational scaling parameter 𝒩 which, when supplied, enforces
/// Q ≥ G/𝒩.
#[derive(Clone, Copy, Debug)]
pub struct LaserParams {
    pub gain: f64,
    pub noise: f64,
    pub n_scale: Option<f64>,
}

/// Single-mode laser in scaled variables. Ito equations:
/// dα̃ = (G − α̃β̃)α̃ dτ + √Q dη, dβ̃ = (G − α̃β̃)β̃ dτ + √Q dη*, with the
/// complex noise dη = dW₁ + i dW₂ realized as two real noises so that
/// ⟨dη dη*⟩ = 2dτ. The noise matrix is constant, so the Stratonovich drift
/// coincides with the Ito drift.
#[derive(Clone, Copy, Debug)]
pub struct LaserModel {
    pub params: LaserParams,
}

pub fn laser_model(params: LaserParams) -> Result<LaserModel> {
    if !(params.gain > 0.0) || !(params.noise > 0.0) {
        return Err(Error::Config(format!(
            "laser G and Q must be positive, got G={}, Q={}",
            params.gain, params.noise
        )));
    }
    if let Some(ns) = params.n_scale {
        if !(ns >= 1.0) {
            return Err(Error::Config(format!(
                "laser N_scale must be at least 1, got {ns}"
            )));
        }
        if params.noise < params.gain / ns {
            return Err(Error::Config(format!(
                "laser noise parameter must satisfy Q >= G/N_scale ({} < {})",
                params.noise,
                params.gain / ns
            )));
        }
    }
    Ok(LaserModel { params })
}

impl Model for LaserModel {
    fn id(&self) -> &str {
        "laser"
    }

    fn ito_drift(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
        let (a, b) = (alpha[0], beta[0]);
        let gain = self.params.gain - a * b;
        out[0] = gain * a;
        out[1] = gain * b;
    }

    fn strat_drift(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
        self.ito_drift(alpha, beta, out);
    }

    fn noise_matrix(&self, _alpha: &[C64], _beta: &[C64], out: &mut [C64]) {
        let sq = self.params.noise.sqrt();
        out[0] = C64::new(sq, 0.0);
        out[1] = C64::new(0.0, sq);
        out[2] = C64::new(sq, 0.0);
        out[3] = C64::new(0.0, -sq);
    }

    fn diffusion_matrix(&self, _alpha: &[C64], _beta: &[C64], out: &mut [C64]) {
        let q2 = C64::new(2.0 * self.params.noise, 0.0);
        out[0] = C64::new(0.0, 0.0);
        out[1] = q2;
        out[2] = q2;
        out[3] = C64::new(0.0, 0.0);
    }
}

/// Deterministic stationary points (Stratonovich calculus) of the laser's
/// closed ñ equation: a = (G + √(G²+2Q))/2 is the attractor,
/// b = (G − √(G²+2Q))/2 the repellor.
pub fn laser_stationary(gain: f64, noise: f64) -> (f64, f64) {
    let root = (gain * gain + 2.0 * noise).sqrt();
    (0.5 * (gain + root), 0.5 * (gain - root))
}

/// Stratonovich drift of the closed laser equation for ñ = α̃β̃ with gauge g̃:
/// dñ = [2ñ(G − ñ − g̃) + Q] dτ (+ 2√(Qñ) dW handled separately). Equal to
/// −2(ñ−a)(ñ−b) when g̃ = 0.
pub fn laser_n_closed(n: C64, gain: f64, noise: f64, g_tilde: C64) -> C64 {
    2.0 * n * (gain - n - g_tilde) + noise
}

/// Kerr oscillator parameters: linear frequency ω₀ and nonlinearity κ.
#[derive(Clone, Copy, Debug)]
pub struct KerrParams {
    pub omega0: f64,
    pub kappa: f64,
}

/// Kerr (anharmonic) oscillator, H = ω₀ â†â + κ â†²â²/2, unitary evolution.
///
/// Ito drift dα = −iα(ω₀ + κ αβ) dt, dβ = +iβ(ω₀ + κ αβ) dt; diffusion
/// D = iκ diag(−α², β²) with canonical factor B⁽⁺⁾ = √(iκ) diag(iα, β).
#[derive(Clone, Copy, Debug)]
pub struct KerrModel {
    pub params: KerrParams,
    sqrt_ikappa: C64,
}

pub fn kerr_model(params: KerrParams) -> Result<KerrModel> {
    if !params.omega0.is_finite() || !params.kappa.is_finite() {
        return Err(Error::Config("kerr parameters must be finite".into()));
    }
    Ok(KerrModel {
        params,
        sqrt_ikappa: (C64::new(0.0, 1.0) * params.kappa).sqrt(),
    })
}

impl Model for KerrModel {
    fn id(&self) -> &str {
        "kerr"
    }

    fn ito_drift(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
        let (a, b) = (alpha[0], beta[0]);
        let i = C64::new(0.0, 1.0);
        let rot = self.params.omega0 + self.params.kappa * a * b;
        out[0] = -i * a * rot;
        out[1] = i * b * rot;
    }

    fn strat_drift(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
        let (a, b) = (alpha[0], beta[0]);
        let i = C64::new(0.0, 1.0);
        let rot = self.params.omega0 + self.params.kappa * a * b - 0.5 * self.params.kappa;
        out[0] = -i * a * rot;
        out[1] = i * b * rot;
    }

    fn noise_matrix(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
        let i = C64::new(0.0, 1.0);
        out[0] = self.sqrt_ikappa * i * alpha[0];
        out[1] = C64::new(0.0, 0.0);
        out[2] = C64::new(0.0, 0.0);
        out[3] = self.sqrt_ikappa * beta[0];
    }

    fn diffusion_matrix(&self, alpha: &[C64], beta: &[C64], out: &mut [C64]) {
        let ik = C64::new(0.0, self.params.kappa);
        out[0] = -ik * alpha[0] * alpha[0];
        out[1] = C64::new(0.0, 0.0);
        out[2] = C64::new(0.0, 0.0);
        out[3] = ik * beta[0] * beta[0];
    }
}

/// Inert single-mode system: zero drift and zero noise on (α, β), with a
/// configurable noise count so drift gauges can feed the weight alone. Used by
/// the weight-variance diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct StaticModel {
    pub noises: usize,
}

impl Model for StaticModel {
    fn id(&self) -> &str {
        "static"
    }

    fn noise_count(&self) -> usize {
        self.noises
    }

    fn ito_drift(&self, _alpha: &[C64], _beta: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
    }

    fn strat_drift(&self, _alpha: &[C64], _beta: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
    }

    fn noise_matrix(&self, _alpha: &[C64], _beta: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
    }

    fn diffusion_matrix(&self, _alpha: &[C64], _beta: &[C64], out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn check_noise_factors_diffusion<M: Model>(model: &M, pts: &[(C64, C64)]) {
        let (m2, w) = (2 * model.mode_count(), model.noise_count());
        let mut b = vec![c(0.0, 0.0); m2 * w];
        let mut d = vec![c(0.0, 0.0); m2 * m2];
        for (a, be) in pts {
            model.noise_matrix(&[*a], &[*be], &mut b);
            model.diffusion_matrix(&[*a], &[*be], &mut d);
            let scale = d.iter().map(|z| z.norm()).fold(1e-30, f64::max);
            for i in 0..m2 {
                for j in 0..m2 {
                    let mut bbt = c(0.0, 0.0);
                    for k in 0..w {
                        bbt += b[i * w + k] * b[j * w + k];
                    }
                    assert!(
                        (bbt - d[i * m2 + j]).norm() <= 1e-12 * scale,
                        "BBᵀ ≠ D at ({a}, {be}) entry ({i},{j})"
                    );
                }
            }
        }
    }

    fn probe_points() -> Vec<(C64, C64)> {
        vec![
            (c(0.7, 0.0), c(0.7, 0.0)),
            (c(1.3, -0.4), c(0.2, 0.9)),
            (c(-0.5, 0.1), c(-0.6, -0.8)),
            (c(10.0, 0.0), c(10.0, 0.0)),
        ]
    }

    #[test]
    fn absorber_noise_factors_diffusion() {
        let m = absorber_model(AbsorberParams { gamma: 0.3, epsilon: c(0.05, 0.0) }).unwrap();
        check_noise_factors_diffusion(&m, &probe_points());
    }

    #[test]
    fn laser_noise_factors_diffusion() {
        let m = laser_model(LaserParams { gain: 1.0, noise: 0.25, n_scale: None }).unwrap();
        check_noise_factors_diffusion(&m, &probe_points());
    }

    #[test]
    fn kerr_noise_factors_diffusion() {
        let m = kerr_model(KerrParams { omega0: 0.7, kappa: 1.3 }).unwrap();
        check_noise_factors_diffusion(&m, &probe_points());
    }

    #[test]
    fn absorber_stationary_point_at_half() {
        // γ = ε = 0, n = 1/2 is the deterministic attractor of the closed
        // equation: drift vanishes.
        let n = c(0.5, 0.0);
        assert_eq!(absorber_n_closed(n, c(0.0, 0.0)), c(0.0, 0.0));
        // n = 0 is a fixed point for any gauge.
        assert_eq!(absorber_n_closed(c(0.0, 0.0), c(3.0, -1.0)), c(0.0, 0.0));
    }

    #[test]
    fn absorber_negative_axis_escape_direction() {
        // Ungauged drift at n = −1 pushes further out along the negative axis.
        let d = absorber_n_closed(c(-1.0, 0.0), c(0.0, 0.0));
        assert!((d.re - -1.5).abs() < 1e-15 && d.im == 0.0, "drift = {d}");
    }

    #[test]
    fn absorber_circular_gauge_restores() {
        // g̃ = i(n − |n|) turns the closed drift into −n(|n| − 1/2).
        let n = c(-1.0, 0.0);
        let g = C64::new(0.0, 1.0) * (n - n.norm());
        assert_eq!(g, c(0.0, -2.0));
        let d = absorber_n_closed(n, g);
        assert!((d - c(0.5, 0.0)).norm() < 1e-15, "drift = {d}");
    }

    #[test]
    fn absorber_model_and_closed_equation_agree() {
        // Dual route: dn/dτ from the (α, β) Stratonovich drifts equals the
        // closed-form drift at γ = ε = 0 (dτ = 2 dt).
        let m = absorber_model(AbsorberParams { gamma: 0.0, epsilon: c(0.0, 0.0) }).unwrap();
        let mut out = [c(0.0, 0.0); 2];
        for (a, b) in probe_points() {
            m.strat_drift(&[a], &[b], &mut out);
            let dn_dt = b * out[0] + a * out[1];
            let closed = absorber_n_closed(a * b, c(0.0, 0.0));
            assert!((dn_dt - 2.0 * closed).norm() < 1e-12 * (1.0 + closed.norm()));
        }
    }

    #[test]
    fn absorber_pure_driving_at_origin() {
        let m = absorber_model(AbsorberParams { gamma: 0.0, epsilon: c(0.05, 0.0) }).unwrap();
        let mut out = [c(0.0, 0.0); 2];
        m.ito_drift(&[c(0.0, 0.0)], &[c(0.0, 0.0)], &mut out);
        assert_eq!(out[0], c(0.05, 0.0));
        assert_eq!(out[1], c(0.05, 0.0));
    }

    #[test]
    fn absorber_ito_strat_offset() {
        // Ito drift = Stratonovich drift − α/2 (correction from B = diag(iα, iβ)).
        let m = absorber_model(AbsorberParams { gamma: 0.7, epsilon: c(0.02, -0.01) }).unwrap();
        let mut ito = [c(0.0, 0.0); 2];
        let mut strat = [c(0.0, 0.0); 2];
        for (a, b) in probe_points() {
            m.ito_drift(&[a], &[b], &mut ito);
            m.strat_drift(&[a], &[b], &mut strat);
            assert!((ito[0] - (strat[0] - 0.5 * a)).norm() < 1e-14 * (1.0 + a.norm()));
            assert!((ito[1] - (strat[1] - 0.5 * b)).norm() < 1e-14 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn laser_stationary_points() {
        let (a, b) = laser_stationary(1.0, 0.25);
        assert!((a - 1.1124).abs() < 5e-5, "a = {a}");
        assert!((b - -0.1124).abs() < 5e-5, "b = {b}");
        // Noiseless limit.
        let (a0, b0) = laser_stationary(2.0, 1e-300);
        assert!((a0 - 2.0).abs() < 1e-12 && b0.abs() < 1e-12);
        // Pure-noise case.
        let (a1, b1) = laser_stationary(1e-300, 0.5);
        assert!((a1 - 0.5).abs() < 1e-12 && (b1 - -0.5).abs() < 1e-12);
        // Product of the roots of ñ² − Gñ − Q/2.
        for (g, q) in [(1.0, 0.25), (0.3, 2.0), (5.0, 0.01)] {
            let (a, b) = laser_stationary(g, q);
            assert!((a * b - -q / 2.0).abs() < 1e-12 * (1.0 + q));
            assert!(a > 0.0 && b < 0.0);
        }
    }

    #[test]
    fn laser_singular_direction_grows() {
        // At ñ = b − 0.1 the displacement Δ = b − ñ grows: the escape route.
        let (gain, noise) = (1.0, 0.25);
        let (_, b) = laser_stationary(gain, noise);
        let n = c(b - 0.1, 0.0);
        let d_delta = -laser_n_closed(n, gain, noise, c(0.0, 0.0));
        assert!((d_delta.re - 0.2649490).abs() < 1e-6, "dΔ/dτ = {d_delta}");
        assert!(d_delta.re > 0.0);
    }

    #[test]
    fn laser_closed_equation_factorized_form() {
        let (gain, noise) = (1.0, 0.25);
        let (a, b) = laser_stationary(gain, noise);
        for n in [c(0.3, 0.2), c(-0.4, 0.0), c(1.5, -1.0)] {
            let lhs = laser_n_closed(n, gain, noise, c(0.0, 0.0));
            let rhs = -2.0 * (n - a) * (n - b);
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn laser_param_validation() {
        assert!(laser_model(LaserParams { gain: 0.0, noise: 0.25, n_scale: None }).is_err());
        assert!(laser_model(LaserParams { gain: 1.0, noise: -1.0, n_scale: None }).is_err());
        // Q >= G/N_scale enforced when the scale is supplied.
        assert!(laser_model(LaserParams { gain: 1.0, noise: 1e-4, n_scale: Some(100.0) }).is_err());
        assert!(laser_model(LaserParams { gain: 1.0, noise: 0.01, n_scale: Some(100.0) }).is_ok());
    }

    #[test]
    fn kerr_zero_nonlinearity_is_pure_rotation() {
        let m = kerr_model(KerrParams { omega0: 2.0, kappa: 0.0 }).unwrap();
        let mut b = [c(0.0, 0.0); 4];
        m.noise_matrix(&[c(1.0, 0.5)], &[c(0.3, 0.0)], &mut b);
        assert!(b.iter().all(|z| z.norm() == 0.0));
        let mut drift = [c(0.0, 0.0); 2];
        let a = c(1.0, 0.5);
        m.ito_drift(&[a], &[a.conj()], &mut drift);
        assert!((drift[0] - c(0.0, -2.0) * a).norm() < 1e-15);
    }

    #[test]
    fn kerr_ito_strat_offset() {
        let m = kerr_model(KerrParams { omega0: 0.3, kappa: 0.9 }).unwrap();
        let mut ito = [c(0.0, 0.0); 2];
        let mut strat = [c(0.0, 0.0); 2];
        let i = c(0.0, 1.0);
        for (a, b) in probe_points() {
            m.ito_drift(&[a], &[b], &mut ito);
            m.strat_drift(&[a], &[b], &mut strat);
            let corr_a = i * a * (0.5 * 0.9);
            let corr_b = -i * b * (0.5 * 0.9);
            assert!((ito[0] - (strat[0] - corr_a)).norm() < 1e-13 * (1.0 + a.norm()));
            assert!((ito[1] - (strat[1] - corr_b)).norm() < 1e-13 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn shipped_models_have_zero_potential() {
        let ab = absorber_model(AbsorberParams { gamma: 0.1, epsilon: c(0.05, 0.0) }).unwrap();
        let la = laser_model(LaserParams { gain: 1.0, noise: 0.25, n_scale: None }).unwrap();
        let ke = kerr_model(KerrParams { omega0: 1.0, kappa: 1.0 }).unwrap();
        for (a, b) in probe_points() {
            assert_eq!(ab.potential(&[a], &[b]), c(0.0, 0.0));
            assert_eq!(la.potential(&[a], &[b]), c(0.0, 0.0));
            assert_eq!(ke.potential(&[a], &[b]), c(0.0, 0.0));
        }
    }
}
