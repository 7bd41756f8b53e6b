//! Drift-gauge and diffusion-gauge machinery.
//!
//! A drift gauge is an arbitrary complex vector function g⃗ of the full state;
//! it shifts the phase-space drift by −g_k B_jk and feeds Ω g_k dW_k into the
//! weight, leaving every quantum expectation invariant. A diffusion gauge is a
//! complex-orthogonal rotation (plus optional off-square block) of the noise
//! matrix that leaves BBᵀ invariant, changing sampling error only.

use crate::ensemble::{C64, TrajectoryState};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::models::Model;

/// Arbitrary complex drift-gauge functions g_k(Ω, α⃗, β⃗, t), one per noise.
pub trait DriftGauge: Sync {
    fn id(&self) -> &str;

    /// True only for the exact zero gauge; lets the integrator skip the gauge
    /// arithmetic entirely so the positive-P reduction is bit-exact.
    fn is_zero(&self) -> bool {
        false
    }

    /// Writes g⃗ (length W) into `out`.
    fn eval(&self, omega: C64, alpha: &[C64], beta: &[C64], t: f64, out: &mut [C64]);

    /// Whether an analytic full-system Stratonovich weight correction is
    /// available. Gauges without one are restricted to the Ito scheme:
    /// non-analytic gauges cannot be finite-differenced across the complex
    /// plane, so corrections are only accepted in closed form.
    fn has_strat_correction(&self) -> bool {
        false
    }

    /// Gauge part of the Stratonovich drift of Ω per unit native time (the
    /// Ω·V potential term is added by the system). Must cover both the
    /// −½Ω Σ g_k² term and any state-derivative cross terms.
    fn strat_omega_drift(&self, _omega: C64, _alpha: &[C64], _beta: &[C64], _t: f64) -> C64 {
        C64::new(0.0, 0.0)
    }

    /// Model ids this gauge is derived for; `None` means any.
    fn compatible_models(&self) -> Option<&'static [&'static str]> {
        None
    }

    /// Noise count the gauge vector is defined for; `None` means any.
    fn noise_len(&self) -> Option<usize> {
        None
    }
}

/// g ≡ 0: the positive-P limit.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroGauge;

impl DriftGauge for ZeroGauge {
    fn id(&self) -> &str {
        "none"
    }

    fn is_zero(&self) -> bool {
        true
    }

    fn eval(&self, _omega: C64, _alpha: &[C64], _beta: &[C64], _t: f64, out: &mut [C64]) {
        out.fill(C64::new(0.0, 0.0));
    }

    fn has_strat_correction(&self) -> bool {
        true
    }
}

/// The circular gauge for two-boson absorber nonlinearities:
/// g₁ = g₂ = g̃ = i(n − |n|) with n = αβ. Replaces the repulsive −n² term in
/// the closed n equation by the restoring −n|n| and carries the analytic
/// Stratonovich weight drift Ω[n + (n − |n|)²] per unit native time, valid in
/// the driven case as well.
#[derive(Clone, Copy, Debug, Default)]
pub struct CircularGauge;

impl CircularGauge {
    #[inline]
    pub fn g_tilde(n: C64) -> C64 {
        C64::new(0.0, 1.0) * (n - n.norm())
    }
}

impl DriftGauge for CircularGauge {
    fn id(&self) -> &str {
        "circular"
    }

    fn eval(&self, _omega: C64, alpha: &[C64], beta: &[C64], _t: f64, out: &mut [C64]) {
        let g = Self::g_tilde(alpha[0] * beta[0]);
        out[0] = g;
        out[1] = g;
    }

    fn has_strat_correction(&self) -> bool {
        true
    }

    fn strat_omega_drift(&self, omega: C64, alpha: &[C64], beta: &[C64], _t: f64) -> C64 {
        let n = alpha[0] * beta[0];
        let d = n - n.norm();
        omega * (n + d * d)
    }

    fn compatible_models(&self) -> Option<&'static [&'static str]> {
        Some(&["absorber"])
    }

    fn noise_len(&self) -> Option<usize> {
        Some(2)
    }
}

/// Piecewise laser gauge g̃ = −λ·Re[ñ] for Re[ñ] < 0 (zero otherwise), mapped
/// onto the two real noises by g = (α̃+β̃)g̃/(2√Q), ḡ = (α̃−β̃)g̃/(2i√Q).
///
/// λ ≥ 1 removes the moving singularity; λ > 1 + G²/2Q also removes every
/// stationary point of the gauged region. λ < 1 is accepted but flagged as
/// known-unsafe so the documented failure runs stay reproducible.
///
/// The reduced-system correction [`LaserGauge::reduced_s_theta`] applies to
/// the closed (ñ, ln Ω) pair driven by a single noise; it is not the weight
/// correction of the full two-noise (α̃, β̃, Ω) system, so this gauge carries
/// no Stratonovich correction and full-system runs use the Ito scheme.
#[derive(Clone, Copy, Debug)]
pub struct LaserGauge {
    pub lambda: f64,
    /// The model's noise parameter Q, needed by the transformed gauge vector.
    pub noise_q: f64,
}

impl LaserGauge {
    pub fn new(lambda: f64, noise_q: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Config(format!(
                "laser gauge lambda must be positive, got {lambda}"
            )));
        }
        if !(noise_q > 0.0) {
            return Err(Error::Config(format!(
                "laser gauge needs the model's Q > 0, got {noise_q}"
            )));
        }
        Ok(LaserGauge { lambda, noise_q })
    }

    /// True when λ < 1: the moving singularity survives this choice.
    pub fn known_unsafe(&self) -> bool {
        self.lambda < 1.0
    }

    #[inline]
    pub fn g_tilde(&self, n: C64) -> C64 {
        if n.re < 0.0 {
            C64::new(-self.lambda * n.re, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// Analytic Stratonovich correction S_Θ for the closed (ñ, Θ = ln Ω)
    /// single-noise system: λ(Re[ñ] + ñ + |ñ|)/2 when Re[ñ] < 0, else 0.
    pub fn reduced_s_theta(&self, n: C64) -> C64 {
        if n.re < 0.0 {
            0.5 * self.lambda * (C64::new(n.re, 0.0) + n + n.norm())
        } else {
            C64::new(0.0, 0.0)
        }
    }
}

/// All stationary points inside the gauged region are removed for
/// λ > 1 + G²/(2Q).
pub fn safe_lambda_threshold(gain: f64, noise: f64) -> f64 {
    1.0 + gain * gain / (2.0 * noise)
}

impl DriftGauge for LaserGauge {
    fn id(&self) -> &str {
        "laser"
    }

    fn eval(&self, _omega: C64, alpha: &[C64], beta: &[C64], _t: f64, out: &mut [C64]) {
        let (a, b) = (alpha[0], beta[0]);
        let gt = self.g_tilde(a * b);
        let denom = 2.0 * self.noise_q.sqrt();
        out[0] = (a + b) * gt / denom;
        // 1/(2i√Q) = −i/(2√Q)
        out[1] = C64::new(0.0, -1.0) * (a - b) * gt / denom;
    }

    fn compatible_models(&self) -> Option<&'static [&'static str]> {
        Some(&["laser"])
    }

    fn noise_len(&self) -> Option<usize> {
        Some(2)
    }
}

/// Constant gauge vector; autonomous, so its full-system Stratonovich weight
/// correction is exactly −½ Ω Σ g_k². Drives the weight-variance diagnostics.
#[derive(Clone, Debug)]
pub struct ConstGauge {
    pub g: Vec<C64>,
}

impl DriftGauge for ConstGauge {
    fn id(&self) -> &str {
        "const"
    }

    fn eval(&self, _omega: C64, _alpha: &[C64], _beta: &[C64], _t: f64, out: &mut [C64]) {
        out.copy_from_slice(&self.g);
    }

    fn has_strat_correction(&self) -> bool {
        true
    }

    fn strat_omega_drift(&self, omega: C64, _alpha: &[C64], _beta: &[C64], _t: f64) -> C64 {
        let sum: C64 = self.g.iter().map(|g| g * g).sum();
        -0.5 * omega * sum
    }

    fn noise_len(&self) -> Option<usize> {
        Some(self.g.len())
    }
}

/// Norm-preserving gauge g_k = iΩ* f_k with real constant f_k, satisfying
/// Ω′g′_k = Ω″g″_k so Re[dΩ] ≡ 0 along every trajectory. Ito scheme only.
#[derive(Clone, Debug)]
pub struct NormPreservingGauge {
    pub f: Vec<f64>,
}

impl DriftGauge for NormPreservingGauge {
    fn id(&self) -> &str {
        "norm-preserving"
    }

    fn eval(&self, omega: C64, _alpha: &[C64], _beta: &[C64], _t: f64, out: &mut [C64]) {
        let base = C64::new(0.0, 1.0) * omega.conj();
        for (o, f) in out.iter_mut().zip(&self.f) {
            *o = base * *f;
        }
    }

    fn noise_len(&self) -> Option<usize> {
        Some(self.f.len())
    }
}

/// The extended (Ω, α⃗, β⃗) system produced by attaching a drift gauge to a
/// model: drift A₀ = ΩV, A_j = A⁽⁺⁾_j − g_k B_jk, noise matrix
/// [[Ω g⃗], [B]] over the model's W real noises.
#[derive(Clone, Debug)]
pub struct GaugedSystem<M: Model, G: DriftGauge> {
    pub model: M,
    pub gauge: G,
}

pub fn apply_drift_gauge<M: Model, G: DriftGauge>(model: M, gauge: G) -> Result<GaugedSystem<M, G>> {
    if let Some(models) = gauge.compatible_models() {
        if !models.contains(&model.id()) {
            return Err(Error::Config(format!(
                "gauge '{}' is derived for models {:?}, not '{}'",
                gauge.id(),
                models,
                model.id()
            )));
        }
    }
    if let Some(w) = gauge.noise_len() {
        if w != model.noise_count() {
            return Err(Error::Dimension(format!(
                "gauge '{}' supplies {} noise components, model '{}' has {}",
                gauge.id(),
                w,
                model.id(),
                model.noise_count()
            )));
        }
    }
    Ok(GaugedSystem { model, gauge })
}

impl<M: Model, G: DriftGauge> GaugedSystem<M, G> {
    /// Extended state dimension 2M + 1.
    pub fn dim(&self) -> usize {
        2 * self.model.mode_count() + 1
    }

    pub fn noise_count(&self) -> usize {
        self.model.noise_count()
    }

    /// Extended drift in the chosen calculus. `scratch_b` holds the 2M×W
    /// noise matrix and `scratch_g` the gauge vector; both are caller-owned so
    /// stepping never allocates.
    pub fn drift(
        &self,
        stratonovich: bool,
        state: &[C64],
        t: f64,
        out: &mut [C64],
        scratch_b: &mut [C64],
        scratch_g: &mut [C64],
    ) {
        let m = self.model.mode_count();
        let w = self.model.noise_count();
        let omega = state[0];
        let (alpha, beta) = (&state[1..1 + m], &state[1 + m..1 + 2 * m]);
        if stratonovich {
            self.model.strat_drift(alpha, beta, &mut out[1..]);
        } else {
            self.model.ito_drift(alpha, beta, &mut out[1..]);
        }
        let v = self.model.potential(alpha, beta);
        out[0] = omega * v;
        if self.gauge.is_zero() {
            return;
        }
        self.gauge.eval(omega, alpha, beta, t, scratch_g);
        self.model.noise_matrix(alpha, beta, scratch_b);
        for j in 0..2 * m {
            let mut shift = C64::new(0.0, 0.0);
            for k in 0..w {
                shift += scratch_g[k] * scratch_b[j * w + k];
            }
            out[1 + j] -= shift;
        }
        if stratonovich {
            out[0] += self.gauge.strat_omega_drift(omega, alpha, beta, t);
        }
    }

    /// Adds `scale` × B̲·ΔW to `out` given pre-scaled ΔW (variance dt per
    /// component), evaluating the noise matrix at `state`. The midpoint
    /// scheme passes scale = 1/2 for its interior iterations.
    pub fn add_noise(
        &self,
        state: &[C64],
        t: f64,
        dw: &[f64],
        scale: f64,
        out: &mut [C64],
        scratch_b: &mut [C64],
        scratch_g: &mut [C64],
    ) {
        let m = self.model.mode_count();
        let w = self.model.noise_count();
        let omega = state[0];
        let (alpha, beta) = (&state[1..1 + m], &state[1 + m..1 + 2 * m]);
        self.model.noise_matrix(alpha, beta, scratch_b);
        for j in 0..2 * m {
            let mut inc = C64::new(0.0, 0.0);
            for k in 0..w {
                inc += scratch_b[j * w + k] * dw[k];
            }
            out[1 + j] += inc * scale;
        }
        if !self.gauge.is_zero() {
            self.gauge.eval(omega, alpha, beta, t, scratch_g);
            let mut inc = C64::new(0.0, 0.0);
            for k in 0..w {
                inc += scratch_g[k] * dw[k];
            }
            out[0] += omega * inc * scale;
        }
    }

    /// Whether the Stratonovich scheme may be used with this gauge.
    pub fn supports_stratonovich(&self) -> bool {
        self.gauge.is_zero() || self.gauge.has_strat_correction()
    }
}

/// A constant complex-orthogonal transformation of the canonical noise matrix,
/// parameterized by the M(2M−1) antisymmetric-generator coefficients g_ij
/// (i < j), plus an optional off-square block Q of extra noises.
#[derive(Clone, Debug, Default)]
pub struct DiffusionGauge {
    pub coeffs: Vec<C64>,
    pub q_extra: Option<CMatrix>,
}

impl DiffusionGauge {
    pub fn single_mode(g: C64) -> Self {
        DiffusionGauge { coeffs: vec![g], q_extra: None }
    }

    pub fn coeff_count(modes: usize) -> usize {
        modes * (2 * modes - 1)
    }

    /// The antisymmetric generator Σ g_ij σ⁽ⁱʲ⁾ as a 2M×2M matrix.
    pub fn generator(&self, modes: usize) -> Result<CMatrix> {
        let dim = 2 * modes;
        if self.coeffs.len() != Self::coeff_count(modes) {
            return Err(Error::Dimension(format!(
                "diffusion gauge needs {} generator coefficients for M={}, got {}",
                Self::coeff_count(modes),
                modes,
                self.coeffs.len()
            )));
        }
        let mut a = CMatrix::zeros(dim, dim);
        let mut idx = 0;
        for i in 0..dim {
            for j in (i + 1)..dim {
                a[(i, j)] = self.coeffs[idx];
                a[(j, i)] = -self.coeffs[idx];
                idx += 1;
            }
        }
        Ok(a)
    }

    /// U = exp(Σ g_ij σ⁽ⁱʲ⁾); closed form cos/sin for one mode, matrix
    /// exponential otherwise. Satisfies UUᵀ = I.
    pub fn orthogonal(&self, modes: usize) -> Result<CMatrix> {
        if modes == 1 {
            if self.coeffs.len() != 1 {
                return Err(Error::Dimension(
                    "single-mode diffusion gauge takes one coefficient".into(),
                ));
            }
            let g = self.coeffs[0];
            let (c, s) = (g.cos(), g.sin());
            return Ok(CMatrix::from_rows(&[&[c, s], &[-s, c]]));
        }
        Ok(linalg::expm(&self.generator(modes)?))
    }
}

/// Canonical noise factor B⁽⁺⁾ of a symmetric diffusion matrix:
/// D = Oλ²Oᵀ gives B⁽⁺⁾ = Oλ with B⁽⁺⁾B⁽⁺⁾ᵀ = D. Diagonal D takes the
/// elementwise principal square root. Defective D is rejected.
pub fn canonical_factor(d: &CMatrix) -> Result<CMatrix> {
    if d.rows != d.cols {
        return Err(Error::Dimension("diffusion matrix must be square".into()));
    }
    if !d.is_symmetric(1e-12) {
        return Err(Error::Unsupported(
            "diffusion matrix is not symmetric to 1e-12".into(),
        ));
    }
    let diagonal = (0..d.rows)
        .all(|i| (0..d.cols).all(|j| i == j || d[(i, j)] == C64::new(0.0, 0.0)));
    if diagonal {
        let mut b = CMatrix::zeros(d.rows, d.cols);
        for i in 0..d.rows {
            b[(i, i)] = d[(i, i)].sqrt();
        }
        return Ok(b);
    }
    let (o, lambda) = linalg::complex_orthogonal_diagonalize(d)?;
    let sqrt = CMatrix::diagonal(&lambda.iter().map(|l| l.sqrt()).collect::<Vec<_>>());
    Ok(o.mul(&sqrt))
}

/// Applies a diffusion gauge to a canonical square noise matrix. Without an
/// off-square block this is B_canon·U; with one, the square part is the
/// canonical factor of D − QQᵀ rotated by U and the result is [B_s, Q].
pub fn diffusion_transform(b_canon: &CMatrix, gauge: &DiffusionGauge) -> Result<CMatrix> {
    if b_canon.rows != b_canon.cols || b_canon.rows % 2 != 0 {
        return Err(Error::Dimension(
            "canonical noise matrix must be square 2M×2M".into(),
        ));
    }
    let modes = b_canon.rows / 2;
    let u = gauge.orthogonal(modes)?;
    match &gauge.q_extra {
        None => Ok(b_canon.mul(&u)),
        Some(q) => {
            if q.rows != b_canon.rows {
                return Err(Error::Dimension(format!(
                    "off-square block has {} rows, need {}",
                    q.rows, b_canon.rows
                )));
            }
            let d = b_canon.mul(&b_canon.transpose());
            let qqt = q.mul(&q.transpose());
            let d_tilde = d.sub(&qqt);
            let b_s = canonical_factor(&d_tilde)?.mul(&u);
            Ok(b_s.hconcat(q))
        }
    }
}

/// Reported complexity of a gauge's values over a probe set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaugeComplexity {
    /// Identically zero on the probe (trivially both real and imaginary).
    Zero,
    Real,
    Imaginary,
    Complex,
}

/// Reported functional dependence over a probe set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GaugeDependence {
    /// Constant or weight-only.
    Autonomous,
    SpaceDependent,
    Mixed,
}

#[derive(Clone, Copy, Debug)]
pub struct GaugeClass {
    pub complexity: GaugeComplexity,
    pub dependence: GaugeDependence,
    pub norm_preserving: bool,
}

/// Diagnostic classification of a drift gauge by inspection on probe states:
/// complexity (real / imaginary / complex values), functional dependence
/// (sensitivity to Ω vs phase-space arguments), and the norm-preserving flag
/// Ω′g′_k = Ω″g″_k.
pub fn classify_gauge(gauge: &dyn DriftGauge, w: usize, probe: &[TrajectoryState]) -> Result<GaugeClass> {
    if probe.is_empty() {
        return Err(Error::Config("classification probe must be nonempty".into()));
    }
    let mut g = vec![C64::new(0.0, 0.0); w];
    let mut g_var = vec![C64::new(0.0, 0.0); w];
    let mut max_norm = 0.0f64;
    let mut max_re = 0.0f64;
    let mut max_im = 0.0f64;
    let mut omega_dep = false;
    let mut space_dep = false;
    let mut norm_preserving = true;

    for s in probe {
        gauge.eval(s.omega, &s.alpha, &s.beta, s.time, &mut g);
        for gk in &g {
            max_norm = max_norm.max(gk.norm());
            max_re = max_re.max(gk.re.abs());
            max_im = max_im.max(gk.im.abs());
        }
        let scale = 1.0 + s.omega.norm() * g.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for gk in &g {
            if (s.omega.re * gk.re - s.omega.im * gk.im).abs() > 1e-9 * scale {
                norm_preserving = false;
            }
        }

        // Sensitivity probes: perturb the weight, then the phase space.
        let omega2 = s.omega * C64::new(1.37, 0.21) + C64::new(0.11, -0.05);
        gauge.eval(omega2, &s.alpha, &s.beta, s.time, &mut g_var);
        if g_var.iter().zip(&g).any(|(a, b)| (a - b).norm() > 1e-12 * (1.0 + max_norm)) {
            omega_dep = true;
        }
        let alpha2: Vec<C64> = s.alpha.iter().map(|a| a * 1.13 + C64::new(0.07, 0.19)).collect();
        let beta2: Vec<C64> = s.beta.iter().map(|b| b * 0.91 + C64::new(-0.23, 0.11)).collect();
        gauge.eval(s.omega, &alpha2, &beta2, s.time, &mut g_var);
        if g_var.iter().zip(&g).any(|(a, b)| (a - b).norm() > 1e-12 * (1.0 + max_norm)) {
            space_dep = true;
        }
    }

    let tol = 1e-12 * (1.0 + max_norm);
    let complexity = match (max_im <= tol, max_re <= tol) {
        (true, true) => GaugeComplexity::Zero,
        (true, false) => GaugeComplexity::Real,
        (false, true) => GaugeComplexity::Imaginary,
        (false, false) => GaugeComplexity::Complex,
    };
    let dependence = match (omega_dep, space_dep) {
        (_, false) => GaugeDependence::Autonomous,
        (false, true) => GaugeDependence::SpaceDependent,
        (true, true) => GaugeDependence::Mixed,
    };
    Ok(GaugeClass { complexity, dependence, norm_preserving })
}
