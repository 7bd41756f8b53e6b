//! Exact reference dynamics in a truncated number basis: deterministic RK4
//! integration of the absorber master equation, unitary Kerr evolution, and
//! the closed-form absorber steady states. Ladder operators act as index
//! shifts, so the right-hand side is O(dim²) with no matrix products.

use crate::ensemble::C64;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eigenvalues;
use crate::models::{AbsorberParams, KerrParams};

pub const DEFAULT_TAIL_TOL: f64 = 1e-10;
pub const DEFAULT_TRACE_TOL: f64 = 1e-6;

/// Truncated number-basis density matrix (dim = N_max + 1).
#[derive(Clone, Debug)]
pub struct FockDensityMatrix {
    pub dim: usize,
    /// Row-major dim×dim.
    pub rho: Vec<C64>,
    pub time: f64,
}

impl FockDensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        FockDensityMatrix { dim, rho: vec![C64::new(0.0, 0.0); dim * dim], time: 0.0 }
    }

    /// |m⟩⟨m|.
    pub fn fock(m: usize, dim: usize) -> Result<Self> {
        if m >= dim {
            return Err(Error::Truncation(format!(
                "fock level {m} does not fit in dim {dim}"
            )));
        }
        let mut out = Self::zeros(dim);
        out.rho[m * dim + m] = C64::new(1.0, 0.0);
        Ok(out)
    }

    pub fn vacuum(dim: usize) -> Self {
        Self::fock(0, dim).expect("dim >= 1")
    }

    #[inline]
    pub fn at(&self, n: usize, m: usize) -> C64 {
        self.rho[n * self.dim + m]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|n| self.at(n, n)).sum()
    }

    /// ‖ρ − ρ†‖_F.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut sum = 0.0;
        for n in 0..self.dim {
            for m in 0..self.dim {
                sum += (self.at(n, m) - self.at(m, n).conj()).norm_sqr();
            }
        }
        (sum / 2.0).sqrt()
    }

    pub fn expect_n(&self) -> f64 {
        (0..self.dim).map(|n| n as f64 * self.at(n, n).re).sum()
    }

    /// ⟨â†ⁿâᵐ⟩ = Σ_i ρ[i, i−m+n] √(i!/(i−m)!) √((i−m+n)!/(i−m)!).
    pub fn expect_normal(&self, n: u32, m: u32) -> C64 {
        let mut out = C64::new(0.0, 0.0);
        let (n, m) = (n as usize, m as usize);
        for i in m..self.dim {
            let j = i - m + n;
            if j >= self.dim {
                continue;
            }
            let mut w = 1.0f64;
            for k in (i - m + 1)..=i {
                w *= k as f64;
            }
            let mut w2 = 1.0f64;
            for k in (i - m + 1)..=j {
                w2 *= k as f64;
            }
            out += self.at(i, j) * (w.sqrt() * w2.sqrt());
        }
        out
    }

    pub fn expect_a(&self) -> C64 {
        self.expect_normal(0, 1)
    }

    /// Occupation of the last retained level; the truncation-health indicator.
    pub fn tail_occupancy(&self) -> f64 {
        self.at(self.dim - 1, self.dim - 1).re
    }

    pub fn even_population(&self) -> f64 {
        (0..self.dim).step_by(2).map(|n| self.at(n, n).re).sum()
    }

    pub fn odd_population(&self) -> f64 {
        (1..self.dim).step_by(2).map(|n| self.at(n, n).re).sum()
    }

    /// Smallest eigenvalue, via the real-symmetric embedding of the Hermitian
    /// part. Diagnostic; O(dim³).
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.dim;
        let mut emb = vec![0.0f64; (2 * n) * (2 * n)];
        for i in 0..n {
            for j in 0..n {
                let h = 0.5 * (self.at(i, j) + self.at(j, i).conj());
                emb[i * 2 * n + j] = h.re;
                emb[(i + n) * 2 * n + (j + n)] = h.re;
                emb[i * 2 * n + (j + n)] = -h.im;
                emb[(i + n) * 2 * n + j] = h.im;
            }
        }
        symmetric_eigenvalues(&emb, 2 * n)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Truncated |α₀⟩⟨α₀|, renormalized; returns the matrix together with the
/// discarded Poisson tail weight. Fails when the tail exceeds `tail_tol`.
pub fn coherent_rho_with_tol(
    alpha0: C64,
    dim: usize,
    tail_tol: f64,
) -> Result<(FockDensityMatrix, f64)> {
    if dim == 0 {
        return Err(Error::Truncation("dim must be at least 1".into()));
    }
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-0.5 * alpha0.norm_sqr()).exp(), 0.0);
    amps.push(c);
    for n in 1..dim {
        c = c * alpha0 / (n as f64).sqrt();
        amps.push(c);
    }
    let weight: f64 = amps.iter().map(|c| c.norm_sqr()).sum();
    let tail = 1.0 - weight;
    if tail > tail_tol {
        return Err(Error::Truncation(format!(
            "coherent-state tail beyond dim {dim} is {tail:.3e} > {tail_tol:.1e}; increase dim"
        )));
    }
    let mut out = FockDensityMatrix::zeros(dim);
    for n in 0..dim {
        for m in 0..dim {
            out.rho[n * dim + m] = amps[n] * amps[m].conj() / weight;
        }
    }
    Ok((out, tail))
}

pub fn coherent_rho(alpha0: C64, dim: usize) -> Result<(FockDensityMatrix, f64)> {
    coherent_rho_with_tol(alpha0, dim, DEFAULT_TAIL_TOL)
}

/// Closed-form absorber steady state (γ = ε = 0) for a coherent start:
/// lim ⟨n̂⟩ = ½(1 − e^{−2|α₀|²}).
pub fn absorber_steady_coherent(alpha0: C64) -> f64 {
    0.5 * (1.0 - (-2.0 * alpha0.norm_sqr()).exp())
}

/// Closed-form absorber steady state (γ = ε = 0) for any diagonal initial
/// state: the total odd-sector population Σ_j ⟨1+2j|ρ₀|1+2j⟩.
pub fn absorber_steady_diagonal(rho0: &FockDensityMatrix) -> f64 {
    rho0.odd_population()
}

fn absorber_rhs(
    rho: &[C64],
    dim: usize,
    gamma: f64,
    eps: C64,
    sq: &[f64],
    out: &mut [C64],
) {
    let zero = C64::new(0.0, 0.0);
    let drive = eps != zero;
    let at = |r: &[C64], n: isize, m: isize| -> C64 {
        if n < 0 || m < 0 || n >= dim as isize || m >= dim as isize {
            zero
        } else {
            r[n as usize * dim + m as usize]
        }
    };
    for n in 0..dim {
        let nf = n as f64;
        for m in 0..dim {
            let mf = m as f64;
            let (ni, mi) = (n as isize, m as isize);
            // Two-boson loss: â²ρâ†² gain, anticommutator decay.
            let mut v = at(rho, ni + 2, mi + 2)
                * (sq[n + 1] * sq[n + 2] * sq[m + 1] * sq[m + 2])
                - 0.5 * (nf * (nf - 1.0) + mf * (mf - 1.0)) * rho[n * dim + m];
            if gamma != 0.0 {
                v += gamma * sq[n + 1] * sq[m + 1] * at(rho, ni + 1, mi + 1)
                    - 0.5 * gamma * (nf + mf) * rho[n * dim + m];
            }
            if drive {
                // [ε↠− ε*â, ρ].
                v += eps * (sq[n] * at(rho, ni - 1, mi) - sq[m + 1] * at(rho, ni, mi + 1));
                v -= eps.conj()
                    * (sq[n + 1] * at(rho, ni + 1, mi) - sq[m] * at(rho, ni, mi - 1));
            }
            out[n * dim + m] = v;
        }
    }
}

fn kerr_rhs(rho: &[C64], dim: usize, energies: &[f64], out: &mut [C64]) {
    for n in 0..dim {
        for m in 0..dim {
            let w = energies[n] - energies[m];
            out[n * dim + m] = C64::new(0.0, -w) * rho[n * dim + m];
        }
    }
}

fn rk4_evolve<F>(
    rho0: &FockDensityMatrix,
    t_end: f64,
    dt: f64,
    record_stride: usize,
    tail_tol: f64,
    rhs: F,
) -> Result<Vec<FockDensityMatrix>>
where
    F: Fn(&[C64], &mut [C64]),
{
    if !(dt > 0.0) || t_end < 0.0 {
        return Err(Error::Config("oracle needs dt > 0 and t_end >= 0".into()));
    }
    let n_steps = (t_end / dt).round() as usize;
    if ((n_steps as f64) * dt - t_end).abs() > 1e-9 * dt.max(t_end) {
        return Err(Error::Config(
            "oracle t_end must be an integer number of steps".into(),
        ));
    }
    let dim = rho0.dim;
    let sz = dim * dim;
    let mut rho = rho0.rho.clone();
    let mut k1 = vec![C64::new(0.0, 0.0); sz];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    let mut series = Vec::with_capacity(n_steps / record_stride.max(1) + 1);
    let snapshot = |rho: &Vec<C64>, t: f64| FockDensityMatrix {
        dim,
        rho: rho.clone(),
        time: t,
    };
    series.push(snapshot(&rho, rho0.time));

    for step in 0..n_steps {
        rhs(&rho, &mut k1);
        for i in 0..sz {
            tmp[i] = rho[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..sz {
            tmp[i] = rho[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..sz {
            tmp[i] = rho[i] + dt * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..sz {
            rho[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let t = rho0.time + (step + 1) as f64 * dt;

        let trace: C64 = (0..dim).map(|n| rho[n * dim + n]).sum();
        if (trace.re - 1.0).abs() > DEFAULT_TRACE_TOL || trace.im.abs() > DEFAULT_TRACE_TOL {
            return Err(Error::Truncation(format!(
                "trace drifted to {trace} at t = {t}; reduce dt or increase dim"
            )));
        }
        let tail = rho[(dim - 1) * dim + (dim - 1)].re;
        if tail > tail_tol {
            return Err(Error::Truncation(format!(
                "tail occupancy {tail:.3e} exceeded {tail_tol:.1e} at t = {t}; increase dim"
            )));
        }
        if record_stride > 0 && (step + 1) % record_stride == 0 {
            series.push(snapshot(&rho, t));
        }
    }
    if record_stride == 0 || n_steps % record_stride != 0 {
        series.push(snapshot(&rho, rho0.time + n_steps as f64 * dt));
    }
    Ok(series)
}

/// Deterministic RK4 integration of the absorber master equation
/// ∂ρ/∂t = [εâ†−ε*â, ρ] + (γ/2)(2âρ↠− â†âρ − ρâ†â)
///        + ½(2â²ρâ†² − â†²â²ρ − ρâ†²â²),
/// sampled every `record_stride` steps (a stride of 0 records only the
/// endpoints). Trace drift or tail growth abort with the offending time.
pub fn evolve_absorber(
    rho0: &FockDensityMatrix,
    params: AbsorberParams,
    t_end: f64,
    dt: f64,
    record_stride: usize,
    tail_tol: f64,
) -> Result<Vec<FockDensityMatrix>> {
    let dim = rho0.dim;
    let sq: Vec<f64> = (0..=dim + 2).map(|n| (n as f64).sqrt()).collect();
    rk4_evolve(rho0, t_end, dt, record_stride, tail_tol, |rho, out| {
        absorber_rhs(rho, dim, params.gamma, params.epsilon, &sq, out)
    })
}

/// Unitary Kerr evolution (commutator only): H = ω₀â†â + κâ†²â²/2 is diagonal
/// in the number basis with E_n = ω₀ n + κ n(n−1)/2.
pub fn evolve_kerr(
    rho0: &FockDensityMatrix,
    params: KerrParams,
    t_end: f64,
    dt: f64,
    record_stride: usize,
    tail_tol: f64,
) -> Result<Vec<FockDensityMatrix>> {
    let dim = rho0.dim;
    let energies: Vec<f64> = (0..dim)
        .map(|n| {
            let nf = n as f64;
            params.omega0 * nf + 0.5 * params.kappa * nf * (nf - 1.0)
        })
        .collect();
    rk4_evolve(rho0, t_end, dt, record_stride, tail_tol, |rho, out| {
        kerr_rhs(rho, dim, &energies, out)
    })
}
