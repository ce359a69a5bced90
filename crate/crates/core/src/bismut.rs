//! Bismut-type derivative formula `D_y P_T f(x) = E[f(X_T^x) N_T]`.
//!
//! ```text
//! N_T = c_H / (Γ(1/2-H) T) ∫_0^T s^{H-1/2} [∫_0^s r^{1/2-H} (s-r)^{-1/2-H}
//!       (1 + ∂_x b(r, X_r)(T - r)) dr] y dW_s
//! ```
//!
//! with `c_H = V_H^{1/2}` converting the hypergeometric kernel into the
//! kernel of standard fBm (see [`crate::fbm`]).

use crate::error::{Error, Result};
use crate::fbm::{kernel_variance_factor, FbmPath, HurstParam, TimeGrid, VolterraSampler, WienerIncrements};
use crate::fraccalc::InverseKernelWeights;
use crate::harnack::{TestFunction, MIN_PATHS};
use crate::mc::{map_paths, mean_se};
use crate::sde::{euler_solve, DriftSpec, SolutionPath};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeEstimate {
    pub value: f64,
    pub se: f64,
    pub direction: f64,
    pub base: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivativeQuery {
    pub x: f64,
    pub direction: f64,
    pub horizon: f64,
    pub drift: DriftSpec,
    pub hurst: HurstParam,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl DerivativeQuery {
    pub fn validate(&self) -> Result<()> {
        if !self.x.is_finite() || !self.direction.is_finite() {
            return Err(Error::domain("base point and direction must be finite"));
        }
        if self.n_paths < MIN_PATHS {
            return Err(Error::domain(format!(
                "need at least {MIN_PATHS} paths, got {}",
                self.n_paths
            )));
        }
        self.grid().map(|_| ())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.n_steps)
    }
}

/// `N_T` and `⟨N⟩_T` on one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BismutWeight {
    pub value: f64,
    pub qv: f64,
}

/// Reusable `N_T` evaluation for one `(H, grid)`, `H < 1/2`.
#[derive(Debug, Clone)]
pub struct BismutKernel {
    weights: InverseKernelWeights,
    scale: f64,
    grid: TimeGrid,
}

impl BismutKernel {
    pub fn new(h: HurstParam, grid: &TimeGrid) -> Result<Self> {
        Ok(Self {
            weights: InverseKernelWeights::new(h, grid.steps())?,
            scale: kernel_variance_factor(h).sqrt() / grid.horizon(),
            grid: *grid,
        })
    }

    /// Integrand of the outer Itô sum at the nodes `s_0, ..., s_n`.
    pub fn integrand(&self, x: &SolutionPath, drift: &DriftSpec, y: f64) -> Result<Vec<f64>> {
        if x.grid != self.grid {
            return Err(Error::contract("solution and kernel live on different grids"));
        }
        let t_end = self.grid.horizon();
        let phi: Vec<f64> = (0..self.grid.steps())
            .map(|j| {
                let t = self.grid.node(j);
                1.0 + drift.dx(t, x.values[j]) * (t_end - t)
            })
            .collect();
        let mut g = self.weights.apply_cells(&self.grid, &phi)?;
        let c = self.scale * y;
        for v in &mut g {
            *v *= c;
        }
        Ok(g)
    }

    pub fn weight(&self, x: &SolutionPath, w: &WienerIncrements, drift: &DriftSpec, y: f64) -> Result<BismutWeight> {
        let g = self.integrand(x, drift, y)?;
        ito_sum(&g, w, self.grid.dt())
    }
}

fn ito_sum(g: &[f64], w: &WienerIncrements, dt: f64) -> Result<BismutWeight> {
    if w.len() + 1 != g.len() {
        return Err(Error::contract(format!(
            "weight needs {} Wiener increments, got {}",
            g.len() - 1,
            w.len()
        )));
    }
    let mut value = 0.0;
    let mut qv = 0.0;
    for (gi, dw) in g.iter().zip(&w.dw) {
        value += gi * dw;
        qv += gi * gi * dt;
    }
    if !value.is_finite() {
        return Err(Error::numerical(w.len(), "derivative weight is not finite"));
    }
    Ok(BismutWeight { value, qv })
}

/// `N_T` for `H < 1/2`.
pub fn nt_weight(
    x: &SolutionPath,
    w: &WienerIncrements,
    drift: &DriftSpec,
    y: f64,
    h: HurstParam,
) -> Result<f64> {
    Ok(BismutKernel::new(h, &x.grid)?.weight(x, w, drift, y)?.value)
}

/// Brownian weight `(y/T) Σ (1 + (T - s_i) ∂_x b(s_i, X_i)) dW_i`.
pub fn nt_weight_bm(x: &SolutionPath, w: &WienerIncrements, drift: &DriftSpec, y: f64) -> Result<f64> {
    Ok(nt_weight_bm_full(x, w, drift, y)?.value)
}

fn nt_weight_bm_full(x: &SolutionPath, w: &WienerIncrements, drift: &DriftSpec, y: f64) -> Result<BismutWeight> {
    let grid = x.grid;
    let t_end = grid.horizon();
    let mut g: Vec<f64> = (0..grid.steps())
        .map(|i| {
            let s = grid.node(i);
            y / t_end * (1.0 + (t_end - s) * drift.dx(s, x.values[i]))
        })
        .collect();
    g.push(0.0);
    ito_sum(&g, w, grid.dt())
}

/// Per-path terminal value and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BismutSample {
    pub x_terminal: f64,
    pub weight: BismutWeight,
}

/// Simulates `X^x` and `N_T` on every path (Brownian weight at `H = 1/2`).
pub fn bismut_samples(q: &DerivativeQuery) -> Result<Vec<BismutSample>> {
    q.validate()?;
    let grid = q.grid()?;
    let sampler = VolterraSampler::new(q.hurst, &grid)?;
    let kernel = if q.hurst.is_brownian() {
        None
    } else {
        Some(BismutKernel::new(q.hurst, &grid)?)
    };
    map_paths(q.n_paths, |p| {
        let (w, b) = sampler.sample_path(q.seed, p);
        let x = euler_solve(q.x, &q.drift, &b)?;
        let weight = match &kernel {
            Some(k) => k.weight(&x, &w, &q.drift, q.direction)?,
            None => nt_weight_bm_full(&x, &w, &q.drift, q.direction)?,
        };
        Ok(BismutSample {
            x_terminal: x.terminal(),
            weight,
        })
    })
}

pub fn derivative_from_samples(f: &TestFunction, samples: &[BismutSample], q: &DerivativeQuery) -> DerivativeEstimate {
    let v: Vec<f64> = samples.iter().map(|s| f.eval(s.x_terminal) * s.weight.value).collect();
    let e = mean_se(&v);
    DerivativeEstimate {
        value: e.mean,
        se: e.se,
        direction: q.direction,
        base: q.x,
    }
}

/// Monte Carlo `E[f(X_T^x) N_T]`.
pub fn estimate_derivative(f: &TestFunction, q: &DerivativeQuery) -> Result<DerivativeEstimate> {
    let samples = bismut_samples(q)?;
    Ok(derivative_from_samples(f, &samples, q))
}

/// Smallest finite-difference step accepted by [`fd_derivative`].
pub const MIN_FD_STEP: f64 = 1e-8;

/// Central difference `(P_T f(x+εy) - P_T f(x-εy)) / (2ε)` with both
/// starts driven by the same noise.
pub fn fd_derivative(f: &TestFunction, eps: f64, q: &DerivativeQuery) -> Result<DerivativeEstimate> {
    let e = mean_se(&fd_samples(f, eps, q)?);
    Ok(DerivativeEstimate {
        value: e.mean,
        se: e.se,
        direction: q.direction,
        base: q.x,
    })
}

/// Per-path difference quotients behind [`fd_derivative`]; path `p` uses
/// the same noise as path `p` of [`bismut_samples`].
pub fn fd_samples(f: &TestFunction, eps: f64, q: &DerivativeQuery) -> Result<Vec<f64>> {
    if !(eps >= MIN_FD_STEP) || !eps.is_finite() {
        return Err(Error::contract(format!(
            "finite-difference step must be at least {MIN_FD_STEP}, got {eps}"
        )));
    }
    q.validate()?;
    let grid = q.grid()?;
    let sampler = VolterraSampler::new(q.hurst, &grid)?;
    let (up, down) = (q.x + eps * q.direction, q.x - eps * q.direction);
    map_paths(q.n_paths, |p| {
        let (_, b) = sampler.sample_path(q.seed, p);
        let a = euler_solve(up, &q.drift, &b)?.terminal();
        let c = euler_solve(down, &q.drift, &b)?.terminal();
        Ok((f.eval(a) - f.eval(c)) / (2.0 * eps))
    })
}

/// Solution of the shifted equation with frozen drift,
/// `dX^ε = b(t, X_t) dt + dB^H - (εy/T) dt`, `X^ε_0 = x + εy`,
/// where `X` is the Euler solution from `x` on the same noise.
pub fn shifted_solution(x: f64, y: f64, eps: f64, drift: &DriftSpec, noise: &FbmPath) -> Result<SolutionPath> {
    let base = euler_solve(x, drift, noise)?;
    let grid = noise.grid;
    let pull = eps * y / grid.horizon();
    let mut values = Vec::with_capacity(grid.steps() + 1);
    let mut v = x + eps * y;
    values.push(v);
    for i in 0..grid.steps() {
        let t = grid.node(i);
        v += (drift.eval(t, base.values[i]) - pull) * grid.dt() + noise.increment(i);
        values.push(v);
    }
    Ok(SolutionPath {
        grid,
        x0: x + eps * y,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fraccalc::{beta_over_gamma, kh_inverse_ac, SampledPath, Sampling};
    use crate::sde::DriftFamily;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    fn path(hv: f64, n: usize, seed: u64, p: u64) -> (WienerIncrements, FbmPath) {
        let g = TimeGrid::new(1.0, n).unwrap();
        VolterraSampler::new(h(hv), &g).unwrap().sample_path(seed, p)
    }

    #[test]
    fn zero_direction_gives_zero_weight() {
        let (w, b) = path(0.3, 32, 1, 0);
        let d = DriftSpec::new(DriftFamily::Sine, -1.0, 0.0).unwrap();
        let x = euler_solve(0.2, &d, &b).unwrap();
        assert_eq!(nt_weight(&x, &w, &d, 0.0, h(0.3)).unwrap(), 0.0);
        assert_eq!(nt_weight_bm(&x, &w, &d, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn driftless_weight_collapses_to_beta_identity() {
        let (w, b) = path(0.3, 64, 2, 5);
        let d = DriftSpec::zero();
        let x = euler_solve(0.0, &d, &b).unwrap();
        let got = nt_weight(&x, &w, &d, 1.5, h(0.3)).unwrap();
        let g = x.grid;
        let c = kernel_variance_factor(h(0.3)).sqrt() * beta_over_gamma(h(0.3)).unwrap() * 1.5;
        let want: f64 = (0..64).map(|i| c * g.node(i).powf(0.2) * w.dw[i]).sum();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn brownian_driftless_weight_is_terminal_noise() {
        let (w, b) = path(0.5, 16, 3, 1);
        let x = euler_solve(0.0, &DriftSpec::zero(), &b).unwrap();
        let got = nt_weight_bm(&x, &w, &DriftSpec::zero(), 2.0).unwrap();
        assert!((got - 2.0 * w.terminal()).abs() < 1e-14);
    }

    #[test]
    fn weight_is_linear_in_direction() {
        let (w, b) = path(0.2, 32, 4, 2);
        let d = DriftSpec::new(DriftFamily::Tanh, -1.0, 0.3).unwrap();
        let x = euler_solve(0.1, &d, &b).unwrap();
        let one = nt_weight(&x, &w, &d, 1.0, h(0.2)).unwrap();
        let two = nt_weight(&x, &w, &d, 2.0, h(0.2)).unwrap();
        assert_eq!(two, 2.0 * one);
    }

    #[test]
    fn rough_weight_approaches_brownian_weight() {
        let n = 256;
        let d = DriftSpec::new(DriftFamily::Sine, -1.0, 0.0).unwrap();
        let mut errs = [0.0; 3];
        for p in 0..8 {
            let (w, b) = path(0.5, n, 6, p);
            let x = euler_solve(0.4, &d, &b).unwrap();
            let bm = nt_weight_bm(&x, &w, &d, 1.0).unwrap();
            for (k, delta) in [0.1, 0.05, 0.02].into_iter().enumerate() {
                let rough = nt_weight(&x, &w, &d, 1.0, h(0.5 - delta)).unwrap();
                errs[k] += (rough - bm).abs();
            }
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        assert!(errs[2] / 8.0 < 0.05, "{errs:?}");
    }

    #[test]
    fn fd_step_floor() {
        let q = DerivativeQuery {
            x: 0.0,
            direction: 1.0,
            horizon: 1.0,
            drift: DriftSpec::zero(),
            hurst: h(0.3),
            n_paths: 1000,
            n_steps: 8,
            seed: 1,
        };
        assert!(matches!(
            fd_derivative(&TestFunction::Sin, 1e-9, &q),
            Err(Error::Contract(_))
        ));
        let flat = fd_derivative(&TestFunction::Constant(1.0), 0.1, &q).unwrap();
        assert_eq!((flat.value, flat.se), (0.0, 0.0));
        // b ≡ 0 moves every path rigidly
        let id = fd_derivative(&TestFunction::ClampedIdentity { lo: -1e6, hi: 1e6 }, 0.05, &q).unwrap();
        assert!((id.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn frozen_shift_closes_linearly() {
        let (_, b) = path(0.3, 50, 7, 0);
        let d = DriftSpec::new(DriftFamily::Sine, -1.0, 0.5).unwrap();
        let (x, y, eps) = (0.2, 1.3, 0.05);
        let xe = shifted_solution(x, y, eps, &d, &b).unwrap();
        let base = euler_solve(x, &d, &b).unwrap();
        let g = b.grid;
        for i in 0..=50 {
            let want = (1.0 - g.node(i) / g.horizon()) * eps * y;
            assert!((xe.values[i] - base.values[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_correction_obeys_its_bound() {
        // η_t = b(t, X^ε_t) - b(t, X_t) + εy/T is bounded by εy(K̄ + 1/T)
        let d = DriftSpec::new(DriftFamily::Tanh, -1.5, 0.0).unwrap();
        let (x, y, eps) = (0.0, 1.0, 0.1);
        let hv = h(0.3);
        for p in 0..5 {
            let (_, b) = path(0.3, 64, 8, p);
            let g = b.grid;
            let base = euler_solve(x, &d, &b).unwrap();
            let xe = shifted_solution(x, y, eps, &d, &b).unwrap();
            let eta: Vec<f64> = (0..64)
                .map(|j| {
                    let t = g.node(j);
                    d.eval(t, xe.values[j]) - d.eval(t, base.values[j]) + eps * y / g.horizon()
                })
                .collect();
            let out = kh_inverse_ac(&SampledPath::new(g, eta, Sampling::Cells).unwrap(), hv).unwrap();
            let c = beta_over_gamma(hv).unwrap() * eps * y * (d.deriv_bound() + 1.0 / g.horizon());
            for (s, v) in g.nodes().iter().zip(out.values()) {
                assert!(v.abs() <= c * s.powf(0.2) * (1.0 + 1e-12));
            }
        }
    }
}
