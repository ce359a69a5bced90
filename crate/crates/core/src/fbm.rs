//! Fractional Brownian motion for `H <= 1/2` through its Volterra kernel.
//!
//! The kernel is the hypergeometric Decreusefond–Üstünel kernel scaled so
//! that `∫_0^{t∧s} K(t,r) K(s,r) dr = R_H(t,s)` exactly:
//!
//! ```text
//! K_H(t,s) = V_H^{-1/2} Γ(H+1/2)^{-1} (t-s)^{H-1/2} ₂F₁(H-1/2, 1/2-H; H+1/2; 1 - t/s)
//! V_H      = Γ(2-2H) cos(πH) / (πH (1-2H))
//! ```
//!
//! Without the `V_H^{-1/2}` factor the integral reproduces `V_H · R_H`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fraccalc::{SampledPath, Sampling};
use crate::quadrature::GaussLegendre;
use crate::rng::NoiseStream;
use crate::specialfn::{gamma, gauss_2f1};

/// Hurst index in `(0, 1/2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct HurstParam(f64);

impl HurstParam {
    pub fn new(h: f64) -> Result<Self> {
        if !(h > 0.0 && h <= 0.5) {
            return Err(Error::domain(format!("Hurst parameter must lie in (0, 1/2], got {h}")));
        }
        Ok(Self(h))
    }

    /// Rejects the Brownian endpoint `H = 1/2`.
    pub fn rough(h: f64) -> Result<Self> {
        let h = Self::new(h)?;
        if h.is_brownian() {
            return Err(Error::domain("this operation requires H < 1/2"));
        }
        Ok(h)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }
}

/// Uniform grid `t_i = i T / n` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::domain(format!("time horizon must be positive, got {horizon}")));
        }
        if steps < 1 {
            return Err(Error::domain("time grid needs at least one step"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|i| self.node(i)).collect()
    }

    pub fn midpoint(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dt()
    }
}

/// Wiener increments `dW_j = W(t_{j+1}) - W(t_j)` of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerIncrements {
    pub seed: u64,
    pub path_index: u64,
    pub dw: Vec<f64>,
}

impl WienerIncrements {
    /// Draws `n` increments from the path's noise stream.
    pub fn generate(grid: &TimeGrid, seed: u64, path_index: u64) -> Self {
        let mut stream = NoiseStream::new(seed, path_index);
        Self::from_stream(grid, seed, path_index, &mut stream)
    }

    pub(crate) fn from_stream(
        grid: &TimeGrid,
        seed: u64,
        path_index: u64,
        stream: &mut NoiseStream,
    ) -> Self {
        let sd = grid.dt().sqrt();
        let dw = (0..grid.steps()).map(|_| sd * stream.standard_normal()).collect();
        Self {
            seed,
            path_index,
            dw,
        }
    }

    pub fn from_values(dw: Vec<f64>) -> Self {
        Self {
            seed: 0,
            path_index: 0,
            dw,
        }
    }

    pub fn len(&self) -> usize {
        self.dw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dw.is_empty()
    }

    /// `W(T)`.
    pub fn terminal(&self) -> f64 {
        self.dw.iter().sum()
    }
}

/// fBm sampled at the grid nodes; `values[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub hurst: HurstParam,
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl FbmPath {
    pub fn zero(hurst: HurstParam, grid: TimeGrid) -> Self {
        Self {
            hurst,
            grid,
            values: vec![0.0; grid.steps() + 1],
        }
    }

    pub fn increment(&self, i: usize) -> f64 {
        self.values[i + 1] - self.values[i]
    }
}

/// `R_H(t, s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn covariance(h: HurstParam, t: f64, s: f64) -> Result<f64> {
    if !(t >= 0.0) || !(s >= 0.0) {
        return Err(Error::domain(format!("covariance needs t, s >= 0, got ({t}, {s})")));
    }
    let e = 2.0 * h.value();
    Ok(0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e)))
}

/// `V_H`, the variance of `∫_0^1 K(1,r) dW_r` for the un-normalized
/// hypergeometric kernel.
pub fn kernel_variance_factor(h: HurstParam) -> f64 {
    let h = h.value();
    if (1.0 - 2.0 * h).abs() < 1e-12 {
        return 1.0;
    }
    let pi = std::f64::consts::PI;
    // Γ(2-2H) is on (1, 2), never a pole
    gamma(2.0 - 2.0 * h).expect("Γ(2-2H) with H in (0,1/2]") * (pi * h).cos()
        / (pi * h * (1.0 - 2.0 * h))
}

/// Factor `V_H^{-1/2}` turning the hypergeometric kernel into the kernel of
/// standard fBm.
pub fn kernel_normalization(h: HurstParam) -> f64 {
    kernel_variance_factor(h).sqrt().recip()
}

fn check_kernel_args(t: f64, s: f64) -> Result<()> {
    if !(s > 0.0 && s < t) || !t.is_finite() {
        return Err(Error::domain(format!("kernel needs 0 < s < t, got (t={t}, s={s})")));
    }
    Ok(())
}

/// The hypergeometric kernel exactly as printed, without the `V_H`
/// normalization. `fraccalc::kh_apply` is built on this one.
pub fn kernel_hypergeometric(h: HurstParam, t: f64, s: f64) -> Result<f64> {
    check_kernel_args(t, s)?;
    let h = h.value();
    if h == 0.5 {
        return Ok(1.0);
    }
    let beta = h - 0.5;
    let f = gauss_2f1(beta, -beta, h + 0.5, 1.0 - t / s)?;
    Ok((t - s).powf(beta) / gamma(h + 0.5)? * f)
}

/// Volterra kernel `K_H(t, s)` of standard fBm, `0 < s < t`.
pub fn kernel(h: HurstParam, t: f64, s: f64) -> Result<f64> {
    Ok(kernel_normalization(h) * kernel_hypergeometric(h, t, s)?)
}

/// `∂K_H/∂t (t, s) = c (H-1/2)/Γ(H+1/2) (s/t)^{1/2-H} (t-s)^{H-3/2}`.
pub fn kernel_dt(h: HurstParam, t: f64, s: f64) -> Result<f64> {
    check_kernel_args(t, s)?;
    let hv = h.value();
    if hv == 0.5 {
        return Ok(0.0);
    }
    let c = kernel_normalization(h) * (hv - 0.5) / gamma(hv + 0.5)?;
    Ok(c * (s / t).powf(0.5 - hv) * (t - s).powf(hv - 1.5))
}

const CELL_ORDER: usize = 24;

/// `∫_a^b K_H(t, s) ds` for `0 <= a < b <= t`, grading the quadrature into
/// the `s^{H-1/2}` singularity at 0 and the `(t-s)^{H-1/2}` one at `t`.
pub fn kernel_cell_integral(h: HurstParam, t: f64, a: f64, b: f64) -> Result<f64> {
    let gl = GaussLegendre::new(CELL_ORDER);
    kernel_cell_integral_with(&gl, h, t, a, b)
}

fn kernel_cell_integral_with(
    gl: &GaussLegendre,
    h: HurstParam,
    t: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    if !(0.0 <= a && a < b && b <= t) {
        return Err(Error::domain(format!(
            "kernel cell needs 0 <= a < b <= t, got (a={a}, b={b}, t={t})"
        )));
    }
    if h.is_brownian() {
        return Ok(b - a);
    }
    let beta = h.value() - 0.5;
    let left = a == 0.0;
    let right = b >= t * (1.0 - 1e-13);
    let mut err = None;
    let mut k = |s: f64| match kernel(h, t, s) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let val = match (left, right) {
        (true, true) => {
            let m = 0.5 * (a + b);
            gl.integrate_left_singular(a, m, beta, &mut k)
                + gl.integrate_right_singular(m, b, beta, &mut k)
        }
        (true, false) => gl.integrate_left_singular(a, b, beta, &mut k),
        (false, true) => gl.integrate_right_singular(a, b, beta, &mut k),
        (false, false) => gl.integrate(a, b, &mut k),
    };
    match err {
        Some(e) => Err(e),
        None => Ok(val),
    }
}

const PRODUCT_ORDER: usize = 24;
const PRODUCT_LEVELS_LOW: i32 = 40;
const PRODUCT_LEVELS_HIGH: i32 = 30;

/// `∫_0^{t∧s} K_H(t, r) K_H(s, r) dr`, which equals `R_H(t, s)`.
///
/// Near 0 the product mixes the powers `r^{2H-1}`, `r^0` and `r^{1-2H}`, so
/// both halves of `[0, t∧s]` are cut geometrically towards their ends. The
/// last piece at 0 uses a graded rule. The last piece below `m = t∧s` is
/// integrated from the leading term of the kernel there, because `m - r`
/// cannot be resolved in floating point at that scale.
pub fn kernel_product_integral(h: HurstParam, t: f64, s: f64) -> Result<f64> {
    if !(t > 0.0 && s > 0.0) || !t.is_finite() || !s.is_finite() {
        return Err(Error::domain(format!("kernel product needs t, s > 0, got ({t}, {s})")));
    }
    let (m, big) = (t.min(s), t.max(s));
    if h.is_brownian() {
        return Ok(m);
    }
    let hv = h.value();
    let gl = GaussLegendre::new(PRODUCT_ORDER);
    let mut err = None;
    let mut prod = |r: f64| {
        let kt = if r < t { kernel(h, t, r) } else { Ok(0.0) };
        let ks = if r < s { kernel(h, s, r) } else { Ok(0.0) };
        match (kt, ks) {
            (Ok(a), Ok(b)) => a * b,
            (Err(e), _) | (_, Err(e)) => {
                err.get_or_insert(e);
                0.0
            }
        }
    };
    let half = 0.5 * m;
    let low = half * 2f64.powi(-PRODUCT_LEVELS_LOW);
    let mut val = gl.integrate_left_singular(0.0, low, 2.0 * hv - 1.0, &mut prod);
    for k in 0..PRODUCT_LEVELS_LOW {
        let hi = half * 2f64.powi(-k);
        val += gl.integrate(0.5 * hi, hi, &mut prod);
    }
    for k in 0..PRODUCT_LEVELS_HIGH {
        let hi = half * 2f64.powi(-k);
        val += gl.integrate(m - hi, m - 0.5 * hi, &mut prod);
    }
    if let Some(e) = err {
        return Err(e);
    }
    // K(m, r) ≈ (m - r)^{H-1/2} / (Γ(H+1/2) V_H^{1/2}) as r -> m
    let eps = half * 2f64.powi(-PRODUCT_LEVELS_HIGH);
    let lead = kernel_normalization(h) / gamma(hv + 0.5)?;
    val += if big == m {
        lead * lead * eps.powf(2.0 * hv) / (2.0 * hv)
    } else {
        kernel(h, big, m)? * lead * eps.powf(hv + 0.5) / (hv + 0.5)
    };
    Ok(val)
}

/// Lower-triangular table of kernel cell integrals
/// `cells(i, j) = ∫_{t_j}^{t_{j+1}} K_H(t_i, s) ds`, `1 <= i <= n`, `j < i`.
#[derive(Debug, Clone)]
pub struct KernelCells {
    grid: TimeGrid,
    data: Vec<f64>,
}

impl KernelCells {
    pub fn new(h: HurstParam, grid: &TimeGrid) -> Result<Self> {
        let n = grid.steps();
        let gl = GaussLegendre::new(CELL_ORDER);
        let rows: Vec<Result<Vec<f64>>> = (1..=n)
            .into_par_iter()
            .map(|i| {
                let t = grid.node(i);
                (0..i)
                    .map(|j| kernel_cell_integral_with(&gl, h, t, grid.node(j), grid.node(j + 1)))
                    .collect()
            })
            .collect();
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for row in rows {
            data.extend(row?);
        }
        Ok(Self { grid: *grid, data })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Row `i` (node index `1..=n`), `i` entries.
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert!(i >= 1 && i <= self.grid.steps());
        let start = i * (i - 1) / 2;
        &self.data[start..start + i]
    }
}

/// Cell-averaged Volterra sum `values[i] = Σ_{j<i} K̄_ij dW_j`.
pub fn synthesize(h: HurstParam, grid: &TimeGrid, w: &WienerIncrements) -> Result<FbmPath> {
    VolterraSampler::new(h, grid)?.synthesize(w)
}

/// Volterra synthesis on a fixed grid.
///
/// [`VolterraSampler::synthesize`] is the cell-averaged sum, i.e. the
/// conditional mean of `B^H` given the grid increments of `W`. It misses
/// the sub-grid part of the path, which matters for rough `H`.
/// [`VolterraSampler::sample`] adds that part back as an independent
/// Gaussian with covariance `R - Δ K̄ K̄ᵀ`, so `(dW, B^H(t_i))` has exactly
/// the law of the continuous construction at the nodes.
#[derive(Debug, Clone)]
pub struct VolterraSampler {
    hurst: HurstParam,
    grid: TimeGrid,
    mean_weights: Vec<f64>,
    residual_factor: Vec<f64>,
}

impl VolterraSampler {
    pub fn new(h: HurstParam, grid: &TimeGrid) -> Result<Self> {
        let cells = KernelCells::new(h, grid)?;
        let n = grid.steps();
        let dt = grid.dt();
        let inv_dt = 1.0 / dt;
        let mean_weights: Vec<f64> = cells.data.iter().map(|v| v * inv_dt).collect();

        // residual covariance over nodes 1..=n, dense row-major n x n
        let mut resid = vec![0.0; n * n];
        for i in 1..=n {
            let ri = &mean_weights[i * (i - 1) / 2..i * (i - 1) / 2 + i];
            for k in 1..=i {
                let rk = &mean_weights[k * (k - 1) / 2..k * (k - 1) / 2 + k];
                let explained: f64 = ri.iter().zip(rk).map(|(a, b)| a * b).sum::<f64>() * dt;
                let c = covariance(h, grid.node(i), grid.node(k))? - explained;
                resid[(i - 1) * n + (k - 1)] = c;
                resid[(k - 1) * n + (i - 1)] = c;
            }
        }
        let scale = grid.horizon().powf(2.0 * h.value());
        let residual_factor = psd_cholesky(&resid, n, 1e-12 * scale);
        Ok(Self {
            hurst: h,
            grid: *grid,
            mean_weights,
            residual_factor,
        })
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Cell-averaged kernel `K̄_ij`, node `i` in `1..=n`.
    pub fn mean_row(&self, i: usize) -> &[f64] {
        let start = i * (i - 1) / 2;
        &self.mean_weights[start..start + i]
    }

    fn check_len(&self, w: &WienerIncrements) -> Result<()> {
        if w.len() != self.grid.steps() {
            return Err(Error::contract(format!(
                "grid has {} steps but {} Wiener increments were supplied",
                self.grid.steps(),
                w.len()
            )));
        }
        Ok(())
    }

    pub fn synthesize(&self, w: &WienerIncrements) -> Result<FbmPath> {
        self.check_len(w)?;
        let n = self.grid.steps();
        let mut values = vec![0.0; n + 1];
        for (i, v) in values.iter_mut().enumerate().skip(1) {
            *v = self.mean_row(i).iter().zip(&w.dw).map(|(k, d)| k * d).sum();
        }
        Ok(FbmPath {
            hurst: self.hurst,
            grid: self.grid,
            values,
        })
    }

    /// Exact-in-law sample: Volterra sum plus the independent residual
    /// driven by `residual_noise` (standard normals, one per step).
    pub fn sample(&self, w: &WienerIncrements, residual_noise: &[f64]) -> Result<FbmPath> {
        let mut path = self.synthesize(w)?;
        let n = self.grid.steps();
        if residual_noise.len() != n {
            return Err(Error::contract(format!(
                "residual noise needs {n} entries, got {}",
                residual_noise.len()
            )));
        }
        for i in 0..n {
            let row = &self.residual_factor[i * n..i * n + i + 1];
            let extra: f64 = row.iter().zip(residual_noise).map(|(l, z)| l * z).sum();
            path.values[i + 1] += extra;
        }
        Ok(path)
    }

    /// Both the Wiener increments and the fBm path of Monte Carlo path
    /// `path_index`, from one noise stream: `n` draws for `dW`, then `n`
    /// for the residual.
    pub fn sample_path(&self, seed: u64, path_index: u64) -> (WienerIncrements, FbmPath) {
        let mut stream = NoiseStream::new(seed, path_index);
        let w = WienerIncrements::from_stream(&self.grid, seed, path_index, &mut stream);
        let mut z = vec![0.0; self.grid.steps()];
        stream.fill_standard_normal(&mut z);
        let path = self.sample(&w, &z).expect("lengths fixed by construction");
        (w, path)
    }
}

/// Cholesky factor of a symmetric positive semi-definite matrix; pivots
/// below `tol` are treated as exact zeros (their column is dropped).
fn psd_cholesky(a: &[f64], n: usize, tol: f64) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if d <= tol {
            continue;
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    l
}

fn strict_cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let ljj = d.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / ljj;
        }
    }
    Some(l)
}

/// Exact sampler of discretized fBm from the Cholesky factor of the
/// increment covariance. Used as the reference law for [`VolterraSampler`].
#[derive(Debug, Clone)]
pub struct CholeskyFbm {
    hurst: HurstParam,
    grid: TimeGrid,
    factor: Vec<f64>,
}

impl CholeskyFbm {
    pub fn new(h: HurstParam, grid: &TimeGrid) -> Result<Self> {
        let n = grid.steps();
        let dt = grid.dt();
        let e = 2.0 * h.value();
        let scale = dt.powf(e);
        let gamma_k = |k: usize| -> f64 {
            let k = k as f64;
            0.5 * scale * ((k + 1.0).powf(e) + (k - 1.0).abs().powf(e) - 2.0 * k.powf(e))
        };
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                cov[i * n + j] = gamma_k(i.abs_diff(j));
            }
        }
        let factor = match strict_cholesky(&cov, n) {
            Some(l) => l,
            None => {
                let jitter = 1e-12 * scale;
                for i in 0..n {
                    cov[i * n + i] += jitter;
                }
                strict_cholesky(&cov, n).ok_or_else(|| {
                    Error::numerical(0, "fBm increment covariance is not positive definite")
                })?
            }
        };
        Ok(Self {
            hurst: h,
            grid: *grid,
            factor,
        })
    }

    pub fn sample(&self, stream: &mut NoiseStream) -> FbmPath {
        let n = self.grid.steps();
        let mut z = vec![0.0; n];
        stream.fill_standard_normal(&mut z);
        let mut values = vec![0.0; n + 1];
        for i in 0..n {
            let inc: f64 = self.factor[i * n..i * n + i + 1]
                .iter()
                .zip(&z)
                .map(|(l, z)| l * z)
                .sum();
            values[i + 1] = values[i] + inc;
        }
        FbmPath {
            hurst: self.hurst,
            grid: self.grid,
            values,
        }
    }
}

/// One exact discretized fBm sample (see [`CholeskyFbm`]).
pub fn cholesky_sample(h: HurstParam, grid: &TimeGrid, stream: &mut NoiseStream) -> Result<FbmPath> {
    Ok(CholeskyFbm::new(h, grid)?.sample(stream))
}

/// `K_H^* φ` for a step function `φ` (one coefficient per grid cell).
///
/// `(K^*φ)(s) = K(T,s) φ(s) + ∫_s^T (φ(r) - φ(s)) ∂_r K(r,s) dr`. On each
/// cell `φ(r) - φ(s)` is constant, so the integral telescopes into kernel
/// values: `(K^*φ)(s) = φ_{n-1} K(T,s) - Σ_{k > cell(s)} (φ_k - φ_{k-1}) K(t_k, s)`.
pub fn kstar_apply(h: HurstParam, grid: &TimeGrid, phi: &[f64]) -> Result<KStarImage> {
    if phi.len() != grid.steps() {
        return Err(Error::contract(format!(
            "step function needs {} cell coefficients, got {}",
            grid.steps(),
            phi.len()
        )));
    }
    Ok(KStarImage {
        hurst: h,
        grid: *grid,
        phi: phi.to_vec(),
    })
}

#[derive(Debug, Clone)]
pub struct KStarImage {
    hurst: HurstParam,
    grid: TimeGrid,
    phi: Vec<f64>,
}

impl KStarImage {
    /// Value at `s ∈ (0, T)` away from grid nodes.
    pub fn eval(&self, s: f64) -> Result<f64> {
        let n = self.grid.steps();
        let t_end = self.grid.horizon();
        if !(s > 0.0 && s < t_end) {
            return Err(Error::domain(format!("K* image is defined on (0, T), got s={s}")));
        }
        let cell = ((s / self.grid.dt()) as usize).min(n - 1);
        let mut v = 0.0;
        let last = self.phi[n - 1];
        if last != 0.0 {
            v += last * kernel(self.hurst, t_end, s)?;
        }
        for k in cell + 1..n {
            let jump = self.phi[k] - self.phi[k - 1];
            if jump != 0.0 {
                v -= jump * kernel(self.hurst, self.grid.node(k), s)?;
            }
        }
        Ok(v)
    }

    /// The image sampled at cell midpoints.
    pub fn sample_midpoints(&self) -> Result<SampledPath> {
        let vals = (0..self.grid.steps())
            .map(|j| self.eval(self.grid.midpoint(j)))
            .collect::<Result<Vec<_>>>()?;
        SampledPath::new(self.grid, vals, Sampling::Cells)
    }

    /// `⟨self, other⟩_{L²[0,T]}`, cell by cell, each half-cell graded into
    /// its endpoint where the product may behave like `|s - t_k|^{2H-1}`.
    pub fn l2_inner(&self, other: &KStarImage) -> Result<f64> {
        if self.grid != other.grid || self.hurst != other.hurst {
            return Err(Error::contract("K* images live on different grids"));
        }
        let gl = GaussLegendre::new(20);
        let beta = 2.0 * self.hurst.value() - 1.0;
        let mut err = None;
        let mut f = |s: f64| match (self.eval(s), other.eval(s)) {
            (Ok(a), Ok(b)) => a * b,
            (Err(e), _) | (_, Err(e)) => {
                err.get_or_insert(e);
                0.0
            }
        };
        let mut acc = 0.0;
        for j in 0..self.grid.steps() {
            let a = self.grid.node(j);
            let b = self.grid.node(j + 1);
            let m = 0.5 * (a + b);
            acc += gl.integrate_left_singular(a, m, beta, &mut f);
            acc += gl.integrate_right_singular(m, b, beta, &mut f);
        }
        match err {
            Some(e) => Err(e),
            None => Ok(acc),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(v: f64) -> HurstParam {
        HurstParam::new(v).unwrap()
    }

    #[test]
    fn hurst_bounds() {
        assert!(HurstParam::new(0.0).is_err());
        assert!(HurstParam::new(0.51).is_err());
        assert!(HurstParam::new(0.5).is_ok());
        assert!(HurstParam::rough(0.5).is_err());
        assert!(HurstParam::rough(0.3).is_ok());
    }

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::new(2.0, 4).unwrap();
        assert_eq!(g.nodes(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.node(4), 2.0);
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn covariance_examples() {
        for hv in [0.1, 0.3, 0.5] {
            assert!((covariance(h(hv), 1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((covariance(h(0.5), 0.7, 0.3).unwrap() - 0.3).abs() < 1e-15);
        let want = 0.757_858_283_255_199_04; // 2^0.6 / 2
        assert!((covariance(h(0.3), 2.0, 1.0).unwrap() - want).abs() < 1e-15);
        assert!(covariance(h(0.3), -1.0, 1.0).is_err());
    }

    #[test]
    fn variance_factor_reference_values() {
        // Γ(2-2H) cos(πH) / (πH(1-2H)), mpmath
        let table = [
            (0.1, 3.524_480_662_499_879_7),
            (0.25, 1.595_769_121_605_730_7),
            (0.3, 1.383_376_321_945_876),
            (0.4, 1.128_924_785_893_195_2),
        ];
        for (hv, want) in table {
            assert!((kernel_variance_factor(h(hv)) - want).abs() < 1e-12);
        }
        assert_eq!(kernel_variance_factor(h(0.5)), 1.0);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel(h(0.5), 1.0, 0.3).unwrap(), 1.0);
        // Nualart representation evaluated with mpmath quadrature
        let got = kernel(h(0.3), 1.0, 0.5).unwrap();
        assert!((got - 0.873_014_114_338_668_05).abs() < 1e-12, "{got}");
        let raw = kernel_hypergeometric(h(0.3), 1.0, 0.5).unwrap();
        assert!((raw - 1.026_813_178_998_720_3).abs() < 1e-12);
        assert!(kernel(h(0.3), 1.0, 1.0).is_err());
        assert!(kernel(h(0.3), 1.0, 0.0).is_err());
        assert!(kernel(h(0.3), 1.0, 1e-9).unwrap() > 0.0);
    }

    #[test]
    fn kernel_derivative_matches_closed_form_and_richardson() {
        assert_eq!(kernel_dt(h(0.5), 1.0, 0.5).unwrap(), 0.0);
        let got = kernel_dt(h(0.3), 1.0, 0.5).unwrap();
        assert!((got + 0.292_113_173_631_969_2).abs() < 1e-12);
        // Richardson-extrapolated central differences
        let k = |t: f64| kernel(h(0.3), t, 0.5).unwrap();
        let d = |e: f64| (k(1.0 + e) - k(1.0 - e)) / (2.0 * e);
        let rich = (4.0 * d(1e-3) - d(2e-3)) / 3.0;
        assert!((got - rich).abs() < 1e-8);
        for &(t, s) in &[(1.0, 0.1), (2.0, 1.99), (0.3, 0.01)] {
            assert!(kernel_dt(h(0.2), t, s).unwrap() < 0.0);
        }
        assert!(kernel_dt(h(0.3), 0.5, 0.5).is_err());
    }

    #[test]
    fn brownian_synthesis_is_the_random_walk() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let w = WienerIncrements::generate(&g, 3, 0);
        let p = synthesize(h(0.5), &g, &w).unwrap();
        let mut acc = 0.0;
        for i in 0..8 {
            acc += w.dw[i];
            assert!((p.values[i + 1] - acc).abs() < 1e-14);
        }
        // nothing left for the residual at H = 1/2
        let sampler = VolterraSampler::new(h(0.5), &g).unwrap();
        assert!(sampler.residual_factor.iter().all(|v| v.abs() < 1e-5));
    }

    #[test]
    fn zero_noise_gives_zero_path() {
        let g = TimeGrid::new(1.0, 6).unwrap();
        let w = WienerIncrements::from_values(vec![0.0; 6]);
        let p = synthesize(h(0.2), &g, &w).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn synthesis_rejects_length_mismatch() {
        let g = TimeGrid::new(1.0, 6).unwrap();
        let w = WienerIncrements::from_values(vec![0.0; 5]);
        assert!(matches!(synthesize(h(0.2), &g, &w), Err(Error::Contract(_))));
    }

    #[test]
    fn exact_sampler_second_moments_match_covariance() {
        // E[B_i B_k] = Δ Σ K̄_ij K̄_kj + (L Lᵀ)_ik must reproduce R
        let g = TimeGrid::new(1.0, 16).unwrap();
        for hv in [0.1, 0.3] {
            let s = VolterraSampler::new(h(hv), &g).unwrap();
            let n = 16;
            for i in 1..=n {
                for k in 1..=i {
                    let mean: f64 = s
                        .mean_row(i)
                        .iter()
                        .zip(s.mean_row(k))
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        * g.dt();
                    let res: f64 = (0..n)
                        .map(|m| s.residual_factor[(i - 1) * n + m] * s.residual_factor[(k - 1) * n + m])
                        .sum();
                    let want = covariance(h(hv), g.node(i), g.node(k)).unwrap();
                    assert!((mean + res - want).abs() < 1e-8, "H={hv} ({i},{k})");
                }
            }
        }
    }

    #[test]
    fn single_step_cholesky_has_variance_t_2h() {
        let g = TimeGrid::new(2.0, 1).unwrap();
        let c = CholeskyFbm::new(h(0.3), &g).unwrap();
        assert!((c.factor[0] * c.factor[0] - 2f64.powf(0.6)).abs() < 1e-14);
    }

    #[test]
    fn brownian_cholesky_is_diagonal() {
        let g = TimeGrid::new(1.0, 5).unwrap();
        let c = CholeskyFbm::new(h(0.5), &g).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = if i == j { g.dt().sqrt() } else { 0.0 };
                assert!((c.factor[i * 5 + j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn kstar_trivial_images() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let zero = kstar_apply(h(0.3), &g, &[0.0; 8]).unwrap();
        assert_eq!(zero.eval(0.37).unwrap(), 0.0);
        // H = 1/2: indicator maps to itself
        let mut phi = [0.0; 8];
        phi[..3].fill(1.0);
        let img = kstar_apply(h(0.5), &g, &phi).unwrap();
        let m = img.sample_midpoints().unwrap();
        assert_eq!(m.values(), &[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        // indicator of [0, t_k] maps to K(t_k, ·) below t_k
        let img = kstar_apply(h(0.3), &g, &phi).unwrap();
        let s = 0.2;
        assert!((img.eval(s).unwrap() - kernel(h(0.3), 0.375, s).unwrap()).abs() < 1e-14);
        assert_eq!(img.eval(0.6).unwrap(), 0.0);
        assert!(kstar_apply(h(0.3), &g, &[1.0; 7]).is_err());
    }

    #[test]
    fn kernel_product_reproduces_covariance() {
        for hv in [0.1, 0.3, 0.45] {
            for (t, s) in [(1.0, 1.0), (1.0, 0.3), (0.2, 0.9), (0.51, 0.5)] {
                let got = kernel_product_integral(h(hv), t, s).unwrap();
                let want = covariance(h(hv), t, s).unwrap();
                assert!(((got - want) / want).abs() < 1e-7, "H={hv} ({t},{s}): {got} vs {want}");
            }
        }
        assert_eq!(kernel_product_integral(h(0.5), 0.4, 0.7).unwrap(), 0.4);
        assert!(kernel_product_integral(h(0.3), 0.0, 1.0).is_err());
    }
}
