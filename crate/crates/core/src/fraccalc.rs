//! Riemann–Liouville integrals and the operators `K_H`, `K_H^{-1}` on
//! sampled paths.
//!
//! `kh_apply` and `kh_inverse_ac` use the hypergeometric kernel without
//! the fBm normalization (see [`crate::fbm::kernel_hypergeometric`]), so
//! they are exact inverses of each other.

use crate::error::{Error, Result};
use crate::fbm::{kernel_variance_factor, HurstParam, KernelCells, TimeGrid};
use crate::specialfn::{beta, gamma, inc_beta_interval};

/// Where the samples of a [`SampledPath`] live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// `n + 1` values at `t_0, ..., t_n`.
    Nodes,
    /// `n` values, one per cell `[t_j, t_{j+1})`.
    Cells,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    grid: TimeGrid,
    values: Vec<f64>,
    sampling: Sampling,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, sampling: Sampling) -> Result<Self> {
        let want = match sampling {
            Sampling::Nodes => grid.steps() + 1,
            Sampling::Cells => grid.steps(),
        };
        if values.len() != want {
            return Err(Error::contract(format!(
                "{sampling:?} sampling on {} steps needs {want} values, got {}",
                grid.steps(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(i, "sampled path has a non-finite entry"));
        }
        Ok(Self {
            grid,
            values,
            sampling,
        })
    }

    pub fn from_fn_nodes(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let v = grid.nodes().into_iter().map(f).collect();
        Self::new(grid, v, Sampling::Nodes)
    }

    pub fn from_fn_cells(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let v = (0..grid.steps()).map(|j| f(grid.midpoint(j))).collect();
        Self::new(grid, v, Sampling::Cells)
    }

    pub fn zeros(grid: TimeGrid, sampling: Sampling) -> Self {
        let len = match sampling {
            Sampling::Nodes => grid.steps() + 1,
            Sampling::Cells => grid.steps(),
        };
        Self {
            grid,
            values: vec![0.0; len],
            sampling,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sampling(&self) -> Sampling {
        self.sampling
    }

    /// One value per cell; node samples are averaged over each cell.
    pub fn cell_values(&self) -> Vec<f64> {
        match self.sampling {
            Sampling::Cells => self.values.clone(),
            Sampling::Nodes => self.values.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        }
    }

    /// Cell-wise difference quotients of a node-sampled path.
    pub fn derivative(&self) -> Result<SampledPath> {
        if self.sampling != Sampling::Nodes {
            return Err(Error::contract("derivative needs node samples"));
        }
        let inv = 1.0 / self.grid.dt();
        let d = self.values.windows(2).map(|w| (w[1] - w[0]) * inv).collect();
        SampledPath::new(self.grid, d, Sampling::Cells)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("fractional order must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Left Riemann–Liouville integral `I^α_{0+} f` at the grid nodes.
///
/// The weight `(s-r)^{α-1}` is integrated exactly on every cell against a
/// piecewise-constant (cell samples) or piecewise-linear (node samples)
/// interpolant of `f`.
pub fn rl_integral(alpha: f64, f: &SampledPath) -> Result<SampledPath> {
    check_alpha(alpha)?;
    let grid = *f.grid();
    let n = grid.steps();
    let scale = grid.dt().powf(alpha) / gamma(alpha + 1.0)?;
    // lag k = i - j - 1, cell [k, k+1] in units of Δ measured back from s
    let pow = |k: f64, e: f64| if k == 0.0 { 0.0 } else { k.powf(e) };
    let mut out = vec![0.0; n + 1];
    match f.sampling() {
        Sampling::Cells => {
            let w: Vec<f64> = (0..n)
                .map(|k| {
                    let k = k as f64;
                    pow(k + 1.0, alpha) - pow(k, alpha)
                })
                .collect();
            let v = f.values();
            for (i, o) in out.iter_mut().enumerate().skip(1) {
                *o = scale * (0..i).map(|j| w[i - j - 1] * v[j]).sum::<f64>();
            }
        }
        Sampling::Nodes => {
            // ∫_k^{k+1} u^{α-1} (u - k) du and ∫_k^{k+1} u^{α-1} (k+1-u) du, times α
            let a1 = alpha + 1.0;
            let (near, far): (Vec<f64>, Vec<f64>) = (0..n)
                .map(|k| {
                    let k = k as f64;
                    let d0 = pow(k + 1.0, alpha) - pow(k, alpha);
                    let d1 = (pow(k + 1.0, a1) - pow(k, a1)) / a1;
                    // value at the node nearer to s weighs (k+1-u), farther weighs (u-k)
                    (alpha * ((k + 1.0) * d0 / alpha - d1), alpha * (d1 - k * d0 / alpha))
                })
                .unzip();
            let v = f.values();
            for (i, o) in out.iter_mut().enumerate().skip(1) {
                let mut acc = 0.0;
                for j in 0..i {
                    let k = i - j - 1;
                    acc += far[k] * v[j] + near[k] * v[j + 1];
                }
                *o = scale * acc;
            }
        }
    }
    SampledPath::new(grid, out, Sampling::Nodes)
}

/// Product-integration weights of `r^{1/2-H} (s-r)^{-1/2-H}` on the cells
/// of a grid, for every node `s = t_i`.
///
/// They depend on `H` and `n` only; the horizon enters as the factor
/// `s^{1-2H}`. Building the table costs `n(n+1)/2` incomplete Beta
/// evaluations, applying it `O(n²)`.
#[derive(Debug, Clone)]
pub struct InverseKernelWeights {
    hurst: HurstParam,
    steps: usize,
    // row i (1..=n): I_{(j+1)/i} - I_{j/i} for j < i, regularized with (3/2-H, 1/2-H)
    table: Vec<f64>,
    beta_over_gamma: f64,
}

impl InverseKernelWeights {
    pub fn new(h: HurstParam, steps: usize) -> Result<Self> {
        if h.is_brownian() {
            return Err(Error::domain("the absolutely continuous K_H^{-1} branch needs H < 1/2"));
        }
        let hv = h.value();
        let (a, b) = (1.5 - hv, 0.5 - hv);
        let mut table = Vec::with_capacity(steps * (steps + 1) / 2);
        for i in 1..=steps {
            let fi = i as f64;
            for j in 0..i {
                let x0 = j as f64 / fi;
                let x1 = if j + 1 == i { 1.0 } else { (j + 1) as f64 / fi };
                table.push(inc_beta_interval(a, b, x0, x1)?);
            }
        }
        Ok(Self {
            hurst: h,
            steps,
            table,
            beta_over_gamma: beta_over_gamma(h)?,
        })
    }

    pub fn hurst(&self) -> HurstParam {
        self.hurst
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i - 1) / 2;
        &self.table[start..start + i]
    }

    /// `(1/Γ(1/2-H)) s^{H-1/2} ∫_0^s r^{1/2-H} (s-r)^{-1/2-H} u(r) dr` at
    /// every node, with `u` constant on each cell. Node 0 maps to 0.
    pub fn apply_cells(&self, grid: &TimeGrid, u: &[f64]) -> Result<Vec<f64>> {
        if grid.steps() != self.steps || u.len() != self.steps {
            return Err(Error::contract(format!(
                "inverse kernel weights built for {} steps, got grid {} and {} samples",
                self.steps,
                grid.steps(),
                u.len()
            )));
        }
        let e = 0.5 - self.hurst.value();
        let mut out = vec![0.0; self.steps + 1];
        for (i, o) in out.iter_mut().enumerate().skip(1) {
            let acc: f64 = self.row(i).iter().zip(u).map(|(w, v)| w * v).sum();
            *o = self.beta_over_gamma * grid.node(i).powf(e) * acc;
        }
        Ok(out)
    }

    pub fn apply(&self, u: &SampledPath) -> Result<SampledPath> {
        let out = self.apply_cells(u.grid(), &u.cell_values())?;
        SampledPath::new(*u.grid(), out, Sampling::Nodes)
    }
}

/// `B(3/2-H, 1/2-H) / Γ(1/2-H)`.
pub fn beta_over_gamma(h: HurstParam) -> Result<f64> {
    if h.is_brownian() {
        return Err(Error::domain("B(3/2-H, 1/2-H) has a pole at H = 1/2"));
    }
    let hv = h.value();
    Ok(beta(1.5 - hv, 0.5 - hv)? / gamma(0.5 - hv)?)
}

/// `(K_H^{-1} ∫_0^· u_r dr)(s)` at the nodes for absolutely continuous
/// arguments, `H < 1/2`. Node samples of `u` are averaged per cell.
pub fn kh_inverse_ac(u: &SampledPath, h: HurstParam) -> Result<SampledPath> {
    InverseKernelWeights::new(h, u.grid().steps())?.apply(u)
}

/// `(K_H f)(t_i) = ∫_0^{t_i} K_H(t_i, s) f(s) ds` with cell-averaged kernel
/// weights, `f` taken constant on each cell.
pub fn kh_apply(f: &SampledPath, h: HurstParam) -> Result<SampledPath> {
    let grid = *f.grid();
    let cells = KernelCells::new(h, &grid)?;
    let fc = f.cell_values();
    let raw = kernel_variance_factor(h).sqrt();
    let mut out = vec![0.0; grid.steps() + 1];
    for (i, o) in out.iter_mut().enumerate().skip(1) {
        *o = raw * cells.row(i).iter().zip(&fc).map(|(w, v)| w * v).sum::<f64>();
    }
    SampledPath::new(grid, out, Sampling::Nodes)
}
