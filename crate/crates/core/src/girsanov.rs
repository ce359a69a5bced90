//! Change of measure that turns the coupling drift into a Wiener shift.
//!
//! For `B^H = ∫ K_H dW` and an absolutely continuous shift `∫_0^· u dr`,
//! `dW + g ds` with `g = K_H^{-1} ∫_0^· u dr` drives `B^H + ∫_0^· u dr`.
//! The density is `R_T = exp(-∫ g dW - ½ ∫ g² ds)`.

use crate::error::{Error, Result};
use crate::fbm::{kernel_variance_factor, HurstParam, TimeGrid, VolterraSampler, WienerIncrements};
use crate::fraccalc::{InverseKernelWeights, SampledPath, Sampling};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GirsanovWeight {
    /// `M_T = -∫ g dW`
    pub m: f64,
    /// `∫ g² ds`
    pub qv: f64,
    /// `exp(M_T - qv/2)`
    pub r: f64,
}

impl GirsanovWeight {
    pub fn unit() -> Self {
        Self {
            m: 0.0,
            qv: 0.0,
            r: 1.0,
        }
    }
}

/// `g = K_H^{-1} ∫_0^· u dr` for the normalized fBm kernel at the nodes.
pub fn girsanov_integrand(u: &SampledPath, h: HurstParam) -> Result<SampledPath> {
    GirsanovIntegrand::new(h, u.grid())?.apply(u)
}

/// Reusable [`girsanov_integrand`] for one `(H, grid)`.
///
/// At `H = 1/2` the operator is the identity and `g = u`, cell by cell.
#[derive(Debug, Clone)]
pub struct GirsanovIntegrand {
    weights: Option<InverseKernelWeights>,
    scale: f64,
    grid: TimeGrid,
}

impl GirsanovIntegrand {
    pub fn new(h: HurstParam, grid: &TimeGrid) -> Result<Self> {
        let weights = if h.is_brownian() {
            None
        } else {
            Some(InverseKernelWeights::new(h, grid.steps())?)
        };
        Ok(Self {
            weights,
            // the unnormalized inverse maps into W-space of V_H^{1/2} B^H
            scale: kernel_variance_factor(h).sqrt(),
            grid: *grid,
        })
    }

    pub fn apply(&self, u: &SampledPath) -> Result<SampledPath> {
        if u.grid() != &self.grid {
            return Err(Error::contract("drift and integrand live on different grids"));
        }
        let Some(weights) = &self.weights else {
            return SampledPath::new(self.grid, u.cell_values(), Sampling::Cells);
        };
        let mut v = weights.apply_cells(&self.grid, &u.cell_values())?;
        for x in &mut v {
            *x *= self.scale;
        }
        SampledPath::new(self.grid, v, Sampling::Nodes)
    }
}

/// Integrand that makes the change of measure exact for the discrete
/// scheme driven by [`VolterraSampler`].
///
/// Solves `Δ Σ_{j<i} K̄_ij g_j = Δ Σ_{j<i} u_j` for `i = 1..n`, so that
/// shifting `dW_j` by `g_j Δ` shifts every node of `B^H` by exactly the
/// accumulated coupling drift. `g_j` only uses `u_0..u_j`, so it stays
/// adapted. Returns one value per cell.
pub fn discrete_integrand(sampler: &VolterraSampler, u: &SampledPath) -> Result<SampledPath> {
    let grid = *sampler.grid();
    if u.grid() != &grid {
        return Err(Error::contract("drift and sampler live on different grids"));
    }
    let uc = u.cell_values();
    let n = grid.steps();
    let mut g = vec![0.0; n];
    let mut target = 0.0;
    for i in 1..=n {
        target += uc[i - 1];
        let row = sampler.mean_row(i);
        let known: f64 = row[..i - 1].iter().zip(&g).map(|(k, v)| k * v).sum();
        g[i - 1] = (target - known) / row[i - 1];
    }
    SampledPath::new(grid, g, Sampling::Cells)
}

/// `M_T = -Σ g(s_j) dW_j` (left point), `qv = Σ g(s_j)² Δ`.
///
/// Node-sampled `g` is read at the left node of each cell, cell-sampled
/// `g` is used as is.
pub fn weight(g: &SampledPath, w: &WienerIncrements) -> Result<GirsanovWeight> {
    let grid = g.grid();
    if w.len() != grid.steps() {
        return Err(Error::contract(format!(
            "integrand has {} cells, {} Wiener increments supplied",
            grid.steps(),
            w.len()
        )));
    }
    let left = match g.sampling() {
        Sampling::Nodes => &g.values()[..grid.steps()],
        Sampling::Cells => g.values(),
    };
    let dt = grid.dt();
    let mut m = 0.0;
    let mut qv = 0.0;
    for (gj, dw) in left.iter().zip(&w.dw) {
        m -= gj * dw;
        qv += gj * gj * dt;
    }
    let r = (m - 0.5 * qv).exp();
    if !r.is_finite() || !m.is_finite() {
        return Err(Error::numerical(grid.steps(), "Girsanov density overflowed"));
    }
    Ok(GirsanovWeight { m, qv, r })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NovikovCheck {
    pub holds: bool,
    /// `C |x-y|² - qv/2`
    pub margin: f64,
}

/// Pathwise check of `½ ∫ g² ds <= C |x-y|²`.
pub fn novikov_check(g: &SampledPath, constant: f64, dist: f64) -> Result<NovikovCheck> {
    if !(constant >= 0.0) {
        return Err(Error::domain(format!("Novikov constant must be >= 0, got {constant}")));
    }
    let grid = g.grid();
    let left = match g.sampling() {
        Sampling::Nodes => &g.values()[..grid.steps()],
        Sampling::Cells => g.values(),
    };
    let qv: f64 = left.iter().map(|v| v * v).sum::<f64>() * grid.dt();
    let margin = constant * dist * dist - 0.5 * qv;
    Ok(NovikovCheck {
        holds: margin >= 0.0,
        margin,
    })
}
