//! Euler scheme for `dX = b(t, X) dt + dB^H` and the coupled pair
//! `dY = b(t, Y) dt + dB^H + u dt` that is forced onto `X` by time `T`.

use crate::error::{Error, Result};
use crate::fbm::{FbmPath, TimeGrid};
use crate::fraccalc::{SampledPath, Sampling};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftFamily {
    /// `a x + c`
    Linear,
    /// `a sin x + c`
    Sine,
    /// `a tanh x + c`
    Tanh,
}

impl DriftFamily {
    pub fn name(self) -> &'static str {
        match self {
            DriftFamily::Linear => "linear",
            DriftFamily::Sine => "sine",
            DriftFamily::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(DriftFamily::Linear),
            "sine" => Some(DriftFamily::Sine),
            "tanh" => Some(DriftFamily::Tanh),
            _ => None,
        }
    }
}

/// Time-homogeneous drift from a built-in one-parameter family. All three
/// are globally Lipschitz with constant `|a|` and `|∂_x b| <= |a|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSpec {
    pub family: DriftFamily,
    pub a: f64,
    pub c: f64,
}

impl DriftSpec {
    pub fn new(family: DriftFamily, a: f64, c: f64) -> Result<Self> {
        if !a.is_finite() || !c.is_finite() {
            return Err(Error::domain(format!("drift parameters must be finite, got a={a}, c={c}")));
        }
        Ok(Self { family, a, c })
    }

    pub fn zero() -> Self {
        Self {
            family: DriftFamily::Linear,
            a: 0.0,
            c: 0.0,
        }
    }

    pub fn eval(&self, _t: f64, x: f64) -> f64 {
        let shape = match self.family {
            DriftFamily::Linear => x,
            DriftFamily::Sine => x.sin(),
            DriftFamily::Tanh => x.tanh(),
        };
        self.a * shape + self.c
    }

    /// `∂_x b(t, x)`.
    pub fn dx(&self, _t: f64, x: f64) -> f64 {
        match self.family {
            DriftFamily::Linear => self.a,
            DriftFamily::Sine => self.a * x.cos(),
            DriftFamily::Tanh => {
                let ch = x.cosh();
                if ch.is_finite() {
                    self.a / (ch * ch)
                } else {
                    0.0
                }
            }
        }
    }

    /// Lipschitz constant `K`.
    pub fn lipschitz(&self) -> f64 {
        self.a.abs()
    }

    /// Bound `K̄` on `|∂_x b|`.
    pub fn deriv_bound(&self) -> f64 {
        self.a.abs()
    }

    /// `K`, rejecting drifts that cannot drive a coupling.
    pub fn coupling_constant(&self) -> Result<f64> {
        let k = self.lipschitz();
        if !(k > 0.0) {
            return Err(Error::domain(
                "coupling needs a positive Lipschitz constant (set a != 0)",
            ));
        }
        Ok(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPath {
    pub grid: TimeGrid,
    pub x0: f64,
    pub values: Vec<f64>,
}

impl SolutionPath {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("solution has n+1 >= 2 values")
    }
}

fn check_state(v: f64, step: usize) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::numerical(step, format!("state became non-finite ({v})")))
    }
}

/// `X[i+1] = X[i] + b(t_i, X[i]) Δ + (B[i+1] - B[i])`.
pub fn euler_solve(x0: f64, drift: &DriftSpec, noise: &FbmPath) -> Result<SolutionPath> {
    let grid = noise.grid;
    check_state(x0, 0)?;
    let n = grid.steps();
    let dt = grid.dt();
    let mut values = Vec::with_capacity(n + 1);
    let mut x = x0;
    values.push(x);
    for i in 0..n {
        x += drift.eval(grid.node(i), x) * dt + noise.increment(i);
        check_state(x, i + 1)?;
        values.push(x);
    }
    Ok(SolutionPath { grid, x0, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingVariant {
    /// `η_t = 2K e^{-Kt} |x-y| / (1 - e^{-2KT})`
    Thm31,
    /// `η_t = K |x-y| / (1 - e^{-KT})`
    Rem31,
}

impl CouplingVariant {
    pub fn name(self) -> &'static str {
        match self {
            CouplingVariant::Thm31 => "thm31",
            CouplingVariant::Rem31 => "rem31",
        }
    }
}

/// The deterministic coupling speed `η`, normalized so that
/// `∫_0^T e^{-Kt} η_t dt = |x - y|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSpeed {
    pub variant: CouplingVariant,
    pub k: f64,
    pub horizon: f64,
    pub dist: f64,
}

impl CouplingSpeed {
    pub fn new(variant: CouplingVariant, k: f64, horizon: f64, dist: f64) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::domain(format!("coupling speed needs K > 0, got {k}")));
        }
        if !(horizon > 0.0) {
            return Err(Error::domain(format!("coupling speed needs T > 0, got {horizon}")));
        }
        if !(dist >= 0.0) || !dist.is_finite() {
            return Err(Error::domain(format!("distance must be nonnegative, got {dist}")));
        }
        Ok(Self {
            variant,
            k,
            horizon,
            dist,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (k, big_t, d) = (self.k, self.horizon, self.dist);
        match self.variant {
            CouplingVariant::Thm31 => 2.0 * k * (-k * t).exp() * d / -(-2.0 * k * big_t).exp_m1(),
            CouplingVariant::Rem31 => k * d / -(-k * big_t).exp_m1(),
        }
    }

    /// `max_t η_t`, attained at `t = 0` for both variants.
    pub fn max(&self) -> f64 {
        self.eval(0.0)
    }
}

/// `η` at the nodes of `grid` (horizon taken from the grid).
pub fn eta_schedule(
    variant: CouplingVariant,
    k: f64,
    grid: &TimeGrid,
    dist: f64,
) -> Result<SampledPath> {
    let speed = CouplingSpeed::new(variant, k, grid.horizon(), dist)?;
    SampledPath::from_fn_nodes(*grid, |t| speed.eval(t))
}

/// Default coincidence tolerance `1e-9 (1 + |x - y|)`.
pub fn default_coupling_tol(x: f64, y: f64) -> f64 {
    1e-9 * (1.0 + (x - y).abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPaths {
    pub x: SolutionPath,
    pub y: SolutionPath,
    /// First node where the paths were identified.
    pub tau_index: Option<usize>,
    /// `|X - Y|` at `tau_index` just before identification.
    pub gap_at_coupling: f64,
    /// Applied drift, one value per cell.
    pub u: SampledPath,
}

impl CoupledPaths {
    pub fn coupled(&self) -> bool {
        self.tau_index.is_some()
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Solves `X` from `x` and `Y` from `y` on the same noise, `Y` carrying the
/// extra drift `u_i = η(t_i) sign(X_i - Y_i)` until the paths meet.
///
/// Meeting is declared at the first node where `X = Y`, `|X - Y| <= tol`
/// or `X - Y` has changed sign; from there on `Y := X` and `u = 0`.
pub fn coupled_solve(
    x: f64,
    y: f64,
    drift: &DriftSpec,
    noise: &FbmPath,
    variant: CouplingVariant,
) -> Result<CoupledPaths> {
    coupled_solve_with_tol(x, y, drift, noise, variant, default_coupling_tol(x, y))
}

#[allow(clippy::needless_range_loop)]
pub fn coupled_solve_with_tol(
    x: f64,
    y: f64,
    drift: &DriftSpec,
    noise: &FbmPath,
    variant: CouplingVariant,
    tol: f64,
) -> Result<CoupledPaths> {
    let grid = noise.grid;
    let speed = CouplingSpeed::new(variant, drift.coupling_constant()?, grid.horizon(), (x - y).abs())?;
    check_state(x, 0)?;
    check_state(y, 0)?;
    let n = grid.steps();
    let dt = grid.dt();
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let mut u = vec![0.0; n];
    let (mut xi, mut yi) = (x, y);
    let start_sign = sign(x - y);
    let mut tau = None;
    let mut gap = 0.0;
    for i in 0..=n {
        if tau.is_none() {
            let d = xi - yi;
            if d == 0.0 || d.abs() <= tol || sign(d) != start_sign {
                tau = Some(i);
                gap = d.abs();
                yi = xi;
            }
        }
        xs.push(xi);
        ys.push(yi);
        if i == n {
            break;
        }
        let t = grid.node(i);
        let db = noise.increment(i);
        let bx = drift.eval(t, xi);
        if tau.is_none() {
            u[i] = speed.eval(t) * start_sign;
            yi += (drift.eval(t, yi) + u[i]) * dt + db;
            xi += bx * dt + db;
            check_state(yi, i + 1)?;
        } else {
            xi += bx * dt + db;
            yi = xi;
        }
        check_state(xi, i + 1)?;
    }
    Ok(CoupledPaths {
        x: SolutionPath {
            grid,
            x0: x,
            values: xs,
        },
        y: SolutionPath {
            grid,
            x0: y,
            values: ys,
        },
        tau_index: tau,
        gap_at_coupling: gap,
        u: SampledPath::new(grid, u, Sampling::Cells)?,
    })
}

/// Largest violation of the discrete contraction estimate
/// `e^{-K t_i} |X_i - Y_i| <= |x - y| - Σ_{j<i} e^{-K t_j} η(t_j) Δ`
/// before the coupling time (0 if it holds everywhere).
pub fn contraction_defect(paths: &CoupledPaths, drift: &DriftSpec, variant: CouplingVariant) -> Result<f64> {
    let grid = paths.x.grid;
    let k = drift.coupling_constant()?;
    let dist = (paths.x.x0 - paths.y.x0).abs();
    let speed = CouplingSpeed::new(variant, k, grid.horizon(), dist)?;
    let end = paths.tau_index.unwrap_or(grid.steps() + 1);
    let mut budget = dist;
    let mut worst: f64 = 0.0;
    for i in 0..end.min(grid.steps() + 1) {
        let t = grid.node(i);
        let lhs = (-k * t).exp() * (paths.x.values[i] - paths.y.values[i]).abs();
        worst = worst.max(lhs - budget);
        budget -= (-k * t).exp() * speed.eval(t) * grid.dt();
    }
    Ok(worst)
}
