//! Monte Carlo semigroup estimates and statistical checks of the Harnack,
//! log-Harnack and strong Feller inequalities.
//!
//! A check never reports `Violated` unless `lhs - rhs` exceeds four
//! combined standard errors. Left and right sides are estimated from the
//! same noise, so the combined error is the standard error of the
//! pathwise linearized difference.

use crate::error::{Error, Result};
use crate::fbm::{HurstParam, TimeGrid, VolterraSampler};
use crate::fraccalc::beta_over_gamma;
use crate::girsanov::{weight, GirsanovIntegrand, GirsanovWeight};
use crate::mc::{map_paths, mean_se, Estimate};
use crate::sde::{coupled_solve, euler_solve, CouplingVariant, DriftSpec};

/// Verdict threshold in standard errors.
pub const SE_THRESHOLD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    /// `1 + sin(z)/2`
    OnePlusHalfSin,
    /// `1 / (1 + e^{-z})`
    Sigmoid01,
    /// `1 + 1 / (1 + e^{-z})`
    ShiftedSigmoid,
    /// `sin z`
    Sin,
    Constant(f64),
    /// `z` clamped to `[lo, hi]`
    ClampedIdentity { lo: f64, hi: f64 },
}

impl TestFunction {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            TestFunction::OnePlusHalfSin => 1.0 + 0.5 * z.sin(),
            TestFunction::Sigmoid01 => sigmoid(z),
            TestFunction::ShiftedSigmoid => 1.0 + sigmoid(z),
            TestFunction::Sin => z.sin(),
            TestFunction::Constant(c) => c,
            TestFunction::ClampedIdentity { lo, hi } => z.clamp(lo, hi),
        }
    }

    /// `||f||_∞`.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            TestFunction::OnePlusHalfSin => 1.5,
            TestFunction::Sigmoid01 => 1.0,
            TestFunction::ShiftedSigmoid => 2.0,
            TestFunction::Sin => 1.0,
            TestFunction::Constant(c) => c.abs(),
            TestFunction::ClampedIdentity { lo, hi } => lo.abs().max(hi.abs()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::OnePlusHalfSin => "one_plus_half_sin",
            TestFunction::Sigmoid01 => "sigmoid01",
            TestFunction::ShiftedSigmoid => "shifted_sigmoid",
            TestFunction::Sin => "sin",
            TestFunction::Constant(_) => "constant",
            TestFunction::ClampedIdentity { .. } => "clamped_identity",
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_constant_args(t: f64, k: f64, h: HurstParam) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("constant needs T > 0, got {t}")));
    }
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::domain(format!("constant needs a positive Lipschitz bound, got {k}")));
    }
    beta_over_gamma(h)
}

/// `C(T,K,H) = (B(3/2-H,1/2-H)/Γ(1/2-H))² T^{2-2H} K² / ((1-e^{-2KT})² (1-H))`.
pub fn constant_c(t: f64, k: f64, h: HurstParam) -> Result<f64> {
    let bg = check_constant_args(t, k, h)?;
    let hv = h.value();
    let d = -(-2.0 * k * t).exp_m1();
    Ok(bg * bg * t.powf(2.0 - 2.0 * hv) * k * k / (d * d * (1.0 - hv)))
}

/// `C̃(T,K,H) = (B/Γ)² T^{2-2H} K² / (4 (1-e^{-KT})² (1-H))`.
pub fn constant_c_tilde(t: f64, k: f64, h: HurstParam) -> Result<f64> {
    let bg = check_constant_args(t, k, h)?;
    let hv = h.value();
    let d = -(-k * t).exp_m1();
    Ok(bg * bg * t.powf(2.0 - 2.0 * hv) * k * k / (4.0 * d * d * (1.0 - hv)))
}

/// `C(T,K̄,H) = (B/Γ)² (1+K̄T)² / (2 T^{2H} (1-H))`.
pub fn constant_c4(t: f64, k_bar: f64, h: HurstParam) -> Result<f64> {
    let bg = check_constant_args(t, k_bar, h)?;
    let hv = h.value();
    let s = 1.0 + k_bar * t;
    Ok(bg * bg * s * s / (2.0 * t.powf(2.0 * hv) * (1.0 - hv)))
}

/// Which constant (and coupling) a Harnack check uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstantVariant {
    /// `C(T,K,H)` with the exponentially decaying coupling speed.
    Thm31,
    /// `C̃(T,K,H)` with the constant coupling speed.
    Rem31,
    /// `C(T,K̄,H)` from the derivative formula; the transfer check still
    /// runs on the exponentially decaying coupling.
    Cor41,
}

impl ConstantVariant {
    pub fn name(self) -> &'static str {
        match self {
            ConstantVariant::Thm31 => "thm31",
            ConstantVariant::Rem31 => "rem31",
            ConstantVariant::Cor41 => "cor41",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "thm31" => Some(ConstantVariant::Thm31),
            "rem31" => Some(ConstantVariant::Rem31),
            "cor41" => Some(ConstantVariant::Cor41),
            _ => None,
        }
    }

    pub fn coupling(self) -> CouplingVariant {
        match self {
            ConstantVariant::Rem31 => CouplingVariant::Rem31,
            ConstantVariant::Thm31 | ConstantVariant::Cor41 => CouplingVariant::Thm31,
        }
    }

    pub fn constant(self, t: f64, drift: &DriftSpec, h: HurstParam) -> Result<f64> {
        match self {
            ConstantVariant::Thm31 => constant_c(t, drift.lipschitz(), h),
            ConstantVariant::Rem31 => constant_c_tilde(t, drift.lipschitz(), h),
            ConstantVariant::Cor41 => constant_c4(t, drift.deriv_bound(), h),
        }
    }
}

/// Minimum number of paths accepted by [`HarnackQuery::validate`].
pub const MIN_PATHS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnackQuery {
    pub x: f64,
    pub y: f64,
    pub p: f64,
    pub horizon: f64,
    pub drift: DriftSpec,
    pub hurst: HurstParam,
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl HarnackQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::domain(format!("Harnack exponent must exceed 1, got {}", self.p)));
        }
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::domain("starting points must be finite"));
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

    pub fn dist(&self) -> f64 {
        (self.x - self.y).abs()
    }
}

/// Precomputed sampler and Girsanov operator for one `(H, grid)`.
#[derive(Debug, Clone)]
pub struct PathEngine {
    sampler: VolterraSampler,
    integrand: GirsanovIntegrand,
}

impl PathEngine {
    pub fn new(h: HurstParam, grid: &TimeGrid) -> Result<Self> {
        Ok(Self {
            sampler: VolterraSampler::new(h, grid)?,
            integrand: GirsanovIntegrand::new(h, grid)?,
        })
    }

    pub fn for_query(q: &HarnackQuery) -> Result<Self> {
        Self::new(q.hurst, &q.grid()?)
    }

    pub fn sampler(&self) -> &VolterraSampler {
        &self.sampler
    }

    pub fn grid(&self) -> &TimeGrid {
        self.sampler.grid()
    }

    pub fn hurst(&self) -> HurstParam {
        self.sampler.hurst()
    }

    fn check(&self, q: &HarnackQuery) -> Result<()> {
        if self.hurst() != q.hurst || *self.grid() != q.grid()? {
            return Err(Error::contract("path engine was built for another (H, grid)"));
        }
        Ok(())
    }

    /// `X_T^{x0}` on every path.
    pub fn terminal_values(
        &self,
        x0: f64,
        drift: &DriftSpec,
        n_paths: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        map_paths(n_paths, |p| {
            let (_, b) = self.sampler.sample_path(seed, p);
            Ok(euler_solve(x0, drift, &b)?.terminal())
        })
    }

    /// Coupled run from `(x, y)` plus an uncoupled run from `y`, all on the
    /// same noise.
    pub fn coupling_samples(&self, q: &HarnackQuery, variant: CouplingVariant) -> Result<Vec<CouplingSample>> {
        self.check(q)?;
        map_paths(q.n_paths, |p| {
            let (w, b) = self.sampler.sample_path(q.seed, p);
            let c = coupled_solve(q.x, q.y, &q.drift, &b, variant)?;
            let y_direct = euler_solve(q.y, &q.drift, &b)?.terminal();
            let weight = if c.tau_index == Some(0) {
                GirsanovWeight::unit()
            } else {
                weight(&self.integrand.apply(&c.u)?, &w)?
            };
            Ok(CouplingSample {
                x_terminal: c.x.terminal(),
                y_terminal: y_direct,
                weight,
                tau_index: c.tau_index,
                gap_at_coupling: c.gap_at_coupling,
            })
        })
    }
}

/// Per-path outcome of a coupled run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingSample {
    /// `X_T^x` (equal to the coupled `Y_T` once the paths met)
    pub x_terminal: f64,
    /// `X_T^y` from the uncoupled run on the same noise
    pub y_terminal: f64,
    pub weight: GirsanovWeight,
    pub tau_index: Option<usize>,
    pub gap_at_coupling: f64,
}

/// Monte Carlo `P_T f(x) = E f(X_T^x)`.
pub fn estimate_semigroup(f: &TestFunction, x: f64, q: &HarnackQuery) -> Result<Estimate> {
    let engine = PathEngine::for_query(q)?;
    let xs = engine.terminal_values(x, &q.drift, q.n_paths, q.seed)?;
    Ok(mean_se(&xs.iter().map(|&z| f.eval(z)).collect::<Vec<_>>()))
}

/// `E[R_T f(X_T^x)]`, the Girsanov-weighted estimate of `P_T f(y)`.
pub fn estimate_shifted(f: &TestFunction, q: &HarnackQuery, variant: CouplingVariant) -> Result<Estimate> {
    let engine = PathEngine::for_query(q)?;
    let samples = engine.coupling_samples(q, variant)?;
    Ok(weighted_estimate(f, &samples))
}

pub fn weighted_estimate(f: &TestFunction, samples: &[CouplingSample]) -> Estimate {
    mean_se(&samples.iter().map(|s| s.weight.r * f.eval(s.x_terminal)).collect::<Vec<_>>())
}

pub fn direct_estimate_y(f: &TestFunction, samples: &[CouplingSample]) -> Estimate {
    mean_se(&samples.iter().map(|s| f.eval(s.y_terminal)).collect::<Vec<_>>())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    HoldsWithinNoise,
    Violated,
}

impl Verdict {
    pub fn from_difference(excess: f64, se: f64) -> Self {
        if excess <= 0.0 {
            Verdict::Holds
        } else if excess <= SE_THRESHOLD * se {
            Verdict::HoldsWithinNoise
        } else {
            Verdict::Violated
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::HoldsWithinNoise => "holds_within_noise",
            Verdict::Violated => "violated",
        }
    }

    pub fn ok(self) -> bool {
        self != Verdict::Violated
    }
}

/// The transfer identity `P_T f(y) = E[R_T f(X_T^x)]` on one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferCheck {
    pub direct: Estimate,
    pub weighted: Estimate,
    /// Standard error of the paired difference.
    pub difference_se: f64,
}

impl TransferCheck {
    pub fn from_samples(f: &TestFunction, samples: &[CouplingSample]) -> Self {
        let diff: Vec<f64> = samples
            .iter()
            .map(|s| s.weight.r * f.eval(s.x_terminal) - f.eval(s.y_terminal))
            .collect();
        Self {
            direct: direct_estimate_y(f, samples),
            weighted: weighted_estimate(f, samples),
            difference_se: mean_se(&diff).se,
        }
    }

    pub fn difference(&self) -> f64 {
        self.weighted.mean - self.direct.mean
    }

    pub fn consistent(&self) -> bool {
        self.difference().abs() <= SE_THRESHOLD * self.difference_se
    }

    pub fn require(&self) -> Result<()> {
        if self.consistent() {
            Ok(())
        } else {
            Err(Error::TransferMismatch {
                weighted: self.weighted.mean,
                direct: self.direct.mean,
                difference: self.difference(),
                allowed: SE_THRESHOLD * self.difference_se,
            })
        }
    }
}

/// `E|1 - R_T|` against `√(2C) |x-y| e^{C|x-y|²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityGap {
    pub mean_abs: Estimate,
    pub bound: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnackReport {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// Standard error of `lhs - rhs`.
    pub combined_se: f64,
    pub constant_used: f64,
    pub verdict: Verdict,
    pub transfer: Option<TransferCheck>,
    pub density_gap: Option<DensityGap>,
}

impl HarnackReport {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

fn check_nonnegative(f: &TestFunction, samples: &[CouplingSample], floor: f64) -> Result<()> {
    for (i, s) in samples.iter().enumerate() {
        for z in [s.x_terminal, s.y_terminal] {
            let v = f.eval(z);
            if !(v >= floor) {
                return Err(Error::contract(format!(
                    "{} takes the value {v} < {floor} on path {i}",
                    f.name()
                )));
            }
        }
    }
    Ok(())
}

/// `(P_T f(y))^p <= P_T f^p(x) exp(p/(p-1) C |x-y|²)` from a coupled batch.
///
/// The left side uses the direct estimate from `y`; the Girsanov-weighted
/// one must agree with it before any verdict is given.
pub fn harnack_from_samples(
    f: &TestFunction,
    samples: &[CouplingSample],
    p: f64,
    constant: f64,
    dist: f64,
) -> Result<HarnackReport> {
    if !(p > 1.0) {
        return Err(Error::domain(format!("Harnack exponent must exceed 1, got {p}")));
    }
    check_nonnegative(f, samples, 0.0)?;
    let transfer = TransferCheck::from_samples(f, samples);
    transfer.require()?;
    let m = transfer.direct.mean;
    let lhs = m.powf(p);
    let grad = p * m.powf(p - 1.0);
    let factor = (p / (p - 1.0) * constant * dist * dist).exp();
    let fp: Vec<f64> = samples.iter().map(|s| f.eval(s.x_terminal).powf(p)).collect();
    let fp_est = mean_se(&fp);
    let rhs = fp_est.mean * factor;
    let lin: Vec<f64> = samples
        .iter()
        .zip(&fp)
        .map(|(s, v)| grad * f.eval(s.y_terminal) - factor * v)
        .collect();
    let combined_se = mean_se(&lin).se;
    Ok(HarnackReport {
        lhs,
        lhs_se: grad * transfer.direct.se,
        rhs,
        rhs_se: factor * fp_est.se,
        combined_se,
        constant_used: constant,
        verdict: Verdict::from_difference(lhs - rhs, combined_se),
        transfer: Some(transfer),
        density_gap: None,
    })
}

/// `P_T log f(x) <= log P_T f(y) + C |x-y|²`, `f >= 1`.
pub fn log_harnack_from_samples(
    f: &TestFunction,
    samples: &[CouplingSample],
    constant: f64,
    dist: f64,
) -> Result<HarnackReport> {
    check_nonnegative(f, samples, 1.0)?;
    let transfer = TransferCheck::from_samples(f, samples);
    transfer.require()?;
    let logs: Vec<f64> = samples.iter().map(|s| f.eval(s.x_terminal).ln()).collect();
    let lhs_est = mean_se(&logs);
    let m = transfer.direct.mean;
    let shift = constant * dist * dist;
    let lin: Vec<f64> = samples
        .iter()
        .zip(&logs)
        .map(|(s, l)| l - f.eval(s.y_terminal) / m)
        .collect();
    let combined_se = mean_se(&lin).se;
    let rhs = m.ln() + shift;
    Ok(HarnackReport {
        lhs: lhs_est.mean,
        lhs_se: lhs_est.se,
        rhs,
        rhs_se: transfer.direct.se / m,
        combined_se,
        constant_used: constant,
        verdict: Verdict::from_difference(lhs_est.mean - rhs, combined_se),
        transfer: Some(transfer),
        density_gap: None,
    })
}

/// `|P_T f(x) - P_T f(y)| <= ||f||_∞ √(2C) |x-y| e^{C|x-y|²}`, with the
/// intermediate `E|1 - R_T|` bound reported alongside.
pub fn strong_feller_from_samples(
    f: &TestFunction,
    samples: &[CouplingSample],
    constant: f64,
    dist: f64,
) -> Result<HarnackReport> {
    let diffs: Vec<f64> = samples
        .iter()
        .map(|s| f.eval(s.x_terminal) - f.eval(s.y_terminal))
        .collect();
    let d = mean_se(&diffs);
    let xs = mean_se(&samples.iter().map(|s| f.eval(s.x_terminal)).collect::<Vec<_>>());
    let ys = direct_estimate_y(f, samples);
    let bound = (2.0 * constant).sqrt() * dist * (constant * dist * dist).exp();
    let rhs = f.sup_norm() * bound;
    let lhs = d.mean.abs();
    let abs_gap = mean_se(&samples.iter().map(|s| (1.0 - s.weight.r).abs()).collect::<Vec<_>>());
    Ok(HarnackReport {
        lhs,
        lhs_se: d.se,
        rhs,
        rhs_se: 0.0,
        combined_se: d.se,
        constant_used: constant,
        verdict: Verdict::from_difference(lhs - rhs, d.se),
        transfer: Some(TransferCheck {
            direct: ys,
            weighted: xs,
            difference_se: d.se,
        }),
        density_gap: Some(DensityGap {
            mean_abs: abs_gap,
            bound,
            verdict: Verdict::from_difference(abs_gap.mean - bound, abs_gap.se),
        }),
    })
}

/// Full Harnack check for one query.
pub fn check_harnack(f: &TestFunction, q: &HarnackQuery, variant: ConstantVariant) -> Result<HarnackReport> {
    q.validate()?;
    let constant = variant.constant(q.horizon, &q.drift, q.hurst)?;
    let engine = PathEngine::for_query(q)?;
    let samples = engine.coupling_samples(q, variant.coupling())?;
    harnack_from_samples(f, &samples, q.p, constant, q.dist())
}

/// Log-Harnack check with `C(T,K,H)`.
pub fn check_log_harnack(f: &TestFunction, q: &HarnackQuery) -> Result<HarnackReport> {
    q.validate()?;
    let constant = constant_c(q.horizon, q.drift.lipschitz(), q.hurst)?;
    let engine = PathEngine::for_query(q)?;
    let samples = engine.coupling_samples(q, CouplingVariant::Thm31)?;
    log_harnack_from_samples(f, &samples, constant, q.dist())
}

/// Strong Feller gap with `C(T,K,H)` and common random numbers.
pub fn strong_feller_gap(f: &TestFunction, q: &HarnackQuery) -> Result<HarnackReport> {
    q.validate()?;
    let constant = constant_c(q.horizon, q.drift.lipschitz(), q.hurst)?;
    let engine = PathEngine::for_query(q)?;
    let samples = engine.coupling_samples(q, CouplingVariant::Thm31)?;
    strong_feller_from_samples(f, &samples, constant, q.dist())
}
