//! One function per experiment. Each returns a per-path (or per-cell)
//! table and a summary record.

use fbm_harnack::bismut::{bismut_samples, fd_samples, BismutSample};
use fbm_harnack::fbm::{covariance as cov_exact, kernel_product_integral, kernel_variance_factor, kstar_apply, CholeskyFbm, VolterraSampler};
use fbm_harnack::harnack::{
    constant_c, constant_c4, constant_c_tilde, harnack_from_samples, log_harnack_from_samples,
    strong_feller_from_samples, CouplingSample, PathEngine, TransferCheck,
};
use fbm_harnack::mc::{map_paths, mean_se, neumaier_sum, Estimate};
use fbm_harnack::sde::{contraction_defect, coupled_solve, CouplingSpeed};
use fbm_harnack::{
    ConstantVariant, DerivativeQuery, Error, HarnackQuery, HarnackReport, NoiseStream, TestFunction,
    Verdict,
};

use crate::config::{Experiment, ExperimentConfig};
use crate::output::{Cell, Record, Table};
use crate::RunError;

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    /// `None` when the check does not apply to this configuration.
    pub ok: Option<bool>,
    /// Distance from the threshold, positive when the check passes.
    pub margin: f64,
}

impl Check {
    fn new(name: &'static str, ok: bool, margin: f64) -> Self {
        Self {
            name,
            ok: Some(ok),
            margin,
        }
    }

    fn skipped(name: &'static str) -> Self {
        Self {
            name,
            ok: None,
            margin: f64::NAN,
        }
    }

    fn from_verdict(name: &'static str, v: Verdict, margin: f64) -> Self {
        Self::new(name, v.ok(), margin)
    }

    fn status(&self) -> &'static str {
        match self.ok {
            Some(true) => "holds",
            Some(false) => "violated",
            None => "not_applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub experiment: Experiment,
    pub detail: Table,
    pub summary: Record,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.ok != Some(false))
    }
}

struct Head {
    estimate: f64,
    se: f64,
    n_paths: usize,
    constant: f64,
}

fn finish(cfg: &ExperimentConfig, exp: Experiment, head: Head, extra: Record, checks: Vec<Check>, detail: Table) -> Outcome {
    let all_ok = checks.iter().all(|c| c.ok != Some(false));
    let margin = checks
        .iter()
        .filter(|c| c.ok.is_some())
        .map(|c| c.margin)
        .fold(f64::INFINITY, f64::min);
    let mut s = Record::default();
    s.put("experiment", exp.name())
        .put("estimate", head.estimate)
        .put("se", head.se)
        .put("n_paths", head.n_paths)
        .put("seed", cfg.seed)
        .put("constant", head.constant)
        .put("verdict", all_ok)
        .put("margin", if margin.is_finite() { margin } else { f64::NAN })
        .put("H", cfg.hurst)
        .put("T", cfg.horizon)
        .put("n_steps", cfg.n_steps);
    for c in &checks {
        s.put(c.name, Cell::text(c.status()));
        s.put(&format!("{}_margin", c.name), c.margin);
    }
    s.fields.extend(extra.fields);
    Outcome {
        experiment: exp,
        detail,
        summary: s,
        checks,
    }
}

pub fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let exp = cfg.validate()?;
    match exp {
        Experiment::Covariance => covariance(cfg),
        Experiment::Isometry => isometry(cfg),
        Experiment::Girsanov => girsanov(cfg),
        Experiment::Coupling => coupling(cfg),
        Experiment::Harnack | Experiment::LogHarnack | Experiment::StrongFeller => inequality(cfg, exp),
        Experiment::Derivative => derivative(cfg),
        Experiment::Constants => constants(cfg),
    }
}

const COV_CHUNK: usize = 1024;

fn covariance(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let h = cfg.hurst_param()?;
    let grid = cfg.grid()?;
    let n = grid.steps();
    let sampler = VolterraSampler::new(h, &grid)?;
    let chol = CholeskyFbm::new(h, &grid)?;
    let pairs: Vec<(usize, usize)> = (1..=n).flat_map(|i| (i..=n).map(move |j| (i, j))).collect();
    let n_paths = cfg.n_paths;
    let chunks = n_paths.div_ceil(COV_CHUNK);
    // chunk boundaries are fixed, so the reduction order is too
    let partial = map_paths(chunks, |c| {
        let start = c as usize * COV_CHUNK;
        let end = (start + COV_CHUNK).min(n_paths);
        let mut acc = vec![0.0; 4 * pairs.len()];
        for p in start..end {
            let (_, b) = sampler.sample_path(cfg.seed, p as u64);
            let mut stream = NoiseStream::new(cfg.seed, (n_paths + p) as u64);
            let bc = chol.sample(&mut stream);
            for (k, &(i, j)) in pairs.iter().enumerate() {
                let v = b.values[i] * b.values[j];
                let w = bc.values[i] * bc.values[j];
                acc[4 * k] += v;
                acc[4 * k + 1] += v * v;
                acc[4 * k + 2] += w;
                acc[4 * k + 3] += w * w;
            }
        }
        Ok(acc)
    })?;
    let nf = n_paths as f64;
    let moments = |slot: usize| -> Estimate {
        let s1 = neumaier_sum(partial.iter().map(|a| a[slot]));
        let s2 = neumaier_sum(partial.iter().map(|a| a[slot + 1]));
        let mean = s1 / nf;
        let var = ((s2 / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
        Estimate {
            mean,
            se: (var / nf).sqrt(),
        }
    };
    let mut detail = Table::new(&[
        "i", "j", "t_i", "t_j", "exact", "volterra", "volterra_se", "volterra_error", "cholesky", "cholesky_se",
        "cholesky_error",
    ]);
    let (mut worst_v, mut worst_c, mut max_err_v, mut max_err_c, mut max_z) =
        (f64::INFINITY, f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    let mut terminal = Estimate::exact(f64::NAN);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let (ti, tj) = (grid.node(i), grid.node(j));
        let exact = cov_exact(h, ti, tj)?;
        let v = moments(4 * k);
        let c = moments(4 * k + 2);
        let (ev, ec) = ((v.mean - exact).abs(), (c.mean - exact).abs());
        worst_v = worst_v.min(5.0 * v.se + cfg.allowance - ev);
        worst_c = worst_c.min(5.0 * c.se - ec);
        max_err_v = max_err_v.max(ev);
        max_err_c = max_err_c.max(ec);
        if v.se > 0.0 {
            max_z = max_z.max(ev / v.se);
        }
        if i == n && j == n {
            terminal = v;
        }
        detail.push(vec![
            i.into(),
            j.into(),
            ti.into(),
            tj.into(),
            exact.into(),
            v.mean.into(),
            v.se.into(),
            ev.into(),
            c.mean.into(),
            c.se.into(),
            ec.into(),
        ]);
    }
    let mut extra = Record::default();
    extra
        .put("exact_terminal_variance", grid.horizon().powf(2.0 * h.value()))
        .put("max_error_volterra", max_err_v)
        .put("max_error_cholesky", max_err_c)
        .put("max_z_volterra", max_z)
        .put("allowance", cfg.allowance);
    let checks = vec![
        Check::new("volterra_law", worst_v >= 0.0, worst_v),
        Check::new("cholesky_law", worst_c >= 0.0, worst_c),
    ];
    let head = Head {
        estimate: terminal.mean,
        se: terminal.se,
        n_paths,
        constant: f64::NAN,
    };
    Ok(finish(cfg, Experiment::Covariance, head, extra, checks, detail))
}

/// Node indices `n/8, n/4, n/2, 3n/4, n` (deduplicated, at least 1).
fn probe_indices(n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = [n / 8, n / 4, n / 2, 3 * n / 4, n].iter().map(|&k| k.max(1)).collect();
    v.dedup();
    v
}

fn isometry(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let h = cfg.hurst_param()?;
    let grid = cfg.grid()?;
    let n = grid.steps();
    let idx = probe_indices(n);
    let images = idx
        .iter()
        .map(|&k| {
            let phi: Vec<f64> = (0..n).map(|j| if j < k { 1.0 } else { 0.0 }).collect();
            kstar_apply(h, &grid, &phi)
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut detail = Table::new(&["kind", "t", "s", "exact", "value", "rel_error"]);
    let (mut max_kernel, mut max_iso) = (0.0f64, 0.0f64);
    let mut terminal = f64::NAN;
    for a in 0..idx.len() {
        for b in a..idx.len() {
            let (t, s) = (grid.node(idx[a]), grid.node(idx[b]));
            let exact = cov_exact(h, t, s)?;
            let kv = kernel_product_integral(h, t, s)?;
            let iv = images[a].l2_inner(&images[b])?;
            let (rk, ri) = (((kv - exact) / exact).abs(), ((iv - exact) / exact).abs());
            max_kernel = max_kernel.max(rk);
            max_iso = max_iso.max(ri);
            if idx[a] == n && idx[b] == n {
                terminal = iv;
            }
            detail.push(vec!["kernel_identity".into(), t.into(), s.into(), exact.into(), kv.into(), rk.into()]);
            detail.push(vec!["isometry".into(), t.into(), s.into(), exact.into(), iv.into(), ri.into()]);
        }
    }
    let mut extra = Record::default();
    extra
        .put("max_rel_kernel_identity", max_kernel)
        .put("max_rel_isometry", max_iso)
        .put("tolerance", cfg.tolerance);
    let checks = vec![
        Check::new("kernel_identity", max_kernel <= cfg.tolerance, cfg.tolerance - max_kernel),
        Check::new("isometry", max_iso <= cfg.tolerance, cfg.tolerance - max_iso),
    ];
    let head = Head {
        estimate: terminal,
        se: 0.0,
        n_paths: 0,
        constant: f64::NAN,
    };
    Ok(finish(cfg, Experiment::Isometry, head, extra, checks, detail))
}

fn harnack_query(cfg: &ExperimentConfig) -> Result<HarnackQuery, RunError> {
    Ok(HarnackQuery {
        x: cfg.x,
        y: cfg.y,
        p: cfg.p,
        horizon: cfg.horizon,
        drift: cfg.drift_spec()?,
        hurst: cfg.hurst_param()?,
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
    })
}

fn coupling_batch(cfg: &ExperimentConfig) -> Result<(HarnackQuery, Vec<CouplingSample>), RunError> {
    let q = harnack_query(cfg)?;
    let engine = PathEngine::for_query(&q)?;
    let samples = engine.coupling_samples(&q, cfg.variant.coupling())?;
    Ok((q, samples))
}

const MOMENTS: [f64; 3] = [1.5, 2.0, 3.0];

fn girsanov(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let (q, samples) = coupling_batch(cfg)?;
    let constant = cfg.variant.constant(q.horizon, &q.drift, q.hurst)?;
    let d2 = q.dist() * q.dist();
    let mut detail = Table::new(&["path", "tau_index", "x_terminal", "y_terminal", "m", "qv", "r", "novikov_margin"]);
    let mut novikov_worst = f64::INFINITY;
    let mut novikov_ok = 0usize;
    for (p, s) in samples.iter().enumerate() {
        let margin = constant * d2 - 0.5 * s.weight.qv;
        novikov_worst = novikov_worst.min(margin);
        if margin >= 0.0 {
            novikov_ok += 1;
        }
        detail.push(vec![
            p.into(),
            Cell::index(s.tau_index),
            s.x_terminal.into(),
            s.y_terminal.into(),
            s.weight.m.into(),
            s.weight.qv.into(),
            s.weight.r.into(),
            margin.into(),
        ]);
    }
    let r = mean_se(&samples.iter().map(|s| s.weight.r).collect::<Vec<_>>());
    let mean_margin = 4.0 * r.se - (r.mean - 1.0).abs();
    let mut checks = vec![
        Check::new("mean_one", mean_margin >= 0.0, mean_margin),
        Check::new("novikov", novikov_worst >= 0.0, novikov_worst),
    ];
    let mut extra = Record::default();
    extra
        .put("variant", cfg.variant.name())
        .put("drift", q.drift.family.name())
        .put("dist", q.dist())
        .put("mean_z", (r.mean - 1.0) / r.se)
        .put("novikov_fraction", novikov_ok as f64 / samples.len() as f64)
        .put(
            "max_half_qv_over_dist2",
            samples.iter().map(|s| 0.5 * s.weight.qv).fold(0.0, f64::max) / d2,
        );
    const MOMENT_NAMES: [&str; 3] = ["moment_1_5", "moment_2", "moment_3"];
    for (alpha, name) in MOMENTS.iter().zip(MOMENT_NAMES) {
        let e = mean_se(&samples.iter().map(|s| s.weight.r.powf(*alpha)).collect::<Vec<_>>());
        let bound = (alpha * (alpha - 1.0) * constant * d2).exp() * (1.0 + 4.0 * e.se);
        extra
            .put(&format!("{name}_estimate"), e.mean)
            .put(&format!("{name}_se"), e.se)
            .put(&format!("{name}_bound"), bound);
        checks.push(Check::new(name, e.mean <= bound, bound - e.mean));
    }
    let head = Head {
        estimate: r.mean,
        se: r.se,
        n_paths: samples.len(),
        constant,
    };
    Ok(finish(cfg, Experiment::Girsanov, head, extra, checks, detail))
}

fn coupling(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let q = harnack_query(cfg)?;
    let grid = q.grid()?;
    let n = grid.steps();
    let variant = cfg.variant.coupling();
    let sampler = VolterraSampler::new(q.hurst, &grid)?;
    let speed = CouplingSpeed::new(variant, q.drift.coupling_constant()?, q.horizon, q.dist())?;
    let rows = map_paths(q.n_paths, |p| {
        let (_, b) = sampler.sample_path(q.seed, p);
        let c = coupled_solve(q.x, q.y, &q.drift, &b, variant)?;
        let defect = contraction_defect(&c, &q.drift, variant)?;
        let terminal_gap = (c.x.terminal() - c.y.terminal()).abs();
        Ok((c.tau_index, c.gap_at_coupling, terminal_gap, defect))
    })?;
    let mut detail = Table::new(&["path", "tau_index", "tau_time", "gap_at_coupling", "terminal_gap", "contraction_defect"]);
    let mut before_end = 0usize;
    let (mut max_gap, mut max_terminal, mut max_defect) = (0.0f64, 0.0f64, 0.0f64);
    let mut taus = Vec::with_capacity(rows.len());
    for (p, &(tau, gap, tg, defect)) in rows.iter().enumerate() {
        if matches!(tau, Some(i) if i < n) {
            before_end += 1;
        }
        let tau_time = tau.map_or(f64::NAN, |i| grid.node(i));
        if tau.is_some() {
            taus.push(tau_time);
            max_gap = max_gap.max(gap);
            max_terminal = max_terminal.max(tg);
        }
        max_defect = max_defect.max(defect);
        detail.push(vec![p.into(), Cell::index(tau), tau_time.into(), gap.into(), tg.into(), defect.into()]);
    }
    let total = rows.len();
    let frac = before_end as f64 / total as f64;
    let gap_bound = 5.0 * grid.dt() * speed.max();
    let tau_mean = mean_se(&taus);
    let mut extra = Record::default();
    extra
        .put("variant", cfg.variant.name())
        .put("drift", q.drift.family.name())
        .put("dist", q.dist())
        .put("coupled_fraction", frac)
        .put("mean_tau_time", tau_mean.mean)
        .put("max_gap_at_coupling", max_gap)
        .put("gap_bound", gap_bound)
        .put("max_terminal_gap", max_terminal)
        .put("max_contraction_defect", max_defect);
    let checks = vec![
        Check::new("coupled_before_end", before_end == total, frac - 1.0),
        Check::new("identified_at_end", max_terminal == 0.0, -max_terminal),
        Check::new("gap_at_coupling", max_gap <= gap_bound, gap_bound - max_gap),
    ];
    let head = Head {
        estimate: frac,
        se: (frac * (1.0 - frac) / total as f64).sqrt(),
        n_paths: total,
        constant: speed.max(),
    };
    Ok(finish(cfg, Experiment::Coupling, head, extra, checks, detail))
}

fn inequality(cfg: &ExperimentConfig, exp: Experiment) -> Result<Outcome, RunError> {
    let f = cfg.test_function().map_err(|m| crate::config_error("f", m))?;
    let q = harnack_query(cfg)?;
    let engine = PathEngine::for_query(&q)?;
    let (variant, constant) = match exp {
        Experiment::Harnack => (cfg.variant, cfg.variant.constant(q.horizon, &q.drift, q.hurst)?),
        _ => (
            ConstantVariant::Thm31,
            constant_c(q.horizon, q.drift.lipschitz(), q.hurst)?,
        ),
    };
    let samples = engine.coupling_samples(&q, variant.coupling())?;
    let mut detail = Table::new(&["path", "tau_index", "x_terminal", "y_terminal", "r", "f_x", "f_y"]);
    for (p, s) in samples.iter().enumerate() {
        detail.push(vec![
            p.into(),
            Cell::index(s.tau_index),
            s.x_terminal.into(),
            s.y_terminal.into(),
            s.weight.r.into(),
            f.eval(s.x_terminal).into(),
            f.eval(s.y_terminal).into(),
        ]);
    }
    let report: HarnackReport = match exp {
        Experiment::Harnack => harnack_from_samples(&f, &samples, q.p, constant, q.dist())?,
        Experiment::LogHarnack => log_harnack_from_samples(&f, &samples, constant, q.dist())?,
        _ => strong_feller_from_samples(&f, &samples, constant, q.dist())?,
    };
    let transfer = report
        .transfer
        .unwrap_or_else(|| TransferCheck::from_samples(&f, &samples));
    let mut extra = Record::default();
    extra
        .put("variant", variant.name())
        .put("drift", q.drift.family.name())
        .put("f", f.name())
        .put("x", q.x)
        .put("y", q.y)
        .put("p", q.p)
        .put("lhs", report.lhs)
        .put("lhs_se", report.lhs_se)
        .put("rhs", report.rhs)
        .put("rhs_se", report.rhs_se)
        .put("combined_se", report.combined_se)
        .put(
            "exponent_factor",
            match exp {
                Experiment::Harnack => (q.p / (q.p - 1.0) * constant * q.dist() * q.dist()).exp(),
                Experiment::LogHarnack => constant * q.dist() * q.dist(),
                _ => (constant * q.dist() * q.dist()).exp(),
            },
        )
        .put("transfer_weighted", transfer.weighted.mean)
        .put("transfer_weighted_se", transfer.weighted.se)
        .put("transfer_direct", transfer.direct.mean)
        .put("transfer_direct_se", transfer.direct.se)
        .put("transfer_difference_se", transfer.difference_se);
    let se = report.combined_se;
    let mut checks = vec![Check::from_verdict(
        "inequality",
        report.verdict,
        report.margin() + crate::SE_THRESHOLD * se,
    )];
    if exp == Experiment::StrongFeller {
        let g = report.density_gap.expect("strong Feller reports the density gap");
        extra
            .put("density_gap_mean", g.mean_abs.mean)
            .put("density_gap_se", g.mean_abs.se)
            .put("density_gap_bound", g.bound);
        checks.push(Check::from_verdict(
            "density_gap",
            g.verdict,
            g.bound - g.mean_abs.mean + crate::SE_THRESHOLD * g.mean_abs.se,
        ));
    } else {
        let allowed = crate::SE_THRESHOLD * transfer.difference_se;
        checks.push(Check::new(
            "transfer",
            transfer.consistent(),
            allowed - transfer.difference().abs(),
        ));
    }
    extra.put("inequality_verdict", report.verdict.name());
    let head = Head {
        estimate: report.lhs,
        se: report.lhs_se,
        n_paths: samples.len(),
        constant,
    };
    Ok(finish(cfg, exp, head, extra, checks, detail))
}

fn derivative(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let f = cfg.test_function().map_err(|m| crate::config_error("f", m))?;
    let q = DerivativeQuery {
        x: cfg.x,
        direction: cfg.y,
        horizon: cfg.horizon,
        drift: cfg.drift_spec()?,
        hurst: cfg.hurst_param()?,
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        seed: cfg.seed,
    };
    let samples: Vec<BismutSample> = bismut_samples(&q)?;
    let fd = fd_samples(&f, cfg.epsilon, &q)?;
    let mut detail = Table::new(&["path", "x_terminal", "weight", "qv", "f_times_weight", "fd_quotient"]);
    let mut products = Vec::with_capacity(samples.len());
    for (p, (s, d)) in samples.iter().zip(&fd).enumerate() {
        let v = f.eval(s.x_terminal) * s.weight.value;
        products.push(v);
        detail.push(vec![
            p.into(),
            s.x_terminal.into(),
            s.weight.value.into(),
            s.weight.qv.into(),
            v.into(),
            (*d).into(),
        ]);
    }
    let est = mean_se(&products);
    let fd_est = mean_se(&fd);
    let paired: Vec<f64> = products.iter().zip(&fd).map(|(a, b)| a - b).collect();
    let combined = mean_se(&paired);
    let allowed = (0.05 * fd_est.mean.abs()).max(crate::SE_THRESHOLD * combined.se);
    let weights = mean_se(&samples.iter().map(|s| s.weight.value).collect::<Vec<_>>());
    let max_qv = samples.iter().map(|s| s.weight.qv).fold(0.0, f64::max);
    let c4 = if q.hurst.is_brownian() {
        f64::NAN
    } else {
        constant_c4(q.horizon, q.drift.deriv_bound(), q.hurst)?
    };
    let qv_bound = c4 * q.direction * q.direction;
    let closed = if q.hurst.is_brownian() && q.drift.a == 0.0 && f == TestFunction::Sin {
        Some((-0.5 * q.horizon).exp() * q.x.cos() * q.direction)
    } else {
        None
    };
    let mut extra = Record::default();
    extra
        .put("drift", q.drift.family.name())
        .put("f", f.name())
        .put("x", q.x)
        .put("direction", q.direction)
        .put("epsilon", cfg.epsilon)
        .put("fd_estimate", fd_est.mean)
        .put("fd_se", fd_est.se)
        .put("combined_se", combined.se)
        .put("weight_mean", weights.mean)
        .put("weight_se", weights.se)
        .put("max_qv", max_qv)
        .put("qv_limit", qv_bound)
        .put("closed_form_value", closed.unwrap_or(f64::NAN));
    let mean_margin = crate::SE_THRESHOLD * weights.se - weights.mean.abs();
    let mut checks = vec![
        Check::new("fd_agreement", (est.mean - fd_est.mean).abs() <= allowed, allowed - (est.mean - fd_est.mean).abs()),
        Check::new("weight_mean_zero", mean_margin >= 0.0, mean_margin),
    ];
    checks.push(if c4.is_nan() {
        Check::skipped("qv_bound")
    } else {
        Check::new("qv_bound", max_qv <= qv_bound, qv_bound - max_qv)
    });
    checks.push(match closed {
        Some(v) => {
            let m = crate::SE_THRESHOLD * est.se - (est.mean - v).abs();
            Check::new("closed_form", m >= 0.0, m)
        }
        None => Check::skipped("closed_form"),
    });
    let head = Head {
        estimate: est.mean,
        se: est.se,
        n_paths: samples.len(),
        constant: c4,
    };
    Ok(finish(cfg, Experiment::Derivative, head, extra, checks, detail))
}

fn constants(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let h = cfg.hurst_param()?;
    let drift = cfg.drift_spec()?;
    let (k, k_bar) = match cfg.k {
        Some(k) => (k, k),
        None => (drift.lipschitz(), drift.deriv_bound()),
    };
    let c = constant_c(cfg.horizon, k, h)?;
    let ct = constant_c_tilde(cfg.horizon, k, h)?;
    let c4 = constant_c4(cfg.horizon, k_bar, h)?;
    let vh = kernel_variance_factor(h);
    let mut detail = Table::new(&["name", "value"]);
    for (name, v) in [("C", c), ("C_tilde", ct), ("C4", c4), ("V_H", vh)] {
        detail.push(vec![name.into(), v.into()]);
    }
    let mut extra = Record::default();
    extra
        .put("K", k)
        .put("K_bar", k_bar)
        .put("C", c)
        .put("C_tilde", ct)
        .put("C4", c4)
        .put("V_H", vh);
    let constant = match cfg.variant {
        ConstantVariant::Thm31 => c,
        ConstantVariant::Rem31 => ct,
        ConstantVariant::Cor41 => c4,
    };
    let head = Head {
        estimate: constant,
        se: 0.0,
        n_paths: 0,
        constant,
    };
    Ok(finish(cfg, Experiment::Constants, head, extra, Vec::new(), detail))
}
