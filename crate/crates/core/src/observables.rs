//! Occupations, g²(0), detuning sweeps, the blockade-threshold search and the
//! line-splitting scan.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{FockBasis, Mode};
use crate::model::SystemParams;
use crate::steady::{converge_truncation, steady_state_with, DensityMatrix, Observable, SolverOptions};

/// Imaginary residue above which an expectation value is rejected.
pub const IMAG_TOL: f64 = 1e-8;
/// Occupation below which g²(0) is reported as undefined.
pub const OCCUPATION_FLOOR: f64 = 1e-14;

fn real_expectation(basis: &FockBasis, rho: &DensityMatrix, diag: impl Fn(usize) -> f64) -> Result<f64> {
    if rho.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: rho.dim(),
        });
    }
    let m = rho.matrix();
    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for k in 0..basis.dim() {
        acc += diag(k) * m[(k, k)];
    }
    if acc.im.abs() > IMAG_TOL {
        return Err(Error::NumericalCorruption { imag: acc.im });
    }
    Ok(acc.re)
}

fn occupation_of(basis: &FockBasis, k: usize, mode: Mode) -> f64 {
    let (s, i) = basis.state(k);
    match mode {
        Mode::Seed => s as f64,
        Mode::Idler => i as f64,
    }
}

/// `Tr[â†â ρ]` for `mode`.
pub fn mean_occupation(basis: &FockBasis, rho: &DensityMatrix, mode: Mode) -> Result<f64> {
    Ok(real_expectation(basis, rho, |k| occupation_of(basis, k, mode))?.max(0.0))
}

/// `Tr[â†²â² ρ] / Tr[â†â ρ]²`.
pub fn g2_zero(basis: &FockBasis, rho: &DensityMatrix, mode: Mode) -> Result<f64> {
    let n = mean_occupation(basis, rho, mode)?;
    if n < OCCUPATION_FLOOR {
        return Err(Error::UndefinedG2 { occupation: n });
    }
    let pairs = real_expectation(basis, rho, |k| {
        let n = occupation_of(basis, k, mode);
        n * (n - 1.0)
    })?;
    Ok(pairs.max(0.0) / (n * n))
}

/// How the truncation is chosen for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NmaxPolicy {
    Fixed(usize),
    /// Converge ⟨n̂_s⟩ and ⟨n̂_i⟩ at the grid point with the largest linear
    /// occupation, then use that `n_max` for the whole grid.
    Auto { rel_tol: f64, start: usize, limit: usize },
}

impl Default for NmaxPolicy {
    fn default() -> Self {
        NmaxPolicy::Fixed(4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointValues {
    pub n_s: f64,
    pub n_i: f64,
    /// `None` when the seed occupation is below [`OCCUPATION_FLOOR`].
    pub g2: Option<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub axis: f64,
    pub n_max: usize,
    pub values: Option<PointValues>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_name: String,
    pub params: SystemParams,
    pub n_max: usize,
    pub points: Vec<SweepPoint>,
}

fn fmt_opt(out: &mut String, v: Option<f64>) {
    match v {
        Some(x) => {
            let _ = write!(out, "{x:.16e}");
        }
        None => out.push_str("null"),
    }
}

impl SweepResult {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.axis).collect()
    }

    pub fn n_s(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.values.map(|v| v.n_s)).collect()
    }

    pub fn g2(&self) -> Vec<Option<f64>> {
        self.points.iter().map(|p| p.values.and_then(|v| v.g2)).collect()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.values.is_none()).count()
    }

    /// Smallest g²(0) over successful points, with its axis value.
    pub fn min_g2(&self) -> Option<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.values.and_then(|v| v.g2).map(|g| (p.axis, g)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn max_n_s(&self) -> Option<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.values.map(|v| (p.axis, v.n_s)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// CSV with columns `axis,n_s,n_i,g2,residual,n_max`; failed values are `null`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},n_s,n_i,g2,residual,n_max\n", self.axis_name);
        for p in &self.points {
            fmt_opt(&mut out, Some(p.axis));
            let v = p.values;
            for field in [v.map(|v| v.n_s), v.map(|v| v.n_i), v.and_then(|v| v.g2), v.map(|v| v.residual)] {
                out.push(',');
                fmt_opt(&mut out, field);
            }
            let _ = writeln!(out, ",{}", p.n_max);
        }
        out
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite grid value".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Evenly spaced grid of `n` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Resolves the truncation used for every point of `grid`.
pub fn resolve_n_max(params: &SystemParams, grid: &[f64], policy: NmaxPolicy, opts: &SolverOptions) -> Result<usize> {
    match policy {
        NmaxPolicy::Fixed(n) => Ok(n),
        NmaxPolicy::Auto { rel_tol, start, limit } => {
            let worst = grid
                .iter()
                .copied()
                .max_by(|a, b| {
                    let na = params.with_delta(*a).linear_occupation();
                    let nb = params.with_delta(*b).linear_occupation();
                    na.total_cmp(&nb)
                })
                .ok_or_else(|| Error::InvalidParameter("empty grid".into()))?;
            let (_, report) = converge_truncation(
                &params.with_delta(worst),
                &[Observable::SeedOccupation, Observable::IdlerOccupation],
                rel_tol,
                start,
                limit,
                opts,
            )?;
            Ok(report.final_n_max)
        }
    }
}

fn solve_point(params: &SystemParams, basis: &FockBasis, opts: &SolverOptions) -> Result<PointValues> {
    let model = params.lindblad_model(basis)?;
    let sol = steady_state_with(&model, opts)?;
    let n_s = mean_occupation(basis, &sol.rho, Mode::Seed)?;
    let n_i = mean_occupation(basis, &sol.rho, Mode::Idler)?;
    let g2 = match g2_zero(basis, &sol.rho, Mode::Seed) {
        Ok(g) => Some(g),
        Err(Error::UndefinedG2 { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(PointValues {
        n_s,
        n_i,
        g2,
        residual: sol.residual,
    })
}

/// One steady solve per detuning (in units of Γ_s). Failed points are kept
/// with `values = None` and the error message.
pub fn detuning_sweep(
    params: &SystemParams,
    grid: &[f64],
    policy: NmaxPolicy,
    opts: &SolverOptions,
) -> Result<SweepResult> {
    check_grid(grid)?;
    params.validate()?;
    let n_max = resolve_n_max(params, grid, policy, opts)?;
    let basis = FockBasis::new(n_max)?;
    let points = grid
        .par_iter()
        .map(|&delta| {
            let p = params.with_delta(delta);
            match solve_point(&p, &basis, opts) {
                Ok(values) => SweepPoint {
                    axis: delta,
                    n_max,
                    values: Some(values),
                    error: None,
                },
                Err(e) => SweepPoint {
                    axis: delta,
                    n_max,
                    values: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepResult {
        axis_name: "delta".into(),
        params: *params,
        n_max,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub n_max: usize,
    /// Detunings scanned by the coarse search for the g²(0) minimum.
    pub delta_window: (f64, f64),
    pub coarse_points: usize,
    /// Bisection stops once the bracket on g̃ is narrower than this.
    pub g_tol: f64,
    pub solver: SolverOptions,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        Self {
            n_max: 4,
            delta_window: (-2.0, 2.0),
            coarse_points: 17,
            g_tol: 1e-3,
            solver: SolverOptions::default(),
        }
    }
}

/// `min_Δ g²(0)` at the current `g_eff` and its location.
///
/// A coarse grid brackets the dip, golden-section search refines it.
pub fn min_g2_over_detuning(params: &SystemParams, opts: &ThresholdOptions) -> Result<(f64, f64)> {
    let basis = FockBasis::new(opts.n_max)?;
    let eval = |delta: f64| -> Result<f64> {
        let model = params.with_delta(delta).lindblad_model(&basis)?;
        let rho = steady_state_with(&model, &opts.solver)?.rho;
        g2_zero(&basis, &rho, Mode::Seed)
    };
    let (lo, hi) = opts.delta_window;
    let coarse = linspace(lo, hi, opts.coarse_points.max(3));
    let values = coarse.par_iter().map(|&d| eval(d)).collect::<Result<Vec<f64>>>()?;
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("coarse grid is nonempty");
    let mut a = coarse[best.saturating_sub(1)];
    let mut b = coarse[(best + 1).min(coarse.len() - 1)];

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = eval(x1)?;
    let mut f2 = eval(x2)?;
    while b - a > 1e-5 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = eval(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = eval(x2)?;
        }
    }
    let (x, f) = if f1 < f2 { (x1, f1) } else { (x2, f2) };
    if values[best] < f {
        Ok((coarse[best], values[best]))
    } else {
        Ok((x, f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    /// g̃/Γ_s at which `min_Δ g²(0)` crosses the target.
    pub g_eff: f64,
    /// Set when the target is already met at the lower bracket edge, as for
    /// target 1 in the linear cavity.
    pub degenerate: bool,
    pub bisection_steps: usize,
}

/// `|min g² − target|` at the lower bracket edge below which the threshold is
/// reported as degenerate; the coherent-state accuracy of g².
pub const DEGENERATE_TOL: f64 = 1e-6;

/// Bisection on g̃ for `min_Δ g²(0) = target_g2`.
pub fn blockade_threshold(
    params: &SystemParams,
    target_g2: f64,
    bracket: (f64, f64),
    opts: &ThresholdOptions,
) -> Result<Threshold> {
    if !(target_g2 > 0.0 && target_g2 <= 1.0) {
        return Err(Error::InvalidParameter(format!("target g2 must lie in (0, 1], got {target_g2}")));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("invalid bracket [{lo}, {hi}]")));
    }
    let f = |g: f64| -> Result<f64> { Ok(min_g2_over_detuning(&params.with_g_eff(g), opts)?.1 - target_g2) };
    let f_lo = f(lo)?;
    if f_lo.abs() <= DEGENERATE_TOL {
        return Ok(Threshold {
            g_eff: lo,
            degenerate: true,
            bisection_steps: 0,
        });
    }
    let f_hi = f(hi)?;
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let lo_sign = f_lo.signum();
    let mut steps = 0;
    while hi - lo > opts.g_tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)?.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Ok(Threshold {
        g_eff: 0.5 * (lo + hi),
        degenerate: false,
        bisection_steps: steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingCurve {
    /// `|F_s|` in units of `√Γ_s`.
    pub f_s: f64,
    /// `⟨n̂_s⟩ / (|F_s|²/Γ_s)` per detuning; `None` at failed points.
    pub normalized: Vec<Option<f64>>,
    pub local_maxima: usize,
    pub sweep: SweepResult,
}

/// Number of interior local maxima, treating plateaus as one point.
pub fn count_local_maxima(values: &[f64]) -> usize {
    let mut dedup: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        if dedup.last().is_none_or(|&last| (v - last).abs() > 1e-12 * v.abs().max(last.abs())) {
            dedup.push(v);
        }
    }
    dedup.windows(3).filter(|w| w[1] > w[0] && w[1] > w[2]).count()
}

/// Normalized seed response vs detuning for each drive strength.
pub fn splitting_scan(
    params: &SystemParams,
    f_grid: &[f64],
    delta_grid: &[f64],
    policy: NmaxPolicy,
    opts: &SolverOptions,
) -> Result<Vec<SplittingCurve>> {
    if f_grid.is_empty() {
        return Err(Error::InvalidParameter("empty drive grid".into()));
    }
    f_grid
        .iter()
        .map(|&f| {
            if !(f > 0.0) {
                return Err(Error::InvalidParameter(format!("drive must be positive, got {f}")));
            }
            let p = params.with_drive(num_complex::Complex64::new(f, 0.0));
            let sweep = detuning_sweep(&p, delta_grid, policy, opts)?;
            let scale = f * f / p.gamma_s;
            let normalized: Vec<Option<f64>> = sweep.n_s().into_iter().map(|v| v.map(|n| n / scale)).collect();
            let local_maxima = if normalized.iter().all(Option::is_some) {
                count_local_maxima(&normalized.iter().map(|v| v.unwrap()).collect::<Vec<_>>())
            } else {
                0
            };
            Ok(SplittingCurve {
                f_s: f,
                normalized,
                local_maxima,
                sweep,
            })
        })
        .collect()
}
