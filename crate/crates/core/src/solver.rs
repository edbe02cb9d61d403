//! Discrete energy, its exact gradient, and a projected Barzilai-Borwein
//! descent with Armijo backtracking.
//!
//! The discrete energy is
//! `E = 1/2 Σ_edges |ΔQ|² + (h²/ε²) Σ_interior f*(Q)`,
//! where an edge joins 4-neighbours and counts when at least one endpoint is
//! an interior cell. Dirichlet cells are frozen.

use std::io::Write;
use std::sync::Arc;

use log::{debug, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct;
use crate::error::{Error, Result};
use crate::grid::{BoundarySpec, CellKind, DomainKind, Field, Grid, LoopSpec};
use crate::potential::MaterialParams;
use crate::qtensor::QTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParts {
    pub dirichlet: f64,
    pub potential: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// Rescaled units (vacuum manifold on the unit sphere).
    pub dirichlet: f64,
    pub potential: f64,
    pub total: f64,
    /// Same energies multiplied by `2 s*² / 3`.
    pub physical: EnergyParts,
}

impl EnergyBreakdown {
    fn new(dirichlet: f64, potential: f64, params: &MaterialParams) -> Self {
        let k = params.physical_factor();
        EnergyBreakdown {
            dirichlet,
            potential,
            total: dirichlet + potential,
            physical: EnergyParts {
                dirichlet: k * dirichlet,
                potential: k * potential,
                total: k * (dirichlet + potential),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    Fixed { step: f64 },
    BarzilaiBorwein,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Threshold on `sup |grad| / h²`.
    pub grad_tol: f64,
    pub step_rule: StepRule,
    pub truncation: bool,
    pub seed: u64,
    /// Amplitude of the warm-start noise.
    pub noise: f64,
    /// Solve on successively refined grids (down to 64 cells per axis)
    /// and prolong each solution as the next initial field.
    pub continuation: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 200_000,
            grad_tol: 1e-6,
            step_rule: StepRule::BarzilaiBorwein,
            truncation: true,
            seed: 0,
            noise: 0.01,
            continuation: true,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::config("solver.max_iters", "must be at least 1"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::config("solver.grad_tol", "must be positive"));
        }
        if let StepRule::Fixed { step } = self.step_rule {
            if !(step > 0.0) {
                return Err(Error::config("solver.step_rule.step", "must be positive"));
            }
        }
        if !(self.noise >= 0.0) {
            return Err(Error::config("solver.noise", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub energy_total: f64,
    pub energy_dirichlet: f64,
    pub energy_potential: f64,
    pub grad_sup: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveLog {
    pub records: Vec<IterRecord>,
    pub converged: bool,
    pub iterations: usize,
    /// Energy and gradient evaluations, including rejected trials.
    pub evaluations: usize,
    pub final_grad_sup: f64,
}

impl SolveLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,energy_total,energy_dirichlet,energy_potential,grad_sup,step")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                r.iter, r.energy_total, r.energy_dirichlet, r.energy_potential, r.grad_sup, r.step
            )?;
        }
        Ok(())
    }
}

/// Sum of a slice by a fixed pairwise tree, independent of thread count.
fn tree_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => tree_sum(&xs[..n / 2]) + tree_sum(&xs[n / 2..]),
    }
}

/// Per-row sums. `delta` is the energy change relative to the previous
/// iterate, accumulated from differences; `ss`, `sy`, `yy` are the
/// Barzilai-Borwein inner products of the step and gradient change.
#[derive(Debug, Clone, Copy, Default)]
struct RowSums {
    dirichlet: f64,
    potential: f64,
    delta: f64,
    ss: f64,
    sy: f64,
    yy: f64,
    grad_max_sq: f64,
}

impl RowSums {
    fn merge(rows: &[RowSums]) -> RowSums {
        match rows.len() {
            0 => RowSums::default(),
            1 => rows[0],
            n => {
                let (l, r) = (Self::merge(&rows[..n / 2]), Self::merge(&rows[n / 2..]));
                RowSums {
                    dirichlet: l.dirichlet + r.dirichlet,
                    potential: l.potential + r.potential,
                    delta: l.delta + r.delta,
                    ss: l.ss + r.ss,
                    sy: l.sy + r.sy,
                    yy: l.yy + r.yy,
                    grad_max_sq: l.grad_max_sq.max(r.grad_max_sq),
                }
            }
        }
    }
}

/// Previous iterate and its gradient.
#[derive(Clone, Copy)]
struct Previous<'a> {
    values: &'a [QTensor],
    grad: &'a [QTensor],
}

/// Row sums, optionally writing the gradient of the row. Interior-interior
/// edges are shared between their two endpoints, interior-Dirichlet edges
/// belong to the interior cell.
#[inline(always)]
fn row_kernel<const GRAD: bool, const PREV: bool>(
    grid: &Grid,
    values: &[QTensor],
    prev: Option<Previous<'_>>,
    params: &MaterialParams,
    scale: f64,
    j: usize,
    grad: &mut [QTensor],
) -> RowSums {
    let nx = grid.nx;
    let kinds = &grid.kinds[j * nx..(j + 1) * nx];
    let up = &grid.kinds[(j + 1).min(grid.ny - 1) * nx..];
    let down = &grid.kinds[j.saturating_sub(1) * nx..];
    let (pv, pg): (&[QTensor], &[QTensor]) = match prev {
        Some(p) => (p.values, p.grad),
        None => (&[], &[]),
    };
    let mut out = RowSums::default();
    for i in 0..nx {
        let k = j * nx + i;
        if kinds[i] != CellKind::Interior {
            if GRAD {
                grad[i] = QTensor::ZERO;
            }
            continue;
        }
        let q = values[k];
        let mut lap = QTensor::ZERO;
        let neighbours = [
            (k - 1, kinds[i - 1]),
            (k + 1, kinds[i + 1]),
            (k - nx, down[i]),
            (k + nx, up[i]),
        ];
        for (nb, kind) in neighbours {
            let d = q - values[nb];
            let w = if kind == CellKind::Interior { 0.25 } else { 0.5 };
            out.dirichlet += w * d.norm_sq();
            lap += d;
            if PREV {
                // d - d_old from the cell steps keeps full relative accuracy
                let step_diff = (q - pv[k]) - (values[nb] - pv[nb]);
                let d_old = pv[k] - pv[nb];
                out.delta += w * step_diff.dot(&(d + d_old));
            }
        }
        if GRAD {
            let (f, df) = params.fstar_and_grad(&q);
            out.potential += f;
            let gk = lap + df * scale;
            grad[i] = gk;
            out.grad_max_sq = out.grad_max_sq.max(gk.norm_sq());
            if PREV {
                let s = q - pv[k];
                let y = gk - pg[k];
                out.ss += s.norm_sq();
                out.sy += s.dot(&y);
                out.yy += y.norm_sq();
            }
        } else {
            out.potential += params.fstar(&q);
        }
        if PREV {
            out.delta += scale * params.fstar_difference(&q, &pv[k]);
        }
    }
    out
}

/// Energy parts (potential already scaled) and step statistics.
fn evaluate_full(
    grid: &Grid,
    values: &[QTensor],
    prev: Option<Previous<'_>>,
    params: &MaterialParams,
    epsilon: f64,
    grad: Option<&mut [QTensor]>,
) -> RowSums {
    let scale = grid.h * grid.h / (epsilon * epsilon);
    let mut partial = vec![RowSums::default(); grid.ny];
    match (grad, prev.is_some()) {
        (Some(g), true) => g
            .par_chunks_mut(grid.nx)
            .zip(partial.par_iter_mut())
            .enumerate()
            .for_each(|(j, (row, out))| {
                *out = row_kernel::<true, true>(grid, values, prev, params, scale, j, row);
            }),
        (Some(g), false) => g
            .par_chunks_mut(grid.nx)
            .zip(partial.par_iter_mut())
            .enumerate()
            .for_each(|(j, (row, out))| {
                *out = row_kernel::<true, false>(grid, values, prev, params, scale, j, row);
            }),
        (None, _) => partial.par_iter_mut().enumerate().for_each(|(j, out)| {
            *out = row_kernel::<false, false>(grid, values, None, params, scale, j, &mut []);
        }),
    }
    let mut sums = RowSums::merge(&partial);
    sums.potential *= scale;
    sums
}

pub fn energy(field: &Field) -> EnergyBreakdown {
    let s = evaluate_full(&field.grid, &field.values, None, &field.params, field.epsilon, None);
    EnergyBreakdown::new(s.dirichlet, s.potential, &field.params)
}

/// Exact gradient of [`energy`] with respect to every cell value (zero on
/// Dirichlet and exterior cells).
pub fn el_gradient(field: &Field) -> Vec<QTensor> {
    let mut g = vec![QTensor::ZERO; field.values.len()];
    evaluate_full(&field.grid, &field.values, None, &field.params, field.epsilon, Some(&mut g));
    g
}

fn clip_unit(q: &mut QTensor) {
    let n = q.norm_sq();
    if n > 1.0 {
        *q = *q * (1.0 / n.sqrt());
    }
}

/// `x_new = x - t g` on interior cells (clipped to the unit ball when
/// `truncation`), returning `<x_new - x, g>`.
fn take_step(
    x_new: &mut [QTensor],
    x: &[QTensor],
    g: &[QTensor],
    interior: &[bool],
    t: f64,
    truncation: bool,
) -> f64 {
    const CHUNK: usize = 4096;
    let parts: Vec<f64> = x_new
        .par_chunks_mut(CHUNK)
        .zip(x.par_chunks(CHUNK))
        .zip(g.par_chunks(CHUNK))
        .zip(interior.par_chunks(CHUNK))
        .map(|(((xn, xo), gg), inside)| {
            let mut acc = 0.0;
            for k in 0..xn.len() {
                if inside[k] {
                    let mut q = xo[k] - gg[k] * t;
                    if truncation {
                        clip_unit(&mut q);
                    }
                    xn[k] = q;
                    acc += (q - xo[k]).dot(&gg[k]);
                }
            }
            acc
        })
        .collect();
    tree_sum(&parts)
}

/// Minimize the discrete energy over interior cells.
pub fn minimize(field0: &Field, opts: &SolveOptions) -> Result<(Field, SolveLog)> {
    opts.validate()?;
    let grid = field0.grid.clone();
    let params = field0.params;
    let eps = field0.epsilon;
    let h2 = grid.h * grid.h;
    let n = field0.values.len();
    let interior: Vec<bool> = grid.kinds.iter().map(|k| *k == CellKind::Interior).collect();

    let mut x = field0.values.clone();
    if opts.truncation {
        for (q, inside) in x.iter_mut().zip(&interior) {
            if *inside {
                clip_unit(q);
            }
        }
    }
    let mut g = vec![QTensor::ZERO; n];
    let s0 = evaluate_full(&grid, &x, None, &params, eps, Some(&mut g));
    let (mut e_dir, mut e_pot) = (s0.dirichlet, s0.potential);
    let mut e = e_dir + e_pot;
    if !e.is_finite() {
        return Err(Error::NonFiniteEncountered { iter: 0 });
    }
    let mut x_new = x.clone();
    let mut g_new = vec![QTensor::ZERO; n];

    // Largest stable explicit step for the stiffest mode.
    let curvature = 8.0 + h2 / (eps * eps) * (2.0 * params.c_star + params.a_star + params.b_star);
    let (alpha_min, alpha_max) = (1e-3 / curvature, 1e6 / curvature);
    let mut alpha = match opts.step_rule {
        StepRule::Fixed { step } => step,
        StepRule::BarzilaiBorwein => 1.0 / curvature,
    };

    let mut records = Vec::new();
    let mut grad_sup = s0.grad_max_sq.sqrt() / h2;
    records.push(IterRecord {
        iter: 0,
        energy_total: e,
        energy_dirichlet: e_dir,
        energy_potential: e_pot,
        grad_sup,
        step: 0.0,
    });
    let mut converged = grad_sup <= opts.grad_tol;
    let mut iter = 0;
    let mut evaluations = 1;
    while !converged && iter < opts.max_iters {
        iter += 1;
        let mut trial = alpha;
        let mut accepted = None;
        for _ in 0..=30 {
            let decrease = take_step(&mut x_new, &x, &g, &interior, trial, opts.truncation);
            evaluations += 1;
            let prev = Previous {
                values: &x,
                grad: &g,
            };
            let sums = evaluate_full(&grid, &x_new, Some(prev), &params, eps, Some(&mut g_new));
            // Armijo on the actual (possibly projected) displacement. The
            // change is accumulated from differences, so it stays accurate
            // far below the round-off level of the total energy.
            let finite = (sums.dirichlet + sums.potential).is_finite() && sums.delta.is_finite();
            if finite && sums.delta <= 1e-4 * decrease {
                accepted = Some(sums);
                break;
            }
            trial *= 0.5;
        }
        let Some(sums) = accepted else {
            if x_new.iter().any(|q| !q.is_finite()) || !e.is_finite() {
                return Err(Error::NonFiniteEncountered { iter });
            }
            warn!("line search stalled at iteration {iter}; stopping");
            break;
        };
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        e_dir = sums.dirichlet;
        e_pot = sums.potential;
        e = e_dir + e_pot;
        alpha = match opts.step_rule {
            StepRule::Fixed { step } => step,
            StepRule::BarzilaiBorwein if sums.sy > 0.0 => {
                (sums.ss / sums.sy).clamp(alpha_min, alpha_max)
            }
            StepRule::BarzilaiBorwein => (2.0 * trial).min(alpha_max),
        };
        grad_sup = sums.grad_max_sq.sqrt() / h2;
        records.push(IterRecord {
            iter,
            energy_total: e,
            energy_dirichlet: e_dir,
            energy_potential: e_pot,
            grad_sup,
            step: trial,
        });
        if iter % 1000 == 0 {
            debug!("iter {iter}: E = {e:.10}, grad_sup = {grad_sup:.3e}, step = {trial:.3e}");
        }
        converged = grad_sup <= opts.grad_tol;
    }
    let log = SolveLog {
        converged,
        iterations: iter,
        evaluations,
        final_grad_sup: grad_sup,
        records,
    };
    let field = Field {
        grid,
        values: x,
        epsilon: eps,
        params,
    };
    Ok((field, log))
}

/// Replace every interior value with `|Q| > 1` by `Q / |Q|`.
pub fn truncate(field: &Field) -> Field {
    let mut out = field.clone();
    for (q, kind) in out.values.iter_mut().zip(&field.grid.kinds) {
        if *kind == CellKind::Interior {
            clip_unit(q);
        }
    }
    debug_assert!(energy(&out).total <= energy(field).total + 1e-9);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarmStartKind {
    BiaxialCore,
    BoundaryRadial,
}

/// Transfer a field to a finer grid over the same domain by bilinear
/// interpolation; cells outside the coarse interpolation hull take the
/// nearest non-exterior coarse value. Dirichlet cells are reset from
/// `boundary`.
pub fn prolong(coarse: &Field, fine: Arc<Grid>, boundary: &BoundarySpec) -> Result<Field> {
    let cg = coarse.grid.clone();
    let mut out = Field::from_fn(fine, coarse.epsilon, coarse.params, |x, y| {
        coarse.interpolate(x, y).unwrap_or_else(|_| nearest_value(coarse, x, y))
    });
    for (q, kind) in out.values.iter_mut().zip(&out.grid.kinds) {
        if *kind == CellKind::Exterior {
            *q = QTensor::ZERO;
        }
    }
    debug_assert!(cg.domain == out.grid.domain);
    out.apply_boundary(boundary)?;
    Ok(out)
}

fn nearest_value(field: &Field, x: f64, y: f64) -> QTensor {
    let g = &*field.grid;
    let (ci, cj) = g.locate(x, y).unwrap_or((g.nx / 2, g.ny / 2));
    let mut best = (f64::INFINITY, QTensor::ZERO);
    for j in cj.saturating_sub(2)..(cj + 3).min(g.ny) {
        for i in ci.saturating_sub(2)..(ci + 3).min(g.nx) {
            if g.kind(i, j) == CellKind::Exterior {
                continue;
            }
            let [cx, cy] = g.center(i, j);
            let d = (cx - x).hypot(cy - y);
            if d < best.0 {
                best = (d, field.get(i, j));
            }
        }
    }
    best.1
}

/// Initial field: the biaxial comparison map when the boundary datum is a
/// single geodesic turn on a disk and `ε < R σ^{1/2}`, otherwise the
/// boundary datum extended radially. Seeded noise is added on interior cells.
pub fn warm_start(
    grid: Arc<Grid>,
    epsilon: f64,
    params: MaterialParams,
    boundary: &BoundarySpec,
    seed: u64,
    noise: f64,
) -> Result<(Field, WarmStartKind)> {
    boundary.validate(&grid.domain)?;
    let d = grid.domain;
    let winding = match boundary.outer {
        LoopSpec::GeodesicWinding { k } if k == 1 || k == -1 => Some(k),
        _ => None,
    };
    let bound = d.radius * params.sigma.sqrt();
    let (mut field, kind) = match winding {
        Some(k) if d.kind == DomainKind::Disk && epsilon < bound => (
            construct::biaxial_core_winding(grid.clone(), epsilon, params, k)?,
            WarmStartKind::BiaxialCore,
        ),
        _ => {
            if winding.is_some() && d.kind == DomainKind::Disk {
                warn!(
                    "epsilon {epsilon} is not below R*sqrt(sigma) = {bound}; \
                     using boundary-radial initialization"
                );
            }
            let split = 0.5 * (d.inner() + d.radius);
            let f = Field::from_fn(grid.clone(), epsilon, params, |x, y| {
                let rho = d.rho(x, y);
                let theta = (y - d.center[1]).atan2(x - d.center[0]).rem_euclid(std::f64::consts::TAU);
                match (&boundary.inner, d.kind) {
                    (Some(inner), DomainKind::Annulus) if rho < split => inner.value(theta),
                    (_, DomainKind::Annulus) => boundary.outer.value(theta),
                    _ => boundary.outer.value(theta) * (rho / d.radius).min(1.0),
                }
            });
            (f, WarmStartKind::BoundaryRadial)
        }
    };
    if noise > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (q, k) in field.values.iter_mut().zip(&grid.kinds) {
            if *k == CellKind::Interior {
                let xi = QTensor::new(std::array::from_fn(|_| StandardNormal.sample(&mut rng)));
                *q += xi * noise;
            }
        }
    }
    field.apply_boundary(boundary)?;
    Ok((field, kind))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub energy_total: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub field: Field,
    /// Iteration log on the finest grid.
    pub log: SolveLog,
    pub levels: Vec<LevelSummary>,
    pub warm_start: WarmStartKind,
}

const COARSEST: usize = 64;

/// Grid sizes visited by continuation, coarsest first.
pub fn continuation_levels(n: usize, enabled: bool) -> Vec<usize> {
    let mut levels = vec![n];
    if enabled {
        let mut m = n;
        while m % 2 == 0 && m / 2 >= COARSEST {
            m /= 2;
            levels.push(m);
        }
    }
    levels.reverse();
    levels
}

/// Warm start, minimize (with grid continuation when enabled) and truncate.
pub fn solve(
    grid: Arc<Grid>,
    epsilon: f64,
    params: MaterialParams,
    boundary: &BoundarySpec,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    opts.validate()?;
    let sizes = continuation_levels(grid.n, opts.continuation);
    let mut levels = Vec::with_capacity(sizes.len());
    let mut current: Option<Field> = None;
    let mut warm = WarmStartKind::BoundaryRadial;
    let mut last_log = None;
    for &m in &sizes {
        let g = if m == grid.n {
            grid.clone()
        } else {
            Arc::new(crate::grid::build_grid(grid.domain, m)?)
        };
        let start = match current.take() {
            None => {
                let (f, kind) = warm_start(g, epsilon, params, boundary, opts.seed, opts.noise)?;
                warm = kind;
                f
            }
            Some(coarse) => prolong(&coarse, g, boundary)?,
        };
        let (field, log) = minimize(&start, opts)?;
        levels.push(LevelSummary {
            n: m,
            iterations: log.iterations,
            evaluations: log.evaluations,
            converged: log.converged,
            energy_total: log.records.last().map_or(f64::NAN, |r| r.energy_total),
        });
        debug!("level n = {m}: {} iterations, converged = {}", log.iterations, log.converged);
        current = Some(field);
        last_log = Some(log);
    }
    let field = truncate(&current.expect("at least one level"));
    Ok(SolveOutcome {
        field,
        log: last_log.expect("at least one level"),
        levels,
        warm_start: warm,
    })
}
