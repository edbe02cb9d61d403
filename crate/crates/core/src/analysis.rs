//! Diagnostics on solved fields: defect localization, biaxiality, radial
//! energy profiles, boundary-circle loops and the Pohozaev balance.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellKind, Field};
use crate::manifold::{self, HomotopyClass, LiftOptions};
use crate::potential;
use crate::qtensor::QTensor;

pub const DEFAULT_DELTA: f64 = 0.3;
pub const DEFAULT_TOL_BETA: f64 = 1e-3;
/// Nodes per circle for loop diagnostics.
pub const CIRCLE_NODES: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectComponent {
    pub centroid: [f64; 2],
    /// Radius of the minimal enclosing circle of the cell centres plus h/√2.
    pub radius: f64,
    pub cell_count: usize,
    /// Largest distance to N inside the component.
    pub peak_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    pub delta: f64,
    pub count: usize,
    pub components: Vec<DefectComponent>,
    /// Measured `sup ε|∇Q|`.
    pub c_hat: f64,
    pub lambda0: f64,
    pub mu0: f64,
}

/// Connected components (4-neighbour) of interior cells with
/// `dist(Q, N) > delta`.
pub fn detect_defects(field: &Field, delta: f64) -> DefectReport {
    let g = &*field.grid;
    let dist: Vec<f64> = field
        .values
        .iter()
        .zip(&g.kinds)
        .map(|(q, k)| if *k == CellKind::Interior { manifold::dist_to_n(q) } else { 0.0 })
        .collect();
    let hot: Vec<bool> = dist.iter().map(|d| *d > delta).collect();
    let mut seen = vec![false; hot.len()];
    let mut components = Vec::new();
    for start in 0..hot.len() {
        if !hot[start] || seen[start] {
            continue;
        }
        let mut cells = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(k) = queue.pop_front() {
            cells.push(k);
            let (i, j) = (k % g.nx, k / g.nx);
            let mut push = |nb: usize| {
                if hot[nb] && !seen[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            };
            if i > 0 {
                push(k - 1);
            }
            if i + 1 < g.nx {
                push(k + 1);
            }
            if j > 0 {
                push(k - g.nx);
            }
            if j + 1 < g.ny {
                push(k + g.nx);
            }
        }
        let pts: Vec<[f64; 2]> = cells.iter().map(|&k| g.center(k % g.nx, k / g.nx)).collect();
        let n = pts.len() as f64;
        let centroid = [
            pts.iter().map(|p| p[0]).sum::<f64>() / n,
            pts.iter().map(|p| p[1]).sum::<f64>() / n,
        ];
        let (_, r) = min_enclosing_circle(&pts);
        components.push(DefectComponent {
            centroid,
            radius: r + g.h / 2f64.sqrt(),
            cell_count: cells.len(),
            peak_dist: cells.iter().map(|&k| dist[k]).fold(0.0, f64::max),
        });
    }
    components.sort_by(|a, b| {
        a.centroid[0]
            .total_cmp(&b.centroid[0])
            .then(a.centroid[1].total_cmp(&b.centroid[1]))
    });

    let c_hat = field.epsilon * max_gradient(field);
    let lambda0 = delta / (2.0 * c_hat);
    let p = &field.params;
    let f0 = p.min_fstar_away_from_vacuum(delta);
    let m0 = potential::validate_hypotheses(p, 2000)
        .map(|r| r.constants.m0)
        .unwrap_or(f64::NAN);
    let mu0 = 0.5 * PI * lambda0 * lambda0 * f0.min(m0 * delta * delta / 8.0);
    DefectReport {
        delta,
        count: components.len(),
        components,
        c_hat,
        lambda0,
        mu0,
    }
}

/// `sup |∇Q|` over interior cells by one-sided differences.
fn max_gradient(field: &Field) -> f64 {
    let g = &*field.grid;
    let mut best: f64 = 0.0;
    for (i, j) in g.interior_cells() {
        let q = field.get(i, j);
        let dx = (field.get(i + 1, j) - q).norm_sq().max((q - field.get(i - 1, j)).norm_sq());
        let dy = (field.get(i, j + 1) - q).norm_sq().max((q - field.get(i, j - 1)).norm_sq());
        best = best.max((dx + dy).sqrt() / g.h);
    }
    best
}

/// Smallest circle containing all points (randomized incremental
/// algorithm with a fixed shuffle seed).
pub fn min_enclosing_circle(points: &[[f64; 2]]) -> ([f64; 2], f64) {
    if points.is_empty() {
        return ([0.0, 0.0], 0.0);
    }
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0xc17c1e));
    let inside = |c: [f64; 2], r: f64, p: [f64; 2]| dist2(c, p).sqrt() <= r * (1.0 + 1e-12) + 1e-12;
    let mut c = pts[0];
    let mut r = 0.0;
    for i in 1..pts.len() {
        if inside(c, r, pts[i]) {
            continue;
        }
        c = pts[i];
        r = 0.0;
        for j in 0..i {
            if inside(c, r, pts[j]) {
                continue;
            }
            c = [0.5 * (pts[i][0] + pts[j][0]), 0.5 * (pts[i][1] + pts[j][1])];
            r = 0.5 * dist2(pts[i], pts[j]).sqrt();
            for k in 0..j {
                if inside(c, r, pts[k]) {
                    continue;
                }
                (c, r) = circumcircle(pts[i], pts[j], pts[k]);
            }
        }
    }
    (c, r)
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn circumcircle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> ([f64; 2], f64) {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    if d.abs() < 1e-300 {
        // collinear: the circle on the farthest pair
        let pairs = [(a, b), (a, c), (b, c)];
        let (p, q) = pairs
            .into_iter()
            .max_by(|x, y| dist2(x.0, x.1).total_cmp(&dist2(y.0, y.1)))
            .unwrap_or((a, b));
        return ([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])], 0.5 * dist2(p, q).sqrt());
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    ([a[0] + ux, a[1] + uy], ux.hypot(uy))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiaxialityStats {
    pub max_beta: f64,
    pub argmax: [f64; 2],
    pub min_norm: f64,
    pub argmin: [f64; 2],
    pub maximal_biaxial: bool,
    pub tol_beta: f64,
}

/// Extremes of β and |Q| over interior cells.
pub fn biaxiality_stats(field: &Field, tol_beta: f64) -> BiaxialityStats {
    let g = &*field.grid;
    let mut out = BiaxialityStats {
        max_beta: f64::NEG_INFINITY,
        argmax: [f64::NAN; 2],
        min_norm: f64::INFINITY,
        argmin: [f64::NAN; 2],
        maximal_biaxial: false,
        tol_beta,
    };
    for (i, j) in g.interior_cells() {
        let q = field.get(i, j);
        let beta = q.biaxiality();
        let norm = q.norm();
        if beta > out.max_beta {
            out.max_beta = beta;
            out.argmax = g.center(i, j);
        }
        if norm < out.min_norm {
            out.min_norm = norm;
            out.argmin = g.center(i, j);
        }
    }
    out.maximal_biaxial = out.max_beta >= 1.0 - tol_beta;
    out
}

/// Values of the field on the circle `center + ρ e^{iθ}` at `nodes`
/// equally spaced angles.
fn circle_samples(field: &Field, center: [f64; 2], rho: f64, nodes: usize) -> Result<Vec<QTensor>> {
    (0..nodes)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / nodes as f64;
            field
                .interpolate(center[0] + rho * t.cos(), center[1] + rho * t.sin())
                .map_err(|_| Error::CircleOutsideDomain { rho })
        })
        .collect()
}

fn project_loop(samples: &[QTensor], rho: f64, limit: f64) -> Result<Vec<QTensor>> {
    samples
        .iter()
        .map(|q| {
            let dist = manifold::dist_to_n(q);
            if dist >= limit {
                return Err(Error::CircleMeetsDefect { rho, dist });
            }
            manifold::project_to_n(q)
        })
        .collect()
}

/// Central-difference θ-derivatives of a periodic sample sequence.
fn periodic_derivative(samples: &[QTensor]) -> Vec<QTensor> {
    let m = samples.len();
    let dtheta = 2.0 * PI / m as f64;
    (0..m)
        .map(|k| (samples[(k + 1) % m] - samples[(k + m - 1) % m]) * (0.5 / dtheta))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSample {
    pub rho: f64,
    /// `(1/2) ∫ |∂θ c_ρ|² dθ` of the projected circle loop.
    pub s: f64,
    /// `(1/2) ∫_{∂B_ρ} |∂ν u|²` of the projected field.
    pub r: f64,
    pub length: f64,
    pub speed_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub center: [f64; 2],
    pub kappa_star: f64,
    pub samples: Vec<RadialSample>,
}

impl RadialProfile {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rho,S,R,length,variance")?;
        for s in &self.samples {
            writeln!(w, "{},{},{},{},{}", s.rho, s.s, s.r, s.length, s.speed_variance)?;
        }
        Ok(())
    }
}

/// S, R, loop length and speed variance on circles around `center`.
/// Circles must stay inside the interpolation hull and at distance below
/// [`DEFAULT_DELTA`] from N.
pub fn radial_profile(field: &Field, center: [f64; 2], rhos: &[f64]) -> Result<RadialProfile> {
    let mut rhos = rhos.to_vec();
    rhos.sort_by(f64::total_cmp);
    let mut samples = Vec::with_capacity(rhos.len());
    let dr = field.grid.h;
    for &rho in &rhos {
        if !(rho > dr) {
            return Err(Error::CircleOutsideDomain { rho });
        }
        let mid = project_loop(&circle_samples(field, center, rho, CIRCLE_NODES)?, rho, DEFAULT_DELTA)?;
        let outer = project_loop(
            &circle_samples(field, center, rho + dr, CIRCLE_NODES)?,
            rho,
            DEFAULT_DELTA,
        )?;
        let inner = project_loop(
            &circle_samples(field, center, rho - dr, CIRCLE_NODES)?,
            rho,
            DEFAULT_DELTA,
        )?;
        let (length, speed_variance, s) = loop_metrics(&mid);
        let dtheta = 2.0 * PI / CIRCLE_NODES as f64;
        let normal_sq: f64 = outer
            .iter()
            .zip(&inner)
            .map(|(a, b)| ((*a - *b) * (0.5 / dr)).norm_sq())
            .sum::<f64>()
            * dtheta;
        samples.push(RadialSample {
            rho,
            s,
            r: 0.5 * rho * normal_sq,
            length,
            speed_variance,
        });
    }
    Ok(RadialProfile {
        center,
        kappa_star: manifold::kappa_star(),
        samples,
    })
}

/// (length, speed variance, half the integrated squared speed).
fn loop_metrics(projected: &[QTensor]) -> (f64, f64, f64) {
    let d = periodic_derivative(projected);
    let m = d.len() as f64;
    let dtheta = 2.0 * PI / m;
    let speeds: Vec<f64> = d.iter().map(QTensor::norm).collect();
    let mean = speeds.iter().sum::<f64>() / m;
    let variance = speeds.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
    let energy = 0.5 * speeds.iter().map(|v| v * v).sum::<f64>() * dtheta;
    (mean * 2.0 * PI, variance, energy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleLoop {
    pub rho: f64,
    pub length: f64,
    pub speed_variance: f64,
    pub class: HomotopyClass,
}

/// Length, speed variance and homotopy class of the projected loop on the
/// circle of radius `rho`.
pub fn circle_loop_diagnostics(field: &Field, center: [f64; 2], rho: f64) -> Result<CircleLoop> {
    let raw = circle_samples(field, center, rho, CIRCLE_NODES)?;
    let projected = project_loop(&raw, rho, DEFAULT_DELTA)?;
    let (length, speed_variance, _) = loop_metrics(&projected);
    let opts = LiftOptions {
        max_dist: DEFAULT_DELTA,
        ..LiftOptions::default()
    };
    let class = manifold::homotopy_class(&raw, &opts)?;
    Ok(CircleLoop {
        rho,
        length,
        speed_variance,
        class,
    })
}

/// Terms of the Pohozaev balance on the ball `B(center, radius)` for
/// `-Δu + ε⁻² Df*(u) = 0`:
/// `(2/ε²) ∫_B f* + (r/2) ∫_∂B |∂ν u|² = ∫_∂B (r/2)|∂τ u|² + (r/ε²) f*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PohozaevTerms {
    pub radius: f64,
    /// `ε⁻² ∫_B f*`.
    pub bulk_potential: f64,
    /// `∫_∂B |∂ν u|²`.
    pub normal: f64,
    /// `∫_∂B |∂τ u|²`.
    pub tangential: f64,
    /// `ε⁻² ∫_∂B f*`.
    pub boundary_potential: f64,
}

impl PohozaevTerms {
    pub fn lhs(&self) -> f64 {
        2.0 * self.bulk_potential + 0.5 * self.radius * self.normal
    }

    pub fn rhs(&self) -> f64 {
        self.radius * (0.5 * self.tangential + self.boundary_potential)
    }

    pub fn residual(&self) -> f64 {
        let (l, r) = (self.lhs(), self.rhs());
        (l - r).abs() / (l.abs() + r.abs() + 1e-12)
    }
}

pub fn pohozaev_terms(field: &Field, center: [f64; 2], radius: f64) -> Result<PohozaevTerms> {
    let g = &*field.grid;
    let eps2 = field.epsilon * field.epsilon;
    let p = &field.params;
    let dr = g.h;
    let nodes = (2.0 * PI * radius / g.h * 4.0).ceil().max(256.0) as usize;
    let ring = |r: f64| -> Result<Vec<QTensor>> {
        circle_samples(field, center, r, nodes).map_err(|_| Error::BallOutsideDomain { radius })
    };
    let (mid, outer, inner) = (ring(radius)?, ring(radius + dr)?, ring(radius - dr)?);
    let ds = 2.0 * PI * radius / nodes as f64;
    let tangent = periodic_derivative(&mid);
    let mut normal = 0.0;
    let mut tangential = 0.0;
    let mut boundary_potential = 0.0;
    for k in 0..nodes {
        normal += ((outer[k] - inner[k]) * (0.5 / dr)).norm_sq() * ds;
        tangential += (tangent[k] * (1.0 / radius)).norm_sq() * ds;
        boundary_potential += p.fstar(&mid[k]) * ds;
    }
    let mut bulk = 0.0;
    for (i, j) in g.interior_cells() {
        let [x, y] = g.center(i, j);
        if (x - center[0]).hypot(y - center[1]) < radius {
            bulk += p.fstar(&field.get(i, j));
        }
    }
    Ok(PohozaevTerms {
        radius,
        bulk_potential: bulk * g.h * g.h / eps2,
        normal,
        tangential,
        boundary_potential: boundary_potential / eps2,
    })
}

/// Relative mismatch `|LHS - RHS| / (|LHS| + |RHS| + 1e-12)` of the
/// Pohozaev balance.
pub fn pohozaev_residual(field: &Field, center: [f64; 2], radius: f64) -> Result<f64> {
    Ok(pohozaev_terms(field, center, radius)?.residual())
}

/// Centre of the largest defect component, or the domain centre.
pub fn dominant_center(field: &Field, report: &DefectReport) -> [f64; 2] {
    report
        .components
        .iter()
        .max_by_key(|c| c.cell_count)
        .map_or(field.grid.domain.center, |c| c.centroid)
}
