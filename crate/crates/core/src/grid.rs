//! Masked Cartesian grids over disks and annuli, boundary data and fields.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold;
use crate::potential::MaterialParams;
use crate::qtensor::QTensor;

/// Frame of exterior cells around the bounding box, so that every
/// Dirichlet cell has a full set of neighbours inside the array.
pub const PAD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Disk,
    Annulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub kind: DomainKind,
    #[serde(default)]
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_radius: Option<f64>,
}

impl Domain {
    pub fn disk(center: [f64; 2], radius: f64) -> Self {
        Domain {
            kind: DomainKind::Disk,
            center,
            radius,
            inner_radius: None,
        }
    }

    pub fn annulus(center: [f64; 2], inner_radius: f64, radius: f64) -> Self {
        Domain {
            kind: DomainKind::Annulus,
            center,
            radius,
            inner_radius: Some(inner_radius),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidDomain(format!("radius must be positive, got {}", self.radius)));
        }
        if !self.center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidDomain("center must be finite".into()));
        }
        match (self.kind, self.inner_radius) {
            (DomainKind::Disk, None) => Ok(()),
            (DomainKind::Disk, Some(_)) => {
                Err(Error::InvalidDomain("a disk has no inner radius".into()))
            }
            (DomainKind::Annulus, Some(r)) if r > 0.0 && r < self.radius => Ok(()),
            (DomainKind::Annulus, r) => Err(Error::InvalidDomain(format!(
                "annulus needs 0 < inner_radius < radius, got {r:?}"
            ))),
        }
    }

    pub fn inner(&self) -> f64 {
        self.inner_radius.unwrap_or(0.0)
    }

    /// Distance of `(x, y)` from the centre.
    pub fn rho(&self, x: f64, y: f64) -> f64 {
        (x - self.center[0]).hypot(y - self.center[1])
    }

    /// Strict membership in the open domain.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let r = self.rho(x, y);
        r < self.radius && (self.kind == DomainKind::Disk || r > self.inner())
    }

    pub fn area(&self) -> f64 {
        PI * (self.radius * self.radius - self.inner() * self.inner())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellKind {
    Interior,
    Dirichlet,
    Exterior,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub domain: Domain,
    /// Cells per axis across the bounding box of the domain.
    pub n: usize,
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Lower-left corner of the padded array.
    pub origin: [f64; 2],
    pub kinds: Vec<CellKind>,
    pub interior_count: usize,
}

/// Classify cells of a uniform grid with `n` cells across the bounding box.
pub fn build_grid(domain: Domain, n: usize) -> Result<Grid> {
    domain.validate()?;
    if n < 16 {
        return Err(Error::InvalidDomain(format!("need at least 16 cells per axis, got {n}")));
    }
    let h = 2.0 * domain.radius / n as f64;
    let nx = n + 2 * PAD;
    let ny = nx;
    let origin = [
        domain.center[0] - domain.radius - PAD as f64 * h,
        domain.center[1] - domain.radius - PAD as f64 * h,
    ];
    let mut kinds = vec![CellKind::Exterior; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let x = origin[0] + (i as f64 + 0.5) * h;
            let y = origin[1] + (j as f64 + 0.5) * h;
            if domain.contains(x, y) {
                kinds[j * nx + i] = CellKind::Interior;
            }
        }
    }
    let mut interior_count = 0;
    for j in 0..ny {
        for i in 0..nx {
            if kinds[j * nx + i] != CellKind::Interior {
                continue;
            }
            interior_count += 1;
            if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                return Err(Error::DomainTooThin { i, j });
            }
            for (ni, nj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                let k = nj * nx + ni;
                if kinds[k] == CellKind::Exterior {
                    kinds[k] = CellKind::Dirichlet;
                }
            }
        }
    }
    if interior_count == 0 {
        return Err(Error::DomainTooThin { i: 0, j: 0 });
    }
    Ok(Grid {
        domain,
        n,
        nx,
        ny,
        h,
        origin,
        kinds,
        interior_count,
    })
}

impl Grid {
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn kind(&self, i: usize, j: usize) -> CellKind {
        self.kinds[j * self.nx + i]
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    /// Cell containing `(x, y)`, if it lies in the array.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = ((x - self.origin[0]) / self.h).floor();
        let fj = ((y - self.origin[1]) / self.h).floor();
        if fi < 0.0 || fj < 0.0 || fi >= self.nx as f64 || fj >= self.ny as f64 {
            return None;
        }
        Some((fi as usize, fj as usize))
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    pub fn interior_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny).flat_map(move |j| {
            (0..self.nx)
                .filter(move |&i| self.kind(i, j) == CellKind::Interior)
                .map(move |i| (i, j))
        })
    }

    pub fn dirichlet_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.ny).flat_map(move |j| {
            (0..self.nx)
                .filter(move |&i| self.kind(i, j) == CellKind::Dirichlet)
                .map(move |i| (i, j))
        })
    }
}

/// Boundary datum along one boundary circle, as a function of the polar angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LoopSpec {
    /// `c*(kθ)`.
    GeodesicWinding { k: i32 },
    /// `φ(n0)`.
    Constant { director: [f64; 3] },
    /// Directors at equally spaced angles starting at θ = 0; values in
    /// between follow the normalized linear interpolation of the aligned pair.
    Custom { directors: Vec<[f64; 3]> },
}

impl LoopSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LoopSpec::GeodesicWinding { .. } => Ok(()),
            LoopSpec::Constant { director } => {
                unit(director).map(|_| ()).map_err(|e| Error::InvalidSpec(e.to_string()))
            }
            LoopSpec::Custom { directors } => {
                if directors.len() < 3 {
                    return Err(Error::InvalidSpec("custom loop needs at least 3 directors".into()));
                }
                let units: Vec<_> = directors
                    .iter()
                    .map(|d| unit(d).map_err(|e| Error::InvalidSpec(e.to_string())))
                    .collect::<Result<_>>()?;
                for k in 0..units.len() {
                    let overlap = units[k].dot(&units[(k + 1) % units.len()]).abs();
                    if overlap < 1e-3 {
                        return Err(Error::InvalidSpec(format!(
                            "custom directors {k} and {} are orthogonal",
                            (k + 1) % units.len()
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Boundary value at polar angle `theta`.
    pub fn value(&self, theta: f64) -> QTensor {
        match self {
            LoopSpec::GeodesicWinding { k } => manifold::geodesic_loop(*k as f64 * theta),
            LoopSpec::Constant { director } => {
                manifold::phi_unchecked(&Vector3::from(*director).normalize())
            }
            LoopSpec::Custom { directors } => {
                let m = directors.len();
                let t = theta.rem_euclid(2.0 * PI) / (2.0 * PI) * m as f64;
                let k = (t.floor() as usize).min(m - 1);
                let f = t - k as f64;
                let a = Vector3::from(directors[k]).normalize();
                let mut b = Vector3::from(directors[(k + 1) % m]).normalize();
                if a.dot(&b) < 0.0 {
                    b = -b;
                }
                manifold::phi_unchecked(&((1.0 - f) * a + f * b).normalize())
            }
        }
    }
}

fn unit(d: &[f64; 3]) -> Result<Vector3<f64>> {
    let v = Vector3::from(*d);
    let n = v.norm();
    if !(n > 1e-12 && n.is_finite()) {
        return Err(Error::NonUnitVector { norm: n });
    }
    Ok(v / n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub outer: LoopSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<LoopSpec>,
}

impl BoundarySpec {
    pub fn geodesic(k: i32) -> Self {
        BoundarySpec {
            outer: LoopSpec::GeodesicWinding { k },
            inner: None,
        }
    }

    pub fn constant(director: [f64; 3]) -> Self {
        BoundarySpec {
            outer: LoopSpec::Constant { director },
            inner: None,
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        self.outer.validate()?;
        match (domain.kind, &self.inner) {
            (DomainKind::Disk, None) => Ok(()),
            (DomainKind::Disk, Some(_)) => {
                Err(Error::InvalidSpec("a disk has no inner boundary".into()))
            }
            (DomainKind::Annulus, Some(inner)) => inner.validate(),
            (DomainKind::Annulus, None) => {
                Err(Error::InvalidSpec("annulus needs an inner boundary datum".into()))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<Grid>,
    /// Row-major cell values; exterior cells hold zero.
    pub values: Vec<QTensor>,
    pub epsilon: f64,
    pub params: MaterialParams,
}

impl Field {
    pub fn zeros(grid: Arc<Grid>, epsilon: f64, params: MaterialParams) -> Self {
        let values = vec![QTensor::ZERO; grid.len()];
        Field {
            grid,
            values,
            epsilon,
            params,
        }
    }

    /// Field with every non-exterior cell set from `f(x, y)`.
    pub fn from_fn(
        grid: Arc<Grid>,
        epsilon: f64,
        params: MaterialParams,
        f: impl Fn(f64, f64) -> QTensor,
    ) -> Self {
        let mut field = Field::zeros(grid, epsilon, params);
        for j in 0..field.grid.ny {
            for i in 0..field.grid.nx {
                if field.grid.kind(i, j) != CellKind::Exterior {
                    let [x, y] = field.grid.center(i, j);
                    let k = field.grid.index(i, j);
                    field.values[k] = f(x, y);
                }
            }
        }
        field
    }

    pub fn get(&self, i: usize, j: usize) -> QTensor {
        self.values[self.grid.index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(QTensor::is_finite)
    }

    /// Freeze the Dirichlet layer at the boundary datum.
    pub fn apply_boundary(&mut self, spec: &BoundarySpec) -> Result<()> {
        boundary_data(&self.grid, spec)?
            .into_iter()
            .for_each(|(k, q)| self.values[k] = q);
        Ok(())
    }

    /// Bilinear interpolation between cell centres. All four surrounding
    /// cells must be interior or Dirichlet cells.
    pub fn interpolate(&self, x: f64, y: f64) -> Result<QTensor> {
        let g = &*self.grid;
        let fx = (x - g.origin[0]) / g.h - 0.5;
        let fy = (y - g.origin[1]) / g.h - 0.5;
        let out = Error::OutOfDomain { x, y };
        if !(fx >= 0.0 && fy >= 0.0) {
            return Err(out);
        }
        let (i0, j0) = (fx.floor() as usize, fy.floor() as usize);
        if i0 + 1 >= g.nx || j0 + 1 >= g.ny {
            return Err(out);
        }
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let mut acc = QTensor::ZERO;
        for (di, dj, w) in [
            (0, 0, (1.0 - tx) * (1.0 - ty)),
            (1, 0, tx * (1.0 - ty)),
            (0, 1, (1.0 - tx) * ty),
            (1, 1, tx * ty),
        ] {
            if g.kind(i0 + di, j0 + dj) == CellKind::Exterior {
                return Err(out);
            }
            if w != 0.0 {
                acc += self.get(i0 + di, j0 + dj) * w;
            }
        }
        Ok(acc)
    }
}

/// Dirichlet values `(cell index, value)`; each cell takes the datum at the
/// polar angle of its nearest boundary point.
pub fn boundary_data(grid: &Grid, spec: &BoundarySpec) -> Result<Vec<(usize, QTensor)>> {
    spec.validate(&grid.domain)?;
    let d = &grid.domain;
    let split = 0.5 * (d.inner() + d.radius);
    Ok(grid
        .dirichlet_cells()
        .map(|(i, j)| {
            let [x, y] = grid.center(i, j);
            let theta = (y - d.center[1]).atan2(x - d.center[0]);
            let theta = if theta < 0.0 { theta + 2.0 * PI } else { theta };
            let datum = match &spec.inner {
                Some(inner) if d.rho(x, y) < split => inner,
                _ => &spec.outer,
            };
            (grid.index(i, j), datum.value(theta))
        })
        .collect())
}

/// Dirichlet values ordered by polar angle, for homotopy classification of
/// the discrete boundary loop (outer circle only).
pub fn boundary_loop(field: &Field) -> Vec<QTensor> {
    let g = &*field.grid;
    let d = &g.domain;
    let split = 0.5 * (d.inner() + d.radius);
    let mut cells: Vec<(f64, QTensor)> = g
        .dirichlet_cells()
        .filter_map(|(i, j)| {
            let [x, y] = g.center(i, j);
            (d.rho(x, y) >= split).then(|| {
                let t = (y - d.center[1]).atan2(x - d.center[0]);
                (t, field.get(i, j))
            })
        })
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0));
    cells.into_iter().map(|(_, q)| q).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{homotopy_class, HomotopyClass, LiftOptions};
    use crate::potential::derive_params;
    use approx::assert_abs_diff_eq;

    fn unit_disk() -> Domain {
        Domain::disk([0.0, 0.0], 1.0)
    }

    fn params() -> MaterialParams {
        derive_params(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn disk_interior_area() {
        let g = build_grid(unit_disk(), 64).unwrap();
        let expected = PI / 4.0 * 64.0 * 64.0;
        assert!((g.interior_count as f64 - expected).abs() < 0.03 * expected);
        assert_abs_diff_eq!(g.h, 2.0 / 64.0, epsilon = 1e-15);
    }

    #[test]
    fn annulus_interior_area() {
        let g = build_grid(Domain::annulus([0.0, 0.0], 0.5, 1.0), 128).unwrap();
        let expected = PI * 0.75 / 4.0 * 128.0 * 128.0;
        assert!((g.interior_count as f64 - expected).abs() < 0.03 * expected);
    }

    #[test]
    fn smallest_grid_is_valid() {
        let g = build_grid(unit_disk(), 16).unwrap();
        assert!(g.interior_count > 0);
        assert!(build_grid(unit_disk(), 15).is_err());
    }

    #[test]
    fn invalid_domains() {
        assert!(build_grid(Domain::disk([0.0, 0.0], -1.0), 32).is_err());
        assert!(build_grid(Domain::annulus([0.0, 0.0], 1.0, 1.0), 32).is_err());
    }

    #[test]
    fn stencil_is_complete() {
        let g = build_grid(Domain::annulus([0.3, -0.2], 0.3, 1.2), 48).unwrap();
        for (i, j) in g.interior_cells() {
            for (a, b) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                assert_ne!(g.kind(a, b), CellKind::Exterior);
            }
        }
        for (i, j) in g.dirichlet_cells() {
            let touches = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                .iter()
                .any(|&(a, b)| g.kind(a, b) == CellKind::Interior);
            assert!(touches);
        }
    }

    #[test]
    fn refinement_consistency() {
        let coarse = build_grid(unit_disk(), 64).unwrap();
        let fine = build_grid(unit_disk(), 128).unwrap();
        for j in 0..coarse.ny {
            for i in 0..coarse.nx {
                let [x, y] = coarse.center(i, j);
                if (coarse.domain.rho(x, y) - 1.0).abs() < 2.0 * coarse.h {
                    continue;
                }
                let Some((fi, fj)) = fine.locate(x, y) else {
                    assert_eq!(coarse.kind(i, j), CellKind::Exterior);
                    continue;
                };
                let inside = |k| k == CellKind::Interior;
                assert_eq!(inside(coarse.kind(i, j)), inside(fine.kind(fi, fj)));
            }
        }
    }

    #[test]
    fn boundary_loops_have_expected_classes() {
        let g = Arc::new(build_grid(unit_disk(), 64).unwrap());
        let opts = LiftOptions::default();
        let mut f = Field::zeros(g.clone(), 0.1, params());
        f.apply_boundary(&BoundarySpec::geodesic(1)).unwrap();
        let l = boundary_loop(&f);
        assert_eq!(homotopy_class(&l, &opts).unwrap(), HomotopyClass::Nontrivial);
        for q in &l {
            assert!(manifold::dist_to_n(q) < 1e-7);
        }
        f.apply_boundary(&BoundarySpec::geodesic(2)).unwrap();
        assert_eq!(homotopy_class(&boundary_loop(&f), &opts).unwrap(), HomotopyClass::Trivial);
        f.apply_boundary(&BoundarySpec::constant([0.0, 0.0, 1.0])).unwrap();
        let l = boundary_loop(&f);
        assert!(l.iter().all(|q| *q == l[0]));
        assert_eq!(homotopy_class(&l, &opts).unwrap(), HomotopyClass::Trivial);
    }

    #[test]
    fn custom_loop_reproduces_geodesic_class() {
        let directors: Vec<[f64; 3]> = (0..16)
            .map(|k| {
                let t = PI * k as f64 / 16.0;
                [t.cos(), t.sin(), 0.0]
            })
            .collect();
        let spec = BoundarySpec {
            outer: LoopSpec::Custom { directors },
            inner: None,
        };
        let g = Arc::new(build_grid(unit_disk(), 64).unwrap());
        let mut f = Field::zeros(g, 0.1, params());
        f.apply_boundary(&spec).unwrap();
        let l = boundary_loop(&f);
        assert_eq!(
            homotopy_class(&l, &LiftOptions::default()).unwrap(),
            HomotopyClass::Nontrivial
        );
        let bad = LoopSpec::Custom {
            directors: vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn annulus_needs_both_boundaries() {
        let g = build_grid(Domain::annulus([0.0, 0.0], 0.4, 1.0), 64).unwrap();
        assert!(boundary_data(&g, &BoundarySpec::geodesic(1)).is_err());
        let spec = BoundarySpec {
            outer: LoopSpec::GeodesicWinding { k: 1 },
            inner: Some(LoopSpec::Constant {
                director: [0.0, 0.0, 1.0],
            }),
        };
        let data = boundary_data(&g, &spec).unwrap();
        let inner_value = manifold::phi(&Vector3::z()).unwrap();
        let inner_cells = data.iter().filter(|(_, q)| *q == inner_value).count();
        assert!(inner_cells > 0 && inner_cells < data.len());
    }

    #[test]
    fn boundary_values_are_deterministic() {
        let g = build_grid(unit_disk(), 64).unwrap();
        let a = boundary_data(&g, &BoundarySpec::geodesic(1)).unwrap();
        let b = boundary_data(&g, &BoundarySpec::geodesic(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn interpolation_reproduces_cells_and_midpoints() {
        let g = Arc::new(build_grid(unit_disk(), 32).unwrap());
        let f = Field::from_fn(g.clone(), 0.1, params(), |x, y| {
            QTensor::new([x, y, x * y, x * x, 1.0])
        });
        let (i, j) = (18, 17);
        let [x, y] = g.center(i, j);
        assert_eq!(f.interpolate(x, y).unwrap(), f.get(i, j));
        let mid = f.interpolate(x + 0.5 * g.h, y).unwrap();
        let mean = (f.get(i, j) + f.get(i + 1, j)) * 0.5;
        assert!((mid - mean).norm() < 1e-14);
        assert!(matches!(f.interpolate(5.0, 0.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn interpolation_error_is_second_order() {
        let smooth = |x: f64, y: f64| QTensor::new([x.sin(), (2.0 * y).cos(), x * y, 0.0, 0.0]);
        let err = |n| {
            let g = Arc::new(build_grid(unit_disk(), n).unwrap());
            let f = Field::from_fn(g, 0.1, params(), smooth);
            (0..50)
                .map(|k| {
                    let t = 0.37 * k as f64;
                    let (x, y) = (0.5 * t.cos(), 0.5 * (1.3 * t).sin());
                    (f.interpolate(x, y).unwrap() - smooth(x, y)).norm()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 3.0, "ratio {ratio}");
    }
}
