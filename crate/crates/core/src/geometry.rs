//! Analytic domains with C² boundary and their uniform Cartesian grids.
//!
//! Three shapes are supported: an interval in 1D, and a disk or an annulus
//! in 2D. Every quantity the solvers and the bound checks need (distance to
//! the boundary, inward normals, the smoothness radius of the distance
//! function and its second derivatives) is available in closed form.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Point in the plane; 1D domains only look at the first coordinate.
pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Interval { a: f64, b: f64 },
    Disk { center: Point, radius: f64 },
    Annulus { center: Point, inner: f64, outer: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    shape: Shape,
}

fn norm(v: Point) -> f64 {
    v[0].hypot(v[1])
}

fn to_point(x: &[f64], dim: usize) -> Point {
    assert_eq!(x.len(), dim, "point dimension does not match domain dimension");
    if dim == 1 {
        [x[0], 0.0]
    } else {
        [x[0], x[1]]
    }
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Domain(format!("interval requires a < b, got ({a}, {b})")));
        }
        Ok(Self { shape: Shape::Interval { a, b } })
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::Domain(format!("disk requires radius > 0, got {radius}")));
        }
        Ok(Self { shape: Shape::Disk { center, radius } })
    }

    pub fn annulus(center: [f64; 2], inner: f64, outer: f64) -> Result<Self> {
        if !(inner.is_finite() && outer.is_finite() && 0.0 < inner && inner < outer)
            || !center.iter().all(|c| c.is_finite())
        {
            return Err(Error::Domain(format!(
                "annulus requires 0 < r < R, got r = {inner}, R = {outer}"
            )));
        }
        Ok(Self { shape: Shape::Annulus { center, inner, outer } })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn bounding_box(&self) -> BoundingBox {
        match self.shape {
            Shape::Interval { a, b } => BoundingBox { min: [a, 0.0], max: [b, 0.0] },
            Shape::Disk { center, radius: r } | Shape::Annulus { center, outer: r, .. } => {
                BoundingBox {
                    min: [center[0] - r, center[1] - r],
                    max: [center[0] + r, center[1] + r],
                }
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.shape {
            Shape::Interval { a, b } => b - a,
            Shape::Disk { radius, .. } => 2.0 * radius,
            Shape::Annulus { outer, .. } => 2.0 * outer,
        }
    }

    /// Largest value of the distance to the boundary over the domain.
    pub fn max_boundary_distance(&self) -> f64 {
        match self.shape {
            Shape::Interval { a, b } => 0.5 * (b - a),
            Shape::Disk { radius, .. } => radius,
            Shape::Annulus { inner, outer, .. } => 0.5 * (outer - inner),
        }
    }

    pub(crate) fn distance_to_boundary_pt(&self, x: Point) -> f64 {
        match self.shape {
            Shape::Interval { a, b } => (x[0] - a).abs().min((b - x[0]).abs()),
            Shape::Disk { center, radius } => {
                (norm([x[0] - center[0], x[1] - center[1]]) - radius).abs()
            }
            Shape::Annulus { center, inner, outer } => {
                let rho = norm([x[0] - center[0], x[1] - center[1]]);
                (rho - inner).abs().min((rho - outer).abs())
            }
        }
    }

    pub(crate) fn contains_pt(&self, x: Point) -> bool {
        match self.shape {
            Shape::Interval { a, b } => a < x[0] && x[0] < b,
            Shape::Disk { center, radius } => norm([x[0] - center[0], x[1] - center[1]]) < radius,
            Shape::Annulus { center, inner, outer } => {
                let rho = norm([x[0] - center[0], x[1] - center[1]]);
                inner < rho && rho < outer
            }
        }
    }

    pub(crate) fn distance_to_closure_pt(&self, x: Point) -> f64 {
        match self.shape {
            Shape::Interval { a, b } => (a - x[0]).max(x[0] - b).max(0.0),
            Shape::Disk { center, radius } => {
                (norm([x[0] - center[0], x[1] - center[1]]) - radius).max(0.0)
            }
            Shape::Annulus { center, inner, outer } => {
                let rho = norm([x[0] - center[0], x[1] - center[1]]);
                (rho - outer).max(inner - rho).max(0.0)
            }
        }
    }

    /// Closest point of the closed domain.
    pub(crate) fn project_closure_pt(&self, x: Point) -> Point {
        match self.shape {
            Shape::Interval { a, b } => [x[0].clamp(a, b), 0.0],
            Shape::Disk { center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let rho = norm(d);
                if rho <= radius {
                    x
                } else {
                    [center[0] + d[0] * radius / rho, center[1] + d[1] * radius / rho]
                }
            }
            Shape::Annulus { center, inner, outer } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let rho = norm(d);
                if rho == 0.0 {
                    return [center[0] + inner, center[1]];
                }
                let target = rho.clamp(inner, outer);
                if target == rho {
                    x
                } else {
                    [center[0] + d[0] * target / rho, center[1] + d[1] * target / rho]
                }
            }
        }
    }

    /// Distance to the boundary, defined on the whole space.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.distance_to_boundary_pt(to_point(x, self.dim()))
    }

    /// Zero on the closed domain, distance to it elsewhere.
    pub fn distance_to_closure(&self, x: &[f64]) -> f64 {
        self.distance_to_closure_pt(to_point(x, self.dim()))
    }

    /// Open-set membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.contains_pt(to_point(x, self.dim()))
    }

    pub fn project_onto_closure(&self, x: &[f64]) -> Vec<f64> {
        let p = self.project_closure_pt(to_point(x, self.dim()));
        p[..self.dim()].to_vec()
    }

    /// Unit inward normal at a boundary point.
    pub fn inward_normal(&self, x0: &[f64]) -> Result<Vec<f64>> {
        let p = to_point(x0, self.dim());
        let dist = self.distance_to_boundary_pt(p);
        if dist > 1e-12 * self.diameter() {
            return Err(Error::NotOnBoundary { point: x0.to_vec(), distance: dist });
        }
        let n = match self.shape {
            Shape::Interval { a, b } => {
                if (p[0] - a).abs() <= (p[0] - b).abs() {
                    vec![1.0]
                } else {
                    vec![-1.0]
                }
            }
            Shape::Disk { center, .. } => {
                let d = [p[0] - center[0], p[1] - center[1]];
                let rho = norm(d);
                vec![-d[0] / rho, -d[1] / rho]
            }
            Shape::Annulus { center, inner, outer } => {
                let d = [p[0] - center[0], p[1] - center[1]];
                let rho = norm(d);
                if (rho - inner).abs() <= (rho - outer).abs() {
                    vec![d[0] / rho, d[1] / rho]
                } else {
                    vec![-d[0] / rho, -d[1] / rho]
                }
            }
        };
        Ok(n)
    }

    /// One third of the widest boundary tube on which the distance function
    /// is C². For these shapes the distance is smooth everywhere except on
    /// its ridge, where it takes its maximal value.
    pub fn smoothness_radius(&self) -> f64 {
        self.max_boundary_distance() / 3.0
    }

    /// Analytic Laplacian of the distance to the boundary, restricted to the
    /// tube `d <= 2 * smoothness_radius()`.
    pub fn laplacian_distance(&self, x: &[f64]) -> Result<f64> {
        let p = to_point(x, self.dim());
        let d = self.distance_to_boundary_pt(p);
        let band = 2.0 * self.smoothness_radius();
        if !self.contains_pt(p) || d > band * (1.0 + 1e-12) {
            return Err(Error::OutsideSmoothBand { point: x.to_vec() });
        }
        Ok(match self.shape {
            Shape::Interval { .. } => 0.0,
            Shape::Disk { center, .. } => -1.0 / norm([p[0] - center[0], p[1] - center[1]]),
            Shape::Annulus { center, inner, outer } => {
                let rho = norm([p[0] - center[0], p[1] - center[1]]);
                if rho - inner <= outer - rho {
                    1.0 / rho
                } else {
                    -1.0 / rho
                }
            }
        })
    }

    /// Sup of the operator norm of the Hessian of the distance over the tube
    /// `d <= smoothness_radius()`.
    pub fn distance_hessian_bound(&self) -> f64 {
        let delta = self.smoothness_radius();
        match self.shape {
            Shape::Interval { .. } => 0.0,
            Shape::Disk { radius, .. } => 1.0 / (radius - delta),
            Shape::Annulus { inner, outer, .. } => (1.0 / inner).max(1.0 / (outer - delta)),
        }
    }

    /// A boundary point parametrised by `t` in `[0, 1)`. Used for sampling.
    pub fn boundary_point(&self, t: f64) -> Point {
        match self.shape {
            Shape::Interval { a, b } => {
                if t < 0.5 {
                    [a, 0.0]
                } else {
                    [b, 0.0]
                }
            }
            Shape::Disk { center, radius } => {
                let phi = std::f64::consts::TAU * t;
                [center[0] + radius * phi.cos(), center[1] + radius * phi.sin()]
            }
            Shape::Annulus { center, inner, outer } => {
                let (r, s) = if t < 0.5 { (inner, 2.0 * t) } else { (outer, 2.0 * t - 1.0) };
                let phi = std::f64::consts::TAU * s;
                [center[0] + r * phi.cos(), center[1] + r * phi.sin()]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// Inside the domain, further than `h * sqrt(n)` from the boundary.
    Interior,
    /// Inside the domain, within `h * sqrt(n)` of the boundary.
    Band,
    Exterior,
}

impl NodeClass {
    pub fn is_active(self) -> bool {
        !matches!(self, NodeClass::Exterior)
    }
}

/// Classification of a single lattice point. Pure function of its inputs.
pub fn classify_point(domain: &Domain, x: Point, h: f64) -> NodeClass {
    if !domain.contains_pt(x) {
        return NodeClass::Exterior;
    }
    let width = h * (domain.dim() as f64).sqrt();
    if domain.distance_to_boundary_pt(x) <= width * (1.0 + 1e-12) {
        NodeClass::Band
    } else {
        NodeClass::Interior
    }
}

pub(crate) const NO_NODE: usize = usize::MAX;

/// Uniform lattice over the bounding box with per-node classification.
///
/// Values of grid functions live on the active (non-exterior) nodes, indexed
/// `0..n_active()` in lexicographic order (x fastest).
#[derive(Debug, Clone)]
pub struct Grid {
    domain: Domain,
    h: f64,
    origin: Point,
    counts: [usize; 2],
    class: Vec<NodeClass>,
    lattice_to_active: Vec<usize>,
    active_to_lattice: Vec<usize>,
    // [x-, x+, y-, y+]
    neighbors: Vec<[usize; 4]>,
}

pub fn build_grid(domain: &Domain, h: f64) -> Result<Grid> {
    Grid::new(domain, h)
}

impl Grid {
    pub fn new(domain: &Domain, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
        }
        let bbox = domain.bounding_box();
        let dim = domain.dim();
        let mut counts = [1usize; 2];
        for k in 0..dim {
            let cells = ((bbox.max[k] - bbox.min[k]) / h * (1.0 + 1e-12)).floor() as usize;
            counts[k] = cells + 1;
        }
        let total = counts[0] * counts[1];
        if total > 50_000_000 {
            return Err(Error::Config(format!("grid with {total} nodes is too large")));
        }
        let origin = bbox.min;
        let mut class = Vec::with_capacity(total);
        let mut lattice_to_active = vec![NO_NODE; total];
        let mut active_to_lattice = Vec::new();
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                let x = [origin[0] + i as f64 * h, origin[1] + j as f64 * h];
                let c = classify_point(domain, x, h);
                if c.is_active() {
                    lattice_to_active[j * counts[0] + i] = active_to_lattice.len();
                    active_to_lattice.push(j * counts[0] + i);
                }
                class.push(c);
            }
        }
        let mut neighbors = Vec::with_capacity(active_to_lattice.len());
        for &l in &active_to_lattice {
            let (i, j) = (l % counts[0], l / counts[0]);
            let at = |ii: isize, jj: isize| -> usize {
                if ii < 0 || jj < 0 || ii as usize >= counts[0] || jj as usize >= counts[1] {
                    NO_NODE
                } else {
                    lattice_to_active[jj as usize * counts[0] + ii as usize]
                }
            };
            let (i, j) = (i as isize, j as isize);
            let nb = if dim == 1 {
                [at(i - 1, j), at(i + 1, j), NO_NODE, NO_NODE]
            } else {
                [at(i - 1, j), at(i + 1, j), at(i, j - 1), at(i, j + 1)]
            };
            neighbors.push(nb);
        }
        let has_full_stencil = neighbors
            .iter()
            .any(|nb| nb[..2 * dim].iter().all(|&n| n != NO_NODE));
        if !has_full_stencil {
            return Err(Error::Config(format!(
                "grid spacing h = {h} is too coarse: no interior node has a full difference stencil"
            )));
        }
        Ok(Self {
            domain: *domain,
            h,
            origin,
            counts,
            class,
            lattice_to_active,
            active_to_lattice,
            neighbors,
        })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    pub fn n_nodes(&self) -> usize {
        self.class.len()
    }

    pub fn n_active(&self) -> usize {
        self.active_to_lattice.len()
    }

    pub fn lattice_point(&self, l: usize) -> Point {
        let (i, j) = (l % self.counts[0], l / self.counts[0]);
        [self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h]
    }

    pub fn lattice_class(&self, l: usize) -> NodeClass {
        self.class[l]
    }

    /// Coordinates of the active node `a`.
    pub fn point(&self, a: usize) -> Point {
        self.lattice_point(self.active_to_lattice[a])
    }

    pub fn coords(&self, a: usize) -> Vec<f64> {
        self.point(a)[..self.dim()].to_vec()
    }

    pub fn class(&self, a: usize) -> NodeClass {
        self.class[self.active_to_lattice[a]]
    }

    pub fn lattice_index(&self, a: usize) -> (usize, usize) {
        let l = self.active_to_lattice[a];
        (l % self.counts[0], l / self.counts[0])
    }

    /// Active index of lattice node `(i, j)`, if it exists and is active.
    pub fn active_at(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.counts[0] || j >= self.counts[1] {
            return None;
        }
        let a = self.lattice_to_active[j * self.counts[0] + i];
        (a != NO_NODE).then_some(a)
    }

    /// Active neighbour of `a` along `axis` in direction `dir` (-1 or +1).
    pub fn neighbor(&self, a: usize, axis: usize, dir: i32) -> Option<usize> {
        let slot = 2 * axis + usize::from(dir > 0);
        let n = self.neighbors[a][slot];
        (n != NO_NODE).then_some(n)
    }

    pub(crate) fn neighbor_slots(&self, a: usize) -> &[usize; 4] {
        &self.neighbors[a]
    }

    pub fn distance_to_boundary(&self, a: usize) -> f64 {
        self.domain.distance_to_boundary_pt(self.point(a))
    }

    /// True when every axis neighbour of `a` is active.
    pub fn has_full_stencil(&self, a: usize) -> bool {
        self.neighbors[a][..2 * self.dim()].iter().all(|&n| n != NO_NODE)
    }

    /// Largest index distance between axis neighbours, i.e. the half
    /// bandwidth of nearest-neighbour operators in active ordering.
    pub(crate) fn bandwidth(&self) -> usize {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(a, nb)| nb.iter().filter(|&&n| n != NO_NODE).map(move |&n| a.abs_diff(n)))
            .max()
            .unwrap_or(0)
    }

    /// Maps active nodes of this grid onto active nodes of `fine`, whose
    /// spacing must be `h / 2^k` over the same bounding box.
    pub fn embed_into(&self, fine: &Grid) -> Result<Vec<usize>> {
        let ratio = self.h / fine.h;
        let k = ratio.round();
        if k < 1.0 || (ratio - k).abs() > 1e-9 || self.domain != fine.domain {
            return Err(Error::GridMismatch(format!(
                "spacing {} does not refine {}",
                fine.h, self.h
            )));
        }
        let k = k as usize;
        (0..self.n_active())
            .map(|a| {
                let (i, j) = self.lattice_index(a);
                fine.active_at(i * k, j * k).ok_or_else(|| {
                    Error::GridMismatch(format!("node {a} of the coarse grid is inactive on the fine grid"))
                })
            })
            .collect()
    }
}

/// Real values on the active nodes of a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_active() {
            return Err(Error::GridMismatch(format!(
                "{} values for {} active nodes",
                values.len(),
                grid.n_active()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.n_active();
        Self { grid, values: vec![c; n] }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.n_active()).map(|a| f(&grid.coords(a))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest difference quotient between axis neighbours.
    pub fn lipschitz_estimate(&self) -> f64 {
        let g = &self.grid;
        let mut lip = 0.0f64;
        for a in 0..g.n_active() {
            for axis in 0..g.dim() {
                if let Some(b) = g.neighbor(a, axis, 1) {
                    lip = lip.max((self.values[b] - self.values[a]).abs() / g.h());
                }
            }
        }
        lip
    }

    /// Value at the active node closest to `x`.
    pub fn nearest_value(&self, x: &[f64]) -> Option<f64> {
        let g = &self.grid;
        let o = g.origin();
        let mut idx = [0usize; 2];
        for k in 0..g.dim() {
            let r = ((x[k] - o[k]) / g.h()).round();
            if r < 0.0 {
                return None;
            }
            idx[k] = r as usize;
        }
        g.active_at(idx[0], idx[1]).map(|a| self.values[a])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn distances() {
        let i = Domain::interval(0.0, 1.0).unwrap();
        assert!(close(i.distance_to_boundary(&[0.25]), 0.25, 1e-15));
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        assert!(close(d.distance_to_boundary(&[0.0, 0.0]), 1.0, 1e-15));
        let an = Domain::annulus([0.0, 0.0], 0.5, 1.0).unwrap();
        assert!(close(an.distance_to_boundary(&[0.8, 0.0]), 0.2, 1e-15));
        assert!(close(an.distance_to_boundary(&[0.0, -0.8]), 0.2, 1e-15));

        assert_eq!(i.distance_to_closure(&[0.5]), 0.0);
        assert!(close(i.distance_to_closure(&[1.2]), 0.2, 1e-15));
        assert!(close(d.distance_to_closure(&[1.5, 0.0]), 0.5, 1e-15));
        assert!(close(an.distance_to_closure(&[0.1, 0.0]), 0.4, 1e-15));
    }

    #[test]
    fn normals() {
        let i = Domain::interval(0.0, 1.0).unwrap();
        assert_eq!(i.inward_normal(&[0.0]).unwrap(), vec![1.0]);
        assert_eq!(i.inward_normal(&[1.0]).unwrap(), vec![-1.0]);
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        assert_eq!(d.inward_normal(&[1.0, 0.0]).unwrap(), vec![-1.0, 0.0]);
        let an = Domain::annulus([0.0, 0.0], 0.5, 1.0).unwrap();
        let n = an.inward_normal(&[0.5, 0.0]).unwrap();
        assert_eq!(n, vec![1.0, 0.0]);
        // finite-difference check of the distance gradient just inside
        let s = 1e-3;
        let fd = (an.distance_to_boundary(&[0.5 + 2.0 * s, 0.0])
            - an.distance_to_boundary(&[0.5 + s, 0.0]))
            / s;
        assert!(close(fd, n[0], 1e-9));
        assert!(matches!(i.inward_normal(&[0.3]), Err(Error::NotOnBoundary { .. })));
    }

    #[test]
    fn smoothness_radius_per_shape() {
        assert!(close(Domain::interval(0.0, 1.0).unwrap().smoothness_radius(), 1.0 / 6.0, 1e-15));
        assert!(close(Domain::disk([0.0, 0.0], 1.0).unwrap().smoothness_radius(), 1.0 / 3.0, 1e-15));
        assert!(close(
            Domain::annulus([0.0, 0.0], 0.5, 1.0).unwrap().smoothness_radius(),
            1.0 / 12.0,
            1e-15
        ));
    }

    #[test]
    fn laplacian_of_distance() {
        let i = Domain::interval(0.0, 1.0).unwrap();
        assert_eq!(i.laplacian_distance(&[0.1]).unwrap(), 0.0);
        let d = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let lap = d.laplacian_distance(&[0.9, 0.0]).unwrap();
        assert!(close(lap, -1.0 / 0.9, 1e-14));
        assert!(lap >= -2.0 / d.smoothness_radius());
        assert!(d.laplacian_distance(&[0.1, 0.0]).is_err());
        assert!(i.laplacian_distance(&[0.5]).is_err());
    }

    #[test]
    fn invalid_shapes() {
        assert!(Domain::interval(1.0, 0.0).is_err());
        assert!(Domain::disk([0.0, 0.0], 0.0).is_err());
        assert!(Domain::annulus([0.0, 0.0], 1.0, 0.5).is_err());
    }

    #[test]
    fn interval_grid_enumeration() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let g = build_grid(&dom, 0.25).unwrap();
        let xs: Vec<f64> = (0..g.n_active()).map(|a| g.point(a)[0]).collect();
        assert_eq!(xs, vec![0.25, 0.5, 0.75]);
        let band: Vec<f64> = (0..g.n_active())
            .filter(|&a| g.class(a) == NodeClass::Band)
            .map(|a| g.point(a)[0])
            .collect();
        assert_eq!(band, vec![0.25, 0.75]);
        assert!(build_grid(&dom, 0.6).is_err());
    }

    #[test]
    fn disk_grid_enumeration() {
        let dom = Domain::disk([0.0, 0.0], 1.0).unwrap();
        let g = build_grid(&dom, 0.5).unwrap();
        let mut expected = 0;
        for j in 0..5 {
            for i in 0..5 {
                let x = [-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64];
                if norm(x) < 1.0 {
                    expected += 1;
                }
            }
        }
        assert_eq!(g.n_active(), expected);
        for a in 0..g.n_active() {
            assert!(norm(g.point(a)) < 1.0);
            assert!(g.distance_to_boundary(a) > 0.0);
        }
    }

    #[test]
    fn embedding_nested_grids() {
        let dom = Domain::interval(0.0, 1.0).unwrap();
        let coarse = build_grid(&dom, 0.125).unwrap();
        let fine = build_grid(&dom, 0.03125).unwrap();
        let map = coarse.embed_into(&fine).unwrap();
        for (a, &b) in map.iter().enumerate() {
            assert!(close(coarse.point(a)[0], fine.point(b)[0], 1e-15));
        }
        let other = build_grid(&dom, 0.1).unwrap();
        assert!(coarse.embed_into(&other).is_err());
    }
}
