//! Locating, classifying and measuring field minima, and the MOT beam
//! addressability model.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::SymmetricEigen;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{self, FieldProbe, Mat3};
use crate::geometry::{Vec3, WireLayout};

pub const GRAD_TOL: f64 = 1e-10;
pub const POS_TOL: f64 = 1e-7;
pub const B_ZERO_THRESHOLD: f64 = 1e-7;
/// Relative size below which a Jacobian eigenvalue counts as zero.
pub const EIG_TOL: f64 = 1e-9;
/// Relative size below which a Hessian eigenvalue of |B|² counts as zero.
/// The weak axis of a short bent wire falls off as (r/L)⁶, so this sits
/// near roundoff.
pub const HESS_TOL: f64 = 1e-14;
pub const DEFAULT_SEED_GRID: [usize; 3] = [9, 9, 7];
const MAX_ITER: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrapKind {
    Quadrupole,
    IoffePritchard,
}

impl fmt::Display for TrapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrapKind::Quadrupole => "quadrupole",
            TrapKind::IoffePritchard => "ioffe-pritchard",
        })
    }
}

/// A located minimum of |B|.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapSite {
    pub position: Vec3,
    pub b_min: f64,
    pub kind: TrapKind,
    /// Quadrupole axis; `None` for Ioffe–Pritchard sites.
    pub axis: Option<Vec3>,
    /// Eigenvalues of the symmetrized Jacobian, ascending [T/m].
    pub principal_gradients: [f64; 3],
    /// Eigenvectors matching `principal_gradients`.
    pub principal_axes: [Vec3; 3],
    /// Second derivatives of |B| along `curvature_axes` [T/m²]
    /// (Ioffe–Pritchard sites only).
    pub curvatures: Option<[f64; 3]>,
    pub curvature_axes: Option<[Vec3; 3]>,
    /// ‖∇|B|²‖ at the site [T²/m].
    pub grad_norm: f64,
    pub label: Option<String>,
}

impl TrapSite {
    /// Angle between the quadrupole axis and the surface plane, in degrees.
    pub fn axis_surface_angle(&self) -> Option<f64> {
        self.axis.map(|a| a.z.abs().min(1.0).asin().to_degrees())
    }

    /// Signed angle of the axis from +x, in (−90°, 90°], after flipping the
    /// axis so that its x component is non-negative.
    pub fn axis_xz_angle(&self) -> Option<f64> {
        self.axis.map(|a| {
            let a = if a.x < 0.0 || (a.x == 0.0 && a.z < 0.0) { -a } else { a };
            a.z.atan2(a.x).to_degrees()
        })
    }
}

/// Axis-aligned search box and seed grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRegion {
    pub min: Vec3,
    pub max: Vec3,
    pub seed_grid: [usize; 3],
    pub dedup_radius: f64,
}

impl SearchRegion {
    pub fn new(min: Vec3, max: Vec3, dedup_radius: f64) -> Self {
        SearchRegion {
            min,
            max,
            seed_grid: DEFAULT_SEED_GRID,
            dedup_radius,
        }
    }

    pub fn with_seed_grid(mut self, seed_grid: [usize; 3]) -> Self {
        self.seed_grid = seed_grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if !(self.min[k] < self.max[k]) || !self.min[k].is_finite() || !self.max[k].is_finite() {
                return Err(Error::validation("region", "each min bound must be below its max bound"));
            }
            if self.seed_grid[k] < 2 {
                return Err(Error::validation("seed_grid", "need at least 2 seeds per axis"));
            }
        }
        if !(self.min.z > 0.0) {
            return Err(Error::validation("region.min.z", "search box must lie above the wire plane"));
        }
        if !(self.dedup_radius > 0.0) {
            return Err(Error::validation("dedup_radius", "must be positive"));
        }
        Ok(())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// Seeds on an inclusive grid, x fastest.
    pub fn seeds(&self) -> Vec<Vec3> {
        let [nx, ny, nz] = self.seed_grid;
        let lerp = |k: usize, i: usize, n: usize| self.min[k] + (self.max[k] - self.min[k]) * i as f64 / (n - 1) as f64;
        let mut out = Vec::with_capacity(nx * ny * nz);
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    out.push(Vec3::new(lerp(0, ix, nx), lerp(1, iy, ny), lerp(2, iz, nz)));
                }
            }
        }
        out
    }
}

/// Tolerances for the minimizer and classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub grad_tol: f64,
    pub pos_tol: f64,
    pub b_zero_threshold: f64,
    pub eig_tol: f64,
    pub max_iter: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            grad_tol: GRAD_TOL,
            pos_tol: POS_TOL,
            b_zero_threshold: B_ZERO_THRESHOLD,
            eig_tol: EIG_TOL,
            max_iter: MAX_ITER,
        }
    }
}

/// Result of [`classify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Classification {
    Quadrupole { axis: Vec3 },
    IoffePritchard,
}

/// Ascending eigen-decomposition of sym(J).
pub fn principal(j: &Mat3) -> ([f64; 3], [Vec3; 3]) {
    let sym = (j + j.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = idx.map(|i| eig.eigenvalues[i]);
    let vecs = idx.map(|i| orient(eig.eigenvectors.column(i).into_owned()));
    (vals, vecs)
}

/// Sign convention for axes: z ≥ 0, ties broken by x ≥ 0, then y ≥ 0.
pub fn orient(v: Vec3) -> Vec3 {
    let v = v.normalize();
    let key = if v.z != 0.0 {
        v.z
    } else if v.x != 0.0 {
        v.x
    } else {
        v.y
    };
    if key < 0.0 {
        -v
    } else {
        v
    }
}

/// Kind and, for quadrupoles, the axis of the odd-signed eigenvalue.
///
/// A quadrupole spectrum whose smallest eigenvalue is below
/// `eig_tol·max|λ|` has no resolvable odd sign and is reported as
/// degenerate.
pub fn classify(probe: &FieldProbe, b_zero_threshold: f64, eig_tol: f64) -> Result<Classification> {
    if probe.magnitude() >= b_zero_threshold {
        return Ok(Classification::IoffePritchard);
    }
    let (vals, vecs) = principal(&probe.j);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let smallest = vals.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if scale == 0.0 || smallest <= eig_tol * scale {
        return Err(Error::Degenerate { eigenvalues: vals });
    }
    let positives = vals.iter().filter(|&&v| v > 0.0).count();
    let odd = match positives {
        1 => vals.iter().position(|&v| v > 0.0),
        2 => vals.iter().position(|&v| v < 0.0),
        _ => None,
    };
    match odd {
        Some(k) => Ok(Classification::Quadrupole { axis: vecs[k] }),
        None => Err(Error::Degenerate { eigenvalues: vals }),
    }
}

/// Hessian of |B|² from B, J and central differences of J.
fn hessian_b2(x: &Vec3, pr: &FieldProbe, layout: &WireLayout, dist: f64) -> Result<Mat3> {
    let h = (dist * 1e-4).max(1e-10);
    let mut r = Mat3::zeros();
    for k in 0..3 {
        let mut dx = Vec3::zeros();
        dx[k] = h;
        let jp = field::jacobian(&(x + dx), layout)?;
        let jm = field::jacobian(&(x - dx), layout)?;
        let dj = (jp - jm) / (2.0 * h);
        // Σ_i B_i ∂J_ij/∂x_k
        r.set_column(k, &(dj.transpose() * pr.b));
    }
    let r = (r + r.transpose()) * 0.5;
    Ok((pr.j.transpose() * pr.j + r) * 2.0)
}

fn nearest_distance(x: &Vec3, layout: &WireLayout) -> f64 {
    field::nearest_conductor(x, layout).map_or(f64::INFINITY, |(_, d)| d)
}

struct Converged {
    position: Vec3,
    f: f64,
}

/// Hybrid descent from one seed: a Newton–Raphson step on B = 0 when it
/// at least halves |B|, otherwise a modified Newton step on |B|² with
/// backtracking.
fn descend(seed: &Vec3, layout: &WireLayout, region: &SearchRegion, opts: &SearchOptions) -> Option<Converged> {
    let extent = (region.max - region.min).norm();
    let mut x = *seed;
    let mut pr = field::probe(&x, layout).ok()?;
    for _ in 0..opts.max_iter {
        let f = pr.b.norm_squared();
        let g = pr.grad_b2();
        if f == 0.0 {
            return Some(Converged { position: x, f });
        }
        let dist = nearest_distance(&x, layout);
        let trust = (0.25 * dist).min(0.5 * extent);

        let mut accepted: Option<(Vec3, FieldProbe)> = None;
        if let Some(inv) = pr.j.try_inverse() {
            let p = -(inv * pr.b);
            if p.norm() <= trust && p.iter().all(|c| c.is_finite()) {
                if let Ok(np) = field::probe(&(x + p), layout) {
                    if np.b.norm() <= 0.5 * pr.b.norm() {
                        accepted = Some((p, np));
                    }
                }
            }
        }
        if accepted.is_none() {
            let h = hessian_b2(&x, &pr, layout, dist).ok()?;
            let eig = SymmetricEigen::new(h);
            let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                // Uniform |B|²: no minimum to descend to.
                if g.norm() < opts.grad_tol {
                    return Some(Converged { position: x, f });
                }
                return None;
            }
            let floor = scale * 1e-15;
            let mut p = Vec3::zeros();
            for k in 0..3 {
                let v = eig.eigenvectors.column(k);
                p -= v * (v.dot(&g) / eig.eigenvalues[k].abs().max(floor));
            }
            if p.norm() > trust {
                p *= trust / p.norm();
            }
            let slope = g.dot(&p);
            let mut alpha = 1.0;
            for _ in 0..60 {
                let trial = x + p * alpha;
                match field::probe(&trial, layout) {
                    Ok(np) if np.b.norm_squared() <= f + 1e-4 * alpha * slope => {
                        accepted = Some((p * alpha, np));
                        break;
                    }
                    Ok(_) => {}
                    Err(_) => return None,
                }
                alpha *= 0.5;
            }
            if accepted.is_none() {
                // No descent possible at working precision.
                if g.norm() < opts.grad_tol {
                    return Some(Converged { position: x, f });
                }
                return None;
            }
        }
        let (step, np) = accepted?;
        x += step;
        pr = np;
        if step.norm() < opts.pos_tol && pr.grad_b2().norm() < opts.grad_tol {
            return Some(Converged {
                position: x,
                f: pr.b.norm_squared(),
            });
        }
    }
    None
}

/// Builds a site at a converged point, or `None` when the point is not a
/// strict minimum.
fn build_site(x: &Vec3, layout: &WireLayout, opts: &SearchOptions) -> Option<TrapSite> {
    let pr = field::probe(x, layout).ok()?;
    let grad_norm = pr.grad_b2().norm();
    if grad_norm >= opts.grad_tol {
        return None;
    }
    let (vals, vecs) = principal(&pr.j);
    match classify(&pr, opts.b_zero_threshold, opts.eig_tol) {
        Ok(Classification::Quadrupole { axis }) => Some(TrapSite {
            position: *x,
            b_min: pr.magnitude(),
            kind: TrapKind::Quadrupole,
            axis: Some(axis),
            principal_gradients: vals,
            principal_axes: vecs,
            curvatures: None,
            curvature_axes: None,
            grad_norm,
            label: None,
        }),
        // A nonzero floor under the threshold whose Jacobian is not a
        // quadrupole is still an IP minimum if the Hessian says so.
        Ok(Classification::IoffePritchard) | Err(_) if pr.magnitude() > 0.0 => {
            let dist = nearest_distance(x, layout);
            let h = hessian_b2(x, &pr, layout, dist).ok()?;
            let eig = SymmetricEigen::new(h);
            let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
            if !(scale > 0.0 && min > HESS_TOL * scale) {
                return None;
            }
            let mut idx = [0usize, 1, 2];
            idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let axes = idx.map(|i| orient(eig.eigenvectors.column(i).into_owned()));
            let curv = curvatures_along(x, layout, &axes, pr.magnitude(), &pr.j, dist).ok()?;
            if curv.iter().any(|c| !(*c > 0.0)) {
                return None;
            }
            Some(TrapSite {
                position: *x,
                b_min: pr.magnitude(),
                kind: TrapKind::IoffePritchard,
                axis: None,
                principal_gradients: vals,
                principal_axes: vecs,
                curvatures: Some(curv),
                curvature_axes: Some(axes),
                grad_norm,
                label: None,
            })
        }
        _ => None,
    }
}

/// Step for second differences of |B|: small against both the conductor
/// distance and the harmonic region b_min/‖J‖.
pub fn curvature_step(b_min: f64, j: &Mat3, dist: f64) -> f64 {
    let jn = j.norm();
    let harmonic = if jn > 0.0 { b_min / jn } else { f64::INFINITY };
    (1e-3 * dist).min(0.05 * harmonic).max(1e-9)
}

/// Second central differences of |B| along each of `axes`.
pub fn curvatures_along(x: &Vec3, layout: &WireLayout, axes: &[Vec3; 3], b0: f64, j: &Mat3, dist: f64) -> Result<[f64; 3]> {
    let h = curvature_step(b0, j, dist);
    let mut out = [0.0; 3];
    for (k, a) in axes.iter().enumerate() {
        let bp = field::field_total(&(x + a * h), layout)?.norm();
        let bm = field::field_total(&(x - a * h), layout)?.norm();
        out[k] = (bp - 2.0 * b0 + bm) / (h * h);
    }
    Ok(out)
}

fn grid_key(p: &Vec3, tol: f64) -> [i64; 3] {
    [0, 1, 2].map(|k| (p[k] / tol).round() as i64)
}

fn position_order(a: &Vec3, b: &Vec3, tol: f64) -> Ordering {
    grid_key(a, tol).cmp(&grid_key(b, tol))
}

/// Multi-start search for strict minima of |B| inside `region`.
///
/// Starts run in parallel; results are reduced in seed order, so the output
/// does not depend on scheduling. Sites closer than `dedup_radius` are
/// merged (the lower |B| wins) and the survivors are sorted by position.
pub fn find_minima(layout: &WireLayout, region: &SearchRegion) -> Result<Vec<TrapSite>> {
    find_minima_with(layout, region, &SearchOptions::default())
}

pub fn find_minima_with(layout: &WireLayout, region: &SearchRegion, opts: &SearchOptions) -> Result<Vec<TrapSite>> {
    region.validate()?;
    layout.validate()?;
    let seeds = region.seeds();
    let converged: Vec<Option<Converged>> = seeds
        .par_iter()
        .map(|s| {
            descend(s, layout, region, opts).filter(|c| region.contains(&c.position))
        })
        .collect();
    let mut kept: Vec<Converged> = Vec::new();
    for c in converged.into_iter().flatten() {
        match kept
            .iter_mut()
            .find(|k| (k.position - c.position).norm() < region.dedup_radius)
        {
            Some(k) => {
                if c.f < k.f {
                    *k = c;
                }
            }
            None => kept.push(c),
        }
    }
    let mut sites: Vec<TrapSite> = kept
        .par_iter()
        .map(|c| build_site(&c.position, layout, opts))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    sites.sort_by(|a, b| position_order(&a.position, &b.position, opts.pos_tol));
    Ok(sites)
}

/// Derived numbers for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapMetrics {
    pub kind: TrapKind,
    pub b_min: f64,
    /// |∂B/∂x_k| at the site: the rate at which |B| grows along each
    /// coordinate axis from a field zero [T/m].
    pub axis_gradients: [f64; 3],
    pub principal_gradients: [f64; 3],
    pub axis: Option<Vec3>,
    pub axis_surface_angle: Option<f64>,
    pub axis_xz_angle: Option<f64>,
    /// Curvatures of |B| along the principal axes (IP sites).
    pub curvatures: Option<[f64; 3]>,
    /// Curvatures of |B| along x, y, z (IP sites).
    pub axis_curvatures: Option<[f64; 3]>,
}

pub fn trap_metrics(site: &TrapSite, layout: &WireLayout) -> Result<TrapMetrics> {
    let pr = field::probe(&site.position, layout)?;
    let axis_gradients = [0, 1, 2].map(|k| pr.j.column(k).norm());
    let (vals, _) = principal(&pr.j);
    match site.kind {
        TrapKind::Quadrupole => {
            let axis = match classify(&pr, f64::INFINITY, EIG_TOL)? {
                Classification::Quadrupole { axis } => axis,
                Classification::IoffePritchard => unreachable!("infinite threshold always yields a quadrupole"),
            };
            let tmp = TrapSite {
                axis: Some(axis),
                ..site.clone()
            };
            Ok(TrapMetrics {
                kind: site.kind,
                b_min: pr.magnitude(),
                axis_gradients,
                principal_gradients: vals,
                axis: Some(axis),
                axis_surface_angle: tmp.axis_surface_angle(),
                axis_xz_angle: tmp.axis_xz_angle(),
                curvatures: None,
                axis_curvatures: None,
            })
        }
        TrapKind::IoffePritchard => {
            let dist = nearest_distance(&site.position, layout);
            let axes = match site.curvature_axes {
                Some(a) => a,
                None => {
                    let h = hessian_b2(&site.position, &pr, layout, dist)?;
                    let eig = SymmetricEigen::new(h);
                    let mut idx = [0usize, 1, 2];
                    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
                    idx.map(|i| orient(eig.eigenvectors.column(i).into_owned()))
                }
            };
            let b0 = pr.magnitude();
            let curv = curvatures_along(&site.position, layout, &axes, b0, &pr.j, dist)?;
            let xyz = curvatures_along(&site.position, layout, &[Vec3::x(), Vec3::y(), Vec3::z()], b0, &pr.j, dist)?;
            Ok(TrapMetrics {
                kind: site.kind,
                b_min: b0,
                axis_gradients,
                principal_gradients: vals,
                axis: None,
                axis_surface_angle: None,
                axis_xz_angle: None,
                curvatures: Some(curv),
                axis_curvatures: Some(xyz),
            })
        }
    }
}

/// Circular polarization of a beam pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    SigmaPlus,
    SigmaMinus,
}

impl Polarization {
    pub fn sign(self) -> f64 {
        match self {
            Polarization::SigmaPlus => 1.0,
            Polarization::SigmaMinus => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarization::SigmaPlus => Polarization::SigmaMinus,
            Polarization::SigmaMinus => Polarization::SigmaPlus,
        }
    }
}

impl std::str::FromStr for Polarization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma+" | "s+" | "+" | "σ+" => Ok(Polarization::SigmaPlus),
            "sigma-" | "s-" | "-" | "σ-" | "σ−" => Ok(Polarization::SigmaMinus),
            other => Err(Error::validation("polarization", format!("unknown polarization `{other}`"))),
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::SigmaPlus => "sigma+",
            Polarization::SigmaMinus => "sigma-",
        })
    }
}

/// Reflection-MOT beam geometry: one beam pair parallel to the surface and
/// two beams at ±45° to it in the plane normal to `diagonal_plane_normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    pub parallel_axis: Vec3,
    pub diagonal_plane_normal: Vec3,
    pub parallel_polarization: Polarization,
    pub diagonal_polarization: Polarization,
    /// Radians.
    pub angular_tolerance: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            parallel_axis: Vec3::y(),
            diagonal_plane_normal: Vec3::y(),
            parallel_polarization: Polarization::SigmaPlus,
            diagonal_polarization: Polarization::SigmaMinus,
            angular_tolerance: 30f64.to_radians(),
        }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("parallel_axis", self.parallel_axis), ("diagonal_plane_normal", self.diagonal_plane_normal)] {
            if !((v.norm() - 1.0).abs() < 1e-9) {
                return Err(Error::validation(name, "must be a unit vector"));
            }
        }
        if self.diagonal_plane_normal.cross(&Vec3::z()).norm() < 1e-9 {
            return Err(Error::validation("diagonal_plane_normal", "must not be parallel to the surface normal"));
        }
        if !(self.angular_tolerance > 0.0 && self.angular_tolerance < std::f64::consts::FRAC_PI_4) {
            return Err(Error::validation("angular_tolerance", "must lie in (0, 45°)"));
        }
        Ok(())
    }

    /// The two diagonal beam directions (+45° and −45° from the in-plane
    /// direction toward the surface normal).
    pub fn diagonals(&self) -> (Vec3, Vec3) {
        let u = self.diagonal_plane_normal.cross(&Vec3::z()).normalize();
        let z = Vec3::z();
        ((u + z).normalize(), (-u + z).normalize())
    }
}

/// Which beam direction a quadrupole axis lines up with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisFamily {
    /// Along the +45° diagonal beam.
    DiagonalPlus,
    /// Along the −45° diagonal beam.
    DiagonalMinus,
    /// Along the surface normal.
    Perpendicular,
    /// Along the parallel beam pair.
    Parallel,
    /// None of the above within the angular tolerance.
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Addressability {
    /// Geometrically addressable and selected by the polarization pair.
    Selected,
    /// Geometrically addressable, but the polarization pair selects the
    /// other orientation.
    NotSelected,
    /// Axis along the surface normal: unusable for a reflection MOT.
    Perpendicular,
    /// Axis along the parallel beam pair: not modelled.
    Undefined,
    /// Axis not aligned with any beam, or not a quadrupole.
    NotAddressable,
}

impl fmt::Display for Addressability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Addressability::Selected => "selected",
            Addressability::NotSelected => "not-selected",
            Addressability::Perpendicular => "perpendicular",
            Addressability::Undefined => "undefined",
            Addressability::NotAddressable => "not-addressable",
        })
    }
}

fn line_angle(a: &Vec3, b: &Vec3) -> f64 {
    (a.dot(b).abs() / (a.norm() * b.norm())).min(1.0).acos()
}

/// Closest beam direction to a quadrupole axis.
pub fn axis_family(axis: &Vec3, beams: &BeamConfig) -> AxisFamily {
    let (dp, dm) = beams.diagonals();
    let candidates = [
        (AxisFamily::DiagonalPlus, line_angle(axis, &dp)),
        (AxisFamily::DiagonalMinus, line_angle(axis, &dm)),
        (AxisFamily::Perpendicular, line_angle(axis, &Vec3::z())),
        (AxisFamily::Parallel, line_angle(axis, &beams.parallel_axis)),
    ];
    let (fam, ang) = candidates
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((AxisFamily::Other, f64::INFINITY));
    if ang <= beams.angular_tolerance {
        fam
    } else {
        AxisFamily::Other
    }
}

/// Addressability of one site under `beams`.
///
/// A site along a diagonal beam is selected when the sign of the gradient
/// along the parallel beam, sign(b̂ᵀJb̂), matches the parallel polarization
/// and the sign of the gradient along the +45° beam matches the diagonal
/// polarization. Both signs depend only on the axis orientation and the
/// overall sign of J, so rescaling currents never changes the result.
pub fn assess(site: &TrapSite, beams: &BeamConfig) -> Addressability {
    let axis = match (site.kind, site.axis) {
        (TrapKind::Quadrupole, Some(a)) => a,
        _ => return Addressability::NotAddressable,
    };
    match axis_family(&axis, beams) {
        AxisFamily::DiagonalPlus | AxisFamily::DiagonalMinus => {
            let j = reconstruct(site);
            let b = beams.parallel_axis;
            let (dp, _) = beams.diagonals();
            let s_par = (b.dot(&(j * b))).signum();
            let s_diag = (dp.dot(&(j * dp))).signum();
            if s_par == beams.parallel_polarization.sign() && s_diag == beams.diagonal_polarization.sign() {
                Addressability::Selected
            } else {
                Addressability::NotSelected
            }
        }
        AxisFamily::Perpendicular => Addressability::Perpendicular,
        AxisFamily::Parallel => Addressability::Undefined,
        AxisFamily::Other => Addressability::NotAddressable,
    }
}

/// sym(J) rebuilt from the stored spectrum.
fn reconstruct(site: &TrapSite) -> Mat3 {
    let mut j = Mat3::zeros();
    for k in 0..3 {
        let v = site.principal_axes[k];
        j += v * v.transpose() * site.principal_gradients[k];
    }
    j
}

/// Sites selected by the polarization pair, in input order.
pub fn addressable_traps(sites: &[TrapSite], beams: &BeamConfig) -> Vec<TrapSite> {
    sites
        .iter()
        .filter(|s| assess(s, beams) == Addressability::Selected)
        .cloned()
        .collect()
}

/// Assigns labels by axis family: `Q+` / `Q-` for the ±45° diagonals, `P`
/// for perpendicular axes, `Y` for axes along the parallel beam, `Q` for
/// other quadrupoles and `IP` for Ioffe–Pritchard sites. Families with more
/// than one member are numbered in site order.
pub fn label_sites(sites: &mut [TrapSite], beams: &BeamConfig) {
    let base: Vec<&'static str> = sites
        .iter()
        .map(|s| match (s.kind, s.axis) {
            (TrapKind::IoffePritchard, _) => "IP",
            (_, None) => "Q",
            (_, Some(a)) => match axis_family(&a, beams) {
                AxisFamily::DiagonalPlus => "Q+",
                AxisFamily::DiagonalMinus => "Q-",
                AxisFamily::Perpendicular => "P",
                AxisFamily::Parallel => "Y",
                AxisFamily::Other => "Q",
            },
        })
        .collect();
    let mut seen = std::collections::HashMap::new();
    for (k, site) in sites.iter_mut().enumerate() {
        let total = base.iter().filter(|b| **b == base[k]).count();
        let n = seen.entry(base[k]).or_insert(0usize);
        *n += 1;
        site.label = Some(if total > 1 {
            format!("{}{}", base[k], n)
        } else {
            base[k].to_string()
        });
    }
}
