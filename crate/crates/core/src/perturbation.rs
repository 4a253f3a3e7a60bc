//! Field of the rest of an infinite two-family wire lattice on one cell.
//!
//! Idealized geometry: both wire families lie in the plane `z = 0` and are
//! infinitely long. The n-family runs along +y through `x = n·d`; the
//! m-family runs along +x through `y = m·d`. The cell wires `n = 0` and
//! `m = 0` are excluded. In configuration A every wire carries `+I`; in
//! configuration B the n-family carries `(−1)^n·I`.
//!
//! Sums are taken over symmetric pairs `(k, −k)`, which fixes the limit of
//! the conditionally convergent z-component series.

use crate::error::{Conductor, Error, Result};
use crate::field::{field_total, CompensatedSum, EXCLUSION_RADIUS};
use crate::geometry::{InfiniteWire, LatticeConfig, Vec3, WireLayout};
use crate::units::MU0_OVER_2PI;

pub const DEFAULT_N_MAX: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-12;

/// Lattice configurations for which the perturbation series is defined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationConfig {
    A,
    B,
}

impl TryFrom<LatticeConfig> for PerturbationConfig {
    type Error = Error;

    fn try_from(c: LatticeConfig) -> Result<Self> {
        match c {
            LatticeConfig::A => Ok(PerturbationConfig::A),
            LatticeConfig::B => Ok(PerturbationConfig::B),
            LatticeConfig::C => Err(Error::validation("config", "perturbation series is defined for A and B only")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub config: PerturbationConfig,
    pub d: f64,
    pub current: f64,
    pub n_max: usize,
    pub tol: f64,
}

impl PerturbationSpec {
    pub fn new(config: PerturbationConfig, d: f64, current: f64) -> Self {
        PerturbationSpec {
            config,
            d,
            current,
            n_max: DEFAULT_N_MAX,
            tol: DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.d > 0.0) || !self.d.is_finite() {
            return Err(Error::validation("d", format!("must be positive, got {}", self.d)));
        }
        if self.n_max < 1 {
            return Err(Error::validation("n_max", "must be at least 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::validation("tol", format!("must be positive, got {}", self.tol)));
        }
        if !self.current.is_finite() {
            return Err(Error::validation("current", "must be finite"));
        }
        Ok(())
    }

    fn n_sign(&self, n: i64) -> f64 {
        match self.config {
            PerturbationConfig::A => 1.0,
            PerturbationConfig::B => {
                if n % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Result of a converged series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationResult {
    pub field: Vec3,
    /// Magnitude of the last pair added to either family.
    pub achieved_tol: f64,
    /// Pairs used by the slower of the two families.
    pub terms_used: usize,
    /// Pairs used by the n-family (wires at `x = n·d`).
    pub n_pairs: usize,
    /// Pairs used by the m-family (wires at `y = m·d`).
    pub m_pairs: usize,
}

/// Field of the n-family wire with index `n` (current sign included).
fn n_term(p: &Vec3, spec: &PerturbationSpec, n: i64) -> Vec3 {
    let a = p.x - n as f64 * spec.d;
    let rho2 = a * a + p.z * p.z;
    Vec3::new(p.z, 0.0, -a) * (spec.n_sign(n) / rho2)
}

fn m_term(p: &Vec3, spec: &PerturbationSpec, m: i64) -> Vec3 {
    let b = p.y - m as f64 * spec.d;
    let rho2 = b * b + p.z * p.z;
    Vec3::new(0.0, -p.z, b) / rho2
}

fn check_point(p: &Vec3) -> Result<()> {
    if p.z > 0.0 && p.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::validation("point", "must lie above the wire plane (z > 0)"))
    }
}

/// Rejects points within the exclusion radius of a lattice wire. The
/// conductor index follows the ordering of [`perturbation_layout`] with
/// `n_max` pairs.
fn check_clearance(p: &Vec3, spec: &PerturbationSpec) -> Result<()> {
    let nearest = |c: f64, offset: usize| {
        let k = (c / spec.d).round();
        let dist = ((c - k * spec.d).powi(2) + p.z * p.z).sqrt();
        let n = k.abs() as usize;
        (n >= 1 && n <= spec.n_max && dist < EXCLUSION_RADIUS).then(|| Error::Singularity {
            conductor: Conductor::Infinite(offset + 2 * (n - 1) + usize::from(k < 0.0)),
            distance: dist,
        })
    };
    match nearest(p.x, 0).or_else(|| nearest(p.y, 2 * spec.n_max)) {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

struct FamilySum {
    acc: CompensatedSum<3>,
    last: f64,
    pairs: usize,
    done: bool,
}

impl FamilySum {
    fn new() -> Self {
        FamilySum {
            acc: CompensatedSum::new(),
            last: f64::INFINITY,
            pairs: 0,
            done: false,
        }
    }

    fn push(&mut self, plus: Vec3, minus: Vec3, scale: f64, tol: f64) {
        self.acc.add_slice(plus.as_slice());
        self.acc.add_slice(minus.as_slice());
        self.last = ((plus + minus) * scale).norm();
        self.pairs += 1;
        self.done = self.last < tol;
    }

    fn value(&self) -> Vec3 {
        Vec3::from(self.acc.value())
    }
}

/// Perturbation field at `point`, summed until the last pair of each family
/// contributes less than `spec.tol`.
pub fn perturbation_field(point: &Vec3, spec: &PerturbationSpec) -> Result<PerturbationResult> {
    spec.validate()?;
    check_point(point)?;
    check_clearance(point, spec)?;
    let k_pref = MU0_OVER_2PI * spec.current;
    if spec.current == 0.0 {
        return Ok(PerturbationResult {
            field: Vec3::zeros(),
            achieved_tol: 0.0,
            terms_used: 0,
            n_pairs: 0,
            m_pairs: 0,
        });
    }
    let mut xs = FamilySum::new();
    let mut ys = FamilySum::new();
    for k in 1..=spec.n_max as i64 {
        if !xs.done {
            xs.push(n_term(point, spec, k), n_term(point, spec, -k), k_pref, spec.tol);
        }
        if !ys.done {
            ys.push(m_term(point, spec, k), m_term(point, spec, -k), k_pref, spec.tol);
        }
        if xs.done && ys.done {
            break;
        }
    }
    let field = (xs.value() + ys.value()) * k_pref;
    let last = xs.last.max(ys.last);
    if !(xs.done && ys.done) {
        return Err(Error::Truncation {
            partial_sum: [field.x, field.y, field.z],
            last_term: last,
            terms: spec.n_max,
        });
    }
    Ok(PerturbationResult {
        field,
        achieved_tol: last,
        terms_used: xs.pairs.max(ys.pairs),
        n_pairs: xs.pairs,
        m_pairs: ys.pairs,
    })
}

/// Partial sum over exactly `pairs` symmetric pairs per family.
pub fn perturbation_partial(point: &Vec3, spec: &PerturbationSpec, pairs: usize) -> Result<Vec3> {
    spec.validate()?;
    check_point(point)?;
    let mut acc = CompensatedSum::<3>::new();
    for k in 1..=pairs as i64 {
        acc.add_slice(n_term(point, spec, k).as_slice());
        acc.add_slice(n_term(point, spec, -k).as_slice());
        acc.add_slice(m_term(point, spec, k).as_slice());
        acc.add_slice(m_term(point, spec, -k).as_slice());
    }
    Ok(Vec3::from(acc.value()) * (MU0_OVER_2PI * spec.current))
}

/// Partial sums of the n-family alone (the series over wires at `x = n·d`).
pub fn n_family_partial(point: &Vec3, spec: &PerturbationSpec, pairs: usize) -> Result<Vec3> {
    spec.validate()?;
    check_point(point)?;
    let mut acc = CompensatedSum::<3>::new();
    for k in 1..=pairs as i64 {
        acc.add_slice(n_term(point, spec, k).as_slice());
        acc.add_slice(n_term(point, spec, -k).as_slice());
    }
    Ok(Vec3::from(acc.value()) * (MU0_OVER_2PI * spec.current))
}

/// The lattice wires `1 ≤ |n|, |m| ≤ pairs` as explicit infinite wires.
pub fn perturbation_layout(spec: &PerturbationSpec, pairs: usize) -> Result<WireLayout> {
    spec.validate()?;
    let mut wires = Vec::with_capacity(4 * pairs);
    for k in 1..=pairs as i64 {
        for n in [k, -k] {
            wires.push(InfiniteWire::new(
                Vec3::new(n as f64 * spec.d, 0.0, 0.0),
                Vec3::y(),
                spec.n_sign(n) * spec.current,
            )?);
        }
    }
    for k in 1..=pairs as i64 {
        for m in [k, -k] {
            wires.push(InfiniteWire::new(Vec3::new(0.0, m as f64 * spec.d, 0.0), Vec3::x(), spec.current)?);
        }
    }
    Ok(WireLayout {
        infinite_wires: wires,
        ..Default::default()
    })
}

/// The two wires of the cell itself (`n = 0` and `m = 0`).
pub fn cell_layout(spec: &PerturbationSpec) -> Result<WireLayout> {
    spec.validate()?;
    Ok(WireLayout {
        infinite_wires: vec![
            InfiniteWire::new(Vec3::zeros(), Vec3::y(), spec.current)?,
            InfiniteWire::new(Vec3::zeros(), Vec3::x(), spec.current)?,
        ],
        ..Default::default()
    })
}

/// |B_p| / |B_cell| at height `r_m` above the cell centre.
pub fn perturbation_ratio(spec: &PerturbationSpec, r_m: f64) -> Result<f64> {
    if !(r_m > 0.0) || !r_m.is_finite() {
        return Err(Error::Domain { name: "r_m", value: r_m });
    }
    let p = Vec3::new(0.0, 0.0, r_m);
    let bp = perturbation_field(&p, spec)?.field;
    let bc = field_total(&p, &cell_layout(spec)?)?;
    Ok(bp.norm() / bc.norm())
}
