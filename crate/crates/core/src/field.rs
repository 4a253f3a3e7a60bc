//! Closed-form Biot–Savart fields of straight filaments, their spatial
//! Jacobians, and superposition over layouts.

use nalgebra::Matrix3;

use crate::error::{Conductor, Error, Result};
use crate::geometry::{InfiniteWire, Vec3, WireLayout, WireSegment};
use crate::units::{MU0_OVER_2PI, MU0_OVER_4PI};

pub type Mat3 = Matrix3<f64>;

/// Points closer than this to any conductor are rejected.
pub const EXCLUSION_RADIUS: f64 = 10e-6;

/// Smallest finite-difference step used by [`jacobian_fd`].
pub const MIN_FD_STEP: f64 = 1e-6;

/// Field and Jacobian at one point. `j[(i, k)] = ∂B_i/∂x_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldProbe {
    pub position: Vec3,
    pub b: Vec3,
    pub j: Mat3,
}

impl FieldProbe {
    pub fn magnitude(&self) -> f64 {
        self.b.norm()
    }

    /// Gradient of |B|² with respect to position.
    pub fn grad_b2(&self) -> Vec3 {
        2.0 * self.j.transpose() * self.b
    }

    /// |tr J|, the divergence residual.
    pub fn divergence(&self) -> f64 {
        self.j.trace().abs()
    }

    /// Frobenius norm of J − Jᵀ, the curl residual.
    pub fn curl(&self) -> f64 {
        (self.j - self.j.transpose()).norm()
    }
}

/// Neumaier's compensated sum, applied componentwise.
#[derive(Debug, Clone, Copy)]
pub struct CompensatedSum<const N: usize> {
    sum: [f64; N],
    comp: [f64; N],
}

impl<const N: usize> Default for CompensatedSum<N> {
    fn default() -> Self {
        Self::new()
    }
}

impl<const N: usize> CompensatedSum<N> {
    pub fn new() -> Self {
        CompensatedSum {
            sum: [0.0; N],
            comp: [0.0; N],
        }
    }

    pub fn add_slice(&mut self, x: &[f64]) {
        for k in 0..N {
            let s = self.sum[k];
            let t = s + x[k];
            if s.abs() >= x[k].abs() {
                self.comp[k] += (s - t) + x[k];
            } else {
                self.comp[k] += (x[k] - t) + s;
            }
            self.sum[k] = t;
        }
    }

    pub fn value(&self) -> [f64; N] {
        let mut out = [0.0; N];
        for k in 0..N {
            out[k] = self.sum[k] + self.comp[k];
        }
        out
    }
}

fn cross_matrix(u: &Vec3) -> Mat3 {
    Mat3::new(0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0)
}

/// Shared geometry of a probe relative to a segment.
struct SegmentFrame {
    u: Vec3,
    len: f64,
    r1: Vec3,
    r2: Vec3,
    n1: f64,
    n2: f64,
    t1: f64,
    t2: f64,
    w: Vec3,
    rho2: f64,
}

impl SegmentFrame {
    fn new(p: &Vec3, seg: &WireSegment) -> Self {
        let l = seg.end - seg.start;
        let len = l.norm();
        let u = l / len;
        let r1 = p - seg.start;
        let r2 = p - seg.end;
        let t1 = u.dot(&r1);
        let t2 = u.dot(&r2);
        let w = u.cross(&r1);
        SegmentFrame {
            u,
            len,
            r1,
            r2,
            n1: r1.norm(),
            n2: r2.norm(),
            t1,
            t2,
            w,
            rho2: w.norm_squared(),
        }
    }

    /// Probe projects outside the segment (or onto an endpoint from outside).
    fn beyond_ends(&self) -> bool {
        self.t1 * self.t2 > 0.0
    }

    /// (t1/|r1| − t2/|r2|)/ρ², evaluated without cancellation.
    fn s_tilde(&self) -> f64 {
        if self.beyond_ends() {
            self.len * (self.t1 + self.t2) / self.denom()
        } else {
            (self.t1 / self.n1 - self.t2 / self.n2) / self.rho2
        }
    }

    fn denom(&self) -> f64 {
        self.n1 * self.n2 * (self.t1 * self.n2 + self.t2 * self.n1)
    }

    fn grad_s_tilde(&self) -> Vec3 {
        let (u, r1, r2) = (&self.u, &self.r1, &self.r2);
        let (n1, n2, t1, t2) = (self.n1, self.n2, self.t1, self.t2);
        if self.beyond_ends() {
            let d = self.denom();
            let grad_n1n2 = r1 * (n2 / n1) + r2 * (n1 / n2);
            let inner = t1 * n2 + t2 * n1;
            let grad_inner = u * (n1 + n2) + r2 * (t1 / n2) + r1 * (t2 / n1);
            let grad_d = grad_n1n2 * inner + grad_inner * (n1 * n2);
            self.len * (u * (2.0 / d) - grad_d * ((t1 + t2) / (d * d)))
        } else {
            let s = t1 / n1 - t2 / n2;
            let grad_s = u / n1 - r1 * (t1 / (n1 * n1 * n1)) - u / n2 + r2 * (t2 / (n2 * n2 * n2));
            let r_perp = r1 - u * t1;
            grad_s / self.rho2 - r_perp * (2.0 * s / (self.rho2 * self.rho2))
        }
    }
}

fn check_segment(p: &Vec3, seg: &WireSegment, index: usize) -> Result<f64> {
    let d = seg.distance_to(p);
    if d < EXCLUSION_RADIUS {
        Err(Error::Singularity {
            conductor: Conductor::Segment(index),
            distance: d,
        })
    } else {
        Ok(d)
    }
}

fn check_infinite(p: &Vec3, wire: &InfiniteWire, index: usize) -> Result<f64> {
    let d = wire.distance_to(p);
    if d < EXCLUSION_RADIUS {
        Err(Error::Singularity {
            conductor: Conductor::Infinite(index),
            distance: d,
        })
    } else {
        Ok(d)
    }
}

fn segment_field_unchecked(p: &Vec3, seg: &WireSegment) -> Vec3 {
    if seg.current == 0.0 {
        return Vec3::zeros();
    }
    let f = SegmentFrame::new(p, seg);
    if f.rho2 == 0.0 {
        return Vec3::zeros();
    }
    f.w * (MU0_OVER_4PI * seg.current * f.s_tilde())
}

fn segment_jacobian_unchecked(p: &Vec3, seg: &WireSegment) -> Mat3 {
    if seg.current == 0.0 {
        return Mat3::zeros();
    }
    let f = SegmentFrame::new(p, seg);
    let j = cross_matrix(&f.u) * f.s_tilde() + f.w * f.grad_s_tilde().transpose();
    j * (MU0_OVER_4PI * seg.current)
}

fn infinite_field_unchecked(p: &Vec3, wire: &InfiniteWire) -> Vec3 {
    let r = p - wire.point;
    let w = wire.direction.cross(&r);
    w * (MU0_OVER_2PI * wire.current / w.norm_squared())
}

fn infinite_jacobian_unchecked(p: &Vec3, wire: &InfiniteWire) -> Mat3 {
    let u = &wire.direction;
    let r = p - wire.point;
    let r_perp = r - u * u.dot(&r);
    let rho2 = r_perp.norm_squared();
    let w = u.cross(&r);
    let j = cross_matrix(u) / rho2 - w * (r_perp * (2.0 / (rho2 * rho2))).transpose();
    j * (MU0_OVER_2PI * wire.current)
}

/// Field of one finite segment.
pub fn field_segment(point: &Vec3, seg: &WireSegment) -> Result<Vec3> {
    check_segment(point, seg, 0)?;
    Ok(segment_field_unchecked(point, seg))
}

/// Field of one infinite wire, μ₀I/(2πr) along `direction × r̂`.
pub fn field_infinite(point: &Vec3, wire: &InfiniteWire) -> Result<Vec3> {
    check_infinite(point, wire, 0)?;
    Ok(infinite_field_unchecked(point, wire))
}

/// Distance from `point` to the nearest conductor, with that conductor.
pub fn nearest_conductor(point: &Vec3, layout: &WireLayout) -> Option<(Conductor, f64)> {
    let segs = layout
        .segments
        .iter()
        .enumerate()
        .map(|(i, s)| (Conductor::Segment(i), s.distance_to(point)));
    let wires = layout
        .infinite_wires
        .iter()
        .enumerate()
        .map(|(i, w)| (Conductor::Infinite(i), w.distance_to(point)));
    segs.chain(wires).fold(None, |best, (c, d)| match best {
        Some((_, bd)) if bd <= d => best,
        _ => Some((c, d)),
    })
}

/// Rejects points within `radius` of any conductor, naming the nearest one.
pub fn check_point(point: &Vec3, layout: &WireLayout, radius: f64) -> Result<Option<f64>> {
    match nearest_conductor(point, layout) {
        Some((conductor, distance)) if distance < radius => Err(Error::Singularity { conductor, distance }),
        Some((_, d)) => Ok(Some(d)),
        None => Ok(None),
    }
}

/// Superposed field of every conductor plus the bias.
///
/// Contributions are accumulated with compensated summation in list order
/// (segments, then infinite wires), so the result is independent of how
/// callers schedule evaluations.
pub fn field_total(point: &Vec3, layout: &WireLayout) -> Result<Vec3> {
    check_point(point, layout, EXCLUSION_RADIUS)?;
    Ok(field_total_unchecked(point, layout))
}

fn field_total_unchecked(point: &Vec3, layout: &WireLayout) -> Vec3 {
    let mut acc = CompensatedSum::<3>::new();
    for s in &layout.segments {
        acc.add_slice(segment_field_unchecked(point, s).as_slice());
    }
    for w in &layout.infinite_wires {
        acc.add_slice(infinite_field_unchecked(point, w).as_slice());
    }
    acc.add_slice(layout.bias.as_slice());
    Vec3::from(acc.value())
}

/// Analytic Jacobian of the total field.
///
/// Points must lie at least two exclusion radii from every conductor.
pub fn jacobian(point: &Vec3, layout: &WireLayout) -> Result<Mat3> {
    check_point(point, layout, 2.0 * EXCLUSION_RADIUS)?;
    Ok(jacobian_unchecked(point, layout))
}

fn jacobian_unchecked(point: &Vec3, layout: &WireLayout) -> Mat3 {
    let mut acc = CompensatedSum::<9>::new();
    for s in &layout.segments {
        acc.add_slice(segment_jacobian_unchecked(point, s).as_slice());
    }
    for w in &layout.infinite_wires {
        acc.add_slice(infinite_jacobian_unchecked(point, w).as_slice());
    }
    Mat3::from_column_slice(&acc.value())
}

/// Field and analytic Jacobian in one call.
pub fn probe(point: &Vec3, layout: &WireLayout) -> Result<FieldProbe> {
    check_point(point, layout, 2.0 * EXCLUSION_RADIUS)?;
    Ok(FieldProbe {
        position: *point,
        b: field_total_unchecked(point, layout),
        j: jacobian_unchecked(point, layout),
    })
}

/// Default central-difference step at `point`: max(1 µm, distance/100).
pub fn default_fd_step(point: &Vec3, layout: &WireLayout) -> f64 {
    match nearest_conductor(point, layout) {
        Some((_, d)) => MIN_FD_STEP.max(d / 100.0),
        None => MIN_FD_STEP,
    }
}

/// Jacobian by central differences of [`field_total`] with the default step.
pub fn jacobian_fd(point: &Vec3, layout: &WireLayout) -> Result<Mat3> {
    jacobian_fd_with_step(point, layout, default_fd_step(point, layout))
}

/// Jacobian by central differences with an explicit step `h`.
pub fn jacobian_fd_with_step(point: &Vec3, layout: &WireLayout, h: f64) -> Result<Mat3> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain {
            name: "difference step",
            value: h,
        });
    }
    if let Some(d) = check_point(point, layout, 2.0 * EXCLUSION_RADIUS)? {
        if h > d / 4.0 {
            return Err(Error::StepCollision { step: h, distance: d });
        }
    }
    let mut j = Mat3::zeros();
    for k in 0..3 {
        let mut dp = Vec3::zeros();
        dp[k] = h;
        let plus = field_total(&(point + dp), layout)?;
        let minus = field_total(&(point - dp), layout)?;
        j.set_column(k, &((plus - minus) / (2.0 * h)));
    }
    Ok(j)
}

/// A sampling line `origin + s·direction` for `s` in `[s_min, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub origin: Vec3,
    pub direction: Vec3,
    pub s_min: f64,
    pub s_max: f64,
}

impl Line {
    /// Evenly spaced parameters, endpoints included.
    pub fn parameters(&self, samples: usize) -> Vec<f64> {
        match samples {
            0 => Vec::new(),
            1 => vec![0.5 * (self.s_min + self.s_max)],
            n => (0..n)
                .map(|i| self.s_min + (self.s_max - self.s_min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    /// Unit direction, or a validation error for a zero vector.
    pub fn unit_direction(&self) -> Result<Vec3> {
        let n = self.direction.norm();
        if n > 0.0 && n.is_finite() {
            Ok(self.direction / n)
        } else {
            Err(Error::validation("line direction", "must be a nonzero finite vector"))
        }
    }
}

/// |B| sampled along a line; `s` is arc length from the origin.
pub fn magnitude_profile(layout: &WireLayout, line: &Line, samples: usize) -> Result<Vec<(f64, f64)>> {
    let dir = line.unit_direction()?;
    line.parameters(samples)
        .into_iter()
        .enumerate()
        .map(|(index, s)| {
            field_total(&(line.origin + dir * s), layout)
                .map(|b| (s, b.norm()))
                .map_err(|e| Error::Sample {
                    index,
                    source: Box::new(e),
                })
        })
        .collect()
}
