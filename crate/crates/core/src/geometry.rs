//! Wire layouts and the builders for the three lattice configurations.
//!
//! Coordinates: the surface is the plane `z = 0`. The upper wire layer holds
//! the y-running wires and sits at `z = 0`; the lower layer holds the
//! x-running wires at `z = -layer_gap`. Traps are looked for at `z > 0`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// A straight finite filament carrying `current` from `start` to `end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WireSegment {
    pub start: Vec3,
    pub end: Vec3,
    pub current: f64,
}

impl WireSegment {
    pub fn new(start: Vec3, end: Vec3, current: f64) -> Result<Self> {
        let seg = WireSegment {
            start,
            end,
            current,
        };
        seg.validate()?;
        Ok(seg)
    }

    pub fn validate(&self) -> Result<()> {
        if !finite3(&self.start) || !finite3(&self.end) {
            return Err(Error::validation("segment endpoints", "must be finite"));
        }
        if self.start == self.end {
            return Err(Error::validation("segment", "start and end coincide"));
        }
        if !self.current.is_finite() {
            return Err(Error::validation("segment current", "must be finite"));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    /// Same physical current path described from the other end.
    pub fn reversed(&self) -> Self {
        WireSegment {
            start: self.end,
            end: self.start,
            current: -self.current,
        }
    }

    /// Distance from `p` to the closest point of the segment (endpoints included).
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let l = self.end - self.start;
        let t = ((p - self.start).dot(&l) / l.norm_squared()).clamp(0.0, 1.0);
        (p - (self.start + l * t)).norm()
    }
}

/// An infinitely long straight filament.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfiniteWire {
    pub point: Vec3,
    pub direction: Vec3,
    pub current: f64,
}

impl InfiniteWire {
    /// `direction` is normalized here; a zero direction is rejected.
    pub fn new(point: Vec3, direction: Vec3, current: f64) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::validation("wire direction", "must be a nonzero finite vector"));
        }
        let wire = InfiniteWire {
            point,
            direction: direction / n,
            current,
        };
        wire.validate()?;
        Ok(wire)
    }

    pub fn validate(&self) -> Result<()> {
        if !finite3(&self.point) {
            return Err(Error::validation("wire point", "must be finite"));
        }
        if (self.direction.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::validation("wire direction", "must be a unit vector"));
        }
        if !self.current.is_finite() {
            return Err(Error::validation("wire current", "must be finite"));
        }
        Ok(())
    }

    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let r = p - self.point;
        (r - self.direction * r.dot(&self.direction)).norm()
    }
}

/// A superposable set of conductors plus a uniform bias field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WireLayout {
    pub segments: Vec<WireSegment>,
    pub infinite_wires: Vec<InfiniteWire>,
    pub bias: Vec3,
}

impl WireLayout {
    pub fn bias_only(bias: Vec3) -> Self {
        WireLayout {
            bias,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.segments.iter().enumerate() {
            s.validate().map_err(|e| prefix(e, &format!("segments[{i}]")))?;
        }
        for (i, w) in self.infinite_wires.iter().enumerate() {
            w.validate().map_err(|e| prefix(e, &format!("infinite_wires[{i}]")))?;
        }
        if !finite3(&self.bias) {
            return Err(Error::validation("bias", "must be finite"));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty() && self.infinite_wires.is_empty()
    }

    /// Multiplies every current (not the bias) by `factor`.
    pub fn scale_currents(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for s in &mut out.segments {
            s.current *= factor;
        }
        for w in &mut out.infinite_wires {
            w.current *= factor;
        }
        out
    }

    /// Total current-carrying conductor count.
    pub fn conductor_count(&self) -> usize {
        self.segments.len() + self.infinite_wires.len()
    }
}

fn prefix(e: Error, at: &str) -> Error {
    match e {
        Error::Validation { field, reason } => Error::Validation {
            field: format!("{at}.{field}"),
            reason,
        },
        other => other,
    }
}

fn finite3(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Lattice configuration, named by the current pattern in the two layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatticeConfig {
    /// Unidirectional currents in both layers.
    A,
    /// Unidirectional y-running layer, alternating x-running layer.
    B,
    /// Alternating currents in both layers.
    C,
}

impl LatticeConfig {
    /// Sign of the current in the `index`-th x-running wire.
    pub fn x_sign(self, index: usize) -> f64 {
        match self {
            LatticeConfig::A => 1.0,
            LatticeConfig::B | LatticeConfig::C => alternating(index),
        }
    }

    /// Sign of the current in the `index`-th y-running wire.
    ///
    /// In C the y-running layer starts negative, so the wires around each
    /// plaquette close into current loops of alternating sense.
    pub fn y_sign(self, index: usize) -> f64 {
        match self {
            LatticeConfig::A | LatticeConfig::B => 1.0,
            LatticeConfig::C => -alternating(index),
        }
    }
}

impl std::str::FromStr for LatticeConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(LatticeConfig::A),
            "B" | "b" => Ok(LatticeConfig::B),
            "C" | "c" => Ok(LatticeConfig::C),
            other => Err(Error::validation("config", format!("unknown configuration `{other}`"))),
        }
    }
}

fn alternating(index: usize) -> f64 {
    if index.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Declarative description of a two-layer wire grid.
///
/// `pitch_x` is the spacing between neighbouring x-running wires (measured
/// along y) and `pitch_y` the spacing between y-running wires (along x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub config: LatticeConfig,
    pub pitch_x: f64,
    pub pitch_y: f64,
    pub n_x: usize,
    pub n_y: usize,
    pub layer_gap: f64,
    pub current: f64,
    pub bias: Vec3,
    pub wire_length: f64,
}

impl LatticeSpec {
    /// Spec with the default wire length of 100 times the larger pitch.
    pub fn new(
        config: LatticeConfig,
        pitch_x: f64,
        pitch_y: f64,
        n_x: usize,
        n_y: usize,
        layer_gap: f64,
        current: f64,
        bias: Vec3,
    ) -> Self {
        LatticeSpec {
            config,
            pitch_x,
            pitch_y,
            n_x,
            n_y,
            layer_gap,
            current,
            bias,
            wire_length: default_wire_length(pitch_x, pitch_y),
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("pitch_x", self.pitch_x)?;
        positive("pitch_y", self.pitch_y)?;
        positive("layer_gap", self.layer_gap)?;
        positive("wire_length", self.wire_length)?;
        if self.n_x < 1 {
            return Err(Error::validation("n_x", "need at least one wire"));
        }
        if self.n_y < 1 {
            return Err(Error::validation("n_y", "need at least one wire"));
        }
        if !self.current.is_finite() {
            return Err(Error::validation("current", "must be finite"));
        }
        if !finite3(&self.bias) {
            return Err(Error::validation("bias", "must be finite"));
        }
        Ok(())
    }
}

pub fn default_wire_length(pitch_x: f64, pitch_y: f64) -> f64 {
    100.0 * pitch_x.max(pitch_y)
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be positive, got {v}")))
    }
}

/// Offsets of `n` wires spaced by `pitch`, centred on zero.
fn centred_offsets(n: usize, pitch: f64) -> impl Iterator<Item = (usize, f64)> {
    let mid = (n as f64 - 1.0) / 2.0;
    (0..n).map(move |i| (i, (i as f64 - mid) * pitch))
}

fn x_running(y: f64, z: f64, half: f64, current: f64) -> WireSegment {
    WireSegment {
        start: Vec3::new(-half, y, z),
        end: Vec3::new(half, y, z),
        current,
    }
}

fn y_running(x: f64, z: f64, half: f64, current: f64) -> WireSegment {
    WireSegment {
        start: Vec3::new(x, -half, z),
        end: Vec3::new(x, half, z),
        current,
    }
}

/// Explicit segments of a finite two-layer grid.
///
/// The x-running wires come first (lower layer), then the y-running wires
/// (upper layer), each group ordered by increasing coordinate.
pub fn build_lattice(spec: &LatticeSpec) -> Result<WireLayout> {
    spec.validate()?;
    let half = spec.wire_length / 2.0;
    let z_lower = -spec.layer_gap;
    let mut segments = Vec::with_capacity(spec.n_x + spec.n_y);
    for (i, y) in centred_offsets(spec.n_x, spec.pitch_x) {
        segments.push(x_running(y, z_lower, half, spec.config.x_sign(i) * spec.current));
    }
    for (i, x) in centred_offsets(spec.n_y, spec.pitch_y) {
        segments.push(y_running(x, 0.0, half, spec.config.y_sign(i) * spec.current));
    }
    Ok(WireLayout {
        segments,
        infinite_wires: Vec::new(),
        bias: spec.bias,
    })
}

/// Number of pitches a unit-cell segment extends past the outermost crossing.
pub const CELL_OVERHANG: f64 = 1.5;

/// The minimal crossed-segment motif of each configuration.
///
/// * A: central y-running bar at `x = 0` and two enclosing x-running bars at
///   `y = ±pitch_x/2`, all currents positive (the "H" cell).
/// * B: central y-running bar and three x-running bars at `y = -pitch_x, 0,
///   +pitch_x` carrying `+, -, +`.
/// * C: four x-running and four y-running wires with alternating currents,
///   i.e. two concentric current squares of opposite sense.
///
/// Every segment extends [`CELL_OVERHANG`] pitches beyond the outermost
/// crossing wire.
pub fn build_unit_cell(
    config: LatticeConfig,
    pitch_x: f64,
    pitch_y: f64,
    layer_gap: f64,
    current: f64,
    bias: Vec3,
) -> Result<WireLayout> {
    positive("pitch_x", pitch_x)?;
    positive("pitch_y", pitch_y)?;
    positive("layer_gap", layer_gap)?;
    if !current.is_finite() {
        return Err(Error::validation("current", "must be finite"));
    }
    if !finite3(&bias) {
        return Err(Error::validation("bias", "must be finite"));
    }
    let (n_x, n_y) = match config {
        LatticeConfig::A => (2, 1),
        LatticeConfig::B => (3, 1),
        LatticeConfig::C => (4, 4),
    };
    // Half-extent of the crossing region in each direction, plus overhang.
    let x_span = (n_y as f64 - 1.0) / 2.0 * pitch_y + CELL_OVERHANG * pitch_y;
    let y_span = (n_x as f64 - 1.0) / 2.0 * pitch_x + CELL_OVERHANG * pitch_x;
    let z_lower = -layer_gap;
    let mut segments = Vec::with_capacity(n_x + n_y);
    for (i, y) in centred_offsets(n_x, pitch_x) {
        segments.push(x_running(y, z_lower, x_span, config.x_sign(i) * current));
    }
    for (i, x) in centred_offsets(n_y, pitch_y) {
        segments.push(y_running(x, 0.0, y_span, config.y_sign(i) * current));
    }
    Ok(WireLayout {
        segments,
        infinite_wires: Vec::new(),
        bias,
    })
}

/// An axis-aligned mirror plane `coordinate[axis] = offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub axis: Axis,
    pub offset: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl Plane {
    pub fn x(offset: f64) -> Self {
        Plane {
            axis: Axis::X,
            offset,
        }
    }

    pub fn y(offset: f64) -> Self {
        Plane {
            axis: Axis::Y,
            offset,
        }
    }

    pub fn z(offset: f64) -> Self {
        Plane {
            axis: Axis::Z,
            offset,
        }
    }

    pub fn reflect_point(&self, p: &Vec3) -> Vec3 {
        let mut q = *p;
        let k = self.axis.index();
        q[k] = 2.0 * self.offset - p[k];
        q
    }

    /// Reflects a free (polar) vector such as a direction.
    pub fn reflect_vector(&self, v: &Vec3) -> Vec3 {
        let mut w = *v;
        w[self.axis.index()] = -v[self.axis.index()];
        w
    }

    /// Reflects an axial vector such as B: the component normal to the
    /// plane is kept and the in-plane components change sign.
    pub fn reflect_axial(&self, v: &Vec3) -> Vec3 {
        -self.reflect_vector(v)
    }
}

/// Mirror image of a layout.
///
/// Segment endpoints are reflected and keep their current, which reflects the
/// current density as a polar vector; the field of the result is then the
/// axial-vector mirror image of the original field. The bias, being a field,
/// is reflected as an axial vector.
pub fn mirror_layout(layout: &WireLayout, plane: Plane) -> WireLayout {
    WireLayout {
        segments: layout
            .segments
            .iter()
            .map(|s| WireSegment {
                start: plane.reflect_point(&s.start),
                end: plane.reflect_point(&s.end),
                current: s.current,
            })
            .collect(),
        infinite_wires: layout
            .infinite_wires
            .iter()
            .map(|w| InfiniteWire {
                point: plane.reflect_point(&w.point),
                direction: plane.reflect_vector(&w.direction),
                current: w.current,
            })
            .collect(),
        bias: plane.reflect_axial(&layout.bias),
    }
}

/// Canonical form of a segment as a field source: endpoints ordered
/// lexicographically, current sign adjusted to match.
pub fn canonical_segment(s: &WireSegment) -> WireSegment {
    let key = |v: &Vec3| (v.x, v.y, v.z);
    if key(&s.start).partial_cmp(&key(&s.end)) == Some(std::cmp::Ordering::Greater) {
        s.reversed()
    } else {
        *s
    }
}

/// True when both layouts describe the same field source: identical
/// canonical segment multisets (up to `tol` on coordinates and currents),
/// identical infinite wires and bias.
pub fn same_source(a: &WireLayout, b: &WireLayout, tol: f64) -> bool {
    if a.segments.len() != b.segments.len() || a.infinite_wires.len() != b.infinite_wires.len() {
        return false;
    }
    if (a.bias - b.bias).amax() > tol {
        return false;
    }
    let close = |s: &WireSegment, t: &WireSegment| {
        (s.start - t.start).amax() <= tol
            && (s.end - t.end).amax() <= tol
            && (s.current - t.current).abs() <= tol
    };
    let mut unused: Vec<WireSegment> = b.segments.iter().map(canonical_segment).collect();
    for s in a.segments.iter().map(canonical_segment) {
        match unused.iter().position(|t| close(&s, t)) {
            Some(k) => {
                unused.swap_remove(k);
            }
            None => return false,
        }
    }
    let mut unused_w: Vec<InfiniteWire> = b.infinite_wires.clone();
    for w in &a.infinite_wires {
        let hit = unused_w.iter().position(|v| {
            let cross = w.direction.cross(&v.direction).amax();
            let same_line = v.distance_to(&w.point) <= tol;
            let flow = w.current * w.direction - v.current * v.direction;
            cross <= tol && same_line && flow.amax() <= tol
        });
        match hit {
            Some(k) => {
                unused_w.swap_remove(k);
            }
            None => return false,
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signs(layout: &WireLayout, range: std::ops::Range<usize>) -> Vec<f64> {
        layout.segments[range].iter().map(|s| s.current.signum()).collect()
    }

    #[test]
    fn config_a_lattice_all_positive() {
        let spec = LatticeSpec::new(LatticeConfig::A, 1.27e-3, 1.27e-3, 3, 3, 1.27e-3, 4.0, Vec3::zeros());
        let lay = build_lattice(&spec).unwrap();
        assert_eq!(lay.segments.len(), 6);
        assert!(lay.segments.iter().all(|s| s.current == 4.0));
        for s in &lay.segments {
            assert!((s.length() - spec.wire_length).abs() < 1e-12);
        }
    }

    #[test]
    fn config_c_alternates_both_layers() {
        let spec = LatticeSpec::new(LatticeConfig::C, 1e-3, 1e-3, 3, 3, 1e-3, 2.0, Vec3::zeros());
        let lay = build_lattice(&spec).unwrap();
        assert_eq!(signs(&lay, 0..3), vec![1.0, -1.0, 1.0]);
        assert_eq!(signs(&lay, 3..6), vec![-1.0, 1.0, -1.0]);
    }

    #[test]
    fn config_b_alternates_x_layer_only() {
        let spec = LatticeSpec::new(LatticeConfig::B, 1e-3, 1e-3, 4, 2, 1e-3, 1.0, Vec3::zeros());
        let lay = build_lattice(&spec).unwrap();
        assert_eq!(signs(&lay, 0..4), vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(signs(&lay, 4..6), vec![1.0, 1.0]);
    }

    #[test]
    fn layer_placement() {
        let spec = LatticeSpec::new(LatticeConfig::B, 2e-3, 3e-3, 2, 3, 0.5e-3, 1.0, Vec3::zeros());
        let lay = build_lattice(&spec).unwrap();
        for s in &lay.segments[..2] {
            assert_eq!(s.start.z, -0.5e-3);
            assert_eq!(s.start.y, s.end.y);
        }
        for s in &lay.segments[2..] {
            assert_eq!(s.start.z, 0.0);
            assert_eq!(s.start.x, s.end.x);
        }
        assert_eq!(lay.segments[0].start.y, -1e-3);
        assert_eq!(lay.segments[2].start.x, -3e-3);
    }

    #[test]
    fn lattice_current_sums_per_layer() {
        for n in 1..7usize {
            for config in [LatticeConfig::A, LatticeConfig::B, LatticeConfig::C] {
                let spec = LatticeSpec::new(config, 1e-3, 1e-3, n, n, 1e-3, 3.0, Vec3::zeros());
                let lay = build_lattice(&spec).unwrap();
                let sx: f64 = lay.segments[..n].iter().map(|s| s.current).sum();
                let sy: f64 = lay.segments[n..].iter().map(|s| s.current).sum();
                let parity = if n % 2 == 1 { 3.0 } else { 0.0 };
                match config {
                    LatticeConfig::A => {
                        assert_eq!(sx, 3.0 * n as f64);
                        assert_eq!(sy, 3.0 * n as f64);
                    }
                    LatticeConfig::B => {
                        assert_eq!(sx, parity);
                        assert_eq!(sy, 3.0 * n as f64);
                    }
                    LatticeConfig::C => {
                        assert_eq!(sx, parity);
                        assert_eq!(sy, -parity);
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_spec_names_field() {
        let mut spec = LatticeSpec::new(LatticeConfig::A, 1e-3, 1e-3, 3, 3, 1e-3, 1.0, Vec3::zeros());
        spec.layer_gap = -1.0;
        match build_lattice(&spec) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "layer_gap"),
            other => panic!("unexpected {other:?}"),
        }
        spec.layer_gap = 1e-3;
        spec.n_y = 0;
        match build_lattice(&spec) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "n_y"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unit_cell_segment_counts() {
        let b = Vec3::zeros();
        let a = build_unit_cell(LatticeConfig::A, 5e-3, 5e-3, 1e-3, 4.0, b).unwrap();
        assert_eq!(a.segments.len(), 3);
        assert!(a.segments.iter().all(|s| s.current == 4.0));
        let bb = build_unit_cell(LatticeConfig::B, 5e-3, 5e-3, 1e-3, 4.0, b).unwrap();
        assert_eq!(bb.segments.len(), 4);
        let c = build_unit_cell(LatticeConfig::C, 5e-3, 5e-3, 1e-3, 4.0, b).unwrap();
        assert_eq!(c.segments.len(), 8);
        assert!(build_unit_cell(LatticeConfig::C, 0.0, 5e-3, 1e-3, 4.0, b).is_err());
    }

    #[test]
    fn one_by_one_lattice_shares_central_bar_with_cell() {
        let spec = LatticeSpec {
            wire_length: 2.0 * 2.0 * 1e-3,
            ..LatticeSpec::new(LatticeConfig::A, 1e-3, 1e-3, 1, 1, 0.5e-3, 2.0, Vec3::zeros())
        };
        let lat = build_lattice(&spec).unwrap();
        let cell = build_unit_cell(LatticeConfig::A, 1e-3, 1e-3, 0.5e-3, 2.0, Vec3::zeros()).unwrap();
        assert_eq!(lat.segments.len(), 2);
        assert_eq!(cell.segments.len(), 3);
        // The y-running central bar is the last segment of both.
        assert_eq!(lat.segments[1], cell.segments[2]);
    }

    #[test]
    fn mirror_is_involution() {
        let cell = build_unit_cell(LatticeConfig::B, 2e-3, 3e-3, 1e-3, 1.5, Vec3::new(1e-4, -2e-4, 3e-4)).unwrap();
        for plane in [Plane::x(0.3e-3), Plane::y(-1e-3), Plane::z(2e-3)] {
            let twice = mirror_layout(&mirror_layout(&cell, plane), plane);
            assert!(same_source(&twice, &cell, 1e-15));
        }
    }

    #[test]
    fn segment_in_plane_is_fixed() {
        let seg = WireSegment::new(Vec3::new(0.0, -1.0, 0.0), Vec3::new(0.0, 1.0, 2.0), 3.0).unwrap();
        let lay = WireLayout {
            segments: vec![seg],
            ..Default::default()
        };
        let m = mirror_layout(&lay, Plane::x(0.0));
        assert_eq!(m.segments[0], seg);
    }

    #[test]
    fn config_c_cell_mirrors_onto_reversed_self() {
        let cell = build_unit_cell(LatticeConfig::C, 2e-3, 2e-3, 0.5e-3, 1.0, Vec3::zeros()).unwrap();
        let reversed = WireLayout {
            segments: cell.segments.iter().map(|s| WireSegment { start: s.end, end: s.start, current: s.current }).collect(),
            ..cell.clone()
        };
        for plane in [Plane::x(0.0), Plane::y(0.0)] {
            let m = mirror_layout(&cell, plane);
            assert!(same_source(&m, &reversed, 1e-15));
        }
    }

    #[test]
    fn rejects_degenerate_segment() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert!(WireSegment::new(p, p, 1.0).is_err());
        assert!(WireSegment::new(p, p * 2.0, 0.0).is_ok());
        assert!(InfiniteWire::new(p, Vec3::zeros(), 1.0).is_err());
    }
}
