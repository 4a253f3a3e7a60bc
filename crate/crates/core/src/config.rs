//! TOML run configuration.
//!
//! The document is read in the unit system named by its top-level `units`
//! key and converted to SI here; nothing past this module sees gauss or
//! millimetres. See the README for the full grammar.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::field::Line;
use crate::geometry::{build_lattice, build_unit_cell, InfiniteWire, LatticeConfig, LatticeSpec, Vec3, WireLayout, WireSegment};
use crate::perturbation::{PerturbationConfig, PerturbationSpec, DEFAULT_N_MAX, DEFAULT_TOL};
use crate::scenarios::{scenario, ProfileAnchor, Scenario};
use crate::traps::{BeamConfig, Polarization, SearchRegion, DEFAULT_SEED_GRID};
use crate::units::Units;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    units: Units,
    layout: Option<RawLayout>,
    grid: Option<RawGrid>,
    profile: Option<RawProfile>,
    search: Option<RawSearch>,
    beams: Option<RawBeams>,
    perturbation: Option<RawPerturbation>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    scenario: Option<String>,
    bias: Option<[f64; 3]>,
    #[serde(default)]
    segment: Vec<RawSegment>,
    #[serde(default)]
    infinite: Vec<RawInfinite>,
    lattice: Option<RawLattice>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSegment {
    start: [f64; 3],
    end: [f64; 3],
    current: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInfinite {
    point: [f64; 3],
    direction: [f64; 3],
    current: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    config: String,
    pitch: Option<f64>,
    pitch_x: Option<f64>,
    pitch_y: Option<f64>,
    n_x: Option<usize>,
    n_y: Option<usize>,
    layer_gap: f64,
    current: f64,
    bias: Option<[f64; 3]>,
    wire_length: Option<f64>,
    #[serde(default)]
    unit_cell: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    min: [f64; 3],
    max: [f64; 3],
    n: [usize; 3],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    origin: [f64; 3],
    direction: [f64; 3],
    s_min: f64,
    s_max: f64,
    samples: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSearch {
    min: [f64; 3],
    max: [f64; 3],
    seed_grid: Option<[usize; 3]>,
    dedup_radius: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeams {
    parallel_axis: Option<[f64; 3]>,
    diagonal_plane_normal: Option<[f64; 3]>,
    parallel_polarization: Option<String>,
    diagonal_polarization: Option<String>,
    angular_tolerance_deg: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerturbation {
    config: String,
    d: f64,
    current: f64,
    point: Option<[f64; 3]>,
    r_m: Option<f64>,
    n_max: Option<usize>,
    tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    path: PathBuf,
}

/// Where the wires came from.
#[derive(Debug, Clone, PartialEq)]
pub enum LayoutSource {
    Inline,
    Lattice(LatticeSpec),
    UnitCell(LatticeConfig),
    Scenario(String),
}

/// Fieldmap resolution for scenario runs without a [grid] section.
pub const SCENARIO_GRID: [usize; 3] = [21, 21, 11];

/// A regular grid of sample points, inclusive of both bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub min: Vec3,
    pub max: Vec3,
    pub n: [usize; 3],
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for k in 0..3 {
            if self.n[k] == 0 {
                return Err(Error::validation("grid.n", "every axis needs at least one sample"));
            }
            if !(self.min[k].is_finite() && self.max[k].is_finite()) || self.min[k] > self.max[k] {
                return Err(Error::validation("grid", "bounds must be finite with min <= max"));
            }
        }
        Ok(())
    }

    /// Coordinate of sample `i` along axis `k`; a single sample sits at `min`.
    pub fn coord(&self, k: usize, i: usize) -> f64 {
        if self.n[k] == 1 {
            self.min[k]
        } else {
            self.min[k] + (self.max[k] - self.min[k]) * i as f64 / (self.n[k] - 1) as f64
        }
    }

    /// All points, z slowest, then y, then x fastest.
    pub fn points(&self) -> Vec<Vec3> {
        let [nx, ny, nz] = self.n;
        let mut out = Vec::with_capacity(nx * ny * nz);
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    out.push(Vec3::new(self.coord(0, ix), self.coord(1, iy), self.coord(2, iz)));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileConfig {
    pub line: Line,
    pub samples: usize,
}

/// A profile line, either fixed or anchored at the deepest trap once the
/// search has run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileRequest {
    Line(ProfileConfig),
    ThroughMinimum {
        direction: Vec3,
        half_span: f64,
        samples: usize,
    },
}

/// Where to evaluate the perturbation series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PerturbationPoint {
    Point(Vec3),
    /// Report the ratio to the cell field at `(0, 0, r_m)`.
    Height(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationRun {
    pub spec: PerturbationSpec,
    pub at: PerturbationPoint,
}

/// Fully validated run configuration, SI throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Unit system for reports.
    pub units: Units,
    pub source: LayoutSource,
    pub layout: WireLayout,
    pub grid: Option<GridSpec>,
    pub profile: Option<ProfileRequest>,
    pub region: Option<SearchRegion>,
    pub beams: BeamConfig,
    pub perturbation: Option<PerturbationRun>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    /// Configuration for a built-in scenario with its default region, beams
    /// and profile line.
    pub fn from_scenario(name: &str, units: Units) -> Result<Self> {
        let s = scenario(name)?;
        Ok(Self::with_scenario(s, units))
    }

    fn with_scenario(s: Scenario, units: Units) -> Self {
        let profile = match s.profile.anchor {
            ProfileAnchor::Point(p) => ProfileRequest::Line(ProfileConfig {
                line: Line {
                    origin: p,
                    direction: s.profile.direction,
                    s_min: -s.profile.half_span,
                    s_max: s.profile.half_span,
                },
                samples: s.profile.samples,
            }),
            ProfileAnchor::Minimum => ProfileRequest::ThroughMinimum {
                direction: s.profile.direction,
                half_span: s.profile.half_span,
                samples: s.profile.samples,
            },
        };
        RunConfig {
            units,
            source: LayoutSource::Scenario(s.name.to_string()),
            layout: s.layout,
            // The search box doubles as a default map region.
            grid: Some(GridSpec {
                min: s.region.min,
                max: s.region.max,
                n: SCENARIO_GRID,
            }),
            profile: Some(profile),
            region: Some(s.region),
            beams: s.beams,
            perturbation: None,
            output: None,
        }
    }

    pub fn scenario_name(&self) -> Option<&str> {
        match &self.source {
            LayoutSource::Scenario(n) => Some(n),
            _ => None,
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| parse_error(text, &e))?;
    convert(raw)
}

fn parse_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1));
    let line = line.map(|l| {
        // A span starting right after a newline belongs to the next line.
        match e.span() {
            Some(s) if s.start > 0 && text.as_bytes().get(s.start - 1) == Some(&b'\n') => l + 1,
            _ => l,
        }
    });
    let message = e.message().trim().to_string();
    let key = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .or_else(|| e.span().and_then(|s| key_at(text, s.start)));
    Error::Parse { line, key, message }
}

/// The key on the line containing byte offset `at`, if that line is a
/// `key = value` pair.
fn key_at(text: &str, at: usize) -> Option<String> {
    let start = text[..at.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next()?;
    let (k, _) = line.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then(|| k.to_string())
}

fn vec3(a: [f64; 3], scale: f64) -> Vec3 {
    Vec3::new(a[0], a[1], a[2]) * scale
}

/// Replaces the field name of a validation error with its config path.
fn rename(e: Error, field: &str) -> Error {
    match e {
        Error::Validation { reason, .. } => Error::validation(field, reason),
        other => other,
    }
}

fn polarization(field: &str, s: Option<String>, default: Polarization) -> Result<Polarization> {
    match s {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e| rename(e, field)),
    }
}

fn convert(raw: RawConfig) -> Result<RunConfig> {
    let u = raw.units;
    let (len, fld) = (u.length(), u.field());

    let layout_raw = raw.layout.ok_or_else(|| Error::validation("layout", "missing [layout] section"))?;
    let inline = !layout_raw.segment.is_empty() || !layout_raw.infinite.is_empty() || layout_raw.bias.is_some();
    let sources = [layout_raw.scenario.is_some(), inline, layout_raw.lattice.is_some()];
    match sources.iter().filter(|&&b| b).count() {
        0 => {
            return Err(Error::validation(
                "layout",
                "needs one source: `scenario`, inline `segment`/`infinite`/`bias`, or `lattice`",
            ))
        }
        1 => {}
        _ => {
            return Err(Error::validation(
                "layout",
                "exactly one source allowed: `scenario`, inline wires, or `lattice`",
            ))
        }
    }

    let mut cfg = if let Some(name) = layout_raw.scenario {
        let s = scenario(&name)?;
        RunConfig::with_scenario(s, u)
    } else {
        let (source, layout) = if let Some(l) = layout_raw.lattice {
            lattice_layout(l, len, fld)?
        } else {
            let segments = layout_raw
                .segment
                .iter()
                .map(|s| WireSegment {
                    start: vec3(s.start, len),
                    end: vec3(s.end, len),
                    current: s.current,
                })
                .collect();
            let infinite_wires = layout_raw
                .infinite
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    InfiniteWire::new(vec3(w.point, len), vec3(w.direction, 1.0), w.current)
                        .map_err(|e| rename(e, &format!("layout.infinite[{i}]")))
                })
                .collect::<Result<Vec<_>>>()?;
            let layout = WireLayout {
                segments,
                infinite_wires,
                bias: layout_raw.bias.map_or(Vec3::zeros(), |b| vec3(b, fld)),
            };
            (LayoutSource::Inline, layout)
        };
        RunConfig {
            units: u,
            source,
            layout,
            grid: None,
            profile: None,
            region: None,
            beams: BeamConfig::default(),
            perturbation: None,
            output: None,
        }
    };
    cfg.layout.validate()?;

    if let Some(g) = raw.grid {
        let grid = GridSpec {
            min: vec3(g.min, len),
            max: vec3(g.max, len),
            n: g.n,
        };
        grid.validate()?;
        cfg.grid = Some(grid);
    }

    if let Some(p) = raw.profile {
        let line = Line {
            origin: vec3(p.origin, len),
            direction: vec3(p.direction, 1.0),
            s_min: p.s_min * len,
            s_max: p.s_max * len,
        };
        line.unit_direction().map_err(|_| Error::validation("profile.direction", "must be a nonzero vector"))?;
        if !(line.s_min <= line.s_max) {
            return Err(Error::validation("profile.s_min", "must not exceed s_max"));
        }
        if p.samples == 0 {
            return Err(Error::validation("profile.samples", "must be at least 1"));
        }
        cfg.profile = Some(ProfileRequest::Line(ProfileConfig { line, samples: p.samples }));
    }

    if let Some(s) = raw.search {
        let min = vec3(s.min, len);
        let max = vec3(s.max, len);
        let dedup = match s.dedup_radius {
            Some(d) => d * len,
            None => (max - min).min() / 20.0,
        };
        let region = SearchRegion::new(min, max, dedup).with_seed_grid(s.seed_grid.unwrap_or(DEFAULT_SEED_GRID));
        region.validate()?;
        cfg.region = Some(region);
    }

    if let Some(b) = raw.beams {
        let d = cfg.beams;
        let unit = |name: &str, v: Option<[f64; 3]>, default: Vec3| -> Result<Vec3> {
            match v {
                None => Ok(default),
                Some(a) => {
                    let v = vec3(a, 1.0);
                    let n = v.norm();
                    if n > 0.0 && n.is_finite() {
                        Ok(v / n)
                    } else {
                        Err(Error::validation(name, "must be a nonzero vector"))
                    }
                }
            }
        };
        let beams = BeamConfig {
            parallel_axis: unit("beams.parallel_axis", b.parallel_axis, d.parallel_axis)?,
            diagonal_plane_normal: unit("beams.diagonal_plane_normal", b.diagonal_plane_normal, d.diagonal_plane_normal)?,
            parallel_polarization: polarization("beams.parallel_polarization", b.parallel_polarization, d.parallel_polarization)?,
            diagonal_polarization: polarization("beams.diagonal_polarization", b.diagonal_polarization, d.diagonal_polarization)?,
            angular_tolerance: b.angular_tolerance_deg.map_or(d.angular_tolerance, f64::to_radians),
        };
        beams.validate()?;
        cfg.beams = beams;
    }

    if let Some(p) = raw.perturbation {
        let config = p
            .config
            .parse::<LatticeConfig>()
            .and_then(PerturbationConfig::try_from)
            .map_err(|e| rename(e, "perturbation.config"))?;
        let spec = PerturbationSpec {
            config,
            d: p.d * len,
            current: p.current,
            n_max: p.n_max.unwrap_or(DEFAULT_N_MAX),
            tol: p.tol.map_or(DEFAULT_TOL, |t| t * fld),
        };
        spec.validate()?;
        let at = match (p.point, p.r_m) {
            (Some(pt), None) => PerturbationPoint::Point(vec3(pt, len)),
            (None, Some(r)) if r > 0.0 => PerturbationPoint::Height(r * len),
            (None, Some(_)) => return Err(Error::validation("perturbation.r_m", "must be positive")),
            _ => return Err(Error::validation("perturbation", "give exactly one of `point` or `r_m`")),
        };
        cfg.perturbation = Some(PerturbationRun { spec, at });
    }

    cfg.output = raw.output.map(|o| o.path);
    Ok(cfg)
}

fn lattice_layout(l: RawLattice, len: f64, fld: f64) -> Result<(LayoutSource, WireLayout)> {
    let config: LatticeConfig = l.config.parse().map_err(|e| rename(e, "layout.lattice.config"))?;
    let pitch_x = l
        .pitch_x
        .or(l.pitch)
        .ok_or_else(|| Error::validation("layout.lattice.pitch_x", "missing (set `pitch` or `pitch_x`)"))?
        * len;
    let pitch_y = l.pitch_y.or(l.pitch).map_or(pitch_x, |p| p * len);
    let bias = l.bias.map_or(Vec3::zeros(), |b| vec3(b, fld));
    let gap = l.layer_gap * len;
    if l.unit_cell {
        if l.n_x.is_some() || l.n_y.is_some() || l.wire_length.is_some() {
            return Err(Error::validation(
                "layout.lattice",
                "`n_x`, `n_y` and `wire_length` do not apply when `unit_cell = true`",
            ));
        }
        let layout = build_unit_cell(config, pitch_x, pitch_y, gap, l.current, bias)?;
        return Ok((LayoutSource::UnitCell(config), layout));
    }
    let n_x = l.n_x.ok_or_else(|| Error::validation("layout.lattice.n_x", "missing"))?;
    let n_y = l.n_y.ok_or_else(|| Error::validation("layout.lattice.n_y", "missing"))?;
    let mut spec = LatticeSpec::new(config, pitch_x, pitch_y, n_x, n_y, gap, l.current, bias);
    if let Some(w) = l.wire_length {
        spec.wire_length = w * len;
    }
    let layout = build_lattice(&spec)?;
    Ok((LayoutSource::Lattice(spec), layout))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_infinite_wire() {
        let cfg = parse_config(
            r#"
units = "gauss-mm"
[layout]
bias = [-3, 0, 0]
[[layout.infinite]]
point = [0, 0, 0]
direction = [0, 1, 0]
current = 4
"#,
        )
        .unwrap();
        assert_eq!(cfg.layout.infinite_wires.len(), 1);
        assert!((cfg.layout.bias - Vec3::new(-3e-4, 0.0, 0.0)).norm() < 1e-18);
        assert_eq!(cfg.source, LayoutSource::Inline);
    }

    #[test]
    fn scenario_source() {
        let cfg = parse_config("[layout]\nscenario = \"fig5\"\n").unwrap();
        assert_eq!(cfg.layout.segments.len(), 3);
        assert!(cfg.layout.segments.iter().all(|s| s.current.abs() == 4.0));
        assert!((cfg.layout.bias.norm() - 3e-4).abs() < 1e-15);
        assert!(cfg.region.is_some());
    }

    #[test]
    fn two_sources_rejected() {
        let text = r#"
[layout]
[[layout.segment]]
start = [0, 0, 0]
end = [1, 0, 0]
current = 1
[layout.lattice]
config = "A"
pitch = 1
n_x = 2
n_y = 2
layer_gap = 0.1
current = 1
"#;
        match parse_config(text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "layout"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_has_line_and_key() {
        let text = "[layout]\nscenario = \"fig5\"\n\n[grid]\nmin = [0, 0, 1]\nmax = [1, 1, 1]\nn = [2, 2, 1]\nspacing = 3\n";
        match parse_config(text) {
            Err(Error::Parse { line, key, .. }) => {
                assert_eq!(line, Some(8));
                assert_eq!(key.as_deref(), Some("spacing"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_value_type_reports_line() {
        let text = "units = \"si\"\n[layout]\nbias = [0, 0, \"x\"]\n";
        match parse_config(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, Some(3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_names_field() {
        let text = "[layout]\n[[layout.segment]]\nstart = [0, 0, 0]\nend = [0, 0, 0]\ncurrent = 1\n";
        match parse_config(text) {
            Err(Error::Validation { field, .. }) => assert!(field.starts_with("segments[0]"), "{field}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gauss_mm_converted_at_boundary() {
        let cfg = parse_config(
            r#"
units = "gauss-mm"
[layout.lattice]
config = "B"
pitch = 1.27
n_x = 3
n_y = 2
layer_gap = 1.27
current = 4
bias = [-3, 0, 0]
[search]
min = [-1, -1, 0.5]
max = [1, 1, 3]
"#,
        )
        .unwrap();
        match &cfg.source {
            LayoutSource::Lattice(spec) => {
                assert!((spec.pitch_x - 1.27e-3).abs() < 1e-15);
                assert!((spec.layer_gap - 1.27e-3).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        let r = cfg.region.unwrap();
        assert!((r.min.z - 0.5e-3).abs() < 1e-15);
        assert!((r.dedup_radius - 0.1e-3).abs() < 1e-15);
    }

    #[test]
    fn perturbation_section() {
        let cfg = parse_config(
            "units = \"gauss-mm\"\n[layout]\nscenario = \"configB-cell\"\n[perturbation]\nconfig = \"B\"\nd = 2\ncurrent = 4\nr_m = 0.5\n",
        )
        .unwrap();
        let p = cfg.perturbation.unwrap();
        assert_eq!(p.spec.config, PerturbationConfig::B);
        assert!((p.spec.d - 2e-3).abs() < 1e-15);
        assert_eq!(p.at, PerturbationPoint::Height(0.5e-3));
        assert!(parse_config("[layout]\nscenario = \"fig5\"\n[perturbation]\nconfig = \"C\"\nd = 1\ncurrent = 1\nr_m = 1\n").is_err());
    }

    #[test]
    fn grid_order_is_z_major() {
        let g = GridSpec {
            min: Vec3::zeros(),
            max: Vec3::new(1.0, 2.0, 3.0),
            n: [2, 2, 2],
        };
        let p = g.points();
        assert_eq!(p[1], Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(p[2], Vec3::new(0.0, 2.0, 0.0));
        assert_eq!(p[4], Vec3::new(0.0, 0.0, 3.0));
    }
}
