//! Command implementations behind the `wiretrap` binary.
//!
//! Each command renders its whole output as a string so that callers can
//! write it once; the binary picks the destination.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{PerturbationPoint, ProfileConfig, ProfileRequest, RunConfig};
use crate::error::{Error, Result};
use crate::field::{field_total, Line};
use crate::geometry::Vec3;
use crate::perturbation::{cell_layout, perturbation_field, PerturbationConfig};
use crate::traps::{assess, find_minima, label_sites, trap_metrics, Addressability, TrapKind, TrapSite};
use crate::units::Units;
use crate::verify::{run_checks, Check, Class, Quantity, Tolerance};

/// Process exit status for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    /// Reserved for command-line usage errors.
    pub const USAGE: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const SINGULARITY: i32 = 5;
    pub const VERIFICATION: i32 = 6;
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } => exit::PARSE,
        Error::Validation { .. } | Error::Domain { .. } => exit::VALIDATION,
        Error::Singularity { .. } | Error::StepCollision { .. } => exit::SINGULARITY,
        Error::Sample { source, .. } => exit_code(source),
        _ => exit::OTHER,
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:e}")
    }
}

fn scaled(v: Vec3, k: f64) -> [f64; 3] {
    [v.x / k, v.y / k, v.z / k]
}

/// Field map over the configured grid: one row per point, z-major, then y,
/// then x. Points inside a conductor's exclusion radius are kept with NaN
/// field values and `singular = 1`.
pub fn fieldmap(cfg: &RunConfig) -> Result<String> {
    let grid = cfg.grid.ok_or_else(|| Error::validation("grid", "fieldmap needs a [grid] section"))?;
    let points = grid.points();
    let fields: Vec<Option<Vec3>> = points
        .par_iter()
        .map(|p| match field_total(p, &cfg.layout) {
            Ok(b) => Ok(Some(b)),
            Err(Error::Singularity { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let (lu, fu) = (cfg.units.length(), cfg.units.field());
    let mut out = String::from("x,y,z,Bx,By,Bz,Bmag,singular\n");
    for (p, b) in points.iter().zip(&fields) {
        let x = scaled(*p, lu);
        let (bv, mag, flag) = match b {
            Some(b) => (scaled(*b, fu), b.norm() / fu, 0),
            None => ([f64::NAN; 3], f64::NAN, 1),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            num(x[0]),
            num(x[1]),
            num(x[2]),
            num(bv[0]),
            num(bv[1]),
            num(bv[2]),
            num(mag),
            flag
        )
        .unwrap();
    }
    Ok(out)
}

fn resolve_profile(cfg: &RunConfig) -> Result<ProfileConfig> {
    match cfg.profile {
        Some(ProfileRequest::Line(p)) => Ok(p),
        Some(ProfileRequest::ThroughMinimum {
            direction,
            half_span,
            samples,
        }) => {
            let sites = search(cfg)?;
            let deepest = sites
                .iter()
                .min_by(|a, b| a.b_min.total_cmp(&b.b_min))
                .ok_or_else(|| Error::validation("profile", "no trap found to anchor the profile line"))?;
            Ok(ProfileConfig {
                line: Line {
                    origin: deepest.position,
                    direction,
                    s_min: -half_span,
                    s_max: half_span,
                },
                samples,
            })
        }
        None => Err(Error::validation("profile", "profile needs a [profile] section")),
    }
}

/// |B| along the profile line: columns s, x, y, z, Bmag, singular.
pub fn profile(cfg: &RunConfig) -> Result<String> {
    let p = resolve_profile(cfg)?;
    let dir = p.line.unit_direction()?;
    let (lu, fu) = (cfg.units.length(), cfg.units.field());
    let rows: Vec<(f64, Vec3, Option<f64>)> = p
        .line
        .parameters(p.samples)
        .into_par_iter()
        .map(|s| {
            let x = p.line.origin + dir * s;
            match field_total(&x, &cfg.layout) {
                Ok(b) => Ok((s, x, Some(b.norm()))),
                Err(Error::Singularity { .. }) => Ok((s, x, None)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut out = String::from("s,x,y,z,Bmag,singular\n");
    for (s, x, b) in rows {
        let xs = scaled(x, lu);
        let (mag, flag) = b.map_or((f64::NAN, 1), |b| (b / fu, 0));
        writeln!(out, "{},{},{},{},{},{}", num(s / lu), num(xs[0]), num(xs[1]), num(xs[2]), num(mag), flag).unwrap();
    }
    Ok(out)
}

fn search(cfg: &RunConfig) -> Result<Vec<TrapSite>> {
    let region = cfg
        .region
        .ok_or_else(|| Error::validation("search", "traps needs a [search] section"))?;
    let mut sites = find_minima(&cfg.layout, &region)?;
    label_sites(&mut sites, &cfg.beams);
    Ok(sites)
}

#[derive(Serialize)]
struct TrapReport {
    units: String,
    summary: Summary,
    beams: BeamsRecord,
    site: Vec<SiteRecord>,
}

#[derive(Serialize)]
struct Summary {
    sites: usize,
    quadrupole: usize,
    ioffe_pritchard: usize,
    selected: usize,
}

#[derive(Serialize)]
struct BeamsRecord {
    parallel_axis: [f64; 3],
    diagonal_plane_normal: [f64; 3],
    parallel_polarization: String,
    diagonal_polarization: String,
    angular_tolerance_deg: f64,
}

#[derive(Serialize)]
struct SiteRecord {
    label: String,
    kind: String,
    position: [f64; 3],
    b_min: f64,
    principal_gradients: [f64; 3],
    axis_gradients: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    axis: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_surface_angle_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_xz_angle_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curvatures: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis_curvatures: Option<[f64; 3]>,
    addressability: String,
}

/// Counts of a trap search, also written to the report's `[summary]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrapCounts {
    pub sites: usize,
    pub quadrupole: usize,
    pub ioffe_pritchard: usize,
    pub selected: usize,
}

/// Trap report as a TOML document: a comment line with the counts, the
/// units, a `[summary]` table, the beams, and one `[[site]]` per trap.
pub fn traps(cfg: &RunConfig) -> Result<(String, TrapCounts)> {
    let sites = search(cfg)?;
    let u = cfg.units;
    let g = |v: f64| v / u.gradient();
    let mut records = Vec::with_capacity(sites.len());
    let mut selected = 0;
    for s in &sites {
        let m = trap_metrics(s, &cfg.layout)?;
        let a = assess(s, &cfg.beams);
        if a == Addressability::Selected {
            selected += 1;
        }
        records.push(SiteRecord {
            label: s.label.clone().unwrap_or_default(),
            kind: s.kind.to_string(),
            position: scaled(s.position, u.length()),
            b_min: s.b_min / u.field(),
            principal_gradients: m.principal_gradients.map(g),
            axis_gradients: m.axis_gradients.map(g),
            axis: m.axis.map(|a| [a.x, a.y, a.z]),
            axis_surface_angle_deg: m.axis_surface_angle,
            axis_xz_angle_deg: m.axis_xz_angle,
            curvatures: m.curvatures.map(|c| c.map(|v| v / u.curvature())),
            axis_curvatures: m.axis_curvatures.map(|c| c.map(|v| v / u.curvature())),
            addressability: a.to_string(),
        });
    }
    let counts = TrapCounts {
        sites: sites.len(),
        quadrupole: sites.iter().filter(|s| s.kind == TrapKind::Quadrupole).count(),
        ioffe_pritchard: sites.iter().filter(|s| s.kind == TrapKind::IoffePritchard).count(),
        selected,
    };
    let b = &cfg.beams;
    let report = TrapReport {
        units: u.to_string(),
        summary: Summary {
            sites: counts.sites,
            quadrupole: counts.quadrupole,
            ioffe_pritchard: counts.ioffe_pritchard,
            selected: counts.selected,
        },
        beams: BeamsRecord {
            parallel_axis: scaled(b.parallel_axis, 1.0),
            diagonal_plane_normal: scaled(b.diagonal_plane_normal, 1.0),
            parallel_polarization: b.parallel_polarization.to_string(),
            diagonal_polarization: b.diagonal_polarization.to_string(),
            // Undo the radian round trip so 30 prints as 30.
            angular_tolerance_deg: (b.angular_tolerance.to_degrees() * 1e9).round() / 1e9,
        },
        site: records,
    };
    let body = toml::to_string(&report).map_err(|e| Error::validation("report", e.to_string()))?;
    let head = format!(
        "# {} sites: {} quadrupole, {} ioffe-pritchard, {} selected\n",
        counts.sites, counts.quadrupole, counts.ioffe_pritchard, counts.selected
    );
    Ok((head + &body, counts))
}

#[derive(Serialize)]
struct PerturbationRecord {
    units: String,
    config: String,
    d: f64,
    current: f64,
    point: [f64; 3],
    field: [f64; 3],
    magnitude: f64,
    n_pairs: usize,
    m_pairs: usize,
    achieved_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    cell_field: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<f64>,
}

/// Lattice perturbation field at the configured point.
pub fn perturbation(cfg: &RunConfig) -> Result<String> {
    let run = cfg
        .perturbation
        .ok_or_else(|| Error::validation("perturbation", "needs a [perturbation] section"))?;
    let point = match run.at {
        PerturbationPoint::Point(p) => p,
        PerturbationPoint::Height(r) => Vec3::new(0.0, 0.0, r),
    };
    let r = perturbation_field(&point, &run.spec)?;
    let cell = match run.at {
        PerturbationPoint::Height(_) => Some(field_total(&point, &cell_layout(&run.spec)?)?.norm()),
        PerturbationPoint::Point(_) => None,
    };
    let u = cfg.units;
    let rec = PerturbationRecord {
        units: u.to_string(),
        config: match run.spec.config {
            PerturbationConfig::A => "A".into(),
            PerturbationConfig::B => "B".into(),
        },
        d: run.spec.d / u.length(),
        current: run.spec.current,
        point: scaled(point, u.length()),
        field: scaled(r.field, u.field()),
        magnitude: r.field.norm() / u.field(),
        n_pairs: r.n_pairs,
        m_pairs: r.m_pairs,
        achieved_tol: r.achieved_tol / u.field(),
        cell_field: cell.map(|c| c / u.field()),
        ratio: cell.map(|c| r.field.norm() / c),
    };
    toml::to_string(&rec).map_err(|e| Error::validation("report", e.to_string()))
}

fn unit_scale(q: Quantity, u: Units) -> (f64, &'static str) {
    match q {
        Quantity::Length => (u.length(), u.length_label()),
        Quantity::Field => (u.field(), u.field_label()),
        Quantity::Gradient => (u.gradient(), u.gradient_label()),
        Quantity::Curvature => (u.curvature(), u.curvature_label()),
        Quantity::Ratio => (1.0, "-"),
    }
}

/// Renders checks as a fixed-width table followed by per-class counts.
pub fn render_checks(checks: &[Check], units: Units) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<19} {:<13} {:<58} {:>13} {:>13} {:>10} {:>10} {:<7} note",
        "class", "status", "check", "expected", "computed", "error", "tolerance", "unit"
    )
    .unwrap();
    for c in checks {
        let (k, label) = match (c.tolerance, c.quantity) {
            (Tolerance::Absolute(_), q) | (Tolerance::Relative(_), q) => unit_scale(q, units),
        };
        let (tol, kind) = match c.tolerance {
            Tolerance::Relative(t) => (t, "rel"),
            Tolerance::Absolute(t) => (t, "abs"),
        };
        let status = match (c.passed(), c.class) {
            (true, _) => "pass",
            (false, Class::Hard) => "FAIL",
            (false, Class::Soft) => "soft-fail",
            (false, Class::Inconsistent) => "inconsistent",
        };
        writeln!(
            out,
            "{:<19} {:<13} {:<58} {:>13.5e} {:>13.5e} {:>10.3e} {:>6.1e}{} {:<7} {}",
            c.class.to_string(),
            status,
            c.name,
            c.expected / k,
            c.computed / k,
            c.error(),
            tol,
            kind,
            label,
            c.note.unwrap_or("")
        )
        .unwrap();
    }
    for class in [Class::Hard, Class::Soft, Class::Inconsistent] {
        let of: Vec<_> = checks.iter().filter(|c| c.class == class).collect();
        let ok = of.iter().filter(|c| c.passed()).count();
        writeln!(out, "{class}: {ok} of {} within tolerance", of.len()).unwrap();
    }
    out
}

/// Runs every check. The flag is false when a hard check failed.
pub fn verify(units: Units) -> Result<(String, bool)> {
    let checks = run_checks()?;
    let ok = !checks.iter().any(Check::is_blocking_failure);
    Ok((render_checks(&checks, units), ok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn pure_bias_fieldmap() {
        let cfg = parse_config(
            "units = \"gauss-mm\"\n[layout]\nbias = [0, 0, 3]\n[grid]\nmin = [0, 0, 1]\nmax = [1, 1, 1]\nn = [2, 2, 1]\n",
        )
        .unwrap();
        let out = fieldmap(&cfg).unwrap();
        let lines: Vec<_> = out.lines().collect();
        assert_eq!(lines[0], "x,y,z,Bx,By,Bz,Bmag,singular");
        assert_eq!(lines.len(), 5);
        for l in &lines[1..] {
            let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
            assert!((cols[6] - 3.0).abs() < 1e-12);
            assert_eq!(cols[7], 0.0);
        }
    }

    #[test]
    fn singular_points_are_flagged() {
        let cfg = parse_config(
            "[layout]\n[[layout.infinite]]\npoint = [0, 0, 0]\ndirection = [0, 1, 0]\ncurrent = 1\n[grid]\nmin = [0, 0, 0]\nmax = [0.01, 0, 0]\nn = [2, 1, 1]\n",
        )
        .unwrap();
        let out = fieldmap(&cfg).unwrap();
        let rows: Vec<_> = out.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].ends_with(",nan,nan,nan,nan,1"), "{}", rows[0]);
        assert!(rows[1].ends_with(",0"));
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            exit_code(&Error::Parse {
                line: None,
                key: None,
                message: String::new(),
            }),
            exit_code(&Error::validation("a", "b")),
            exit_code(&Error::Singularity {
                conductor: crate::error::Conductor::Segment(0),
                distance: 0.0,
            }),
            exit::VERIFICATION,
            exit::OK,
        ];
        for i in 0..codes.len() {
            for j in 0..i {
                assert_ne!(codes[i], codes[j]);
            }
        }
    }
}
