//! Built-in wire configurations from the reference experiments.
//!
//! All scenarios follow the library convention: y-running wires on the
//! upper layer at `z = 0`, x-running wires at `z = -gap`, traps above.

use crate::error::{Error, Result};
use crate::geometry::{build_unit_cell, LatticeConfig, Vec3, WireLayout, WireSegment};
use crate::traps::{BeamConfig, SearchRegion};
use crate::units::{GAUSS, MM};

/// Centre-to-centre distance of the two wire layers in the experiments.
pub const EXPERIMENT_GAP: f64 = 1.27 * MM;
/// Wire pitch of the experimental grid.
pub const EXPERIMENT_PITCH: f64 = 1.27 * MM;

pub const SCENARIO_NAMES: [&str; 7] = [
    "fig1b",
    "fig1c",
    "fig5",
    "configA-cell",
    "configB-cell",
    "configC-cell",
    "fig8-array",
];

/// Where a scenario's default profile line is anchored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProfileAnchor {
    Point(Vec3),
    /// Through the lowest-|B| site found in the scenario's search region.
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSpec {
    pub anchor: ProfileAnchor,
    pub direction: Vec3,
    pub half_span: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    pub layout: WireLayout,
    pub region: SearchRegion,
    pub beams: BeamConfig,
    pub profile: ProfileSpec,
}

fn y_wire(x: f64, y0: f64, y1: f64, current: f64) -> WireSegment {
    WireSegment {
        start: Vec3::new(x, y0, 0.0),
        end: Vec3::new(x, y1, 0.0),
        current,
    }
}

fn x_wire(y: f64, z: f64, x0: f64, x1: f64, current: f64) -> WireSegment {
    WireSegment {
        start: Vec3::new(x0, y, z),
        end: Vec3::new(x1, y, z),
        current,
    }
}

/// U-shaped wire in the plane `z = 0`: central bar of `length` along +y at
/// `x = 0` and two arms of `arm` running toward +x.
pub fn u_layout(length: f64, arm: f64, current: f64, bias: Vec3) -> WireLayout {
    let h = length / 2.0;
    WireLayout {
        segments: vec![
            x_wire(-h, 0.0, arm, 0.0, current),
            y_wire(0.0, -h, h, current),
            x_wire(h, 0.0, 0.0, arm, current),
        ],
        infinite_wires: Vec::new(),
        bias,
    }
}

/// Z-shaped wire in the plane `z = 0`: central bar along +y, the incoming
/// arm from −x and the outgoing arm toward +x.
pub fn z_layout(length: f64, arm: f64, current: f64, bias: Vec3) -> WireLayout {
    let h = length / 2.0;
    WireLayout {
        segments: vec![
            x_wire(-h, 0.0, -arm, 0.0, current),
            y_wire(0.0, -h, h, current),
            x_wire(h, 0.0, 0.0, arm, current),
        ],
        infinite_wires: Vec::new(),
        bias,
    }
}

/// Configuration C cell driven with mixed currents: the left y-running wire
/// off, the inner y-running wires at 3.5 A, the outer one at 5 A and the
/// x-running wires at 4 A. Pitch 2.5 mm, no bias.
pub fn config_c_mixed_layout() -> Result<WireLayout> {
    let p = 2.5 * MM;
    let mut layout = build_unit_cell(LatticeConfig::C, p, p, EXPERIMENT_GAP, 4.0, Vec3::zeros())?;
    layout.segments.retain(|s| !(s.start.x == s.end.x && s.start.x < -p));
    for s in &mut layout.segments {
        if s.start.x == s.end.x {
            let magnitude = if s.start.x.abs() > p { 5.0 } else { 3.5 };
            s.current = s.current.signum() * magnitude;
        }
    }
    Ok(layout)
}

fn region(min: [f64; 3], max: [f64; 3], dedup: f64) -> SearchRegion {
    SearchRegion::new(Vec3::from(min) * MM, Vec3::from(max) * MM, dedup)
}

fn vertical_through_minimum(half_span: f64) -> ProfileSpec {
    ProfileSpec {
        anchor: ProfileAnchor::Minimum,
        direction: Vec3::z(),
        half_span,
        samples: 201,
    }
}

pub fn scenario(name: &str) -> Result<Scenario> {
    let beams = BeamConfig::default();
    let s = match name {
        "fig1b" => {
            let l = 10.0 * MM;
            Scenario {
                name: "fig1b",
                description: "U-shaped wire, bar 10 mm, 16 A, 7 G bias",
                layout: u_layout(l, 100.0 * l, 16.0, Vec3::new(-7.0 * GAUSS, 0.0, 0.0)),
                region: region([-5.0, -4.0, 0.5], [15.0, 4.0, 10.0], l / 20.0),
                beams,
                profile: vertical_through_minimum(4.0 * MM),
            }
        }
        "fig1c" => {
            let l = 10.0 * MM;
            Scenario {
                name: "fig1c",
                description: "Z-shaped wire, bar 10 mm, 16 A, 20 G bias",
                layout: z_layout(l, 100.0 * l, 16.0, Vec3::new(-20.0 * GAUSS, 0.0, 0.0)),
                region: region([-5.0, -4.0, 0.3], [5.0, 4.0, 5.0], l / 20.0),
                beams,
                profile: vertical_through_minimum(1.5 * MM),
            }
        }
        "fig5" => {
            let half = 50.0 * MM;
            let yl = 5.1 * MM;
            Scenario {
                name: "fig5",
                description: "Single upper wire closed by two lower wires 10.2 mm apart, 4 A, 3 G bias",
                layout: WireLayout {
                    segments: vec![
                        y_wire(0.0, -half, half, 4.0),
                        x_wire(-yl, -EXPERIMENT_GAP, -half, half, 4.0),
                        x_wire(yl, -EXPERIMENT_GAP, -half, half, -4.0),
                    ],
                    infinite_wires: Vec::new(),
                    bias: Vec3::new(-3.0 * GAUSS, 0.0, 0.0),
                },
                region: region([-6.0, -4.5, 0.3], [6.0, 4.5, 6.0], 10.2 * MM / 20.0),
                beams,
                profile: vertical_through_minimum(2.0 * MM),
            }
        }
        "configA-cell" => {
            let p = 10.2 * MM;
            Scenario {
                name: "configA-cell",
                description: "Configuration A unit cell (H), 10.2 mm pitch, 4 A, 3 G bias",
                layout: build_unit_cell(LatticeConfig::A, p, p, EXPERIMENT_GAP, 4.0, Vec3::new(-3.0 * GAUSS, 0.0, 0.0))?,
                region: region([-6.0, -4.5, 0.3], [6.0, 4.5, 6.0], p / 20.0),
                beams,
                profile: vertical_through_minimum(2.0 * MM),
            }
        }
        "configB-cell" => {
            let half = 20.0 * MM;
            Scenario {
                name: "configB-cell",
                description: "Configuration B unit cell, spacings 5.0 / 3.8 mm, 4 A, 3 G bias",
                layout: WireLayout {
                    segments: vec![
                        y_wire(0.0, -half, half, 4.0),
                        x_wire(5.0 * MM, -EXPERIMENT_GAP, -half, half, 4.0),
                        x_wire(0.0, -EXPERIMENT_GAP, -half, half, -4.0),
                        x_wire(-3.8 * MM, -EXPERIMENT_GAP, -half, half, 4.0),
                    ],
                    infinite_wires: Vec::new(),
                    bias: Vec3::new(-3.0 * GAUSS, 0.0, 0.0),
                },
                region: region([-6.0, -3.8, 0.3], [6.0, 5.0, 6.0], 3.8 * MM / 20.0),
                beams,
                profile: vertical_through_minimum(2.0 * MM),
            }
        }
        "configC-cell" => {
            let p = 2.5 * MM;
            Scenario {
                name: "configC-cell",
                description: "Configuration C unit cell, 4 x 4 alternating wires, 2.5 mm pitch, 4 A, no bias",
                layout: build_unit_cell(LatticeConfig::C, p, p, EXPERIMENT_GAP, 4.0, Vec3::zeros())?,
                region: region([-4.0, -4.0, 0.05], [4.0, 4.0, 3.0], p / 20.0),
                beams,
                profile: ProfileSpec {
                    anchor: ProfileAnchor::Point(Vec3::zeros()),
                    direction: Vec3::z(),
                    half_span: 3.0 * MM,
                    samples: 201,
                },
            }
        }
        "fig8-array" => {
            let half = 30.0 * MM;
            let mut segments = vec![
                y_wire(-5.08 * MM, -half, half, 3.0),
                y_wire(5.08 * MM, -half, half, 3.0),
            ];
            // Each effective lower wire is a pair at one pitch, sharing its 3 A.
            for k in 0..8 {
                let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
                let y = (k as f64 - 3.5) * EXPERIMENT_PITCH;
                segments.push(x_wire(y, -EXPERIMENT_GAP, -half, half, sign * 1.5));
            }
            Scenario {
                name: "fig8-array",
                description: "2 x 2 MOT array: 2 upper wires at 3 A, 4 lower wire pairs at 3 A per pair, 4 G bias",
                layout: WireLayout {
                    segments,
                    infinite_wires: Vec::new(),
                    bias: Vec3::new(-4.0 * GAUSS, 0.0, 0.0),
                },
                region: region([-9.0, -7.0, 0.2], [9.0, 7.0, 4.0], EXPERIMENT_PITCH / 20.0),
                beams,
                profile: ProfileSpec {
                    anchor: ProfileAnchor::Point(Vec3::new(-5.08 * MM, 0.0, 1.5 * MM)),
                    direction: Vec3::y(),
                    half_span: 6.0 * MM,
                    samples: 241,
                },
            }
        }
        other => {
            return Err(Error::validation(
                "scenario",
                format!("unknown scenario `{other}` (known: {})", SCENARIO_NAMES.join(", ")),
            ))
        }
    };
    Ok(s)
}
