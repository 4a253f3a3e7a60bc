//! Closed-form expressions for single-wire, U and Z traps.
//!
//! All functions return signed values in SI units. Inputs must be strictly
//! positive except where noted.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::units::{MU0, MU0_OVER_2PI};

/// r_m/L above which the bent-wire expressions lose accuracy.
pub const REGIME_LIMIT: f64 = 0.2;

fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain { name, value })
    }
}

/// Straight wire in a perpendicular bias, optionally with a parallel component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleWireTrapParams {
    pub current: f64,
    pub b_perp: f64,
    pub b_par: f64,
}

impl SingleWireTrapParams {
    pub fn validate(&self) -> Result<()> {
        positive("I", self.current)?;
        positive("B_b", self.b_perp)?;
        if !(self.b_par >= 0.0) || !self.b_par.is_finite() {
            return Err(Error::Domain {
                name: "B_p",
                value: self.b_par,
            });
        }
        Ok(())
    }
}

/// Bent-wire (U, Z or H) trap: central bar current, arm current, bar length
/// and trap height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BentWireTrapParams {
    pub i_w: f64,
    pub i_c: f64,
    pub length: f64,
    pub r_m: f64,
}

impl BentWireTrapParams {
    /// Equal bar and arm currents.
    pub fn uniform(current: f64, length: f64, r_m: f64) -> Self {
        BentWireTrapParams {
            i_w: current,
            i_c: current,
            length,
            r_m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("I_w", self.i_w)?;
        positive("I_c", self.i_c)?;
        positive("L", self.length)?;
        positive("r_m", self.r_m)?;
        Ok(())
    }

    /// A caveat when the trap height is not small against the bar length.
    pub fn regime_warning(&self) -> Option<String> {
        let ratio = self.r_m / self.length;
        (ratio > REGIME_LIMIT).then(|| {
            format!("r_m/L = {ratio:.3} exceeds {REGIME_LIMIT}: bent-wire formulas assume r_m much smaller than L")
        })
    }
}

/// Height of the field zero above a wire in a perpendicular bias: μ₀I/(2πB_b).
pub fn r_min(current: f64, b_perp: f64) -> Result<f64> {
    positive("I", current)?;
    positive("B_b", b_perp)?;
    Ok(MU0_OVER_2PI * current / b_perp)
}

/// Radial gradient at the zero: −(2π/μ₀)·B_b²/I.
pub fn gradient_single_wire(current: f64, b_perp: f64) -> Result<f64> {
    positive("I", current)?;
    positive("B_b", b_perp)?;
    Ok(-b_perp * b_perp / (MU0_OVER_2PI * current))
}

/// Radial curvature of |B| at r_m with a parallel bias: (2π/μ₀)²·B_b⁴/(B_p·I²).
pub fn curvature_radial_ip(current: f64, b_perp: f64, b_par: f64) -> Result<f64> {
    positive("I", current)?;
    positive("B_b", b_perp)?;
    positive("B_p", b_par)?;
    let g = b_perp * b_perp / (MU0_OVER_2PI * current);
    Ok(g * g / b_par)
}

/// U-trap gradients (dB/dx, dB/dy) at the zero.
pub fn u_trap_gradients(p: &BentWireTrapParams) -> Result<(f64, f64)> {
    p.validate()?;
    let (r, l) = (p.r_m, p.length);
    let dx = -MU0 / (2.0 * PI) * p.i_w / (r * r);
    let q = l * l + 4.0 * r * r;
    let dy = 2.0 * MU0 / PI * p.i_c * r * l / (q * q);
    Ok((dx, dy))
}

/// Field at the bottom of a Z trap: (2μ₀/π)·I_c·r_m/(L² + 4r_m²).
pub fn z_trap_bmin(i_c: f64, r_m: f64, length: f64) -> Result<f64> {
    positive("I_c", i_c)?;
    positive("r_m", r_m)?;
    positive("L", length)?;
    Ok(2.0 * MU0 / PI * i_c * r_m / (length * length + 4.0 * r_m * r_m))
}

/// Z-trap curvatures (d²B/dx², d²B/dy²) at the minimum.
pub fn z_trap_curvatures(p: &BentWireTrapParams) -> Result<(f64, f64)> {
    p.validate()?;
    let (r, l) = (p.r_m, p.length);
    let (r2, l2) = (r * r, l * l);
    let dxx = MU0 / (16.0 * PI) * p.i_w * (l2 + 4.0 * r2) / r.powi(5);
    let num = 16.0 * r2 * r2 - 16.0 * r2 * l2 - l2 * l2;
    let dyy = -2.0 * MU0 / PI * p.i_c * num / (r * (4.0 * r2 + l2).powi(3));
    Ok((dxx, dyy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{GAUSS, GAUSS_PER_CM, MM};
    use approx::assert_relative_eq;

    #[test]
    fn trap_heights() {
        assert_relative_eq!(r_min(4.0, 3.0 * GAUSS).unwrap(), 2.6667 * MM, max_relative = 1e-4);
        assert_relative_eq!(r_min(16.0, 20.0 * GAUSS).unwrap(), 1.6 * MM, max_relative = 1e-12);
        assert_relative_eq!(r_min(8.0, 6.0 * GAUSS).unwrap(), r_min(4.0, 3.0 * GAUSS).unwrap(), max_relative = 1e-15);
        assert!(matches!(r_min(0.0, 1.0), Err(Error::Domain { name: "I", .. })));
        assert!(matches!(r_min(1.0, -1.0), Err(Error::Domain { name: "B_b", .. })));
    }

    #[test]
    fn single_wire_gradient() {
        let g = gradient_single_wire(4.0, 3.0 * GAUSS).unwrap();
        assert_relative_eq!(g, -11.25 * GAUSS_PER_CM, max_relative = 1e-12);
        let half = gradient_single_wire(8.0, 3.0 * GAUSS).unwrap();
        assert_relative_eq!(half, g / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn gradient_times_height_is_minus_bias() {
        for (i, b) in [(4.0, 3e-4), (16.0, 2e-3), (0.3, 7e-5), (120.0, 1e-2)] {
            let prod = gradient_single_wire(i, b).unwrap() * r_min(i, b).unwrap();
            assert!((prod + b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn radial_curvature_values() {
        let c = curvature_radial_ip(4.0, 3e-4, 1e-4).unwrap();
        assert_relative_eq!(c, 0.1125 * 0.1125 / 1e-4, max_relative = 1e-12);
        assert_relative_eq!(c, 126.5625, max_relative = 1e-12);
        assert_relative_eq!(curvature_radial_ip(4.0, 3e-4, 2e-4).unwrap(), c / 2.0, max_relative = 1e-15);
        assert_relative_eq!(curvature_radial_ip(8.0, 6e-4, 2e-4).unwrap(), 2.0 * c, max_relative = 1e-14);
    }

    #[test]
    fn u_trap_values() {
        let p = BentWireTrapParams::uniform(4.0, 10.2 * MM, r_min(4.0, 3e-4).unwrap());
        let (dx, dy) = u_trap_gradients(&p).unwrap();
        let g = gradient_single_wire(4.0, 3e-4).unwrap();
        assert!((dx - g).abs() <= 1e-12 * g.abs());
        assert_relative_eq!(dy, 4.96e-3, max_relative = 2e-3);
        let far = BentWireTrapParams { length: 1e6, ..p };
        assert!(u_trap_gradients(&far).unwrap().1 < 1e-18);
    }

    #[test]
    fn z_trap_minimum_field() {
        let b = z_trap_bmin(16.0, 1.6 * MM, 10.0 * MM).unwrap();
        assert_relative_eq!(b, 1.8576e-4, max_relative = 1e-3);
        assert!(z_trap_bmin(16.0, 1e-12, 10.0 * MM).unwrap() < 1e-12);
        let l = 10.0 * MM;
        let peak = z_trap_bmin(1.0, l / 2.0, l).unwrap();
        for r in [0.3, 0.45, 0.49, 0.51, 0.6, 1.0] {
            assert!(z_trap_bmin(1.0, r * l, l).unwrap() < peak);
        }
    }

    #[test]
    fn z_trap_curvature_signs() {
        let p = BentWireTrapParams::uniform(16.0, 10.0 * MM, 1.6 * MM);
        let (dxx, _) = z_trap_curvatures(&p).unwrap();
        assert_relative_eq!(dxx, 4.206e3, max_relative = 1e-3);
        for r in [1e-5, 1e-4, 1e-3, 1e-2, 1e-1] {
            let (dxx, _) = z_trap_curvatures(&BentWireTrapParams { r_m: r, ..p }).unwrap();
            assert!(dxx > 0.0);
        }
        let small = BentWireTrapParams::uniform(2.0, 1.0, 1e-3);
        let (_, dyy) = z_trap_curvatures(&small).unwrap();
        let lead = 2.0 * MU0 * 2.0 / (PI * 1e-3 * 1.0);
        assert!(dyy > 0.0);
        assert!((dyy - lead).abs() / lead < 1e-4);
    }

    #[test]
    fn regime_warning_threshold() {
        assert!(BentWireTrapParams::uniform(1.0, 10.0, 1.0).regime_warning().is_none());
        assert!(BentWireTrapParams::uniform(1.0, 10.0, 2.5).regime_warning().is_some());
    }
}
