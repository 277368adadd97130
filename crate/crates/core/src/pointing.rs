//! Boresight matrices and the closed-form per-slot pointing rule.

use crate::error::{invalid, Result};
use crate::geometry::{ArrayGeometry, ChannelSet, Vec3};

const UNIT_TOL: f64 = 1e-9;

/// One unit boresight vector per antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct PointingMatrix {
    columns: Vec<Vec3>,
}

impl PointingMatrix {
    /// Checks unit norm and the zenith cone `cos(theta_max) <= f_z`.
    pub fn new(columns: Vec<Vec3>, theta_max: f64) -> Result<Self> {
        let m = PointingMatrix { columns };
        if let Some(k) = m.first_infeasible(theta_max) {
            return Err(invalid(format!(
                "pointing column {k} = {:?} violates the unit norm or the rotation limit",
                m.columns[k].as_slice()
            )));
        }
        Ok(m)
    }

    /// All boresights along `+z`.
    pub fn fixed(num_antennas: usize) -> Self {
        PointingMatrix {
            columns: vec![Vec3::z(); num_antennas],
        }
    }

    pub(crate) fn from_columns_unchecked(columns: Vec<Vec3>) -> Self {
        PointingMatrix { columns }
    }

    pub fn columns(&self) -> &[Vec3] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    fn first_infeasible(&self, theta_max: f64) -> Option<usize> {
        let floor = theta_max.cos();
        self.columns
            .iter()
            .position(|f| (f.norm() - 1.0).abs() > UNIT_TOL || f.z < floor - UNIT_TOL || f.z > 1.0 + UNIT_TOL)
    }

    pub fn is_feasible(&self, theta_max: f64) -> bool {
        self.first_infeasible(theta_max).is_none()
    }
}

/// Orientation of a whole deployment: one matrix for the frame, or one per
/// user slot when antennas re-point between slots.
#[derive(Debug, Clone, PartialEq)]
pub enum Pointing {
    Frame(PointingMatrix),
    PerSlot(Vec<PointingMatrix>),
}

impl Pointing {
    pub fn for_user(&self, m: usize) -> &PointingMatrix {
        match self {
            Pointing::Frame(f) => f,
            Pointing::PerSlot(slots) => &slots[m],
        }
    }

    pub fn is_feasible(&self, theta_max: f64) -> bool {
        match self {
            Pointing::Frame(f) => f.is_feasible(theta_max),
            Pointing::PerSlot(slots) => slots.iter().all(|f| f.is_feasible(theta_max)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationAngles {
    pub zenith: f64,
    pub azimuth: f64,
}

impl RotationAngles {
    pub fn to_vector(self) -> Vec3 {
        let (sz, cz) = self.zenith.sin_cos();
        let (sa, ca) = self.azimuth.sin_cos();
        Vec3::new(sz * ca, sz * sa, cz)
    }
}

fn azimuth_of(v: &Vec3) -> f64 {
    // atan2(+-0, -0) would give +-pi; the pole gets azimuth 0.
    if v.x == 0.0 && v.y == 0.0 {
        0.0
    } else {
        v.y.atan2(v.x)
    }
}

pub fn rotation_angles(direction: &Vec3, theta_max: f64) -> Result<RotationAngles> {
    if (direction.norm() - 1.0).abs() > UNIT_TOL {
        return Err(invalid(format!(
            "direction must be a unit vector, norm is {}",
            direction.norm()
        )));
    }
    Ok(RotationAngles {
        zenith: direction.z.clamp(-1.0, 1.0).acos().min(theta_max),
        azimuth: azimuth_of(direction),
    })
}

/// Feasible boresight with the largest projection onto `direction`.
///
/// Inside the rotation cone the antenna looks straight at the user; outside it
/// tilts to the cone edge along the user's azimuth.
pub fn optimal_pointing(direction: &Vec3, theta_max: f64) -> Result<Vec3> {
    let angles = rotation_angles(direction, theta_max)?;
    if direction.z.clamp(-1.0, 1.0).acos() <= theta_max {
        Ok(*direction)
    } else {
        Ok(angles.to_vector())
    }
}

/// Per-antenna optimal pointing towards user `m` for that user's slot.
pub fn dynamic_pointing(array: &ArrayGeometry, channels: &ChannelSet, m: usize) -> Result<PointingMatrix> {
    if channels.num_antennas() != array.len() {
        return Err(invalid("channel set does not match the array"));
    }
    if m >= channels.num_users() {
        return Err(invalid(format!("user index {m} out of range")));
    }
    let columns = channels
        .user_links(m)
        .iter()
        .map(|l| optimal_pointing(&l.link.direction, array.theta_max))
        .collect::<Result<Vec<_>>>()?;
    Ok(PointingMatrix::from_columns_unchecked(columns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn angles_examples() {
        let a = rotation_angles(&Vec3::z(), FRAC_PI_3).unwrap();
        assert_eq!((a.zenith, a.azimuth), (0.0, 0.0));
        let a = rotation_angles(&Vec3::x(), FRAC_PI_3).unwrap();
        assert_eq!((a.zenith, a.azimuth), (FRAC_PI_3, 0.0));
        let q = Vec3::new(0.0, FRAC_PI_4.sin(), FRAC_PI_4.cos());
        let a = rotation_angles(&q, FRAC_PI_3).unwrap();
        assert!((a.zenith - FRAC_PI_4).abs() < 1e-12);
        assert!((a.azimuth - FRAC_PI_2).abs() < 1e-15);
        let a = rotation_angles(&Vec3::new(-0.0, 0.0, -1.0), FRAC_PI_3).unwrap();
        assert_eq!(a.azimuth, 0.0);
        assert!(rotation_angles(&Vec3::new(0.0, 0.0, 2.0), 1.0).is_err());
    }

    #[test]
    fn pointing_examples() {
        let t60 = 60f64.to_radians();
        assert_eq!(optimal_pointing(&Vec3::z(), t60).unwrap(), Vec3::z());

        let t80 = 80f64.to_radians();
        let f = optimal_pointing(&Vec3::new(t80.sin(), 0.0, t80.cos()), t60).unwrap();
        assert!((f - Vec3::new(0.75f64.sqrt(), 0.0, 0.5)).norm() < 1e-12);

        let f = optimal_pointing(&Vec3::new(0.0, -1.0, 0.0), t60).unwrap();
        assert!((f - Vec3::new(0.0, -t60.sin(), t60.cos())).norm() < 1e-12);
    }

    #[test]
    fn boundary_direction_is_returned_unchanged() {
        let t: f64 = 0.7;
        let q = Vec3::new(t.sin(), 0.0, t.cos());
        let f = optimal_pointing(&q, q.z.acos()).unwrap();
        assert_eq!(f, q);
    }

    #[test]
    fn fixed_matrix_is_feasible_for_zero_range() {
        let f = PointingMatrix::fixed(4);
        assert!(f.is_feasible(0.0));
        assert!(PointingMatrix::new(vec![Vec3::x()], 1.0).is_err());
        assert!(PointingMatrix::new(vec![Vec3::x()], FRAC_PI_2).is_ok());
    }
}
