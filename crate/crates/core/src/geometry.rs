//! Array and user geometry plus directional Rician channel synthesis.
//!
//! Conventions used throughout the crate:
//!
//! * zenith angles are measured from `+z`, azimuth is `atan2(y, x)`;
//! * the per-element complex amplitude is `beta = sqrt(L(d) * G0) * g`, and the
//!   pointing-dependent factor is `max(0, f . q)^p`, so the power gain of a link
//!   is `G0 * max(0, f . q)^(2p)`;
//! * links behind the boresight hemisphere (`f . q <= 0`) carry no power.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pointing::PointingMatrix;

pub type Vec3 = Vector3<f64>;

/// Rician factors at or above this are treated as pure line of sight.
pub const PURE_LOS_RICIAN_K: f64 = 1e12;

const UNIT_TOL: f64 = 1e-9;

/// Uniform planar array of rotatable elements centred on the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub kx: usize,
    pub ky: usize,
    /// Element spacing in meters.
    pub spacing: f64,
    pub positions: Vec<Vec3>,
    /// Maximum zenith rotation in radians.
    pub theta_max: f64,
}

impl ArrayGeometry {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

pub fn build_array(kx: usize, ky: usize, spacing: f64, theta_max: f64) -> Result<ArrayGeometry> {
    if kx == 0 || ky == 0 {
        return Err(invalid(format!("array dimensions must be positive, got {kx}x{ky}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(invalid(format!("element spacing must be positive, got {spacing}")));
    }
    // theta_max = 0 is the fixed-antenna limit and is needed by rotation-range sweeps.
    if !(0.0..=FRAC_PI_2).contains(&theta_max) {
        return Err(invalid(format!("theta_max must lie in [0, pi/2], got {theta_max}")));
    }
    let cx = (kx as f64 - 1.0) / 2.0;
    let cy = (ky as f64 - 1.0) / 2.0;
    let mut positions = Vec::with_capacity(kx * ky);
    for iy in 0..ky {
        for ix in 0..kx {
            positions.push(Vec3::new((ix as f64 - cx) * spacing, (iy as f64 - cy) * spacing, 0.0));
        }
    }
    Ok(ArrayGeometry {
        kx,
        ky,
        spacing,
        positions,
        theta_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserGeometry {
    pub position: Vec3,
    pub distance_from_origin: f64,
    pub zenith: f64,
    pub azimuth: f64,
}

/// Places a user from spherical coordinates.
///
/// Azimuths anywhere in `[-pi, pi]` are accepted; deployments around the base
/// station use the full circle.
pub fn user_position(r: f64, zenith: f64, azimuth: f64) -> Result<UserGeometry> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("user distance must be positive, got {r}")));
    }
    if !(0.0..=PI).contains(&zenith) {
        return Err(invalid(format!("zenith must lie in [0, pi], got {zenith}")));
    }
    if !(-PI..=PI).contains(&azimuth) {
        return Err(invalid(format!("azimuth must lie in [-pi, pi], got {azimuth}")));
    }
    let (sz, cz) = zenith.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Ok(UserGeometry {
        position: Vec3::new(r * sz * ca, r * sz * sa, r * cz),
        distance_from_origin: r,
        zenith,
        azimuth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// Unit vector from the antenna towards the user.
    pub direction: Vec3,
    pub distance: f64,
}

pub fn link_geometry(user: &UserGeometry, antenna_pos: &Vec3) -> Result<LinkGeometry> {
    let delta = user.position - antenna_pos;
    let distance = delta.norm();
    if !(distance > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "user at {:?} coincides with antenna",
            user.position.as_slice()
        )));
    }
    Ok(LinkGeometry {
        direction: delta / distance,
        distance,
    })
}

fn check_unit(v: &Vec3, what: &str) -> Result<()> {
    if (v.norm() - 1.0).abs() > UNIT_TOL {
        return Err(invalid(format!("{what} must be a unit vector, norm is {}", v.norm())));
    }
    Ok(())
}

/// Power gain `g0 * max(0, f . q)^(2p)`.
pub fn antenna_gain(boresight: &Vec3, direction: &Vec3, g0: f64, directivity: u32) -> Result<f64> {
    check_unit(boresight, "boresight")?;
    check_unit(direction, "direction")?;
    let c = boresight.dot(direction).clamp(0.0, 1.0);
    Ok(g0 * c.powi(2 * directivity as i32))
}

/// Large-scale gain `A0 * d^-alpha` with the reference distance at 1 m.
pub fn path_loss(distance: f64, ref_gain: f64, pathloss_exp: f64) -> f64 {
    ref_gain * distance.powf(-pathloss_exp)
}

/// Draws one Rician small-scale coefficient.
///
/// The line-of-sight term has unit modulus and phase `-2 pi d / lambda`; the
/// scattered term is CN(0, 1).
pub fn sample_small_scale<R: Rng + ?Sized>(rician_k: f64, distance: f64, wavelength: f64, rng: &mut R) -> Complex64 {
    // Reduce d/lambda before scaling so long links keep phase accuracy.
    let cycles = (distance / wavelength).fract();
    let los = Complex64::from_polar(1.0, -2.0 * PI * cycles);
    if rician_k >= PURE_LOS_RICIAN_K {
        return los;
    }
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let scattered = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
    los * (rician_k / (rician_k + 1.0)).sqrt() + scattered * (1.0 / (rician_k + 1.0)).sqrt()
}

/// Physical channel constants shared by all links.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelParams {
    pub g0: f64,
    pub directivity: u32,
    /// A0, the gain at the 1 m reference distance.
    pub ref_gain: f64,
    pub pathloss_exp: f64,
    pub rician_k: f64,
    pub wavelength: f64,
    /// Noise power in watts.
    pub noise_power: f64,
}

impl ChannelParams {
    /// Maximum gain that conserves radiated power of a `cos^(2p)` pattern over
    /// the forward hemisphere.
    pub fn normalized_g0(directivity: u32) -> f64 {
        2.0 * (2.0 * directivity as f64 + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.directivity >= 1, "directivity must be >= 1"),
            (self.g0 > 0.0 && self.g0.is_finite(), "g0 must be positive"),
            (
                self.ref_gain > 0.0 && self.ref_gain.is_finite(),
                "ref_gain must be positive",
            ),
            (self.pathloss_exp >= 2.0, "pathloss_exp must be >= 2"),
            (self.rician_k >= 0.0, "rician_k must be non-negative"),
            (
                self.wavelength > 0.0 && self.wavelength.is_finite(),
                "wavelength must be positive",
            ),
            (
                self.noise_power > 0.0 && self.noise_power.is_finite(),
                "noise_power must be positive",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(invalid(msg));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelLink {
    pub link: LinkGeometry,
    /// `sqrt(L(d) * G0) * g`.
    pub beta: Complex64,
    pub small_scale: Complex64,
}

/// Channel state for every (antenna, user) pair, stored user-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    num_antennas: usize,
    num_users: usize,
    links: Vec<ChannelLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDumpEntry {
    pub k: usize,
    pub m: usize,
    pub distance: f64,
    pub direction: [f64; 3],
    pub beta_re: f64,
    pub beta_im: f64,
}

impl ChannelSet {
    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn get(&self, k: usize, m: usize) -> &ChannelLink {
        &self.links[m * self.num_antennas + k]
    }

    /// Links of user `m`, indexed by antenna.
    pub fn user_links(&self, m: usize) -> &[ChannelLink] {
        &self.links[m * self.num_antennas..(m + 1) * self.num_antennas]
    }

    pub fn dump(&self) -> Vec<ChannelDumpEntry> {
        let mut out = Vec::with_capacity(self.links.len());
        for m in 0..self.num_users {
            for (k, l) in self.user_links(m).iter().enumerate() {
                out.push(ChannelDumpEntry {
                    k,
                    m,
                    distance: l.link.distance,
                    direction: [l.link.direction.x, l.link.direction.y, l.link.direction.z],
                    beta_re: l.beta.re,
                    beta_im: l.beta.im,
                });
            }
        }
        out
    }
}

/// Builds every link and draws its fading coefficient from `rng`, user by user
/// and antenna by antenna.
pub fn synthesize_channels<R: Rng + ?Sized>(
    array: &ArrayGeometry,
    users: &[UserGeometry],
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ChannelSet> {
    params.validate()?;
    let mut links = Vec::with_capacity(array.len() * users.len());
    for user in users {
        for pos in &array.positions {
            let link = link_geometry(user, pos)?;
            let small_scale = sample_small_scale(params.rician_k, link.distance, params.wavelength, rng);
            let amp = (path_loss(link.distance, params.ref_gain, params.pathloss_exp) * params.g0).sqrt();
            links.push(ChannelLink {
                link,
                beta: small_scale * amp,
                small_scale,
            });
        }
    }
    Ok(ChannelSet {
        num_antennas: array.len(),
        num_users: users.len(),
        links,
    })
}

/// `h_m(F)`: entry k is `beta_{m,k} * max(0, f_k . q_{k,m})^p`.
pub fn channel_vector(
    pointing: &PointingMatrix,
    channels: &ChannelSet,
    params: &ChannelParams,
    m: usize,
) -> Result<Vec<Complex64>> {
    if pointing.len() != channels.num_antennas() {
        return Err(invalid(format!(
            "pointing has {} columns but the channel set has {} antennas",
            pointing.len(),
            channels.num_antennas()
        )));
    }
    if m >= channels.num_users() {
        return Err(invalid(format!("user index {m} out of range")));
    }
    let p = params.directivity as i32;
    Ok(pointing
        .columns()
        .iter()
        .zip(channels.user_links(m))
        .map(|(f, l)| l.beta * f.dot(&l.link.direction).max(0.0).powi(p))
        .collect())
}

/// `||h_m(F)||^2` without materialising the vector.
pub fn channel_power(pointing: &PointingMatrix, channels: &ChannelSet, directivity: u32, m: usize) -> f64 {
    let p2 = 2 * directivity as i32;
    pointing
        .columns()
        .iter()
        .zip(channels.user_links(m))
        .map(|(f, l)| l.beta.norm_sqr() * f.dot(&l.link.direction).max(0.0).powi(p2))
        .sum()
}
