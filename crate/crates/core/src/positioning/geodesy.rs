//! WGS84 geodetic ↔ ECEF ↔ local ENU conversions.

use crate::dataset::GnssPacket;
use crate::geometry::Vec3;

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);

/// Origin of the local frame: the first GNSS fix of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude: f64,
}

impl Anchor {
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Self {
        Anchor { latitude, longitude, altitude }
    }

    pub fn from_fix(fix: &GnssPacket) -> Self {
        Anchor::new(fix.latitude, fix.longitude, fix.altitude)
    }
}

/// Geodetic (degrees, meters) to Earth-centred Earth-fixed meters.
pub fn geodetic_to_ecef(lat_deg: f64, lon_deg: f64, alt: f64) -> Vec3 {
    let (sp, cp) = lat_deg.to_radians().sin_cos();
    let (sl, cl) = lon_deg.to_radians().sin_cos();
    let n = WGS84_A / (1.0 - WGS84_E2 * sp * sp).sqrt();
    Vec3::new((n + alt) * cp * cl, (n + alt) * cp * sl, (n * (1.0 - WGS84_E2) + alt) * sp)
}

/// ECEF to geodetic `(lat_deg, lon_deg, alt)` by fixed-point iteration on latitude.
pub fn ecef_to_geodetic(p: Vec3) -> (f64, f64, f64) {
    let lon = p.y.atan2(p.x);
    let rho = (p.x * p.x + p.y * p.y).sqrt();
    let mut lat = p.z.atan2(rho * (1.0 - WGS84_E2));
    let mut alt = 0.0;
    for _ in 0..20 {
        let s = lat.sin();
        let n = WGS84_A / (1.0 - WGS84_E2 * s * s).sqrt();
        alt = if lat.cos().abs() > 1e-12 { rho / lat.cos() - n } else { p.z.abs() - n * (1.0 - WGS84_E2) };
        let next = p.z.atan2(rho * (1.0 - WGS84_E2 * n / (n + alt)));
        if (next - lat).abs() < 1e-15 {
            lat = next;
            break;
        }
        lat = next;
    }
    (lat.to_degrees(), lon.to_degrees(), alt)
}

fn enu_basis(anchor: &Anchor) -> [Vec3; 3] {
    let (sp, cp) = anchor.latitude.to_radians().sin_cos();
    let (sl, cl) = anchor.longitude.to_radians().sin_cos();
    [
        Vec3::new(-sl, cl, 0.0),
        Vec3::new(-sp * cl, -sp * sl, cp),
        Vec3::new(cp * cl, cp * sl, sp),
    ]
}

/// Geodetic point to east/north/up meters in the anchor's tangent frame.
pub fn geodetic_to_local(anchor: &Anchor, lat_deg: f64, lon_deg: f64, alt: f64) -> Vec3 {
    let d = geodetic_to_ecef(lat_deg, lon_deg, alt)
        - geodetic_to_ecef(anchor.latitude, anchor.longitude, anchor.altitude);
    let [e, n, u] = enu_basis(anchor);
    Vec3::new(e.dot(d), n.dot(d), u.dot(d))
}

pub fn wgs84_to_local(anchor: &Anchor, fix: &GnssPacket) -> Vec3 {
    geodetic_to_local(anchor, fix.latitude, fix.longitude, fix.altitude)
}

/// Inverse of [`geodetic_to_local`].
pub fn local_to_geodetic(anchor: &Anchor, enu: Vec3) -> (f64, f64, f64) {
    let [e, n, u] = enu_basis(anchor);
    let ecef = geodetic_to_ecef(anchor.latitude, anchor.longitude, anchor.altitude) + e * enu.x + n * enu.y + u * enu.z;
    ecef_to_geodetic(ecef)
}
