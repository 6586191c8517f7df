//! Great-circle heading math for auto-heading and telemetry.

use super::SimError;
pub use crate::types::GeoPoint;

/// Initial great-circle bearing from `a` to `b`, compass degrees in `[0, 360)`.
pub fn bearing(a: GeoPoint, b: GeoPoint) -> Result<f64, SimError> {
    if a == b {
        return Err(SimError::CoincidentPoints);
    }
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlambda = (b.lon - a.lon).to_radians();
    let y = dlambda.sin() * phi2.cos();
    let x = phi1.cos() * phi2.sin() - phi1.sin() * phi2.cos() * dlambda.cos();
    let deg = (y.atan2(x).to_degrees() + 360.0) % 360.0;
    // -0.0 and values that round up to 360.0 both map into range.
    Ok(if deg >= 360.0 || deg == 0.0 { 0.0 } else { deg })
}

/// Compass bearing to the signed range `(-180, 180]`; 180 stays positive.
pub fn to_quad_angle(bearing: f64) -> f64 {
    if bearing <= 180.0 {
        bearing
    } else {
        bearing - 360.0
    }
}

/// Heading command to fly from `a` towards `b`, in `(-180, 180]`.
pub fn heading_to(a: GeoPoint, b: GeoPoint) -> Result<f64, SimError> {
    bearing(a, b).map(to_quad_angle)
}

/// Metres per degree of latitude on a spherical earth of radius 6 371 km.
const METRES_PER_DEG_LAT: f64 = 6_371_000.0 * std::f64::consts::PI / 180.0;

/// Local flat-earth offset: `dx` metres east and `dy` metres south of `origin`.
pub fn offset_metres(origin: GeoPoint, dx: f64, dy: f64) -> GeoPoint {
    let lat = origin.lat - dy / METRES_PER_DEG_LAT;
    let lon = origin.lon + dx / (METRES_PER_DEG_LAT * origin.lat.to_radians().cos().max(1e-9));
    GeoPoint::new(lat, lon)
}
