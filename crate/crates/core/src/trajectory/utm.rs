//! WGS84 → UTM via the Krüger n-series (sixth order), accurate to well under
//! a millimetre inside a zone.

use serde::{Deserialize, Serialize};

use super::TrajectoryError;

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
pub const UTM_K0: f64 = 0.9996;
pub const FALSE_EASTING: f64 = 500_000.0;
pub const FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
pub const MAX_ABS_LAT: f64 = 84.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UtmZone {
    pub number: u8,
    pub north: bool,
}

impl UtmZone {
    pub fn new(number: u8, north: bool) -> Result<Self, TrajectoryError> {
        if !(1..=60).contains(&number) {
            return Err(TrajectoryError::BadZone(number));
        }
        Ok(Self { number, north })
    }

    /// Longitude of the zone's central meridian, degrees.
    pub fn central_meridian(&self) -> f64 {
        self.number as f64 * 6.0 - 183.0
    }
}

impl std::fmt::Display for UtmZone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.number, if self.north { 'N' } else { 'S' })
    }
}

impl std::str::FromStr for UtmZone {
    type Err = TrajectoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (digits, hemi) = s.split_at(s.len().saturating_sub(1));
        let north = match hemi {
            "N" | "n" => true,
            "S" | "s" => false,
            _ => return Err(TrajectoryError::BadZoneText(s.to_string())),
        };
        let number = digits
            .parse()
            .map_err(|_| TrajectoryError::BadZoneText(s.to_string()))?;
        Self::new(number, north)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtmPoint {
    pub easting: f64,
    pub northing: f64,
    pub zone: UtmZone,
}

/// Standard zone for a location, including the Norway and Svalbard exceptions.
pub fn zone_for(p: GeoPoint) -> Result<UtmZone, TrajectoryError> {
    check_lat(p.lat)?;
    let lon = ((p.lon + 180.0).rem_euclid(360.0)) - 180.0;
    let mut number = (((lon + 180.0) / 6.0).floor() as i32 + 1).clamp(1, 60) as u8;
    if (56.0..64.0).contains(&p.lat) && (3.0..12.0).contains(&lon) {
        number = 32;
    }
    if (72.0..=84.0).contains(&p.lat) {
        number = match lon {
            l if (0.0..9.0).contains(&l) => 31,
            l if (9.0..21.0).contains(&l) => 33,
            l if (21.0..33.0).contains(&l) => 35,
            l if (33.0..42.0).contains(&l) => 37,
            _ => number,
        };
    }
    UtmZone::new(number, p.lat >= 0.0)
}

fn check_lat(lat: f64) -> Result<(), TrajectoryError> {
    if !lat.is_finite() || lat.abs() > MAX_ABS_LAT {
        return Err(TrajectoryError::LatitudeOutOfRange(lat));
    }
    Ok(())
}

/// Third flattening and the rectifying-radius scale `A` of the ellipsoid.
fn series_constants() -> (f64, f64, [f64; 6]) {
    let n = WGS84_F / (2.0 - WGS84_F);
    let (n2, n3) = (n * n, n * n * n);
    let (n4, n5, n6) = (n3 * n, n3 * n2, n3 * n3);
    let a = WGS84_A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
    let alpha = [
        n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0
            + 7891.0 * n6 / 37800.0,
        13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0
            - 1_983_433.0 * n6 / 1_935_360.0,
        61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0
            + 167_603.0 * n6 / 181_440.0,
        49561.0 * n4 / 161_280.0 - 179.0 * n5 / 168.0 + 6_601_661.0 * n6 / 7_257_600.0,
        34729.0 * n5 / 80640.0 - 3_418_889.0 * n6 / 1_995_840.0,
        212_378_941.0 * n6 / 319_334_400.0,
    ];
    (n, a, alpha)
}

/// Projects into the standard zone for `p`.
pub fn latlon_to_utm(p: GeoPoint) -> Result<UtmPoint, TrajectoryError> {
    latlon_to_utm_in_zone(p, zone_for(p)?)
}

/// Projects into a caller-chosen zone (e.g. to keep a track that straddles a
/// zone boundary in one planar frame). The hemisphere follows the latitude.
pub fn latlon_to_utm_in_zone(p: GeoPoint, zone: UtmZone) -> Result<UtmPoint, TrajectoryError> {
    check_lat(p.lat)?;
    if !p.lon.is_finite() {
        return Err(TrajectoryError::NonFinite);
    }
    let zone = UtmZone::new(zone.number, p.lat >= 0.0)?;
    let (n, a, alpha) = series_constants();
    let e = 2.0 * n.sqrt() / (1.0 + n);

    let phi = p.lat.to_radians();
    let mut dlon = p.lon - zone.central_meridian();
    dlon = (dlon + 180.0).rem_euclid(360.0) - 180.0;
    let lam = dlon.to_radians();

    let sin_phi = phi.sin();
    let t = (sin_phi.atanh() - e * (e * sin_phi).atanh()).sinh();
    let xi_p = t.atan2(lam.cos());
    let eta_p = (lam.sin() / (1.0 + t * t).sqrt()).atanh();

    let mut xi = xi_p;
    let mut eta = eta_p;
    for (j, aj) in alpha.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi += aj * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += aj * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    let easting = FALSE_EASTING + UTM_K0 * a * eta;
    let mut northing = UTM_K0 * a * xi;
    if !zone.north {
        northing += FALSE_NORTHING_SOUTH;
    }
    Ok(UtmPoint {
        easting,
        northing,
        zone,
    })
}
