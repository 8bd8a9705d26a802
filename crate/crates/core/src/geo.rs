//! Great-circle distance and dead-reckoning extrapolation.

use serde::{Deserialize, Serialize};

/// Longitude/latitude pair in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub const fn new(lon: f64, lat: f64) -> Self {
        GeoPoint { lon, lat }
    }

    /// Strict constructor used by the parsers: rejects non-finite values and
    /// coordinates outside `[-180, 180] x [-90, 90]`.
    pub fn checked(lon: f64, lat: f64) -> Option<Self> {
        let ok = lon.is_finite()
            && lat.is_finite()
            && (-180.0..=180.0).contains(&lon)
            && (-90.0..=90.0).contains(&lat);
        ok.then_some(GeoPoint { lon, lat })
    }

    /// Wraps longitude into `[-180, 180]` and clamps latitude into `[-90, 90]`.
    pub fn normalized(self) -> Self {
        let lon = if (-180.0..=180.0).contains(&self.lon) {
            self.lon
        } else {
            (self.lon + 180.0).rem_euclid(360.0) - 180.0
        };
        GeoPoint {
            lon,
            lat: self.lat.clamp(-90.0, 90.0),
        }
    }
}

/// How a heading in degrees is turned into a displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BearingConvention {
    /// cos(heading) moves longitude and sin(heading) moves latitude, both at
    /// a flat 111,320 m per degree.
    #[default]
    EastReferenced,
    /// Compass bearing (0 = north, clockwise) with the longitude step widened
    /// by 1/cos(latitude).
    NorthReferenced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoConstants {
    pub earth_radius_m: f64,
    pub speed_of_light: f64,
    pub meters_per_degree: f64,
}

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const SPEED_OF_LIGHT: f64 = 3.0e8;
pub const METERS_PER_DEGREE: f64 = 111_320.0;

impl Default for GeoConstants {
    fn default() -> Self {
        GeoConstants {
            earth_radius_m: EARTH_RADIUS_M,
            speed_of_light: SPEED_OF_LIGHT,
            meters_per_degree: METERS_PER_DEGREE,
        }
    }
}

impl GeoConstants {
    pub fn haversine(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        haversine_with_radius(a, b, self.earth_radius_m)
    }

    pub fn extrapolate(
        &self,
        p: GeoPoint,
        direction_deg: f64,
        distance_m: f64,
        convention: BearingConvention,
    ) -> GeoPoint {
        let theta = direction_deg.to_radians();
        let step = distance_m / self.meters_per_degree;
        match convention {
            BearingConvention::EastReferenced => {
                GeoPoint::new(p.lon + step * theta.cos(), p.lat + step * theta.sin())
            }
            BearingConvention::NorthReferenced => {
                let cos_lat = p.lat.to_radians().cos().max(1e-12);
                GeoPoint::new(
                    p.lon + step * theta.sin() / cos_lat,
                    p.lat + step * theta.cos(),
                )
            }
        }
    }
}

/// Haversine great-circle distance in meters on a sphere of `radius_m`.
pub fn haversine_with_radius(a: GeoPoint, b: GeoPoint, radius_m: f64) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let hav = hav(dphi) + phi1.cos() * phi2.cos() * hav(dlambda);
    // rounding can push hav a hair past 1 for antipodal pairs
    2.0 * radius_m * hav.clamp(0.0, 1.0).sqrt().asin()
}

fn hav(x: f64) -> f64 {
    let s = (x / 2.0).sin();
    s * s
}

/// Haversine distance with the default 6,371 km radius.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    haversine_with_radius(a, b, EARTH_RADIUS_M)
}

/// Flat dead-reckoning step using the default constants and the
/// east-referenced convention (cos to longitude, sin to latitude).
pub fn extrapolate(p: GeoPoint, direction_deg: f64, distance_m: f64) -> GeoPoint {
    GeoConstants::default().extrapolate(p, direction_deg, distance_m, BearingConvention::EastReferenced)
}
