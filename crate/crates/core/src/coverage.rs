//! Which servers cover a point.

use crate::entities::EdgeServer;
use crate::geo::{GeoConstants, GeoPoint};

/// Servers sorted by latitude so a query only examines the latitude band
/// that can possibly reach the point: a great-circle distance of `r` never
/// spans more than `r / R` radians of latitude.
#[derive(Debug, Clone)]
pub struct CoverageIndex<'a> {
    servers: &'a [EdgeServer],
    by_lat: Vec<(f64, u32)>,
    band_deg: f64,
    geo: GeoConstants,
}

impl<'a> CoverageIndex<'a> {
    pub fn new(servers: &'a [EdgeServer], geo: GeoConstants) -> Self {
        let max_radius = servers.iter().map(|s| s.radius_m).fold(0.0, f64::max);
        let mut by_lat: Vec<(f64, u32)> = servers
            .iter()
            .enumerate()
            .map(|(i, s)| (s.pos.lat, i as u32))
            .collect();
        by_lat.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        CoverageIndex {
            servers,
            by_lat,
            band_deg: (max_radius / geo.earth_radius_m).to_degrees() * (1.0 + 1e-9) + 1e-12,
            geo,
        }
    }

    pub fn servers(&self) -> &'a [EdgeServer] {
        self.servers
    }

    pub fn covers(&self, server: &EdgeServer, p: GeoPoint) -> bool {
        self.geo.haversine(p, server.pos) <= server.radius_m
    }

    /// Positions (into the server slice) of all servers covering `p`, ascending.
    pub fn covering(&self, p: GeoPoint) -> Vec<usize> {
        let lo = self
            .by_lat
            .partition_point(|(lat, _)| *lat < p.lat - self.band_deg);
        let hi = self
            .by_lat
            .partition_point(|(lat, _)| *lat <= p.lat + self.band_deg);
        let mut hits: Vec<usize> = self.by_lat[lo..hi]
            .iter()
            .map(|&(_, i)| i as usize)
            .filter(|&i| self.covers(&self.servers[i], p))
            .collect();
        hits.sort_unstable();
        hits
    }

    pub fn count(&self, p: GeoPoint) -> usize {
        self.covering(p).len()
    }
}
