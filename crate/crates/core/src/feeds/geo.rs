//! Great-circle geometry on a spherical Earth.

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const METRES_PER_NM: f64 = 1852.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    fn to_vec(self) -> [f64; 3] {
        let (la, lo) = (self.lat.to_radians(), self.lon.to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    }

    fn from_vec(v: [f64; 3]) -> Self {
        let lat = v[2].atan2((v[0] * v[0] + v[1] * v[1]).sqrt());
        let lon = v[1].atan2(v[0]);
        Self::new(lat.to_degrees(), lon.to_degrees())
    }
}

/// Central angle between two points, in radians.
pub fn central_angle(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * h.sqrt().min(1.0).asin()
}

pub fn distance_m(a: LatLon, b: LatLon) -> f64 {
    central_angle(a, b) * EARTH_RADIUS_M
}

/// The point a fraction `f` of the way along the great circle from `a` to `b`.
pub fn interpolate(a: LatLon, b: LatLon, f: f64) -> LatLon {
    let d = central_angle(a, b);
    if d < 1e-12 {
        return a;
    }
    let (va, vb) = (a.to_vec(), b.to_vec());
    let wa = ((1.0 - f) * d).sin() / d.sin();
    let wb = (f * d).sin() / d.sin();
    LatLon::from_vec([
        wa * va[0] + wb * vb[0],
        wa * va[1] + wb * vb[1],
        wa * va[2] + wb * vb[2],
    ])
}

/// Initial course from `a` towards `b`, in degrees within [0, 360).
pub fn initial_bearing(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    y.atan2(x).to_degrees().rem_euclid(360.0)
}

/// A polyline of great-circle legs traversed at constant speed.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    points: Vec<LatLon>,
    cumulative: Vec<f64>,
}

impl Track {
    pub fn new(points: Vec<LatLon>) -> Self {
        let mut cumulative = vec![0.0];
        for w in points.windows(2) {
            let last = *cumulative.last().expect("non-empty");
            cumulative.push(last + distance_m(w[0], w[1]));
        }
        Self { points, cumulative }
    }

    pub fn length_m(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Position and course after covering fraction `f` of the length.
    pub fn at(&self, f: f64) -> (LatLon, f64) {
        let f = f.clamp(0.0, 1.0);
        if self.points.len() < 2 || self.length_m() == 0.0 {
            return (self.points[0], 0.0);
        }
        let target = f * self.length_m();
        let leg = self
            .cumulative
            .windows(2)
            .position(|w| target <= w[1])
            .unwrap_or(self.points.len() - 2);
        let (start, end) = (self.points[leg], self.points[leg + 1]);
        let leg_len = self.cumulative[leg + 1] - self.cumulative[leg];
        let local = if leg_len > 0.0 {
            (target - self.cumulative[leg]) / leg_len
        } else {
            0.0
        };
        let here = interpolate(start, end, local);
        let course = if local < 1.0 {
            initial_bearing(here, end)
        } else {
            (initial_bearing(end, start) + 180.0).rem_euclid(360.0)
        };
        (here, course)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_distance() {
        // Stavanger to Aberdeen is about 500 km.
        let d = distance_m(LatLon::new(58.8767, 5.6378), LatLon::new(57.2019, -2.1978));
        assert!((d - 500_000.0).abs() < 20_000.0, "{d}");
    }

    #[test]
    fn interpolation_endpoints_and_bearing() {
        let a = LatLon::new(58.8767, 5.6378);
        let b = LatLon::new(57.2019, -2.1978);
        let start = interpolate(a, b, 0.0);
        let end = interpolate(a, b, 1.0);
        assert!((start.lat - a.lat).abs() < 1e-9 && (start.lon - a.lon).abs() < 1e-9);
        assert!((end.lat - b.lat).abs() < 1e-9 && (end.lon - b.lon).abs() < 1e-9);
        let brg = initial_bearing(a, b);
        assert!((240.0..260.0).contains(&brg), "{brg}");
    }

    #[test]
    fn track_fraction_splits_length() {
        let t = Track::new(vec![
            LatLon::new(0.0, 0.0),
            LatLon::new(0.0, 1.0),
            LatLon::new(0.0, 3.0),
        ]);
        let (p, course) = t.at(0.5);
        assert!((p.lon - 1.5).abs() < 1e-9, "{p:?}");
        assert!((course - 90.0).abs() < 1e-6);
    }
}
