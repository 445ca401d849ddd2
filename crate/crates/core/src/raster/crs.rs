//! The coordinate reference systems the toolkit understands: WGS84
//! geographic (EPSG:4326), spherical web mercator (EPSG:3857) and the UTM
//! zones on WGS84 (EPSG:326zz north, 327zz south).
//!
//! UTM uses the Krüger series carried to sixth order in the third
//! flattening, accurate to a few nanometres within the zone.

use crate::error::{Error, Result};

pub const WGS84_A: f64 = 6_378_137.0;
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;
const UTM_K0: f64 = 0.9996;
const UTM_FALSE_EASTING: f64 = 500_000.0;
const UTM_FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

/// Half the web-mercator world width in metres.
pub const MERCATOR_HALF_WORLD: f64 = std::f64::consts::PI * WGS84_A;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Crs {
    Geographic,
    WebMercator,
    Utm { zone: u8, north: bool },
}

impl Crs {
    pub fn from_epsg(code: u32) -> Result<Crs> {
        match code {
            4326 => Ok(Crs::Geographic),
            3857 => Ok(Crs::WebMercator),
            32601..=32660 => Ok(Crs::Utm {
                zone: (code - 32600) as u8,
                north: true,
            }),
            32701..=32760 => Ok(Crs::Utm {
                zone: (code - 32700) as u8,
                north: false,
            }),
            other => Err(Error::Config(format!(
                "unsupported EPSG code {other} (expected 4326, 3857, 326zz or 327zz)"
            ))),
        }
    }

    pub fn epsg(&self) -> u32 {
        match *self {
            Crs::Geographic => 4326,
            Crs::WebMercator => 3857,
            Crs::Utm { zone, north: true } => 32600 + zone as u32,
            Crs::Utm { zone, north: false } => 32700 + zone as u32,
        }
    }

    /// UTM zone containing the given point (no Norway/Svalbard exceptions).
    pub fn utm_for(lon: f64, lat: f64) -> Crs {
        let zone = (((lon + 180.0) / 6.0).floor() as i64).clamp(0, 59) as u8 + 1;
        Crs::Utm {
            zone,
            north: lat >= 0.0,
        }
    }

    /// Whether coordinates are true ground metres (suitable for areas and
    /// distances).
    pub fn is_metric(&self) -> bool {
        matches!(self, Crs::Utm { .. })
    }

    pub fn to_lonlat(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            Crs::Geographic => [x, y],
            Crs::WebMercator => mercator_to_lonlat(x, y),
            Crs::Utm { zone, north } => {
                let northing = if north {
                    y
                } else {
                    y - UTM_FALSE_NORTHING_SOUTH
                };
                let cm = central_meridian(zone);
                let (lon, lat) = TM.inverse(x - UTM_FALSE_EASTING, northing);
                [lon + cm, lat]
            }
        }
    }

    pub fn from_lonlat(&self, lon: f64, lat: f64) -> [f64; 2] {
        match *self {
            Crs::Geographic => [lon, lat],
            Crs::WebMercator => lonlat_to_mercator(lon, lat),
            Crs::Utm { zone, north } => {
                let cm = central_meridian(zone);
                let (e, n) = TM.forward(lon - cm, lat);
                let n = if north {
                    n
                } else {
                    n + UTM_FALSE_NORTHING_SOUTH
                };
                [e + UTM_FALSE_EASTING, n]
            }
        }
    }
}

fn central_meridian(zone: u8) -> f64 {
    zone as f64 * 6.0 - 183.0
}

pub fn lonlat_to_mercator(lon: f64, lat: f64) -> [f64; 2] {
    let x = WGS84_A * lon.to_radians();
    let phi = lat.to_radians();
    let y = WGS84_A * (phi.tan() + 1.0 / phi.cos()).ln();
    [x, y]
}

pub fn mercator_to_lonlat(x: f64, y: f64) -> [f64; 2] {
    let lon = (x / WGS84_A).to_degrees();
    let lat = (y / WGS84_A).sinh().atan().to_degrees();
    [lon, lat]
}

/// Transverse mercator on the WGS84 ellipsoid with UTM scale.
struct TransverseMercator {
    e: f64,
    e2m: f64,
    scaled_rect_radius: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
}

static TM: std::sync::LazyLock<TransverseMercator> =
    std::sync::LazyLock::new(|| TransverseMercator::new(WGS84_A, WGS84_F, UTM_K0));

impl TransverseMercator {
    fn new(a: f64, f: f64, k0: f64) -> Self {
        let n = f / (2.0 - f);
        let n2 = n * n;
        let n3 = n2 * n;
        let n4 = n3 * n;
        let n5 = n4 * n;
        let n6 = n5 * n;
        let e2 = f * (2.0 - f);
        let rect = a / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0);
        let alpha = [
            n / 2.0 - 2.0 / 3.0 * n2 + 5.0 / 16.0 * n3 + 41.0 / 180.0 * n4 - 127.0 / 288.0 * n5
                + 7891.0 / 37800.0 * n6,
            13.0 / 48.0 * n2 - 3.0 / 5.0 * n3 + 557.0 / 1440.0 * n4 + 281.0 / 630.0 * n5
                - 1983433.0 / 1935360.0 * n6,
            61.0 / 240.0 * n3 - 103.0 / 140.0 * n4 + 15061.0 / 26880.0 * n5
                + 167603.0 / 181440.0 * n6,
            49561.0 / 161280.0 * n4 - 179.0 / 168.0 * n5 + 6601661.0 / 7257600.0 * n6,
            34729.0 / 80640.0 * n5 - 3418889.0 / 1995840.0 * n6,
            212378941.0 / 319334400.0 * n6,
        ];
        let beta = [
            n / 2.0 - 2.0 / 3.0 * n2 + 37.0 / 96.0 * n3 - 1.0 / 360.0 * n4 - 81.0 / 512.0 * n5
                + 96199.0 / 604800.0 * n6,
            1.0 / 48.0 * n2 + 1.0 / 15.0 * n3 - 437.0 / 1440.0 * n4 + 46.0 / 105.0 * n5
                - 1118711.0 / 3870720.0 * n6,
            17.0 / 480.0 * n3 - 37.0 / 840.0 * n4 - 209.0 / 4480.0 * n5 + 5569.0 / 90720.0 * n6,
            4397.0 / 161280.0 * n4 - 11.0 / 504.0 * n5 - 830251.0 / 7257600.0 * n6,
            4583.0 / 161280.0 * n5 - 108847.0 / 3991680.0 * n6,
            20648693.0 / 638668800.0 * n6,
        ];
        TransverseMercator {
            e: e2.sqrt(),
            e2m: 1.0 - e2,
            scaled_rect_radius: k0 * rect,
            alpha,
            beta,
        }
    }

    /// tan of the conformal latitude from tan of the geodetic latitude.
    fn conformal_tan(&self, tau: f64) -> f64 {
        let tau1 = tau.hypot(1.0);
        let sig = (self.e * (self.e * tau / tau1).atanh()).sinh();
        tau * sig.hypot(1.0) - sig * tau1
    }

    fn geodetic_tan(&self, tau_prime: f64) -> f64 {
        let mut tau = tau_prime / self.e2m;
        for _ in 0..8 {
            let tp = self.conformal_tan(tau);
            let dtau = (tau_prime - tp) * (1.0 + self.e2m * tau * tau)
                / (self.e2m * tau.hypot(1.0) * tp.hypot(1.0));
            tau += dtau;
            if dtau.abs() <= 1e-15 * tau.abs().max(1.0) {
                break;
            }
        }
        tau
    }

    /// `dlon` is longitude relative to the central meridian, degrees.
    fn forward(&self, dlon: f64, lat: f64) -> (f64, f64) {
        let lam = dlon.to_radians();
        let phi = lat.to_radians();
        let tau_prime = self.conformal_tan(phi.tan());
        let xi_p = tau_prime.atan2(lam.cos());
        let eta_p = (lam.sin() / tau_prime.hypot(lam.cos())).asinh();
        let mut xi = xi_p;
        let mut eta = eta_p;
        for (j, a) in self.alpha.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
            eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
        }
        (self.scaled_rect_radius * eta, self.scaled_rect_radius * xi)
    }

    fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        let xi = y / self.scaled_rect_radius;
        let eta = x / self.scaled_rect_radius;
        let mut xi_p = xi;
        let mut eta_p = eta;
        for (j, b) in self.beta.iter().enumerate() {
            let k = 2.0 * (j + 1) as f64;
            xi_p -= b * (k * xi).sin() * (k * eta).cosh();
            eta_p -= b * (k * xi).cos() * (k * eta).sinh();
        }
        let tau_prime = xi_p.sin() / eta_p.sinh().hypot(xi_p.cos());
        let lam = eta_p.sinh().atan2(xi_p.cos());
        let tau = self.geodetic_tan(tau_prime);
        (lam.to_degrees(), tau.atan().to_degrees())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsg_round_trip() {
        for code in [4326, 3857, 32643, 32701, 32660] {
            assert_eq!(Crs::from_epsg(code).unwrap().epsg(), code);
        }
        assert!(Crs::from_epsg(2154).is_err());
    }

    #[test]
    fn utm_reference_points() {
        // 33.3N 44.4E -> 38N 444140.54 3684706.36 (published reference values)
        let utm = Crs::from_epsg(32638).unwrap();
        let [e, n] = utm.from_lonlat(44.4, 33.3);
        assert!((e - 444_140.54).abs() < 0.01, "{e}");
        assert!((n - 3_684_706.36).abs() < 0.01, "{n}");
        // equator on the central meridian
        let [e, n] = Crs::from_epsg(32631).unwrap().from_lonlat(3.0, 0.0);
        assert!((e - 500_000.0).abs() < 1e-9 && n.abs() < 1e-9);
    }

    #[test]
    fn utm_round_trip_is_nanometric() {
        let utm = Crs::from_epsg(32643).unwrap();
        for &(lon, lat) in &[(72.4587, 22.9942), (72.5716, 23.0835), (69.1, 0.5), (77.9, 60.0)] {
            let [e, n] = utm.from_lonlat(lon, lat);
            let [lon2, lat2] = utm.to_lonlat(e, n);
            let [e2, n2] = utm.from_lonlat(lon2, lat2);
            assert!((e - e2).abs() < 1e-6 && (n - n2).abs() < 1e-6);
            assert!((lon - lon2).abs() < 1e-11 && (lat - lat2).abs() < 1e-11);
        }
    }

    #[test]
    fn southern_hemisphere_offset() {
        let utm = Crs::from_epsg(32733).unwrap();
        let [_, n] = utm.from_lonlat(15.0, -10.0);
        assert!(n > 8_000_000.0 && n < 10_000_000.0);
        let [lon, lat] = utm.to_lonlat(500_000.0, n);
        assert!((lon - 15.0).abs() < 1e-10 && (lat + 10.0).abs() < 1e-10);
    }

    #[test]
    fn mercator_round_trip() {
        let [x, y] = lonlat_to_mercator(72.5, 23.0);
        let [lon, lat] = mercator_to_lonlat(x, y);
        assert!((lon - 72.5).abs() < 1e-12 && (lat - 23.0).abs() < 1e-12);
        assert!((lonlat_to_mercator(180.0, 0.0)[0] - MERCATOR_HALF_WORLD).abs() < 1e-6);
    }
}
