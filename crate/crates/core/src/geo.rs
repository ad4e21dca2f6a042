//! Planar geometry for matching and replay.
//!
//! Geographic positions are projected onto a local tangent plane with an
//! equirectangular projection about a fixed origin. At city scale the
//! distortion stays well below the GPS error budget, and the projection has a
//! closed-form inverse.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("at least two points are required, got {0}")]
    InsufficientPoints(usize),
    #[error("degenerate segment: both endpoints at ({x}, {y})")]
    DegenerateSegment { x: f64, y: f64 },
}

/// WGS84 position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !self.lat.is_finite() || !self.lon.is_finite() {
            return Err(GeoError::InvalidCoordinate(format!(
                "non-finite position ({}, {})",
                self.lat, self.lon
            )));
        }
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(GeoError::InvalidCoordinate(format!(
                "position ({}, {}) out of range",
                self.lat, self.lon
            )));
        }
        Ok(())
    }
}

/// Planar position in meters; `x` grows east, `y` grows north.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CartPoint {
    pub x: f64,
    pub y: f64,
}

impl CartPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &CartPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(&self, other: &CartPoint) -> CartPoint {
        CartPoint::new((self.x + other.x) / 2.0, (self.y + other.y) / 2.0)
    }

    /// Point at fraction `t` of the way from `self` to `other`.
    pub fn lerp(&self, other: &CartPoint, t: f64) -> CartPoint {
        CartPoint::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

/// Local equirectangular projection about `origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    origin: GeoPoint,
    earth_radius: f64,
    cos_lat: f64,
}

impl Projection {
    pub fn new(origin: GeoPoint) -> Result<Self, GeoError> {
        origin.validate()?;
        let cos_lat = origin.lat.to_radians().cos();
        // At the poles the east axis collapses.
        if cos_lat.abs() < 1e-12 {
            return Err(GeoError::InvalidCoordinate(format!(
                "projection origin latitude {} has no east axis",
                origin.lat
            )));
        }
        Ok(Self {
            origin,
            earth_radius: EARTH_RADIUS_M,
            cos_lat,
        })
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn earth_radius(&self) -> f64 {
        self.earth_radius
    }

    pub fn to_cartesian(&self, p: GeoPoint) -> Result<CartPoint, GeoError> {
        p.validate()?;
        let dlat = (p.lat - self.origin.lat).to_radians();
        let dlon = (p.lon - self.origin.lon).to_radians();
        Ok(CartPoint::new(
            self.earth_radius * dlon * self.cos_lat,
            self.earth_radius * dlat,
        ))
    }

    pub fn to_geographic(&self, c: CartPoint) -> Result<GeoPoint, GeoError> {
        if !c.is_finite() {
            return Err(GeoError::InvalidCoordinate(format!(
                "non-finite planar point ({}, {})",
                c.x, c.y
            )));
        }
        let lat = self.origin.lat + (c.y / self.earth_radius).to_degrees();
        let lon = self.origin.lon + (c.x / (self.earth_radius * self.cos_lat)).to_degrees();
        GeoPoint::new(lat, lon)
    }
}

/// Inserts the midpoint between every consecutive pair of points.
pub fn densify(points: &[CartPoint]) -> Result<Vec<CartPoint>, GeoError> {
    if points.len() < 2 {
        return Err(GeoError::InsufficientPoints(points.len()));
    }
    let mut out = Vec::with_capacity(points.len() * 2 - 1);
    out.push(points[0]);
    for pair in points.windows(2) {
        out.push(pair[0].midpoint(&pair[1]));
        out.push(pair[1]);
    }
    Ok(out)
}

/// Applies [`densify`] `passes` times. Zero passes returns the input unchanged.
pub fn densify_passes(points: &[CartPoint], passes: usize) -> Result<Vec<CartPoint>, GeoError> {
    if points.len() < 2 {
        return Err(GeoError::InsufficientPoints(points.len()));
    }
    let mut current = points.to_vec();
    for _ in 0..passes {
        current = densify(&current)?;
    }
    Ok(current)
}

/// Clamped orthogonal projection of a point onto a segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentProjection {
    /// Distance from the segment start to `foot`.
    pub offset: f64,
    pub foot: CartPoint,
    /// Distance from the projected point to `foot`.
    pub distance: f64,
}

pub fn project_onto_segment(
    p: CartPoint,
    a: CartPoint,
    b: CartPoint,
) -> Result<SegmentProjection, GeoError> {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len_sq = dx * dx + dy * dy;
    if len_sq == 0.0 {
        return Err(GeoError::DegenerateSegment { x: a.x, y: a.y });
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len_sq).clamp(0.0, 1.0);
    let foot = a.lerp(&b, t);
    Ok(SegmentProjection {
        offset: t * len_sq.sqrt(),
        foot,
        distance: p.distance(&foot),
    })
}

pub fn point_segment_distance(p: CartPoint, a: CartPoint, b: CartPoint) -> Result<f64, GeoError> {
    project_onto_segment(p, a, b).map(|proj| proj.distance)
}

/// Total length of a polyline.
pub fn polyline_length(points: &[CartPoint]) -> f64 {
    points.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

/// Projects `p` onto the closest segment of a polyline. The returned offset is
/// measured along the polyline from its first point. Zero-length pieces are
/// skipped; a polyline without any non-degenerate piece is an error.
pub fn project_onto_polyline(
    p: CartPoint,
    points: &[CartPoint],
) -> Result<SegmentProjection, GeoError> {
    if points.len() < 2 {
        return Err(GeoError::InsufficientPoints(points.len()));
    }
    let mut best: Option<SegmentProjection> = None;
    let mut walked = 0.0;
    for w in points.windows(2) {
        let piece = w[0].distance(&w[1]);
        if piece == 0.0 {
            continue;
        }
        let proj = project_onto_segment(p, w[0], w[1])?;
        if best.is_none_or(|b| proj.distance < b.distance) {
            best = Some(SegmentProjection {
                offset: walked + proj.offset,
                ..proj
            });
        }
        walked += piece;
    }
    best.ok_or(GeoError::DegenerateSegment {
        x: points[0].x,
        y: points[0].y,
    })
}
