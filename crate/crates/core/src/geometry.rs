use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("path fraction must lie in [0, 1], got {0}")]
    FractionOutOfRange(f64),
    #[error("sink path needs at least 2 waypoints, got {0}")]
    TooFewWaypoints(usize),
    #[error("waypoint ({x}, {y}) lies outside the {width} x {height} deployment area")]
    OutsideArea {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
}

/// A position in metres. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl From<[f64; 2]> for Point {
    fn from([x, y]: [f64; 2]) -> Self {
        Point { x, y }
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Axis-aligned deployment rectangle with its origin at (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Default for Area {
    fn default() -> Self {
        Self {
            width: 1000.0,
            height: 1000.0,
        }
    }
}

impl Area {
    pub fn contains(&self, p: &Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

/// Distance from `p` to the segment `a`-`b`, and the clamped projection
/// parameter along the segment.
pub fn segment_distance(p: &Point, a: &Point, b: &Point) -> (f64, f64) {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return (p.distance(a), 0.0);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    (p.distance(&a.lerp(b, t)), t)
}

/// Polyline the sink traverses once per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct SinkPath {
    waypoints: Vec<Point>,
}

impl TryFrom<Vec<Point>> for SinkPath {
    type Error = GeometryError;
    fn try_from(waypoints: Vec<Point>) -> Result<Self, Self::Error> {
        SinkPath::new(waypoints)
    }
}

impl From<SinkPath> for Vec<Point> {
    fn from(p: SinkPath) -> Self {
        p.waypoints
    }
}

impl SinkPath {
    pub fn new(waypoints: Vec<Point>) -> Result<Self, GeometryError> {
        if waypoints.len() < 2 {
            return Err(GeometryError::TooFewWaypoints(waypoints.len()));
        }
        Ok(Self { waypoints })
    }

    /// Horizontal mid-line across `area`.
    pub fn midline(area: &Area) -> Self {
        let y = area.height / 2.0;
        Self {
            waypoints: vec![Point::new(0.0, y), Point::new(area.width, y)],
        }
    }

    pub fn waypoints(&self) -> &[Point] {
        &self.waypoints
    }

    pub fn check_within(&self, area: &Area) -> Result<(), GeometryError> {
        match self.waypoints.iter().find(|p| !area.contains(p)) {
            Some(p) => Err(GeometryError::OutsideArea {
                x: p.x,
                y: p.y,
                width: area.width,
                height: area.height,
            }),
            None => Ok(()),
        }
    }

    pub fn length(&self) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| w[0].distance(&w[1]))
            .sum()
    }

    /// Arc-length parameterised sink position, `t` in [0, 1].
    pub fn position(&self, t: f64) -> Result<Point, GeometryError> {
        if !(0.0..=1.0).contains(&t) {
            return Err(GeometryError::FractionOutOfRange(t));
        }
        let last = *self.waypoints.last().unwrap();
        if t == 1.0 {
            return Ok(last);
        }
        let mut remaining = t * self.length();
        for w in self.waypoints.windows(2) {
            let seg = w[0].distance(&w[1]);
            if remaining <= seg && seg > 0.0 {
                return Ok(w[0].lerp(&w[1], remaining / seg));
            }
            remaining -= seg;
        }
        Ok(last)
    }

    /// Shortest distance from `p` to the path.
    pub fn distance_to(&self, p: &Point) -> f64 {
        self.waypoints
            .windows(2)
            .map(|w| segment_distance(p, &w[0], &w[1]).0)
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn midline() -> SinkPath {
        SinkPath::new(vec![Point::new(0.0, 500.0), Point::new(1000.0, 500.0)]).unwrap()
    }

    #[test]
    fn position_endpoints_and_interior() {
        let path = midline();
        assert_eq!(path.position(0.0).unwrap(), Point::new(0.0, 500.0));
        assert_eq!(path.position(1.0).unwrap(), Point::new(1000.0, 500.0));
        assert_eq!(path.position(0.25).unwrap(), Point::new(250.0, 500.0));
        assert_eq!(
            path.position(1.5),
            Err(GeometryError::FractionOutOfRange(1.5))
        );
        assert_eq!(
            path.position(-0.1),
            Err(GeometryError::FractionOutOfRange(-0.1))
        );
    }

    #[test]
    fn position_on_bent_path_uses_arc_length() {
        let path = SinkPath::new(vec![
            Point::new(0.0, 0.0),
            Point::new(100.0, 0.0),
            Point::new(100.0, 300.0),
        ])
        .unwrap();
        let p = path.position(0.5).unwrap();
        assert!((p.x - 100.0).abs() < 1e-12 && (p.y - 100.0).abs() < 1e-12);
    }

    #[test]
    fn distance_to_path() {
        let path = midline();
        assert_eq!(path.distance_to(&Point::new(500.0, 480.0)), 20.0);
        assert_eq!(path.distance_to(&Point::new(500.0, 300.0)), 200.0);
        // past the segment end the nearest point is the endpoint
        assert_eq!(path.distance_to(&Point::new(1030.0, 540.0)), 50.0);
    }

    #[test]
    fn waypoint_validation() {
        assert_eq!(
            SinkPath::new(vec![Point::new(0.0, 0.0)]),
            Err(GeometryError::TooFewWaypoints(1))
        );
        let area = Area::default();
        assert!(midline().check_within(&area).is_ok());
        let off = SinkPath::new(vec![Point::new(0.0, 0.0), Point::new(1200.0, 0.0)]).unwrap();
        assert!(off.check_within(&area).is_err());
    }

    #[test]
    fn path_serializes_as_nested_arrays() {
        let json = serde_json::to_string(&midline()).unwrap();
        assert_eq!(json, "[[0.0,500.0],[1000.0,500.0]]");
        let back: SinkPath = serde_json::from_str(&json).unwrap();
        assert_eq!(back, midline());
        assert!(serde_json::from_str::<SinkPath>("[[0,0]]").is_err());
    }
}
