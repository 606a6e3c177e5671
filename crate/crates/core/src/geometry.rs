//! Planar bistatic geometry.
//!
//! The forward functions map a transmitter, a scatterer and a receiver pose to
//! the measured quantities; the inverse helpers place particles on the
//! bistatic ellipse along a candidate arrival direction.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Denominators below this are treated as a degenerate ellipse-ray hit.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// A point in the 2-D world, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const ORIGIN: Position = Position { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Position) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Position) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotated(self, angle: f64) -> Position {
        let (s, c) = angle.sin_cos();
        Position::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Position {
    fn add_assign(&mut self, rhs: Position) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Position {
    type Output = Position;
    fn sub(self, rhs: Position) -> Position {
        Position::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Position {
    type Output = Position;
    fn mul(self, rhs: f64) -> Position {
        Position::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Position {
    type Output = Position;
    fn neg(self) -> Position {
        Position::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Position {
    fn from(v: [f64; 2]) -> Self {
        Position::new(v[0], v[1])
    }
}

/// Receiver position plus the unit vector its antenna array faces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Position,
    orientation: Position,
}

impl Pose {
    /// Builds a pose, normalizing `orientation`.
    pub fn new(position: Position, orientation: Position) -> Result<Self> {
        let n = orientation.norm();
        if !(n.is_finite() && n > 0.0) || !position.is_finite() {
            return Err(Error::InvalidInput(format!(
                "pose needs a finite position and non-zero orientation, got {position:?} / {orientation:?}"
            )));
        }
        Ok(Self { position, orientation: orientation * (1.0 / n) })
    }

    pub fn orientation(&self) -> Position {
        self.orientation
    }
}

/// Bistatic relative distance: excess path length of tx -> scat -> rx over the
/// direct path tx -> rx.
pub fn relative_distance(tx: Position, scat: Position, rx: Position) -> f64 {
    let excess = scat.distance(tx) + rx.distance(scat) - tx.distance(rx);
    // Rounding can produce -1e-15 for collinear points.
    excess.max(0.0)
}

/// Angle between the receiver orientation and the direction to `target`, in
/// `[0, pi]`.
pub fn aoa(target: Position, rx: &Pose) -> Result<f64> {
    let v = target - rx.position;
    let n = v.norm();
    if n == 0.0 {
        return Err(Error::UndefinedAoa);
    }
    // atan2 form of arccos(v·q / |v|): accurate near 0 and π.
    let q = rx.orientation;
    Ok((v.x * q.y - v.y * q.x).abs().atan2(v.dot(q)))
}

/// The two unit directions compatible with an AOA of `theta`: the orientation
/// rotated by `+theta` and by `-theta`.
pub fn ambiguous_directions(rx: &Pose, theta: f64) -> (Position, Position) {
    let q = rx.orientation;
    (q.rotated(theta), q.rotated(-theta))
}

/// Which of the two ambiguous directions to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// Orientation rotated counter-clockwise.
    Positive,
    /// Orientation rotated clockwise.
    Negative,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Positive => 1.0,
            Side::Negative => -1.0,
        }
    }

    /// Alternates sides by index so a set of `2n` particles splits evenly.
    pub fn alternating(index: usize) -> Side {
        if index.is_multiple_of(2) {
            Side::Positive
        } else {
            Side::Negative
        }
    }

    pub fn direction(self, rx: &Pose, theta: f64) -> Position {
        rx.orientation.rotated(self.sign() * theta)
    }
}

/// Distance `r` along the ray `rx + r u` at which the bistatic relative
/// distance equals `d`.
///
/// With `w = rx - tx` and `s = d + |w|` the point must satisfy
/// `|w + r u| + r = s`, which is linear in `r` after squaring.
pub fn ray_ellipse_range(tx: Position, rx: &Pose, d: f64, u: Position) -> Result<f64> {
    if !(d >= 0.0) {
        return Err(Error::InvalidInput(format!("relative distance must be >= 0, got {d}")));
    }
    let w = rx.position - tx;
    let wn = w.norm();
    let s = d + wn;
    let denom = 2.0 * (s + u.dot(w));
    if denom.abs() < DEGENERACY_TOL {
        return Err(Error::DegenerateEllipseRay);
    }
    // s² - |w|², factored to avoid cancellation when d is small.
    let r = d * (d + 2.0 * wn) / denom;
    Ok(r.max(0.0))
}

/// Point at `range` from the receiver along the `side` direction implied by a
/// direct-path AOA of `theta0`.
pub fn position_from_direct(rx: &Pose, theta0: f64, range: f64, side: Side) -> Position {
    rx.position + side.direction(rx, theta0) * range
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pose(x: f64, y: f64, ox: f64, oy: f64) -> Pose {
        Pose::new(Position::new(x, y), Position::new(ox, oy)).unwrap()
    }

    #[test]
    fn relative_distance_examples() {
        let tx = Position::new(0.0, 30.0);
        let rx = Position::new(0.0, -20.0);
        let scat = Position::new(40.0, 10.0);
        // |scat - tx| = sqrt(1600 + 400), |rx - scat| = sqrt(1600 + 900) = 50, |tx - rx| = 50
        let expected = 2000f64.sqrt() + 50.0 - 50.0;
        assert_abs_diff_eq!(relative_distance(tx, scat, rx), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(relative_distance(tx, scat, rx), 44.72136, epsilon = 1e-5);

        let mid = Position::new(0.0, 5.0);
        assert_abs_diff_eq!(relative_distance(tx, mid, rx), 0.0, epsilon = 1e-12);
        assert_eq!(relative_distance(tx, rx, rx), 0.0);
    }

    #[test]
    fn aoa_cardinal_directions() {
        let rx = pose(1.0, 2.0, 0.0, 1.0);
        assert_abs_diff_eq!(aoa(Position::new(1.0, 7.0), &rx).unwrap(), 0.0);
        assert_abs_diff_eq!(aoa(Position::new(1.0, -7.0), &rx).unwrap(), PI);
        assert_abs_diff_eq!(aoa(Position::new(4.0, 2.0), &rx).unwrap(), FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(aoa(rx.position, &rx), Err(Error::UndefinedAoa));
    }

    #[test]
    fn pose_normalizes_and_rejects_zero() {
        let p = pose(0.0, 0.0, 3.0, 4.0);
        assert_abs_diff_eq!(p.orientation().norm(), 1.0, epsilon = 1e-12);
        assert!(Pose::new(Position::ORIGIN, Position::ORIGIN).is_err());
    }

    #[test]
    fn ambiguous_direction_examples() {
        let rx = pose(0.0, 0.0, 1.0, 0.0);
        let (a, b) = ambiguous_directions(&rx, 0.0);
        assert_eq!(a, rx.orientation());
        assert_eq!(b, rx.orientation());

        let (a, b) = ambiguous_directions(&rx, PI);
        assert_abs_diff_eq!(a.x, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.x, -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.y, 0.0, epsilon = 1e-15);

        let (a, b) = ambiguous_directions(&rx, FRAC_PI_2);
        assert_abs_diff_eq!(a.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.y, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn ray_ellipse_examples() {
        let rx = pose(3.0, 4.0, 1.0, 0.0);
        let u = Position::new(0.6, 0.8);
        assert_abs_diff_eq!(ray_ellipse_range(rx.position, &rx, 7.0, u).unwrap(), 3.5);

        let tx = Position::new(0.0, 30.0);
        let rx = pose(0.0, -20.0, 1.0, 0.0);
        let d = relative_distance(tx, Position::new(40.0, 10.0), rx.position);
        let r = ray_ellipse_range(tx, &rx, d, Position::new(0.8, 0.6)).unwrap();
        assert_abs_diff_eq!(r, 50.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            relative_distance(tx, rx.position + Position::new(0.8, 0.6) * r, rx.position),
            d,
            epsilon = 1e-12
        );

        // d = 0 with the ray pointing straight at the transmitter.
        let toward = Position::new(0.0, 1.0);
        assert_eq!(ray_ellipse_range(tx, &rx, 0.0, toward), Err(Error::DegenerateEllipseRay));
        assert!(ray_ellipse_range(tx, &rx, -1.0, toward).is_err());
    }

    #[test]
    fn position_from_direct_examples() {
        let rx = pose(0.0, 0.0, 1.0, 0.0);
        assert_eq!(position_from_direct(&rx, 1.0, 0.0, Side::Negative), rx.position);
        let p = position_from_direct(&rx, 0.0, 5.0, Side::Positive);
        assert_abs_diff_eq!(p.x, 5.0);
        assert_abs_diff_eq!(p.y, 0.0);
        let p = position_from_direct(&rx, FRAC_PI_2, 3.0, Side::Positive);
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 3.0, epsilon = 1e-15);
    }

    fn coord() -> impl Strategy<Value = f64> {
        -100.0..100.0f64
    }

    proptest! {
        #[test]
        fn ray_inversion_recovers_scatterer(
            tx in (coord(), coord()), scat in (coord(), coord()), rx in (coord(), coord()),
            heading in 0.0..(2.0 * PI),
        ) {
            let tx = Position::new(tx.0, tx.1);
            let scat = Position::new(scat.0, scat.1);
            let rx = Pose::new(Position::new(rx.0, rx.1), Position::new(1.0, 0.0).rotated(heading)).unwrap();
            prop_assume!(scat.distance(rx.position) > 1e-3);
            let d = relative_distance(tx, scat, rx.position);
            let theta = aoa(scat, &rx).unwrap();
            let (a, b) = ambiguous_directions(&rx, theta);
            let truth_dir = (scat - rx.position) * (1.0 / scat.distance(rx.position));
            let u = if a.distance(truth_dir) <= b.distance(truth_dir) { a } else { b };
            let r = ray_ellipse_range(tx, &rx, d, u).unwrap();
            let back = rx.position + u * r;
            prop_assert!(back.distance(scat) < 1e-9, "recovered {back:?} vs {scat:?}");
        }

        #[test]
        fn aoa_scale_invariant(
            t in (coord(), coord()), rx in (coord(), coord()), heading in 0.0..(2.0 * PI), k in 0.01..100.0f64,
        ) {
            let rx = Pose::new(Position::new(rx.0, rx.1), Position::new(1.0, 0.0).rotated(heading)).unwrap();
            let t = Position::new(t.0, t.1);
            prop_assume!(t.distance(rx.position) > 1e-6);
            let scaled = rx.position + (t - rx.position) * k;
            prop_assert!((aoa(t, &rx).unwrap() - aoa(scaled, &rx).unwrap()).abs() < 1e-9);
        }

        #[test]
        fn relative_distance_nonnegative(
            a in (coord(), coord()), b in (coord(), coord()), c in (coord(), coord()),
        ) {
            let d = relative_distance(a.into_pos(), b.into_pos(), c.into_pos());
            prop_assert!(d >= 0.0);
        }
    }

    trait IntoPos {
        fn into_pos(self) -> Position;
    }
    impl IntoPos for (f64, f64) {
        fn into_pos(self) -> Position {
            Position::new(self.0, self.1)
        }
    }
}
