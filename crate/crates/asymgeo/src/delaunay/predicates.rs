//! Exact orientation and in-circle tests on grid coordinates.
//!
//! Coordinates are `i64` multiples of [`GRID`]. Orientation always fits in
//! `i128`; in-circle is tried in checked `i128` and redone with big integers
//! when it would overflow.

use num_bigint::BigInt;

/// Grid spacing is 2⁻³⁰.
pub const GRID_BITS: u32 = 30;
pub const GRID: f64 = 1.0 / (1u64 << GRID_BITS) as f64;
/// Largest accepted input magnitude; keeps differences of scaffold
/// coordinates within 2⁵² grid steps.
pub const MAX_COORD: f64 = 65536.0;

pub type GridPt = [i64; 2];

pub fn snap(x: f64) -> i64 {
    libm::round(x * (1u64 << GRID_BITS) as f64) as i64
}

pub fn unsnap(g: i64) -> f64 {
    g as f64 * GRID
}

/// Sign of the signed area of `abc`: positive when counterclockwise.
pub fn orient(a: GridPt, b: GridPt, c: GridPt) -> i32 {
    let abx = (b[0] - a[0]) as i128;
    let aby = (b[1] - a[1]) as i128;
    let acx = (c[0] - a[0]) as i128;
    let acy = (c[1] - a[1]) as i128;
    (abx * acy - aby * acx).signum() as i32
}

/// Positive iff `d` lies strictly inside the circumcircle of the
/// counterclockwise triangle `abc`; zero when the four are cocircular.
pub fn in_circle(a: GridPt, b: GridPt, c: GridPt, d: GridPt) -> i32 {
    in_circle_i128(a, b, c, d).unwrap_or_else(|| in_circle_big(a, b, c, d))
}

fn in_circle_i128(a: GridPt, b: GridPt, c: GridPt, d: GridPt) -> Option<i32> {
    let rows = [a, b, c].map(|p| ((p[0] - d[0]) as i128, (p[1] - d[1]) as i128));
    let lift = |(x, y): (i128, i128)| x.checked_mul(x)?.checked_add(y.checked_mul(y)?);
    let cross = |(x1, y1): (i128, i128), (x2, y2): (i128, i128)| {
        x1.checked_mul(y2)?.checked_sub(x2.checked_mul(y1)?)
    };
    let [ra, rb, rc] = rows;
    let t1 = lift(ra)?.checked_mul(cross(rb, rc)?)?;
    let t2 = lift(rb)?.checked_mul(cross(rc, ra)?)?;
    let t3 = lift(rc)?.checked_mul(cross(ra, rb)?)?;
    Some(t1.checked_add(t2)?.checked_add(t3)?.signum() as i32)
}

fn in_circle_big(a: GridPt, b: GridPt, c: GridPt, d: GridPt) -> i32 {
    let rows = [a, b, c].map(|p| (BigInt::from(p[0] - d[0]), BigInt::from(p[1] - d[1])));
    let lift = |(x, y): &(BigInt, BigInt)| x * x + y * y;
    let cross = |(x1, y1): &(BigInt, BigInt), (x2, y2): &(BigInt, BigInt)| x1 * y2 - x2 * y1;
    let [ra, rb, rc] = &rows;
    let det = lift(ra) * cross(rb, rc) + lift(rb) * cross(rc, ra) + lift(rc) * cross(ra, rb);
    match det.sign() {
        num_bigint::Sign::Minus => -1,
        num_bigint::Sign::NoSign => 0,
        num_bigint::Sign::Plus => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(x: f64, y: f64) -> GridPt {
        [snap(x), snap(y)]
    }

    #[test]
    fn unit_triangle_cases() {
        let (a, b, c) = (g(0.0, 0.0), g(1.0, 0.0), g(0.0, 1.0));
        assert_eq!(orient(a, b, c), 1);
        assert_eq!(in_circle(a, b, c, g(0.25, 0.25)), 1);
        assert_eq!(in_circle(a, b, c, g(10.0, 10.0)), -1);
        assert_eq!(in_circle(a, b, c, g(1.0, 1.0)), 0);
    }

    #[test]
    fn large_coordinates_take_the_wide_path() {
        let big = 1i64 << 51;
        let (a, b, c) = ([-big, -big], [big, -big], [0, big]);
        assert!(in_circle_i128(a, b, c, [0, 0]).is_none());
        assert_eq!(in_circle(a, b, c, [0, 0]), 1);
        assert_eq!(in_circle(a, b, c, [4 * big, 0]), -1);
    }

    /// Rational evaluation of the in-circle test through the circumcentre.
    fn in_circle_by_centre(a: GridPt, b: GridPt, c: GridPt, d: GridPt) -> i32 {
        use num_bigint::BigInt as B;
        let [ax, ay, bx, by, cx, cy, dx, dy] =
            [a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]].map(B::from);
        // Centre = (ux / den, uy / den).
        let den: B = B::from(2) * (&ax * (&by - &cy) + &bx * (&cy - &ay) + &cx * (&ay - &by));
        let sa = &ax * &ax + &ay * &ay;
        let sb = &bx * &bx + &by * &by;
        let sc = &cx * &cx + &cy * &cy;
        let ux = &sa * (&by - &cy) + &sb * (&cy - &ay) + &sc * (&ay - &by);
        let uy = &sa * (&cx - &bx) + &sb * (&ax - &cx) + &sc * (&bx - &ax);
        let dist = |px: &B, py: &B| {
            let ex = &ux - px * &den;
            let ey = &uy - py * &den;
            &ex * &ex + &ey * &ey
        };
        let r = dist(&ax, &ay);
        let q = dist(&dx, &dy);
        match r.cmp(&q) {
            core::cmp::Ordering::Greater => 1,
            core::cmp::Ordering::Equal => 0,
            core::cmp::Ordering::Less => -1,
        }
    }

    proptest! {
        #[test]
        fn agrees_with_circumcentre_oracle(pts in proptest::collection::vec((-1000i64..1000, -1000i64..1000), 4), shift in 0u32..40) {
            let p: Vec<GridPt> = pts.iter().map(|&(x, y)| [x << shift, y << shift]).collect();
            let (mut a, mut b, c, d) = (p[0], p[1], p[2], p[3]);
            let o = orient(a, b, c);
            prop_assume!(o != 0);
            if o < 0 {
                core::mem::swap(&mut a, &mut b);
            }
            prop_assert_eq!(in_circle(a, b, c, d), in_circle_by_centre(a, b, c, d));
        }
    }
}
