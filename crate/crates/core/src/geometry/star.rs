//! Star tree: countably many copies of `[0, ∞)` glued at a hub. Offsets are
//! distances from the hub; the hub is stored as `(0, 0.0)`.

#[inline]
pub fn canonical(ray: u32, offset: f64) -> (u32, f64) {
    if offset <= 0.0 {
        (0, 0.0)
    } else {
        (ray, offset)
    }
}

#[inline]
pub fn dist(r1: u32, a: f64, r2: u32, b: f64) -> f64 {
    if r1 == r2 || a == 0.0 || b == 0.0 {
        (a - b).abs()
    } else {
        a + b
    }
}

/// Ray used when a path runs past the hub while coming in along `from`.
#[inline]
pub fn continuation(from: u32) -> u32 {
    if from == 0 {
        1
    } else {
        0
    }
}

/// Walks distance `w ≥ 0` from `(r1, a)` along the geodesic towards
/// `(r2, b)`, continuing past the target when `w` exceeds the distance.
pub fn walk(r1: u32, a: f64, r2: u32, b: f64, w: f64) -> (u32, f64) {
    if a == 0.0 || b == 0.0 || r1 == r2 {
        let ray = if a == 0.0 { r2 } else { r1 };
        if b >= a || a == 0.0 {
            return canonical(ray, a + w);
        }
        // heading towards the hub along `ray`
        let off = a - w;
        if off >= 0.0 {
            canonical(ray, off)
        } else {
            canonical(continuation(ray), -off)
        }
    } else if w <= a {
        canonical(r1, a - w)
    } else {
        canonical(r2, w - a)
    }
}

/// Point at distance `d` along the ray leaving `(r, a)` in branch `k`:
/// outward when `k == r`, otherwise through the hub into branch `k`.
pub fn ray_point(r: u32, a: f64, k: u32, d: f64) -> (u32, f64) {
    if a == 0.0 || k == r {
        canonical(k, a + d)
    } else if d <= a {
        canonical(r, a - d)
    } else {
        canonical(k, d - a)
    }
}
