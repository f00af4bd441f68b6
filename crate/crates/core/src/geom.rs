use nalgebra::{Vector2, Vector3};

/// Position in model space.
pub type Point3 = Vector3<f64>;
/// Direction or displacement in model space.
pub type Vec3 = Vector3<f64>;
/// Point in a projection plane.
pub type Vec2 = Vector2<f64>;

pub fn lerp3(a: &Point3, b: &Point3, s: f64) -> Point3 {
    a + (b - a) * s
}

pub fn is_finite3(p: &Vec3) -> bool {
    p.iter().all(|c| c.is_finite())
}

/// Diagonal of the axis-aligned bounding box of `points`; zero for fewer than two points.
pub fn bbox_diagonal(points: &[Point3]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let (mut lo, mut hi) = (*first, *first);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

/// Mean, max and population standard deviation.
pub fn mean_max_sd(values: &[f64]) -> (f64, f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, max, var.sqrt())
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Lengths of consecutive chords of a polyline.
pub fn chord_lengths(points: &[Point3]) -> Vec<f64> {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
}
