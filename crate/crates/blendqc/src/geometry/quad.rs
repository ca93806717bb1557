//! Gauss quadrature on intervals and triangles.

/// Nodes and weights of the n-point Gauss–Legendre rule on [0, 1],
/// ascending by node. Exact for polynomials of degree ≤ 2n−1.
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_pair(n, x);
            let step = p / dp;
            x -= step;
            if step.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_pair(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push(((1.0 + x) / 2.0, w / 2.0));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_pair(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature on the reference triangle conv{(0,0), (1,0), (0,1)}, exact
/// for total degree ≤ `degree`; weights sum to the area 1/2. Built as the
/// conical product of two Gauss–Legendre rules.
pub fn reference_triangle(degree: usize) -> Vec<([f64; 2], f64)> {
    // The collapsed coordinate picks up one extra degree from the Jacobian.
    let n = degree / 2 + 1;
    let gl = gauss_legendre_01(n);
    let mut out = Vec::with_capacity(n * n);
    for &(u, wu) in &gl {
        for &(v, wv) in &gl {
            out.push(([u, v * (1.0 - u)], wu * wv * (1.0 - u)));
        }
    }
    out
}

/// Map a reference-triangle rule onto the triangle (a, b, c). Weights are
/// scaled so they sum to the physical area.
pub fn map_to_triangle(
    rule: &[([f64; 2], f64)],
    a: [f64; 2],
    b: [f64; 2],
    c: [f64; 2],
) -> Vec<([f64; 2], f64)> {
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    let scale = det.abs();
    rule.iter()
        .map(|&([u, w], wt)| {
            let x = a[0] + u * (b[0] - a[0]) + w * (c[0] - a[0]);
            let y = a[1] + u * (b[1] - a[1]) + w * (c[1] - a[1]);
            ([x, y], wt * scale)
        })
        .collect()
}
