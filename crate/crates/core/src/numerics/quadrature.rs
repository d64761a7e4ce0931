use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, refined by Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Pairwise (cascade) summation; fixed order so results are reproducible.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    /// Area weight, including the polar Jacobian `r`.
    pub weight: f64,
}

/// Polar product rule on a disk: Gauss–Legendre in the radius, uniform
/// trapezoid in the angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGrid {
    pub center: (f64, f64),
    pub radius: f64,
    pub n_radial: usize,
    pub n_angular: usize,
}

impl PolarGrid {
    pub fn new(center: (f64, f64), radius: f64, n_radial: usize, n_angular: usize) -> Self {
        assert!(radius > 0.0 && n_radial > 0 && n_angular > 0);
        Self {
            center,
            radius,
            n_radial,
            n_angular,
        }
    }

    pub fn len(&self) -> usize {
        self.n_radial * self.n_angular
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Radius-major list of nodes.
    pub fn points(&self) -> Vec<GridPoint> {
        let (xs, ws) = gauss_legendre(self.n_radial);
        let half = 0.5 * self.radius;
        let dtheta = 2.0 * PI / self.n_angular as f64;
        let mut out = Vec::with_capacity(self.len());
        for (x, w) in xs.iter().zip(&ws) {
            let r = half * (x + 1.0);
            let wr = half * w * r * dtheta;
            for k in 0..self.n_angular {
                let theta = k as f64 * dtheta;
                out.push(GridPoint {
                    x: self.center.0 + r * theta.cos(),
                    y: self.center.1 + r * theta.sin(),
                    weight: wr,
                });
            }
        }
        out
    }

    /// `∫ f` over the disk, evaluated at every node and summed pairwise.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let vals: Vec<f64> = self.points().iter().map(|p| p.weight * f(p.x, p.y)).collect();
        pairwise_sum(&vals)
    }
}
