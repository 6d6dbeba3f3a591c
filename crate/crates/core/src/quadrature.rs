//! Tensor Gauss-Legendre rules on the unit cell.

/// One-dimensional Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct GaussRule {
    points: &'static [f64],
    weights: &'static [f64],
}

const G2_POINTS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];
const G2_WEIGHTS: [f64; 2] = [0.5, 0.5];

const G4_POINTS: [f64; 4] = [
    0.069_431_844_202_973_71,
    0.330_009_478_207_571_9,
    0.669_990_521_792_428_1,
    0.930_568_155_797_026_3,
];
const G4_WEIGHTS: [f64; 4] = [
    0.173_927_422_568_726_93,
    0.326_072_577_431_273_07,
    0.326_072_577_431_273_07,
    0.173_927_422_568_726_93,
];

impl GaussRule {
    /// Exact for polynomials of degree ≤ 3.
    pub const TWO: GaussRule = GaussRule {
        points: &G2_POINTS,
        weights: &G2_WEIGHTS,
    };

    /// Exact for polynomials of degree ≤ 7.
    pub const FOUR: GaussRule = GaussRule {
        points: &G4_POINTS,
        weights: &G4_WEIGHTS,
    };

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Tensor-product points `(s, t, weight)` on the unit square.
    pub fn tensor(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.points.iter().zip(self.weights).flat_map(move |(&t, &wt)| {
            self.points
                .iter()
                .zip(self.weights)
                .map(move |(&s, &ws)| (s, t, ws * wt))
        })
    }
}

/// Bilinear shape functions on the unit cell, corner order
/// `(0,0), (1,0), (0,1), (1,1)`.
#[inline]
pub fn shape(s: f64, t: f64) -> [f64; 4] {
    [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t]
}

/// Gradients of [`shape`] with respect to the unit-cell coordinates.
#[inline]
pub fn shape_grad(s: f64, t: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - t), -(1.0 - s)],
        [1.0 - t, -s],
        [-t, 1.0 - s],
        [t, s],
    ]
}
