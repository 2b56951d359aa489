//! Symmetric quadrature rules on triangles in barycentric coordinates.
//! Weights sum to one and must be scaled by the element area.

#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

const fn qp(a: f64, b: f64, c: f64, weight: f64) -> QuadPoint {
    QuadPoint { bary: [a, b, c], weight }
}

/// Edge-midpoint rule, exact for degree 2.
pub const DEGREE_2: [QuadPoint; 3] = [
    qp(0.5, 0.5, 0.0, 1.0 / 3.0),
    qp(0.0, 0.5, 0.5, 1.0 / 3.0),
    qp(0.5, 0.0, 0.5, 1.0 / 3.0),
];

const D4_A: f64 = 0.445_948_490_915_965;
const D4_WA: f64 = 0.223_381_589_678_011;
const D4_B: f64 = 0.091_576_213_509_771;
const D4_WB: f64 = 0.109_951_743_655_322;

/// Dunavant 6-point rule, exact for degree 4.
pub const DEGREE_4: [QuadPoint; 6] = [
    qp(D4_A, D4_A, 1.0 - 2.0 * D4_A, D4_WA),
    qp(D4_A, 1.0 - 2.0 * D4_A, D4_A, D4_WA),
    qp(1.0 - 2.0 * D4_A, D4_A, D4_A, D4_WA),
    qp(D4_B, D4_B, 1.0 - 2.0 * D4_B, D4_WB),
    qp(D4_B, 1.0 - 2.0 * D4_B, D4_B, D4_WB),
    qp(1.0 - 2.0 * D4_B, D4_B, D4_B, D4_WB),
];

const D6_A: f64 = 0.249_286_745_170_910;
const D6_WA: f64 = 0.116_786_275_726_379;
const D6_B: f64 = 0.063_089_014_491_502;
const D6_WB: f64 = 0.050_844_906_370_207;
const D6_C: [f64; 3] = [0.310_352_451_033_784, 0.636_502_499_121_399, 0.053_145_049_844_817];
const D6_WC: f64 = 0.082_851_075_618_374;

/// Dunavant 12-point rule, exact for degree 6.
pub const DEGREE_6: [QuadPoint; 12] = [
    qp(D6_A, D6_A, 1.0 - 2.0 * D6_A, D6_WA),
    qp(D6_A, 1.0 - 2.0 * D6_A, D6_A, D6_WA),
    qp(1.0 - 2.0 * D6_A, D6_A, D6_A, D6_WA),
    qp(D6_B, D6_B, 1.0 - 2.0 * D6_B, D6_WB),
    qp(D6_B, 1.0 - 2.0 * D6_B, D6_B, D6_WB),
    qp(1.0 - 2.0 * D6_B, D6_B, D6_B, D6_WB),
    qp(D6_C[0], D6_C[1], D6_C[2], D6_WC),
    qp(D6_C[0], D6_C[2], D6_C[1], D6_WC),
    qp(D6_C[1], D6_C[0], D6_C[2], D6_WC),
    qp(D6_C[1], D6_C[2], D6_C[0], D6_WC),
    qp(D6_C[2], D6_C[0], D6_C[1], D6_WC),
    qp(D6_C[2], D6_C[1], D6_C[0], D6_WC),
];
