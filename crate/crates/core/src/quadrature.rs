//! Quadrature on the reference tetrahedron (barycentric points, weights
//! normalized to sum to one) and two-point Gauss on edges.

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 4]>,
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn centroid() -> Self {
        Self {
            points: vec![[0.25; 4]],
            weights: vec![1.0],
            degree: 1,
        }
    }

    /// Four-point rule, exact for quadratics.
    pub fn degree2() -> Self {
        let a = (5.0 - 5f64.sqrt()) / 20.0;
        let b = 1.0 - 3.0 * a;
        Self {
            points: vertex_orbit(a, b),
            weights: vec![0.25; 4],
            degree: 2,
        }
    }

    /// Fourteen-point rule with positive weights, exact through degree five.
    pub fn degree5() -> Self {
        let a1 = 0.092_735_250_310_891_2;
        let a2 = 0.310_885_919_263_300_6;
        let b = 0.454_496_295_874_350_4;
        let w1 = 0.073_493_043_116_361_95;
        let w2 = 0.112_687_925_718_015_85;
        let w3 = 0.042_546_020_777_081_47;
        let mut points = vertex_orbit(a1, 1.0 - 3.0 * a1);
        points.extend(vertex_orbit(a2, 1.0 - 3.0 * a2));
        let c = 0.5 - b;
        for (i, j) in crate::mesh::LOCAL_EDGES {
            let mut p = [c; 4];
            p[i] = b;
            p[j] = b;
            points.push(p);
        }
        let mut weights = vec![w1; 4];
        weights.extend([w2; 4]);
        weights.extend([w3; 6]);
        Self {
            points,
            weights,
            degree: 5,
        }
    }

    /// Default volume rule for products of P1 factors with rotation terms.
    pub fn volume_default() -> Self {
        Self::degree5()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 4], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

fn vertex_orbit(a: f64, b: f64) -> Vec<[f64; 4]> {
    (0..4)
        .map(|i| {
            let mut p = [a; 4];
            p[i] = b;
            p
        })
        .collect()
}

/// Two-point Gauss rule on `[0, 1]`: `(parameter, weight)` pairs, exact for cubics.
pub fn edge_gauss2() -> [(f64, f64); 2] {
    let d = 0.5 / 3f64.sqrt();
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}
