//! Quadrature rules on the reference tetrahedron with vertices at the
//! origin and the unit points; weights sum to the volume 1/6.

use nalgebra::Vector3;

/// A quadrature rule as (point, weight) pairs on the reference tet.
#[derive(Debug, Clone)]
pub struct TetRule {
    pub points: Vec<Vector3<f64>>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Midpoint rule, exact for linears.
pub fn tet_rule_degree_1() -> TetRule {
    TetRule {
        points: vec![Vector3::new(0.25, 0.25, 0.25)],
        weights: vec![1.0 / 6.0],
        degree: 1,
    }
}

/// Four-point rule, exact for quadratics.
pub fn tet_rule_degree_2() -> TetRule {
    let a = 0.585_410_196_624_968_5;
    let b = 0.138_196_601_125_010_5;
    let mut points = Vec::new();
    for i in 0..4 {
        let mut bary = [b; 4];
        bary[i] = a;
        points.push(Vector3::new(bary[1], bary[2], bary[3]));
    }
    TetRule { points, weights: vec![1.0 / 24.0; 4], degree: 2 }
}

/// Fifteen-point rule, exact for quintics.
pub fn tet_rule_degree_5() -> TetRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();

    points.push(Vector3::new(0.25, 0.25, 0.25));
    weights.push(0.030_283_678_097_089);

    // Orbits of (a, b, b, b).
    let orbit4 = |a: f64, b: f64, w: f64, points: &mut Vec<Vector3<f64>>, weights: &mut Vec<f64>| {
        for i in 0..4 {
            let mut bary = [b; 4];
            bary[i] = a;
            points.push(Vector3::new(bary[1], bary[2], bary[3]));
            weights.push(w);
        }
    };
    orbit4(0.0, 1.0 / 3.0, 0.006_026_785_714_286, &mut points, &mut weights);
    orbit4(
        0.727_272_727_272_727_3,
        0.090_909_090_909_090_91,
        0.011_645_249_086_029,
        &mut points,
        &mut weights,
    );

    // Orbit of (a, a, b, b).
    let a = 0.066_550_153_573_664_3;
    let b = 0.433_449_846_426_335_7;
    let w = 0.010_949_141_561_386;
    let mut seen = std::collections::HashSet::new();
    for i in 0..4 {
        for j in (i + 1)..4 {
            let mut bary = [b; 4];
            bary[i] = a;
            bary[j] = a;
            let key = (i, j);
            if seen.insert(key) {
                points.push(Vector3::new(bary[1], bary[2], bary[3]));
                weights.push(w);
            }
        }
    }

    TetRule { points, weights, degree: 5 }
}

/// Rule of at least the requested polynomial degree.
pub fn tet_rule(degree: usize) -> TetRule {
    match degree {
        0 | 1 => tet_rule_degree_1(),
        2 => tet_rule_degree_2(),
        _ => tet_rule_degree_5(),
    }
}
