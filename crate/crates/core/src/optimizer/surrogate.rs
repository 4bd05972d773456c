use super::solve::Objective;
use super::Evaluation;

/// Separable quadratic with a known minimizer, for checking the search
/// machinery without running episodes.
///
/// `λ(u) = scale Σ wᵢ (uᵢ − centerᵢ)²`; with a floor, `c` counts the
/// components below it.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSurrogate {
    pub center: Vec<f64>,
    pub weights: Vec<f64>,
    pub scale: f64,
    pub floor: Option<Vec<f64>>,
}

impl QuadraticSurrogate {
    pub fn new(center: Vec<f64>, weights: Vec<f64>) -> Self {
        assert_eq!(center.len(), weights.len());
        QuadraticSurrogate { center, weights, scale: 1.0, floor: None }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_floor(mut self, floor: Vec<f64>) -> Self {
        assert_eq!(floor.len(), self.center.len());
        self.floor = Some(floor);
        self
    }
}

impl Objective for QuadraticSurrogate {
    fn dimension(&self) -> usize {
        self.center.len()
    }

    fn evaluate(&self, u: &[f64]) -> Evaluation {
        let lambda = self.scale * u.iter().zip(&self.center).zip(&self.weights).map(|((u, c), w)| w * (u - c).powi(2)).sum::<f64>();
        let constraint = self.floor.as_ref().map_or(0, |f| u.iter().zip(f).filter(|(u, f)| u < f).count() as u64);
        Evaluation { lambda, constraint }
    }
}
