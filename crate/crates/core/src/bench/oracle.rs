//! Analytic oracles with exact gradients and, where derivable, Lipschitz data.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::objective::{norm, Objective};
use crate::seed;

pub const SHEKEL_BETA: [f64; 10] = [0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5];

/// One focus per row.
pub const SHEKEL_C: [[f64; 4]; 10] = [
    [4.0, 4.0, 4.0, 4.0],
    [1.0, 1.0, 1.0, 1.0],
    [8.0, 8.0, 8.0, 8.0],
    [6.0, 6.0, 6.0, 6.0],
    [3.0, 7.0, 3.0, 7.0],
    [2.0, 9.0, 2.0, 9.0],
    [5.0, 3.0, 5.0, 3.0],
    [8.0, 1.0, 8.0, 1.0],
    [6.0, 2.0, 6.0, 2.0],
    [7.0, 3.6, 7.0, 3.6],
];

/// Points in the Shekel normalization reference sample.
pub const REFERENCE_SAMPLE_SIZE: usize = 1_000_000;

/// `Σ_i 1 / (‖x − c_i‖² + β_i)`. Panics if `x.len() != 4`.
pub fn shekel(x: &[f64]) -> f64 {
    assert_eq!(x.len(), 4, "shekel is defined on R^4");
    SHEKEL_C
        .iter()
        .zip(SHEKEL_BETA)
        .map(|(c, b)| 1.0 / (sq_dist(x, c) + b))
        .sum()
}

/// Analytic gradient of [`shekel`].
pub fn shekel_grad(x: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), 4, "shekel is defined on R^4");
    let mut g = vec![0.0; 4];
    for (c, b) in SHEKEL_C.iter().zip(SHEKEL_BETA) {
        let den = sq_dist(x, c) + b;
        let w = -2.0 / (den * den);
        for j in 0..4 {
            g[j] += w * (x[j] - c[j]);
        }
    }
    g
}

/// The global maximizer of [`shekel`], located by gradient ascent from the
/// first focus until the gradient norm drops below `1e-12`.
pub fn shekel_maximizer() -> Vec<f64> {
    let mut x = SHEKEL_C[0].to_vec();
    for _ in 0..100_000 {
        let g = shekel_grad(&x);
        if norm(&g) < 1e-12 {
            break;
        }
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi += 2e-3 * gi;
        }
    }
    x
}

fn sq_dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleFunction {
    Shekel,
    /// `−½ Σ h_i (x_i − c_i)²` with every `h_i > 0`.
    Quadratic { curvature: Vec<f64>, center: Vec<f64> },
    /// `aᵀx + b`.
    Linear { slope: Vec<f64>, intercept: f64 },
}

impl OracleFunction {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            OracleFunction::Shekel => shekel(x),
            OracleFunction::Quadratic { curvature, center } => {
                -0.5 * x
                    .iter()
                    .zip(curvature)
                    .zip(center)
                    .map(|((xi, h), c)| h * (xi - c) * (xi - c))
                    .sum::<f64>()
            }
            OracleFunction::Linear { slope, intercept } => {
                slope.iter().zip(x).map(|(a, xi)| a * xi).sum::<f64>() + intercept
            }
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self {
            OracleFunction::Shekel => shekel_grad(x),
            OracleFunction::Quadratic { curvature, center } => x
                .iter()
                .zip(curvature)
                .zip(center)
                .map(|((xi, h), c)| -h * (xi - c))
                .collect(),
            OracleFunction::Linear { slope, .. } => slope.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oracle {
    pub name: String,
    pub dim: usize,
    pub function: OracleFunction,
    /// `ℓ`: bound on `‖∇g‖` over `domain_box`.
    pub lipschitz_value: Option<f64>,
    /// `μ`: bound on the Hessian operator norm over `domain_box`.
    pub lipschitz_smooth: Option<f64>,
    pub reference_min: Option<f64>,
    pub reference_max: Option<f64>,
    pub domain_box: Option<Vec<(f64, f64)>>,
    /// `g(x_*)`, the best value attainable.
    pub optimum_value: Option<f64>,
}

impl Objective for Oracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.function.value(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.function.gradient(x)
    }
}

impl Oracle {
    /// Shekel-10 on `R^4`, normalized against a seeded `N(0, I)` sample.
    pub fn shekel() -> Self {
        let mut rng = seed::rng(seed::derive_seed(0, "shekel-reference"));
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut x = [0.0; 4];
        for _ in 0..REFERENCE_SAMPLE_SIZE {
            for xi in &mut x {
                *xi = rng.sample(StandardNormal);
            }
            let v = shekel(&x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Self {
            name: "shekel".into(),
            dim: 4,
            function: OracleFunction::Shekel,
            lipschitz_value: None,
            lipschitz_smooth: None,
            reference_min: Some(lo),
            reference_max: Some(hi),
            domain_box: Some(vec![(0.0, 10.0); 4]),
            optimum_value: Some(shekel(&shekel_maximizer())),
        }
    }

    /// Concave quadratic with `ℓ`, `μ` derived analytically on `domain_box`.
    pub fn quadratic(
        name: impl Into<String>,
        curvature: Vec<f64>,
        center: Vec<f64>,
        domain_box: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let d = curvature.len();
        if d == 0 {
            return Err(Error::Config("quadratic oracle needs at least one dimension".into()));
        }
        check_dim("quadratic center", d, center.len())?;
        check_dim("quadratic domain", d, domain_box.len())?;
        if curvature.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(Error::Config("quadratic curvatures must be positive and finite".into()));
        }
        let lipschitz_value = curvature
            .iter()
            .zip(&center)
            .zip(&domain_box)
            .map(|((h, c), (lo, hi))| {
                let r = (lo - c).abs().max((hi - c).abs());
                (h * r).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let mu = curvature.iter().cloned().fold(0.0, f64::max);
        let inside = center
            .iter()
            .zip(&domain_box)
            .all(|(c, (lo, hi))| lo <= c && c <= hi);
        // On a box the maximum sits at the clamped center and the minimum at
        // the corner farthest from the center.
        let clamped: Vec<f64> = center
            .iter()
            .zip(&domain_box)
            .map(|(c, (lo, hi))| c.clamp(*lo, *hi))
            .collect();
        let far_corner: Vec<f64> = center
            .iter()
            .zip(&domain_box)
            .map(|(c, (lo, hi))| if (lo - c).abs() >= (hi - c).abs() { *lo } else { *hi })
            .collect();
        let function = OracleFunction::Quadratic { curvature, center };
        let reference_min = function.value(&far_corner);
        let reference_max = function.value(&clamped);
        Ok(Self {
            name: name.into(),
            dim: d,
            function,
            lipschitz_value: Some(lipschitz_value),
            lipschitz_smooth: Some(mu),
            reference_min: Some(reference_min),
            reference_max: Some(reference_max),
            domain_box: Some(domain_box),
            optimum_value: inside.then_some(0.0),
        })
    }

    /// The 2-d quadratic used for bound checks: curvatures (1, 2), center
    /// (0.25, −0.5) on `[−1, 1]²`, giving `ℓ = 3.25`, `μ = 2`.
    pub fn quadratic2d() -> Self {
        Self::quadratic("quadratic2d", vec![1.0, 2.0], vec![0.25, -0.5], vec![(-1.0, 1.0); 2])
            .expect("fixed constants are valid")
    }

    pub fn linear(name: impl Into<String>, slope: Vec<f64>, intercept: f64) -> Result<Self> {
        if slope.is_empty() {
            return Err(Error::Config("linear oracle needs at least one dimension".into()));
        }
        let l = norm(&slope);
        Ok(Self {
            name: name.into(),
            dim: slope.len(),
            function: OracleFunction::Linear { slope, intercept },
            lipschitz_value: Some(l),
            lipschitz_smooth: Some(0.0),
            reference_min: None,
            reference_max: None,
            domain_box: None,
            optimum_value: None,
        })
    }

    /// `z = (1, −2, 0.5, 3)ᵀx` on `R^4`.
    pub fn linear4() -> Self {
        Self::linear("linear4", vec![1.0, -2.0, 0.5, 3.0], 0.0).expect("fixed constants are valid")
    }

    /// `ℓ` and `μ`, or an error naming the oracle.
    pub fn lipschitz(&self) -> Result<(f64, f64)> {
        match (self.lipschitz_value, self.lipschitz_smooth) {
            (Some(l), Some(m)) => Ok((l, m)),
            _ => Err(Error::MissingLipschitz(self.name.clone())),
        }
    }

    /// `(g − min) / (max − min)` when a reference range is present.
    pub fn normalize(&self, value: f64) -> f64 {
        match (self.reference_min, self.reference_max) {
            (Some(lo), Some(hi)) if hi > lo => (value - lo) / (hi - lo),
            _ => value,
        }
    }

    /// Draws a point uniformly from the domain box, or from `N(0, I)` when the
    /// oracle has no box.
    pub fn sample_domain<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.domain_box {
            Some(b) => b.iter().map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect(),
            None => (0..self.dim).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }

    /// Runs [`check_gradient`] at `points` seeded domain points.
    pub fn self_test(&self, points: usize, tol: f64) -> Result<()> {
        let mut rng = seed::rng(seed::derive_seed(0, &format!("self-test/{}", self.name)));
        let sample: Vec<Vec<f64>> = (0..points).map(|_| self.sample_domain(&mut rng)).collect();
        check_gradient(self, &sample, tol).map_err(|reason| Error::OracleSelfTest {
            name: self.name.clone(),
            reason,
        })
    }
}

/// Checks `‖∇g − ∇_FD g‖ ≤ tol · max(‖∇g‖, 1)` at every point.
pub fn check_gradient<O: Objective + ?Sized>(
    objective: &O,
    points: &[Vec<f64>],
    tol: f64,
) -> std::result::Result<(), String> {
    for x in points {
        let g = objective.gradient(x);
        if g.len() != objective.dim() {
            return Err(format!("gradient has {} entries, expected {}", g.len(), objective.dim()));
        }
        let fd = fd_gradient(|p| objective.value(p), x, 1e-3);
        let err = norm(&g.iter().zip(&fd).map(|(a, b)| a - b).collect::<Vec<_>>());
        if !(err <= tol * norm(&g).max(1.0)) {
            return Err(format!("gradient differs from finite differences by {err:e} at {x:?}"));
        }
    }
    Ok(())
}

/// Five-point central difference per coordinate.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|j| {
            let mut at = |t: f64| {
                p[j] = x[j] + t;
                let v = f(&p);
                p[j] = x[j];
                v
            };
            (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h)
        })
        .collect()
}

/// `base(x) + ε·sin(ωᵀx + θ)`: a smooth, bounded perturbation of an oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbedObjective {
    pub base: Oracle,
    pub epsilon: f64,
    pub frequency: Vec<f64>,
    pub phase: f64,
}

impl PerturbedObjective {
    pub fn new(base: Oracle, epsilon: f64, frequency: Vec<f64>, phase: f64) -> Result<Self> {
        check_dim("perturbation frequency", base.dim, frequency.len())?;
        Ok(Self {
            base,
            epsilon,
            frequency,
            phase,
        })
    }

    fn arg(&self, x: &[f64]) -> f64 {
        self.frequency.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.phase
    }
}

impl Objective for PerturbedObjective {
    fn dim(&self) -> usize {
        self.base.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x) + self.epsilon * self.arg(x).sin()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let c = self.epsilon * self.arg(x).cos();
        self.base
            .gradient(x)
            .into_iter()
            .zip(&self.frequency)
            .map(|(g, w)| g + c * w)
            .collect()
    }
}

/// Constructs one built-in oracle by name and runs its self-test.
pub fn builtin_oracle(name: &str) -> Result<Oracle> {
    let oracle = match name {
        "shekel" => Oracle::shekel(),
        "quadratic2d" => Oracle::quadratic2d(),
        "linear4" => Oracle::linear4(),
        other => return Err(Error::UnknownOracle(other.to_string())),
    };
    oracle.self_test(OracleRegistry::SELF_TEST_POINTS, OracleRegistry::SELF_TEST_TOL)?;
    Ok(oracle)
}

/// Oracles by name. Registration runs [`Oracle::self_test`].
#[derive(Clone, Debug, Default)]
pub struct OracleRegistry {
    oracles: BTreeMap<String, Oracle>,
}

impl OracleRegistry {
    pub const SELF_TEST_POINTS: usize = 32;
    pub const SELF_TEST_TOL: f64 = 1e-6;

    pub const BUILTIN: [&'static str; 3] = ["linear4", "quadratic2d", "shekel"];

    /// Every oracle in [`Self::BUILTIN`].
    pub fn builtin() -> Result<Self> {
        let mut reg = Self::default();
        for name in Self::BUILTIN {
            reg.register(builtin_oracle(name)?)?;
        }
        Ok(reg)
    }

    pub fn register(&mut self, oracle: Oracle) -> Result<()> {
        oracle.self_test(Self::SELF_TEST_POINTS, Self::SELF_TEST_TOL)?;
        self.oracles.insert(oracle.name.clone(), oracle);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Oracle> {
        self.oracles
            .get(name)
            .ok_or_else(|| Error::UnknownOracle(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.oracles.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shekel_peak_value() {
        assert!((shekel(&[4.0; 4]) - 10.536283726219603).abs() < 1e-12);
        let x = shekel_maximizer();
        assert!((shekel(&x) - 10.5364).abs() < 1e-4);
        assert!(norm(&shekel_grad(&x)) <= 1e-2);
        assert!(x.iter().all(|v| (v - 4.0).abs() < 1e-3));
    }

    #[test]
    fn quadratic_constants() {
        let q = Oracle::quadratic2d();
        assert_eq!(q.lipschitz().unwrap(), (3.25, 2.0));
        assert_eq!(q.optimum_value, Some(0.0));
        assert_eq!(q.value(&[0.25, -0.5]), 0.0);
        assert!(Oracle::shekel().lipschitz().is_err());
    }

    #[test]
    fn quadratic_rejects_bad_curvature() {
        assert!(Oracle::quadratic("q", vec![0.0], vec![0.0], vec![(-1.0, 1.0)]).is_err());
        assert!(Oracle::quadratic("q", vec![1.0], vec![0.0, 1.0], vec![(-1.0, 1.0)]).is_err());
    }

    #[test]
    fn registry_lookup() {
        let mut reg = OracleRegistry::default();
        reg.register(Oracle::quadratic2d()).unwrap();
        assert!(reg.get("quadratic2d").is_ok());
        assert!(matches!(reg.get("nope"), Err(Error::UnknownOracle(_))));
    }

    #[test]
    fn gradient_check_catches_wrong_gradient() {
        struct Wrong;
        impl Objective for Wrong {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> f64 {
                x[0] * x[0]
            }
            fn gradient(&self, x: &[f64]) -> Vec<f64> {
                vec![x[0]]
            }
        }
        assert!(check_gradient(&Wrong, &[vec![1.0]], 1e-6).is_err());
        assert!(check_gradient(&Oracle::linear4(), &[vec![1.0, 2.0, 3.0, 4.0]], 1e-6).is_ok());
    }

    #[test]
    fn perturbation_gradient_matches_fd() {
        let p = PerturbedObjective::new(Oracle::quadratic2d(), 0.05, vec![3.0, -2.0], 0.4).unwrap();
        let x = [0.3, -0.7];
        let fd = fd_gradient(|q| p.value(q), &x, 1e-3);
        for (a, b) in p.gradient(&x).iter().zip(&fd) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
