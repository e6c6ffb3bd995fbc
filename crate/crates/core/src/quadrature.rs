//! Gauss–Legendre quadrature with node doubling.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Computes the `n`-point rule by Newton iteration on `P_n`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "gauss rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Cached rule lookup; rules are immutable once built.
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("rule cache poisoned").get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(GaussRule::new(n));
    cache
        .lock()
        .expect("rule cache poisoned")
        .entry(n)
        .or_insert(rule)
        .clone()
}

/// Quadrature settings: start with `nodes` points and double until two
/// successive estimates agree to `tolerance`, giving up past `max_nodes`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub nodes: usize,
    pub tolerance: f64,
    pub max_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            nodes: 16,
            tolerance: 1e-10,
            max_nodes: 2048,
        }
    }
}

impl QuadratureSpec {
    pub fn with_tolerance(tolerance: f64) -> Self {
        QuadratureSpec {
            tolerance,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 16 {
            return Err(Error::invalid("quadrature", "at least 16 starting nodes required"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("quadrature", "tolerance must be positive"));
        }
        if self.max_nodes < self.nodes {
            return Err(Error::invalid("quadrature", "max_nodes below starting nodes"));
        }
        Ok(())
    }

    /// Runs `eval` on successively doubled rules until every component of
    /// the returned vector is stable. `eval` gets the rule to integrate with.
    pub fn converge<F>(&self, what: &str, mut eval: F) -> Result<Vec<f64>>
    where
        F: FnMut(&GaussRule) -> Vec<f64>,
    {
        self.validate()?;
        let mut n = self.nodes;
        let mut prev = eval(&gauss_legendre(n));
        loop {
            let next_n = n * 2;
            if next_n > self.max_nodes {
                return Err(Error::NonConvergence {
                    module: "quadrature",
                    what: what.to_string(),
                    detail: format!(
                        "not stable to {:e} with {} nodes",
                        self.tolerance, self.max_nodes
                    ),
                });
            }
            let next = eval(&gauss_legendre(next_n));
            let stable = prev
                .iter()
                .zip(&next)
                .all(|(a, b)| (a - b).abs() <= self.tolerance * b.abs().max(1.0));
            if stable {
                return Ok(next);
            }
            prev = next;
            n = next_n;
        }
    }

    /// Scalar integral of `f` over `[a, b]`.
    pub fn integrate(&self, what: &str, a: f64, b: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
        self.converge(what, |rule| vec![rule.integrate(a, b, &f)])
            .map(|v| v[0])
    }
}
