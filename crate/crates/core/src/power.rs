//! Finite linear combinations of real power functions on `(0, ∞)`.
//!
//! Everything the geometric Brownian backend computes in closed form —
//! payoffs, resolvents, the auxiliary integral functionals — stays inside
//! this family, so a small symbolic type pays for itself: derivatives and
//! linear algebra on sums of `c·x^p` are exact.

/// A sum `Σ cᵢ·x^{pᵢ}` with real exponents, defined for `x > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSum {
    terms: Vec<(f64, f64)>, // (coefficient, exponent), exponents strictly increasing
}

impl PowerSum {
    pub fn new(terms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut collected: Vec<(f64, f64)> = terms.into_iter().collect();
        collected.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(collected.len());
        for (c, p) in collected {
            match merged.last_mut() {
                Some(last) if (last.1 - p).abs() <= 1e-14 * (1.0 + p.abs()) => last.0 += c,
                _ => merged.push((c, p)),
            }
        }
        merged.retain(|&(c, _)| c != 0.0);
        Self { terms: merged }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new([(c, 0.0)])
    }

    /// The single term `c·x^p`.
    pub fn power(c: f64, p: f64) -> Self {
        Self::new([(c, p)])
    }

    /// The linear term `c·x`.
    pub fn linear(c: f64) -> Self {
        Self::new([(c, 1.0)])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(c, p)| c * x.powf(p)).sum()
    }

    /// Value of the `order`-th derivative at `x` (any order ≥ 0).
    pub fn eval_deriv(&self, x: f64, order: u8) -> f64 {
        self.terms
            .iter()
            .map(|&(c, p)| {
                let mut coef = c;
                for k in 0..order {
                    coef *= p - f64::from(k);
                }
                coef * x.powf(p - f64::from(order))
            })
            .sum()
    }

    pub fn derivative(&self) -> Self {
        Self::new(self.terms.iter().map(|&(c, p)| (c * p, p - 1.0)))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::new(self.terms.iter().map(|&(c, p)| (c * factor, p)))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.terms.iter().chain(other.terms.iter()).copied())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Map each term through `f(coefficient, exponent)`, failing fast if any
    /// term is rejected.
    pub fn try_map_terms(&self, mut f: impl FnMut(f64, f64) -> Option<(f64, f64)>) -> Option<Self> {
        let mut out = Vec::with_capacity(self.terms.len());
        for &(c, p) in &self.terms {
            out.push(f(c, p)?);
        }
        Some(Self::new(out))
    }
}
