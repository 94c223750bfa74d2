//! Exact forward-mode differentiation through truncated multivariate Taylor
//! expansions ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients of a smooth scalar expression at a
//! base point, up to a fixed truncation order (at most 4). Coefficients are
//! Taylor-normalized: the slot for the multi-index `α` holds `∂^α f / α!`, so
//! multiplication is a plain truncated Cauchy product and
//! [`Jet::derivative`] rescales by `α!` on the way out.
//!
//! Jets are immutable values and every operation is a pure function, so they
//! can be used freely from concurrent workers. The truncation order is fixed
//! per evaluation context: combining jets of different orders (or different
//! variable counts) is a hard error, never a silent truncation.

mod linalg;
mod space;

pub use linalg::{border_cofactors, jet_det, JetLu};
pub use space::{JetSpace, MAX_ORDER};

use thiserror::Error;

/// Errors produced by jet construction and the fallible jet operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("jet order {0} out of supported range 0..={MAX_ORDER}")]
    OrderOutOfRange(usize),
    #[error("derivative order {requested} exceeds jet order {order}")]
    DerivativeOrder { requested: usize, order: usize },
    #[error("multi-index has {got} entries, jet has {expected} variables")]
    MultiIndexLength { got: usize, expected: usize },
    #[error("division by a jet with zero value part")]
    ZeroDivisor,
    #[error("{op} of a jet with non-positive value part {value}")]
    NonPositiveValue { op: &'static str, value: f64 },
    #[error("singular jet matrix (pivot {pivot:.3e} at step {step})")]
    SingularMatrix { pivot: f64, step: usize },
}

/// Truncated Taylor expansion of a scalar in `n_vars` variables.
#[derive(Clone)]
pub struct Jet {
    space: JetSpace,
    coeffs: Vec<f64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("n_vars", &self.space.n_vars())
            .field("order", &self.space.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.space.same_as(&other.space) && self.coeffs == other.coeffs
    }
}

/// Seeds the coordinate functions at a base point: one jet per variable, with
/// value `u[i]`, unit first-order coefficient in slot `i` and zeros above.
pub fn seed_point(u: &[f64], order: usize) -> Result<Vec<Jet>, JetError> {
    if order > MAX_ORDER {
        return Err(JetError::OrderOutOfRange(order));
    }
    let space = JetSpace::get(u.len(), order);
    Ok(u.iter()
        .enumerate()
        .map(|(i, &ui)| space.var(i, ui))
        .collect())
}

impl JetSpace {
    /// Constant jet with value `c`.
    pub fn constant(&self, c: f64) -> Jet {
        let mut coeffs = vec![0.0; self.len()];
        coeffs[0] = c;
        Jet { space: self.clone(), coeffs }
    }

    /// The zero jet.
    pub fn zero(&self) -> Jet {
        Jet { space: self.clone(), coeffs: vec![0.0; self.len()] }
    }

    /// Coordinate function `u_i` seeded at `value`.
    pub fn var(&self, i: usize, value: f64) -> Jet {
        assert!(i < self.n_vars(), "variable index {i} out of range");
        let mut coeffs = vec![0.0; self.len()];
        coeffs[0] = value;
        if self.order() >= 1 {
            coeffs[1 + i] = 1.0;
        }
        Jet { space: self.clone(), coeffs }
    }
}

impl Jet {
    pub fn space(&self) -> &JetSpace {
        &self.space
    }

    pub fn n_vars(&self) -> usize {
        self.space.n_vars()
    }

    pub fn order(&self) -> usize {
        self.space.order()
    }

    /// Value of the expression at the base point.
    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn assert_same_space(&self, other: &Jet) {
        assert!(
            self.space.same_as(&other.space),
            "jet context mismatch: {:?} vs {:?} (orders are fixed per evaluation context)",
            self.space,
            other.space
        );
    }

    /// Extracts `∂^α f` at the base point, rescaling the stored coefficient
    /// by `α!`. `alpha` lists one exponent per variable.
    pub fn derivative(&self, alpha: &[usize]) -> Result<f64, JetError> {
        if alpha.len() != self.n_vars() {
            return Err(JetError::MultiIndexLength { got: alpha.len(), expected: self.n_vars() });
        }
        let deg: usize = alpha.iter().sum();
        let idx = self
            .space
            .0
            .index_of_exponents(alpha)
            .ok_or(JetError::DerivativeOrder { requested: deg, order: self.order() })?;
        let mut fact = 1.0;
        for &e in alpha {
            for k in 2..=e {
                fact *= k as f64;
            }
        }
        Ok(self.coeffs[idx] * fact)
    }

    /// First derivative with respect to variable `i`.
    pub fn gradient(&self, i: usize) -> f64 {
        assert!(self.order() >= 1 && i < self.n_vars());
        self.coeffs[1 + i]
    }

    /// The jet of `∂f/∂u_v`, one order lower.
    pub fn partial(&self, v: usize) -> Jet {
        assert!(self.order() >= 1, "cannot differentiate an order-0 jet");
        assert!(v < self.n_vars());
        let lower = JetSpace::get(self.n_vars(), self.order() - 1);
        let mut coeffs = vec![0.0; lower.len()];
        for term in &self.space.0.derivatives[v] {
            coeffs[term.dst as usize] += term.scale * self.coeffs[term.src as usize];
        }
        Jet { space: lower, coeffs }
    }

    /// Truncates to a lower order (the coefficient layout is graded, so this
    /// is a prefix copy).
    pub fn truncated(&self, order: usize) -> Jet {
        assert!(order <= self.order(), "truncated() cannot raise the order");
        if order == self.order() {
            return self.clone();
        }
        let lower = JetSpace::get(self.n_vars(), order);
        Jet { space: lower.clone(), coeffs: self.coeffs[..lower.len()].to_vec() }
    }

    pub fn scaled(&self, s: f64) -> Jet {
        Jet { space: self.space.clone(), coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    fn binary(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        self.assert_same_space(other);
        Jet {
            space: self.space.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(other.coeffs.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &Jet) -> Jet {
        self.assert_same_space(other);
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for term in &self.space.0.products {
            let (a, b, t) = (term.a as usize, term.b as usize, term.target as usize);
            if a == b {
                coeffs[t] += self.coeffs[a] * other.coeffs[a];
            } else {
                coeffs[t] += self.coeffs[a] * other.coeffs[b] + self.coeffs[b] * other.coeffs[a];
            }
        }
        Jet { space: self.space.clone(), coeffs }
    }

    /// Composes the analytic series `Σ_k c[k] w^k` with `w = self - value`,
    /// which has vanishing value part. `c[k]` must equal `φ^(k)(value)/k!`.
    fn unary_series(&self, c: &[f64]) -> Jet {
        let order = self.order();
        let mut w = self.clone();
        w.coeffs[0] = 0.0;
        let mut acc = self.space.constant(c[order]);
        for k in (0..order).rev() {
            acc = acc.mul(&w);
            acc.coeffs[0] += c[k];
        }
        acc
    }

    /// `exp(f)`.
    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut c = [0.0; MAX_ORDER + 1];
        let mut fact = 1.0;
        for (k, ck) in c.iter_mut().enumerate().take(self.order() + 1) {
            if k > 0 {
                fact *= k as f64;
            }
            *ck = e / fact;
        }
        self.unary_series(&c)
    }

    /// `ln(f)`; requires a positive value part.
    pub fn ln(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v <= 0.0 {
            return Err(JetError::NonPositiveValue { op: "ln", value: v });
        }
        let mut c = [0.0; MAX_ORDER + 1];
        c[0] = v.ln();
        for (k, ck) in c.iter_mut().enumerate().take(self.order() + 1).skip(1) {
            *ck = -(-1.0f64).powi(k as i32) / (k as f64 * v.powi(k as i32));
        }
        Ok(self.unary_series(&c))
    }

    /// `sqrt(f)`; requires a positive value part.
    pub fn sqrt(&self) -> Result<Jet, JetError> {
        if self.value() <= 0.0 {
            return Err(JetError::NonPositiveValue { op: "sqrt", value: self.value() });
        }
        self.powf(0.5)
    }

    /// `f^r` for real `r`; requires a positive value part.
    pub fn powf(&self, r: f64) -> Result<Jet, JetError> {
        let v = self.value();
        if v <= 0.0 {
            return Err(JetError::NonPositiveValue { op: "powf", value: v });
        }
        let mut c = [0.0; MAX_ORDER + 1];
        let mut binom = 1.0; // generalized binomial r choose k
        for (k, ck) in c.iter_mut().enumerate().take(self.order() + 1) {
            if k > 0 {
                binom *= (r - (k as f64 - 1.0)) / k as f64;
            }
            *ck = binom * v.powf(r - k as f64);
        }
        Ok(self.unary_series(&c))
    }

    /// `1/f`; requires a nonzero value part (any sign).
    pub fn recip(&self) -> Result<Jet, JetError> {
        let v = self.value();
        if v == 0.0 {
            return Err(JetError::ZeroDivisor);
        }
        let mut c = [0.0; MAX_ORDER + 1];
        for (k, ck) in c.iter_mut().enumerate().take(self.order() + 1) {
            *ck = (-1.0f64).powi(k as i32) / v.powi(k as i32 + 1);
        }
        Ok(self.unary_series(&c))
    }

    /// `f/g`; errors when `g` has zero value part.
    pub fn try_div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self.mul(&other.recip()?))
    }

    /// Largest absolute coefficient, a crude magnitude estimate.
    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $f:expr) => {
        impl std::ops::$trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.binary(rhs, $f)
            }
        }
        impl std::ops::$trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl std::ops::$trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl std::ops::$trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a + b);
forward_binop!(Sub, sub, |a, b| a - b);

impl std::ops::Mul<&Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul(self, rhs)
    }
}
impl std::ops::Mul<Jet> for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        Jet::mul(&self, &rhs)
    }
}
impl std::ops::Mul<&Jet> for Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul(&self, rhs)
    }
}
impl std::ops::Mul<Jet> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        Jet::mul(self, &rhs)
    }
}
impl std::ops::Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scaled(rhs)
    }
}
impl std::ops::Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scaled(rhs)
    }
}
impl std::ops::Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scaled(-1.0)
    }
}
impl std::ops::Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scaled(-1.0)
    }
}
