//! Shared evaluation contexts for jets: monomial tables, product tables and
//! per-variable differentiation maps for a fixed `(n_vars, order)` pair.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Highest truncation order supported by the engine.
pub const MAX_ORDER: usize = 4;

/// A monomial in `n_vars` variables of degree `<= MAX_ORDER`, stored as the
/// sorted list of participating variables (with repetition).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Monomial {
    pub vars: [u32; MAX_ORDER],
    pub deg: u8,
}

impl Monomial {
    fn unit() -> Self {
        Monomial { vars: [0; MAX_ORDER], deg: 0 }
    }

    pub fn slice(&self) -> &[u32] {
        &self.vars[..self.deg as usize]
    }

    /// Merges two sorted variable lists; caller guarantees the total degree fits.
    fn merged(&self, other: &Monomial) -> Monomial {
        let mut out = Monomial::unit();
        let (a, b) = (self.slice(), other.slice());
        let (mut i, mut j, mut k) = (0, 0, 0);
        while i < a.len() && j < b.len() {
            if a[i] <= b[j] {
                out.vars[k] = a[i];
                i += 1;
            } else {
                out.vars[k] = b[j];
                j += 1;
            }
            k += 1;
        }
        while i < a.len() {
            out.vars[k] = a[i];
            i += 1;
            k += 1;
        }
        while j < b.len() {
            out.vars[k] = b[j];
            j += 1;
            k += 1;
        }
        out.deg = k as u8;
        out
    }
}

/// One entry of the truncated Cauchy-product table: the unordered coefficient
/// pair `(a, b)` contributes to slot `target`.
#[derive(Clone, Copy)]
pub(crate) struct ProductTerm {
    pub a: u32,
    pub b: u32,
    pub target: u32,
}

/// One entry of a differentiation map: `coeffs[dst] += scale * coeffs[src]`
/// in the space one order lower.
#[derive(Clone, Copy)]
pub(crate) struct DerivTerm {
    pub src: u32,
    pub dst: u32,
    pub scale: f64,
}

pub(crate) struct SpaceInner {
    pub n_vars: usize,
    pub order: usize,
    /// Graded colex ordering; degree-`d` block starts at `degree_offsets[d]`.
    pub monomials: Vec<Monomial>,
    pub degree_offsets: [usize; MAX_ORDER + 2],
    pub products: Vec<ProductTerm>,
    /// `derivatives[v]` maps this space onto the `(n_vars, order - 1)` space.
    pub derivatives: Vec<Vec<DerivTerm>>,
}

fn binomial(n: usize, k: usize) -> usize {
    if k == 0 {
        return 1;
    }
    let mut num = 1usize;
    for i in 0..k {
        num *= n.saturating_sub(i);
    }
    let mut den = 1usize;
    for i in 1..=k {
        den *= i;
    }
    num / den
}

/// Rank of a sorted variable tuple inside its degree block (colex order).
fn simplex_rank(vars: &[u32]) -> usize {
    vars.iter()
        .enumerate()
        .map(|(k, &v)| binomial(v as usize + k, k + 1))
        .sum()
}

/// Emits all degree-`deg` monomials in colex order (largest variable varies
/// slowest), matching `simplex_rank`.
fn gen_monomials(n_vars: usize, deg: usize, out: &mut Vec<Monomial>) {
    fn gen(deg: usize, max_var_excl: usize, suffix: &mut Vec<u32>, out: &mut Vec<Monomial>) {
        if deg == 0 {
            let mut m = Monomial::unit();
            for (k, &v) in suffix.iter().enumerate() {
                m.vars[k] = v;
            }
            m.deg = suffix.len() as u8;
            out.push(m);
            return;
        }
        for v in 0..max_var_excl {
            // v is the largest variable of the remaining `deg` slots.
            suffix.insert(0, v as u32);
            gen(deg - 1, v + 1, suffix, out);
            suffix.remove(0);
        }
    }
    let mut suffix = Vec::new();
    gen(deg, n_vars, &mut suffix, out);
}

impl SpaceInner {
    fn build(n_vars: usize, order: usize) -> SpaceInner {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds maximum {MAX_ORDER}");
        let mut monomials = Vec::new();
        let mut degree_offsets = [0usize; MAX_ORDER + 2];
        for d in 0..=order {
            degree_offsets[d] = monomials.len();
            gen_monomials(n_vars, d, &mut monomials);
        }
        for d in order + 1..=MAX_ORDER + 1 {
            degree_offsets[d] = monomials.len();
        }

        let rank = |m: &Monomial| -> usize {
            degree_offsets[m.deg as usize] + simplex_rank(m.slice())
        };

        // Consistency of enumeration order and ranking.
        debug_assert!(monomials.iter().enumerate().all(|(i, m)| rank(m) == i));

        let mut products = Vec::new();
        for i in 0..monomials.len() {
            let di = monomials[i].deg as usize;
            for j in i..monomials.len() {
                let dj = monomials[j].deg as usize;
                if di + dj > order {
                    break; // graded ordering: degrees only grow with the index
                }
                let target = rank(&monomials[i].merged(&monomials[j]));
                products.push(ProductTerm {
                    a: i as u32,
                    b: j as u32,
                    target: target as u32,
                });
            }
        }

        let mut derivatives = vec![Vec::new(); n_vars];
        for (i, m) in monomials.iter().enumerate() {
            if m.deg == 0 {
                continue;
            }
            let s = m.slice();
            let mut k = 0;
            while k < s.len() {
                let v = s[k];
                let mut mult = 0;
                while k < s.len() && s[k] == v {
                    mult += 1;
                    k += 1;
                }
                let mut lower = Monomial::unit();
                let mut w = 0;
                let mut removed = false;
                for &u in s {
                    if u == v && !removed {
                        removed = true;
                        continue;
                    }
                    lower.vars[w] = u;
                    w += 1;
                }
                lower.deg = w as u8;
                derivatives[v as usize].push(DerivTerm {
                    src: i as u32,
                    dst: rank(&lower) as u32,
                    scale: mult as f64,
                });
            }
        }

        SpaceInner { n_vars, order, monomials, degree_offsets, products, derivatives }
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    /// Coefficient slot of the monomial described by an exponent vector.
    /// Returns `None` when the total degree exceeds the order.
    pub fn index_of_exponents(&self, alpha: &[usize]) -> Option<usize> {
        let deg: usize = alpha.iter().sum();
        if deg > self.order {
            return None;
        }
        let mut m = Monomial::unit();
        let mut k = 0;
        for (v, &e) in alpha.iter().enumerate() {
            for _ in 0..e {
                m.vars[k] = v as u32;
                k += 1;
            }
        }
        m.deg = deg as u8;
        Some(self.degree_offsets[deg] + simplex_rank(m.slice()))
    }
}

/// Handle to a shared jet context. Cheap to clone; spaces with equal
/// `(n_vars, order)` are the same table instance.
#[derive(Clone)]
pub struct JetSpace(pub(crate) Arc<SpaceInner>);

type Registry = Mutex<HashMap<(usize, usize), Arc<SpaceInner>>>;

static REGISTRY: OnceLock<Registry> = OnceLock::new();

impl JetSpace {
    /// Fetches (building on first use) the context for `n_vars` variables
    /// truncated at `order`.
    pub fn get(n_vars: usize, order: usize) -> JetSpace {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds maximum {MAX_ORDER}");
        let registry = REGISTRY.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = registry.lock().expect("jet space registry poisoned");
        let inner = map
            .entry((n_vars, order))
            .or_insert_with(|| Arc::new(SpaceInner::build(n_vars, order)))
            .clone();
        JetSpace(inner)
    }

    pub fn n_vars(&self) -> usize {
        self.0.n_vars
    }

    pub fn order(&self) -> usize {
        self.0.order
    }

    /// Number of stored coefficients, `C(n_vars + order, order)`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub(crate) fn same_as(&self, other: &JetSpace) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.n_vars() == other.n_vars() && self.order() == other.order())
    }
}

impl std::fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "JetSpace({} vars, order {})", self.n_vars(), self.order())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_counts_match_binomial() {
        for n in [1usize, 2, 3, 5, 9] {
            for m in 0..=MAX_ORDER {
                let space = JetSpace::get(n, m);
                assert_eq!(space.len(), binomial(n + m, m), "n={n} m={m}");
            }
        }
    }

    #[test]
    fn ranking_is_consistent_with_enumeration() {
        let space = JetSpace::get(4, 4);
        for (i, m) in space.0.monomials.iter().enumerate() {
            let mut alpha = vec![0usize; 4];
            for &v in m.slice() {
                alpha[v as usize] += 1;
            }
            assert_eq!(space.0.index_of_exponents(&alpha), Some(i));
        }
    }

    #[test]
    fn degree_blocks_are_prefixes_of_higher_order_spaces() {
        let lo = JetSpace::get(3, 2);
        let hi = JetSpace::get(3, 4);
        for i in 0..lo.len() {
            assert_eq!(lo.0.monomials[i], hi.0.monomials[i]);
        }
    }
}
