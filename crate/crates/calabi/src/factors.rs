//! Catalog of factor hyperspheres usable in Calabi compositions: points
//! (0-dimensional hyperspheres of affine mean curvature -1), the flat
//! hyperbolic hypersphere `x^1 … x^{n0} x^{n0+1} = C0` with its closed-form
//! invariants, a quadric hyperboloid certified numerically, and nested
//! composites.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::composition::{self, CompositionSpec, IndexLayout};
use crate::equiaffine::{self, GeometryError, ImmersionChart};
use crate::tensor::Tensor3;

#[derive(Debug, Error)]
pub enum FactorError {
    #[error("invalid factor parameter: {0}")]
    InvalidParameter(String),
    #[error("factor certification failed: {0}")]
    Certification(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

type Result<T> = std::result::Result<T, FactorError>;

#[derive(Clone, Debug)]
enum FactorKind {
    /// A positive number viewed as a 0-dimensional hypersphere with L1 = -1.
    Point { c: f64 },
    /// The flat hypersphere `x^1 … x^{n0+1} = C0` in exponential coordinates.
    Flat { n0: usize, c0: f64 },
    /// `u -> mu * (u, sqrt(1 + |u|^2))`, rescaled so that L1 = -1, with the
    /// affine mean curvature recorded from numerical certification rather
    /// than assumed.
    Hyperboloid { n: usize, mu: f64, l1: f64 },
    /// A Calabi composition used as a factor of a larger composition.
    Composite { inner: Box<CompositionSpec> },
}

/// One factor of a Calabi composition.
#[derive(Clone, Debug)]
pub struct FactorSpec {
    kind: FactorKind,
}

/// Per-point invariant data of a factor, in its own chart coordinates:
/// affine mean curvature, metric, Fubini-Pick form, induced connection and
/// `|det h|`. Empty tensors for points.
#[derive(Clone, Debug)]
pub struct FactorData {
    pub dim: usize,
    pub l1: f64,
    pub g: DMatrix<f64>,
    pub a_form: Tensor3,
    pub gamma: Tensor3,
    pub h_det: f64,
}

/// Closed-form invariants of the flat hypersphere (constant in its
/// exponential coordinates).
#[derive(Clone, Debug)]
pub struct FlatClosedForms {
    pub g: DMatrix<f64>,
    pub l1: f64,
    pub a_form: Tensor3,
    /// Pick invariant; `None` for `n0 = 1`.
    pub j: Option<f64>,
    /// `|det h|` in the exponential chart.
    pub h_det: f64,
}

fn hyperboloid_chart(n: usize, mu: f64) -> ImmersionChart {
    ImmersionChart::new(n, move |space, u| {
        let mut out: Vec<_> = u.iter().map(|ui| ui.scaled(mu)).collect();
        let mut sq = space.constant(1.0);
        for ui in u {
            sq = sq + ui.mul(ui);
        }
        out.push(sq.sqrt()?.scaled(mu));
        Ok(out)
    })
}

/// Layout of a composition of `k` points (all dimensions zero); the flat
/// hypersphere is exactly this composition.
fn point_layout(k: usize) -> IndexLayout {
    IndexLayout {
        dims: vec![0; k],
        f: (1..=k).collect(),
        block_offset: vec![k - 1; k],
        n: k - 1,
    }
}

impl FactorSpec {
    /// A 0-dimensional factor: the constant `c > 0` with `L1 = -1`.
    pub fn point(c: f64) -> Result<FactorSpec> {
        if !(c > 0.0) {
            return Err(FactorError::InvalidParameter(format!(
                "point factor needs c > 0, got {c}"
            )));
        }
        Ok(FactorSpec { kind: FactorKind::Point { c } })
    }

    /// The flat hypersphere of dimension `n0 >= 1` with constant `C0 > 0`,
    /// parametrized so the closed forms hold verbatim in chart coordinates.
    pub fn flat(n0: usize, c0: f64) -> Result<FactorSpec> {
        if n0 < 1 {
            return Err(FactorError::InvalidParameter("flat factor needs n0 >= 1".into()));
        }
        if !(c0 > 0.0) {
            return Err(FactorError::InvalidParameter(format!(
                "flat factor needs C0 > 0, got {c0}"
            )));
        }
        Ok(FactorSpec { kind: FactorKind::Flat { n0, c0 } })
    }

    /// A hyperboloid sheet of dimension `n >= 1`, rescaled by a numerically
    /// determined `mu` so the recorded affine mean curvature is -1.
    pub fn hyperboloid(n: usize) -> Result<FactorSpec> {
        if n < 1 {
            return Err(FactorError::InvalidParameter("hyperboloid needs n >= 1".into()));
        }
        let probe: Vec<f64> = (0..n).map(|i| 0.08 + 0.05 * i as f64).collect();
        let exponent = (n as f64 + 2.0) / (2.0 * (n as f64 + 1.0));
        let mut mu = 1.0;
        let mut l1;
        for _ in 0..8 {
            let shape = equiaffine::shape_operator(&hyperboloid_chart(n, mu), &probe)?;
            l1 = shape.l1;
            if (l1 + 1.0).abs() < 1e-13 {
                break;
            }
            mu *= (-l1).powf(exponent);
        }
        let chart = hyperboloid_chart(n, mu);
        let samples: Vec<Vec<f64>> = (0..5)
            .map(|s| {
                (0..n)
                    .map(|i| 0.4 * ((1 + s * n + i) as f64 * 0.7391).sin())
                    .collect()
            })
            .collect();
        let verdict = equiaffine::classify_sphere(&chart, &samples, 1e-8);
        if !verdict.is_proper_sphere || !verdict.is_hyperbolic {
            return Err(FactorError::Certification(format!(
                "hyperboloid(n={n}, mu={mu}) not certified: {verdict:?}"
            )));
        }
        Ok(FactorSpec { kind: FactorKind::Hyperboloid { n, mu, l1: verdict.l1 } })
    }

    /// A Calabi composition used as a factor; its chart is the composed
    /// chart and its `L1` comes from the closed form `-1/(f_K C)`.
    pub fn composite(inner: CompositionSpec) -> FactorSpec {
        FactorSpec { kind: FactorKind::Composite { inner: Box::new(inner) } }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            FactorKind::Point { .. } => 0,
            FactorKind::Flat { n0, .. } => *n0,
            FactorKind::Hyperboloid { n, .. } => *n,
            FactorKind::Composite { inner } => inner.layout().n,
        }
    }

    /// The constant value of a point factor, `None` otherwise.
    pub fn point_value(&self) -> Option<f64> {
        match &self.kind {
            FactorKind::Point { c } => Some(*c),
            _ => None,
        }
    }

    /// Affine mean curvature: closed form where available, the certified
    /// value for the hyperboloid.
    pub fn l1(&self) -> Result<f64> {
        Ok(match &self.kind {
            FactorKind::Point { .. } => -1.0,
            FactorKind::Flat { n0, c0 } => flat_l1(*n0, *c0),
            FactorKind::Hyperboloid { l1, .. } => *l1,
            FactorKind::Composite { inner } => composition::predicted_l1(inner)
                .map_err(|e| FactorError::Certification(format!("composite factor L1: {e}")))?,
        })
    }

    pub fn chart(&self) -> ImmersionChart {
        match &self.kind {
            FactorKind::Point { c } => {
                let c = *c;
                ImmersionChart::new(0, move |space, _| Ok(vec![space.constant(c)]))
            }
            FactorKind::Flat { n0, c0 } => {
                let layout = point_layout(n0 + 1);
                let c0 = *c0;
                ImmersionChart::new(*n0, move |space, seeds| {
                    let e = composition::weight_jets(&layout, space, seeds)?;
                    let mut out = e;
                    let last = out.len() - 1;
                    out[last] = out[last].scaled(c0);
                    Ok(out)
                })
            }
            FactorKind::Hyperboloid { n, mu, .. } => hyperboloid_chart(*n, *mu),
            FactorKind::Composite { inner } => composition::compose(inner),
        }
    }

    /// Sampling box for the factor's chart coordinates.
    pub fn domain(&self) -> &'static [(f64, f64)] {
        const BOX: [(f64, f64); 32] = [(-0.5, 0.5); 32];
        &BOX[..self.dim()]
    }

    /// Invariants at a chart point: closed forms for points and flat factors,
    /// the engine for everything else.
    pub fn invariants_at(&self, u: &[f64]) -> Result<FactorData> {
        assert_eq!(u.len(), self.dim());
        match &self.kind {
            FactorKind::Point { .. } => Ok(FactorData {
                dim: 0,
                l1: -1.0,
                g: DMatrix::zeros(0, 0),
                a_form: Tensor3::zeros(0),
                gamma: Tensor3::zeros(0),
                h_det: 1.0,
            }),
            FactorKind::Flat { n0, c0 } => {
                let forms = flat_closed_forms(*n0, *c0);
                Ok(FactorData {
                    dim: *n0,
                    l1: forms.l1,
                    g: forms.g,
                    a_form: forms.a_form,
                    gamma: flat_gamma(*n0),
                    h_det: forms.h_det,
                })
            }
            FactorKind::Hyperboloid { n, l1, .. } => {
                let inv = equiaffine::invariant_set(&self.chart(), u)?;
                Ok(FactorData {
                    dim: *n,
                    l1: *l1,
                    g: inv.frame.g,
                    a_form: inv.a_form,
                    gamma: inv.gamma,
                    h_det: inv.frame.big_h,
                })
            }
            FactorKind::Composite { inner } => {
                let inv = equiaffine::invariant_set(&self.chart(), u)?;
                let l1 = composition::predicted_l1(inner).map_err(|e| {
                    FactorError::Certification(format!("composite factor L1: {e}"))
                })?;
                Ok(FactorData {
                    dim: self.dim(),
                    l1,
                    g: inv.frame.g,
                    a_form: inv.a_form,
                    gamma: inv.gamma,
                    h_det: inv.frame.big_h,
                })
            }
        }
    }

    /// Closed-form invariants; only flat factors have them.
    pub fn closed_forms(&self) -> Option<FlatClosedForms> {
        match &self.kind {
            FactorKind::Flat { n0, c0 } => Some(flat_closed_forms(*n0, *c0)),
            _ => None,
        }
    }

    /// Inner composition of a composite factor.
    pub fn inner_composition(&self) -> Option<&CompositionSpec> {
        match &self.kind {
            FactorKind::Composite { inner } => Some(inner),
            _ => None,
        }
    }

    pub fn short_name(&self) -> String {
        match &self.kind {
            FactorKind::Point { c } => format!("pt({c})"),
            FactorKind::Flat { n0, c0 } => format!("flat({n0},C0={c0})"),
            FactorKind::Hyperboloid { n, .. } => format!("hyp({n})"),
            FactorKind::Composite { inner } => format!("comp[{}]", inner.id()),
        }
    }
}

fn flat_l1(n0: usize, c0: f64) -> f64 {
    let n0 = n0 as f64;
    -((n0 + 1.0).powf(-(n0 + 1.0) / (n0 + 2.0)) * c0.powf(-2.0 / (n0 + 2.0)))
}

/// Closed forms of the flat hypersphere in its exponential chart; the metric
/// and cubic form are constant, so they do not depend on the point.
fn flat_closed_forms(n0: usize, c0: f64) -> FlatClosedForms {
    let nf = n0 as f64;
    let c_m = (c0 * c0 / (nf + 1.0)).powf(1.0 / (nf + 2.0));
    let g = DMatrix::from_fn(n0, n0, |i, j| {
        if i == j {
            (i as f64 + 2.0) / (i as f64 + 1.0) * c_m
        } else {
            0.0
        }
    });
    let mut a_form = Tensor3::zeros(n0);
    for i in 0..n0 {
        let lam = i as f64 + 1.0;
        a_form[(i, i, i)] = -(lam * lam - 1.0) / (lam * lam) * c_m;
        for j in i + 1..n0 {
            let nu = j as f64 + 1.0;
            let v = (lam + 1.0) / (lam * nu) * c_m;
            a_form[(i, i, j)] = v;
            a_form[(i, j, i)] = v;
            a_form[(j, i, i)] = v;
        }
    }
    let l1 = flat_l1(n0, c0);
    FlatClosedForms {
        g,
        l1,
        a_form,
        j: if n0 >= 2 { Some(-l1) } else { None },
        h_det: (nf + 1.0) * c0.powf(nf),
    }
}

/// Induced connection of the flat hypersphere in exponential coordinates
/// (the point-composition closed form).
fn flat_gamma(n0: usize) -> Tensor3 {
    let mut gamma = Tensor3::zeros(n0);
    for i in 0..n0 {
        for j in 0..n0 {
            if i < j {
                gamma[(i, j, i)] = 1.0 / (j as f64 + 1.0);
                gamma[(j, i, i)] = 1.0 / (j as f64 + 1.0);
            } else if i == j {
                gamma[(i, i, i)] = 1.0 / (i as f64 + 1.0) - 1.0;
                for k in i + 1..n0 {
                    gamma[(i, i, k)] =
                        (i as f64 + 2.0) / ((k as f64 + 2.0) * (i as f64 + 1.0));
                }
            }
        }
    }
    gamma
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn point_factor_basics() {
        let p = FactorSpec::point(2.0).unwrap();
        assert_eq!(p.dim(), 0);
        assert_eq!(p.l1().unwrap(), -1.0);
        let x = p.chart().value_at(&[]).unwrap();
        assert_eq!(x[0], 2.0);
        assert!(FactorSpec::point(0.0).is_err());
        assert!(FactorSpec::point(-1.0).is_err());
    }

    #[test]
    fn point_invariants_are_empty() {
        let p = FactorSpec::point(1.0).unwrap();
        let data = p.invariants_at(&[]).unwrap();
        assert_eq!(data.dim, 0);
        assert_eq!(data.l1, -1.0);
        assert_eq!(data.g.nrows(), 0);
        assert_eq!(data.h_det, 1.0);
    }

    #[test]
    fn flat_one_dimensional_closed_forms() {
        let f = FactorSpec::flat(1, 1.0).unwrap();
        let forms = f.closed_forms().unwrap();
        assert_relative_eq!(forms.g[(0, 0)], 2.0f64.powf(2.0 / 3.0), epsilon = 1e-15);
        assert_relative_eq!(forms.l1, -(2.0f64.powf(-2.0 / 3.0)), epsilon = 1e-15);
        assert_eq!(forms.a_form.max_abs(), 0.0);
        assert!(forms.j.is_none());
    }

    #[test]
    fn flat_two_dimensional_closed_forms() {
        let forms = FactorSpec::flat(2, 1.0).unwrap().closed_forms().unwrap();
        let c_m = (1.0f64 / 3.0).powf(0.25);
        assert_relative_eq!(forms.g[(0, 0)], 2.0 * c_m, epsilon = 1e-15);
        assert_relative_eq!(forms.g[(1, 1)], 1.5 * c_m, epsilon = 1e-15);
        assert_relative_eq!(forms.a_form[(0, 0, 1)], c_m, epsilon = 1e-15);
        assert_relative_eq!(forms.j.unwrap(), 3.0f64.powf(-0.75), epsilon = 1e-15);
    }

    #[test]
    fn flat_chart_satisfies_defining_equation() {
        // The product of the ambient coordinates equals C0 identically.
        let f = FactorSpec::flat(2, 1.7).unwrap();
        let chart = f.chart();
        for t in [[0.0, 0.0], [0.3, -0.4], [0.5, 0.2], [-0.45, 0.5]] {
            let x = chart.value_at(&t).unwrap();
            let product: f64 = x.iter().product();
            assert_relative_eq!(product, 1.7, max_relative = 1e-14);
        }
    }

    #[test]
    fn flat_closed_forms_match_engine() {
        let f = FactorSpec::flat(2, 1.0).unwrap();
        let forms = f.closed_forms().unwrap();
        let inv = equiaffine::invariant_set(&f.chart(), &[0.0, 0.0]).unwrap();
        assert!((inv.frame.g - &forms.g).amax() < 1e-10);
        assert!(inv.a_form.max_abs_diff(&forms.a_form) < 1e-10);
        assert!(inv.gamma.max_abs_diff(&flat_gamma(2)) < 1e-10);
        assert_relative_eq!(inv.shape.l1, forms.l1, epsilon = 1e-10);
        assert_relative_eq!(inv.pick.unwrap(), forms.j.unwrap(), epsilon = 1e-10);
        assert_relative_eq!(inv.frame.big_h, forms.h_det, max_relative = 1e-10);
        // Away from the origin as well: the closed forms are constant.
        let inv2 = equiaffine::invariant_set(&f.chart(), &[0.25, -0.4]).unwrap();
        assert!((inv2.frame.g - &forms.g).amax() < 1e-9);
        assert!(inv2.a_form.max_abs_diff(&forms.a_form) < 1e-9);
    }

    #[test]
    fn flat_pick_invariant_equals_minus_l1() {
        for n0 in [2usize, 3, 4] {
            for c0 in [0.5, 1.0, 3.0] {
                let f = FactorSpec::flat(n0, c0).unwrap();
                let forms = f.closed_forms().unwrap();
                let point = vec![0.11; n0];
                let inv = equiaffine::invariant_set(&f.chart(), &point).unwrap();
                assert_relative_eq!(inv.pick.unwrap(), -forms.l1, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn flat_three_dimensional_pick_value() {
        // n0 = 3, C0 = 2: J = -L1 = 4^{-4/5} 2^{-2/5}.
        let forms = FactorSpec::flat(3, 2.0).unwrap().closed_forms().unwrap();
        assert_relative_eq!(
            forms.j.unwrap(),
            4.0f64.powf(-0.8) * 2.0f64.powf(-0.4),
            epsilon = 1e-15
        );
    }

    #[test]
    fn hyperboloid_certifies_as_unit_hyperbolic_sphere() {
        for n in [1usize, 2] {
            let f = FactorSpec::hyperboloid(n).unwrap();
            let l1 = f.l1().unwrap();
            assert_relative_eq!(l1, -1.0, epsilon = 1e-9);
            let samples: Vec<Vec<f64>> = (0..20)
                .map(|s| (0..n).map(|i| 0.45 * ((s * n + i) as f64 * 1.234).sin()).collect())
                .collect();
            let verdict = equiaffine::classify_sphere(&f.chart(), &samples, 1e-8);
            assert!(verdict.is_proper_sphere && verdict.is_hyperbolic, "{verdict:?}");
            assert!(verdict.eigenvalue_spread <= 1e-9, "{verdict:?}");
            assert!(verdict.l1_spread <= 1e-9, "{verdict:?}");
        }
    }

    #[test]
    fn hyperboloid_apolarity_in_dimension_one() {
        let f = FactorSpec::hyperboloid(1).unwrap();
        let inv = equiaffine::invariant_set(&f.chart(), &[0.2]).unwrap();
        let trace = inv.frame.g_inv[(0, 0)] * inv.a_form[(0, 0, 0)];
        assert!(trace.abs() <= 1e-10 * inv.frame.g[(0, 0)].max(1.0));
    }

    #[test]
    fn every_catalog_factor_certifies_as_proper_hyperbolic() {
        use rand::{Rng, SeedableRng};
        let catalog = vec![
            FactorSpec::flat(1, 0.5).unwrap(),
            FactorSpec::flat(2, 1.0).unwrap(),
            FactorSpec::hyperboloid(2).unwrap(),
            FactorSpec::composite(
                CompositionSpec::product(vec![
                    FactorSpec::point(1.0).unwrap(),
                    FactorSpec::point(1.0).unwrap(),
                ])
                .unwrap(),
            ),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0xCA7A);
        for f in catalog {
            let chart = f.chart();
            let samples: Vec<Vec<f64>> = (0..20)
                .map(|_| f.domain().iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect())
                .collect();
            let verdict = equiaffine::classify_sphere(&chart, &samples, 1e-8);
            assert!(
                verdict.is_proper_sphere && verdict.is_hyperbolic,
                "{}: {verdict:?}",
                f.short_name()
            );
            assert!(verdict.center_residual <= 1e-8, "{}: {verdict:?}", f.short_name());
        }
    }

    #[test]
    fn flat_factor_domain_is_unit_box() {
        let f = FactorSpec::flat(3, 1.0).unwrap();
        assert_eq!(f.domain(), &[(-0.5, 0.5); 3]);
    }
}
