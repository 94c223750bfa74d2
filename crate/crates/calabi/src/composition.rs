//! The Calabi composition: welds `K >= 2` hyperbolic affine hyperspheres
//! (possibly 0-dimensional "points") into a new hyperbolic affine hypersphere
//! of dimension `n = K - 1 + Σ n_a`, and emits closed-form predictions for
//! every equiaffine invariant of the result.
//!
//! Coordinates on the composition are `(t^1, …, t^{K-1})` followed by one
//! block of factor coordinates per factor, in order. All public tensors use
//! 0-based coordinate indices in this layout.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equiaffine::{self, GeometryError, ImmersionChart};
use crate::factors::{FactorData, FactorError, FactorSpec};
use crate::jets::{Jet, JetError, JetSpace};
use crate::tensor::Tensor3;

#[derive(Debug, Error)]
pub enum CompositionError {
    #[error("a Calabi composition needs at least two factors, got {0}")]
    TooFewFactors(usize),
    #[error("factor weights must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("spec file error: {0}")]
    SpecFile(String),
    #[error("mean-curvature vectors require at least one positive-dimensional factor")]
    NoPositiveFactor,
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Jet(#[from] JetError),
}

type Result<T> = std::result::Result<T, CompositionError>;

/// An ordered list of factor hyperspheres with positive weights `c_a`.
#[derive(Clone, Debug)]
pub struct CompositionSpec {
    factors: Vec<FactorSpec>,
    weights: Vec<f64>,
}

/// Index bookkeeping of a composition: the partial sums
/// `f_a = n_1 + … + n_a + a` and the coordinate offset of each factor block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexLayout {
    /// Factor dimensions `n_a`.
    pub dims: Vec<usize>,
    /// `f[a] = dims[0] + … + dims[a] + (a + 1)`; `f[K-1] = n + 1`.
    pub f: Vec<usize>,
    /// First composed coordinate of factor `a`'s block.
    pub block_offset: Vec<usize>,
    /// Dimension of the composition.
    pub n: usize,
}

impl IndexLayout {
    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn t_count(&self) -> usize {
        self.k() - 1
    }

    /// Global coordinate index of local coordinate `i` of factor `a`.
    pub fn coord(&self, a: usize, i: usize) -> usize {
        self.block_offset[a] + i
    }
}

impl CompositionSpec {
    pub fn new(factors: Vec<FactorSpec>, weights: Vec<f64>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(CompositionError::TooFewFactors(factors.len()));
        }
        assert_eq!(factors.len(), weights.len(), "one weight per factor");
        for &w in &weights {
            if !(w > 0.0) {
                return Err(CompositionError::NonPositiveWeight(w));
            }
        }
        Ok(CompositionSpec { factors, weights })
    }

    /// All factors with unit weights.
    pub fn product(factors: Vec<FactorSpec>) -> Result<Self> {
        let weights = vec![1.0; factors.len()];
        CompositionSpec::new(factors, weights)
    }

    pub fn factors(&self) -> &[FactorSpec] {
        &self.factors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.factors.len()
    }

    /// Number of point factors.
    pub fn r(&self) -> usize {
        self.factors.iter().filter(|f| f.dim() == 0).count()
    }

    /// Number of positive-dimensional factors.
    pub fn s(&self) -> usize {
        self.k() - self.r()
    }

    /// Weight of factor `a` with the point value folded in; the closed-form
    /// constants assume 0-dimensional factors are normalized to 1.
    pub fn effective_weight(&self, a: usize) -> f64 {
        self.weights[a] * self.factors[a].point_value().unwrap_or(1.0)
    }

    pub fn layout(&self) -> IndexLayout {
        layout(self)
    }

    /// Stable human-readable identifier used in reports.
    pub fn id(&self) -> String {
        let parts: Vec<String> = self
            .factors
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| format!("{}:c={}", f.short_name(), w))
            .collect();
        parts.join("*")
    }

    /// Sampling box of the composed chart: `t in [-0.5, 0.5]^{K-1}` followed
    /// by the factor domains.
    pub fn domain(&self) -> Vec<(f64, f64)> {
        let mut box_ = vec![(-0.5, 0.5); self.k() - 1];
        for f in &self.factors {
            box_.extend_from_slice(f.domain());
        }
        box_
    }
}

/// Computes the `f`-sequence and block offsets of a composition.
pub fn layout(spec: &CompositionSpec) -> IndexLayout {
    let dims: Vec<usize> = spec.factors.iter().map(|f| f.dim()).collect();
    let k = dims.len();
    let mut f = Vec::with_capacity(k);
    let mut acc = 0usize;
    for (a, &d) in dims.iter().enumerate() {
        acc += d;
        f.push(acc + a + 1);
    }
    let n = k - 1 + dims.iter().sum::<usize>();
    let mut block_offset = Vec::with_capacity(k);
    let mut off = k - 1;
    for &d in &dims {
        block_offset.push(off);
        off += d;
    }
    assert_eq!(f[k - 1], n + 1, "f_K = n + 1");
    IndexLayout { dims, f, block_offset, n }
}

/// Jets of the weight functions `e_1, …, e_K` given seeded `t`-jets.
///
/// `e_a = exp(-t^{a-1}/(n_a + 1) + Σ_{λ >= a} t^λ / f_λ)` in 1-based
/// indexing; the `t^{a-1}` term is absent for the first factor.
pub fn weight_jets(
    layout: &IndexLayout,
    space: &JetSpace,
    t_seeds: &[Jet],
) -> std::result::Result<Vec<Jet>, JetError> {
    let k = layout.k();
    assert_eq!(t_seeds.len(), k - 1);
    let mut out = Vec::with_capacity(k);
    for a in 0..k {
        let mut log_e = space.zero();
        if a >= 1 {
            log_e = log_e + t_seeds[a - 1].scaled(-1.0 / (layout.dims[a] as f64 + 1.0));
        }
        for tc in a..k - 1 {
            log_e = log_e + t_seeds[tc].scaled(1.0 / layout.f[tc] as f64);
        }
        out.push(log_e.exp());
    }
    Ok(out)
}

/// Weight functions evaluated at a parameter point, as jets of the requested
/// order in the `K - 1` variables `t`.
pub fn weight_functions(spec: &CompositionSpec, t: &[f64], order: usize) -> Result<Vec<Jet>> {
    let layout = spec.layout();
    assert_eq!(t.len(), layout.t_count());
    let seeds = crate::jets::seed_point(t, order)?;
    let space = JetSpace::get(t.len(), order);
    Ok(weight_jets(&layout, &space, &seeds)?)
}

/// Builds the composed immersion chart
/// `x(t, p) = (c_1 e_1 x_1(p_1), …, c_K e_K x_K(p_K))`.
pub fn compose(spec: &CompositionSpec) -> ImmersionChart {
    let layout = spec.layout();
    let charts: Vec<ImmersionChart> = spec.factors.iter().map(|f| f.chart()).collect();
    let weights = spec.weights.clone();
    let domain = spec.domain();
    let n = layout.n;
    let k = layout.k();
    ImmersionChart::new(n, move |space, seeds| {
        let t_seeds = &seeds[..k - 1];
        let e = weight_jets(&layout, space, t_seeds)?;
        let mut out = Vec::with_capacity(n + 1);
        for a in 0..k {
            let off = layout.block_offset[a];
            let block = &seeds[off..off + layout.dims[a]];
            let coords = charts[a].eval_jets(space, block)?;
            let scale = e[a].scaled(weights[a]);
            out.extend(coords.iter().map(|c| scale.mul(c)));
        }
        Ok(out)
    })
    .with_domain(domain)
}

/// The structure constant `C` of the composition; the composed affine mean
/// curvature is `L1 = -1/(f_K C)`.
pub fn structure_constant(spec: &CompositionSpec) -> Result<f64> {
    let layout = spec.layout();
    let f_k = *layout.f.last().unwrap() as f64;
    let mut product = 1.0 / f_k;
    for (a, factor) in spec.factors.iter().enumerate() {
        let na = factor.dim() as f64;
        let w = spec.effective_weight(a);
        let l1 = factor.l1()?;
        product *= w.powf(2.0 * (na + 1.0))
            / ((na + 1.0).powf(na + 1.0) * (-l1).powf(na + 2.0));
    }
    Ok(product.powf(1.0 / (layout.n as f64 + 2.0)))
}

/// Predicted affine mean curvature `-1/(f_K C)`.
pub fn predicted_l1(spec: &CompositionSpec) -> Result<f64> {
    let layout = spec.layout();
    Ok(-1.0 / (*layout.f.last().unwrap() as f64 * structure_constant(spec)?))
}

/// The constants `(c, c')` making `x`, `x̄ = c(e_1 x_1, …)` and
/// `x̃ = (e_1 x_1, …, c' e_K x_K)` equiaffine equivalent:
/// `c = (Π c_a^{n_a+1})^{1/f_K}` and `c' = (Π c_a^{n_a+1})^{1/(n_K+1)}`.
pub fn normalization_constants(spec: &CompositionSpec) -> (f64, f64) {
    let layout = spec.layout();
    let mut p = 1.0;
    for (a, factor) in spec.factors.iter().enumerate() {
        p *= spec.weights[a].powf(factor.dim() as f64 + 1.0);
    }
    let f_k = *layout.f.last().unwrap() as f64;
    let n_k = *layout.dims.last().unwrap() as f64;
    (p.powf(1.0 / f_k), p.powf(1.0 / (n_k + 1.0)))
}

/// Closed-form values for every invariant of the composition at one
/// parameter point.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub c_constant: f64,
    pub l1: f64,
    /// Diagonal `t`-block metric values `g_λλ`, λ = 1..K-1.
    pub t_block_g: Vec<f64>,
    /// Conformal factor `(n_a+1)(-L1^{(a)})C` per factor (1.0 for points).
    pub conformal: Vec<f64>,
    /// Full predicted metric at the point.
    pub g: DMatrix<f64>,
    /// Full predicted Fubini-Pick form at the point.
    pub a_form: Tensor3,
    /// Full predicted induced connection at the point.
    pub gamma: Tensor3,
    /// Predicted `H = |det h|` at the point.
    pub h_value: f64,
    /// `(c, c')` normalization constants.
    pub normalization: (f64, f64),
    /// Mean-curvature vectors `H_α` (components on the composed coordinates),
    /// one per positive-dimensional factor.
    pub h_alpha: Vec<DVector<f64>>,
    /// Predicted pairings `g(H_α, H_β)`.
    pub h_alpha_pairings: DMatrix<f64>,
}

/// Evaluates every closed-form prediction at a composed parameter point.
/// `t`-dependent quantities use the composed point, factor tensors the factor
/// sub-points.
pub fn predict_all(spec: &CompositionSpec, point: &[f64]) -> Result<Prediction> {
    let layout = spec.layout();
    let n = layout.n;
    let k = layout.k();
    assert_eq!(point.len(), n, "point must have the composed dimension");
    let c = structure_constant(spec)?;
    let l1 = -1.0 / (*layout.f.last().unwrap() as f64 * c);

    let data: Vec<FactorData> = spec
        .factors
        .iter()
        .enumerate()
        .map(|(a, factor)| {
            let off = layout.block_offset[a];
            factor.invariants_at(&point[off..off + layout.dims[a]])
        })
        .collect::<std::result::Result<_, _>>()?;

    let fm = |a: usize| layout.f[a] as f64;

    // Metric: diagonal t-block, conformal factor blocks, zero off-blocks.
    let mut t_block_g = Vec::with_capacity(k - 1);
    for tc in 0..k - 1 {
        t_block_g.push(fm(tc + 1) * c / ((layout.dims[tc + 1] as f64 + 1.0) * fm(tc)));
    }
    let conformal: Vec<f64> = data
        .iter()
        .map(|d| (d.dim as f64 + 1.0) * (-d.l1) * c)
        .collect();
    let mut g = DMatrix::zeros(n, n);
    for tc in 0..k - 1 {
        g[(tc, tc)] = t_block_g[tc];
    }
    for a in 0..k {
        let off = layout.block_offset[a];
        for i in 0..layout.dims[a] {
            for j in 0..layout.dims[a] {
                g[(off + i, off + j)] = conformal[a] * data[a].g[(i, j)];
            }
        }
    }

    // Fubini-Pick: the five admissible families.
    let mut a_form = Tensor3::zeros(n);
    fn set_sym(t: &mut Tensor3, i: usize, j: usize, kk: usize, v: f64) {
        t[(i, j, kk)] = v;
        t[(i, kk, j)] = v;
        t[(j, i, kk)] = v;
        t[(j, kk, i)] = v;
        t[(kk, i, j)] = v;
        t[(kk, j, i)] = v;
    }
    for tc in 0..k - 1 {
        a_form[(tc, tc, tc)] =
            t_block_g[tc] * (1.0 / fm(tc) - 1.0 / (layout.dims[tc + 1] as f64 + 1.0));
        for uc in tc + 1..k - 1 {
            set_sym(&mut a_form, tc, tc, uc, t_block_g[tc] / fm(uc));
        }
    }
    for a in 0..k {
        let off = layout.block_offset[a];
        let na = layout.dims[a];
        for i in 0..na {
            for j in i..na {
                let gij = conformal[a] * data[a].g[(i, j)];
                if a >= 1 {
                    // t-slot a-1 pairs with the block via -(1/(n_a+1)) g.
                    set_sym(&mut a_form, off + i, off + j, a - 1, -gij / (na as f64 + 1.0));
                }
                for tc in a..k - 1 {
                    set_sym(&mut a_form, off + i, off + j, tc, gij / fm(tc));
                }
            }
            for j in 0..na {
                for kk in 0..na {
                    a_form[(off + i, off + j, off + kk)] =
                        (na as f64 + 1.0) * (-data[a].l1) * c * data[a].a_form[(i, j, kk)];
                }
            }
        }
    }

    // Induced connection: closed Christoffel symbols in the block pattern.
    let mut gamma = Tensor3::zeros(n);
    for i in 0..k - 1 {
        for j in 0..k - 1 {
            if i < j {
                gamma[(i, j, i)] = 1.0 / fm(j);
                gamma[(j, i, i)] = 1.0 / fm(j);
            } else if i == j {
                gamma[(i, i, i)] = 1.0 / fm(i) - 1.0 / (layout.dims[i + 1] as f64 + 1.0);
                for kk in i + 1..k - 1 {
                    gamma[(i, i, kk)] = (layout.dims[kk + 1] as f64 + 1.0) * fm(i + 1)
                        / ((layout.dims[i + 1] as f64 + 1.0) * fm(kk + 1) * fm(i));
                }
            }
        }
    }
    for a in 0..k {
        let off = layout.block_offset[a];
        let na = layout.dims[a];
        let napl = na as f64 + 1.0;
        for i in 0..na {
            for j in 0..na {
                // factor's own induced connection
                for kk in 0..na {
                    gamma[(off + i, off + j, off + kk)] = data[a].gamma[(i, j, kk)];
                }
                // t-components of the block-block symbols
                if a >= 1 {
                    gamma[(off + i, off + j, a - 1)] =
                        napl * fm(a - 1) / fm(a) * data[a].l1 * data[a].g[(i, j)];
                }
                for tc in a..k - 1 {
                    gamma[(off + i, off + j, tc)] = -napl * (layout.dims[tc + 1] as f64 + 1.0)
                        / fm(tc + 1)
                        * data[a].l1
                        * data[a].g[(i, j)];
                }
            }
            // mixed symbols Γ^{ī_a}_{λ ī_a}
            for tc in 0..k - 1 {
                let coef = if tc + 1 < a {
                    0.0
                } else if tc + 1 == a {
                    -1.0 / napl
                } else {
                    1.0 / fm(tc)
                };
                if coef != 0.0 {
                    gamma[(tc, off + i, off + i)] = coef;
                    gamma[(off + i, tc, off + i)] = coef;
                }
            }
        }
    }

    // H from the factor determinants.
    let f_k = *layout.f.last().unwrap() as f64;
    let mut h_value = f_k;
    for (a, d) in data.iter().enumerate() {
        let na = d.dim as f64;
        let w = spec.effective_weight(a);
        h_value *= w.powf((na + 1.0) * (f_k - 1.0)) * d.h_det.powf((f_k + 1.0) / (na + 2.0))
            / ((na + 1.0).powf(f_k - na) * (-d.l1).powf(f_k - na - 1.0));
    }

    // Mean-curvature vectors of the positive-dimensional factors.
    let positives: Vec<usize> = (0..k).filter(|&a| layout.dims[a] > 0).collect();
    let mut h_alpha = Vec::with_capacity(positives.len());
    for &a in &positives {
        let mut v = DVector::zeros(n);
        if a >= 1 {
            v[a - 1] = -fm(a - 1) / (fm(a) * c);
        }
        for tc in a..k - 1 {
            v[tc] = (layout.dims[tc + 1] as f64 + 1.0) / (fm(tc + 1) * c);
        }
        h_alpha.push(v);
    }
    let s = positives.len();
    let mut pairings = DMatrix::zeros(s, s);
    for (ai, &a) in positives.iter().enumerate() {
        for (bi, &b) in positives.iter().enumerate() {
            pairings[(ai, bi)] = if a == b {
                let na = layout.dims[a] as f64;
                (n as f64 - na) / (na + 1.0) * (-l1)
            } else {
                l1
            };
        }
    }

    Ok(Prediction {
        c_constant: c,
        l1,
        t_block_g,
        conformal,
        g,
        a_form,
        gamma,
        h_value,
        normalization: normalization_constants(spec),
        h_alpha,
        h_alpha_pairings: pairings,
    })
}

/// Engine-vs-closed-form mean-curvature data at a point.
#[derive(Clone, Debug)]
pub struct MeanCurvatureVectors {
    /// `H_α` traced out of the engine's Fubini–Pick form and metric.
    pub engine: Vec<DVector<f64>>,
    /// `H_α` from the closed-form coordinate expression.
    pub predicted: Vec<DVector<f64>>,
    pub pairings_engine: DMatrix<f64>,
    pub pairings_predicted: DMatrix<f64>,
    /// Worst componentwise disagreement between the two routes.
    pub vector_residual: f64,
    pub pairing_residual: f64,
}

/// Computes the mean-curvature vectors `H_α = (1/n_α) tr_{g_α} A^0_{αα}`
/// numerically from the engine and compares them with the closed form.
pub fn mean_curvature_vectors(
    spec: &CompositionSpec,
    point: &[f64],
) -> Result<MeanCurvatureVectors> {
    let layout = spec.layout();
    if spec.s() == 0 {
        return Err(CompositionError::NoPositiveFactor);
    }
    let n = layout.n;
    let chart = compose(spec);
    let inv = equiaffine::invariant_set(&chart, point)?;
    let pred = predict_all(spec, point)?;

    let positives: Vec<usize> = (0..layout.k()).filter(|&a| layout.dims[a] > 0).collect();
    let mut engine = Vec::with_capacity(positives.len());
    for &a in &positives {
        let off = layout.block_offset[a];
        let na = layout.dims[a];
        // inverse of the restricted block metric g_α
        let block = DMatrix::from_fn(na, na, |i, j| inv.frame.g[(off + i, off + j)]);
        let block_inv = block.try_inverse().ok_or(GeometryError::SingularFrame)?;
        let mut v = DVector::zeros(n);
        for kk in 0..n {
            let mut acc = 0.0;
            for i in 0..na {
                for j in 0..na {
                    // A^k_{ī j̄} = g^{kl} A_{ī j̄ l}
                    let mut a_up = 0.0;
                    for l in 0..n {
                        a_up += inv.frame.g_inv[(kk, l)] * inv.a_form[(off + i, off + j, l)];
                    }
                    acc += block_inv[(i, j)] * a_up;
                }
            }
            v[kk] = acc / na as f64;
        }
        engine.push(v);
    }

    let s = positives.len();
    let mut pairings_engine = DMatrix::zeros(s, s);
    for ai in 0..s {
        for bi in 0..s {
            let mut acc = 0.0;
            for kk in 0..n {
                for l in 0..n {
                    acc += inv.frame.g[(kk, l)] * engine[ai][kk] * engine[bi][l];
                }
            }
            pairings_engine[(ai, bi)] = acc;
        }
    }

    let mut vector_residual = 0.0f64;
    let scale = pred.h_alpha.iter().map(|v| v.amax()).fold(1e-300, f64::max);
    for (e, p) in engine.iter().zip(&pred.h_alpha) {
        vector_residual = vector_residual.max((e - p).amax() / scale);
    }
    let pairing_scale = pred.h_alpha_pairings.amax().max(1e-300);
    let pairing_residual = (&pairings_engine - &pred.h_alpha_pairings).amax() / pairing_scale;

    Ok(MeanCurvatureVectors {
        engine,
        predicted: pred.h_alpha,
        pairings_engine,
        pairings_predicted: pred.h_alpha_pairings,
        vector_residual,
        pairing_residual,
    })
}

// ---------------------------------------------------------------------------
// JSON spec files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    schema: u32,
    factors: Vec<FactorJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum FactorJson {
    Point {
        #[serde(default = "default_weight")]
        c: f64,
    },
    Flat {
        n0: usize,
        #[serde(rename = "C0")]
        c0: f64,
        #[serde(default = "default_weight")]
        c: f64,
    },
    Hyperboloid {
        n: usize,
        #[serde(default = "default_weight")]
        c: f64,
    },
    Composite {
        #[serde(default = "default_weight")]
        c: f64,
        factors: Vec<FactorJson>,
    },
}

fn default_weight() -> f64 {
    1.0
}

fn factor_from_json(j: &FactorJson) -> Result<(FactorSpec, f64)> {
    Ok(match j {
        FactorJson::Point { c } => (FactorSpec::point(1.0)?, *c),
        FactorJson::Flat { n0, c0, c } => (FactorSpec::flat(*n0, *c0)?, *c),
        FactorJson::Hyperboloid { n, c } => (FactorSpec::hyperboloid(*n)?, *c),
        FactorJson::Composite { c, factors } => {
            let mut fs = Vec::new();
            let mut ws = Vec::new();
            for f in factors {
                let (fac, w) = factor_from_json(f)?;
                fs.push(fac);
                ws.push(w);
            }
            (FactorSpec::composite(CompositionSpec::new(fs, ws)?), *c)
        }
    })
}

impl CompositionSpec {
    /// Parses the versioned JSON spec format. Unknown fields are rejected.
    pub fn from_json(text: &str) -> Result<CompositionSpec> {
        let file: SpecFile =
            serde_json::from_str(text).map_err(|e| CompositionError::SpecFile(e.to_string()))?;
        if file.schema != 1 {
            return Err(CompositionError::SpecFile(format!(
                "unsupported schema version {}, expected 1",
                file.schema
            )));
        }
        let mut fs = Vec::new();
        let mut ws = Vec::new();
        for f in &file.factors {
            let (fac, w) = factor_from_json(f)?;
            fs.push(fac);
            ws.push(w);
        }
        CompositionSpec::new(fs, ws)
    }
}

impl Prediction {
    /// Canonical JSON form of the closed-form data (floats with 17
    /// significant digits).
    pub fn to_json(&self) -> String {
        fn f(x: f64) -> String {
            if x.is_finite() {
                format!("{x:.16e}")
            } else {
                "null".to_string()
            }
        }
        fn list(values: impl IntoIterator<Item = f64>) -> String {
            let inner: Vec<String> = values.into_iter().map(f).collect();
            format!("[{}]", inner.join(", "))
        }
        let n = self.g.nrows();
        let mut out = String::from("{\n");
        out.push_str(&format!("  \"C\": {},\n", f(self.c_constant)));
        out.push_str(&format!("  \"L1\": {},\n", f(self.l1)));
        out.push_str(&format!("  \"c\": {},\n", f(self.normalization.0)));
        out.push_str(&format!("  \"c_prime\": {},\n", f(self.normalization.1)));
        out.push_str(&format!("  \"H\": {},\n", f(self.h_value)));
        out.push_str(&format!("  \"t_block_g\": {},\n", list(self.t_block_g.iter().copied())));
        out.push_str(&format!("  \"conformal\": {},\n", list(self.conformal.iter().copied())));
        out.push_str("  \"g\": [\n");
        for i in 0..n {
            out.push_str(&format!(
                "    {}{}\n",
                list((0..n).map(|j| self.g[(i, j)])),
                if i + 1 < n { "," } else { "" }
            ));
        }
        out.push_str("  ],\n");
        out.push_str("  \"a_form\": [\n");
        for i in 0..n {
            out.push_str("    [\n");
            for j in 0..n {
                out.push_str(&format!(
                    "      {}{}\n",
                    list((0..n).map(|k| self.a_form[(i, j, k)])),
                    if j + 1 < n { "," } else { "" }
                ));
            }
            out.push_str(&format!("    ]{}\n", if i + 1 < n { "," } else { "" }));
        }
        out.push_str("  ],\n");
        out.push_str("  \"h_alpha_pairings\": [\n");
        let s = self.h_alpha_pairings.nrows();
        for i in 0..s {
            out.push_str(&format!(
                "    {}{}\n",
                list((0..s).map(|j| self.h_alpha_pairings[(i, j)])),
                if i + 1 < s { "," } else { "" }
            ));
        }
        out.push_str("  ]\n}\n");
        out
    }
}
