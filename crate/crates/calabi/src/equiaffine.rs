//! Equiaffine invariants of a nondegenerate hypersurface immersion
//! `x : M^n -> R^{n+1}`, computed from jets of the position vector alone.
//!
//! The pipeline mirrors the classical construction. From order-`m` jets of
//! `x` at a point it forms
//!
//! - `h_ij = det(x_,1, …, x_,n, x_,ij)` and `H = |det h|`,
//! - the Blaschke metric `g_ij = H^{-1/(n+2)} h_ij` (sign-normalized so `g`
//!   is positive definite whenever `h` is definite),
//! - the affine normal `ξ = (1/n) Δ_g x`,
//! - the induced connection from the Gauss formula
//!   `x_,ij = Γ^k_ij x_,k + g_ij ξ`,
//! - the Fubini–Pick form by two independent routes (difference tensor vs.
//!   the covariant derivative of `h`), cross-checked against each other,
//! - the shape operator from `∂_i ξ = -B^k_i x_,k`, the Pick invariant, the
//!   curvature tensor of `g` and the covariant derivative `∇̂A`.
//!
//! All quantities are per-point pure functions of `(chart, u)`; charts are
//! immutable after construction, so evaluation parallelizes freely.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::jets::{border_cofactors, seed_point, Jet, JetError, JetLu, JetSpace};
use crate::tensor::{Tensor3, Tensor4};

/// Relative threshold below which `|det h|` counts as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;
/// Relative tolerance for the two Fubini–Pick routes.
pub const ROUTE_TOLERANCE: f64 = 1e-9;
/// Relative tolerance for the transversal component of `∂ξ`.
const TANGENTIAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("degenerate hypersurface: |det h| = {det:.3e} <= {threshold:.3e} * scale")]
    Degenerate { det: f64, threshold: f64 },
    #[error("singular coordinate frame (Jacobian rank < n at the sample point)")]
    SingularFrame,
    #[error("transversal component of d(xi) exceeds tolerance: {residual:.3e}")]
    NonTangential { residual: f64 },
    #[error("Fubini-Pick routes disagree: relative residual {residual:.3e}")]
    RouteMismatch { residual: f64 },
    #[error("Pick invariant undefined for a {dim}-dimensional chart")]
    UndefinedPick { dim: usize },
    #[error("chart produced {got} ambient coordinates, expected {expected}")]
    AmbientDim { expected: usize, got: usize },
    #[error("evaluation point has {got} coordinates, chart has dimension {expected}")]
    PointDim { expected: usize, got: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
}

type Result<T> = std::result::Result<T, GeometryError>;

/// Closure type evaluating a chart on seeded jets. The `JetSpace` is the
/// space the seeds live in (possibly larger than the chart's own dimension,
/// when a factor chart is evaluated inside a composition).
pub type ChartFn =
    dyn Fn(&JetSpace, &[Jet]) -> std::result::Result<Vec<Jet>, JetError> + Send + Sync;

/// A coordinate chart of a hypersurface: `dim` input coordinates, `dim + 1`
/// ambient coordinates, evaluated as jets of any requested order.
#[derive(Clone)]
pub struct ImmersionChart {
    dim: usize,
    eval: Arc<ChartFn>,
    domain: Vec<(f64, f64)>,
}

impl ImmersionChart {
    pub fn new(
        dim: usize,
        eval: impl Fn(&JetSpace, &[Jet]) -> std::result::Result<Vec<Jet>, JetError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        ImmersionChart { dim, eval: Arc::new(eval), domain: vec![(-0.5, 0.5); dim] }
    }

    /// Graph chart `u -> (u, f(u))`.
    pub fn from_graph(
        dim: usize,
        f: impl Fn(&JetSpace, &[Jet]) -> std::result::Result<Jet, JetError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        ImmersionChart::new(dim, move |space, u| {
            let mut out = u.to_vec();
            out.push(f(space, u)?);
            Ok(out)
        })
    }

    pub fn with_domain(mut self, domain: Vec<(f64, f64)>) -> Self {
        assert_eq!(domain.len(), self.dim);
        self.domain = domain;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim + 1
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    /// Evaluates the chart on already-seeded jets.
    pub fn eval_jets(
        &self,
        space: &JetSpace,
        seeds: &[Jet],
    ) -> std::result::Result<Vec<Jet>, JetError> {
        (self.eval)(space, seeds)
    }

    /// Evaluates the chart at a point, producing `dim + 1` ambient jets of
    /// the requested order.
    pub fn eval_at(&self, u: &[f64], order: usize) -> Result<Vec<Jet>> {
        if u.len() != self.dim {
            return Err(GeometryError::PointDim { expected: self.dim, got: u.len() });
        }
        let seeds = seed_point(u, order)?;
        let space = JetSpace::get(self.dim, order);
        let out = self.eval_jets(&space, &seeds)?;
        if out.len() != self.dim + 1 {
            return Err(GeometryError::AmbientDim { expected: self.dim + 1, got: out.len() });
        }
        Ok(out)
    }

    /// Ambient position at a point.
    pub fn value_at(&self, u: &[f64]) -> Result<DVector<f64>> {
        let jets = self.eval_at(u, 0)?;
        Ok(DVector::from_iterator(jets.len(), jets.iter().map(|j| j.value())))
    }

    /// Post-composition with an ambient linear map.
    pub fn transformed(&self, map: DMatrix<f64>) -> ImmersionChart {
        assert_eq!(map.nrows(), self.dim + 1);
        assert_eq!(map.ncols(), self.dim + 1);
        let inner = self.eval.clone();
        let dim = self.dim;
        ImmersionChart {
            dim,
            eval: Arc::new(move |space: &JetSpace, seeds: &[Jet]| {
                let x = inner(space, seeds)?;
                let m = map.nrows();
                Ok((0..m)
                    .map(|r| {
                        let mut acc = space.zero();
                        for (c, xc) in x.iter().enumerate() {
                            if map[(r, c)] != 0.0 {
                                acc = acc + xc.scaled(map[(r, c)]);
                            }
                        }
                        acc
                    })
                    .collect())
            }),
            domain: self.domain.clone(),
        }
    }

    /// Uniform ambient rescaling `x -> mu * x`.
    pub fn scaled(&self, mu: f64) -> ImmersionChart {
        let inner = self.eval.clone();
        ImmersionChart {
            dim: self.dim,
            eval: Arc::new(move |space: &JetSpace, seeds: &[Jet]| {
                Ok(inner(space, seeds)?.into_iter().map(|j| j.scaled(mu)).collect())
            }),
            domain: self.domain.clone(),
        }
    }
}

impl std::fmt::Debug for ImmersionChart {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ImmersionChart(dim = {})", self.dim)
    }
}

/// The metric layer at a point: `h`, `H = |det h|`, the Blaschke metric and
/// its inverse.
#[derive(Clone, Debug)]
pub struct MetricFrame {
    /// Sign-normalized `h_ij` (positive definite whenever `h` is definite).
    pub h: DMatrix<f64>,
    /// `H = |det h|`.
    pub big_h: f64,
    /// Blaschke metric `g_ij = H^{-1/(n+2)} h_ij`.
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `sqrt(|det g|)`.
    pub sqrt_det_g: f64,
    /// Orientation normalization applied to `h` (+1 or -1).
    pub sign_flip: f64,
    /// Set when `h` is indefinite after sign normalization.
    pub indefinite: bool,
}

/// Shape-operator data at a point.
#[derive(Clone, Debug)]
pub struct ShapeOperator {
    /// `B_ij` (symmetrized).
    pub b_form: DMatrix<f64>,
    /// `B^k_i` as a linear map on coordinates.
    pub b_operator: DMatrix<f64>,
    /// Affine principal curvatures (eigenvalues of `B^k_i`).
    pub eigenvalues: Vec<f64>,
    /// Affine mean curvature `L1 = tr(B)/n`.
    pub l1: f64,
}

/// Every invariant the engine computes at a single point.
///
/// Index conventions: `gamma[(i,j,k)] = Γ^k_ij`, `riemann[(i,j,k,l)]` is the
/// `∂_l`-component of `R(∂_i, ∂_j)∂_k`, and `nabla_a[(i,j,k,l)] = A_ijk,l`
/// (Levi-Civita covariant derivative).
#[derive(Clone, Debug)]
pub struct InvariantSet {
    pub frame: MetricFrame,
    /// Affine normal `ξ`.
    pub xi: DVector<f64>,
    /// Induced affine connection `Γ^k_ij`.
    pub gamma: Tensor3,
    /// Levi-Civita connection of `g`.
    pub gamma_lc: Tensor3,
    /// Fubini–Pick form `A_ijk` (fully symmetrized difference-tensor route).
    pub a_form: Tensor3,
    pub shape: ShapeOperator,
    /// Pick invariant; absent for one-dimensional charts.
    pub pick: Option<f64>,
    pub riemann: Tensor4,
    pub nabla_a: Tensor4,
    /// Worst `|μ_ij - g_ij|` over the Gauss decompositions (consistency).
    pub gauss_residual: f64,
    /// Relative disagreement of the two Fubini–Pick routes.
    pub route_residual: f64,
}

/// Verdict of the proper-affine-sphere test over a set of sample points.
#[derive(Clone, Debug)]
pub struct SphereVerdict {
    pub is_proper_sphere: bool,
    pub is_hyperbolic: bool,
    /// Mean of `L1` across samples.
    pub l1: f64,
    /// Worst relative eigenvalue spread of the shape operator.
    pub eigenvalue_spread: f64,
    /// Relative variation of `L1` across samples.
    pub l1_spread: f64,
    /// Worst relative residual of `ξ + L1 x = 0`.
    pub center_residual: f64,
    /// Engine failures at individual samples, if any.
    pub failures: Vec<String>,
}

// ---------------------------------------------------------------------------
// The jet pipeline
// ---------------------------------------------------------------------------

/// Jets of everything the metric layer needs, at one point.
struct Pipeline {
    n: usize,
    /// First derivatives `x_,i` (order m-1), indexed `[i][coord]`.
    dx: Vec<Vec<Jet>>,
    /// First derivatives truncated to order m-2.
    dxt: Vec<Vec<Jet>>,
    /// Second derivatives `x_,ij` (order m-2), indexed `[i][j][coord]`.
    ddx: Vec<Vec<Vec<Jet>>>,
    /// Sign-normalized `h_ij` jets (order m-2).
    h: Vec<Vec<Jet>>,
    /// `H = |det h|` (order m-2, positive value part).
    big_h: Jet,
    g: Vec<Vec<Jet>>,
    g_inv: Vec<Vec<Jet>>,
    sqrt_det_g: Jet,
    sign_flip: f64,
    indefinite: bool,
}

fn hadamard_scale(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut scale = 1.0;
    for i in 0..n {
        let norm: f64 = (0..n).map(|j| m[(i, j)] * m[(i, j)]).sum::<f64>().sqrt();
        scale *= norm;
    }
    scale
}

/// Approximate unit normal to the column span of the value Jacobian, found by
/// completing with the best coordinate direction and solving `M^T v = e_n`.
fn value_normal(jac: &DMatrix<f64>) -> Result<DVector<f64>> {
    let m = jac.nrows(); // n + 1
    let n = jac.ncols();
    let mut best: Option<(f64, usize)> = None;
    for k in 0..m {
        let mut full = DMatrix::zeros(m, m);
        full.view_mut((0, 0), (m, n)).copy_from(jac);
        full[(k, m - 1)] = 1.0;
        let det = full.clone().lu().determinant().abs();
        if best.is_none_or(|(b, _)| det > b) {
            best = Some((det, k));
        }
    }
    let (det, k) = best.unwrap();
    if det == 0.0 {
        return Err(GeometryError::SingularFrame);
    }
    let mut full = DMatrix::zeros(m, m);
    full.view_mut((0, 0), (m, n)).copy_from(jac);
    full[(k, m - 1)] = 1.0;
    let mut rhs = DVector::zeros(m);
    rhs[m - 1] = 1.0;
    let nu = full
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or(GeometryError::SingularFrame)?;
    let norm = nu.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(GeometryError::SingularFrame);
    }
    Ok(nu / norm)
}

fn pipeline(chart: &ImmersionChart, u: &[f64], order: usize) -> Result<Pipeline> {
    assert!(order >= 2, "the metric layer needs at least order-2 jets");
    let n = chart.dim();
    let x = chart.eval_at(u, order)?;
    let ambient = n + 1;

    let dx: Vec<Vec<Jet>> =
        (0..n).map(|i| x.iter().map(|xc| xc.partial(i)).collect()).collect();
    let ddx: Vec<Vec<Vec<Jet>>> = (0..n)
        .map(|i| (0..n).map(|j| dx[i].iter().map(|c| c.partial(j)).collect()).collect())
        .collect();
    let dxt: Vec<Vec<Jet>> = dx
        .iter()
        .map(|col| col.iter().map(|c| c.truncated(order - 2)).collect())
        .collect();

    // h_ij = det(x_,1, …, x_,n, x_,ij) via the cofactor row of the bordered
    // Jacobian; the cofactors are shared by all (i, j).
    let jac = DMatrix::from_fn(ambient, n, |r, c| dxt[c][r].value());
    let normal = value_normal(&jac)?;
    let w = border_cofactors(&dxt, normal.as_slice()).map_err(|e| match e {
        JetError::SingularMatrix { .. } => GeometryError::SingularFrame,
        other => GeometryError::Jet(other),
    })?;

    let space = w[0].space().clone();
    let mut h_raw: Vec<Vec<Jet>> = vec![vec![space.zero(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut acc = space.zero();
            for c in 0..ambient {
                acc = acc + w[c].mul(&ddx[i][j][c]);
            }
            h_raw[i][j] = acc.clone();
            h_raw[j][i] = acc;
        }
    }

    let h_val = DMatrix::from_fn(n, n, |i, j| h_raw[i][j].value());
    let eigen = h_val.clone().symmetric_eigen();
    let (mut pos, mut neg) = (0usize, 0usize);
    for &lambda in eigen.eigenvalues.iter() {
        if lambda > 0.0 {
            pos += 1;
        } else if lambda < 0.0 {
            neg += 1;
        }
    }
    let (sign_flip, indefinite) = if neg == n {
        (-1.0, false)
    } else if pos == n {
        (1.0, false)
    } else {
        (1.0, true)
    };
    let h: Vec<Vec<Jet>> = h_raw
        .into_iter()
        .map(|row| row.into_iter().map(|j| j.scaled(sign_flip)).collect())
        .collect();

    let det_h = JetLu::factor(h.clone())
        .map_err(|_| GeometryError::SingularFrame)?
        .det();
    let scale = hadamard_scale(&(h_val.clone() * sign_flip));
    if !(det_h.value().abs() > DEGENERACY_THRESHOLD * scale) {
        return Err(GeometryError::Degenerate {
            det: det_h.value().abs(),
            threshold: DEGENERACY_THRESHOLD,
        });
    }
    let big_h = det_h.scaled(det_h.value().signum());

    let conformal = big_h.powf(-1.0 / (n as f64 + 2.0))?;
    let g: Vec<Vec<Jet>> = h
        .iter()
        .map(|row| row.iter().map(|hij| conformal.mul(hij)).collect())
        .collect();
    let g_lu = JetLu::factor(g.clone()).map_err(|_| GeometryError::SingularFrame)?;
    let g_inv = g_lu.inverse()?;
    let det_g = g_lu.det();
    let sqrt_det_g = det_g.scaled(det_g.value().signum()).sqrt()?;

    Ok(Pipeline {
        n,
        dx,
        dxt,
        ddx,
        h,
        big_h,
        g,
        g_inv,
        sqrt_det_g,
        sign_flip,
        indefinite,
    })
}

impl Pipeline {
    fn metric_frame(&self) -> MetricFrame {
        let n = self.n;
        MetricFrame {
            h: DMatrix::from_fn(n, n, |i, j| self.h[i][j].value()),
            big_h: self.big_h.value(),
            g: DMatrix::from_fn(n, n, |i, j| self.g[i][j].value()),
            g_inv: DMatrix::from_fn(n, n, |i, j| self.g_inv[i][j].value()),
            sqrt_det_g: self.sqrt_det_g.value(),
            sign_flip: self.sign_flip,
            indefinite: self.indefinite,
        }
    }

    /// Affine normal as ambient jets, two orders below the metric layer.
    fn xi_jets(&self) -> Result<Vec<Jet>> {
        let n = self.n;
        let ambient = n + 1;
        // w^{ij} = sqrt|G| g^{ij}
        let mut weights: Vec<Vec<Jet>> = vec![Vec::with_capacity(n); n];
        for i in 0..n {
            for j in 0..n {
                weights[i].push(self.sqrt_det_g.mul(&self.g_inv[i][j]));
            }
        }
        let lower = self.g[0][0].order() - 1;
        let inv_sqrt = self.sqrt_det_g.truncated(lower).recip()?;
        let mut xi = Vec::with_capacity(ambient);
        for c in 0..ambient {
            let mut div = None;
            for i in 0..n {
                let mut flux = weights[i][0].mul(&self.dxt[0][c]);
                for j in 1..n {
                    flux = flux + weights[i][j].mul(&self.dxt[j][c]);
                }
                let term = flux.partial(i);
                div = Some(match div {
                    None => term,
                    Some(acc) => acc + term,
                });
            }
            let div = div.expect("n >= 1");
            xi.push(div.mul(&inv_sqrt).scaled(1.0 / n as f64));
        }
        Ok(xi)
    }
}

// ---------------------------------------------------------------------------
// Public per-operation entry points
// ---------------------------------------------------------------------------

/// `h`, `H`, `g`, `g^{-1}` and `sqrt|det g|` at a point.
pub fn blaschke_data(chart: &ImmersionChart, u: &[f64]) -> Result<MetricFrame> {
    Ok(pipeline(chart, u, 2)?.metric_frame())
}

/// The affine normal `ξ = (1/n) Δ_g x` at a point.
pub fn affine_normal_field(chart: &ImmersionChart, u: &[f64]) -> Result<DVector<f64>> {
    let pipe = pipeline(chart, u, 3)?;
    let xi = pipe.xi_jets()?;
    Ok(DVector::from_iterator(xi.len(), xi.iter().map(|j| j.value())))
}

/// Induced affine connection `Γ^k_ij` at a point.
pub fn induced_connection(chart: &ImmersionChart, u: &[f64]) -> Result<Tensor3> {
    Ok(invariant_set(chart, u)?.gamma)
}

/// Fubini–Pick form at a point, cross-checked between its two routes.
pub fn fubini_pick_form(chart: &ImmersionChart, u: &[f64]) -> Result<Tensor3> {
    Ok(invariant_set(chart, u)?.a_form)
}

/// Shape operator, affine principal curvatures and `L1` at a point.
pub fn shape_operator(chart: &ImmersionChart, u: &[f64]) -> Result<ShapeOperator> {
    let pipe = pipeline(chart, u, 4)?;
    let xi = pipe.xi_jets()?;
    shape_from_pipeline(&pipe, &xi)
}

/// Pick invariant `J = (1/(n(n-1))) |A|^2_g`; undefined for `n < 2`.
pub fn pick_invariant(frame: &MetricFrame, a: &Tensor3) -> Result<f64> {
    let n = a.dim();
    if n < 2 {
        return Err(GeometryError::UndefinedPick { dim: n });
    }
    Ok(a_norm_squared(&frame.g_inv, a) / (n as f64 * (n as f64 - 1.0)))
}

/// `|A|^2_g = g^{ii'} g^{jj'} g^{kk'} A_ijk A_i'j'k'`.
pub fn a_norm_squared(g_inv: &DMatrix<f64>, a: &Tensor3) -> f64 {
    let n = a.dim();
    let up1 = Tensor3::from_fn(n, |i, j, k| (0..n).map(|m| g_inv[(i, m)] * a[(m, j, k)]).sum());
    let up2 = Tensor3::from_fn(n, |i, j, k| (0..n).map(|m| g_inv[(j, m)] * up1[(i, m, k)]).sum());
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let up3: f64 = (0..n).map(|m| g_inv[(k, m)] * up2[(i, j, m)]).sum();
                total += up3 * a[(i, j, k)];
            }
        }
    }
    total
}

/// Covariant derivative `A_ijk,l` with respect to the Levi-Civita connection.
pub fn nabla_a(chart: &ImmersionChart, u: &[f64]) -> Result<Tensor4> {
    Ok(invariant_set(chart, u)?.nabla_a)
}

/// Riemann tensor of the Blaschke metric, `R(∂_i,∂_j)∂_k` along `∂_l`.
pub fn curvature_tensor(chart: &ImmersionChart, u: &[f64]) -> Result<Tensor4> {
    Ok(invariant_set(chart, u)?.riemann)
}

fn shape_from_pipeline(pipe: &Pipeline, xi: &[Jet]) -> Result<ShapeOperator> {
    let n = pipe.n;
    let ambient = n + 1;
    // Frame matrix [x_,1 … x_,n ξ] at the value level.
    let mut frame = DMatrix::zeros(ambient, ambient);
    for (i, col) in pipe.dxt.iter().enumerate() {
        for (r, jet) in col.iter().enumerate() {
            frame[(r, i)] = jet.value();
        }
    }
    for (r, jet) in xi.iter().enumerate() {
        frame[(r, n)] = jet.value();
    }
    let lu = frame.lu();

    let g_val = DMatrix::from_fn(n, n, |i, j| pipe.g[i][j].value());
    let mut b_op = DMatrix::zeros(n, n);
    for i in 0..n {
        let dxi = DVector::from_fn(ambient, |r, _| xi[r].gradient(i));
        let sol = lu.solve(&dxi).ok_or(GeometryError::SingularFrame)?;
        let scale = sol.amax().max(1.0);
        let residual = sol[n].abs() / scale;
        if residual > TANGENTIAL_TOLERANCE {
            return Err(GeometryError::NonTangential { residual });
        }
        for k in 0..n {
            b_op[(k, i)] = -sol[k];
        }
    }
    let b_form_raw = &g_val * &b_op; // B_ij = g_jk B^k_i, row = i? see below
    // g_val * b_op has entries sum_k g[j][k] B^k_i at (j, i); symmetrize.
    let b_form = DMatrix::from_fn(n, n, |i, j| (b_form_raw[(i, j)] + b_form_raw[(j, i)]) / 2.0);
    let l1 = b_op.trace() / n as f64;

    let eigenvalues = match g_val.clone().cholesky() {
        Some(chol) => {
            let l_inv = chol
                .l()
                .try_inverse()
                .ok_or(GeometryError::SingularFrame)?;
            let sym = &l_inv * &b_form * l_inv.transpose();
            let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
            ev.sort_by(f64::total_cmp);
            ev
        }
        None => {
            let mut ev: Vec<f64> = b_op
                .complex_eigenvalues()
                .iter()
                .map(|z| z.re)
                .collect();
            ev.sort_by(f64::total_cmp);
            ev
        }
    };

    Ok(ShapeOperator { b_form, b_operator: b_op, eigenvalues, l1 })
}

/// Computes every invariant at a point from a single order-4 evaluation.
pub fn invariant_set(chart: &ImmersionChart, u: &[f64]) -> Result<InvariantSet> {
    let n = chart.dim();
    let ambient = n + 1;
    let pipe = pipeline(chart, u, 4)?;
    let frame = pipe.metric_frame();
    let xi = pipe.xi_jets()?; // order 1

    // --- induced connection (jets, order 1) ------------------------------
    let order1 = 1;
    let mut m: Vec<Vec<Jet>> = Vec::with_capacity(ambient);
    for r in 0..ambient {
        let mut row = Vec::with_capacity(ambient);
        for c in 0..n {
            row.push(pipe.dx[c][r].truncated(order1));
        }
        row.push(xi[r].clone());
        m.push(row);
    }
    let frame_lu = JetLu::factor(m).map_err(|_| GeometryError::SingularFrame)?;

    let space1 = xi[0].space().clone();
    let mut gamma_jets: Vec<Vec<Vec<Jet>>> = vec![vec![Vec::new(); n]; n];
    let mut gauss_residual = 0.0f64;
    let g_scale = frame.g.amax().max(1e-300);
    for i in 0..n {
        for j in 0..=i {
            let rhs: Vec<Jet> = (0..ambient).map(|r| pipe.ddx[i][j][r].truncated(order1)).collect();
            let sol = frame_lu.solve(&rhs)?;
            gauss_residual =
                gauss_residual.max((sol[n].value() - pipe.g[i][j].value()).abs() / g_scale);
            let symbols: Vec<Jet> = sol[..n].to_vec();
            gamma_jets[i][j] = symbols.clone();
            if i != j {
                gamma_jets[j][i] = symbols;
            }
        }
    }

    // --- Levi-Civita connection (jets, order 1) --------------------------
    let dg: Vec<Vec<Vec<Jet>>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|i| (0..n).map(|j| pipe.g[i][j].partial(k)).collect())
                .collect()
        })
        .collect();
    let g_inv1: Vec<Vec<Jet>> = pipe
        .g_inv
        .iter()
        .map(|row| row.iter().map(|e| e.truncated(order1)).collect())
        .collect();
    let mut gamma_lc_jets: Vec<Vec<Vec<Jet>>> = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut symbols = Vec::with_capacity(n);
            for k in 0..n {
                let mut acc = space1.zero();
                for l in 0..n {
                    let christoffel_first =
                        &(&dg[i][j][l] + &dg[j][i][l]) - &dg[l][i][j];
                    acc = acc + g_inv1[k][l].mul(&christoffel_first).scaled(0.5);
                }
                symbols.push(acc);
            }
            gamma_lc_jets[i][j] = symbols.clone();
            if i != j {
                gamma_lc_jets[j][i] = symbols;
            }
        }
    }

    // --- Fubini-Pick, route 1: difference tensor (jets) -------------------
    let g1: Vec<Vec<Jet>> = pipe
        .g
        .iter()
        .map(|row| row.iter().map(|e| e.truncated(order1)).collect())
        .collect();
    let mut a_jets: Vec<Vec<Vec<Jet>>> = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut comps = Vec::with_capacity(n);
            for k in 0..n {
                let mut acc = space1.zero();
                for l in 0..n {
                    let diff = &gamma_jets[i][j][l] - &gamma_lc_jets[i][j][l];
                    acc = acc + g1[k][l].mul(&diff);
                }
                comps.push(acc);
            }
            a_jets[i][j] = comps.clone();
            if i != j {
                a_jets[j][i] = comps;
            }
        }
    }
    // Symmetrize in all three slots; antisymmetry in (i,j) is impossible by
    // construction, so averaging the three cyclic placements of k suffices.
    let a_raw = Tensor3::from_fn(n, |i, j, k| a_jets[i][j][k].value());
    let a_sym_jets: Vec<Vec<Vec<Jet>>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| {
                            (&(&a_jets[i][j][k] + &a_jets[k][i][j]) + &a_jets[j][k][i])
                                .scaled(1.0 / 3.0)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let a_form = a_raw.symmetrized();

    // --- Fubini-Pick, route 2: covariant derivative of h (values) --------
    // h_ijk = ∂_k h_ij + h_ij ω^{n+1}_{n+1}(∂_k) - h_lj Γ^l_ik - h_il Γ^l_jk
    // with ω^{n+1}_{n+1} = -(1/(n+2)) d log H, then A = -(1/2) H^{-1/(n+2)} h_ijk.
    let h_val = &frame.h;
    let conformal = frame.big_h.powf(-1.0 / (n as f64 + 2.0));
    let dlog_h: Vec<f64> =
        (0..n).map(|k| pipe.big_h.gradient(k) / pipe.big_h.value()).collect();
    let mut a_route2 = Tensor3::zeros(n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut hijk = pipe.h[i][j].gradient(k) - h_val[(i, j)] * dlog_h[k] / (n as f64 + 2.0);
                for l in 0..n {
                    hijk -= h_val[(l, j)] * gamma_jets[i][k][l].value()
                        + h_val[(i, l)] * gamma_jets[j][k][l].value();
                }
                a_route2[(i, j, k)] = -0.5 * conformal * hijk;
            }
        }
    }
    let a_route2 = a_route2.symmetrized();
    let route_scale = a_form
        .max_abs()
        .max(a_route2.max_abs())
        .max(frame.g.amax());
    let route_residual = a_form.max_abs_diff(&a_route2) / route_scale;
    if route_residual > ROUTE_TOLERANCE {
        return Err(GeometryError::RouteMismatch { residual: route_residual });
    }

    // --- shape operator ---------------------------------------------------
    let shape = shape_from_pipeline(&pipe, &xi)?;
    let pick = if n >= 2 {
        Some(pick_invariant(&frame, &a_form)?)
    } else {
        None
    };

    // --- curvature of g ----------------------------------------------------
    // R^l_ijk = ∂_i Γ̄^l_jk - ∂_j Γ̄^l_ik + Γ̄^l_im Γ̄^m_jk - Γ̄^l_jm Γ̄^m_ik
    let lc = Tensor3::from_fn(n, |i, j, k| gamma_lc_jets[i][j][k].value());
    let gamma = Tensor3::from_fn(n, |i, j, k| gamma_jets[i][j][k].value());
    let riemann = Tensor4::from_fn(n, |i, j, k, l| {
        let mut r = gamma_lc_jets[j][k][l].gradient(i) - gamma_lc_jets[i][k][l].gradient(j);
        for m in 0..n {
            r += lc[(i, m, l)] * lc[(j, k, m)] - lc[(j, m, l)] * lc[(i, k, m)];
        }
        r
    });

    // --- ∇̂A (values) -------------------------------------------------------
    let a_val = Tensor3::from_fn(n, |i, j, k| a_sym_jets[i][j][k].value());
    let nabla = Tensor4::from_fn(n, |i, j, k, l| {
        let mut v = a_sym_jets[i][j][k].gradient(l);
        for m in 0..n {
            v -= lc[(l, i, m)] * a_val[(m, j, k)]
                + lc[(l, j, m)] * a_val[(i, m, k)]
                + lc[(l, k, m)] * a_val[(i, j, m)];
        }
        v
    });

    Ok(InvariantSet {
        frame,
        xi: DVector::from_iterator(ambient, xi.iter().map(|j| j.value())),
        gamma,
        gamma_lc: lc,
        a_form,
        shape,
        pick,
        riemann,
        nabla_a: nabla,
        gauss_residual,
        route_residual,
    })
}

/// Tests whether a chart is a proper affine hypersphere centered at the
/// origin, by sampling. The verdict carries the worst residuals; engine
/// failures are recorded instead of being thrown.
pub fn classify_sphere(chart: &ImmersionChart, samples: &[Vec<f64>], tol: f64) -> SphereVerdict {
    assert!(samples.len() >= 3, "classify_sphere needs at least 3 sample points");
    let mut failures = Vec::new();
    let mut l1s: Vec<f64> = Vec::new();
    let mut eig_spread = 0.0f64;
    let mut center_residual = 0.0f64;

    for point in samples {
        let shape = match pipeline(chart, point, 4).and_then(|pipe| {
            let xi = pipe.xi_jets()?;
            let shape = shape_from_pipeline(&pipe, &xi)?;
            let x = chart.value_at(point)?;
            Ok((shape, xi, x))
        }) {
            Ok(v) => v,
            Err(e) => {
                failures.push(format!("at {point:?}: {e}"));
                continue;
            }
        };
        let (shape, xi, x) = shape;
        let (lo, hi) = (shape.eigenvalues[0], shape.eigenvalues[shape.eigenvalues.len() - 1]);
        let scale = shape
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-12);
        eig_spread = eig_spread.max((hi - lo) / scale);

        let xi_val = DVector::from_iterator(xi.len(), xi.iter().map(|j| j.value()));
        let center = &xi_val + &x * shape.l1;
        let center_scale = xi_val.amax().max(shape.l1.abs() * x.amax()).max(1e-12);
        center_residual = center_residual.max(center.amax() / center_scale);
        l1s.push(shape.l1);
    }

    if l1s.is_empty() {
        return SphereVerdict {
            is_proper_sphere: false,
            is_hyperbolic: false,
            l1: f64::NAN,
            eigenvalue_spread: f64::NAN,
            l1_spread: f64::NAN,
            center_residual: f64::NAN,
            failures,
        };
    }

    let mean_l1 = l1s.iter().sum::<f64>() / l1s.len() as f64;
    let (min_l1, max_l1) = l1s
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let l1_spread = (max_l1 - min_l1) / mean_l1.abs().max(1e-12);

    let is_sphere = failures.is_empty() && eig_spread <= tol && l1_spread <= tol;
    let is_proper = is_sphere && center_residual <= tol && mean_l1.abs() > tol;
    SphereVerdict {
        is_proper_sphere: is_proper,
        is_hyperbolic: is_proper && mean_l1 < 0.0,
        l1: mean_l1,
        eigenvalue_spread: eig_spread,
        l1_spread,
        center_residual,
        failures,
    }
}
