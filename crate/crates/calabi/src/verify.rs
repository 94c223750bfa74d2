//! Property-test harness: checks every closed-form claim about a Calabi
//! composition against the engine at randomized sample points, plus the
//! commutativity / associativity / equivalence laws and the structural
//! identities that hold on every nondegenerate chart.
//!
//! All sampling is deterministic under the caller-provided seed; the report
//! is assembled in a fixed order, so identical inputs give byte-identical
//! serialized reports. Engine failures are recorded as failed checks rather
//! than thrown.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::composition::{self, CompositionSpec, IndexLayout};
use crate::equiaffine::{self, ImmersionChart, InvariantSet};
use crate::factors::FactorSpec;
use crate::report::{CheckResult, VerificationReport};
use crate::tensor::Tensor3;

/// Component of a composed coordinate index: a shared `t`-slot or a factor
/// block.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Slot {
    T(usize),
    Block(usize),
}

fn slot(layout: &IndexLayout, idx: usize) -> Slot {
    if idx < layout.t_count() {
        return Slot::T(idx);
    }
    for a in (0..layout.k()).rev() {
        if layout.dims[a] > 0 && idx >= layout.block_offset[a] {
            return Slot::Block(a);
        }
    }
    unreachable!("index {idx} outside layout")
}

/// Index triples on which the composed Fubini–Pick form may be nonzero.
fn admissible_triple(layout: &IndexLayout, i: usize, j: usize, k: usize) -> bool {
    let mut ts: Vec<usize> = Vec::with_capacity(3);
    let mut blocks: Vec<usize> = Vec::with_capacity(3);
    for idx in [i, j, k] {
        match slot(layout, idx) {
            Slot::T(t) => ts.push(t),
            Slot::Block(a) => blocks.push(a),
        }
    }
    match blocks.len() {
        0 => {
            // pure t: a doubled smaller index with a larger one (or all equal)
            ts.sort_unstable();
            ts[0] == ts[1]
        }
        2 => {
            if blocks[0] != blocks[1] {
                return false;
            }
            // one t-slot tc attached to block a: allowed iff tc + 1 >= a
            ts[0] + 1 >= blocks[0]
        }
        3 => blocks[0] == blocks[1] && blocks[1] == blocks[2],
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Structural identities of a single invariant set
// ---------------------------------------------------------------------------

/// `max_k |Σ_ij g^{ij} A_ijk|`, scaled by `max(|A|, |g|)`.
pub fn apolarity_residual(inv: &InvariantSet) -> (f64, f64) {
    let n = inv.a_form.dim();
    let mut worst = 0.0f64;
    for k in 0..n {
        let mut trace = 0.0;
        for i in 0..n {
            for j in 0..n {
                trace += inv.frame.g_inv[(i, j)] * inv.a_form[(i, j, k)];
            }
        }
        worst = worst.max(trace.abs());
    }
    let scale = inv.a_form.max_abs().max(inv.frame.g.amax());
    (worst, worst / scale)
}

/// Residual of `Σ_l A^l_{ij,l} = (n/2)(L1 g_ij - B_ij)`.
pub fn trace_identity_residual(inv: &InvariantSet) -> (f64, f64) {
    let n = inv.a_form.dim();
    let l1 = inv.shape.l1;
    let mut worst = 0.0f64;
    let mut scale = (l1.abs() * inv.frame.g.amax()).max(1e-300);
    for i in 0..n {
        for j in 0..n {
            let mut lhs = 0.0;
            for l in 0..n {
                for m in 0..n {
                    lhs += inv.frame.g_inv[(l, m)] * inv.nabla_a[(m, i, j, l)];
                }
            }
            let rhs = 0.5 * n as f64 * (l1 * inv.frame.g[(i, j)] - inv.shape.b_form[(i, j)]);
            worst = worst.max((lhs - rhs).abs());
            scale = scale.max(lhs.abs()).max(rhs.abs());
        }
    }
    (worst, worst / scale)
}

/// Residual of the Codazzi identity for the cubic form,
/// `A_{ijk,l} - A_{ijl,k} = (g_ik B_jl - g_jl B_ik - g_il B_jk + g_jk B_il)/2`
/// (the arrangement whose right side vanishes on affine spheres).
pub fn codazzi_residual(inv: &InvariantSet) -> (f64, f64) {
    let n = inv.a_form.dim();
    let g = &inv.frame.g;
    let b = &inv.shape.b_form;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = inv.nabla_a[(i, j, k, l)] - inv.nabla_a[(i, j, l, k)];
                    let rhs = 0.5
                        * (g[(i, k)] * b[(j, l)] - g[(j, l)] * b[(i, k)] - g[(i, l)] * b[(j, k)]
                            + g[(j, k)] * b[(i, l)]);
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    let scale = inv
        .nabla_a
        .max_abs()
        .max(inv.a_form.max_abs())
        .max(inv.shape.l1.abs() * g.amax());
    (worst, worst / scale)
}

/// Residual of the affine Gauss equation of an affine hypersphere,
/// `R(X,Y)Z = L1 (g(Y,Z)X - g(X,Z)Y) - [A(X), A(Y)]Z`.
pub fn gauss_equation_residual(inv: &InvariantSet) -> (f64, f64) {
    let n = inv.a_form.dim();
    let g = &inv.frame.g;
    let l1 = inv.shape.l1;
    // A as operators: (A_i)^l_k = g^{lm} A_{ikm}
    let a_op = Tensor3::from_fn(n, |i, k, l| {
        (0..n).map(|m| inv.frame.g_inv[(l, m)] * inv.a_form[(i, k, m)]).sum()
    });
    let mut worst = 0.0f64;
    let mut scale = (l1.abs() * g.amax()).max(1e-300);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut comm = 0.0;
                    for m in 0..n {
                        comm += a_op[(i, m, l)] * a_op[(j, k, m)]
                            - a_op[(j, m, l)] * a_op[(i, k, m)];
                    }
                    let kron_i = if l == i { 1.0 } else { 0.0 };
                    let kron_j = if l == j { 1.0 } else { 0.0 };
                    let rhs = l1 * (g[(j, k)] * kron_i - g[(i, k)] * kron_j) - comm;
                    let lhs = inv.riemann[(i, j, k, l)];
                    worst = worst.max((lhs - rhs).abs());
                    scale = scale.max(lhs.abs());
                }
            }
        }
    }
    (worst, worst / scale)
}

/// Relative deviation of `B` from `L1 g` (zero on affine spheres).
pub fn sphere_deviation(inv: &InvariantSet) -> f64 {
    let diff = (&inv.shape.b_form - &inv.frame.g * inv.shape.l1).amax();
    diff / (inv.shape.l1.abs() * inv.frame.g.amax()).max(1e-300)
}

/// `|∇̂A| / max(|A|, |g|)`.
pub fn nabla_a_relative(inv: &InvariantSet) -> f64 {
    inv.nabla_a.max_abs() / inv.a_form.max_abs().max(inv.frame.g.amax())
}

// ---------------------------------------------------------------------------
// Sampling helpers
// ---------------------------------------------------------------------------

fn sample_in(rng: &mut ChaCha8Rng, domain: &[(f64, f64)]) -> Vec<f64> {
    domain.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect()
}

/// A random ambient linear map of determinant +1.
pub fn random_unimodular(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    loop {
        let mut m = DMatrix::from_fn(n, n, |i, j| {
            let base = if i == j { 1.0 } else { 0.0 };
            base + rng.gen_range(-0.35..0.35)
        });
        let det: f64 = m.clone().lu().determinant();
        if det.abs() < 0.2 {
            continue;
        }
        if det < 0.0 {
            for i in 0..n {
                m[(i, 0)] = -m[(i, 0)];
            }
        }
        let scale = det.abs().powf(-1.0 / n as f64);
        return m * scale;
    }
}

/// Draws a composition from the randomized family used by the acceptance
/// suite: `K in 2..=4`, factors from the catalog (points, flat hyperspheres
/// with `n0 <= 3`, hyperboloids with `n <= 2`, optionally one level of
/// composite nesting), weights `c_a in [0.5, 3]`, total dimension capped.
pub fn random_spec(rng: &mut ChaCha8Rng, allow_composite: bool) -> CompositionSpec {
    fn random_factor(rng: &mut ChaCha8Rng, allow_composite: bool) -> FactorSpec {
        let top = if allow_composite { 10 } else { 8 };
        match rng.gen_range(0..top) {
            0..=2 => FactorSpec::point(1.0).expect("unit point"),
            3..=5 => {
                let n0 = rng.gen_range(1..=3usize);
                let c0 = [0.5, 1.0, 3.0][rng.gen_range(0..3usize)];
                FactorSpec::flat(n0, c0).expect("flat factor")
            }
            6..=7 => {
                let n = rng.gen_range(1..=2usize);
                FactorSpec::hyperboloid(n).expect("hyperboloid factor")
            }
            _ => {
                let k = rng.gen_range(2..=3usize);
                let factors: Vec<FactorSpec> = (0..k)
                    .map(|_| match rng.gen_range(0..3usize) {
                        0 => FactorSpec::point(1.0).expect("unit point"),
                        1 => FactorSpec::flat(rng.gen_range(1..=2usize), 1.0)
                            .expect("flat factor"),
                        _ => FactorSpec::hyperboloid(1).expect("hyperboloid factor"),
                    })
                    .collect();
                let weights = (0..k).map(|_| rng.gen_range(0.5..3.0)).collect();
                FactorSpec::composite(
                    CompositionSpec::new(factors, weights).expect("inner composition"),
                )
            }
        }
    }
    loop {
        let k = rng.gen_range(2..=4usize);
        let factors: Vec<FactorSpec> =
            (0..k).map(|_| random_factor(rng, allow_composite)).collect();
        let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..3.0)).collect();
        let spec = CompositionSpec::new(factors, weights).expect("valid spec");
        if spec.layout().n <= 10 {
            return spec;
        }
    }
}

// ---------------------------------------------------------------------------
// verify_spec
// ---------------------------------------------------------------------------

struct Measured {
    name: &'static str,
    abs: f64,
    rel: f64,
    /// Base tolerance at the default `tol = 1e-8`.
    base: f64,
}

fn measure(name: &'static str, abs: f64, scale: f64, base: f64) -> Measured {
    Measured { name, abs, rel: abs / scale.max(1e-300), base }
}

/// Runs the full invariants-vs-prediction suite at `n_samples` deterministic
/// points. Engine errors are folded into the report.
pub fn verify_spec(
    spec: &CompositionSpec,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> VerificationReport {
    verify_spec_transformed(spec, n_samples, tol, seed, None)
}

/// Same as [`verify_spec`] but with an optional ambient unimodular map
/// applied to the composed chart; the predictions are equiaffine invariants,
/// so they must still hold.
pub fn verify_spec_transformed(
    spec: &CompositionSpec,
    n_samples: usize,
    tol: f64,
    seed: u64,
    transform: Option<&DMatrix<f64>>,
) -> VerificationReport {
    let start = std::time::Instant::now();
    assert!(n_samples >= 1 && tol > 0.0);
    let layout = spec.layout();
    let chart = match transform {
        Some(m) => composition::compose(spec).transformed(m.clone()),
        None => composition::compose(spec),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> =
        (0..n_samples).map(|_| sample_in(&mut rng, chart.domain())).collect();

    // tolerances scale with the user knob relative to the 1e-8 default and,
    // defensively, with the conditioning of the metric
    let knob = tol / 1e-8;

    type SampleResult = Result<(Vec<Measured>, f64), String>;
    let outcomes: Vec<SampleResult> = points
        .par_iter()
        .map(|point| {
            let inv = equiaffine::invariant_set(&chart, point).map_err(|e| e.to_string())?;
            let pred = composition::predict_all(spec, point).map_err(|e| e.to_string())?;
            let mut out = Vec::new();
            let n = layout.n;
            let tc = layout.t_count();
            let g_scale = pred.g.amax();

            // metric blocks
            let mut t_abs = 0.0f64;
            for i in 0..tc {
                t_abs = t_abs.max((inv.frame.g[(i, i)] - pred.t_block_g[i]).abs());
            }
            out.push(measure("metric/t_block", t_abs, g_scale, 1e-8));
            if spec.s() > 0 {
                let mut blk_abs = 0.0f64;
                for a in 0..layout.k() {
                    let off = layout.block_offset[a];
                    for i in 0..layout.dims[a] {
                        for j in 0..layout.dims[a] {
                            blk_abs = blk_abs.max(
                                (inv.frame.g[(off + i, off + j)] - pred.g[(off + i, off + j)])
                                    .abs(),
                            );
                        }
                    }
                }
                out.push(measure("metric/factor_blocks", blk_abs, g_scale, 1e-8));
                let mut off_abs = 0.0f64;
                for i in 0..n {
                    for j in 0..n {
                        if pred.g[(i, j)] == 0.0 {
                            off_abs = off_abs.max(inv.frame.g[(i, j)].abs());
                        }
                    }
                }
                out.push(measure("metric/off_blocks", off_abs, g_scale, 1e-10));
            }
            out.push(measure(
                "metric/h_determinant",
                (inv.frame.big_h - pred.h_value).abs(),
                pred.h_value,
                1e-8,
            ));

            // Fubini-Pick families and vanishing outside them
            let a_scale = pred.a_form.max_abs().max(g_scale);
            out.push(measure(
                "fubini_pick/families",
                inv.a_form.max_abs_diff(&pred.a_form),
                a_scale,
                1e-8,
            ));
            let mut outside = 0.0f64;
            let mut has_outside = false;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        if !admissible_triple(&layout, i, j, k) {
                            has_outside = true;
                            outside = outside.max(inv.a_form[(i, j, k)].abs());
                        }
                    }
                }
            }
            if has_outside {
                out.push(measure(
                    "fubini_pick/outside_families",
                    outside,
                    inv.a_form.max_abs().max(g_scale),
                    1e-10,
                ));
            }

            // induced connection
            out.push(measure(
                "connection/christoffel",
                inv.gamma.max_abs_diff(&pred.gamma),
                pred.gamma.max_abs().max(1.0),
                1e-8,
            ));

            // structural identities
            let (abs, rel) = apolarity_residual(&inv);
            out.push(Measured { name: "identities/apolarity", abs, rel, base: 1e-9 });
            let (abs, rel) = trace_identity_residual(&inv);
            out.push(Measured { name: "identities/trace", abs, rel, base: 1e-8 });
            let (abs, rel) = codazzi_residual(&inv);
            out.push(Measured { name: "identities/codazzi", abs, rel, base: 1e-8 });
            let (abs, rel) = gauss_equation_residual(&inv);
            out.push(Measured { name: "identities/gauss", abs, rel, base: 1e-8 });

            // engine-internal consistency
            out.push(Measured {
                name: "internal/frame_decomposition",
                abs: inv.gauss_residual,
                rel: inv.gauss_residual,
                base: 1e-10,
            });
            out.push(Measured {
                name: "internal/route_agreement",
                abs: inv.route_residual,
                rel: inv.route_residual,
                base: 1e-9,
            });

            // L1 against the closed form
            out.push(measure(
                "certify/l1_closed_form",
                (inv.shape.l1 - pred.l1).abs(),
                pred.l1.abs(),
                1e-8,
            ));

            // mean-curvature vectors
            if spec.s() > 0 {
                let positives: Vec<usize> =
                    (0..layout.k()).filter(|&a| layout.dims[a] > 0).collect();
                let mut vec_abs = 0.0f64;
                let h_scale = pred.h_alpha.iter().map(|v| v.amax()).fold(1e-300, f64::max);
                let mut engine_vecs = Vec::with_capacity(positives.len());
                for (ai, &a) in positives.iter().enumerate() {
                    let off = layout.block_offset[a];
                    let na = layout.dims[a];
                    let block =
                        DMatrix::from_fn(na, na, |i, j| inv.frame.g[(off + i, off + j)]);
                    let block_inv = block
                        .try_inverse()
                        .ok_or_else(|| "singular factor block metric".to_string())?;
                    let mut v = DVector::zeros(n);
                    for kk in 0..n {
                        let mut acc = 0.0;
                        for i in 0..na {
                            for j in 0..na {
                                let mut a_up = 0.0;
                                for l in 0..n {
                                    a_up += inv.frame.g_inv[(kk, l)]
                                        * inv.a_form[(off + i, off + j, l)];
                                }
                                acc += block_inv[(i, j)] * a_up;
                            }
                        }
                        v[kk] = acc / na as f64;
                    }
                    vec_abs = vec_abs.max((&v - &pred.h_alpha[ai]).amax());
                    engine_vecs.push(v);
                }
                out.push(Measured {
                    name: "mean_curvature/vectors",
                    abs: vec_abs,
                    rel: vec_abs / h_scale,
                    base: 1e-8,
                });
                let s = positives.len();
                let mut pair_abs = 0.0f64;
                for ai in 0..s {
                    for bi in 0..s {
                        let mut acc = 0.0;
                        for kk in 0..n {
                            for l in 0..n {
                                acc += inv.frame.g[(kk, l)]
                                    * engine_vecs[ai][kk]
                                    * engine_vecs[bi][l];
                            }
                        }
                        pair_abs =
                            pair_abs.max((acc - pred.h_alpha_pairings[(ai, bi)]).abs());
                    }
                }
                out.push(measure(
                    "mean_curvature/pairings",
                    pair_abs,
                    pred.h_alpha_pairings.amax(),
                    1e-8,
                ));
            }

            // every catalog factor has parallel cubic form, so the
            // composition must as well
            let nrel = nabla_a_relative(&inv);
            out.push(Measured {
                name: "parallel/composition",
                abs: inv.nabla_a.max_abs(),
                rel: nrel,
                base: 1e-8,
            });

            let cond = inv.frame.g.amax() * inv.frame.g_inv.amax();
            Ok((out, cond))
        })
        .collect();

    // deterministic reduction: fold per-sample measurements by name
    let mut worst: std::collections::BTreeMap<&'static str, (f64, f64, f64)> =
        std::collections::BTreeMap::new();
    let mut errors: Vec<String> = Vec::new();
    let mut cond_worst = 1.0f64;
    for outcome in outcomes {
        match outcome {
            Ok((measures, cond)) => {
                cond_worst = cond_worst.max(cond);
                for m in measures {
                    let entry = worst.entry(m.name).or_insert((0.0, 0.0, m.base));
                    entry.0 = entry.0.max(m.abs);
                    entry.1 = entry.1.max(m.rel);
                }
            }
            Err(e) => errors.push(e),
        }
    }

    let kappa = (cond_worst * 1e-6).max(1.0);
    let knob_total = knob * kappa;
    let mut checks: Vec<CheckResult> = Vec::new();
    if !errors.is_empty() {
        checks.push(CheckResult::errored("engine/evaluation", tol, &errors[0]));
    }
    for (name, (abs, rel, base)) in &worst {
        checks.push(CheckResult::measured(name, *abs, *rel, base * knob_total));
    }
    if spec.s() == 0 {
        checks.push(CheckResult::skipped(
            "mean_curvature/vectors",
            tol,
            "no positive-dimensional factor",
        ));
        checks.push(CheckResult::skipped(
            "mean_curvature/pairings",
            tol,
            "no positive-dimensional factor",
        ));
    }

    // proper-hypersphere certification on a handful of points
    let classify_points: Vec<Vec<f64>> = {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        (0..n_samples.clamp(3, 6))
            .map(|_| sample_in(&mut rng, chart.domain()))
            .collect()
    };
    let verdict = equiaffine::classify_sphere(&chart, &classify_points, tol);
    let cert_rel = if verdict.is_proper_sphere && verdict.is_hyperbolic {
        verdict
            .eigenvalue_spread
            .max(verdict.l1_spread)
            .max(verdict.center_residual)
    } else {
        f64::INFINITY
    };
    checks.push(CheckResult::measured(
        "certify/proper_hyperbolic",
        cert_rel,
        cert_rel,
        tol * kappa,
    ));

    VerificationReport {
        spec_id: spec.id(),
        seed,
        samples: n_samples,
        tolerance: tol,
        checks,
        runtime_seconds: start.elapsed().as_secs_f64(),
    }
    .finalize()
}

// ---------------------------------------------------------------------------
// The algebraic laws
// ---------------------------------------------------------------------------

fn pointwise_residual(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / a.amax().max(b.amax()).max(1e-300)
}

/// Checks the almost-commutative law: `x_2 * x_1` equals the block swap of
/// `x_1 * x_2` at `t -> -t`, and the swap has determinant
/// `(-1)^{(n_1+1)(n_2+1)}`.
pub fn verify_commutativity(f1: &FactorSpec, f2: &FactorSpec, tol: f64) -> VerificationReport {
    let start = std::time::Instant::now();
    let spec12 = CompositionSpec::product(vec![f1.clone(), f2.clone()]).expect("two factors");
    let spec21 = CompositionSpec::product(vec![f2.clone(), f1.clone()]).expect("two factors");
    let x12 = composition::compose(&spec12);
    let x21 = composition::compose(&spec21);
    let (n1, n2) = (f1.dim(), f2.dim());
    let ambient = n1 + n2 + 2;

    // block swap: (v_1, v_2) -> (v_2, v_1)
    let mut swap = DMatrix::zeros(ambient, ambient);
    for i in 0..n2 + 1 {
        swap[(i, n1 + 1 + i)] = 1.0;
    }
    for i in 0..n1 + 1 {
        swap[(n2 + 1 + i, i)] = 1.0;
    }
    let expected_det = if ((n1 + 1) * (n2 + 1)) % 2 == 0 { 1.0 } else { -1.0 };
    let det: f64 = swap.clone().lu().determinant();
    let det_abs = (det - expected_det).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut worst = 0.0f64;
    let mut checks = Vec::new();
    for _ in 0..10 {
        let t: f64 = rng.gen_range(-0.5..0.5);
        let p1 = sample_in(&mut rng, f1.domain());
        let p2 = sample_in(&mut rng, f2.domain());
        let mut u21 = vec![t];
        u21.extend_from_slice(&p2);
        u21.extend_from_slice(&p1);
        let mut u12 = vec![-t];
        u12.extend_from_slice(&p1);
        u12.extend_from_slice(&p2);
        match (x21.value_at(&u21), x12.value_at(&u12)) {
            (Ok(lhs), Ok(rhs)) => {
                worst = worst.max(pointwise_residual(&lhs, &(&swap * rhs)));
            }
            (Err(e), _) | (_, Err(e)) => {
                checks.push(CheckResult::errored("commutativity/pointwise", tol, &e.to_string()));
            }
        }
    }
    checks.push(CheckResult::measured("commutativity/pointwise", worst, worst, tol));
    checks.push(CheckResult::measured("commutativity/determinant", det_abs, det_abs, tol));
    VerificationReport {
        spec_id: format!("comm[{} , {}]", f1.short_name(), f2.short_name()),
        seed: 0xC0FFEE,
        samples: 10,
        tolerance: tol,
        checks,
        runtime_seconds: start.elapsed().as_secs_f64(),
    }
    .finalize()
}

/// Exact rational equality of `a/b` and `c/d` (denominators nonzero).
fn frac_eq(a: i128, b: i128, c: i128, d: i128) -> bool {
    a * d == c * b
}

/// Checks the associative law through the explicit coordinate change of the
/// proof, plus the exact rational identities the change of coordinates must
/// satisfy.
pub fn verify_associativity(
    f1: &FactorSpec,
    f2: &FactorSpec,
    f3: &FactorSpec,
    tol: f64,
) -> VerificationReport {
    let start = std::time::Instant::now();
    let (n1, n2, n3) = (f1.dim() as i128, f2.dim() as i128, f3.dim() as i128);
    let (p, q, r) = (n1 + 1, n2 + 1, n3 + 1);
    let n12 = p + q;
    let n23 = q + r;
    let total = p + q + r;

    // (x1 * x2) * x3 with coordinates (t2, [t1, p1, p2], p3)
    let inner12 =
        CompositionSpec::product(vec![f1.clone(), f2.clone()]).expect("two factors");
    let left = composition::compose(
        &CompositionSpec::product(vec![FactorSpec::composite(inner12), f3.clone()])
            .expect("two factors"),
    );
    // x1 * (x2 * x3) with coordinates (t'2, p1, [t'1, p2, p3])
    let inner23 =
        CompositionSpec::product(vec![f2.clone(), f3.clone()]).expect("two factors");
    let right = composition::compose(
        &CompositionSpec::product(vec![f1.clone(), FactorSpec::composite(inner23)])
            .expect("two factors"),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(0xA550C);
    let mut worst = 0.0f64;
    let mut checks = Vec::new();
    for _ in 0..10 {
        let t1: f64 = rng.gen_range(-0.4..0.4);
        let t2: f64 = rng.gen_range(-0.4..0.4);
        let p1 = sample_in(&mut rng, f1.domain());
        let p2 = sample_in(&mut rng, f2.domain());
        let p3 = sample_in(&mut rng, f3.domain());

        let tp1 = -(r as f64) / (n23 as f64) * t1
            + (q as f64) * (total as f64) / ((n12 * n23) as f64) * t2;
        let tp2 = t1 + (p as f64) / (n12 as f64) * t2;

        let mut ul = vec![t2, t1];
        ul.extend_from_slice(&p1);
        ul.extend_from_slice(&p2);
        ul.extend_from_slice(&p3);
        let mut ur = vec![tp2];
        ur.extend_from_slice(&p1);
        ur.push(tp1);
        ur.extend_from_slice(&p2);
        ur.extend_from_slice(&p3);

        match (left.value_at(&ul), right.value_at(&ur)) {
            (Ok(lhs), Ok(rhs)) => {
                worst = worst.max(pointwise_residual(&lhs, &rhs));
            }
            (Err(e), _) | (_, Err(e)) => {
                checks.push(CheckResult::errored("associativity/pointwise", tol, &e.to_string()));
            }
        }
    }
    checks.push(CheckResult::measured("associativity/pointwise", worst, worst, tol));

    // Exact rational identities behind the coordinate change: comparing the
    // t1- and t2-coefficients of both sides of the three exponent relations,
    // with p = n1+1, q = n2+1, r = n3+1, T = p+q+r.
    //   (ii)  t1: -r/(q n23) - 1/n23  == -1/q
    //   (ii)  t2: (T - p)/(n12 n23)   ==  1/n12
    //   (iii) t1: r/(r n23) - 1/n23   ==  0
    //   (iii) t2: (q T + p r)/(r n12 n23) == 1/r
    let ok = frac_eq(-r - q, q * n23, -1, q)
        && frac_eq(total - p, n12 * n23, 1, n12)
        && frac_eq(r, r * n23, 1, n23)
        && frac_eq(q * total + p * r, r * n12 * n23, 1, r);
    let residual = if ok { 0.0 } else { 1.0 };
    checks.push(CheckResult::measured(
        "associativity/exponent_identities",
        residual,
        residual,
        0.5,
    ));

    VerificationReport {
        spec_id: format!(
            "assoc[{} , {} , {}]",
            f1.short_name(),
            f2.short_name(),
            f3.short_name()
        ),
        seed: 0xA550C,
        samples: 10,
        tolerance: tol,
        checks,
        runtime_seconds: start.elapsed().as_secs_f64(),
    }
    .finalize()
}

/// Checks that `x`, `x̄ = c(e_1 x_1, …)` and `x̃ = (e_1 x_1, …, c' e_K x_K)`
/// are equiaffine equivalent, constructively: explicit block-diagonal
/// witnesses of determinant 1 (plus a parameter translation for `x̃`), then
/// an invariant-set comparison at corresponding points.
pub fn verify_equivalence_triple(spec: &CompositionSpec, tol: f64) -> VerificationReport {
    let start = std::time::Instant::now();
    let layout = spec.layout();
    let k = layout.k();
    let (c, cp) = composition::normalization_constants(spec);
    let weights = spec.weights().to_vec();

    let bar_weights = vec![c; k];
    let mut tilde_weights = vec![1.0; k];
    tilde_weights[k - 1] = cp;

    let x = composition::compose(spec);
    let bar_spec = CompositionSpec::new(spec.factors().to_vec(), bar_weights.clone())
        .expect("valid weights");
    let tilde_spec = CompositionSpec::new(spec.factors().to_vec(), tilde_weights.clone())
        .expect("valid weights");
    let x_bar = composition::compose(&bar_spec);
    let x_tilde = composition::compose(&tilde_spec);

    // x̄ witness: block-diagonal D with d_a = c / c_a, no translation.
    let d_bar: Vec<f64> = (0..k).map(|a| c / weights[a]).collect();
    let det_bar: f64 = (0..k)
        .map(|a| d_bar[a].powi(layout.dims[a] as i32 + 1))
        .product();

    // x̃ witness: translate t by δ solving e_a(δ) = tilde_c_a / c_a for
    // a = 1..K-1, making the first K-1 diagonal blocks exactly 1.
    let mut m = DMatrix::zeros(k - 1, k - 1);
    let mut rhs = DVector::zeros(k - 1);
    for a in 0..k - 1 {
        if a >= 1 {
            m[(a, a - 1)] += -1.0 / (layout.dims[a] as f64 + 1.0);
        }
        for t in a..k - 1 {
            m[(a, t)] += 1.0 / layout.f[t] as f64;
        }
        rhs[a] = (tilde_weights[a] / weights[a]).ln();
    }
    let delta = m.lu().solve(&rhs).expect("weight-matching system is invertible");
    let log_e_k = -delta[k - 2] / (layout.dims[k - 1] as f64 + 1.0);
    let mut d_tilde = vec![1.0; k];
    d_tilde[k - 1] = tilde_weights[k - 1] / (weights[k - 1] * log_e_k.exp());
    let det_tilde: f64 = (0..k)
        .map(|a| d_tilde[a].powi(layout.dims[a] as i32 + 1))
        .product();

    let mut rng = ChaCha8Rng::seed_from_u64(0xE9);
    let mut worst_bar = 0.0f64;
    let mut worst_tilde = 0.0f64;
    let mut checks = Vec::new();
    let apply_blocks = |v: &DVector<f64>, d: &[f64]| -> DVector<f64> {
        let mut out = v.clone();
        let mut row = 0;
        for a in 0..k {
            for _ in 0..layout.dims[a] + 1 {
                out[row] *= d[a];
                row += 1;
            }
        }
        out
    };
    for _ in 0..8 {
        let u = sample_in(&mut rng, x.domain());
        let mut u_shift = u.clone();
        for t in 0..k - 1 {
            u_shift[t] += delta[t];
        }
        match (x.value_at(&u), x_bar.value_at(&u), x_tilde.value_at(&u), x.value_at(&u_shift)) {
            (Ok(base), Ok(bar), Ok(tilde), Ok(shifted)) => {
                worst_bar = worst_bar.max(pointwise_residual(&bar, &apply_blocks(&base, &d_bar)));
                worst_tilde = worst_tilde
                    .max(pointwise_residual(&tilde, &apply_blocks(&shifted, &d_tilde)));
            }
            _ => {
                checks.push(CheckResult::errored(
                    "equivalence/pointwise",
                    tol,
                    "chart evaluation failed",
                ));
            }
        }
    }
    checks.push(CheckResult::measured("equivalence/xbar_pointwise", worst_bar, worst_bar, tol));
    checks.push(CheckResult::measured(
        "equivalence/xtilde_pointwise",
        worst_tilde,
        worst_tilde,
        tol,
    ));
    let det_bar_res = (det_bar - 1.0).abs();
    let det_tilde_res = (det_tilde - 1.0).abs();
    checks.push(CheckResult::measured(
        "equivalence/xbar_determinant",
        det_bar_res,
        det_bar_res,
        1e-10 * (tol / 1e-8),
    ));
    checks.push(CheckResult::measured(
        "equivalence/xtilde_determinant",
        det_tilde_res,
        det_tilde_res,
        1e-10 * (tol / 1e-8),
    ));

    // invariants at corresponding points
    let probe = sample_in(&mut rng, x.domain());
    let mut probe_shift = probe.clone();
    for t in 0..k - 1 {
        probe_shift[t] += delta[t];
    }
    let inv_checks = (|| -> Result<f64, String> {
        let a = equiaffine::invariant_set(&x, &probe_shift).map_err(|e| e.to_string())?;
        let b = equiaffine::invariant_set(&x_tilde, &probe).map_err(|e| e.to_string())?;
        let c_ = equiaffine::invariant_set(&x_bar, &probe).map_err(|e| e.to_string())?;
        let g_scale = a.frame.g.amax();
        let mut worst = (&a.frame.g - &b.frame.g).amax() / g_scale;
        worst = worst.max((&a.frame.g - &c_.frame.g).amax() / g_scale);
        let a_scale = a.a_form.max_abs().max(g_scale);
        worst = worst.max(a.a_form.max_abs_diff(&b.a_form) / a_scale);
        worst = worst.max(a.a_form.max_abs_diff(&c_.a_form) / a_scale);
        let l1_scale = a.shape.l1.abs();
        worst = worst.max((a.shape.l1 - b.shape.l1).abs() / l1_scale);
        worst = worst.max((a.shape.l1 - c_.shape.l1).abs() / l1_scale);
        Ok(worst)
    })();
    match inv_checks {
        Ok(worst) => {
            checks.push(CheckResult::measured("equivalence/invariants", worst, worst, tol))
        }
        Err(e) => checks.push(CheckResult::errored("equivalence/invariants", tol, &e)),
    }

    VerificationReport {
        spec_id: format!("equiv[{}]", spec.id()),
        seed: 0xE9,
        samples: 8,
        tolerance: tol,
        checks,
        runtime_seconds: start.elapsed().as_secs_f64(),
    }
    .finalize()
}

/// Structural identities (apolarity, trace, Codazzi, and the Gauss equation
/// for charts that certify as affine spheres) on an arbitrary chart.
pub fn verify_identities(chart: &ImmersionChart, n_samples: usize, tol: f64) -> VerificationReport {
    let start = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x1D);
    let points: Vec<Vec<f64>> =
        (0..n_samples.max(1)).map(|_| sample_in(&mut rng, chart.domain())).collect();
    let mut worst: std::collections::BTreeMap<&'static str, (f64, f64)> =
        std::collections::BTreeMap::new();
    let mut checks = Vec::new();
    let mut sphere_like = true;
    for point in &points {
        match equiaffine::invariant_set(chart, point) {
            Ok(inv) => {
                for (name, (abs, rel)) in [
                    ("identities/apolarity", apolarity_residual(&inv)),
                    ("identities/trace", trace_identity_residual(&inv)),
                    ("identities/codazzi", codazzi_residual(&inv)),
                    ("identities/gauss", gauss_equation_residual(&inv)),
                ] {
                    let entry = worst.entry(name).or_insert((0.0, 0.0));
                    entry.0 = entry.0.max(abs);
                    entry.1 = entry.1.max(rel);
                }
                if sphere_deviation(&inv) > 1e-6 {
                    sphere_like = false;
                }
            }
            Err(e) => {
                checks.push(CheckResult::errored("identities/evaluation", tol, &e.to_string()));
            }
        }
    }
    for (name, (abs, rel)) in &worst {
        let base = match *name {
            "identities/apolarity" => tol / 10.0,
            "identities/gauss" if !sphere_like => {
                checks.push(CheckResult::skipped(name, tol, "chart is not an affine sphere"));
                continue;
            }
            _ => tol,
        };
        checks.push(CheckResult::measured(name, *abs, *rel, base));
    }
    VerificationReport {
        spec_id: "identities".into(),
        seed: 0x1D,
        samples: points.len(),
        tolerance: tol,
        checks,
        runtime_seconds: start.elapsed().as_secs_f64(),
    }
    .finalize()
}

/// Parallelism of the cubic form: the composition has `∇̂A = 0` iff every
/// positive-dimensional factor does.
pub fn verify_parallel(spec: &CompositionSpec, tol: f64) -> VerificationReport {
    let start = std::time::Instant::now();
    let chart = composition::compose(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(0x9A7A);
    let mut checks = Vec::new();

    let mut comp_rel = 0.0f64;
    let mut comp_abs = 0.0f64;
    let mut errors = Vec::new();
    for _ in 0..5 {
        let point = sample_in(&mut rng, chart.domain());
        match equiaffine::invariant_set(&chart, &point) {
            Ok(inv) => {
                comp_rel = comp_rel.max(nabla_a_relative(&inv));
                comp_abs = comp_abs.max(inv.nabla_a.max_abs());
            }
            Err(e) => errors.push(e.to_string()),
        }
    }
    if let Some(e) = errors.first() {
        checks.push(CheckResult::errored("parallel/composition", tol, e));
    } else {
        checks.push(CheckResult::measured("parallel/composition", comp_abs, comp_rel, tol));
    }
    let composition_parallel = errors.is_empty() && comp_rel <= tol;

    let mut factor_rel = 0.0f64;
    let mut all_factors_parallel = true;
    let mut any_factor = false;
    for factor in spec.factors() {
        if factor.dim() == 0 {
            continue;
        }
        any_factor = true;
        let fchart = factor.chart();
        for _ in 0..3 {
            let point = sample_in(&mut rng, fchart.domain());
            match equiaffine::invariant_set(&fchart, &point) {
                Ok(inv) => {
                    let rel = nabla_a_relative(&inv);
                    factor_rel = factor_rel.max(rel);
                    if rel > tol {
                        all_factors_parallel = false;
                    }
                }
                Err(e) => {
                    checks.push(CheckResult::errored("parallel/factors", tol, &e.to_string()));
                    all_factors_parallel = false;
                }
            }
        }
    }
    if any_factor {
        checks.push(CheckResult::measured("parallel/factors", factor_rel, factor_rel, tol));
    } else {
        checks.push(CheckResult::skipped(
            "parallel/factors",
            tol,
            "no positive-dimensional factor (vacuously parallel)",
        ));
    }
    let iff_ok = composition_parallel == all_factors_parallel;
    let residual = if iff_ok { 0.0 } else { 1.0 };
    checks.push(CheckResult::measured("parallel/iff_consistent", residual, residual, 0.5));

    VerificationReport {
        spec_id: format!("parallel[{}]", spec.id()),
        seed: 0x9A7A,
        samples: 5,
        tolerance: tol,
        checks,
        runtime_seconds: start.elapsed().as_secs_f64(),
    }
    .finalize()
}
