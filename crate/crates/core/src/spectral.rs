//! Contour-integral spectral projections `P = −(1/2πi)∮ R(ζ,A) dζ`, the
//! reduced resolvent, the isolated-point solver and the nilpotent part
//! `D = (A − λI)P`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, KblError, Result};
use crate::exec::Execution;
use crate::krylov::{build_krylov, distance_to_krylov_m};
use crate::linalg::{c, norm2, sub, C64, ZERO};
use crate::opmatrix::OpMatrix;
use crate::operators::Operator;
use crate::resolvent::resolvent_direct;
use crate::spaces::{Exponent, SpaceSpec};

/// Minimum distance from any node to the oracle spectrum.
pub const NODE_MARGIN: f64 = 1e-8;
/// Relative singular-value cutoff for the rank of `P`.
pub const PROJECTION_RANK_TOL: f64 = 1e-6;
/// Node resolvents held in memory at once.
const NODE_BATCH: usize = 32;

/// Serialized contour description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ContourSpec {
    Circle { center: [f64; 2], radius: f64, nodes: usize },
    /// Closed polygon, counterclockwise; `nodes` midpoints per edge.
    Polygon { vertices: Vec<[f64; 2]>, nodes: usize },
}

/// Quadrature nodes `ζ_i` and increments `Δζ_i` on a closed curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    spec: ContourSpec,
    nodes: Vec<C64>,
    increments: Vec<C64>,
}

impl Contour {
    /// Uniform trapezoid nodes `ζ_k = c + r e^{iθ_k}`, `Δζ_k = i r e^{iθ_k} 2π/K`.
    pub fn circle(center: C64, radius: f64, nodes: usize) -> Result<Contour> {
        if !(radius > 0.0 && radius.is_finite()) || nodes < 3 {
            return Err(KblError::InvalidInput(format!("circle needs radius > 0 and at least 3 nodes (r = {radius}, k = {nodes})")));
        }
        let h = 2.0 * PI / nodes as f64;
        let mut zs = Vec::with_capacity(nodes);
        let mut dz = Vec::with_capacity(nodes);
        for k in 0..nodes {
            let e = C64::from_polar(1.0, h * k as f64);
            zs.push(center + e * radius);
            dz.push(c(0.0, 1.0) * e * (radius * h));
        }
        Ok(Contour { spec: ContourSpec::Circle { center: [center.re, center.im], radius, nodes }, nodes: zs, increments: dz })
    }

    /// Composite midpoint rule, `per_edge` nodes on each edge.
    pub fn polygon(vertices: &[C64], per_edge: usize) -> Result<Contour> {
        if vertices.len() < 3 || per_edge == 0 {
            return Err(KblError::InvalidInput("polygon needs at least 3 vertices and 1 node per edge".into()));
        }
        let n = vertices.len();
        let area: f64 = (0..n).map(|i| (vertices[i].conj() * vertices[(i + 1) % n]).im).sum::<f64>() / 2.0;
        if area <= 0.0 {
            return Err(KblError::InvalidInput(format!("polygon must be counterclockwise (signed area {area:e})")));
        }
        let mut zs = Vec::with_capacity(n * per_edge);
        let mut dz = Vec::with_capacity(n * per_edge);
        for i in 0..n {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let step = (b - a) / per_edge as f64;
            for j in 0..per_edge {
                zs.push(a + step * (j as f64 + 0.5));
                dz.push(step);
            }
        }
        let spec = ContourSpec::Polygon { vertices: vertices.iter().map(|v| [v.re, v.im]).collect(), nodes: per_edge };
        Ok(Contour { spec, nodes: zs, increments: dz })
    }

    pub fn from_spec(spec: &ContourSpec) -> Result<Contour> {
        match spec {
            ContourSpec::Circle { center, radius, nodes } => Contour::circle(c(center[0], center[1]), *radius, *nodes),
            ContourSpec::Polygon { vertices, nodes } => {
                let v: Vec<C64> = vertices.iter().map(|p| c(p[0], p[1])).collect();
                Contour::polygon(&v, *nodes)
            }
        }
    }

    pub fn spec(&self) -> &ContourSpec {
        &self.spec
    }

    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    pub fn increments(&self) -> &[C64] {
        &self.increments
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `|Σ Δζ_i|`, zero for a closed curve up to rounding.
    pub fn closure_defect(&self) -> f64 {
        self.increments.iter().sum::<C64>().norm()
    }

    /// Winding number of the node polygon about `z`.
    pub fn winding_number(&self, z: C64) -> i64 {
        let n = self.nodes.len();
        let total: f64 = (0..n).map(|i| ((self.nodes[(i + 1) % n] - z) / (self.nodes[i] - z)).arg()).sum();
        (total / (2.0 * PI)).round() as i64
    }

    pub fn encloses(&self, z: C64) -> bool {
        self.winding_number(z) != 0
    }

    fn min_node_distance(&self, z: C64) -> f64 {
        self.nodes.iter().map(|n| (n - z).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Rejects open curves and nodes within [`NODE_MARGIN`] of the oracle spectrum.
    pub fn validate(&self, a: &Operator) -> Result<()> {
        let scale = self.increments.iter().map(|d| d.norm()).sum::<f64>();
        if self.closure_defect() > 1e-12 * scale.max(1.0) {
            return Err(KblError::InvalidInput(format!("contour is not closed (|ΣΔζ| = {:e})", self.closure_defect())));
        }
        if let Some(spec) = a.spectrum() {
            let d = spec.iter().map(|e| self.min_node_distance(e.value)).fold(f64::INFINITY, f64::min);
            if d < NODE_MARGIN {
                return Err(KblError::NodeTooClose { distance: d });
            }
        }
        Ok(())
    }

    /// Oracle eigenvalues with nonzero winding number.
    pub fn enclosed(&self, a: &Operator) -> Option<Vec<(C64, usize)>> {
        a.spectrum().map(|s| s.iter().filter(|e| self.encloses(e.value)).map(|e| (e.value, e.multiplicity)).collect())
    }
}

/// `Σ_i w_j[i] R(ζ_i, A)` for each weight vector `w_j`, summed in node order.
fn weighted_resolvent_sums(a: &Operator, contour: &Contour, weights: &[Vec<C64>], exec: Execution) -> Result<Vec<OpMatrix>> {
    let base = OpMatrix::from_operator(a);
    let mut sums: Vec<OpMatrix> = weights.iter().map(|_| base.scalar_like(ZERO)).collect();
    let n = contour.len();
    let mut start = 0;
    while start < n {
        let end = (start + NODE_BATCH).min(n);
        let batch = exec.map_range(end - start, |k| resolvent_direct(a, contour.nodes[start + k]).map(|p| p.value));
        for (k, r) in batch.into_iter().enumerate() {
            let r = r?;
            for (sum, w) in sums.iter_mut().zip(weights) {
                sum.axpy(w[start + k], &r)?;
            }
        }
        start = end;
    }
    Ok(sums)
}

fn projection_weights(contour: &Contour) -> Vec<C64> {
    let f = -1.0 / c(0.0, 2.0 * PI);
    contour.increments.iter().map(|d| d * f).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub p: OpMatrix,
    /// `‖P² − P‖_∞`
    pub idempotency_residual: f64,
    /// `‖PA − AP‖_∞`
    pub commutator_residual: f64,
    pub rank: usize,
    pub rank_tolerance: f64,
    pub trace: C64,
    pub contour: ContourSpec,
    pub nodes: usize,
    /// Total oracle multiplicity inside the contour.
    pub enclosed_multiplicity: Option<usize>,
}

pub fn projection(a: &Operator, contour: &Contour) -> Result<ProjectionResult> {
    projection_with(a, contour, Execution::default())
}

/// `P = −(1/2πi) Σ R(ζ_i,A) Δζ_i`, node resolvents by direct solve.
pub fn projection_with(a: &Operator, contour: &Contour, exec: Execution) -> Result<ProjectionResult> {
    contour.validate(a)?;
    let p = weighted_resolvent_sums(a, contour, &[projection_weights(contour)], exec)?.remove(0);
    finish_projection(a, contour, p)
}

fn finish_projection(a: &Operator, contour: &Contour, p: OpMatrix) -> Result<ProjectionResult> {
    let am = OpMatrix::from_operator(a);
    let idempotency_residual = p.mul(&p)?.distance_inf(&p)?;
    let commutator_residual = p.mul(&am)?.distance_inf(&am.mul(&p)?)?;
    // eigenvalues of a projection are 0 or 1, so an all-noise P has rank 0
    let rank = if p.norm_inf() <= PROJECTION_RANK_TOL { 0 } else { p.rank(PROJECTION_RANK_TOL) };
    log::debug!(
        "projection over {} nodes: rank {rank} (tol {PROJECTION_RANK_TOL:e}), |P²−P| = {idempotency_residual:e}, |PA−AP| = {commutator_residual:e}",
        contour.len()
    );
    Ok(ProjectionResult {
        trace: p.trace(),
        p,
        idempotency_residual,
        commutator_residual,
        rank,
        rank_tolerance: PROJECTION_RANK_TOL,
        contour: contour.spec.clone(),
        nodes: contour.len(),
        enclosed_multiplicity: contour.enclosed(a).map(|v| v.iter().map(|e| e.1).sum()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedResolvent {
    pub zeta: C64,
    /// `−(1/2πi) Σ R(ζ′_i,A) Δζ′_i / (ζ − ζ′_i)`
    pub value: OpMatrix,
    /// `R(ζ,A)(I − P)` when `ζ ∈ ρ(A)`.
    pub product_form: Option<OpMatrix>,
    /// `‖value − product_form‖_∞`
    pub cross_residual: Option<f64>,
    pub projection: ProjectionResult,
}

pub fn reduced_resolvent(a: &Operator, contour: &Contour, zeta: C64) -> Result<ReducedResolvent> {
    reduced_resolvent_with(a, contour, zeta, Execution::default())
}

/// Reduced resolvent at `ζ` strictly inside the contour. The contour form is
/// returned; it stays valid at an enclosed eigenvalue.
pub fn reduced_resolvent_with(a: &Operator, contour: &Contour, zeta: C64, exec: Execution) -> Result<ReducedResolvent> {
    contour.validate(a)?;
    if contour.winding_number(zeta) != 1 {
        return Err(KblError::NotEnclosed(format!("{}{:+}i", zeta.re, zeta.im)));
    }
    if contour.min_node_distance(zeta) < NODE_MARGIN {
        return Err(KblError::NodeTooClose { distance: contour.min_node_distance(zeta) });
    }
    let wp = projection_weights(contour);
    let wr: Vec<C64> = wp.iter().zip(&contour.nodes).map(|(w, z)| w / (zeta - z)).collect();
    let mut sums = weighted_resolvent_sums(a, contour, &[wp, wr], exec)?;
    let value = sums.pop().expect("two sums");
    let projection = finish_projection(a, contour, sums.pop().expect("two sums"))?;

    let regular = a.spectrum_distance(zeta).is_none_or(|d| d > NODE_MARGIN);
    let product_form = if regular {
        match resolvent_direct(a, zeta) {
            Ok(r) => Some(r.value.mul(&projection.p.identity_like().sub(&projection.p)?)?),
            Err(_) => None,
        }
    } else {
        None
    };
    let cross_residual = match &product_form {
        Some(pf) => Some(pf.distance_inf(&value)?),
        None => None,
    };
    if let Some(r) = cross_residual {
        log::info!("reduced resolvent cross-residual at {zeta}: {r:e}");
    }
    Ok(ReducedResolvent { zeta, value, product_form, cross_residual, projection })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsolatedOptions {
    /// Relative threshold for `Pg = 0`.
    pub eps_proj: f64,
    /// Relative Euclidean tolerance for `f ∈ K(A,g)`.
    pub krylov_tol: f64,
}

impl Default for IsolatedOptions {
    fn default() -> Self {
        IsolatedOptions { eps_proj: 1e-8, krylov_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolatedSolution {
    pub f: Vec<C64>,
    /// `‖(A − λI)f − g‖₂`
    pub residual: f64,
    /// `‖Pg‖₂ / ‖g‖₂`
    pub projection_ratio: f64,
    /// `dist₂(f, K_grade(A,g)) / ‖f‖₂`
    pub krylov_distance: f64,
    pub krylov_dim: usize,
}

/// Solves `(A − λI)f = g` by `f = R″(λ,A)g` when `Pg = 0` and the contour
/// isolates `λ`. The solution is checked to lie in `K(A,g)`.
pub fn isolated_point_solve(a: &Operator, lambda: C64, contour: &Contour, g: &[C64], opts: &IsolatedOptions) -> Result<IsolatedSolution> {
    check_dim(a.dim(), g.len())?;
    let gnorm = norm2(g);
    if gnorm == 0.0 {
        return Err(KblError::ZeroVector("g"));
    }
    if let Some(enclosed) = contour.enclosed(a) {
        if enclosed.len() != 1 {
            return Err(KblError::EnclosureMismatch(enclosed.len()));
        }
        if (enclosed[0].0 - lambda).norm() > 1e-12 * (1.0 + lambda.norm()) {
            return Err(KblError::NotEnclosed(format!("{}{:+}i", lambda.re, lambda.im)));
        }
    }
    let rr = reduced_resolvent(a, contour, lambda)?;
    let projection_ratio = norm2(&rr.projection.p.apply(g)?) / gnorm;
    if projection_ratio > opts.eps_proj {
        return Err(KblError::ProjectionNonzero { ratio: projection_ratio, tolerance: opts.eps_proj });
    }
    let f = rr.value.apply(g)?;
    let af = a.apply(&f)?;
    let shifted: Vec<C64> = af.iter().zip(&f).map(|(x, y)| x - lambda * y).collect();
    let residual = norm2(&sub(&shifted, g));

    let kb = build_krylov(a, g, a.dim(), true)?;
    let krylov_dim = kb.grade().unwrap_or(kb.rank());
    let space = SpaceSpec::unweighted(Exponent::Two, a.dim())?;
    let fnorm = norm2(&f);
    let krylov_distance =
        if fnorm == 0.0 { 0.0 } else { distance_to_krylov_m(&f, &kb, &space, krylov_dim)?.distance / fnorm };
    if krylov_distance > opts.krylov_tol {
        return Err(KblError::BoundExceeded { bound: krylov_distance, target: opts.krylov_tol });
    }
    Ok(IsolatedSolution { f, residual, projection_ratio, krylov_distance, krylov_dim })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NilpotentPart {
    pub d: OpMatrix,
    /// `‖D^k‖_∞` for `k = 1..`
    pub power_norms: Vec<f64>,
    pub projection: ProjectionResult,
}

/// `D = (A − λI)P` with `‖D^k‖_∞` for `k ≤ k_max`.
pub fn nilpotent_part(a: &Operator, lambda: C64, contour: &Contour, k_max: usize) -> Result<NilpotentPart> {
    if let Some(enclosed) = contour.enclosed(a) {
        let others = enclosed.iter().filter(|e| (e.0 - lambda).norm() > 1e-12 * (1.0 + lambda.norm())).count();
        if others > 0 {
            return Err(KblError::EnclosureMismatch(enclosed.len()));
        }
    }
    let projection = projection(a, contour)?;
    let d = OpMatrix::from_operator(a).shift_diagonal(lambda).mul(&projection.p)?;
    let mut power_norms = Vec::with_capacity(k_max);
    let mut power = d.clone();
    for k in 1..=k_max {
        power_norms.push(power.norm_inf());
        if k < k_max {
            power = power.mul(&d)?;
        }
    }
    Ok(NilpotentPart { d, power_norms, projection })
}
