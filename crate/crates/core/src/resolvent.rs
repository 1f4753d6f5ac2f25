//! Resolvents `R(ζ,A) = (A − ζI)⁻¹` by direct solve, Laurent series,
//! first-resolvent (Neumann) steps, and certified continuation along a
//! chain of balls.
//!
//! All bounds are in the ∞-induced operator norm and include a rounding
//! allowance, so they bound the distance to the exact resolvent rather than
//! only the truncation error.

use serde::{Deserialize, Serialize};

use crate::error::{KblError, Result};
use crate::linalg::{real, C64, ONE, ZERO};
use crate::opmatrix::OpMatrix;
use crate::operators::Operator;

/// Matrix-product rounding allowance per unit of `Σ |term|`.
fn rounding_factor(terms: usize, dim: usize) -> f64 {
    8.0 * (terms + dim + 2) as f64 * f64::EPSILON
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolventMethod {
    Direct,
    Series,
    Continuation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventPoint {
    pub zeta: C64,
    pub value: OpMatrix,
    pub method: ResolventMethod,
    /// Upper bound on `‖value − R(ζ,A)‖_∞`.
    pub error_bound: Option<f64>,
    /// `‖(A − ζI)·value − I‖_∞` for direct solves.
    pub residual: Option<f64>,
    pub provenance: Option<Provenance>,
}

fn zeta_label(z: C64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

/// LU (or structured) inverse of `A − ζI`.
pub fn resolvent_direct(a: &Operator, zeta: C64) -> Result<ResolventPoint> {
    let singular = || KblError::Singular { zeta: zeta_label(zeta), distance: a.spectrum_distance(zeta) };
    if a.spectrum_distance(zeta) == Some(0.0) {
        return Err(singular());
    }
    let shifted = OpMatrix::from_operator(a).shift_diagonal(zeta);
    let value = shifted.inverse().map_err(|_| singular())?;
    if !value.is_finite() {
        return Err(singular());
    }
    let residual = shifted.mul(&value)?.distance_inf(&shifted.identity_like())?;
    let scale = shifted.norm_inf() * value.norm_inf();
    if residual > 1e-9 * scale.max(1.0) {
        return Err(singular());
    }
    Ok(ResolventPoint { zeta, value, method: ResolventMethod::Direct, error_bound: None, residual: Some(residual), provenance: None })
}

/// Tail bound for `Σ_{k>n} |ζ|^{-k-1} ‖A^k‖`, blocking powers in groups of
/// `p` where `‖A^p‖ < |ζ|^p`. With `p = 1` this is
/// `‖A‖^{n+1} / (|ζ|^{n+1}(|ζ| − ‖A‖))`.
fn laurent_tail(norms: &[f64], modulus: f64, n: usize) -> Option<(f64, usize)> {
    for p in 1..norms.len() {
        let beta = norms[p] / modulus.powi(p as i32);
        if beta < 1.0 {
            let c = (0..p).map(|r| norms[r] / modulus.powi(r as i32)).fold(0.0, f64::max);
            let q = (n + 1) / p;
            return Some((c * p as f64 * beta.powi(q as i32) / (modulus * (1.0 - beta)), p));
        }
    }
    None
}

const MAX_BLOCK: usize = 64;

/// `−Σ_{k=0}^{n} ζ^{−k−1} A^k`, valid for `|ζ| > spr(A)`.
pub fn resolvent_laurent(a: &Operator, zeta: C64, order: usize) -> Result<ResolventPoint> {
    let spr = a.spectral_radius(12)?;
    let modulus = zeta.norm();
    if modulus <= spr.spr_upper {
        return Err(KblError::MarginViolated { modulus, spr_upper: spr.spr_upper });
    }
    log::debug!("laurent at |ζ| = {modulus}, spr ≤ {}, margin {}", spr.spr_upper, modulus - spr.spr_upper);
    let am = OpMatrix::from_operator(a);
    let coeffs: Vec<C64> = (0..=order).map(|k| -zeta.powi(-(k as i32) - 1)).collect();
    let value = horner(&am, &coeffs)?;

    // norms of A^0 … A^MAX_BLOCK for the tail bound
    let mut norms = vec![1.0];
    let mut power = am.identity_like();
    for _ in 0..MAX_BLOCK {
        power = power.mul(&am)?;
        norms.push(power.norm_inf());
        if norms.last().is_some_and(|&x| x < modulus.powi(norms.len() as i32 - 1)) && norms.len() > 2 {
            break;
        }
    }
    let (tail, block) = laurent_tail(&norms, modulus, order)
        .ok_or(KblError::MarginViolated { modulus, spr_upper: spr.spr_upper })?;
    let anorm = am.norm_inf();
    let abs_sum: f64 = (0..=order).map(|k| anorm.powi(k as i32) / modulus.powi(k as i32 + 1)).sum();
    let bound = tail + rounding_factor(order, a.dim()) * abs_sum;
    if block > 1 {
        log::debug!("laurent tail bound uses blocks of {block} powers");
    }
    Ok(ResolventPoint {
        zeta,
        value,
        method: ResolventMethod::Series,
        error_bound: Some(bound),
        residual: None,
        provenance: Some(Provenance::Laurent { zeta, order }),
    })
}

/// `Σ_k coeffs[k] · M^k` by Horner's rule.
fn horner(m: &OpMatrix, coeffs: &[C64]) -> Result<OpMatrix> {
    let mut acc = m.scalar_like(*coeffs.last().unwrap_or(&ZERO));
    for &c in coeffs.iter().rev().skip(1) {
        acc = acc.mul(m)?;
        acc = acc.add(&m.scalar_like(c))?;
    }
    Ok(acc)
}

/// `Σ_{n=0}^{N} (ζ − ζ₀)^n R(ζ₀)^{n+1}` from a certified `R(ζ₀)`.
///
/// With `M = ‖R₀‖ + e₀` and `θ = |ζ − ζ₀| M < 1`, the result is within
/// `e₀/(1−θ)² + M θ^{N+1}/(1−θ)` (plus rounding) of `R(ζ)`.
pub fn resolvent_neumann_step(a: &Operator, r0: &ResolventPoint, zeta: C64, order: usize) -> Result<ResolventPoint> {
    let delta = zeta - r0.zeta;
    let e0 = r0.error_bound.unwrap_or(0.0);
    if delta == ZERO {
        return Ok(r0.clone());
    }
    if let Some(d0) = a.spectrum_distance(r0.zeta) {
        if delta.norm() > 0.75 * d0 {
            return Err(KblError::RatioTooLarge { ratio: delta.norm() / d0 });
        }
    }
    let m = r0.value.norm_inf() + e0;
    let theta = delta.norm() * m;
    if theta >= 1.0 {
        return Err(KblError::RatioTooLarge { ratio: theta });
    }
    // R₀(I + δR₀(I + δR₀(…)))
    let step = r0.value.scale(delta);
    let mut acc = r0.value.identity_like();
    for _ in 0..order {
        acc = step.mul(&acc)?.add(&r0.value.identity_like())?;
    }
    let value = r0.value.mul(&acc)?;
    let tail = m * theta.powi(order as i32 + 1) / (1.0 - theta);
    let abs_sum: f64 = (0..=order).map(|n| m * theta.powi(n as i32)).sum();
    let bound = e0 / (1.0 - theta).powi(2) + tail + rounding_factor(order, a.dim()) * abs_sum;
    let provenance = r0.provenance.clone().map(|p| Provenance::NeumannStep { from: Box::new(p), zeta0: r0.zeta, zeta, order });
    Ok(ResolventPoint {
        zeta,
        value,
        method: ResolventMethod::Continuation,
        error_bound: Some(bound),
        residual: None,
        provenance,
    })
}

/// Construction tree of a polynomial-in-`A` approximant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Provenance {
    /// `−Σ_{k≤order} ζ^{−k−1} A^k`
    Laurent { zeta: C64, order: usize },
    /// `Σ_{n≤order} (ζ − ζ₀)^n P^{n+1}` for the inner approximant `P`
    NeumannStep { from: Box<Provenance>, zeta0: C64, zeta: C64, order: usize },
    /// `(A − λI)^power · P`
    ShiftedPower { inner: Box<Provenance>, lambda: C64, power: usize },
}

impl Provenance {
    /// Formal degree in `A`, saturating.
    pub fn degree(&self) -> usize {
        match self {
            Provenance::Laurent { order, .. } => *order,
            Provenance::NeumannStep { from, order, .. } => from.degree().saturating_mul(order + 1),
            Provenance::ShiftedPower { inner, power, .. } => inner.degree().saturating_add(*power),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Provenance::Laurent { .. } => 1,
            Provenance::NeumannStep { from, .. } => 1 + from.depth(),
            Provenance::ShiftedPower { inner, .. } => 1 + inner.depth(),
        }
    }

    fn polynomial(&self) -> Vec<C64> {
        match self {
            Provenance::Laurent { zeta, order } => (0..=*order).map(|k| -zeta.powi(-(k as i32) - 1)).collect(),
            Provenance::NeumannStep { from, zeta0, zeta, order } => {
                let p = from.polynomial();
                let delta = zeta - zeta0;
                // p · (1 + δp(1 + δp(…)))
                let mut acc = vec![ONE];
                for _ in 0..*order {
                    let mut next = poly_mul(&p, &acc);
                    next.iter_mut().for_each(|c| *c *= delta);
                    next[0] += ONE;
                    acc = next;
                }
                poly_mul(&p, &acc)
            }
            Provenance::ShiftedPower { inner, lambda, power } => {
                let mut p = inner.polynomial();
                for _ in 0..*power {
                    p = poly_mul(&p, &[-lambda, ONE]);
                }
                p
            }
        }
    }
}

fn poly_mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub const DEFAULT_DEGREE_CAP: usize = 64;

/// Certified polynomial-in-`A` approximant of a resolvent value.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxOperator {
    pub zeta: C64,
    pub value: OpMatrix,
    pub provenance: Provenance,
    pub degree_bound: Option<usize>,
    pub error_bound: f64,
    pub plan: Option<PathPlan>,
    /// Accumulated bound after the seed and after each step.
    pub step_bounds: Vec<f64>,
}

/// Coefficients `c_k` with `value ≈ Σ c_k A^k`.
pub fn extract_polynomial(ap: &ApproxOperator, degree_cap: usize) -> Result<Vec<C64>> {
    let degree = ap.provenance.degree();
    if degree > degree_cap {
        return Err(KblError::DegreeCap { degree, cap: degree_cap });
    }
    Ok(ap.provenance.polynomial())
}

/// `Σ c_k A^k`.
pub fn evaluate_polynomial(a: &Operator, coeffs: &[C64]) -> Result<OpMatrix> {
    horner(&OpMatrix::from_operator(a), if coeffs.is_empty() { &[ZERO] } else { coeffs })
}

/// `(A − λI)^k · ap`, which stays in the polynomial algebra of `A`.
pub fn apply_shifted_power(a: &Operator, ap: &ApproxOperator, lambda: C64, power: usize) -> Result<ApproxOperator> {
    let shifted = OpMatrix::from_operator(a).shift_diagonal(lambda);
    let mut value = ap.value.clone();
    for _ in 0..power {
        value = shifted.mul(&value)?;
    }
    let amp = shifted.norm_inf().powi(power as i32);
    let provenance = Provenance::ShiftedPower { inner: Box::new(ap.provenance.clone()), lambda, power };
    Ok(ApproxOperator {
        zeta: ap.zeta,
        value,
        degree_bound: Some(provenance.degree()),
        provenance,
        error_bound: ap.error_bound * amp + rounding_factor(power, a.dim()) * amp * ap.value.norm_inf(),
        plan: None,
        step_bounds: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlanOptions {
    /// Target bound on the final operator-norm error.
    pub eps_total: f64,
    /// Minimum admissible distance from path to spectrum.
    pub margin: f64,
    pub max_order: usize,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions { eps_total: 1e-8, margin: 1e-8, max_order: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: C64,
    pub radius: f64,
    /// `dist(center, σ(A))`
    pub distance: f64,
    /// Series order of the step leaving this ball (unused for the last).
    pub order: usize,
    /// Planned tail bound of that step.
    pub remainder: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPlan {
    pub vertices: Vec<C64>,
    pub eta: f64,
    pub balls: Vec<Ball>,
    pub seed_order: usize,
    pub seed_bound: f64,
    pub eps_total: f64,
    /// Planned worst-case growth of the seed error along the chain.
    pub amplification: f64,
}

impl PathPlan {
    pub fn start(&self) -> C64 {
        self.balls[0].center
    }

    pub fn end(&self) -> C64 {
        self.balls.last().expect("nonempty plan").center
    }

    pub fn steps(&self) -> usize {
        self.balls.len() - 1
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: C64, a: C64, b: C64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * d.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + d * t)).norm()
}

/// Exact distance from a polyline to a finite point set.
pub fn polyline_distance(vertices: &[C64], points: &[C64]) -> f64 {
    let mut best = f64::INFINITY;
    for p in points {
        if vertices.len() == 1 {
            best = best.min((p - vertices[0]).norm());
        }
        for w in vertices.windows(2) {
            best = best.min(point_segment_distance(*p, w[0], w[1]));
        }
    }
    best
}

fn tail_order(m: f64, theta: f64, eps: f64, max_order: usize) -> Option<usize> {
    (0..=max_order).find(|&n| m * theta.powi(n as i32 + 1) / (1.0 - theta) <= eps)
}

/// Chain of balls of radius `η/4` along the polyline `ζ₀ → waypoints → ζ′`,
/// consecutive centers at most `η/2` apart, and series orders allotted so
/// the planned total stays below `eps_total`.
pub fn plan_path(a: &Operator, zeta0: C64, zeta_end: C64, waypoints: &[C64], opts: &PlanOptions) -> Result<PathPlan> {
    plan_with_orders(a, zeta0, zeta_end, waypoints, opts, 0)
}

fn plan_with_orders(
    a: &Operator,
    zeta0: C64,
    zeta_end: C64,
    waypoints: &[C64],
    opts: &PlanOptions,
    extra: usize,
) -> Result<PathPlan> {
    let spectrum: Vec<C64> = a
        .spectrum()
        .ok_or(KblError::MissingSpectrum("path planning needs the spectrum oracle"))?
        .iter()
        .map(|e| e.value)
        .collect();
    let mut vertices = vec![zeta0];
    vertices.extend_from_slice(waypoints);
    vertices.push(zeta_end);
    vertices.dedup();
    let eta = polyline_distance(&vertices, &spectrum);
    if eta <= opts.margin {
        return Err(KblError::PathTouchesSpectrum { eta, margin: opts.margin });
    }
    let mut centers = vec![vertices[0]];
    for w in vertices.windows(2) {
        let len = (w[1] - w[0]).norm();
        let k = (len / (0.5 * eta)).ceil().max(1.0) as usize;
        for j in 1..=k {
            centers.push(w[0] + (w[1] - w[0]) * (j as f64 / k as f64));
        }
    }
    let dist = |z: C64| spectrum.iter().map(|s| (z - s).norm()).fold(f64::INFINITY, f64::min);

    // planned per-step ratios and amplification factors 1/(1−θ)²
    let steps = centers.len() - 1;
    let mut theta = Vec::with_capacity(steps);
    let mut amp = Vec::with_capacity(steps);
    for i in 0..steps {
        let t = (centers[i + 1] - centers[i]).norm() / dist(centers[i]);
        theta.push(t);
        amp.push(1.0 / (1.0 - t).powi(2));
    }
    // downstream[i] = Π_{j ≥ i} amp[j]
    let mut downstream = vec![1.0; steps + 1];
    for i in (0..steps).rev() {
        downstream[i] = downstream[i + 1] * amp[i];
    }
    let share = opts.eps_total / (2.0 * (steps + 1) as f64);
    let mut balls = Vec::with_capacity(centers.len());
    for i in 0..centers.len() {
        let d = dist(centers[i]);
        let (order, remainder) = if i < steps {
            let eps_i = share / downstream[i + 1];
            let n = tail_order(1.0 / d, theta[i], eps_i, opts.max_order)
                .ok_or(KblError::BoundExceeded { bound: f64::INFINITY, target: opts.eps_total })?;
            let n = (n + extra).min(opts.max_order);
            (n, (1.0 / d) * theta[i].powi(n as i32 + 1) / (1.0 - theta[i]))
        } else {
            (0, 0.0)
        };
        balls.push(Ball { center: centers[i], radius: 0.25 * eta, distance: d, order, remainder });
    }

    // Laurent seed at ζ₀
    let eps_seed = share / downstream[0];
    let modulus = zeta0.norm();
    let anorm = OpMatrix::from_operator(a).norm_inf();
    let seed_order = if anorm < modulus {
        let beta = anorm / modulus;
        (0..=opts.max_order)
            .find(|&n| beta.powi(n as i32 + 1) / (modulus - anorm) <= eps_seed)
            .unwrap_or(opts.max_order)
    } else {
        opts.max_order
    };
    let seed_order = (seed_order + extra).min(opts.max_order);
    let seed_bound = if anorm < modulus { (anorm / modulus).powi(seed_order as i32 + 1) / (modulus - anorm) } else { f64::NAN };
    Ok(PathPlan {
        vertices,
        eta,
        balls,
        seed_order,
        seed_bound,
        eps_total: opts.eps_total,
        amplification: downstream[0],
    })
}

/// Follows `plan` from a Laurent seed by Neumann steps. If the certified
/// bound misses `eps_total`, the plan is rebuilt once with higher orders.
pub fn continue_resolvent(a: &Operator, plan: &PathPlan) -> Result<ApproxOperator> {
    match run_plan(a, plan) {
        Ok(ap) if ap.error_bound <= plan.eps_total => Ok(ap),
        first => {
            let missed = first.as_ref().map(|ap| ap.error_bound).unwrap_or(f64::INFINITY);
            log::info!("continuation bound {missed:e} misses {:e}; re-planning with higher orders", plan.eps_total);
            let waypoints = &plan.vertices[1..plan.vertices.len().saturating_sub(1)];
            let extra = plan.balls.iter().map(|b| b.order).max().unwrap_or(0).max(plan.seed_order) + 8;
            let opts = PlanOptions { eps_total: plan.eps_total, margin: 0.0, max_order: usize::MAX / 4 };
            let replanned = plan_with_orders(a, plan.start(), plan.end(), waypoints, &opts, extra)?;
            let ap = run_plan(a, &replanned)?;
            if ap.error_bound > plan.eps_total {
                return Err(KblError::BoundExceeded { bound: ap.error_bound, target: plan.eps_total });
            }
            Ok(ap)
        }
    }
}

fn run_plan(a: &Operator, plan: &PathPlan) -> Result<ApproxOperator> {
    let mut point = resolvent_laurent(a, plan.start(), plan.seed_order)?;
    let mut step_bounds = vec![point.error_bound.unwrap_or(0.0)];
    for i in 0..plan.steps() {
        point = resolvent_neumann_step(a, &point, plan.balls[i + 1].center, plan.balls[i].order)?;
        step_bounds.push(point.error_bound.unwrap_or(0.0));
    }
    let provenance = point.provenance.expect("seeded by a series");
    Ok(ApproxOperator {
        zeta: point.zeta,
        value: point.value,
        degree_bound: Some(provenance.degree()),
        provenance,
        error_bound: point.error_bound.unwrap_or(0.0),
        plan: Some(plan.clone()),
        step_bounds,
    })
}

/// Vector form: `R(ζ′,A)g` with bound `error_bound · ‖g‖_∞`.
pub fn continue_resolvent_vector(a: &Operator, plan: &PathPlan, g: &[C64]) -> Result<(Vec<C64>, f64)> {
    let ap = continue_resolvent(a, plan)?;
    let v = ap.value.apply(g)?;
    Ok((v, ap.error_bound * crate::linalg::norm_inf(g)))
}

/// Number of starting directions tried by the automatic path.
pub const AUTO_DIRECTIONS: usize = 16;

/// Polynomial-in-`A` approximant of `A⁻¹ = R(0,A)`. Without waypoints the
/// start `ζ₀ = 2·spr·e^{iφ}` is chosen among `AUTO_DIRECTIONS` angles to
/// maximize the straight segment's distance to the spectrum.
pub fn kclass_inverse(a: &Operator, eps: f64, waypoints: Option<&[C64]>) -> Result<ApproxOperator> {
    let spectrum: Vec<C64> = a
        .spectrum()
        .ok_or(KblError::MissingSpectrum("the inverse approximant needs the spectrum oracle"))?
        .iter()
        .map(|e| e.value)
        .collect();
    let d0 = spectrum.iter().map(|s| s.norm()).fold(f64::INFINITY, f64::min);
    if d0 == 0.0 {
        return Err(KblError::Singular { zeta: "0".into(), distance: Some(0.0) });
    }
    let spr = a.spectral_radius(12)?.spr_upper;
    let opts = PlanOptions { eps_total: eps, ..Default::default() };
    let radius = 2.0 * spr;
    let plan = match waypoints {
        Some(w) => plan_path(a, real(radius), ZERO, w, &opts)?,
        None => {
            let mut best: Option<(f64, C64)> = None;
            for j in 0..AUTO_DIRECTIONS {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / AUTO_DIRECTIONS as f64;
                let z0 = C64::from_polar(radius, phi);
                let eta = polyline_distance(&[z0, ZERO], &spectrum);
                if best.is_none_or(|(b, _)| eta > b) {
                    best = Some((eta, z0));
                }
            }
            let (_, z0) = best.expect("directions tried");
            plan_path(a, z0, ZERO, &[], &opts)?
        }
    };
    continue_resolvent(a, &plan)
}
