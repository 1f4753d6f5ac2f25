//! Krylov subspaces, distance-to-Krylov diagnostics, and the
//! finite-dimensional intersection and density criteria.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, KblError, Result};
use crate::exec::Execution;
use crate::linalg::{
    dot, least_squares, norm2, orthogonal_complement, orthogonalize, real, singular_values, span_rank, Matrix, C64,
    RANK_TOL,
};
use crate::operators::Operator;
use crate::optim::{chebyshev_distance, l1_distance};
use crate::spaces::{Exponent, SpaceSpec};

/// Powers `A^k g` together with an orthonormal basis of their span.
#[derive(Debug, Clone)]
pub struct KrylovBasis {
    dim: usize,
    /// `raw[k]`, possibly rescaled to unit Euclidean norm.
    raw: Vec<Vec<C64>>,
    /// `A^k g = exp(log_scale[k]) · raw[k]`; `-inf` once a power vanishes.
    log_scale: Vec<f64>,
    /// `A · raw[k] = step_factor[k] · raw[k+1]`.
    step_factor: Vec<f64>,
    rescaled: bool,
    /// Arnoldi basis; `ortho[..j]` spans `K_j` for `j ≤ rank`.
    ortho: Vec<Vec<C64>>,
    grade: Option<usize>,
}

impl KrylovBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of raw powers stored.
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw(&self) -> &[Vec<C64>] {
        &self.raw
    }

    pub fn log_scale(&self) -> &[f64] {
        &self.log_scale
    }

    pub fn step_factor(&self) -> &[f64] {
        &self.step_factor
    }

    pub fn is_rescaled(&self) -> bool {
        self.rescaled
    }

    pub fn ortho(&self) -> &[Vec<C64>] {
        &self.ortho
    }

    /// Orthonormal basis of `K_m`.
    pub fn ortho_for(&self, m: usize) -> &[Vec<C64>] {
        &self.ortho[..m.min(self.ortho.len())]
    }

    pub fn rank(&self) -> usize {
        self.ortho.len()
    }

    pub fn grade(&self) -> Option<usize> {
        self.grade
    }
}

/// Builds `m` Krylov powers of `g`. The orthonormal companion comes from
/// Arnoldi with reorthogonalization, which spans the same nested spaces as
/// the powers but stays well conditioned when the powers align. The grade
/// is the first `j` at which the next Arnoldi residual falls below the rank
/// tolerance; one extra step is taken so a grade equal to `m` is detected.
pub fn build_krylov(a: &Operator, g: &[C64], m: usize, rescale: bool) -> Result<KrylovBasis> {
    check_dim(a.dim(), g.len())?;
    if m == 0 {
        return Err(KblError::InvalidInput("Krylov dimension m must be at least 1".into()));
    }
    let gnorm = norm2(g);
    if gnorm == 0.0 {
        return Err(KblError::ZeroVector("g"));
    }
    let mut raw = Vec::with_capacity(m);
    let mut log_scale = Vec::with_capacity(m);
    let mut step_factor = Vec::with_capacity(m.saturating_sub(1));
    if rescale {
        raw.push(g.iter().map(|x| x / gnorm).collect::<Vec<_>>());
        log_scale.push(gnorm.ln());
    } else {
        raw.push(g.to_vec());
        log_scale.push(0.0);
    }
    for k in 1..m {
        let w = a.apply(&raw[k - 1])?;
        let s = if rescale { norm2(&w) } else { 1.0 };
        let next: Vec<C64> = if s > 0.0 { w.iter().map(|x| x / s).collect() } else { w };
        step_factor.push(s);
        log_scale.push(log_scale[k - 1] + s.ln());
        raw.push(next);
        if rescale && log::log_enabled!(log::Level::Trace) {
            log::trace!("krylov power {k}: step factor {s:e}");
        }
    }

    let mut ortho: Vec<Vec<C64>> = vec![g.iter().map(|x| x / gnorm).collect()];
    let mut grade = None;
    while ortho.len() <= m {
        let w = a.apply(ortho.last().expect("nonempty"))?;
        let wn = norm2(&w);
        let r = orthogonalize(&w, &ortho);
        let rn = norm2(&r);
        if rn <= RANK_TOL * wn.max(f64::MIN_POSITIVE) || rn == 0.0 {
            grade = Some(ortho.len());
            break;
        }
        if ortho.len() == m {
            break;
        }
        ortho.push(r.iter().map(|x| x / rn).collect());
    }
    Ok(KrylovBasis { dim: g.len(), raw, log_scale, step_factor, rescaled: rescale, ortho, grade })
}

/// Distance from `f` to `K_m` in the norm of `space`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KrylovDistance {
    pub m: usize,
    pub distance: f64,
    /// Best-approximation coefficients against the orthonormal basis.
    pub ortho_coefficients: Vec<C64>,
    /// Coefficients against the stored (possibly rescaled) raw vectors,
    /// from a least-squares fit to the best approximant.
    pub coefficients: Vec<C64>,
    /// Certified lower bound (LP dual value; equals `distance` for p = 2).
    pub lower_bound: f64,
}

/// Distance to the full Krylov basis held by `kb`.
pub fn distance_to_krylov(f: &[C64], kb: &KrylovBasis, space: &SpaceSpec) -> Result<KrylovDistance> {
    distance_to_krylov_m(f, kb, space, kb.len())
}

/// Distance to `K_m = span{g, …, A^{m−1} g}`.
pub fn distance_to_krylov_m(f: &[C64], kb: &KrylovBasis, space: &SpaceSpec, m: usize) -> Result<KrylovDistance> {
    check_dim(kb.dim, f.len())?;
    check_dim(space.dim(), f.len())?;
    if m == 0 || m > kb.len() {
        return Err(KblError::InvalidInput(format!("m = {m} outside 1..={}", kb.len())));
    }
    let q = kb.ortho_for(m);
    let (distance, a, lower) = match space.p() {
        Exponent::Two => {
            let a = weighted_projection(f, q, space.weight())?;
            let mut r = f.to_vec();
            for (qk, &ak) in q.iter().zip(&a) {
                for (x, &y) in r.iter_mut().zip(qk) {
                    *x -= ak * y;
                }
            }
            let d = space.norm(&r);
            (d, a, d)
        }
        Exponent::Inf => {
            let s = chebyshev_distance(f, q)?;
            (s.distance, s.coefficients.iter().map(|&x| real(x)).collect(), s.lower_bound)
        }
        Exponent::One => {
            let s = l1_distance(f, q, space.weight())?;
            (s.distance, s.coefficients.iter().map(|&x| real(x)).collect(), s.lower_bound)
        }
    };
    let approx = crate::linalg::combine(kb.dim, q, &a);
    let raw_cols = &kb.raw[..m];
    let coefficients = least_squares(&Matrix::from_columns(kb.dim, raw_cols)?, &approx)?;
    Ok(KrylovDistance { m, distance, ortho_coefficients: a, coefficients, lower_bound: lower })
}

/// Weighted least squares against an orthonormal set. Unweighted, the
/// normal equations have identity Gram matrix and reduce to `Qᴴ f`.
fn weighted_projection(f: &[C64], q: &[Vec<C64>], weight: Option<&[f64]>) -> Result<Vec<C64>> {
    match weight {
        None => Ok(q.iter().map(|qk| dot(qk, f)).collect()),
        Some(w) => {
            let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
            let cols: Vec<Vec<C64>> = q.iter().map(|qk| qk.iter().zip(&sw).map(|(x, s)| x * s).collect()).collect();
            let rhs: Vec<C64> = f.iter().zip(&sw).map(|(x, s)| x * s).collect();
            least_squares(&Matrix::from_columns(f.len(), &cols)?, &rhs)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// `ε_solve = eps_solve_rel · ‖f‖`.
    pub eps_solve_rel: f64,
    /// `δ_floor = delta_floor_rel · d_1`.
    pub delta_floor_rel: f64,
    /// Relative spread allowed over the tail `d_{M/2} … d_M`.
    pub stagnation: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { eps_solve_rel: 1e-6, delta_floor_rel: 0.5, stagnation: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SolvableInKrylov,
    NotInKrylov,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolvabilityReport {
    pub norm: String,
    pub n: usize,
    pub m: usize,
    /// `d_m` for `m = 1..=M`.
    pub distances: Vec<f64>,
    pub lower_bounds: Vec<f64>,
    pub verdict: Verdict,
    /// `‖A f_M − g‖` for the best approximant `f_M ∈ K_M`.
    pub residual: f64,
    pub eps_solve: f64,
    pub delta_floor: f64,
    pub tail_spread: f64,
    pub rank: usize,
    pub grade: Option<usize>,
    pub rank_tolerance: f64,
    /// `A^k g = exp(log_scale[k]) · raw[k]`
    pub log_scale: Vec<f64>,
    /// Largest `|‖f − f_m‖ − d_m|` with `f_m` rebuilt from the reported coefficients.
    pub reevaluation_gap: f64,
}

impl SolvabilityReport {
    /// Largest increase `d_{m+1} − d_m` (zero when nonincreasing).
    pub fn max_increase(&self) -> f64 {
        self.distances.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

pub fn solvability_sweep(a: &Operator, f: &[C64], space: &SpaceSpec, m: usize, th: &Thresholds) -> Result<SolvabilityReport> {
    solvability_sweep_with(a, f, space, m, th, Execution::default())
}

/// Sweeps `d_m = dist(f, K_m(A, Af))` for `m = 1..=M`; the independent
/// distance problems run under `exec`.
pub fn solvability_sweep_with(
    a: &Operator,
    f: &[C64],
    space: &SpaceSpec,
    m: usize,
    th: &Thresholds,
    exec: Execution,
) -> Result<SolvabilityReport> {
    check_dim(a.dim(), f.len())?;
    if m < 2 {
        return Err(KblError::InvalidInput("sweep needs M ≥ 2".into()));
    }
    let fnorm = space.norm(f);
    if fnorm == 0.0 {
        return Err(KblError::ZeroVector("f"));
    }
    let g = a.apply(f)?;
    let kb = build_krylov(a, &g, m, true)?;
    let results: Vec<Result<KrylovDistance>> = exec.map_range(m, |i| distance_to_krylov_m(f, &kb, space, i + 1));
    let results: Vec<KrylovDistance> = results.into_iter().collect::<Result<_>>()?;
    let distances: Vec<f64> = results.iter().map(|r| r.distance).collect();
    let lower_bounds: Vec<f64> = results.iter().map(|r| r.lower_bound).collect();

    let mut reevaluation_gap: f64 = 0.0;
    for r in &results {
        let approx = crate::linalg::combine(kb.dim, kb.ortho_for(r.m), &r.ortho_coefficients);
        let gap = (space.norm(&crate::linalg::sub(f, &approx)) - r.distance).abs();
        reevaluation_gap = reevaluation_gap.max(gap);
    }
    let last = results.last().expect("M ≥ 2");
    let approx = crate::linalg::combine(kb.dim, kb.ortho_for(m), &last.ortho_coefficients);
    let af = a.apply(&approx)?;
    let residual = space.norm(&crate::linalg::sub(&af, &g));

    let eps_solve = th.eps_solve_rel * fnorm;
    let delta_floor = th.delta_floor_rel * distances[0];
    let tail = &distances[(m / 2).max(1) - 1..];
    let tmax = tail.iter().copied().fold(0.0, f64::max);
    let tmin = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let tail_spread = if tmax > 0.0 { (tmax - tmin) / tmax } else { 0.0 };
    let d_m = distances[m - 1];
    let verdict = if d_m <= eps_solve {
        Verdict::SolvableInKrylov
    } else if d_m >= delta_floor && tail_spread < th.stagnation {
        Verdict::NotInKrylov
    } else {
        Verdict::Inconclusive
    };
    Ok(SolvabilityReport {
        norm: space.p().label().to_string(),
        n: f.len(),
        m,
        distances,
        lower_bounds,
        verdict,
        residual,
        eps_solve,
        delta_floor,
        tail_spread,
        rank: kb.rank(),
        grade: kb.grade(),
        rank_tolerance: RANK_TOL,
        log_scale: kb.log_scale.clone(),
        reevaluation_gap,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Complement {
    Euclidean,
    Basis(Vec<Vec<C64>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplementKind {
    Euclidean,
    User,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionReport {
    pub dim_k: usize,
    pub dim_g: usize,
    pub dim_ag: usize,
    pub dim_intersection: usize,
    pub trivial: bool,
    pub complement_kind: ComplementKind,
    pub grade: Option<usize>,
}

/// Krylov space at its grade, as an orthonormal basis.
fn grade_space(a: &Operator, g: &[C64]) -> Result<KrylovBasis> {
    build_krylov(a, g, a.dim(), false)
}

/// `dim(K ∩ A G) = dim K + dim AG − dim(K + AG)` by numerical ranks.
pub fn krylov_intersection(a: &Operator, g: &[C64], complement: &Complement) -> Result<IntersectionReport> {
    let n = a.dim();
    let kb = grade_space(a, g)?;
    let k = kb.ortho().to_vec();
    let dim_k = k.len();
    let (gbasis, kind) = match complement {
        Complement::Euclidean => (orthogonal_complement(n, &k), ComplementKind::Euclidean),
        Complement::Basis(b) => {
            validate_complement(n, &k, b)?;
            (b.clone(), ComplementKind::User)
        }
    };
    let dim_g = span_rank(n, &gbasis)?;
    let ag: Vec<Vec<C64>> = gbasis.iter().map(|v| a.apply(v)).collect::<Result<_>>()?;
    let dim_ag = span_rank(n, &ag)?;
    let mut sum = k.clone();
    sum.extend(ag.iter().cloned());
    let dim_sum = span_rank(n, &sum)?;
    let dim_intersection = dim_k + dim_ag - dim_sum;
    Ok(IntersectionReport {
        dim_k,
        dim_g,
        dim_ag,
        dim_intersection,
        trivial: dim_intersection == 0,
        complement_kind: kind,
        grade: kb.grade(),
    })
}

/// Checks `K ∩ G = {0}` and `K + G = X` by ranks.
fn validate_complement(n: usize, k: &[Vec<C64>], g: &[Vec<C64>]) -> Result<()> {
    for v in g {
        check_dim(n, v.len())?;
    }
    let dim_g = span_rank(n, g)?;
    if dim_g != g.len() {
        return Err(KblError::InvalidComplement(format!("{} complement vectors span only {dim_g} dimensions", g.len())));
    }
    let mut all = k.to_vec();
    all.extend(g.iter().cloned());
    let dim_sum = span_rank(n, &all)?;
    if dim_sum != n {
        return Err(KblError::InvalidComplement(format!("K + G has dimension {dim_sum}, expected {n}")));
    }
    if k.len() + dim_g != n {
        return Err(KblError::InvalidComplement(format!(
            "dim K + dim G = {} + {dim_g} ≠ {n}, so K ∩ G ≠ {{0}}",
            k.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    /// `A K = K`, the finite-dimensional form of "A K is dense in K".
    pub holds: bool,
    pub rank_k: usize,
    pub rank_ak: usize,
    pub rank_sum: usize,
    pub min_singular_ratio: f64,
}

/// Density of `A K` in `K` for invertible `A`, rendered as `A K = K`.
pub fn check_density_criterion(a: &Operator, g: &[C64]) -> Result<DensityReport> {
    let s = singular_values(&a.to_dense());
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio <= RANK_TOL {
        return Err(KblError::Singular { zeta: "0".into(), distance: Some(smin) });
    }
    let kb = grade_space(a, g)?;
    let n = a.dim();
    let k = kb.ortho().to_vec();
    let ak: Vec<Vec<C64>> = k.iter().map(|v| a.apply(v)).collect::<Result<_>>()?;
    let rank_k = span_rank(n, &k)?;
    let rank_ak = span_rank(n, &ak)?;
    let mut sum = k;
    sum.extend(ak);
    let rank_sum = span_rank(n, &sum)?;
    Ok(DensityReport {
        holds: rank_k == rank_ak && rank_sum == rank_k,
        rank_k,
        rank_ak,
        rank_sum,
        min_singular_ratio: ratio,
    })
}

/// `max_v dist(Av, span G) / ‖Av‖` over the vectors of `g_basis`; zero
/// means `A(G) ⊂ G`.
pub fn check_reduced(a: &Operator, k_basis: &[Vec<C64>], g_basis: &[Vec<C64>]) -> Result<f64> {
    let n = a.dim();
    if g_basis.is_empty() {
        return Ok(0.0);
    }
    for v in k_basis.iter().chain(g_basis) {
        check_dim(n, v.len())?;
        if norm2(v) == 0.0 {
            return Err(KblError::DegenerateBasis("zero vector in basis".into()));
        }
    }
    validate_complement_general(n, k_basis, g_basis)?;
    let q = crate::linalg::orthonormal_basis(n, g_basis, RANK_TOL)?;
    let mut worst: f64 = 0.0;
    for v in g_basis {
        let w = a.apply(v)?;
        let wn = norm2(&w);
        if wn > 0.0 {
            worst = worst.max(norm2(&orthogonalize(&w, &q)) / wn);
        }
    }
    Ok(worst)
}

/// Complementarity check for arbitrary (not necessarily orthonormal) bases.
fn validate_complement_general(n: usize, k: &[Vec<C64>], g: &[Vec<C64>]) -> Result<()> {
    let rk = span_rank(n, k)?;
    let rg = span_rank(n, g)?;
    if rk != k.len() || rg != g.len() {
        return Err(KblError::DegenerateBasis(format!(
            "bases are not independent (ranks {rk}/{} and {rg}/{})",
            k.len(),
            g.len()
        )));
    }
    let mut all = k.to_vec();
    all.extend(g.iter().cloned());
    let rs = span_rank(n, &all)?;
    if rs != n || rk + rg != n {
        return Err(KblError::InvalidComplement(format!("ranks {rk} + {rg} with sum space {rs} in dimension {n}")));
    }
    Ok(())
}

/// Vector `A^k g` recovered from a rescaled basis; `None` on overflow.
pub fn unscaled_power(kb: &KrylovBasis, k: usize) -> Option<Vec<C64>> {
    let s = kb.log_scale.get(k)?.exp();
    if !s.is_finite() {
        return None;
    }
    Some(kb.raw[k].iter().map(|x| x * s).collect())
}
