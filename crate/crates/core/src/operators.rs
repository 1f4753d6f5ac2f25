//! The operator zoo: dense matrices, diagonal multipliers, forward shifts
//! and the discretized Volterra operator, with exact spectrum oracles where
//! the structure provides one.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, KblError, Result};
use crate::linalg::{norm2, real, Matrix, C64, ONE, ZERO};
use crate::spaces::{Exponent, SpaceSpec};

/// Quadrature rule of the Volterra discretization on the grid `x_i = i/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VolterraRule {
    /// `(Vf)(x_i) = (1/n) Σ_{j<i} f(x_j)`: strictly lower triangular, nilpotent.
    #[default]
    Rectangle,
    /// Composite trapezoid on `x_0 = 0, x_1, …, x_i` with `f(x_0)` replaced by
    /// the first sample `f(x_1)`:
    /// `(Vf)(x_1) = f(x_1)/n`, and for `i ≥ 2`
    /// `(Vf)(x_i) = (1/n)(1.5 f(x_1) + Σ_{1<j<i} f(x_j) + 0.5 f(x_i))`.
    Trapezoid,
}

impl VolterraRule {
    /// Stencil weight of sample `j` in row `i` (both 1-based) on an `n`-point grid.
    pub fn weight(self, i: usize, j: usize, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        match self {
            VolterraRule::Rectangle => {
                if j < i {
                    h
                } else {
                    0.0
                }
            }
            VolterraRule::Trapezoid => match (i, j) {
                (1, 1) => h,
                (_, 1) if i >= 2 => 1.5 * h,
                _ if j > 1 && j < i => h,
                _ if j == i => 0.5 * h,
                _ => 0.0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorKind {
    Dense(Matrix),
    Diagonal(Vec<C64>),
    /// `e_n ↦ e_{n+offset}`, truncated: entry `(i+offset, i) = 1`.
    Shift { offset: usize },
    Volterra { rule: VolterraRule },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub value: C64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    kind: OperatorKind,
    dim: usize,
    spectrum: Option<Vec<Eigenvalue>>,
}

fn group_eigenvalues(values: &[C64]) -> Vec<Eigenvalue> {
    let mut out: Vec<Eigenvalue> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for &v in values {
        let key = (v.re.to_bits(), v.im.to_bits());
        match index.get(&key) {
            Some(&k) => {
                let e: &mut Eigenvalue = &mut out[k];
                e.multiplicity += 1;
            }
            None => {
                index.insert(key, out.len());
                out.push(Eigenvalue { value: v, multiplicity: 1 });
            }
        }
    }
    out
}

impl Operator {
    pub fn dense(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(KblError::DimensionMismatch { expected: m.rows(), found: m.cols() });
        }
        let dim = m.rows();
        Ok(Operator { kind: OperatorKind::Dense(m), dim, spectrum: None })
    }

    /// Dense operator with a caller-supplied eigenvalue list (repeats allowed).
    pub fn dense_with_spectrum(m: Matrix, eigenvalues: &[C64]) -> Result<Self> {
        let mut op = Operator::dense(m)?;
        check_dim(op.dim, eigenvalues.len())?;
        op.spectrum = Some(group_eigenvalues(eigenvalues));
        Ok(op)
    }

    pub fn diagonal(sigma: Vec<C64>) -> Self {
        let dim = sigma.len();
        let spectrum = Some(group_eigenvalues(&sigma));
        Operator { kind: OperatorKind::Diagonal(sigma), dim, spectrum }
    }

    pub fn identity(dim: usize) -> Self {
        Operator::diagonal(vec![ONE; dim])
    }

    pub fn shift(offset: usize, dim: usize) -> Result<Self> {
        if offset == 0 {
            return Err(KblError::InvalidInput("shift offset must be at least 1".into()));
        }
        Ok(Operator {
            kind: OperatorKind::Shift { offset },
            dim,
            spectrum: Some(vec![Eigenvalue { value: ZERO, multiplicity: dim }]),
        })
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spectrum(&self) -> Option<&[Eigenvalue]> {
        self.spectrum.as_deref()
    }

    /// `min_λ |z − λ|` over the oracle spectrum.
    pub fn spectrum_distance(&self, z: C64) -> Option<f64> {
        self.spectrum
            .as_ref()
            .map(|s| s.iter().map(|e| (z - e.value).norm()).fold(f64::INFINITY, f64::min))
    }

    pub fn is_real(&self) -> bool {
        match &self.kind {
            OperatorKind::Dense(m) => m.is_real(),
            OperatorKind::Diagonal(s) => s.iter().all(|x| x.im == 0.0),
            _ => true,
        }
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim, v.len())?;
        Ok(match &self.kind {
            OperatorKind::Dense(m) => m.matvec(v)?,
            OperatorKind::Diagonal(s) => s.iter().zip(v).map(|(a, b)| a * b).collect(),
            OperatorKind::Shift { offset } => {
                let mut out = vec![ZERO; self.dim];
                for i in 0..self.dim.saturating_sub(*offset) {
                    out[i + offset] = v[i];
                }
                out
            }
            OperatorKind::Volterra { rule } => volterra_apply(*rule, v),
        })
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        check_dim(self.dim, v.len())?;
        Ok(match &self.kind {
            OperatorKind::Dense(m) => m.adjoint_matvec(v)?,
            OperatorKind::Diagonal(s) => s.iter().zip(v).map(|(a, b)| a.conj() * b).collect(),
            OperatorKind::Shift { offset } => {
                let mut out = vec![ZERO; self.dim];
                for i in 0..self.dim.saturating_sub(*offset) {
                    out[i] = v[i + offset];
                }
                out
            }
            OperatorKind::Volterra { rule } => volterra_apply_adjoint(*rule, v),
        })
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.dim;
        match &self.kind {
            OperatorKind::Dense(m) => m.clone(),
            OperatorKind::Diagonal(s) => Matrix::from_diagonal(s),
            OperatorKind::Shift { offset } => {
                Matrix::from_fn(n, n, |i, j| if i == j + offset { ONE } else { ZERO })
            }
            OperatorKind::Volterra { rule } => {
                Matrix::from_fn(n, n, |i, j| real(rule.weight(i + 1, j + 1, n)))
            }
        }
    }

    /// Induced operator norm in `space`.
    ///
    /// p = ∞ and p = 1 are exact (row sums, weighted column-sum ratios);
    /// p = 2 is exact for diagonal operators and a power-iteration estimate
    /// of `‖W^{1/2} A W^{-1/2}‖₂` otherwise.
    pub fn induced_norm(&self, space: &SpaceSpec) -> Result<InducedNorm> {
        check_dim(self.dim, space.dim())?;
        let n = self.dim;
        let exact = |value: f64| InducedNorm { value, method: NormMethod::Exact };
        match (&self.kind, space.p()) {
            (OperatorKind::Diagonal(s), _) => {
                Ok(exact(s.iter().map(|x| x.norm()).fold(0.0, f64::max)))
            }
            (OperatorKind::Shift { offset }, Exponent::Inf) => Ok(exact(if n > *offset { 1.0 } else { 0.0 })),
            (OperatorKind::Shift { offset }, Exponent::One) => Ok(exact(
                (0..n.saturating_sub(*offset))
                    .map(|j| space.weight_at(j + offset) / space.weight_at(j))
                    .fold(0.0, f64::max),
            )),
            (_, Exponent::Inf) => Ok(exact(self.to_dense().norm_inf())),
            (_, Exponent::One) => {
                let m = self.to_dense();
                let mut best: f64 = 0.0;
                for j in 0..n {
                    let col: f64 = (0..n).map(|i| space.weight_at(i) * m[(i, j)].norm()).sum();
                    best = best.max(col / space.weight_at(j));
                }
                Ok(exact(best))
            }
            (_, Exponent::Two) => Ok(self.power_iteration_norm(space)),
        }
    }

    fn power_iteration_norm(&self, space: &SpaceSpec) -> InducedNorm {
        const MAX_ITER: usize = 1000;
        let n = self.dim;
        let sqrt_w: Vec<f64> = (0..n).map(|i| space.weight_at(i).sqrt()).collect();
        let b = |x: &[C64]| -> Vec<C64> {
            let y: Vec<C64> = x.iter().zip(&sqrt_w).map(|(v, w)| v / w).collect();
            let z = self.apply(&y).expect("dimension checked");
            z.iter().zip(&sqrt_w).map(|(v, w)| v * w).collect()
        };
        let bh = |x: &[C64]| -> Vec<C64> {
            let y: Vec<C64> = x.iter().zip(&sqrt_w).map(|(v, w)| v * w).collect();
            let z = self.apply_adjoint(&y).expect("dimension checked");
            z.iter().zip(&sqrt_w).map(|(v, w)| v / w).collect()
        };
        let mut x: Vec<C64> = (0..n).map(|i| real(1.0 + i as f64 / n as f64)).collect();
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let mut lambda = 0.0;
        let mut residual = f64::INFINITY;
        let mut iterations = 0;
        for it in 1..=MAX_ITER {
            iterations = it;
            let y = bh(&b(&x));
            lambda = crate::linalg::dot(&x, &y).re;
            residual = norm2(&crate::linalg::sub(&y, &crate::linalg::scaled(&x, real(lambda))));
            let ny = norm2(&y);
            if ny == 0.0 {
                lambda = 0.0;
                residual = 0.0;
                break;
            }
            x = y.iter().map(|v| v / ny).collect();
            if residual <= 1e-12 * lambda.abs() {
                break;
            }
        }
        InducedNorm {
            value: lambda.max(0.0).sqrt(),
            method: NormMethod::PowerIteration { iterations, residual },
        }
    }

    /// Spectral radius: exact from the oracle, otherwise the Gelfand sequence
    /// `‖A^{2^j}‖_∞^{1/2^j}` up to `k_max` doublings with per-step rescaling.
    ///
    /// The lower bound `max_j (|tr A^{2^j}| / N)^{1/2^j}` follows from
    /// `|tr A^k| ≤ N · spr(A)^k`.
    pub fn spectral_radius(&self, k_max: usize) -> Result<SpectralEstimate> {
        if k_max == 0 {
            return Err(KblError::InvalidInput("k_max must be at least 1".into()));
        }
        if let Some(spec) = &self.spectrum {
            let r = spec.iter().map(|e| e.value.norm()).fold(0.0, f64::max);
            return Ok(SpectralEstimate { spr_lower: r, spr_upper: r, method: SpectralMethod::Oracle, doublings: 0 });
        }
        let n = self.dim as f64;
        let mut b = self.to_dense();
        let mut log_scale = 0.0f64;
        let mut lower = 0.0f64;
        let mut upper = f64::INFINITY;
        for j in 0..=k_max {
            let power = 2f64.powi(j as i32);
            let norm = b.norm_inf();
            if !norm.is_finite() {
                return Err(KblError::InvalidInput("matrix powers overflowed after rescaling".into()));
            }
            if norm == 0.0 {
                return Ok(SpectralEstimate { spr_lower: 0.0, spr_upper: 0.0, method: SpectralMethod::Gelfand, doublings: j });
            }
            upper = ((norm.ln() + log_scale) / power).exp();
            let tr: C64 = (0..b.rows()).map(|i| b[(i, i)]).sum();
            if tr.norm() > 0.0 {
                lower = lower.max((((tr.norm() / n).ln() + log_scale) / power).exp());
            }
            if j == k_max {
                break;
            }
            let unit = b.scale(real(1.0 / norm));
            log_scale = 2.0 * (log_scale + norm.ln());
            b = unit.matmul(&unit)?;
        }
        Ok(SpectralEstimate {
            spr_lower: lower.min(upper),
            spr_upper: upper,
            method: SpectralMethod::Gelfand,
            doublings: k_max,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum NormMethod {
    Exact,
    PowerIteration { iterations: usize, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InducedNorm {
    pub value: f64,
    #[serde(flatten)]
    pub method: NormMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralMethod {
    Gelfand,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub spr_lower: f64,
    pub spr_upper: f64,
    pub method: SpectralMethod,
    pub doublings: usize,
}

/// Discretized Volterra operator `f ↦ ∫_0^x f(y) dy` on the grid `x_i = i/n`.
pub fn volterra_matrix(n: usize, rule: VolterraRule) -> Result<Operator> {
    if n < 2 {
        return Err(KblError::InvalidInput(format!("Volterra grid needs n >= 2, got {n}")));
    }
    let h = 1.0 / n as f64;
    let spectrum = match rule {
        VolterraRule::Rectangle => vec![Eigenvalue { value: ZERO, multiplicity: n }],
        VolterraRule::Trapezoid => vec![
            Eigenvalue { value: real(h), multiplicity: 1 },
            Eigenvalue { value: real(0.5 * h), multiplicity: n - 1 },
        ],
    };
    Ok(Operator { kind: OperatorKind::Volterra { rule }, dim: n, spectrum: Some(spectrum) })
}

fn volterra_apply(rule: VolterraRule, v: &[C64]) -> Vec<C64> {
    let n = v.len();
    let h = 1.0 / n as f64;
    let mut out = vec![ZERO; n];
    match rule {
        VolterraRule::Rectangle => {
            let mut acc = ZERO;
            for i in 0..n {
                out[i] = acc * h;
                acc += v[i];
            }
        }
        VolterraRule::Trapezoid => {
            out[0] = v[0] * h;
            let mut interior = ZERO;
            for i in 1..n {
                out[i] = (v[0] * 1.5 + interior + v[i] * 0.5) * h;
                interior += v[i];
            }
        }
    }
    out
}

fn volterra_apply_adjoint(rule: VolterraRule, v: &[C64]) -> Vec<C64> {
    let n = v.len();
    let h = 1.0 / n as f64;
    let mut out = vec![ZERO; n];
    match rule {
        VolterraRule::Rectangle => {
            let mut acc = ZERO;
            for j in (0..n).rev() {
                out[j] = acc * h;
                acc += v[j];
            }
        }
        VolterraRule::Trapezoid => {
            let mut acc = ZERO;
            for j in (1..n).rev() {
                out[j] = (v[j] * 0.5 + acc) * h;
                acc += v[j];
            }
            out[0] = (v[0] + acc * 1.5) * h;
        }
    }
    out
}

/// `(R(ζ,V)h)(x_i) = −ζ^{-1} h(x_i) − ζ^{-2} ∫_0^{x_i} exp((x_i − y)/ζ) h(y) dy`,
/// with the integral evaluated by the same stencil as [`volterra_matrix`].
pub fn volterra_resolvent_exact(zeta: C64, h: &[C64], rule: VolterraRule) -> Result<Vec<C64>> {
    if zeta == ZERO {
        return Err(KblError::InvalidInput("Volterra resolvent formula needs zeta != 0".into()));
    }
    let n = h.len();
    if n < 2 {
        return Err(KblError::InvalidInput(format!("Volterra grid needs n >= 2, got {n}")));
    }
    let inv = zeta.inv();
    let inv2 = inv * inv;
    Ok((1..=n)
        .map(|i| {
            let xi = i as f64 / n as f64;
            let integral: C64 = (1..=i)
                .map(|j| {
                    let w = rule.weight(i, j, n);
                    if w == 0.0 {
                        return ZERO;
                    }
                    let xj = j as f64 / n as f64;
                    ((xi - xj) * inv).exp() * h[j - 1] * w
                })
                .sum();
            -inv * h[i - 1] - inv2 * integral
        })
        .collect())
}

/// Grid samples `x_i = i/n`, i = 1..n.
pub fn grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm_inf, unit_vector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn inv_sqrt(n: usize) -> Operator {
        Operator::diagonal((1..=n).map(|k| real(1.0 / (k as f64).sqrt())).collect())
    }

    #[test]
    fn apply_examples() {
        let s = Operator::shift(1, 5).unwrap();
        assert_eq!(s.apply(&unit_vector(5, 0)).unwrap(), unit_vector(5, 1));
        let d = inv_sqrt(6);
        let out = d.apply(&unit_vector(6, 3)).unwrap();
        assert_eq!(out, crate::linalg::scaled(&unit_vector(6, 3), real(0.5)));
        assert_eq!(d.apply(&[ZERO; 6]).unwrap(), vec![ZERO; 6]);
        assert!(d.apply(&[ZERO; 5]).is_err());
    }

    fn all_kinds(n: usize, rng: &mut ChaCha8Rng) -> Vec<Operator> {
        let mut out = vec![
            Operator::diagonal((0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()),
            Operator::dense(Matrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))).unwrap(),
        ];
        for k in 1..=3 {
            out.push(Operator::shift(k, n).unwrap());
        }
        if n >= 2 {
            out.push(volterra_matrix(n, VolterraRule::Rectangle).unwrap());
            out.push(volterra_matrix(n, VolterraRule::Trapezoid).unwrap());
        }
        out
    }

    #[test]
    fn structured_apply_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in (1..=8).chain([13, 40]) {
            for op in all_kinds(n, &mut rng) {
                let m = op.to_dense();
                for _ in 0..4 {
                    let v: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
                    let diff = norm_inf(&crate::linalg::sub(&op.apply(&v).unwrap(), &m.matvec(&v).unwrap()));
                    assert!(diff <= 1e-12, "{:?} n={n}: {diff}", op.kind());
                    let diff = norm_inf(&crate::linalg::sub(&op.apply_adjoint(&v).unwrap(), &m.adjoint_matvec(&v).unwrap()));
                    assert!(diff <= 1e-12, "adjoint {:?} n={n}: {diff}", op.kind());
                }
            }
        }
    }

    #[test]
    fn shift_annihilates_leading_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 1..4 {
            let op = Operator::shift(k, 10).unwrap();
            let v: Vec<C64> = (0..10).map(|_| real(rng.gen_range(-1.0..1.0))).collect();
            let out = op.apply(&v).unwrap();
            assert!(out[..k].iter().all(|x| *x == ZERO));
        }
    }

    #[test]
    fn induced_norm_examples() {
        let inf = SpaceSpec::unweighted(Exponent::Inf, 6).unwrap();
        assert_eq!(Operator::shift(1, 6).unwrap().induced_norm(&inf).unwrap().value, 1.0);
        assert_eq!(Operator::shift(4, 6).unwrap().induced_norm(&inf).unwrap().value, 1.0);
        assert_eq!(inv_sqrt(6).induced_norm(&inf).unwrap().value, 1.0);
        let two = SpaceSpec::unweighted(Exponent::Two, 6).unwrap();
        let id = Operator::dense(Matrix::identity(6)).unwrap();
        assert!((id.induced_norm(&two).unwrap().value - 1.0).abs() <= 1e-10);
        let d = Operator::diagonal(vec![real(0.5), C64::new(0.0, -2.0), real(1.0)]);
        assert_eq!(d.induced_norm(&SpaceSpec::unweighted(Exponent::Inf, 3).unwrap()).unwrap().value, 2.0);
    }

    #[test]
    fn weighted_one_norm_matches_definition() {
        let space = SpaceSpec::exp_decay(Exponent::One, 5).unwrap();
        let shift = Operator::shift(1, 5).unwrap();
        let exact = shift.induced_norm(&space).unwrap().value;
        assert!((exact - (-1.0f64).exp()).abs() < 1e-15);
        let dense = Operator::dense(shift.to_dense()).unwrap();
        assert!((dense.induced_norm(&space).unwrap().value - exact).abs() < 1e-15);
    }

    #[test]
    fn power_iteration_two_norm() {
        let m = Matrix::from_rows(&[vec![real(3.0), real(0.0)], vec![real(4.0), real(5.0)]]).unwrap();
        // singular values of [[3,0],[4,5]] are sqrt(45) and sqrt(5)
        let est = Operator::dense(m).unwrap().induced_norm(&SpaceSpec::unweighted(Exponent::Two, 2).unwrap()).unwrap();
        assert!((est.value - 45f64.sqrt()).abs() < 1e-9);
        assert!(matches!(est.method, NormMethod::PowerIteration { .. }));
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(inv_sqrt(50).spectral_radius(10).unwrap().spr_upper, 1.0);
        let v = volterra_matrix(32, VolterraRule::Rectangle).unwrap();
        assert_eq!(v.spectral_radius(10).unwrap().spr_upper, 0.0);
        let dense_v = Operator::dense(v.to_dense()).unwrap();
        let est = dense_v.spectral_radius(6).unwrap();
        assert_eq!(est.method, SpectralMethod::Gelfand);
        assert_eq!(est.spr_upper, 0.0, "V^32 must vanish exactly");
        assert_eq!(Operator::shift(2, 9).unwrap().spectral_radius(3).unwrap().spr_upper, 0.0);
        let shift_dense = Operator::dense(Operator::shift(2, 9).unwrap().to_dense()).unwrap();
        assert_eq!(shift_dense.spectral_radius(4).unwrap().spr_upper, 0.0);
        assert!(inv_sqrt(3).spectral_radius(0).is_err());
    }

    #[test]
    fn gelfand_brackets_true_radius() {
        let m = Matrix::from_rows(&[vec![real(0.5), real(10.0)], vec![real(0.0), real(-0.8)]]).unwrap();
        let est = Operator::dense(m).unwrap().spectral_radius(12).unwrap();
        assert!(est.spr_lower <= 0.8 + 1e-12 && est.spr_upper >= 0.8 - 1e-12);
        assert!(est.spr_upper < 0.81, "{est:?}");
        assert!(est.spr_lower > 0.5, "{est:?}");
    }

    #[test]
    fn gelfand_survives_huge_entries() {
        let m = Matrix::from_rows(&[vec![real(1e200), real(1e200)], vec![real(0.0), real(1e200)]]).unwrap();
        let est = Operator::dense(m).unwrap().spectral_radius(12).unwrap();
        assert!((est.spr_upper / 1e200 - 1.0).abs() < 1e-2, "{est:?}");
    }

    #[test]
    fn volterra_stencil_examples() {
        let v = volterra_matrix(4, VolterraRule::Rectangle).unwrap();
        let out = v.apply(&[ONE; 4]).unwrap();
        assert_eq!(out, vec![real(0.0), real(0.25), real(0.5), real(0.75)]);
        assert_eq!(v.apply(&[ZERO; 4]).unwrap(), vec![ZERO; 4]);
        assert!(volterra_matrix(1, VolterraRule::Rectangle).is_err());

        let n = 1000;
        let v = volterra_matrix(n, VolterraRule::Rectangle).unwrap();
        let x: Vec<C64> = grid(n).into_iter().map(real).collect();
        let vf = v.apply(&x).unwrap();
        let err = grid(n).iter().zip(&vf).map(|(xi, y)| (y.re - xi * xi / 2.0).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-2, "{err}");
        assert!(err <= 0.5 / n as f64 + 1e-12);

        let t = volterra_matrix(n, VolterraRule::Trapezoid).unwrap();
        let tf = t.apply(&x).unwrap();
        let err_t = grid(n).iter().zip(&tf).map(|(xi, y)| (y.re - xi * xi / 2.0).abs()).fold(0.0, f64::max);
        assert!(err_t <= err, "trapezoid {err_t} vs rectangle {err}");
    }

    #[test]
    fn volterra_rectangle_is_nilpotent() {
        let n = 12;
        let m = volterra_matrix(n, VolterraRule::Rectangle).unwrap().to_dense();
        let mut p = m.clone();
        for _ in 1..n {
            p = p.matmul(&m).unwrap();
        }
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn volterra_formula_closed_form() {
        // h ≡ 1, ζ = 1: −1 − (e^x − 1)
        let n = 2000;
        let h = vec![ONE; n];
        let r = volterra_resolvent_exact(ONE, &h, VolterraRule::Rectangle).unwrap();
        let err = grid(n)
            .iter()
            .zip(&r)
            .map(|(x, v)| (*v - real(-1.0 - (x.exp() - 1.0))).norm())
            .fold(0.0, f64::max);
        assert!(err <= 3.0 / n as f64, "{err}");
        assert_eq!(volterra_resolvent_exact(ONE, &[ZERO; 5], VolterraRule::Rectangle).unwrap(), vec![ZERO; 5]);
        assert!(volterra_resolvent_exact(ZERO, &h, VolterraRule::Rectangle).is_err());
    }
}
