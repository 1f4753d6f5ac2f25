//! Minimax and weighted ℓ¹ distance from a real vector to a real span.

use serde::Serialize;

use super::simplex::{solve_lp_with, LinearProgram, LpStatus, Relation, SimplexOptions, VarBound};
use crate::error::{KblError, Result};
use crate::linalg::{real, Lu, Matrix, C64, RANK_TOL};

/// Result of a distance-to-span LP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpanDistance {
    /// Norm of `f − Σ c_k b_k` for the returned coefficients.
    pub distance: f64,
    pub coefficients: Vec<f64>,
    /// Certified lower bound from the LP (weak duality).
    pub lower_bound: f64,
    pub iterations: usize,
    pub duality_gap: f64,
}

fn real_parts(v: &[C64], what: &'static str) -> Result<Vec<f64>> {
    if v.iter().any(|z| z.im != 0.0) {
        return Err(KblError::ComplexInput(what));
    }
    Ok(v.iter().map(|z| z.re).collect())
}

fn real_problem(f: &[C64], basis: &[Vec<C64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    if basis.is_empty() {
        return Err(KblError::InvalidInput("basis must be nonempty".into()));
    }
    let f = real_parts(f, "target vector")?;
    let mut b = Vec::with_capacity(basis.len());
    for v in basis {
        if v.len() != f.len() {
            return Err(KblError::DimensionMismatch { expected: f.len(), found: v.len() });
        }
        b.push(real_parts(v, "basis vector")?);
    }
    Ok((f, b))
}

fn residual(f: &[f64], b: &[Vec<f64>], c: &[f64]) -> Vec<f64> {
    let mut r = f.to_vec();
    for (bk, &ck) in b.iter().zip(c) {
        if ck != 0.0 {
            for (x, y) in r.iter_mut().zip(bk) {
                *x -= ck * y;
            }
        }
    }
    r
}

/// Span-preserving change of basis to a Lagrange basis at greedily chosen
/// rows (approximate Fekete points). Simplex bases built from the raw
/// vectors can be badly conditioned when many sample points cluster; in the
/// Lagrange basis every column is one at its own point and of moderate size
/// elsewhere. Dependent vectors are dropped.
struct Conditioned {
    columns: Vec<Vec<f64>>,
    /// indices of the original vectors kept
    kept: Vec<usize>,
    /// original coefficients of kept vectors = `to_original · lagrange coefficients`
    to_original: Matrix,
}

fn condition(b: &[Vec<f64>]) -> Result<Conditioned> {
    let n = b[0].len();
    let m = b.len();
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| b.iter().map(|v| v[i]).collect()).collect();
    let mut norms: Vec<f64> = rows.iter().map(|r| r.iter().map(|x| x * x).sum()).collect();
    let scale = norms.iter().copied().fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(KblError::DegenerateBasis("basis vectors are all zero".into()));
    }
    let mut points = Vec::new();
    for _ in 0..m.min(n) {
        let (best, bn) = norms.iter().copied().enumerate().fold((0, -1.0), |a, x| if x.1 > a.1 { x } else { a });
        if bn <= (RANK_TOL * RANK_TOL) * scale {
            break;
        }
        points.push(best);
        let p = rows[best].clone();
        for (r, nr) in rows.iter_mut().zip(norms.iter_mut()) {
            let d = r.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() / bn;
            if d != 0.0 {
                r.iter_mut().zip(&p).for_each(|(x, y)| *x -= d * y);
                *nr = r.iter().map(|x| x * x).sum();
            }
        }
        norms[best] = 0.0;
    }
    let r = points.len();
    // independent columns of the r × m sample matrix, by column pivoting
    let mut cols: Vec<Vec<f64>> = (0..m).map(|k| points.iter().map(|&i| b[k][i]).collect()).collect();
    let mut kept = Vec::new();
    let mut cn: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
    let cscale = cn.iter().copied().fold(0.0, f64::max);
    for _ in 0..r {
        let (best, bn) = cn.iter().copied().enumerate().fold((0, -1.0), |a, x| if x.1 > a.1 { x } else { a });
        if bn <= (RANK_TOL * RANK_TOL) * cscale {
            break;
        }
        kept.push(best);
        let p = cols[best].clone();
        for (c, nc) in cols.iter_mut().zip(cn.iter_mut()) {
            let d = c.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() / bn;
            if d != 0.0 {
                c.iter_mut().zip(&p).for_each(|(x, y)| *x -= d * y);
                *nc = c.iter().map(|x| x * x).sum();
            }
        }
        cn[best] = 0.0;
    }
    kept.sort_unstable();
    let r = kept.len();
    let points = &points[..r];
    let sample = Matrix::from_fn(r, r, |i, j| real(b[kept[j]][points[i]]));
    let to_original = Lu::new(&sample)
        .map_err(|_| KblError::DegenerateBasis("sampled basis matrix is singular".into()))?
        .inverse();
    let columns = (0..r)
        .map(|j| {
            (0..n)
                .map(|i| (0..r).map(|k| b[kept[k]][i] * to_original[(k, j)].re).sum())
                .collect()
        })
        .collect();
    Ok(Conditioned { columns, kept, to_original })
}

impl Conditioned {
    fn original_coefficients(&self, m: usize, lagrange: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m];
        for (k, &orig) in self.kept.iter().enumerate() {
            c[orig] = (0..lagrange.len()).map(|j| self.to_original[(k, j)].re * lagrange[j]).sum();
        }
        c
    }
}

fn optimal(status: LpStatus) -> Result<()> {
    match status {
        LpStatus::Optimal => Ok(()),
        s => Err(KblError::LpNumerical(format!("distance LP ended {s:?}"))),
    }
}

pub fn chebyshev_distance(f: &[C64], basis: &[Vec<C64>]) -> Result<SpanDistance> {
    chebyshev_distance_with(f, basis, &SimplexOptions::default())
}

/// Solves the dual of `min t s.t. |f_n − Σ c_k b_{k,n}| ≤ t`:
/// maximize `f·w` over `Bᵀw = 0`, `‖w‖₁ ≤ 1`, with `w = u − v`.
/// The dual has one row per basis vector plus one, so long vectors stay
/// well under the constraint cap. Coefficients are read off the duals.
pub fn chebyshev_distance_with(f: &[C64], basis: &[Vec<C64>], opts: &SimplexOptions) -> Result<SpanDistance> {
    let (f, b) = real_problem(f, basis)?;
    let n = f.len();
    let cond = condition(&b)?;
    let l = &cond.columns;
    let m = l.len();
    let mut objective = Vec::with_capacity(2 * n);
    objective.extend(f.iter().map(|x| -x));
    objective.extend(f.iter().copied());
    let mut lp = LinearProgram::new(objective, vec![VarBound::NonNegative; 2 * n]);
    for bk in l {
        let mut row = Vec::with_capacity(2 * n);
        row.extend(bk.iter().copied());
        row.extend(bk.iter().map(|x| -x));
        lp.push(row, Relation::Eq, 0.0);
    }
    lp.push(vec![1.0; 2 * n], Relation::Le, 1.0);
    let sol = solve_lp_with(&lp, opts)?;
    optimal(sol.status)?;
    let lagrange: Vec<f64> = sol.dual[..m].iter().map(|y| -y).collect();
    let coefficients = cond.original_coefficients(b.len(), &lagrange);
    let r = residual(&f, l, &lagrange);
    let distance = r.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    Ok(SpanDistance {
        distance,
        coefficients,
        lower_bound: (-sol.value).max(0.0),
        iterations: sol.iterations,
        duality_gap: sol.duality_gap,
    })
}

pub fn l1_distance(f: &[C64], basis: &[Vec<C64>], weight: Option<&[f64]>) -> Result<SpanDistance> {
    l1_distance_with(f, basis, weight, &SimplexOptions::default())
}

/// `min Σ φ_n s_n` over free `c` and `s ≥ ±(f − Bc)`; two rows per coordinate.
pub fn l1_distance_with(f: &[C64], basis: &[Vec<C64>], weight: Option<&[f64]>, opts: &SimplexOptions) -> Result<SpanDistance> {
    let (f, b) = real_problem(f, basis)?;
    let n = f.len();
    let cond = condition(&b)?;
    let l = &cond.columns;
    let m = l.len();
    let phi: Vec<f64> = match weight {
        Some(w) if w.len() != n => return Err(KblError::DimensionMismatch { expected: n, found: w.len() }),
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let mut objective = vec![0.0; m];
    objective.extend(phi.iter().copied());
    let mut bounds = vec![VarBound::Free; m];
    bounds.extend(std::iter::repeat_n(VarBound::NonNegative, n));
    let mut lp = LinearProgram::new(objective, bounds);
    for i in 0..n {
        // f_i − Σ c_k b_ki ≤ s_i   and   Σ c_k b_ki − f_i ≤ s_i
        let mut lo = vec![0.0; m + n];
        let mut hi = vec![0.0; m + n];
        for (k, bk) in l.iter().enumerate() {
            lo[k] = -bk[i];
            hi[k] = bk[i];
        }
        lo[m + i] = -1.0;
        hi[m + i] = -1.0;
        lp.push(lo, Relation::Le, -f[i]);
        lp.push(hi, Relation::Le, f[i]);
    }
    let sol = solve_lp_with(&lp, opts)?;
    optimal(sol.status)?;
    let lagrange = sol.primal[..m].to_vec();
    let coefficients = cond.original_coefficients(b.len(), &lagrange);
    let r = residual(&f, l, &lagrange);
    let distance = r.iter().zip(&phi).map(|(x, w)| w * x.abs()).sum();
    Ok(SpanDistance {
        distance,
        coefficients,
        lower_bound: sol.value.max(0.0),
        iterations: sol.iterations,
        duality_gap: sol.duality_gap,
    })
}
