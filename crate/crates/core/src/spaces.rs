//! Norm contexts for truncated sequence spaces and coordinate masks.
//!
//! A [`SpaceSpec`] is a finite truncation `n = 1..N` of ℓ¹, ℓ², ℓ∞ or a
//! weighted `Lᵖ(ℕ, μ)` with `dμ = φ dν` (ν the counting measure), so that
//! `‖x‖ = (Σ φ(n) |x_n|^p)^{1/p}`. Indices are 1-based in every report;
//! storage is 0-based.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, KblError, Result};
use crate::linalg::{C64, ZERO};
use crate::operators::Operator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Exponent {
    One,
    Two,
    Inf,
}

impl Exponent {
    pub fn label(self) -> &'static str {
        match self {
            Exponent::One => "1",
            Exponent::Two => "2",
            Exponent::Inf => "inf",
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::One => s.serialize_u8(1),
            Exponent::Two => s.serialize_u8(2),
            Exponent::Inf => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) if x == 1.0 => Ok(Exponent::One),
            Raw::Num(x) if x == 2.0 => Ok(Exponent::Two),
            Raw::Text(t) if t == "inf" => Ok(Exponent::Inf),
            _ => Err(serde::de::Error::custom("p must be 1, 2 or \"inf\"")),
        }
    }
}

/// Weight specification as it appears in configs and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightSpec {
    Named(String),
    Values(Vec<f64>),
}

/// Serialized form `{"p": 1|2|"inf", "weight": "unit"|"exp_decay"|[floats], "dim": N}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub p: Exponent,
    #[serde(default = "unit_weight")]
    pub weight: WeightSpec,
    pub dim: usize,
}

fn unit_weight() -> WeightSpec {
    WeightSpec::Named("unit".into())
}

/// A norm context: exponent, optional positive weights, truncation dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceSpec {
    p: Exponent,
    weight: Option<Vec<f64>>,
    dim: usize,
}

impl SpaceSpec {
    pub fn new(p: Exponent, weight: Option<Vec<f64>>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(KblError::InvalidInput("space dimension must be positive".into()));
        }
        if let Some(w) = &weight {
            check_dim(dim, w.len())?;
            if p == Exponent::Inf {
                return Err(KblError::InvalidInput("weighted spaces require p in {1, 2}".into()));
            }
            if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(KblError::InvalidInput(format!("weight {bad} is not strictly positive and finite")));
            }
        }
        Ok(SpaceSpec { p, weight, dim })
    }

    pub fn unweighted(p: Exponent, dim: usize) -> Result<Self> {
        SpaceSpec::new(p, None, dim)
    }

    /// `φ(n) = e^{-n}`, n = 1..N.
    pub fn exp_decay(p: Exponent, dim: usize) -> Result<Self> {
        SpaceSpec::new(p, Some(exp_decay_weights(dim)), dim)
    }

    pub fn from_config(cfg: &SpaceConfig) -> Result<Self> {
        let weight = match &cfg.weight {
            WeightSpec::Named(name) if name == "unit" => None,
            WeightSpec::Named(name) if name == "exp_decay" => Some(exp_decay_weights(cfg.dim)),
            WeightSpec::Named(name) => {
                return Err(KblError::Config(format!("unknown weight generator {name:?}")))
            }
            WeightSpec::Values(v) => Some(v.clone()),
        };
        SpaceSpec::new(cfg.p, weight, cfg.dim)
    }

    pub fn to_config(&self) -> SpaceConfig {
        let weight = match &self.weight {
            None => unit_weight(),
            Some(w) if *w == exp_decay_weights(self.dim) => WeightSpec::Named("exp_decay".into()),
            Some(w) => WeightSpec::Values(w.clone()),
        };
        SpaceConfig { p: self.p, weight, dim: self.dim }
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn weight(&self) -> Option<&[f64]> {
        self.weight.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// φ(n) for the 0-based storage index.
    pub fn weight_at(&self, index: usize) -> f64 {
        self.weight.as_ref().map_or(1.0, |w| w[index])
    }

    /// `(Σ φ(n)|v_n|^p)^{1/p}` for p ∈ {1, 2}; `max |v_n|` for p = ∞.
    pub fn norm(&self, v: &[C64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        match self.p {
            Exponent::Inf => v.iter().map(|x| x.norm()).fold(0.0, f64::max),
            Exponent::One => v.iter().enumerate().map(|(i, x)| self.weight_at(i) * x.norm()).sum(),
            Exponent::Two => {
                let scale = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
                if scale == 0.0 {
                    return 0.0;
                }
                let s: f64 = v
                    .iter()
                    .enumerate()
                    .map(|(i, x)| self.weight_at(i) * (x.norm() / scale).powi(2))
                    .sum();
                scale * s.sqrt()
            }
        }
    }

    /// Graph norm `‖v‖ + ‖A v‖`.
    pub fn graph_norm(&self, v: &[C64], a: &Operator) -> Result<f64> {
        check_dim(self.dim, v.len())?;
        check_dim(self.dim, a.dim())?;
        Ok(self.norm(v) + self.norm(&a.apply(v)?))
    }
}

pub fn exp_decay_weights(dim: usize) -> Vec<f64> {
    (1..=dim).map(|n| (-(n as f64)).exp()).collect()
}

/// A vector tied to its norm context.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    space: Arc<SpaceSpec>,
    coords: Vec<C64>,
}

impl Vector {
    pub fn new(space: Arc<SpaceSpec>, coords: Vec<C64>) -> Result<Self> {
        check_dim(space.dim(), coords.len())?;
        Ok(Vector { space, coords })
    }

    pub fn zeros(space: Arc<SpaceSpec>) -> Self {
        let coords = vec![ZERO; space.dim()];
        Vector { space, coords }
    }

    pub fn space(&self) -> &Arc<SpaceSpec> {
        &self.space
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<C64> {
        self.coords
    }

    pub fn norm(&self) -> f64 {
        self.space.norm(&self.coords)
    }

    pub fn graph_norm(&self, a: &Operator) -> Result<f64> {
        self.space.graph_norm(&self.coords, a)
    }

    /// `χ_S v`.
    pub fn mask_project(&self, mask: &Mask) -> Vector {
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, &x)| if mask.contains_index(i) { x } else { ZERO })
            .collect();
        Vector { space: Arc::clone(&self.space), coords }
    }

    /// `(χ_S v, χ_{S'} v)`; the parts have disjoint supports and sum to `v` exactly.
    pub fn decompose(&self, mask: &Mask) -> (Vector, Vector) {
        let (mut kept, mut rest) = (Vec::with_capacity(self.coords.len()), Vec::with_capacity(self.coords.len()));
        for (i, &x) in self.coords.iter().enumerate() {
            if mask.contains_index(i) {
                kept.push(x);
                rest.push(ZERO);
            } else {
                kept.push(ZERO);
                rest.push(x);
            }
        }
        (
            Vector { space: Arc::clone(&self.space), coords: kept },
            Vector { space: Arc::clone(&self.space), coords: rest },
        )
    }
}

/// Subset S of {1, …, N}, stored 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dim: usize,
    indices: BTreeSet<usize>,
}

impl Mask {
    /// `indices` are 1-based and must lie in `1..=dim`.
    pub fn new(dim: usize, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let indices: BTreeSet<usize> = indices.into_iter().collect();
        if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > dim) {
            return Err(KblError::InvalidInput(format!("mask index {bad} outside 1..={dim}")));
        }
        Ok(Mask { dim, indices })
    }

    pub fn from_predicate(dim: usize, pred: impl Fn(usize) -> bool) -> Self {
        Mask { dim, indices: (1..=dim).filter(|&n| pred(n)).collect() }
    }

    pub fn all(dim: usize) -> Self {
        Mask::from_predicate(dim, |_| true)
    }

    pub fn empty(dim: usize) -> Self {
        Mask { dim, indices: BTreeSet::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn contains(&self, n: usize) -> bool {
        self.indices.contains(&n)
    }

    fn contains_index(&self, i: usize) -> bool {
        self.indices.contains(&(i + 1))
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// S' = {1, …, N} \ S.
    pub fn complement(&self) -> Mask {
        Mask::from_predicate(self.dim, |n| !self.contains(n))
    }

    /// Canonical basis vectors `e_n`, n ∈ S, spanning `M = χ_S X`.
    pub fn basis(&self) -> Vec<Vec<C64>> {
        self.indices.iter().map(|&n| crate::linalg::unit_vector(self.dim, n - 1)).collect()
    }
}
