//! The operational substrate: systems, states, effects, transformations and
//! tests as real coordinate vectors and matrices.
//!
//! Every system carries a fixed real basis of its state span. Composite
//! systems use the row-major Kronecker ordering of the component bases: the
//! coordinate of `x_i ⊗ y_j` sits at index `i * D_B + j`. With that ordering
//! the tensor product of states, effects and transformations is the
//! Kronecker product of their coordinates.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, GptError, Result};
use crate::linalg::{kron_real, kron_vec, max_abs_diff, RMat};
use crate::models::TheoryModel;

/// Default tolerance for equality and inequality checks.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Classical,
    Quantum,
    Custom,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Classical => f.write_str("classical"),
            ModelKind::Quantum => f.write_str("quantum"),
            ModelKind::Custom => f.write_str("custom"),
        }
    }
}

/// Handle to one system of one theory.
///
/// `factors` lists the informational dimensions of the elementary systems
/// the system is composed of, in composition order. The deterministic
/// effect is carried along so that weights and normalisation can be checked
/// without the owning model.
#[derive(Clone)]
pub struct SystemRef {
    pub model_id: String,
    pub kind: ModelKind,
    pub factors: Vec<usize>,
    pub d: usize,
    pub dim: usize,
    det: Arc<[f64]>,
}

impl SystemRef {
    pub fn new(
        model_id: impl Into<String>,
        kind: ModelKind,
        factors: Vec<usize>,
        d: usize,
        det_effect: Vec<f64>,
    ) -> Self {
        let dim = det_effect.len();
        debug_assert!(d >= 1 && dim >= d);
        SystemRef {
            model_id: model_id.into(),
            kind,
            factors,
            d,
            dim,
            det: det_effect.into(),
        }
    }

    pub fn det_coords(&self) -> &[f64] {
        &self.det
    }

    pub fn det_effect(&self) -> EffectVec {
        EffectVec {
            sys: self.clone(),
            coords: self.det.to_vec(),
        }
    }

    /// The composite `self ⊗ other`.
    pub fn compose(&self, other: &SystemRef) -> Result<SystemRef> {
        if self.kind != other.kind {
            return Err(GptError::Composition(format!(
                "{} and {} belong to different theory families",
                self.kind, other.kind
            )));
        }
        if self.kind == ModelKind::Custom && self.family_id() != other.family_id() {
            return Err(GptError::Composition(format!(
                "custom models {} and {} differ",
                self.model_id, other.model_id
            )));
        }
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        let model_id = format!("{}*{}", self.model_id, other.model_id);
        Ok(SystemRef {
            model_id,
            kind: self.kind,
            factors,
            d: self.d * other.d,
            dim: self.dim * other.dim,
            det: kron_vec(&self.det, &other.det).into(),
        })
    }

    fn family_id(&self) -> &str {
        self.model_id.split('*').next().unwrap_or("")
    }

    pub fn ensure_same(&self, other: &SystemRef) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(dim_err(self, other))
        }
    }
}

impl PartialEq for SystemRef {
    fn eq(&self, other: &Self) -> bool {
        self.model_id == other.model_id
            && self.kind == other.kind
            && self.factors == other.factors
            && self.dim == other.dim
    }
}

impl fmt::Debug for SystemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[d={}, D={}]", self.model_id, self.d, self.dim)
    }
}

impl fmt::Display for SystemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A (possibly sub-normalised) state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVec {
    pub sys: SystemRef,
    pub coords: Vec<f64>,
    /// Pairing with the deterministic effect.
    pub weight: f64,
}

impl StateVec {
    /// Builds a state, computing its weight. Rejects weights outside
    /// `[0, 1]` beyond the default tolerance.
    pub fn new(sys: SystemRef, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != sys.dim {
            return Err(dim_err(sys.dim, coords.len()));
        }
        let weight = dot(sys.det_coords(), &coords);
        if !(-DEFAULT_TOL..=1.0 + DEFAULT_TOL).contains(&weight) {
            return Err(GptError::Validation(format!(
                "state weight {weight} outside [0, 1]"
            )));
        }
        Ok(StateVec {
            sys,
            coords,
            weight,
        })
    }

    /// Builds a state without range checks; used for intermediate vectors
    /// that are states only up to rounding.
    pub(crate) fn unchecked(sys: SystemRef, coords: Vec<f64>) -> Self {
        let weight = dot(sys.det_coords(), &coords);
        StateVec {
            sys,
            coords,
            weight,
        }
    }

    pub fn scaled(&self, factor: f64) -> StateVec {
        StateVec::unchecked(
            self.sys.clone(),
            self.coords.iter().map(|x| x * factor).collect(),
        )
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.weight - 1.0).abs() <= tol
    }

    pub fn distance(&self, other: &StateVec) -> f64 {
        max_abs_diff(&self.coords, &other.coords)
    }
}

/// A mixture `Σ p_i ρ_i` of states of one system.
pub fn mix(parts: &[(f64, &StateVec)]) -> Result<StateVec> {
    let first = parts
        .first()
        .ok_or_else(|| GptError::Precondition("empty mixture".into()))?;
    let sys = first.1.sys.clone();
    let mut coords = vec![0.0; sys.dim];
    for (p, s) in parts {
        sys.ensure_same(&s.sys)?;
        for (c, x) in coords.iter_mut().zip(&s.coords) {
            *c += p * x;
        }
    }
    Ok(StateVec::unchecked(sys, coords))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffectVec {
    pub sys: SystemRef,
    pub coords: Vec<f64>,
}

impl EffectVec {
    pub fn new(sys: SystemRef, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != sys.dim {
            return Err(dim_err(sys.dim, coords.len()));
        }
        Ok(EffectVec { sys, coords })
    }

    /// `e - self`, the complementary effect of a binary test.
    pub fn complement(&self) -> EffectVec {
        EffectVec {
            sys: self.sys.clone(),
            coords: self
                .sys
                .det_coords()
                .iter()
                .zip(&self.coords)
                .map(|(e, a)| e - a)
                .collect(),
        }
    }
}

/// A transformation as a `D_out × D_in` matrix on coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct TransMat {
    pub in_sys: SystemRef,
    pub out_sys: SystemRef,
    pub matrix: RMat,
}

impl TransMat {
    pub fn new(in_sys: SystemRef, out_sys: SystemRef, matrix: RMat) -> Result<Self> {
        if matrix.nrows() != out_sys.dim || matrix.ncols() != in_sys.dim {
            return Err(dim_err(
                format!("{}x{}", out_sys.dim, in_sys.dim),
                format!("{}x{}", matrix.nrows(), matrix.ncols()),
            ));
        }
        Ok(TransMat {
            in_sys,
            out_sys,
            matrix,
        })
    }

    pub fn identity(sys: &SystemRef) -> TransMat {
        TransMat {
            in_sys: sys.clone(),
            out_sys: sys.clone(),
            matrix: RMat::identity(sys.dim, sys.dim),
        }
    }

    pub fn scaled(&self, factor: f64) -> TransMat {
        TransMat {
            in_sys: self.in_sys.clone(),
            out_sys: self.out_sys.clone(),
            matrix: &self.matrix * factor,
        }
    }

    /// `e_out ∘ self` as an effect on the input.
    pub fn output_effect(&self) -> EffectVec {
        let e = nalgebra::DVector::from_column_slice(self.out_sys.det_coords());
        let row = self.matrix.transpose() * e;
        EffectVec {
            sys: self.in_sys.clone(),
            coords: row.iter().copied().collect(),
        }
    }

    /// Largest violation of `e_out ∘ self = e_in` over coordinates.
    pub fn channel_residual(&self) -> f64 {
        max_abs_diff(&self.output_effect().coords, self.in_sys.det_coords())
    }
}

/// Branches of a test, all sharing input and output systems.
#[derive(Clone, Debug)]
pub enum Branches {
    Transformations(Vec<TransMat>),
    Observation(Vec<EffectVec>),
    Preparation(Vec<StateVec>),
}

#[derive(Clone, Debug)]
pub struct Test {
    pub branches: Branches,
    pub labels: Vec<String>,
}

impl Test {
    pub fn new(branches: Branches, labels: Vec<String>) -> Result<Self> {
        let n = match &branches {
            Branches::Transformations(v) => {
                check_shared(v.iter().map(|t| (&t.in_sys, &t.out_sys)))?;
                v.len()
            }
            Branches::Observation(v) => {
                check_shared(v.iter().map(|a| (&a.sys, &a.sys)))?;
                v.len()
            }
            Branches::Preparation(v) => {
                check_shared(v.iter().map(|s| (&s.sys, &s.sys)))?;
                v.len()
            }
        };
        if n == 0 {
            return Err(GptError::Validation("a test needs at least one branch".into()));
        }
        if labels.len() != n {
            return Err(dim_err(n, labels.len()));
        }
        Ok(Test { branches, labels })
    }

    /// Test with outcomes labelled `0..n`.
    pub fn unlabeled(branches: Branches) -> Result<Self> {
        let n = match &branches {
            Branches::Transformations(v) => v.len(),
            Branches::Observation(v) => v.len(),
            Branches::Preparation(v) => v.len(),
        };
        Test::new(branches, (0..n).map(|i| i.to_string()).collect())
    }

    /// Largest coordinate deviation of `Σ_i e ∘ C_i` from `e`.
    pub fn normalization_residual(&self) -> f64 {
        match &self.branches {
            Branches::Transformations(v) => {
                let sys = &v[0].in_sys;
                let mut acc = vec![0.0; sys.dim];
                for t in v {
                    for (a, x) in acc.iter_mut().zip(t.output_effect().coords) {
                        *a += x;
                    }
                }
                max_abs_diff(&acc, sys.det_coords())
            }
            Branches::Observation(v) => {
                let sys = &v[0].sys;
                let mut acc = vec![0.0; sys.dim];
                for a in v {
                    for (s, x) in acc.iter_mut().zip(&a.coords) {
                        *s += x;
                    }
                }
                max_abs_diff(&acc, sys.det_coords())
            }
            Branches::Preparation(v) => (v.iter().map(|s| s.weight).sum::<f64>() - 1.0).abs(),
        }
    }
}

fn check_shared<'a>(mut it: impl Iterator<Item = (&'a SystemRef, &'a SystemRef)>) -> Result<()> {
    if let Some((i0, o0)) = it.next() {
        for (i, o) in it {
            i0.ensure_same(i)?;
            o0.ensure_same(o)?;
        }
    }
    Ok(())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The probability `(a|ρ)`.
pub fn pair(a: &EffectVec, rho: &StateVec) -> Result<f64> {
    a.sys.ensure_same(&rho.sys)?;
    Ok(dot(&a.coords, &rho.coords))
}

/// Pairing of an effect with an arbitrary vector of the state span.
pub fn pair_span(a: &EffectVec, v: &[f64]) -> Result<f64> {
    if v.len() != a.sys.dim {
        return Err(dim_err(a.sys.dim, v.len()));
    }
    Ok(dot(&a.coords, v))
}

pub fn tensor_state(rho: &StateVec, sigma: &StateVec) -> Result<StateVec> {
    let sys = rho.sys.compose(&sigma.sys)?;
    Ok(StateVec {
        sys,
        coords: kron_vec(&rho.coords, &sigma.coords),
        weight: rho.weight * sigma.weight,
    })
}

pub fn tensor_effect(a: &EffectVec, b: &EffectVec) -> Result<EffectVec> {
    let sys = a.sys.compose(&b.sys)?;
    Ok(EffectVec {
        sys,
        coords: kron_vec(&a.coords, &b.coords),
    })
}

pub fn tensor_trans(t: &TransMat, s: &TransMat) -> Result<TransMat> {
    Ok(TransMat {
        in_sys: t.in_sys.compose(&s.in_sys)?,
        out_sys: t.out_sys.compose(&s.out_sys)?,
        matrix: kron_real(&t.matrix, &s.matrix),
    })
}

pub fn apply(t: &TransMat, rho: &StateVec) -> Result<StateVec> {
    t.in_sys.ensure_same(&rho.sys)?;
    let v = &t.matrix * nalgebra::DVector::from_column_slice(&rho.coords);
    Ok(StateVec::unchecked(
        t.out_sys.clone(),
        v.iter().copied().collect(),
    ))
}

/// `second ∘ first`.
pub fn compose(second: &TransMat, first: &TransMat) -> Result<TransMat> {
    first.out_sys.ensure_same(&second.in_sys)?;
    Ok(TransMat {
        in_sys: first.in_sys.clone(),
        out_sys: second.out_sys.clone(),
        matrix: &second.matrix * &first.matrix,
    })
}

/// `T ⊗ I_ancilla`.
pub fn extend(t: &TransMat, ancilla: &SystemRef) -> Result<TransMat> {
    tensor_trans(t, &TransMat::identity(ancilla))
}

/// `I_ancilla ⊗ T`.
pub fn extend_left(ancilla: &SystemRef, t: &TransMat) -> Result<TransMat> {
    tensor_trans(&TransMat::identity(ancilla), t)
}

fn check_split(joint: &SystemRef, a: &SystemRef, b: &SystemRef) -> Result<()> {
    let composed = a.compose(b)?;
    composed.ensure_same(joint)
}

/// Contracts an effect on the first leg of a bipartite vector: `(a|_A Ψ`.
pub fn partial_pair_first(
    a: &EffectVec,
    psi: &StateVec,
    sys_b: &SystemRef,
) -> Result<StateVec> {
    check_split(&psi.sys, &a.sys, sys_b)?;
    let db = sys_b.dim;
    let mut out = vec![0.0; db];
    for (i, ai) in a.coords.iter().enumerate() {
        for (k, o) in out.iter_mut().enumerate() {
            *o += ai * psi.coords[i * db + k];
        }
    }
    Ok(StateVec::unchecked(sys_b.clone(), out))
}

/// Contracts an effect on the second leg of a bipartite vector: `(b|_B Ψ`.
pub fn partial_pair_second(
    b: &EffectVec,
    psi: &StateVec,
    sys_a: &SystemRef,
) -> Result<StateVec> {
    check_split(&psi.sys, sys_a, &b.sys)?;
    let db = b.sys.dim;
    let out = (0..sys_a.dim)
        .map(|i| dot(&b.coords, &psi.coords[i * db..(i + 1) * db]))
        .collect();
    Ok(StateVec::unchecked(sys_a.clone(), out))
}

/// Marginal on the first factor (discard the second with `e_B`).
pub fn marginal_first(psi: &StateVec, sys_a: &SystemRef, sys_b: &SystemRef) -> Result<StateVec> {
    partial_pair_second(&sys_b.det_effect(), psi, sys_a)
}

/// Marginal on the second factor (discard the first with `e_A`).
pub fn marginal_second(psi: &StateVec, sys_a: &SystemRef, sys_b: &SystemRef) -> Result<StateVec> {
    partial_pair_first(&sys_a.det_effect(), psi, sys_b)
}

/// Operational norm `sup_a (a|δ) - inf_a (a|δ)` of a vector in the state span,
/// with extrema supplied by the model oracle.
pub fn operational_norm_state(model: &dyn TheoryModel, delta: &[f64]) -> Result<f64> {
    if delta.len() != model.system().dim {
        return Err(dim_err(model.system().dim, delta.len()));
    }
    let (sup, inf) = model.effect_extrema(delta)?;
    Ok(sup - inf)
}

/// Effect norm `sup_ρ |(ξ|ρ)|` over normalised states.
pub fn operational_norm_effect(model: &dyn TheoryModel, xi: &[f64]) -> Result<f64> {
    if xi.len() != model.system().dim {
        return Err(dim_err(model.system().dim, xi.len()));
    }
    let (sup, inf) = model.state_extrema(xi)?;
    Ok(sup.abs().max(inf.abs()))
}
