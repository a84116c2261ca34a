//! Distinguishable sets, spectral decomposition, faces and their canonical
//! states, effects and projections, and the superposition construction.

use crate::error::{GptError, Result};
use crate::framework::{dot, pair, EffectVec, StateVec, SystemRef, TransMat};
use crate::linalg::{self, c, complete_basis, eigh, CMat, CVec, RMat, C64};
use crate::models::{CustomModel, Model, QuantumModel, TheoryModel};

/// Default numerical rank tolerance used to decide "completely mixed" and
/// face supports.
pub const RANK_TOL: f64 = 1e-9;

/// States `ρ_i` and effects `a_j` with `(a_j|ρ_i) = δ_ij`.
#[derive(Clone, Debug)]
pub struct DistinguishableSet {
    pub states: Vec<StateVec>,
    pub effects: Vec<EffectVec>,
}

impl DistinguishableSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `max |(a_j|ρ_i) - δ_ij|`.
    pub fn delta_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, s) in self.states.iter().enumerate() {
            for (j, a) in self.effects.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&a.coords, &s.coords) - want).abs());
            }
        }
        worst
    }

    /// `max |Σ_j a_j - e|` over coordinates.
    pub fn completeness_residual(&self) -> f64 {
        let Some(first) = self.effects.first() else {
            return f64::INFINITY;
        };
        let e = first.sys.det_coords();
        let mut sum = vec![0.0; e.len()];
        for a in &self.effects {
            for (s, x) in sum.iter_mut().zip(&a.coords) {
                *s += x;
            }
        }
        linalg::max_abs_diff(&sum, e)
    }
}

/// `ρ = Σ p_i φ_i` over a maximal set of pure states.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    /// Sorted descending, ties broken by basis order.
    pub probs: Vec<f64>,
    pub pures: DistinguishableSet,
}

impl SpectralDecomp {
    pub fn reconstruct(&self) -> StateVec {
        let sys = self.pures.states[0].sys.clone();
        let mut v = vec![0.0; sys.dim];
        for (p, s) in self.probs.iter().zip(&self.pures.states) {
            for (acc, x) in v.iter_mut().zip(&s.coords) {
                *acc += p * x;
            }
        }
        StateVec::unchecked(sys, v)
    }

    pub fn is_completely_mixed(&self, tol: f64) -> bool {
        self.probs.iter().all(|&p| p > tol)
    }
}

fn quantum_effect(q: &QuantumModel, m: &CMat) -> EffectVec {
    EffectVec {
        sys: q.system().clone(),
        coords: q.coords_unchecked(m),
    }
}

fn quantum_state(q: &QuantumModel, m: &CMat) -> StateVec {
    StateVec::unchecked(q.system().clone(), q.coords_unchecked(m))
}

fn pure_set_from_kets(q: &QuantumModel, kets: &[CVec]) -> DistinguishableSet {
    let projs: Vec<CMat> = kets.iter().map(linalg::projector).collect();
    DistinguishableSet {
        states: projs.iter().map(|p| quantum_state(q, p)).collect(),
        effects: projs.iter().map(|p| quantum_effect(q, p)).collect(),
    }
}

/// Whether the state's face spans the whole state space.
///
/// Quantum: full rank. Classical: full support. Custom: the generators on
/// the minimal face containing `ρ` (every facet inequality tight at `ρ` is
/// tight on them) span the state space, with `rank_tol` as the numerical
/// rank threshold.
pub fn is_completely_mixed(model: &Model, rho: &StateVec, rank_tol: f64) -> Result<bool> {
    model.system().ensure_same(&rho.sys)?;
    Ok(match model {
        Model::Quantum(q) => q.spectrum(&rho.coords).last().copied().unwrap_or(0.0) > rank_tol,
        Model::Classical(_) => rho.coords.iter().all(|&p| p > rank_tol),
        Model::Custom(m) => {
            let gens = custom_face_generators(m, rho, rank_tol);
            let dim = m.system().dim;
            let mat = RMat::from_fn(dim, gens.len(), |i, j| gens[j].coords[i]);
            gens.len() >= dim && linalg::real_rank(&mat, rank_tol) == dim
        }
    })
}

/// Normalised generators lying on the smallest face that contains `ρ`.
fn custom_face_generators(m: &CustomModel, rho: &StateVec, tol: f64) -> Vec<StateVec> {
    let w = rho.weight;
    let vertices = m.effect_vertices();
    let tight: Vec<(&EffectVec, bool)> = vertices
        .iter()
        .filter_map(|a| {
            let p = dot(&a.coords, &rho.coords);
            if p.abs() <= tol {
                Some((a, false))
            } else if (p - w).abs() <= tol {
                Some((a, true))
            } else {
                None
            }
        })
        .collect();
    m.normalized_states()
        .into_iter()
        .filter(|g| {
            tight.iter().all(|(a, upper)| {
                let p = dot(&a.coords, &g.coords);
                if *upper {
                    (p - 1.0).abs() <= tol
                } else {
                    p.abs() <= tol
                }
            })
        })
        .collect()
}

/// Extends a perfectly distinguishable set of pure states by one more pure
/// state, or returns `None` when the set is already maximal.
///
/// Quantum: candidates are the computational kets projected onto the
/// orthogonal complement of the span; the first one with squared norm at
/// least `1/d` is taken (one always exists). Classical: the first unused
/// vertex.
pub fn try_extend(model: &Model, set: &DistinguishableSet) -> Result<Option<StateVec>> {
    match model {
        Model::Quantum(q) => {
            let d = q.d();
            let mut cover = CMat::zeros(d, d);
            for s in &set.states {
                cover += q.devectorize(&s.coords);
            }
            let comp = CMat::identity(d, d) - cover;
            let mut best = None;
            for k in 0..d {
                let v = &comp * linalg::basis_ket(d, k);
                if v.norm_squared() >= 1.0 / d as f64 - 1e-12 {
                    best = Some(v);
                    break;
                }
            }
            Ok(best.map(|v| q.state_from_ket(&v)))
        }
        Model::Classical(m) => {
            let used: Vec<usize> = set
                .states
                .iter()
                .filter_map(|s| m.vertex_index(s, RANK_TOL))
                .collect();
            Ok((0..m.d()).find(|i| !used.contains(i)).map(|i| m.vertex(i)))
        }
        Model::Custom(_) => Err(GptError::Unsupported(
            "greedy extension needs a quantum or classical model".into(),
        )),
    }
}

/// Completes `set` to a maximal perfectly distinguishable set of pure
/// states, stopping when the uniform mixture is completely mixed.
pub fn extend_to_maximal(model: &Model, set: &DistinguishableSet) -> Result<DistinguishableSet> {
    let mut out = set.clone();
    loop {
        if !out.is_empty() && is_completely_mixed(model, &uniform_mixture(&out), RANK_TOL)? {
            return Ok(out);
        }
        match try_extend(model, &out)? {
            Some(phi) => {
                out.effects.push(dual_effect(model, &phi)?);
                out.states.push(phi);
            }
            None => return Ok(out),
        }
    }
}

fn uniform_mixture(set: &DistinguishableSet) -> StateVec {
    let n = set.len() as f64;
    let sys = set.states[0].sys.clone();
    let mut v = vec![0.0; sys.dim];
    for s in &set.states {
        for (a, x) in v.iter_mut().zip(&s.coords) {
            *a += x / n;
        }
    }
    StateVec::unchecked(sys, v)
}

/// The canonical maximal set: computational basis states, or vertices.
pub fn maximal_set(model: &Model) -> Result<DistinguishableSet> {
    extend_to_maximal(
        model,
        &DistinguishableSet {
            states: Vec::new(),
            effects: Vec::new(),
        },
    )
}

/// Size of a maximal set of perfectly distinguishable pure states. Custom
/// models report their declared value.
pub fn informational_dimension(model: &Model) -> Result<usize> {
    match model {
        Model::Custom(m) => Ok(m.system().d),
        _ => Ok(maximal_set(model)?.len()),
    }
}

/// Decomposes a normalised state into a maximal distinguishable set.
pub fn spectral_decompose(model: &Model, rho: &StateVec) -> Result<SpectralDecomp> {
    model.system().ensure_same(&rho.sys)?;
    if !rho.is_normalized(1e-9) {
        return Err(GptError::Validation(format!(
            "spectral decomposition needs a normalised state, weight is {}",
            rho.weight
        )));
    }
    match model {
        Model::Quantum(q) => {
            let e = eigh(&q.devectorize(&rho.coords));
            let kets: Vec<CVec> = (0..q.d()).map(|k| e.vectors.column(k).into_owned()).collect();
            Ok(SpectralDecomp {
                probs: e.values,
                pures: pure_set_from_kets(q, &kets),
            })
        }
        Model::Classical(m) => {
            let mut order: Vec<usize> = (0..m.d()).collect();
            order.sort_by(|&i, &j| rho.coords[j].total_cmp(&rho.coords[i]));
            Ok(SpectralDecomp {
                probs: order.iter().map(|&i| rho.coords[i]).collect(),
                pures: DistinguishableSet {
                    states: order.iter().map(|&i| m.vertex(i)).collect(),
                    effects: order.iter().map(|&i| m.indicator(&[i])).collect(),
                },
            })
        }
        Model::Custom(_) => Err(GptError::Unsupported(
            "spectral decomposition needs a quantum or classical model".into(),
        )),
    }
}

/// The unique atomic effect with `(a|φ) = 1`.
pub fn dual_effect(model: &Model, phi: &StateVec) -> Result<EffectVec> {
    match model {
        Model::Quantum(q) => q.dual_of_pure(phi),
        Model::Classical(m) => m
            .vertex_index(phi, 1e-9)
            .map(|i| m.indicator(&[i]))
            .ok_or_else(|| GptError::Validation("state is not pure".into())),
        Model::Custom(_) => Err(GptError::Unsupported(
            "dual effects need a quantum or classical model".into(),
        )),
    }
}

/// The unique pure state with `(a|φ) = 1` for an atomic effect of unit norm.
pub fn dual_state(model: &Model, a: &EffectVec) -> Result<StateVec> {
    model.system().ensure_same(&a.sys)?;
    let tol = 1e-8;
    match model {
        Model::Quantum(q) => {
            let e = eigh(&q.devectorize(&a.coords));
            if (e.values[0] - 1.0).abs() > tol || e.values[1..].iter().any(|x| x.abs() > tol) {
                return Err(GptError::Validation(
                    "effect is not an atomic effect of unit norm".into(),
                ));
            }
            Ok(q.state_from_ket(&e.vectors.column(0).into_owned()))
        }
        Model::Classical(m) => {
            let ones: Vec<usize> = (0..m.d())
                .filter(|&i| (a.coords[i] - 1.0).abs() <= tol)
                .collect();
            let rest_zero = (0..m.d()).all(|i| ones.contains(&i) || a.coords[i].abs() <= tol);
            if ones.len() != 1 || !rest_zero {
                return Err(GptError::Validation(
                    "effect is not an atomic effect of unit norm".into(),
                ));
            }
            Ok(m.vertex(ones[0]))
        }
        Model::Custom(_) => Err(GptError::Unsupported(
            "dual states need a quantum or classical model".into(),
        )),
    }
}

/// Model-specific description of a face of the normalised state set.
#[derive(Clone, Debug)]
pub enum FaceRep {
    /// States supported on the range of the isometry (orthonormal columns).
    Quantum { isometry: CMat },
    /// Distributions supported on the listed outcomes (sorted).
    Classical { support: Vec<usize> },
    /// Normalised generators of the face.
    Generic { generators: Vec<StateVec> },
}

#[derive(Clone, Debug)]
pub struct Face {
    pub sys: SystemRef,
    pub rep: FaceRep,
    /// Informational dimension of the face.
    pub size: usize,
}

impl Face {
    /// Support projector of a quantum face.
    pub fn projector(&self) -> Option<CMat> {
        match &self.rep {
            FaceRep::Quantum { isometry } => Some(isometry * isometry.adjoint()),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }
}

/// Face spanned by the given orthonormal kets (computed as columns).
pub fn quantum_face(q: &QuantumModel, kets: &CMat) -> Result<Face> {
    if kets.nrows() != q.d() {
        return Err(crate::error::dim_err(q.d(), kets.nrows()));
    }
    if linalg::max_abs(&(kets.adjoint() * kets - CMat::identity(kets.ncols(), kets.ncols())))
        > 1e-9
    {
        return Err(GptError::Validation("face kets are not orthonormal".into()));
    }
    Ok(Face {
        sys: q.system().clone(),
        rep: FaceRep::Quantum {
            isometry: kets.clone(),
        },
        size: kets.ncols(),
    })
}

/// Face of a computational subset: quantum span of `|i⟩`, classical support.
pub fn computational_face(model: &Model, subset: &[usize]) -> Result<Face> {
    let d = model.system().d;
    let mut idx = subset.to_vec();
    idx.sort_unstable();
    idx.dedup();
    if idx.iter().any(|&i| i >= d) {
        return Err(GptError::Validation(format!("subset {subset:?} out of range for d={d}")));
    }
    match model {
        Model::Quantum(q) => {
            let cols: Vec<CVec> = idx.iter().map(|&i| linalg::basis_ket(d, i)).collect();
            let iso = if cols.is_empty() {
                CMat::zeros(d, 0)
            } else {
                CMat::from_columns(&cols)
            };
            quantum_face(q, &iso)
        }
        Model::Classical(m) => Ok(Face {
            sys: m.system().clone(),
            size: idx.len(),
            rep: FaceRep::Classical { support: idx },
        }),
        Model::Custom(_) => Err(GptError::Unsupported(
            "computational faces need a quantum or classical model".into(),
        )),
    }
}

/// The face `F_ρ`: all states appearing in convex decompositions of `ρ`.
pub fn face_of(model: &Model, rho: &StateVec) -> Result<Face> {
    model.system().ensure_same(&rho.sys)?;
    if rho.weight <= RANK_TOL {
        return Err(GptError::EmptyFace);
    }
    match model {
        Model::Quantum(q) => {
            let e = eigh(&q.devectorize(&rho.coords));
            let r = e.values.iter().filter(|&&x| x > RANK_TOL).count();
            quantum_face(q, &e.vectors.columns(0, r).into_owned())
        }
        Model::Classical(m) => {
            let support: Vec<usize> = (0..m.d()).filter(|&i| rho.coords[i] > RANK_TOL).collect();
            computational_face(model, &support)
        }
        Model::Custom(m) => {
            let generators = custom_face_generators(m, rho, RANK_TOL);
            Ok(Face {
                sys: m.system().clone(),
                // affine dimension of the face is not its informational
                // dimension; for custom models the size is the number of
                // affinely independent generators, an upper bound
                size: {
                    let dim = m.system().dim;
                    let mat = RMat::from_fn(dim, generators.len(), |i, j| generators[j].coords[i]);
                    linalg::real_rank(&mat, RANK_TOL)
                },
                rep: FaceRep::Generic { generators },
            })
        }
    }
}

/// `ω_F`: the uniform mixture of a maximal distinguishable set of `F`.
pub fn omega_of(model: &Model, face: &Face) -> Result<StateVec> {
    model.system().ensure_same(&face.sys)?;
    if face.is_empty() {
        return Err(GptError::EmptyFace);
    }
    let k = face.size as f64;
    match (&face.rep, model) {
        (FaceRep::Quantum { isometry }, Model::Quantum(q)) => {
            Ok(quantum_state(q, &(isometry * isometry.adjoint() * c(1.0 / k, 0.0))))
        }
        (FaceRep::Classical { support }, Model::Classical(m)) => {
            let mut v = vec![0.0; m.d()];
            for &i in support {
                v[i] = 1.0 / k;
            }
            Ok(StateVec::unchecked(m.system().clone(), v))
        }
        (FaceRep::Generic { generators }, _) => {
            let n = generators.len() as f64;
            let mut v = vec![0.0; face.sys.dim];
            for g in generators {
                for (a, x) in v.iter_mut().zip(&g.coords) {
                    *a += x / n;
                }
            }
            Ok(StateVec::unchecked(face.sys.clone(), v))
        }
        _ => Err(GptError::Validation("face does not belong to this model".into())),
    }
}

/// `ω_{F^⊥}`, or the zero vector when `F` is the whole state set.
pub fn omega_complement(model: &Model, face: &Face) -> Result<StateVec> {
    let perp = orthogonal_face(model, face)?;
    if perp.is_empty() {
        Ok(StateVec::unchecked(face.sys.clone(), vec![0.0; face.sys.dim]))
    } else {
        omega_of(model, &perp)
    }
}

/// `a_F`: equal to one on `F` and zero on `F^⊥`.
pub fn effect_of(model: &Model, face: &Face) -> Result<EffectVec> {
    model.system().ensure_same(&face.sys)?;
    match (&face.rep, model) {
        (FaceRep::Quantum { isometry }, Model::Quantum(q)) => {
            Ok(quantum_effect(q, &(isometry * isometry.adjoint())))
        }
        (FaceRep::Classical { support }, Model::Classical(m)) => Ok(m.indicator(support)),
        _ => Err(GptError::Unsupported(
            "face effects need a quantum or classical model".into(),
        )),
    }
}

/// `F^⊥`: the face of states perfectly distinguishable from `F`.
pub fn orthogonal_face(model: &Model, face: &Face) -> Result<Face> {
    model.system().ensure_same(&face.sys)?;
    match (&face.rep, model) {
        (FaceRep::Quantum { isometry }, Model::Quantum(q)) => {
            let full = complete_basis(isometry);
            let k = isometry.ncols();
            quantum_face(q, &full.columns(k, q.d() - k).into_owned())
        }
        (FaceRep::Classical { support }, Model::Classical(m)) => {
            let rest: Vec<usize> = (0..m.d()).filter(|i| !support.contains(i)).collect();
            computational_face(model, &rest)
        }
        _ => Err(GptError::Unsupported(
            "orthogonal faces need a quantum or classical model".into(),
        )),
    }
}

/// Whether two faces describe the same set of states.
pub fn same_face(a: &Face, b: &Face, tol: f64) -> bool {
    if a.sys != b.sys || a.size != b.size {
        return false;
    }
    match (&a.rep, &b.rep) {
        (FaceRep::Quantum { .. }, FaceRep::Quantum { .. }) => {
            linalg::max_abs(&(a.projector().unwrap() - b.projector().unwrap())) <= tol
        }
        (FaceRep::Classical { support: x }, FaceRep::Classical { support: y }) => x == y,
        _ => false,
    }
}

/// The atomic projection `Π_F`: identity on `F`, zero on `F^⊥`.
pub fn projection(model: &Model, face: &Face) -> Result<TransMat> {
    model.system().ensure_same(&face.sys)?;
    match (&face.rep, model) {
        (FaceRep::Quantum { isometry }, Model::Quantum(q)) => {
            let p = isometry * isometry.adjoint();
            Ok(q.superoperator(q, |x| &p * x * &p))
        }
        (FaceRep::Classical { support }, Model::Classical(m)) => {
            let d = m.d();
            let mut mat = RMat::zeros(d, d);
            for &i in support {
                mat[(i, i)] = 1.0;
            }
            Ok(TransMat {
                in_sys: m.system().clone(),
                out_sys: m.system().clone(),
                matrix: mat,
            })
        }
        _ => Err(GptError::Unsupported(
            "projections need a quantum or classical model".into(),
        )),
    }
}

/// `Π_F ρ / (a_F|ρ)`, a state of `F`.
pub fn project_and_renormalize(model: &Model, face: &Face, rho: &StateVec) -> Result<StateVec> {
    let a = effect_of(model, face)?;
    let p = pair(&a, rho)?;
    if p <= RANK_TOL {
        return Err(GptError::DivisionGuard(format!(
            "state has probability {p:e} on the face"
        )));
    }
    let proj = crate::framework::apply(&projection(model, face)?, rho)?;
    Ok(proj.scaled(1.0 / p))
}

/// A pure state `φ_p` with `(a_i|φ_p) = p_i` for the effects of `maxset`.
pub fn superposition_state(
    model: &Model,
    probs: &[f64],
    maxset: &DistinguishableSet,
) -> Result<StateVec> {
    superposition_with_phases(model, probs, &vec![0.0; probs.len()], maxset)
}

/// `Σ_i √p_i e^{iθ_i} |u_i⟩` where `|u_i⟩` are the vectors of `maxset`.
/// Different phase vectors give different solutions of the same
/// probability constraints.
pub fn superposition_with_phases(
    model: &Model,
    probs: &[f64],
    phases: &[f64],
    maxset: &DistinguishableSet,
) -> Result<StateVec> {
    if probs.len() != maxset.len() || phases.len() != probs.len() {
        return Err(crate::error::dim_err(maxset.len(), probs.len()));
    }
    let total: f64 = probs.iter().sum();
    if probs.iter().any(|&p| p < -1e-12) || (total - 1.0).abs() > 1e-9 {
        return Err(GptError::Validation(format!(
            "not a probability vector (sum {total})"
        )));
    }
    match model {
        Model::Quantum(q) => {
            let mut v = CVec::zeros(q.d());
            for ((p, th), s) in probs.iter().zip(phases).zip(&maxset.states) {
                let u = q.ket_of(s)?;
                v += u * C64::from_polar(p.max(0.0).sqrt(), *th);
            }
            Ok(q.state_from_ket(&v))
        }
        Model::Classical(_) => {
            let hit: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 1e-12).collect();
            match hit.as_slice() {
                [i] => Ok(maxset.states[*i].clone()),
                _ => Err(GptError::Infeasible(
                    "classical pure states cannot superpose distinct outcomes".into(),
                )),
            }
        }
        Model::Custom(_) => Err(GptError::Unsupported(
            "superposition needs a quantum or classical model".into(),
        )),
    }
}

/// Ideal compression of a quantum face into a system of its own dimension.
#[derive(Clone, Debug)]
pub struct FaceEncoding {
    pub code: QuantumModel,
    /// `d × r` isometry onto the support.
    pub isometry: CMat,
    /// Channel `A → C`: `X ↦ V†XV + Tr[(I - VV†)X] |0⟩⟨0|`.
    pub encode: TransMat,
    /// Channel `C → A`: `Y ↦ V Y V†`.
    pub decode: TransMat,
}

pub fn compress_face(q: &QuantumModel, face: &Face) -> Result<FaceEncoding> {
    let FaceRep::Quantum { isometry } = &face.rep else {
        return Err(GptError::Unsupported("compression needs a quantum face".into()));
    };
    q.system().ensure_same(&face.sys)?;
    let r = isometry.ncols();
    if r == 0 {
        return Err(GptError::EmptyFace);
    }
    let code = QuantumModel::new(r);
    let v = isometry.clone();
    let comp = CMat::identity(q.d(), q.d()) - &v * v.adjoint();
    let encode = q.superoperator(&code, |x| {
        let mut y = v.adjoint() * x * &v;
        y[(0, 0)] += linalg::trace_prod(&comp, x);
        y
    });
    let decode = code.superoperator(q, |y| &v * y * v.adjoint());
    Ok(FaceEncoding {
        code,
        isometry: isometry.clone(),
        encode,
        decode,
    })
}

/// Pure-state dimension check: `rank(Σφ_i/N)` equals `d`.
pub fn is_maximal(model: &Model, set: &DistinguishableSet) -> Result<bool> {
    if set.is_empty() {
        return Ok(false);
    }
    is_completely_mixed(model, &uniform_mixture(set), RANK_TOL)
}
