//! Purification, Choi states, link product, teleportation and the transpose
//! of reversible transformations.
//!
//! Bipartite vectors on `A ⊗ B` are stored row-major, so their coordinates
//! can be viewed as a `D_A × D_B` matrix. With the canonical maximally
//! entangled state `Φ` on `A ⊗ Ã` viewed this way as `Φ_mat`, the Choi state
//! of `T` is simply `T · Φ_mat`, and every identity below reduces to small
//! real matrix products.

use crate::error::{dim_err, GptError, Result};
use crate::framework::{dot, marginal_first, EffectVec, StateVec, SystemRef, TransMat};
use crate::linalg::{self, c, eigh, CMat, CVec, RMat};
use crate::models::{ClassicalModel, Model, QuantumModel, TheoryModel};
use crate::structure;

const TOL: f64 = 1e-9;

/// A pure bipartite state together with its marginal on the first system.
#[derive(Clone, Debug)]
pub struct PurifiedState {
    pub state: StateVec,
    pub marginal_a: StateVec,
    /// `1 -` largest eigenvalue weight of the joint state (quantum); zero
    /// for a classical vertex.
    pub purity_residual: f64,
    pub model_a: Model,
    pub model_b: Model,
}

impl PurifiedState {
    /// Residual between the stored marginal and a freshly contracted one.
    pub fn marginal_residual(&self) -> Result<f64> {
        let m = marginal_first(&self.state, self.model_a.system(), self.model_b.system())?;
        Ok(m.distance(&self.marginal_a))
    }
}

pub(crate) fn quantum_of(sys: &SystemRef) -> Result<QuantumModel> {
    if sys.kind != crate::framework::ModelKind::Quantum {
        return Err(GptError::Unsupported(format!(
            "{sys} is not a quantum system"
        )));
    }
    Ok(QuantumModel::with_factors(&sys.factors))
}

fn ket_matrix(ket: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |i, j| ket[i * cols + j])
}

fn bipartite_view(v: &[f64], rows: usize, cols: usize) -> RMat {
    RMat::from_row_slice(rows, cols, v)
}

/// A purification `Ψ = Σ √p_i |u_i⟩|i⟩` of `ρ` with purifying dimension
/// `d_b`, where `Σ p_i |u_i⟩⟨u_i|` is the spectral decomposition of `ρ`.
///
/// Classical models admit purifications only of pure states; a mixed
/// state yields an infeasible error.
pub fn purify(model: &Model, rho: &StateVec, d_b: usize) -> Result<PurifiedState> {
    model.system().ensure_same(&rho.sys)?;
    match model {
        Model::Quantum(q) => {
            let dec = structure::spectral_decompose(model, rho)?;
            let rank = dec.probs.iter().filter(|&&p| p > TOL).count();
            if d_b < rank {
                return Err(GptError::Infeasible(format!(
                    "purifying dimension {d_b} below rank {rank}"
                )));
            }
            let b = QuantumModel::new(d_b);
            let ab = q.compose(&b);
            let mut ket = CVec::zeros(q.d() * d_b);
            for (i, (p, s)) in dec.probs.iter().zip(&dec.pures.states).enumerate() {
                if *p <= TOL {
                    continue;
                }
                let u = q.ket_of(s)?;
                for a in 0..q.d() {
                    ket[a * d_b + i] += u[a] * c(p.sqrt(), 0.0);
                }
            }
            let state = ab.state_from_ket(&ket);
            let purity_residual = 1.0 - ab.spectrum(&state.coords)[0];
            Ok(PurifiedState {
                marginal_a: marginal_first(&state, q.system(), b.system())?,
                state,
                purity_residual,
                model_a: model.clone(),
                model_b: Model::Quantum(b),
            })
        }
        Model::Classical(m) => {
            let Some(i) = m.vertex_index(rho, TOL) else {
                return Err(GptError::Infeasible(
                    "a classical pure bipartite state is a product of vertices, so its marginals are pure"
                        .into(),
                ));
            };
            let b = ClassicalModel::new(d_b.max(1));
            let state = crate::framework::tensor_state(&m.vertex(i), &b.vertex(0))?;
            Ok(PurifiedState {
                marginal_a: marginal_first(&state, m.system(), b.system())?,
                state,
                purity_residual: 0.0,
                model_a: model.clone(),
                model_b: Model::Classical(b),
            })
        }
        Model::Custom(_) => Err(GptError::Unsupported(
            "purification needs a quantum or classical model".into(),
        )),
    }
}

/// The canonical maximally entangled state `(1/√d) Σ_i |i⟩|i⟩` on `A ⊗ Ã`,
/// where `Ã` is a single system of the same dimension.
pub fn canonical_phi(q: &QuantumModel) -> PurifiedState {
    let d = q.d();
    let b = QuantumModel::new(d);
    let ab = q.compose(&b);
    let mut ket = CVec::zeros(d * d);
    for i in 0..d {
        ket[i * d + i] = c(1.0 / (d as f64).sqrt(), 0.0);
    }
    let state = ab.state_from_ket(&ket);
    PurifiedState {
        marginal_a: q.invariant_state(),
        state,
        purity_residual: 0.0,
        model_a: Model::Quantum(q.clone()),
        model_b: Model::Quantum(b),
    }
}

/// Map on the purifying system connecting two purifications of the same
/// state.
#[derive(Clone, Debug)]
pub struct Connection {
    pub map: TransMat,
    /// Whether `map` is reversible (equal purifying dimensions).
    pub reversible: bool,
    /// `max |(I ⊗ map)Ψ - Ψ'|` over coordinates.
    pub residual: f64,
}

/// Finds `U` on the purifying system with `(I ⊗ U)Ψ = Ψ'`.
///
/// Writing the two pure states as `d_A × d_B` amplitude matrices `M` and
/// `M'`, the equation reads `M Uᵀ = M'`; since `M M† = M' M'†`, the polar
/// factor of `M† M'` solves it exactly, including inside degenerate
/// eigenspaces. For different purifying dimensions the polar factor is a
/// partial isometry and is completed to a channel by discarding the
/// orthogonal complement and preparing `|0⟩`.
pub fn connecting_reversible(psi: &PurifiedState, psi2: &PurifiedState) -> Result<Connection> {
    let (Model::Quantum(qa), Model::Quantum(qb), Model::Quantum(qb2)) =
        (&psi.model_a, &psi.model_b, &psi2.model_b)
    else {
        return Err(GptError::Unsupported(
            "connecting purifications needs quantum systems".into(),
        ));
    };
    psi.model_a.system().ensure_same(psi2.model_a.system())?;
    let gap = psi.marginal_a.distance(&psi2.marginal_a);
    if gap > 1e-8 {
        return Err(GptError::Precondition(format!(
            "purifications have different marginals (gap {gap:e})"
        )));
    }
    let ab = qa.compose(qb);
    let ab2 = qa.compose(qb2);
    let m = ket_matrix(&ab.ket_of(&psi.state)?, qa.d(), qb.d());
    let m2 = ket_matrix(&ab2.ket_of(&psi2.state)?, qa.d(), qb2.d());
    let overlap = m.adjoint() * &m2;

    let (map, reversible) = if qb.d() == qb2.d() {
        let w = linalg::polar_unitary(&overlap);
        (qb.unitary_channel(&w.transpose()), true)
    } else {
        let (x, s, y_t) = linalg::thin_svd(&overlap);
        let r = s.iter().filter(|&&v| v > 1e-10).count();
        let w = x.columns(0, r) * y_t.rows(0, r);
        let k = w.transpose();
        let kept = k.adjoint() * &k;
        let discard = CMat::identity(qb.d(), qb.d()) - kept;
        let map = qb.superoperator(qb2, |x| {
            let mut y = &k * x * k.adjoint();
            y[(0, 0)] += linalg::trace_prod(&discard, x);
            y
        });
        (map, false)
    };
    let ext = crate::framework::extend_left(qa.system(), &map)?;
    let out = crate::framework::apply(&ext, &psi.state)?;
    Ok(Connection {
        residual: out.distance(&psi2.state),
        map,
        reversible,
    })
}

/// A Choi state `R = (T ⊗ I_Ã)Φ` on `out ⊗ Ã`.
#[derive(Clone, Debug)]
pub struct ChoiState {
    pub channel_in: SystemRef,
    pub channel_out: SystemRef,
    pub state: StateVec,
    /// The faithful state used, on `in ⊗ Ã`.
    pub phi: StateVec,
}

impl ChoiState {
    fn view(&self) -> RMat {
        bipartite_view(&self.state.coords, self.channel_out.dim, self.channel_in.dim)
    }

    /// The Choi state as a positive matrix on `out ⊗ Ã`.
    pub fn matrix(&self) -> Result<CMat> {
        let q = quantum_of(&self.state.sys)?;
        Ok(q.devectorize(&self.state.coords))
    }

    /// Numerical rank of the Choi matrix; one for atomic maps.
    pub fn rank(&self, tol: f64) -> Result<usize> {
        Ok(linalg::eigvalsh(&self.matrix()?)
            .iter()
            .filter(|&&x| x > tol)
            .count())
    }
}

fn phi_view(q_in: &QuantumModel) -> (StateVec, RMat) {
    let phi = canonical_phi(q_in).state;
    let d = q_in.system().dim;
    let view = bipartite_view(&phi.coords, d, d);
    (phi, view)
}

pub fn choi_of(t: &TransMat) -> Result<ChoiState> {
    let q_in = quantum_of(&t.in_sys)?;
    let q_out = quantum_of(&t.out_sys)?;
    let (phi, view) = phi_view(&q_in);
    let r = &t.matrix * view;
    let sys = q_out.compose(&QuantumModel::new(q_in.d()));
    Ok(ChoiState {
        channel_in: t.in_sys.clone(),
        channel_out: t.out_sys.clone(),
        state: StateVec::unchecked(sys.system().clone(), r.transpose().as_slice().to_vec()),
        phi,
    })
}

fn ensure_canonical(r: &ChoiState) -> Result<(QuantumModel, RMat)> {
    let q_in = quantum_of(&r.channel_in)?;
    let (phi, view) = phi_view(&q_in);
    if phi.sys != r.phi.sys || phi.distance(&r.phi) > 1e-12 {
        return Err(GptError::Wiring(
            "Choi state was built from a different faithful state".into(),
        ));
    }
    let expect = quantum_of(&r.channel_out)?.compose(&QuantumModel::new(q_in.d()));
    expect.system().ensure_same(&r.state.sys)?;
    Ok((q_in, view))
}

/// Recovers `T` from its Choi state.
///
/// The marginal of `R` on `Ã` must not exceed the invariant state, which is
/// the normalisation condition for a transformation.
pub fn channel_of(r: &ChoiState) -> Result<TransMat> {
    let (q_in, view) = ensure_canonical(r)?;
    let q_out = quantum_of(&r.channel_out)?;
    let conj = QuantumModel::new(q_in.d());
    let marg = crate::framework::marginal_second(&r.state, q_out.system(), conj.system())?;
    let gap = conj.devectorize(&conj.invariant_state().coords) - conj.devectorize(&marg.coords);
    let low = *linalg::eigvalsh(&gap).last().unwrap();
    if low < -1e-8 {
        return Err(GptError::Validation(format!(
            "Choi state violates normalisation (eigenvalue {low:e})"
        )));
    }
    let inv = view
        .try_inverse()
        .ok_or_else(|| GptError::Validation("faithful state is singular".into()))?;
    Ok(TransMat {
        in_sys: r.channel_in.clone(),
        out_sys: r.channel_out.clone(),
        matrix: r.view() * inv,
    })
}

/// The teleportation effect `|Φ⟩⟨Φ|` on `Ã ⊗ A`, as a `D × D` view.
fn teleport_effect_view(q: &QuantumModel) -> RMat {
    let d = q.d();
    let ab = q.compose(&QuantumModel::new(d));
    let mut ket = CVec::zeros(d * d);
    for i in 0..d {
        ket[i * d + i] = c(1.0 / (d as f64).sqrt(), 0.0);
    }
    let e = ab.coords_unchecked(&linalg::projector(&ket));
    bipartite_view(&e, q.system().dim, q.system().dim)
}

fn link_views(r_d: &ChoiState, r_c: &ChoiState) -> Result<(RMat, SystemRef)> {
    r_c.channel_out.ensure_same(&r_d.channel_in).map_err(|_| {
        GptError::Wiring(format!(
            "output {} does not feed input {}",
            r_c.channel_out, r_d.channel_in
        ))
    })?;
    let (q_b, _) = ensure_canonical(r_d)?;
    ensure_canonical(r_c)?;
    let e = teleport_effect_view(&q_b);
    let raw = r_d.view() * e * r_c.view();
    let q_in = quantum_of(&r_c.channel_in)?;
    let sys = quantum_of(&r_d.channel_out)?.compose(&QuantumModel::new(q_in.d()));
    Ok((raw, sys.system().clone()))
}

/// Contraction of `R_D` and `R_C` through the teleportation effect on the
/// middle system, without the `d_B²` prefactor.
pub fn link_contraction(r_d: &ChoiState, r_c: &ChoiState) -> Result<ChoiState> {
    let (raw, sys) = link_views(r_d, r_c)?;
    Ok(ChoiState {
        channel_in: r_c.channel_in.clone(),
        channel_out: r_d.channel_out.clone(),
        state: StateVec::unchecked(sys, raw.transpose().as_slice().to_vec()),
        phi: r_c.phi.clone(),
    })
}

/// The Choi state of `D ∘ C` from those of `D` and `C`.
pub fn link_product(r_d: &ChoiState, r_c: &ChoiState) -> Result<ChoiState> {
    let mut out = link_contraction(r_d, r_c)?;
    let d_b = r_d.channel_in.d as f64;
    out.state = out.state.scaled(d_b * d_b);
    Ok(out)
}

/// Faithful state, teleportation effect and the resulting probability.
#[derive(Clone, Debug)]
pub struct TeleportKit {
    pub d: usize,
    pub phi: PurifiedState,
    /// `|Φ⟩⟨Φ|` as an effect on `Ã ⊗ A`.
    pub effect_e: EffectVec,
    /// Success probability of the teleportation branch.
    pub p: f64,
    /// Map from input state to (unnormalised) output state.
    pub wiring: RMat,
    /// `max |wiring - p I|`.
    pub wiring_residual: f64,
    /// `(E|Φ)`.
    pub pair_e_phi: f64,
}

pub fn teleport_kit(d: usize) -> Result<TeleportKit> {
    if d < 2 {
        return Err(GptError::Precondition(format!("teleportation needs d >= 2, got {d}")));
    }
    let q = QuantumModel::new(d);
    let phi = canonical_phi(&q);
    let dim = q.system().dim;
    let phi_v = bipartite_view(&phi.state.coords, dim, dim);
    let e_v = teleport_effect_view(&q);
    // input ρ on A, Φ on Ã'⊗A''; E acts on A⊗Ã'; out_m = Σ ρ_k E[k,l] Φ[l,m]
    let wiring = (&e_v * &phi_v).transpose();
    let p = wiring.trace() / dim as f64;
    let wiring_residual = linalg::max_abs_real(&(&wiring - RMat::identity(dim, dim) * p));
    let effect_e = EffectVec {
        sys: phi.state.sys.clone(),
        coords: e_v.transpose().as_slice().to_vec(),
    };
    let pair_e_phi = dot(&effect_e.coords, &phi.state.coords);
    Ok(TeleportKit {
        d,
        phi,
        effect_e,
        p,
        wiring,
        wiring_residual,
        pair_e_phi,
    })
}

fn ensure_reversible(u: &TransMat) -> Result<()> {
    if u.in_sys != u.out_sys {
        return Err(GptError::Validation("reversible maps act on one system".into()));
    }
    let n = u.matrix.nrows();
    let orth = linalg::max_abs_real(&(u.matrix.transpose() * &u.matrix - RMat::identity(n, n)));
    let atomic = choi_of(u)?.rank(1e-8)? == 1;
    if orth > 1e-8 || !atomic {
        return Err(GptError::Validation(
            "transformation is not reversible".into(),
        ));
    }
    Ok(())
}

/// `U^τ` with `(U ⊗ I)Φ = (I ⊗ U^τ)Φ`.
pub fn transpose_reversible(u: &TransMat, phi: &PurifiedState) -> Result<TransMat> {
    ensure_reversible(u)?;
    u.in_sys.ensure_same(phi.model_a.system())?;
    let dim = u.in_sys.dim;
    let b = phi.model_b.system();
    if b.dim != dim {
        return Err(dim_err(dim, b.dim));
    }
    let view = bipartite_view(&phi.state.coords, dim, dim);
    let inv = view
        .clone()
        .try_inverse()
        .ok_or_else(|| GptError::Validation("Φ is not faithful".into()))?;
    Ok(TransMat {
        in_sys: b.clone(),
        out_sys: b.clone(),
        matrix: (inv * &u.matrix * view).transpose(),
    })
}

/// `U* = (U^τ)^{-1}`.
pub fn conjugate_reversible(u: &TransMat, phi: &PurifiedState) -> Result<TransMat> {
    let t = transpose_reversible(u, phi)?;
    let inv = t
        .matrix
        .clone()
        .try_inverse()
        .ok_or_else(|| GptError::Validation("transpose is singular".into()))?;
    Ok(TransMat {
        matrix: inv,
        ..t
    })
}

/// Whether the pure state `Ψ` on `A ⊗ C` has a completely mixed marginal
/// on `A`.
pub fn is_dynamically_faithful(model_a: &Model, model_c: &Model, psi: &StateVec) -> Result<bool> {
    let joint = model_a.compose(model_c)?;
    joint.system().ensure_same(&psi.sys)?;
    if !joint.is_pure(psi, 1e-8) {
        return Err(GptError::Validation("state is not pure".into()));
    }
    let marg = marginal_first(psi, model_a.system(), model_c.system())?;
    structure::is_completely_mixed(model_a, &marg, 1e-9)
}

/// Rank of `T ↦ (T ⊗ I)Ψ`, i.e. of the `D_A × D_C` view of `Ψ`. Equals
/// `D_A` exactly when the encoding is injective.
pub fn encoding_rank(psi: &StateVec, sys_a: &SystemRef, sys_c: &SystemRef) -> usize {
    linalg::real_rank(&bipartite_view(&psi.coords, sys_a.dim, sys_c.dim), 1e-9)
}

/// The map `χ + ξ ↦ χ - ξ`, i.e. `X ↦ 2 Tr[X] I/d - X`.
pub fn inversion_map(q: &QuantumModel) -> TransMat {
    let d = q.d();
    q.superoperator(q, |x| {
        CMat::identity(d, d) * (x.trace() * c(2.0 / d as f64, 0.0)) - x
    })
}

/// Smallest eigenvalue of the Choi matrix of `T`.
pub fn min_choi_eigenvalue(t: &TransMat) -> Result<f64> {
    let m = choi_of(t)?.matrix()?;
    Ok(*eigh(&m).values.last().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::{apply, compose, extend, extend_left};
    use crate::linalg::{haar_unitary, random_kraus, rng};

    fn qubit_diag(p: f64) -> (Model, StateVec) {
        let q = QuantumModel::new(2);
        let rho = CMat::from_diagonal(&CVec::from_vec(vec![c(p, 0.0), c(1.0 - p, 0.0)]));
        let s = q.state_from_matrix(&rho).unwrap();
        (Model::Quantum(q), s)
    }

    #[test]
    fn purification_of_diagonal_state() {
        let (m, rho) = qubit_diag(0.7);
        let p = purify(&m, &rho, 2).unwrap();
        assert!(p.purity_residual.abs() < 1e-12);
        assert!(p.marginal_a.distance(&rho) < 1e-14);
        assert!(p.marginal_residual().unwrap() < 1e-14);
        assert!(matches!(purify(&m, &rho, 1), Err(GptError::Infeasible(_))));
    }

    #[test]
    fn purification_of_pure_state_is_product() {
        let (m, rho) = qubit_diag(1.0);
        let p = purify(&m, &rho, 1).unwrap();
        assert_eq!(p.state.sys.dim, 4);
        assert!(p.marginal_a.distance(&rho) < 1e-14);
    }

    #[test]
    fn invariant_purification_is_canonical_phi() {
        let q = QuantumModel::new(3);
        let m = Model::Quantum(q.clone());
        let p = purify(&m, &q.invariant_state(), 3).unwrap();
        assert!(p.state.distance(&canonical_phi(&q).state) < 1e-14);
        let mb = crate::framework::marginal_second(&p.state, q.system(), q.system()).unwrap();
        assert!(mb.distance(&q.invariant_state()) < 1e-14);
    }

    #[test]
    fn classical_mixed_state_has_no_purification() {
        let c3 = ClassicalModel::new(3);
        let m = Model::Classical(c3.clone());
        assert!(purify(&m, &c3.invariant_state(), 3).is_err());
        assert!(purify(&m, &c3.vertex(2), 3).is_ok());
    }

    #[test]
    fn planted_unitary_is_recovered() {
        let mut r = rng(77);
        for d in 2..4 {
            let q = QuantumModel::new(d);
            let m = Model::Quantum(q.clone());
            let rho = q.sample_mixed_state(&mut r, d);
            let p = purify(&m, &rho, d).unwrap();
            let v = q.unitary_channel(&haar_unitary(&mut r, d));
            let moved = apply(&extend_left(q.system(), &v).unwrap(), &p.state).unwrap();
            let p2 = PurifiedState {
                state: moved,
                ..p.clone()
            };
            let conn = connecting_reversible(&p, &p2).unwrap();
            assert!(conn.reversible);
            assert!(conn.residual < 1e-10, "{}", conn.residual);
            assert!(linalg::max_abs_real(&(conn.map.matrix - v.matrix)) < 1e-8);
        }
    }

    #[test]
    fn connecting_across_purifying_dimensions() {
        let q = QuantumModel::new(2);
        let m = Model::Quantum(q.clone());
        let mut r = rng(5);
        let rho = q.sample_mixed_state(&mut r, 2);
        let small = purify(&m, &rho, 2).unwrap();
        let big = purify(&m, &rho, 3).unwrap();
        let conn = connecting_reversible(&small, &big).unwrap();
        assert!(!conn.reversible);
        assert!(conn.residual < 1e-12);
        assert!(conn.map.channel_residual() < 1e-12);
    }

    #[test]
    fn marginal_mismatch_is_rejected() {
        let (m, a) = qubit_diag(0.7);
        let (_, b) = qubit_diag(0.6);
        let pa = purify(&m, &a, 2).unwrap();
        let pb = purify(&m, &b, 2).unwrap();
        assert!(matches!(
            connecting_reversible(&pa, &pb),
            Err(GptError::Precondition(_))
        ));
    }

    #[test]
    fn identity_choi_is_phi() {
        let q = QuantumModel::new(3);
        let r = choi_of(&TransMat::identity(q.system())).unwrap();
        assert!(r.state.distance(&canonical_phi(&q).state) < 1e-15);
        assert_eq!(r.rank(1e-9).unwrap(), 1);
    }

    #[test]
    fn choi_round_trip_on_random_channels() {
        let mut r = rng(13);
        let qa = QuantumModel::new(2);
        let qb = QuantumModel::new(3);
        let t = qa.kraus_map(&qb, &random_kraus(&mut r, 2, 3, 4));
        let choi = choi_of(&t).unwrap();
        let back = channel_of(&choi).unwrap();
        assert!(linalg::max_abs_real(&(back.matrix - &t.matrix)) < 1e-12);
        assert!(choi.rank(1e-9).unwrap() > 1);
    }

    #[test]
    fn channel_of_rejects_overnormalised_choi() {
        let q = QuantumModel::new(2);
        let mut r = choi_of(&TransMat::identity(q.system())).unwrap();
        r.state = r.state.scaled(1.5);
        assert!(matches!(channel_of(&r), Err(GptError::Validation(_))));
    }

    #[test]
    fn link_product_matches_composition() {
        let mut r = rng(21);
        let a = QuantumModel::new(2);
        let b = QuantumModel::new(3);
        let cc = QuantumModel::new(2);
        let t1 = a.kraus_map(&b, &random_kraus(&mut r, 2, 3, 2));
        let t2 = b.kraus_map(&cc, &random_kraus(&mut r, 3, 2, 3));
        let linked = link_product(&choi_of(&t2).unwrap(), &choi_of(&t1).unwrap()).unwrap();
        let direct = choi_of(&compose(&t2, &t1).unwrap()).unwrap();
        assert!(linked.state.distance(&direct.state) < 1e-12);
        let raw = link_contraction(&choi_of(&t2).unwrap(), &choi_of(&t1).unwrap()).unwrap();
        let ratio = raw.state.scaled(9.0).distance(&direct.state);
        assert!(ratio < 1e-12);
        assert!(matches!(
            link_product(&choi_of(&t1).unwrap(), &choi_of(&t1).unwrap()),
            Err(GptError::Wiring(_))
        ));
    }

    #[test]
    fn teleportation_probabilities() {
        for d in 2..5 {
            let kit = teleport_kit(d).unwrap();
            assert!((kit.p - 1.0 / (d * d) as f64).abs() < 1e-12);
            assert!(kit.wiring_residual < 1e-12);
            assert!((kit.pair_e_phi - 1.0).abs() < 1e-12);
        }
        assert!(teleport_kit(1).is_err());
    }

    #[test]
    fn transpose_wiring_and_isotropy() {
        let mut r = rng(31);
        let q = QuantumModel::new(3);
        let phi = canonical_phi(&q);
        let u = haar_unitary(&mut r, 3);
        let t = q.unitary_channel(&u);
        let tau = transpose_reversible(&t, &phi).unwrap();
        let lhs = apply(&extend(&t, q.system()).unwrap(), &phi.state).unwrap();
        let rhs = apply(&extend_left(q.system(), &tau).unwrap(), &phi.state).unwrap();
        assert!(lhs.distance(&rhs) < 1e-12);
        // with the canonical Φ the transpose is the channel of the matrix transpose
        let want = q.unitary_channel(&u.transpose());
        assert!(linalg::max_abs_real(&(tau.matrix - want.matrix)) < 1e-12);
        let conj = conjugate_reversible(&t, &phi).unwrap();
        let both = crate::framework::tensor_trans(&t, &conj).unwrap();
        assert!(apply(&both, &phi.state).unwrap().distance(&phi.state) < 1e-12);
        let id = transpose_reversible(&TransMat::identity(q.system()), &phi).unwrap();
        assert!(linalg::max_abs_real(&(id.matrix - RMat::identity(9, 9))) < 1e-12);
    }

    #[test]
    fn transpose_rejects_irreversible_maps() {
        let q = QuantumModel::new(2);
        let phi = canonical_phi(&q);
        assert!(transpose_reversible(&inversion_map(&q), &phi).is_err());
        let half = TransMat::identity(q.system()).scaled(0.5);
        assert!(transpose_reversible(&half, &phi).is_err());
    }

    #[test]
    fn faithfulness() {
        let q = QuantumModel::new(2);
        let m = Model::Quantum(q.clone());
        let phi = canonical_phi(&q);
        assert!(is_dynamically_faithful(&m, &m, &phi.state).unwrap());
        assert_eq!(encoding_rank(&phi.state, q.system(), q.system()), 4);
        let prod = crate::framework::tensor_state(
            &q.state_from_ket(&linalg::basis_ket(2, 0)),
            &q.state_from_ket(&linalg::basis_ket(2, 1)),
        )
        .unwrap();
        assert!(!is_dynamically_faithful(&m, &m, &prod).unwrap());
        let (_, rho) = qubit_diag(0.8);
        let partial = purify(&m, &rho, 2).unwrap();
        assert!(is_dynamically_faithful(&m, &m, &partial.state).unwrap());
        assert_eq!(encoding_rank(&partial.state, q.system(), q.system()), 4);
        assert!(is_dynamically_faithful(&m, &m, &q.compose(&q).invariant_state()).is_err());
    }

    #[test]
    fn inversion_map_is_not_completely_positive() {
        for d in 2..5 {
            let q = QuantumModel::new(d);
            let low = min_choi_eigenvalue(&inversion_map(&q)).unwrap();
            assert!((low - (2.0 / (d * d) as f64 - 1.0)).abs() < 1e-12);
        }
    }
}
