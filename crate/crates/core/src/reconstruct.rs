//! Density-matrix representation built from operational data: a maximal
//! distinguishable set, a pair of equatorial axes on every two-state face,
//! and the Hermitian matrices assigned to them. Axis fixing, duality,
//! positivity and completeness are checked on the resulting map `ρ ↦ S_ρ`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, TAU};

use nalgebra::DVector;
use rand::Rng as _;
use serde::Serialize;
use serde_json::{json, Value};

use crate::axioms::{Builder, CheckConfig, CheckReport, Status};
use crate::choi::{self, conjugate_reversible, quantum_of, PurifiedState};
use crate::error::{dim_err, GptError, Result};
use crate::framework::{
    apply, extend, marginal_first, mix, pair, partial_pair_first, tensor_state, StateVec,
    SystemRef, TransMat,
};
use crate::linalg::{
    self, c, eigh, eigvalsh, haar_ket, kron, kron_real, kron_vec, max_abs, CMat, CVec, RMat, C64,
};
use crate::models::{Model, QuantumModel, TheoryModel};
use crate::structure::{self, dual_effect, face_of, DistinguishableSet};

/// Tolerance for the exact identities the axis-fixing steps rely on.
const FIX_TOL: f64 = 1e-8;

/// Matrix entries below this modulus carry no usable phase.
const PHASE_FLOOR: f64 = 1e-4;

pub type FacePair = (usize, usize);

/// How the free axis choices of each face are made.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gauge {
    /// Azimuth zero on every face.
    Canonical,
    /// Independent uniform azimuth per face.
    Seeded(u64),
}

/// `{φ_m} ∪ {σ_x^{mn}, σ_y^{mn}}` together with the axis choices behind it.
#[derive(Clone, Debug)]
pub struct StandardBasis {
    pub sys: SystemRef,
    pub maxset: DistinguishableSet,
    /// `σ_k^{mn} = φ_{k,+} - φ_{k,-}` per face `m < n`.
    pub sigmas: BTreeMap<FacePair, (Vec<f64>, Vec<f64>)>,
    /// `λ` per face, read off the model's frame.
    pub sign_choices: BTreeMap<FacePair, i8>,
    /// Azimuth of the `x` axis per face in the frame of the maxset kets,
    /// in `[0, 2π)`.
    pub phase_offsets: BTreeMap<FacePair, f64>,
}

impl StandardBasis {
    pub fn d(&self) -> usize {
        self.maxset.len()
    }

    /// Basis vectors in order: `φ_1..φ_d`, then `σ_x, σ_y` per face.
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.maxset.states.iter().map(|s| s.coords.clone()).collect();
        for (sx, sy) in self.sigmas.values() {
            out.push(sx.clone());
            out.push(sy.clone());
        }
        out
    }

    /// `D × d²` matrix whose columns are the basis vectors.
    pub fn matrix(&self) -> RMat {
        let v = self.vectors();
        RMat::from_fn(self.sys.dim, v.len(), |i, j| v[j][i])
    }

    /// Smallest singular value of [`Self::matrix`]; positive iff the
    /// vectors are linearly independent.
    pub fn min_singular_value(&self) -> f64 {
        linalg::real_singular_values(&self.matrix()).last().copied().unwrap_or(0.0)
    }

    /// `max |(a_l|σ_k^{mn})|` over all atomic effects of the maxset.
    pub fn orthogonality_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in &self.maxset.effects {
            for (sx, sy) in self.sigmas.values() {
                worst = worst.max(crate::framework::dot(&a.coords, sx).abs());
                worst = worst.max(crate::framework::dot(&a.coords, sy).abs());
            }
        }
        worst
    }

    /// `d²` states spanning the state space: `φ_m` and the `+` axis states.
    pub fn spanning_states(&self) -> Vec<StateVec> {
        let mut out = self.maxset.states.clone();
        for (&(m, n), (sx, sy)) in &self.sigmas {
            for s in [sx, sy] {
                let coords: Vec<f64> = (0..self.sys.dim)
                    .map(|i| 0.5 * (self.maxset.states[m].coords[i] + self.maxset.states[n].coords[i] + s[i]))
                    .collect();
                out.push(StateVec::unchecked(self.sys.clone(), coords));
            }
        }
        out
    }
}

fn unit(d: usize, r: usize, s: usize) -> CMat {
    let mut m = CMat::zeros(d, d);
    m[(r, s)] = c(1.0, 0.0);
    m
}

fn faces(d: usize) -> impl Iterator<Item = FacePair> {
    (0..d).flat_map(move |m| (m + 1..d).map(move |n| (m, n)))
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

fn distinguishable(model: &Model, states: Vec<StateVec>) -> Result<DistinguishableSet> {
    let effects = states.iter().map(|s| dual_effect(model, s)).collect::<Result<_>>()?;
    Ok(DistinguishableSet { states, effects })
}

fn pair_state(a: &StateVec, b: &StateVec) -> Result<StateVec> {
    mix(&[(0.5, a), (0.5, b)])
}

/// Reads `θ` and `λ` off the matrices of `σ_x, σ_y`: in the frame of the
/// maxset kets, `σ_x = e^{iθ}|m⟩⟨n| + h.c.` and `σ_y = iλ e^{iθ}|m⟩⟨n| + h.c.`
/// Returns `(θ, λ, residual)`.
fn measure_axes(q: &QuantumModel, kets: &[CVec], (m, n): FacePair, sx: &[f64], sy: &[f64]) -> (f64, i8, f64) {
    let mx = q.matrix(sx);
    let my = q.matrix(sy);
    let zx = (kets[m].adjoint() * &mx * &kets[n])[(0, 0)];
    let zy = (kets[m].adjoint() * &my * &kets[n])[(0, 0)];
    let theta = linalg::wrap_angle(zx.arg());
    let w = zy / (C64::i() * C64::from_polar(1.0, theta));
    let lambda: i8 = if w.re >= 0.0 { 1 } else { -1 };
    let residual = (zx.norm() - 1.0).abs().max((w - c(lambda as f64, 0.0)).norm());
    (theta, lambda, residual)
}

/// Records the axis choices carried by `sigmas` and checks their form.
fn assemble(
    q: &QuantumModel,
    maxset: DistinguishableSet,
    sigmas: BTreeMap<FacePair, (Vec<f64>, Vec<f64>)>,
) -> Result<StandardBasis> {
    let kets = maxset.states.iter().map(|s| q.ket_of(s)).collect::<Result<Vec<_>>>()?;
    let mut sign_choices = BTreeMap::new();
    let mut phase_offsets = BTreeMap::new();
    for (&face, (sx, sy)) in &sigmas {
        let (theta, lambda, residual) = measure_axes(q, &kets, face, sx, sy);
        if residual > FIX_TOL {
            return Err(GptError::Validation(format!(
                "axes of face {face:?} are not an equatorial pair (residual {residual:e})"
            )));
        }
        sign_choices.insert(face, lambda);
        phase_offsets.insert(face, theta);
    }
    Ok(StandardBasis {
        sys: q.system().clone(),
        maxset,
        sigmas,
        sign_choices,
        phase_offsets,
    })
}

/// Equatorial axes of the face spanned by `φ_m, φ_n`: the face is encoded
/// as a qubit, the axis states are chosen there at azimuth `θ` and pulled
/// back through the decoding channel.
fn face_axes(
    q: &QuantumModel,
    maxset: &DistinguishableSet,
    (m, n): FacePair,
    theta: f64,
    lambda: i8,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let model = Model::Quantum(q.clone());
    let (pm, pn) = (&maxset.states[m], &maxset.states[n]);
    let face = face_of(&model, &pair_state(pm, pn)?)?;
    let enc = structure::compress_face(q, &face)?;
    let wm = enc.code.ket_of(&apply(&enc.encode, pm)?)?;
    let wn = enc.code.ket_of(&apply(&enc.encode, pn)?)?;
    let rot = C64::from_polar(1.0, -theta);
    let iy = C64::i() * c(lambda as f64, 0.0) * rot;
    let axis = |coef: C64| -> Result<Vec<f64>> {
        let plus = (&wm + &wn * coef) * c(FRAC_1_SQRT_2, 0.0);
        let minus = (&wm - &wn * coef) * c(FRAC_1_SQRT_2, 0.0);
        let p = apply(&enc.decode, &enc.code.state_from_ket(&plus))?;
        let n = apply(&enc.decode, &enc.code.state_from_ket(&minus))?;
        Ok(sub(&p.coords, &n.coords))
    };
    Ok((axis(rot)?, axis(-iy)?))
}

/// Builds the standard basis of a quantum model on its canonical maximal
/// set, with the axis choices given by `gauge` and `λ = +1` everywhere.
pub fn build_standard_basis(model: &Model, gauge: Gauge) -> Result<StandardBasis> {
    let Model::Quantum(q) = model else {
        return Err(GptError::Unsupported(
            "the two-state faces of this model are not qubits".into(),
        ));
    };
    let maxset = structure::maximal_set(model)?;
    build_on_maxset(q, maxset, gauge)
}

pub fn build_on_maxset(q: &QuantumModel, maxset: DistinguishableSet, gauge: Gauge) -> Result<StandardBasis> {
    if maxset.len() != q.d() {
        return Err(dim_err(q.d(), maxset.len()));
    }
    let mut rng = match gauge {
        Gauge::Canonical => None,
        Gauge::Seeded(seed) => Some(linalg::rng(seed)),
    };
    let mut sigmas = BTreeMap::new();
    for face in faces(q.d()) {
        let theta = rng.as_mut().map_or(0.0, |r| r.random_range(0.0..TAU));
        sigmas.insert(face, face_axes(q, &maxset, face, theta, 1)?);
    }
    assemble(q, maxset, sigmas)
}

// ---------------------------------------------------------------------------
// Matrix representation
// ---------------------------------------------------------------------------

/// The linear map `ρ ↦ S_ρ` fixed by assigning a Hermitian matrix to each
/// basis vector.
#[derive(Clone, Debug)]
pub struct MatrixRep {
    pub basis: StandardBasis,
    /// Matrix of each basis vector, in the order of [`StandardBasis::vectors`].
    pub assignments: Vec<CMat>,
    vectors: RMat,
    coeffs: RMat,
    unassign: RMat,
}

/// `E_mm` for `φ_m`, `E_mn + E_nm` for `σ_x^{mn}` and `iλ(E_mn - E_nm)` for
/// `σ_y^{mn}`.
pub fn canonical_assignments(basis: &StandardBasis) -> Vec<CMat> {
    let d = basis.d();
    let mut out: Vec<CMat> = (0..d).map(|m| unit(d, m, m)).collect();
    for &(m, n) in basis.sigmas.keys() {
        let lambda = basis.sign_choices.get(&(m, n)).copied().unwrap_or(1) as f64;
        out.push(unit(d, m, n) + unit(d, n, m));
        out.push((unit(d, m, n) - unit(d, n, m)) * c(0.0, lambda));
    }
    out
}

fn real_vec(m: &CMat) -> Vec<f64> {
    m.iter().map(|z| z.re).chain(m.iter().map(|z| z.im)).collect()
}

impl MatrixRep {
    pub fn new(basis: StandardBasis) -> Result<Self> {
        let a = canonical_assignments(&basis);
        Self::with_assignments(basis, a)
    }

    pub fn with_assignments(basis: StandardBasis, assignments: Vec<CMat>) -> Result<Self> {
        let d = basis.d();
        if assignments.len() != d * d || basis.sys.dim != d * d {
            return Err(dim_err(d * d, assignments.len()));
        }
        let vectors = basis.matrix();
        let coeffs = vectors.clone().try_inverse().ok_or_else(|| {
            GptError::Validation("basis vectors are linearly dependent".into())
        })?;
        let cols: Vec<Vec<f64>> = assignments.iter().map(real_vec).collect();
        let r = RMat::from_fn(2 * d * d, d * d, |i, j| cols[j][i]);
        let unassign = r
            .pseudo_inverse(1e-12)
            .map_err(|e| GptError::Validation(e.to_string()))?;
        Ok(MatrixRep {
            basis,
            assignments,
            vectors,
            coeffs,
            unassign,
        })
    }

    pub fn d(&self) -> usize {
        self.basis.d()
    }

    /// Expansion coefficients of a span vector in the basis.
    pub fn coefficients(&self, coords: &[f64]) -> Vec<f64> {
        (&self.coeffs * DVector::from_column_slice(coords)).iter().copied().collect()
    }

    pub fn represent_coords(&self, coords: &[f64]) -> CMat {
        let d = self.d();
        let mut s = CMat::zeros(d, d);
        for (x, a) in self.coefficients(coords).iter().zip(&self.assignments) {
            if *x != 0.0 {
                s += a * c(*x, 0.0);
            }
        }
        s
    }

    /// The span vector represented by `s`; fails if `s` is outside the
    /// real span of the assignments.
    pub fn unrepresent(&self, s: &CMat) -> Result<Vec<f64>> {
        let d = self.d();
        if s.nrows() != d || s.ncols() != d {
            return Err(dim_err(d, s.nrows()));
        }
        let coef = &self.unassign * DVector::from_vec(real_vec(s));
        let coords: Vec<f64> = (&self.vectors * &coef).iter().copied().collect();
        let back = self.represent_coords(&coords);
        let gap = max_abs(&(back - s));
        if gap > FIX_TOL * s.norm().max(1.0) {
            return Err(GptError::Validation(format!(
                "matrix is not in the span of the representation (gap {gap:e})"
            )));
        }
        Ok(coords)
    }

    /// The map on the state space whose matrix action is `S ↦ U S U†`.
    pub fn transformation(&self, u: &CMat) -> Result<TransMat> {
        let dim = self.basis.sys.dim;
        let mut m = RMat::zeros(dim, dim);
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            let s = self.represent_coords(&e);
            let col = self.unrepresent(&(u * s * u.adjoint()))?;
            m.set_column(k, &DVector::from_vec(col));
        }
        TransMat::new(self.basis.sys.clone(), self.basis.sys.clone(), m)
    }

    /// The qubit representation `S ↦ Y Sᵀ Y†`, `Y = [[0,-1],[1,0]]`: the
    /// inversion of all three Bloch axes.
    pub fn inverted(&self) -> Result<MatrixRep> {
        if self.d() != 2 {
            return Err(GptError::Unsupported("axis inversion is defined on qubits".into()));
        }
        let y = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let assignments = self
            .assignments
            .iter()
            .map(|a| &y * a.transpose() * y.adjoint())
            .collect();
        MatrixRep::with_assignments(self.basis.clone(), assignments)
    }
}

/// `S_ρ` for a state of the representation's system.
pub fn represent(rho: &StateVec, rep: &MatrixRep) -> Result<CMat> {
    rep.basis.sys.ensure_same(&rho.sys)?;
    Ok(rep.represent_coords(&rho.coords))
}

/// `T_ρ` for a vector of `A ⊗ B`: the product basis is mapped to Kronecker
/// products of the factor assignments.
pub fn tensor_represent(rep_a: &MatrixRep, rep_b: &MatrixRep, coords: &[f64]) -> Result<CMat> {
    let dim = rep_a.basis.sys.dim * rep_b.basis.sys.dim;
    if coords.len() != dim {
        return Err(dim_err(dim, coords.len()));
    }
    let coef = kron_real(&rep_a.coeffs, &rep_b.coeffs) * DVector::from_column_slice(coords);
    let nb = rep_b.assignments.len();
    let d = rep_a.d() * rep_b.d();
    let mut t = CMat::zeros(d, d);
    for (i, a) in rep_a.assignments.iter().enumerate() {
        for (j, b) in rep_b.assignments.iter().enumerate() {
            let x = coef[i * nb + j];
            if x != 0.0 {
                t += kron(a, b) * c(x, 0.0);
            }
        }
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Two-qubit axis fixing
// ---------------------------------------------------------------------------

/// Which of the two covariant forms the isotropic state takes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsotropicCase {
    /// `α = 0, β = 1/2`: already of the required form.
    Aligned,
    /// `α = -β = 1/2`: the partner representation is replaced by its axis
    /// inversion.
    Inverted,
}

/// Whether the partner qubit's representation was used as given.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartnerFrame {
    Kept,
    /// Rebuilt by transporting the first qubit's axes through `Φ`.
    Transported,
}

#[derive(Clone, Debug)]
pub struct TwoQubitFix {
    /// Standard representation of `A ⊗ B` on the product maxset ordered
    /// `11, 12, 21, 22`.
    pub rep: MatrixRep,
    pub rep_a: MatrixRep,
    /// Final representation of `B` used for `T`.
    pub rep_b: MatrixRep,
    pub case: IsotropicCase,
    pub partner: PartnerFrame,
    /// `Φ`, the pure state with weight `1/2` on `11` and on `22`.
    pub phi: StateVec,
    /// `T_Φ` before any inversion.
    pub t_phi: CMat,
    pub covariance_residual: f64,
    /// `max |S_ρ - T_ρ|` over 16 spanning product states.
    pub standard_vs_tensor: f64,
    /// Residual of `σ_k ⊗ σ_l` against the `Σ` combinations.
    pub relation_residual: f64,
}

fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

/// `e^{-iπZ/4}`.
fn quarter_turn_z() -> CMat {
    CMat::from_diagonal(&CVec::from_vec(vec![
        C64::from_polar(1.0, -FRAC_PI_4),
        C64::from_polar(1.0, FRAC_PI_4),
    ]))
}

fn qubit_of(rep: &MatrixRep) -> Result<QuantumModel> {
    let q = quantum_of(&rep.basis.sys)?;
    if q.factors() != [2] {
        return Err(GptError::Unsupported(format!(
            "axis fixing needs single qubits, got {}",
            rep.basis.sys
        )));
    }
    Ok(q)
}

/// `max |S^B_{U* ρ} - U* S^B_ρ Uᵀ|` over the spanning states of `B`, for the
/// given generators `(U, matrix of U in A)`.
fn covariance_residual(rep_b: &MatrixRep, gens: &[(TransMat, CMat)], phi: &PurifiedState) -> Result<f64> {
    let mut worst = 0.0f64;
    for (g, u) in gens {
        let ustar = conjugate_reversible(g, phi)?;
        let uc = u.map(|z| z.conj());
        for s in rep_b.basis.spanning_states() {
            let lhs = represent(&apply(&ustar, &s)?, rep_b)?;
            let rhs = &uc * represent(&s, rep_b)? * uc.adjoint();
            worst = worst.max(max_abs(&(lhs - rhs)));
        }
    }
    Ok(worst)
}

/// Axes of `B` obtained by conditioning `Φ` on the axis effects of `A`:
/// `x_± ↦ x_±`, `y_± ↦ y_∓`.
fn transported_partner(
    rep_a: &MatrixRep,
    phi: &PurifiedState,
    maxset_b: &DistinguishableSet,
    qb: &QuantumModel,
) -> Result<MatrixRep> {
    let model_a = &phi.model_a;
    let basis_a = &rep_a.basis;
    let cond = |coords: Vec<f64>| -> Result<Vec<f64>> {
        let s = StateVec::unchecked(basis_a.sys.clone(), coords);
        let a = dual_effect(model_a, &s)?;
        Ok(partial_pair_first(&a, &phi.state, qb.system())?.coords)
    };
    let (sx, sy) = &basis_a.sigmas[&(0, 1)];
    let (p0, p1) = (&basis_a.maxset.states[0].coords, &basis_a.maxset.states[1].coords);
    let axis_state = |s: &[f64], sign: f64| -> Vec<f64> {
        (0..s.len()).map(|i| 0.5 * (p0[i] + p1[i] + sign * s[i])).collect()
    };
    let bx = scaled(&sub(&cond(axis_state(sx, 1.0))?, &cond(axis_state(sx, -1.0))?), 2.0);
    let by = scaled(&sub(&cond(axis_state(sy, -1.0))?, &cond(axis_state(sy, 1.0))?), 2.0);
    let mut sigmas = BTreeMap::new();
    sigmas.insert((0, 1), (bx, by));
    MatrixRep::new(assemble(qb, maxset_b.clone(), sigmas)?)
}

/// Chooses the axes of the two-qubit composite so that its standard
/// representation coincides with the tensor representation built from
/// `rep_a` and `rep_b`.
///
/// `B` is first made covariant under the conjugate action through `Φ`
/// (kept if it already is, transported from `A` otherwise). `T_Φ` then
/// takes one of two forms; in the inverted one the representation of `B`
/// is replaced by `S ↦ Y Sᵀ Y†`. The faces `11–22` and `12–21` get the
/// axes `Σ_x, Σ_y` built from `Φ` and its images under `U_{x,π}` and
/// `U_{z,π/2}`; the other four faces use products with `φ_m`.
pub fn fix_two_qubit_axes(rep_a: &MatrixRep, rep_b: &MatrixRep) -> Result<TwoQubitFix> {
    let qa = qubit_of(rep_a)?;
    let qb = qubit_of(rep_b)?;
    let qab = qa.compose(&qb);
    let model_ab = Model::Quantum(qab.clone());
    let (ma, mb) = (&rep_a.basis.maxset.states, &rep_b.basis.maxset.states);
    let mut product = Vec::with_capacity(4);
    for pa in ma {
        for pb in mb {
            product.push(tensor_state(pa, pb)?);
        }
    }
    let maxset_ab = distinguishable(&model_ab, product)?;
    let phi = structure::superposition_state(&model_ab, &[0.5, 0.0, 0.0, 0.5], &maxset_ab)?;
    let purified = PurifiedState {
        marginal_a: marginal_first(&phi, qa.system(), qb.system())?,
        state: phi.clone(),
        purity_residual: 0.0,
        model_a: Model::Quantum(qa.clone()),
        model_b: Model::Quantum(qb.clone()),
    };

    let ux = pauli_x();
    let uz = quarter_turn_z();
    let gx = rep_a.transformation(&ux)?;
    let gz = rep_a.transformation(&uz)?;
    let gens = [(gx.clone(), ux), (gz.clone(), uz)];

    let mut rep_b_used = rep_b.clone();
    let mut partner = PartnerFrame::Kept;
    let mut covariance = covariance_residual(&rep_b_used, &gens, &purified)?;
    if covariance > FIX_TOL {
        rep_b_used = transported_partner(rep_a, &purified, &rep_b.basis.maxset, &qb)?;
        partner = PartnerFrame::Transported;
        covariance = covariance_residual(&rep_b_used, &gens, &purified)?;
        if covariance > FIX_TOL {
            return Err(GptError::Infeasible(format!(
                "no covariant representation of the partner qubit (residual {covariance:e})"
            )));
        }
    }

    let t_phi = tensor_represent(rep_a, &rep_b_used, &phi.coords)?;
    let alpha = t_phi[(1, 1)].re;
    let beta = t_phi[(0, 3)].re;
    let mut form = CMat::zeros(4, 4);
    for i in [0, 3] {
        form[(i, i)] = c(alpha + beta, 0.0);
    }
    for i in [1, 2] {
        form[(i, i)] = c(alpha, 0.0);
    }
    form[(0, 3)] = c(beta, 0.0);
    form[(3, 0)] = c(beta, 0.0);
    let shape = max_abs(&(&t_phi - form));
    let near = |x: f64, y: f64| (x - y).abs() <= FIX_TOL;
    let case = if shape <= FIX_TOL && near(alpha, 0.0) && near(beta, 0.5) {
        IsotropicCase::Aligned
    } else if shape <= FIX_TOL && near(alpha, 0.5) && near(beta, -0.5) {
        IsotropicCase::Inverted
    } else {
        return Err(GptError::Infeasible(format!(
            "isotropic state has α = {alpha}, β = {beta} (shape residual {shape:e})"
        )));
    };
    if case == IsotropicCase::Inverted {
        rep_b_used = rep_b_used.inverted()?;
    }

    let sys_b = qb.system();
    let psi = apply(&extend(&gx, sys_b)?, &phi)?;
    let phi_z = apply(&extend(&gz, sys_b)?, &phi)?;
    let psi_z = apply(&extend(&gz, sys_b)?, &psi)?;
    let chi2 = kron_vec(&qa.invariant_state().coords, &qb.invariant_state().coords);
    let za = sub(&ma[0].coords, &ma[1].coords);
    let zb = sub(&mb[0].coords, &mb[1].coords);
    let zz = kron_vec(&za, &zb);
    let big_sigma = |v: &StateVec, zsign: f64| -> Vec<f64> {
        (0..v.coords.len())
            .map(|i| 2.0 * (v.coords[i] - chi2[i] - zsign * 0.25 * zz[i]))
            .collect()
    };
    let sx_1122 = big_sigma(&phi, 1.0);
    let sy_1122 = big_sigma(&phi_z, 1.0);
    let sx_1221 = big_sigma(&psi, -1.0);
    let sy_1221 = big_sigma(&psi_z, -1.0);

    let (ax, ay) = &rep_a.basis.sigmas[&(0, 1)];
    let (bx, by) = &rep_b_used.basis.sigmas[&(0, 1)];
    let mut sigmas = BTreeMap::new();
    sigmas.insert((0, 1), (kron_vec(&ma[0].coords, bx), kron_vec(&ma[0].coords, by)));
    sigmas.insert((0, 2), (kron_vec(ax, &mb[0].coords), kron_vec(ay, &mb[0].coords)));
    sigmas.insert((0, 3), (sx_1122.clone(), sy_1122.clone()));
    sigmas.insert((1, 2), (sx_1221.clone(), sy_1221.clone()));
    sigmas.insert((1, 3), (kron_vec(ax, &mb[1].coords), kron_vec(ay, &mb[1].coords)));
    sigmas.insert((2, 3), (kron_vec(&ma[1].coords, bx), kron_vec(&ma[1].coords, by)));
    let rep = MatrixRep::new(assemble(&qab, maxset_ab, sigmas)?)?;

    let mut standard_vs_tensor = 0.0f64;
    for sa in rep_a.basis.spanning_states() {
        for sb in rep_b_used.basis.spanning_states() {
            let rho = tensor_state(&sa, &sb)?;
            let s = represent(&rho, &rep)?;
            let t = tensor_represent(rep_a, &rep_b_used, &rho.coords)?;
            standard_vs_tensor = standard_vs_tensor.max(max_abs(&(s - t)));
        }
    }

    // with `ŷ = -λσ_y`, whose matrix is the Pauli Y for either sign
    let la = -(rep_a.basis.sign_choices[&(0, 1)] as f64);
    let lb = -(rep_b_used.basis.sign_choices[&(0, 1)] as f64);
    let (ay_hat, by_hat) = (scaled(ay, la), scaled(by, lb));
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    let relations = [
        (kron_vec(ax, bx), add(&sx_1122, &sx_1221, 1.0)),
        (kron_vec(&ay_hat, &by_hat), add(&sx_1221, &sx_1122, -1.0)),
        (kron_vec(ax, &by_hat), add(&sy_1122, &sy_1221, -1.0)),
        (kron_vec(&ay_hat, bx), add(&sy_1122, &sy_1221, 1.0)),
    ];
    let relation_residual = relations
        .iter()
        .map(|(l, r)| linalg::max_abs_diff(l, r))
        .fold(0.0, f64::max);

    Ok(TwoQubitFix {
        rep,
        rep_a: rep_a.clone(),
        rep_b: rep_b_used,
        case,
        partner,
        phi,
        t_phi,
        covariance_residual: covariance,
        standard_vs_tensor,
        relation_residual,
    })
}

// ---------------------------------------------------------------------------
// Consistent axes in any dimension
// ---------------------------------------------------------------------------

/// Route used to connect the axis choices of different faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixRoute {
    /// One face only; nothing to connect.
    SingleFace,
    /// The two-qubit composite, read as a single system of dimension four.
    TwoQubit,
    /// A three-state face of the dimension-four representation, compressed.
    FaceCompression,
    /// Each face `(m, n)` is aligned with the faces `(1, m)` and `(1, n)`
    /// through the pure state they determine.
    AnchoredPhases,
}

#[derive(Clone, Debug)]
pub struct AxisFix {
    pub rep: MatrixRep,
    pub route: FixRoute,
    /// The two-qubit step behind the dimension-three and -four routes.
    pub two_qubit: Option<TwoQubitFix>,
    /// Worst residual of the route's own consistency checks.
    pub residual: f64,
}

/// The coordinates of the same matrix in another quantum system of equal
/// dimension.
fn reframe(from: &QuantumModel, to: &QuantumModel, coords: &[f64]) -> Vec<f64> {
    to.vectorize(&from.devectorize(coords))
        .expect("devectorized coordinates are Hermitian")
}

fn qubit_pair(gauge: Gauge) -> Result<(MatrixRep, MatrixRep)> {
    let q = Model::Quantum(QuantumModel::new(2));
    let gb = match gauge {
        Gauge::Canonical => Gauge::Canonical,
        Gauge::Seeded(s) => Gauge::Seeded(s.wrapping_add(1)),
    };
    Ok((
        MatrixRep::new(build_standard_basis(&q, gauge)?)?,
        MatrixRep::new(build_standard_basis(&q, gb)?)?,
    ))
}

fn four_from_two_qubits(gauge: Gauge) -> Result<AxisFix> {
    let (ra, rb) = qubit_pair(gauge)?;
    let fix = fix_two_qubit_axes(&ra, &rb)?;
    let qab = quantum_of(&fix.rep.basis.sys)?;
    let q4 = QuantumModel::new(4);
    let m4 = Model::Quantum(q4.clone());
    let states: Vec<StateVec> = fix
        .rep
        .basis
        .maxset
        .states
        .iter()
        .map(|s| StateVec::new(q4.system().clone(), reframe(&qab, &q4, &s.coords)))
        .collect::<Result<_>>()?;
    let maxset = distinguishable(&m4, states)?;
    let sigmas = fix
        .rep
        .basis
        .sigmas
        .iter()
        .map(|(&f, (x, y))| (f, (reframe(&qab, &q4, x), reframe(&qab, &q4, y))))
        .collect();
    let rep = MatrixRep::with_assignments(assemble(&q4, maxset, sigmas)?, fix.rep.assignments.clone())?;
    let mut pullback = 0.0f64;
    for s in fix.rep.basis.spanning_states() {
        let moved = StateVec::unchecked(q4.system().clone(), reframe(&qab, &q4, &s.coords));
        pullback = pullback.max(max_abs(&(represent(&moved, &rep)? - represent(&s, &fix.rep)?)));
    }
    let residual = pullback.max(fix.standard_vs_tensor).max(fix.relation_residual);
    Ok(AxisFix {
        rep,
        route: FixRoute::TwoQubit,
        two_qubit: Some(fix),
        residual,
    })
}

fn three_from_four(gauge: Gauge) -> Result<AxisFix> {
    let four = four_from_two_qubits(gauge)?;
    let q4 = quantum_of(&four.rep.basis.sys)?;
    let m4 = Model::Quantum(q4.clone());
    let st = &four.rep.basis.maxset.states;
    let omega = mix(&[(1.0 / 3.0, &st[0]), (1.0 / 3.0, &st[1]), (1.0 / 3.0, &st[2])])?;
    let enc = structure::compress_face(&q4, &face_of(&m4, &omega)?)?;
    let push = |v: &[f64]| -> Vec<f64> {
        (&enc.encode.matrix * DVector::from_column_slice(v)).iter().copied().collect()
    };
    let m3 = Model::Quantum(enc.code.clone());
    let states = st[..3]
        .iter()
        .map(|s| apply(&enc.encode, s))
        .collect::<Result<Vec<_>>>()?;
    let maxset = distinguishable(&m3, states)?;
    let sigmas = four
        .rep
        .basis
        .sigmas
        .iter()
        .filter(|(&(_, n), _)| n < 3)
        .map(|(&f, (x, y))| (f, (push(x), push(y))))
        .collect();
    let basis = assemble(&enc.code, maxset, sigmas)?;
    // states of the face are recovered exactly by decoding
    let mut roundtrip = 0.0f64;
    for s in basis.spanning_states() {
        let back = apply(&enc.decode, &s)?;
        let again = apply(&enc.encode, &back)?;
        roundtrip = roundtrip.max(again.distance(&s));
    }
    Ok(AxisFix {
        rep: MatrixRep::new(basis)?,
        route: FixRoute::FaceCompression,
        residual: four.residual.max(roundtrip),
        two_qubit: four.two_qubit,
    })
}

/// Ratio `⟨u_k|ψ⟩ / ⟨u_0|ψ⟩` for the `+` state of an axis of face `(0, k)`.
fn axis_ratio(q: &QuantumModel, basis: &StandardBasis, kets: &[CVec], k: usize, sigma: &[f64]) -> Result<C64> {
    let (p0, pk) = (&basis.maxset.states[0].coords, &basis.maxset.states[k].coords);
    let coords: Vec<f64> = (0..sigma.len()).map(|i| 0.5 * (p0[i] + pk[i] + sigma[i])).collect();
    let psi = q.ket_of(&StateVec::unchecked(basis.sys.clone(), coords))?;
    let a0 = (kets[0].adjoint() * &psi)[(0, 0)];
    let ak = (kets[k].adjoint() * &psi)[(0, 0)];
    Ok(ak / a0)
}

/// Keeps the axes of every face `(0, n)` and replaces those of `(m, n)`,
/// `0 < m < n`, by the projections onto `F_mn` of the pure states of
/// `F_{0mn}` whose projections onto `F_0m` and `F_0n` are axis states.
fn anchor_phases(q: &QuantumModel, basis: &StandardBasis) -> Result<StandardBasis> {
    let model = Model::Quantum(q.clone());
    let d = basis.d();
    let kets = basis.maxset.states.iter().map(|s| q.ket_of(s)).collect::<Result<Vec<_>>>()?;
    let mut rx = vec![c(1.0, 0.0); d];
    let mut ry = vec![c(1.0, 0.0); d];
    for k in 1..d {
        let (sx, sy) = &basis.sigmas[&(0, k)];
        rx[k] = axis_ratio(q, basis, &kets, k, sx)?;
        ry[k] = axis_ratio(q, basis, &kets, k, sy)?;
    }
    let mut sigmas = BTreeMap::new();
    for (m, n) in faces(d) {
        if m == 0 {
            sigmas.insert((m, n), basis.sigmas[&(m, n)].clone());
            continue;
        }
        let (pm, pn) = (&basis.maxset.states[m], &basis.maxset.states[n]);
        let face = face_of(&model, &pair_state(pm, pn)?)?;
        let axis = |tail: C64| -> Result<Vec<f64>> {
            let xi = &kets[0] + &kets[m] * rx[m] + &kets[n] * tail;
            let plus = structure::project_and_renormalize(&model, &face, &q.state_from_ket(&xi))?;
            Ok((0..plus.coords.len())
                .map(|i| 2.0 * plus.coords[i] - pm.coords[i] - pn.coords[i])
                .collect())
        };
        sigmas.insert((m, n), (axis(rx[n])?, axis(ry[n])?));
    }
    assemble(q, basis.maxset.clone(), sigmas)
}

/// A standard representation of the quantum system of dimension `d` whose
/// face axes are mutually consistent, so that pure states are represented
/// by rank-one matrices.
pub fn fixed_representation(d: usize, gauge: Gauge) -> Result<AxisFix> {
    match d {
        0 | 1 => Err(GptError::Precondition(format!(
            "reconstruction needs d ≥ 2, got {d}"
        ))),
        2 => {
            let basis = build_standard_basis(&Model::Quantum(QuantumModel::new(2)), gauge)?;
            let residual = basis.orthogonality_residual();
            Ok(AxisFix {
                rep: MatrixRep::new(basis)?,
                route: FixRoute::SingleFace,
                two_qubit: None,
                residual,
            })
        }
        3 => three_from_four(gauge),
        4 => four_from_two_qubits(gauge),
        _ => {
            let q = QuantumModel::new(d);
            let free = build_standard_basis(&Model::Quantum(q.clone()), gauge)?;
            let basis = anchor_phases(&q, &free)?;
            let residual = basis.orthogonality_residual();
            Ok(AxisFix {
                rep: MatrixRep::new(basis)?,
                route: FixRoute::AnchoredPhases,
                two_qubit: None,
                residual,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Verification stages
// ---------------------------------------------------------------------------

fn model_of(rep: &MatrixRep) -> Result<(QuantumModel, Model)> {
    let q = quantum_of(&rep.basis.sys)?;
    Ok((q.clone(), Model::Quantum(q)))
}

/// Basis sanity: `d²` independent vectors with `(a_l|σ) = 0`.
pub fn verify_basis(rep: &MatrixRep, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("standard-basis", cfg);
    let basis = &rep.basis;
    let smin = basis.min_singular_value();
    let orth = basis.orthogonality_residual();
    let chi = match model_of(rep) {
        Ok((q, _)) => {
            let d = q.d();
            let s = rep.represent_coords(&q.invariant_state().coords);
            max_abs(&(s - CMat::identity(d, d) * c(1.0 / d as f64, 0.0)))
        }
        Err(e) => return b.finish(Status::Fail, f64::INFINITY, json!({"error": e.to_string()}), ""),
    };
    let independent = smin > 1e-6;
    let residual = orth.max(chi).max(if independent { 0.0 } else { f64::INFINITY });
    b.verdict(
        residual,
        json!({
            "vectors": basis.d() * basis.d(),
            "min_singular_value": smin,
            "orthogonality_residual": orth,
            "invariant_state_residual": chi,
        }),
        "",
    )
}

/// The matrix `E` with `Tr[E S_ρ] = (a_φ|ρ)` on the spanning states equals
/// `S_φ` for sampled pure `φ`.
pub fn verify_duality(rep: &MatrixRep, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("duality", cfg);
    match duality_inner(rep, cfg) {
        Ok((res, w)) => b.verdict(res, w, "least squares over the spanning states"),
        Err(e) => b.finish(Status::Fail, f64::INFINITY, json!({"error": e.to_string()}), ""),
    }
}

fn duality_inner(rep: &MatrixRep, cfg: &CheckConfig) -> Result<(f64, Value)> {
    let (q, model) = model_of(rep)?;
    let d = q.d();
    let span = rep.basis.spanning_states();
    let mats = span.iter().map(|s| represent(s, rep)).collect::<Result<Vec<_>>>()?;
    let herm = q.basis();
    let a = RMat::from_fn(span.len(), herm.len(), |j, k| linalg::trace_prod(&herm[k], &mats[j]).re);
    let svd = a.clone().svd(true, true);
    let solve = |effect: &crate::framework::EffectVec| -> Result<(CMat, f64)> {
        let rhs = DVector::from_iterator(span.len(), span.iter().map(|s| pair(effect, s).unwrap_or(f64::NAN)));
        let e = svd
            .solve(&rhs, 1e-12)
            .map_err(|m| GptError::Validation(m.to_string()))?;
        let ls = (&a * &e - &rhs).amax();
        let mut out = CMat::zeros(d, d);
        for (x, g) in e.iter().zip(herm) {
            out += g * c(*x, 0.0);
        }
        Ok((out, ls))
    };
    let (e_det, ls_det) = solve(&q.system().det_effect())?;
    let det_res = max_abs(&(e_det - CMat::identity(d, d)));
    let mut worst = det_res.max(ls_det);
    let mut worst_ls = ls_det;
    let mut maxset_res = 0.0f64;
    for (m, phi) in rep.basis.maxset.states.iter().enumerate() {
        let (e, ls) = solve(&dual_effect(&model, phi)?)?;
        maxset_res = maxset_res.max(max_abs(&(e - unit(d, m, m))));
        worst_ls = worst_ls.max(ls);
    }
    worst = worst.max(maxset_res).max(worst_ls);
    let mut rng = linalg::rng(cfg.seed);
    let mut sampled = 0.0f64;
    for _ in 0..cfg.trials {
        let phi = q.state_from_ket(&haar_ket(&mut rng, d));
        let (e, ls) = solve(&dual_effect(&model, &phi)?)?;
        sampled = sampled.max(max_abs(&(e - represent(&phi, rep)?)));
        worst_ls = worst_ls.max(ls);
    }
    worst = worst.max(sampled).max(worst_ls);
    Ok((
        worst,
        json!({
            "deterministic_effect_residual": det_res,
            "maxset_residual": maxset_res,
            "sampled_residual": sampled,
            "least_squares_residual": worst_ls,
        }),
    ))
}

/// Worst violation of `θ_pr = θ_pq + θ_qr` over all triples, skipping
/// entries too small to carry a phase.
pub fn cocycle_residual(s: &CMat) -> f64 {
    let d = s.nrows();
    let mut worst = 0.0f64;
    for p in 0..d {
        for q in p + 1..d {
            for r in q + 1..d {
                let (a, b, e) = (s[(p, q)], s[(q, r)], s[(p, r)]);
                if a.norm() < PHASE_FLOOR || b.norm() < PHASE_FLOOR || e.norm() < PHASE_FLOOR {
                    continue;
                }
                worst = worst.max(linalg::angular_distance(e.arg(), a.arg() + b.arg()));
            }
        }
    }
    worst
}

/// Sampled pure states are represented by unit-trace rank-one PSD matrices
/// whose phases form a cocycle; sampled mixtures by PSD matrices.
pub fn verify_positivity(rep: &MatrixRep, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("positivity", cfg);
    match positivity_inner(rep, cfg) {
        Ok((res, w)) => b.verdict(res, w, ""),
        Err(e) => b.finish(Status::Fail, f64::INFINITY, json!({"error": e.to_string()}), ""),
    }
}

fn positivity_inner(rep: &MatrixRep, cfg: &CheckConfig) -> Result<(f64, Value)> {
    let (q, _) = model_of(rep)?;
    let d = q.d();
    let mut rng = linalg::rng(cfg.seed);
    let (mut second, mut negative, mut trace, mut cocycle, mut mixed_negative) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for t in 0..cfg.trials {
        let phi = q.state_from_ket(&haar_ket(&mut rng, d));
        let s = represent(&phi, rep)?;
        let ev = eigvalsh(&s);
        second = second.max(ev[1].abs());
        negative = negative.max(-ev[d - 1]);
        trace = trace.max((ev.iter().sum::<f64>() - 1.0).abs());
        cocycle = cocycle.max(cocycle_residual(&s));
        if t % 4 == 0 {
            let rho = q.sample_mixed_state(&mut rng, 1 + t % d);
            let ev = eigvalsh(&represent(&rho, rep)?);
            mixed_negative = mixed_negative.max(-ev[d - 1]);
        }
    }
    let worst = second.max(negative).max(trace).max(cocycle).max(mixed_negative);
    Ok((
        worst,
        json!({
            "second_eigenvalue": second,
            "negative_eigenvalue": negative,
            "trace_residual": trace,
            "cocycle_residual": cocycle,
            "mixture_negative_eigenvalue": mixed_negative,
        }),
    ))
}

/// Phase gate `S ↦ U_β S U_β†` with `U_β = diag(e^{iβ_m})`, as a
/// transformation of the model, together with how far it is from a
/// reversible channel fixing every `φ_m`.
pub fn phase_gate(rep: &MatrixRep, betas: &[f64]) -> Result<(TransMat, f64)> {
    let d = rep.d();
    if betas.len() != d {
        return Err(dim_err(d, betas.len()));
    }
    let u = CMat::from_diagonal(&CVec::from_iterator(d, betas.iter().map(|b| C64::from_polar(1.0, *b))));
    let g = rep.transformation(&u)?;
    let mut residual = (-choi::min_choi_eigenvalue(&g)?).max(0.0);
    residual = residual.max(choi::choi_of(&g)?.rank(1e-9)?.abs_diff(1) as f64);
    for phi in &rep.basis.maxset.states {
        residual = residual.max(apply(&g, phi)?.distance(phi));
    }
    Ok((g, residual))
}

/// Reaches a target density matrix with model states: each eigenvector
/// `v` is obtained from the superposition `φ_p`, `p_i = |v_i|²`, followed by
/// a phase gate; the eigenvalues then weight a mixture.
pub fn reach_target(rep: &MatrixRep, target: &CMat) -> Result<(StateVec, f64)> {
    let (q, model) = model_of(rep)?;
    let d = q.d();
    let eig = eigh(target);
    let mut parts: Vec<(f64, StateVec)> = Vec::new();
    let mut gate_residual = 0.0f64;
    for (k, &w) in eig.values.iter().enumerate() {
        if w <= 1e-14 {
            continue;
        }
        let v = eig.vectors.column(k).into_owned();
        let probs: Vec<f64> = v.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = probs.iter().sum();
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let phi_p = structure::superposition_state(&model, &probs, &rep.basis.maxset)?;
        let s = represent(&phi_p, rep)?;
        let anchor = (0..d).max_by(|&i, &j| probs[i].total_cmp(&probs[j])).unwrap_or(0);
        let betas: Vec<f64> = (0..d)
            .map(|i| {
                let have = s[(i, anchor)];
                let want = v[i] * v[anchor].conj();
                if have.norm() < 1e-14 || want.norm() < 1e-14 {
                    0.0
                } else {
                    want.arg() - have.arg()
                }
            })
            .collect();
        let (g, res) = phase_gate(rep, &betas)?;
        gate_residual = gate_residual.max(res);
        parts.push((w, apply(&g, &phi_p)?));
    }
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    let refs: Vec<(f64, &StateVec)> = parts.iter().map(|(w, s)| (w / total, s)).collect();
    Ok((mix(&refs)?, gate_residual))
}

/// Sampled density matrices are reached by model states.
pub fn verify_completeness(rep: &MatrixRep, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("completeness", cfg);
    match completeness_inner(rep, cfg) {
        Ok((res, w)) => b.verdict(res, w, "superposition, phase gate, mixture"),
        Err(e) => b.finish(Status::Fail, f64::INFINITY, json!({"error": e.to_string()}), ""),
    }
}

fn completeness_inner(rep: &MatrixRep, cfg: &CheckConfig) -> Result<(f64, Value)> {
    let (q, _) = model_of(rep)?;
    let d = q.d();
    let mut rng = linalg::rng(cfg.seed);
    let (mut reach, mut gates, mut outside) = (0.0f64, 0.0f64, 0.0f64);
    for t in 0..cfg.trials {
        let target = match t {
            0 => CMat::identity(d, d) * c(1.0 / d as f64, 0.0),
            _ => linalg::random_density(&mut rng, d, 1 + t % d),
        };
        let (state, g) = reach_target(rep, &target)?;
        reach = reach.max(max_abs(&(represent(&state, rep)? - &target)));
        gates = gates.max(g);
        if !q.contains_state(&state.coords, 1e-9) {
            outside = outside.max(1.0);
        }
    }
    Ok((
        reach.max(gates).max(outside),
        json!({
            "reach_residual": reach,
            "phase_gate_residual": gates,
            "outside_state_space": outside > 0.0,
        }),
    ))
}

/// Result of the full pipeline in one dimension.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub fix: AxisFix,
    pub reports: Vec<CheckReport>,
}

impl Pipeline {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

fn fix_report(fix: &AxisFix, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("axis-fixing", cfg);
    let mut witness = json!({
        "route": fix.route,
        "sign_choices": fix.rep.basis.sign_choices.iter().map(|(k, v)| json!([k.0, k.1, v])).collect::<Vec<_>>(),
    });
    if let Some(t) = &fix.two_qubit {
        witness["isotropic_case"] = json!(t.case);
        witness["partner_frame"] = json!(t.partner);
        witness["standard_vs_tensor"] = json!(t.standard_vs_tensor);
        witness["relation_residual"] = json!(t.relation_residual);
        witness["covariance_residual"] = json!(t.covariance_residual);
        witness["t_phi"] = matrix_to_json(&t.t_phi);
    }
    b.verdict(fix.residual, witness, "")
}

/// Build, fix axes, then check duality, positivity and completeness. For
/// `d = 2` the axis-fixing stage runs the two-qubit procedure on a pair of
/// qubits and reports `max |S - T|`.
pub fn run_pipeline(d: usize, cfg: &CheckConfig) -> Result<Pipeline> {
    let gauge = Gauge::Seeded(cfg.seed);
    let mut fix = fixed_representation(d, gauge)?;
    if d == 2 {
        let (ra, rb) = qubit_pair(gauge)?;
        let t = fix_two_qubit_axes(&ra, &rb)?;
        fix.residual = fix.residual.max(t.standard_vs_tensor).max(t.relation_residual);
        fix.two_qubit = Some(t);
    }
    let mut reports = vec![verify_basis(&fix.rep, cfg), fix_report(&fix, cfg)];
    reports.push(verify_duality(&fix.rep, cfg));
    reports.push(verify_positivity(&fix.rep, cfg));
    reports.push(verify_completeness(&fix.rep, cfg));
    Ok(Pipeline { fix, reports })
}

// ---------------------------------------------------------------------------
// Dump format
// ---------------------------------------------------------------------------

/// Complex matrix as a row-major list of `[re, im]` pairs.
pub fn matrix_to_json(m: &CMat) -> Value {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(json!([m[(i, j)].re, m[(i, j)].im]));
        }
    }
    Value::Array(out)
}

/// Inverse of [`matrix_to_json`]. Also accepts a list of rows of pairs.
pub fn matrix_from_json(v: &Value) -> Result<CMat> {
    let bad = |msg: &str| GptError::Schema(format!("matrix payload: {msg}"));
    let items = v.as_array().ok_or_else(|| bad("expected an array"))?;
    let entry = |e: &Value| -> Result<C64> {
        match e.as_array().map(|a| a.as_slice()) {
            Some([re, im]) => Ok(c(
                re.as_f64().ok_or_else(|| bad("non-numeric entry"))?,
                im.as_f64().ok_or_else(|| bad("non-numeric entry"))?,
            )),
            _ => Err(bad("entries must be [re, im] pairs")),
        }
    };
    let nested = items
        .first()
        .and_then(|r| r.as_array())
        .and_then(|r| r.first())
        .is_some_and(|e| e.is_array());
    let flat: Vec<C64> = if nested {
        let n = items.len();
        let mut out = Vec::with_capacity(n * n);
        for row in items {
            let row = row.as_array().ok_or_else(|| bad("rows must be arrays"))?;
            if row.len() != n {
                return Err(bad("matrix must be square"));
            }
            for e in row {
                out.push(entry(e)?);
            }
        }
        out
    } else {
        items.iter().map(entry).collect::<Result<_>>()?
    };
    let n = (flat.len() as f64).sqrt().round() as usize;
    if n == 0 || n * n != flat.len() {
        return Err(bad("entry count is not a square"));
    }
    Ok(CMat::from_row_slice(n, n, &flat))
}

/// JSON dump of a representation: the basis vectors, the axis choices and
/// the assigned matrices.
pub fn dump(rep: &MatrixRep) -> Value {
    let basis = &rep.basis;
    let faces: Vec<Value> = basis
        .sigmas
        .iter()
        .map(|(&(m, n), (sx, sy))| {
            json!({
                "face": [m, n],
                "sigma_x": sx,
                "sigma_y": sy,
                "lambda": basis.sign_choices.get(&(m, n)),
                "theta": basis.phase_offsets.get(&(m, n)),
            })
        })
        .collect();
    json!({
        "system": basis.sys.model_id,
        "d": basis.d(),
        "maxset": basis.maxset.states.iter().map(|s| s.coords.clone()).collect::<Vec<_>>(),
        "faces": faces,
        "assignments": rep.assignments.iter().map(matrix_to_json).collect::<Vec<_>>(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{haar_unitary, rng};

    fn quantum(d: usize) -> (QuantumModel, Model) {
        let q = QuantumModel::new(d);
        (q.clone(), Model::Quantum(q))
    }

    fn cfg(trials: usize) -> CheckConfig {
        CheckConfig {
            trials,
            seed: 7,
            tol: 1e-9,
        }
    }

    /// `D (U† ρ U) D†` with `U` the maxset kets and `D = diag(e^{iθ_{0m}})`:
    /// what a single-face-consistent representation must produce.
    fn gauge_oracle(q: &QuantumModel, basis: &StandardBasis, rho: &StateVec) -> CMat {
        let d = q.d();
        let kets: Vec<CVec> = basis.maxset.states.iter().map(|s| q.ket_of(s).unwrap()).collect();
        let u = CMat::from_fn(d, d, |i, j| kets[j][i]);
        let diag: Vec<C64> = (0..d)
            .map(|n| if n == 0 { c(1.0, 0.0) } else { C64::from_polar(1.0, basis.phase_offsets[&(0, n)]) })
            .collect();
        let dm = CMat::from_diagonal(&CVec::from_vec(diag));
        &dm * u.adjoint() * q.matrix(&rho.coords) * u * dm.adjoint()
    }

    #[test]
    fn canonical_qubit_basis_is_the_bloch_basis() {
        let (q, m) = quantum(2);
        let rep = MatrixRep::new(build_standard_basis(&m, Gauge::Canonical).unwrap()).unwrap();
        let mut r = rng(1);
        for _ in 0..20 {
            let rho = q.sample_mixed_state(&mut r, 2);
            let s = represent(&rho, &rep).unwrap();
            assert!(max_abs(&(s - q.matrix(&rho.coords))) < 1e-12);
        }
        assert_eq!(rep.basis.sign_choices[&(0, 1)], 1);
        assert!(rep.basis.phase_offsets[&(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn basis_has_d_squared_independent_vectors() {
        for d in 2..=5 {
            let (_, m) = quantum(d);
            let b = build_standard_basis(&m, Gauge::Seeded(3)).unwrap();
            assert_eq!(b.vectors().len(), d * d);
            assert!(b.min_singular_value() > 1e-3, "d={d}");
            assert!(b.orthogonality_residual() < 1e-12);
            assert!(b.sign_choices.values().all(|&l| l == 1));
        }
    }

    #[test]
    fn classical_model_has_no_qubit_faces() {
        let m = Model::Classical(crate::models::ClassicalModel::new(3));
        assert!(matches!(
            build_standard_basis(&m, Gauge::Canonical),
            Err(GptError::Unsupported(_))
        ));
    }

    #[test]
    fn invariant_and_maxset_matrices() {
        for d in 2..=4 {
            let (q, m) = quantum(d);
            let rep = MatrixRep::new(build_standard_basis(&m, Gauge::Seeded(9)).unwrap()).unwrap();
            let chi = represent(&q.invariant_state(), &rep).unwrap();
            assert!(max_abs(&(chi - CMat::identity(d, d) * c(1.0 / d as f64, 0.0))) < 1e-12);
            for (i, phi) in rep.basis.maxset.states.iter().enumerate() {
                assert!(max_abs(&(represent(phi, &rep).unwrap() - unit(d, i, i))) < 1e-12);
            }
        }
    }

    #[test]
    fn seeded_qubit_matches_gauge_oracle() {
        let (q, m) = quantum(2);
        let rep = MatrixRep::new(build_standard_basis(&m, Gauge::Seeded(11)).unwrap()).unwrap();
        assert!(rep.basis.phase_offsets[&(0, 1)] > 1e-3);
        let mut r = rng(2);
        for _ in 0..20 {
            let rho = q.sample_mixed_state(&mut r, 1);
            let s = represent(&rho, &rep).unwrap();
            assert!(max_abs(&(s - gauge_oracle(&q, &rep.basis, &rho))) < 1e-10);
        }
    }

    #[test]
    fn representation_is_linear_and_trace_is_weight() {
        let (q, m) = quantum(3);
        let rep = MatrixRep::new(build_standard_basis(&m, Gauge::Seeded(5)).unwrap()).unwrap();
        let mut r = rng(3);
        let a = q.sample_mixed_state(&mut r, 2);
        let b = q.sample_mixed_state(&mut r, 3);
        let combo = mix(&[(0.3, &a), (0.5, &b)]).unwrap();
        let lhs = represent(&combo, &rep).unwrap();
        let rhs = represent(&a, &rep).unwrap() * c(0.3, 0.0) + represent(&b, &rep).unwrap() * c(0.5, 0.0);
        assert!(max_abs(&(lhs.clone() - rhs)) < 1e-12);
        assert!((linalg::trace(&lhs).re - 0.8).abs() < 1e-12);
        assert!(linalg::hermitian_residual(&lhs) < 1e-12);
    }

    #[test]
    fn unrepresent_round_trips() {
        let (q, m) = quantum(3);
        let rep = MatrixRep::new(build_standard_basis(&m, Gauge::Seeded(5)).unwrap()).unwrap();
        let rho = q.sample_mixed_state(&mut rng(4), 3);
        let s = represent(&rho, &rep).unwrap();
        let back = rep.unrepresent(&s).unwrap();
        assert!(linalg::max_abs_diff(&back, &rho.coords) < 1e-12);
        let skew = CMat::from_row_slice(3, 3, &[c(0.0, 1.0); 9]);
        assert!(rep.unrepresent(&skew).is_err());
    }

    #[test]
    fn unconnected_axes_break_positivity() {
        let (_, m) = quantum(3);
        let rep = MatrixRep::new(build_standard_basis(&m, Gauge::Seeded(21)).unwrap()).unwrap();
        let report = verify_positivity(&rep, &cfg(20));
        assert!(!report.passed);
    }

    #[test]
    fn two_qubit_fix_from_free_gauges() {
        let (ra, rb) = qubit_pair(Gauge::Seeded(13)).unwrap();
        let fix = fix_two_qubit_axes(&ra, &rb).unwrap();
        assert_eq!(fix.case, IsotropicCase::Aligned);
        assert_eq!(fix.partner, PartnerFrame::Transported);
        assert!(fix.standard_vs_tensor < 1e-9);
        assert!(fix.relation_residual < 1e-9);
        assert!(fix.covariance_residual < 1e-9);
        let mut p0 = CMat::zeros(4, 4);
        for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
            p0[(i, j)] = c(0.5, 0.0);
        }
        assert!(max_abs(&(represent(&fix.phi, &fix.rep).unwrap() - p0)) < 1e-10);
        // the entangled faces carry the Σ_y orientation
        assert_eq!(fix.rep.basis.sign_choices[&(0, 3)], -1);
        assert_eq!(fix.rep.basis.sign_choices[&(1, 2)], -1);
    }

    #[test]
    fn two_qubit_fix_matches_tensor_on_random_states() {
        let (ra, rb) = qubit_pair(Gauge::Seeded(17)).unwrap();
        let fix = fix_two_qubit_axes(&ra, &rb).unwrap();
        let qab = quantum_of(&fix.rep.basis.sys).unwrap();
        let mut r = rng(5);
        for _ in 0..20 {
            let psi = qab.state_from_ket(&haar_ket(&mut r, 4));
            let s = represent(&psi, &fix.rep).unwrap();
            let t = tensor_represent(&fix.rep_a, &fix.rep_b, &psi.coords).unwrap();
            assert!(max_abs(&(s - t)) < 1e-9);
        }
    }

    #[test]
    fn inverted_partner_takes_the_second_case() {
        let (ra, rb) = qubit_pair(Gauge::Seeded(19)).unwrap();
        let covariant = fix_two_qubit_axes(&ra, &rb).unwrap().rep_b;
        let inverted = covariant.inverted().unwrap();
        let fix = fix_two_qubit_axes(&ra, &inverted).unwrap();
        assert_eq!(fix.partner, PartnerFrame::Kept);
        assert_eq!(fix.case, IsotropicCase::Inverted);
        assert!((fix.t_phi[(1, 1)].re - 0.5).abs() < 1e-10);
        assert!((fix.t_phi[(0, 3)].re + 0.5).abs() < 1e-10);
        assert!(fix.standard_vs_tensor < 1e-9);
        let again = fix_two_qubit_axes(&ra, &covariant).unwrap();
        assert_eq!((again.partner, again.case), (PartnerFrame::Kept, IsotropicCase::Aligned));
    }

    #[test]
    fn fixing_rejects_non_qubits() {
        let (_, m3) = quantum(3);
        let r3 = MatrixRep::new(build_standard_basis(&m3, Gauge::Canonical).unwrap()).unwrap();
        let (ra, _) = qubit_pair(Gauge::Canonical).unwrap();
        assert!(fix_two_qubit_axes(&ra, &r3).is_err());
        assert!(fixed_representation(1, Gauge::Canonical).is_err());
    }

    #[test]
    fn fixed_representations_are_positive_and_rank_one() {
        for d in 2..=5 {
            let fix = fixed_representation(d, Gauge::Seeded(23)).unwrap();
            assert!(fix.residual < 1e-9, "d={d} residual {}", fix.residual);
            let rep = &fix.rep;
            assert_eq!(rep.d(), d);
            let report = verify_positivity(rep, &cfg(30));
            assert!(report.passed, "d={d}: {}", report.witness);
        }
    }

    #[test]
    fn fixed_representations_are_unitarily_equivalent_to_density_matrices() {
        // oracle: S = W ρ W† for a single unitary W, found from the maxset
        // and one generic pure state
        for d in 2..=5 {
            let fix = fixed_representation(d, Gauge::Seeded(29)).unwrap();
            let rep = &fix.rep;
            let q = quantum_of(&rep.basis.sys).unwrap();
            let mut r = rng(6);
            let probe = q.state_from_ket(&haar_ket(&mut r, d));
            let sp = represent(&probe, rep).unwrap();
            let kets: Vec<CVec> = rep.basis.maxset.states.iter().map(|s| q.ket_of(s).unwrap()).collect();
            let v = q.ket_of(&probe).unwrap();
            // phases so that W v has the phases of the first column of S_probe
            let w = CMat::from_fn(d, d, |i, j| {
                let have = (kets[i].adjoint() * &v)[(0, 0)];
                let want = sp[(i, 0)];
                let ph = if have.norm() > 1e-12 { (want / have).arg() } else { 0.0 };
                C64::from_polar(1.0, ph) * kets[i][j].conj()
            });
            for _ in 0..10 {
                let rho = q.sample_mixed_state(&mut r, d);
                let s = represent(&rho, rep).unwrap();
                let oracle = &w * q.matrix(&rho.coords) * w.adjoint();
                assert!(max_abs(&(s - oracle)) < 1e-9, "d={d}");
            }
        }
    }

    #[test]
    fn duality_and_completeness_on_fixed_reps() {
        for d in 2..=4 {
            let fix = fixed_representation(d, Gauge::Seeded(31)).unwrap();
            let dual = verify_duality(&fix.rep, &cfg(10));
            assert!(dual.passed, "d={d}: {}", dual.witness);
            let comp = verify_completeness(&fix.rep, &cfg(10));
            assert!(comp.passed, "d={d}: {}", comp.witness);
        }
    }

    #[test]
    fn block_phase_group_acts_as_diagonal_phases() {
        let fix = fixed_representation(3, Gauge::Seeded(37)).unwrap();
        let rep = &fix.rep;
        let q = quantum_of(&rep.basis.sys).unwrap();
        let kets: Vec<CVec> = rep.basis.maxset.states.iter().map(|s| q.ket_of(s).unwrap()).collect();
        let beta = 0.83;
        let proj = linalg::projector(&kets[2]);
        let u = CMat::identity(3, 3) + proj * (C64::from_polar(1.0, beta) - c(1.0, 0.0));
        let g = q.unitary_channel(&u);
        let mut r = rng(8);
        // the phase is read from one state and must then hold for all
        let probe = q.state_from_ket(&haar_ket(&mut r, 3));
        let (s0, s1) = (represent(&probe, rep).unwrap(), represent(&apply(&g, &probe).unwrap(), rep).unwrap());
        let ph = (s1[(0, 2)] / s0[(0, 2)]).arg();
        let m = CMat::from_diagonal(&CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0), C64::from_polar(1.0, -ph)]));
        for _ in 0..10 {
            let rho = q.sample_mixed_state(&mut r, 3);
            let lhs = represent(&apply(&g, &rho).unwrap(), rep).unwrap();
            let rhs = &m * represent(&rho, rep).unwrap() * m.adjoint();
            assert!(max_abs(&(lhs - rhs)) < 1e-10);
        }
    }

    #[test]
    fn reach_identity_and_phased_pure_targets() {
        let fix = fixed_representation(3, Gauge::Seeded(41)).unwrap();
        let rep = &fix.rep;
        let q = quantum_of(&rep.basis.sys).unwrap();
        let (state, _) = reach_target(rep, &(CMat::identity(3, 3) * c(1.0 / 3.0, 0.0))).unwrap();
        assert!(state.distance(&q.invariant_state()) < 1e-10);
        let v = CVec::from_vec(vec![c(0.6, 0.0), C64::from_polar(0.64f64.sqrt() * 0.6, 2.1), C64::from_polar(0.48, -0.7)]);
        let v = &v / c(v.norm(), 0.0);
        let target = linalg::projector(&v);
        let (state, gates) = reach_target(rep, &target).unwrap();
        assert!(gates < 1e-9);
        assert!(max_abs(&(represent(&state, rep).unwrap() - target)) < 1e-10);
    }

    #[test]
    fn haar_unitary_conjugation_is_a_model_transformation() {
        let fix = fixed_representation(2, Gauge::Canonical).unwrap();
        let u = haar_unitary(&mut rng(9), 2);
        let g = fix.rep.transformation(&u).unwrap();
        assert!(choi::min_choi_eigenvalue(&g).unwrap() > -1e-10);
        assert!(g.channel_residual() < 1e-12);
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = linalg::random_hermitian(&mut rng(10), 3);
        let back = matrix_from_json(&matrix_to_json(&m)).unwrap();
        assert!(max_abs(&(back - &m)) == 0.0);
        let nested = json!([[[0.7, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.3, 0.0]]]);
        let n = matrix_from_json(&nested).unwrap();
        assert_eq!(n[(1, 1)], c(0.3, 0.0));
        assert!(matrix_from_json(&json!([[1.0, 0.0], [0.0, 0.0], [1.0, 0.0]])).is_err());
        assert!(matrix_from_json(&json!("x")).is_err());
    }

    #[test]
    fn dump_lists_every_face() {
        let fix = fixed_representation(3, Gauge::Canonical).unwrap();
        let v = dump(&fix.rep);
        assert_eq!(v["faces"].as_array().unwrap().len(), 3);
        assert_eq!(v["assignments"].as_array().unwrap().len(), 9);
    }

    #[test]
    fn pipeline_passes_in_low_dimension() {
        for d in 2..=3 {
            let p = run_pipeline(d, &cfg(8)).unwrap();
            for r in &p.reports {
                assert!(r.passed, "d={d} {}: {}", r.check_name, r.witness);
            }
        }
    }
}
