//! Concrete theories behind one oracle interface: finite-dimensional quantum
//! theory, classical probability theory, and finitely generated custom
//! models loaded from a JSON descriptor.

use std::sync::Arc;

use rand::Rng as _;
use serde::Deserialize;

use crate::error::{dim_err, GptError, Result};
use crate::framework::{dot, EffectVec, ModelKind, StateVec, SystemRef, TransMat, DEFAULT_TOL};
use crate::linalg::{
    self, c, complete_basis, eigh, eigvalsh, gram_schmidt, haar_ket, kron, max_abs, CMat, CVec,
    RMat, Rng,
};

/// Oracle interface every theory exposes to the checkers.
pub trait TheoryModel: Send + Sync {
    fn kind(&self) -> ModelKind;
    fn system(&self) -> &SystemRef;

    fn det_effect(&self) -> EffectVec {
        self.system().det_effect()
    }

    fn invariant_state(&self) -> StateVec;

    /// Whether `coords` is a (possibly sub-normalised) state.
    fn contains_state(&self, coords: &[f64], tol: f64) -> bool;

    fn contains_effect(&self, coords: &[f64], tol: f64) -> bool;

    /// `(sup_a (a|δ), inf_a (a|δ))` over all effects.
    fn effect_extrema(&self, delta: &[f64]) -> Result<(f64, f64)>;

    /// `(sup_ρ (ξ|ρ), inf_ρ (ξ|ρ))` over normalised states.
    fn state_extrema(&self, xi: &[f64]) -> Result<(f64, f64)>;

    fn is_pure(&self, rho: &StateVec, tol: f64) -> bool;

    fn sample_pure_state(&self, rng: &mut Rng) -> StateVec;
}

/// Draws one pure state with a fresh PRNG seeded by `seed`.
pub fn sample_pure_state(model: &dyn TheoryModel, seed: u64) -> StateVec {
    model.sample_pure_state(&mut linalg::rng(seed))
}

// ---------------------------------------------------------------------------
// Quantum theory
// ---------------------------------------------------------------------------

/// Quantum theory on `C^{d_1} ⊗ … ⊗ C^{d_k}`.
///
/// Coordinates are taken in an orthonormal (trace inner product) Hermitian
/// basis. A single factor uses the generalised Gell-Mann matrices in the
/// order `I/√d`, traceless diagonal, symmetric off-diagonal, antisymmetric
/// off-diagonal, each scaled to unit Hilbert-Schmidt norm. A composite uses
/// the Kronecker products of the factor bases in row-major order. Because
/// the basis is orthonormal, states and effects share the same
/// vectorisation and the pairing is the Euclidean dot product.
#[derive(Clone, Debug)]
pub struct QuantumModel {
    sys: SystemRef,
    basis: Arc<Vec<CMat>>,
}

impl QuantumModel {
    pub fn new(d: usize) -> Self {
        Self::with_factors(&[d])
    }

    pub fn with_factors(factors: &[usize]) -> Self {
        assert!(!factors.is_empty() && factors.iter().all(|&f| f >= 1));
        let mut basis = gell_mann_basis(factors[0]);
        for &f in &factors[1..] {
            let next = gell_mann_basis(f);
            let mut out = Vec::with_capacity(basis.len() * next.len());
            for a in &basis {
                for b in &next {
                    out.push(kron(a, b));
                }
            }
            basis = out;
        }
        let d: usize = factors.iter().product();
        let det: Vec<f64> = basis.iter().map(|b| b.trace().re).collect();
        let id = factors
            .iter()
            .map(|f| format!("quantum({f})"))
            .collect::<Vec<_>>()
            .join("*");
        QuantumModel {
            sys: SystemRef::new(id, ModelKind::Quantum, factors.to_vec(), d, det),
            basis: Arc::new(basis),
        }
    }

    pub fn d(&self) -> usize {
        self.sys.d
    }

    pub fn factors(&self) -> &[usize] {
        &self.sys.factors
    }

    pub fn compose(&self, other: &QuantumModel) -> QuantumModel {
        let mut f = self.sys.factors.clone();
        f.extend_from_slice(&other.sys.factors);
        QuantumModel::with_factors(&f)
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    /// Coordinates of a Hermitian matrix.
    pub fn vectorize(&self, h: &CMat) -> Result<Vec<f64>> {
        let d = self.d();
        if h.nrows() != d || h.ncols() != d {
            return Err(dim_err(format!("{d}x{d}"), format!("{}x{}", h.nrows(), h.ncols())));
        }
        let scale = max_abs(h).max(1.0);
        let res = linalg::hermitian_residual(h);
        if res > 1e-10 * scale {
            return Err(GptError::Validation(format!(
                "matrix is not Hermitian (residual {res:e})"
            )));
        }
        Ok(self.coords_unchecked(h))
    }

    pub(crate) fn coords_unchecked(&self, h: &CMat) -> Vec<f64> {
        self.basis
            .iter()
            .map(|b| linalg::trace_prod(b, h).re)
            .collect()
    }

    /// The Hermitian matrix with the given coordinates.
    pub fn devectorize(&self, coords: &[f64]) -> CMat {
        let d = self.d();
        let mut out = CMat::zeros(d, d);
        for (x, b) in coords.iter().zip(self.basis.iter()) {
            if *x != 0.0 {
                out += b * c(*x, 0.0);
            }
        }
        out
    }

    pub fn state_from_matrix(&self, rho: &CMat) -> Result<StateVec> {
        StateVec::new(self.sys.clone(), self.vectorize(rho)?)
    }

    pub fn state_from_ket(&self, ket: &CVec) -> StateVec {
        let n = ket.norm();
        let k = ket / c(n, 0.0);
        StateVec::unchecked(self.sys.clone(), self.coords_unchecked(&linalg::projector(&k)))
    }

    pub fn effect_from_matrix(&self, e: &CMat) -> Result<EffectVec> {
        EffectVec::new(self.sys.clone(), self.vectorize(e)?)
    }

    /// Transformation `X ↦ f(X)` into the system of `out`, evaluated on the
    /// input basis.
    pub fn superoperator(&self, out: &QuantumModel, f: impl Fn(&CMat) -> CMat) -> TransMat {
        let n_in = self.sys.dim;
        let mut m = RMat::zeros(out.sys.dim, n_in);
        for (k, b) in self.basis.iter().enumerate() {
            let col = out.coords_unchecked(&f(b));
            for (j, v) in col.into_iter().enumerate() {
                m[(j, k)] = v;
            }
        }
        TransMat {
            in_sys: self.sys.clone(),
            out_sys: out.sys.clone(),
            matrix: m,
        }
    }

    /// Quantum operation with Kraus operators `K_i : C^{d_in} → C^{d_out}`.
    pub fn kraus_map(&self, out: &QuantumModel, kraus: &[CMat]) -> TransMat {
        self.superoperator(out, |x| {
            kraus
                .iter()
                .fold(CMat::zeros(out.d(), out.d()), |acc, k| acc + k * x * k.adjoint())
        })
    }

    pub fn unitary_channel(&self, u: &CMat) -> TransMat {
        self.kraus_map(self, std::slice::from_ref(u))
    }

    /// Matrix of a state, effect or span vector.
    pub fn matrix(&self, coords: &[f64]) -> CMat {
        self.devectorize(coords)
    }

    /// Eigenvalues (descending) of the matrix behind `coords`.
    pub fn spectrum(&self, coords: &[f64]) -> Vec<f64> {
        eigvalsh(&self.devectorize(coords))
    }

    /// Unit vector of a pure state, with the deterministic phase convention
    /// of [`linalg::eigh`].
    pub fn ket_of(&self, phi: &StateVec) -> Result<CVec> {
        self.sys.ensure_same(&phi.sys)?;
        if !self.is_pure(phi, 1e-8) {
            return Err(GptError::Validation("state is not pure".into()));
        }
        let e = eigh(&self.devectorize(&phi.coords));
        Ok(e.vectors.column(0).into_owned())
    }

    /// The atomic effect `a_φ` with `(a_φ|φ) = 1`: the same rank-one projector.
    pub fn dual_of_pure(&self, phi: &StateVec) -> Result<EffectVec> {
        let ket = self.ket_of(phi)?;
        Ok(EffectVec {
            sys: self.sys.clone(),
            coords: self.coords_unchecked(&linalg::projector(&ket)),
        })
    }

    pub fn sample_mixed_state(&self, rng: &mut Rng, rank: usize) -> StateVec {
        let rho = linalg::random_density(rng, self.d(), rank.clamp(1, self.d()));
        StateVec::unchecked(self.sys.clone(), self.coords_unchecked(&rho))
    }

    /// Bloch vector `(x, y, z)` with `ρ = (I + x X + y Y + z Z)/2`.
    pub fn bloch_vector(&self, rho: &StateVec) -> Result<[f64; 3]> {
        if self.sys.factors != [2] {
            return Err(GptError::Unsupported("Bloch vectors need a single qubit".into()));
        }
        let m = self.devectorize(&rho.coords);
        Ok([
            2.0 * m[(0, 1)].re,
            -2.0 * m[(0, 1)].im,
            (m[(0, 0)] - m[(1, 1)]).re,
        ])
    }

    /// The 3×3 block of a qubit transformation acting on Bloch vectors.
    pub fn bloch_action(&self, t: &TransMat) -> Result<nalgebra::Matrix3<f64>> {
        if self.sys.factors != [2] {
            return Err(GptError::Unsupported("Bloch action needs a single qubit".into()));
        }
        let paulis = [
            CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]),
            CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]),
            CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]),
        ];
        let mut r = nalgebra::Matrix3::zeros();
        for (k, p) in paulis.iter().enumerate() {
            let input = (CMat::identity(2, 2) + p) * c(0.5, 0.0);
            let out = crate::framework::apply(t, &self.state_from_matrix(&input)?)?;
            let b = self.bloch_vector(&out)?;
            for j in 0..3 {
                r[(j, k)] = b[j];
            }
        }
        Ok(r)
    }
}

fn gell_mann_basis(d: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(d * d);
    out.push(CMat::identity(d, d) * c(1.0 / (d as f64).sqrt(), 0.0));
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = CMat::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = c(norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) * norm, 0.0);
        out.push(m);
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = CMat::zeros(d, d);
            m[(j, k)] = c(s, 0.0);
            m[(k, j)] = c(s, 0.0);
            out.push(m);
        }
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let mut m = CMat::zeros(d, d);
            m[(j, k)] = c(0.0, -s);
            m[(k, j)] = c(0.0, s);
            out.push(m);
        }
    }
    out
}

impl TheoryModel for QuantumModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Quantum
    }

    fn system(&self) -> &SystemRef {
        &self.sys
    }

    fn invariant_state(&self) -> StateVec {
        let d = self.d();
        let chi = CMat::identity(d, d) * c(1.0 / d as f64, 0.0);
        StateVec::unchecked(self.sys.clone(), self.coords_unchecked(&chi))
    }

    fn contains_state(&self, coords: &[f64], tol: f64) -> bool {
        if coords.len() != self.sys.dim {
            return false;
        }
        let ev = self.spectrum(coords);
        let tr: f64 = ev.iter().sum();
        ev.last().copied().unwrap_or(0.0) >= -tol && tr <= 1.0 + tol
    }

    fn contains_effect(&self, coords: &[f64], tol: f64) -> bool {
        if coords.len() != self.sys.dim {
            return false;
        }
        let ev = self.spectrum(coords);
        ev.last().copied().unwrap_or(0.0) >= -tol && ev[0] <= 1.0 + tol
    }

    fn effect_extrema(&self, delta: &[f64]) -> Result<(f64, f64)> {
        let ev = self.spectrum(delta);
        let sup = ev.iter().filter(|&&x| x > 0.0).sum();
        let inf = ev.iter().filter(|&&x| x < 0.0).sum();
        Ok((sup, inf))
    }

    fn state_extrema(&self, xi: &[f64]) -> Result<(f64, f64)> {
        let ev = self.spectrum(xi);
        Ok((ev[0], *ev.last().unwrap()))
    }

    fn is_pure(&self, rho: &StateVec, tol: f64) -> bool {
        let ev = self.spectrum(&rho.coords);
        (ev[0] - 1.0).abs() <= tol && ev[1..].iter().all(|x| x.abs() <= tol)
    }

    fn sample_pure_state(&self, rng: &mut Rng) -> StateVec {
        self.state_from_ket(&haar_ket(rng, self.d()))
    }
}

// ---------------------------------------------------------------------------
// Classical theory
// ---------------------------------------------------------------------------

/// Classical probability theory on `d` outcomes: states are sub-normalised
/// probability vectors, effects are vectors in `[0, 1]^d`.
#[derive(Clone, Debug)]
pub struct ClassicalModel {
    sys: SystemRef,
}

impl ClassicalModel {
    pub fn new(d: usize) -> Self {
        Self::with_factors(&[d])
    }

    pub fn with_factors(factors: &[usize]) -> Self {
        assert!(!factors.is_empty() && factors.iter().all(|&f| f >= 1));
        let d: usize = factors.iter().product();
        let id = factors
            .iter()
            .map(|f| format!("classical({f})"))
            .collect::<Vec<_>>()
            .join("*");
        ClassicalModel {
            sys: SystemRef::new(id, ModelKind::Classical, factors.to_vec(), d, vec![1.0; d]),
        }
    }

    pub fn d(&self) -> usize {
        self.sys.d
    }

    pub fn compose(&self, other: &ClassicalModel) -> ClassicalModel {
        let mut f = self.sys.factors.clone();
        f.extend_from_slice(&other.sys.factors);
        ClassicalModel::with_factors(&f)
    }

    pub fn vertex(&self, i: usize) -> StateVec {
        let mut v = vec![0.0; self.d()];
        v[i] = 1.0;
        StateVec::unchecked(self.sys.clone(), v)
    }

    pub fn state_from_probs(&self, p: &[f64]) -> Result<StateVec> {
        if p.iter().any(|&x| x < -DEFAULT_TOL) {
            return Err(GptError::Validation("negative probability".into()));
        }
        StateVec::new(self.sys.clone(), p.to_vec())
    }

    /// Indicator effect of a set of outcomes.
    pub fn indicator(&self, outcomes: &[usize]) -> EffectVec {
        let mut v = vec![0.0; self.d()];
        for &i in outcomes {
            v[i] = 1.0;
        }
        EffectVec {
            sys: self.sys.clone(),
            coords: v,
        }
    }

    /// Relabelling `i ↦ perm[i]` of the outcomes.
    pub fn permutation(&self, perm: &[usize]) -> TransMat {
        let d = self.d();
        let mut m = RMat::zeros(d, d);
        for (i, &j) in perm.iter().enumerate() {
            m[(j, i)] = 1.0;
        }
        TransMat {
            in_sys: self.sys.clone(),
            out_sys: self.sys.clone(),
            matrix: m,
        }
    }

    pub fn vertex_index(&self, rho: &StateVec, tol: f64) -> Option<usize> {
        let i = rho
            .coords
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?
            .0;
        let ok = rho
            .coords
            .iter()
            .enumerate()
            .all(|(j, &x)| if j == i { (x - 1.0).abs() <= tol } else { x.abs() <= tol });
        ok.then_some(i)
    }
}

impl TheoryModel for ClassicalModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Classical
    }

    fn system(&self) -> &SystemRef {
        &self.sys
    }

    fn invariant_state(&self) -> StateVec {
        let d = self.d();
        StateVec::unchecked(self.sys.clone(), vec![1.0 / d as f64; d])
    }

    fn contains_state(&self, coords: &[f64], tol: f64) -> bool {
        coords.len() == self.d()
            && coords.iter().all(|&x| x >= -tol)
            && coords.iter().sum::<f64>() <= 1.0 + tol
    }

    fn contains_effect(&self, coords: &[f64], tol: f64) -> bool {
        coords.len() == self.d() && coords.iter().all(|&x| x >= -tol && x <= 1.0 + tol)
    }

    fn effect_extrema(&self, delta: &[f64]) -> Result<(f64, f64)> {
        Ok((
            delta.iter().filter(|&&x| x > 0.0).sum(),
            delta.iter().filter(|&&x| x < 0.0).sum(),
        ))
    }

    fn state_extrema(&self, xi: &[f64]) -> Result<(f64, f64)> {
        Ok((
            xi.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            xi.iter().copied().fold(f64::INFINITY, f64::min),
        ))
    }

    fn is_pure(&self, rho: &StateVec, tol: f64) -> bool {
        self.vertex_index(rho, tol).is_some()
    }

    fn sample_pure_state(&self, rng: &mut Rng) -> StateVec {
        self.vertex(rng.random_range(0..self.d()))
    }
}

// ---------------------------------------------------------------------------
// Custom V-represented models
// ---------------------------------------------------------------------------

/// A finitely generated model.
///
/// States are the convex hull of `states` (sub-normalised generators are
/// allowed); effects are the convex hull of the generators, their
/// complements `e - a`, the zero effect and `e`. Observation tests are the
/// binary tests `{a, e - a}` plus any declared index lists.
#[derive(Clone, Debug)]
pub struct CustomModel {
    sys: SystemRef,
    states: Vec<Vec<f64>>,
    effects: Vec<Vec<f64>>,
    tests: Vec<Vec<usize>>,
}

impl CustomModel {
    pub fn new(
        d: usize,
        states: Vec<Vec<f64>>,
        effects: Vec<Vec<f64>>,
        det_effect: Vec<f64>,
        tests: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let dim = det_effect.len();
        if d == 0 || dim < d {
            return Err(GptError::Schema(format!(
                "need 1 <= d <= D, got d={d}, D={dim}"
            )));
        }
        if states.is_empty() {
            return Err(GptError::Schema("state_generators is empty".into()));
        }
        for v in states.iter().chain(effects.iter()) {
            if v.len() != dim {
                return Err(GptError::Schema(format!(
                    "generator of length {} in a model with D={dim}",
                    v.len()
                )));
            }
        }
        for t in &tests {
            if t.is_empty() || t.iter().any(|&i| i >= effects.len()) {
                return Err(GptError::Schema(format!("bad observation test {t:?}")));
            }
        }
        let tol = DEFAULT_TOL;
        for (i, s) in states.iter().enumerate() {
            let w = dot(&det_effect, s);
            if !(tol..=1.0 + tol).contains(&w) {
                return Err(GptError::Validation(format!(
                    "state generator {i} has weight {w} outside (0, 1]"
                )));
            }
            for (j, a) in effects.iter().enumerate() {
                let p = dot(a, s);
                if p < -tol || p > w + tol {
                    return Err(GptError::Validation(format!(
                        "effect {j} on state {i} gives {p}, outside [0, {w}]"
                    )));
                }
            }
            for (k, t) in tests.iter().enumerate() {
                let p: f64 = t.iter().map(|&j| dot(&effects[j], s)).sum();
                if p > 1.0 + tol {
                    return Err(GptError::Validation(format!(
                        "observation test {k} sums to {p} on state {i}"
                    )));
                }
            }
        }
        let fingerprint = fnv1a(
            &states
                .iter()
                .chain(effects.iter())
                .chain(std::iter::once(&det_effect))
                .flatten()
                .flat_map(|x| x.to_le_bytes())
                .collect::<Vec<u8>>(),
        );
        let id = format!("custom({fingerprint:016x})");
        Ok(CustomModel {
            sys: SystemRef::new(id, ModelKind::Custom, vec![d], d, det_effect),
            states,
            effects,
            tests,
        })
    }

    pub fn state_generators(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn effect_generators(&self) -> &[Vec<f64>] {
        &self.effects
    }

    pub fn observation_tests(&self) -> &[Vec<usize>] {
        &self.tests
    }

    /// Normalised versions of the state generators.
    pub fn normalized_states(&self) -> Vec<StateVec> {
        self.states
            .iter()
            .map(|s| {
                let w = dot(self.sys.det_coords(), s);
                StateVec::unchecked(self.sys.clone(), s.iter().map(|x| x / w).collect())
            })
            .collect()
    }

    /// Every effect vertex: generators, complements, zero and `e`.
    pub fn effect_vertices(&self) -> Vec<EffectVec> {
        let e = self.sys.det_effect();
        let mut out = vec![
            EffectVec {
                sys: self.sys.clone(),
                coords: vec![0.0; self.sys.dim],
            },
            e,
        ];
        for a in &self.effects {
            let a = EffectVec {
                sys: self.sys.clone(),
                coords: a.clone(),
            };
            out.push(a.complement());
            out.push(a);
        }
        out
    }

    pub fn compose(&self, other: &CustomModel) -> Result<CustomModel> {
        let sys = self.sys.compose(&other.sys)?;
        let prod = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
            a.iter()
                .flat_map(|x| b.iter().map(move |y| linalg::kron_vec(x, y)))
                .collect()
        };
        Ok(CustomModel {
            sys,
            states: prod(&self.states, &other.states),
            effects: prod(&self.effects, &other.effects),
            tests: Vec::new(),
        })
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

impl TheoryModel for CustomModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Custom
    }

    fn system(&self) -> &SystemRef {
        &self.sys
    }

    /// Centroid of the normalised generators.
    fn invariant_state(&self) -> StateVec {
        let n = self.states.len() as f64;
        let mut acc = vec![0.0; self.sys.dim];
        for s in self.normalized_states() {
            for (a, x) in acc.iter_mut().zip(&s.coords) {
                *a += x / n;
            }
        }
        StateVec::unchecked(self.sys.clone(), acc)
    }

    /// Outer approximation: every effect vertex must give a probability in
    /// `[0, weight]`.
    fn contains_state(&self, coords: &[f64], tol: f64) -> bool {
        if coords.len() != self.sys.dim {
            return false;
        }
        let w = dot(self.sys.det_coords(), coords);
        w >= -tol
            && w <= 1.0 + tol
            && self.effect_vertices().iter().all(|a| {
                let p = dot(&a.coords, coords);
                p >= -tol && p <= w + tol
            })
    }

    fn contains_effect(&self, coords: &[f64], tol: f64) -> bool {
        coords.len() == self.sys.dim
            && self.states.iter().all(|s| {
                let p = dot(coords, s);
                p >= -tol && p <= 1.0 + tol
            })
    }

    fn effect_extrema(&self, delta: &[f64]) -> Result<(f64, f64)> {
        let vals: Vec<f64> = self
            .effect_vertices()
            .iter()
            .map(|a| dot(&a.coords, delta))
            .collect();
        Ok((
            vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            vals.iter().copied().fold(f64::INFINITY, f64::min),
        ))
    }

    fn state_extrema(&self, xi: &[f64]) -> Result<(f64, f64)> {
        let vals: Vec<f64> = self
            .normalized_states()
            .iter()
            .map(|s| dot(xi, &s.coords))
            .collect();
        Ok((
            vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            vals.iter().copied().fold(f64::INFINITY, f64::min),
        ))
    }

    fn is_pure(&self, rho: &StateVec, tol: f64) -> bool {
        self.normalized_states()
            .iter()
            .any(|s| s.distance(rho) <= tol)
    }

    fn sample_pure_state(&self, rng: &mut Rng) -> StateVec {
        let i = rng.random_range(0..self.states.len());
        self.normalized_states().swap_remove(i)
    }
}

// ---------------------------------------------------------------------------
// Dispatch enum and loader
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum Model {
    Classical(ClassicalModel),
    Quantum(QuantumModel),
    Custom(CustomModel),
}

impl Model {
    pub fn as_quantum(&self) -> Option<&QuantumModel> {
        match self {
            Model::Quantum(q) => Some(q),
            _ => None,
        }
    }

    pub fn as_classical(&self) -> Option<&ClassicalModel> {
        match self {
            Model::Classical(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_custom(&self) -> Option<&CustomModel> {
        match self {
            Model::Custom(m) => Some(m),
            _ => None,
        }
    }

    fn inner(&self) -> &dyn TheoryModel {
        match self {
            Model::Classical(m) => m,
            Model::Quantum(m) => m,
            Model::Custom(m) => m,
        }
    }

    pub fn compose(&self, other: &Model) -> Result<Model> {
        match (self, other) {
            (Model::Quantum(a), Model::Quantum(b)) => Ok(Model::Quantum(a.compose(b))),
            (Model::Classical(a), Model::Classical(b)) => Ok(Model::Classical(a.compose(b))),
            (Model::Custom(a), Model::Custom(b)) => Ok(Model::Custom(a.compose(b)?)),
            (a, b) => Err(GptError::Composition(format!(
                "{} and {} belong to different theory families",
                a.kind(),
                b.kind()
            ))),
        }
    }
}

impl From<QuantumModel> for Model {
    fn from(m: QuantumModel) -> Self {
        Model::Quantum(m)
    }
}

impl From<ClassicalModel> for Model {
    fn from(m: ClassicalModel) -> Self {
        Model::Classical(m)
    }
}

impl From<CustomModel> for Model {
    fn from(m: CustomModel) -> Self {
        Model::Custom(m)
    }
}

impl TheoryModel for Model {
    fn kind(&self) -> ModelKind {
        self.inner().kind()
    }
    fn system(&self) -> &SystemRef {
        self.inner().system()
    }
    fn invariant_state(&self) -> StateVec {
        self.inner().invariant_state()
    }
    fn contains_state(&self, coords: &[f64], tol: f64) -> bool {
        self.inner().contains_state(coords, tol)
    }
    fn contains_effect(&self, coords: &[f64], tol: f64) -> bool {
        self.inner().contains_effect(coords, tol)
    }
    fn effect_extrema(&self, delta: &[f64]) -> Result<(f64, f64)> {
        self.inner().effect_extrema(delta)
    }
    fn state_extrema(&self, xi: &[f64]) -> Result<(f64, f64)> {
        self.inner().state_extrema(xi)
    }
    fn is_pure(&self, rho: &StateVec, tol: f64) -> bool {
        self.inner().is_pure(rho, tol)
    }
    fn sample_pure_state(&self, rng: &mut Rng) -> StateVec {
        self.inner().sample_pure_state(rng)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Descriptor {
    #[serde(rename = "type")]
    kind: String,
    d: usize,
    #[serde(default)]
    state_generators: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    effect_generators: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    det_effect: Option<Vec<f64>>,
    #[serde(default)]
    observation_tests: Option<Vec<Vec<usize>>>,
}

/// Parses and validates a model descriptor.
///
/// ```text
/// {"type": "quantum" | "classical" | "custom", "d": int,
///  "state_generators": [[real, ...]], "effect_generators": [[real, ...]],
///  "det_effect": [real, ...], "observation_tests": [[index, ...]]}
/// ```
///
/// The generator fields are required for `custom` and rejected otherwise.
pub fn load_model(descriptor: &str) -> Result<Model> {
    let desc: Descriptor =
        serde_json::from_str(descriptor).map_err(|e| GptError::Schema(e.to_string()))?;
    if desc.d == 0 {
        return Err(GptError::Schema("d must be at least 1".into()));
    }
    let has_custom_fields = desc.state_generators.is_some()
        || desc.effect_generators.is_some()
        || desc.det_effect.is_some()
        || desc.observation_tests.is_some();
    match desc.kind.as_str() {
        "quantum" | "classical" if has_custom_fields => Err(GptError::Schema(format!(
            "generator fields are only allowed for custom models, not {}",
            desc.kind
        ))),
        "quantum" => Ok(Model::Quantum(QuantumModel::new(desc.d))),
        "classical" => Ok(Model::Classical(ClassicalModel::new(desc.d))),
        "custom" => {
            let missing = |f: &str| GptError::Schema(format!("custom model needs {f}"));
            let states = desc
                .state_generators
                .ok_or_else(|| missing("state_generators"))?;
            let effects = desc
                .effect_generators
                .ok_or_else(|| missing("effect_generators"))?;
            let det = desc.det_effect.ok_or_else(|| missing("det_effect"))?;
            Ok(Model::Custom(CustomModel::new(
                desc.d,
                states,
                effects,
                det,
                desc.observation_tests.unwrap_or_default(),
            )?))
        }
        other => Err(GptError::Schema(format!("unknown model type {other:?}"))),
    }
}

// ---------------------------------------------------------------------------
// Reversible transformations
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum ReversibleParams {
    Unitary(CMat),
    Permutation(Vec<usize>),
}

/// An element of the reversible group of a model.
#[derive(Clone, Debug)]
pub struct ReversibleElem {
    pub sys: SystemRef,
    pub params: ReversibleParams,
}

impl ReversibleElem {
    pub fn to_trans(&self, model: &Model) -> Result<TransMat> {
        self.sys.ensure_same(model.system())?;
        match (&self.params, model) {
            (ReversibleParams::Unitary(u), Model::Quantum(q)) => Ok(q.unitary_channel(u)),
            (ReversibleParams::Permutation(p), Model::Classical(m)) => Ok(m.permutation(p)),
            _ => Err(GptError::Unsupported(
                "reversible element does not match the model".into(),
            )),
        }
    }
}

/// A reversible transformation mapping pure `phi` to pure `psi`.
///
/// Quantum: the unitary `B A†`, where `A` and `B` complete the two unit
/// vectors to orthonormal bases with the same Gram-Schmidt rule.
/// Classical: the transposition of the two vertices.
pub fn reversible_orbit_check(model: &Model, phi: &StateVec, psi: &StateVec) -> Result<ReversibleElem> {
    let tol = 1e-8;
    if !model.is_pure(phi, tol) || !model.is_pure(psi, tol) {
        return Err(GptError::Validation("both states must be pure".into()));
    }
    match model {
        Model::Quantum(q) => {
            let a = q.ket_of(phi)?;
            let b = q.ket_of(psi)?;
            let d = q.d();
            let u = if (a.dotc(&b).norm() - 1.0).abs() < 1e-12 {
                CMat::identity(d, d)
            } else {
                let ca = complete_basis(&CMat::from_columns(&[a]));
                let cb = complete_basis(&CMat::from_columns(&[b]));
                gram_schmidt(&cb) * gram_schmidt(&ca).adjoint()
            };
            Ok(ReversibleElem {
                sys: q.system().clone(),
                params: ReversibleParams::Unitary(u),
            })
        }
        Model::Classical(m) => {
            let i = m.vertex_index(phi, tol).unwrap();
            let j = m.vertex_index(psi, tol).unwrap();
            let mut perm: Vec<usize> = (0..m.d()).collect();
            perm.swap(i, j);
            Ok(ReversibleElem {
                sys: m.system().clone(),
                params: ReversibleParams::Permutation(perm),
            })
        }
        Model::Custom(_) => Err(GptError::Unsupported(
            "custom models expose no reversible group".into(),
        )),
    }
}
