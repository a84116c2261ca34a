//! Instance checkers for the axioms, the purification postulate and two
//! derived structural results. Every checker samples with a fixed seed and
//! returns a [`CheckReport`] carrying its worst residual and a witness.

use std::time::Instant;

use nalgebra::DVector;
use rand::Rng as _;
use serde::Serialize;
use serde_json::{json, Value};

use crate::choi::{self, connecting_reversible, purify, PurifiedState};
use crate::error::{GptError, Result};
use crate::framework::{
    apply, dot, marginal_first, partial_pair_first, EffectVec, StateVec, DEFAULT_TOL,
};
use crate::linalg::{self, c, eigh, haar_ket, haar_unitary, random_kraus, CMat, CVec, RMat, Rng};
use crate::models::{ClassicalModel, CustomModel, Model, QuantumModel, TheoryModel};
use crate::structure::{self, compress_face, face_of, FaceRep};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    /// The model does not satisfy the postulate; expected for some models.
    FailsPostulate,
    /// The checker could only run part of its procedure on this model.
    Partial,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check_name: String,
    pub passed: bool,
    pub status: Status,
    pub max_residual: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub trials: usize,
    pub witness: Value,
    pub runtime_ms: f64,
    pub notes: String,
}

#[derive(Clone, Copy, Debug)]
pub struct CheckConfig {
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            trials: 200,
            seed: 42,
            tol: DEFAULT_TOL,
        }
    }
}

pub(crate) struct Builder {
    name: &'static str,
    cfg: CheckConfig,
    start: Instant,
}

impl Builder {
    pub(crate) fn new(name: &'static str, cfg: &CheckConfig) -> Self {
        Builder {
            name,
            cfg: *cfg,
            start: Instant::now(),
        }
    }

    pub(crate) fn finish(self, status: Status, max_residual: f64, witness: Value, notes: impl Into<String>) -> CheckReport {
        CheckReport {
            check_name: self.name.to_string(),
            passed: status == Status::Pass,
            status,
            max_residual,
            tolerance: self.cfg.tol,
            seed: self.cfg.seed,
            trials: self.cfg.trials,
            witness,
            runtime_ms: self.start.elapsed().as_secs_f64() * 1e3,
            notes: notes.into(),
        }
    }

    /// Pass iff the residual is within tolerance.
    pub(crate) fn verdict(self, max_residual: f64, witness: Value, notes: impl Into<String>) -> CheckReport {
        let status = if max_residual <= self.cfg.tol {
            Status::Pass
        } else {
            Status::Fail
        };
        self.finish(status, max_residual, witness, notes)
    }
}

fn sum_coords(effects: &[Vec<f64>]) -> Vec<f64> {
    let mut s = vec![0.0; effects[0].len()];
    for a in effects {
        for (x, y) in s.iter_mut().zip(a) {
            *x += y;
        }
    }
    s
}

// ---------------------------------------------------------------------------
// Causality
// ---------------------------------------------------------------------------

/// Every observation-test sums to the same deterministic effect.
pub fn check_causality(model: &Model, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("causality", cfg);
    let e = model.det_effect().coords;
    let mut r = linalg::rng(cfg.seed);
    match model {
        Model::Quantum(q) => {
            let d = q.d();
            let mut worst = 0.0f64;
            for t in 0..cfg.trials {
                let n = 2 + t % 3;
                let effects: Vec<Vec<f64>> = if t % 2 == 0 {
                    random_kraus(&mut r, d, d, n)
                        .iter()
                        .map(|k| q.coords_unchecked(&(k.adjoint() * k)))
                        .collect()
                } else {
                    let u = haar_unitary(&mut r, d);
                    (0..d)
                        .map(|i| q.coords_unchecked(&linalg::projector(&u.column(i).into_owned())))
                        .collect()
                };
                worst = worst.max(linalg::max_abs_diff(&sum_coords(&effects), &e));
            }
            b.verdict(worst, json!({"observation_tests": cfg.trials}), "random POVMs and projective measurements")
        }
        Model::Classical(m) => {
            let d = m.d();
            let mut worst = 0.0f64;
            for t in 0..cfg.trials {
                let n = 2 + t % 3;
                let cols: Vec<Vec<f64>> = (0..d).map(|_| linalg::random_probabilities(&mut r, n)).collect();
                let effects: Vec<Vec<f64>> = (0..n).map(|i| cols.iter().map(|p| p[i]).collect()).collect();
                worst = worst.max(linalg::max_abs_diff(&sum_coords(&effects), &e));
            }
            b.verdict(worst, json!({"observation_tests": cfg.trials}), "random fuzzy partitions of the outcomes")
        }
        Model::Custom(m) => custom_causality(b, m, &e),
    }
}

fn custom_causality(b: Builder, m: &CustomModel, e: &[f64]) -> CheckReport {
    let tests = m.observation_tests();
    let gens = m.effect_generators();
    // binary tests {a, e - a} sum to e by construction; declared tests may not
    let mut worst = 0.0f64;
    let mut bad = None;
    for (k, t) in tests.iter().enumerate() {
        let s = sum_coords(&t.iter().map(|&i| gens[i].clone()).collect::<Vec<_>>());
        let res = linalg::max_abs_diff(&s, e);
        if res > worst {
            worst = res;
            bad = Some((k, s));
        }
    }
    match bad {
        Some((k, s)) if worst > b.cfg.tol => {
            let states = m.normalized_states();
            let (idx, state) = states
                .iter()
                .enumerate()
                .max_by(|x, y| {
                    (dot(&s, &x.1.coords) - 1.0)
                        .abs()
                        .total_cmp(&(dot(&s, &y.1.coords) - 1.0).abs())
                })
                .unwrap();
            let witness = json!({
                "first": {"test": "binary", "effects": [gens.first().cloned(), gens.first().map(|a| a.iter().zip(e).map(|(x, y)| y - x).collect::<Vec<_>>())], "sum": e},
                "second": {"test": k, "effects": tests[k].iter().map(|&i| gens[i].clone()).collect::<Vec<_>>(), "sum": s},
                "state_index": idx,
                "state": state.coords,
                "probabilities": [dot(e, &state.coords), dot(&s, &state.coords)],
            });
            b.finish(
                Status::Fail,
                worst,
                witness,
                "two observation tests sum to different effects",
            )
        }
        _ => b.verdict(
            worst,
            json!({"declared_tests": tests.len(), "binary_tests": gens.len()}),
            "declared and binary generator tests",
        ),
    }
}

// ---------------------------------------------------------------------------
// Perfect distinguishability
// ---------------------------------------------------------------------------

/// Either `ρ` is completely mixed, or a state `σ` and a binary test with
/// `(a|ρ) = 1`, `(a|σ) = 0` exist.
pub fn check_perfect_distinguishability(model: &Model, rho: &StateVec, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("perfect_distinguishability", cfg);
    match distinguish(model, rho) {
        Ok(Distinguished::CompletelyMixed) => b.finish(
            Status::Pass,
            0.0,
            json!({"completely_mixed": true}),
            "completely mixed: no state is perfectly distinguishable from it",
        ),
        Ok(Distinguished::Pair { sigma, effect }) => {
            let e = model.det_effect().coords;
            let comp: Vec<f64> = e.iter().zip(&effect).map(|(x, y)| x - y).collect();
            let res = (dot(&effect, &rho.coords) - 1.0)
                .abs()
                .max(dot(&effect, &sigma).abs())
                .max(dot(&comp, &rho.coords).abs())
                .max((dot(&comp, &sigma) - 1.0).abs());
            b.verdict(
                res,
                json!({"completely_mixed": false, "sigma": sigma, "test": [effect, comp]}),
                "",
            )
        }
        Err(err) => b.finish(Status::Partial, f64::NAN, Value::Null, err.to_string()),
    }
}

enum Distinguished {
    CompletelyMixed,
    Pair { sigma: Vec<f64>, effect: Vec<f64> },
}

fn distinguish(model: &Model, rho: &StateVec) -> Result<Distinguished> {
    if structure::is_completely_mixed(model, rho, structure::RANK_TOL)? {
        return Ok(Distinguished::CompletelyMixed);
    }
    match model {
        Model::Quantum(q) => {
            let e = eigh(&q.devectorize(&rho.coords));
            let r = e.values.iter().filter(|&&x| x > structure::RANK_TOL).count();
            let ker = e.vectors.columns(r, q.d() - r).into_owned();
            let p0 = &ker * ker.adjoint();
            let sigma = p0.clone() * c(1.0 / (q.d() - r) as f64, 0.0);
            let a = CMat::identity(q.d(), q.d()) - p0;
            Ok(Distinguished::Pair {
                sigma: q.coords_unchecked(&sigma),
                effect: q.coords_unchecked(&a),
            })
        }
        Model::Classical(m) => {
            let support: Vec<usize> = (0..m.d()).filter(|&i| rho.coords[i] > structure::RANK_TOL).collect();
            let out = (0..m.d()).find(|i| !support.contains(i)).unwrap();
            Ok(Distinguished::Pair {
                sigma: m.vertex(out).coords,
                effect: m.indicator(&support).coords,
            })
        }
        Model::Custom(m) => {
            let w = rho.weight;
            for a in m.effect_vertices() {
                if (dot(&a.coords, &rho.coords) - w).abs() > 1e-9 {
                    continue;
                }
                if let Some(s) = m
                    .normalized_states()
                    .into_iter()
                    .find(|s| dot(&a.coords, &s.coords).abs() <= 1e-9)
                {
                    return Ok(Distinguished::Pair {
                        sigma: s.coords,
                        effect: a.coords,
                    });
                }
            }
            Err(GptError::Infeasible(
                "no generator and effect vertex distinguish this state".into(),
            ))
        }
    }
}

/// Sampled states of every rank, each run through
/// [`check_perfect_distinguishability`].
pub fn check_distinguishability_sampled(model: &Model, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("perfect_distinguishability", cfg);
    let mut r = linalg::rng(cfg.seed);
    let mut worst = 0.0f64;
    let mut mixed = 0;
    let mut distinguished = 0;
    for t in 0..cfg.trials {
        let rho = sample_state(model, &mut r, t);
        let rep = check_perfect_distinguishability(model, &rho, cfg);
        match rep.status {
            Status::Pass if rep.witness["completely_mixed"] == true => mixed += 1,
            Status::Pass => distinguished += 1,
            _ => {
                return b.finish(
                    rep.status,
                    rep.max_residual,
                    json!({"state": rho.coords, "inner": rep.witness}),
                    rep.notes,
                )
            }
        }
        worst = worst.max(rep.max_residual);
    }
    b.verdict(
        worst,
        json!({"completely_mixed": mixed, "distinguished": distinguished}),
        "states of every rank",
    )
}

/// A normalised state for trial `t`: quantum rank cycles through `1..=d`,
/// classical support size cycles likewise, custom mixes generators.
fn sample_state(model: &Model, r: &mut Rng, t: usize) -> StateVec {
    match model {
        Model::Quantum(q) => q.sample_mixed_state(r, 1 + t % q.d()),
        Model::Classical(m) => {
            let k = 1 + t % m.d();
            let p = linalg::random_probabilities(r, k);
            let mut v = vec![0.0; m.d()];
            let mut idx: Vec<usize> = (0..m.d()).collect();
            for i in 0..k {
                let j = r.random_range(i..m.d());
                idx.swap(i, j);
                v[idx[i]] = p[i];
            }
            m.state_from_probs(&v).expect("probability vector")
        }
        Model::Custom(m) => {
            let gens = m.normalized_states();
            if t.is_multiple_of(2) {
                gens[t / 2 % gens.len()].clone()
            } else {
                let p = linalg::random_probabilities(r, gens.len());
                let parts: Vec<(f64, &StateVec)> = p.iter().copied().zip(gens.iter()).collect();
                crate::framework::mix(&parts).expect("mixture")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Ideal compression
// ---------------------------------------------------------------------------

/// Encodes the face of `ρ` into a system of dimension `|F_ρ|` and checks
/// that decoding after encoding is the identity on the face, encoding after
/// decoding is the identity on the code, and the code states are reached.
pub fn check_ideal_compression(model: &Model, rho: &StateVec, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("ideal_compression", cfg);
    let mut r = linalg::rng(cfg.seed);
    let samples = cfg.trials.clamp(1, 20);
    match model {
        Model::Quantum(q) => {
            let face = match face_of(model, rho) {
                Ok(f) => f,
                Err(e) => return b.finish(Status::Fail, f64::NAN, Value::Null, e.to_string()),
            };
            let face = if face.size == q.d() {
                structure::computational_face(model, &(0..q.d()).collect::<Vec<_>>()).unwrap()
            } else {
                face
            };
            let enc = compress_face(q, &face).expect("quantum face");
            let FaceRep::Quantum { isometry } = &face.rep else { unreachable!() };
            let rank = face.size;
            let mut worst = 0.0f64;
            let ed = crate::framework::compose(&enc.encode, &enc.decode).unwrap();
            let n = ed.matrix.nrows();
            worst = worst.max(linalg::max_abs_real(&(&ed.matrix - RMat::identity(n, n))));
            worst = worst.max(enc.encode.channel_residual()).max(enc.decode.channel_residual());
            for _ in 0..samples {
                // a random state of the face, then a random code state
                let tau = linalg::random_density(&mut r, rank, rank);
                let inside = q.state_from_matrix(&(isometry * &tau * isometry.adjoint())).unwrap();
                let back = apply(&enc.decode, &apply(&enc.encode, &inside).unwrap()).unwrap();
                worst = worst.max(back.distance(&inside));
                let code_state = enc.code.state_from_matrix(&tau).unwrap();
                let decoded = apply(&enc.decode, &code_state).unwrap();
                let a_f = structure::effect_of(model, &face).unwrap();
                worst = worst.max((dot(&a_f.coords, &decoded.coords) - 1.0).abs());
                worst = worst.max(apply(&enc.encode, &decoded).unwrap().distance(&code_state));
            }
            b.verdict(
                worst,
                json!({"code_dimension": rank, "is_identity": rank == q.d()}),
                "",
            )
        }
        Model::Classical(m) => {
            let support: Vec<usize> = (0..m.d()).filter(|&i| rho.coords[i] > structure::RANK_TOL).collect();
            let k = support.len();
            let mut enc = RMat::zeros(k, m.d());
            let mut dec = RMat::zeros(m.d(), k);
            for (j, &i) in support.iter().enumerate() {
                enc[(j, i)] = 1.0;
                dec[(i, j)] = 1.0;
            }
            for i in (0..m.d()).filter(|i| !support.contains(i)) {
                enc[(0, i)] = 1.0;
            }
            let mut worst = linalg::max_abs_real(&(&enc * &dec - RMat::identity(k, k)));
            for _ in 0..samples {
                let p = linalg::random_probabilities(&mut r, k);
                let mut v = DVector::zeros(m.d());
                for (j, &i) in support.iter().enumerate() {
                    v[i] = p[j];
                }
                let back = &dec * (&enc * &v);
                worst = worst.max((back - v).amax());
            }
            b.verdict(worst, json!({"code_dimension": k, "support": support}), "")
        }
        Model::Custom(_) => b.finish(
            Status::Partial,
            f64::NAN,
            Value::Null,
            "compression maps are not constructed for custom models",
        ),
    }
}

pub fn check_compression_sampled(model: &Model, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("ideal_compression", cfg);
    if let Model::Custom(_) = model {
        return check_ideal_compression(model, &model.invariant_state(), cfg);
    }
    let mut r = linalg::rng(cfg.seed);
    let mut worst = 0.0f64;
    let inner = CheckConfig { trials: 2, ..*cfg };
    for t in 0..cfg.trials {
        let rho = sample_state(model, &mut r, t);
        let rep = check_ideal_compression(model, &rho, &CheckConfig { seed: cfg.seed.wrapping_add(t as u64), ..inner });
        if !rep.passed {
            return b.finish(rep.status, rep.max_residual, json!({"state": rho.coords}), rep.notes);
        }
        worst = worst.max(rep.max_residual);
    }
    b.verdict(worst, json!({"states": cfg.trials}), "states of every rank")
}

// ---------------------------------------------------------------------------
// Local tomography
// ---------------------------------------------------------------------------

/// A well-conditioned informationally complete set: `|i⟩⟨i|` and the
/// projectors onto `(|i⟩ + |j⟩)/√2`, `(|i⟩ + i|j⟩)/√2` for `i < j`.
fn spanning_effects(model: &Model) -> Vec<Vec<f64>> {
    match model {
        Model::Quantum(q) => {
            let d = q.d();
            let mut kets: Vec<CVec> = (0..d).map(|i| linalg::basis_ket(d, i)).collect();
            for i in 0..d {
                for j in i + 1..d {
                    for phase in [c(1.0, 0.0), c(0.0, 1.0)] {
                        let mut v = linalg::basis_ket(d, i);
                        v[j] = phase;
                        kets.push(v.unscale(2f64.sqrt()));
                    }
                }
            }
            kets.iter().map(|k| q.coords_unchecked(&linalg::projector(k))).collect()
        }
        Model::Classical(m) => (0..m.d()).map(|i| m.indicator(&[i]).coords).collect(),
        Model::Custom(m) => m.effect_vertices().into_iter().map(|a| a.coords).collect(),
    }
}

/// Bipartite states are determined by the statistics of product effects.
pub fn check_local_tomography(model_a: &Model, model_b: &Model, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("local_tomography", cfg);
    let joint = match model_a.compose(model_b) {
        Ok(j) => j,
        Err(e) => return b.finish(Status::Fail, f64::NAN, Value::Null, e.to_string()),
    };
    let (da, db, dab) = (model_a.system().dim, model_b.system().dim, joint.system().dim);
    let mut r = linalg::rng(cfg.seed);
    let ea = spanning_effects(model_a);
    let eb = spanning_effects(model_b);
    let rows: Vec<Vec<f64>> = ea
        .iter()
        .flat_map(|x| eb.iter().map(move |y| linalg::kron_vec(x, y)))
        .collect();
    let p = RMat::from_fn(rows.len(), dab, |i, j| rows[i][j]);
    let rank = linalg::real_rank(&p, 1e-9);
    // QR rather than SVD: the Kronecker-structured matrix has highly
    // degenerate singular values, where the SVD's singular vectors lose
    // accuracy.
    let qr = p.clone().qr();
    let (qt, r_mat) = (qr.q().transpose(), qr.r());

    let mut worst = 0.0f64;
    let mut separated = 0;
    let mut inseparable = 0;
    let mut first_witness = Value::Null;
    let pairs = sample_bipartite_pairs(model_a, model_b, &joint, &mut r, cfg.trials);
    for (x, y) in &pairs {
        let diff = DVector::from_iterator(dab, x.coords.iter().zip(&y.coords).map(|(a, b)| a - b));
        let stats = &p * &diff;
        let back = if r_mat.is_square() {
            r_mat.solve_upper_triangular(&(&qt * &stats))
        } else {
            None
        }
        .unwrap_or_else(|| DVector::from_element(dab, f64::INFINITY));
        worst = worst.max((back - &diff).amax());
        let (best, gap) = stats
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.abs()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if gap > cfg.tol {
            separated += 1;
            if first_witness.is_null() {
                first_witness = json!({
                    "effect_a": ea[best / eb.len()],
                    "effect_b": eb[best % eb.len()],
                    "state_1": x.coords,
                    "state_2": y.coords,
                    "probability_gap": stats[best],
                });
            }
        } else {
            inseparable += 1;
        }
    }
    let dims_ok = dab == da * db;
    let witness = json!({
        "D_A": da, "D_B": db, "D_AB": dab,
        "product_effect_rank": rank,
        "separated_pairs": separated,
        "identical_pairs": inseparable,
        "example": first_witness,
    });
    if !dims_ok || rank < dab {
        return b.finish(
            Status::Fail,
            worst.max(1.0),
            witness,
            "product effects do not span the bipartite effects",
        );
    }
    b.verdict(worst, witness, "state differences reconstructed from product statistics")
}

fn sample_bipartite_pairs(
    a: &Model,
    b: &Model,
    joint: &Model,
    r: &mut Rng,
    n: usize,
) -> Vec<(StateVec, StateVec)> {
    let mut out = Vec::with_capacity(n);
    if let (Model::Quantum(qa), Model::Quantum(qb), Model::Quantum(qab)) = (a, b, joint) {
        if qa.d() == qb.d() {
            let bell = choi::canonical_phi(qa).state;
            let bell = StateVec::new(qab.system().clone(), bell.coords).unwrap();
            out.push((bell, qab.invariant_state()));
        }
    }
    out.push((joint.invariant_state(), joint.invariant_state()));
    let mut t = 0;
    while out.len() < n.max(2) {
        let x = sample_state(joint, r, t);
        let y = sample_state(joint, r, t + 1);
        out.push((x, y));
        t += 1;
    }
    out
}

// ---------------------------------------------------------------------------
// Pure conditioning
// ---------------------------------------------------------------------------

/// Conditioning one side of a pure bipartite state on an atomic effect
/// leaves a pure state on the other side.
pub fn check_pure_conditioning(model: &Model, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("pure_conditioning", cfg);
    let mut r = linalg::rng(cfg.seed);
    match model {
        Model::Quantum(q) => {
            let qab = q.compose(q);
            let d = q.d();
            let mut worst = 0.0f64;
            let mut worst_case = Value::Null;
            for t in 0..cfg.trials {
                let psi = match t {
                    0 => crate::framework::tensor_state(&q.sample_pure_state(&mut r), &q.sample_pure_state(&mut r)).unwrap(),
                    1 => StateVec::new(qab.system().clone(), choi::canonical_phi(q).state.coords).unwrap(),
                    _ => qab.sample_pure_state(&mut r),
                };
                let a = q.coords_unchecked(&linalg::projector(&haar_ket(&mut r, d)));
                let a = EffectVec::new(q.system().clone(), a).unwrap();
                let cond = partial_pair_first(&a, &psi, q.system()).unwrap();
                if cond.weight <= 1e-12 {
                    continue;
                }
                let ev = q.spectrum(&cond.coords);
                let res = ev[1].abs() / cond.weight;
                if res > worst {
                    worst = res;
                    worst_case = json!({"trial": t, "conditional": cond.coords, "weight": cond.weight});
                }
            }
            b.verdict(worst, json!({"worst": worst_case}), "second eigenvalue of the normalised conditional state")
        }
        Model::Classical(m) => {
            let d = m.d();
            let mut worst = 0.0f64;
            for i in 0..d {
                for j in 0..d {
                    let psi = crate::framework::tensor_state(&m.vertex(i), &m.vertex(j)).unwrap();
                    for k in 0..d {
                        let cond = partial_pair_first(&m.indicator(&[k]), &psi, m.system()).unwrap();
                        if cond.weight > 0.5 && m.vertex_index(&cond, 1e-12).is_none() {
                            worst = worst.max(1.0);
                        }
                    }
                }
            }
            b.verdict(worst, json!({"pure_bipartite_states": d * d}), "every pure bipartite state is a product of vertices")
        }
        Model::Custom(_) => b.finish(
            Status::Partial,
            f64::NAN,
            Value::Null,
            "pure bipartite states of custom composites are not enumerated",
        ),
    }
}

// ---------------------------------------------------------------------------
// Purification
// ---------------------------------------------------------------------------

/// Existence and uniqueness of purifications with purifying dimension `d_b`.
pub fn check_purification(model: &Model, rho: &StateVec, d_b: usize, cfg: &CheckConfig) -> Result<CheckReport> {
    let d_a = model.system().d;
    if d_b < d_a {
        return Err(GptError::Precondition(format!(
            "purifying dimension {d_b} is below {d_a}"
        )));
    }
    let b = Builder::new("purification", cfg);
    let mut r = linalg::rng(cfg.seed);
    match model {
        Model::Quantum(q) => {
            let psi = purify(model, rho, d_b)?;
            let qb = QuantumModel::new(d_b);
            let v = qb.unitary_channel(&haar_unitary(&mut r, d_b));
            let moved = apply(&crate::framework::extend_left(q.system(), &v)?, &psi.state)?;
            let psi2 = PurifiedState {
                state: moved,
                ..psi.clone()
            };
            let conn = connecting_reversible(&psi, &psi2)?;
            let marg = psi.marginal_residual()?.max(psi.marginal_a.distance(rho));
            let worst = marg.max(psi.purity_residual.abs()).max(conn.residual);
            Ok(b.verdict(
                worst,
                json!({
                    "marginal_residual": marg,
                    "purity_residual": psi.purity_residual,
                    "connection_residual": conn.residual,
                }),
                "",
            ))
        }
        Model::Classical(m) => {
            if m.vertex_index(rho, 1e-9).is_some() {
                let psi = purify(model, rho, d_b)?;
                let res = psi.marginal_residual()?.max(psi.marginal_a.distance(rho));
                return Ok(b.verdict(res, json!({"product": true}), "pure states purify as products"));
            }
            // every pure state of the composite simplex is a vertex pair
            let cb = ClassicalModel::new(d_b);
            let mut closest = f64::INFINITY;
            for i in 0..m.d() {
                for j in 0..d_b {
                    let psi = crate::framework::tensor_state(&m.vertex(i), &cb.vertex(j))?;
                    let marg = marginal_first(&psi, m.system(), cb.system())?;
                    closest = closest.min(marg.distance(rho));
                }
            }
            Ok(b.finish(
                Status::FailsPostulate,
                closest,
                json!({
                    "pure_bipartite_states_scanned": m.d() * d_b,
                    "closest_marginal_distance": closest,
                    "state": rho.coords,
                }),
                "no classical pure bipartite state has a mixed marginal",
            ))
        }
        Model::Custom(_) => Ok(b.finish(
            Status::Partial,
            f64::NAN,
            Value::Null,
            "purifications are not searched for in custom models",
        )),
    }
}

pub fn check_purification_sampled(model: &Model, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("purification", cfg);
    let d = model.system().d;
    if let Model::Custom(_) = model {
        return check_purification(model, &model.invariant_state(), d, cfg).expect("d_b = d_a");
    }
    let mut r = linalg::rng(cfg.seed);
    let mut worst = 0.0f64;
    for t in 0..cfg.trials {
        let rho = if t == 0 { model.invariant_state() } else { sample_state(model, &mut r, t) };
        let inner = CheckConfig { seed: cfg.seed.wrapping_add(t as u64), ..*cfg };
        let rep = check_purification(model, &rho, d, &inner).expect("d_b = d_a");
        if !rep.passed {
            return b.finish(rep.status, rep.max_residual, rep.witness, rep.notes);
        }
        worst = worst.max(rep.max_residual);
    }
    b.verdict(worst, json!({"states": cfg.trials, "purifying_dimension": d}), "")
}

// ---------------------------------------------------------------------------
// Derived results
// ---------------------------------------------------------------------------

fn identity_proportionality(m: &RMat) -> f64 {
    let n = m.nrows();
    let k = m.trace() / n as f64;
    linalg::max_abs_real(&(m - RMat::identity(n, n) * k))
}

/// Instruments summing to the identity have branches proportional to the
/// identity; measure-and-prepare instruments disturb.
pub fn check_no_info_without_disturbance(model: &Model, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("no_info_without_disturbance", cfg);
    let Model::Quantum(q) = model else {
        return b.finish(Status::Partial, f64::NAN, Value::Null, "requires a quantum model");
    };
    let d = q.d();
    let mut r = linalg::rng(cfg.seed);
    let mut worst = 0.0f64;
    let mut min_disturbance = f64::INFINITY;
    let id = CMat::identity(d, d);
    for t in 0..cfg.trials {
        let n = 2 + t % 3;
        // Kraus decompositions of the identity channel: K_i = w_i I, |w| = 1
        let w = haar_ket(&mut r, n);
        let branches: Vec<_> = (0..n).map(|i| q.kraus_map(q, &[&id * w[i]])).collect();
        let total = branches.iter().fold(RMat::zeros(d * d, d * d), |acc, br| acc + &br.matrix);
        worst = worst.max(linalg::max_abs_real(&(total - RMat::identity(d * d, d * d))));
        for br in &branches {
            worst = worst.max(identity_proportionality(&br.matrix));
        }
        // a projective measure-and-prepare instrument in a random basis
        let u = haar_unitary(&mut r, d);
        let mp: Vec<_> = (0..d)
            .map(|i| {
                let p = linalg::projector(&u.column(i).into_owned());
                q.kraus_map(q, &[p])
            })
            .collect();
        let mp_total = mp.iter().fold(RMat::zeros(d * d, d * d), |acc, br| acc + &br.matrix);
        let probe = q.state_from_ket(&haar_ket(&mut r, d));
        let disturbed = crate::framework::apply(
            &crate::framework::TransMat::new(q.system().clone(), q.system().clone(), mp_total).unwrap(),
            &probe,
        )
        .unwrap();
        min_disturbance = min_disturbance.min(disturbed.distance(&probe));
    }
    let disturbs = min_disturbance > 1e-6;
    let witness = json!({"min_disturbance": min_disturbance, "proportionality_residual": worst});
    if !disturbs {
        return b.finish(Status::Fail, worst, witness, "a measure-and-prepare instrument failed to disturb");
    }
    b.verdict(worst, witness, "")
}

/// Composing two single-Kraus maps yields a single-Kraus map.
pub fn check_atomicity_of_composition(model: &Model, cfg: &CheckConfig) -> CheckReport {
    let b = Builder::new("atomicity_of_composition", cfg);
    let Model::Quantum(q) = model else {
        return b.finish(Status::Partial, f64::NAN, Value::Null, "requires a quantum model");
    };
    let d = q.d();
    let mut r = linalg::rng(cfg.seed);
    let mut worst = 0.0f64;
    let contraction = |r: &mut Rng| -> CMat {
        let g = CMat::from_fn(d, d, |_, _| linalg::complex_gaussian(r));
        let s = linalg::singular_values(&g)[0];
        g / c(s, 0.0)
    };
    for t in 0..cfg.trials {
        let (k1, k2) = if t % 2 == 0 {
            (haar_unitary(&mut r, d), haar_unitary(&mut r, d))
        } else {
            (contraction(&mut r), contraction(&mut r))
        };
        let comp = crate::framework::compose(&q.kraus_map(q, &[k2]), &q.kraus_map(q, &[k1])).unwrap();
        let ev = linalg::eigvalsh(&choi::choi_of(&comp).unwrap().matrix().unwrap());
        worst = worst.max(ev[1].abs() / ev[0]);
    }
    // a rank-two map composed with a unitary must not look atomic
    let two = random_kraus(&mut r, d, d, 2);
    let mixed = crate::framework::compose(&q.unitary_channel(&haar_unitary(&mut r, d)), &q.kraus_map(q, &two)).unwrap();
    let ev = linalg::eigvalsh(&choi::choi_of(&mixed).unwrap().matrix().unwrap());
    let control = ev[1] / ev[0];
    let witness = json!({"control_second_eigenvalue_ratio": control});
    if control <= 1e-6 {
        return b.finish(Status::Fail, worst, witness, "rank-two control map looked atomic");
    }
    b.verdict(worst, witness, "second Choi eigenvalue relative to the first")
}

/// The six axiom and postulate checks, plus the two derived checks for
/// quantum models.
pub fn run_axiom_suite(model: &Model, cfg: &CheckConfig) -> Vec<CheckReport> {
    let mut out = vec![
        check_causality(model, cfg),
        check_distinguishability_sampled(model, cfg),
        check_compression_sampled(model, cfg),
        check_local_tomography(model, model, cfg),
        check_pure_conditioning(model, cfg),
        check_purification_sampled(model, cfg),
    ];
    if let Model::Quantum(_) = model {
        out.push(check_no_info_without_disturbance(model, cfg));
        out.push(check_atomicity_of_composition(model, cfg));
    }
    out
}
