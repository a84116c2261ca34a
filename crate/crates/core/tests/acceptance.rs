//! Acceptance suite: twelve numerical criteria at their stated tolerances.
//! Prints one `[PASS]`/`[FAIL]` line per criterion and exits nonzero if any
//! fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use gpt_kit::axioms::{run_axiom_suite, CheckConfig, Status};
use gpt_kit::choi::{
    choi_of, connecting_reversible, inversion_map, link_product, min_choi_eigenvalue, purify,
    teleport_kit, PurifiedState,
};
use gpt_kit::framework::{
    apply, compose, extend_left, mix, operational_norm_effect, operational_norm_state, pair,
};
use gpt_kit::linalg::{
    self, complex_gaussian, eigvalsh, haar_ket, haar_unitary, max_abs, max_abs_diff, max_abs_real,
    random_density, random_kraus, random_probabilities, real_rank, CMat, RMat, Rng,
};
use gpt_kit::models::{ClassicalModel, Model, QuantumModel, TheoryModel};
use gpt_kit::reconstruct::{cocycle_residual, represent, run_pipeline, Pipeline};
use gpt_kit::structure::{
    computational_face, dual_effect, effect_of, informational_dimension, maximal_set, projection,
    quantum_face, spectral_decompose, superposition_state, superposition_with_phases,
};

type Outcome = Result<(bool, String), String>;

fn q(d: usize) -> Model {
    Model::Quantum(QuantumModel::new(d))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst_p = 0.0f64;
    let mut worst_w = 0.0f64;
    for d in 2..=4 {
        let kit = teleport_kit(d).map_err(err)?;
        worst_p = worst_p.max((kit.p - 1.0 / (d * d) as f64).abs());
        worst_w = worst_w.max(kit.wiring_residual);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst_p < 1e-9 && worst_w < 1e-8 && secs < 1.0,
        format!("teleportation p = 1/d² (|Δp| = {worst_p:.1e}, wiring {worst_w:.1e}, {secs:.3} s)"),
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut rng = linalg::rng(2);
    for d in 2..=5 {
        let model = q(d);
        let dim = informational_dimension(&model).map_err(err)?;
        // state-span dimension from the rank of sampled states
        let samples: Vec<Vec<f64>> = (0..d * d + 4)
            .map(|_| model.sample_pure_state(&mut rng).coords)
            .collect();
        let span = real_rank(
            &RMat::from_fn(d * d, samples.len(), |i, j| samples[j][i]),
            1e-9,
        );
        ok &= dim == d && span == d * d && model.system().dim == d * d;
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((ok && secs < 1.0, format!("D = d² for quantum d = 2..5 ({secs:.3} s)")))
}

fn criterion_3() -> Outcome {
    let mut worst = 0.0f64;
    let mut norm_gap = 0.0f64;
    for d in 2..=4 {
        let model = q(d);
        let chi = model.invariant_state();
        let mut rng = linalg::rng(3 + d as u64);
        for _ in 0..100 {
            let phi = model.sample_pure_state(&mut rng);
            let a = dual_effect(&model, &phi).map_err(err)?;
            norm_gap = norm_gap.max((operational_norm_effect(&model, &a.coords).map_err(err)? - 1.0).abs());
            worst = worst.max((pair(&a, &chi).map_err(err)? - 1.0 / d as f64).abs());
        }
    }
    Ok((
        worst < 1e-12 && norm_gap < 1e-12,
        format!("atomic unit-norm effects pair with χ to 1/d (max err {worst:.1e})"),
    ))
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    for d in 2..=4 {
        let model = q(d);
        let chi = model.invariant_state();
        let mut rng = linalg::rng(40 + d as u64);
        for _ in 0..50 {
            let phi = model.sample_pure_state(&mut rng);
            let delta: Vec<f64> = chi.coords.iter().zip(&phi.coords).map(|(a, b)| a - b).collect();
            let n = operational_norm_state(&model, &delta).map_err(err)?;
            worst = worst.max((n - 2.0 * (d as f64 - 1.0) / d as f64).abs());
        }
    }
    Ok((worst < 1e-10, format!("‖χ − φ‖ = 2(d−1)/d (max err {worst:.1e})")))
}

fn criterion_5() -> Outcome {
    let (mut recon, mut delta, mut probs) = (0.0f64, 0.0f64, 0.0f64);
    for d in 2..=4 {
        let model = q(d);
        let qm = model.as_quantum().unwrap();
        let mut rng = linalg::rng(50 + d as u64);
        for t in 0..200 {
            let rho = qm.sample_mixed_state(&mut rng, 1 + t % d);
            let dec = spectral_decompose(&model, &rho).map_err(err)?;
            recon = recon.max(dec.reconstruct().distance(&rho));
            delta = delta.max(dec.pures.delta_residual());
            probs = probs.max((dec.probs.iter().sum::<f64>() - 1.0).abs());
        }
    }
    Ok((
        recon < 1e-10 && delta < 1e-9 && probs < 1e-10,
        format!("spectral reconstruction (residual {recon:.1e}, δ_ij {delta:.1e})"),
    ))
}

/// Largest-eigenvalue deficit of the trace-normalised Choi matrix: zero iff
/// the Choi matrix has rank one.
fn purity_deficit(m: &CMat) -> f64 {
    let ev = eigvalsh(m);
    let tr: f64 = ev.iter().sum();
    1.0 - ev[0] / tr
}

fn criterion_6() -> Outcome {
    let mut link = 0.0f64;
    let mut atomic_ok = true;
    for d in 2..=3 {
        let qm = QuantumModel::new(d);
        let mut rng = linalg::rng(60 + d as u64);
        for t in 0..100 {
            let c = qm.kraus_map(&qm, &random_kraus(&mut rng, d, d, 1 + t % 3));
            let dd = qm.kraus_map(&qm, &random_kraus(&mut rng, d, d, 1 + (t + 1) % 4));
            let lp = link_product(&choi_of(&dd).map_err(err)?, &choi_of(&c).map_err(err)?).map_err(err)?;
            let direct = choi_of(&compose(&dd, &c).map_err(err)?).map_err(err)?;
            link = link.max(max_abs_diff(&lp.state.coords, &direct.state.coords));
        }
        for _ in 0..100 {
            // single Kraus operator: a generic contraction
            let mut k = CMat::from_fn(d, d, |_, _| complex_gaussian(&mut rng));
            let s = linalg::singular_values(&k)[0];
            k /= linalg::c(s, 0.0);
            let t = qm.kraus_map(&qm, &[k]);
            let choi = choi_of(&t).map_err(err)?;
            atomic_ok &= choi.rank(1e-9).map_err(err)? == 1
                && purity_deficit(&choi.matrix().map_err(err)?) < 1e-9;

            // several Kraus operators: refinable into the single-operator parts
            let ks = random_kraus(&mut rng, d, d, 2 + d % 2);
            let t = qm.kraus_map(&qm, &ks);
            let part = qm.kraus_map(&qm, &ks[..1]);
            let m_full = choi_of(&t).map_err(err)?.matrix().map_err(err)?;
            let m_part = choi_of(&part).map_err(err)?.matrix().map_err(err)?;
            // a refinement not proportional to the whole map
            let ratio = linalg::trace(&m_part).re / linalg::trace(&m_full).re;
            let proportional = max_abs(&(&m_part - &m_full * linalg::c(ratio, 0.0))) < 1e-9;
            atomic_ok &= choi_of(&t).map_err(err)?.rank(1e-9).map_err(err)? > 1
                && purity_deficit(&m_full) > 1e-6
                && !proportional;
        }
    }
    Ok((
        link < 1e-9 && atomic_ok,
        format!("link product = Choi of composition (residual {link:.1e}); atomic ⇔ rank one"),
    ))
}

fn subsets(d: usize) -> Vec<Vec<usize>> {
    (0..1usize << d)
        .map(|mask| (0..d).filter(|i| mask >> i & 1 == 1).collect())
        .collect()
}

fn criterion_7() -> Outcome {
    let model = q(4);
    let qm = model.as_quantum().unwrap();
    let mut algebra = 0.0f64;
    let all = subsets(4);
    let projs = all
        .iter()
        .map(|s| projection(&model, &computational_face(&model, s).map_err(err)?).map_err(err))
        .collect::<Result<Vec<_>, _>>()?;
    for (i, v) in all.iter().enumerate() {
        for (j, w) in all.iter().enumerate() {
            let inter: Vec<usize> = v.iter().copied().filter(|x| w.contains(x)).collect();
            let k = all.iter().position(|s| *s == inter).unwrap();
            let prod = compose(&projs[i], &projs[j]).map_err(err)?;
            algebra = algebra.max(max_abs_real(&(&prod.matrix - &projs[k].matrix)));
        }
    }
    let mut rng: Rng = linalg::rng(7);
    let (mut idem, mut effect) = (0.0f64, 0.0f64);
    for t in 0..100 {
        let u = haar_unitary(&mut rng, 4);
        let face = quantum_face(qm, &u.columns(0, 1 + t % 3).into_owned()).map_err(err)?;
        let p = projection(&model, &face).map_err(err)?;
        let pp = compose(&p, &p).map_err(err)?;
        idem = idem.max(max_abs_real(&(&pp.matrix - &p.matrix)));
        let a_f = effect_of(&model, &face).map_err(err)?;
        effect = effect.max(max_abs_diff(&p.output_effect().coords, &a_f.coords));
    }
    Ok((
        algebra < 1e-12 && idem < 1e-12 && effect < 1e-12,
        format!("Π_V Π_W = Π_(V∩W) on 256 pairs ({algebra:.1e}); idempotence {idem:.1e}; e∘Π_F = a_F {effect:.1e}"),
    ))
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    let mut action = 0.0f64;
    let mut reversible = true;
    for d in 2..=3 {
        let model = q(d);
        let qm = model.as_quantum().unwrap();
        let mut rng = linalg::rng(80 + d as u64);
        for t in 0..100 {
            let rho = qm.sample_mixed_state(&mut rng, 1 + t % d);
            let psi = purify(&model, &rho, d).map_err(err)?;
            let v = qm.unitary_channel(&haar_unitary(&mut rng, d));
            let planted = apply(&extend_left(model.system(), &v).map_err(err)?, &psi.state).map_err(err)?;
            let psi2 = PurifiedState {
                state: planted,
                ..psi.clone()
            };
            let conn = connecting_reversible(&psi, &psi2).map_err(err)?;
            reversible &= conn.reversible;
            worst = worst.max(conn.residual);
            // independent check of the action on the joint state
            let lifted = extend_left(model.system(), &conn.map).map_err(err)?;
            action = action.max(apply(&lifted, &psi.state).map_err(err)?.distance(&psi2.state));
        }
    }
    Ok((
        reversible && worst < 1e-8 && action < 1e-8,
        format!("planted reversibles recovered (residual {worst:.1e}, action {action:.1e})"),
    ))
}

fn cli_exit(args: &[&str]) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_gpt-kit"))
        .args(args)
        .output()
        .ok()
        .and_then(|o| o.status.code())
}

fn criterion_9() -> Outcome {
    let cfg = CheckConfig::default();
    let mut ok = true;
    for d in 2..=3 {
        ok &= run_axiom_suite(&q(d), &cfg).iter().all(|r| r.status == Status::Pass);
        let desc = format!(r#"{{"type":"quantum","d":{d}}}"#);
        ok &= cli_exit(&["check-axioms", "--model", &desc, "--out", "/dev/null"]) == Some(0);
    }
    for d in 2..=5 {
        let model = Model::Classical(ClassicalModel::new(d));
        for r in run_axiom_suite(&model, &cfg) {
            let want = if r.check_name == "purification" { Status::FailsPostulate } else { Status::Pass };
            ok &= r.status == want;
        }
        let desc = format!(r#"{{"type":"classical","d":{d}}}"#);
        ok &= cli_exit(&["check-axioms", "--model", &desc, "--out", "/dev/null"]) == Some(0);
    }
    Ok((ok, "quantum passes all checks; classical fails only purification; CLI exits 0".into()))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let cfg = CheckConfig {
        trials: 50,
        ..CheckConfig::default()
    };
    let mut notes = Vec::new();
    let mut ok = true;
    for d in 2..=4 {
        let p: Pipeline = run_pipeline(d, &cfg).map_err(err)?;
        ok &= p.passed();
        if d == 2 {
            let s_t = p.fix.two_qubit.as_ref().map_or(f64::INFINITY, |t| t.standard_vs_tensor);
            ok &= s_t < 1e-9;
            notes.push(format!("|S−T| {s_t:.1e}"));
        }
        // pure states: PSD rank one with cocycle phases
        let model = q(d);
        let qm = model.as_quantum().unwrap();
        let mut rng = linalg::rng(100 + d as u64);
        let (mut second, mut neg, mut cocycle) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..100 {
            let s = represent(&qm.state_from_ket(&haar_ket(&mut rng, d)), &p.fix.rep).map_err(err)?;
            let ev = eigvalsh(&s);
            second = second.max(ev[1].abs());
            neg = neg.max(-ev[d - 1]);
            cocycle = cocycle.max(cocycle_residual(&s));
        }
        ok &= second < 1e-9 && neg < 1e-9 && cocycle < 1e-9;
        // completeness: 50 targets, recomputed independently of the report
        let mut reach = 0.0f64;
        for t in 0..50 {
            let target = random_density(&mut rng, d, 1 + t % d);
            let (state, _) = gpt_kit::reconstruct::reach_target(&p.fix.rep, &target).map_err(err)?;
            reach = reach.max(max_abs(&(represent(&state, &p.fix.rep).map_err(err)? - &target)));
        }
        ok &= reach < 1e-9;
        notes.push(format!("d={d}: λ₂ {second:.1e}, cocycle {cocycle:.1e}, reach {reach:.1e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 30.0;
    Ok((ok, format!("reconstruction ({}; {secs:.2} s)", notes.join("; "))))
}

fn criterion_11() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for d in 2..=4 {
        let m = min_choi_eigenvalue(&inversion_map(&QuantumModel::new(d))).map_err(err)?;
        worst = worst.max(m);
    }
    Ok((worst < -1e-6, format!("inversion map is not CP (min Choi eigenvalue ≤ {worst:.3e})")))
}

fn criterion_12() -> Outcome {
    let mut worst = 0.0f64;
    for d in 2..=4 {
        let model = q(d);
        let maxset = maximal_set(&model).map_err(err)?;
        let mut rng = linalg::rng(120 + d as u64);
        for _ in 0..100 {
            let p = random_probabilities(&mut rng, d);
            let phi = superposition_state(&model, &p, &maxset).map_err(err)?;
            for (a, pi) in maxset.effects.iter().zip(&p) {
                worst = worst.max((pair(a, &phi).map_err(err)? - pi).abs());
            }
        }
    }
    // the qubit solutions for p = (1/2, 1/2) form a circle
    let model = q(2);
    let maxset = maximal_set(&model).map_err(err)?;
    let half = [0.5, 0.5];
    let sols = (0..12)
        .map(|k| {
            let th = std::f64::consts::TAU * k as f64 / 12.0;
            superposition_with_phases(&model, &half, &[0.0, th], &maxset).map_err(err)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut circle_ok = true;
    for (i, s) in sols.iter().enumerate() {
        circle_ok &= model.is_pure(s, 1e-9);
        for (a, pi) in maxset.effects.iter().zip(&half) {
            worst = worst.max((pair(a, s).map_err(err)? - pi).abs());
        }
        for t in &sols[..i] {
            circle_ok &= s.distance(t) > 1e-3;
        }
    }
    // the mixture of opposite solutions is not pure, so they are genuinely distinct
    let m = mix(&[(0.5, &sols[0]), (0.5, &sols[6])]).map_err(err)?;
    circle_ok &= !model.is_pure(&m, 1e-9);
    Ok((
        worst < 1e-10 && circle_ok,
        format!("superposition probabilities (max err {worst:.1e}); 12 distinct equatorial solutions"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(usize, fn() -> Outcome); 12] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    let mut failures = 0;
    for (n, f) in criteria {
        let (ok, msg) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        println!("[{}] criterion {n}: {msg}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    }
    println!("{} of 12 criteria passed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
