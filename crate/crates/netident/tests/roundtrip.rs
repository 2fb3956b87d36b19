//! End-to-end pipelines that cross every module boundary: design an input,
//! produce outputs (algebraically or by integrating the closed loop), and
//! run the decoder or detector on what comes back. Each test is a complete
//! story; none reaches into module internals.

use std::time::Instant;

use netident::detection::{
    build_table, detect, reconstruct_lti, reconstruct_lti_exact, table_from_text, table_to_text,
};
use netident::exact::{rat, Rat};
use netident::graph::{pair_count, Graph, GraphFamily, DEFAULT_ENUMERATION_CAP};
use netident::indication::{gaussian_w, radix_w};
use netident::models::{LtiNetworkModel, ModelSpec, NetworkModel};
use netident::simulation::{run_to_convergence, ConvergenceThresholds, StepControl};
use netident::steady_state::{build_x, solve_lti, solve_nonlinear, NewtonOptions};
use netident::textio::atomic_write;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_rat(rng: &mut ChaCha8Rng) -> Rat {
    rat(rng.gen_range(1..=9), rng.gen_range(1..=9))
}

fn random_b(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rat> {
    (0..pair_count(n)).map(|_| small_rat(rng)).collect()
}

/// All-integrator network (every aᵢ = 0): design a radix input against the
/// connected family, read the steady output straight off the exact map, and
/// decode it back. This is the path where the steady-state matrix is a
/// pseudoinverse and the decoder must re-center the measurement before
/// peeling digits; nothing about that is visible from the outside, which is
/// exactly the point.
#[test]
fn all_integrator_radix_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e);
    for n in [3usize, 4] {
        let m = LtiNetworkModel::new(vec![rat(0, 1); n], random_b(&mut rng, n)).unwrap();
        let fam = GraphFamily::connected(n);
        let iv = radix_w(&fam, &m).unwrap();
        let w = iv.w_exact.clone().unwrap();
        for g in fam.members(DEFAULT_ENUMERATION_CAP).unwrap() {
            let y = build_x(&g, &m).unwrap().output_for(&w);
            let rec = reconstruct_lti_exact(&y, &m, &iv).unwrap();
            assert_eq!(rec.graph, g, "n={n}: decoded the wrong graph");
            assert_eq!(rec.weights, m.weights_for(&g), "n={n} {g}: wrong weights");
        }
    }
}

/// The full physical loop: radix input, closed-loop integration from rest,
/// exact recovery from the *measured* terminal output. The converged state
/// carries f64 round-off (outputs here are of order 10⁷), so the decoder is
/// told to expect error well under the digit budget but far above exact.
#[test]
fn simulated_trajectory_decodes_exactly() {
    // Unit gains keep the digit grid coarse: every steady-state matrix in
    // the 8-graph family has denominator dividing 48, so the decode margin
    // is ~10⁻², while the simulation settles to ~10⁻⁸ of the true output.
    let m = LtiNetworkModel::new(vec![rat(1, 1); 3], vec![rat(1, 1); 3]).unwrap();
    let fam = GraphFamily::all(3);
    let iv = radix_w(&fam, &m).unwrap();

    let hidden = Graph::path(3);
    let net = m.to_network();
    let thr = ConvergenceThresholds {
        rate_tol: 1e-6,
        residual_tol: 1e-6,
        max_time: 200.0,
        cross_check: false,
        ..Default::default()
    };
    let v = run_to_convergence(&net, &hidden, &iv.w, &[0.0; 3], &thr, &StepControl::default())
        .unwrap();
    assert!(v.converged, "closed loop failed to settle under the radix input");

    let rec = reconstruct_lti(&v.y, &m, &iv, 1e-3).unwrap();
    assert_eq!(rec.graph, hidden);
    assert_eq!(rec.weights, vec![rat(1, 1); 2]);
}

/// A size-5 reconstruction with heterogeneous rational weights, bounds taken
/// for the single hidden graph. Kept as a wall-clock canary: the exact path
/// should stay comfortably in fractions of a second at this size.
#[test]
fn n5_singleton_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x55);
    let m = LtiNetworkModel::new(vec![rat(1, 1); 5], random_b(&mut rng, 5)).unwrap();
    let bits: String =
        (0..pair_count(5)).map(|_| if rng.gen_bool(0.5) { '1' } else { '0' }).collect();
    let hidden = Graph::from_key_bits(5, &bits).unwrap();
    let fam = GraphFamily::explicit(vec![hidden.clone()]).unwrap();

    let start = Instant::now();
    let iv = radix_w(&fam, &m).unwrap();
    let y = solve_lti(&hidden, &m, &iv.w_exact.clone().unwrap()).unwrap().y_exact.unwrap();
    let rec = reconstruct_lti_exact(&y, &m, &iv).unwrap();
    let elapsed = start.elapsed();

    assert_eq!(rec.graph, hidden);
    assert_eq!(rec.weights, m.weights_for(&hidden));
    assert_eq!(rec.decode_ops, 25, "expected one digit extraction per matrix entry");
    assert!(elapsed.as_secs_f64() < 20.0, "n=5 roundtrip took {elapsed:?}");
}

/// A lookup table written through the atomic writer and re-read must behave
/// identically, and a fingerprint mismatch on load must refuse rather than
/// detect against the wrong model.
#[test]
fn table_survives_disk_roundtrip() {
    let taus = [0.6, 0.85, 0.7];
    let m = NetworkModel::neural(&taus, 0.1).unwrap();
    let iv = gaussian_w(3, 0x7a, 1.0).unwrap();
    let table =
        build_table(&GraphFamily::all(3), &ModelSpec::Nonlinear(m.clone()), &iv, 1e-10).unwrap();

    let path = std::env::temp_dir().join(format!("netident-roundtrip-{}.table", std::process::id()));
    atomic_write(&path, &table_to_text(&table)).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();

    let reloaded = table_from_text(&text, Some(&table.model_fingerprint)).unwrap();
    assert_eq!(reloaded.entries.len(), table.entries.len());
    assert_eq!(reloaded.epsilon, table.epsilon, "separation index must survive the text format");

    // Same verdict from both copies on a freshly solved measurement.
    let hidden = Graph::new(3, &[(0, 2)]).unwrap();
    let y = solve_nonlinear(&hidden, &m, &iv.w, &NewtonOptions::default()).unwrap().y;
    let a = detect(&y, &table).unwrap();
    let b = detect(&y, &reloaded).unwrap();
    assert_eq!(a.graph, hidden);
    assert_eq!(b.graph, hidden);
    assert!(a.confident && b.confident);

    let err = table_from_text(&text, Some("not-the-same-model")).unwrap_err();
    assert!(
        err.to_string().contains("fingerprint"),
        "mismatch must name the fingerprint, got: {err}"
    );
}
