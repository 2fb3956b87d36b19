//! Constructing inputs that tell graphs apart.
//!
//! A constant exogenous input w is an indication vector for a family of
//! graphs when every two distinct members produce distinct steady-state
//! outputs. Two constructions live here:
//!
//! * **Gaussian**: w = scale · z with z standard normal. Almost every draw
//!   works, and [`epsilon_bound`] quantifies how much separation a standard
//!   draw buys with what probability.
//! * **Radix**: for rational LTI models, w = (1, M, M², …, M^(n−1)) with M
//!   chosen from exact bounds on the steady-state maps — the output then
//!   carries every row of X_𝒢 in base-M digits, which is what makes exact
//!   reconstruction possible downstream.
//!
//! The quality measure is the separation index
//! ε(w) = min_{𝒢≠𝒨} ‖y_𝒢 − y_𝒨‖₂; half of it is the measurement error
//! budget detection can absorb.

use crate::exact::{rat_to_f64, Rat};
use crate::graph::{pair_count, FamilyFilter, Graph, GraphError, GraphFamily, DEFAULT_ENUMERATION_CAP};
use crate::models::{LtiNetworkModel, NetworkModel};
use crate::steady_state::{build_x, solve_nonlinear, NewtonOptions, SolveError};
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IndicationError {
    #[error(transparent)]
    Family(#[from] GraphError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("explicit family contains {0:?}, which is disconnected; an all-integrator model has no steady-state map for it")]
    DisconnectedMember(Graph),
    #[error("family has no members after enumeration")]
    EmptyFamily,
    #[error("scale must be positive, got {0}")]
    ScaleNotPositive(f64),
    #[error("radix base {m} does not exceed the required bound (2N+1)D = {bound}")]
    BaseTooSmall { m: BigInt, bound: BigInt },
    #[error("delta must be positive, got {0}")]
    DeltaNotPositive(f64),
}

/// How an indication vector came to be — enough to reproduce it exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Gaussian { seed: u64, scale: String },
    /// Radix construction: base m, numerator bound n_bound (N), common
    /// denominator d (D) of the family's steady-state map entries.
    Radix { m: BigInt, n_bound: BigInt, d: BigInt },
    /// Supplied by the user rather than designed here.
    Explicit,
}

#[derive(Clone, Debug)]
pub struct IndicationVector {
    pub w: Vec<f64>,
    /// Exact entries; always present for radix vectors.
    pub w_exact: Option<Vec<Rat>>,
    pub provenance: Provenance,
    /// Family the vector was designed against, if one was involved.
    pub family: Option<String>,
}

impl IndicationVector {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// Wrap a hand-chosen exact vector.
    pub fn from_exact(w: Vec<Rat>) -> IndicationVector {
        IndicationVector {
            w: w.iter().map(rat_to_f64).collect(),
            w_exact: Some(w),
            provenance: Provenance::Explicit,
            family: None,
        }
    }

    /// Wrap a hand-chosen f64 vector.
    pub fn from_f64(w: Vec<f64>) -> IndicationVector {
        IndicationVector { w, w_exact: None, provenance: Provenance::Explicit, family: None }
    }
}

/// Seeded Gaussian draw: w = scale · z, z ~ N(0, I).
///
/// The generator is ChaCha8 keyed by `seed`, so equal arguments give equal
/// vectors on every platform.
pub fn gaussian_w(n: usize, seed: u64, scale: f64) -> Result<IndicationVector, IndicationError> {
    if !(scale > 0.0) {
        return Err(IndicationError::ScaleNotPositive(scale));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scale * z
        })
        .collect();
    Ok(IndicationVector {
        w,
        w_exact: None,
        provenance: Provenance::Gaussian { seed, scale: crate::textio::fmt_f64(scale) },
        family: None,
    })
}

/// Enumerate the graphs a rational LTI model can actually realize.
///
/// For an all-integrator model only connected graphs have steady-state
/// maps, so enumerated families are restricted to their connected members;
/// an explicitly listed disconnected graph is an error rather than a silent
/// drop.
pub fn family_members_for_model(
    family: &GraphFamily,
    m: &LtiNetworkModel,
) -> Result<Vec<Graph>, IndicationError> {
    let members = family.members(DEFAULT_ENUMERATION_CAP)?;
    if !m.a_is_zero() {
        return Ok(members);
    }
    if let FamilyFilter::Explicit(_) = family.filter() {
        if let Some(bad) = members.iter().find(|g| !g.is_connected()) {
            return Err(IndicationError::DisconnectedMember(bad.clone()));
        }
        return Ok(members);
    }
    Ok(members.into_iter().filter(Graph::is_connected).collect())
}

/// Exact digit bounds for the radix construction: N is the largest
/// absolute numerator and D the least common denominator over every entry
/// of every steady-state map in the family (all in lowest terms).
pub fn radix_bounds(
    family: &GraphFamily,
    m: &LtiNetworkModel,
) -> Result<(BigInt, BigInt), IndicationError> {
    let members = family_members_for_model(family, m)?;
    if members.is_empty() {
        return Err(IndicationError::EmptyFamily);
    }
    let per_graph: Vec<(BigInt, BigInt)> = members
        .par_iter()
        .map(|g| {
            let map = build_x(g, m)?;
            let mut n_bound = BigInt::zero();
            let mut d = BigInt::one();
            for i in 0..m.n() {
                for j in 0..m.n() {
                    let e = &map.x()[(i, j)];
                    let num = e.numer().abs();
                    if num > n_bound {
                        n_bound = num;
                    }
                    d = d.lcm(e.denom());
                }
            }
            Ok((n_bound, d))
        })
        .collect::<Result<_, SolveError>>()?;
    let mut n_bound = BigInt::zero();
    let mut d = BigInt::one();
    for (gn, gd) in per_graph {
        if gn > n_bound {
            n_bound = gn;
        }
        d = d.lcm(&gd);
    }
    Ok((n_bound, d))
}

/// Smallest valid radix base for the family: (2N+1)·D + 1.
pub fn default_radix_base(n_bound: &BigInt, d: &BigInt) -> BigInt {
    (BigInt::from(2) * n_bound + 1) * d + 1
}

/// Radix indication vector w = (1, M, M², …, M^(n−1)) with the default
/// (smallest valid) base.
pub fn radix_w(
    family: &GraphFamily,
    m: &LtiNetworkModel,
) -> Result<IndicationVector, IndicationError> {
    let (n_bound, d) = radix_bounds(family, m)?;
    let base = default_radix_base(&n_bound, &d);
    radix_w_with_base(family, m, base)
}

/// Radix vector with a caller-chosen base, which must exceed (2N+1)·D.
pub fn radix_w_with_base(
    family: &GraphFamily,
    m: &LtiNetworkModel,
    base: BigInt,
) -> Result<IndicationVector, IndicationError> {
    let (n_bound, d) = radix_bounds(family, m)?;
    let bound = (BigInt::from(2) * &n_bound + 1) * &d;
    if base <= bound {
        return Err(IndicationError::BaseTooSmall { m: base, bound });
    }
    let n = m.n();
    let mut w_exact = Vec::with_capacity(n);
    let mut p = BigInt::one();
    for _ in 0..n {
        w_exact.push(Rat::from_integer(p.clone()));
        p *= &base;
    }
    Ok(IndicationVector {
        w: w_exact.iter().map(rat_to_f64).collect(),
        w_exact: Some(w_exact),
        provenance: Provenance::Radix { m: base, n_bound, d },
        family: Some(family.spec_string()),
    })
}

/// What a given w achieves on a family: the separation index
/// ε = min_{𝒢≠𝒨} ‖y_𝒢 − y_𝒨‖₂ and the pair attaining it.
#[derive(Clone, Debug)]
pub struct SeparationReport {
    pub epsilon: f64,
    /// ε² as an exact rational, present on the LTI path.
    pub eps_sq_exact: Option<Rat>,
    /// The closest pair; `None` when the family has fewer than two members
    /// (ε is then +∞ by convention — nothing to confuse).
    pub argmin: Option<(Graph, Graph)>,
    pub member_count: usize,
}

/// Exact separation index for a rational LTI model and rational w.
///
/// Steady states are y = −X_𝒢 w in exact arithmetic; ε² is an exact
/// rational minimum, and ε its square root rounded once to f64. In the
/// all-integrator regime every output lies in 𝟙⊥ (the maps annihilate the
/// consensus direction), so distances compare like with like even when w
/// itself is unbalanced.
pub fn separation_index_lti(
    w: &[Rat],
    family: &GraphFamily,
    m: &LtiNetworkModel,
) -> Result<SeparationReport, IndicationError> {
    let members = family_members_for_model(family, m)?;
    if members.is_empty() {
        return Err(IndicationError::EmptyFamily);
    }
    let outputs: Vec<Vec<Rat>> = members
        .par_iter()
        .map(|g| Ok(build_x(g, m)?.output_for(w)))
        .collect::<Result<_, SolveError>>()?;
    Ok(min_pairwise_exact(&members, &outputs))
}

/// Separation index for a general model: steady states from the Newton
/// solver, distances in f64.
pub fn separation_index_nonlinear(
    w: &[f64],
    family: &GraphFamily,
    m: &NetworkModel,
    opts: &NewtonOptions,
) -> Result<SeparationReport, IndicationError> {
    let members = if m.is_all_integrator() {
        let lti_like = family.members(DEFAULT_ENUMERATION_CAP)?;
        lti_like.into_iter().filter(Graph::is_connected).collect()
    } else {
        family.members(DEFAULT_ENUMERATION_CAP)?
    };
    if members.is_empty() {
        return Err(IndicationError::EmptyFamily);
    }
    let outputs: Vec<Vec<f64>> = members
        .par_iter()
        .map(|g| Ok(solve_nonlinear(g, m, w, opts)?.y))
        .collect::<Result<_, SolveError>>()?;
    Ok(min_pairwise_f64(&members, &outputs))
}

pub(crate) fn min_pairwise_exact(members: &[Graph], outputs: &[Vec<Rat>]) -> SeparationReport {
    let k = members.len();
    if k < 2 {
        return SeparationReport {
            epsilon: f64::INFINITY,
            eps_sq_exact: None,
            argmin: None,
            member_count: k,
        };
    }
    let pairs: Vec<(usize, usize)> =
        (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, j))).collect();
    let best = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d2: Rat = outputs[i]
                .iter()
                .zip(&outputs[j])
                .map(|(a, b)| {
                    let diff = a - b;
                    &diff * &diff
                })
                .sum();
            (d2, i, j)
        })
        .min_by(|a, b| a.0.cmp(&b.0))
        .expect("at least one pair");
    let (d2, i, j) = best;
    SeparationReport {
        epsilon: rat_to_f64(&d2).sqrt(),
        eps_sq_exact: Some(d2),
        argmin: Some((members[i].clone(), members[j].clone())),
        member_count: k,
    }
}

pub(crate) fn min_pairwise_f64(members: &[Graph], outputs: &[Vec<f64>]) -> SeparationReport {
    let k = members.len();
    if k < 2 {
        return SeparationReport {
            epsilon: f64::INFINITY,
            eps_sq_exact: None,
            argmin: None,
            member_count: k,
        };
    }
    let pairs: Vec<(usize, usize)> =
        (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, j))).collect();
    let best = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d2: f64 = outputs[i]
                .iter()
                .zip(&outputs[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (d2, i, j)
        })
        .min_by(|a, b| a.0.partial_cmp(&b.0).expect("distances are finite"))
        .expect("at least one pair");
    let (d2, i, j) = best;
    SeparationReport {
        epsilon: d2.sqrt(),
        eps_sq_exact: None,
        argmin: Some((members[i].clone(), members[j].clone())),
        member_count: k,
    }
}

/// The Gaussian guarantee, evaluated for a standard draw (scale 1).
#[derive(Clone, Copy, Debug)]
pub struct BoundReport {
    /// 1 − 2^(n²)·(2Φ(δ/2β) − 1), which is often negative (vacuous).
    pub raw: f64,
    /// The raw bound clamped to [0, 1] — a usable probability.
    pub clamped: f64,
    /// β = min aᵢ when A ≠ 0, else min b_ij / C(n,2).
    pub beta: f64,
}

/// Lower bound on P(ε(w) ≥ δ) for w a standard Gaussian draw.
///
/// 2Φ(x)−1 = erf(x/√2), so the bound is 1 − 2^(n²)·erf(δ/(2β√2)). The
/// 2^(n²) factor makes it vacuous except at tiny δ; both the raw value and
/// a clamped-to-[0,1] version are reported so that vacuousness stays
/// visible. A model mixing zero and positive rates gets β = 0 and a fully
/// vacuous bound.
pub fn epsilon_bound(delta: f64, m: &LtiNetworkModel) -> Result<BoundReport, IndicationError> {
    if !(delta > 0.0) {
        return Err(IndicationError::DeltaNotPositive(delta));
    }
    let n = m.n();
    let beta = if m.a_is_zero() {
        let min_b = m
            .b_pairs()
            .iter()
            .map(rat_to_f64)
            .fold(f64::INFINITY, f64::min);
        min_b / pair_count(n).max(1) as f64
    } else {
        m.a().iter().map(rat_to_f64).fold(f64::INFINITY, f64::min)
    };
    let tail = libm::erf(delta / (2.0 * beta * std::f64::consts::SQRT_2));
    let raw = 1.0 - ((n * n) as f64).exp2() * tail;
    Ok(BoundReport { raw, clamped: raw.clamp(0.0, 1.0), beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{norm_sq, rat};
    use crate::models::NetworkModel;
    use proptest::prelude::*;

    fn unit_lti(n: usize) -> LtiNetworkModel {
        LtiNetworkModel::uniform(n, rat(1, 1), rat(1, 1)).unwrap()
    }

    fn two_graph_family() -> GraphFamily {
        GraphFamily::explicit(vec![Graph::empty(2), Graph::path(2)]).unwrap()
    }

    #[test]
    fn gaussian_is_deterministic_and_linear_in_scale() {
        let a = gaussian_w(3, 42, 1.0).unwrap();
        let b = gaussian_w(3, 42, 1.0).unwrap();
        assert_eq!(a.w, b.w);
        let c = gaussian_w(3, 42, 10.0).unwrap();
        for (x, y) in a.w.iter().zip(&c.w) {
            assert_eq!(*y, 10.0 * x);
        }
        let other = gaussian_w(3, 43, 1.0).unwrap();
        assert_ne!(a.w, other.w);
        assert!(gaussian_w(3, 1, 0.0).is_err());
    }

    #[test]
    fn radix_bounds_two_graphs() {
        // X_empty = I has entries {0, 1}; X_edge = 1/3[[2,1],[1,2]] has
        // entries {2/3, 1/3}. Lowest terms: denominators {1, 3} → D = 3,
        // numerators {0, 1, 2} → N = 2, so M = (2·2+1)·3 + 1 = 16.
        let (n_bound, d) = radix_bounds(&two_graph_family(), &unit_lti(2)).unwrap();
        assert_eq!(n_bound, BigInt::from(2));
        assert_eq!(d, BigInt::from(3));
        assert_eq!(default_radix_base(&n_bound, &d), BigInt::from(16));

        let iv = radix_w(&two_graph_family(), &unit_lti(2)).unwrap();
        assert_eq!(
            iv.w_exact.as_ref().unwrap(),
            &vec![rat(1, 1), rat(16, 1)]
        );
        assert_eq!(iv.w, vec![1.0, 16.0]);
    }

    #[test]
    fn radix_bounds_single_agent() {
        let m = LtiNetworkModel::new(vec![rat(2, 1)], vec![]).unwrap();
        let fam = GraphFamily::explicit(vec![Graph::empty(1)]).unwrap();
        // X = (1/2): D = 2, N = 1.
        let (n_bound, d) = radix_bounds(&fam, &m).unwrap();
        assert_eq!((n_bound, d), (BigInt::from(1), BigInt::from(2)));
    }

    #[test]
    fn base_n1_d6_gives_19() {
        assert_eq!(
            default_radix_base(&BigInt::from(1), &BigInt::from(6)),
            BigInt::from(19)
        );
    }

    #[test]
    fn radix_base_override_checked() {
        let fam = two_graph_family();
        let m = unit_lti(2);
        assert!(matches!(
            radix_w_with_base(&fam, &m, BigInt::from(15)),
            Err(IndicationError::BaseTooSmall { .. })
        ));
        let iv = radix_w_with_base(&fam, &m, BigInt::from(100)).unwrap();
        assert_eq!(iv.w, vec![1.0, 100.0]);
    }

    /// Independent 3×3 inverses via the cofactor formula — no shared code
    /// with the elimination-based routines under test.
    fn inverse_3x3_cofactor(s: &[[Rat; 3]; 3]) -> [[Rat; 3]; 3] {
        let det = &s[0][0] * (&s[1][1] * &s[2][2] - &s[1][2] * &s[2][1])
            - &s[0][1] * (&s[1][0] * &s[2][2] - &s[1][2] * &s[2][0])
            + &s[0][2] * (&s[1][0] * &s[2][1] - &s[1][1] * &s[2][0]);
        let minor = |r0: usize, r1: usize, c0: usize, c1: usize| {
            &s[r0][c0] * &s[r1][c1] - &s[r0][c1] * &s[r1][c0]
        };
        let rows = [(1usize, 2usize), (0, 2), (0, 1)];
        let mut out = [
            [rat(0, 1), rat(0, 1), rat(0, 1)],
            [rat(0, 1), rat(0, 1), rat(0, 1)],
            [rat(0, 1), rat(0, 1), rat(0, 1)],
        ];
        for i in 0..3 {
            for j in 0..3 {
                let (r0, r1) = rows[j];
                let (c0, c1) = rows[i];
                let sign = if (i + j) % 2 == 0 { rat(1, 1) } else { rat(-1, 1) };
                out[i][j] = sign * minor(r0, r1, c0, c1) / &det;
            }
        }
        out
    }

    #[test]
    fn radix_bounds_n3_against_cofactor_oracle() {
        let m = unit_lti(3);
        let fam = GraphFamily::all(3);
        let (n_bound, d) = radix_bounds(&fam, &m).unwrap();

        let mut want_n = BigInt::zero();
        let mut want_d = BigInt::one();
        for g in fam.members(64).unwrap() {
            let mut s = [
                [rat(1, 1), rat(0, 1), rat(0, 1)],
                [rat(0, 1), rat(1, 1), rat(0, 1)],
                [rat(0, 1), rat(0, 1), rat(1, 1)],
            ];
            for &(i, j) in g.edges() {
                s[i][i] += rat(1, 1);
                s[j][j] += rat(1, 1);
                s[i][j] -= rat(1, 1);
                s[j][i] -= rat(1, 1);
            }
            let inv = inverse_3x3_cofactor(&s);
            for row in &inv {
                for e in row {
                    let num = e.numer().abs();
                    if num > want_n {
                        want_n = num;
                    }
                    want_d = want_d.lcm(e.denom());
                }
            }
        }
        assert_eq!((n_bound, d), (want_n, want_d));
    }

    #[test]
    fn all_integrator_family_restrictions() {
        let m0 = LtiNetworkModel::uniform(2, rat(0, 1), rat(1, 1)).unwrap();
        // Enumerated family: disconnected members silently excluded.
        let members = family_members_for_model(&GraphFamily::all(2), &m0).unwrap();
        assert_eq!(members, vec![Graph::path(2)]);
        // Explicit family: a disconnected member is the caller's mistake.
        assert!(matches!(
            family_members_for_model(&two_graph_family(), &m0),
            Err(IndicationError::DisconnectedMember(_))
        ));
    }

    #[test]
    fn separation_two_graphs_hand_oracle() {
        // y_empty = (−1, 1), y_edge = (−1/3, 1/3): ε = ‖diff‖ = 2√2/3.
        let report =
            separation_index_lti(&[rat(1, 1), rat(-1, 1)], &two_graph_family(), &unit_lti(2))
                .unwrap();
        assert_eq!(report.eps_sq_exact.as_ref().unwrap(), &rat(8, 9));
        assert!((report.epsilon - 2.0 * 2.0f64.sqrt() / 3.0).abs() < 1e-15);
        assert!((report.epsilon - 0.9428090415820634).abs() < 1e-15);
        let (g, h) = report.argmin.as_ref().unwrap();
        assert_ne!(g, h);
    }

    #[test]
    fn zero_input_separates_nothing() {
        let report = separation_index_lti(
            &[rat(0, 1), rat(0, 1)],
            &two_graph_family(),
            &unit_lti(2),
        )
        .unwrap();
        assert_eq!(report.epsilon, 0.0);
        assert!(report.eps_sq_exact.unwrap().is_zero());
    }

    #[test]
    fn singleton_family_is_infinitely_separated() {
        let fam = GraphFamily::explicit(vec![Graph::path(2)]).unwrap();
        let report =
            separation_index_lti(&[rat(1, 1), rat(0, 1)], &fam, &unit_lti(2)).unwrap();
        assert_eq!(report.epsilon, f64::INFINITY);
        assert!(report.argmin.is_none());
    }

    #[test]
    fn radix_separates_n3_family() {
        let m = unit_lti(3);
        let iv = radix_w(&GraphFamily::all(3), &m).unwrap();
        let report =
            separation_index_lti(iv.w_exact.as_ref().unwrap(), &GraphFamily::all(3), &m)
                .unwrap();
        assert_eq!(report.member_count, 8);
        assert!(report.epsilon > 0.0);
        assert!(!report.eps_sq_exact.unwrap().is_zero());
    }

    #[test]
    fn scaling_law_exact() {
        // ε(βw) = βε(w): on the exact path the rationals must be equal,
        // not merely close.
        let m = unit_lti(3);
        let fam = GraphFamily::all(3);
        let w = vec![rat(3, 7), rat(-2, 5), rat(1, 1)];
        let base = separation_index_lti(&w, &fam, &m).unwrap().eps_sq_exact.unwrap();
        for beta in [rat(1, 2), rat(2, 1), rat(10, 1)] {
            let scaled: Vec<Rat> = w.iter().map(|v| v * &beta).collect();
            let got = separation_index_lti(&scaled, &fam, &m).unwrap().eps_sq_exact.unwrap();
            assert_eq!(got, &base * (&beta * &beta));
        }
    }

    #[test]
    fn nonlinear_separation_neural_gaussian() {
        let m = NetworkModel::neural(&[0.6, 0.8, 1.0], 0.1).unwrap();
        let iv = gaussian_w(3, 7, 1.0).unwrap();
        let report = separation_index_nonlinear(
            &iv.w,
            &GraphFamily::all(3),
            &m,
            &NewtonOptions::default(),
        )
        .unwrap();
        assert_eq!(report.member_count, 8);
        assert!(report.epsilon > 1e-9, "epsilon = {}", report.epsilon);
    }

    #[test]
    fn bound_report_examples() {
        // A = I → β = 1; δ → 0⁺ → bound → 1.
        let m = unit_lti(2);
        let tiny = epsilon_bound(1e-300, &m).unwrap();
        assert!(tiny.beta == 1.0);
        assert!((tiny.raw - 1.0).abs() < 1e-12);

        // A = 0, b ≡ 1/10, n = 10 → β = (1/10)/45.
        let m0 = LtiNetworkModel::uniform(10, rat(0, 1), rat(1, 10)).unwrap();
        let b = epsilon_bound(0.1, &m0).unwrap();
        assert!((b.beta - 0.1 / 45.0).abs() < 1e-18);

        assert!(epsilon_bound(0.0, &m).is_err());
    }

    #[test]
    fn bound_monotonicity() {
        let m = unit_lti(2);
        let mut prev = f64::INFINITY;
        for k in 1..=40 {
            let delta = 0.05 * k as f64;
            let b = epsilon_bound(delta, &m).unwrap();
            assert!(b.raw <= prev + 1e-15, "bound increased at delta={delta}");
            assert!(b.clamped >= 0.0 && b.clamped <= 1.0);
            prev = b.raw;
        }
        // Nondecreasing in β: compare two models at fixed δ.
        let weak = LtiNetworkModel::uniform(2, rat(1, 4), rat(1, 1)).unwrap();
        let strong = LtiNetworkModel::uniform(2, rat(4, 1), rat(1, 1)).unwrap();
        let bw = epsilon_bound(0.3, &weak).unwrap();
        let bs = epsilon_bound(0.3, &strong).unwrap();
        assert!(bs.beta > bw.beta);
        assert!(bs.raw >= bw.raw);
    }

    #[test]
    fn monte_carlo_bound_smoke() {
        // Scaled-down version of the randomization guarantee: for the
        // two-agent family, empirical P(ε ≥ δ) must sit above the bound.
        let m = unit_lti(2);
        let fam = two_graph_family();
        let trials = 2000;
        let mut eps = Vec::with_capacity(trials);
        for seed in 0..trials as u64 {
            let iv = gaussian_w(2, seed, 1.0).unwrap();
            let w = [
                crate::exact::rat_from_f64(iv.w[0]).unwrap(),
                crate::exact::rat_from_f64(iv.w[1]).unwrap(),
            ];
            let r = separation_index_lti(&w, &fam, &m).unwrap();
            eps.push(r.epsilon);
        }
        for k in 1..=10 {
            let delta = 0.1 * k as f64;
            let bound = epsilon_bound(delta, &m).unwrap().raw;
            let empirical =
                eps.iter().filter(|&&e| e >= delta).count() as f64 / trials as f64;
            assert!(
                empirical >= bound - 1e-12,
                "delta={delta}: empirical {empirical} < bound {bound}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scaling_law_for_random_w(
            num in proptest::collection::vec(-20i64..20, 3),
            beta_num in 1i64..12,
        ) {
            let m = unit_lti(3);
            let fam = GraphFamily::all(3);
            let w: Vec<Rat> = num.iter().map(|&p| rat(p, 4)).collect();
            let beta = rat(beta_num, 3);
            let scaled: Vec<Rat> = w.iter().map(|v| v * &beta).collect();
            let e1 = separation_index_lti(&w, &fam, &m).unwrap().eps_sq_exact.unwrap();
            let e2 = separation_index_lti(&scaled, &fam, &m).unwrap().eps_sq_exact.unwrap();
            prop_assert_eq!(e2, &e1 * (&beta * &beta));
        }

        #[test]
        fn separation_is_a_true_minimum(seed in 0u64..500) {
            // Reported ε² never exceeds the distance of any sampled pair.
            let m = unit_lti(3);
            let fam = GraphFamily::all(3);
            let iv = gaussian_w(3, seed, 1.0).unwrap();
            let w: Vec<Rat> =
                iv.w.iter().map(|&v| crate::exact::rat_from_f64(v).unwrap()).collect();
            let report = separation_index_lti(&w, &fam, &m).unwrap();
            let eps_sq = report.eps_sq_exact.unwrap();
            let members = fam.members(64).unwrap();
            let outs: Vec<Vec<Rat>> = members
                .iter()
                .map(|g| build_x(g, &m).unwrap().output_for(&w))
                .collect();
            for i in 0..outs.len() {
                for j in (i + 1)..outs.len() {
                    let diff: Vec<Rat> = outs[i]
                        .iter()
                        .zip(&outs[j])
                        .map(|(a, b)| a - b)
                        .collect();
                    prop_assert!(norm_sq(&diff) >= eps_sq.clone());
                }
            }
        }
    }
}
