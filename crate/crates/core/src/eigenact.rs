//! Dynamics gadgets on a chosen eigenspace: the expanding pair, the
//! arithmetic-progression sequence, the line-escape sequence, and the
//! quantitative irrationality floor for characters restricted to an
//! eigenspace.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::conjugacy::ConjugacyData;
use crate::prec::{Cplx, Real};
use crate::unitlog::{
    fundamental_size, h0_norm, jarnik_nearest, FundamentalSize, LogLattice, LogVector,
    max_root_of_unity_order, UnitLogError,
};

#[derive(thiserror::Error, Debug, Clone, PartialEq, Eq)]
pub enum EigenActError {
    #[error("construction requires rank at least 2")]
    NotApplicable,
    #[error("eigenspace index out of range")]
    IndexOutOfRange,
    #[error("no candidate avoids the bad hyperplane at working precision")]
    NoRealityEscape,
    #[error("sequence length must be at least 2")]
    LengthTooSmall,
    #[error("pigeonhole step vanished at working precision")]
    DegenerateStep,
    #[error("pigeonhole range exceeds the compute budget")]
    PigeonholeBudget,
    #[error("zero linear form")]
    ZeroForm,
    #[error("zero character")]
    ZeroCharacter,
    #[error(transparent)]
    UnitLog(#[from] UnitLogError),
}

/// Per-place eigenvalue data of a group element: natural log of the
/// modulus and the argument in turns.
#[derive(Clone, Debug)]
pub struct EigenData {
    /// ln |zeta^j| for each infinite place j.
    pub ln_mod: Vec<Real>,
    /// Argument of zeta^j divided by 2 pi, normalized into [0, 1).
    pub turn: Vec<Real>,
}

impl EigenData {
    fn of(conj: &ConjugacyData, exponents: &[i64]) -> Self {
        let u = conj.phi_product(exponents);
        let places = conj.field.num_places();
        let mut ln_mod = Vec::with_capacity(places);
        let mut turn = Vec::with_capacity(places);
        for j in 0..places {
            let z = u.embed(j);
            ln_mod.push(z.abs().ln());
            turn.push(normalize_turn(&z.arg()));
        }
        EigenData { ln_mod, turn }
    }
}

fn normalize_turn(arg: &Real) -> Real {
    let p = arg.prec();
    let two_pi = Real::pi(p).mul2k(1);
    let t = arg / &two_pi;
    let f = &t - &t.floor();
    f
}

/// Case split of the expanding-pair construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CaseTag {
    /// No nonzero integer combination lies on the bad hyperplane.
    FreeOfHyperplane,
    /// Cyclic intersection with a long generator.
    CyclicLong,
    /// Cyclic intersection with a short generator, stretched.
    CyclicStretched,
}

/// Reported comparisons against the conservative closed-form bounds.
#[derive(Clone, Debug, Serialize)]
pub struct ExpanderReport {
    pub height_u: f64,
    pub height_u_bound: f64,
    pub log2_expansion: f64,
    pub log2_expansion_bound: f64,
    pub height_v: f64,
    pub height_v_bound: f64,
    pub log2_expansion_v: f64,
    pub log2_expansion_v_bound: f64,
}

/// An expanding pair on eigenspace `place`: u expands that eigenspace and
/// contracts every other one; v is multiplicatively independent with
/// controlled expansion. Exponent vectors are over the group generators.
#[derive(Clone, Debug)]
pub struct ExpandingPair {
    pub place: usize,
    pub weight: u8,
    pub u_exponents: Vec<i64>,
    pub v_exponents: Vec<i64>,
    pub case: CaseTag,
    pub fund: FundamentalSize,
    /// ln |zeta_u^place| (positive) and argument in turns.
    pub theta_u: Real,
    pub beta_u: Real,
    pub theta_v: Real,
    pub beta_v: Real,
    pub eigen_u: EigenData,
    pub eigen_v: EigenData,
    /// Hyperplane pair (k, l) used by the case analysis.
    pub hyperplane_pair: (usize, usize),
    pub report: ExpanderReport,
}

impl ExpandingPair {
    /// Eigenvalue of u^a v^b at an infinite place, from the stored logs.
    /// Exponents may be huge; underflowing moduli collapse to zero.
    pub fn eigen_of(&self, a: &BigInt, b: &BigInt, place: usize) -> Cplx {
        let p = self.theta_u.prec();
        let ea = Real::from_bigint(a, p);
        let eb = Real::from_bigint(b, p);
        let lm = &(&ea * &self.eigen_u.ln_mod[place]) + &(&eb * &self.eigen_v.ln_mod[place]);
        let lm64 = lm.to_f64();
        if lm64 < -(1 << 20) as f64 {
            return Cplx::zero(p);
        }
        assert!(lm64 < (1 << 20) as f64, "modulus overflow in eigenvalue evaluation");
        let modulus = lm.exp();
        let t = &(&ea * &self.eigen_u.turn[place]) + &(&eb * &self.eigen_v.turn[place]);
        let frac = &t - &t.floor();
        let ang = &frac * &Real::pi(p).mul2k(1);
        Cplx::new(&modulus * &ang.cos(), &modulus * &ang.sin())
    }
}

/// Construct the expanding pair for an eigenspace, following the
/// nearest-point recipe: solve near Z*a and Z*b, escape the bad hyperplane
/// among the shifted candidates, and split cases on the hyperplane
/// intersection of the spanned plane.
pub fn expander(
    conj: &ConjugacyData,
    place: usize,
    budget: usize,
) -> Result<ExpandingPair, EigenActError> {
    let f = &conj.field;
    let places = f.num_places();
    if place >= places {
        return Err(EigenActError::IndexOutOfRange);
    }
    let lattice = LogLattice::from_conjugacy(conj)?;
    let r = lattice.rank();
    if r < 2 {
        return Err(EigenActError::NotApplicable);
    }
    let fund = fundamental_size(&lattice, budget)?;
    let d = conj.dim();
    let p = conj.precision();
    let pw = 2 * p;
    let fval = fund.value.to_f64();
    let z_scale = 4.0 * d as f64 * (r as f64 / 2.0 + 1.0) * fval;
    let d_i = f.weight(place);

    let weights: Vec<u8> = (0..places).map(|j| f.weight(j) as u8).collect();
    // Direction a: expands `place`, contracts the rest, h0 = 1.
    let mut a_dir = LogVector::zero(places, weights.clone(), pw);
    for j in 0..places {
        let v = if j == place {
            1.0 / d_i as f64
        } else {
            -1.0 / (d - d_i) as f64
        };
        a_dir.coords[j] = Real::from_f64(v * z_scale, pw);
    }
    // Hyperplane pair (k, l): first pair of distinct places avoiding `place`.
    let mut pair = (usize::MAX, usize::MAX);
    for k in 0..places {
        for l in 0..places {
            if k != l && k != place && l != place {
                pair = (k, l);
                break;
            }
        }
        if pair.0 != usize::MAX {
            break;
        }
    }
    let (k_idx, l_idx) = pair;
    let mut b_dir = LogVector::zero(places, weights.clone(), pw);
    b_dir.coords[k_idx] = Real::from_f64(z_scale / f.weight(k_idx) as f64, pw);
    b_dir.coords[l_idx] = Real::from_f64(-z_scale / f.weight(l_idx) as f64, pw);

    let (a_star, _, _) = jarnik_nearest(&lattice, &a_dir, budget)?;
    let (b_star, _, _) = jarnik_nearest(&lattice, &b_dir, budget)?;

    // Candidate list for u: the nearest point and its witness shifts.
    let mut candidates = vec![a_star.clone()];
    for w in &fund.witnesses {
        let shifted: Vec<i64> = a_star.iter().zip(w).map(|(x, y)| x + y).collect();
        candidates.push(shifted);
    }

    let complex_place = d_i == 2;
    let m_max = max_root_of_unity_order(d * d);
    let tol = Real::pow2(-(p as i64) / 4, pw);
    let mut chosen: Option<Vec<i64>> = None;
    let mut failed: Vec<Vec<i64>> = Vec::new();
    for cand in &candidates {
        // Sign pattern: positive exactly at `place`.
        let lv = lattice.combine(cand);
        let sign_ok = (0..places).all(|j| {
            if j == place {
                lv.coords[j].is_positive()
            } else {
                lv.coords[j].is_negative()
            }
        });
        if !sign_ok {
            failed.push(cand.clone());
            continue;
        }
        if complex_place {
            // No power of the eigenvalue may be real: the self-conjugate
            // ratio must not be a root of unity.
            let u = conj.phi_product(cand);
            let z = u.embed(place);
            let ratio = z.div(&z.conj());
            let mut pwr = ratio.clone();
            let mut real_power = false;
            for _ in 1..=m_max {
                let dev_pos = &(&pwr.re - &Real::from_i64(1, pw)).abs() + &pwr.im.abs();
                let dev_neg = &(&pwr.re + &Real::from_i64(1, pw)).abs() + &pwr.im.abs();
                if dev_pos < tol || dev_neg < tol {
                    real_power = true;
                    break;
                }
                pwr = pwr.mul(&ratio);
            }
            if real_power {
                failed.push(cand.clone());
                continue;
            }
        }
        chosen = Some(cand.clone());
        break;
    }
    let u_expo = chosen.ok_or(EigenActError::NoRealityEscape)?;

    // Case analysis on the intersection of span(u, b*) with the hyperplane
    // w_k = w_l, by bounded search over small integer combinations.
    let u_log = lattice.combine(&u_expo);
    let b_log = lattice.combine(&b_star);
    let hyper_gap = |w: &LogVector| -> Real { (&w.coords[k_idx] - &w.coords[l_idx]).abs() };
    let mut generator: Option<(i64, i64)> = None;
    'outer: for radius in 1..=50i64 {
        for pq in ring(radius) {
            let (pp, qq) = pq;
            let comb = u_log.scale_i64(pp).add(&b_log.scale_i64(qq));
            if hyper_gap(&comb) < tol {
                generator = Some((pp, qq));
                break 'outer;
            }
        }
    }
    let (case, v_expo) = match generator {
        None => {
            // u + b* is independent of u.
            let v: Vec<i64> = u_expo.iter().zip(&b_star).map(|(x, y)| x + y).collect();
            (CaseTag::FreeOfHyperplane, v)
        }
        Some((pp, qq)) => {
            let mut gexp: Vec<i64> = u_expo
                .iter()
                .zip(&b_star)
                .map(|(x, y)| pp * x + qq * y)
                .collect();
            let mut glog = lattice.combine(&gexp);
            if glog.coords[place].is_negative() {
                gexp.iter_mut().for_each(|e| *e = -*e);
                glog = lattice.combine(&gexp);
            }
            let h = h0_norm(&glog).to_f64();
            if h >= z_scale {
                let v: Vec<i64> = u_expo.iter().zip(&b_star).map(|(x, y)| x + y).collect();
                (CaseTag::CyclicLong, v)
            } else {
                let n_stretch = (z_scale / h).ceil() as i64;
                let v: Vec<i64> = gexp.iter().map(|e| e * n_stretch).collect();
                (CaseTag::CyclicStretched, v)
            }
        }
    };

    // Multiplicative independence: exponent vectors independent over Z.
    let rows = vec![
        u_expo.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>(),
        v_expo.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>(),
    ];
    assert_eq!(crate::matrix::IMat::rank_of_rows(&rows), 2, "pair must be independent");

    let eigen_u = EigenData::of(conj, &u_expo);
    let eigen_v = EigenData::of(conj, &v_expo);
    let theta_u = eigen_u.ln_mod[place].clone();
    let theta_v = eigen_v.ln_mod[place].clone();
    assert!(theta_u.is_positive(), "u must expand the chosen eigenspace");
    assert!(theta_v.is_positive(), "v must expand the chosen eigenspace");
    for (j, lm) in eigen_u.ln_mod.iter().enumerate() {
        if j != place {
            assert!(lm.is_negative(), "u must contract place {j}");
        }
    }
    let beta_u = eigen_u.turn[place].clone();
    let beta_v = eigen_v.turn[place].clone();

    let ln2 = Real::ln2(pw);
    let h_u = h0_norm(&lattice.combine(&u_expo)).to_f64();
    let h_v = h0_norm(&lattice.combine(&v_expo)).to_f64();
    let factor = d as f64 * (r as f64 / 2.0 + 1.0) * fval;
    let report = ExpanderReport {
        height_u: h_u,
        height_u_bound: 9.0 * factor,
        log2_expansion: (&theta_u / &ln2).to_f64(),
        log2_expansion_bound: factor,
        height_v: h_v,
        height_v_bound: 9.0 * factor,
        log2_expansion_v: (&theta_v / &ln2).to_f64(),
        log2_expansion_v_bound: 0.25 * factor,
    };

    Ok(ExpandingPair {
        place,
        weight: d_i as u8,
        u_exponents: u_expo,
        v_exponents: v_expo,
        case,
        fund,
        theta_u,
        beta_u,
        theta_v,
        beta_v,
        eigen_u,
        eigen_v,
        hyperplane_pair: (k_idx, l_idx),
        report,
    })
}

fn ring(radius: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for p in -radius..=radius {
        for q in -radius..=radius {
            if p.abs().max(q.abs()) == radius && (p, q) != (0, 0) {
                out.push((p, q));
            }
        }
    }
    out
}

/// Output of the pigeonhole progression: s elements a_t = (u^n v^-m1)^t
/// whose eigenvalues on the chosen eigenspace track 1 + t*step.
#[derive(Clone, Debug)]
pub struct ProgressionData {
    pub s: u64,
    pub pigeonhole_range: BigInt,
    pub n: BigInt,
    pub m1: BigInt,
    pub m2: BigInt,
    /// Complex step (imaginary part zero on real eigenspaces).
    pub delta: Cplx,
    pub max_deviation: f64,
    pub step_bound_ok: bool,
    /// Reported transcendence-style floor s^(-c F^2) and whether the
    /// instance satisfies it (informational; conservative constants).
    pub reported_floor: f64,
    pub reported_floor_ok: bool,
}

impl ProgressionData {
    /// Exponents of a_t over (u, v).
    pub fn element(&self, t: u64) -> (BigInt, BigInt) {
        (&self.n * BigInt::from(t), -(&self.m1 * BigInt::from(t)))
    }
}

/// Find the smallest-supremum pigeonhole hit n <= P = s^8 for the pair
/// (gamma, beta_u - gamma beta_v) on the 2-torus. Exhaustive fixed-point
/// scan when P fits the budget; continued-fraction route otherwise (the
/// huge-P regime only arises for real eigenspaces in practice, where the
/// problem is one-dimensional).
pub fn arith_progression(
    pair: &ExpandingPair,
    s: u64,
    pigeonhole_budget: u128,
    step_exponent: f64,
) -> Result<ProgressionData, EigenActError> {
    if s < 2 {
        return Err(EigenActError::LengthTooSmall);
    }
    let pw = pair.theta_u.prec();
    let gamma = &pair.theta_u / &pair.theta_v;
    let coord2 = &pair.beta_u - &(&gamma * &pair.beta_v);
    let p_range = BigInt::from(s).pow(8);
    let thr = 2.0 / (s as f64).powi(4);

    let n = if let Some(p128) = p_range.to_u128() {
        if p128 <= pigeonhole_budget {
            BigInt::from(scan_torus_best(&gamma, &coord2, p128 as u64))
        } else {
            cf_hit(pair, &gamma, &p_range, thr)?
        }
    } else {
        cf_hit(pair, &gamma, &p_range, thr)?
    };

    // Nearest integers and the step.
    let nr = Real::from_bigint(&n, pw);
    let g_n = &gamma * &nr;
    let m1 = nearest_bigint(&g_n);
    let c2_n = &coord2 * &nr;
    let m2 = nearest_bigint(&c2_n);
    let omega1 = &g_n - &Real::from_bigint(&m1, pw);
    let omega2 = &c2_n - &Real::from_bigint(&m2, pw);
    // Postcondition of the pigeonhole: both remainders within 2/sqrt(P).
    assert!(
        omega1.abs().to_f64() <= thr * (1.0 + 1e-9) && omega2.abs().to_f64() <= thr * (1.0 + 1e-9),
        "pigeonhole hit must satisfy the threshold"
    );

    let two_pi = Real::pi(pw).mul2k(1);
    let re = &pair.theta_v * &omega1;
    let im = &two_pi * &(&(&pair.beta_v * &omega1) + &omega2);
    let delta = Cplx::new(re, im);
    let dabs = delta.abs();
    if dabs.to_f64() == 0.0 {
        return Err(EigenActError::DegenerateStep);
    }
    let step_bound_ok = dabs.to_f64() <= (s as f64).powi(-3);

    // Deviation check at working precision.
    let mut max_dev = 0f64;
    let one = Cplx::one(pw);
    for t in 0..s {
        let (ea, eb) = (&n * BigInt::from(t), -(&m1.clone() * BigInt::from(t)));
        let zeta = pair.eigen_of(&ea, &eb, pair.place);
        let tr = Real::from_i64(t as i64, pw);
        let lin = one.add(&Cplx::new(&delta.re * &tr, &delta.im * &tr));
        let dev = zeta.sub(&lin).abs().to_f64();
        max_dev = max_dev.max(dev);
    }
    let fv = pair.fund.value.to_f64();
    let reported_floor = (s as f64).powf(-step_exponent * fv * fv);
    Ok(ProgressionData {
        s,
        pigeonhole_range: p_range,
        n,
        m1,
        m2,
        delta,
        max_deviation: max_dev,
        step_bound_ok,
        reported_floor,
        reported_floor_ok: dabs.to_f64() >= reported_floor,
    })
}

fn nearest_bigint(x: &Real) -> BigInt {
    let half = Real::from_f64(0.5, x.prec());
    (x + &half).floor_bigint()
}

/// Exhaustive scan for the n minimizing the sup-distance of n*(c1, c2) to
/// the integer lattice, in 64-bit fixed point (wrapping adds are exact mod
/// 2^64). Ties break on the smaller n.
fn scan_torus_best(c1: &Real, c2: &Real, range: u64) -> u64 {
    let f1 = frac_fixed(c1);
    let f2 = frac_fixed(c2);
    let chunks: Vec<(u64, u64)> = {
        let step = 1u64 << 22;
        let mut v = Vec::new();
        let mut lo = 1u64;
        while lo <= range {
            let hi = (lo + step - 1).min(range);
            v.push((lo, hi));
            lo = hi + 1;
        }
        v
    };
    let best = chunks
        .par_iter()
        .map(|&(lo, hi)| {
            let mut acc1 = f1.wrapping_mul(lo);
            let mut acc2 = f2.wrapping_mul(lo);
            let mut best = (u64::MAX, 0u64);
            let mut n = lo;
            loop {
                let d1 = acc1.min(acc1.wrapping_neg());
                let d2 = acc2.min(acc2.wrapping_neg());
                let sup = d1.max(d2);
                if sup < best.0 {
                    best = (sup, n);
                }
                if n == hi {
                    break;
                }
                n += 1;
                acc1 = acc1.wrapping_add(f1);
                acc2 = acc2.wrapping_add(f2);
            }
            best
        })
        .reduce(|| (u64::MAX, 0u64), |a, b| if b < a { b } else { a });
    best.1
}

/// Fractional part scaled to 2^64, truncated.
fn frac_fixed(x: &Real) -> u64 {
    let f = &x.clone() - &x.floor();
    let scaled = f.mul2k(64);
    let b = scaled.floor_bigint();
    let modulus = BigInt::from(1u8) << 64;
    let r: BigInt = ((b % &modulus) + &modulus) % &modulus;
    let digits = r.to_u64_digits().1;
    digits.first().copied().unwrap_or(0)
}

/// Continued-fraction hit for huge ranges. Real eigenspaces have the
/// argument coordinates in {0, 1/2}; the hit reduces to a best rational
/// approximation of gamma with a parity constraint.
fn cf_hit(
    pair: &ExpandingPair,
    gamma: &Real,
    p_range: &BigInt,
    thr: f64,
) -> Result<BigInt, EigenActError> {
    let pw = gamma.prec();
    let half_dev = |x: &Real| -> f64 {
        let f = &x.clone() - &x.floor();
        (f.to_f64() - 0.5).abs()
    };
    let is_half_u = half_dev(&pair.beta_u) < 1e-20;
    let is_zero_u = pair.beta_u.to_f64() < 1e-20 || pair.beta_u.to_f64() > 1.0 - 1e-20;
    let is_half_v = half_dev(&pair.beta_v) < 1e-20;
    let is_zero_v = pair.beta_v.to_f64() < 1e-20 || pair.beta_v.to_f64() > 1.0 - 1e-20;
    if !(is_half_u || is_zero_u) || !(is_half_v || is_zero_v) {
        // Complex eigenspace with an infeasible exhaustive range.
        return Err(EigenActError::PigeonholeBudget);
    }
    // n = c*m with c in {1, 2}; the parity cases collapse as follows:
    //   beta_v = 0, beta_u = 0:   n = m, need |[n gamma]| small.
    //   beta_v = 0, beta_u = 1/2: n = 2m so the second coordinate cancels.
    //   beta_v = 1/2 (any beta_u in {0,1/2}): n = 2m makes the second
    //     coordinate congruent to -(m gamma), controlled by the same CF.
    let c: u32 = if is_zero_v && is_zero_u { 1 } else { 2 };
    let cap = p_range / BigInt::from(c);
    // Walk the convergents of gamma and stop at the first denominator whose
    // approximation already clears the threshold with margin (the smallest
    // adequate hit; ||2m gamma|| <= 2 ||m gamma|| covers the n = 2m cases).
    let mut x = gamma.clone();
    let mut p_prev = BigInt::from(1u8);
    let mut p_cur = x.floor_bigint();
    let mut q_prev = BigInt::zero();
    let mut q_cur = BigInt::from(1u8);
    let mut best_q = BigInt::from(1u8);
    for _ in 0..4 * pw {
        let f = &x - &x.floor();
        if f.to_f64().abs() < 2f64.powi(-(pw as i32) + 8) {
            break;
        }
        x = (&Real::from_i64(1, pw) / &f).round_to(pw);
        let a = x.floor_bigint();
        let p_next = &a * &p_cur + &p_prev;
        let q_next = &a * &q_cur + &q_prev;
        if q_next > cap {
            break;
        }
        p_prev = p_cur;
        p_cur = p_next;
        q_prev = q_cur;
        q_cur = q_next.clone();
        best_q = q_next.clone();
        // ||q_cur * gamma|| < 1 / q_next; adequate once 2c / q_next <= thr.
        let good = Real::from_bigint(&q_next, pw).to_f64() * thr >= 2.0 * c as f64;
        if good {
            break;
        }
    }
    let n = BigInt::from(c) * best_q;
    // Verify the hit satisfies the pigeonhole threshold.
    let nr = Real::from_bigint(&n, pw);
    let g_n = gamma * &nr;
    let dev1 = (&g_n - &Real::from_bigint(&nearest_bigint(&g_n), pw)).abs();
    if dev1.to_f64() > thr {
        return Err(EigenActError::PigeonholeBudget);
    }
    Ok(n)
}

/// The line-escape sequence b_k on a chosen eigenspace. On real
/// eigenspaces a single expanding element repeated l times suffices.
#[derive(Clone, Debug)]
pub struct EscapeSequence {
    pub l: u64,
    pub offset: i64,
    pub gamma: Real,
    /// Exponents of b_k over (u, v).
    pub elements: Vec<(i64, i64)>,
    /// Eigenvalues on the chosen eigenspace.
    pub eigen: Vec<Cplx>,
    /// Band report: min and max of log2 |zeta_(b_k)| and the reported cap.
    pub band_min_log2: f64,
    pub band_max_log2: f64,
    pub band_cap_log2: f64,
}

pub fn escape_sequence(
    pair: &ExpandingPair,
    l: u64,
    escape_factor: f64,
    band_factor: f64,
) -> Result<EscapeSequence, EigenActError> {
    if l < 2 {
        return Err(EigenActError::LengthTooSmall);
    }
    let pw = pair.theta_u.prec();
    let gamma = &pair.theta_u / &pair.theta_v;
    let fv = pair.fund.value.to_f64();
    let elements: Vec<(i64, i64)>;
    let offset: i64;
    if pair.weight == 1 {
        offset = 0;
        elements = (0..l).map(|_| (1i64, 0i64)).collect();
    } else {
        let j = (escape_factor * fv * fv * (l as f64).ln() / pair.theta_u.to_f64()).ceil() as i64;
        offset = j.max(1);
        elements = (1..=l as i64)
            .map(|k| {
                let gk = (&gamma * &Real::from_i64(k, pw)).ceil_i64();
                (k + offset, -gk)
            })
            .collect();
    }
    let mut eigen = Vec::with_capacity(l as usize);
    let mut band_min = f64::INFINITY;
    let mut band_max = f64::NEG_INFINITY;
    for (a, b) in &elements {
        let z = pair.eigen_of(&BigInt::from(*a), &BigInt::from(*b), pair.place);
        let l2 = z.abs().log2().to_f64();
        band_min = band_min.min(l2);
        band_max = band_max.max(l2);
        eigen.push(z);
    }
    assert!(band_min >= 0.0, "escape band must stay at modulus >= 1, got 2^{band_min}");
    let cap = band_factor * fv * fv * (l as f64).log2() + 64.0 / pair.theta_u.prec() as f64;
    Ok(EscapeSequence {
        l,
        offset,
        gamma,
        elements,
        eigen,
        band_min_log2: band_min,
        band_max_log2: band_max,
        band_cap_log2: cap,
    })
}

/// Real linear form on an eigenspace: scalar on real places, a pair of
/// coefficients for the real and imaginary parts on complex places.
#[derive(Clone, Copy, Debug)]
pub struct EigenForm {
    pub c_re: f64,
    pub c_im: f64,
}

impl EigenForm {
    pub fn norm(&self) -> f64 {
        (self.c_re * self.c_re + self.c_im * self.c_im).sqrt()
    }

    pub fn apply(&self, z: &num_complex::Complex64) -> f64 {
        self.c_re * z.re + self.c_im * z.im
    }
}

/// Number of sequence elements whose eigenvalue the form maps within its
/// own norm (scale-invariant near-line test).
pub fn near_line_count(seq: &EscapeSequence, form: &EigenForm) -> Result<usize, EigenActError> {
    let n = form.norm();
    if n == 0.0 {
        return Err(EigenActError::ZeroForm);
    }
    Ok(seq
        .eigen
        .iter()
        .filter(|z| form.apply(&z.to_c64()).abs() <= n)
        .count())
}

/// Restriction norm of the character q (over Z^d) to the eigenspace, and
/// the proven lower bound computed from the witness height and the
/// conjugacy invariants.
pub fn irrationality_floor(
    conj: &ConjugacyData,
    q: &[i64],
    place: usize,
    witness_height: f64,
) -> Result<(f64, f64), EigenActError> {
    if q.iter().all(|&c| c == 0) {
        return Err(EigenActError::ZeroCharacter);
    }
    let f = &conj.field;
    if place >= f.num_places() {
        return Err(EigenActError::IndexOutOfRange);
    }
    let d = conj.dim();
    let p = conj.precision();
    // Coefficients of the character on X: psi^-T q.
    let pw = 2 * p;
    let qv: Vec<Real> = q.iter().map(|&c| Real::from_i64(c, pw)).collect();
    let coeff: Vec<Real> = (0..d)
        .map(|i| {
            let mut s = Real::zero(pw);
            for (r, qr) in qv.iter().enumerate() {
                s = &s + &(qr * conj.psi_inv.get(r, i));
            }
            s
        })
        .collect();
    let actual = if place < f.r1 {
        coeff[place].abs().to_f64()
    } else {
        let j = place - f.r1;
        let a = coeff[f.r1 + j].to_f64();
        let b = coeff[f.r1 + f.r2 + j].to_f64();
        (a * a + b * b).sqrt()
    };
    let qnorm = (q.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>()).sqrt();
    let m = conj.uniformity.to_f64();
    let s = conj.scale.to_f64();
    let dd = d as f64;
    let floor = (1.0 / dd)
        * 2f64.powf(-(dd * (dd - 1.0) / 2.0) * witness_height)
        * m.powf(-(dd - 1.0))
        * qnorm.powf(-(dd - 1.0))
        / s;
    Ok((floor, actual))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SplitMix64;
    use crate::fixtures;
    use crate::unitlog::find_totally_irreducible;

    fn cubic_pair() -> (ConjugacyData, ExpandingPair) {
        let conj = fixtures::cubic_conjugacy(128);
        // Expand the direction of the largest root.
        let pair = expander(&conj, 2, 1_000_000).unwrap();
        (conj, pair)
    }

    #[test]
    fn expander_sign_pattern() {
        let (conj, pair) = cubic_pair();
        assert_eq!(pair.place, 2);
        assert!(pair.theta_u.to_f64() > 0.0);
        for j in 0..3 {
            let lm = pair.eigen_u.ln_mod[j].to_f64();
            if j == 2 {
                assert!(lm > 0.0);
            } else {
                assert!(lm < 0.0);
            }
        }
        // Multiplicative independence reflected in the log vectors.
        let lat = LogLattice::from_conjugacy(&conj).unwrap();
        let lu = lat.combine(&pair.u_exponents);
        let lv = lat.combine(&pair.v_exponents);
        let det = lu.coords[0].to_f64() * lv.coords[1].to_f64()
            - lu.coords[1].to_f64() * lv.coords[0].to_f64();
        assert!(det.abs() > 1e-9);
    }

    #[test]
    fn expander_rejects_bad_inputs() {
        let conj = fixtures::cubic_conjugacy(128);
        assert!(matches!(
            expander(&conj, 7, 1_000_000),
            Err(EigenActError::IndexOutOfRange)
        ));
        let single = crate::conjugacy::validate_group(vec![fixtures::cubic_companion()]).unwrap();
        let conj1 = crate::conjugacy::build_conjugacy(&single, 128, 2).unwrap();
        assert!(matches!(
            expander(&conj1, 0, 1_000_000),
            Err(EigenActError::NotApplicable)
        ));
    }

    #[test]
    fn progression_small_s() {
        let (_, pair) = cubic_pair();
        for s in [4u64, 8] {
            let prog = arith_progression(&pair, s, 1 << 36, 1.0).unwrap();
            let dabs = prog.delta.abs().to_f64();
            assert!(dabs > 0.0);
            assert!(prog.step_bound_ok, "s={s}: |step| = {dabs}");
            assert!(
                prog.max_deviation <= dabs / s as f64 + 1e-30,
                "s={s}: deviation {} vs {}",
                prog.max_deviation,
                dabs / s as f64
            );
        }
    }

    #[test]
    fn progression_t0_is_identity() {
        let (_, pair) = cubic_pair();
        let prog = arith_progression(&pair, 4, 1 << 36, 1.0).unwrap();
        let (a, b) = prog.element(0);
        assert!(a.is_zero() && b.is_zero());
        let z = pair.eigen_of(&a, &b, pair.place);
        assert!((z.to_c64() - num_complex::Complex64::new(1.0, 0.0)).norm() < 1e-30);
    }

    #[test]
    fn progression_cf_route_matches_threshold() {
        let (_, pair) = cubic_pair();
        // Force the continued-fraction path with a tiny exhaustive budget.
        let prog = arith_progression(&pair, 8, 4, 1.0).unwrap();
        assert!(prog.step_bound_ok);
        assert!(prog.max_deviation <= prog.delta.abs().to_f64() / 8.0);
    }

    #[test]
    fn escape_real_case_constant() {
        let (_, pair) = cubic_pair();
        let seq = escape_sequence(&pair, 10, 1.0, 1.0).unwrap();
        assert_eq!(seq.elements.len(), 10);
        assert!(seq.elements.iter().all(|&e| e == (1, 0)));
        assert!(seq.band_min_log2 > 0.0);
        // A real form never maps the expanding eigenvalue inside its norm.
        let f = EigenForm { c_re: 1.0, c_im: 0.0 };
        assert_eq!(near_line_count(&seq, &f).unwrap(), 0);
        assert!(matches!(
            escape_sequence(&pair, 1, 1.0, 1.0),
            Err(EigenActError::LengthTooSmall)
        ));
    }

    #[test]
    fn escape_complex_case() {
        let conj = fixtures::quartic_conjugacy(128);
        let pair = expander(&conj, 2, 1_000_000).unwrap(); // the complex place
        assert_eq!(pair.weight, 2);
        let seq = escape_sequence(&pair, 50, 1.0, 1.0).unwrap();
        assert_eq!(seq.eigen.len(), 50);
        // Distinct elements.
        let mut els = seq.elements.clone();
        els.sort_unstable();
        els.dedup();
        assert_eq!(els.len(), 50);
        assert!(seq.band_min_log2 >= 0.0);
        // Near-line counts over random unit forms stay at most 100 and the
        // test is scale invariant.
        let mut rng = SplitMix64::new(41);
        let mut max_count = 0;
        for _ in 0..200 {
            let ang = rng.next_f64() * std::f64::consts::TAU;
            let f = EigenForm { c_re: ang.cos(), c_im: ang.sin() };
            let c = near_line_count(&seq, &f).unwrap();
            let f10 = EigenForm { c_re: 10.0 * f.c_re, c_im: 10.0 * f.c_im };
            assert_eq!(c, near_line_count(&seq, &f10).unwrap());
            max_count = max_count.max(c);
        }
        assert!(max_count <= 100);
    }

    #[test]
    fn progression_complex_place() {
        // The step bound needs s somewhat large on complex eigenspaces;
        // s = 12 leaves a comfortable factor-two margin on this fixture.
        let conj = fixtures::quartic_conjugacy(128);
        let pair = expander(&conj, 2, 1_000_000).unwrap();
        let prog = arith_progression(&pair, 12, 1 << 36, 1.0).unwrap();
        assert!(prog.step_bound_ok, "|step| = {}", prog.delta.abs().to_f64());
        assert!(prog.max_deviation <= prog.delta.abs().to_f64() / 12.0 + 1e-25);
    }

    #[test]
    fn irrationality_sweep_cubic() {
        let conj = fixtures::cubic_conjugacy(128);
        let w = find_totally_irreducible(&conj, 2, 1.0, 1_000_000).unwrap();
        let hw = w.height.to_f64();
        let mut min_actual = f64::INFINITY;
        for a in -6i64..=6 {
            for b in -6i64..=6 {
                for c in -6i64..=6 {
                    if (a, b, c) == (0, 0, 0) {
                        continue;
                    }
                    for place in 0..3 {
                        let (floor, actual) =
                            irrationality_floor(&conj, &[a, b, c], place, hw).unwrap();
                        assert!(
                            actual >= floor,
                            "q=({a},{b},{c}) place {place}: {actual} < {floor}"
                        );
                        min_actual = min_actual.min(actual);
                    }
                }
            }
        }
        assert!(min_actual > 0.0);
        assert!(matches!(
            irrationality_floor(&conj, &[0, 0, 0], 0, hw),
            Err(EigenActError::ZeroCharacter)
        ));
    }

    #[test]
    fn fixed_point_scan_finds_good_hits() {
        // Golden ratio: best denominators are Fibonacci numbers.
        let p = 256;
        let phi = (&Real::from_i64(1, p) + &Real::from_i64(5, p).sqrt()).mul2k(-1);
        let zero = Real::zero(p);
        let n = scan_torus_best(&phi, &zero, 1000);
        assert_eq!(n, 987, "largest Fibonacci below 1000");
    }
}
