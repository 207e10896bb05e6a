//! Orbit density harnesses: Mahler-ball enumeration over the generated
//! group, exact rational orbits, covering-radius bracketing on the torus,
//! and the three experiment harnesses (dispersed sets, rational starting
//! blocks, large separated sets).

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use serde::Serialize;

use crate::conjugacy::ConjugacyData;
use crate::matrix::IMat;
use crate::prec::Real;
use crate::unitlog::{fundamental_size, h0_norm, LogLattice, UnitLogError};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum DensityError {
    #[error("enumeration exceeded the element budget")]
    BudgetExceeded,
    #[error("point set is empty")]
    EmptySet,
    #[error("starting vector must be coprime to the denominator")]
    NotCoprime,
    #[error("preconditions violated: {0}")]
    PreconditionsViolated(String),
    #[error(transparent)]
    UnitLog(#[from] UnitLogError),
}

/// A group element of the Mahler ball: torsion part index times a product
/// of the free generators.
#[derive(Clone, Debug, Serialize)]
pub struct BallElement {
    pub exponents: Vec<i64>,
    pub torsion_index: usize,
    pub height: f64,
}

#[derive(Clone, Debug)]
pub struct MahlerBall {
    pub radius: f64,
    pub elements: Vec<BallElement>,
    /// Torsion subgroup elements referenced by torsion_index.
    pub torsion: Vec<IMat>,
    /// Positions of the free (infinite-order) generators among the group
    /// generators.
    pub free_positions: Vec<usize>,
}

impl MahlerBall {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn matrix(&self, conj: &ConjugacyData, e: &BallElement) -> IMat {
        let mut m = self.torsion[e.torsion_index].clone();
        for (pos, expo) in self.free_positions.iter().zip(&e.exponents) {
            if *expo != 0 {
                m = m.mul(&conj.group.generators[*pos].pow(*expo));
            }
        }
        m
    }
}

/// All group elements with Mahler measure at most `radius`: exhaustive
/// lattice enumeration over the free part, times the torsion subgroup.
/// The identity is always present.
pub fn mahler_ball(
    conj: &ConjugacyData,
    radius: f64,
    budget: usize,
) -> Result<MahlerBall, DensityError> {
    assert!(radius >= 0.0);
    // Split generators into torsion and free parts.
    let mut free_positions = Vec::new();
    let mut free_logs = Vec::new();
    for (pos, u) in conj.phi.iter().enumerate() {
        let lv = crate::unitlog::log_embed(u)?;
        if h0_norm(&lv).to_f64() < 1e-12 {
            continue; // torsion generator, covered by the torsion subgroup
        }
        free_positions.push(pos);
        free_logs.push(lv);
    }
    let mut elements = Vec::new();
    if free_logs.is_empty() {
        elements.push(BallElement { exponents: vec![], torsion_index: 0, height: 0.0 });
    } else {
        let lattice = LogLattice::new(free_logs)?;
        let pts = lattice.enumerate_ball(radius, budget)?;
        elements.push(BallElement {
            exponents: vec![0; lattice.rank()],
            torsion_index: 0,
            height: 0.0,
        });
        for (expo, _, h) in pts {
            elements.push(BallElement { exponents: expo, torsion_index: 0, height: h.to_f64() });
        }
    }
    // Torsion companions.
    let torsion = conj.torsion.clone();
    let base_count = elements.len();
    for ti in 1..torsion.len() {
        for i in 0..base_count {
            let mut e = elements[i].clone();
            e.torsion_index = ti;
            elements.push(e);
        }
    }
    if elements.len() > budget {
        return Err(DensityError::BudgetExceeded);
    }
    Ok(MahlerBall {
        radius,
        elements,
        torsion,
        free_positions,
    })
}

/// Exact orbit of rational points with common denominator: all ball
/// elements applied to all points, deduplicated exactly.
pub fn orbit_set_rational(
    conj: &ConjugacyData,
    ball: &MahlerBall,
    denom: u64,
    numerators: &[Vec<u64>],
    budget: usize,
) -> Result<(u64, Vec<Vec<u64>>), DensityError> {
    let count = ball.len() as u128 * numerators.len() as u128;
    if count > budget as u128 {
        return Err(DensityError::BudgetExceeded);
    }
    let mut out: BTreeSet<Vec<u64>> = BTreeSet::new();
    for e in &ball.elements {
        let m = ball.matrix(conj, e).reduce_mod(denom);
        for x in numerators {
            out.insert(m.matvec(x));
        }
    }
    Ok((denom, out.into_iter().collect()))
}

/// Orbit of floating-point points, deduplicated at the stated resolution.
pub fn orbit_set_f64(
    conj: &ConjugacyData,
    ball: &MahlerBall,
    points: &[Vec<f64>],
    resolution: f64,
    budget: usize,
) -> Result<Vec<Vec<f64>>, DensityError> {
    let count = ball.len() as u128 * points.len() as u128;
    if count > budget as u128 {
        return Err(DensityError::BudgetExceeded);
    }
    let d = conj.dim();
    let mut keyed: BTreeSet<Vec<i64>> = BTreeSet::new();
    let mut out = Vec::new();
    let inv_res = 1.0 / resolution;
    for e in &ball.elements {
        let m = ball.matrix(conj, e);
        let mf: Vec<Vec<f64>> = (0..d)
            .map(|i| (0..d).map(|j| m.get(i, j).to_f64().unwrap()).collect())
            .collect();
        for x in points {
            let y: Vec<f64> = (0..d)
                .map(|i| {
                    let v: f64 = (0..d).map(|j| mf[i][j] * x[j]).sum();
                    v - v.floor()
                })
                .collect();
            let key: Vec<i64> = y.iter().map(|v| (v * inv_res).round() as i64).collect();
            if keyed.insert(key) {
                out.push(y);
            }
        }
    }
    Ok(out)
}

/// Euclidean distance on the torus.
pub fn toral_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y).abs();
            let w = d.min(1.0 - d);
            w * w
        })
        .sum::<f64>()
        .sqrt()
}

/// Minimum pairwise toral distance via cell buckets.
pub fn min_separation(points: &[Vec<f64>]) -> f64 {
    let n = points.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let d = points[0].len();
    let grid = ((n as f64).powf(1.0 / d as f64).ceil() as i64).clamp(1, 64);
    let mut buckets: std::collections::HashMap<Vec<i64>, Vec<usize>> =
        std::collections::HashMap::new();
    let key = |x: &[f64]| -> Vec<i64> {
        x.iter()
            .map(|v| (((v - v.floor()) * grid as f64).floor() as i64).min(grid - 1))
            .collect()
    };
    for (i, p) in points.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let mut best = f64::INFINITY;
    let offsets: Vec<Vec<i64>> = {
        let mut out = vec![vec![]];
        for _ in 0..d {
            let mut next = Vec::new();
            for v in &out {
                for o in [-1i64, 0, 1] {
                    let mut w = v.clone();
                    w.push(o);
                    next.push(w);
                }
            }
            out = next;
        }
        out
    };
    for (cell, members) in &buckets {
        for off in &offsets {
            let ncell: Vec<i64> = cell
                .iter()
                .zip(off)
                .map(|(c, o)| (c + o).rem_euclid(grid))
                .collect();
            if let Some(others) = buckets.get(&ncell) {
                for &i in members {
                    for &j in others {
                        if j <= i {
                            continue;
                        }
                        best = best.min(toral_distance(&points[i], &points[j]));
                    }
                }
            }
        }
    }
    best
}

/// Covering-radius bracket from a regular grid of probe centers: the true
/// covering radius lies in [lower, upper], and the bracket width is one
/// cell diagonal.
pub fn covering_radius(points: &[Vec<f64>], grid_n: usize) -> Result<(f64, f64), DensityError> {
    if points.is_empty() {
        return Err(DensityError::EmptySet);
    }
    let d = points[0].len();
    let g = grid_n as i64;
    // Bucket points by grid cell.
    let mut buckets: std::collections::HashMap<Vec<i64>, Vec<usize>> =
        std::collections::HashMap::new();
    for (i, p) in points.iter().enumerate() {
        let key: Vec<i64> = p
            .iter()
            .map(|v| (((v - v.floor()) * g as f64).floor() as i64).min(g - 1))
            .collect();
        buckets.entry(key).or_default().push(i);
    }
    let mut worst: f64 = 0.0;
    let mut center_idx = vec![0i64; d];
    loop {
        let center: Vec<f64> = center_idx
            .iter()
            .map(|&c| (c as f64 + 0.5) / g as f64)
            .collect();
        // Expanding ring search for the nearest point.
        let mut best = f64::INFINITY;
        let mut ring = 0i64;
        loop {
            let mut touched = false;
            // All cells at Chebyshev distance exactly `ring`.
            let mut stack = vec![(Vec::<i64>::new(), false)];
            while let Some((prefix, has_extreme)) = stack.pop() {
                let depth = prefix.len();
                if depth == d {
                    if !has_extreme {
                        continue;
                    }
                    let cell: Vec<i64> = prefix
                        .iter()
                        .zip(&center_idx)
                        .map(|(o, c)| (c + o).rem_euclid(g))
                        .collect();
                    if let Some(members) = buckets.get(&cell) {
                        touched = true;
                        for &i in members {
                            best = best.min(toral_distance(&center, &points[i]));
                        }
                    }
                    continue;
                }
                for o in -ring..=ring {
                    let mut p = prefix.clone();
                    p.push(o);
                    stack.push((p, has_extreme || o.abs() == ring));
                }
            }
            let _ = touched;
            // Points in rings beyond `ring` are at distance at least
            // (ring) * cell; stop once that exceeds the best found.
            if best <= (ring as f64) / g as f64 || ring > g / 2 + 1 {
                break;
            }
            ring += 1;
        }
        worst = worst.max(best);
        let mut pos = 0;
        loop {
            if pos == d {
                break;
            }
            center_idx[pos] += 1;
            if center_idx[pos] == g {
                center_idx[pos] = 0;
                pos += 1;
            } else {
                break;
            }
        }
        if pos == d {
            break;
        }
    }
    let half_diag = 0.5 * (d as f64).sqrt() / g as f64;
    Ok((worst + half_diag, (worst - half_diag).max(0.0)))
}

/// Distance between two points of the quotient via psi, exact rational
/// positions and a bounded lattice-shift search.
fn quotient_distance(conj: &ConjugacyData, delta: &[f64]) -> f64 {
    let d = conj.dim();
    let psi = conj.psi.to_f64_rows();
    let wrapped: Vec<f64> = delta
        .iter()
        .map(|v| {
            let f = v - v.floor();
            if f >= 0.5 {
                f - 1.0
            } else {
                f
            }
        })
        .collect();
    let mut best = f64::INFINITY;
    let mut shift = vec![-2i64; d];
    loop {
        let mut acc = 0.0;
        for row in psi.iter() {
            let mut s = 0.0;
            for (j, r) in row.iter().enumerate() {
                s += r * (wrapped[j] + shift[j] as f64);
            }
            acc += s * s;
        }
        best = best.min(acc.sqrt());
        let mut pos = 0;
        loop {
            if pos == d {
                break;
            }
            shift[pos] += 1;
            if shift[pos] > 2 {
                shift[pos] = -2;
                pos += 1;
            } else {
                break;
            }
        }
        if pos == d {
            break;
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub ball_radius: f64,
    pub ball_elements: usize,
    pub point_count: usize,
    pub covering_upper: f64,
    pub covering_lower: f64,
    pub min_separation: f64,
    /// Shape of the density target for trend plots.
    pub density_target: f64,
}

/// Dispersed-set harness: verify the separation and cardinality
/// hypotheses, then measure the orbit of the set under the Mahler ball of
/// radius l_mult * log2(1/epsilon).
#[allow(clippy::too_many_arguments)]
pub fn harness_efftopo(
    conj: &ConjugacyData,
    points: &[Vec<f64>],
    epsilon: f64,
    alpha: f64,
    l_mult: f64,
    grid_n: usize,
    budget: usize,
) -> Result<DensityReport, DensityError> {
    let d = conj.dim() as f64;
    let sep = min_separation(points);
    if sep < epsilon {
        return Err(DensityError::PreconditionsViolated(format!(
            "set is not epsilon-separated: {sep} < {epsilon}"
        )));
    }
    let need = epsilon.powf(-alpha * d);
    if (points.len() as f64) < need {
        return Err(DensityError::PreconditionsViolated(format!(
            "set too small: {} < {need}",
            points.len()
        )));
    }
    let l = l_mult * (1.0 / epsilon).log2();
    let ball = mahler_ball(conj, l, budget)?;
    let orbit = orbit_set_f64(conj, &ball, points, 1e-12, budget)?;
    let (upper, lower) = covering_radius(&orbit, grid_n)?;
    Ok(DensityReport {
        ball_radius: l,
        ball_elements: ball.len(),
        point_count: orbit.len(),
        covering_upper: upper,
        covering_lower: lower,
        min_separation: min_separation(&orbit),
        density_target: (1.0 / epsilon).log2().powf(-alpha),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DioqReport {
    pub block_length: usize,
    pub separation_bound: f64,
    pub min_pair_distance: f64,
    pub separation_ok: bool,
    pub density: DensityReport,
}

/// Rational starting-block harness: the orbit of v/Q under powers of the
/// minimal-height witness is pairwise separated in the quotient by
/// (1/M) Q^-k S, checked on exact orbit points; then the density of the
/// Mahler-ball orbit of the point is measured.
#[allow(clippy::too_many_arguments)]
pub fn harness_dioq(
    conj: &ConjugacyData,
    v: &[i64],
    q_denom: u64,
    k_expo: f64,
    grid_n: usize,
    budget: usize,
) -> Result<DioqReport, DensityError> {
    let d = conj.dim();
    let gcd_all = v
        .iter()
        .fold(q_denom, |acc, &c| num_integer::gcd(acc, c.unsigned_abs()));
    if gcd_all != 1 {
        return Err(DensityError::NotCoprime);
    }
    // Minimal-height witness among the generators' lattice.
    let lattice = LogLattice::from_conjugacy(conj)?;
    let fund = fundamental_size(&lattice, budget)?;
    let g_expo = &fund.witnesses[0];
    let g_mat = conj.matrix_product(g_expo);
    let fv = fund.value.to_f64();

    let m_count = ((1.0 / fv).min(1.0) * (q_denom as f64 / 2f64.powi(d as i32)).log2())
        .floor()
        .max(1.0) as usize;

    // Exact orbit blocks g^m . v/Q.
    let g_mod = g_mat.reduce_mod(q_denom);
    let x0: Vec<u64> = v
        .iter()
        .map(|&c| (((c as i128 % q_denom as i128) + q_denom as i128) % q_denom as i128) as u64)
        .collect();
    let mut blocks = Vec::with_capacity(m_count);
    let mut cur = x0.clone();
    for _ in 0..m_count {
        blocks.push(cur.clone());
        cur = g_mod.matvec(&cur);
    }

    // Pairwise distances in the quotient.
    let m_psi = conj.uniformity.to_f64();
    let s_gamma = conj.scale.to_f64();
    let bound = s_gamma / (m_psi * (q_denom as f64).powf(k_expo));
    let mut min_pair = f64::INFINITY;
    for i in 0..blocks.len() {
        for j in i + 1..blocks.len() {
            let delta: Vec<f64> = blocks[i]
                .iter()
                .zip(&blocks[j])
                .map(|(&a, &b)| (a as f64 - b as f64) / q_denom as f64)
                .collect();
            min_pair = min_pair.min(quotient_distance(conj, &delta));
        }
    }
    let separation_ok = blocks.len() < 2 || min_pair >= bound - 1e-12;

    // Density of the Mahler-ball orbit of the starting point.
    let l = (k_expo + 2.0) * (q_denom as f64).log2();
    let ball = mahler_ball(conj, l, budget)?;
    let (denom, orbit) = orbit_set_rational(conj, &ball, q_denom, &[x0], budget)?;
    let pts: Vec<Vec<f64>> = orbit
        .iter()
        .map(|num| num.iter().map(|&n| n as f64 / denom as f64).collect())
        .collect();
    let (upper, lower) = covering_radius(&pts, grid_n)?;
    Ok(DioqReport {
        block_length: blocks.len(),
        separation_bound: bound,
        min_pair_distance: min_pair,
        separation_ok,
        density: DensityReport {
            ball_radius: l,
            ball_elements: ball.len(),
            point_count: pts.len(),
            covering_upper: upper,
            covering_lower: lower,
            min_separation: min_separation(&pts),
            density_target: (q_denom as f64).ln().ln().max(1.0).recip(),
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LargeReport {
    pub closest_pair: (usize, usize),
    pub closest_distance: f64,
    /// Index of the dominant eigenspace block of the difference vector.
    pub dominant_place: usize,
    pub density: DensityReport,
}

/// Large-set harness: verify the quotient separation, trace the closest
/// pair and its difference vector, and measure the orbit density at
/// radius log2(1/epsilon0) + l_mult * log2 |E|.
#[allow(clippy::too_many_arguments)]
pub fn harness_large(
    conj: &ConjugacyData,
    points: &[Vec<f64>],
    epsilon0: f64,
    l_mult: f64,
    grid_n: usize,
    budget: usize,
) -> Result<LargeReport, DensityError> {
    if points.is_empty() {
        return Err(DensityError::EmptySet);
    }
    let s_gamma = conj.scale.to_f64();
    let mut closest = (0usize, 0usize);
    let mut closest_dist = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let delta: Vec<f64> = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| a - b)
                .collect();
            let dist = quotient_distance(conj, &delta);
            if dist < closest_dist {
                closest_dist = dist;
                closest = (i, j);
            }
        }
    }
    if points.len() >= 2 && closest_dist < epsilon0 * s_gamma {
        return Err(DensityError::PreconditionsViolated(format!(
            "quotient separation {closest_dist} below {}",
            epsilon0 * s_gamma
        )));
    }
    // Difference vector in quotient coordinates; dominant block.
    let dominant_place = if points.len() >= 2 {
        let psi = conj.psi.to_f64_rows();
        let d = conj.dim();
        let delta: Vec<f64> = points[closest.0]
            .iter()
            .zip(&points[closest.1])
            .map(|(a, b)| {
                let f = (a - b) - (a - b).floor();
                if f >= 0.5 {
                    f - 1.0
                } else {
                    f
                }
            })
            .collect();
        let y: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| psi[i][j] * delta[j]).sum())
            .collect();
        let f = &conj.field;
        (0..f.num_places())
            .max_by(|&a, &b| {
                let block = |p: usize| -> f64 {
                    if p < f.r1 {
                        y[p].abs()
                    } else {
                        let j = p - f.r1;
                        y[f.r1 + j].hypot(y[f.r1 + f.r2 + j])
                    }
                };
                block(a).partial_cmp(&block(b)).unwrap()
            })
            .unwrap_or(0)
    } else {
        0
    };
    let l = (1.0 / epsilon0).log2() + l_mult * (points.len() as f64).log2();
    let ball = mahler_ball(conj, l, budget)?;
    let orbit = orbit_set_f64(conj, &ball, points, 1e-12, budget)?;
    let (upper, lower) = covering_radius(&orbit, grid_n)?;
    Ok(LargeReport {
        closest_pair: closest,
        closest_distance: closest_dist,
        dominant_place,
        density: DensityReport {
            ball_radius: l,
            ball_elements: ball.len(),
            point_count: orbit.len(),
            covering_upper: upper,
            covering_lower: lower,
            min_separation: min_separation(&orbit),
            density_target: (points.len() as f64).ln().ln().max(1.0).recip(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SplitMix64;
    use crate::fixtures;

    #[test]
    fn ball_basics() {
        let conj = fixtures::cubic_conjugacy(128);
        let b0 = mahler_ball(&conj, 0.0, 100_000).unwrap();
        assert_eq!(b0.len(), 1, "only the identity at radius zero");
        // Just above the generator height the generators appear.
        let b1 = mahler_ball(&conj, 1.2, 100_000).unwrap();
        let heights: Vec<f64> = b1.elements.iter().map(|e| e.height).collect();
        assert!(b1.len() >= 5, "identity and four short units, got {heights:?}");
        assert!(b1
            .elements
            .iter()
            .any(|e| e.exponents == vec![1, 0] && e.torsion_index == 0));
        // Monotone in the radius.
        let b2 = mahler_ball(&conj, 2.4, 100_000).unwrap();
        assert!(b2.len() > b1.len());
        for e in &b1.elements {
            assert!(b2
                .elements
                .iter()
                .any(|f| f.exponents == e.exponents && f.torsion_index == e.torsion_index));
        }
        // Every element's height is within the radius and matches the
        // matrix Mahler measure.
        for e in &b2.elements {
            assert!(e.height <= 2.4 + 1e-9);
            let m = b2.matrix(&conj, e);
            let hm = crate::conjugacy::matrix_mahler(&m, 128).unwrap().to_f64();
            assert!((hm - e.height).abs() < 2f64.powi(-32));
        }
    }

    #[test]
    fn orbit_preserves_rational_denominator() {
        let conj = fixtures::cubic_conjugacy(128);
        let ball = mahler_ball(&conj, 4.0, 100_000).unwrap();
        let (denom, orbit) =
            orbit_set_rational(&conj, &ball, 7, &[vec![1, 0, 0]], 1_000_000).unwrap();
        assert_eq!(denom, 7);
        assert!(!orbit.is_empty());
        assert!(orbit.iter().all(|p| p.iter().all(|&c| c < 7)));
        // Zero is fixed by the whole group.
        let (_, z) = orbit_set_rational(&conj, &ball, 7, &[vec![0, 0, 0]], 1_000_000).unwrap();
        assert_eq!(z.len(), 1);
        assert!(z[0].iter().all(|&c| c == 0));
    }

    #[test]
    fn orbit_composition_closure() {
        let conj = fixtures::cubic_conjugacy(128);
        let ball = mahler_ball(&conj, 2.4, 100_000).unwrap();
        // g.(h.x) = (gh).x exactly in modular arithmetic.
        let denom = 101u64;
        let x = vec![1u64, 0, 0];
        let g = ball.matrix(&conj, &ball.elements[1]).reduce_mod(denom);
        let h = ball.matrix(&conj, &ball.elements[2]).reduce_mod(denom);
        let lhs = g.matvec(&h.matvec(&x));
        let gh = ball
            .matrix(&conj, &ball.elements[1])
            .mul(&ball.matrix(&conj, &ball.elements[2]))
            .reduce_mod(denom);
        assert_eq!(lhs, gh.matvec(&x));
    }

    #[test]
    fn covering_radius_brackets() {
        // Single point: diameter-scale covering radius.
        let single = vec![vec![0.5, 0.5, 0.5]];
        let (upper, lower) = covering_radius(&single, 16).unwrap();
        let diag = 3f64.sqrt() / 2.0;
        assert!(upper >= diag - 0.01 && upper <= diag + 0.2);
        assert!(lower <= upper);

        // Full N-grid: covering radius is sqrt(d)/(2N).
        let n = 8;
        let mut pts = Vec::new();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    pts.push(vec![i as f64 / n as f64, j as f64 / n as f64, k as f64 / n as f64]);
                }
            }
        }
        let truth = 3f64.sqrt() / (2.0 * n as f64);
        let (upper, lower) = covering_radius(&pts, 32).unwrap();
        assert!(lower <= truth + 1e-12 && truth <= upper + 1e-12);
        assert!(upper - lower <= 3f64.sqrt() / 32.0 + 1e-12);

        // Random cloud: bracket width is the forced cell diagonal.
        let mut rng = SplitMix64::new(3);
        let cloud: Vec<Vec<f64>> = (0..1000)
            .map(|_| (0..3).map(|_| rng.next_f64()).collect())
            .collect();
        let (u2, l2) = covering_radius(&cloud, 64).unwrap();
        assert!(u2 - l2 <= 3f64.sqrt() / 64.0 + 1e-12);
        assert!(covering_radius(&[], 8).is_err());
    }

    #[test]
    fn efftopo_checks_preconditions() {
        let conj = fixtures::cubic_conjugacy(128);
        // Duplicate point violates separation.
        let dup = vec![vec![0.1, 0.2, 0.3], vec![0.1, 0.2, 0.3]];
        assert!(matches!(
            harness_efftopo(&conj, &dup, 0.01, 0.2, 1.0, 16, 100_000),
            Err(DensityError::PreconditionsViolated(_))
        ));
        // L = 0 leaves the set unchanged.
        let pts = vec![vec![0.1, 0.2, 0.3], vec![0.6, 0.7, 0.9]];
        let rep = harness_efftopo(&conj, &pts, 0.25, 0.05, 0.0, 16, 100_000).unwrap();
        assert_eq!(rep.point_count, 2);
    }

    #[test]
    fn efftopo_orbit_grows_denser() {
        let conj = fixtures::cubic_conjugacy(128);
        let mut rng = SplitMix64::new(12);
        let pts: Vec<Vec<f64>> = (0..24)
            .map(|_| (0..3).map(|_| rng.next_f64()).collect())
            .collect();
        let eps = 2f64.powi(-10);
        let alpha = (pts.len() as f64).log2() / (3.0 * 10.0);
        let r1 = harness_efftopo(&conj, &pts, eps, alpha, 0.5, 24, 400_000).unwrap();
        let r2 = harness_efftopo(&conj, &pts, eps, alpha, 1.0, 24, 400_000).unwrap();
        assert!(r2.point_count > r1.point_count);
        assert!(r2.covering_upper <= r1.covering_upper + 1e-12);
    }

    #[test]
    fn dioq_separation_exact() {
        let conj = fixtures::cubic_conjugacy(128);
        let rep = harness_dioq(&conj, &[1, 0, 0], 101, 1.0, 32, 400_000).unwrap();
        assert!(rep.separation_ok, "min pair {} bound {}", rep.min_pair_distance, rep.separation_bound);
        assert!(rep.block_length >= 2);
        assert!(rep.density.point_count > 100);
        // Non-coprime input rejected.
        assert!(matches!(
            harness_dioq(&conj, &[2, 0, 0], 4, 1.0, 16, 100_000),
            Err(DensityError::NotCoprime)
        ));
    }

    #[test]
    fn large_harness_trace() {
        let conj = fixtures::cubic_conjugacy(128);
        let pts = vec![
            vec![0.11, 0.42, 0.73],
            vec![0.12, 0.43, 0.74], // closest pair with the first
            vec![0.61, 0.15, 0.33],
        ];
        let rep = harness_large(&conj, &pts, 1e-4, 1.0, 16, 200_000).unwrap();
        assert_eq!(rep.closest_pair, (0, 1));
        // Brute-force oracle agrees.
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let delta: Vec<f64> =
                    pts[i].iter().zip(&pts[j]).map(|(a, b)| a - b).collect();
                best = best.min(quotient_distance(&conj, &delta));
            }
        }
        assert!((best - rep.closest_distance).abs() < 1e-12);
        // Separation failure detected when epsilon0 is too large.
        assert!(matches!(
            harness_large(&conj, &pts, 0.5, 1.0, 16, 200_000),
            Err(DensityError::PreconditionsViolated(_))
        ));
        // Single point still yields a report.
        let rep1 = harness_large(&conj, &pts[..1], 1e-3, 1.0, 16, 200_000).unwrap();
        assert!(rep1.density.point_count >= 1);
    }

    #[test]
    fn ball_exhaustive_against_larger_box() {
        // Cross-check: enumerating with a larger radius and filtering gives
        // the same elements as the direct enumeration.
        let conj = fixtures::cubic_conjugacy(128);
        let lat = LogLattice::from_conjugacy(&conj).unwrap();
        let r = 3.1;
        let direct = lat.enumerate_ball(r, 1_000_000).unwrap();
        let bigger = lat.enumerate_ball(2.0 * r, 1_000_000).unwrap();
        let filtered: Vec<_> = bigger
            .into_iter()
            .filter(|(_, _, h)| h.to_f64() <= r)
            .collect();
        assert_eq!(direct.len(), filtered.len());
        for (a, b) in direct.iter().zip(&filtered) {
            assert_eq!(a.0, b.0);
        }
    }
}
