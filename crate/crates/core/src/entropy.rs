//! Box calculus on the quotient torus: finite measures, w-boxes and their
//! dyadic refinements, homogeneous (conditional) entropy computed exactly
//! by an arrangement sweep at desk scale, the positive-entropy scale and
//! direction scan, and the dominated-measure construction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::SplitMix64;
use crate::conjugacy::ConjugacyData;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum EntropyError {
    #[error("box is not injective at this scale")]
    NotInjective,
    #[error("no scale in the scan range achieves the entropy bound")]
    NotFound(Vec<(f64, f64)>),
    #[error("entropy hypothesis fails at the requested scale: {0} < {1}")]
    HypothesisFailed(f64, f64),
    #[error("refinement must satisfy delta * T >= 1")]
    DeltaTTooSmall,
    #[error("partition too fine for the direct exact path")]
    PartitionBudget,
    #[error("dimension not supported by the exact path")]
    DimensionBudget,
}

/// Geometry of the ambient space: the standard torus or a quotient by the
/// lattice psi(Z^d) of a reconstructed conjugacy.
#[derive(Clone, Debug)]
pub struct SpaceInfo {
    pub dim: usize,
    pub r1: usize,
    pub r2: usize,
    /// Lattice scale (1 on the standard torus).
    pub scale: f64,
    /// Uniformity of the identification (1 on the standard torus).
    pub uniformity: f64,
    /// Rows of psi and its inverse as f64.
    pub psi: Vec<Vec<f64>>,
    pub psi_inv: Vec<Vec<f64>>,
}

impl SpaceInfo {
    pub fn torus(dim: usize) -> Self {
        let id: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        SpaceInfo {
            dim,
            r1: dim,
            r2: 0,
            scale: 1.0,
            uniformity: 1.0,
            psi: id.clone(),
            psi_inv: id,
        }
    }

    pub fn from_conjugacy(conj: &ConjugacyData) -> Self {
        SpaceInfo {
            dim: conj.dim(),
            r1: conj.field.r1,
            r2: conj.field.r2,
            scale: conj.scale.to_f64(),
            uniformity: conj.uniformity.to_f64(),
            psi: conj.psi.to_f64_rows(),
            psi_inv: conj.psi_inv.to_f64_rows(),
        }
    }

    pub fn places(&self) -> usize {
        self.r1 + self.r2
    }

    /// Local degree of a place.
    pub fn weight(&self, place: usize) -> usize {
        if place < self.r1 {
            1
        } else {
            2
        }
    }

    /// Coordinates belonging to a place.
    pub fn coords_of_place(&self, place: usize) -> Vec<usize> {
        if place < self.r1 {
            vec![place]
        } else {
            vec![place, place + self.r2]
        }
    }

    fn apply(&self, m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| m[i][j] * x[j]).sum())
            .collect()
    }

    /// Reduce a point into the fundamental domain psi([0,1)^d).
    pub fn reduce(&self, x: &[f64]) -> Vec<f64> {
        let y = self.apply(&self.psi_inv, x);
        let f: Vec<f64> = y.iter().map(|v| v - v.floor()).collect();
        self.apply(&self.psi, &f)
    }

    /// Candidate lattice vectors within Euclidean length `radius`.
    fn lattice_shifts(&self, radius: f64) -> Vec<Vec<f64>> {
        let inv_norm: f64 = self
            .psi_inv
            .iter()
            .map(|r| r.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt();
        let cap = (inv_norm * radius).ceil() as i64 + 1;
        let mut out = Vec::new();
        let mut idx = vec![-cap; self.dim];
        loop {
            let z: Vec<f64> = idx.iter().map(|&v| v as f64).collect();
            let g = self.apply(&self.psi, &z);
            let len: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len <= radius {
                out.push(g);
            }
            let mut pos = 0;
            loop {
                if pos == self.dim {
                    break;
                }
                idx[pos] += 1;
                if idx[pos] > cap {
                    idx[pos] = -cap;
                    pos += 1;
                } else {
                    break;
                }
            }
            if pos == self.dim {
                break;
            }
        }
        out
    }
}

/// Weighted finite point set on the torus or quotient, positions reduced
/// to the fundamental domain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteMeasure {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl FiniteMeasure {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, weights: Vec<f64>) -> Self {
        assert_eq!(points.len(), weights.len());
        assert!(weights.iter().all(|w| *w >= 0.0), "weights must be nonnegative");
        FiniteMeasure { dim, points, weights }
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Uniform probability measure on the given points.
    pub fn uniform(dim: usize, points: Vec<Vec<f64>>) -> Self {
        let n = points.len().max(1);
        let w = vec![1.0 / n as f64; points.len()];
        FiniteMeasure::new(dim, points, w)
    }

    /// Pushforward of a torus measure to the quotient by psi.
    pub fn pushforward_to_quotient(&self, space: &SpaceInfo) -> FiniteMeasure {
        let points = self
            .points
            .iter()
            .map(|x| space.apply(&space.psi, x))
            .collect();
        FiniteMeasure::new(self.dim, points, self.weights.clone())
    }

    /// Pullback from the quotient to the torus by psi^-1, reduced mod Z^d.
    pub fn pullback_to_torus(&self, space: &SpaceInfo) -> FiniteMeasure {
        let points = self
            .points
            .iter()
            .map(|x| {
                let y = space.apply(&space.psi_inv, x);
                y.iter().map(|v| v - v.floor()).collect()
            })
            .collect();
        FiniteMeasure::new(self.dim, points, self.weights.clone())
    }
}

/// Axis-block box: per-place dyadic exponents and an anchor corner.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoxSpec {
    pub w: Vec<f64>,
    pub anchor: Vec<f64>,
}

impl BoxSpec {
    pub fn anchored_zero(w: Vec<f64>, dim: usize) -> Self {
        BoxSpec { w, anchor: vec![0.0; dim] }
    }

    /// Side length per coordinate.
    pub fn coord_sides(&self, space: &SpaceInfo) -> Vec<f64> {
        (0..space.dim)
            .map(|c| {
                let place = if c < space.r1 {
                    c
                } else if c < space.r1 + space.r2 {
                    c
                } else {
                    c - space.r2
                };
                2f64.powf(-self.w[place]) * space.scale
            })
            .collect()
    }

    pub fn volume(&self, space: &SpaceInfo) -> f64 {
        self.coord_sides(space).iter().product()
    }

    pub fn diameter(&self, space: &SpaceInfo) -> f64 {
        self.coord_sides(space)
            .iter()
            .map(|s| s * s)
            .sum::<f64>()
            .sqrt()
    }

    /// Injectivity at this scale: every side exponent at least
    /// log2(sqrt(d) * uniformity).
    pub fn injective(&self, space: &SpaceInfo) -> bool {
        let bound = (space.dim as f64).sqrt().log2() + space.uniformity.log2();
        self.w.iter().all(|&wi| wi >= bound - 1e-12)
    }

    /// Refine by adding t to each place exponent.
    pub fn refined(&self, t: &[f64]) -> BoxSpec {
        let w = self.w.iter().zip(t).map(|(a, b)| a + b).collect();
        BoxSpec { w, anchor: self.anchor.clone() }
    }
}

/// Estimate of an integral quantity with the compute mode that produced it.
#[derive(Clone, Debug, Serialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub stderr: Option<f64>,
    pub exact: bool,
}

/// Entropy of a measure against the canonical axis-aligned grid of mesh at
/// most epsilon, cells anchored at zero. Base-2 logs.
pub fn grid_entropy(mu: &FiniteMeasure, epsilon: f64) -> f64 {
    assert!(epsilon > 0.0);
    let n = (1.0 / epsilon).ceil() as i64;
    let mut cells: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (x, w) in mu.points.iter().zip(&mu.weights) {
        if *w == 0.0 {
            continue;
        }
        let key: Vec<i64> = x
            .iter()
            .map(|v| {
                let f = v - v.floor();
                ((f * n as f64).floor() as i64).min(n - 1)
            })
            .collect();
        *cells.entry(key).or_insert(0.0) += w;
    }
    cells.values().map(|&m| if m > 0.0 { -m * m.log2() } else { 0.0 }).sum()
}

// -- arrangement sweep --

/// A half-open axis box [lo, hi) with a payload tag.
#[derive(Clone, Debug)]
struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
    tag: usize,
}

fn boxes_overlap(alo: &[f64], ahi: &[f64], blo: &[f64], bhi: &[f64]) -> bool {
    alo.iter()
        .zip(ahi)
        .zip(blo.iter().zip(bhi))
        .all(|((al, ah), (bl, bh))| al < bh && bl < ah)
}

/// Connected components of the atom boxes {p_j - B} on the quotient,
/// with consistent unwrapping shifts. Returns None when a wrap-around
/// chain prevents consistent unrolling.
struct Components {
    /// Per component: list of (atom index, shift vector).
    groups: Vec<Vec<(usize, Vec<f64>)>>,
}

fn build_components(
    space: &SpaceInfo,
    atoms: &[Vec<f64>],
    base_lo: impl Fn(usize) -> Vec<f64>,
    base_hi: impl Fn(usize) -> Vec<f64>,
) -> Option<Components> {
    let n = atoms.len();
    let diam: f64 = {
        let lo = base_lo(0);
        let hi = base_hi(0);
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    };
    // Any overlapping pair of (possibly shifted) boxes has center distance
    // at most the common diameter.
    let shifts = space.lattice_shifts(2.0 * diam + 1e-9);
    let mut adj: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); n];
    for j in 0..n {
        let jlo = base_lo(j);
        let jhi = base_hi(j);
        for k in 0..n {
            if j == k {
                continue;
            }
            let klo = base_lo(k);
            let khi = base_hi(k);
            for g in &shifts {
                let slo: Vec<f64> = klo.iter().zip(g).map(|(a, b)| a + b).collect();
                let shi: Vec<f64> = khi.iter().zip(g).map(|(a, b)| a + b).collect();
                if boxes_overlap(&jlo, &jhi, &slo, &shi) {
                    adj[j].push((k, g.clone()));
                }
            }
        }
    }
    let mut assigned: Vec<Option<(usize, Vec<f64>)>> = vec![None; n]; // (component, shift)
    let mut groups = Vec::new();
    for start in 0..n {
        if assigned[start].is_some() {
            continue;
        }
        let cid = groups.len();
        let mut group = vec![(start, vec![0.0; space.dim])];
        assigned[start] = Some((cid, vec![0.0; space.dim]));
        let mut frontier = vec![start];
        while let Some(j) = frontier.pop() {
            let sj = assigned[j].as_ref().unwrap().1.clone();
            for (k, g) in &adj[j] {
                // Box of k shifted by g overlaps box of j, so k's unrolled
                // shift is s_j + g.
                let sk: Vec<f64> = sj.iter().zip(g).map(|(a, b)| a + b).collect();
                match &assigned[*k] {
                    None => {
                        assigned[*k] = Some((cid, sk.clone()));
                        group.push((*k, sk));
                        frontier.push(*k);
                    }
                    Some((c2, existing)) => {
                        if *c2 != cid {
                            return None; // cross-component contradiction
                        }
                        let dev: f64 = existing
                            .iter()
                            .zip(&sk)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        if dev > 1e-9 {
                            return None; // wrap-around chain
                        }
                    }
                }
            }
        }
        groups.push(group);
    }
    Some(Components { groups })
}

/// Exact sweep: integrate `g(active tags)` over the union of the given
/// regions (Lebesgue volume), where `g` sees the set of region tags
/// covering each arrangement cell. Per-axis coverage bitsets with early
/// pruning keep the cost near the number of occupied cells.
fn sweep(regions: &[Region], dim: usize, mut g: impl FnMut(f64, &[usize])) {
    let mut cuts: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for r in regions {
        for c in 0..dim {
            cuts[c].push(r.lo[c]);
            cuts[c].push(r.hi[c]);
        }
    }
    for c in &mut cuts {
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    }
    let words = regions.len().div_ceil(64);
    // Per axis, per interval: bitset of regions covering it.
    let masks: Vec<Vec<Vec<u64>>> = (0..dim)
        .map(|c| {
            (0..cuts[c].len().saturating_sub(1))
                .map(|k| {
                    let mid = 0.5 * (cuts[c][k] + cuts[c][k + 1]);
                    let mut m = vec![0u64; words];
                    for (ri, r) in regions.iter().enumerate() {
                        if r.lo[c] <= mid && mid < r.hi[c] {
                            m[ri / 64] |= 1 << (ri % 64);
                        }
                    }
                    m
                })
                .collect()
        })
        .collect();
    if masks.iter().any(|m| m.is_empty()) {
        return;
    }
    let full = vec![u64::MAX; words];
    descend(&cuts, &masks, dim, 0, &full, 1.0, words, &mut g);
}

#[allow(clippy::too_many_arguments)]
fn descend(
    cuts: &[Vec<f64>],
    masks: &[Vec<Vec<u64>>],
    dim: usize,
    axis: usize,
    acc: &[u64],
    vol: f64,
    words: usize,
    g: &mut impl FnMut(f64, &[usize]),
) {
    if axis == dim {
        let mut active = Vec::new();
        for w in 0..words {
            let mut bits = acc[w];
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                active.push(w * 64 + b);
                bits &= bits - 1;
            }
        }
        if !active.is_empty() {
            g(vol, &active);
        }
        return;
    }
    let mut next = vec![0u64; words];
    for k in 0..cuts[axis].len() - 1 {
        let width = cuts[axis][k + 1] - cuts[axis][k];
        if width <= 0.0 {
            continue;
        }
        let m = &masks[axis][k];
        let mut any = 0u64;
        for w in 0..words {
            next[w] = acc[w] & m[w];
            any |= next[w];
        }
        if any == 0 {
            continue;
        }
        descend(cuts, masks, dim, axis + 1, &next.clone(), vol * width, words, g);
    }
}


/// Actual sweep cost estimate: product of deduplicated per-axis interval
/// counts, times the number of regions.
fn sweep_cost(regions: &[Region], dim: usize) -> u128 {
    let mut cells: u128 = 1;
    for c in 0..dim {
        let mut cuts: Vec<f64> = regions.iter().flat_map(|r| [r.lo[c], r.hi[c]]).collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        cells = cells.saturating_mul(cuts.len().saturating_sub(1).max(1) as u128);
    }
    cells.saturating_mul(regions.len() as u128)
}

const EXACT_ATOM_CAP: usize = 200;

fn exact_mode_available(space: &SpaceInfo, tau: &FiniteMeasure) -> bool {
    space.dim <= 3 && tau.len() <= EXACT_ATOM_CAP
}

/// Region x + B contains p_j iff x lies in the reversed box at p_j.
fn atom_box(p: &[f64], anchor: &[f64], sides: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let lo: Vec<f64> = p
        .iter()
        .zip(anchor.iter().zip(sides))
        .map(|(pc, (ac, sc))| pc - ac - sc)
        .collect();
    let hi: Vec<f64> = p.iter().zip(anchor).map(|(pc, ac)| pc - ac).collect();
    (lo, hi)
}

/// Homogeneous entropy of a box with respect to an atomic measure:
/// (1 / m(B)) * integral of -tau(x+B) log2 tau(x+B) dm(x).
pub fn hom_entropy(
    space: &SpaceInfo,
    tau: &FiniteMeasure,
    b: &BoxSpec,
    samples: usize,
    seed: u64,
) -> Result<EntropyEstimate, EntropyError> {
    if !b.injective(space) {
        return Err(EntropyError::NotInjective);
    }
    hom_entropy_inner(space, tau, b, samples, seed)
}

fn hom_entropy_inner(
    space: &SpaceInfo,
    tau: &FiniteMeasure,
    b: &BoxSpec,
    samples: usize,
    seed: u64,
) -> Result<EntropyEstimate, EntropyError> {
    let sides = b.coord_sides(space);
    if exact_mode_available(space, tau) {
        if let Some(comp) = build_components(
            space,
            &tau.points,
            |j| atom_box(&tau.points[j], &b.anchor, &sides).0,
            |j| atom_box(&tau.points[j], &b.anchor, &sides).1,
        ) {
            let mut integral = 0.0;
            for group in &comp.groups {
                let regions: Vec<Region> = group
                    .iter()
                    .map(|(j, shift)| {
                        let (lo, hi) = atom_box(&tau.points[*j], &b.anchor, &sides);
                        Region {
                            lo: lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
                            hi: hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
                            tag: *j,
                        }
                    })
                    .collect();
                sweep(&regions, space.dim, |vol, active| {
                    let mass: f64 = active.iter().map(|&ri| tau.weights[regions[ri].tag]).sum();
                    if mass > 0.0 {
                        integral += vol * (-mass * mass.log2());
                    }
                });
            }
            let volb: f64 = sides.iter().product();
            return Ok(EntropyEstimate { value: integral / volb, stderr: None, exact: true });
        }
    }
    Ok(mc_entropy(space, tau, b, samples, seed))
}

fn mc_entropy(
    space: &SpaceInfo,
    tau: &FiniteMeasure,
    b: &BoxSpec,
    samples: usize,
    seed: u64,
) -> EntropyEstimate {
    let sides = b.coord_sides(space);
    let volb: f64 = sides.iter().product();
    let volx = space.scale.powi(space.dim as i32);
    let mut rng = SplitMix64::new(seed);
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let fd_diam: f64 = space
        .psi
        .iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>().powi(2))
        .sum::<f64>()
        .sqrt();
    let shifts = space.lattice_shifts(fd_diam + b.diameter(space) + 1e-9);
    for _ in 0..samples {
        let y: Vec<f64> = (0..space.dim).map(|_| rng.next_f64()).collect();
        let x = space.apply(&space.psi, &y);
        let mut mass = 0.0;
        for (p, w) in tau.points.iter().zip(&tau.weights) {
            'sh: for g in &shifts {
                for c in 0..space.dim {
                    let rel = p[c] - x[c] - b.anchor[c] - g[c];
                    if !(0.0 <= rel && rel < sides[c]) {
                        continue 'sh;
                    }
                }
                mass += w;
                break;
            }
        }
        let v = if mass > 0.0 { -mass * mass.log2() } else { 0.0 };
        sum += v;
        sumsq += v * v;
    }
    let mean = sum / samples as f64;
    let var = (sumsq / samples as f64 - mean * mean).max(0.0);
    // Integral over X of the integrand, normalized by m(B) = volb / volx.
    let value = mean * volx / volb;
    let stderr = (var / samples as f64).sqrt() * volx / volb;
    EntropyEstimate { value, stderr: Some(stderr), exact: false }
}

/// Homogeneous conditional entropy of the dyadic refinement Q_t B. The
/// direct per-cell path is exact for coarse partitions; finer partitions
/// use the refinement identity H(B, Q_t B) = H(F_t B) - H(B).
pub fn hom_cond_entropy(
    space: &SpaceInfo,
    tau: &FiniteMeasure,
    b: &BoxSpec,
    t: &[u32],
    samples: usize,
    seed: u64,
) -> Result<EntropyEstimate, EntropyError> {
    if !b.injective(space) {
        return Err(EntropyError::NotInjective);
    }
    let cells: u64 = t
        .iter()
        .enumerate()
        .map(|(place, ti)| (1u64 << ti) as u64 * if space.weight(place) == 2 { 1 << ti } else { 1 })
        .product();
    if cells <= 1 << 12 {
        if let Some(v) = cond_entropy_direct(space, tau, b, t) {
            return Ok(v);
        }
    }
    // Refinement identity.
    let tf: Vec<f64> = t.iter().map(|&x| x as f64).collect();
    let fine = b.refined(&tf);
    let h_fine = hom_entropy_inner(space, tau, &fine, samples, seed)?;
    let h_base = hom_entropy_inner(space, tau, b, samples, seed.wrapping_add(1))?;
    Ok(EntropyEstimate {
        value: h_fine.value - h_base.value,
        stderr: match (h_fine.stderr, h_base.stderr) {
            (None, None) => None,
            (a, b) => Some(a.unwrap_or(0.0).hypot(b.unwrap_or(0.0))),
        },
        exact: h_fine.exact && h_base.exact,
    })
}

/// Tags for the direct conditional sweep: tag 0..n are the B-boxes, the
/// rest encode (atom, cell).
fn cond_entropy_direct(
    space: &SpaceInfo,
    tau: &FiniteMeasure,
    b: &BoxSpec,
    t: &[u32],
) -> Option<EntropyEstimate> {
    if !exact_mode_available(space, tau) {
        return None;
    }
    let n = tau.len();
    let sides = b.coord_sides(space);
    let comp = build_components(
        space,
        &tau.points,
        |j| atom_box(&tau.points[j], &b.anchor, &sides).0,
        |j| atom_box(&tau.points[j], &b.anchor, &sides).1,
    )?;
    // Per-coordinate split counts.
    let mut splits = vec![1u32; space.dim];
    for place in 0..space.places() {
        for c in space.coords_of_place(place) {
            splits[c] = 1 << t[place];
        }
    }
    let cell_count: usize = splits.iter().map(|&s| s as usize).product();
    let mut integral = 0.0;
    for group in &comp.groups {
        let mut regions = Vec::new();
        // B-level regions: tags 0..group.len() map to atom ids.
        let mut atom_of_tag = Vec::new();
        for (j, shift) in group {
            let (lo, hi) = atom_box(&tau.points[*j], &b.anchor, &sides);
            regions.push(Region {
                lo: lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
                hi: hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
                tag: atom_of_tag.len(),
            });
            atom_of_tag.push(*j);
        }
        let nb = regions.len();
        // Cell regions: tag nb + (local atom index * cell_count + cell id).
        for (local, (j, shift)) in group.iter().enumerate() {
            let mut cell_idx = vec![0u32; space.dim];
            for cid in 0..cell_count {
                let mut lo = Vec::with_capacity(space.dim);
                let mut hi = Vec::with_capacity(space.dim);
                for c in 0..space.dim {
                    let w = sides[c] / splits[c] as f64;
                    let a = b.anchor[c] + cell_idx[c] as f64 * w;
                    lo.push(tau.points[*j][c] - a - w + shift[c]);
                    hi.push(tau.points[*j][c] - a + shift[c]);
                }
                regions.push(Region { lo, hi, tag: nb + local * cell_count + cid });
                // Odometer over cells.
                let mut pos = 0;
                while pos < space.dim {
                    cell_idx[pos] += 1;
                    if cell_idx[pos] == splits[pos] {
                        cell_idx[pos] = 0;
                        pos += 1;
                    } else {
                        break;
                    }
                }
            }
        }
        let _ = n;
        if sweep_cost(&regions, space.dim) > 8_000_000_000 {
            return None;
        }
        sweep(&regions, space.dim, |vol, active| {
            let mut mass_b = 0.0;
            let mut cell_mass: BTreeMap<usize, f64> = BTreeMap::new();
            for &ri in active {
                let tag = regions[ri].tag;
                if tag < nb {
                    mass_b += tau.weights[atom_of_tag[tag]];
                } else {
                    let local = (tag - nb) / cell_count;
                    let cid = (tag - nb) % cell_count;
                    *cell_mass.entry(cid).or_insert(0.0) += tau.weights[atom_of_tag[local]];
                }
            }
            if mass_b <= 0.0 {
                return;
            }
            let mut g = 0.0;
            for (_cid, mq) in cell_mass {
                if mq > 0.0 {
                    g += -mq * (mq / mass_b).log2();
                }
            }
            integral += vol * g;
        });
    }
    let volb: f64 = sides.iter().product();
    Some(EntropyEstimate { value: integral / volb, stderr: None, exact: true })
}

/// Output of the positive-entropy scan.
#[derive(Clone, Debug)]
pub struct ScaleDirection {
    pub r_scale: f64,
    pub boxspec: BoxSpec,
    pub place: usize,
    pub conditional_full: f64,
    pub conditional_place: f64,
    /// Scanned profile (R, conditional entropy) for reporting.
    pub profile: Vec<(f64, f64)>,
    /// Admissibility report for the scanned ranges (informational).
    pub range_ok: bool,
}

/// Scan scales R = S + rT for the first box achieving the conditional
/// entropy bound (alpha - 3 delta) d T, then pick the direction with the
/// largest per-degree conditional entropy.
#[allow(clippy::too_many_arguments)]
pub fn positive_scale_direction(
    space: &SpaceInfo,
    tau: &FiniteMeasure,
    alpha: f64,
    delta: f64,
    t_step: u32,
    epsilon: f64,
    admissibility_factor: f64,
    samples: usize,
    seed: u64,
) -> Result<ScaleDirection, EntropyError> {
    let d = space.dim as f64;
    // Entropy hypothesis at scale epsilon, checked on the torus side.
    let mu = tau.pullback_to_torus(space);
    let h = grid_entropy(&mu, epsilon);
    let need = alpha * d * (1.0 / epsilon).log2();
    if h < need - 1e-9 {
        return Err(EntropyError::HypothesisFailed(h, need));
    }

    let r0 = (d.sqrt() * space.uniformity / epsilon).log2();
    let range_ok = delta >= admissibility_factor * space.uniformity.powi(space.dim as i32) / r0
        && (t_step as f64) <= delta * r0 / 2.0;

    let s_low = delta * r0;
    let p_steps = ((r0 - s_low) / t_step as f64).floor().max(0.0) as u32;
    let s_scale = r0 - p_steps as f64 * t_step as f64;
    let places = space.places();
    let bound = (alpha - 3.0 * delta) * d * t_step as f64;
    let mut profile = Vec::new();
    for r_idx in 0..p_steps.max(1) {
        let r_scale = s_scale + r_idx as f64 * t_step as f64;
        let b = BoxSpec::anchored_zero(vec![r_scale; places], space.dim);
        if !b.injective(space) {
            continue;
        }
        let t_all = vec![t_step; places];
        let h_full = hom_cond_entropy(space, tau, &b, &t_all, samples, seed)?;
        profile.push((r_scale, h_full.value));
        if h_full.value >= bound - 1e-9 {
            // Direction with maximal per-degree conditional entropy.
            let mut best: Option<(usize, f64, f64)> = None;
            for place in 0..places {
                let mut t_one = vec![0u32; places];
                t_one[place] = t_step;
                let h_i = hom_cond_entropy(space, tau, &b, &t_one, samples, seed)?;
                let per = h_i.value / space.weight(place) as f64;
                if best.as_ref().map(|(_, _, bp)| per > *bp).unwrap_or(true) {
                    best = Some((place, h_i.value, per));
                }
            }
            let (place, h_place, _) = best.unwrap();
            let need_place = (alpha - 3.0 * delta) * space.weight(place) as f64 * t_step as f64;
            if h_place >= need_place - 1e-9 {
                return Ok(ScaleDirection {
                    r_scale,
                    boxspec: b,
                    place,
                    conditional_full: h_full.value,
                    conditional_place: h_place,
                    profile,
                    range_ok,
                });
            }
        }
    }
    Err(EntropyError::NotFound(profile))
}

/// The dominated measure: restriction of tau to the light partition cells.
#[derive(Clone, Debug)]
pub struct NuData {
    pub r_scale: f64,
    pub t_step: u32,
    pub place: usize,
    pub boxspec: BoxSpec,
    pub nu: FiniteMeasure,
    pub mass: f64,
    pub mass_floor: f64,
    /// E sum_Q nu_x^2(x+Q), bounded by 2^(-d_i delta T).
    pub l2_statistic: f64,
    pub l2_bound: f64,
    pub exact: bool,
}

/// Build nu by averaging the per-box light-cell restrictions of tau.
pub fn build_nu(
    space: &SpaceInfo,
    tau: &FiniteMeasure,
    scan: &ScaleDirection,
    t_step: u32,
    delta: f64,
) -> Result<NuData, EntropyError> {
    if (delta * t_step as f64) < 1.0 - 1e-12 {
        return Err(EntropyError::DeltaTTooSmall);
    }
    let b = &scan.boxspec;
    if !b.injective(space) {
        return Err(EntropyError::NotInjective);
    }
    if !exact_mode_available(space, tau) {
        return Err(EntropyError::DimensionBudget);
    }
    let d_i = space.weight(scan.place) as f64;
    let threshold = 2f64.powf(-d_i * delta * t_step as f64);
    let sides = b.coord_sides(space);
    let comp = build_components(
        space,
        &tau.points,
        |j| atom_box(&tau.points[j], &b.anchor, &sides).0,
        |j| atom_box(&tau.points[j], &b.anchor, &sides).1,
    )
    .ok_or(EntropyError::DimensionBudget)?;

    let mut splits = vec![1u32; space.dim];
    for c in space.coords_of_place(scan.place) {
        splits[c] = 1 << t_step;
    }
    let cell_count: usize = splits.iter().map(|&s| s as usize).product();
    if cell_count > 1 << 14 {
        return Err(EntropyError::PartitionBudget);
    }

    let mut nu_w = vec![0.0; tau.len()];
    let mut l2 = 0.0;
    let volb: f64 = sides.iter().product();
    for group in &comp.groups {
        let mut regions = Vec::new();
        let mut atom_of_tag = Vec::new();
        for (j, shift) in group {
            let (lo, hi) = atom_box(&tau.points[*j], &b.anchor, &sides);
            regions.push(Region {
                lo: lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
                hi: hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
                tag: atom_of_tag.len(),
            });
            atom_of_tag.push(*j);
        }
        let nb = regions.len();
        for (local, (j, shift)) in group.iter().enumerate() {
            let mut cell_idx = vec![0u32; space.dim];
            for cid in 0..cell_count {
                let mut lo = Vec::with_capacity(space.dim);
                let mut hi = Vec::with_capacity(space.dim);
                for c in 0..space.dim {
                    let w = sides[c] / splits[c] as f64;
                    let a = b.anchor[c] + cell_idx[c] as f64 * w;
                    lo.push(tau.points[*j][c] - a - w + shift[c]);
                    hi.push(tau.points[*j][c] - a + shift[c]);
                }
                regions.push(Region { lo, hi, tag: nb + local * cell_count + cid });
                let mut pos = 0;
                while pos < space.dim {
                    cell_idx[pos] += 1;
                    if cell_idx[pos] == splits[pos] {
                        cell_idx[pos] = 0;
                        pos += 1;
                    } else {
                        break;
                    }
                }
            }
        }
        if sweep_cost(&regions, space.dim) > 40_000_000_000 {
            return Err(EntropyError::PartitionBudget);
        }
        sweep(&regions, space.dim, |vol, active| {
            let mut mass_b = 0.0;
            let mut cell_mass: BTreeMap<usize, f64> = BTreeMap::new();
            let mut atom_cell: Vec<(usize, usize)> = Vec::new();
            for &ri in active {
                let tag = regions[ri].tag;
                if tag < nb {
                    mass_b += tau.weights[atom_of_tag[tag]];
                } else {
                    let local = (tag - nb) / cell_count;
                    let cid = (tag - nb) % cell_count;
                    *cell_mass.entry(cid).or_insert(0.0) += tau.weights[atom_of_tag[local]];
                    atom_cell.push((local, cid));
                }
            }
            if mass_b <= 0.0 {
                return;
            }
            for (local, cid) in &atom_cell {
                let mq = cell_mass[cid];
                if mq <= threshold * mass_b {
                    nu_w[atom_of_tag[*local]] += vol * tau.weights[atom_of_tag[*local]] / volb;
                }
            }
            let mut light_sq = 0.0;
            for (_cid, mq) in &cell_mass {
                if *mq <= threshold * mass_b {
                    light_sq += (mq / mass_b) * (mq / mass_b);
                }
            }
            l2 += vol * light_sq * mass_b / volb;
        });
    }
    let nu = FiniteMeasure::new(space.dim, tau.points.clone(), nu_w);
    let mass = nu.total_mass();
    Ok(NuData {
        r_scale: scan.r_scale,
        t_step,
        place: scan.place,
        boxspec: b.clone(),
        mass,
        mass_floor: f64::NAN, // caller records alpha - 5 delta
        l2_statistic: l2,
        l2_bound: threshold,
        nu,
        exact: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sep_points(n: usize, dim: usize) -> Vec<Vec<f64>> {
        // n well-separated points on a coarse grid in [0,1)^dim.
        let per = (n as f64).powf(1.0 / dim as f64).ceil() as usize;
        let mut out = Vec::new();
        'outer: for i in 0..per {
            for j in 0..per {
                for k in 0..per {
                    out.push(vec![
                        (0.07 + i as f64) / per as f64,
                        (0.13 + j as f64) / per as f64,
                        (0.29 + k as f64) / per as f64,
                    ]);
                    if out.len() == n {
                        break 'outer;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn grid_entropy_cases() {
        let single = FiniteMeasure::uniform(3, vec![vec![0.3, 0.4, 0.5]]);
        assert_eq!(grid_entropy(&single, 0.1), 0.0);

        let pts = sep_points(16, 3);
        let mu = FiniteMeasure::uniform(3, pts);
        let h = grid_entropy(&mu, 0.05);
        assert!((h - 4.0).abs() < 1e-12, "h = {h}");

        let two = FiniteMeasure::new(
            2,
            vec![vec![0.1, 0.1], vec![0.6, 0.6]],
            vec![0.75, 0.25],
        );
        let h2 = grid_entropy(&two, 0.5);
        let want = 2.0 - 0.75 * 3f64.log2();
        assert!((h2 - want).abs() < 1e-12);
    }

    #[test]
    fn hom_entropy_well_separated_atoms() {
        let space = SpaceInfo::torus(3);
        let pts = sep_points(8, 3);
        let tau = FiniteMeasure::uniform(3, pts);
        // Boxes smaller than the separation: entropy is exactly log2 N.
        let b = BoxSpec::anchored_zero(vec![5.0, 5.0, 5.0], 3);
        let est = hom_entropy(&space, &tau, &b, 0, 0).unwrap();
        assert!(est.exact);
        assert!((est.value - 3.0).abs() < 1e-12, "value {}", est.value);

        // Single atom: zero entropy.
        let one = FiniteMeasure::uniform(3, vec![vec![0.5, 0.5, 0.5]]);
        let est1 = hom_entropy(&space, &one, &b, 0, 0).unwrap();
        assert_eq!(est1.value, 0.0);
    }

    #[test]
    fn hom_entropy_translation_invariance() {
        let space = SpaceInfo::torus(3);
        let tau = FiniteMeasure::uniform(3, sep_points(10, 3));
        let b = BoxSpec::anchored_zero(vec![3.0, 3.0, 3.0], 3);
        let mut shifted = b.clone();
        shifted.anchor = vec![0.217, -0.09, 0.044];
        let a = hom_entropy(&space, &tau, &b, 0, 0).unwrap();
        let c = hom_entropy(&space, &tau, &shifted, 0, 0).unwrap();
        assert!(a.exact && c.exact);
        assert!((a.value - c.value).abs() < 1e-12);
    }

    #[test]
    fn injectivity_gate() {
        let space = SpaceInfo::torus(3);
        let tau = FiniteMeasure::uniform(3, sep_points(4, 3));
        let too_coarse = BoxSpec::anchored_zero(vec![0.0, 0.0, 0.0], 3);
        assert!(matches!(
            hom_entropy(&space, &tau, &too_coarse, 0, 0),
            Err(EntropyError::NotInjective)
        ));
    }

    #[test]
    fn conditional_entropy_bounds_and_chain_rule() {
        let space = SpaceInfo::torus(3);
        let tau = FiniteMeasure::uniform(3, sep_points(20, 3));
        let b = BoxSpec::anchored_zero(vec![2.0, 2.0, 2.0], 3);
        let t = vec![2u32, 1, 0];
        let direct = cond_entropy_direct(&space, &tau, &b, &t).unwrap();
        assert!(direct.exact);
        // Upper bound log2 |Q|.
        let cells: f64 = 2f64.powi(3);
        assert!(direct.value <= cells.log2() + 1e-12);
        // Chain rule: H(F_t B) = H(B) + H(B, Q_t B).
        let tf: Vec<f64> = t.iter().map(|&x| x as f64).collect();
        let h_fine = hom_entropy(&space, &tau, &b.refined(&tf), 0, 0).unwrap();
        let h_base = hom_entropy(&space, &tau, &b, 0, 0).unwrap();
        assert!(h_fine.exact && h_base.exact);
        assert!(
            (h_fine.value - h_base.value - direct.value).abs() < 2f64.powi(-32),
            "chain rule deviation {}",
            (h_fine.value - h_base.value - direct.value).abs()
        );
        // Trivial refinement.
        let zero = hom_cond_entropy(&space, &tau, &b, &[0, 0, 0], 0, 0).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn subadditivity_on_instance() {
        let space = SpaceInfo::torus(3);
        let tau = FiniteMeasure::uniform(3, sep_points(30, 3));
        let b = BoxSpec::anchored_zero(vec![2.0, 2.0, 2.0], 3);
        // Q = refinement along place 0, Q' along place 1; the join is the
        // simultaneous refinement.
        let h_q = hom_cond_entropy(&space, &tau, &b, &[2, 0, 0], 0, 0).unwrap();
        let h_q2 = hom_cond_entropy(&space, &tau, &b, &[0, 2, 0], 0, 0).unwrap();
        let h_join = hom_cond_entropy(&space, &tau, &b, &[2, 2, 0], 0, 0).unwrap();
        assert!(h_join.value <= h_q.value + h_q2.value + 1e-9);
    }

    #[test]
    fn chain_rule_two_step_refinement() {
        let space = SpaceInfo::torus(3);
        let tau = FiniteMeasure::uniform(3, sep_points(12, 3));
        let b = BoxSpec::anchored_zero(vec![2.0, 2.0, 2.0], 3);
        // Two-step: H(B, Q_(t+s) B) = H(B, Q_t B) + H(F_t B, Q_s F_t B).
        let h_ts = hom_cond_entropy(&space, &tau, &b, &[2, 0, 0], 0, 0).unwrap();
        let h_t = hom_cond_entropy(&space, &tau, &b, &[1, 0, 0], 0, 0).unwrap();
        let fine = b.refined(&[1.0, 0.0, 0.0]);
        let h_s = hom_cond_entropy(&space, &tau, &fine, &[1, 0, 0], 0, 0).unwrap();
        assert!(
            (h_ts.value - h_t.value - h_s.value).abs() < 2f64.powi(-32),
            "two-step refinement mismatch"
        );
    }

    #[test]
    fn quotient_space_entropy() {
        let conj = crate::fixtures::cubic_conjugacy(128);
        let space = SpaceInfo::from_conjugacy(&conj);
        let mu = FiniteMeasure::uniform(3, sep_points(16, 3));
        let tau = mu.pushforward_to_quotient(&space);
        let w0 = ((space.dim as f64).sqrt() * space.uniformity).log2() + 2.0;
        let b = BoxSpec::anchored_zero(vec![w0; 3], 3);
        let exact = hom_entropy(&space, &tau, &b, 0, 0).unwrap();
        assert!(exact.exact);
        // Monte Carlo agrees within a few standard errors.
        let mc = mc_entropy(&space, &tau, &b, 60_000, 17);
        let err = mc.stderr.unwrap();
        assert!(
            (mc.value - exact.value).abs() < 6.0 * err + 1e-6,
            "mc {} exact {} err {}",
            mc.value,
            exact.value,
            err
        );
    }

    #[test]
    fn probability_of_box_average() {
        // m_{tau, B} is a probability measure: integral of tau(x+B) over X
        // equals |tau| * m(B); with uniform tau this is m(B).
        let space = SpaceInfo::torus(3);
        let tau = FiniteMeasure::uniform(3, sep_points(9, 3));
        let b = BoxSpec::anchored_zero(vec![3.0, 3.0, 3.0], 3);
        let sides = b.coord_sides(&space);
        let comp = build_components(
            &space,
            &tau.points,
            |j| atom_box(&tau.points[j], &b.anchor, &sides).0,
            |j| atom_box(&tau.points[j], &b.anchor, &sides).1,
        )
        .unwrap();
        let mut integral = 0.0;
        for group in &comp.groups {
            let regions: Vec<Region> = group
                .iter()
                .map(|(j, shift)| {
                    let (lo, hi) = atom_box(&tau.points[*j], &b.anchor, &sides);
                    Region {
                        lo: lo.iter().zip(shift).map(|(a, s)| a + s).collect(),
                        hi: hi.iter().zip(shift).map(|(a, s)| a + s).collect(),
                        tag: *j,
                    }
                })
                .collect();
            sweep(&regions, space.dim, |vol, active| {
                let mass: f64 = active.iter().map(|&ri| tau.weights[regions[ri].tag]).sum();
                integral += vol * mass;
            });
        }
        let volb: f64 = sides.iter().product();
        assert!((integral / volb - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scan_and_nu_construction() {
        // Coarse 4x4x4 grid, viewed as a 2^-16-separated set: alpha from
        // log2(64) = alpha * 3 * 16.
        let space = SpaceInfo::torus(3);
        let pts = sep_points(64, 3);
        let tau = FiniteMeasure::uniform(3, pts);
        let epsilon = 2f64.powi(-16);
        let alpha = 6.0 / 48.0;
        let delta = 0.25;
        let t_step = 4u32;
        let scan = positive_scale_direction(
            &space, &tau, alpha, delta, t_step, epsilon, 1.0, 0, 0,
        )
        .unwrap();
        assert!(scan.conditional_full >= (alpha - 3.0 * delta) * 3.0 * t_step as f64 - 1e-9);
        let nu = build_nu(&space, &tau, &scan, t_step, delta).unwrap();
        for (a, b) in nu.nu.weights.iter().zip(&tau.weights) {
            assert!(*a <= *b + 1e-12);
        }
        assert!(nu.mass >= alpha - 5.0 * delta - 1e-9);
        assert!(nu.l2_statistic <= nu.l2_bound + 1e-12);
    }

    #[test]
    fn nu_light_cells_carry_mass() {
        // 64 atoms on a fine line: partition cells stay far below the
        // heavy-cell threshold, so nu keeps most of tau's mass.
        let space = SpaceInfo::torus(3);
        let pts: Vec<Vec<f64>> = (0..64)
            .map(|k| vec![0.2 + k as f64 * 2f64.powi(-10), 0.31, 0.47])
            .collect();
        let tau = FiniteMeasure::uniform(3, pts);
        let scan = positive_scale_direction(
            &space, &tau, 6.0 / 48.0, 0.25, 4, 2f64.powi(-16), 1.0, 0, 0,
        )
        .unwrap();
        // The line concentrates conditional entropy in the first direction.
        assert_eq!(scan.place, 0);
        let nu = build_nu(&space, &tau, &scan, 4, 0.25).unwrap();
        assert!(nu.mass > 0.5, "expected substantial light mass, got {}", nu.mass);
        assert!(nu.l2_statistic <= nu.l2_bound + 1e-12);
        for (a, b) in nu.nu.weights.iter().zip(&tau.weights) {
            assert!(*a <= *b + 1e-12);
        }
    }

    #[test]
    fn heavy_single_atoms_are_excluded() {
        // Well-separated atoms at box scale: the only occupied cell is
        // heavy, so nu vanishes.
        let space = SpaceInfo::torus(3);
        let tau = FiniteMeasure::uniform(3, sep_points(8, 3));
        let scan = positive_scale_direction(
            &space, &tau, 3.0 / 48.0, 0.25, 4, 2f64.powi(-16), 1.0, 0, 0,
        )
        .unwrap();
        let nu = build_nu(&space, &tau, &scan, 4, 0.25).unwrap();
        assert!(nu.mass < 1e-12);
    }

    #[test]
    fn scan_fails_on_single_atom() {
        let space = SpaceInfo::torus(3);
        let tau = FiniteMeasure::uniform(3, vec![vec![0.4, 0.2, 0.7]]);
        let r = positive_scale_direction(&space, &tau, 0.5, 0.05, 2, 2f64.powi(-4), 1.0, 0, 0);
        assert!(matches!(
            r,
            Err(EntropyError::HypothesisFailed(_, _)) | Err(EntropyError::NotFound(_))
        ));
    }

    #[test]
    fn delta_t_gate() {
        let space = SpaceInfo::torus(3);
        let tau = FiniteMeasure::uniform(3, sep_points(64, 3));
        let scan = positive_scale_direction(
            &space, &tau, 6.0 / 48.0, 0.25, 4, 2f64.powi(-16), 1.0, 0, 0,
        )
        .unwrap();
        assert!(matches!(
            build_nu(&space, &tau, &scan, 2, 0.25),
            Err(EntropyError::DeltaTTooSmall)
        ));
    }
}
