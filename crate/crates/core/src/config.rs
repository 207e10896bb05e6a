//! Run configuration: working precision, tunable constants, budgets, and the
//! deterministic PRNG used for all sampling.

use serde::{Deserialize, Serialize};

/// Tunable analogues of the effective constants appearing in the bound
/// formulas. The underlying theory only guarantees existence of admissible
/// values; defaults of 1 keep desk-scale instances runnable, and range
/// checks against them are reported rather than enforced unless
/// `strict_ranges` is set.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Constants {
    /// Multiplies the fundamental-unit size in the totally-irreducible
    /// witness height budget.
    pub witness_height_factor: f64,
    /// Multiplies F^2 in the escape-sequence offset exponent.
    pub escape_offset_factor: f64,
    /// Lower threshold factor for the progression length s.
    pub progression_length_factor: f64,
    /// Exponent factor in the reported lower bound on the progression step.
    pub progression_step_exponent: f64,
    /// Multiplies F^2 log l in the escape-band width bound.
    pub band_exponent_factor: f64,
    /// Scale admissibility factor in the entropy-range checks.
    pub admissibility_factor: f64,
    /// Override for the degree-only lower bound on unit heights; when unset
    /// the default (1/(4d)) * (log2 log2 max(d,3) / log2 max(d,3))^3 is used.
    pub unit_height_floor: Option<f64>,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            witness_height_factor: 1.0,
            escape_offset_factor: 1.0,
            progression_length_factor: 1.0,
            progression_step_exponent: 1.0,
            band_exponent_factor: 1.0,
            admissibility_factor: 1.0,
            unit_height_floor: None,
        }
    }
}

impl Constants {
    /// Degree-only positive floor for heights of non-torsion units.
    pub fn height_floor(&self, degree: usize) -> f64 {
        if let Some(v) = self.unit_height_floor {
            return v;
        }
        let d = degree.max(3) as f64;
        let l = d.log2();
        let ll = l.log2();
        (ll / l).powi(3) / (4.0 * degree as f64)
    }
}

/// Enumeration and compute budgets. All positive.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct Budgets {
    /// Cap on elements returned by Mahler-ball enumeration.
    pub ball_elements: usize,
    /// Cap on frequency-sweep points.
    pub sweep_points: usize,
    /// Cap on ideal norms in residue-class sweeps.
    pub ideal_norm: u64,
    /// Cap on the exhaustive pigeonhole range; larger ranges switch to the
    /// continued-fraction / lattice-reduction path.
    pub pigeonhole_exhaustive: u128,
    /// Cap on the progression length s accepted by the parameter planner.
    pub progression_length: u64,
    /// Cap on materialized atoms of an averaged measure.
    pub measure_atoms: usize,
    /// Cap on lattice points visited by a single enumeration box.
    pub enumeration_points: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            ball_elements: 200_000,
            sweep_points: 2_000_000,
            ideal_norm: 500,
            pigeonhole_exhaustive: 1 << 36,
            progression_length: 1_000_000,
            measure_atoms: 1 << 21,
            enumeration_points: 20_000_000,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    pub precision_bits: usize,
    pub constants: Constants,
    pub seed: u64,
    pub budgets: Budgets,
    pub strict_ranges: bool,
    pub monte_carlo_samples: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision_bits: 128,
            constants: Constants::default(),
            seed: 0,
            budgets: Budgets::default(),
            strict_ranges: false,
            monte_carlo_samples: 100_000,
        }
    }
}

impl RunConfig {
    /// Coarse comparison tolerance 2^(-p/4).
    pub fn tol_quarter(&self) -> f64 {
        2f64.powi(-((self.precision_bits / 4) as i32))
    }

    /// Fine certification tolerance 2^(-p/2).
    pub fn tol_half(&self) -> f64 {
        2f64.powi(-((self.precision_bits / 2) as i32))
    }
}

/// SplitMix64 stream. Fixed algorithm so outputs are reproducible across
/// platforms and releases; `split` derives independent substreams.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform integer in [0, n).
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        // Rejection-free (bias negligible at desk scale is not acceptable
        // for byte-reproducibility goals, so use multiply-shift which is
        // deterministic albeit with 2^-64 bias).
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Derived independent stream for worker `index`.
    pub fn split(&self, index: u64) -> SplitMix64 {
        let mut fork = SplitMix64::new(self.state ^ 0xA5A5A5A5A5A5A5A5u64.wrapping_mul(index.wrapping_add(1)));
        fork.next_u64();
        fork
    }
}
