//! Heat-bath dynamics for a square lattice of ±1 spins with a global
//! feedback coupling.
//!
//! Each site carries a spin `s ∈ {−1, +1}`. The local field at site `i` is
//!
//! ```text
//! h_i = J · Σ_neighbors s_j − α · s_i · |M|
//! ```
//!
//! where `M` is the instantaneous mean spin (magnetization) of the whole
//! lattice and the sum runs over the four nearest neighbors with periodic
//! boundaries. The second term couples every site to the global state: a
//! site aligned with a strong net magnetization sees a field pushing it to
//! flip, which is what keeps the system in its intermittent regime instead
//! of freezing. Setting `alpha = 0` recovers the standard Ising model under
//! heat-bath dynamics.
//!
//! Updates pick sites uniformly at random (with replacement) and set the new
//! spin to `+1` with probability `1 / (1 + exp(−2βh_i))`, independent of the
//! old value. `|M|` is recomputed from the running spin sum before every
//! single update, not once per sweep. One sweep is defined as `N = L²`
//! consecutive updates.

use rand::Rng;

use crate::{config::InitMode, Error, Result};

/// Coupling constants of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Inverse temperature β.
    pub beta: f64,
    /// Strength of the global feedback term.
    pub alpha: f64,
    /// Nearest-neighbor coupling J.
    pub coupling: f64,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "beta must be finite and > 0, got {}",
                self.beta
            )));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "alpha must be finite and >= 0, got {}",
                self.alpha
            )));
        }
        if !self.coupling.is_finite() || self.coupling <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "J must be finite and > 0, got {}",
                self.coupling
            )));
        }
        Ok(())
    }
}

/// Snapshot emitted after every spin update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TickEvent {
    /// Number of updates performed since the counter was last reset
    /// (1 for the first update after a reset).
    pub update_index: u64,
    /// Sum of all spins after this update.
    pub spin_sum: i64,
}

/// Consumer of the per-update tick stream.
///
/// Sinks may fail (e.g. when writing a tick dump); the error aborts the
/// sweep and propagates to the caller. The lattice itself stays valid.
pub trait TickSink {
    fn on_tick(&mut self, tick: TickEvent) -> Result<()>;
}

/// Sink that discards every tick. Used for thermalization.
pub struct NullSink;

impl TickSink for NullSink {
    #[inline]
    fn on_tick(&mut self, _tick: TickEvent) -> Result<()> {
        Ok(())
    }
}

/// Probability that a spin in local field `h` at inverse temperature `beta`
/// is set to `+1` by a heat-bath update: `1 / (1 + exp(−2βh))`.
///
/// Evaluated through the branch that only ever exponentiates a non-positive
/// argument, so it never overflows and stays accurate in both tails.
#[inline]
pub fn heat_bath_prob(beta: f64, h: f64) -> f64 {
    let x = 2.0 * beta * h;
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Square lattice of ±1 spins with periodic boundaries.
///
/// The spin sum is tracked incrementally in integer arithmetic, so the
/// magnetization used in the local field is always exact.
pub struct SpinLattice {
    side: usize,
    spins: Vec<i8>,
    /// Four nearest neighbors of each site, precomputed.
    neighbors: Vec<[u32; 4]>,
    spin_sum: i64,
    updates: u64,
}

impl SpinLattice {
    /// Build an `side × side` lattice. `Ordered` starts all spins at `+1`
    /// and leaves the generator untouched; `Random` draws each spin
    /// independently with equal probability.
    pub fn new<R: Rng>(side: usize, mode: InitMode, rng: &mut R) -> Result<Self> {
        if side < 2 {
            return Err(Error::InvalidConfig(format!(
                "lattice side must be at least 2, got {side}"
            )));
        }
        let n = side
            .checked_mul(side)
            .filter(|&n| n <= u32::MAX as usize)
            .ok_or_else(|| {
                Error::InvalidConfig(format!("lattice side {side} is too large"))
            })?;

        let spins: Vec<i8> = match mode {
            InitMode::Ordered => vec![1; n],
            InitMode::Random => (0..n)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect(),
        };
        let spin_sum = spins.iter().map(|&s| i64::from(s)).sum();

        let mut neighbors = Vec::with_capacity(n);
        for site in 0..n {
            let row = site / side;
            let col = site % side;
            let up = (row + side - 1) % side;
            let down = (row + 1) % side;
            let left = (col + side - 1) % side;
            let right = (col + 1) % side;
            neighbors.push([
                (up * side + col) as u32,
                (down * side + col) as u32,
                (row * side + left) as u32,
                (row * side + right) as u32,
            ]);
        }

        Ok(SpinLattice {
            side,
            spins,
            neighbors,
            spin_sum,
            updates: 0,
        })
    }

    /// All-up lattice without touching any RNG.
    pub fn ordered(side: usize) -> Result<Self> {
        struct NoRng;
        // InitMode::Ordered never samples, so a panicking RNG documents that.
        impl rand::RngCore for NoRng {
            fn next_u32(&mut self) -> u32 {
                unreachable!("ordered init draws no randomness")
            }
            fn next_u64(&mut self) -> u64 {
                unreachable!("ordered init draws no randomness")
            }
            fn fill_bytes(&mut self, _dest: &mut [u8]) {
                unreachable!("ordered init draws no randomness")
            }
        }
        Self::new(side, InitMode::Ordered, &mut NoRng)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_sites(&self) -> usize {
        self.spins.len()
    }

    pub fn spin(&self, site: usize) -> i8 {
        self.spins[site]
    }

    /// Current sum of all spins (tracked incrementally).
    pub fn spin_sum(&self) -> i64 {
        self.spin_sum
    }

    /// Mean spin `M ∈ [−1, 1]`.
    pub fn magnetization(&self) -> f64 {
        self.spin_sum as f64 / self.num_sites() as f64
    }

    /// Number of updates since construction or the last counter reset.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Reset the update counter (e.g. at the start of the measurement
    /// phase) so tick indices count from 1 again.
    pub fn reset_update_counter(&mut self) {
        self.updates = 0;
    }

    /// Recount the spin sum from scratch. Used to audit the incremental
    /// bookkeeping; always equals [`SpinLattice::spin_sum`].
    pub fn recount_spin_sum(&self) -> i64 {
        self.spins.iter().map(|&s| i64::from(s)).sum()
    }

    /// Local field at `site`, using the exact current magnetization.
    #[inline]
    pub fn local_field(&self, site: usize, params: &ModelParams) -> f64 {
        let nb = self.neighbors[site];
        let neighbor_sum = i32::from(self.spins[nb[0] as usize])
            + i32::from(self.spins[nb[1] as usize])
            + i32::from(self.spins[nb[2] as usize])
            + i32::from(self.spins[nb[3] as usize]);
        let m_abs = (self.spin_sum.unsigned_abs() as f64) / self.num_sites() as f64;
        params.coupling * f64::from(neighbor_sum)
            - params.alpha * f64::from(self.spins[site]) * m_abs
    }

    /// One heat-bath update of `site`: draw the new spin from the
    /// conditional distribution given the rest of the lattice. Consumes
    /// exactly one `f64` from the generator.
    #[inline]
    pub fn update_site<R: Rng>(
        &mut self,
        site: usize,
        params: &ModelParams,
        rng: &mut R,
    ) -> TickEvent {
        let h = self.local_field(site, params);
        let p_up = heat_bath_prob(params.beta, h);
        let new: i8 = if rng.random::<f64>() < p_up { 1 } else { -1 };
        let old = self.spins[site];
        self.spins[site] = new;
        self.spin_sum += i64::from(new) - i64::from(old);
        self.updates += 1;
        TickEvent {
            update_index: self.updates,
            spin_sum: self.spin_sum,
        }
    }

    /// One sweep = `N` updates of uniformly chosen sites (with
    /// replacement), each reported to `sink` in order.
    pub fn sweep<R: Rng, S: TickSink>(
        &mut self,
        params: &ModelParams,
        rng: &mut R,
        sink: &mut S,
    ) -> Result<()> {
        let n = self.num_sites();
        for _ in 0..n {
            let site = rng.random_range(0..n);
            let tick = self.update_site(site, params, rng);
            sink.on_tick(tick)?;
        }
        Ok(())
    }

    /// Run `count` sweeps discarding all ticks.
    pub fn thermalize<R: Rng>(
        &mut self,
        params: &ModelParams,
        rng: &mut R,
        count: usize,
    ) -> Result<()> {
        let mut sink = NullSink;
        for _ in 0..count {
            self.sweep(params, rng, &mut sink)?;
        }
        Ok(())
    }
}
