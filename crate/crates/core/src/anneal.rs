//! QUBO samplers: Metropolis simulated annealing plus exhaustive and greedy solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::qubo::QuboMatrix;

/// Largest instance [`brute_force`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub num_reads: usize,
    pub sweeps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub seed: u64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            num_reads: 50,
            sweeps: 1000,
            beta_start: 0.1,
            beta_end: 10.0,
            seed: 0,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 || self.sweeps == 0 {
            return Err(Error::InvalidParameter(
                "num_reads and sweeps must be >= 1".into(),
            ));
        }
        if !(self.beta_start > 0.0 && self.beta_start < self.beta_end && self.beta_end.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "need 0 < beta_start < beta_end, got {} and {}",
                self.beta_start, self.beta_end
            )));
        }
        Ok(())
    }

    /// Inverse temperature at sweep `s`, geometric from `beta_start` to `beta_end`.
    pub fn beta_at(&self, s: usize) -> f64 {
        if self.sweeps == 1 {
            return self.beta_end;
        }
        let t = s as f64 / (self.sweeps - 1) as f64;
        self.beta_start * (self.beta_end / self.beta_start).powf(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub best_assignment: Vec<u8>,
    pub best_energy: f64,
    /// Best energy of each read (one entry for single-shot solvers).
    pub energies: Vec<f64>,
}

pub fn energy(q: &QuboMatrix, alpha: &[u8]) -> Result<f64> {
    check_len("assignment", q.size(), alpha.len())?;
    Ok(energy_unchecked(q, alpha))
}

fn energy_unchecked(q: &QuboMatrix, alpha: &[u8]) -> f64 {
    let mut e = 0.0;
    for (i, &ai) in alpha.iter().enumerate() {
        if ai == 0 {
            continue;
        }
        for (j, &aj) in alpha.iter().enumerate() {
            if aj == 1 {
                e += q.get(i, j);
            }
        }
    }
    e
}

/// Flip bookkeeping: `field[i] = Σ_{j≠i} (q[i][j] + q[j][i]) αⱼ`, so flipping `i`
/// changes the energy by `±(q[i][i] + field[i])`.
struct LocalFields<'a> {
    q: &'a QuboMatrix,
    coupling: Vec<f64>,
    field: Vec<f64>,
    alpha: Vec<u8>,
    energy: f64,
}

impl<'a> LocalFields<'a> {
    fn new(q: &'a QuboMatrix, alpha: Vec<u8>) -> Self {
        let n = q.size();
        let mut coupling = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    coupling[i * n + j] = q.get(i, j) + q.get(j, i);
                }
            }
        }
        let field = (0..n)
            .map(|i| {
                (0..n)
                    .filter(|&j| alpha[j] == 1)
                    .map(|j| coupling[i * n + j])
                    .sum()
            })
            .collect();
        let energy = energy_unchecked(q, &alpha);
        Self {
            q,
            coupling,
            field,
            alpha,
            energy,
        }
    }

    fn delta(&self, i: usize) -> f64 {
        let d = self.q.get(i, i) + self.field[i];
        if self.alpha[i] == 0 {
            d
        } else {
            -d
        }
    }

    fn flip(&mut self, i: usize, delta: f64) {
        let n = self.alpha.len();
        let sign = if self.alpha[i] == 0 { 1.0 } else { -1.0 };
        self.alpha[i] ^= 1;
        self.energy += delta;
        let row = &self.coupling[i * n..(i + 1) * n];
        for (f, c) in self.field.iter_mut().zip(row) {
            *f += sign * c;
        }
    }
}

fn random_assignment(n: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    (0..n).map(|_| u8::from(rng.random::<bool>())).collect()
}

struct ReadOutcome {
    assignment: Vec<u8>,
    energy: f64,
}

fn anneal_read(
    q: &QuboMatrix,
    schedule: &AnnealSchedule,
    read: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> ReadOutcome {
    let n = q.size();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.seed.wrapping_add(read as u64));
    let mut state = LocalFields::new(q, random_assignment(n, &mut rng));
    let mut best = state.alpha.clone();
    let mut best_energy = state.energy;
    for s in 0..schedule.sweeps {
        let beta = schedule.beta_at(s);
        for i in 0..n {
            let d = state.delta(i);
            if d <= 0.0 || rng.random::<f64>() < (-beta * d).exp() {
                state.flip(i, d);
                if state.energy < best_energy {
                    best_energy = state.energy;
                    best.clone_from(&state.alpha);
                }
            }
        }
        if let Some(t) = trace.as_deref_mut() {
            t.push(best_energy);
        }
    }
    // Report the exact energy of the kept assignment, not the running sum.
    let energy = energy_unchecked(q, &best);
    ReadOutcome {
        assignment: best,
        energy,
    }
}

/// Picks the lowest energy; equal energies go to the earlier entry.
fn reduce(outcomes: Vec<ReadOutcome>) -> SampleResult {
    let energies: Vec<f64> = outcomes.iter().map(|o| o.energy).collect();
    let mut best_idx = 0;
    for (i, e) in energies.iter().enumerate() {
        if *e < energies[best_idx] {
            best_idx = i;
        }
    }
    let best_energy = energies[best_idx];
    SampleResult {
        best_assignment: outcomes
            .into_iter()
            .nth(best_idx)
            .map(|o| o.assignment)
            .unwrap_or_default(),
        best_energy,
        energies,
    }
}

/// Single-bit-flip Metropolis annealing. Read `r` uses the stream seeded with
/// `seed + r`, so reads run in parallel without changing the result.
pub fn simulated_anneal(q: &QuboMatrix, schedule: &AnnealSchedule) -> Result<SampleResult> {
    schedule.validate()?;
    if q.size() == 0 {
        return Err(Error::Empty("qubo"));
    }
    let outcomes: Vec<ReadOutcome> = (0..schedule.num_reads)
        .into_par_iter()
        .map(|r| anneal_read(q, schedule, r, None))
        .collect();
    Ok(reduce(outcomes))
}

/// Best energy seen after each sweep of read `read`, as tracked during annealing.
pub fn anneal_trace(q: &QuboMatrix, schedule: &AnnealSchedule, read: usize) -> Result<Vec<f64>> {
    schedule.validate()?;
    if q.size() == 0 {
        return Err(Error::Empty("qubo"));
    }
    let mut trace = Vec::with_capacity(schedule.sweeps);
    anneal_read(q, schedule, read, Some(&mut trace));
    Ok(trace)
}

/// Exhaustive minimum. Assignments are ordered as integers with `α₀` as the
/// most significant bit; among equal energies the smallest integer wins.
pub fn brute_force(q: &QuboMatrix) -> Result<SampleResult> {
    let n = q.size();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge {
            solver: "brute force",
            size: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if n == 0 {
        return Err(Error::Empty("qubo"));
    }
    let mut alpha = vec![0u8; n];
    let mut best = (0u32, f64::INFINITY);
    for bits in 0..(1u32 << n) {
        for (i, a) in alpha.iter_mut().enumerate() {
            *a = ((bits >> (n - 1 - i)) & 1) as u8;
        }
        let e = energy_unchecked(q, &alpha);
        if e < best.1 {
            best = (bits, e);
        }
    }
    let assignment = (0..n)
        .map(|i| ((best.0 >> (n - 1 - i)) & 1) as u8)
        .collect();
    Ok(SampleResult {
        best_assignment: assignment,
        best_energy: best.1,
        energies: vec![best.1],
    })
}

/// Best-improvement single flips from a random start until no flip lowers the energy.
/// Among equally good flips the lowest index is taken.
pub fn greedy_descent(q: &QuboMatrix, seed: u64) -> Result<SampleResult> {
    let n = q.size();
    if n == 0 {
        return Err(Error::Empty("qubo"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = random_assignment(n, &mut rng);
    Ok(descend(q, start))
}

pub(crate) fn descend(q: &QuboMatrix, start: Vec<u8>) -> SampleResult {
    let n = q.size();
    let mut state = LocalFields::new(q, start);
    loop {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            let d = state.delta(i);
            if d < 0.0 && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        match best {
            Some((i, d)) => state.flip(i, d),
            None => break,
        }
    }
    let energy = energy_unchecked(q, &state.alpha);
    SampleResult {
        best_assignment: state.alpha,
        best_energy: energy,
        energies: vec![energy],
    }
}
