//! Seeded random scenarios: games, graphs and DoS flag sequences.

use rand::Rng;

use crate::error::Result;
use crate::game::GameSpec;
use crate::topology::Topology;

/// Quadratic game with `rho ~ U[0.5, 2]`, `x_d ~ U[-10, 10]`,
/// `p0 ~ U[0, 0.3]`, `q0 ~ U[-2, 2]`. Non-negative `p0` keeps it monotone.
pub fn random_game<R: Rng>(rng: &mut R, n: usize) -> Result<GameSpec> {
    let rho = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let x_desired = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
    GameSpec::new(rho, x_desired, rng.gen_range(0.0..0.3), rng.gen_range(-2.0..2.0))
}

/// Connected graph: a random spanning tree plus each remaining edge with
/// probability `extra`, weights `~ U[0.5, 2]`.
pub fn random_topology<R: Rng>(rng: &mut R, n: usize, extra: f64) -> Result<Topology> {
    let mut edges = Vec::new();
    let mut present = vec![false; n * n];
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(0.5..2.0)));
        present[u * n + v] = true;
    }
    for u in 0..n {
        for v in u + 1..n {
            if !present[u * n + v] && rng.gen_bool(extra) {
                edges.push((u, v, rng.gen_range(0.5..2.0)));
            }
        }
    }
    Topology::from_edges(n, &edges)
}

/// Bursty DoS flags for instants `0..=steps`: a two-state chain that
/// switches with probability `switch` per instant, starting DoS-free.
pub fn random_mask<R: Rng>(rng: &mut R, steps: usize, switch: f64) -> Vec<bool> {
    let mut on = false;
    (0..=steps)
        .map(|k| {
            if k > 0 && rng.gen_bool(switch) {
                on = !on;
            }
            on
        })
        .collect()
}
