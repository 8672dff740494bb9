//! Selection and real-coded variation operators.

use rand::Rng;

use super::Individual;

/// Smallest parent difference for which SBX is applied to a variable.
const SBX_MIN_SPREAD: f64 = 1e-14;

/// Crowded-comparison binary tournament between `a` and `b`: lower rank wins,
/// then larger crowding distance, then a fair coin.
pub fn crowded_compare<R: Rng + ?Sized>(a: &Individual, b: &Individual, rng: &mut R) -> bool {
    if a.rank != b.rank {
        return a.rank < b.rank;
    }
    if a.crowding != b.crowding {
        return a.crowding > b.crowding;
    }
    rng.gen_bool(0.5)
}

/// Binary tournament on two distinct random members; returns the winner's index.
pub fn crowded_tournament_select<R: Rng + ?Sized>(population: &[Individual], rng: &mut R) -> usize {
    let n = population.len();
    assert!(n > 0, "tournament on an empty population");
    if n == 1 {
        return 0;
    }
    let a = rng.gen_range(0..n);
    let mut b = rng.gen_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    if crowded_compare(&population[a], &population[b], rng) {
        a
    } else {
        b
    }
}

/// Simulated binary crossover. With probability `prob` the pair is crossed;
/// each variable then recombines with probability 0.5 using spread factor
/// drawn with distribution index `eta`. Children are clamped to `bounds`.
pub fn sbx_crossover<R: Rng + ?Sized>(
    p1: &[f64],
    p2: &[f64],
    eta: f64,
    prob: f64,
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = p1.to_vec();
    let mut c2 = p2.to_vec();
    if rng.gen::<f64>() >= prob {
        return (c1, c2);
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !rng.gen_bool(0.5) || (p1[i] - p2[i]).abs() <= SBX_MIN_SPREAD {
            continue;
        }
        let beta = sbx_spread(rng.gen::<f64>(), eta);
        let (a, b) = sbx_children(p1[i], p2[i], beta);
        c1[i] = a.clamp(lo, hi);
        c2[i] = b.clamp(lo, hi);
    }
    (c1, c2)
}

/// Spread factor for uniform draw `u` in [0, 1).
pub fn sbx_spread(u: f64, eta: f64) -> f64 {
    let exponent = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(exponent)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(exponent)
    }
}

/// Unclamped SBX children; `c1 + c2 == p1 + p2`.
pub fn sbx_children(p1: f64, p2: f64, beta: f64) -> (f64, f64) {
    let mean = 0.5 * (p1 + p2);
    let half_spread = 0.5 * beta * (p1 - p2);
    (mean + half_spread, mean - half_spread)
}

/// Bounded polynomial mutation; each variable mutates with probability `prob`.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    x: &[f64],
    eta: f64,
    prob: f64,
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> Vec<f64> {
    let mut y = x.to_vec();
    let power = 1.0 / (eta + 1.0);
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if rng.gen::<f64>() >= prob || hi <= lo {
            continue;
        }
        let width = hi - lo;
        let delta1 = (y[i] - lo) / width;
        let delta2 = (hi - y[i]) / width;
        let r: f64 = rng.gen();
        let deltaq = if r < 0.5 {
            let v = 2.0 * r + (1.0 - 2.0 * r) * (1.0 - delta1).powf(eta + 1.0);
            v.powf(power) - 1.0
        } else {
            let v = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * (1.0 - delta2).powf(eta + 1.0);
            1.0 - v.powf(power)
        };
        y[i] = (y[i] + deltaq * width).clamp(lo, hi);
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::TestInput;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ind(rank: usize, crowding: f64) -> Individual {
        Individual {
            input: TestInput::new(vec![0.0]),
            objectives: vec![0.0],
            critical: false,
            archive_index: 0,
            rank,
            crowding,
        }
    }

    #[test]
    fn rank_then_crowding() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(crowded_compare(&ind(0, 0.1), &ind(2, 9.0), &mut rng));
        assert!(!crowded_compare(&ind(2, 9.0), &ind(0, 0.1), &mut rng));
        assert!(crowded_compare(&ind(0, f64::INFINITY), &ind(0, 1.3), &mut rng));
        assert!(!crowded_compare(&ind(0, 1.3), &ind(0, f64::INFINITY), &mut rng));
    }

    #[test]
    fn full_ties_are_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let (a, b) = (ind(1, 0.7), ind(1, 0.7));
        let wins = (0..10_000).filter(|_| crowded_compare(&a, &b, &mut rng)).count();
        assert!((wins as f64 / 10_000.0 - 0.5).abs() <= 0.03, "{wins}");
    }

    #[test]
    fn zero_probability_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bounds = [(0.0, 1.0); 3];
        let (p1, p2) = (vec![0.1, 0.2, 0.3], vec![0.9, 0.8, 0.7]);
        assert_eq!(sbx_crossover(&p1, &p2, 15.0, 0.0, &bounds, &mut rng), (p1.clone(), p2.clone()));
        assert_eq!(polynomial_mutation(&p1, 20.0, 0.0, &bounds, &mut rng), p1);
    }

    #[test]
    fn sbx_children_preserve_sum() {
        for &u in &[0.0, 0.1, 0.5, 0.77, 0.999] {
            let beta = sbx_spread(u, 15.0);
            let (c1, c2) = sbx_children(3.25, 7.5, beta);
            assert!((c1 + c2 - 10.75).abs() < 1e-12);
        }
    }

    #[test]
    fn mutation_at_lower_bound_stays_in_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let y = polynomial_mutation(&[1.0], 20.0, 1.0, &[(1.0, 22.0)], &mut rng);
            assert!(y[0] >= 1.0 && y[0] <= 22.0);
        }
    }
}
