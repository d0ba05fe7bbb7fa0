//! Held-Karp dynamic program for small instances.

use crate::error::{Error, Result};
use crate::geometry::{cycle_length, Tour, TspInstance};

/// Largest instance the exact solver accepts.
pub const MAX_EXACT_NODES: usize = 16;

/// Optimal tour and its length.
///
/// The tour starts at node 0. Among optimal tours (up to float noise of
/// 1e-12 relative) the lexicographically smallest order is returned.
pub fn held_karp(inst: &TspInstance) -> Result<(Tour, f64)> {
    let n = inst.len();
    if n > MAX_EXACT_NODES {
        return Err(Error::SizeCap(n));
    }
    // Subsets range over nodes 1..n, node v stored at bit v-1.
    // rest[s * m + (v-1)]: cheapest path that starts at v, visits every node
    // of s (v not in s) and ends at 0.
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut rest = vec![f64::INFINITY; (1 << m) * m];
    for v in 1..n {
        rest[v - 1] = inst.dist(v, 0);
    }
    for s in 1..=full {
        for v in 1..n {
            let vbit = 1 << (v - 1);
            if s & vbit != 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut bits = s;
            while bits != 0 {
                let k = bits.trailing_zeros() as usize + 1;
                bits &= bits - 1;
                let c = inst.dist(v, k) + rest[(s & !(1 << (k - 1))) * m + k - 1];
                if c < best {
                    best = c;
                }
            }
            rest[s * m + v - 1] = best;
        }
    }

    let mut order = Vec::with_capacity(n);
    order.push(0);
    let mut cur = 0;
    let mut remaining = full;
    while remaining != 0 {
        let options: Vec<(usize, f64)> = (1..n)
            .filter(|v| remaining & (1 << (v - 1)) != 0)
            .map(|v| (v, inst.dist(cur, v) + rest[(remaining & !(1 << (v - 1))) * m + v - 1]))
            .collect();
        let best = options.iter().map(|o| o.1).fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * best.max(1.0);
        let (v, _) = *options
            .iter()
            .find(|o| o.1 <= best + tol)
            .expect("non-empty remaining set");
        order.push(v);
        remaining &= !(1 << (v - 1));
        cur = v;
    }
    let len = cycle_length(inst, &order);
    Ok((Tour::new(order), len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tests::corners;
    use crate::geometry::{generate_instance, tour_length, Point};

    fn brute_force(inst: &TspInstance) -> f64 {
        fn rec(inst: &TspInstance, order: &mut Vec<usize>, used: &mut [bool], best: &mut f64) {
            let n = inst.len();
            if order.len() == n {
                *best = best.min(cycle_length(inst, order));
                return;
            }
            for v in 1..n {
                if !used[v] {
                    used[v] = true;
                    order.push(v);
                    rec(inst, order, used, best);
                    order.pop();
                    used[v] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(inst, &mut vec![0], &mut vec![false; inst.len()], &mut best);
        best
    }

    #[test]
    fn square() {
        let (t, len) = held_karp(&corners()).unwrap();
        assert_eq!(len, 4.0);
        assert_eq!(t.order(), &[0, 1, 2, 3]);
    }

    #[test]
    fn triangle_is_its_perimeter() {
        let inst = TspInstance::new(
            "tri",
            vec![Point::new(0.1, 0.2), Point::new(0.9, 0.3), Point::new(0.4, 0.8)],
        )
        .unwrap();
        let (t, len) = held_karp(&inst).unwrap();
        let per = inst.dist(0, 1) + inst.dist(1, 2) + inst.dist(2, 0);
        assert!((len - per).abs() < 1e-15);
        assert_eq!(t.order(), &[0, 1, 2]);
    }

    #[test]
    fn matches_enumeration_up_to_nine() {
        for n in 3..=9 {
            for seed in 0..4 {
                let inst = generate_instance(n, 1000 + seed).unwrap();
                let (t, len) = held_karp(&inst).unwrap();
                assert_eq!(len, brute_force(&inst), "n={n} seed={seed}");
                assert_eq!(tour_length(&inst, &t).unwrap(), len);
            }
        }
    }

    #[test]
    fn relabeling_preserves_length() {
        let inst = generate_instance(10, 77).unwrap();
        let perm: Vec<usize> = (0..10).map(|i| (i * 3 + 4) % 10).collect();
        let mut pts = vec![Point::new(0.0, 0.0); 10];
        for (old, &new) in perm.iter().enumerate() {
            pts[new] = inst.point(old);
        }
        let relabeled = TspInstance::new("r", pts).unwrap();
        let (t1, l1) = held_karp(&inst).unwrap();
        let (t2, l2) = held_karp(&relabeled).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        let mapped: Vec<(usize, usize)> = {
            let mut e: Vec<_> = t1
                .edge_set()
                .into_iter()
                .map(|(a, b)| (perm[a].min(perm[b]), perm[a].max(perm[b])))
                .collect();
            e.sort();
            e
        };
        assert_eq!(mapped, t2.edge_set());
    }

    #[test]
    fn size_cap() {
        let inst = generate_instance(17, 1).unwrap();
        assert!(matches!(held_karp(&inst), Err(Error::SizeCap(17))));
        assert!(held_karp(&generate_instance(16, 1).unwrap()).is_ok());
    }
}
