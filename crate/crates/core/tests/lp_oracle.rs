//! Cross-checks the simplex against brute-force vertex enumeration on small
//! random problems.

use gmus_core::lp::{max_violation, solve_lp, LpStatus, Relation, StandardFormLp};
use proptest::prelude::*;

/// Hyperplane `a . x = b` taken from a row or a finite bound.
fn hyperplanes(lp: &StandardFormLp) -> Vec<(Vec<f64>, f64)> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = lp
        .constraints
        .iter()
        .map(|c| (c.coefficients.clone(), c.rhs))
        .collect();
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if lo.is_finite() {
            planes.push((e.clone(), lo));
        }
        if hi.is_finite() {
            planes.push((e, hi));
        }
    }
    planes
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &k| a[i][col].abs().total_cmp(&a[k][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[row][k] -= f * a[col][k];
                    }
                    b[row] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Minimum objective over all feasible vertices, if any vertex exists.
fn vertex_optimum(lp: &StandardFormLp) -> Option<f64> {
    let n = lp.num_vars();
    let planes = hyperplanes(lp);
    if planes.len() < n {
        return None;
    }
    let mut best: Option<f64> = None;
    for subset in combinations(planes.len(), n) {
        let a = subset.iter().map(|&i| planes[i].0.clone()).collect();
        let b = subset.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if max_violation(lp, &x) <= 1e-9 {
                let obj = lp.objective(&x);
                best = Some(best.map_or(obj, |v: f64| v.min(obj)));
            }
        }
    }
    best
}

fn small_lp() -> impl Strategy<Value = StandardFormLp> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(n, rows)| {
        let cost = prop::collection::vec(-5i32..=5, n);
        let rowdata = prop::collection::vec(
            (prop::collection::vec(-5i32..=5, n), 0u8..3, -5i32..=5),
            rows,
        );
        let bounds = prop::collection::vec((0u8..4, -3i32..=0, 0i32..=4), n);
        (cost, rowdata, bounds).prop_map(|(cost, rowdata, bounds)| {
            let mut lp = StandardFormLp::new(cost.into_iter().map(f64::from).collect());
            for (coef, rel, rhs) in rowdata {
                let relation = match rel {
                    0 => Relation::Le,
                    1 => Relation::Ge,
                    _ => Relation::Eq,
                };
                lp.add_constraint(coef.into_iter().map(f64::from).collect(), relation, f64::from(rhs));
            }
            for (j, (kind, lo, width)) in bounds.into_iter().enumerate() {
                let (lo, hi) = match kind {
                    0 => (0.0, f64::INFINITY),
                    1 => (f64::NEG_INFINITY, f64::INFINITY),
                    2 => (f64::from(lo), f64::from(lo + width)),
                    _ => (f64::NEG_INFINITY, f64::from(width)),
                };
                lp.set_bounds(j, lo, hi);
            }
            lp
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 600, ..ProptestConfig::default() })]

    #[test]
    fn simplex_matches_vertex_enumeration(lp in small_lp()) {
        let sol = solve_lp(&lp, 1e-8).unwrap();
        let oracle = vertex_optimum(&lp);
        match sol.status {
            LpStatus::Optimal => {
                prop_assert!(max_violation(&lp, &sol.primal) <= 1e-8);
                let recomputed = lp.objective(&sol.primal);
                prop_assert!((recomputed - sol.objective).abs() <= 1e-9 * (1.0 + recomputed.abs()));
                if let Some(best) = oracle {
                    prop_assert!((best - sol.objective).abs() <= 1e-8 * (1.0 + best.abs()),
                        "simplex {} vs vertices {}", sol.objective, best);
                }
            }
            LpStatus::Infeasible => {
                prop_assert!(oracle.is_none(), "solver infeasible but vertex found: {:?}", oracle);
            }
            LpStatus::Unbounded => {
                // an unbounded problem has feasible points; every vertex is
                // beaten by some feasible point, nothing more to compare
            }
        }
    }

    #[test]
    fn nonnegative_cost_problems(lp in small_lp().prop_map(|mut lp| {
        for c in lp.cost.iter_mut() { *c = c.abs(); }
        for b in lp.bounds.iter_mut() { if b.0 < 0.0 || b.0.is_infinite() { *b = (0.0, b.1.max(0.0)); } }
        lp
    })) {
        // exercises the dual path
        let sol = solve_lp(&lp, 1e-8).unwrap();
        let oracle = vertex_optimum(&lp);
        match sol.status {
            LpStatus::Optimal => {
                prop_assert!(max_violation(&lp, &sol.primal) <= 1e-8);
                let best = oracle.expect("bounded nonnegative problem has a vertex");
                prop_assert!((best - sol.objective).abs() <= 1e-8 * (1.0 + best.abs()));
            }
            LpStatus::Infeasible => prop_assert!(oracle.is_none()),
            LpStatus::Unbounded => prop_assert!(false, "nonnegative costs over x >= 0 cannot be unbounded"),
        }
    }
}

/// Strong duality on problems large enough to need many pivots:
/// `min cᵀx, Ax ≤ b, x ≥ 0` against `min bᵀy, −Aᵀy ≤ c, y ≥ 0`.
#[test]
fn large_problems_close_the_duality_gap() {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    for seed in 0..6u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (140, 110);
        let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        // x = 0 is feasible and y = 0 is dual feasible only when c ≥ 0, so
        // mix signs and keep both sides feasible through a known point.
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = a
            .iter()
            .map(|row| row.iter().zip(&x0).map(|(r, x)| r * x).sum::<f64>() + rng.random_range(0.1..1.0))
            .collect();
        let y0: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let c: Vec<f64> = (0..n)
            .map(|j| -(0..m).map(|i| a[i][j] * y0[i]).sum::<f64>() + rng.random_range(0.1..1.0))
            .collect();

        let mut primal = StandardFormLp::new(c.clone());
        for (row, &rhs) in a.iter().zip(&b) {
            primal.add_constraint(row.clone(), Relation::Le, rhs);
        }
        for j in 0..n {
            primal.set_bounds(j, 0.0, f64::INFINITY);
        }
        let mut dual = StandardFormLp::new(b.clone());
        for j in 0..n {
            dual.add_constraint((0..m).map(|i| -a[i][j]).collect(), Relation::Le, c[j]);
        }
        for i in 0..m {
            dual.set_bounds(i, 0.0, f64::INFINITY);
        }
        let p = solve_lp(&primal, 1e-9).unwrap();
        let d = solve_lp(&dual, 1e-9).unwrap();
        assert_eq!(p.status, LpStatus::Optimal);
        assert_eq!(d.status, LpStatus::Optimal);
        assert!(p.iterations > 96, "seed {seed}: only {} pivots", p.iterations);
        assert!(max_violation(&primal, &p.primal) <= 1e-8);
        assert!(max_violation(&dual, &d.primal) <= 1e-8);
        let gap = (p.objective + d.objective).abs();
        assert!(gap <= 1e-7 * (1.0 + p.objective.abs()), "seed {seed}: {} vs {}", p.objective, -d.objective);
    }
}
