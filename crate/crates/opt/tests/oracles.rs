//! LP against vertex enumeration, branch and bound against exhaustive search.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wdsflow_opt::{solve_lp, BinaryMilp, BnbOptions, BnbStatus, LpOutcome, LpProblem};

/// Gaussian elimination with partial pivoting, independent of the crate's LU.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-10 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Minimum over all basic feasible points of a bounded LP.
fn vertex_oracle(p: &LpProblem) -> Option<f64> {
    let n = p.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in &p.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coeffs {
            a[j] += v;
        }
        if r.lower.is_finite() {
            planes.push((a.clone(), r.lower));
        }
        if r.upper.is_finite() && r.upper != r.lower {
            planes.push((a, r.upper));
        }
    }
    for (j, &(l, u)) in p.bounds.iter().enumerate() {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), l));
        if u != l {
            planes.push((e, u));
        }
    }
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_square(a, b) {
            if p.max_violation(&x) <= 1e-9 {
                let v = p.objective_value(&x);
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // Next n-combination of planes.
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < planes.len() - n + k {
                idx[k] += 1;
                for t in k + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

fn random_feasible_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.random_range(1..=6);
    let m = rng.random_range(1..=6);
    let mut p = LpProblem::new();
    let mut x0 = Vec::new();
    for _ in 0..n {
        let l = rng.random_range(-5.0..0.0);
        let u = rng.random_range(0.5..5.0);
        p.add_var(rng.random_range(-3.0..3.0), l, u);
        x0.push(rng.random_range(l..u));
    }
    for _ in 0..m {
        let mut coeffs: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.7) {
                coeffs.push((j, rng.random_range(-4.0..4.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        match rng.random_range(0..3) {
            0 => p.add_le(coeffs, act + rng.random_range(0.0..2.0)),
            1 => p.add_ge(coeffs, act - rng.random_range(0.0..2.0)),
            _ => p.add_eq(coeffs, act),
        };
    }
    p
}

#[test]
fn lp_matches_vertex_enumeration_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..50 {
        let p = random_feasible_lp(&mut rng);
        let oracle = vertex_oracle(&p).expect("feasible by construction");
        let LpOutcome::Optimal(sol) = solve_lp(&p).unwrap() else {
            panic!("case {case}: LP not optimal");
        };
        assert!(
            (sol.objective - oracle).abs() <= 1e-8 * (1.0 + oracle.abs()),
            "case {case}: simplex {} vs oracle {}",
            sol.objective,
            oracle
        );
        assert!(
            sol.primal_residual <= 1e-8,
            "case {case}: primal residual {}",
            sol.primal_residual
        );
        assert!(
            sol.dual_residual <= 1e-8,
            "case {case}: dual residual {}",
            sol.dual_residual
        );
        assert!(
            sol.duality_gap.abs() <= 1e-8,
            "case {case}: duality gap {}",
            sol.duality_gap
        );
    }
}

#[test]
fn lp_solutions_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = random_feasible_lp(&mut rng);
    let a = solve_lp(&p).unwrap().optimal().unwrap();
    let b = solve_lp(&p).unwrap().optimal().unwrap();
    assert_eq!(a.x, b.x);
}

fn random_binary_milp(rng: &mut ChaCha8Rng, k: usize, continuous: usize) -> BinaryMilp {
    let mut lp = LpProblem::new();
    let bins: Vec<usize> = (0..k)
        .map(|_| lp.add_var(rng.random_range(-5.0..5.0), 0.0, 1.0))
        .collect();
    for _ in 0..continuous {
        lp.add_var(rng.random_range(-2.0..2.0), 0.0, 3.0);
    }
    let n = k + continuous;
    for _ in 0..rng.random_range(1..=4) {
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, rng.random_range(-3.0..4.0))).collect();
        let sum_pos: f64 = coeffs.iter().map(|c| c.1.max(0.0)).sum();
        lp.add_le(coeffs, rng.random_range(0.2..0.6) * sum_pos);
    }
    BinaryMilp::new(lp, bins)
}

/// Best objective over all 2^k binary assignments; continuous parts by LP.
fn exhaustive(m: &BinaryMilp) -> Option<f64> {
    let k = m.binaries.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << k) {
        let mut lp = m.lp.clone();
        for (i, &j) in m.binaries.iter().enumerate() {
            let v = ((mask >> i) & 1) as f64;
            lp.bounds[j] = (v, v);
        }
        if let LpOutcome::Optimal(s) = solve_lp(&lp).unwrap() {
            best = Some(best.map_or(s.objective, |b: f64| b.min(s.objective)));
        }
    }
    best
}

#[test]
fn bnb_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = BnbOptions {
        abs_gap: 0.0,
        rel_gap: 0.0,
        ..BnbOptions::default()
    };
    for case in 0..30 {
        let k = rng.random_range(2..=12);
        let continuous = if case % 2 == 0 { 0 } else { 2 };
        let m = random_binary_milp(&mut rng, k, continuous);
        let oracle = exhaustive(&m);
        let res = m.solve(&opts).unwrap();
        match oracle {
            None => assert_eq!(res.status, BnbStatus::Infeasible, "case {case}"),
            Some(v) => {
                assert_eq!(res.status, BnbStatus::Optimal, "case {case}");
                let (got, x) = res.incumbent.unwrap();
                assert!(
                    (got - v).abs() <= 1e-8,
                    "case {case}: bnb {got} vs exhaustive {v}"
                );
                assert!(m.lp.max_violation(&x) <= 1e-8);
                for &j in &m.binaries {
                    assert!(x[j] == 0.0 || x[j] == 1.0);
                }
                // Incumbents only improve and the bound never exceeds them.
                for w in res.history.windows(2) {
                    assert!(w[1].1 <= w[0].1);
                }
                assert!(res.best_bound <= got + 1e-12);
            }
        }
    }
}

#[test]
fn warm_started_resolves_match_cold_solves() {
    use wdsflow_opt::{LpRow, Simplex, Status};
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for case in 0..40 {
        let n = rng.random_range(4..=25);
        let mut p = LpProblem::new();
        for _ in 0..n {
            let free = rng.random_bool(0.2);
            let (l, u) = if free {
                (f64::NEG_INFINITY, f64::INFINITY)
            } else {
                (-10.0, 10.0)
            };
            p.add_var(rng.random_range(-1.0..1.0), l, u);
        }
        // A box row keeps free variables bounded.
        for j in 0..n {
            p.add_le(vec![(j, 1.0)], 20.0);
            p.add_ge(vec![(j, 1.0)], -20.0);
        }
        let mut warm = Simplex::new(&p);
        assert_eq!(warm.solve().unwrap(), Status::Optimal);
        for round in 0..15 {
            let mut coeffs = Vec::new();
            for j in 0..n {
                if rng.random_bool(0.4) {
                    coeffs.push((j, rng.random_range(-2.0..2.0)));
                }
            }
            let row = LpRow::le(coeffs, rng.random_range(-5.0..5.0));
            p.rows.push(row.clone());
            warm.add_row(&row);
            if round % 4 == 3 {
                let j = rng.random_range(0..n);
                let (l, u) = (rng.random_range(-10.0..0.0), rng.random_range(0.0..10.0));
                p.bounds[j] = (l, u);
                warm.set_var_bounds(j, l, u);
            }
            let cold = solve_lp(&p).unwrap();
            let w = warm.solve().unwrap();
            match cold {
                LpOutcome::Optimal(s) => {
                    assert_eq!(w, Status::Optimal, "case {case} round {round}");
                    assert!(
                        (warm.objective() - s.objective).abs() <= 1e-8 * (1.0 + s.objective.abs()),
                        "case {case} round {round}: warm {} cold {}",
                        warm.objective(),
                        s.objective
                    );
                }
                LpOutcome::Infeasible => {
                    assert_eq!(w, Status::Infeasible, "case {case} round {round}");
                    break;
                }
                LpOutcome::Unbounded => unreachable!("boxed"),
            }
        }
    }
}
