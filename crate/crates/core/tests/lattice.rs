use dioph_lab::approx_fn::Threshold;
use dioph_lab::exact::ExactReal;
use dioph_lab::lattice::{solve_linear_forms, LinearFormsSystem, SolveOptions};
use dioph_lab::precision::Precision;
use dioph_lab::Error;
use rug::Rational;

fn sys(beta: &[[i64; 3]; 3], c: [(i64, i64); 3]) -> LinearFormsSystem {
    let b = beta.iter().map(|r| r.iter().map(|&v| ExactReal::from_i64(v)).collect()).collect();
    let t = c.iter().map(|&(p, q)| Threshold::rational(&Rational::from((p, q)))).collect();
    LinearFormsSystem::new(b, t).unwrap()
}

// Every nonzero integer point of a small box, checked directly.
fn box_solutions(s: &LinearFormsSystem, r: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    for a in -r..=r {
        for b in -r..=r {
            for c in -r..=r {
                let x = vec![a, b, c];
                if x != [0, 0, 0] && s.satisfied_by(&x, Precision::default()).unwrap() {
                    out.push(x);
                }
            }
        }
    }
    out
}

#[test]
fn unimodular_system_solution_is_in_box_search() {
    let s = sys(&[[1, 2, 0], [0, 1, 3], [1, 0, 1]], [(1, 2), (1, 2), (28, 1)]);
    assert!(s.minkowski_condition(Precision::default()).unwrap());
    let x = solve_linear_forms(&s, SolveOptions::default()).unwrap();
    assert!(box_solutions(&s, 20).contains(&x), "{x:?}");
}

#[test]
fn last_positive_flag_is_respected() {
    let s = sys(&[[1, 0, -1], [0, 1, -1], [0, 0, 1]], [(1, 1), (1, 1), (1, 1)]);
    let opts = SolveOptions { last_positive: true, ..Default::default() };
    let x = solve_linear_forms(&s, opts).unwrap();
    assert!(x[2] > 0);
    assert!(s.satisfied_by(&x, Precision::default()).unwrap());
}

#[test]
fn tiny_budget_is_incomplete_not_wrong() {
    let beta = vec![
        vec![ExactReal::from_i64(-1), ExactReal::sqrt(2)],
        vec![ExactReal::zero(), ExactReal::one()],
    ];
    let bounds = vec![Threshold::rational(&Rational::from((1, 100_000))), Threshold::rational(&Rational::from(100_000))];
    let s = LinearFormsSystem::new(beta, bounds).unwrap();
    let opts = SolveOptions { budget: 1, ..Default::default() };
    match solve_linear_forms(&s, opts) {
        Ok(x) => assert!(s.satisfied_by(&x, Precision::default()).unwrap()),
        Err(e) => assert!(matches!(e, Error::SolverIncomplete(_)), "{e}"),
    }
}
