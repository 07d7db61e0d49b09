use contraction_bounds::chains::{
    make_model, simulate, verify_contraction, ExampleSpec, FunctionalSpec, InitLaw, ModelSpec, NoiseSpec,
    UnitRootVariant,
};
use contraction_bounds::montecarlo::{enumerate_exact_tail, estimate_tail, GridPolicy};
use contraction_bounds::par::Exec;

fn spec(example: ExampleSpec, noise: NoiseSpec) -> ModelSpec {
    let d = noise.dim();
    ModelSpec {
        example,
        noise,
        init: InitLaw::Point { x: vec![0.0; d] },
        p: 2.0,
    }
}

fn examples() -> Vec<ModelSpec> {
    let g1 = NoiseSpec::Gaussian { sigma: 1.0, d: 1 };
    let u2 = NoiseSpec::UniformPm1 { d: 2 };
    vec![
        spec(
            ExampleSpec::FunctionalAr {
                r: vec![vec![0.5, 0.1], vec![0.0, 0.3]],
                b: vec![1.0, 0.0],
            },
            u2,
        ),
        spec(
            ExampleSpec::UnitRoot {
                c: 0.5,
                alpha: 0.5,
                variant: UnitRootVariant::OneMinus,
            },
            g1,
        ),
        spec(
            ExampleSpec::LinearSa {
                a: vec![vec![2.0, 0.5], vec![0.5, 1.0]],
                b: vec![1.0, -1.0],
                gamma: 0.3,
                alpha: 0.6,
            },
            u2,
        ),
        spec(
            ExampleSpec::LinearSaAdditive {
                a: vec![vec![1.0]],
                b: vec![0.0],
                gamma: 0.5,
                alpha: 0.25,
            },
            g1,
        ),
        spec(
            ExampleSpec::LinearSaScaledNoise {
                a: vec![vec![1.0]],
                b: vec![0.0],
                gamma: 0.5,
                alpha: 0.75,
            },
            g1,
        ),
    ]
}

#[test]
fn simulate_is_reproducible_and_seed_sensitive() {
    for s in examples() {
        let m = make_model(s).unwrap();
        let a = simulate(&m, 50, 9).unwrap();
        let b = simulate(&m, 50, 9).unwrap();
        let c = simulate(&m, 50, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 50);
        assert!(a.states.iter().all(|x| x.is_finite()));
    }
}

#[test]
fn contraction_holds_empirically() {
    for s in examples() {
        let name = s.example.name();
        let m = make_model(s).unwrap();
        let rep = verify_contraction(&m, &[2, 5, 20, 60], 3, 2000, 4, Exec::Parallel).unwrap();
        assert!(rep.pass(), "{name}: {rep:?}");
    }
}

#[test]
fn monte_carlo_tail_brackets_exact_tail() {
    let m = make_model(spec(
        ExampleSpec::FunctionalAr {
            r: vec![vec![0.7]],
            b: vec![0.0],
        },
        NoiseSpec::TwoAtom { a: -1.0, b: 1.0, pr: 0.5 },
    ))
    .unwrap();
    let f = FunctionalSpec::SumOfStates;
    let exact = enumerate_exact_tail(&m, &f, 10, &GridPolicy::Auto { points: 20 }).unwrap();
    let grid = GridPolicy::Explicit { u: exact.u_grid.clone() };
    let mc = estimate_tail(&m, &f, 10, 20_000, &grid, 3, Exec::Parallel).unwrap();
    let mut misses = 0;
    for i in 0..exact.u_grid.len() {
        if exact.p_hat[i] < mc.p_lcb[i] || exact.p_hat[i] > mc.p_ucb[i] {
            misses += 1;
        }
    }
    // One-sided 99% bands on each side: a couple of misses would be plausible.
    assert!(misses <= 2, "{misses} misses");
}

#[test]
fn sequential_and_parallel_agree() {
    let m = make_model(examples().remove(2)).unwrap();
    let f = FunctionalSpec::SumOfStates;
    let grid = GridPolicy::default();
    let a = estimate_tail(&m, &f, 40, 2000, &grid, 5, Exec::Sequential).unwrap();
    let b = estimate_tail(&m, &f, 40, 2000, &grid, 5, Exec::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sum_of_norms_is_one_dimensional() {
    let m = make_model(examples().remove(0)).unwrap();
    assert_eq!(FunctionalSpec::SumOfNorms.out_dim(&m), 1);
    assert_eq!(FunctionalSpec::SumOfStates.out_dim(&m), 2);
    let t = estimate_tail(&m, &FunctionalSpec::SumOfNorms, 20, 1000, &GridPolicy::default(), 1, Exec::Parallel).unwrap();
    assert_eq!(t.out_dim, 1);
    assert!(t.centering_margin > 0.0);
}
