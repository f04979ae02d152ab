//! Random compositions of the elementary operations: reverse mode, forward
//! mode and central differences must agree.

use pinn::autodiff::{Expr, Real};
use proptest::prelude::*;

#[derive(Debug, Clone)]
enum Node {
    Input(usize),
    Const(f64),
    Unary(u8, Box<Node>),
    Binary(u8, Box<Node>, Box<Node>),
}

const POWERS: [f64; 4] = [-1.5, 0.5, 2.0, 3.0];

impl Node {
    /// Evaluates the tree. Division, `ln` and `pow` act on `a² + 1` so that
    /// every composition stays inside the operation domains.
    fn eval<R: Real>(&self, x: &[R]) -> R {
        match self {
            Node::Input(i) => x[*i],
            Node::Const(c) => x[0].lift(*c),
            Node::Unary(op, a) => {
                let a = a.eval(x);
                match op % 7 {
                    0 => a.exp(),
                    1 => (a * a + 1.0).ln(),
                    2 => a.sin(),
                    3 => a.cos(),
                    4 => a.tanh(),
                    5 => a.softplus(),
                    _ => (a * a + 1.0).powf(POWERS[(*op as usize / 7) % 4]),
                }
            }
            Node::Binary(op, a, b) => {
                let (a, b) = (a.eval(x), b.eval(x));
                match op % 4 {
                    0 => a + b,
                    1 => a - b,
                    2 => a * b,
                    _ => a / (b * b + 1.0),
                }
            }
        }
    }
}

fn tree() -> impl Strategy<Value = Node> {
    let leaf = prop_oneof![
        3 => (0usize..3).prop_map(Node::Input),
        1 => (-2.0f64..2.0).prop_map(Node::Const),
    ];
    leaf.prop_recursive(5, 24, 2, |inner| {
        prop_oneof![
            (any::<u8>(), inner.clone()).prop_map(|(op, a)| Node::Unary(op, Box::new(a))),
            (any::<u8>(), inner.clone(), inner).prop_map(|(op, a, b)| Node::Binary(
                op,
                Box::new(a),
                Box::new(b)
            )),
        ]
    })
}

/// Relative difference with a small absolute floor for near-zero partials.
fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn reverse_forward_and_differences_agree(
        f in tree(),
        x in prop::array::uniform3(-1.5f64..1.5),
    ) {
        let value: f64 = f.eval(&x);
        prop_assume!(value.is_finite() && value.abs() < 1e4);
        let expr = Expr::record(&x, |v| f.eval(v)).unwrap();
        prop_assert_eq!(expr.value(), value);
        let reverse = expr.reverse_gradient().unwrap();
        for i in 0..3 {
            let (v, forward) = expr.forward_eval(&x, i).unwrap();
            prop_assert_eq!(v, value);
            prop_assert!(rel(reverse[i], forward) <= 1e-10, "input {}: {} vs {}", i, reverse[i], forward);
            let h = 1e-5;
            let (mut up, mut down) = (x, x);
            up[i] += h;
            down[i] -= h;
            let fd = (f.eval(&up) - f.eval(&down)) / (2.0 * h);
            prop_assert!(rel(forward, fd) <= 1e-4, "input {}: {} vs FD {}", i, forward, fd);
        }
    }

    #[test]
    fn second_derivatives_are_symmetric(
        f in tree(),
        x in prop::array::uniform3(-1.5f64..1.5),
    ) {
        let value: f64 = f.eval(&x);
        prop_assume!(value.is_finite() && value.abs() < 1e4);
        let expr = Expr::record(&x, |v| f.eval(v)).unwrap();
        for i in 0..3 {
            for j in 0..i {
                let a = expr.second_derivative(&x, i, j).unwrap();
                let b = expr.second_derivative(&x, j, i).unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "({}, {}): {} vs {}", i, j, a, b);
            }
        }
    }
}
