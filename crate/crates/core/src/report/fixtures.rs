//! Built-in barrier configurations with their known polygon data.

use serde::Serialize;

use crate::model::{DeltaSystem, Window};
use crate::polygon::Pair;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expected {
    /// Slope set as reduced fractions, increasing.
    pub slopes: Vec<&'static str>,
    pub dominant: Pair,
    pub string_count: usize,
    pub generic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    pub system: DeltaSystem,
    /// Search window when the default one does not suit the fixture.
    pub window: Option<Window>,
    pub expected: Expected,
}

fn system(h: f64, x: &[f64], beta: &[f64], c: &[f64]) -> DeltaSystem {
    DeltaSystem::from_parts(h, x, beta, c).expect("fixture systems are valid")
}

fn ones(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

fn expected(slopes: &[&'static str], dominant: (usize, usize), generic: bool) -> Expected {
    Expected {
        slopes: slopes.to_vec(),
        dominant: Pair::new(dominant.0, dominant.1),
        string_count: slopes.len(),
        generic,
    }
}

fn decreasing_strengths(n: usize) -> Fixture {
    let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let beta: Vec<f64> = (1..=n as i32).map(|j| 10f64.powi(-j)).collect();
    let slopes: &[&'static str] = match n {
        5 => &["11/200000", "9/20000", "9/2000", "9/200"],
        8 => &[
            "11/200000000",
            "9/20000000",
            "9/2000000",
            "9/200000",
            "9/20000",
            "9/2000",
            "9/200",
        ],
        _ => unreachable!("only N = 5 and N = 8 are tabulated"),
    };
    Fixture {
        name: if n == 5 { "ex2.10-n5" } else { "ex2.10-n8" },
        description: "unit spacing with β_j = 10^-j: N - 1 strings",
        system: system(0.1, &x, &beta, &ones(n)),
        window: None,
        expected: expected(slopes, (n - 1, n), true),
    }
}

/// Example configurations with slope sets computed in exact arithmetic.
pub fn builtin_fixtures() -> Vec<Fixture> {
    let c12 = [0.0, 2.0, 5.0, 6.0];
    let ex94_window = Window {
        re_min: 0.1,
        re_max: 2.0,
        im_min: -0.06,
        im_max: 0.0,
    };
    vec![
        Fixture {
            name: "n2",
            description: "two equal barriers six apart",
            system: system(0.1, &[0.0, 6.0], &[2.0, 2.0], &[1.0, 1.0]),
            window: Some(Window {
                re_min: 0.05,
                re_max: 2.0,
                im_min: -0.3,
                im_max: 0.0,
            }),
            expected: expected(&["1/3"], (1, 2), true),
        },
        Fixture {
            name: "ex2.9",
            description: "equal strengths: one string from the outermost pair",
            system: system(0.1, &[0.0, 0.5, 2.0, 3.0, 6.0], &[2.0; 5], &ones(5)),
            window: None,
            expected: expected(&["1/3"], (1, 5), true),
        },
        decreasing_strengths(5),
        decreasing_strengths(8),
        Fixture {
            name: "ex2.11",
            description: "three barriers, dominant inner pair and one flat string",
            system: system(0.1, &[0.0, 4.0, 6.0], &[0.5, 0.5, 2.0], &ones(3)),
            window: None,
            expected: expected(&["1/8", "3/8"], (1, 2), true),
        },
        Fixture {
            name: "ex2.12a",
            description: "four equal barriers",
            system: system(0.1, &c12, &[2.0, 2.0, 2.0, 2.0], &ones(4)),
            window: None,
            expected: expected(&["1/3"], (1, 4), true),
        },
        Fixture {
            name: "ex2.12b",
            description: "one weak barrier",
            system: system(0.1, &c12, &[2.0, 2.0, 0.5, 2.0], &ones(4)),
            window: None,
            expected: expected(&["1/4", "3/4"], (1, 3), true),
        },
        Fixture {
            name: "ex2.12c",
            description: "two weak inner barriers: three strings",
            system: system(0.1, &c12, &[2.0, 0.5, 0.5, 2.0], &ones(4)),
            window: None,
            expected: expected(&["1/6", "3/8", "3/4"], (2, 3), true),
        },
        Fixture {
            name: "ex2.12d",
            description: "weak left pair, two strings",
            system: system(0.1, &[0.0, 3.0, 4.0, 6.0], &[0.5, 0.5, 2.0, 3.0], &ones(4)),
            window: None,
            expected: expected(&["1/6", "5/12"], (1, 2), true),
        },
        Fixture {
            name: "ex2.12e",
            description: "weak left pair, three strings",
            system: system(0.1, &[0.0, 3.0, 5.0, 6.0], &[0.5, 0.5, 2.0, 3.0], &ones(4)),
            window: None,
            expected: expected(&["1/6", "3/8", "1/2"], (1, 2), true),
        },
        Fixture {
            name: "ex9.1",
            description: "very weak left pair",
            system: system(0.1, &[0.0, 1.0, 3.0, 6.0], &[0.05, 0.05, 2.0, 6.0], &ones(4)),
            window: None,
            expected: expected(&["1/20", "39/80", "2/3"], (1, 2), true),
        },
        Fixture {
            name: "ex9.2",
            description: "symmetric outer pairs with equal flat slopes",
            system: system(0.1, &[1.0, 2.0, 5.0, 6.0], &[2.0, 0.5, 0.5, 2.0], &ones(4)),
            window: None,
            expected: expected(&["1/6", "3/4"], (2, 3), false),
        },
        Fixture {
            name: "ex9.3",
            description: "asymmetric outer strengths",
            system: system(0.1, &c12, &[1.5, 0.5, 0.5, 2.0], &ones(4)),
            window: None,
            expected: expected(&["1/6", "1/4", "3/4"], (2, 3), true),
        },
        Fixture {
            name: "ex9.4-h0.1",
            description: "three strings with unequal couplings",
            system: system(0.1, &c12, &[2.0, 0.5, 0.5, 2.0], &[10.0, 1.0, -5.0, 1.0]),
            window: None,
            expected: expected(&["1/6", "3/8", "3/4"], (2, 3), true),
        },
        Fixture {
            name: "ex9.4-h0.01",
            description: "three strings with unequal couplings, smaller h",
            system: system(0.01, &c12, &[2.0, 0.5, 0.5, 2.0], &[10.0, 1.0, -5.0, 1.0]),
            // the deepest string sits near -0.043, below the default window
            window: Some(ex94_window),
            expected: expected(&["1/6", "3/8", "3/4"], (2, 3), true),
        },
    ]
}

pub fn fixture(name: &str) -> Option<Fixture> {
    builtin_fixtures().into_iter().find(|f| f.name == name)
}
