//! Butcher tableaus.
//!
//! * Tsitouras 5(4): Ch. Tsitouras, "Runge–Kutta pairs of order 5(4) satisfying
//!   only the first column simplifying assumption", Comput. Math. Appl. 62 (2011),
//!   with the 16-digit values distributed by OrdinaryDiffEq.jl.
//! * Dormand–Prince 8(5,3): Hairer, Nørsett & Wanner, *Solving Ordinary
//!   Differential Equations I*, and the reference `dop853.f`.

/// An explicit embedded pair.
pub(crate) struct Tableau {
    pub stages: usize,
    /// Strictly lower triangular, row-major, `a[i]` has `i` entries.
    pub a: &'static [&'static [f64]],
    pub b: &'static [f64],
    pub c: &'static [f64],
    pub error: ErrorWeights,
    /// Order of the propagated solution.
    pub order: u32,
    /// Exponent denominator for step control (`order of the estimator + 1`).
    pub control_order: u32,
    /// The last stage is evaluated at `(t + h, y_new)` and reused as the next
    /// step's first stage.
    pub fsal: bool,
}

pub(crate) enum ErrorWeights {
    /// Error estimate `h Σ e_i k_i`.
    Single(&'static [f64]),
    /// Hairer's blended 5th/3rd order estimate for DOP853.
    Dop853 { er: &'static [f64], bhh: [f64; 3] },
}

pub(crate) static TSIT5: Tableau = Tableau {
    stages: 7,
    a: &[
        &[],
        &[0.161],
        &[-0.008480655492356989, 0.335480655492357],
        &[2.897153057105493, -6.359448489975075, 4.3622954328695815],
        &[5.325864828439257, -11.748883564062828, 7.4955393428898365, -0.09249506636175525],
        &[
            5.86145544294642,
            -12.92096931784711,
            8.159367898576159,
            -0.071584973281401,
            -0.028269050394068383,
        ],
        &[
            0.09646076681806523,
            0.01,
            0.4798896504144996,
            1.379008574103742,
            -3.290069515436081,
            2.324710524099774,
        ],
    ],
    b: &[
        0.09646076681806523,
        0.01,
        0.4798896504144996,
        1.379008574103742,
        -3.290069515436081,
        2.324710524099774,
        0.0,
    ],
    c: &[0.0, 0.161, 0.327, 0.9, 0.9800255409045097, 1.0, 1.0],
    error: ErrorWeights::Single(&[
        -0.00178001105222577714,
        -0.0008164344596567469,
        0.007880878010261995,
        -0.1447110071732629,
        0.5823571654525552,
        -0.45808210592918697,
        1.0 / 66.0,
    ]),
    order: 5,
    control_order: 5,
    fsal: true,
};

pub(crate) static DOP853: Tableau = Tableau {
    stages: 12,
    a: &[
        &[],
        &[5.260015195876773e-2],
        &[1.97250569845379e-2, 5.91751709536137e-2],
        &[2.958758547680685e-2, 0.0, 8.876275643042054e-2],
        &[2.413651341592667e-1, 0.0, -8.845494793282861e-1, 9.24834003261792e-1],
        &[3.7037037037037035e-2, 0.0, 0.0, 1.7082860872947386e-1, 1.2546768756682242e-1],
        &[3.7109375e-2, 0.0, 0.0, 1.7025221101954405e-1, 6.021653898045596e-2, -1.7578125e-2],
        &[
            3.709200011850479e-2,
            0.0,
            0.0,
            1.7038392571223998e-1,
            1.0726203044637328e-1,
            -1.5319437748624402e-2,
            8.273789163814023e-3,
        ],
        &[
            6.241109587160757e-1,
            0.0,
            0.0,
            -3.3608926294469414,
            -8.68219346841726e-1,
            2.759209969944671e1,
            2.0154067550477894e1,
            -4.348988418106996e1,
        ],
        &[
            4.7766253643826434e-1,
            0.0,
            0.0,
            -2.4881146199716677,
            -5.90290826836843e-1,
            2.1230051448181193e1,
            1.5279233632882423e1,
            -3.328821096898486e1,
            -2.0331201708508627e-2,
        ],
        &[
            -9.371424300859873e-1,
            0.0,
            0.0,
            5.186372428844064,
            1.0914373489967295,
            -8.149787010746927,
            -1.8520065659996959e1,
            2.2739487099350505e1,
            2.4936055526796523,
            -3.0467644718982196,
        ],
        &[
            2.273310147516538,
            0.0,
            0.0,
            -1.053449546673725e1,
            -2.0008720582248625,
            -1.795893186311880e1,
            2.794888452941996e1,
            -2.8589982771350235,
            -8.87285693353063,
            1.2360567175794303e1,
            6.433927460157636e-1,
        ],
    ],
    b: &[
        5.4293734116568765e-2,
        0.0,
        0.0,
        0.0,
        0.0,
        4.450312892752409,
        1.8915178993145003,
        -5.801203960010585,
        3.111643669578199e-1,
        -1.521609496625161e-1,
        2.0136540080403034e-1,
        4.471061572777259e-2,
    ],
    c: &[
        0.0,
        5.260015195876773e-2,
        7.89002279381516e-2,
        1.183503419072274e-1,
        2.816496580927726e-1,
        3.333333333333333e-1,
        0.25,
        3.076923076923077e-1,
        6.512820512820513e-1,
        0.6,
        8.571428571428571e-1,
        1.0,
    ],
    error: ErrorWeights::Dop853 {
        er: &[
            1.312004499419488e-2,
            0.0,
            0.0,
            0.0,
            0.0,
            -1.2251564463762044,
            -4.957589496572502e-1,
            1.6643771824549864,
            -3.5032884874997366e-1,
            3.341791187130175e-1,
            8.192320648511571e-2,
            -2.2355307863886294e-2,
        ],
        bhh: [2.440944881889764e-1, 7.338466882816118e-1, 2.2058823529411766e-2],
    },
    order: 8,
    control_order: 8,
    fsal: false,
};

#[cfg(test)]
mod tests {
    use super::*;

    fn row_sums_match_nodes(tab: &Tableau, tol: f64) {
        for (i, row) in tab.a.iter().enumerate() {
            let s: f64 = row.iter().sum();
            assert!((s - tab.c[i]).abs() < tol, "row {i}: {s} vs {}", tab.c[i]);
        }
    }

    /// Quadrature conditions `Σ b_i c_i^(q-1) = 1/q` up to `order`.
    fn quadrature_conditions(b: &[f64], c: &[f64], order: u32, tol: f64) {
        for q in 1..=order {
            let s: f64 = b.iter().zip(c).map(|(b, c)| b * c.powi(q as i32 - 1)).sum();
            assert!((s - 1.0 / q as f64).abs() < tol, "q = {q}: {s}");
        }
    }

    /// `Σ b_i a_ij c_j^(q-1) = 1/(q(q+1))`, the simplest non-bushy trees.
    fn tall_conditions(tab: &Tableau, order: u32, tol: f64) {
        for q in 1..order {
            let mut s = 0.0;
            for i in 0..tab.stages {
                let inner: f64 = tab.a[i].iter().enumerate().map(|(j, a)| a * tab.c[j].powi(q as i32 - 1)).sum();
                s += tab.b[i] * inner;
            }
            let expected = 1.0 / (q as f64 * (q + 1) as f64);
            assert!((s - expected).abs() < tol, "q = {q}: {s} vs {expected}");
        }
    }

    #[test]
    fn tsit5_order_conditions() {
        row_sums_match_nodes(&TSIT5, 1e-14);
        quadrature_conditions(TSIT5.b, TSIT5.c, 5, 1e-14);
        tall_conditions(&TSIT5, 5, 1e-14);
        let ErrorWeights::Single(e) = TSIT5.error else { unreachable!() };
        // The embedded solution b - e is 4th order.
        let embedded: Vec<f64> = TSIT5.b.iter().zip(e).map(|(b, e)| b - e).collect();
        quadrature_conditions(&embedded, TSIT5.c, 4, 1e-12);
        // FSAL: last row of a equals b.
        for (a, b) in TSIT5.a[6].iter().zip(TSIT5.b) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn dop853_order_conditions() {
        row_sums_match_nodes(&DOP853, 1e-13);
        quadrature_conditions(DOP853.b, DOP853.c, 8, 1e-12);
        tall_conditions(&DOP853, 8, 1e-12);
        let ErrorWeights::Dop853 { er, bhh } = &DOP853.error else { unreachable!() };
        // The 5th order estimate is a difference of two consistent methods.
        assert!(er.iter().sum::<f64>().abs() < 1e-13);
        assert!((bhh.iter().sum::<f64>() - 1.0).abs() < 1e-13);
    }
}
