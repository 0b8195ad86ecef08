//! Structural invariants of the flows, checked against finite differences and
//! closed-form solutions rather than against the implementation itself.

use proptest::prelude::*;

use pcdnse::analysis::fit_soliton;
use pcdnse::integrate::{solve, OdeProblem};
use pcdnse::model_continuum::{
    field_energy, field_energy_rate, make_soliton_field, pcdnse_rhs, pcdnse_system, Grid,
};
use pcdnse::model_effective::{
    chain_effective_rhs, chain_energy, chain_gradient, energy_decay_rate, general_effective_rhs,
};
use pcdnse::{Boundary, EffectiveParams, FieldState, SolitonCoords, SolverConfig, C64};

fn boundary() -> impl Strategy<Value = Boundary> {
    prop_oneof![Just(Boundary::Periodic), Just(Boundary::Open)]
}

fn lattice_state(max_len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.5..1.5f64, -1.5..1.5f64).prop_map(|(r, i)| C64::new(r, i)), 2..max_len)
}

fn effective() -> impl Strategy<Value = EffectiveParams> {
    (-1.0..1.0f64, 0.0..0.3f64, 0.2..2.0f64).prop_map(|(g, gamma, j)| EffectiveParams::new(g, gamma, j))
}

fn rhs(b: &[C64], eff: &EffectiveParams, boundary: Boundary) -> Vec<C64> {
    let mut out = vec![C64::default(); b.len()];
    chain_effective_rhs(b, eff, boundary, &mut out);
    out
}

/// Central difference of `f` along the flow direction `v`.
fn directional<F: Fn(&[C64]) -> f64>(f: F, b: &[C64], v: &[C64], h: f64) -> f64 {
    let shift = |s: f64| b.iter().zip(v).map(|(x, d)| x + d * s).collect::<Vec<_>>();
    (f(&shift(h)) - f(&shift(-h))) / (2.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chain_flow_conserves_particles(b in lattice_state(40), eff in effective(), bc in boundary()) {
        let db = rhs(&b, &eff, bc);
        let dn: f64 = b.iter().zip(&db).map(|(x, d)| 2.0 * (x.conj() * d).re).sum();
        let scale: f64 = b.iter().zip(&db).map(|(x, d)| x.norm() * d.norm()).sum();
        prop_assert!(dn.abs() <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn chain_energy_rate_matches_finite_difference(b in lattice_state(30), eff in effective(), bc in boundary()) {
        let db = rhs(&b, &eff, bc);
        let fd = directional(|y| chain_energy(y, &eff, bc), &b, &db, 1e-5);
        let rate = energy_decay_rate(&b, &chain_gradient(&eff, bc), &eff);
        let scale = db.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt() * (1.0 + b.len() as f64);
        prop_assert!(rate <= 0.0);
        prop_assert!((fd - rate).abs() <= 1e-6 * scale, "fd {fd} vs rate {rate}");
    }

    #[test]
    fn generic_path_reproduces_chain(b in lattice_state(40), eff in effective(), bc in boundary()) {
        let mut generic = vec![C64::default(); b.len()];
        general_effective_rhs(&b, &chain_gradient(&eff, bc), &eff, &mut generic).unwrap();
        for (x, y) in generic.iter().zip(rhs(&b, &eff, bc)) {
            prop_assert!((x - y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn global_phase_commutes_with_flow(b in lattice_state(20), eff in effective(), theta in 0.0..6.3f64) {
        let rot = C64::from_polar(1.0, theta);
        let turned: Vec<_> = b.iter().map(|x| rot * x).collect();
        for (x, y) in rhs(&turned, &eff, Boundary::Periodic).iter().zip(rhs(&b, &eff, Boundary::Periodic)) {
            prop_assert!((x - rot * y).norm() <= 1e-12 * (1.0 + y.norm()));
        }
    }

    #[test]
    fn continuum_norm_and_energy_rate(
        psi in 0.3..1.5f64, v in -0.6..0.6f64, d in -0.01..0.01f64, eff in effective(), bc in boundary(),
    ) {
        let grid = Grid::new(60.0, 240, bc).unwrap();
        let c = SolitonCoords { psi, x0: 30.0, v, w: 2.0 / psi, d, phi: 0.3 };
        let (field, _) = make_soliton_field(&c, &grid).unwrap();
        let mut dpsi = vec![C64::default(); grid.points];
        pcdnse_rhs(&field.psi, &grid, &eff, &mut dpsi);
        let dn: f64 = field.psi.iter().zip(&dpsi).enumerate()
            .map(|(j, (x, dx))| 2.0 * grid.weight(j) * (x.conj() * dx).re).sum();
        prop_assert!(dn.abs() <= 1e-11, "dN/dt = {dn}");

        let energy = |y: &[C64]| field_energy(&FieldState::new(grid, y.to_vec()).unwrap(), &eff);
        let fd = directional(energy, &field.psi, &dpsi, 1e-5);
        let rate = field_energy_rate(&field, &eff);
        prop_assert!(rate <= 0.0);
        prop_assert!((fd - rate).abs() <= 1e-6 * (1.0 + rate.abs()), "fd {fd} vs rate {rate}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_recovers_sampled_soliton(
        psi in 0.5..2.0f64, x0 in 40.0..60.0f64, v in -0.5..0.5f64, wscale in 1.0..4.0f64,
        d in -0.005..0.005f64, phi in -1.0..1.0f64,
    ) {
        let c = SolitonCoords { psi, x0, v, w: wscale, d, phi };
        let (field, _) = make_soliton_field(&c, &Grid::new(100.0, 1000, Boundary::Periodic).unwrap()).unwrap();
        let fit = fit_soliton(&field).unwrap();
        let got = fit.coords;
        prop_assert!(fit.residual < 1e-8, "residual {}", fit.residual);
        for (a, b) in got.to_array().iter().zip(c.to_array()) {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()), "{got:?} vs {c:?}");
        }
    }
}

/// Without damping the attractive sech soliton translates rigidly at `2Jv`.
#[test]
fn conservative_soliton_keeps_its_shape() {
    let eff = EffectiveParams::new(-0.1, 0.0, 1.0);
    let grid = Grid::new(100.0, 1000, Boundary::Periodic).unwrap();
    let c = SolitonCoords { psi: 1.0, x0: 25.0, v: 0.48, w: 20f64.sqrt(), d: 0.0, phi: 0.0 };
    let (field, _) = make_soliton_field(&c, &grid).unwrap();
    let t1 = 50.0;
    let sol = solve(OdeProblem::new(pcdnse_system(grid, eff), 0.0, t1, field.psi.clone()), &SolverConfig::pcdnse())
        .unwrap();
    let x_end = c.x0 + 2.0 * eff.hopping * c.v * t1;
    let worst = sol
        .final_state()
        .iter()
        .enumerate()
        .map(|(j, z)| {
            let xi = grid.displacement(grid.x(j), x_end);
            let exact = (c.psi / (xi / c.w).cosh()).powi(2);
            (z.norm_sqr() - exact).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 5e-3 * c.psi * c.psi, "max |Δ|ψ|²| = {worst}");
}
