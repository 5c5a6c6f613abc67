use ecobench_core::eco::{dominates, eco_index, pareto_front, rank_by_eei, EcoRow, EcoTable, EnergyBasis};
use ecobench_core::energy::{integrate_energy, PowerSample};
use proptest::prelude::*;

fn row(i: usize, f1: f64, energy: f64) -> EcoRow {
    EcoRow {
        model: format!("m{i}"),
        accuracy: f1,
        f1,
        roc_auc: 0.5,
        train_energy_kwh: energy,
        infer_energy_kwh: 0.0,
        total_energy_kwh: energy,
        total_emissions_g: energy * 400.0,
        eei: 0.0,
    }
}

fn table(points: &[(f64, f64)], eps: f64) -> EcoTable {
    let mut t = EcoTable {
        rows: vec![],
        eps,
        basis: EnergyBasis::Total,
    };
    for (i, &(f, e)) in points.iter().enumerate() {
        t.push(row(i, f, e)).unwrap();
    }
    t
}

fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
    // small grids force ties in both coordinates
    proptest::collection::vec(
        (
            (0u32..10).prop_map(|v| v as f64 / 10.0),
            (1u32..8).prop_map(|v| v as f64),
        ),
        1..12,
    )
}

proptest! {
    #[test]
    fn front_matches_quadratic_oracle(pts in points()) {
        let t = table(&pts, 1e-12);
        let mut got: Vec<String> = pareto_front(&t.rows).into_iter().map(|r| r.model).collect();
        let mut want: Vec<String> = t
            .rows
            .iter()
            .filter(|b| !t.rows.iter().any(|a| dominates(a, b)))
            .map(|r| r.model.clone())
            .collect();
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn front_is_idempotent_and_sorted(pts in points()) {
        let t = table(&pts, 1e-12);
        let f = pareto_front(&t.rows);
        prop_assert_eq!(pareto_front(&f), f.clone());
        prop_assert!(f.windows(2).all(|w| w[0].total_energy_kwh <= w[1].total_energy_kwh));
    }

    #[test]
    fn eei_maximum_on_front(pts in points()) {
        let t = table(&pts, 1e-12);
        let best = rank_by_eei(&t)[0].clone();
        prop_assert!(pareto_front(&t.rows).iter().any(|r| r.model == best));
    }

    #[test]
    fn eei_monotone(f1 in 0.01f64..1.0, e in 0.0f64..10.0, de in 0.001f64..1.0) {
        prop_assert!(eco_index(f1, e + de, 1e-12) < eco_index(f1, e, 1e-12));
        prop_assert!(eco_index((f1 + 0.001).min(1.0), e, 1e-12) > eco_index(f1 * 0.999, e, 1e-12));
    }

    #[test]
    fn integration_additive(watts in proptest::collection::vec(0.0f64..500.0, 2..40), split in 1usize..39) {
        let samples: Vec<PowerSample> = watts.iter().enumerate().map(|(i, &w)| PowerSample { t: i as f64 * 0.1, watts: w }).collect();
        let cut = split.min(samples.len() - 1);
        let whole = integrate_energy(&samples).unwrap();
        let parts = integrate_energy(&samples[..=cut]).unwrap() + integrate_energy(&samples[cut..]).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1e-300));
    }
}
