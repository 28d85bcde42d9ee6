//! Cross-module checks against closed forms computed independently of the library.

use std::f64::consts::PI;

use dphase::kirchhoff::{KirchhoffKind, KirchhoffSpec};
use dphase::ledger::{estimate_kappa1, estimation_family, LedgerEntry, LedgerReport, LEDGER_SCHEMA};
use dphase::mesh::{DomainMesh, GridFunction, Interval};
use dphase::modular::{luxemburg_norm, modular, ModularSpec};
use dphase::reaction::Provenance;
use proptest::prelude::*;

fn square(n: usize) -> DomainMesh {
    let iv = Interval::new(0.0, 1.0);
    DomainMesh::new(&[iv, iv], &[n, n]).unwrap()
}

#[test]
fn discrete_dirichlet_eigenvalue_on_the_square() {
    // Five-point Laplacian: 2 (4/h²) sin²(πh/2) with h = 1/(n-1).
    let mesh = square(17);
    let h = 1.0 / 16.0;
    let exact = 2.0 * 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
    let family = estimation_family(&mesh, 3, &[]);
    let (k1, _) = estimate_kappa1(&mesh, &vec![2.0; mesh.len()], &family).unwrap();
    assert!((k1 - exact).abs() / exact < 2e-2, "{k1} vs {exact}");
    assert!((exact - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 1e-2);
}

#[test]
fn luxemburg_on_the_square_matches_lp() {
    let mesh = square(21);
    let u = GridFunction::from_fn(&mesh, |x| (PI * x[0]).sin() * (PI * x[1]).sin()).into_values();
    for p in [1.5, 2.0, 3.0, 4.5] {
        let spec = ModularSpec::unweighted(vec![p; mesh.len()]).unwrap();
        let lp = modular(&mesh, &spec, &u).unwrap().powf(1.0 / p);
        let norm = luxemburg_norm(&mesh, &spec, &u).unwrap();
        assert!((norm - lp).abs() <= 1e-12 * lp, "p = {p}");
    }
}

#[test]
fn affine_kirchhoff_antiderivative() {
    let spec = KirchhoffSpec::new(KirchhoffKind::Affine { m0: 1.0, kappa: 0.5 }, 1.0, 2.4, 4.0).unwrap();
    let t0 = spec.t0;
    assert!(spec.m(t0) * 2.4 <= 0.99 * 4.0);
    for t in [0.0, 0.3 * t0, t0, 2.0 * t0, 10.0] {
        let s = t.min(t0);
        let expect = s + 0.25 * s * s + (1.0 + 0.5 * t0) * (t - s);
        assert!((spec.m_hat(t) - expect).abs() <= 1e-14 * expect.max(1.0));
    }
}

fn ledger_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        Just(f64::INFINITY),
        -1e-300f64..1e-300,
        1e300f64..f64::MAX,
    ]
}

proptest! {
    #[test]
    fn ledger_json_round_trips_bytewise(values in proptest::collection::vec(ledger_value(), 1..40)) {
        let tags = [Provenance::ClosedForm, Provenance::Empirical, Provenance::SampledMajorant];
        let entries = values
            .iter()
            .enumerate()
            .map(|(i, &v)| LedgerEntry { name: format!("c{i}"), value: v, provenance: tags[i % 3] })
            .collect();
        let report = LedgerReport { schema: LEDGER_SCHEMA.to_string(), entries };
        let text = report.to_json().unwrap();
        let back = LedgerReport::from_json(&text).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), text);
        for (a, b) in back.entries.iter().zip(&report.entries) {
            prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
        }
    }

    #[test]
    fn grid_csv_round_trips_exactly(vals in proptest::collection::vec(-1e6f64..1e6, 25)) {
        let mesh = square(5);
        let g = GridFunction::with_zero_trace(&mesh, vals).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mesh, &mut buf).unwrap();
        let back = GridFunction::read_csv(&mesh, buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), g.values());
    }
}
