mod common;

use spinnet::bounds::{
    classify_dark, max_fidelity, odd_power_sums, phase_reachability, spectral, Blocker, DarkClass,
};
use spinnet::fixtures;
use spinnet::linalg::{c, frobenius, CMat, CVec};
use spinnet::network::Which;
use spinnet::operators::restrict;
use spinnet::symmetries::{find_asos, restrict_to};

fn ket(n: usize, amps: &[(usize, f64, f64)]) -> CVec {
    let mut v = CVec::zeros(n);
    for &(k, re, im) in amps {
        v[k - 1] = c(re, im);
    }
    let nv = v.norm();
    v / c(nv, 0.0)
}

#[test]
fn golden_fidelities() {
    let s = 0.5f64.sqrt();
    let cases = [
        (fixtures::fig1(), ket(7, &[(6, 1.0, 0.0)]), 0.5),
        (fixtures::fig1(), ket(7, &[(7, 1.0, 0.0)]), 0.5),
        (fixtures::fig2(), ket(7, &[(3, 1.0, 0.0)]), 0.6),
        (fixtures::fig2(), ket(7, &[(6, s, 0.0), (7, s, 0.0)]), 0.8),
        (fixtures::fig1(), ket(7, &[(5, 1.0, 0.0)]), 1.0),
    ];
    for (net, target, expected) in cases {
        let b = max_fidelity(&net, &target).unwrap();
        assert!((b.value - expected).abs() < 1e-9, "{} vs {expected}", b.value);
    }
}

#[test]
fn fork_chain_dark_component_for_spin_six() {
    let net = fixtures::fig1();
    let b = max_fidelity(&net, &ket(7, &[(6, 1.0, 0.0)])).unwrap();
    assert_eq!(b.dark_components.len(), 1);
    assert!((b.dark_components[0].weight - 0.5).abs() < 1e-12);
    let spec = spectral(&net).unwrap();
    let d = &spec.dark[b.dark_components[0].index].vector;
    let expected = ket(7, &[(6, 1.0, 0.0), (7, -1.0, 0.0)]);
    assert!((d.dotc(&expected).norm() - 1.0).abs() < 1e-12);
}

#[test]
fn target_validation() {
    let net = fixtures::fig1();
    let mut v = CVec::zeros(7);
    v[2] = c(0.9, 0.0);
    assert!(matches!(max_fidelity(&net, &v), Err(spinnet::Error::NotNormalized(_))));
    let v = ket(7, &[(1, 1.0, 0.0), (3, 1.0, 0.0)]);
    assert!(matches!(max_fidelity(&net, &v), Err(spinnet::Error::OverlapsPendant(_))));
}

#[test]
fn second_fixture_spectrum() {
    let spec = spectral(&fixtures::fig2()).unwrap();
    let r5 = 5f64.sqrt();
    let mut expected = vec![-((5.0 + r5) / 2.0).sqrt(), -((5.0 - r5) / 2.0).sqrt(), ((5.0 - r5) / 2.0).sqrt(), ((5.0 + r5) / 2.0).sqrt()];
    expected.sort_by(f64::total_cmp);
    let got: Vec<f64> = spec.eigenvalues[1..].to_vec();
    assert_eq!(got.len(), 4);
    for (g, e) in got.iter().zip(&expected) {
        assert!((g - e).abs() < 1e-9);
    }
    // zero eigenspace orthogonal to |2>
    let zero: Vec<&CVec> = spec.dark.iter().filter(|d| d.eigenvalue.abs() < 1e-9).map(|d| &d.vector).collect();
    assert_eq!(zero.len(), 2);
    let p_got = zero.iter().fold(CMat::zeros(7, 7), |acc, v| acc + *v * v.adjoint());
    let a = ket(7, &[(6, 1.0, 0.0), (7, -1.0, 0.0)]);
    let b = ket(7, &[(3, 2.0, 0.0), (4, -2.0, 0.0), (6, 1.0, 0.0), (7, 1.0, 0.0)]);
    let p_exp = &a * a.adjoint() + &b * b.adjoint();
    assert!(frobenius(&(p_got - p_exp)) < 1e-9);
}

#[test]
fn spectral_invariants() {
    for net in [fixtures::fig1(), fixtures::fig2(), fixtures::triangle_tail(), fixtures::pair()] {
        let spec = spectral(&net).unwrap();
        assert_eq!(spec.overlaps[0], 0.0);
        assert!(spec.overlaps[1..].iter().all(|&a| a > 0.0));
        let total: f64 = spec.overlaps.iter().map(|a| a * a).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let gram = spec.eigenvectors.adjoint() * &spec.eigenvectors;
        assert!(frobenius(&(gram - CMat::identity(spec.len(), spec.len()))) < 1e-12);
        let a = restrict(&net, Which::Drift, 1).unwrap().entries;
        for k in 0..spec.len() {
            let v = spec.vector(k);
            assert!((&a * &v - &v * c(spec.eigenvalues[k], 0.0)).norm() < 1e-10);
            assert!((v[1].re - spec.overlaps[k]).abs() < 1e-12);
        }
        if spec.aso.is_some() {
            for p in spec.accessible() {
                if let Some(q) = spec.paired_with[p] {
                    assert!((spec.eigenvalues[p] + spec.eigenvalues[q]).abs() < 1e-9);
                    assert!((spec.overlaps[p] - spec.overlaps[q]).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn pair_spectrum_is_trivial() {
    let spec = spectral(&fixtures::pair()).unwrap();
    assert_eq!(spec.eigenvalues, vec![0.0, 0.0]);
    assert!((spec.overlaps[1] - 1.0).abs() < 1e-15);
}

#[test]
fn fork_chain_spectrum_is_symmetric() {
    let spec = spectral(&fixtures::fig1()).unwrap();
    assert_eq!(spec.len(), 6);
    let mut ev = spec.eigenvalues[1..].to_vec();
    let mut neg: Vec<f64> = ev.iter().map(|x| -x).collect();
    ev.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    for (a, b) in ev.iter().zip(&neg) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn aso_maps_eigenvectors_to_partners() {
    for net in [fixtures::fig1(), fixtures::fig2()] {
        let spec = spectral(&net).unwrap();
        let m = spec.aso.clone().expect("bipartite fixture");
        for p in spec.accessible() {
            if spec.eigenvalues[p].abs() < 1e-9 {
                continue;
            }
            let q = spec.paired_with[p].unwrap();
            let image = &m * spec.vector(p);
            let overlap = spec.vector(q).dotc(&image).norm() / image.norm();
            assert!((overlap - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn phase_reachability_examples() {
    let net = fixtures::fig1();
    let s = 0.5f64.sqrt();
    assert!(phase_reachability(&net, &ket(7, &[(5, 1.0, 0.0)])).unwrap().reachable);
    assert!(!phase_reachability(&net, &ket(7, &[(3, s, 0.0), (4, s, 0.0)])).unwrap().reachable);
    let r = phase_reachability(&net, &ket(7, &[(3, s, 0.0), (4, 0.0, s)])).unwrap();
    assert!(r.reachable);
    assert!(r.phase.is_some());
    // non-bipartite drift imposes nothing
    let tri = fixtures::triangle_tail();
    assert!(phase_reachability(&tri, &ket(5, &[(3, s, 0.0), (4, s, 0.0)])).unwrap().reachable);
}

#[test]
fn dark_classification_examples() {
    let fig2 = fixtures::fig2();
    let anti = ket(7, &[(6, 1.0, 0.0), (7, -1.0, 0.0)]);
    match classify_dark(&fig2, &anti).unwrap() {
        DarkClass::TrulyDark { blocker: Blocker::Permutation { permutation, .. } } => assert_eq!(permutation, "(6 7)"),
        other => panic!("unexpected {other:?}"),
    }
    let sym = ket(7, &[(3, 2.0, 0.0), (4, -2.0, 0.0), (6, 1.0, 0.0), (7, 1.0, 0.0)]);
    assert_eq!(classify_dark(&fig2, &sym).unwrap(), DarkClass::CatalyticallyAccessible);
    let fig1 = fixtures::fig1();
    assert!(matches!(classify_dark(&fig1, &anti).unwrap(), DarkClass::TrulyDark { blocker: Blocker::Permutation { .. } }));
    assert!(matches!(classify_dark(&fig1, &ket(7, &[(5, 1.0, 0.0)])), Err(spinnet::Error::NotDark(_))));
}

#[test]
fn odd_power_identity() {
    for net in [fixtures::fig1(), fixtures::fig2()] {
        for v in odd_power_sums(&net, 5) {
            assert!(v.abs() < 1e-9);
        }
    }
    let tri = odd_power_sums(&fixtures::triangle(), 2);
    assert!(tri.iter().any(|&v| v > 0.5));
}

#[test]
fn aso_exists_iff_bipartite_and_is_unique() {
    let mut rng = common::rng(2024);
    let mut bipartite_seen = 0;
    for trial in 0..200 {
        use rand::Rng;
        let n = rng.random_range(3..=8);
        let extra = rng.random_range(0..4);
        let net = common::random_pendant(&mut rng, n, extra);
        let spec = spectral(&net).unwrap();
        let hams = restrict_to(
            &[restrict(&net, Which::Drift, 1).unwrap().entries, restrict(&net, Which::Control, 1).unwrap().entries],
            &spec.eigenvectors,
        );
        let asos = find_asos(&hams).unwrap();
        let verts: Vec<usize> = (2..=n).collect();
        let edges: Vec<(usize, usize)> = net.drift_edges.iter().map(|e| (e.i, e.j)).collect();
        let bip = common::bipartite_by_traces(n, &edges, &verts);
        bipartite_seen += usize::from(bip);
        assert_eq!(!asos.is_empty(), bip, "trial {trial}: {}", net.to_json());
        assert!(asos.len() <= 1, "trial {trial}");
    }
    assert!(bipartite_seen > 20 && bipartite_seen < 180);
}
