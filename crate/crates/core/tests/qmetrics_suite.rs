use qldev::expfam::ExponentialFamily;
use qldev::families::{ClassicalDiagonalFamily, EquatorialQubitFamily, GaussianFockFamily, StateFamily};
use qldev::linalg::{max_abs, random, tensor_product, DensityMatrix, HermitianOperator};
use qldev::measurement::{distribution, Povm};
use qldev::qmetrics::*;
use qldev::stats::stream_rng;

fn random_povm<R: rand::Rng>(dim: usize, outcomes: usize, rng: &mut R) -> Povm {
    let elements = random::povm_elements(dim, outcomes, rng);
    Povm::new(elements, (0..outcomes).map(|i| i as f64).collect()).unwrap()
}

#[test]
fn fisher_ordering_random_suite() {
    let mut rng = stream_rng(21, &[]);
    let mut count = 0;
    for d in 2..=4 {
        for _ in 0..180 {
            let rho = random::density(d, &mut rng);
            let b = random::traceless_hermitian(d, &mut rng);
            let (_, j) = sld_and_fisher(&rho, &b).unwrap();
            let jt = kmb_fisher(&rho, &b).unwrap();
            let jr = rld_fisher(&rho, &b).unwrap();
            assert!(j <= jt + 1e-9 * (1.0 + jt), "J {j} > J~ {jt}");
            assert!(jt <= jr + 1e-9 * (1.0 + jr), "J~ {jt} > Jr {jr}");
            count += 1;
        }
    }
    assert!(count >= 500);
}

#[test]
fn fuchs_inequality_random_suite() {
    let mut rng = stream_rng(22, &[]);
    let mut count = 0;
    for d in 2..=4 {
        for k in 0..170 {
            let rho = random::density(d, &mut rng);
            let sigma = random::density(d, &mut rng);
            let m = random_povm(d, 2 + k % 4, &mut rng);
            let p = distribution(&m, &rho).unwrap().probabilities;
            let q = distribution(&m, &sigma).unwrap().probabilities;
            let bc: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum();
            assert!(fidelity(&rho, &sigma).unwrap() <= bc + 1e-10);
            count += 1;
        }
    }
    assert!(count >= 500);
}

#[test]
fn divergence_basic_properties() {
    let mut rng = stream_rng(23, &[]);
    for d in 2..=4 {
        for _ in 0..30 {
            let rho = random::density(d, &mut rng);
            let sigma = random::density(d, &mut rng);
            assert!(relative_entropy(&rho, &sigma).unwrap() >= -1e-10);
            assert!(relative_entropy(&rho, &rho).unwrap().abs() <= 1e-11);
            let b1 = bures_distance(&rho, &sigma).unwrap();
            assert!((b1 - bures_distance(&sigma, &rho).unwrap()).abs() <= 1e-10);
            assert!(b1 >= 0.0 && b1 <= 2f64.sqrt() + 1e-9);
            let i1 = affinity(&rho, &sigma).unwrap();
            assert!((i1 - affinity(&sigma, &rho).unwrap()).abs() <= 1e-9);
            assert!(i1 >= -1e-9);
            let rho2 = random::density(2, &mut rng);
            let sigma2 = random::density(2, &mut rng);
            let joint = relative_entropy(
                &tensor_product(&rho, &rho2).unwrap(),
                &tensor_product(&sigma, &sigma2).unwrap(),
            )
            .unwrap();
            let sum = relative_entropy(&rho, &sigma).unwrap() + relative_entropy(&rho2, &sigma2).unwrap();
            assert!((joint - sum).abs() <= 1e-9);
            let ijoint = affinity(
                &tensor_product(&rho, &rho2).unwrap(),
                &tensor_product(&sigma, &sigma2).unwrap(),
            )
            .unwrap();
            assert!((ijoint - i1 - affinity(&rho2, &sigma2).unwrap()).abs() <= 1e-9);
        }
    }
}

#[test]
fn defining_equation_residuals() {
    let mut rng = stream_rng(24, &[]);
    for k in 0..100 {
        let d = 2 + k % 3;
        let rho = random::density(d, &mut rng);
        let b = random::traceless_hermitian(d, &mut rng);
        let (l, j) = sld_and_fisher(&rho, &b).unwrap();
        assert!(sld_residual(&rho, &l, &b) <= 1e-9);
        assert!(j >= 0.0);
    }
    for _ in 0..20 {
        let rho = random::density(3, &mut rng);
        let b = random::traceless_hermitian(3, &mut rng);
        let (lt, jt) = kmb_and_fisher(&rho, &b).unwrap();
        assert!(kmb_quadrature_residual(&rho, &lt, &b) <= 1e-7);
        let (_, j) = sld_and_fisher(&rho, &b).unwrap();
        assert!(jt >= j - 1e-9);
    }
}

#[test]
fn commuting_case_coincides() {
    let p = 0.3;
    let b = 0.2;
    let rho = DensityMatrix::diagonal(&[p, 1.0 - p]).unwrap();
    let bop = HermitianOperator::from_real_diagonal(&[b, -b]);
    let (l, j) = sld_and_fisher(&rho, &bop).unwrap();
    let (lt, jt) = kmb_and_fisher(&rho, &bop).unwrap();
    assert!((l.matrix()[(0, 0)].re - b / p).abs() < 1e-12);
    assert!((l.matrix()[(1, 1)].re + b / (1.0 - p)).abs() < 1e-12);
    assert!(max_abs(&(l.matrix() - lt.matrix())) <= 1e-11);
    let classical = b * b / p + b * b / (1.0 - p);
    assert!((j - classical).abs() < 1e-12 && (jt - classical).abs() < 1e-12);
    assert!((rld_fisher(&rho, &bop).unwrap() - classical).abs() < 1e-12);
}

#[test]
fn equatorial_closed_forms_and_rld_blowup() {
    for &r in &[0.3, 0.6, 0.9] {
        let f = EquatorialQubitFamily::new(r).unwrap();
        let rep = family_fisher(&f, 0.7).unwrap();
        assert!((rep.j_sld - r * r).abs() < 1e-8);
        assert!((rep.j_kmb - 0.5 * r * ((1.0 + r) / (1.0 - r)).ln()).abs() < 1e-8);
        let d = relative_entropy(&f.state(0.7).unwrap(), &f.state(0.0).unwrap()).unwrap();
        assert!((d - 0.5 * r * (1.0 - 0.7f64.cos()) * ((1.0 + r) / (1.0 - r)).ln()).abs() < 1e-10);
    }
    let f = EquatorialQubitFamily::new(0.999).unwrap();
    let rep = family_fisher(&f, 0.2).unwrap();
    assert!(rep.j_rld.unwrap() / rep.j_sld > 100.0);
}

#[test]
fn pinching_never_increases_relative_entropy() {
    let mut rng = stream_rng(25, &[]);
    for d in 2..=4 {
        for _ in 0..30 {
            let rho = random::density(d, &mut rng);
            let sigma = random::density(d, &mut rng);
            let pvm = qldev::measurement::eigenbasis_pvm(&random::density(d, &mut rng));
            let pr = qldev::measurement::pinching(&pvm, &rho).unwrap();
            let ps = qldev::measurement::pinching(&pvm, &sigma).unwrap();
            assert!(relative_entropy(&pr, &ps).unwrap() <= relative_entropy(&rho, &sigma).unwrap() + 1e-9);
        }
    }
}

#[test]
fn orthogonal_pure_states() {
    let up = DensityMatrix::diagonal(&[1.0, 0.0]).unwrap();
    let down = DensityMatrix::diagonal(&[0.0, 1.0]).unwrap();
    assert!((bures_distance(&up, &down).unwrap() - 2f64.sqrt()).abs() < 1e-12);
    assert!(bures_distance(&up, &up).unwrap().abs() < 1e-12);
    assert_eq!(relative_entropy(&up, &down).unwrap(), f64::INFINITY);
    assert_eq!(affinity(&up, &down).unwrap(), f64::INFINITY);
}

#[test]
fn limit_relations_equatorial() {
    let f = EquatorialQubitFamily::new(0.5).unwrap();
    let row = &limit_table(&f, 0.3, &[1e-3]).unwrap()[0];
    assert!((row.two_d - row.j_kmb).abs() / row.j_kmb <= 0.02);
    assert!((row.four_b2 - row.j_sld).abs() / row.j_sld <= 0.02);
    assert!((row.affinity - row.j_sld).abs() / row.j_sld <= 0.02);
}

#[test]
fn limit_relations_classical() {
    let fam = ExponentialFamily::scalar(vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 1.0]).unwrap();
    let f = ClassicalDiagonalFamily::new(fam).unwrap();
    // Symmetric point: the O(ε) skewness correction vanishes.
    let fisher = f.classical_fisher(0.0).unwrap();
    let row = &limit_table(&f, 0.0, &[1e-4]).unwrap()[0];
    for v in [row.two_d, row.four_b2, row.affinity, row.j_sld, row.j_kmb] {
        assert!((v - fisher).abs() <= 1e-6 * (1.0 + fisher), "{v} vs {fisher}");
    }
}

#[test]
fn limit_relations_gaussian() {
    let f = GaussianFockFamily::new(1.0, 60).unwrap();
    let row = &limit_table(&f, 0.0, &[1e-2]).unwrap()[0];
    assert!((row.affinity - 4.0 / 3.0).abs() / (4.0 / 3.0) <= 0.02);
}

#[test]
fn family_divergence_handles_truncated_tails() {
    let g = GaussianFockFamily::new(1.0, 60).unwrap();
    // Direct diagonalization loses σ's sub-1e−12 tail and reports +∞.
    let raw = relative_entropy(&g.state(1.0).unwrap(), &g.state(-1.0).unwrap()).unwrap();
    assert!(raw.is_infinite());
    let d = family_relative_entropy(&g, 1.0, -1.0).unwrap();
    assert!((d - 4.0 * 2f64.ln()).abs() <= 1e-3 * 4.0 * 2f64.ln(), "{d}");
    let eq = EquatorialQubitFamily::new(0.6).unwrap();
    let direct = relative_entropy(&eq.state(0.7).unwrap(), &eq.state(-0.2).unwrap()).unwrap();
    assert_eq!(family_relative_entropy(&eq, 0.7, -0.2).unwrap(), direct);
}
