use jetcartan::frame::{CanonicalForms, JetChart};
use jetcartan::lie::Eta;
use jetcartan::lifts::*;
use jetcartan::sampling::Sampler;
use jetcartan::sections::random_connection;

#[test]
fn adapted_basis_contractions_and_brackets() {
    for m in [2usize, 3] {
        let jet = JetChart::new(m);
        let cf = CanonicalForms::build(&jet, &Eta::lorentzian(m)).unwrap();
        let mut s = Sampler::new(9);
        let xi = random_connection(m, &mut s, true, 0.3);
        let basis = BasisFields::build(&jet, &xi).unwrap();
        let c = DifferenceTensor::build(&cf, &basis);
        let dual = DualBasis::build(&cf, &c);
        let pts: Vec<Vec<f64>> = (0..10).map(|_| s.jet_point(m, 0)).collect();
        let groups: Vec<_> = (0..2).map(|_| s.group_element(m)).collect();
        let d = duality_residual(&dual, &basis, &pts[..3], None).unwrap();
        assert!(d < 1e-10, "m={m} duality {d}");
        let mut all = difference_residuals(&basis, &c, &pts, &groups).unwrap();
        all.extend(contraction_residuals(&cf, &basis, &c, &dual, &pts).unwrap());
        all.extend(bracket_residuals(&cf, &basis, &[], &pts).unwrap());
        assert!(all.len() >= 20);
        for (n, v) in all {
            assert!(v < 1e-10, "m={m} {n}: {v}");
        }
    }
}
