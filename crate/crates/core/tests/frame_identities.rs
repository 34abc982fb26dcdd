use jetcartan::frame::{CanonicalForms, JetChart};
use jetcartan::lie::Eta;
use jetcartan::sampling::Sampler;

fn points(m: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut s = Sampler::new(seed);
    (0..n).map(|_| s.jet_point(m, 0)).collect()
}

#[test]
fn structure_identities_hold() {
    for m in [2usize, 3, 4] {
        let jet = JetChart::new(m);
        let cf = CanonicalForms::build(&jet, &Eta::lorentzian(m)).unwrap();
        let pts = points(m, 5, m as u64);
        let mut ids = cf.structure_identities();
        ids.push(cf.curvature_coordinate_identity());
        ids.push(cf.torsion_coordinate_identity());
        ids.push(cf.metricity_coordinate_identity());
        ids.push(cf.metricity_projector_identity());
        if m <= 3 {
            ids.push(cf.theta_wedge_identities());
        }
        for id in &ids {
            let r = id.residual(&pts).unwrap();
            
            assert!(r < 1e-9, "{} fails at m={m}: {r}", id.name);
        }
    }
}
