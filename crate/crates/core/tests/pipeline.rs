use steklov_match::evaluation::geodesic_error;
use steklov_match::matching::{match_meshes, InitStrategy, MatchOptions, NnMode, VertexMap};
use steklov_match::mesh::shapes;
use steklov_match::Error;

fn small_opts() -> MatchOptions {
    MatchOptions {
        n_lb: 40,
        n_ds: 6,
        ..Default::default()
    }
}

#[test]
fn different_resolutions() {
    let a = shapes::icosphere(8);
    let b = shapes::bumpy_sphere(9, 0.05);
    let la = shapes::sphere_landmarks(&a, 6);
    let lb = shapes::sphere_landmarks(&b, 6);
    let res = match_meshes(&a, &la, &b, &lb, &small_opts()).unwrap();
    assert_eq!(res.map_st.len(), a.num_vertices());
    assert_eq!(res.map_ts.len(), b.num_vertices());
    assert!(res.map_st.targets().iter().all(|&t| t < b.num_vertices()));
    for (&s, &t) in la.iter().zip(&lb) {
        assert_eq!(res.map_st.get(s), t);
        assert_eq!(res.map_ts.get(t), s);
    }
    // Compare against the nearest vertex on the other sphere.
    let gt = VertexMap::new(
        a.vertices()
            .iter()
            .map(|p| shapes::nearest_vertex(&b, &(p.normalize() * b.vertex(0).norm())))
            .collect(),
    );
    let curve = geodesic_error(&res.map_st, &gt, &b).unwrap();
    assert!(curve.mean < 0.05, "mean error {}", curve.mean);
}

#[test]
fn every_strategy_and_mode_self_matches() {
    let mesh = shapes::bumpy_sphere(8, 0.08);
    let lm = shapes::sphere_landmarks(&mesh, 5);
    for init in [InitStrategy::NormalDerivatives, InitStrategy::Trivial, InitStrategy::ConformalEnergy] {
        for mode in [NnMode::Fast, NnMode::Principled] {
            let opts = MatchOptions {
                init,
                mode,
                ..small_opts()
            };
            let res = match_meshes(&mesh, &lm, &mesh, &lm, &opts).unwrap();
            assert!(res.map_st.identity_fraction() > 0.99, "{init} / {mode}");
            assert!(res.map_ts.identity_fraction() > 0.99, "{init} / {mode}");
        }
    }
}

#[test]
fn conformal_dilation() {
    let a = shapes::icosphere(10);
    let b = shapes::stereographic_dilation(&a, 1.5);
    let lm = shapes::sphere_landmarks(&a, 6);
    let res = match_meshes(&a, &lm, &b, &lm, &small_opts()).unwrap();
    let id = VertexMap::new((0..a.num_vertices()).collect());
    let curve = geodesic_error(&res.map_st, &id, &b).unwrap();
    assert!(curve.mean < 0.05, "mean error {}", curve.mean);
    assert!(res.log.iter().all(|r| r.target_to_source.total.is_finite()));
}

#[test]
fn rejects_bad_input() {
    let mesh = shapes::icosphere(6);
    let lm = shapes::sphere_landmarks(&mesh, 4);
    let opts = small_opts();
    assert!(matches!(
        match_meshes(&mesh, &lm, &mesh, &lm[..3], &opts),
        Err(Error::Config(_))
    ));
    assert!(matches!(match_meshes(&mesh, &[], &mesh, &[], &opts), Err(Error::Config(_))));
    let close = [lm[0], mesh.neighbors(lm[0])[0]];
    assert!(matches!(
        match_meshes(&mesh, &close, &mesh, &close, &opts),
        Err(Error::LandmarksTooClose(..))
    ));
    assert!(matches!(
        match_meshes(&mesh, &[mesh.num_vertices()], &mesh, &[0], &opts),
        Err(Error::InvalidLandmark(_))
    ));
}
