use mvtex_core::config::RunConfig;
use mvtex_core::experiment::{build_scene, compare_modes, load_source};

/// Async seam energy grows with the per-view perturbation while MVD stays
/// near the seamless value 1.
#[test]
fn seam_energy_tracks_perturbation() {
    let mut asy = Vec::new();
    let mut mvd = Vec::new();
    for sigma in [0.0, 0.15, 0.3, 0.6] {
        let cfg = RunConfig {
            perturbation: sigma,
            view_resolution: 64,
            texture_resolution: 128,
            seed: 1,
            ..RunConfig::default()
        };
        let scene = build_scene(&cfg, load_source(&cfg.mesh).unwrap());
        let (m, a) = compare_modes(&cfg, &scene).unwrap();
        mvd.push(m.report.seam_energy.unwrap());
        asy.push(a.report.seam_energy.unwrap());
    }
    assert!(asy.windows(2).all(|w| w[1] > w[0]), "async {asy:?}");
    for (m, a) in mvd.iter().zip(&asy) {
        assert!(m < a, "mvd {mvd:?} async {asy:?}");
        assert!((m - 1.0).abs() < 0.1, "mvd {mvd:?}");
    }
}
