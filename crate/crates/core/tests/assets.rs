//! Shipped files agree with the code that describes them.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;

use nullspace_lfd::fdm::read_samples_csv;
use nullspace_lfd::scenarios::shapes::{raw_demo, Shape, ShapeParams};
use nullspace_lfd::scenarios::{ScenarioConfig, ScenarioKind};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

#[test]
fn shipped_demos_match_the_shape_generator() {
    for shape in Shape::ALL {
        let path = root().join(format!("assets/demos/{}.csv", shape.name()));
        let read = read_samples_csv::<f64, _>(BufReader::new(File::open(&path).unwrap())).unwrap();
        let expected = raw_demo(shape, &ShapeParams::default(), &Vector3::zeros());
        assert_eq!(read.len(), expected.len());
        for (a, b) in read.iter().zip(&expected) {
            assert!((a.t - b.t).abs() < 1e-12);
            assert!((a.position - b.position).norm() < 1e-12);
        }
    }
}

#[test]
fn shipped_configs_load_with_the_expected_kind() {
    let expected = [
        ("learn_trapezoid", ScenarioKind::Learn),
        ("learn_w", ScenarioKind::Learn),
        ("teach", ScenarioKind::Teach),
        ("comply", ScenarioKind::Comply),
        ("reproduce_pulse", ScenarioKind::Reproduce),
    ];
    for (name, kind) in expected {
        let c = ScenarioConfig::load(&root().join(format!("configs/{name}.toml"))).unwrap();
        assert_eq!(c.kind, kind, "{name}");
    }
    // points at a skill written by the learn config, so only parse it
    let text = std::fs::read_to_string(root().join("configs/reproduce_trapezoid.toml")).unwrap();
    let c = ScenarioConfig::from_toml_str(&text).unwrap();
    assert_eq!(c.kind, ScenarioKind::Reproduce);
    assert!(c.reproduce.skill.is_some());
}

#[test]
fn default_configs_round_trip_through_toml() {
    for kind in [ScenarioKind::Learn, ScenarioKind::Reproduce, ScenarioKind::Teach, ScenarioKind::Comply] {
        let c = ScenarioConfig::new(kind);
        assert_eq!(ScenarioConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap(), c);
    }
}
