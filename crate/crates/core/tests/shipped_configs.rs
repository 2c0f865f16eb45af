use ris_amp::config::{Profile, SystemConfig};

fn shipped(name: &str) -> SystemConfig {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    SystemConfig::load(path).unwrap()
}

#[test]
fn shipped_files_match_builtin_profiles() {
    assert_eq!(shipped("desk.toml"), SystemConfig::from_profile(Profile::Desk));
    assert_eq!(shipped("paper.toml"), SystemConfig::from_profile(Profile::Paper));
}
