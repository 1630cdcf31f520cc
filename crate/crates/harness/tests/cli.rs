use std::process::Command;

fn trafficlab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trafficlab"))
}

#[test]
fn help_lists_subcommands() {
    let out = trafficlab().arg("--help").output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["gen", "run", "train", "compare"] {
        assert!(text.contains(cmd), "{text}");
    }
}

#[test]
fn gen_reports_and_saves_the_desk_network() {
    let d = tempfile::tempdir().unwrap();
    let path = d.path().join("net.json");
    let out = trafficlab().args(["gen", "--scenario", "desk", "--out"]).arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("4 signals"), "{text}");
    assert!(path.is_file());
}

#[test]
fn compare_on_missing_dirs_fails_with_context() {
    let out = trafficlab().args(["compare", "--baseline", "/nonexistent/a", "--model", "/nonexistent/b"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/a"));
}
