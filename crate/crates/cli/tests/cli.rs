use std::fs;
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mcca-sim")).args(args).output().unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        "[scenario]\nnode_count = 200\n\n[sim]\nsim_time_s = 128.0\n\n[sweep]\nseeds = [1, 2]\n",
    )
    .unwrap();
    path.display().to_string()
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "config.toml" {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn thread_count_does_not_change_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (dir, j) in [(&a, "1"), (&b, "2")] {
        let o = run(&["--config", &cfg, "-o", dir.to_str().unwrap(), "-j", j, "--sweep", "scenario.node_count=200,300"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (la, lb) = (listing(&a), listing(&b));
    assert!(la.iter().any(|(n, _)| n == "summary.csv"));
    assert!(la.iter().any(|(n, _)| n == "comparison.csv"));
    assert_eq!(la, lb);
}

#[test]
fn dump_config_applies_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    let o = Command::new(env!("CARGO_BIN_EXE_mcca-sim"))
        .args(["--config", &cfg, "--dump-config", "-s", "9", "-m", "mcca_clss"])
        .env("MCCA_TRAFFIC__FLOWS", "12")
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("node_count = 200"));
    assert!(text.contains("flows = 12"));
    assert!(text.contains("seeds = [9]"));
    assert!(text.contains("modes = [\"mcca_clss\"]"));
}

#[test]
fn bad_input_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path());
    assert!(!run(&["--config", "/nonexistent/x.toml"]).status.success());
    let o = run(&["--config", &cfg, "--sweep", "scenario.no_such_key=1,2", "--dump-config"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}
