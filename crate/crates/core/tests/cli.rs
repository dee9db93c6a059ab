use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evt-margin"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_run_verify() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(bin(&["synth", "--dir", "fx", "--days", "40"], d).status.success());
    let o = bin(&["run", "--config", "fx/config.toml", "--output-dir", "o1"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(d.join("o1/manifest.json").exists());
    let o = bin(&["verify", "-c", "fx/config.toml", "--output-dir", "o1"], d);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 failed"));

    let o = bin(&["margins", "-c", "fx/config.toml", "--output-dir", "o2"], d);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("Panel C"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("bad.toml"),
        "price_file = \"p.csv\"\nfrequencies = [\"5min\"]\nprobabilities = [1.5]\n",
    )
    .unwrap();
    let o = bin(&["run", "-c", "bad.toml"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("probability"));

    assert!(bin(&["synth", "--dir", "fx", "--days", "40"], d).status.success());
    let o = bin(&["verify", "-c", "fx/config.toml"], d);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no run artifacts"));

    assert!(bin(&["run", "-c", "fx/config.toml"], d).status.success());
    let path = d.join("fx/out/table3.json");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let m = v["rows"][0]["gev_margin"].as_f64().unwrap();
    v["rows"][0]["gev_margin"] = (m + 1.0).into();
    std::fs::write(&path, v.to_string()).unwrap();
    let o = bin(&["verify", "-c", "fx/config.toml"], d);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
