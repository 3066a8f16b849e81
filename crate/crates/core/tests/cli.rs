use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use resolvent_lab::cli::Series;

fn run(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("run.ini");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_resolvent-lab"))
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .env_remove("RESOLVENT_LAB_WORKERS")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const HEAD: &str = "[potential]\nkind = coulomb\n[numerics]\nN = 2000\nR = 100\n";

#[test]
fn empty_sweep_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{HEAD}[verify-bound]\nh =\nz = -1\ns = 0.75\n"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty sweep: h"), "{}", stderr(&o));
}

#[test]
fn z_on_positive_axis_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{HEAD}[verify-bound]\nh = 1\nz = (4, 0)\ns = 0.75\n"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("z on [0,∞)"));
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{HEAD}[verify-bound]\nh = 1\nz = -1\ns = 0.75\ncolour = 3\n"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("verify-bound.colour"));
}

#[test]
fn negative_slack_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{HEAD}[special-fn]\nnu = 0.5\nw = 1\n"), &["--slack", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_bound_matrix_gives_18_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        "{HEAD}[verify-bound]\nh = 1, 0.5, 0.25\nz = (2, 0.2), (2, -0.2), (-2, 0.2), (-2, -0.2), -1, (0.5, 0.5)\ns = 0.75\n"
    );
    let o = run(dir.path(), &cfg, &["--workers", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("verify-bound: 18 rows, 18 pass"));
    let text = fs::read_to_string(dir.path().join("out/verify-bound.csv")).unwrap();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().unwrap().clone();
    for col in ["h", "re_z", "im_z", "measured", "bound", "margin", "verdict", "delta", "c_v", "prefactor"] {
        assert!(headers.iter().any(|h| h == col), "missing column {col}");
    }
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 18);
    let idx = |name: &str| headers.iter().position(|h| h == name).unwrap();
    for (k, row) in rows.iter().enumerate() {
        assert_eq!(row[idx("index")].parse::<usize>().unwrap(), k);
        let measured: f64 = row[idx("measured")].parse().unwrap();
        let bound: f64 = row[idx("bound")].parse().unwrap();
        let margin: f64 = row[idx("margin")].parse().unwrap();
        assert_eq!(bound - measured, margin);
        assert_eq!(&row[idx("verdict")], "pass");
    }
    let h0: f64 = rows[0][idx("h")].parse().unwrap();
    let h17: f64 = rows[17][idx("h")].parse().unwrap();
    assert_eq!((h0, h17), (1.0, 0.25));
}

#[test]
fn inconclusive_special_function_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &format!("{HEAD}[special-fn]\nnu = 0.5\nw = (0.005, 1), (1, 0)\n"), &[]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("special-fn: 2 rows, 1 pass, 0 fail, 1 inconclusive -> inconclusive"));
}

#[test]
fn wave_series_svg_is_small() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[potential]\nkind = yukawa\n[numerics]\nN = 1600\nR = 80\n[wave-decay]\ns = 2\nhorizon = 49.9\ndt = 0.1\n";
    let o = run(dir.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv_text = fs::read_to_string(dir.path().join("out/wave-decay.csv")).unwrap();
    assert_eq!(csv_text.lines().count(), 2 + 500);
    let svg = fs::metadata(dir.path().join("out/wave-decay-0.svg")).unwrap();
    assert!(svg.len() <= 200 * 1024, "{} bytes", svg.len());
}

#[test]
fn horizon_rule_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[potential]\nkind = yukawa\n[numerics]\nN = 400\nR = 40\n[wave-decay]\ns = 2\nhorizon = 50\n";
    let o = run(dir.path(), cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("horizon"));
}

#[test]
fn workers_env_gives_identical_csv() {
    let cfg = format!(
        "[potential]\nkind = prototype\n[numerics]\nN = 300\nR = 30\nrefine = false\n[lowfreq-bound]\nh = 1, 0.5\nz = -0.0001, (0, 0.0001)\ns1 = 1.25, 0.8\ns2 = 1.25, 1.7\n[energy-identity]\nh = 1\nenergy = 1\neps = 0.1\n"
    );
    let mut outputs = Vec::new();
    for workers in ["1", "2"] {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ini");
        fs::write(&path, &cfg).unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_resolvent-lab"))
            .args(["run", path.to_str().unwrap(), "--out"])
            .arg(dir.path().join("out"))
            .env("RESOLVENT_LAB_WORKERS", workers)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push((
            fs::read(dir.path().join("out/lowfreq-bound.csv")).unwrap(),
            fs::read(dir.path().join("out/energy-identity.csv")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn svg_of_500_points_is_bounded() {
    let s = Series {
        title: "E_s".into(),
        x_label: "t".into(),
        y_label: "E".into(),
        points: (1..=500).map(|k| (k as f64 * 0.1, (k as f64).powf(-3.0))).collect(),
        log_log: true,
    };
    assert!(resolvent_lab::cli::report::render_svg(&s).len() <= 200 * 1024);
}
