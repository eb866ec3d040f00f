use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SIMPLEX: &str = r#"{"version":1,
 "meta":{"family":{"kind":"custom"},"n":2,"rank":0,"alpha":0.0,"omega":1.0,"seed":0},
 "n":2,"m":1,"omega":1.0,"c":[0.0,0.0],"F":[[],[]],"H":[],"D":[1.0,1.0],
 "A":[[0,0,1.0],[0,1,1.0]],"b":[1.0],"lower":[0.0,0.0],"upper":[1.0,1.0],
 "integer_vars":[]}"#;

// x1 + x2 = 3 with x ≤ 1 has no solution.
const EMPTY: &str = r#"{"version":1,
 "meta":{"family":{"kind":"custom"},"n":2,"rank":0,"alpha":0.0,"omega":1.0,"seed":0},
 "n":2,"m":1,"omega":1.0,"c":[0.0,0.0],"F":[[],[]],"H":[],"D":[1.0,1.0],
 "A":[[0,0,1.0],[0,1,1.0]],"b":[3.0],"lower":[0.0,0.0],"upper":[1.0,1.0],
 "integer_vars":[]}"#;

// Pick one of three; the first dominates, so the root relaxation is integral.
const PICK_ONE: &str = r#"{"version":1,
 "meta":{"family":{"kind":"custom"},"n":3,"rank":0,"alpha":0.0,"omega":1.0,"seed":0},
 "n":3,"m":1,"omega":1.0,"c":[-10.0,0.0,0.0],"F":[[],[],[]],"H":[],"D":[1.0,1.0,1.0],
 "A":[[0,0,1.0],[0,1,1.0],[0,2,1.0]],"b":[1.0],"lower":[0.0,0.0,0.0],
 "upper":[1.0,1.0,1.0],"integer_vars":[0,1,2]}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_perspqp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(out: &str, key: &str) -> String {
    out.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{out}"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn gen(out: &Path, extra: &[&str]) -> Vec<PathBuf> {
    let mut args = vec!["gen", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o).lines().map(PathBuf::from).collect()
}

#[test]
fn solve_symmetric_simplex() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "simplex.json", SIMPLEX);
    for alg in ["cd", "bisect"] {
        let o = run(&["solve", "--alg", alg, "--instance", f.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        let z: f64 = field(&stdout(&o), "objective").parse().unwrap();
        assert!((z - 0.5f64.sqrt()).abs() < 1e-6, "{alg}: {z}");
    }
}

#[test]
fn gen_writes_one_file_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let files = gen(
        dir.path(),
        &[
            "--family",
            "cardinality",
            "--n",
            "20",
            "--r",
            "5",
            "--alpha",
            "0.1",
            "--omega",
            "2",
            "--seed",
            "7",
            "--reps",
            "5",
        ],
    );
    assert_eq!(files.len(), 5);
    assert!(files.iter().all(|f| f.exists()));
    let grid = gen(
        dir.path(),
        &[
            "--family", "gridpath", "--grid", "4x4", "--r", "2", "--alpha", "0.5", "--omega", "1",
        ],
    );
    let inst = perspqp::load_instance(&grid[0]).unwrap();
    assert_eq!(inst.n(), 24);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let missing_out = run(&[
        "gen",
        "--family",
        "cardinality",
        "--n",
        "20",
        "--r",
        "5",
        "--alpha",
        "0.1",
        "--omega",
        "2",
    ]);
    assert_eq!(missing_out.status.code(), Some(2));
    let wrong_shape = run(&[
        "gen", "--family", "gridpath", "--n", "20", "--r", "5", "--alpha", "0.1", "--omega", "2",
        "--out", d,
    ]);
    assert_eq!(wrong_shape.status.code(), Some(2));
    let bad_grid = run(&[
        "gen", "--family", "gridpath", "--grid", "4by4", "--r", "5", "--alpha", "0.1", "--omega",
        "2", "--out", d,
    ]);
    assert_eq!(bad_grid.status.code(), Some(2));
    let f = write(dir.path(), "simplex.json", SIMPLEX);
    let continuous_bnb = run(&["bnb", "--instance", f.to_str().unwrap()]);
    assert_eq!(continuous_bnb.status.code(), Some(2));
}

#[test]
fn unreadable_instance_exits_1() {
    let o = run(&["solve", "--instance", "/nonexistent/x.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn infeasible_instance_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "empty.json", EMPTY);
    let o = run(&["solve", "--instance", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("infeasible"));
}

#[test]
fn cd_and_bisect_agree_and_optgap_shrinks() {
    let dir = tempfile::tempdir().unwrap();
    let files = gen(
        dir.path(),
        &[
            "--family",
            "cardinality",
            "--n",
            "50",
            "--r",
            "5",
            "--alpha",
            "0.5",
            "--omega",
            "2",
            "--seed",
            "3",
        ],
    );
    let f = files[0].to_str().unwrap();
    let objective = |args: &[&str]| -> f64 {
        let mut all = vec!["solve", "--instance", f];
        all.extend_from_slice(args);
        let o = run(&all);
        assert_eq!(o.status.code(), Some(0));
        field(&stdout(&o), "objective").parse().unwrap()
    };
    let cd = objective(&["--alg", "cd"]);
    let bi = objective(&["--alg", "bisect"]);
    assert!((cd - bi).abs() <= 1e-6 * cd.abs());
    let reference = objective(&["--tol", "1e-8"]).to_string();
    let gap = |tol: &str| -> f64 {
        let o = run(&[
            "solve",
            "--instance",
            f,
            "--tol",
            tol,
            "--reference",
            &reference,
        ]);
        field(&stdout(&o), "optgap").parse().unwrap()
    };
    assert!(gap("1e-8") <= gap("1e-2"));
}

#[test]
fn bnb_solves_and_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let files = gen(
        dir.path(),
        &[
            "--family",
            "cardinality",
            "--n",
            "15",
            "--r",
            "5",
            "--alpha",
            "0.5",
            "--omega",
            "2",
            "--seed",
            "1",
            "--discrete",
        ],
    );
    let f = files[0].to_str().unwrap();
    let o = run(&["bnb", "--instance", f, "--gap", "1e-4"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(field(&out, "solved"), "true");
    let inst = perspqp::load_instance(f).unwrap();
    let (_, z) = perspqp::enumeration_oracle(&inst).unwrap();
    let got: f64 = field(&out, "objective").parse().unwrap();
    assert!((got - z).abs() <= 1e-4 * z.abs());

    let o = run(&["bnb", "--instance", f, "--time-limit", "0"]);
    assert_eq!(o.status.code(), Some(4));
    let out = stdout(&o);
    assert_eq!(field(&out, "solved"), "false");
    assert!(!field(&out, "egap_pct").is_empty());

    let p = write(dir.path(), "pick.json", PICK_ONE);
    let o = run(&["bnb", "--instance", p.to_str().unwrap()]);
    assert_eq!(field(&stdout(&o), "nodes"), "1");
}

#[test]
fn solve_appends_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "simplex.json", SIMPLEX);
    let csv = dir.path().join("rows.csv");
    for alg in ["cd", "bisect"] {
        let o = run(&[
            "solve",
            "--alg",
            alg,
            "--instance",
            f.to_str().unwrap(),
            "--csv",
            csv.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(
        lines[0],
        "instance,family,n,r,alpha,omega,method,time_s,qp_count,pivot_count,nodes,objective,kkt_residual,egap,solved"
    );
}

#[test]
fn bench_writes_one_row_per_cell_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let inst_dir = dir.path().join("inst");
    for omega in ["1", "2"] {
        gen(
            &inst_dir,
            &[
                "--family",
                "cardinality",
                "--n",
                "15",
                "--r",
                "5",
                "--alpha",
                "0.5",
                "--omega",
                omega,
                "--reps",
                "5",
                "--discrete",
            ],
        );
    }
    let out = dir.path().join("means.csv");
    let raw = dir.path().join("raw.csv");
    let o = run(&[
        "bench",
        "--dir",
        inst_dir.to_str().unwrap(),
        "--methods",
        "cd,bisect,bnb-cd",
        "--csv",
        out.to_str().unwrap(),
        "--raw",
        raw.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2 * 3);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for row in &rows {
        assert_eq!(&row[col("count")], "5");
    }
    // Means re-computed from the raw rows match the table.
    let mut raw_rdr = csv::Reader::from_path(&raw).unwrap();
    let raw_rows: Vec<csv::StringRecord> = raw_rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(raw_rows.len(), 30);
    for row in &rows {
        let mine: Vec<&csv::StringRecord> = raw_rows
            .iter()
            .filter(|r| r[5] == row[col("omega")] && r[6] == row[col("method")])
            .collect();
        let mean = mine
            .iter()
            .map(|r| r[7].parse::<f64>().unwrap())
            .sum::<f64>()
            / mine.len() as f64;
        let table: f64 = row[col("time_s")].parse().unwrap();
        assert!((mean - table).abs() <= 1e-12 * (1.0 + mean));
    }
}

#[test]
fn bench_rejects_empty_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv");
    let o = run(&[
        "bench",
        "--dir",
        dir.path().to_str().unwrap(),
        "--csv",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
