use std::path::Path;
use std::process::{Command, Output};

fn limweak(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_limweak"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

const LIMIT_ARGS: &[&str] = &[
    "limit",
    "--dim",
    "1",
    "--alpha",
    "0.5",
    "--kernel",
    "pair:1,1",
    "--f",
    "indicator:0.5",
    "--rho",
    "1",
    "--t",
    "geo:0.2,0.5,4",
];

#[test]
fn identity_command_reports_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = limweak(
        &[
            "identity", "--dim", "2", "--alpha", "1", "--kernel", "const:1", "--out", "id.csv",
        ],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(&dir.path().join("id.csv"));
    assert!(csv.starts_with("closed_form,numeric,rel_err,config_hash\n"));
    let closed: f64 = column(&csv, "closed_form")[0].parse().unwrap();
    let numeric: f64 = column(&csv, "numeric")[0].parse().unwrap();
    assert!((closed - 1.7724539).abs() < 1e-7);
    assert!((numeric - closed).abs() <= 0.01 * closed);
    assert!(dir.path().join("id.csv.manifest").exists());
}

#[test]
fn limit_command_writes_decreasing_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = LIMIT_ARGS.to_vec();
    args.extend(["--out", "run.csv"]);
    let out = limweak(&args, dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = read(&dir.path().join("run.csv"));
    assert!(csv.starts_with("t,beta,D,bound,slope_so_far,tail_cert,config_hash\n"));
    let d: Vec<f64> = column(&csv, "D")
        .iter()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(d.len(), 4);
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    let hashes = column(&csv, "config_hash");
    assert!(hashes.iter().all(|h| h == &hashes[0] && h.len() == 16));
    let manifest = read(&dir.path().join("run.csv.manifest"));
    assert!(manifest.contains(&format!("config_hash = {}", hashes[0])));
    assert!(!manifest.contains("wall_clock"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (i, args) in [
        LIMIT_ARGS.to_vec(),
        vec![
            "limit",
            "--dim",
            "2",
            "--kernel",
            "cos:2,1,1",
            "--op",
            "T_signed",
            "--grid-res",
            "32",
        ],
    ]
    .into_iter()
    .enumerate()
    {
        let mut first = None;
        for run in 0..2 {
            let name = format!("r{i}_{run}.csv");
            let mut a = args.clone();
            a.extend(["--out", name.as_str()]);
            assert_eq!(limweak(&a, dir.path()).status.code(), Some(0));
            let pair = (
                read(&dir.path().join(&name)),
                read(&dir.path().join(format!("{name}.manifest"))),
            );
            match &first {
                None => first = Some(pair),
                Some(p) => assert_eq!(p, &pair),
            }
        }
    }
}

#[test]
fn invalid_schedule_exits_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = limweak(
        &[
            "limit",
            "--rho",
            "1",
            "--t",
            "geo:0.6,0.5,3",
            "--out",
            "bad.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_schedule: t must be < rho/2"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_parameters_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    for (args, key) in [
        (vec!["limit", "--dim", "3"], "dim"),
        (vec!["norms", "--dim", "1", "--alpha", "1"], "alpha"),
        (vec!["norms", "--kernel", "wobble:1"], "kernel"),
        (vec!["norms", "--f", "blob:1"], "f"),
        (vec!["vector-limit", "--r", "1"], "r"),
        (vec!["limit", "--grid-res", "4"], "grid_res"),
        (vec!["limit", "--op", "Q"], "op"),
        (vec!["limit", "--angular-nodes", "3"], "angular_nodes"),
        (
            vec!["reduce", "--dim", "2", "--eps", "0.1,0.2", "--t", "0.1"],
            "eps",
        ),
    ] {
        let mut a = args.clone();
        a.extend(["--out", "x.csv"]);
        let out = limweak(&a, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr).to_string();
        assert!(err.contains(key), "{args:?}: {err}");
    }
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn unknown_subcommand_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = limweak(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(limweak(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.ini"),
        "[run]\ndim = 1\nalpha = 0.5\nkernel = pair:1,1\nf = indicator:0.5\n\n[schedule]\nrho = 1\nt = 0.2,0.1\n",
    )
    .unwrap();
    let out = limweak(
        &["limit", "--config", "run.ini", "--out", "a.csv"],
        dir.path(),
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        column(&read(&dir.path().join("a.csv")), "t"),
        vec!["0.2", "0.1"]
    );
    let out = limweak(
        &[
            "limit",
            "--config",
            "run.ini",
            "--t",
            "0.1,0.05,0.025",
            "--out",
            "b.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        column(&read(&dir.path().join("b.csv")), "t"),
        vec!["0.1", "0.05", "0.025"]
    );

    std::fs::write(dir.path().join("bad.ini"), "colour = blue\n").unwrap();
    let out = limweak(
        &["limit", "--config", "bad.ini", "--out", "c.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    assert!(!dir.path().join("c.csv").exists());
}

#[test]
fn other_commands_emit_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    for (args, header) in [
        (
            vec!["dini", "--dim", "2", "--kernel", "cos:0,1,1"],
            "t,omega,partial_integral,verdict,config_hash",
        ),
        (
            vec![
                "types",
                "--f",
                "mix:1*indicator:0.5@0.5",
                "--t",
                "0.1,0.01",
                "--lambda",
                "0.5",
            ],
            "t,lambda,type1,type2,type3,config_hash",
        ),
        (
            vec![
                "vector-limit",
                "--f",
                "indicator:0.5",
                "--f",
                "cone:0.5",
                "--t",
                "0.2,0.1",
            ],
            "t,beta,D,bound,slope_so_far,tail_cert,config_hash",
        ),
        (
            vec!["norms", "--dim", "2", "--alpha", "1"],
            "quantity,value,config_hash",
        ),
        (vec!["opnorm", "--t", "0.1"], "t,ratio,config_hash"),
        (
            vec!["young", "--count", "3"],
            "index,function,ratio,config_hash",
        ),
    ] {
        let out = limweak(&args, dir.path());
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert_eq!(stdout.lines().next(), Some(header), "{args:?}");
    }
}

#[test]
fn recorded_time_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let out = limweak(&["norms", "--record-time", "--out", "n.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(read(&dir.path().join("n.csv.manifest")).contains("wall_clock_unix = "));
}
