use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reinsgame::equilibrium::Utility;
use reinsgame::market::{optimal_dual_shift, MarketParams};
use reinsgame::strategies::merton_portfolio;

fn table1() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/table1.toml")
}

fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reinsgame"))
        .arg("--config")
        .arg(config)
        .args(args)
        .env("REINSGAME_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Rows of a CSV output as `column -> value` maps.
fn records(o: &Output) -> Vec<Vec<(String, String)>> {
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    let header: Vec<String> = r.headers().unwrap().iter().map(str::to_string).collect();
    r.records().map(|rec| header.iter().cloned().zip(rec.unwrap().iter().map(str::to_string)).collect()).collect()
}

fn field(row: &[(String, String)], name: &str) -> f64 {
    row.iter().find(|(k, _)| k == name).unwrap_or_else(|| panic!("no column {name}")).1.parse().unwrap()
}

fn variant(replace: &str, with: &str) -> tempfile::NamedTempFile {
    let text = std::fs::read_to_string(table1()).unwrap();
    assert!(text.contains(replace));
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), text.replace(replace, with)).unwrap();
    f
}

#[test]
fn equilibrium_on_base_config() {
    let o = run(&table1(), &["equilibrium"]);
    assert!(o.status.success());
    let rows = records(&o);
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert!((field(r, "theta_star[frac]") - 0.2086).abs() <= 5e-5);
    assert_eq!(field(r, "xi_star[units]"), 1.5);
    assert!((field(r, "pi_i_1[frac]") - 0.3169).abs() <= 5e-5);
    assert!(field(r, "pi_i_2[frac]").abs() <= 5e-5);
    assert!((field(r, "pi_r_1[frac]") - 0.3167).abs() <= 5e-5);
    assert!((field(r, "pi_r_2[frac]") + 0.1642).abs() <= 5e-5);
}

#[test]
fn loss_probability_at_full_loading() {
    let o = run(&table1(), &["lossprob", "--alpha", "1"]);
    assert!(o.status.success());
    let q = field(&records(&o)[0], "loss_probability[frac]");
    assert!((q - 0.004413).abs() <= 3e-5, "{q}");
}

#[test]
fn worthless_put_gives_degenerate_equilibrium() {
    let cfg = variant("guarantee = 100", "guarantee = 0");
    let o = run(cfg.path(), &["equilibrium"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
    let r = &records(&o)[0];
    assert_eq!(r.iter().find(|(k, _)| k == "degenerate").unwrap().1, "true");
    assert_eq!(field(r, "xi_star[units]"), 0.0);
    let p = MarketParams::table1();
    let m = merton_portfolio(&Utility::Power { b: -9.0 }, &p, reinsgame::DualShift::ZERO);
    assert!((field(r, "pi_r_1[frac]") - m[0]).abs() < 1e-5);
    assert!((field(r, "pi_r_2[frac]") - m[1]).abs() < 1e-5);
    let mi = merton_portfolio(&Utility::Power { b: -9.0 }, &p, optimal_dual_shift(&p));
    assert!((field(r, "pi_i_1[frac]") - mi[0]).abs() < 1e-5);
}

#[test]
fn invalid_config_exits_1_naming_the_field() {
    let cfg = variant("rho = 0.8012", "rho = 1.2");
    let o = run(cfg.path(), &["equilibrium"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho"));

    let cfg = variant("[simulation]", "[simulation]\nbogus = 1");
    assert_eq!(run(cfg.path(), &["equilibrium"]).status.code(), Some(1));

    let o = run(Path::new("/nonexistent/config.toml"), &["equilibrium"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn infeasible_criterion_exits_2() {
    let o = run(&table1(), &["lossprob", "--solve", "max:0.1%"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_csv_and_json_share_a_schema() {
    let args = ["sensitivity", "--param", "horizon", "--grid", "1,5,10,15,20"];
    let csv_out = run(&table1(), &args);
    assert!(csv_out.status.success());
    let rows = records(&csv_out);
    assert_eq!(rows.len(), 5);
    let thetas: Vec<f64> = rows.iter().map(|r| field(r, "theta_star[frac]")).collect();
    assert!(thetas.windows(2).all(|w| w[1] > w[0]), "{thetas:?}");

    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let json_out = run(&table1(), &json_args);
    let v: serde_json::Value = serde_json::from_slice(&json_out.stdout).unwrap();
    let arr = v.as_array().unwrap();
    assert_eq!(arr.len(), 5);
    let keys: Vec<&String> = arr[0].as_object().unwrap().keys().collect();
    let mut header: Vec<String> = rows[0].iter().map(|(k, _)| k.clone()).collect();
    header.sort();
    assert_eq!(keys, header.iter().collect::<Vec<_>>());
}

#[test]
fn range_grids_and_percent_values() {
    let o = run(&table1(), &["sensitivity", "--param", "rate", "--grid", "-2%:2%:5"]);
    assert!(o.status.success());
    let values: Vec<f64> = records(&o).iter().map(|r| field(r, "value")).collect();
    assert_eq!(values.len(), 5);
    assert!((values[0] + 0.02).abs() < 1e-12 && (values[4] - 0.02).abs() < 1e-12);
}

#[test]
fn weuc_of_small_discount() {
    let o = run(
        &table1(),
        &["weuc", "--reference", "equilibrium", "--alternative", "discount:0.95", "--party", "reinsurer"],
    );
    assert!(o.status.success());
    let bp = field(&records(&o)[0], "weuc[bp]");
    assert!((bp - 6.0).abs() <= 0.5, "{bp}");
}

#[test]
fn reproduction_is_byte_identical_and_exit_matches_pass_column() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let oa = run(&table1(), &["reproduce-paper", "--output", a.to_str().unwrap()]);
    let ob = run(&table1(), &["reproduce-paper", "--output", b.to_str().unwrap()]);
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    assert_eq!(oa.status.code(), ob.status.code());
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("quantity,unit,value,target,tolerance,pass\n"));
    let all_pass = text.lines().skip(1).all(|l| l.ends_with(",true"));
    assert_eq!(oa.status.code(), Some(if all_pass { 0 } else { 3 }));
}

#[test]
fn smoke_gate_and_hedge_error() {
    let o = run(&table1(), &["simulate", "--what", "verify-all", "--paths", "10000"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(records(&o).len(), 5);

    let o = run(&table1(), &["simulate", "--what", "hedge-error", "--paths", "500", "--resolutions", "16,64"]);
    assert!(o.status.success());
    let rows = records(&o);
    assert!(field(&rows[1], "rms_error[currency]") < field(&rows[0], "rms_error[currency]"));
}

#[test]
fn wealth_summary_starts_at_initial_wealth() {
    let o = run(&table1(), &["simulate", "--what", "wealth", "--paths", "200"]);
    assert!(o.status.success());
    let rows = records(&o);
    assert_eq!(rows.len(), 121);
    let first = &rows[0];
    assert_eq!(field(first, "insurer_p05[currency]"), field(first, "insurer_p95[currency]"));
}
