use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use afis::template::parse;
use afis::DistanceMode;

fn afis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afis"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthesizes `count` default images into `dir/corpus` and returns it.
fn synth(dir: &Path, count: u32, seed: u64) -> PathBuf {
    let corpus = dir.join("corpus");
    let o = afis(&[
        "synth",
        p(&corpus),
        "--count",
        &count.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    corpus
}

#[test]
fn extract_writes_a_parsable_template() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 1, 0);
    let img = corpus.join("synth_000.ppm");
    let aft = dir.path().join("a.aft");
    let stages = dir.path().join("stages");
    let o = afis(&["extract", p(&img), p(&aft), "--dump-stages", p(&stages)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t = parse(&std::fs::read(&aft).unwrap()).unwrap();
    assert_eq!(
        (t.width(), t.height(), t.mode()),
        (300, 300, DistanceMode::PaperFaithful)
    );
    assert!(!t.is_empty());
    for name in ["1_filter", "2_enhance", "3_line", "4_shape"] {
        let bytes = std::fs::read(stages.join(format!("{name}.pgm"))).unwrap();
        assert!(bytes.starts_with(b"P2"));
    }

    let canon = dir.path().join("c.aft");
    assert_eq!(
        code(&afis(&[
            "extract",
            p(&img),
            p(&canon),
            "--mode",
            "canonical"
        ])),
        0
    );
    let text = std::fs::read_to_string(&canon).unwrap();
    assert!(text.lines().any(|l| l == "mode canonical"));
}

#[test]
fn missing_input_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = afis(&[
        "extract",
        p(&dir.path().join("nope.ppm")),
        p(&dir.path().join("x.aft")),
    ]);
    assert_eq!(code(&o), 2);
    assert!(!o.stderr.is_empty());
    assert!(o.stdout.is_empty());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 1, 0);
    let out = dir.path().join("no/such/dir/x.aft");
    let o = afis(&["extract", p(&corpus.join("synth_000.ppm")), p(&out)]);
    assert_eq!(code(&o), 3);
}

#[test]
fn match_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 2, 40);
    let a = dir.path().join("a.aft");
    let b = dir.path().join("b.aft");
    let c = dir.path().join("c.aft");
    assert_eq!(
        code(&afis(&["extract", p(&corpus.join("synth_000.ppm")), p(&a)])),
        0
    );
    assert_eq!(
        code(&afis(&["extract", p(&corpus.join("synth_001.ppm")), p(&b)])),
        0
    );
    assert_eq!(
        code(&afis(&[
            "extract",
            p(&corpus.join("synth_001.ppm")),
            p(&c),
            "--mode",
            "canonical"
        ])),
        0
    );

    let same = afis(&["match", p(&a), p(&a)]);
    assert_eq!(code(&same), 0);
    let out = String::from_utf8(same.stdout).unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("n_a,n_b,matched,eq,decision"));
    assert!(lines.next().unwrap().ends_with(",1.0000,accept"));

    let other = afis(&["match", p(&a), p(&b), "--decision-threshold", "0.6"]);
    assert_eq!(
        code(&other),
        1,
        "{}",
        String::from_utf8_lossy(&other.stdout)
    );

    assert_eq!(code(&afis(&["match", p(&a), p(&c)])), 2);
}

#[test]
fn enroll_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 2, 7);
    let store = dir.path().join("store");
    let img = corpus.join("synth_000.ppm");
    let other = corpus.join("synth_001.ppm");

    assert_eq!(code(&afis(&["verify", p(&store), "alice", p(&img)])), 2);
    assert_eq!(code(&afis(&["enroll", p(&store), "alice", p(&img)])), 0);
    assert_eq!(code(&afis(&["enroll", p(&store), "alice", p(&img)])), 2);
    assert_eq!(
        code(&afis(&[
            "enroll",
            p(&store),
            "alice",
            p(&img),
            "--overwrite"
        ])),
        0
    );
    assert_eq!(code(&afis(&["enroll", p(&store), "bad id!", p(&img)])), 2);

    let ok = afis(&["verify", p(&store), "alice", p(&img)]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(code(&afis(&["verify", p(&store), "alice", p(&other)])), 1);

    let index = std::fs::read_to_string(store.join("index.tsv")).unwrap();
    assert_eq!(index.lines().count(), 1);
    assert_eq!(index.split('\t').count(), 9);
}

#[test]
fn config_file_sets_defaults_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 1, 3);
    let conf = dir.path().join("afis.conf");
    std::fs::write(&conf, "# shared settings\nmode = canonical\n").unwrap();
    let img = corpus.join("synth_000.ppm");
    let a = dir.path().join("a.aft");
    assert_eq!(
        code(&afis(&["extract", p(&img), p(&a), "--config", p(&conf)])),
        0
    );
    assert_eq!(
        parse(&std::fs::read(&a).unwrap()).unwrap().mode(),
        DistanceMode::Canonical
    );
    let b = dir.path().join("b.aft");
    assert_eq!(
        code(&afis(&[
            "extract",
            p(&img),
            p(&b),
            "--config",
            p(&conf),
            "--mode",
            "paper"
        ])),
        0
    );
    assert_eq!(
        parse(&std::fs::read(&b).unwrap()).unwrap().mode(),
        DistanceMode::PaperFaithful
    );

    std::fs::write(&conf, "colour = red\n").unwrap();
    assert_eq!(
        code(&afis(&["extract", p(&img), p(&b), "--config", p(&conf)])),
        2
    );
}

#[test]
fn evaluate_synthetic_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 4, 11);
    let report = dir.path().join("report");
    let o = afis(&["evaluate", p(&corpus), p(&corpus), p(&report)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table1 = std::fs::read_to_string(report.join("table1.csv")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), table1);
    let mut lines = table1.lines();
    assert_eq!(
        lines.next(),
        Some("image,contained,selected,dropped,false,correct,match_radius")
    );
    let rows: Vec<Vec<u64>> = lines
        .map(|l| {
            l.split(',')
                .skip(1)
                .take(5)
                .map(|v| v.parse().unwrap())
                .collect()
        })
        .collect();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let (contained, selected, dropped, false_pos, correct) = (r[0], r[1], r[2], r[3], r[4]);
        assert_eq!(selected, correct + false_pos);
        assert_eq!(contained, correct + dropped);
    }
    let table2 = std::fs::read_to_string(report.join("table2.csv")).unwrap();
    assert!(table2.starts_with("image,false_pct,drop_pct,correct_pct\n"));
    assert_eq!(table2.lines().count(), 5);
    for f in ["fig2.csv", "fig3.csv"] {
        assert_eq!(
            std::fs::read_to_string(report.join(f))
                .unwrap()
                .lines()
                .count(),
            5
        );
    }
}

#[test]
fn evaluate_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(
        code(&afis(&[
            "evaluate",
            p(&empty),
            p(&empty),
            p(&dir.path().join("r"))
        ])),
        2
    );

    let corpus = synth(dir.path(), 2, 0);
    std::fs::remove_file(corpus.join("synth_001.gt")).unwrap();
    let o = afis(&["evaluate", p(&corpus), p(&corpus), p(&dir.path().join("r"))]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("synth_001"));
    std::fs::remove_file(corpus.join("synth_000.gt")).unwrap();
    assert_eq!(
        code(&afis(&[
            "evaluate",
            p(&corpus),
            p(&corpus),
            p(&dir.path().join("r"))
        ])),
        2
    );
}

#[test]
fn bench_reports_size_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path(), 2, 5);
    let report = dir.path().join("bench");
    let o = afis(&[
        "bench",
        p(&corpus),
        p(&report),
        "--repetitions",
        "3",
        "--min-ratio",
        "100",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fig4 = String::from_utf8(o.stdout).unwrap();
    assert!(fig4.starts_with("image,image_bytes,template_bytes,ratio\n"));
    for row in fig4.lines().skip(1) {
        let ratio: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(ratio >= 100.0, "{row}");
    }
    assert_eq!(
        std::fs::read_to_string(report.join("fig5.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
    assert!(String::from_utf8_lossy(&o.stderr).contains('#'));

    let o = afis(&["bench", p(&corpus), p(&report), "--repetitions", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn synth_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = synth(a.path(), 2, 9);
    let cb = synth(b.path(), 2, 9);
    for f in ["synth_000.ppm", "synth_001.gt"] {
        assert_eq!(
            std::fs::read(ca.join(f)).unwrap(),
            std::fs::read(cb.join(f)).unwrap()
        );
    }
    let bad = afis(&["synth", p(&a.path().join("x")), "--ridge-period", "2"]);
    assert_eq!(code(&bad), 2);
}
