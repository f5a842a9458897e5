use std::fs;
use std::path::{Path, PathBuf};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("enteval").chain(args.iter().copied());
    let code = enteval_cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn datagen(out: &Path, tasks: &str) {
    let sources = fixtures().join("sources");
    let (code, _, err) = run(&[
        "datagen",
        "--sources",
        path(&sources),
        "--out",
        path(out),
        "--tasks",
        tasks,
    ]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn help_and_version_exit_zero() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("datagen") && out.contains("toytrain"));
    assert_eq!(run(&["--version"]).0, 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["eval", "--no-such-flag"]).0, 1);
    let (code, _, err) = run(&["eval", "--tasks", "nope"]);
    assert_eq!(code, 1);
    assert!(err.contains("nope"), "{err}");
    assert_eq!(run(&["eval", "--layer", "top"]).0, 1);
    let (code, _, err) = run(&[
        "toytrain",
        "--pairs",
        "p",
        "--descriptions",
        "d",
        "--variants",
        "elmo",
    ]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn data_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&["eval", "--data-dir", path(tmp.path()), "--tasks", "esr"]);
    assert_eq!(code, 2);
    assert!(err.contains("esr.eev"), "{err}");

    let (code, _, _) = run(&[
        "wikient",
        "--dump",
        path(&tmp.path().join("missing.xml")),
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(code, 2);

    let broken = tmp.path().join("broken.xml");
    fs::write(&broken, "<mediawiki><page><title>A</title>").unwrap();
    assert_eq!(
        run(&[
            "wikient",
            "--dump",
            path(&broken),
            "--out",
            path(tmp.path())
        ])
        .0,
        2
    );
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    datagen(&data, "esr");
    let vectors = fixtures().join("sources/vectors.txt");
    let (code, _, err) = run(&[
        "embed",
        "--vectors",
        path(&vectors),
        "--data-dir",
        path(&data),
        "--tasks",
        "esr",
    ]);
    assert_eq!(code, 0, "{err}");

    let config = tmp.path().join("run.conf");
    fs::write(
        &config,
        format!(
            "# fixture run\ndata_dir = {}\ntasks = esr\nseed = 5\n",
            data.display()
        ),
    )
    .unwrap();
    let (code, out, err) = run(&["--config", path(&config), "eval"]);
    assert_eq!(code, 0, "{err}");
    assert!(out.lines().nth(1).unwrap().ends_with("\tmix\t5"), "{out}");

    let (code, out, _) = run(&["--config", path(&config), "eval", "--seed", "9"]);
    assert_eq!(code, 0);
    assert!(out.lines().nth(1).unwrap().ends_with("\tmix\t9"), "{out}");

    fs::write(&config, "colour = red\n").unwrap();
    assert_eq!(run(&["--config", path(&config), "eval"]).0, 1);
    assert_eq!(
        run(&["--config", path(&tmp.path().join("absent.conf")), "eval"]).0,
        2
    );
}

#[test]
fn datagen_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    datagen(&a, "cap,cerp,rare");
    datagen(&b, "cap,cerp,rare");
    for rel in [
        "cap/train.jsonl",
        "cerp/test.jsonl",
        "rare/valid.jsonl",
        "descriptions.jsonl",
        "datagen_stats.tsv",
    ] {
        assert_eq!(
            fs::read(a.join(rel)).unwrap(),
            fs::read(b.join(rel)).unwrap(),
            "{rel}"
        );
    }
    let sources = fixtures().join("sources");
    let (code, _, _) = run(&[
        "datagen",
        "--sources",
        path(&sources),
        "--out",
        path(&a),
        "--tasks",
        "ned",
    ]);
    assert_eq!(code, 0, "ned expands to conll and rare");
    assert!(a.join("conll/test.jsonl").exists());
}

#[test]
fn manifest_mode_writes_encode_items() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    datagen(&data, "efp");
    let (code, out, err) = run(&[
        "embed",
        "--manifest",
        "--data-dir",
        path(&data),
        "--tasks",
        "efp",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("efp.items.jsonl"));
    let items = fs::read_to_string(data.join("embeddings/efp.items.jsonl")).unwrap();
    assert_eq!(items.lines().count(), 30);
    assert!(
        items.lines().all(|l| l.contains("\"key\":\"s:")),
        "{}",
        items.lines().next().unwrap()
    );
}

#[test]
fn wikient_then_toytrain() {
    let tmp = tempfile::tempdir().unwrap();
    let wiki = tmp.path().join("wiki");
    let dump = fixtures().join("wiki/dump.xml");
    let (code, out, err) = run(&["wikient", "--dump", path(&dump), "--out", path(&wiki)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.lines().any(|l| l == "pairs_kept\t20"), "{out}");

    let curve = tmp.path().join("curve.tsv");
    let (pairs, descriptions) = (wiki.join("pairs.jsonl"), wiki.join("descriptions.jsonl"));
    let args = [
        "toytrain",
        "--pairs",
        path(&pairs),
        "--descriptions",
        path(&descriptions),
        "--variants",
        "baseline,etn",
        "--steps",
        "5",
        "--negatives",
        "4",
        "--dim",
        "4",
        "--hidden",
        "4",
        "--proj",
        "3",
        "--out",
        path(&curve),
        "--grad-check",
    ];
    let (code, out, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert!(
        out.starts_with("variant\tsteps\tinitial\tfinal\treduction\n"),
        "{out}"
    );
    assert!(out.contains("max_relative_error"));
    let first = fs::read_to_string(&curve).unwrap();
    // header plus 6 points per variant
    assert_eq!(first.lines().count(), 1 + 2 * 6);
    run(&args);
    assert_eq!(fs::read_to_string(&curve).unwrap(), first);
}
