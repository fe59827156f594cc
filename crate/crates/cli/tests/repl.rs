use std::path::PathBuf;

use serde_json::Value;
use shadowtale::render;
use shadowtale::script::Session;
use shadowtale_cli::load_engine;
use shadowtale_cli::repl::Repl;
use shadowtale_cli::runner::run_scenario;

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn session(oracle: bool) -> Session {
    Session::new(load_engine(&repo().join("scenarios/restaurant.dict"), None, oracle).unwrap())
}

/// Runs `input` through a REPL; returns the session and the output lines.
fn repl(session: Session, input: &str) -> (Session, Vec<String>) {
    let mut out = Vec::new();
    let mut r = Repl::new(session, input.as_bytes(), &mut out);
    r.run().unwrap();
    let session = r.into_session();
    let text = String::from_utf8(out).unwrap();
    (session, text.lines().map(str::to_string).collect())
}

fn parse(line: &str) -> Value {
    serde_json::from_str(line).unwrap()
}

#[test]
fn focus_on_fresh_session_is_empty() {
    let (_, out) = repl(session(false), ":focus\n");
    let v = parse(&out[0]);
    assert_eq!(v["instances"], serde_json::json!([]));
    assert_eq!(v["vis"], serde_json::json!([]));
}

#[test]
fn one_sentence_then_focus() {
    let (_, out) = repl(session(false), "A man / waves.\n:focus\n");
    assert_eq!(parse(&out[0])["inserted"], serde_json::json!([2]));
    let focus = parse(&out[1]);
    let vis = focus["vis"].as_array().unwrap();
    assert_eq!(vis.len(), 1);
    assert_eq!(vis[0]["salience"], 1.0);
}

#[test]
fn hls_matches_the_api_rendering() {
    let corpus =
        std::fs::read_to_string(repo().join("scenarios/restaurant-corpus.pidgin")).unwrap();
    let prefix = "A customer / enters.\nThe customer / orders / a soup.\n";
    let (_, out) = repl(session(true), &format!("{corpus}{prefix}:hls 3\n"));
    let from_repl = parse(out.last().unwrap());

    let mut direct = session(true);
    for line in corpus.lines().chain(prefix.lines()) {
        direct.exec_line(line).unwrap();
    }
    let api =
        serde_json::to_value(render::candidates(&direct.engine().build_continuations(3))).unwrap();
    assert_eq!(from_repl, api);
    assert_eq!(from_repl["candidates"][0]["verbs"]["eats"], 1.0);
}

#[test]
fn repl_and_scenario_reach_the_same_state() {
    let text =
        std::fs::read_to_string(repo().join("scenarios/restaurant-confabulate.pidgin")).unwrap();
    let (from_repl, _) = repl(session(false), &text);
    let mut batch = session(false);
    let report = run_scenario(&mut batch, &text, None).unwrap();
    assert_eq!(from_repl.engine().state_hash(), report.doc.state_hash);
}

#[test]
fn errors_do_not_end_the_session() {
    let input =
        "A man / xyzzy.\nman waves\n:shadows x\n:hls many\n:frobnicate\n:cloze 7\nA man / waves.\n";
    let (s, out) = repl(session(false), input);
    let codes: Vec<String> = out
        .iter()
        .map(|l| parse(l)["code"].as_str().unwrap_or("-").to_string())
        .collect();
    assert_eq!(
        codes,
        [
            "unknown_word",
            "parse_error",
            "bad_request",
            "bad_request",
            "bad_request",
            "bad_position",
            "-"
        ]
    );
    assert_eq!(
        parse(&out[0])["location"],
        serde_json::json!({ "line": 1, "col": 9 })
    );
    assert_eq!(s.engine().vis().count(), 1);
}

#[test]
fn confab_cloze_and_save() {
    let dir = tempfile::tempdir().unwrap();
    let snapshot = dir.path().join("s.json");
    let corpus =
        std::fs::read_to_string(repo().join("scenarios/restaurant-corpus.pidgin")).unwrap();
    let input = format!(
        "{corpus}A customer / enters.\n:confab 2\n:cloze 3\n:shadows 1\n:save {}\n:quit\nA man / waves.\n",
        snapshot.display()
    );
    let (s, out) = repl(session(true), &input);
    let n = out.len();
    let confab = parse(&out[n - 4]);
    assert_eq!(confab["inserted"].as_array().unwrap().len(), 2);
    assert_eq!(confab["vis"][1]["provenance"], "confabulated");
    let cloze = parse(&out[n - 3]);
    assert_eq!(cloze["candidates"][0]["verbs"]["pays"], 1.0);
    assert_eq!(parse(&out[n - 2])["code"], "unknown_id");
    assert!(parse(&out[n - 1])["saved"].is_string());
    // `:quit` stops before the last line.
    let loaded = shadowtale::Engine::load_snapshot(&snapshot).unwrap();
    assert_eq!(loaded.state_hash(), s.engine().state_hash());
}

#[test]
fn prompt_is_optional() {
    let mut out = Vec::new();
    Repl::new(session(false), ":quit\n".as_bytes(), &mut out)
        .with_prompt(true)
        .run()
        .unwrap();
    assert_eq!(out, b"> ");
}
