use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{Duration as ChronoDuration, TimeZone, Utc};

use climalens::corpus::{
    fetch_snippets, parse_snippets, snippet_to_jsonl, write_snippets_csv, CorpusError, FetchQuery, FixtureStore,
    LiveClient, RawRecords, SnippetFormat, Transport,
};
use climalens::{MonthKey, Snippet};

const ROWS: usize = 37_948;

fn big_corpus() -> Vec<Snippet> {
    let start = Utc.with_ymd_and_hms(2013, 12, 1, 0, 0, 0).unwrap();
    (0..ROWS)
        .map(|i| Snippet {
            station: ["BLOOMBERG", "CNBC", "FOXBUSINESS"][i % 3].to_string(),
            timestamp: start + ChronoDuration::minutes(97 * i as i64),
            text: match i % 4 {
                0 => format!("climate change item {i}"),
                1 => format!("quoted \"carbon tax\", row {i}"),
                2 => format!("line one\nline two {i}"),
                _ => format!("unicode caf\u{e9} \u{2014} global warming {i}"),
            },
            matched_keyword: (i % 2 == 0).then(|| "climate change".to_string()),
        })
        .collect()
}

#[test]
fn large_csv_and_jsonl_round_trip_without_loss() {
    let corpus = big_corpus();
    let mut csv = Vec::new();
    write_snippets_csv(&mut csv, &corpus).unwrap();
    let parsed = parse_snippets(csv.as_slice(), SnippetFormat::Csv, true).unwrap();
    assert!(parsed.errors.is_empty());
    assert_eq!(parsed.snippets.len(), ROWS);
    assert_eq!(parsed.snippets, corpus);

    let jsonl: String = corpus.iter().map(|s| snippet_to_jsonl(s) + "\n").collect();
    let parsed = parse_snippets(jsonl.as_bytes(), SnippetFormat::Jsonl, true).unwrap();
    assert_eq!(parsed.snippets, corpus);
}

#[test]
fn malformed_records_are_reported_by_line() {
    let text = "station,timestamp,keyword,text\n\
                CNBC,2019-01-01T00:00:00Z,,fine\n\
                CNBC,not-a-date,,bad time\n\
                ,2019-01-02T00:00:00Z,,no station\n\
                CNBC,2019-01-03T00:00:00Z,,\n\
                CNBC,2019-01-04T00:00:00Z,,also fine\n";
    let lenient = parse_snippets(text.as_bytes(), SnippetFormat::Csv, false).unwrap();
    assert_eq!(lenient.snippets.len(), 2);
    let lines: Vec<u64> = lenient.errors.iter().map(|e| e.line).collect();
    assert_eq!(lines, vec![3, 4, 5]);

    match parse_snippets(text.as_bytes(), SnippetFormat::Csv, true) {
        Err(CorpusError::Format { line, .. }) => assert_eq!(line, 3),
        other => panic!("strict parse should stop at line 3, got {other:?}"),
    }
}

fn query() -> FetchQuery {
    FetchQuery {
        query: "carbon tax".into(),
        station: "CNBC".into(),
        window: "2018-01:2018-03".parse().unwrap(),
    }
}

#[test]
fn replay_returns_stored_bytes_and_names_missing_keys() {
    let dir = tempfile::tempdir().unwrap();
    let store = FixtureStore::new(dir.path());
    let q = query();
    match fetch_snippets(&q, &Transport::Replay(store.clone())) {
        Err(CorpusError::MissingFixture { key, path }) => {
            assert_eq!(key, q.fixture_key());
            assert!(path.ends_with(format!("{key}.jsonl")));
        }
        other => panic!("expected a missing fixture, got {other:?}"),
    }
    let raw = RawRecords {
        body: b"{\"station\":\"CNBC\",\"timestamp\":\"2018-02-01T10:00:00Z\",\"text\":\"carbon tax\"}\n".to_vec(),
    };
    store.store(&q, &raw).unwrap();
    assert_eq!(fetch_snippets(&q, &Transport::Replay(store)).unwrap().body, raw.body);
}

#[test]
fn fixture_key_is_sha256_of_query_fields() {
    use sha2::{Digest, Sha256};
    let q = query();
    let want = hex::encode(Sha256::digest(b"carbon tax\nCNBC\n2018-01\n2018-03"));
    assert_eq!(q.fixture_key(), want);
}

/// Serve one JSON page per request, closing each connection.
fn stub_server(pages: usize) -> (String, Arc<Mutex<Vec<(Instant, String)>>>, thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/api/v2/tv/tv", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    let handle = thread::spawn(move || {
        for _ in 0..pages {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut header = String::new();
                reader.read_line(&mut header).unwrap();
                if header == "\r\n" || header.is_empty() {
                    break;
                }
            }
            log.lock().unwrap().push((Instant::now(), request_line.clone()));
            let start = request_line
                .split(['?', '&', ' '])
                .find_map(|kv| kv.strip_prefix("startdatetime="))
                .unwrap()
                .to_string();
            let (y, m) = (&start[0..4], &start[4..6]);
            let body = format!(
                "{{\"clips\":[{{\"station\":\"CNBC\",\"date\":\"{y}-{m}-05T10:00:00Z\",\"snippet\":\"carbon tax one\"}},\
                 {{\"station\":\"CNBC\",\"date\":\"{y}-{m}-20T18:30:00Z\",\"snippet\":\"carbon tax two\"}}]}}"
            );
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (url, seen, handle)
}

#[test]
fn live_fetch_walks_monthly_pages_with_rate_limit() {
    let (url, seen, handle) = stub_server(3);
    let client = LiveClient {
        base_url: url,
        min_interval: Duration::from_millis(60),
        ..LiveClient::default()
    };
    let q = query();
    let raw = fetch_snippets(&q, &Transport::Live(client)).unwrap();
    handle.join().unwrap();

    let parsed = raw.parse(true).unwrap();
    let months: Vec<MonthKey> = parsed.snippets.iter().map(Snippet::month).collect();
    let expected: Vec<MonthKey> = q.window.months().flat_map(|m| [m, m]).collect();
    assert_eq!(months, expected);
    assert!(parsed.snippets.iter().all(|s| s.matched_keyword.as_deref() == Some("carbon tax")));

    let log = seen.lock().unwrap();
    assert_eq!(log.len(), 3);
    for (i, (_, line)) in log.iter().enumerate() {
        assert!(line.contains("mode=clipgallery"), "{line}");
        assert!(line.contains(&format!("startdatetime=20180{}01000000", i + 1)), "{line}");
    }
    for pair in log.windows(2) {
        assert!(pair[1].0 - pair[0].0 >= Duration::from_millis(55));
    }
}
