mod common;

use std::net::TcpListener;

use common::{gpt2, starcoder};
use repocomplete::lm::{external_model_connect, serve_model, CopyOracle, LanguageModel};
use repocomplete::Error;

#[test]
fn handshake_checks_the_vocabulary() {
    let g = gpt2();
    let s = starcoder();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let server_id = g.id().to_string();
    let server = std::thread::spawn(move || {
        let model = CopyOracle::new(50257);
        serve_model(listener, &model, Some(&server_id), Some(2)).unwrap();
    });

    match external_model_connect(&addr, &s) {
        Err(Error::Protocol(msg)) => assert!(msg.contains("50257") && msg.contains("49152"), "{msg}"),
        other => panic!("expected a handshake error, got {other:?}"),
    }

    let remote = external_model_connect(&addr, &g).unwrap();
    assert_eq!(remote.vocab_size(), 50257);
    assert_eq!(remote.server_tokenizer(), Some(g.id()));
    let prefix = g.encode_str("a b c a b").0;
    let local = CopyOracle::new(50257).next_log_probs(&prefix).unwrap();
    assert_eq!(remote.next_log_probs(&prefix).unwrap(), local);
    drop(remote);
    server.join().unwrap();
}
