use std::net::SocketAddr;
use std::time::Duration;

use biokey_core::sss::split;
use biokey_steward::{
    spawn, ClientConfig, ServiceConfig, StewardClient, StewardEndpoint, StewardError,
    StewardHandle, StewardList,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Cluster {
    dirs: Vec<tempfile::TempDir>,
    addrs: Vec<SocketAddr>,
    handles: Vec<Option<StewardHandle>>,
}

impl Cluster {
    async fn start(n: usize) -> Cluster {
        let mut c = Cluster {
            dirs: Vec::new(),
            addrs: Vec::new(),
            handles: Vec::new(),
        };
        for _ in 0..n {
            let dir = tempfile::tempdir().unwrap();
            let h = spawn("127.0.0.1:0".parse().unwrap(), cfg(&dir, None))
                .await
                .unwrap();
            c.addrs.push(h.addr());
            c.handles.push(Some(h));
            c.dirs.push(dir);
        }
        c
    }

    fn list(&self, k: usize) -> StewardList {
        StewardList {
            stewards: self
                .addrs
                .iter()
                .enumerate()
                .map(|(i, a)| StewardEndpoint {
                    name: format!("steward-{}", i + 1),
                    url: format!("http://{a}"),
                    token: None,
                })
                .collect(),
            n: self.addrs.len(),
            k,
        }
    }

    async fn stop(&mut self, i: usize) {
        self.handles[i].take().unwrap().stop().await.unwrap();
    }

    async fn restart(&mut self, i: usize, latency: Option<Duration>) {
        let h = spawn(self.addrs[i], cfg(&self.dirs[i], latency))
            .await
            .unwrap();
        self.handles[i] = Some(h);
    }
}

fn cfg(dir: &tempfile::TempDir, latency: Option<Duration>) -> ServiceConfig {
    ServiceConfig {
        data_dir: dir.path().to_path_buf(),
        latency,
        ..Default::default()
    }
}

fn fast_client() -> StewardClient {
    StewardClient::new(ClientConfig {
        timeout: Duration::from_secs(2),
        retries: 3,
        backoff: Duration::from_millis(20),
    })
}

fn package() -> Vec<u8> {
    (0..600u32).map(|i| (i * 31 % 251) as u8).collect()
}

#[tokio::test]
async fn six_stewards_four_needed() {
    let mut c = Cluster::start(6).await;
    let list = c.list(4);
    let client = fast_client();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let receipt = client
        .distribute(&package(), &list, &mut rng)
        .await
        .unwrap();
    assert_eq!(receipt.entries.len(), 6);
    assert!(receipt.entries.iter().all(|e| e.status == "stored"));
    assert_eq!(
        receipt.entries.iter().map(|e| e.x).collect::<Vec<_>>(),
        vec![1, 2, 3, 4, 5, 6]
    );

    c.stop(1).await;
    c.stop(4).await;
    assert_eq!(
        client.recover(&receipt.recovery_id, &list).await.unwrap(),
        package()
    );

    c.stop(0).await;
    match client.recover(&receipt.recovery_id, &list).await {
        Err(StewardError::QuorumFailed {
            have,
            need,
            diagnostics,
        }) => {
            assert_eq!((have, need), (3, 4));
            let names: Vec<_> = diagnostics.iter().map(|d| d.name.as_str()).collect();
            assert_eq!(names, vec!["steward-1", "steward-2", "steward-5"]);
        }
        other => panic!("expected quorum failure, got {other:?}"),
    }
}

#[tokio::test]
async fn a_down_steward_blocks_backup_until_it_returns() {
    let mut c = Cluster::start(6).await;
    let list = c.list(4);
    c.stop(2).await;
    let client = fast_client();
    let shares = split(&package(), 6, 4, &mut ChaCha20Rng::seed_from_u64(2)).unwrap();
    match client.distribute_shares(&shares, &list).await {
        Err(StewardError::DistributionIncomplete { failures, .. }) => {
            assert_eq!(failures.len(), 1);
            assert_eq!(failures[0].name, "steward-3");
        }
        other => panic!("expected incomplete distribution, got {other:?}"),
    }
    c.restart(2, None).await;
    let receipt = client.distribute_shares(&shares, &list).await.unwrap();
    assert_eq!(receipt.entries.len(), 6);
    assert_eq!(
        client.recover(&receipt.recovery_id, &list).await.unwrap(),
        package()
    );
}

#[tokio::test]
async fn duplicate_url_fails_before_any_request() {
    let list = StewardList {
        stewards: vec![
            StewardEndpoint {
                name: "a".into(),
                url: "http://127.0.0.1:1".into(),
                token: None,
            },
            StewardEndpoint {
                name: "b".into(),
                url: "http://127.0.0.1:1/".into(),
                token: None,
            },
        ],
        n: 2,
        k: 2,
    };
    let err = fast_client()
        .distribute(b"x", &list, &mut ChaCha20Rng::seed_from_u64(3))
        .await
        .unwrap_err();
    assert!(matches!(err, StewardError::BadConfig(_)));
    assert!(err.to_string().starts_with("bad-config"));
}

#[tokio::test]
async fn a_bit_flipped_share_is_skipped() {
    let c = Cluster::start(6).await;
    let list = c.list(4);
    let client = fast_client();
    let receipt = client
        .distribute(&package(), &list, &mut ChaCha20Rng::seed_from_u64(4))
        .await
        .unwrap();
    // flip one payload bit directly in steward 2's file
    let path = c.dirs[1].path().join(&receipt.recovery_id).join("2.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let payload = v["payload"].as_str().unwrap().to_string();
    let mut chars: Vec<char> = payload.chars().collect();
    chars[5] = if chars[5] == 'A' { 'B' } else { 'A' };
    v["payload"] = serde_json::Value::String(chars.into_iter().collect());
    std::fs::write(&path, v.to_string()).unwrap();

    assert_eq!(
        client.recover(&receipt.recovery_id, &list).await.unwrap(),
        package()
    );
}

#[tokio::test]
async fn result_does_not_depend_on_arrival_order() {
    let mut c = Cluster::start(6).await;
    let list = c.list(4);
    let client = fast_client();
    let receipt = client
        .distribute(&package(), &list, &mut ChaCha20Rng::seed_from_u64(5))
        .await
        .unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    for _ in 0..3 {
        for i in 0..6 {
            c.stop(i).await;
            let delay = Duration::from_millis(rng.gen_range(0..120));
            c.restart(i, Some(delay)).await;
        }
        assert_eq!(
            client.recover(&receipt.recovery_id, &list).await.unwrap(),
            package()
        );
    }
}
