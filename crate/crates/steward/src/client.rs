//! Fan-out of shares to stewards and quorum recovery.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use biokey_core::sss::{self, Share};
use rand::{CryptoRng, Rng, RngCore};
use reqwest::{StatusCode, Url};
use serde::{Deserialize, Serialize};
use tokio::task::JoinSet;
use tracing::{debug, warn};

use crate::error::{Result, StewardError, StewardFailure};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StewardEndpoint {
    pub name: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token: Option<String>,
}

/// `{"stewards":[{"name","url","token"?}...],"n":int,"k":int}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StewardList {
    pub stewards: Vec<StewardEndpoint>,
    pub n: usize,
    pub k: usize,
}

impl StewardList {
    pub fn from_json(text: &str) -> Result<Self> {
        let list: StewardList =
            serde_json::from_str(text).map_err(|e| StewardError::BadConfig(e.to_string()))?;
        list.validate()?;
        Ok(list)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        StewardList::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("steward list serializes")
    }

    /// Checks names and URLs are unique and parse, and `1 <= k <= n = len`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(StewardError::BadConfig(m));
        if self.k == 0 || self.k > self.n || self.n > 255 {
            return bad(format!(
                "need 1 <= k <= n <= 255, got n={} k={}",
                self.n, self.k
            ));
        }
        if self.stewards.len() != self.n {
            return bad(format!(
                "n={} but {} stewards listed",
                self.n,
                self.stewards.len()
            ));
        }
        let mut names = HashSet::new();
        let mut urls = HashSet::new();
        for s in &self.stewards {
            if !names.insert(s.name.as_str()) {
                return bad(format!("duplicate steward name {:?}", s.name));
            }
            let url = base_url(&s.url)?;
            if !urls.insert(url.as_str().to_string()) {
                return bad(format!("duplicate steward url {}", s.url));
            }
        }
        Ok(())
    }
}

fn base_url(raw: &str) -> Result<Url> {
    let mut url = Url::parse(raw).map_err(|e| StewardError::BadConfig(format!("{raw}: {e}")))?;
    if !matches!(url.scheme(), "http" | "https") || url.cannot_be_a_base() {
        return Err(StewardError::BadConfig(format!(
            "{raw}: not an http(s) base url"
        )));
    }
    let path = url.path().trim_end_matches('/').to_string();
    url.set_path(&format!("{path}/"));
    Ok(url)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiptEntry {
    pub name: String,
    pub x: u8,
    /// Unix seconds.
    pub stored_at: u64,
    pub status: String,
}

/// A reconstructed package and the stewards that did not contribute to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recovered {
    pub package: Vec<u8>,
    pub skipped: Vec<StewardFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionReceipt {
    pub recovery_id: String,
    pub n: usize,
    pub k: usize,
    pub entries: Vec<ReceiptEntry>,
}

#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub timeout: Duration,
    /// Further attempts after the first failure of a store request.
    pub retries: u32,
    /// First retry delay; doubles each time, plus up to as much jitter.
    pub backoff: Duration,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            timeout: Duration::from_secs(10),
            retries: 3,
            backoff: Duration::from_millis(200),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StewardClient {
    http: reqwest::Client,
    cfg: ClientConfig,
}

impl Default for StewardClient {
    fn default() -> Self {
        StewardClient::new(ClientConfig::default())
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn share_url(ep: &StewardEndpoint, rid: &str, x: Option<u8>) -> Result<Url> {
    let path = match x {
        Some(x) => format!("v1/shares/{rid}/{x}"),
        None => format!("v1/shares/{rid}"),
    };
    base_url(&ep.url)?
        .join(&path)
        .map_err(|e| StewardError::BadConfig(e.to_string()))
}

enum Attempt {
    Done(&'static str),
    Retry(String),
    Fatal(String),
}

impl StewardClient {
    pub fn new(cfg: ClientConfig) -> Self {
        let http = reqwest::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .expect("http client builds");
        StewardClient { http, cfg }
    }

    fn request(
        &self,
        method: reqwest::Method,
        url: Url,
        ep: &StewardEndpoint,
    ) -> reqwest::RequestBuilder {
        let req = self.http.request(method, url);
        match &ep.token {
            Some(t) => req.bearer_auth(t),
            None => req,
        }
    }

    async fn put_once(&self, ep: &StewardEndpoint, url: &Url, body: &str) -> Attempt {
        let resp = match self
            .request(reqwest::Method::PUT, url.clone(), ep)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send()
            .await
        {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status();
        match status {
            StatusCode::CREATED => Attempt::Done("stored"),
            StatusCode::OK => Attempt::Done("stored"),
            s if s.is_server_error() || s == StatusCode::TOO_MANY_REQUESTS => {
                Attempt::Retry(format!("http {}", s.as_u16()))
            }
            s => {
                let text = resp.text().await.unwrap_or_default();
                Attempt::Fatal(format!("http {}: {}", s.as_u16(), text.trim()))
            }
        }
    }

    async fn put_with_retry(
        &self,
        ep: &StewardEndpoint,
        share: &Share,
    ) -> std::result::Result<&'static str, String> {
        let url =
            share_url(ep, &share.recovery_id_hex(), Some(share.x)).map_err(|e| e.to_string())?;
        let body = share.to_json();
        let mut last = String::new();
        for attempt in 0..=self.cfg.retries {
            if attempt > 0 {
                let base = self.cfg.backoff * 2u32.pow(attempt - 1);
                let jitter = base.mul_f64(rand::thread_rng().gen::<f64>());
                tokio::time::sleep(base + jitter).await;
            }
            match self.put_once(ep, &url, &body).await {
                Attempt::Done(s) => return Ok(s),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(e) => {
                    debug!(steward = %ep.name, attempt, error = %e, "store attempt failed");
                    last = e;
                }
            }
        }
        Err(format!(
            "gave up after {} retries: {last}",
            self.cfg.retries
        ))
    }

    /// Splits `package` into `n` shares, `k` of which recover it, and sends
    /// share `i` to steward `i`. Succeeds only if every steward stored its
    /// share.
    pub async fn distribute<R: RngCore + CryptoRng>(
        &self,
        package: &[u8],
        list: &StewardList,
        rng: &mut R,
    ) -> Result<DistributionReceipt> {
        list.validate()?;
        let shares = sss::split(package, list.n, list.k, rng)?;
        self.distribute_shares(&shares, list).await
    }

    /// Sends already-split shares; rerunning with the same shares after a
    /// partial failure only fills the gaps, since stores are idempotent.
    pub async fn distribute_shares(
        &self,
        shares: &[Share],
        list: &StewardList,
    ) -> Result<DistributionReceipt> {
        list.validate()?;
        if shares.len() != list.n {
            return Err(StewardError::BadConfig(format!(
                "{} shares for {} stewards",
                shares.len(),
                list.n
            )));
        }
        let rid = shares[0].recovery_id_hex();
        let mut tasks = JoinSet::new();
        for (ep, share) in list.stewards.iter().zip(shares) {
            let (client, ep, share) = (self.clone(), ep.clone(), share.clone());
            tasks.spawn(async move {
                let res = client.put_with_retry(&ep, &share).await;
                (ep.name, share.x, res)
            });
        }
        let mut entries = Vec::new();
        let mut failures = Vec::new();
        while let Some(joined) = tasks.join_next().await {
            let (name, x, res) = joined.expect("store task panicked");
            match res {
                Ok(status) => entries.push(ReceiptEntry {
                    name,
                    x,
                    stored_at: unix_now(),
                    status: status.to_string(),
                }),
                Err(reason) => failures.push(StewardFailure { name, reason }),
            }
        }
        if !failures.is_empty() {
            failures.sort_by(|a, b| a.name.cmp(&b.name));
            return Err(StewardError::DistributionIncomplete {
                recovery_id: rid,
                failures,
            });
        }
        entries.sort_by_key(|e| e.x);
        Ok(DistributionReceipt {
            recovery_id: rid,
            n: list.n,
            k: list.k,
            entries,
        })
    }

    async fn fetch_from(
        &self,
        ep: &StewardEndpoint,
        rid: &str,
    ) -> std::result::Result<Vec<Share>, String> {
        let url = share_url(ep, rid, None).map_err(|e| e.to_string())?;
        let resp = self
            .request(reqwest::Method::GET, url, ep)
            .send()
            .await
            .map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("list: http {}", resp.status().as_u16()));
        }
        let listing: serde_json::Value =
            serde_json::from_slice(&resp.bytes().await.map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        let indices: Vec<u8> = listing["indices"]
            .as_array()
            .map(|a| {
                a.iter()
                    .filter_map(|v| v.as_u64())
                    .filter_map(|v| u8::try_from(v).ok())
                    .collect()
            })
            .unwrap_or_default();
        if indices.is_empty() {
            return Err("no share stored".into());
        }
        let mut shares = Vec::new();
        let mut problems = Vec::new();
        for x in indices {
            let url = share_url(ep, rid, Some(x)).map_err(|e| e.to_string())?;
            let resp = self
                .request(reqwest::Method::GET, url, ep)
                .send()
                .await
                .map_err(|e| e.to_string())?;
            if !resp.status().is_success() {
                problems.push(format!("x={x}: http {}", resp.status().as_u16()));
                continue;
            }
            let text = resp.text().await.map_err(|e| e.to_string())?;
            match Share::from_json(&text) {
                Ok(s) if s.recovery_id_hex() != rid || s.x != x => {
                    problems.push(format!("x={x}: envelope does not match its address"))
                }
                Ok(s) if !s.checksum_ok() => {
                    warn!(steward = %ep.name, x, "share failed its checksum, skipping");
                    problems.push(format!("x={x}: corrupt-share"));
                }
                Ok(s) => shares.push(s),
                Err(e) => problems.push(format!("x={x}: {e}")),
            }
        }
        if shares.is_empty() {
            Err(problems.join(", "))
        } else {
            Ok(shares)
        }
    }

    /// Asks every steward at once and reconstructs as soon as `k` valid
    /// shares with distinct indices are in; slower requests are cancelled.
    pub async fn recover(&self, rid: &str, list: &StewardList) -> Result<Vec<u8>> {
        Ok(self.recover_detailed(rid, list).await?.package)
    }

    /// Like [`recover`](Self::recover), also reporting the stewards whose
    /// answers were unusable before quorum was reached.
    pub async fn recover_detailed(&self, rid: &str, list: &StewardList) -> Result<Recovered> {
        list.validate()?;
        if !crate::store::valid_rid(rid) {
            return Err(StewardError::BadConfig(format!(
                "malformed recovery id {rid:?}"
            )));
        }
        let mut tasks = JoinSet::new();
        for ep in &list.stewards {
            let (client, ep, rid) = (self.clone(), ep.clone(), rid.to_string());
            tasks.spawn(async move {
                let res = client.fetch_from(&ep, &rid).await;
                (ep.name, res)
            });
        }
        let mut got: BTreeMap<u8, Share> = BTreeMap::new();
        let mut diagnostics = Vec::new();
        while let Some(joined) = tasks.join_next().await {
            let (name, res) = joined.expect("fetch task panicked");
            match res {
                Ok(shares) => {
                    for s in shares {
                        got.entry(s.x).or_insert(s);
                    }
                }
                Err(reason) => {
                    warn!(steward = %name, %reason, "no usable share");
                    diagnostics.push(StewardFailure { name, reason });
                }
            }
            if got.len() >= list.k {
                tasks.abort_all();
                break;
            }
        }
        if got.len() < list.k {
            diagnostics.sort_by(|a, b| a.name.cmp(&b.name));
            return Err(StewardError::QuorumFailed {
                have: got.len(),
                need: list.k,
                diagnostics,
            });
        }
        let shares: Vec<Share> = got.into_values().collect();
        diagnostics.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(Recovered {
            package: sss::recover(&shares)?,
            skipped: diagnostics,
        })
    }
}
