//! Acceptance run over the whole system. Each criterion prints one
//! `PASS`/`FAIL` line; the process exits nonzero if any fails.
//!
//! Runs without the libtest harness so the lines always show up in
//! `cargo test` output.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt::Display;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use biokey_core::cancelable::{
    apply_transform, generate_transform, match_and_recover, register, reverse_point,
    TemplateConfig, TransformParams,
};
use biokey_core::erasure::{rs_encode, rs_reconstruct};
use biokey_core::keyvault::{unwrap_key, verify, wrap_key, EncryptedBlob, KeyPair};
use biokey_core::sss::{self, eval_poly, split, Share};
use biokey_core::synth::{
    generate_template, perturb, run_evaluation, trial_rng, EvalParams, PerturbModel, DEFAULT_COUNT,
    DEFAULT_SIDE,
};
use biokey_core::template::{Bounds, Minutia, MinutiaKind, MinutiaTemplate};
use biokey_core::vault::{enroll, unlock, VaultFile};
use biokey_core::Error;
use biokey_fingerprint::singular::poincare_sum;
use biokey_fingerprint::{detect_core_points, CoreKind, OrientationField};
use biokey_steward::{
    spawn, ClientConfig, ServiceConfig, StewardClient, StewardEndpoint, StewardError,
    StewardHandle, StewardList,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    }};
}

fn ctx<T, E: Display>(r: Result<T, E>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            name: "reed-solomon erasure recovery",
            budget: Some(Duration::from_secs(5)),
            run: reed_solomon,
        },
        Criterion {
            name: "cartesian block transform",
            budget: None,
            run: cartesian_transform,
        },
        Criterion {
            name: "zero-noise self-match",
            budget: Some(Duration::from_secs(30)),
            run: self_match,
        },
        Criterion {
            name: "noise tolerance",
            budget: None,
            run: noise_tolerance,
        },
        Criterion {
            name: "impostor rejection",
            budget: None,
            run: impostor_rejection,
        },
        Criterion {
            name: "cancelability",
            budget: None,
            run: cancelability,
        },
        Criterion {
            name: "shamir secrecy",
            budget: Some(Duration::from_secs(1)),
            run: shamir_secrecy,
        },
        Criterion {
            name: "steward quorum end to end",
            budget: Some(Duration::from_secs(10)),
            run: steward_end_to_end,
        },
        Criterion {
            name: "two-factor recovery",
            budget: None,
            run: two_factor,
        },
        Criterion {
            name: "aead integrity and signatures",
            budget: None,
            run: integrity,
        },
        Criterion {
            name: "poincare classification",
            budget: None,
            run: poincare,
        },
    ];

    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.run).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if took > b => Err(format!("took {took:.2?}, budget {b:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {}: {detail} [{took:.2?}]", i + 1, c.name),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {}: {why} [{took:.2?}]", i + 1, c.name);
            }
        }
    }
    println!(
        "acceptance: {}/{} passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

fn reed_solomon() -> Outcome {
    let msg = b"ABCDEFGHIJKLMNOP";
    let data: Vec<Vec<u8>> = msg.chunks(4).map(<[u8]>::to_vec).collect();
    let set = ctx(rs_encode(&data, 2), "encode")?;
    ensure!(
        set.shards.len() == 6,
        "expected 6 shards, got {}",
        set.shards.len()
    );

    // "IJKL" plus one parity shard, then "IJKL" and "MNOP" together
    for lost in [[2, 4], [2, 5], [2, 3]] {
        let mut s = set.clone();
        lost.iter().for_each(|&i| s.erase(i));
        let back = ctx(rs_reconstruct(&s), "reconstruct")?;
        ensure!(
            back.concat() == msg,
            "shards {lost:?} lost: got {:?}",
            back.concat()
        );
    }

    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    for case in 0..1000 {
        let n = rng.gen_range(1..=20);
        let k = rng.gen_range(1..=10);
        let len = rng.gen_range(1..=16);
        let data: Vec<Vec<u8>> = (0..n)
            .map(|_| (0..len).map(|_| rng.gen()).collect())
            .collect();
        let mut s = ctx(rs_encode(&data, k), "encode")?;
        let mut order: Vec<usize> = (0..n + k).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
        order[..k].iter().for_each(|&i| s.erase(i));
        ensure!(
            rs_reconstruct(&s).as_ref() == Ok(&data),
            "case {case}: n={n} k={k} not recovered after {k} erasures"
        );
        s.erase(order[k]);
        match rs_reconstruct(&s) {
            Err(e @ Error::InsufficientShards { .. }) => {
                ensure!(
                    e.to_string().starts_with("insufficient-shards"),
                    "message {e}"
                )
            }
            other => return Err(format!("case {case}: k+1 erasures gave {other:?}")),
        }
    }
    Ok("figure scenario exact, 1000 random cases".into())
}

fn cartesian_transform() -> Outcome {
    let m = vec![
        vec![0, 0, 0, 0],
        vec![0, 1, 0, 0],
        vec![1, 0, 0, 1],
        vec![0, 0, 1, 0],
    ];
    let b100 = Bounds::new(0.0, 0.0, 100.0, 100.0).unwrap();
    let example = ctx(TransformParams::from_matrix(b100, 2, 2, &m), "matrix")?;
    let c = example.multiply(&[1, 2, 3, 4]);
    ensure!(c == [3, 2, 4, 3], "C' = {c:?}");

    let b400 = Bounds::new(0.0, 0.0, 400.0, 400.0).unwrap();
    let random = ctx(generate_transform(99, 4, 4, b400), "generate")?;
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for (params, side) in [(&example, 400), (&random, 1600)] {
        for i in 0..10_000 {
            // quarter-pixel points, the resolution the transform works at
            let x = rng.gen_range(0..side) as f64 / 4.0;
            let y = rng.gen_range(0..side) as f64 / 4.0;
            let t = MinutiaTemplate::new(
                vec![Minutia::new(x, y, MinutiaKind::Ending)],
                params.bounds(),
            )
            .unwrap();
            let moved = apply_transform(&t, params, true)[0];
            let src = moved.source_block.expect("source kept");
            let back = ctx(reverse_point(&moved, src, params), "reverse")?;
            ensure!(
                back == (x, y),
                "point {i}: ({x}, {y}) came back as {back:?}"
            );
        }
    }
    Ok("C=[1,2,3,4] -> [3,2,4,3], 2x10^4 exact round trips".into())
}

fn eval_bounds() -> Bounds {
    Bounds::new(0.0, 0.0, DEFAULT_SIDE, DEFAULT_SIDE).unwrap()
}

fn self_match() -> Outcome {
    let cfg = TemplateConfig::default();
    for i in 0..100 {
        let mut rng = trial_rng(3, i);
        let t = ctx(
            generate_template(&mut rng, DEFAULT_COUNT, eval_bounds()),
            "generate",
        )?;
        let (reg, master) = ctx(register(&t, rng.next_u64(), &cfg, &mut rng), "register")?;
        let got = ctx(
            match_and_recover(&reg, &t, &cfg),
            &format!("enrollment {i}"),
        )?;
        ensure!(
            got == master,
            "enrollment {i}: recovered a different master hash"
        );
    }
    Ok("100/100 bit-exact".into())
}

fn noise_tolerance() -> Outcome {
    let params = EvalParams {
        genuine_trials: 200,
        impostor_trials: 0,
        seed: 1,
        ..EvalParams::default()
    };
    let model = PerturbModel {
        jitter_sigma: params.template.tau / 4.0,
        delete_rate: 0.2,
        ..PerturbModel::default()
    };
    let r = ctx(run_evaluation(&params, &model), "evaluation")?;
    let gar = r.genuine_accept_rate.unwrap_or(0.0);
    let detail = format!(
        "GAR {gar:.3} ({}/{}), seed {}",
        r.genuine_accepts, r.genuine_trials, params.seed
    );
    ensure!(gar >= 0.95, "{detail}");
    Ok(detail)
}

fn impostor_rejection() -> Outcome {
    let cfg = TemplateConfig::default();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let t = ctx(
        generate_template(&mut rng, DEFAULT_COUNT, eval_bounds()),
        "generate",
    )?;
    let (reg, _) = ctx(register(&t, 77, &cfg, &mut rng), "register")?;
    let mut accepts = 0;
    for _ in 0..1000 {
        let other = ctx(
            generate_template(&mut rng, DEFAULT_COUNT, eval_bounds()),
            "generate",
        )?;
        accepts += usize::from(match_and_recover(&reg, &other, &cfg).is_ok());
    }
    ensure!(accepts == 0, "{accepts} of 1000 impostors accepted");
    Ok("0/1000 accepted".into())
}

fn cancelability() -> Outcome {
    let cfg = TemplateConfig::default();
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let t = ctx(
        generate_template(&mut rng, DEFAULT_COUNT, eval_bounds()),
        "generate",
    )?;
    let regs = (0..100u64)
        .map(|seed| register(&t, seed, &cfg, &mut rng).map(|(r, _)| r))
        .collect::<Result<Vec<_>, _>>();
    let regs = ctx(regs, "register")?;
    let distinct: HashSet<String> = regs
        .iter()
        .map(|r| serde_json::to_string(&r.transformed).unwrap())
        .collect();
    ensure!(
        distinct.len() == 100,
        "only {} distinct stored templates",
        distinct.len()
    );

    for (i, a) in regs.iter().enumerate() {
        let b = &regs[(i + 1) % regs.len()];
        let mut swapped = a.clone();
        swapped.params = b.params.clone();
        ensure!(
            match_and_recover(&swapped, &t, &cfg).is_err(),
            "enrollment {i} unlocked with the params of enrollment {}",
            (i + 1) % regs.len()
        );
    }
    Ok("100/100 distinct, 0/100 cross-param unlocks".into())
}

fn shamir_secrecy() -> Outcome {
    // For a fixed share index, every secret maps the 256 possible
    // coefficients onto the 256 share values exactly once, so one share
    // leaves every secret equally likely.
    for x in 1..=3u8 {
        for secret in 0..=255u8 {
            let mut hits = [0u16; 256];
            for a in 0..=255u8 {
                hits[eval_poly(&[secret, a], x) as usize] += 1;
            }
            ensure!(
                hits.iter().all(|&h| h == 1),
                "x={x} secret={secret} is not uniform"
            );
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    for secret in 0..=255u8 {
        let shares = ctx(split(&[secret], 3, 2, &mut rng), "split")?;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let got = ctx(
                sss::recover(&[shares[i].clone(), shares[j].clone()]),
                "recover",
            )?;
            ensure!(got == [secret], "pair ({i},{j}) gave {got:?} for {secret}");
        }
        for s in &shares {
            match sss::recover(std::slice::from_ref(s)) {
                Err(e @ Error::BelowThreshold { .. }) => {
                    ensure!(e.to_string().starts_with("below-threshold"), "message {e}")
                }
                other => return Err(format!("single share gave {other:?}")),
            }
        }
    }
    Ok("3x256x256 brute force uniform, all pairs recover".into())
}

struct Cluster {
    dirs: Vec<tempfile::TempDir>,
    handles: Vec<Option<StewardHandle>>,
    list: StewardList,
}

impl Cluster {
    /// `slow` stewards answer after a delay, the rest immediately.
    async fn start(n: usize, k: usize, slow: &[usize]) -> Result<Cluster, String> {
        let mut dirs = Vec::new();
        let mut handles = Vec::new();
        let mut stewards = Vec::new();
        for i in 0..n {
            let dir = ctx(tempfile::tempdir(), "tempdir")?;
            let cfg = ServiceConfig {
                data_dir: dir.path().to_path_buf(),
                latency: slow.contains(&i).then(|| Duration::from_millis(150)),
                ..Default::default()
            };
            let h = ctx(spawn("127.0.0.1:0".parse().unwrap(), cfg).await, "spawn")?;
            stewards.push(StewardEndpoint {
                name: format!("steward-{}", i + 1),
                url: h.url(),
                token: None,
            });
            handles.push(Some(h));
            dirs.push(dir);
        }
        Ok(Cluster {
            dirs,
            handles,
            list: StewardList { stewards, n, k },
        })
    }

    async fn stop(&mut self, i: usize) -> Result<(), String> {
        let h = self.handles[i].take().ok_or("already stopped")?;
        ctx(h.stop().await, "stop")
    }

    fn share_file(&self, i: usize, rid: &str) -> std::path::PathBuf {
        self.dirs[i]
            .path()
            .join(rid)
            .join(format!("{}.json", i + 1))
    }
}

fn client() -> StewardClient {
    StewardClient::new(ClientConfig {
        timeout: Duration::from_secs(2),
        retries: 1,
        backoff: Duration::from_millis(20),
    })
}

struct Enrolled {
    vault: VaultFile,
    key: [u8; 32],
    rescan: MinutiaTemplate,
    other: MinutiaTemplate,
}

fn enrolled(seed: u64) -> Result<Enrolled, String> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let t = ctx(
        generate_template(&mut rng, DEFAULT_COUNT, eval_bounds()),
        "generate",
    )?;
    let model = PerturbModel {
        jitter_sigma: 2.0,
        delete_rate: 0.1,
        ..PerturbModel::default()
    };
    let rescan = ctx(perturb(&t, &model, &mut rng), "perturb")?;
    let other = ctx(
        generate_template(&mut rng, DEFAULT_COUNT, eval_bounds()),
        "generate",
    )?;
    let key = KeyPair::generate(&mut rng).private_key();
    let vault = ctx(
        enroll(
            &t,
            &key,
            seed,
            &TemplateConfig::default(),
            1_700_000_000,
            &mut rng,
        ),
        "enroll",
    )?;
    Ok(Enrolled {
        vault,
        key,
        rescan,
        other,
    })
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(4)
        .enable_all()
        .build()
        .expect("tokio runtime")
}

fn steward_end_to_end() -> Outcome {
    let e = enrolled(8)?;
    runtime().block_on(async {
        // steward 6 answers first, so its share is always read
        let mut c = Cluster::start(6, 4, &[0, 1, 2, 3, 4]).await?;
        let client = client();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let receipt = ctx(
            client
                .distribute(&e.vault.to_package(), &c.list, &mut rng)
                .await,
            "distribute",
        )?;
        let rid = receipt.recovery_id;

        let path = c.share_file(5, &rid);
        let original = ctx(std::fs::read_to_string(&path), "read share")?;
        let mut share = ctx(Share::from_json(&original), "parse share")?;
        share.payload[0] ^= 0x01;
        ctx(std::fs::write(&path, share.to_json()), "write share")?;
        let got = ctx(
            client.recover_detailed(&rid, &c.list).await,
            "recover with flipped share",
        )?;
        ensure!(
            got.package == e.vault.to_package(),
            "package differs after skipping the flipped share"
        );
        ensure!(
            got.skipped
                .iter()
                .any(|f| f.name == "steward-6" && f.reason.contains("corrupt-share")),
            "flipped share not reported: {:?}",
            got.skipped
        );
        ctx(std::fs::write(&path, &original), "restore share")?;

        c.stop(0).await?;
        c.stop(3).await?;
        let package = ctx(
            client.recover(&rid, &c.list).await,
            "recover with 2 stopped",
        )?;
        let vault = ctx(VaultFile::from_package(&package), "package")?;
        let key = ctx(
            unlock(&vault, &e.rescan, &TemplateConfig::default()),
            "unlock",
        )?;
        ensure!(key == e.key, "unwrapped key differs");

        c.stop(5).await?;
        match client.recover(&rid, &c.list).await {
            Err(err @ StewardError::QuorumFailed { .. }) => {
                ensure!(
                    err.to_string().starts_with("quorum-failed"),
                    "message {err}"
                )
            }
            other => return Err(format!("3 stopped gave {:?}", other.map(|p| p.len()))),
        }
        Ok("stop 2 -> key bit-exact, stop 3 -> quorum-failed, flipped share skipped".into())
    })
}

fn biokey(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biokey"))
        .args(args)
        .output()
        .expect("run biokey")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn two_factor() -> Outcome {
    let e = enrolled(9)?;
    let dir = ctx(tempfile::tempdir(), "tempdir")?;
    let write = |name: &str, text: String| -> Result<std::path::PathBuf, String> {
        let p = dir.path().join(name);
        ctx(std::fs::write(&p, text), name).map(|_| p)
    };
    let rescan = write("rescan.json", e.rescan.to_json())?;
    let other = write("other.json", e.other.to_json())?;
    let out = dir.path().join("restored.hex");

    runtime().block_on(async {
        let mut c = Cluster::start(6, 4, &[]).await?;
        let receipt = ctx(
            client()
                .distribute(
                    &e.vault.to_package(),
                    &c.list,
                    &mut ChaCha20Rng::seed_from_u64(9),
                )
                .await,
            "distribute",
        )?;
        let rid = receipt.recovery_id;
        let stewards = write("stewards.json", c.list.to_json())?;
        let restore = |input: &Path| {
            let args = [
                "restore",
                "--rid",
                &rid,
                "--stewards",
                path_str(&stewards),
                "--input",
                path_str(input),
                "--out",
                path_str(&out),
            ];
            tokio::task::block_in_place(|| biokey(&args))
        };

        // every share reachable, wrong finger
        let o = restore(&other);
        let msg = String::from_utf8_lossy(&o.stderr).into_owned();
        ensure!(
            o.status.code() == Some(2) && msg.contains("no-match"),
            "impostor: {:?} {msg}",
            o.status
        );
        ensure!(!out.exists(), "impostor run wrote a key");

        // right finger, only 3 of 4 needed stewards
        for i in [0, 2, 4] {
            c.stop(i).await?;
        }
        let o = restore(&rescan);
        let msg = String::from_utf8_lossy(&o.stderr).into_owned();
        ensure!(
            o.status.code() == Some(3) && msg.contains("quorum-failed"),
            "no quorum: {:?} {msg}",
            o.status
        );
        ensure!(!out.exists(), "quorum failure wrote a key");
        Ok("impostor -> no-match (2), no quorum -> quorum-failed (3)".into())
    })
}

fn flip(blob: &EncryptedBlob, bit: usize) -> EncryptedBlob {
    let mut b = blob.clone();
    let byte = bit / 8;
    if byte < b.ciphertext.len() {
        b.ciphertext[byte] ^= 1 << (bit % 8);
    } else {
        b.tag[byte - b.ciphertext.len()] ^= 1 << (bit % 8);
    }
    b
}

fn integrity() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let mut key = [0u8; 32];
    rng.fill_bytes(&mut key);
    let mut salt = [0u8; 16];
    rng.fill_bytes(&mut salt);

    // a wrapped private key has 384 ciphertext and tag bits: flip each one
    let secret = KeyPair::generate(&mut rng).private_key();
    let blob = wrap_key(&secret, &key, salt, &mut rng);
    ensure!(
        unwrap_key(&blob, &key).as_deref() == Ok(secret.as_slice()),
        "clean blob did not unwrap"
    );
    let bits = (blob.ciphertext.len() + blob.tag.len()) * 8;
    let rejected = (0..bits)
        .filter(|&bit| unwrap_key(&flip(&blob, bit), &key) == Err(Error::DecryptFailed))
        .count();
    ensure!(
        rejected == bits,
        "{rejected}/{bits} key-blob flips rejected"
    );

    // 500 distinct flips need a longer payload
    let long: Vec<u8> = (0..64).map(|_| rng.gen()).collect();
    let blob = wrap_key(&long, &key, salt, &mut rng);
    let total = (blob.ciphertext.len() + blob.tag.len()) * 8;
    let picks = rand::seq::index::sample(&mut rng, total, 500);
    let rejected = picks
        .iter()
        .filter(|&bit| unwrap_key(&flip(&blob, bit), &key) == Err(Error::DecryptFailed))
        .count();
    ensure!(rejected == 500, "{rejected}/500 flips rejected");

    let kp = KeyPair::generate(&mut rng);
    let msg = b"restore request for a biometric vault";
    let sig = kp.sign(msg);
    ensure!(
        verify(msg, &sig, &kp.public_key()) == Ok(true),
        "signature did not verify"
    );
    for pos in 0..msg.len() {
        let mut m = msg.to_vec();
        m[pos] ^= rng.gen_range(1..=255u8);
        ensure!(
            verify(&m, &sig, &kp.public_key()) == Ok(false),
            "mutation at byte {pos} verified"
        );
    }
    Ok(format!(
        "{bits}/{bits} key-blob flips and 500/500 sampled flips rejected, {} message mutations rejected",
        msg.len()
    ))
}

fn poincare() -> Outcome {
    const BS: usize = 16;
    let field = |f: &dyn Fn(f64, f64) -> f64| OrientationField::from_fn(BS, 13, 13, f).unwrap();
    let (cx, cy) = (6.5 * BS as f64, 6.5 * BS as f64);
    type Field = Box<dyn Fn(f64, f64) -> f64>;
    let cases: [(&str, Field, CoreKind, f64); 3] = [
        (
            "whorl",
            Box::new(move |x, y| (y - cy).atan2(x - cx)),
            CoreKind::Whorl,
            2.0 * PI,
        ),
        (
            "loop",
            Box::new(move |x, y| 0.5 * (y - cy).atan2(x - cx)),
            CoreKind::Loop,
            PI,
        ),
        (
            "delta",
            Box::new(move |x, y| -0.5 * (y - cy).atan2(x - cx)),
            CoreKind::Delta,
            -PI,
        ),
    ];
    for (name, f, kind, expect) in &cases {
        let fld = field(f.as_ref());
        let cores = detect_core_points(&fld);
        ensure!(cores.len() == 1, "{name}: {} cores", cores.len());
        let c = &cores[0];
        ensure!(c.kind == *kind, "{name}: classified as {:?}", c.kind);
        let sum = poincare_sum(&fld, c.row, c.col);
        ensure!(
            (sum - expect).abs() < 0.3,
            "{name}: sum {sum:.3}, expected {expect:.3}"
        );
    }
    let uniform = field(&|_, _| 0.7);
    ensure!(
        detect_core_points(&uniform).is_empty(),
        "uniform field has cores"
    );
    Ok("whorl/loop/delta classified, uniform has none".into())
}
