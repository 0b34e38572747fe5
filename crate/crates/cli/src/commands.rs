use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use biokey_core::cancelable::TemplateConfig;
use biokey_core::keyvault::{parse_private_key, KeyPair};
use biokey_core::synth::{run_evaluation, EvalParams, PerturbModel};
use biokey_core::vault::{self, VaultFile};
use biokey_steward::{ServiceConfig, StewardClient, StewardList, TOKEN_ENV};
use rand::rngs::OsRng;
use rand::RngCore;

use crate::error::CliError;
use crate::files::{load_template, read_bytes, read_text, write_atomic, write_key};

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::io("runtime", e))
}

fn load_vault(path: &Path) -> Result<VaultFile, CliError> {
    Ok(VaultFile::from_json(&read_text(path)?)?)
}

pub fn enroll(
    input: &Path,
    key: &Path,
    out: &Path,
    grid: (usize, usize),
    seed: Option<u64>,
) -> Result<(), CliError> {
    let private_key = parse_private_key(&read_bytes(key)?)?;
    let template = load_template(input)?;
    let cfg = TemplateConfig {
        rows: grid.0,
        cols: grid.1,
        ..TemplateConfig::default()
    };
    let seed = seed.unwrap_or_else(|| OsRng.next_u64());
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let v = vault::enroll(&template, &private_key, seed, &cfg, created, &mut OsRng)?;
    write_atomic(out, v.to_json().as_bytes())?;
    eprintln!(
        "enrolled {} minutiae on a {}x{} grid",
        template.len(),
        grid.0,
        grid.1
    );
    Ok(())
}

pub fn unlock(input: &Path, vault_path: &Path, out: &Path) -> Result<(), CliError> {
    let v = load_vault(vault_path)?;
    let candidate = load_template(input)?;
    let key = vault::unlock(&v, &candidate, &TemplateConfig::default())?;
    write_key(out, &key)
}

pub fn backup(vault_path: &Path, stewards: &Path) -> Result<(), CliError> {
    let v = load_vault(vault_path)?;
    let list = StewardList::load(stewards)?;
    let package = v.to_package();
    let receipt =
        runtime()?.block_on(StewardClient::default().distribute(&package, &list, &mut OsRng))?;
    for e in &receipt.entries {
        eprintln!("{}: share {} {}", e.name, e.x, e.status);
    }
    println!("{}", receipt.recovery_id);
    Ok(())
}

pub fn restore(
    rid: &str,
    stewards: &Path,
    input: &Path,
    out: &Path,
    vault_out: Option<&Path>,
) -> Result<(), CliError> {
    let list = StewardList::load(stewards)?;
    let candidate = load_template(input)?;
    let package = runtime()?.block_on(StewardClient::default().recover(rid, &list))?;
    let v = VaultFile::from_package(&package).map_err(|e| CliError::Recovery(e.to_string()))?;
    let key = vault::unlock(&v, &candidate, &TemplateConfig::default())?;
    if let Some(p) = vault_out {
        write_atomic(p, v.to_json().as_bytes())?;
    }
    write_key(out, &key)
}

pub fn serve(addr: &str, data_dir: &Path) -> Result<(), CliError> {
    let cfg = ServiceConfig {
        data_dir: data_dir.to_path_buf(),
        token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
        ..ServiceConfig::default()
    };
    runtime()?.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::io(addr, e))?;
        let local = listener.local_addr().map_err(|e| CliError::io(addr, e))?;
        println!("listening on http://{local}");
        biokey_steward::serve(listener, &cfg, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::io(data_dir.display(), e))
    })
}

pub struct EvalOptions {
    pub trials: usize,
    pub impostors: usize,
    pub jitter: f64,
    pub delete: f64,
    pub spurious: f64,
    pub flip: f64,
    pub seed: u64,
    pub report: Option<PathBuf>,
}

pub fn eval(o: EvalOptions) -> Result<(), CliError> {
    let params = EvalParams {
        genuine_trials: o.trials,
        impostor_trials: o.impostors,
        seed: o.seed,
        ..EvalParams::default()
    };
    let model = PerturbModel {
        jitter_sigma: o.jitter,
        delete_rate: o.delete,
        spurious_rate: o.spurious,
        type_flip_rate: o.flip,
    };
    let report = run_evaluation(&params, &model)?;
    print!("{}", report.summary_table());
    if let Some(path) = o.report {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_atomic(&path, json.as_bytes())?;
    }
    Ok(())
}

pub fn keygen(out: &Path) -> Result<(), CliError> {
    let kp = KeyPair::generate(&mut OsRng);
    write_key(out, &kp.private_key())?;
    println!("{}", hex::encode(kp.public_key()));
    Ok(())
}
