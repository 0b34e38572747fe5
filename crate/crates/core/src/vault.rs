//! The local vault artifact and the recovery package that gets split
//! across stewards.

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use crate::cancelable::{match_and_recover, register, RegisteredTemplate, TemplateConfig};
use crate::encoding::{b64_decode, b64_encode};
use crate::error::{Error, Result};
use crate::keyvault::{derive_key, unwrap_key, wrap_key, EncryptedBlob};
use crate::template::MinutiaTemplate;

/// Registered template plus the wrapped private key.
#[derive(Debug, Clone, PartialEq)]
pub struct VaultFile {
    pub template: RegisteredTemplate,
    pub blob: EncryptedBlob,
    /// Unix seconds.
    pub created: u64,
}

#[derive(Serialize, Deserialize)]
struct VaultDoc {
    v: u32,
    created: u64,
    template: RegisteredTemplate,
    blob: String,
}

impl VaultFile {
    pub const VERSION: u32 = 1;

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&VaultDoc {
            v: Self::VERSION,
            created: self.created,
            template: self.template.clone(),
            blob: b64_encode(&self.blob.to_bytes()),
        })
        .expect("vault serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: VaultDoc = serde_json::from_str(text)?;
        if doc.v != Self::VERSION {
            return Err(Error::Format(format!(
                "unsupported vault version {}",
                doc.v
            )));
        }
        let raw = b64_decode(&doc.blob).map_err(|e| Error::Format(e.to_string()))?;
        let blob = EncryptedBlob::from_bytes(&raw)
            .map_err(|_| Error::Format("malformed encrypted blob".into()))?;
        Ok(VaultFile {
            template: doc.template,
            blob,
            created: doc.created,
        })
    }

    /// Length-prefixed `template JSON || blob bytes`, the unit that gets
    /// secret-shared.
    pub fn to_package(&self) -> Vec<u8> {
        let template = serde_json::to_vec(&self.template).expect("template serializes");
        let blob = self.blob.to_bytes();
        let mut out = Vec::with_capacity(4 + 8 + 8 + template.len() + blob.len());
        out.extend_from_slice(PACKAGE_MAGIC);
        out.extend_from_slice(&self.created.to_be_bytes());
        out.extend_from_slice(&(template.len() as u32).to_be_bytes());
        out.extend_from_slice(&template);
        out.extend_from_slice(&(blob.len() as u32).to_be_bytes());
        out.extend_from_slice(&blob);
        out
    }

    pub fn from_package(bytes: &[u8]) -> Result<Self> {
        let bad = || Error::Format("malformed recovery package".into());
        let mut rest = bytes
            .strip_prefix(PACKAGE_MAGIC.as_slice())
            .ok_or_else(bad)?;
        let mut take = |n: usize| -> Result<&[u8]> {
            if rest.len() < n {
                return Err(bad());
            }
            let (head, tail) = rest.split_at(n);
            rest = tail;
            Ok(head)
        };
        let created = u64::from_be_bytes(take(8)?.try_into().expect("8 bytes"));
        let tlen = u32::from_be_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        let template: RegisteredTemplate = serde_json::from_slice(take(tlen)?)?;
        let blen = u32::from_be_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
        let blob = EncryptedBlob::from_bytes(take(blen)?).map_err(|_| bad())?;
        if !rest.is_empty() {
            return Err(bad());
        }
        Ok(VaultFile {
            template,
            blob,
            created,
        })
    }
}

const PACKAGE_MAGIC: &[u8; 4] = b"BKP1";

/// Enrolls `tmpl` and wraps `private_key` under the derived key.
pub fn enroll<R: RngCore + CryptoRng>(
    tmpl: &MinutiaTemplate,
    private_key: &[u8],
    seed: u64,
    cfg: &TemplateConfig,
    created: u64,
    rng: &mut R,
) -> Result<VaultFile> {
    let (template, master) = register(tmpl, seed, cfg, rng)?;
    let key = derive_key(&master, &template.kdf_salt);
    let blob = wrap_key(private_key, &key, template.kdf_salt, rng);
    Ok(VaultFile {
        template,
        blob,
        created,
    })
}

/// Regenerates the key from a fresh template and unwraps the private key.
pub fn unlock(
    vault: &VaultFile,
    candidate: &MinutiaTemplate,
    cfg: &TemplateConfig,
) -> Result<Vec<u8>> {
    let master = match_and_recover(&vault.template, candidate, cfg)?;
    let key = derive_key(&master, &vault.template.kdf_salt);
    unwrap_key(&vault.blob, &key)
}
