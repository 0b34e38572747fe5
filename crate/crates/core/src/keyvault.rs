//! Key derivation from the master hash, private-key wrapping, and a
//! secp256k1 sign/verify round trip for the unwrapped key.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use hkdf::Hkdf;
use k256::ecdsa::signature::{Signer, Verifier};
use k256::ecdsa::{Signature, SigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};
use sha2::Sha256;

use crate::error::{Error, Result};
use crate::recovery::Digest32;

pub const KDF_INFO: &[u8] = b"biokey/v1/wrap";
pub const BLOB_AAD: &[u8] = b"biokey-blob-v1";
pub const BLOB_MAGIC: &[u8; 4] = b"BKV1";
const TAG_LEN: usize = 16;
const HEADER_LEN: usize = 4 + 16 + 12 + 4;

/// HKDF-SHA-256 from the master hash to the 32-byte wrapping key.
pub fn derive_key(master: &Digest32, kdf_salt: &[u8; 16]) -> [u8; 32] {
    let hk = Hkdf::<Sha256>::new(Some(kdf_salt), master.as_bytes());
    let mut okm = [0u8; 32];
    hk.expand(KDF_INFO, &mut okm)
        .expect("32 bytes is a valid HKDF-SHA-256 output length");
    okm
}

/// AES-256-GCM wrapped private key.
///
/// Binary layout: `"BKV1" || kdf_salt(16) || nonce(12) || be32(len) ||
/// ciphertext || tag(16)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedBlob {
    pub kdf_salt: [u8; 16],
    pub nonce: [u8; 12],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; 16],
}

impl EncryptedBlob {
    pub const VERSION: u8 = 1;

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.ciphertext.len() + TAG_LEN);
        out.extend_from_slice(BLOB_MAGIC);
        out.extend_from_slice(&self.kdf_salt);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.tag);
        out
    }

    /// Any malformed input is reported as `decrypt-failed`.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN + TAG_LEN || &bytes[..4] != BLOB_MAGIC {
            return Err(Error::DecryptFailed);
        }
        let len = u32::from_be_bytes(bytes[32..36].try_into().expect("4 bytes")) as usize;
        if bytes.len() != HEADER_LEN + len + TAG_LEN {
            return Err(Error::DecryptFailed);
        }
        let mut kdf_salt = [0u8; 16];
        kdf_salt.copy_from_slice(&bytes[4..20]);
        let mut nonce = [0u8; 12];
        nonce.copy_from_slice(&bytes[20..32]);
        let mut tag = [0u8; 16];
        tag.copy_from_slice(&bytes[HEADER_LEN + len..]);
        Ok(EncryptedBlob {
            kdf_salt,
            nonce,
            ciphertext: bytes[HEADER_LEN..HEADER_LEN + len].to_vec(),
            tag,
        })
    }
}

/// Encrypts `private_key` under `key` with a fresh random nonce.
pub fn wrap_key<R: RngCore + CryptoRng>(
    private_key: &[u8],
    key: &[u8; 32],
    kdf_salt: [u8; 16],
    rng: &mut R,
) -> EncryptedBlob {
    let mut nonce = [0u8; 12];
    rng.fill_bytes(&mut nonce);
    let cipher = Aes256Gcm::new(key.into());
    let mut sealed = cipher
        .encrypt(
            Nonce::from_slice(&nonce),
            Payload {
                msg: private_key,
                aad: BLOB_AAD,
            },
        )
        .expect("AES-GCM encryption of a short message cannot fail");
    let tag_bytes = sealed.split_off(sealed.len() - TAG_LEN);
    let mut tag = [0u8; 16];
    tag.copy_from_slice(&tag_bytes);
    EncryptedBlob {
        kdf_salt,
        nonce,
        ciphertext: sealed,
        tag,
    }
}

/// Verifies the tag and returns the plaintext private key.
pub fn unwrap_key(blob: &EncryptedBlob, key: &[u8; 32]) -> Result<Vec<u8>> {
    let cipher = Aes256Gcm::new(key.into());
    let mut sealed = blob.ciphertext.clone();
    sealed.extend_from_slice(&blob.tag);
    cipher
        .decrypt(
            Nonce::from_slice(&blob.nonce),
            Payload {
                msg: &sealed,
                aad: BLOB_AAD,
            },
        )
        .map_err(|_| Error::DecryptFailed)
}

/// A secp256k1 key pair.
#[derive(Clone)]
pub struct KeyPair {
    signing: SigningKey,
}

impl std::fmt::Debug for KeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyPair")
            .field("public_key", &hex::encode(self.public_key()))
            .finish_non_exhaustive()
    }
}

impl KeyPair {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        KeyPair {
            signing: SigningKey::random(rng),
        }
    }

    pub fn from_private_bytes(bytes: &[u8]) -> Result<Self> {
        let signing = SigningKey::from_slice(bytes).map_err(|_| Error::BadKey)?;
        Ok(KeyPair { signing })
    }

    pub fn private_key(&self) -> [u8; 32] {
        self.signing.to_bytes().into()
    }

    /// SEC1 compressed point, 33 bytes.
    pub fn public_key(&self) -> [u8; 33] {
        let point = self.signing.verifying_key().to_encoded_point(true);
        point
            .as_bytes()
            .try_into()
            .expect("compressed point is 33 bytes")
    }

    /// ECDSA over SHA-256 with RFC 6979 deterministic nonces; 64-byte
    /// `r || s` output.
    pub fn sign(&self, message: &[u8]) -> [u8; 64] {
        let sig: Signature = self.signing.sign(message);
        sig.to_bytes().into()
    }
}

pub fn sign(message: &[u8], kp: &KeyPair) -> [u8; 64] {
    kp.sign(message)
}

/// `Err(bad-key)` for an undecodable public key; malformed signatures simply
/// fail verification.
pub fn verify(message: &[u8], signature: &[u8], public_key: &[u8]) -> Result<bool> {
    let vk = VerifyingKey::from_sec1_bytes(public_key).map_err(|_| Error::BadKey)?;
    let Ok(sig) = Signature::from_slice(signature) else {
        return Ok(false);
    };
    Ok(vk.verify(message, &sig).is_ok())
}

/// Accepts a private key as 64 hex characters (surrounding whitespace
/// ignored) or as exactly 32 raw bytes.
pub fn parse_private_key(bytes: &[u8]) -> Result<Vec<u8>> {
    if let Ok(text) = std::str::from_utf8(bytes) {
        let t = text.trim();
        if t.len() == 64 {
            if let Ok(raw) = hex::decode(t) {
                return Ok(raw);
            }
        }
    }
    if bytes.len() == 32 {
        return Ok(bytes.to_vec());
    }
    Err(Error::BadKey)
}
