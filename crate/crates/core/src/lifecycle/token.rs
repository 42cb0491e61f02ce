//! Signed single-use pass tokens.
//!
//! Wire format: `base64url(payload) "." base64url(signature)`, unpadded.
//! The payload is the compact JSON object `{"cid":..,"iat":..,"exp":..}`
//! with keys in that order, and the signature is HMAC-SHA256 over the
//! payload bytes.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::Timestamp;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenPayload {
    pub cid: String,
    pub iat: u64,
    pub exp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    BadSignature,
    Expired,
    Replayed,
}

#[derive(Clone)]
pub struct TokenSigner {
    key: [u8; 32],
}

impl std::fmt::Debug for TokenSigner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("TokenSigner { .. }")
    }
}

impl TokenSigner {
    pub fn new(key: [u8; 32]) -> Self {
        Self { key }
    }

    fn mac(&self) -> HmacSha256 {
        <HmacSha256 as KeyInit>::new_from_slice(&self.key).expect("HMAC takes any key length")
    }

    pub fn mint(&self, cid: &str, issued_at: Timestamp, expires_at: Timestamp) -> String {
        let payload = serde_json::to_vec(&TokenPayload {
            cid: cid.to_owned(),
            iat: issued_at.0,
            exp: expires_at.0,
        })
        .expect("payload serializes");
        let mut mac = self.mac();
        mac.update(&payload);
        let sig = mac.finalize().into_bytes();
        format!("{}.{}", URL_SAFE_NO_PAD.encode(&payload), URL_SAFE_NO_PAD.encode(sig))
    }

    /// Checks the signature and decodes the payload. Expiry and replay are
    /// the caller's business.
    pub fn open(&self, token: &str) -> Result<(TokenPayload, String), RejectReason> {
        let (payload_b64, sig_b64) = token.split_once('.').ok_or(RejectReason::BadSignature)?;
        let payload = URL_SAFE_NO_PAD
            .decode(payload_b64)
            .map_err(|_| RejectReason::BadSignature)?;
        let sig = URL_SAFE_NO_PAD
            .decode(sig_b64)
            .map_err(|_| RejectReason::BadSignature)?;
        let mut mac = self.mac();
        mac.update(&payload);
        mac.verify_slice(&sig).map_err(|_| RejectReason::BadSignature)?;
        let decoded: TokenPayload =
            serde_json::from_slice(&payload).map_err(|_| RejectReason::BadSignature)?;
        Ok((decoded, sig_b64.to_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mint_then_open() {
        let signer = TokenSigner::new([7; 32]);
        let token = signer.mint("abc", Timestamp(10), Timestamp(130));
        let (payload, _) = signer.open(&token).unwrap();
        assert_eq!(
            payload,
            TokenPayload {
                cid: "abc".into(),
                iat: 10,
                exp: 130
            }
        );
        let (p64, _) = token.split_once('.').unwrap();
        let raw = URL_SAFE_NO_PAD.decode(p64).unwrap();
        assert_eq!(raw, br#"{"cid":"abc","iat":10,"exp":130}"#);
    }

    #[test]
    fn wrong_key_or_garbage_is_a_bad_signature() {
        let token = TokenSigner::new([7; 32]).mint("abc", Timestamp(10), Timestamp(130));
        let other = TokenSigner::new([8; 32]);
        assert_eq!(other.open(&token).unwrap_err(), RejectReason::BadSignature);
        for junk in ["", ".", "abc", "abc.def", "!!.!!"] {
            assert_eq!(other.open(junk).unwrap_err(), RejectReason::BadSignature);
        }
    }
}
