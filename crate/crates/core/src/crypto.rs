//! Hash, unique signature and VRF primitives.
//!
//! The simulation implementation is keyed pseudorandomness built on SHA-2.
//! A [`SimCrypto`] instance plays the role of the key-generation authority:
//! it derives every secret key from its public key under a master secret, so
//! verification can recompute what an honest prover would have produced while
//! callers that only hold public keys still cannot produce valid outputs.
//!
//! Sizes follow the deployed scheme the overhead numbers are based on:
//! 32-byte VRF outputs and 64-byte proofs and signatures.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::chain::{BlockHash, QuorumCertificate, Vote};

/// A 256-bit value in big-endian byte order.
///
/// Byte-wise lexicographic order coincides with numeric order, so digests
/// compare directly against mining and election targets.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Digest256(pub [u8; 32]);

// Digests are uniform, so a prefix is as good a map key as the whole value.
impl std::hash::Hash for Digest256 {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        state.write_u64(u64::from_le_bytes(self.0[..8].try_into().unwrap()));
    }
}

impl Digest256 {
    pub const ZERO: Digest256 = Digest256([0; 32]);
    pub const MAX: Digest256 = Digest256([0xff; 32]);

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn to_biguint(&self) -> BigUint {
        BigUint::from_bytes_be(&self.0)
    }

    /// Converts a value below 2^256 into a digest. Returns `None` on overflow.
    pub fn from_biguint(v: &BigUint) -> Option<Self> {
        let bytes = v.to_bytes_be();
        if bytes.len() > 32 {
            return None;
        }
        let mut out = [0u8; 32];
        out[32 - bytes.len()..].copy_from_slice(&bytes);
        Some(Digest256(out))
    }

    /// The digest as a fraction of 2^256, rounded to the nearest `f64`.
    pub fn to_unit_f64(&self) -> f64 {
        let hi = u64::from_be_bytes(self.0[..8].try_into().unwrap());
        let lo = u64::from_be_bytes(self.0[8..16].try_into().unwrap());
        (hi as f64 + lo as f64 / 18446744073709551616.0) / 18446744073709551616.0
    }

    pub fn short(&self) -> String {
        hex(&self.0[..4])
    }

    pub fn to_hex(&self) -> String {
        hex(&self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 64 {
            return None;
        }
        let mut out = [0u8; 32];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let pair = std::str::from_utf8(chunk).ok()?;
            out[i] = u8::from_str_radix(pair, 16).ok()?;
        }
        Some(Digest256(out))
    }
}

impl fmt::Debug for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest256({})", self.short())
    }
}

impl fmt::Display for Digest256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest256 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Digest256 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Digest256::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex digits"))
    }
}

fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// An exclusive upper bound in `[0, 2^256]`.
///
/// `Target::ALL` is 2^256 itself and admits every digest; it is what an
/// election target of `m = W` rounds to.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Target(Option<Digest256>);

impl Target {
    pub const ALL: Target = Target(None);
    pub const NONE: Target = Target(Some(Digest256::ZERO));

    pub fn below(bound: Digest256) -> Self {
        Target(Some(bound))
    }

    /// `floor(num / den * 2^256)`, saturating at `ALL`.
    pub fn from_ratio(num: u64, den: u64) -> Self {
        assert!(den > 0, "target ratio with zero denominator");
        let v = (BigUint::from(num) << 256u32) / BigUint::from(den);
        Self::from_biguint(&v)
    }

    /// `floor(2^bits)` for `bits <= 256`.
    pub fn pow2(bits: u32) -> Self {
        assert!(bits <= 256);
        Self::from_biguint(&(BigUint::from(1u8) << bits))
    }

    pub fn from_biguint(v: &BigUint) -> Self {
        match Digest256::from_biguint(v) {
            Some(d) => Target(Some(d)),
            None => Target::ALL,
        }
    }

    pub fn to_biguint(&self) -> BigUint {
        match self.0 {
            Some(d) => d.to_biguint(),
            None => BigUint::from(1u8) << 256u32,
        }
    }

    /// Whether `value < self`.
    pub fn admits(&self, value: &Digest256) -> bool {
        match &self.0 {
            None => true,
            Some(bound) => value < bound,
        }
    }

    /// The target as a fraction of 2^256.
    pub fn ratio(&self) -> f64 {
        match &self.0 {
            None => 1.0,
            Some(d) => d.to_unit_f64(),
        }
    }

    pub fn bound(&self) -> Option<Digest256> {
        self.0
    }

    /// Multiplies the target by `num / den`, saturating at `ALL`.
    pub fn scale(&self, num: u64, den: u64) -> Self {
        assert!(den > 0);
        Self::from_biguint(&(self.to_biguint() * BigUint::from(num) / BigUint::from(den)))
    }
}

impl PartialOrd for Target {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Target {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.0, &other.0) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Greater,
            (Some(_), None) => Ordering::Less,
            (Some(a), Some(b)) => a.cmp(b),
        }
    }
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            None => f.write_str("Target(2^256)"),
            Some(d) => write!(f, "Target({:.6e})", d.to_unit_f64()),
        }
    }
}

/// `H(data)`: SHA-256.
pub fn hash(data: &[u8]) -> Digest256 {
    Digest256(Sha256::digest(data).into())
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash_parts(parts: &[&[u8]]) -> Digest256 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    Digest256(h.finalize().into())
}

/// 64 bytes as two domain-separated SHA-256 streams.
fn hash64_parts(tag: &[u8], key: &[u8], msg: &[u8]) -> [u8; 64] {
    let mut out = [0u8; 64];
    out[..32].copy_from_slice(&hash_parts(&[tag, b"/0", key, msg]).0);
    out[32..].copy_from_slice(&hash_parts(&[tag, b"/1", key, msg]).0);
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PublicKey(pub Digest256);

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pk:{}", self.0.short())
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SecretKey([u8; 32]);

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub pk: PublicKey,
    pub sk: SecretKey,
}

/// The election pair `(pk, sk)` and the reward pair used to receive payments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParticipantKeys {
    pub election: KeyPair,
    pub reward: KeyPair,
}

pub const VRF_OUTPUT_LEN: usize = 32;
pub const VRF_PROOF_LEN: usize = 64;
pub const SIGNATURE_LEN: usize = 64;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct VrfProof(pub [u8; VRF_PROOF_LEN]);

impl fmt::Debug for VrfProof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VrfProof({})", hex(&self.0[..4]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct VrfOutput {
    pub y: Digest256,
    pub proof: VrfProof,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; SIGNATURE_LEN]);

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({})", hex(&self.0[..4]))
    }
}

const TAG_PK: &[u8] = b"crystal/pk";
const TAG_SK: &[u8] = b"crystal/sk";
const TAG_VRF_Y: &[u8] = b"crystal/vrf/y";
const TAG_VRF_PI: &[u8] = b"crystal/vrf/pi";
const TAG_SIG: &[u8] = b"crystal/sig";

/// VRF output for `x` under `sk`. Deterministic in `(sk, x)`.
pub fn vrf_prove(sk: &SecretKey, x: &[u8]) -> VrfOutput {
    VrfOutput { y: vrf_output(sk, x), proof: vrf_proof(sk, x) }
}

/// Only the `y` half of [`vrf_prove`]; the proof stream is independent, so a
/// caller that discards losing draws can skip it.
pub fn vrf_output(sk: &SecretKey, x: &[u8]) -> Digest256 {
    hash_parts(&[TAG_VRF_Y, &sk.0, x])
}

fn vrf_proof(sk: &SecretKey, x: &[u8]) -> VrfProof {
    VrfProof(hash64_parts(TAG_VRF_PI, &sk.0, x))
}

pub fn sign(sk: &SecretKey, msg: &[u8]) -> Signature {
    Signature(hash64_parts(TAG_SIG, &sk.0, msg))
}

/// Verification side of the VRF and signature schemes.
pub trait Verifier {
    fn vrf_verify(&self, pk: &PublicKey, x: &[u8], out: &VrfOutput) -> bool;
    fn verify(&self, pk: &PublicKey, sig: &Signature, msg: &[u8]) -> bool;

    /// Merkle root over a certificate's votes. Implementations may memoize.
    fn qc_root(&self, qc: &QuorumCertificate) -> Digest256 {
        qc.root()
    }

    /// Hint that the caller itself produced `out` with the secret key of `pk`.
    /// Memoizing verifiers may remember it; others ignore it.
    fn vouch(&self, _pk: &PublicKey, _x: &[u8], _out: &VrfOutput) {}

    /// Hint that the caller itself computed `root` over `qc`.
    fn vouch_root(&self, _qc: &QuorumCertificate, _root: Digest256) {}
}

/// Deterministic simulation crypto under a master secret.
#[derive(Clone)]
pub struct SimCrypto {
    master: [u8; 32],
}

impl fmt::Debug for SimCrypto {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SimCrypto(..)")
    }
}

impl SimCrypto {
    pub fn new(seed: u64) -> Self {
        SimCrypto { master: hash_parts(&[b"crystal/master", &seed.to_be_bytes()]).0 }
    }

    /// Generates the key pair labelled `label`. Same label, same pair.
    pub fn keypair(&self, label: &[u8]) -> KeyPair {
        let pk = PublicKey(hash_parts(&[TAG_PK, &self.master, label]));
        KeyPair { pk, sk: self.secret_for(&pk) }
    }

    /// Both key pairs of participant `index`.
    pub fn participant(&self, index: u32) -> ParticipantKeys {
        let i = index.to_be_bytes();
        ParticipantKeys {
            election: self.keypair(&[b"election/".as_slice(), &i].concat()),
            reward: self.keypair(&[b"reward/".as_slice(), &i].concat()),
        }
    }

    fn secret_for(&self, pk: &PublicKey) -> SecretKey {
        SecretKey(hash_parts(&[TAG_SK, &self.master, &pk.0 .0]).0)
    }
}

impl Verifier for SimCrypto {
    fn vrf_verify(&self, pk: &PublicKey, x: &[u8], out: &VrfOutput) -> bool {
        let sk = self.secret_for(pk);
        vrf_output(&sk, x) == out.y && vrf_proof(&sk, x) == out.proof
    }

    fn verify(&self, pk: &PublicKey, sig: &Signature, msg: &[u8]) -> bool {
        sign(&self.secret_for(pk), msg) == *sig
    }
}

/// Memoizes successful VRF verifications and certificate roots of an inner
/// verifier.
///
/// In a simulation every node re-verifies the same votes, once on receipt and
/// again inside each certificate that embeds them. Only positive results are
/// cached and a hit requires the full `(pk, x, y, proof)` tuple to match, so a
/// forged output can never ride on a genuine one. Root hits likewise compare
/// the whole vote list.
#[derive(Debug)]
pub struct CachingVerifier<V> {
    inner: V,
    accepted: RefCell<HashMap<(PublicKey, Digest256), (Box<[u8]>, VrfProof)>>,
    roots: RefCell<HashMap<(BlockHash, usize), Vec<(Vec<Vote>, Digest256)>>>,
    limit: usize,
}

impl<V: Verifier> CachingVerifier<V> {
    pub fn new(inner: V, limit: usize) -> Self {
        CachingVerifier { inner, accepted: RefCell::default(), roots: RefCell::default(), limit }
    }

    pub fn inner(&self) -> &V {
        &self.inner
    }
}

impl<V: Verifier> Verifier for CachingVerifier<V> {
    fn vrf_verify(&self, pk: &PublicKey, x: &[u8], out: &VrfOutput) -> bool {
        let key = (*pk, out.y);
        if let Some((cx, proof)) = self.accepted.borrow().get(&key) {
            if **cx == *x && *proof == out.proof {
                return true;
            }
        }
        let ok = self.inner.vrf_verify(pk, x, out);
        if ok {
            let mut map = self.accepted.borrow_mut();
            if map.len() >= self.limit {
                map.clear();
            }
            map.insert(key, (x.into(), out.proof));
        }
        ok
    }

    fn verify(&self, pk: &PublicKey, sig: &Signature, msg: &[u8]) -> bool {
        self.inner.verify(pk, sig, msg)
    }

    fn qc_root(&self, qc: &QuorumCertificate) -> Digest256 {
        let key = (qc.block_hash, qc.votes.len());
        if let Some(seen) = self.roots.borrow().get(&key) {
            if let Some((_, r)) = seen.iter().find(|(v, _)| *v == qc.votes) {
                return *r;
            }
        }
        let r = self.inner.qc_root(qc);
        self.vouch_root(qc, r);
        r
    }

    fn vouch(&self, pk: &PublicKey, x: &[u8], out: &VrfOutput) {
        let mut map = self.accepted.borrow_mut();
        if map.len() >= self.limit {
            map.clear();
        }
        map.insert((*pk, out.y), (x.into(), out.proof));
    }

    fn vouch_root(&self, qc: &QuorumCertificate, root: Digest256) {
        let mut map = self.roots.borrow_mut();
        // Certificates are far bigger than VRF entries.
        if map.len() >= (self.limit / 64).max(1) {
            map.clear();
        }
        let seen = map.entry((qc.block_hash, qc.votes.len())).or_default();
        if !seen.iter().any(|(v, _)| *v == qc.votes) {
            seen.push((qc.votes.clone(), root));
        }
    }
}

impl<V: Verifier + ?Sized> Verifier for &V {
    fn vrf_verify(&self, pk: &PublicKey, x: &[u8], out: &VrfOutput) -> bool {
        (**self).vrf_verify(pk, x, out)
    }

    fn verify(&self, pk: &PublicKey, sig: &Signature, msg: &[u8]) -> bool {
        (**self).verify(pk, sig, msg)
    }

    fn qc_root(&self, qc: &QuorumCertificate) -> Digest256 {
        (**self).qc_root(qc)
    }

    fn vouch(&self, pk: &PublicKey, x: &[u8], out: &VrfOutput) {
        (**self).vouch(pk, x, out)
    }

    fn vouch_root(&self, qc: &QuorumCertificate, root: Digest256) {
        (**self).vouch_root(qc, root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn crypto() -> SimCrypto {
        SimCrypto::new(7)
    }

    #[test]
    fn hash_is_deterministic() {
        assert_eq!(hash(b"abc"), hash(b"abc"));
        assert_eq!(hash_parts(&[b"a", b"bc"]), hash(b"abc"));
    }

    #[test]
    fn hash_no_collision_with_zero_suffix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut buf = [0u8; 17];
        for _ in 0..1_000_000 {
            rng.fill(&mut buf[..16]);
            assert_ne!(hash(&buf[..16]), hash(&buf));
        }
    }

    #[test]
    fn hash_top_bit_is_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let mut ones = 0;
        for _ in 0..n {
            let x: [u8; 16] = rng.random();
            if hash(&x).0[0] & 0x80 != 0 {
                ones += 1;
            }
        }
        let frac = ones as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.01, "top-bit frequency {frac}");
    }

    #[test]
    fn vrf_roundtrip_and_determinism() {
        let c = crypto();
        let kp = c.keypair(b"alice");
        let a = vrf_prove(&kp.sk, b"input");
        assert_eq!(a, vrf_prove(&kp.sk, b"input"));
        assert!(c.vrf_verify(&kp.pk, b"input", &a));
        assert_eq!(kp, c.keypair(b"alice"));
    }

    #[test]
    fn vrf_rejects_tampered_output() {
        let c = crypto();
        let kp = c.keypair(b"alice");
        let mut out = vrf_prove(&kp.sk, b"x");
        let v = out.y.to_biguint() + 1u8;
        out.y = Digest256::from_biguint(&v).unwrap();
        assert!(!c.vrf_verify(&kp.pk, b"x", &out));
    }

    #[test]
    fn vrf_proof_bound_to_input() {
        // every (prover input, verifier input) pair over a small domain
        let c = crypto();
        let kp = c.keypair(b"bob");
        let inputs: Vec<[u8; 1]> = (0u8..32).map(|b| [b]).collect();
        for a in &inputs {
            let out = vrf_prove(&kp.sk, a);
            for b in &inputs {
                assert_eq!(c.vrf_verify(&kp.pk, b, &out), a == b);
            }
        }
    }

    #[test]
    fn vrf_wrong_key_rejected() {
        let c = crypto();
        let alice = c.keypair(b"alice");
        let mallory = c.keypair(b"mallory");
        let forged = vrf_prove(&mallory.sk, b"x");
        assert!(!c.vrf_verify(&alice.pk, b"x", &forged));
    }

    #[test]
    fn vrf_election_rate_matches_target() {
        let c = crypto();
        let d = Target::from_ratio(500, 3024);
        let n = 100_000u32;
        let mut hits = 0u32;
        for i in 0..n {
            let kp = c.keypair(&i.to_be_bytes());
            if d.admits(&vrf_output(&kp.sk, b"fixed block||1")) {
                hits += 1;
            }
        }
        let p = 500.0 / 3024.0;
        let frac = hits as f64 / n as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((frac - p).abs() < 0.004, "rate {frac}");
        assert!((frac - p).abs() < 3.0 * sigma, "rate {frac} outside 3 sigma");
    }

    #[test]
    fn signatures() {
        let c = crypto();
        let a = c.keypair(b"a");
        let b = c.keypair(b"b");
        let sig = sign(&a.sk, b"m");
        assert!(c.verify(&a.pk, &sig, b"m"));
        assert!(!c.verify(&a.pk, &sig, b"m2"));
        assert!(!c.verify(&b.pk, &sig, b"m"));
    }

    #[test]
    fn caching_verifier_never_caches_rejections() {
        let c = crypto();
        let kp = c.keypair(b"alice");
        let cv = CachingVerifier::new(c.clone(), 4);
        let good = vrf_prove(&kp.sk, b"x");
        let mut bad = good;
        bad.proof.0[0] ^= 1;
        for _ in 0..3 {
            assert!(cv.vrf_verify(&kp.pk, b"x", &good));
            assert!(!cv.vrf_verify(&kp.pk, b"x", &bad));
        }
        for i in 0..10u8 {
            let out = vrf_prove(&kp.sk, &[i]);
            assert!(cv.vrf_verify(&kp.pk, &[i], &out));
        }
        assert!(cv.accepted.borrow().len() <= 4);
    }

    #[test]
    fn target_extremes() {
        let y = Digest256::MAX;
        assert!(Target::ALL.admits(&y));
        assert!(!Target::NONE.admits(&Digest256::ZERO));
        assert_eq!(Target::from_ratio(3024, 3024), Target::ALL);
        assert_eq!(Target::from_ratio(0, 3024), Target::NONE);
        assert!(Target::from_ratio(1, 2) < Target::ALL);
        assert_eq!(Target::from_ratio(1, 2), Target::pow2(255));
        assert!((Target::from_ratio(500, 3024).ratio() - 500.0 / 3024.0).abs() < 1e-15);
        assert_eq!(Target::pow2(254).scale(2, 1), Target::pow2(255));
        assert_eq!(Target::pow2(255).scale(4, 1), Target::ALL);
    }
}
