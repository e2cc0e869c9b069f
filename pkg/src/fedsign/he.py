"""Paillier cryptosystem (g = n + 1 variant) with signed fixed-point encoding.

Correctness-grade only: key sizes default to 512 bits for simulation speed
and no constant-time or side-channel guarantees are made. The additive
homomorphism (ciphertext product decrypts to plaintext sum mod n) is what
the secure aggregation pipeline relies on.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import gmpy2
import numpy as np

from .errors import KeyMismatch, MagnitudeOverflow, PlaintextOutOfRange

DEFAULT_KEY_BITS = 512
DEFAULT_FIXED_POINT_SCALE = 1 << 16


@dataclass(frozen=True)
class PaillierPublicKey:
    n: int
    key_id: str

    @property
    def g(self) -> int:
        return self.n + 1

    @property
    def nsquare(self) -> int:
        return self.n * self.n


@dataclass(frozen=True)
class PaillierSecretKey:
    lam: int  # lcm(p-1, q-1)
    mu: int   # lam^-1 mod n
    public: PaillierPublicKey


@dataclass(frozen=True)
class PaillierKeypair:
    public: PaillierPublicKey
    secret: PaillierSecretKey


@dataclass(frozen=True)
class Ciphertext:
    value: int
    key_id: str


def _key_id(n: int) -> str:
    return hashlib.sha256(str(n).encode()).hexdigest()[:16]


def _random_int(rng: np.random.Generator, bits: int) -> int:
    n_bytes = (bits + 7) // 8
    return int.from_bytes(rng.bytes(n_bytes), "big") >> (n_bytes * 8 - bits)


def _random_prime(rng: np.random.Generator, bits: int) -> int:
    # Top two bits set so p*q reaches the full target width.
    candidate = _random_int(rng, bits) | (0b11 << (bits - 2)) | 1
    return int(gmpy2.next_prime(candidate))


def keygen(bits: int = DEFAULT_KEY_BITS, rng: np.random.Generator | None = None) -> PaillierKeypair:
    if bits < 16 or bits % 2 != 0:
        raise ValueError("bits must be an even integer >= 16")
    if rng is None:
        rng = np.random.default_rng()
    while True:
        p = _random_prime(rng, bits // 2)
        q = _random_prime(rng, bits // 2)
        if p == q:
            continue
        n = p * q
        if gmpy2.gcd(n, (p - 1) * (q - 1)) != 1:
            continue
        lam = int(gmpy2.lcm(p - 1, q - 1))
        mu = int(gmpy2.invert(lam, n))
        public = PaillierPublicKey(n=n, key_id=_key_id(n))
        return PaillierKeypair(public, PaillierSecretKey(lam=lam, mu=mu, public=public))


def encrypt(pk: PaillierPublicKey, m: int, rng: np.random.Generator) -> Ciphertext:
    """c = (1+n)^m * r^n mod n^2 with fresh random r coprime to n."""
    n = pk.n
    if not 0 <= m < n:
        raise PlaintextOutOfRange(f"plaintext must lie in [0, n); got {m}")
    n2 = pk.nsquare
    while True:
        r = _random_int(rng, n.bit_length()) % (n - 1) + 1
        if gmpy2.gcd(r, n) == 1:
            break
    # (1+n)^m mod n^2 == 1 + m*n mod n^2, saving one exponentiation.
    c = (1 + m * n) * gmpy2.powmod(r, n, n2) % n2
    return Ciphertext(value=int(c), key_id=pk.key_id)


def add_cipher(pk: PaillierPublicKey, a: Ciphertext, b: Ciphertext) -> Ciphertext:
    if a.key_id != pk.key_id or b.key_id != pk.key_id:
        raise KeyMismatch("ciphertexts bound to a different key")
    return Ciphertext(value=a.value * b.value % pk.nsquare, key_id=pk.key_id)


def decrypt(sk: PaillierSecretKey, c: Ciphertext) -> int:
    if c.key_id != sk.public.key_id:
        raise KeyMismatch("ciphertext bound to a different key")
    n = sk.public.n
    x = gmpy2.powmod(c.value, sk.lam, sk.public.nsquare)
    return int((x - 1) // n * sk.mu % n)


@dataclass(frozen=True)
class FixedPointCodec:
    """Signed fixed-point reals in [0, n) via a two's-complement-style wrap."""

    modulus: int
    scale: int = DEFAULT_FIXED_POINT_SCALE

    def __post_init__(self):
        if self.scale < 2 or self.scale & (self.scale - 1):
            raise ValueError("scale must be a power of two >= 2")

    def encode(self, x: float) -> int:
        q = round(float(x) * self.scale)
        if abs(q) >= self.modulus // 2:
            raise MagnitudeOverflow(f"|{x}| too large for scale {self.scale} mod n")
        return q % self.modulus

    def decode(self, m: int) -> float:
        if not 0 <= m < self.modulus:
            raise PlaintextOutOfRange(f"encoded value {m} outside [0, n)")
        if m > self.modulus // 2:
            m -= self.modulus
        return m / self.scale


# --- key fixture serialization (decimal big-int strings) ---

def keypair_to_json(kp: PaillierKeypair) -> str:
    return json.dumps(
        {"n": str(kp.public.n), "lambda": str(kp.secret.lam), "mu": str(kp.secret.mu)},
        sort_keys=True,
    )


def keypair_from_json(blob: str) -> PaillierKeypair:
    obj = json.loads(blob)
    n = int(obj["n"])
    public = PaillierPublicKey(n=n, key_id=_key_id(n))
    secret = PaillierSecretKey(lam=int(obj["lambda"]), mu=int(obj["mu"]), public=public)
    return PaillierKeypair(public, secret)
