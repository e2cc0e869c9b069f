import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedsign.errors import KeyMismatch, MagnitudeOverflow, PlaintextOutOfRange
from fedsign.he import (
    Ciphertext,
    FixedPointCodec,
    add_cipher,
    decrypt,
    encrypt,
    keygen,
    keypair_from_json,
    keypair_to_json,
)

# 128-bit keys keep unit tests fast; the acceptance suite exercises 512-bit.
TEST_BITS = 128


@pytest.fixture(scope="module")
def kp():
    return keygen(TEST_BITS, np.random.default_rng(1))


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(2)


class TestKeygen:
    def test_modulus_size(self):
        kp = keygen(512, np.random.default_rng(0))
        assert abs(kp.public.n.bit_length() - 512) <= 1

    def test_distinct_primes_invariant(self, kp):
        # lambda < n-1 iff p != q for this construction
        assert kp.secret.lam < kp.public.n - 1

    def test_seeded_determinism(self):
        a = keygen(TEST_BITS, np.random.default_rng(3))
        b = keygen(TEST_BITS, np.random.default_rng(3))
        assert a.public.n == b.public.n

    def test_odd_bits_rejected(self):
        with pytest.raises(ValueError):
            keygen(129, np.random.default_rng(0))


class TestEncryptDecrypt:
    def test_zero_round_trip(self, kp, rng):
        assert decrypt(kp.secret, encrypt(kp.public, 0, rng)) == 0

    def test_random_round_trips(self, kp, rng):
        for m in rng.integers(0, 2**60, size=50):
            m = int(m) % kp.public.n
            assert decrypt(kp.secret, encrypt(kp.public, m, rng)) == m

    def test_probabilistic_encryption(self, kp, rng):
        a = encrypt(kp.public, 7, rng)
        b = encrypt(kp.public, 7, rng)
        assert a.value != b.value
        assert decrypt(kp.secret, a) == decrypt(kp.secret, b) == 7

    def test_plaintext_out_of_range(self, kp, rng):
        with pytest.raises(PlaintextOutOfRange):
            encrypt(kp.public, kp.public.n, rng)
        with pytest.raises(PlaintextOutOfRange):
            encrypt(kp.public, -1, rng)

    def test_key_mismatch(self, kp, rng):
        other = keygen(TEST_BITS, np.random.default_rng(99))
        c = encrypt(other.public, 5, rng)
        with pytest.raises(KeyMismatch):
            decrypt(kp.secret, c)


class TestHomomorphism:
    def test_two_plus_three(self, kp, rng):
        c = add_cipher(kp.public, encrypt(kp.public, 2, rng), encrypt(kp.public, 3, rng))
        assert decrypt(kp.secret, c) == 5

    def test_additive_identity(self, kp, rng):
        c = add_cipher(kp.public, encrypt(kp.public, 41, rng), encrypt(kp.public, 0, rng))
        assert decrypt(kp.secret, c) == 41

    def test_sum_of_ten_ones(self, kp, rng):
        acc = encrypt(kp.public, 1, rng)
        for _ in range(9):
            acc = add_cipher(kp.public, acc, encrypt(kp.public, 1, rng))
        assert decrypt(kp.secret, acc) == 10

    @given(a=st.integers(0, 2**60), b=st.integers(0, 2**60))
    @settings(max_examples=30, deadline=None)
    def test_sum_mod_n_property(self, kp, a, b):
        local_rng = np.random.default_rng(a ^ (b << 1) ^ 0xABCD)
        c = add_cipher(kp.public, encrypt(kp.public, a, local_rng),
                       encrypt(kp.public, b, local_rng))
        assert decrypt(kp.secret, c) == (a + b) % kp.public.n

    def test_mismatched_ciphertext_keys(self, kp, rng):
        other = keygen(TEST_BITS, np.random.default_rng(7))
        with pytest.raises(KeyMismatch):
            add_cipher(kp.public, encrypt(kp.public, 1, rng), encrypt(other.public, 1, rng))


class TestFixedPointCodec:
    def codec(self, kp):
        return FixedPointCodec(modulus=kp.public.n)

    def test_zero(self, kp):
        codec = self.codec(kp)
        assert codec.encode(0.0) == 0
        assert codec.decode(0) == 0.0

    def test_negative_one_wraps(self, kp):
        codec = self.codec(kp)
        m = codec.encode(-1.0)
        assert m == kp.public.n - 65536
        assert codec.decode(m) == -1.0

    def test_quantization_error_bound(self, kp):
        codec = self.codec(kp)
        for x in np.linspace(-3.3, 3.3, 101):
            assert abs(codec.decode(codec.encode(x)) - x) <= 1.0 / (2 * codec.scale)

    def test_homomorphic_signed_cancellation(self, kp, rng):
        codec = self.codec(kp)
        c = add_cipher(
            kp.public,
            encrypt(kp.public, codec.encode(1.5), rng),
            encrypt(kp.public, codec.encode(-1.5), rng),
        )
        assert codec.decode(decrypt(kp.secret, c)) == 0.0

    def test_homomorphic_sum_fidelity(self, kp, rng):
        codec = self.codec(kp)
        values = np.random.default_rng(8).uniform(-10, 10, size=8)
        acc = encrypt(kp.public, codec.encode(values[0]), rng)
        for x in values[1:]:
            acc = add_cipher(kp.public, acc, encrypt(kp.public, codec.encode(x), rng))
        got = codec.decode(decrypt(kp.secret, acc))
        assert abs(got - values.sum()) <= len(values) / (2 * codec.scale)

    def test_overflow(self, kp):
        with pytest.raises(MagnitudeOverflow):
            self.codec(kp).encode(float(kp.public.n))

    def test_non_power_of_two_scale_rejected(self):
        with pytest.raises(ValueError):
            FixedPointCodec(modulus=101, scale=100)


def test_keypair_json_round_trip(kp, rng):
    back = keypair_from_json(keypair_to_json(kp))
    assert back.public.n == kp.public.n
    assert decrypt(back.secret, encrypt(back.public, 123, rng)) == 123
