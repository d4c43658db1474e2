import pytest
from hypothesis import given, settings, strategies as st

from lib.Errors import GroupError
from lib.Group import (
    TOY_P, TOY_Q, CountingGroup, GroupId, OpCounts, P256Group, Scalar, frame, get_group, hash_h1_bytes, hash_h2
)

TOY_MEMBERS = [1, 2, 4, 8, 16, 9, 18, 13, 3, 6, 12]

toy_exponents = st.integers(min_value=0, max_value=TOY_Q - 1)

def element(group, value):
    return group.decode(value.to_bytes(group.element_size, "big"))

class TestToyGroup:
    def test_generator_powers(self, toy):
        assert [int.from_bytes(e.data, "big") for e in toy.members()] == TOY_MEMBERS

    def test_members_round_trip(self, toy):
        for member in toy.members():
            assert toy.decode(toy.encode(member)) == member

    def test_non_members_rejected(self, toy):
        for value in range(0, TOY_P + 1):
            if value in TOY_MEMBERS:
                continue
            with pytest.raises(GroupError):
                element(toy, value)

    def test_wrong_width_rejected(self, toy):
        with pytest.raises(GroupError):
            toy.decode(b"\x02")

    def test_vectors(self, toy):
        g = toy.generator
        assert toy.exp(g, Scalar(5, TOY_Q)) == element(toy, 9)
        assert toy.exp(g, 3) == element(toy, 8)
        assert toy.exp(g, 8) == element(toy, 3)
        assert toy.mul(element(toy, 9), element(toy, 2)) == element(toy, 18)
        assert toy.mul(element(toy, 13), element(toy, 4)) == element(toy, 6)

    def test_identity(self, toy):
        assert toy.is_identity(toy.exp(toy.generator, 0))
        assert toy.is_identity(toy.exp(toy.generator, TOY_Q))
        assert not toy.is_identity(toy.generator)

    @given(a=toy_exponents, b=toy_exponents)
    def test_exp_is_homomorphic(self, a, b):
        toy = get_group("toy")
        g = toy.generator
        assert toy.exp(g, (a + b) % TOY_Q) == toy.mul(toy.exp(g, a), toy.exp(g, b))

class TestScalar:
    def test_arithmetic_mod_q(self):
        a, b = Scalar(5, 11), Scalar(9, 11)
        assert a + b == Scalar(3, 11)
        assert a - b == Scalar(7, 11)
        assert a * b == Scalar(1, 11)
        assert -a == Scalar(6, 11)
        assert a + 3 * 4 == Scalar(6, 11)

    def test_inverse(self):
        for value in range(1, 11):
            s = Scalar(value, 11)
            assert s * s.inverse() == Scalar(1, 11)
        with pytest.raises(GroupError):
            Scalar(0, 11).inverse()

    def test_out_of_range(self):
        with pytest.raises(GroupError):
            Scalar(11, 11)

    def test_mixed_groups(self):
        with pytest.raises(GroupError):
            Scalar(1, 11) + Scalar(1, 13)

    def test_decode_scalar(self, toy):
        assert toy.decode_scalar(bytes([0, 0, 0, 10])) == Scalar(10, TOY_Q)
        with pytest.raises(GroupError):
            toy.decode_scalar(bytes([0, 0, 0, 11]))
        with pytest.raises(GroupError):
            toy.decode_scalar(b"\x01")

    def test_scalar_random_range(self, toy, rng):
        values = {toy.scalar_random(rng).value for _ in range(500)}
        assert values == set(range(TOY_Q))
        nonzero = {toy.scalar_random_nonzero(rng).value for _ in range(500)}
        assert nonzero == set(range(1, TOY_Q))

class TestHashes:
    def test_domain_separation(self):
        assert hash_h1_bytes(b"x") != hash_h2(b"x")

    def test_length_prefix(self):
        assert hash_h1_bytes(b"ab", b"c") != hash_h1_bytes(b"a", b"bc")
        assert frame(b"\x01", (b"ab",)) == b"\x01\x00\x00\x00\x02ab"

    def test_h1_reduces(self, toy, p256):
        assert 0 <= toy.h1(b"seed").value < TOY_Q
        assert toy.h1(b"seed") == toy.h1(b"seed")
        assert p256.h1(b"seed").value == int.from_bytes(hash_h1_bytes(b"seed"), "big") % p256.q

class TestP256Group:
    def test_encodings(self, p256):
        assert len(p256.encode(p256.generator)) == 33
        assert p256.encode(p256.identity) == P256Group.IDENTITY_ENCODING
        assert p256.is_identity(p256.decode(P256Group.IDENTITY_ENCODING))

    def test_order(self, p256):
        g = p256.generator
        assert p256.is_identity(p256.exp(g, 0))
        assert p256.is_identity(p256.mul(p256.exp(g, p256.q - 1), g))

    def test_decode_round_trip(self, p256):
        x = p256.exp(p256.generator, 123456789)
        decoded = p256.decode(x.data)
        assert decoded == x
        assert p256.mul(decoded, p256.generator) == p256.exp(p256.generator, 123456790)

    def test_rejects_bad_encoding(self, p256):
        with pytest.raises(GroupError):
            p256.decode(b"\x05" + bytes(32))
        with pytest.raises(GroupError):
            p256.decode(bytes(32))

    def test_cross_group_rejected(self, toy, p256):
        with pytest.raises(GroupError):
            p256.mul(toy.generator, p256.generator)

    @settings(max_examples=10, deadline=None)
    @given(a=st.integers(min_value=1, max_value=2 ** 64), b=st.integers(min_value=1, max_value=2 ** 64))
    def test_exp_is_homomorphic(self, a, b):
        p256 = get_group("production")
        g = p256.generator
        assert p256.exp(g, a + b) == p256.mul(p256.exp(g, a), p256.exp(g, b))

class TestCountingGroup:
    def test_counts_operations(self, toy):
        counting = CountingGroup(toy)
        x = counting.exp(counting.generator, 3)
        counting.mul(x, x)
        counting.h1(b"a")
        counting.h1_bytes(b"a")
        counting.h2(b"a")
        assert counting.ops == OpCounts(group_exp=1, group_mul=1, hash=3)

    def test_does_not_nest(self, toy):
        assert CountingGroup(CountingGroup(toy)).inner is toy

    def test_op_counts_arithmetic(self):
        a = OpCounts(3, 1, 1)
        assert a + a == OpCounts(6, 2, 2)
        assert (a + a) - a == a
        assert OpCounts.from_dict(a.to_dict()) == a

class TestGetGroup:
    def test_singletons(self):
        assert get_group("toy") is get_group(GroupId.TOY)

    def test_unknown(self):
        with pytest.raises(GroupError):
            get_group("rsa")

class TestToyProperties:
    def test_scalar_frequencies(self, toy, rng):
        draws = 10000
        counts = [0] * TOY_Q
        for _ in range(draws):
            counts[toy.scalar_random(rng).value] += 1
        mean = draws / TOY_Q
        sigma = (draws * (1 / TOY_Q) * (1 - 1 / TOY_Q)) ** 0.5
        assert all(abs(c - mean) < 5 * sigma for c in counts)

    def test_mul_laws(self, toy):
        members = toy.members()
        for a in members:
            assert toy.mul(toy.identity, a) == a
            for b in members:
                assert toy.mul(a, b) == toy.mul(b, a)
                for c in members:
                    assert toy.mul(toy.mul(a, b), c) == toy.mul(a, toy.mul(b, c))

    def test_scalar_oracle(self, rng):
        for _ in range(1000):
            a, b = rng.randrange(TOY_Q), rng.randrange(TOY_Q)
            assert (Scalar(a, TOY_Q) + Scalar(b, TOY_Q)).value == (a + b) % TOY_Q
            assert (Scalar(a, TOY_Q) - Scalar(b, TOY_Q)).value == (a - b) % TOY_Q
            assert (Scalar(a, TOY_Q) * Scalar(b, TOY_Q)).value == (a * b) % TOY_Q
