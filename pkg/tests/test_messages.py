import pytest

from lib.Errors import MessageDecodeError
from lib.Group import Scalar
from lib.Messages import (
    HEADER_SIZE, Challenge, Commit, IdentityProof, MessageTag, Response, Verdict, VerdictReason, decode_message,
    encode_message, payload_size
)

def toy_element(toy, value):
    return toy.decode(value.to_bytes(4, "big"))

class TestEncoding:
    def test_commit_layout(self, toy):
        data = encode_message(Commit(toy_element(toy, 9)), toy)
        assert data == bytes([1, 0, 0, 0, 4, 0, 0, 0, 9])

    def test_verdict_layout(self, toy):
        data = encode_message(Verdict(False, VerdictReason.BAD_PROOF), toy)
        assert data == bytes([5, 0, 0, 0, 2, 0, 1])

    def test_payload_sizes(self, toy, p256):
        assert payload_size(MessageTag.IDENTITY_PROOF, toy) == 8
        assert payload_size(MessageTag.IDENTITY_PROOF, p256) == 65
        assert payload_size(MessageTag.CHALLENGE, p256) == 32

    def test_every_message_decodes(self, toy):
        messages = [
            Commit(toy_element(toy, 9)),
            Challenge(Scalar(4, toy.q)),
            Response(Scalar(6, toy.q)),
            IdentityProof(Scalar(7, toy.q), toy_element(toy, 4)),
            Verdict(True),
        ]
        for message in messages:
            data = encode_message(message, toy)
            assert len(data) == HEADER_SIZE + payload_size(message.tag, toy)
            assert decode_message(data, toy) == message

    def test_production_identity_proof(self, p256):
        proof = IdentityProof(Scalar(12345, p256.q), p256.exp(p256.generator, 99))
        assert decode_message(encode_message(proof, p256), p256) == proof

class TestDecodeErrors:
    def test_truncated_header(self, toy):
        with pytest.raises(MessageDecodeError):
            decode_message(b"\x01\x00", toy)

    def test_unknown_tag(self, toy):
        with pytest.raises(MessageDecodeError, match="tag"):
            decode_message(bytes([9, 0, 0, 0, 4, 0, 0, 0, 9]), toy)

    def test_length_mismatch(self, toy):
        with pytest.raises(MessageDecodeError):
            decode_message(bytes([1, 0, 0, 0, 5, 0, 0, 0, 9]), toy)

    def test_wrong_payload_size(self, toy):
        with pytest.raises(MessageDecodeError):
            decode_message(bytes([1, 0, 0, 0, 3, 0, 0, 9]), toy)

    def test_non_member(self, toy):
        with pytest.raises(MessageDecodeError, match="COMMIT"):
            decode_message(bytes([1, 0, 0, 0, 4, 0, 0, 0, 5]), toy)

    def test_unreduced_scalar(self, toy):
        with pytest.raises(MessageDecodeError):
            decode_message(bytes([3, 0, 0, 0, 4, 0, 0, 0, 11]), toy)

    def test_bad_verdict(self, toy):
        with pytest.raises(MessageDecodeError):
            decode_message(bytes([5, 0, 0, 0, 2, 2, 0]), toy)
        with pytest.raises(MessageDecodeError):
            decode_message(bytes([5, 0, 0, 0, 2, 0, 99]), toy)

    def test_not_a_message(self, toy):
        with pytest.raises(TypeError):
            encode_message("commit", toy)
