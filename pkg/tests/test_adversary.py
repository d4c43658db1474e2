import random

import pytest

from lib.Adversary import (
    AdversaryKind, AttackContext, attack_impersonate_twin, attack_kci, attack_mitm_tamper, attack_replay,
    credential_changed, expected_messages
)
from lib.Channel import VirtualChannel
from lib.Errors import AttackError
from lib.Group import Scalar, get_group
from lib.Identity import derive_entity_keys, provision_identity, twin_keygen
from lib.Messages import Challenge, Commit, IdentityProof, VerdictReason, encode_message
from lib.Protocol import Phase, PhysicalSession, SessionMode, TwinSession
from lib.Registry import mint_record
from support import ScriptedRng

class Binding:
    def __init__(self, group_id="production", mode=SessionMode.INTERACTIVE, fresh_challenge=True):
        self.group = get_group(group_id)
        self.entity = derive_entity_keys(provision_identity("tl-001"), self.group)
        self.twin = twin_keygen(self.group, random.Random(42))
        self.record = mint_record(self.entity.pk_p, self.twin.pk_d, 1700000000, self.group)
        self.mode = mode
        self.fresh_challenge = fresh_challenge

    def twin_session(self, rng):
        return TwinSession(self.group, self.twin, self.record.pk_p, self.record.zeta, rng, self.mode)

    def physical_session(self, rng):
        return PhysicalSession(
            self.group, self.entity, self.record.pk_d, self.record.zeta, rng, self.mode, self.fresh_challenge
        )

    def context(self, kind, recorded=(), sk_d=None):
        return AttackContext(kind, self.record.pk_p, self.record.pk_d, self.record.zeta, recorded, sk_d)

    def record_session(self, rng):
        p = self.physical_session(rng)
        VirtualChannel(self.group).run(self.twin_session(rng), p)
        return p.transcript

class TestContext:
    def test_only_kci_holds_sk_d(self):
        b = Binding("toy")
        with pytest.raises(AttackError):
            b.context(AdversaryKind.REPLAY, sk_d=b.twin.sk_d)

    def test_replay_needs_transcripts(self, rng):
        b = Binding("toy")
        with pytest.raises(AttackError):
            attack_replay(b.context(AdversaryKind.REPLAY), b.physical_session(rng), rng)

    def test_kci_needs_sk_d(self, rng):
        b = Binding("toy")
        with pytest.raises(AttackError):
            attack_kci(b.context(AdversaryKind.KCI_IMPERSONATE_PHYSICAL), rng, b.twin_session(rng))

class TestReplay:
    def test_rejected_with_fresh_challenge(self, rng):
        b = Binding()
        ctx = b.context(AdversaryKind.REPLAY, (b.record_session(rng),))
        target = b.physical_session(rng)
        outcome = attack_replay(ctx, target, rng)
        assert not outcome.accepted
        assert outcome.verdict.reason is VerdictReason.BAD_PROOF
        assert target.key is None

    def test_literal_challenge_is_replayable(self, rng):
        b = Binding(fresh_challenge=False)
        ctx = b.context(AdversaryKind.REPLAY, (b.record_session(rng),))
        assert attack_replay(ctx, b.physical_session(rng), rng).accepted

    def test_fiat_shamir_is_replayable(self, rng):
        b = Binding(mode=SessionMode.FIAT_SHAMIR)
        ctx = b.context(AdversaryKind.REPLAY, (b.record_session(rng),))
        assert attack_replay(ctx, b.physical_session(rng), rng).accepted

class TestImpersonation:
    def test_blind_twin_rejected(self, rng):
        b = Binding()
        for _ in range(5):
            outcome = attack_impersonate_twin(b.context(AdversaryKind.IMPERSONATE_TWIN), rng, b.physical_session(rng))
            assert not outcome.accepted
            assert outcome.verdict.reason is VerdictReason.BAD_PROOF

    def test_kci_rejected(self, rng):
        b = Binding()
        ctx = b.context(AdversaryKind.KCI_IMPERSONATE_PHYSICAL, sk_d=b.twin.sk_d)
        for _ in range(5):
            target = b.twin_session(rng)
            outcome = attack_kci(ctx, rng, target)
            assert not outcome.accepted
            assert outcome.verdict.reason is VerdictReason.BAD_IDENTITY
            assert target.key is None

    def test_kci_toy_guess(self):
        b = Binding("toy")
        ctx = b.context(AdversaryKind.KCI_IMPERSONATE_PHYSICAL, sk_d=b.twin.sk_d)
        h_sp = b.entity.h_sp.value
        wrong = (h_sp + 1) % b.group.q
        assert attack_kci(ctx, ScriptedRng(h_sp, 2), b.twin_session(random.Random(1))).accepted
        assert not attack_kci(ctx, ScriptedRng(wrong, 2), b.twin_session(random.Random(1))).accepted

    def test_kci_toy_exhaustive(self, toy, toy_entity, toy_twin, toy_record):
        ctx = AttackContext(
            AdversaryKind.KCI_IMPERSONATE_PHYSICAL, toy_record.pk_p, toy_record.pk_d, toy_record.zeta,
            compromised_sk_d=toy_twin.sk_d
        )
        accepted = set()
        for guess in range(toy.q):
            target = TwinSession(toy, toy_twin, toy_record.pk_p, toy_record.zeta, random.Random(1))
            outcome = attack_kci(ctx, ScriptedRng(guess, 2), target)
            if outcome.accepted:
                accepted.add(guess)
            else:
                assert outcome.verdict.reason is VerdictReason.BAD_IDENTITY
                assert target.key is None
        assert accepted == {toy_entity.h_sp.value} == {7}

class TestMitm:
    def test_expected_messages(self):
        assert expected_messages(SessionMode.INTERACTIVE) == 5
        assert expected_messages(SessionMode.FIAT_SHAMIR) == 4

    def test_credential_changed(self, toy):
        a = encode_message(Challenge(Scalar(1, toy.q)), toy)
        b = encode_message(Challenge(Scalar(3, toy.q)), toy)
        assert credential_changed(a, b, toy)
        assert not credential_changed(a, a, toy)
        assert not credential_changed(a, a[:-1], toy)
        g = toy.generator
        proof = encode_message(IdentityProof(Scalar(7, toy.q), g), toy)
        other_ephemeral = encode_message(IdentityProof(Scalar(7, toy.q), toy.exp(g, 2)), toy)
        assert not credential_changed(proof, other_ephemeral, toy)
        assert credential_changed(encode_message(Commit(g), toy), encode_message(Commit(toy.exp(g, 2)), toy), toy)

    def test_tampering_never_accepted(self):
        b = Binding()
        ctx = b.context(AdversaryKind.MITM_TAMPER)
        for seed in range(10):
            rng = random.Random(seed)
            twin, physical = b.twin_session(rng), b.physical_session(rng)
            outcome = attack_mitm_tamper(ctx, rng, twin, physical)
            assert outcome.tampered is not None
            assert not outcome.accepted
            if outcome.keys_agree is False:
                assert outcome.tampered.tag.name == "IDENTITY_PROOF"
            if outcome.tampered.tag.name in ("COMMIT", "CHALLENGE", "RESPONSE"):
                assert physical.phase is Phase.FAILED

    @pytest.mark.parametrize("index, tag", [(2, "RESPONSE"), (3, "IDENTITY_PROOF")])
    def test_toy_credential_flips_exhaustive(self, toy, toy_entity, toy_twin, toy_record, index, tag):
        ctx = AttackContext(AdversaryKind.MITM_TAMPER, toy_record.pk_p, toy_record.pk_d, toy_record.zeta)
        # z and h_sp are the first scalar of their payload
        for seed in range(30):
            for bit in range(8 * toy.scalar_size):
                twin = TwinSession(toy, toy_twin, toy_record.pk_p, toy_record.zeta, random.Random(seed))
                physical = PhysicalSession(toy, toy_entity, toy_record.pk_d, toy_record.zeta, random.Random(seed + 100))
                outcome = attack_mitm_tamper(ctx, ScriptedRng(index, bit), twin, physical)
                assert outcome.tampered.tag.name == tag
                assert not outcome.accepted
                assert twin.phase is Phase.FAILED
                assert physical.phase is Phase.FAILED
                assert twin.key is None and physical.key is None
