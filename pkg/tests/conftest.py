import random

import pytest

from lib.Group import Scalar, get_group
from lib.Identity import entity_keys_from_scalar, twin_keys_from_scalar
from lib.Registry import mint_record

# Fixed toy vector: h_sp = 7, sk_d = 3
TOY_H_SP = 7
TOY_SK_D = 3
TOY_T = 1700000000

@pytest.fixture
def toy():
    return get_group("toy")

@pytest.fixture
def p256():
    return get_group("production")

@pytest.fixture
def rng():
    return random.Random(1234)

@pytest.fixture
def toy_entity(toy):
    return entity_keys_from_scalar(Scalar(TOY_H_SP, toy.q), toy)

@pytest.fixture
def toy_twin(toy):
    return twin_keys_from_scalar(Scalar(TOY_SK_D, toy.q), toy)

@pytest.fixture
def toy_record(toy, toy_entity, toy_twin):
    return mint_record(toy_entity.pk_p, toy_twin.pk_d, TOY_T, toy)
