import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from cfidd.coding import ldpc
from cfidd.errors import ConfigurationError, ContractError


@pytest.fixture(scope="module")
def code():
    return ldpc.default_code()


@pytest.fixture(scope="module")
def small_code():
    return ldpc.build_ldpc(16, 8, np.random.default_rng(3))


def exact_box_plus(a, b):
    return np.logaddexp(0, a + b) - np.logaddexp(a, b)


def test_default_code_structure(code):
    assert (code.n, code.m, code.k) == (256, 128, 128)
    assert code.rate == 0.5
    assert np.all(code.h.sum(axis=0) == 3)
    assert np.all(code.h.sum(axis=1) == 6)
    assert not np.any((code.generator.astype(int) @ code.h.T.astype(int)) % 2)
    assert not ldpc.has_four_cycles(code.h)


def test_built_code_generator_identity():
    c = ldpc.build_ldpc(64, 32, np.random.default_rng(5))
    assert not np.any((c.generator.astype(int) @ c.h.T.astype(int)) % 2)
    assert np.all(c.h.sum(axis=0) == 3)


def test_four_cycle_oracle():
    h = np.array([[1, 1, 0], [1, 1, 1]], dtype=np.uint8)
    assert ldpc.has_four_cycles(h)
    assert not ldpc.has_four_cycles(np.eye(3, dtype=np.uint8))


def test_build_gives_up_after_attempts():
    # a (3, 6)-regular length-16 code cannot avoid 4-cycles
    with pytest.raises(ConfigurationError):
        ldpc.build_ldpc(16, 8, np.random.default_rng(0), require_girth6=True, max_attempts=3)
    with pytest.raises(ConfigurationError):
        ldpc.build_ldpc(8, 8, np.random.default_rng(0))


def test_alist_round_trip(tmp_path, small_code):
    path = tmp_path / "code.alist"
    ldpc.write_alist(small_code.h, path)
    np.testing.assert_array_equal(ldpc.read_alist(path), small_code.h)


def test_encode_properties(code, rng):
    assert not ldpc.encode(code, np.zeros(code.k, dtype=np.uint8)).any()
    a, b = rng.integers(0, 2, (2, code.k))
    ca, cb = ldpc.encode(code, a), ldpc.encode(code, b)
    assert code.is_codeword(ca) and code.is_codeword(cb)
    np.testing.assert_array_equal(ldpc.encode(code, a ^ b), ca ^ cb)
    np.testing.assert_array_equal(code.message_bits(ca), a)
    with pytest.raises(ContractError):
        ldpc.encode(code, np.zeros(code.k - 1))


def test_box_plus_values():
    assert ldpc.box_plus(3.7, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert ldpc.box_plus(2.0, 2.0) == pytest.approx(np.log((1 + np.exp(4)) / (2 * np.exp(2))), abs=1e-12)
    assert ldpc.box_plus(2.0, 2.0) == pytest.approx(1.3250, abs=5e-5)
    assert ldpc.box_plus(100.0, -3.0) == pytest.approx(-3.0, abs=1e-9)
    assert ldpc.box_plus(50.0, 50.0) == pytest.approx(50.0 - np.log(2), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(a=st.floats(-50, 50), b=st.floats(-50, 50), c=st.floats(-50, 50))
def test_box_plus_algebra(a, b, c):
    assert ldpc.box_plus(a, b) == pytest.approx(exact_box_plus(a, b), abs=1e-9)
    assert ldpc.box_plus(a, b) == ldpc.box_plus(b, a)
    left = ldpc.box_plus(ldpc.box_plus(a, b), c)
    right = ldpc.box_plus(a, ldpc.box_plus(b, c))
    assert left == pytest.approx(right, abs=1e-9)
    # saturation at the clip boundary passes the other operand through with its sign
    if abs(a) <= 20:
        assert ldpc.box_plus(50.0, a) == pytest.approx(a, abs=1e-9)
        assert ldpc.box_plus(-50.0, a) == pytest.approx(-a, abs=1e-9)


def test_decoder_noiseless_and_zero(code):
    res = ldpc.spa_decode(code, np.full(code.n, 50.0))
    assert not res.hard_bits.any() and res.converged and res.iterations == 1
    zero = ldpc.spa_decode(code, np.zeros(code.n))
    np.testing.assert_array_equal(zero.posterior, 0.0)
    np.testing.assert_array_equal(zero.extrinsic, 0.0)


def test_decoder_idempotent_on_codewords(code, rng):
    words = ldpc.encode(code, rng.integers(0, 2, (8, code.k)))
    llr = 8.0 * (1 - 2.0 * words)
    res = ldpc.spa_decode(code, llr)
    np.testing.assert_array_equal(res.hard_bits, words)
    assert res.converged.all()
    np.testing.assert_allclose(res.extrinsic, np.clip(res.posterior - llr, -50, 50))


def test_single_wrong_bit_matches_exhaustive_ml(small_code, rng):
    words = np.array([ldpc.encode(small_code, np.array(m)) for m in itertools.product((0, 1), repeat=small_code.k)])
    for _ in range(20):
        word = words[rng.integers(len(words))]
        llr = 4.0 * (1 - 2.0 * word)
        flip = rng.integers(small_code.n)
        llr[flip] = -llr[flip] * 1.5
        ml = words[np.argmax(words.astype(float) @ -llr)]  # max sum of LLR-weighted correlation
        res = ldpc.spa_decode(small_code, llr, max_iters=10)
        np.testing.assert_array_equal(ml, word)
        np.testing.assert_array_equal(res.hard_bits, ml)


def test_coded_gain_on_awgn(code):
    rng = np.random.default_rng(2024)
    ebn0 = 10 ** (4 / 10)
    frames = 400
    msgs = rng.integers(0, 2, (frames, code.k))
    x = 1 - 2.0 * ldpc.encode(code, msgs)
    sig2 = 1 / (2 * code.rate * ebn0)
    llr = 2 * (x + np.sqrt(sig2) * rng.standard_normal(x.shape)) / sig2
    coded = np.mean(code.message_bits(ldpc.spa_decode(code, llr).hard_bits) != msgs)

    u_bits = rng.integers(0, 2, 100_000)
    u_sig2 = 1 / (2 * ebn0)
    rx = (1 - 2.0 * u_bits) + np.sqrt(u_sig2) * rng.standard_normal(u_bits.shape)
    uncoded_errors = np.sum((rx < 0) != u_bits)
    uncoded = uncoded_errors / u_bits.size
    assert uncoded_errors >= 100
    assert uncoded == pytest.approx(0.5 * erfc(np.sqrt(ebn0)), rel=0.15)
    assert coded * 10 <= uncoded


def test_decoder_contract(code):
    with pytest.raises(ContractError):
        ldpc.spa_decode(code, np.zeros(10))
    with pytest.raises(ConfigurationError):
        ldpc.spa_decode(code, np.zeros(code.n), max_iters=0)


@pytest.mark.parametrize("d", [2, 3, 6, 7])
def test_extrinsic_box_plus_matches_direct_exclusion(d):
    x = np.random.default_rng(d).normal(0, 4, (5, 3, d))
    out = ldpc._extrinsic_box_plus(x)
    for j in range(d):
        rest = [x[..., i] for i in range(d) if i != j]
        acc = rest[0]
        for r in rest[1:]:
            acc = ldpc.box_plus(acc, r)
        np.testing.assert_allclose(out[..., j], acc, atol=1e-12)
