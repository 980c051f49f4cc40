import numpy as np
import pytest

from cfidd.errors import ConfigurationError
from cfidd.selection import select_aps


def test_all_aps_is_identity_mask():
    sm = select_aps(np.array([[-80.0, -140.0], [-90.0, -95.0]]), mode="all_aps")
    assert sm.serve.all()
    np.testing.assert_array_equal(sm.block_mask(0, 3), np.eye(6))


def test_relative_threshold_examples():
    assert select_aps(np.array([[-80.0, -110.0]]), -20).serve.tolist() == [[True, False]]
    assert select_aps(np.array([[-80.0, -85.0]]), -20).serve.tolist() == [[True, True]]


def test_absolute_rule_keeps_master():
    sm = select_aps(np.array([[-80.0, -110.0], [-10.0, -30.0]]), -20, rule="absolute")
    assert sm.serve.tolist() == [[True, False], [True, False]]
    assert sm.master.tolist() == [0, 0]


def test_master_ties_go_to_lowest_index():
    sm = select_aps(np.array([[-90.0, -80.0, -80.0]]), -5)
    assert sm.master[0] == 1
    assert sm.serve.tolist() == [[False, True, True]]


def test_mask_is_projection(rng):
    beta = -100 - 30 * rng.random((4, 4))
    sm = select_aps(beta, -10)
    for k in range(4):
        D = sm.block_mask(k, 2)
        np.testing.assert_array_equal(D @ D, D)
        assert sm.serve[k, sm.master[k]]
        assert set(sm.serving_aps(k)) == set(np.flatnonzero(sm.serve[k]))
    assert sm.antenna_mask(2).shape == (4, 8)


@pytest.mark.parametrize("kwargs", [dict(mode="some"), dict(rule="x"), dict(beta_th_db=np.inf)])
def test_rejects_bad_arguments(kwargs):
    with pytest.raises(ConfigurationError):
        select_aps(np.zeros((2, 2)), **kwargs)


def test_rejects_empty():
    with pytest.raises(ConfigurationError):
        select_aps(np.zeros((0, 3)))
