import numpy as np
import pytest

from spinjumps.operators import (
    MAX_SITES,
    anticommutator,
    commutator,
    dag,
    embed,
    is_hermitian,
    pauli,
    site_ops,
)

I2 = np.eye(2)


def test_pauli_algebra():
    x, y, z = pauli("x"), pauli("y"), pauli("z")
    for s in (x, y, z):
        assert np.allclose(s @ s, I2)
    assert np.allclose(commutator(x, y), 2j * z)
    assert np.allclose(commutator(y, z), 2j * x)
    assert np.allclose(commutator(z, x), 2j * y)
    assert np.allclose(anticommutator(x, y), 0.0)


def test_ladder_convention_factor_two():
    # sigma_pm = sigma_x +- i sigma_y, so sp @ sm = 2 (1 + sigma_z)
    sp, sm, z = pauli("plus"), pauli("minus"), pauli("z")
    assert np.allclose(sp, np.array([[0, 2], [0, 0]]))
    assert np.allclose(sp @ sm, 2.0 * (I2 + z))
    assert np.allclose(dag(sm), sp)


def test_unknown_label():
    with pytest.raises(ValueError):
        pauli("w")


def test_embed_positions():
    op = embed("z", 1, 3)
    expect = np.kron(np.kron(I2, pauli("z")), I2)
    assert np.allclose(op, expect)
    assert op.shape == (8, 8)


def test_embed_commutes_on_distinct_sites():
    a = embed("x", 0, 3)
    b = embed("y", 2, 3)
    assert np.allclose(commutator(a, b), 0.0)


def test_embed_range_checks():
    with pytest.raises(ValueError):
        embed("x", 3, 3)
    with pytest.raises(ValueError):
        embed("x", 0, MAX_SITES + 1)


def test_site_ops_and_hermiticity():
    ops = site_ops("x", 4)
    assert len(ops) == 4
    assert all(is_hermitian(o) for o in ops)
    assert not is_hermitian(embed("plus", 0, 2))
