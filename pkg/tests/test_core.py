import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinsim.core import (
    PauliString,
    basis_projector,
    check_density_matrix,
    cnot_matrix,
    coherence_order,
    embed,
    embed_two_spin,
    expand_product_basis,
    from_pm_coefficients,
    from_product_basis,
    gate_fidelity,
    n_spins,
    pauli_coefficients,
    pauli_matrix,
    pm_coefficients,
    pseudo_pure_state,
    purity,
    single_spin_operator,
    state_fidelity,
    thermal_state,
    traceless_part,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2)


def random_op(rng, n):
    d = 2**n
    return rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))


def test_pm_string_matrix_by_hand():
    # sigma_+ = sx + i sy, sigma_- = sx - i sy, no factor of one half
    sp = SX + 1j * SY
    sm = SX - 1j * SY
    m = pauli_matrix(PauliString("+-"))
    assert np.array_equal(m, np.kron(sp, sm))
    nz = np.argwhere(m != 0)
    assert nz.tolist() == [[0b01, 0b10]]
    assert m[1, 2] == 4


def test_leftmost_spin_is_most_significant():
    z1 = pauli_matrix("Z1").real.diagonal()
    assert z1.tolist() == [1, 1, -1, -1]
    assert np.array_equal(single_spin_operator("X", 0, 3), np.kron(SX, np.kron(I2, I2)))


def test_cnot_expansion():
    terms = expand_product_basis(cnot_matrix())
    assert terms == {"11": 0.5, "1X": 0.5, "Z1": 0.5, "ZX": -0.5}


def test_pauli_brute_force_inner_products():
    rng = np.random.default_rng(0)
    op = random_op(rng, 2)
    c = pauli_coefficients(op)
    mats = {"1": I2, "X": SX, "Y": SY, "Z": SZ}
    for (i, a), (j, b) in itertools.product(enumerate("1XYZ"), repeat=2):
        P = np.kron(mats[a], mats[b])
        assert c[i, j] == pytest.approx(np.trace(P.conj().T @ op) / 4, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_round_trips(n, seed):
    op = random_op(np.random.default_rng(seed), n)
    assert np.allclose(from_product_basis(expand_product_basis(op, 0.0), n), op, atol=1e-13)
    assert np.allclose(from_pm_coefficients(pm_coefficients(op)), op, atol=1e-13)


def test_compose_matches_matrices():
    for a, b in itertools.product(("XY", "ZZ", "1X", "YZ"), repeat=2):
        got = PauliString(a).compose(PauliString(b)).matrix()
        assert np.allclose(got, pauli_matrix(a) @ pauli_matrix(b))
    assert (PauliString("X") * PauliString("Y")).coefficient == 1j


def test_tensor_and_scalar():
    s = PauliString("X").tensor(PauliString("Z", 2.0))
    assert str(s) == "XZ" and s.coefficient == 2
    assert np.allclose((3 * PauliString("Z")).matrix(), 3 * SZ)


def test_bad_factor_and_size():
    with pytest.raises(ValueError):
        PauliString("Q")
    with pytest.raises(ValueError):
        pauli_matrix("XX", 3)
    with pytest.raises(ValueError):
        n_spins(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        n_spins(np.zeros((512, 512)))


def test_coherence_order():
    assert coherence_order("+Z-") == 0
    assert coherence_order("++1") == 2
    with pytest.raises(ValueError):
        coherence_order("X11")


def test_embed_two_spin_nonadjacent():
    U = embed_two_spin(cnot_matrix(), 0, 2, 3)
    # control on spin 1 flips spin 3: |100> -> |101>
    e = np.zeros(8)
    e[0b100] = 1
    assert np.argmax(np.abs(U @ e)) == 0b101
    # reversed order puts spin 3 in control
    V = embed_two_spin(cnot_matrix(), 2, 0, 3)
    e = np.zeros(8)
    e[0b001] = 1
    assert np.argmax(np.abs(V @ e)) == 0b101
    assert np.allclose(embed(SX, 1, 2), np.kron(I2, SX))


def test_fidelities():
    U = cnot_matrix()
    assert gate_fidelity(U, np.exp(0.7j) * U) == pytest.approx(1.0)
    assert gate_fidelity(np.eye(4), pauli_matrix("ZZ")) == pytest.approx(0.0)
    a = traceless_part(pseudo_pure_state("000", 0.1))
    b = traceless_part(basis_projector("000"))
    assert state_fidelity(a, b) == pytest.approx(1.0)
    assert state_fidelity(np.zeros((2, 2)), SZ) == 0.0
    with pytest.raises(ValueError):
        gate_fidelity(np.eye(2), np.eye(4))


def test_states():
    rho = thermal_state(3, 1e-3)
    assert np.trace(rho) == pytest.approx(1)
    assert expand_product_basis(rho)["Z11"] == pytest.approx(1e-3)
    check_density_matrix(rho)
    assert purity(np.eye(4) / 4) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        check_density_matrix(SZ)
    with pytest.raises(ValueError):
        basis_projector("012")
    with pytest.raises(ValueError):
        thermal_state(2, -1)
