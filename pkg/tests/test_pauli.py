import itertools

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import pauli_matrix
from qksd.pauli import IDENTITY, PauliString, PauliSum, pauli_rotation

LABELS = ["".join(p) for p in itertools.product("IXYZ", repeat=2)]
labels3 = st.text(alphabet="IXYZ", min_size=3, max_size=3)


@pytest.mark.parametrize("label", LABELS)
def test_from_label_matches_kronecker(label):
    assert np.allclose(PauliString.from_label(label).to_matrix(2), pauli_matrix(label))


@pytest.mark.parametrize("a,b", list(itertools.product(LABELS, repeat=2)))
def test_product_matches_matrix_product(a, b):
    p = PauliString.from_label(a) * PauliString.from_label(b)
    assert np.allclose(p.to_matrix(2), pauli_matrix(a) @ pauli_matrix(b))


@given(labels3, st.integers(0, 3))
def test_adjoint_is_conjugate_transpose(label, phase):
    p = PauliString.from_label(label)
    p = PauliString(p.x_mask, p.z_mask, p.phase + phase)
    assert np.allclose(p.adjoint().to_matrix(3), p.to_matrix(3).conj().T)


@given(labels3, st.integers(0, 3))
def test_hermitian_part_recombines(label, phase):
    p = PauliString.from_label(label)
    p = PauliString(p.x_mask, p.z_mask, p.phase + phase)
    scalar, canon = p.hermitian_part()
    assert canon.is_hermitian
    assert np.allclose(scalar * canon.to_matrix(3), p.to_matrix(3))


@given(labels3)
@settings(max_examples=30)
def test_apply_matches_matrix(label):
    p = PauliString.from_label(label)
    rng = np.random.default_rng(len(label))
    v = rng.normal(size=(8, 2)) + 1j * rng.normal(size=(8, 2))
    assert np.allclose(p.apply(v), p.to_matrix(3) @ v)
    assert np.allclose(p.apply(v[:, 0]), p.to_matrix(3) @ v[:, 0])


def test_label_roundtrip():
    assert PauliString.from_label("XZY").label(3) == "XZY"
    assert PauliString.from_label("ZX", [1, 3]).label(4) == "IZIX"


def test_unknown_letter_raises():
    with pytest.raises(ValueError):
        PauliString.from_label("XQ")


def test_identity_properties():
    assert IDENTITY.is_identity and IDENTITY.is_hermitian
    assert IDENTITY.coefficient == 1


def test_from_terms_merges_and_cancels():
    x0 = PauliString.from_label("X")
    s = PauliSum.from_terms([(1.0, x0), (2.0, x0), (0.5, PauliString.from_label("Z")), (-0.5, PauliString.from_label("Z"))], 1)
    assert len(s) == 1
    assert s.h_tot == pytest.approx(3.0)


def test_from_terms_keeps_multiplicity():
    zz = PauliString.from_label("ZZ")
    s = PauliSum.from_terms([(1.0, zz), (1.0, zz)], 2, keep_multiplicity=True)
    assert len(s) == 2 and s.h_tot == 2.0
    assert np.allclose(s.to_matrix(), 2 * pauli_matrix("ZZ"))


def test_from_terms_absorbs_phase():
    # i * (X Z) = i * (-i Y) = Y
    xz = PauliString.from_label("X") * PauliString.from_label("Z")
    s = PauliSum.from_terms([(1j, xz)], 1)
    assert s.coefficients[0] == pytest.approx(1.0)
    assert np.allclose(s.to_matrix(), pauli_matrix("Y"))


def test_from_terms_rejects_non_hermitian():
    with pytest.raises(ValueError):
        PauliSum.from_terms([(1j, PauliString.from_label("X"))], 1)


def test_term_outside_register_rejected():
    with pytest.raises(ValueError):
        PauliSum(((1.0, PauliString.from_label("X", [3])),), 2)


def test_sum_apply_and_scaled():
    s = PauliSum.from_terms([(0.3, PauliString.from_label("XX")), (-1.2, PauliString.from_label("YZ"))], 2)
    v = np.arange(4) + 1j
    assert np.allclose(s.apply(v), s.to_matrix() @ v)
    assert np.allclose(s.scaled(2.0).to_matrix(), 2 * s.to_matrix())


@pytest.mark.parametrize("label", ["X", "YY", "ZXY"])
@pytest.mark.parametrize("angle", [0.0, 0.3, -1.1, np.pi / 2])
def test_rotation_matches_expm(label, angle):
    n = len(label)
    p = PauliString.from_label(label)
    v = np.ones(1 << n) / np.sqrt(1 << n)
    assert np.allclose(pauli_rotation(p, angle, v), sla.expm(-1j * angle * pauli_matrix(label)) @ v)
