import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockjacobi.jacobi import (JacobiModel, ModelError, assemble_dense, charpoly_check,
                                cluster_eigenvalues, dean_martin_check, decode_matrix, direct_spectrum,
                                free_model, gershgorin_bounds, green_corner, green_dense,
                                interlacing_check, load_model, model_from_dict, model_to_dict,
                                propagate_frame, random_model, riccati_flow, save_model,
                                spectral_radius, transfer_matrix, upper_margin)
from blockjacobi.matrices import max_norm
from blockjacobi.symplectic import canonical_forms, is_symplectic
from oracle_values import DEAN_MARTIN_E2I, FREE_SPECTRUM, RICCATI_Z2_E2I

SEEDS = st.integers(0, 2**32 - 1)
CLASSES = st.sampled_from(["complex", "real", "quaternion"])


def draw_model(seed, tag, N, L=None, boundary=True):
    rng = np.random.default_rng(seed)
    if L is None:
        L = 2 * int(rng.integers(1, 3)) if tag == "quaternion" else int(rng.integers(1, 4))
    return random_model(rng, N, L, tag, boundary=boundary)


def test_assemble_examples():
    np.testing.assert_array_equal(assemble_dense(free_model(3)).real,
                                  [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    m = JacobiModel(np.array([np.eye(2), np.eye(2)]))
    np.testing.assert_array_equal(assemble_dense(m).real, np.block([[np.eye(2)] * 2] * 2))
    m = JacobiModel(np.zeros((2, 1, 1)), zeta=[[1.0]], xi=[[0.5]])
    H = assemble_dense(m)
    assert H[0, 0] == -1.0 and H[1, 1] == -0.5


def test_model_validation():
    with pytest.raises(ModelError, match="T_3 not positive definite"):
        JacobiModel(np.zeros((3, 1, 1)), np.array([[[1.0]], [[-1.0]]]))
    with pytest.raises(ModelError, match="V_2 is not selfadjoint"):
        JacobiModel(np.array([[[0.0]], [[1j]]]))
    with pytest.raises(ModelError, match="real"):
        JacobiModel(np.array([[[0, 1j], [-1j, 0]]]), field="real")
    with pytest.raises(ModelError, match="quaternion"):
        JacobiModel(np.array([np.diag([1.0, 2.0])]), field="quaternion")
    with pytest.raises(ModelError, match="hopping"):
        JacobiModel(np.zeros((3, 1, 1)), np.ones((1, 1, 1)))


@pytest.mark.parametrize("N", [2, 3, 5])
def test_free_spectrum(N):
    np.testing.assert_allclose(direct_spectrum(free_model(N)), FREE_SPECTRUM[N], atol=1e-14)


def test_decoupled_spectrum_is_union():
    a, b = free_model(4, v=0.3), free_model(4, v=-0.2)
    V = np.array([np.diag([x[0, 0], y[0, 0]]) for x, y in zip(a.V, b.V)])
    m = JacobiModel(V)
    np.testing.assert_allclose(direct_spectrum(m),
                               np.sort(np.r_[direct_spectrum(a), direct_spectrum(b)]), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(seed=SEEDS, tag=CLASSES, N=st.integers(1, 10), c=st.floats(-5, 5))
def test_spectrum_shift_covariance(seed, tag, N, c):
    m = draw_model(seed, tag, N)
    np.testing.assert_allclose(direct_spectrum(m.shifted(c)), direct_spectrum(m) + c, atol=1e-11)


def test_cluster_eigenvalues():
    assert cluster_eigenvalues([0.0, 1e-12, 1.0], 1e-9) == [(5e-13, 2), (1.0, 1)]


def test_transfer_examples():
    np.testing.assert_array_equal(transfer_matrix(free_model(2), 1, 0.0), canonical_forms(1).J)


@settings(max_examples=30, deadline=None)
@given(seed=SEEDS, tag=CLASSES, N=st.integers(2, 6), E=st.floats(-4, 4))
def test_transfer_matrices_are_symplectic(seed, tag, N, E):
    m = draw_model(seed, tag, N)
    for n in range(1, N + 1):
        t = transfer_matrix(m, n, E)
        assert is_symplectic(t, tag, tol=1e-10)
        assert abs(np.linalg.det(t) - 1) <= 1e-10 * max(1.0, max_norm(t)) ** (2 * m.L)


def test_riccati_examples():
    m = free_model(1)
    np.testing.assert_allclose(riccati_flow(m, 1j)[0], [[1j]])
    z = riccati_flow(free_model(2), 2j)
    np.testing.assert_allclose(z[-1], [[RICCATI_Z2_E2I]], atol=1e-15)
    with pytest.raises(ValueError):
        riccati_flow(m, 0.5)


@settings(max_examples=30, deadline=None)
@given(seed=SEEDS, tag=CLASSES, N=st.integers(1, 10), re=st.floats(-3, 3))
def test_riccati_margin_grows_with_imaginary_part(seed, tag, N, re):
    m = draw_model(seed, tag, N)
    margins = [upper_margin(riccati_flow(m, complex(re, y))[-1]) for y in (0.05, 0.2, 1.0, 5.0)]
    assert all(x > 0 for x in margins)
    assert all(b >= a - 1e-12 for a, b in zip(margins, margins[1:]))


def test_green_examples():
    np.testing.assert_allclose(green_corner(free_model(1), 1j), [[1j]])
    rng = np.random.default_rng(4)
    m = random_model(rng, 4, 2, "complex", boundary=True)
    E = 0.3 + 0.4j
    a, b = green_corner(m, E), green_dense(m, E)
    assert max_norm(a - b) <= 1e-8 * max_norm(b)
    assert upper_margin(a) > 0


def test_dean_martin_examples():
    lhs, rhs, err = dean_martin_check(free_model(2), 2j)
    assert lhs == pytest.approx(DEAN_MARTIN_E2I, abs=1e-14)
    assert rhs == pytest.approx(DEAN_MARTIN_E2I, abs=1e-14)
    assert err <= 1e-10
    rng = np.random.default_rng(8)
    m = random_model(rng, 6, 2, "complex", boundary=True)
    for delta in (0.01, 0.1, 1.0, 10.0, 100.0):
        assert dean_martin_check(m, 0.4 + 1j * delta)[2] <= 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=SEEDS, tag=CLASSES, N=st.integers(1, 12), re=st.floats(-4, 4), im=st.floats(0.05, 3))
def test_charpoly_identity(seed, tag, N, re, im):
    m = draw_model(seed, tag, N)
    assert charpoly_check(m, complex(re, im))[2] <= 1e-9


def test_interlacing_examples():
    ok, worst = interlacing_check(free_model(3))
    assert ok and worst <= 0
    m = JacobiModel(np.array([np.eye(2) * 0.7] * 5))
    assert interlacing_check(m)[0]


@settings(max_examples=30, deadline=None)
@given(seed=SEEDS, tag=CLASSES, N=st.integers(2, 12))
def test_interlacing_random(seed, tag, N):
    assert interlacing_check(draw_model(seed, tag, N))[0]


@settings(max_examples=30, deadline=None)
@given(seed=SEEDS, tag=CLASSES, N=st.integers(1, 12))
def test_gershgorin_encloses_spectrum(seed, tag, N):
    m = draw_model(seed, tag, N)
    lo, hi = gershgorin_bounds(m)
    ev = direct_spectrum(m)
    assert lo < ev[0] and ev[-1] < hi
    assert spectral_radius(m) >= np.max(np.abs(ev)) - 1e-12


def test_propagate_frame_log_scale(rng):
    m = random_model(rng, 8, 2, "complex")
    a, s = propagate_frame(m, 0.3 + 0.1j)
    b, _ = propagate_frame(m, 0.3 + 0.1j, normalize=False)
    ga = np.linalg.det(a.conj().T @ a).real * np.exp(2 * s)
    assert ga == pytest.approx(np.linalg.det(b.conj().T @ b).real, rel=1e-10)


def test_model_json_round_trip(tmp_path, rng):
    m = random_model(rng, 5, 2, "quaternion", boundary=True)
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    for a, b in ((m.V, back.V), (m.T, back.T), (m.zeta, back.zeta), (m.xi, back.xi)):
        np.testing.assert_array_equal(a, b)
    assert back.field == "quaternion"
    data = json.loads((tmp_path / "m.json").read_text())
    again = model_from_dict(model_to_dict(model_from_dict(data)))
    np.testing.assert_array_equal(again.V, m.V)


def test_decode_matrix_layouts():
    np.testing.assert_array_equal(decode_matrix([[1, 2], [3, 4]], 2), [[1, 2], [3, 4]])
    np.testing.assert_array_equal(decode_matrix([[[1, 1], [0, 0]], [[0, 0], [2, 0]]], 2),
                                  [[1 + 1j, 0], [0, 2]])
    np.testing.assert_array_equal(decode_matrix(3.0, 1), [[3.0]])
    with pytest.raises(ModelError):
        decode_matrix([1, 2, 3], 2)
    with pytest.raises(ModelError, match="malformed"):
        model_from_dict({"L": 1})
