import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockjacobi.jacobi import direct_spectrum, transfer_matrix
from blockjacobi.random import (AnomalyWarning, BandEdgeError, Disorder, EnsembleError,
                                EnsembleSpec, birkhoff_ids_lyap, channel_decomposition,
                                ensemble_from_dict, ensemble_to_dict, hyperbolic_alignment_probe,
                                ids_by_counting, load_ensemble, lyap_qr_oracle, perturbation_study,
                                periodic_ids, periodic_ids_closed_form, sample_labels, sample_model,
                                save_ensemble)
from blockjacobi.symplectic import (is_symplectic, orthonormalize, rn_cocycle_sides, rotation_path,
                                    stereo_Pi)
from oracle_values import FREE_IDS, GAP_H_E3, KAPPA_E3, PERIODIC_IDS

SEEDS = st.integers(0, 2**31 - 1)


def clean_chain(L=1):
    return EnsembleSpec(L, 0.0, 1.0, (Disorder(0.0, 0.0, 1.0),))


def two_point(lam=0.0, V=1.0, L=1):
    eye = np.eye(L)
    return EnsembleSpec(L, V, 1.0 if L == 1 else [[1.0, 0.2], [0.2, 0.9]],
                        (Disorder(eye, 0.0, 0.5), Disorder(-eye, 0.0, 0.5)), lam)


def strip(lam):
    return EnsembleSpec(2, [[1.0, 0.5], [0.5, 0.4]], [[1.0, 0.2], [0.2, 0.9]],
                        (Disorder(np.eye(2), 0.0, 0.5), Disorder(-np.eye(2), 0.0, 0.5)), lam)


# ---- ensembles and sampling -----------------------------------------------------

def test_ensemble_validation():
    with pytest.raises(EnsembleError, match="sum"):
        EnsembleSpec(1, 0.0, 1.0, (Disorder(1.0, 0.0, 0.4), Disorder(-1.0, 0.0, 0.4)))
    with pytest.raises(EnsembleError, match="T not positive definite"):
        EnsembleSpec(1, 0.0, -1.0, (Disorder(0.0, 0.0, 1.0),))
    with pytest.raises(EnsembleError, match="symmetric"):
        EnsembleSpec(2, [[0, 1], [0, 0]], 1.0, (Disorder(0.0, 0.0, 1.0),))
    with pytest.raises(EnsembleError, match="lambda"):
        EnsembleSpec(1, 0.0, 1.0, (Disorder(0.0, -2.0, 1.0),), 0.6)
    with pytest.raises(EnsembleError, match="empty"):
        EnsembleSpec(1, 0.0, 1.0, ())


def test_ensemble_json_round_trip(tmp_path):
    spec = strip(0.3)
    save_ensemble(spec, tmp_path / "e.json")
    back = load_ensemble(tmp_path / "e.json")
    assert back.lam == 0.3
    np.testing.assert_array_equal(back.V, spec.V)
    np.testing.assert_array_equal(back.sigma[1].v, spec.sigma[1].v)
    assert ensemble_to_dict(ensemble_from_dict(ensemble_to_dict(spec))) == ensemble_to_dict(spec)
    with pytest.raises(EnsembleError, match="malformed"):
        ensemble_from_dict({"L": 1})


def test_clean_sample_ignores_seed():
    a, b = sample_model(two_point(0.0), 20, 1), sample_model(two_point(0.0), 20, 99)
    np.testing.assert_array_equal(a.V, b.V)
    np.testing.assert_array_equal(a.V, np.ones((20, 1, 1)))


def test_sampling_is_deterministic():
    spec = strip(0.2)
    a, b = sample_model(spec, 50, 7), sample_model(spec, 50, 7)
    np.testing.assert_array_equal(a.V, b.V)
    np.testing.assert_array_equal(a.T, b.T)
    assert not np.array_equal(sample_labels(spec, 50, 7), sample_labels(spec, 50, 8))


def test_two_point_labels_are_balanced():
    N = 10_000
    v = 1 - 2 * sample_labels(two_point(0.3), N, 3).astype(float)
    assert abs(v.mean()) <= 3 / np.sqrt(N)


# ---- channels -----------------------------------------------------------------

def test_channels_elliptic_example():
    ch = channel_decomposition([[0.0]], [[1.0]], 0.0)
    assert (ch.L_h, ch.L_e) == (0, 1)
    # with J = [[0, -1], [1, 0]] the Krein-positive eigenvector of J has eigenvalue -i
    assert ch.eta[0] == pytest.approx(1.5 * np.pi, abs=1e-14)
    assert ch.g_e == pytest.approx(2.0, abs=1e-14)
    assert ch.residual <= 1e-12


def test_channels_hyperbolic_example():
    ch = channel_decomposition([[0.0]], [[1.0]], 3.0)
    assert (ch.L_h, ch.L_e) == (1, 0)
    assert ch.kappa[0] == pytest.approx(KAPPA_E3, abs=1e-14)
    assert ch.g_h == pytest.approx(GAP_H_E3, abs=1e-14)
    assert ch.lyapunov == pytest.approx(KAPPA_E3, abs=1e-14)


@pytest.mark.parametrize("E", [2.0, -2.0])
def test_channels_reject_band_edges(E):
    with pytest.raises(BandEdgeError, match="Jordan block / band edge"):
        channel_decomposition([[0.0]], [[1.0]], E)


def test_channels_anomaly_gate():
    with pytest.warns(AnomalyWarning):
        channel_decomposition([[0.0]], [[1.0]], 1.99, anomaly_gate=0.5)


@settings(max_examples=40, deadline=None)
@given(seed=SEEDS, L=st.integers(1, 4), E=st.floats(-4, 4))
def test_channel_normal_form(seed, L, E):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((L, L))
    V = (x + x.T) / 2
    y = rng.standard_normal((L, L))
    T = np.eye(L) + 0.1 * (y + y.T)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AnomalyWarning)
            ch = channel_decomposition(V, T, E)
    except BandEdgeError:
        return
    assert ch.L_h + ch.L_e == L
    assert is_symplectic(ch.M, "real", tol=1e-8)
    assert ch.residual <= 1e-8
    assert np.all(ch.kappa > 0)
    assert np.all((0 <= ch.eta) & (ch.eta < 2 * np.pi))


# ---- Birkhoff sums and oracles ------------------------------------------------

def test_clean_lyapunov_values():
    spec = clean_chain()
    assert birkhoff_ids_lyap(spec, 0.0, 2000, 0).lyap.mean == pytest.approx(0.0, abs=1e-6)
    assert lyap_qr_oracle(spec, 0.0, 2000, 0).mean == pytest.approx(0.0, abs=1e-6)
    assert birkhoff_ids_lyap(spec, 3.0, 2000, 0).lyap.mean == pytest.approx(KAPPA_E3, abs=1e-6)
    assert lyap_qr_oracle(spec, 3.0, 2000, 0).mean == pytest.approx(KAPPA_E3, abs=1e-6)


def test_birkhoff_ids_free_chain():
    spec = clean_chain()
    for E, ref in FREE_IDS.items():
        r = birkhoff_ids_lyap(spec, E, 4000, 0)
        assert r.ids.mean == pytest.approx(ref, abs=2 / 4000)
        assert r.value.imag == pytest.approx(np.pi * r.ids.mean)


def test_complex_energy_has_no_ids():
    r = birkhoff_ids_lyap(strip(0.2), 0.3 + 0.5j, 200, 0)
    assert np.isnan(r.ids.mean)
    assert np.isfinite(r.lyap.mean) and r.lyap.mean > 0
    with pytest.raises(ValueError):
        birkhoff_ids_lyap(strip(0.2), 0.3 - 0.5j, 200, 0)


@pytest.mark.parametrize("L", [1, 2])
def test_birkhoff_real_part_matches_norm_growth(L):
    """At Im E = 1 the Birkhoff sum equals the frame norm growth minus a boundary term.

    The bottom block of the Cayley-transformed frame obeys b_n = (C U + D) b_{n-1},
    and phi^* phi = b^*(U^* U + 1) b, so the sum of log|det(CU + D)| is
    (1/2) log det(phi_N^* phi_N)/det(phi_0^* phi_0) - (1/2) log det(U_N^* U_N + 1)/det(U_0^* U_0 + 1).
    The norm growth is accumulated from the chart side of the cocycle identity.
    """
    spec = strip(0.3) if L == 2 else two_point(0.3)
    N, E = 300, 0.4 + 1.0j
    r = birkhoff_ids_lyap(spec, E, N, seed=5, burn_in=0, blocks=1)
    model = sample_model(spec, N, 5)
    # a fixed unitary symplectic rotation keeps frame norms and makes every chart invertible
    R = rotation_path(0.3, L)
    Ri = R.conj().T
    phi = R @ np.vstack([np.eye(L), np.zeros((L, L))]).astype(complex)
    growth = 0.0
    for n in range(1, N + 1):
        t = R @ transfer_matrix(model, n, E) @ Ri
        _, rhs = rn_cocycle_sides(t, phi)
        growth += 0.5 * np.log(rhs)
        phi, _ = orthonormalize(t @ phi)
    U0 = stereo_Pi(np.vstack([np.eye(L), np.zeros((L, L))]))
    UN = stereo_Pi(Ri @ phi)
    boundary = 0.5 * (np.log(np.linalg.det(UN.conj().T @ UN + np.eye(L)).real)
                      - np.log(np.linalg.det(U0.conj().T @ U0 + np.eye(L)).real))
    assert r.lyap.mean * N * L == pytest.approx(growth - boundary, rel=1e-8)


def test_cross_method_lyapunov_agreement():
    spec = strip(0.3)
    b = birkhoff_ids_lyap(spec, 0.0, 20_000, 1, realizations=4).lyap
    q = lyap_qr_oracle(spec, 0.0, 20_000, 1, realizations=4)
    assert abs(b.mean - q.mean) <= 3 * np.hypot(b.stderr, q.stderr)


# ---- counting ---------------------------------------------------------------

def test_ids_by_counting_free_chain():
    spec = clean_chain()
    assert ids_by_counting(spec, 0.0, 200, 1, 0).mean == pytest.approx(0.5, abs=1 / 200)
    assert ids_by_counting(spec, 1.0, 200, 1, 0).mean == pytest.approx(FREE_IDS[1.0], abs=1 / 200)
    assert ids_by_counting(spec, 5.0, 200, 1, 0).mean == 1.0
    assert ids_by_counting(spec, -5.0, 200, 1, 0).mean == 0.0


@settings(max_examples=20, deadline=None)
@given(seed=SEEDS, lam=st.floats(0.0, 0.5), E=st.floats(-4, 5))
def test_counting_is_exact_per_realization(seed, lam, E):
    spec = strip(lam)
    N = 30
    ev = direct_spectrum(sample_model(spec, N, seed))
    if np.min(np.abs(ev - E)) < 1e-9:
        return
    est = ids_by_counting(spec, E, N, 1, seed)
    assert est.mean * N * 2 == np.sum(ev <= E)


@pytest.mark.parametrize("v,lam", sorted(PERIODIC_IDS))
def test_periodic_ids_closed_form(v, lam):
    spec = two_point(lam)
    label = 0 if v == 1 else 1
    V, T = spec.blocks(label)
    assert periodic_ids_closed_form(V, T, 0.3) == pytest.approx(PERIODIC_IDS[(v, lam)], abs=1e-14)
    assert periodic_ids(spec, label, 0.3, 20_000) == pytest.approx(PERIODIC_IDS[(v, lam)], abs=1 / 20_000)


def test_periodic_ids_strip_matches_closed_form():
    spec = strip(0.2)
    for E in (-0.5, 0.3, 2.6):
        for s in range(2):
            V, T = spec.blocks(s)
            assert periodic_ids(spec, s, E, 50_000) == pytest.approx(
                periodic_ids_closed_form(V, T, E), abs=2 / 50_000)


# ---- perturbation study -----------------------------------------------------

def test_perturbation_zero_coupling_has_zero_error():
    rep = perturbation_study(two_point, 0.3, [0.0], 2000, 2, comparator_N=2000)
    assert rep.err == [0.0]
    assert np.isnan(rep.slope)


def test_perturbation_rejections():
    with pytest.raises(ValueError):
        perturbation_study(two_point, 0.3, [], 100, 1)
    with pytest.raises(BandEdgeError, match="Jordan block / band edge"):
        perturbation_study(lambda lam: two_point(lam, V=0.0), 2.0, [0.1], 100, 1)
    with pytest.raises(BandEdgeError, match="anomaly"):
        perturbation_study(lambda lam: two_point(lam, V=0.0), 1.99, [0.1], 100, 1, anomaly_gate=0.5)


def test_perturbation_report_layout():
    rep = perturbation_study(two_point, 0.3, [0.2, 0.1], 5000, 4, comparator_N=20_000)
    d = rep.to_dict()
    assert set(d) == {"energy", "per_lambda", "fit", "gaps"}
    assert [x["lambda"] for x in d["per_lambda"]] == [0.2, 0.1]
    assert set(d["per_lambda"][0]) == {"lambda", "ids", "stderr", "comparator", "err"}
    assert set(d["fit"]) == {"slope", "intercept", "r2"}
    assert d["gaps"]["g_h"] == 1.0 and d["gaps"]["g_e"] > 0


# ---- hyperbolic alignment ---------------------------------------------------

def test_probe_contracts_at_zero_coupling():
    spec = strip(0.0)
    ch = channel_decomposition(spec.V, spec.T, 2.6)
    r = hyperbolic_alignment_probe(spec, 2.6, 40, channels=ch)
    d = r.defects
    steps = d[2:12] / d[1:11]
    assert np.all(steps <= 1 - ch.g_h)
    assert r.plateau <= 1e-12


def test_probe_not_applicable_without_hyperbolic_channels():
    assert hyperbolic_alignment_probe(two_point(0.1), 0.3, 100) is None


def test_probe_plateau_scales_linearly():
    spec = strip(0.0)

    def plateau(lam):
        return np.mean([hyperbolic_alignment_probe(spec.with_lambda(lam), 2.6, 2000, seed=k).plateau
                        for k in range(4)])

    ratio = plateau(0.05) / plateau(0.1)
    assert 0.3 <= ratio <= 0.7
