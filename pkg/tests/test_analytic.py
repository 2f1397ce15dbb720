import math

import numpy as np
import pytest
import scipy.special
from hypothesis import given, settings
from hypothesis import strategies as st

from ubitlab.analytic import (
    beta_envelope, coherence_time, decoherence_envelope, perturbation_expansion, predict_beta,
    predict_gamma, predict_precession, semicircle_cdf, semicircle_checks, semicircle_density,
    xi_factor,
)
from ubitlab.errors import NearDegenerateDenominator
from ubitlab.model import ModelParams, generate_coupling
from ubitlab.projected import spectral_data


def gamma_oracle(s, w, t):
    t = np.asarray(t, dtype=float)
    return 1 - (s / w) ** 2 + (scipy.special.j1(2 * s * t) / (w * t)) ** 2 * np.cos(2 * w * t)


# --- relaxation curves ----------------------------------------------------------

def test_gamma_at_zero():
    assert predict_gamma(10, 100, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert predict_gamma(10, 100, 1e-9) == pytest.approx(1.0, abs=1e-12)


def test_gamma_long_time():
    assert predict_gamma(10, 100, 1e4) == pytest.approx(0.99, abs=1e-6)


def test_gamma_matches_scipy_oracle():
    t = np.linspace(0.001, 2, 500)
    np.testing.assert_allclose(predict_gamma(10, 100, t), gamma_oracle(10, 100, t), atol=1e-12)


def test_beta_at_zero_and_envelope_identity():
    bx, bz = predict_beta(10, 100, 0.0)
    assert bx == pytest.approx(1.0) and bz == pytest.approx(0.0)
    t = np.linspace(0, 1, 300)
    bx, bz = predict_beta(10, 100, t)
    env = (scipy.special.j1(2 * 10 * t[1:]) / (10 * t[1:])) ** 2
    np.testing.assert_allclose(bx[1:] ** 2 + bz[1:] ** 2, env**2, atol=1e-12)


def test_beta_envelope_without_coupling():
    np.testing.assert_array_equal(beta_envelope(0.0, np.linspace(0, 5, 7)), 1.0)


def test_parity():
    t = np.linspace(0.01, 1, 50)
    np.testing.assert_allclose(predict_gamma(10, 100, -t), predict_gamma(10, 100, t))
    bx_p, bz_p = predict_beta(10, 100, t)
    bx_m, bz_m = predict_beta(10, 100, -t)
    np.testing.assert_allclose(bx_m, bx_p)
    np.testing.assert_allclose(bz_m, -bz_p)


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.01, 0.5), w=st.floats(10, 500), k=st.floats(1.5, 4.0))
def test_curves_depend_on_dimensionless_arguments(lam, w, k):
    t = np.linspace(0, 3 / w, 40)
    np.testing.assert_allclose(predict_gamma(lam * w, w, t), predict_gamma(lam * k * w, k * w, t / k), atol=1e-12)
    np.testing.assert_allclose(predict_beta(lam * w, w, t), predict_beta(lam * k * w, k * w, t / k), atol=1e-12)


# --- precession model -----------------------------------------------------------

def test_zero_coupling_is_standard_precession():
    pred = predict_precession(0.0, 2 * math.pi)
    assert pred.xi == 1.0
    assert pred.t_star == math.inf
    t = np.linspace(0, 10, 30)
    np.testing.assert_array_equal(pred.envelope(t), 1.0)
    b = pred.bloch(t)
    np.testing.assert_allclose(b[:, 0], np.cos(2 * math.pi * t), atol=1e-12)


def test_xi_for_fig4():
    assert predict_precession(0.3, 2 * math.pi).xi == pytest.approx(0.955)
    assert xi_factor(0.1) == pytest.approx(0.995)


def test_coherence_time_exceeds_five_tau():
    lam, W = 0.1, 2 * math.pi
    pred = predict_precession(lam, W)
    assert pred.tau == pytest.approx(1 / (lam**3 * W))
    assert pred.t_star > 5 * pred.tau
    assert float(decoherence_envelope(lam, W, pred.t_star)) == pytest.approx(math.exp(-1), abs=1e-10)
    # scale invariance of t* in lam^3 Omega
    assert coherence_time(0.2, 1.0) == pytest.approx(coherence_time(0.1, 8.0))


def test_envelope_oracle():
    lam, W = 0.2, 3.0
    t = np.linspace(0.1, 500, 200)
    x = lam**3 * W * t / 2
    np.testing.assert_allclose(decoherence_envelope(lam, W, t), np.abs(2 * scipy.special.j1(x) / x), atol=1e-12)
    assert decoherence_envelope(lam, W, 0.0) == 1.0


def test_negative_lambda_rejected():
    with pytest.raises(ValueError):
        predict_precession(-0.1, 1.0)
    with pytest.raises(ValueError):
        predict_gamma(1.0, 0.0, 1.0)


# --- perturbation expansion -----------------------------------------------------

@pytest.fixture(scope="module")
def pert_setup():
    N = 30
    B = generate_coupling(N, 5).B
    spec0 = spectral_data(ModelParams(N, 0.0, 1.0, seed=5), generate_coupling(N, 5))
    return N, B, spec0


def exact_for(N, B, lam):
    return spectral_data(ModelParams(N, lam, 1.0, seed=5), generate_coupling(N, 5))


def test_zeroth_order(pert_setup):
    N, B, spec0 = pert_setup
    r = perturbation_expansion(spec0.V, spec0.Phi_plus, spec0.P_minus, 0.0)
    for k in range(4):
        np.testing.assert_allclose(r.g[k], 1.0)
    np.testing.assert_allclose(r.psi[2], spec0.Phi_plus)


def _errors(N, B, spec0, lam):
    ex = exact_for(N, B, lam)
    r = perturbation_expansion(spec0.V, spec0.Phi_plus, spec0.P_minus, lam)
    eg = {k: np.max(np.abs(r.g[k] - ex.g)) for k in range(4)}
    # eigenvector error after fixing each column's phase against the exact vector
    ps = {}
    for k in (1, 2):
        approx = r.psi[k] / np.linalg.norm(r.psi[k], axis=0)
        ov = np.einsum("in,in->n", approx.conj(), ex.Psi_plus)
        approx = approx * (ov / np.abs(ov))[None]
        ps[k] = np.max(np.linalg.norm(approx - ex.Psi_plus, axis=0))
    return eg, ps


def test_convergence_orders(pert_setup):
    N, B, spec0 = pert_setup
    e1, p1 = _errors(N, B, spec0, 0.05)
    e2, p2 = _errors(N, B, spec0, 0.025)
    assert e1[3] / e2[3] >= 8          # third-order eigenvalue, O(lam^4) error
    assert e1[2] / e2[2] >= 4          # second-order eigenvalue
    assert p1[2] / p2[2] >= 4          # second-order eigenvector, O(lam^3) error
    assert e2[3] < e2[2] < e2[1]


def test_first_order_projector_sum(pert_setup):
    N, B, spec0 = pert_setup
    lam = 1e-4
    r = perturbation_expansion(spec0.V, spec0.Phi_plus, spec0.P_minus, lam)
    Phi = spec0.Phi_plus
    psi1 = (r.psi[1] - Phi) / lam
    first = psi1 @ Phi.conj().T + Phi @ psi1.conj().T
    Pp, Pm, V = spec0.P_plus, spec0.P_minus, spec0.V
    np.testing.assert_allclose(first, 0.5 * (Pm @ V @ Pp + Pp @ V @ Pm), atol=1e-9)


def test_nu3_equals_g_minus_lam_dg(pert_setup):
    # nu = <Psi|G0|Psi> = g - lam dg/dlam (Hellmann-Feynman), third-order consistent
    N, B, spec0 = pert_setup
    lam = 0.05
    r = perturbation_expansion(spec0.V, spec0.Phi_plus, spec0.P_minus, lam)
    h = 1e-4
    gp = perturbation_expansion(spec0.V, spec0.Phi_plus, spec0.P_minus, lam + h).g[3]
    gm = perturbation_expansion(spec0.V, spec0.Phi_plus, spec0.P_minus, lam - h).g[3]
    dg = (gp - gm) / (2 * h)
    np.testing.assert_allclose(r.nu3, r.g[3] - lam * dg, atol=1e-9)


def test_near_degenerate_denominators():
    V = np.diag([1.0, 1.0 + 1e-12, -1.0, -2.0]).astype(complex)
    V[0, 2] = V[2, 0] = 0.1
    Phi = np.eye(4)[:, :2].astype(complex)
    Pm = np.diag([0, 0, 1, 1]).astype(complex)
    r = perturbation_expansion(V, Phi, Pm, 0.1, denom_tol=1e-8)
    assert r.flagged == [(0, 1)]
    assert np.all(np.isfinite(r.g[3]))
    with pytest.raises(NearDegenerateDenominator):
        perturbation_expansion(V, Phi, Pm, 0.1, denom_tol=1e-8, strict=True)


# --- semicircle -----------------------------------------------------------------

def test_semicircle_normalisation():
    v = np.linspace(-2, 2, 20001)
    assert np.trapezoid(semicircle_density(v, 7), v) == pytest.approx(7, rel=1e-6)
    assert np.trapezoid(v**2 * semicircle_density(v), v) == pytest.approx(1, rel=1e-5)
    assert semicircle_cdf(-3) == 0 and semicircle_cdf(3) == 1


def test_semicircle_at_200():
    spec = spectral_data(ModelParams(200, 1.0, 100.0, seed=1))
    rep = semicircle_checks(spec.v)
    assert rep.mean_v2 == pytest.approx(1.0, rel=0.10)
    assert -2.3 <= rep.v_min and rep.v_max <= 2.3
    assert rep.hist_counts.sum() == 200


def test_semicircle_distance_shrinks_with_n():
    ks = {}
    for N in (50, 400):
        vals = [semicircle_checks(spectral_data(ModelParams(N, 1.0, 100.0, seed=s)).v).ks_distance
                for s in range(3)]
        ks[N] = np.mean(vals)
    assert ks[400] < ks[50]
