import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import trapezoid

from floqelim.errors import ConfigError
from floqelim.model import (
    LatticeConfig,
    bandwidth,
    bond_couplings,
    build_hamiltonian,
    drive_coupling,
    gauge_shift_identity_check,
    static_reference,
)


@st.composite
def configs(draw, pure_cosine=False):
    n = draw(st.integers(2, 30))
    k0 = draw(st.floats(0.005, 0.1))
    d0 = 0.0 if pure_cosine else draw(st.floats(-0.5, 0.5)) * k0
    d1 = draw(st.floats(0, 1)) * (k0 - abs(d0))
    period = draw(st.floats(10, 2000))
    gauge = draw(st.floats(-math.pi, math.pi))
    return LatticeConfig(n, k0, d0, d1, period=period, gauge=gauge)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n_sites=1, kappa0=0.03),
        dict(n_sites=4, kappa0=0.0),
        dict(n_sites=4, kappa0=-0.01),
        dict(n_sites=4, kappa0=0.03, dkappa0=0.02, dkappa1=0.02, period=100),
        dict(n_sites=4, kappa0=0.03, dkappa1=0.01),
        dict(n_sites=4, kappa0=0.03, dkappa1=0.01, period=-5),
        dict(n_sites=4.5, kappa0=0.03),
        dict(n_sites=4, kappa0=float("nan")),
    ],
)
def test_invalid_configs_rejected(kwargs):
    with pytest.raises(ConfigError):
        LatticeConfig(**kwargs)


def test_boundary_coupling_allowed():
    cfg = LatticeConfig(4, 0.03, 0.01, 0.02, period=100)
    assert np.min(bond_couplings(cfg, np.linspace(0, 100, 101))) >= -1e-15


def test_json_round_trip():
    cfg = LatticeConfig(6, 0.03, 0.001, 0.02, period=104.7, gauge=math.pi, beta0=1.2)
    again = LatticeConfig.from_json(cfg.to_json())
    assert again == cfg
    assert set(json.loads(cfg.to_json())) == {
        "n_sites", "kappa0", "dkappa0", "dkappa1", "period", "gauge", "beta0"
    }


@pytest.mark.parametrize(
    "payload",
    [
        {"n_sites": 4, "kappa0": 0.03, "colour": 1},
        {"kappa0": 0.03},
        {"n_sites": 4, "kappa0": "0.03"},
        {"n_sites": True, "kappa0": 0.03},
        [4, 0.03],
    ],
)
def test_json_strict(payload):
    with pytest.raises(ConfigError):
        LatticeConfig.from_dict(payload)


def test_static_period_may_be_null():
    cfg = LatticeConfig.from_dict({"n_sites": 4, "kappa0": 0.042, "dkappa0": 0.02, "period": None})
    assert not cfg.is_driven


def test_bond_pattern_starts_weak():
    cfg = LatticeConfig(5, 0.042, 0.02)
    np.testing.assert_allclose(bond_couplings(cfg, 0.0), [0.022, 0.062, 0.022, 0.062])


def test_beta0_is_stripped():
    a = build_hamiltonian(LatticeConfig(4, 0.03, beta0=5.0), 0.0)
    assert np.all(np.diag(a) == 0)


@settings(max_examples=60, deadline=None)
@given(configs(), st.floats(0, 5000))
def test_hamiltonian_structure(cfg, z):
    h = build_hamiltonian(cfg, z)
    n = cfg.n_sites
    assert h.shape == (n, n)
    assert np.array_equal(h, h.T)
    assert np.all(np.diag(h) == 0)
    off = np.abs(np.subtract.outer(np.arange(n), np.arange(n))) > 1
    assert np.all(h[off] == 0)


@settings(max_examples=60, deadline=None)
@given(configs(), st.floats(0, 4))
def test_periodicity(cfg, cycles):
    z = cycles * cfg.period
    np.testing.assert_allclose(build_hamiltonian(cfg, z + cfg.period),
                               build_hamiltonian(cfg, z), rtol=0, atol=1e-14)


@settings(max_examples=60, deadline=None)
@given(configs(pure_cosine=True), st.floats(0, 4))
def test_gauge_identity(cfg, cycles):
    assert gauge_shift_identity_check(cfg, cycles * cfg.period) <= 1e-14


@pytest.mark.parametrize("fraction", [0.0, 0.25])
def test_gauge_identity_examples(fraction):
    cfg = LatticeConfig(4, 0.03, 0.0, 0.02, period=104.7)
    assert gauge_shift_identity_check(cfg, fraction * cfg.period) <= 1e-14


def test_gauge_identity_static_and_offset():
    assert gauge_shift_identity_check(LatticeConfig(4, 0.03), 3.0) == 0
    with pytest.raises(ConfigError):
        gauge_shift_identity_check(LatticeConfig(4, 0.03, 0.01, 0.01, period=50), 0.0)


@settings(max_examples=40, deadline=None)
@given(configs())
def test_drive_bounded(cfg):
    z = np.linspace(0, 3 * cfg.period, 997)
    assert np.all(np.abs(drive_coupling(cfg, z) - cfg.dkappa0) <= cfg.dkappa1 + 1e-15)


@pytest.mark.parametrize("gauge", [0.0, 1.0, math.pi])
def test_static_reference_is_period_average(gauge):
    cfg = LatticeConfig(6, 0.029, 0.008, 0.013, period=77.0, gauge=gauge)
    z = np.linspace(0, cfg.period, 10_001)
    stack = np.array([build_hamiltonian(cfg, zi) for zi in z])
    avg = trapezoid(stack, z, axis=0) / cfg.period
    np.testing.assert_allclose(static_reference(cfg), avg, atol=1e-8)


@pytest.mark.parametrize("k0,d0", [(0.03, 0.0), (0.042, 0.02), (0.029, -0.008)])
def test_bandwidth_is_four_kappa0(k0, d0):
    assert bandwidth(LatticeConfig(4, k0, d0)) == pytest.approx(4 * k0)


def test_bandwidth_matches_infinite_chain():
    # full width of the two bands of a long chain approaches 2 (k1 + k2)
    cfg = LatticeConfig(400, 0.042, 0.02)
    w = np.linalg.eigvalsh(build_hamiltonian(cfg, 0.0))
    assert w.max() - w.min() == pytest.approx(bandwidth(cfg), rel=1e-3)
