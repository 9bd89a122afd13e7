import io
import math

import numpy as np
import pytest
import scipy.linalg

from floqelim.errors import ConfigError, NumericalError
from floqelim.evolve import (
    MonodromyResult,
    PropagationRecord,
    evolution_operator,
    monodromy,
    propagate,
    site_state,
    step_unitary,
    stroboscopic_series,
    unitarity_defect,
)
from floqelim.model import LatticeConfig, build_hamiltonian

from .conftest import driven


def test_site_state():
    psi = site_state(4, 4)
    assert psi[3] == 1 and np.linalg.norm(psi) == 1
    with pytest.raises(ConfigError):
        site_state(4, 0)


def test_step_unitary_matches_expm():
    h = build_hamiltonian(LatticeConfig(5, 0.042, 0.02), 0.0)
    np.testing.assert_allclose(step_unitary(h, 3.7), scipy.linalg.expm(-1j * h * 3.7), atol=1e-13)


def test_step_unitary_rejects_non_hermitian():
    with pytest.raises(ConfigError):
        step_unitary(np.array([[0, 1], [0.5, 0]]), 1.0)


@pytest.mark.parametrize("n_sites", [2, 3, 4, 9, 20])
def test_monodromy_unitary(backend, n_sites):
    mono = monodromy(driven(n_sites), backend=backend)
    assert unitarity_defect(mono.matrix) <= 1e-9


def test_backends_agree():
    cfg = driven(7, 0.5)
    a = monodromy(cfg, backend="python").matrix
    pytest.importorskip("floqelim._chain_kernels")
    b = monodromy(cfg, backend="compiled").matrix
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_static_propagation_is_exact(backend):
    cfg = LatticeConfig(4, 0.042, 0.02)
    rec = propagate(cfg, site_state(4, 1), 300.0, 1.0, backend=backend)
    h = build_hamiltonian(cfg, 0.0)
    for z, psi in zip(rec.z[::37], rec.states[::37]):
        np.testing.assert_allclose(psi, scipy.linalg.expm(-1j * h * z)[:, 0], atol=1e-10)


def test_composition(backend):
    cfg = driven(6, 0.6)
    u1 = monodromy(cfg, backend=backend).matrix
    u2 = evolution_operator(cfg, 0.0, 2 * cfg.period, 2000, backend=backend)
    np.testing.assert_allclose(u2, u1 @ u1, atol=1e-10)
    half = evolution_operator(cfg, 0.0, cfg.period / 2, 500, backend=backend)
    rest = evolution_operator(cfg, cfg.period / 2, cfg.period, 500, backend=backend)
    np.testing.assert_allclose(rest @ half, u1, atol=1e-10)


def test_second_order_convergence(backend):
    cfg = driven(4, 0.7)
    ref = evolution_operator(cfg, 0.0, cfg.period, 12_800, backend=backend)
    errs = [np.linalg.norm(evolution_operator(cfg, 0.0, cfg.period, n, backend=backend) - ref, 2)
            for n in (50, 100, 200)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    for r in ratios:
        assert r == pytest.approx(4, abs=0.5)


def test_half_period_conjugation(backend):
    # a half-period shift is a pi gauge shift, so the monodromies are conjugate
    cfg = driven(4, 0.5)
    other = cfg.replace(gauge=cfg.gauge + math.pi)
    v = evolution_operator(cfg, 0.0, cfg.period / 2, 500, backend=backend)
    u = monodromy(cfg, backend=backend).matrix
    u_pi = monodromy(other, backend=backend).matrix
    np.testing.assert_allclose(u_pi, v @ u @ v.conj().T, atol=1e-10)


def test_norm_conserved(backend):
    cfg = driven(12, 0.4)
    rec = propagate(cfg, site_state(12, 1), 3 * cfg.period, cfg.period / 400, stride=7,
                    backend=backend)
    assert np.max(np.abs(rec.norms - 1)) <= 1e-9


def test_propagate_sampling():
    cfg = LatticeConfig(4, 0.03)
    rec = propagate(cfg, site_state(4, 2), 10.0, 0.3, stride=4, extra_steps=[5])
    assert rec.meta["n_steps"] == 34
    assert rec.z[0] == 0 and rec.z[-1] == pytest.approx(10.0)
    steps = list(rec.meta["steps"])
    assert 5 in steps and steps[-1] == 34 and steps[:3] == [0, 4, 5]


@pytest.mark.parametrize(
    "kwargs",
    [dict(dz=2.0), dict(dz=0.0), dict(stride=0), dict(z_max=-1.0)],
)
def test_propagate_rejects(kwargs):
    cfg = LatticeConfig(4, 0.03)
    args = dict(z_max=10.0, dz=0.5, stride=1) | kwargs
    with pytest.raises(ConfigError):
        propagate(cfg, site_state(4, 1), **args)


def test_dz_must_resolve_drive():
    cfg = driven(4, 0.7)
    with pytest.raises(ConfigError):
        propagate(cfg, site_state(4, 1), cfg.period, cfg.period / 100)


def test_unnormalised_input_rejected():
    with pytest.raises(ConfigError):
        propagate(LatticeConfig(4, 0.03), np.ones(4), 1.0, 0.1)


def test_stroboscopic_series_matches_propagate(backend):
    cfg = driven(4, 0.46)
    psi0 = site_state(4, 1)
    strobe = stroboscopic_series(cfg, psi0, 3, backend=backend)
    rec = propagate(cfg, psi0, 3 * cfg.period, cfg.period / 1000, stride=1000, backend=backend)
    np.testing.assert_allclose(rec.states, strobe.states, atol=1e-10)


def test_static_monodromy_needs_period():
    with pytest.raises(ConfigError):
        monodromy(LatticeConfig(4, 0.03))
    assert monodromy(LatticeConfig(4, 0.03), period=10.0).period == 10.0


def test_monodromy_rejects_non_unitary():
    with pytest.raises(NumericalError):
        MonodromyResult(np.diag([1.0, 1.001]), 1.0, 0.0, LatticeConfig(2, 0.03))


def test_record_csv():
    cfg = LatticeConfig(3, 0.03)
    rec = propagate(cfg, site_state(3, 1), 1.0, 0.5)
    text = rec.to_csv()
    lines = text.splitlines()
    assert lines[0] == "z,site,re,im,intensity"
    assert len(lines) == 1 + 3 * len(rec)
    assert lines[1].startswith("0.0,1,1.0,0.0,1.0")
    buf = io.StringIO()
    rec.write_csv(buf)
    assert buf.getvalue() == text


def test_record_validation():
    cfg = LatticeConfig(2, 0.03)
    with pytest.raises(ConfigError):
        PropagationRecord(np.array([0.0, 0.0]), np.zeros((2, 2)), cfg)
    with pytest.raises(ConfigError):
        PropagationRecord(np.array([1.0]), np.zeros((1, 2)), cfg)
