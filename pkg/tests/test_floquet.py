import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floqelim.errors import ConfigError, NumericalError
from floqelim.evolve import monodromy
from floqelim.floquet import (
    FloquetMode,
    FloquetSpectrum,
    ModeLabel,
    Thresholds,
    band_sweep,
    circular_distance,
    classify_modes,
    default_thresholds,
    floquet_spectrum,
    fold_quasienergy,
    pi_gap,
    pi_splitting,
    quasienergies,
    zero_splitting,
)
from floqelim.model import LatticeConfig, build_hamiltonian

from .conftest import driven


def _static_spectrum(cfg, period):
    return quasienergies(monodromy(cfg, period=period, n_steps=1))


@pytest.fixture(scope="module")
def n80_06():
    return floquet_spectrum(driven(80, 0.6))


@pytest.fixture(scope="module")
def n80_07():
    return floquet_spectrum(driven(80, 0.7))


@pytest.fixture(scope="module")
def n4_07():
    return floquet_spectrum(driven(4, 0.7))


def test_two_site_no_folding():
    k = 0.03
    spec = _static_spectrum(LatticeConfig(2, k), period=50.0)
    np.testing.assert_allclose(spec.quasienergies, [-k, k], atol=1e-12)


def test_two_site_folding():
    k = 0.03
    period = (math.pi + 0.3) / k
    spec = _static_spectrum(LatticeConfig(2, k), period)
    expected = (math.pi - 0.3) / period
    np.testing.assert_allclose(spec.quasienergies, [-expected, expected], atol=1e-12)
    # the mode with energy +k now sits at the negative branch
    plus = np.array([1, 1]) / math.sqrt(2)
    neg = spec.modes[0].vector
    assert abs(np.vdot(plus, neg)) == pytest.approx(1, abs=1e-12)


@pytest.mark.parametrize("n_sites", [4, 9, 30])
def test_static_limit_oracle(n_sites):
    cfg = LatticeConfig(n_sites, 0.042, 0.02)
    period = 0.5 * math.pi / 0.084
    spec = _static_spectrum(cfg, period)
    np.testing.assert_allclose(spec.quasienergies, np.linalg.eigvalsh(build_hamiltonian(cfg, 0)),
                               atol=1e-8)


def test_eigenphase_consistency(n4_07):
    u = monodromy(driven(4, 0.7)).matrix
    lam = np.linalg.eigvals(u)
    recon = np.exp(-1j * n4_07.quasienergies * n4_07.period)
    for value in lam:
        assert np.min(np.abs(recon - value)) <= 1e-8


def test_vectors_orthonormal(n80_06):
    v = n80_06.vectors
    np.testing.assert_allclose(v.conj().T @ v, np.eye(80), atol=1e-9)


def test_modes_diagonalise_monodromy(n4_07):
    u = monodromy(driven(4, 0.7)).matrix
    for mode in n4_07.modes:
        lam = np.exp(-1j * mode.quasienergy * n4_07.period)
        np.testing.assert_allclose(u @ mode.vector, lam * mode.vector, atol=1e-9)


def test_sorted_and_folded(n80_06):
    eps = n80_06.quasienergies
    edge = math.pi / n80_06.period
    assert np.all(np.diff(eps) >= 0)
    assert np.all(eps > -edge) and np.all(eps <= edge + 1e-15)


@settings(max_examples=200)
@given(st.floats(-1e3, 1e3), st.floats(0.5, 500))
def test_fold_idempotent(eps, period):
    once = fold_quasienergy(eps, period)
    edge = math.pi / period
    assert -edge < once <= edge
    assert fold_quasienergy(once, period) == pytest.approx(once, abs=1e-12)
    assert circular_distance(once, eps, period) == pytest.approx(0, abs=1e-9)


def test_fold_edge_maps_to_plus():
    assert fold_quasienergy(-math.pi, 1.0) == pytest.approx(math.pi)


def test_non_unitary_rejected():
    with pytest.raises(NumericalError):
        quasienergies(np.diag([1.0, 1.01]), period=1.0)
    with pytest.raises(ConfigError):
        quasienergies(np.eye(2))


def test_degenerate_cluster_is_edge_resolved():
    # two degenerate phases with a basis mixing edge and bulk sites
    n = 6
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    phases = np.array([0.3, 0.3, 1.0, 1.7, -2.0, 2.5])
    u = (q * np.exp(-1j * phases)) @ q.conj().T
    spec = quasienergies(u, period=1.0)
    v = spec.vectors
    np.testing.assert_allclose(v.conj().T @ v, np.eye(n), atol=1e-10)
    pair = [m for m in spec.modes if abs(m.quasienergy - 0.3) < 1e-8]
    assert len(pair) == 2
    # edge projector restricted to the cluster is diagonal in the returned basis
    block = np.column_stack([m.vector for m in pair])
    proj = block.conj().T @ np.diag([1, 0, 0, 0, 0, 1]) @ block
    assert abs(proj[0, 1]) <= 1e-10


@pytest.mark.parametrize("n_sites", [4, 20, 80])
def test_chiral_symmetry(n_sites):
    eps = np.sort(floquet_spectrum(driven(n_sites, 0.55)).quasienergies)
    period = driven(n_sites, 0.55).period
    remaining = list(-eps)
    for e in eps:
        d = circular_distance(np.array(remaining), e, period)
        k = int(np.argmin(d))
        assert d[k] <= 1e-7
        remaining.pop(k)


def test_default_thresholds():
    assert default_thresholds(80) == Thresholds(0.05, 0.05, 0.2)
    assert default_thresholds(4) == Thresholds(0.05, 0.25, 0.6)


@pytest.mark.parametrize("bad", [dict(tol_zero=0.0), dict(tol_pi=0.5), dict(w_min=1.0)])
def test_threshold_validation(bad):
    args = dict(tol_zero=0.05, tol_pi=0.05, w_min=0.5) | bad
    with pytest.raises(ConfigError):
        Thresholds(**args)


@pytest.mark.parametrize("n_sites", [4, 10, 40])
def test_trivial_static_chain_has_no_edge_modes(n_sites):
    cfg = LatticeConfig(n_sites, 0.042, -0.02)
    spec = classify_modes(_static_spectrum(cfg, math.pi / 0.168))
    assert spec.count(ModeLabel.PI) == 0 and spec.count(ModeLabel.ZERO) == 0


def test_topological_static_chain_has_zero_modes():
    cfg = LatticeConfig(40, 0.042, 0.02)
    spec = classify_modes(_static_spectrum(cfg, math.pi / 0.168))
    assert spec.count(ModeLabel.ZERO) == 2
    assert zero_splitting(spec) < 1e-6


def test_pi_modes_inside_window(n80_06):
    assert n80_06.count(ModeLabel.PI) == 2
    for m in n80_06.of_label(ModeLabel.PI):
        assert m.edge_weight >= 0.2
        assert abs(abs(m.quasienergy) * n80_06.period / math.pi - 1) <= 0.05


def test_no_pi_modes_above_window():
    assert floquet_spectrum(driven(80, 2.0)).count(ModeLabel.PI) == 0


def test_label_invariants(n80_06, n4_07):
    for spec in (n80_06, n4_07):
        th = spec.thresholds
        for m in spec.modes:
            x = abs(m.quasienergy) * spec.period / math.pi
            if m.label is ModeLabel.PI:
                assert 1 - th.tol_pi <= x <= 1 and m.edge_weight >= th.w_min
            if m.label is ModeLabel.ZERO:
                assert x <= th.tol_zero and m.edge_weight >= th.w_min


def test_pi_gap_contains_pi_modes(n80_06):
    gap = pi_gap(n80_06)
    edge = math.pi / n80_06.period
    assert gap > 0
    for m in n80_06.of_label(ModeLabel.PI):
        assert edge - abs(m.quasienergy) < gap


def test_pi_gap_closed_for_folded_uniform_chain():
    cfg = LatticeConfig(80, 0.03)
    period = math.pi / 0.06
    spec = classify_modes(_static_spectrum(cfg, period))
    assert pi_gap(spec) < 0.01 * math.pi / period


def test_pi_splitting_small_chain_below_gap(n4_07):
    assert pi_splitting(n4_07) < pi_gap(n4_07)


def test_pi_splitting_large_chain_degenerate(n80_06, n80_07, n4_07):
    assert pi_splitting(n80_06) < 1e-3 * math.pi / n80_06.period
    assert pi_splitting(n4_07) > pi_splitting(n80_07)


def test_pi_splitting_of_identical_pair():
    v = np.eye(2)
    modes = tuple(FloquetMode(math.pi, v[:, k], ModeLabel.PI, 1.0) for k in range(2))
    assert pi_splitting(FloquetSpectrum(modes, 1.0)) == 0


def test_pi_splitting_across_zone_edge():
    v = np.eye(2)
    modes = (FloquetMode(-math.pi + 0.01, v[:, 0], ModeLabel.PI, 1.0),
             FloquetMode(math.pi - 0.01, v[:, 1], ModeLabel.PI, 1.0))
    assert pi_splitting(FloquetSpectrum(modes, 1.0)) == pytest.approx(0.02)


def test_missing_modes_signalled(n80_06):
    with pytest.raises(NumericalError):
        zero_splitting(n80_06)
    with pytest.raises(NumericalError):
        pi_splitting(floquet_spectrum(driven(80, 2.0)))


def test_splitting_decays_with_size():
    splits = [pi_splitting(floquet_spectrum(driven(n, 0.7))) for n in (4, 6, 8, 12, 20)]
    assert all(b < a + 1e-9 for a, b in zip(splits, splits[1:]))


def test_band_sweep_cardinality():
    sweep = band_sweep(driven(4), [0.6, 0.8, 1.0])
    assert len(sweep.points) == 3
    assert all(len(p.modes) == 4 for p in sweep.points)
    np.testing.assert_allclose([p.omega_over_delta for p in sweep.points], [0.6, 0.8, 1.0])
    template = sweep.template.to_dict()
    for p in sweep.points:
        assert p.period == pytest.approx(2 * math.pi / (p.omega_over_delta * 0.12))
    assert template["n_sites"] == 4


@pytest.mark.parametrize("grid", [[], [0.5, 0.5], [0.8, 0.6], [-0.1, 0.5]])
def test_band_sweep_rejects_grid(grid):
    with pytest.raises(ConfigError):
        band_sweep(driven(4), grid)


def test_band_sweep_threads_keep_order():
    grid = np.linspace(0.3, 1.2, 8)
    serial = band_sweep(driven(6), grid)
    threaded = band_sweep(driven(6), grid, max_workers=4)
    for a, b in zip(serial.points, threaded.points):
        np.testing.assert_array_equal(a.quasienergies, b.quasienergies)


def test_sweep_csv():
    sweep = band_sweep(driven(4), [0.6, 0.8])
    buf = io.StringIO()
    sweep.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "omega_over_delta,mode_index,quasienergy_times_period_over_pi,label,edge_weight"
    assert len(lines) == 1 + 8
    r, idx, x, label, w = lines[1].split(",")
    assert float(r) == 0.6 and idx == "0" and -1 < float(x) <= 1 and label in {"BULK", "PI", "ZERO"}


@pytest.mark.slow
def test_small_chain_window_detected():
    sweep = band_sweep(driven(4), np.linspace(0.3, 1.4, 45))
    lo, hi = sweep.pi_window()
    assert 0.3 <= lo < hi <= 1.4


@pytest.mark.xfail(strict=True,
                   reason="the four-site pi pair is already resolved from omega/Delta ~ 0.33")
def test_small_chain_window_lower_edge_half():
    sweep = band_sweep(driven(4), np.linspace(0.3, 1.4, 45))
    lo, _ = sweep.pi_window()
    assert abs(lo - 0.5) <= 0.15 * 0.5
