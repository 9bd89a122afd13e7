"""Quasi-energy spectra of the monodromy operator and pi/zero mode detection.

Quasi energies are eigenphases of U(period) divided by the period and folded
into (-pi/T, pi/T].  Modes are labelled by how close they sit to the zone edge
(PI) or centre (ZERO) and by their weight on the outermost waveguides.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError
from .evolve import DEFAULT_STEPS_PER_PERIOD, MonodromyResult, monodromy, unitarity_defect
from .model import LatticeConfig, bandwidth

SMALL_CHAIN = 20  # below this the pi pair is visibly split by hybridisation
CLUSTER_TOL = 1e-10


class ModeLabel(str, Enum):
    BULK = "BULK"
    ZERO = "ZERO"
    PI = "PI"


@dataclass(frozen=True)
class Thresholds:
    """Mode classification thresholds.

    ``tol_zero`` and ``tol_pi`` are fractions of pi/T; ``w_min`` is the minimum
    probability on the two end sites.
    """

    tol_zero: float
    tol_pi: float
    w_min: float

    def __post_init__(self):
        for name in ("tol_zero", "tol_pi"):
            value = getattr(self, name)
            if not 0 < value < 0.5:
                raise ConfigError(f"{name} must lie in (0, 0.5), got {value}")
        if not 0 < self.w_min < 1:
            raise ConfigError(f"w_min must lie in (0, 1), got {self.w_min}")


def default_thresholds(n_sites: int) -> Thresholds:
    """Size-aware defaults.

    Bulk standing waves carry at most ~4/(N+1) on the two end sites, so
    ``w_min = min(0.6, 16/N)`` stays about four times above the bulk.  Short
    chains get a wide ``tol_pi`` because hybridisation pushes the pi pair off
    the zone edge.
    """
    tol_pi = 0.05 if n_sites >= SMALL_CHAIN else 0.25
    return Thresholds(tol_zero=0.05, tol_pi=tol_pi, w_min=min(0.6, 16.0 / n_sites))


@dataclass(frozen=True)
class FloquetMode:
    quasienergy: float
    vector: np.ndarray
    label: ModeLabel
    edge_weight: float


@dataclass(frozen=True)
class FloquetSpectrum:
    """All N Floquet modes at one drive period, sorted by quasi energy."""

    modes: tuple
    period: float
    omega_over_delta: float | None = None
    thresholds: Thresholds | None = None
    eigenvalues: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def omega(self) -> float:
        return 2 * math.pi / self.period

    @property
    def quasienergies(self) -> np.ndarray:
        return np.array([m.quasienergy for m in self.modes])

    @property
    def scaled(self) -> np.ndarray:
        """Quasi energies in units of pi/T."""
        return self.quasienergies * self.period / math.pi

    @property
    def labels(self) -> list:
        return [m.label for m in self.modes]

    @property
    def edge_weights(self) -> np.ndarray:
        return np.array([m.edge_weight for m in self.modes])

    @property
    def vectors(self) -> np.ndarray:
        """Columns are the mode vectors."""
        return np.column_stack([m.vector for m in self.modes])

    def count(self, label: ModeLabel) -> int:
        return sum(m.label == label for m in self.modes)

    def of_label(self, label: ModeLabel) -> list:
        return [m for m in self.modes if m.label == label]


def fold_quasienergy(eps, period: float):
    """Fold into (-pi/T, pi/T]."""
    half = math.pi / period
    folded = half - np.mod(half - np.asarray(eps, dtype=float), 2 * half)
    return float(folded) if np.ndim(folded) == 0 else folded


def circular_distance(a, b, period: float):
    """Distance between quasi energies on the circle of circumference 2 pi/T."""
    span = 2 * math.pi / period
    d = np.mod(np.abs(np.asarray(a) - np.asarray(b)), span)
    out = np.minimum(d, span - d)
    return float(out) if np.ndim(out) == 0 else out


def edge_weight(vectors, n_edge: int = 1) -> np.ndarray:
    """Probability on the ``n_edge`` outermost sites of each end (per column)."""
    v = np.asarray(vectors)
    if v.ndim == 1:
        v = v[:, None]
    p = np.abs(v) ** 2
    return p[:n_edge].sum(axis=0) + p[-n_edge:].sum(axis=0)


def _clusters(eigvals, tol):
    n = len(eigvals)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(eigvals[i] - eigvals[j]) < tol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [g for g in groups.values() if len(g) > 1]


def _fix_phase(v):
    k = np.argmax(np.abs(v))
    return v * (abs(v[k]) / v[k])


def quasienergies(u, period: float | None = None,
                  omega_over_delta: float | None = None) -> FloquetSpectrum:
    """Diagonalise the monodromy and fold its eigenphases.

    ``u`` is a :class:`MonodromyResult` or a raw unitary matrix (then ``period``
    is required).  Every mode starts out labelled BULK; see
    :func:`classify_modes`.
    """
    if isinstance(u, MonodromyResult):
        period = u.period if period is None else period
        mat = u.matrix
    else:
        mat = np.asarray(u, dtype=np.complex128)
        if period is None:
            raise ConfigError("period is required with a raw matrix")
    if not period > 0:
        raise ConfigError(f"period must be > 0, got {period}")
    defect = unitarity_defect(mat)
    if defect > 1e-6:
        raise NumericalError(f"matrix is not unitary (defect {defect:.3g})")

    # complex Schur form of a normal matrix is diagonal, with orthonormal Z
    t, z = scipy.linalg.schur(mat, output="complex")
    lam = np.diag(t).copy()
    for group in _clusters(lam, CLUSTER_TOL):
        block, _ = np.linalg.qr(z[:, group])
        edge = np.zeros(mat.shape[0])
        edge[[0, -1]] = 1.0
        m = block.conj().T @ (edge[:, None] * block)
        _, rot = np.linalg.eigh(m)
        z[:, group] = block @ rot

    eps = fold_quasienergy(-np.angle(lam) / period, period)
    order = np.argsort(eps, kind="stable")
    weights = edge_weight(z)
    modes = tuple(
        FloquetMode(float(eps[j]), _fix_phase(z[:, j]), ModeLabel.BULK, float(weights[j]))
        for j in order
    )
    return FloquetSpectrum(modes, float(period), omega_over_delta, None, lam[order])


def classify_modes(spectrum: FloquetSpectrum, tol_zero: float | None = None,
                   tol_pi: float | None = None, w_min: float | None = None) -> FloquetSpectrum:
    """Label each mode PI, ZERO or BULK; unspecified thresholds use the size defaults."""
    n = len(spectrum.modes)
    base = default_thresholds(n)
    th = Thresholds(
        base.tol_zero if tol_zero is None else tol_zero,
        base.tol_pi if tol_pi is None else tol_pi,
        base.w_min if w_min is None else w_min,
    )
    modes = []
    for mode in spectrum.modes:
        x = abs(mode.quasienergy) * spectrum.period / math.pi
        label = ModeLabel.BULK
        if mode.edge_weight >= th.w_min:
            if abs(1 - x) <= th.tol_pi:
                label = ModeLabel.PI
            elif x <= th.tol_zero:
                label = ModeLabel.ZERO
        modes.append(replace(mode, label=label))
    return replace(spectrum, modes=tuple(modes), thresholds=th)


def floquet_spectrum(config: LatticeConfig, n_steps: int = DEFAULT_STEPS_PER_PERIOD,
                     thresholds: Thresholds | None = None, period: float | None = None,
                     backend: str | None = None) -> FloquetSpectrum:
    """Monodromy, diagonalisation and classification for one configuration."""
    mono = monodromy(config, period=period, n_steps=n_steps, backend=backend)
    delta = bandwidth(config)
    ratio = (2 * math.pi / mono.period) / delta if delta > 0 else None
    spec = quasienergies(mono, omega_over_delta=ratio)
    if thresholds is None:
        return classify_modes(spec)
    return classify_modes(spec, thresholds.tol_zero, thresholds.tol_pi, thresholds.w_min)


def period_for(template: LatticeConfig, omega_over_delta: float) -> float:
    """Drive period that puts ``template`` at the given omega/Delta."""
    delta = bandwidth(template)
    if not delta > 0:
        raise ConfigError("bandwidth must be positive to define omega/Delta")
    if not omega_over_delta > 0:
        raise ConfigError(f"omega/Delta must be > 0, got {omega_over_delta}")
    return 2 * math.pi / (omega_over_delta * delta)


@dataclass(frozen=True)
class SpectrumSweep:
    points: tuple
    grid: np.ndarray
    template: LatticeConfig

    def pi_counts(self) -> np.ndarray:
        return np.array([p.count(ModeLabel.PI) for p in self.points])

    def pi_window(self, min_modes: int = 2):
        """(lowest, highest) grid value with at least ``min_modes`` PI modes, or None."""
        hits = self.grid[self.pi_counts() >= min_modes]
        if hits.size == 0:
            return None
        return float(hits.min()), float(hits.max())

    def write_csv(self, target) -> None:
        if isinstance(target, (str, Path)):
            with open(target, "w", newline="") as fh:
                self.write_csv(fh)
            return
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(["omega_over_delta", "mode_index", "quasienergy_times_period_over_pi",
                         "label", "edge_weight"])
        for r, point in zip(self.grid, self.points):
            for j, mode in enumerate(point.modes):
                writer.writerow([repr(float(r)), j,
                                 repr(float(mode.quasienergy * point.period / math.pi)),
                                 mode.label.value, repr(float(mode.edge_weight))])


def band_sweep(template: LatticeConfig, omega_over_delta_grid,
               n_steps: int = DEFAULT_STEPS_PER_PERIOD, thresholds: Thresholds | None = None,
               max_workers: int = 1, backend: str | None = None) -> SpectrumSweep:
    """Floquet spectra over a strictly increasing omega/Delta grid.

    Only the period changes between points.  Points are independent; with
    ``max_workers > 1`` they run on a thread pool and are merged in grid order.
    """
    grid = np.asarray(omega_over_delta_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError("omega/Delta grid must be a non-empty 1-d sequence")
    if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ConfigError("omega/Delta grid must be positive and strictly increasing")

    def point(r):
        cfg = template.replace(period=period_for(template, r))
        return floquet_spectrum(cfg, n_steps=n_steps, thresholds=thresholds, backend=backend)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            points = tuple(pool.map(point, grid))
    else:
        points = tuple(point(r) for r in grid)
    return SpectrumSweep(points, grid, template)


def pi_gap(spectrum: FloquetSpectrum) -> float:
    """Distance from the zone edge pi/T to the nearest BULK quasi energy."""
    bulk = spectrum.of_label(ModeLabel.BULK)
    if len(bulk) < 2:
        raise NumericalError("pi gap needs at least two BULK modes")
    edge = math.pi / spectrum.period
    gap = min(edge - abs(m.quasienergy) for m in bulk)
    return max(0.0, gap)


def pi_splitting(spectrum: FloquetSpectrum) -> float:
    """Circular distance between the two PI quasi energies nearest the zone edge."""
    pis = spectrum.of_label(ModeLabel.PI)
    if len(pis) < 2:
        raise NumericalError(f"pi splitting needs two PI modes, found {len(pis)}")
    edge = math.pi / spectrum.period
    a, b = sorted(pis, key=lambda m: edge - abs(m.quasienergy))[:2]
    return circular_distance(a.quasienergy, b.quasienergy, spectrum.period)


def zero_splitting(spectrum: FloquetSpectrum) -> float:
    """Distance between the two ZERO quasi energies nearest zero."""
    zeros = spectrum.of_label(ModeLabel.ZERO)
    if len(zeros) < 2:
        raise NumericalError(f"zero splitting needs two ZERO modes, found {len(zeros)}")
    a, b = sorted(zeros, key=lambda m: abs(m.quasienergy))[:2]
    return abs(a.quasienergy - b.quasienergy)
