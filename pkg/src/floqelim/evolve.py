"""Unitary propagation of i dpsi/dz = H(z) psi and the one-period monodromy.

The stepper is the exponential midpoint rule: each step of length ``dz``
applies ``exp(-i H(z + dz/2) dz)``.  It is second order and exactly unitary up
to eigensolver rounding, which matters more here than a higher order: quasi
energies are read off the eigenphases of long step products.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._backend import get_kernels
from .errors import ConfigError, NumericalError
from .model import LatticeConfig, bond_couplings

DEFAULT_STEPS_PER_PERIOD = 1000
MIN_STEPS_PER_PERIOD = 200  # dz <= period / 200 resolves the drive
MAX_DZ_KAPPA = 0.05  # dz <= 0.05 / kappa0
NORM_TOL = 1e-9


def site_state(n_sites: int, site: int) -> np.ndarray:
    """Unit excitation of waveguide ``site`` (1-based)."""
    if not 1 <= site <= n_sites:
        raise ConfigError(f"site must be in 1..{n_sites}, got {site}")
    psi = np.zeros(n_sites, dtype=np.complex128)
    psi[site - 1] = 1.0
    return psi


def _as_state(psi, n_sites):
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape != (n_sites,):
        raise ConfigError(f"state must have shape ({n_sites},), got {psi.shape}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > NORM_TOL:
        raise ConfigError(f"input state must be normalised, |psi| = {norm:.12g}")
    return psi


def step_unitary(h_mid, dz: float) -> np.ndarray:
    """exp(-i H dz) for a Hermitian ``H`` via its eigendecomposition."""
    h_mid = np.asarray(h_mid)
    if h_mid.ndim != 2 or h_mid.shape[0] != h_mid.shape[1]:
        raise ConfigError(f"H must be square, got shape {h_mid.shape}")
    if not dz > 0:
        raise ConfigError(f"dz must be > 0, got {dz}")
    scale = max(1.0, float(np.max(np.abs(h_mid), initial=0.0)))
    if np.max(np.abs(h_mid - h_mid.conj().T), initial=0.0) > 1e-12 * scale:
        raise ConfigError("H is not Hermitian")
    w, v = np.linalg.eigh(h_mid)
    return (v * np.exp(-1j * w * dz)) @ v.conj().T


@dataclass(frozen=True)
class PropagationRecord:
    """States sampled along z for one run.

    ``states[k]`` is the amplitude vector at ``z[k]``; ``z[0] == 0`` holds the
    injected input.
    """

    z: np.ndarray
    states: np.ndarray
    config: LatticeConfig
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        states = np.asarray(self.states, dtype=np.complex128)
        if z.ndim != 1 or states.shape != (z.shape[0], self.config.n_sites):
            raise ConfigError(f"inconsistent record shapes {z.shape} / {states.shape}")
        if z.shape[0] == 0:
            raise ConfigError("empty propagation record")
        if z[0] != 0 or np.any(np.diff(z) <= 0):
            raise ConfigError("z samples must start at 0 and increase strictly")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return self.z.shape[0]

    @property
    def intensities(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def write_csv(self, target) -> None:
        """Write ``z,site,re,im,intensity`` rows, z-major and site-minor."""
        if isinstance(target, (str, Path)):
            with open(target, "w", newline="") as fh:
                self.write_csv(fh)
            return
        writer = csv.writer(target, lineterminator="\n")
        writer.writerow(["z", "site", "re", "im", "intensity"])
        intens = self.intensities
        for k, zk in enumerate(self.z):
            for j in range(self.config.n_sites):
                amp = self.states[k, j]
                writer.writerow([repr(float(zk)), j + 1, repr(float(amp.real)),
                                 repr(float(amp.imag)), repr(float(intens[k, j]))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


@dataclass(frozen=True)
class MonodromyResult:
    """One-period evolution operator U(period; gauge)."""

    matrix: np.ndarray
    period: float
    gauge: float
    config: LatticeConfig

    def __post_init__(self):
        u = np.asarray(self.matrix, dtype=np.complex128)
        object.__setattr__(self, "matrix", u)
        defect = unitarity_defect(u)
        if defect > 1e-9:
            raise NumericalError(f"monodromy is not unitary: |U^H U - I|_max = {defect:.3g}")


def unitarity_defect(u) -> float:
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def _bond_table(config, z_start, n_steps, dz):
    mids = z_start + (np.arange(n_steps) + 0.5) * dz
    return np.ascontiguousarray(bond_couplings(config, mids), dtype=float)


def evolution_operator(config: LatticeConfig, z_start: float, z_stop: float,
                       n_steps: int, backend: str | None = None) -> np.ndarray:
    """Time-ordered product U(z_stop, z_start) over ``n_steps`` midpoint steps."""
    if n_steps < 1:
        raise ConfigError(f"n_steps must be >= 1, got {n_steps}")
    if not z_stop > z_start:
        raise ConfigError("z_stop must exceed z_start")
    dz = (z_stop - z_start) / n_steps
    kernels = get_kernels(backend)
    return kernels.chain_product(_bond_table(config, z_start, n_steps, dz), dz)


def _check_step(config, dz):
    if not (math.isfinite(dz) and dz > 0):
        raise ConfigError(f"dz must be a positive finite length, got {dz}")
    slack = 1 + 1e-9
    if dz > MAX_DZ_KAPPA / config.kappa0 * slack:
        raise ConfigError(f"dz={dz} exceeds 0.05/kappa0 = {MAX_DZ_KAPPA / config.kappa0:.6g}")
    if config.is_driven and dz > config.period / MIN_STEPS_PER_PERIOD * slack:
        raise ConfigError(
            f"dz={dz} does not resolve the drive (needs <= period/{MIN_STEPS_PER_PERIOD})"
        )


def propagate(config: LatticeConfig, psi0, z_max: float, dz: float, stride: int = 1,
              extra_steps=None, backend: str | None = None) -> PropagationRecord:
    """Integrate from z = 0 to ``z_max`` with steps of at most ``dz``.

    The step is shrunk so that an integer number of steps lands on ``z_max``.
    Every ``stride``-th step is recorded, plus any step index listed in
    ``extra_steps``; the final state is always kept.
    """
    config.validate()
    if not (isinstance(z_max, (int, float)) and math.isfinite(z_max) and z_max > 0):
        raise ConfigError(f"z_max must be a positive finite length, got {z_max!r}")
    _check_step(config, dz)
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    psi0 = _as_state(psi0, config.n_sites)
    n_steps = max(1, math.ceil(z_max / dz - 1e-9))
    dz_eff = z_max / n_steps
    keep = np.arange(0, n_steps + 1, stride, dtype=np.int64)
    if extra_steps is not None:
        extra = np.asarray(extra_steps, dtype=np.int64)
        if extra.size and (extra.min() < 0 or extra.max() > n_steps):
            raise ConfigError(f"extra_steps must lie in 0..{n_steps}")
        keep = np.union1d(keep, extra)
    if keep[-1] != n_steps:
        keep = np.append(keep, n_steps)
    kernels = get_kernels(backend)
    states = kernels.chain_propagate(_bond_table(config, 0.0, n_steps, dz_eff), dz_eff,
                                     psi0, np.ascontiguousarray(keep, dtype=np.int64))
    record = PropagationRecord(keep * dz_eff, states, config,
                               meta={"dz": dz_eff, "n_steps": n_steps, "stride": stride,
                                     "steps": keep})
    drift = np.max(np.abs(record.norms - 1))
    if drift > NORM_TOL:
        raise NumericalError(f"norm drifted by {drift:.3g} during propagation")
    return record


def monodromy(config: LatticeConfig, period: float | None = None,
              n_steps: int = DEFAULT_STEPS_PER_PERIOD,
              backend: str | None = None) -> MonodromyResult:
    """Evolution operator over one drive period starting at z = 0.

    Static lattices need an explicit ``period`` (any sampling window); it is
    ignored in favour of ``config.period`` when the lattice is driven.
    """
    config.validate()
    if config.is_driven:
        if period is not None and not math.isclose(period, config.period, rel_tol=1e-12):
            raise ConfigError("explicit period conflicts with the drive period")
        period = config.period
    elif period is None:
        period = config.period
    if period is None or not (math.isfinite(period) and period > 0):
        raise ConfigError(f"invalid period {period!r}")
    u = evolution_operator(config, 0.0, period, n_steps, backend=backend)
    return MonodromyResult(u, period, config.gauge, config)


def stroboscopic_series(config: LatticeConfig, psi0, n_periods: int,
                        n_steps: int = DEFAULT_STEPS_PER_PERIOD, period: float | None = None,
                        backend: str | None = None) -> PropagationRecord:
    """States at z = 0, T, 2T, ..., n_periods T by repeated monodromy application."""
    if n_periods < 1:
        raise ConfigError(f"n_periods must be >= 1, got {n_periods}")
    mono = monodromy(config, period=period, n_steps=n_steps, backend=backend)
    psi = _as_state(psi0, config.n_sites)
    states = [psi]
    for _ in range(n_periods):
        psi = mono.matrix @ psi
        states.append(psi)
    z = mono.period * np.arange(n_periods + 1)
    record = PropagationRecord(z, np.array(states), config,
                               meta={"period": mono.period, "n_steps": n_steps})
    drift = np.max(np.abs(record.norms - 1))
    if drift > NORM_TOL:
        raise NumericalError(f"norm drifted by {drift:.3g}")
    return record
