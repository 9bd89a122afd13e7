"""Projector reduction onto a kept set of waveguides and elimination diagnostics.

The eliminated amplitudes are slaved to the kept ones, which leaves the Schur
complement ``PHP - PHQ (QHQ)^-1 QHP`` as the effective Hamiltonian.  Site
indices in this module are 1-based, like everywhere else in the public API.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .errors import ConfigError, NumericalError
from .model import LatticeConfig, bandwidth, build_hamiltonian, static_reference


@dataclass(frozen=True)
class SubspacePartition:
    """Kept (P) and eliminated (Q) site sets, both 1-based and sorted."""

    n_sites: int
    kept: tuple
    eliminated: tuple

    def __post_init__(self):
        kept = tuple(sorted(int(i) for i in self.kept))
        elim = tuple(sorted(int(i) for i in self.eliminated))
        object.__setattr__(self, "kept", kept)
        object.__setattr__(self, "eliminated", elim)
        if not kept or not elim:
            raise ConfigError("both kept and eliminated sets must be non-empty")
        if len(set(kept)) != len(kept) or set(kept) & set(elim):
            raise ConfigError("kept and eliminated sets must be disjoint without repeats")
        if set(kept) | set(elim) != set(range(1, self.n_sites + 1)):
            raise ConfigError(f"partition must cover sites 1..{self.n_sites}")

    @classmethod
    def from_kept(cls, n_sites: int, kept) -> SubspacePartition:
        kept = tuple(kept)
        bad = [i for i in kept if not 1 <= i <= n_sites]
        if bad:
            raise ConfigError(f"kept sites out of range 1..{n_sites}: {bad}")
        return cls(n_sites, kept, tuple(i for i in range(1, n_sites + 1) if i not in kept))

    @classmethod
    def outer(cls, n_sites: int) -> SubspacePartition:
        """Keep the two end waveguides."""
        if n_sites < 3:
            raise ConfigError("the outer partition needs at least 3 sites")
        return cls.from_kept(n_sites, (1, n_sites))

    @property
    def kept_index(self) -> np.ndarray:
        return np.array(self.kept) - 1

    @property
    def eliminated_index(self) -> np.ndarray:
        return np.array(self.eliminated) - 1


def _complex_pairs(m):
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(m)]


@dataclass(frozen=True)
class EffectiveHamiltonian:
    matrix: np.ndarray
    partition: SubspacePartition
    condition_ratio: float

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        k = len(self.partition.kept)
        if m.shape != (k, k):
            raise ConfigError(f"matrix shape {m.shape} does not match {k} kept sites")
        scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
        if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-12 * scale:
            raise NumericalError("effective Hamiltonian is not Hermitian")
        object.__setattr__(self, "matrix", m)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def to_dict(self) -> dict:
        return {
            "matrix": _complex_pairs(self.matrix),
            "kept_indices": list(self.partition.kept),
            "eliminated_indices": list(self.partition.eliminated),
            "condition_ratio": self.condition_ratio,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def project_effective(h, partition: SubspacePartition) -> EffectiveHamiltonian:
    """Schur complement of the eliminated block.

    ``condition_ratio`` is ``||(QHQ)^-1 QHP||_2``, the size of the slaved
    amplitudes per unit kept amplitude; it should be well below one.
    """
    h = np.asarray(h, dtype=np.complex128)
    n = partition.n_sites
    if h.shape != (n, n):
        raise ConfigError(f"H has shape {h.shape}, partition expects ({n}, {n})")
    p, q = partition.kept_index, partition.eliminated_index
    hpp, hpq = h[np.ix_(p, p)], h[np.ix_(p, q)]
    hqp, hqq = h[np.ix_(q, p)], h[np.ix_(q, q)]
    scale = np.linalg.norm(h, 2)
    smin = np.linalg.svd(hqq, compute_uv=False).min()
    if smin <= 1e-12 * max(scale, np.finfo(float).tiny):
        raise NumericalError(f"eliminated block is singular (sigma_min = {smin:.3g})")
    slave = scipy.linalg.lu_solve(scipy.linalg.lu_factor(hqq), hqp)
    heff = hpp - hpq @ slave
    heff = 0.5 * (heff + heff.conj().T)
    return EffectiveHamiltonian(heff, partition, float(np.linalg.norm(slave, 2)))


def ssh4_effective(kappa1: float, kappa2: float) -> EffectiveHamiltonian:
    """Closed form for the four-site chain kappa1-kappa2-kappa1 reduced to its ends."""
    if kappa2 == 0:
        raise ConfigError("kappa2 must be non-zero")
    t = -kappa1**2 / kappa2
    return EffectiveHamiltonian(np.array([[0, t], [t, 0]], dtype=np.complex128),
                                SubspacePartition.outer(4), abs(kappa1 / kappa2))


def ssh_chain(n_sites: int, kappa1: float, kappa2: float) -> np.ndarray:
    """Static chain with bonds kappa1, kappa2, kappa1, ... from the left edge."""
    bonds = np.where(np.arange(n_sites - 1) % 2 == 0, kappa1, kappa2)
    return np.diag(bonds, 1) + np.diag(bonds, -1)


def adiabatic_ratio(kappa0: float, dkappa: float) -> float:
    """|(kappa0 - dk) / (kappa0 + dk)|; below one the end pair decouples from the bulk."""
    den = kappa0 + dkappa
    if den == 0:
        raise ZeroDivisionError("kappa0 + dkappa = 0")
    return abs((kappa0 - dkappa) / den)


def effective_stroboscopic_coupling(config: LatticeConfig) -> float:
    """One-period average of the staggered coupling, which is just ``dkappa0``."""
    return config.dkappa0


class Regime(str, Enum):
    AE = "AE"
    HFLE = "HFLE"
    QAE_CANDIDATE = "QAE_CANDIDATE"
    NONE = "NONE"


@dataclass(frozen=True)
class RegimeThresholds:
    margin: float = 0.05
    hf_threshold: float = 4.0
    qae_window_large: tuple = (1 / 3, 1.0)
    qae_window_small: tuple = (0.5, 1.4)
    small_chain: int = 20

    def qae_window(self, n_sites: int) -> tuple:
        return self.qae_window_small if n_sites < self.small_chain else self.qae_window_large


def classify_regime(config: LatticeConfig,
                    thresholds: RegimeThresholds | None = None) -> Regime:
    """Which elimination mechanism, if any, applies to ``config``."""
    from .floquet import ModeLabel, floquet_spectrum

    th = thresholds or RegimeThresholds()
    limit = 1 - th.margin
    if not config.is_driven:
        return Regime.AE if adiabatic_ratio(config.kappa0, config.dkappa0) < limit else Regime.NONE
    delta = bandwidth(config)
    if delta <= 0:
        return Regime.NONE
    ratio = config.omega / delta
    if ratio >= th.hf_threshold * (1 - 1e-9):
        eff = effective_stroboscopic_coupling(config)
        if adiabatic_ratio(config.kappa0, eff) < limit:
            return Regime.HFLE
    lo, hi = th.qae_window(config.n_sites)
    if lo * (1 - 1e-9) <= ratio <= hi * (1 + 1e-9):
        if floquet_spectrum(config).count(ModeLabel.PI) >= 2:
            return Regime.QAE_CANDIDATE
    return Regime.NONE


@dataclass(frozen=True)
class DecayFit:
    """Exponential fit ``||H_eff|| ~ exp(intercept + slope N)`` with ``n_critical = -1/slope``."""

    sizes: tuple
    norms: tuple
    n_critical: float
    slope: float
    intercept: float
    r_squared: float

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ConfigError("sizes must increase strictly")
        if any(not v > 0 for v in self.norms):
            raise NumericalError("all norms must be positive")
        if not self.n_critical > 0:
            raise NumericalError(f"n_critical must be positive, got {self.n_critical}")

    def predict(self, n_sites) -> np.ndarray:
        return np.exp(self.intercept + self.slope * np.asarray(n_sites, dtype=float))

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "norms": list(self.norms),
            "n_critical": self.n_critical,
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def decay_fit(template: LatticeConfig, sizes) -> DecayFit:
    """Fit ln||H_eff|| against N for the outer-pair reduction of static chains."""
    if template.is_driven:
        raise ConfigError("decay_fit needs a static template (dkappa1 = 0)")
    ratio = adiabatic_ratio(template.kappa0, template.dkappa0)
    if not ratio < 1:
        raise ConfigError(f"adiabatic ratio {ratio:.4g} >= 1: norms do not decay")
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) < 2:
        raise ConfigError("need at least two sizes")
    if any(n < 4 or n % 2 for n in sizes):
        raise ConfigError("sizes must be even and >= 4")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("sizes must increase strictly")

    norms = []
    for n in sizes:
        h = build_hamiltonian(template.replace(n_sites=n), 0.0)
        norms.append(project_effective(h, SubspacePartition.outer(n)).norm)
    x = np.array(sizes, dtype=float)
    y = np.log(norms)
    slope, intercept = np.polyfit(x, y, 1)
    if not slope < 0:
        raise NumericalError(f"norms do not decay with N (slope {slope:.3g})")
    resid = y - (intercept + slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(sizes, tuple(float(v) for v in norms), float(-1 / slope),
                    float(slope), float(intercept), r2)


def averaged_monodromy_error(config: LatticeConfig, n_steps: int = 1000,
                             backend: str | None = None) -> float:
    """||U(period) - exp(-i H_avg period)||_2 for a driven lattice."""
    from .evolve import monodromy

    if not config.is_driven:
        raise ConfigError("needs a driven lattice")
    u = monodromy(config, n_steps=n_steps, backend=backend).matrix
    h_avg = static_reference(config)
    ref = scipy.linalg.expm(-1j * h_avg * config.period)
    return float(np.linalg.norm(u - ref, 2))


def two_level_transfer_length(kappa1: float, kappa2: float) -> float:
    """Propagation length of full end-to-end transfer under the closed-form pair."""
    coupling = abs(kappa1**2 / kappa2)
    if coupling == 0:
        return math.inf
    return math.pi / (2 * coupling)
