"""Lattice parameterisation and the instantaneous coupled-mode Hamiltonian.

All rates are in mm^-1, lengths in mm and angles in radians.  The open chain
has bonds alternating ``kappa0 - dk(z)`` (even bond index, starting at the
edge) and ``kappa0 + dk(z)`` (odd index), with the staggered drive

    dk(z) = dkappa0 + dkappa1 * cos(2 pi z / period + gauge).

The uniform propagation constant ``beta0`` only contributes a global phase; it
is kept for provenance and never enters the matrices built here.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_JSON_KEYS = ("n_sites", "kappa0", "dkappa0", "dkappa1", "period", "gauge", "beta0")


@dataclass(frozen=True)
class LatticeConfig:
    """Parameters of a driven coupled-waveguide array."""

    n_sites: int
    kappa0: float
    dkappa0: float = 0.0
    dkappa1: float = 0.0
    period: float | None = None
    gauge: float = 0.0
    beta0: float = 0.0

    def __post_init__(self):
        if isinstance(self.n_sites, bool) or int(self.n_sites) != self.n_sites:
            raise ConfigError(f"n_sites must be an integer, got {self.n_sites!r}")
        object.__setattr__(self, "n_sites", int(self.n_sites))
        for name in ("kappa0", "dkappa0", "dkappa1", "gauge", "beta0"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.period is not None:
            object.__setattr__(self, "period", float(self.period))
        self.validate()

    def validate(self):
        if self.n_sites < 2:
            raise ConfigError(f"n_sites must be >= 2, got {self.n_sites}")
        if self.kappa0 <= 0:
            raise ConfigError(f"kappa0 must be > 0, got {self.kappa0}")
        # small slack so kappa0 == |dkappa0| + |dkappa1| survives float rounding
        if self.kappa0 - abs(self.dkappa0) - abs(self.dkappa1) < -1e-12 * self.kappa0:
            raise ConfigError(
                "couplings would turn negative: kappa0 - |dkappa0| - |dkappa1| = "
                f"{self.kappa0 - abs(self.dkappa0) - abs(self.dkappa1):.3g}"
            )
        if self.period is not None and not (math.isfinite(self.period) and self.period > 0):
            raise ConfigError(f"period must be a positive finite length, got {self.period}")
        if self.dkappa1 != 0 and self.period is None:
            raise ConfigError("a driven lattice (dkappa1 != 0) needs a period")

    @property
    def is_driven(self) -> bool:
        return self.dkappa1 != 0

    @property
    def omega(self) -> float:
        """Drive frequency 2 pi / period (rad mm^-1)."""
        if self.period is None:
            raise ConfigError("static lattice has no period")
        return 2 * math.pi / self.period

    def replace(self, **changes) -> LatticeConfig:
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {key: getattr(self, key) for key in _JSON_KEYS}

    @classmethod
    def from_dict(cls, data: dict) -> LatticeConfig:
        if not isinstance(data, dict):
            raise ConfigError(f"lattice config must be a JSON object, got {type(data).__name__}")
        unknown = set(data) - set(_JSON_KEYS)
        if unknown:
            raise ConfigError(f"unknown lattice keys: {sorted(unknown)}")
        for key in ("n_sites", "kappa0"):
            if key not in data:
                raise ConfigError(f"lattice config is missing {key!r}")
        for key, value in data.items():
            if key == "period" and value is None:
                continue
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"lattice field {key!r} must be a number, got {value!r}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> LatticeConfig:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(data)


def drive_coupling(config: LatticeConfig, z):
    """Staggered coupling offset dk(z); accepts scalar or array ``z``."""
    if config.dkappa1 == 0:
        if np.ndim(z) == 0:
            return config.dkappa0
        return np.full(np.shape(z), config.dkappa0)
    phase = 2 * np.pi * np.asarray(z, dtype=float) / config.period + config.gauge
    out = config.dkappa0 + config.dkappa1 * np.cos(phase)
    return float(out) if np.ndim(out) == 0 else out


def bond_couplings(config: LatticeConfig, z):
    """Bond strengths at ``z``; shape ``(n_sites-1,)`` or ``z.shape + (n_sites-1,)``."""
    dk = np.asarray(drive_coupling(config, z), dtype=float)[..., None]
    sign = np.where(np.arange(config.n_sites - 1) % 2 == 0, -1.0, 1.0)
    return config.kappa0 + sign * dk


def chain_matrix(bonds) -> np.ndarray:
    """Zero-diagonal symmetric tridiagonal matrix from its bond list."""
    bonds = np.asarray(bonds, dtype=float)
    return np.diag(bonds, 1) + np.diag(bonds, -1)


def build_hamiltonian(config: LatticeConfig, z: float) -> np.ndarray:
    """Gauge-stripped Hamiltonian H(z) - beta0 I as a dense real matrix."""
    config.validate()
    return chain_matrix(bond_couplings(config, z))


def static_reference(config: LatticeConfig) -> np.ndarray:
    """Drive-averaged Hamiltonian: the cosine term averages to zero over a period."""
    return chain_matrix(bond_couplings(config.replace(dkappa1=0.0), 0.0))


def bandwidth(config: LatticeConfig) -> float:
    """Full width 2 (k1 + k2) of the two bulk bands of the averaged infinite chain.

    With k1 = kappa0 - dkappa0 and k2 = kappa0 + dkappa0 this is always 4 kappa0.
    """
    k1 = config.kappa0 - config.dkappa0
    k2 = config.kappa0 + config.dkappa0
    return 2 * (abs(k1) + abs(k2))


def gauge_shift_identity_check(config: LatticeConfig, z: float) -> float:
    """Max deviation between H(z + period/2; gauge) and H(z; gauge + pi).

    Only meaningful for a pure cosine drive (dkappa0 == 0), where it vanishes.
    """
    if config.dkappa0 != 0:
        raise ConfigError("half-period/gauge identity needs dkappa0 == 0")
    if config.period is None:
        # static: both sides are the same matrix
        return 0.0
    shifted = build_hamiltonian(config, z + config.period / 2)
    regauged = build_hamiltonian(config.replace(gauge=config.gauge + math.pi), z)
    return float(np.max(np.abs(shifted - regauged)))
