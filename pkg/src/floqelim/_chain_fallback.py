"""Pure numpy/scipy versions of the chain stepping kernels."""
import numpy as np
from scipy.linalg import eigh_tridiagonal


def _step(bonds, dz):
    n = bonds.shape[0] + 1
    w, v = eigh_tridiagonal(np.zeros(n), bonds)
    return (v * np.exp(-1j * w * dz)) @ v.T


def chain_step(bonds, dz):
    """Single step unitary ``exp(-i H dz)`` for the chain with these bonds."""
    return _step(np.asarray(bonds, dtype=float), dz)


def chain_product(bond_table, dz):
    """Ordered product of step unitaries, later rows acting last."""
    bond_table = np.asarray(bond_table, dtype=float)
    n = bond_table.shape[1] + 1
    u = np.eye(n, dtype=np.complex128)
    for bonds in bond_table:
        u = _step(bonds, dz) @ u
    return u


def chain_propagate(bond_table, dz, psi0, keep):
    """Propagate one state; rows of the result are the states after ``keep[i]`` steps."""
    bond_table = np.asarray(bond_table, dtype=float)
    keep = np.asarray(keep)
    psi = np.array(psi0, dtype=np.complex128)
    out = np.zeros((keep.shape[0], psi.shape[0]), dtype=np.complex128)
    slot = 0
    while slot < keep.shape[0] and keep[slot] == 0:
        out[slot] = psi
        slot += 1
    for step, bonds in enumerate(bond_table, start=1):
        psi = _step(bonds, dz) @ psi
        while slot < keep.shape[0] and keep[slot] == step:
            out[slot] = psi
            slot += 1
    return out
