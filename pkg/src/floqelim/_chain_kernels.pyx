# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernels for zero-diagonal tridiagonal chains.

Even chains are bipartite with a square off-diagonal block, H = [[0, B], [B^T, 0]]
in sublattice order, where B is lower bidiagonal.  One bidiagonal SVD
B = Q S P^T (LAPACK ``dbdsqr``) then gives the step exactly:

    exp(-i H dz) = [[Q cos(S dz) Q^T, -i Q sin(S dz) P^T],
                    [-i P sin(S dz) Q^T, P cos(S dz) P^T]]

which halves the eigenproblem and the BLAS work.  Odd chains fall back to the
full tridiagonal eigendecomposition (``dstevr``).  All complex buffers are held
as split real/imaginary column-major arrays.  Signatures mirror
:mod:`floqelim._chain_fallback`.
"""
import numpy as np

from libc.math cimport cos, sin
from scipy.linalg.cython_blas cimport dgemm
from scipy.linalg.cython_lapack cimport dbdsqr, dstevr


cdef struct EigWork:
    int n
    double* d
    double* e
    double* work
    int* iwork
    int* isuppz


cdef int _eig_chain(EigWork* ws, const double* bonds, double* w, double* z) noexcept nogil:
    cdef int i
    cdef int n = ws.n
    cdef int info = 0
    cdef int m = 0
    cdef int ldz = n
    cdef int il = 0
    cdef int iu = 0
    cdef int lwork = 20 * n
    cdef int liwork = 10 * n
    cdef double vl = 0.0
    cdef double vu = 0.0
    cdef double abstol = 0.0
    cdef char jobz = b'V'
    cdef char rng = b'A'
    for i in range(n):
        ws.d[i] = 0.0
        ws.e[i] = 0.0
    for i in range(n - 1):
        ws.e[i] = bonds[i]
    dstevr(&jobz, &rng, &n, ws.d, ws.e, &vl, &vu, &il, &iu, &abstol, &m, w, z, &ldz,
           ws.isuppz, ws.work, &lwork, ws.iwork, &liwork, &info)
    if info == 0 and m != n:
        info = -1000
    return info


cdef class _Workspace:
    cdef double[::1] d, e, work
    cdef int[::1] iwork, isuppz
    cdef EigWork ws

    def __cinit__(self, int n):
        self.d = np.empty(n)
        self.e = np.empty(n)
        self.work = np.empty(20 * n)
        self.iwork = np.empty(10 * n, dtype=np.intc)
        self.isuppz = np.empty(2 * n, dtype=np.intc)
        self.ws.n = n
        self.ws.d = &self.d[0]
        self.ws.e = &self.e[0]
        self.ws.work = &self.work[0]
        self.ws.iwork = &self.iwork[0]
        self.ws.isuppz = &self.isuppz[0]


cdef void _apply_step(int n, int m, double* z, const double* w, double dz,
                      double* ur, double* ui, double* tr, double* ti) noexcept nogil:
    # (ur + i ui) <- Z diag(exp(-i w dz)) Z^T (ur + i ui), column-major n x m
    cdef char tt = b'T'
    cdef char nn = b'N'
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef int k, j, idx
    cdef double c, s, a, b
    dgemm(&tt, &nn, &n, &m, &n, &one, z, &n, ur, &n, &zero, tr, &n)
    dgemm(&tt, &nn, &n, &m, &n, &one, z, &n, ui, &n, &zero, ti, &n)
    for k in range(n):
        c = cos(w[k] * dz)
        s = sin(w[k] * dz)
        for j in range(m):
            idx = k + j * n
            a = tr[idx]
            b = ti[idx]
            tr[idx] = c * a + s * b
            ti[idx] = c * b - s * a
    dgemm(&nn, &nn, &n, &m, &n, &one, z, &n, tr, &n, &zero, ur, &n)
    dgemm(&nn, &nn, &n, &m, &n, &one, z, &n, ti, &n, &zero, ui, &n)


cdef int _svd_chain(int k, const double* bonds, double* d, double* e, double* q,
                    double* pt, double* work) noexcept nogil:
    # B[i, i] = bonds[2i], B[i + 1, i] = bonds[2i + 1]; on exit d = S, q = Q, pt = P^T
    cdef int i
    cdef int info = 0
    cdef int zero_i = 0
    cdef int one_i = 1
    cdef char lower = b'L'
    for i in range(k):
        d[i] = bonds[2 * i]
    for i in range(k - 1):
        e[i] = bonds[2 * i + 1]
    for i in range(k * k):
        q[i] = 0.0
        pt[i] = 0.0
    for i in range(k):
        q[i + i * k] = 1.0
        pt[i + i * k] = 1.0
    dbdsqr(&lower, &k, &k, &k, &zero_i, d, e, pt, &k, q, &k, NULL, &one_i, work, &info)
    return info


cdef void _apply_bipartite(int k, int m, int ld, const double* q, const double* pt,
                           const double* sv, double dz, double* mr, double* mi,
                           double* yr, double* yi) noexcept nogil:
    # rows 0..k-1 of (mr, mi) are sublattice A, rows k..2k-1 sublattice B; ld = 2k
    cdef char tt = b'T'
    cdef char nn = b'N'
    cdef double one = 1.0
    cdef double zero = 0.0
    cdef int i, j, ia, ib
    cdef double c, s, ar, ai, br, bi
    # y rows 0..k-1: Q^T M_A, rows k..2k-1: P^T M_B
    dgemm(&tt, &nn, &k, &m, &k, &one, q, &k, mr, &ld, &zero, yr, &ld)
    dgemm(&tt, &nn, &k, &m, &k, &one, q, &k, mi, &ld, &zero, yi, &ld)
    dgemm(&nn, &nn, &k, &m, &k, &one, pt, &k, mr + k, &ld, &zero, yr + k, &ld)
    dgemm(&nn, &nn, &k, &m, &k, &one, pt, &k, mi + k, &ld, &zero, yi + k, &ld)
    for i in range(k):
        c = cos(sv[i] * dz)
        s = sin(sv[i] * dz)
        for j in range(m):
            ia = i + j * ld
            ib = ia + k
            ar = yr[ia]
            ai = yi[ia]
            br = yr[ib]
            bi = yi[ib]
            yr[ia] = c * ar + s * bi
            yi[ia] = c * ai - s * br
            yr[ib] = s * ai + c * br
            yi[ib] = c * bi - s * ar
    dgemm(&nn, &nn, &k, &m, &k, &one, q, &k, yr, &ld, &zero, mr, &ld)
    dgemm(&nn, &nn, &k, &m, &k, &one, q, &k, yi, &ld, &zero, mi, &ld)
    dgemm(&tt, &nn, &k, &m, &k, &one, pt, &k, yr + k, &ld, &zero, mr + k, &ld)
    dgemm(&tt, &nn, &k, &m, &k, &one, pt, &k, yi + k, &ld, &zero, mi + k, &ld)


def _sublattice_order(int n):
    return np.concatenate([np.arange(0, n, 2), np.arange(1, n, 2)])


def _bipartite_run(double[:, ::1] bond_table, double dz, double[::1, :] mr,
                   double[::1, :] mi, long[::1] keep, double[:, ::1] out_r,
                   double[:, ::1] out_i):
    # evolves (mr, mi) in sublattice row order; when keep is non-empty m must be 1
    cdef int n_steps = bond_table.shape[0]
    cdef int n = bond_table.shape[1] + 1
    cdef int k = n // 2
    cdef int m = mr.shape[1]
    cdef int n_keep = keep.shape[0]
    cdef int step, r, info = 0
    cdef int slot = 0
    cdef double[::1, :] yr = np.empty((n, m), order="F")
    cdef double[::1, :] yi = np.empty((n, m), order="F")
    cdef double[::1, :] q = np.empty((k, k), order="F")
    cdef double[::1, :] pt = np.empty((k, k), order="F")
    cdef double[::1] sv = np.empty(k)
    cdef double[::1] e = np.empty(max(k - 1, 1))
    cdef double[::1] work = np.empty(4 * k)
    with nogil:
        while slot < n_keep and keep[slot] == 0:
            for r in range(n):
                out_r[slot, r] = mr[r, 0]
                out_i[slot, r] = mi[r, 0]
            slot += 1
        for step in range(n_steps):
            info = _svd_chain(k, &bond_table[step, 0], &sv[0], &e[0], &q[0, 0], &pt[0, 0], &work[0])
            if info != 0:
                break
            _apply_bipartite(k, m, n, &q[0, 0], &pt[0, 0], &sv[0], dz,
                             &mr[0, 0], &mi[0, 0], &yr[0, 0], &yi[0, 0])
            while slot < n_keep and keep[slot] == step + 1:
                for r in range(n):
                    out_r[slot, r] = mr[r, 0]
                    out_i[slot, r] = mi[r, 0]
                slot += 1
    if info != 0:
        raise np.linalg.LinAlgError(f"dbdsqr failed with info={info}")


def chain_product(double[:, ::1] bond_table, double dz):
    """Ordered product of step unitaries, later rows acting last."""
    cdef int n_steps = bond_table.shape[0]
    cdef int n = bond_table.shape[1] + 1
    if n % 2 == 0:
        order = _sublattice_order(n)
        pr = np.asfortranarray(np.eye(n)[order])
        pi = np.zeros((n, n), order="F")
        empty = np.zeros(0, dtype=np.int64)
        _bipartite_run(bond_table, dz, pr, pi, empty, np.zeros((0, n)), np.zeros((0, n)))
        u = np.empty((n, n), dtype=np.complex128)
        u[order] = pr + 1j * pi
        return u
    cdef int step, info = 0
    cdef double[::1, :] ur = np.asfortranarray(np.eye(n))
    cdef double[::1, :] ui = np.zeros((n, n), order="F")
    cdef double[::1, :] tr = np.empty((n, n), order="F")
    cdef double[::1, :] ti = np.empty((n, n), order="F")
    cdef double[::1, :] zv = np.empty((n, n), order="F")
    cdef double[::1] w = np.empty(n)
    cdef _Workspace space = _Workspace(n)
    cdef EigWork* ws = &space.ws
    with nogil:
        for step in range(n_steps):
            info = _eig_chain(ws, &bond_table[step, 0], &w[0], &zv[0, 0])
            if info != 0:
                break
            _apply_step(n, n, &zv[0, 0], &w[0], dz, &ur[0, 0], &ui[0, 0], &tr[0, 0], &ti[0, 0])
    if info != 0:
        raise np.linalg.LinAlgError(f"dstevr failed with info={info}")
    return np.ascontiguousarray(np.asarray(ur) + 1j * np.asarray(ui))


def chain_step(double[::1] bonds, double dz):
    """Single step unitary ``exp(-i H dz)`` for the chain with these bonds."""
    return chain_product(np.ascontiguousarray(np.asarray(bonds)[None, :]), dz)


def chain_propagate(double[:, ::1] bond_table, double dz, psi0, long[::1] keep):
    """Propagate one state; rows of the result are the states after ``keep[i]`` steps."""
    cdef int n_steps = bond_table.shape[0]
    cdef int n = bond_table.shape[1] + 1
    cdef int n_keep = keep.shape[0]
    cdef int step, k, info = 0
    cdef int slot = 0
    psi = np.asarray(psi0, dtype=np.complex128)
    if n % 2 == 0:
        order = _sublattice_order(n)
        pr = np.asfortranarray(psi.real[order][:, None])
        pi = np.asfortranarray(psi.imag[order][:, None])
        res_r = np.zeros((n_keep, n))
        res_i = np.zeros((n_keep, n))
        _bipartite_run(bond_table, dz, pr, pi, keep, res_r, res_i)
        out = np.empty((n_keep, n), dtype=np.complex128)
        out[:, order] = res_r + 1j * res_i
        return out
    cdef double[::1] ur = np.ascontiguousarray(psi.real)
    cdef double[::1] ui = np.ascontiguousarray(psi.imag)
    cdef double[::1] tr = np.empty(n)
    cdef double[::1] ti = np.empty(n)
    cdef double[::1, :] zv = np.empty((n, n), order="F")
    cdef double[::1] w = np.empty(n)
    cdef _Workspace space = _Workspace(n)
    cdef EigWork* ws = &space.ws
    cdef double[:, ::1] out_r = np.zeros((n_keep, n))
    cdef double[:, ::1] out_i = np.zeros((n_keep, n))
    with nogil:
        while slot < n_keep and keep[slot] == 0:
            for k in range(n):
                out_r[slot, k] = ur[k]
                out_i[slot, k] = ui[k]
            slot += 1
        for step in range(n_steps):
            info = _eig_chain(ws, &bond_table[step, 0], &w[0], &zv[0, 0])
            if info != 0:
                break
            _apply_step(n, 1, &zv[0, 0], &w[0], dz, &ur[0], &ui[0], &tr[0], &ti[0])
            while slot < n_keep and keep[slot] == step + 1:
                for k in range(n):
                    out_r[slot, k] = ur[k]
                    out_i[slot, k] = ui[k]
                slot += 1
    if info != 0:
        raise np.linalg.LinAlgError(f"dstevr failed with info={info}")
    return np.asarray(out_r) + 1j * np.asarray(out_i)
