"""Minimal ctypes binding to the system UMFPACK library (``umfpack_dl_*``).

Used when present and when a load-time self-test passes; callers fall back
to SuperLU otherwise.
"""
import ctypes
import ctypes.util
import os

import numpy as np
import scipy.sparse as sp

UMFPACK_CONTROL = 20
UMFPACK_INFO = 90
UMFPACK_A = 0
UMFPACK_OK = 0


def _load():
    # OpenBLAS runtime CPU detection can select kernels that return wrong
    # results for UMFPACK's dense frontal updates on some virtualized CPUs.
    # Pinning a widely supported x86-64 kernel avoids that; the self-test
    # below guards every other case.
    if os.uname().machine in ("x86_64", "AMD64"):
        os.environ.setdefault("OPENBLAS_CORETYPE", "Haswell")
    for name in ("umfpack", "libumfpack.so.5", "libumfpack.so"):
        path = ctypes.util.find_library(name) if "." not in name else name
        if not path:
            continue
        try:
            return ctypes.CDLL(path)
        except OSError:
            continue
    return None


_lib = _load()
available = _lib is not None

if available:
    _long_p = np.ctypeslib.ndpointer(np.int64, flags="C_CONTIGUOUS")
    _dbl_p = np.ctypeslib.ndpointer(np.float64, flags="C_CONTIGUOUS")
    _vpp = ctypes.POINTER(ctypes.c_void_p)
    _lib.umfpack_dl_defaults.argtypes = [_dbl_p]
    _lib.umfpack_dl_symbolic.argtypes = [ctypes.c_int64, ctypes.c_int64, _long_p, _long_p, _dbl_p,
                                         _vpp, _dbl_p, _dbl_p]
    _lib.umfpack_dl_numeric.argtypes = [_long_p, _long_p, _dbl_p, ctypes.c_void_p, _vpp, _dbl_p, _dbl_p]
    _lib.umfpack_dl_solve.argtypes = [ctypes.c_int, _long_p, _long_p, _dbl_p, _dbl_p, _dbl_p,
                                      ctypes.c_void_p, _dbl_p, _dbl_p]
    _lib.umfpack_dl_free_symbolic.argtypes = [_vpp]
    _lib.umfpack_dl_free_numeric.argtypes = [_vpp]
    for f in ("umfpack_dl_symbolic", "umfpack_dl_numeric", "umfpack_dl_solve"):
        getattr(_lib, f).restype = ctypes.c_int


class UmfpackLU:
    """LU factorization of a square sparse matrix with a ``solve`` method."""

    def __init__(self, A):
        if not available:
            raise RuntimeError("UMFPACK library not found")
        A = sp.csc_matrix(A)
        A.sort_indices()
        self.n = A.shape[0]
        self._Ap = np.ascontiguousarray(A.indptr, dtype=np.int64)
        self._Ai = np.ascontiguousarray(A.indices, dtype=np.int64)
        self._Ax = np.ascontiguousarray(A.data, dtype=np.float64)
        self._control = np.zeros(UMFPACK_CONTROL)
        _lib.umfpack_dl_defaults(self._control)
        self._info = np.zeros(UMFPACK_INFO)
        sym = ctypes.c_void_p()
        status = _lib.umfpack_dl_symbolic(self.n, self.n, self._Ap, self._Ai, self._Ax,
                                          ctypes.byref(sym), self._control, self._info)
        if status != UMFPACK_OK:
            raise RuntimeError(f"UMFPACK symbolic factorization failed (status {status})")
        num = ctypes.c_void_p()
        status = _lib.umfpack_dl_numeric(self._Ap, self._Ai, self._Ax, sym, ctypes.byref(num),
                                         self._control, self._info)
        _lib.umfpack_dl_free_symbolic(ctypes.byref(sym))
        self._numeric = num
        if status != UMFPACK_OK:
            self._free()
            raise RuntimeError(f"UMFPACK numeric factorization failed (status {status})")

    def solve(self, b):
        b = np.ascontiguousarray(b, dtype=np.float64)
        x = np.zeros(self.n)
        status = _lib.umfpack_dl_solve(UMFPACK_A, self._Ap, self._Ai, self._Ax, x, b,
                                       self._numeric, self._control, self._info)
        if status != UMFPACK_OK:
            raise RuntimeError(f"UMFPACK solve failed (status {status})")
        return x

    def _free(self):
        if self._numeric:
            _lib.umfpack_dl_free_numeric(ctypes.byref(self._numeric))
            self._numeric = ctypes.c_void_p()

    def __del__(self):
        if available and getattr(self, "_numeric", None):
            self._free()


def _self_test():
    rng = np.random.default_rng(0)
    A = sp.random(80, 80, density=0.3, random_state=rng, format="csc") + 3 * sp.identity(80)
    b = rng.standard_normal(80)
    try:
        x = UmfpackLU(A).solve(b)
    except RuntimeError:
        return False
    return bool(np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b))


if available:
    available = _self_test()
