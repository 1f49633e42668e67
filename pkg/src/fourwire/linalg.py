"""Complex sparse storage and one-shot LU factorization with reusable solves.

Two interchangeable engines: a dense LU (always available, used as oracle in
tests) and a sparse direct LU via SuperLU. Engines count factorizations so the
single-factorization contract of the solver can be asserted.
"""

from __future__ import annotations

import warnings
from abc import ABC, abstractmethod

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import DimensionMismatch, IndexOutOfBounds, SingularMatrix

_SINGULAR_HINT = (
    "matrix is singular; the network probably lacks a reference to earth "
    "(ground a neutral, or increase shunt_floor)"
)


class TripletList:
    """Stamping-friendly accumulator; duplicate (row, col) entries sum."""

    def __init__(self, nrows: int, ncols: int):
        self.nrows = nrows
        self.ncols = ncols
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.values: list[complex] = []

    def add(self, row: int, col: int, value: complex) -> None:
        if not (0 <= row < self.nrows and 0 <= col < self.ncols):
            raise IndexOutOfBounds(
                f"entry ({row}, {col}) outside {self.nrows}x{self.ncols}"
            )
        self.rows.append(row)
        self.cols.append(col)
        self.values.append(complex(value))


def from_triplets(t: TripletList) -> scipy.sparse.csc_matrix:
    m = scipy.sparse.coo_matrix(
        (t.values, (t.rows, t.cols)), shape=(t.nrows, t.ncols), dtype=complex
    )
    return m.tocsc()


class Factorization(ABC):
    """Immutable handle; solve takes no mutable state."""

    n: int

    @abstractmethod
    def solve(self, b: np.ndarray) -> np.ndarray: ...

    def _check(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=complex)
        if b.shape != (self.n,):
            raise DimensionMismatch(f"rhs has shape {b.shape}, expected ({self.n},)")
        return b


class DenseFactorization(Factorization):
    def __init__(self, a: np.ndarray):
        self.n = a.shape[0]
        if self.n == 0:
            self._lu = None
            return
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(a)
        diag = np.abs(np.diag(lu))
        scale = max(1.0, float(np.abs(a).max(initial=0.0)))
        if diag.size and diag.min() <= 1e-14 * scale:
            raise SingularMatrix(_SINGULAR_HINT)
        self._lu = (lu, piv)

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = self._check(b)
        if self._lu is None:
            return b.copy()
        return scipy.linalg.lu_solve(self._lu, b)


class SparseFactorization(Factorization):
    def __init__(self, a: scipy.sparse.csc_matrix):
        self.n = a.shape[0]
        try:
            self._splu = scipy.sparse.linalg.splu(a) if self.n else None
        except RuntimeError as exc:  # SuperLU signals exact singularity this way
            raise SingularMatrix(_SINGULAR_HINT) from exc

    def solve(self, b: np.ndarray) -> np.ndarray:
        b = self._check(b)
        if self._splu is None:
            return b.copy()
        return self._splu.solve(b)


class LinearEngine(ABC):
    """Factorize once, solve many. ``factorize_count`` audits reuse."""

    name: str

    def __init__(self):
        self.factorize_count = 0

    def factorize(self, a) -> Factorization:
        a = scipy.sparse.csc_matrix(a, dtype=complex)
        if a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"cannot factorize non-square {a.shape} matrix")
        self.factorize_count += 1
        return self._factorize(a)

    @abstractmethod
    def _factorize(self, a: scipy.sparse.csc_matrix) -> Factorization: ...


class DenseEngine(LinearEngine):
    name = "dense"

    def _factorize(self, a):
        return DenseFactorization(a.toarray())


class SparseEngine(LinearEngine):
    name = "sparse"

    def _factorize(self, a):
        return SparseFactorization(a)


_ENGINES = {"dense": DenseEngine, "sparse": SparseEngine}


def make_engine(name: str) -> LinearEngine:
    try:
        return _ENGINES[name]()
    except KeyError:
        raise ValueError(f"unknown linear engine '{name}'") from None


def factorize(a, engine: LinearEngine | None = None) -> Factorization:
    return (engine or SparseEngine()).factorize(a)


def solve(f: Factorization, b: np.ndarray) -> np.ndarray:
    return f.solve(b)
