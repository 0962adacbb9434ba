"""Convex constraints ``f(x) <= 0`` over one player's sequence-form strategies."""

from __future__ import annotations

from typing import Mapping, Protocol, Sequence, runtime_checkable

import numpy as np
import scipy.sparse as sp

from ..space import StrategySpace


class ConstraintError(ValueError):
    pass


@runtime_checkable
class Constraint(Protocol):
    name: str
    size: int
    linear: bool

    def value(self, x: np.ndarray) -> float: ...

    def subgradient(self, x: np.ndarray) -> np.ndarray: ...


class LinearConstraint:
    """``f(x) = a @ x - b``; lower bounds are stored with negated coefficients."""

    linear = True

    def __init__(self, index: Sequence[int], coef: Sequence[float], offset: float, size: int,
                 name: str = "linear"):
        index = np.asarray(index, dtype=np.int64)
        coef = np.asarray(coef, dtype=float)
        if index.shape != coef.shape:
            raise ConstraintError("index and coefficient arrays differ in length")
        if len(index) and (index.min() < 0 or index.max() >= size):
            raise ConstraintError(f"{name}: sequence index out of range [0, {size})")
        order = np.argsort(index, kind="stable")
        index, coef = index[order], coef[order]
        if len(np.unique(index)) != len(index):
            raise ConstraintError(f"{name}: duplicate sequence index")
        self.index, self.coef = index, coef
        self.offset = float(offset)
        self.size = int(size)
        self.name = name

    @property
    def dense(self) -> np.ndarray:
        a = np.zeros(self.size)
        a[self.index] = self.coef
        return a

    def value(self, x: np.ndarray) -> float:
        return float(self.coef @ np.asarray(x)[self.index]) - self.offset

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        return self.dense

    def negated(self, name: str | None = None) -> "LinearConstraint":
        """``-a @ x + b <= 0``, i.e. the reverse inequality."""
        return LinearConstraint(self.index, -self.coef, -self.offset, self.size,
                                name or f"-{self.name}")

    def __repr__(self) -> str:
        return f"LinearConstraint({self.name!r}, nnz={len(self.index)}, b={self.offset:g})"


def linear_constraint(coeffs: Mapping[int, float] | np.ndarray, b: float, size: int | None = None,
                      name: str = "linear") -> LinearConstraint:
    """``a @ x - b <= 0`` from a dense vector or a ``{sequence: coefficient}`` mapping."""
    if isinstance(coeffs, Mapping):
        if size is None:
            raise ConstraintError("size is required for mapping coefficients")
        idx = list(coeffs.keys())
        return LinearConstraint(idx, [coeffs[i] for i in idx], b, size, name)
    a = np.asarray(coeffs, dtype=float)
    if size is not None and len(a) != size:
        raise ConstraintError(f"coefficient vector has length {len(a)}, expected {size}")
    nz = np.flatnonzero(a)
    return LinearConstraint(nz, a[nz], b, len(a), name)


class QuadraticConstraint:
    """``sum_s w_s (x_s - c_s)^2 - r <= 0`` over a subset of sequences (``w >= 0``)."""

    linear = False

    def __init__(self, index: Sequence[int], center: Sequence[float], radius: float, size: int,
                 weights: Sequence[float] | None = None, name: str = "quadratic"):
        self.index = np.asarray(index, dtype=np.int64)
        self.center = np.asarray(center, dtype=float)
        self.weights = np.ones(len(self.index)) if weights is None else np.asarray(weights, float)
        if (self.weights < 0).any():
            raise ConstraintError("negative weights make the constraint nonconvex")
        self.radius = float(radius)
        self.size = int(size)
        self.name = name

    def value(self, x: np.ndarray) -> float:
        d = np.asarray(x)[self.index] - self.center
        return float(np.sum(self.weights * d * d)) - self.radius

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.size)
        g[self.index] = 2.0 * self.weights * (np.asarray(x)[self.index] - self.center)
        return g


class MaxLinearConstraint:
    """``max_j (a_j @ x - b_j) <= 0``; the subgradient uses the first maximizing piece."""

    linear = False

    def __init__(self, pieces: Sequence[LinearConstraint], name: str = "max"):
        if not pieces:
            raise ConstraintError("need at least one piece")
        sizes = {p.size for p in pieces}
        if len(sizes) != 1:
            raise ConstraintError("pieces disagree on dimension")
        self.pieces = list(pieces)
        self.size = sizes.pop()
        self.name = name

    def _vals(self, x: np.ndarray) -> np.ndarray:
        return np.array([p.value(x) for p in self.pieces])

    def value(self, x: np.ndarray) -> float:
        return float(self._vals(x).max())

    def subgradient(self, x: np.ndarray) -> np.ndarray:
        return self.pieces[int(np.argmax(self._vals(x)))].dense


class ConstraintSet:
    """Ordered constraints on one player's sequences; ``k = len(self)``."""

    def __init__(self, constraints: Sequence[Constraint], size: int):
        self.constraints = list(constraints)
        self.size = int(size)
        for c in self.constraints:
            if c.size != self.size:
                raise ConstraintError(
                    f"constraint {c.name!r} has dimension {c.size}, expected {self.size}")

    def __len__(self) -> int:
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def __getitem__(self, i):
        return self.constraints[i]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.constraints]

    @property
    def linear(self) -> bool:
        return all(c.linear for c in self.constraints)

    def values(self, x: np.ndarray) -> np.ndarray:
        return np.array([c.value(x) for c in self.constraints], dtype=float)

    def subgradients(self, x: np.ndarray) -> np.ndarray:
        """``k x n`` matrix of subgradients at ``x``."""
        out = np.zeros((len(self), self.size))
        for i, c in enumerate(self.constraints):
            g = np.asarray(c.subgradient(x), dtype=float)
            if g.shape != (self.size,):
                raise ConstraintError(
                    f"constraint {c.name!r} returned a subgradient of shape {g.shape}, "
                    f"expected ({self.size},)")
            out[i] = g
        return out

    def tilt(self, x: np.ndarray, lam: np.ndarray) -> np.ndarray:
        """Per-sequence tilt ``sum_i lam_i * grad f_i(x)``."""
        if len(self) == 0:
            return np.zeros(self.size)
        return np.asarray(lam, dtype=float) @ self.subgradients(x)

    def total_violation(self, x: np.ndarray) -> float:
        return float(np.clip(self.values(x), 0.0, None).sum())

    # -- linear fast path ---------------------------------------------------
    def matrix(self) -> tuple[sp.csr_matrix, np.ndarray]:
        """``(C, d)`` with ``f(x) = C @ x - d``; only for all-linear sets."""
        if not self.linear:
            raise ConstraintError("matrix form needs linear constraints")
        rows, cols, vals = [], [], []
        for i, c in enumerate(self.constraints):
            rows.append(np.full(len(c.index), i))
            cols.append(c.index)
            vals.append(c.coef)
        if rows:
            r, cidx, v = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
        else:
            r = cidx = np.zeros(0, dtype=np.int64)
            v = np.zeros(0)
        m = sp.csr_matrix((v, (r, cidx)), shape=(len(self), self.size))
        return m, np.array([c.offset for c in self.constraints], dtype=float)

    # -- bound constants ----------------------------------------------------
    def bound_constants(self, space: StrategySpace, samples: int = 1000,
                        seed: int = 0) -> tuple[float, float, bool]:
        """``(F, G, exact)``: max subgradient L1 norm and max ``|f_i|`` over the polytope.

        Linear constraints give exact values (``F = |a|_1``, ``G`` from two
        best-response sweeps).  Otherwise both are maxima over all
        pure-strategy vertices sampled plus ``samples`` random interior
        points, and ``exact`` is False.
        """
        if len(self) == 0:
            return 0.0, 0.0, True
        if self.linear:
            F = max(float(np.abs(c.coef).sum()) for c in self.constraints)
            G = 0.0
            for c in self.constraints:
                a = c.dense
                hi, _ = space.best_response(a)
                lo, _ = space.best_response(-a)
                G = max(G, abs(hi - c.offset), abs(-lo - c.offset))
            return F, G, True
        rng = np.random.default_rng(seed)
        F = G = 0.0
        for i in range(samples):
            x = space.sample_point(rng, vertex=i % 2 == 0)
            F = max(F, float(np.abs(self.subgradients(x)).sum(axis=1).max()))
            G = max(G, float(np.abs(self.values(x)).max()))
        return F, G, False
