"""Polynomial bases, compact kernels and the local estimation problem."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np

from .errors import UnsupportedBasis

KERNEL_KINDS = ("indicator", "epanechnikov_product", "truncated_gaussian")

# CLI spellings
KERNEL_ALIASES = {
    "indicator": "indicator",
    "epanechnikov": "epanechnikov_product",
    "epanechnikov_product": "epanechnikov_product",
    "tgauss": "truncated_gaussian",
    "truncated_gaussian": "truncated_gaussian",
}


@dataclass(frozen=True)
class BasisSpec:
    """Monomial basis in local coordinates ``t``.

    ``index_set`` holds one exponent tuple per basis function; the first is
    always the zero tuple, so ``psi_0 == 1``.
    """

    kind: str
    degree: int
    dim: int
    index_set: Tuple[Tuple[int, ...], ...]

    @property
    def p(self) -> int:
        return len(self.index_set)

    @property
    def exponents(self) -> np.ndarray:
        return np.array(self.index_set, dtype=np.int64).reshape(self.p, self.dim)

    @property
    def total_degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1)


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    dim: int = 1

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")

    @property
    def integral(self) -> float:
        """``I_K``, the integral of K over the cube."""
        if self.kind == "indicator":
            one = 2.0
        elif self.kind == "epanechnikov_product":
            one = 1.0
        else:
            one = math.sqrt(2.0 * math.pi) * math.erf(1.0 / math.sqrt(2.0))
        return one ** self.dim


def default_quad_order(degree: int) -> int:
    return max(20, 2 * degree + 8)


@dataclass(frozen=True)
class ModelSpec:
    x0: Tuple[float, ...]
    h: float
    basis: BasisSpec
    kernel: KernelSpec
    quad_order: int = field(default=0)

    def __post_init__(self):
        x0 = tuple(float(v) for v in np.atleast_1d(self.x0))
        object.__setattr__(self, "x0", x0)
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"bandwidth must be positive and finite, got {self.h}")
        if self.basis.dim != len(x0) or self.kernel.dim != len(x0):
            raise ValueError("basis, kernel and x0 dimensions disagree")
        if self.quad_order == 0:
            object.__setattr__(self, "quad_order", default_quad_order(self.basis.degree))
        if self.quad_order < 2:
            raise ValueError("quadrature order must be >= 2")

    @property
    def d(self) -> int:
        return len(self.x0)

    @property
    def p(self) -> int:
        return self.basis.p

    @property
    def x0_array(self) -> np.ndarray:
        return np.asarray(self.x0, dtype=float)

    @property
    def hd(self) -> float:
        return self.h ** self.d

    def with_h(self, h: float) -> "ModelSpec":
        return replace(self, h=float(h))

    def to_local(self, x) -> np.ndarray:
        """Map data points to local coordinates ``t = (x - x0) / h``."""
        x = np.asarray(x, dtype=float)
        return (x - self.x0_array) / self.h


def _index_set(degree: int, dim: int):
    if dim == 1:
        return tuple((k,) for k in range(degree))
    out = []
    for total in range(degree + 1):
        level = [e for e in itertools.product(range(total + 1), repeat=dim) if sum(e) == total]
        level.sort(reverse=True)
        out.extend(level)
    return tuple(out)


def make_basis(kind: str, degree: int, dim: int) -> BasisSpec:
    """Monomial basis ordered by (total degree, lexicographic).

    In one dimension ``degree`` is the basis size p (monomials ``t^0..t^{p-1}``);
    for ``dim >= 2`` all monomials of total degree ``<= degree`` are included.
    """
    if kind != "polynomial":
        raise UnsupportedBasis(f"unsupported basis kind {kind!r}")
    if degree < 1 or dim < 1:
        raise UnsupportedBasis(f"need degree >= 1 and dim >= 1, got {degree}, {dim}")
    return BasisSpec(kind, int(degree), int(dim), _index_set(int(degree), int(dim)))


def make_model(x0, h, degree, dim=None, kernel="indicator", quad_order=0) -> ModelSpec:
    x0 = tuple(float(v) for v in np.atleast_1d(x0))
    dim = len(x0) if dim is None else dim
    if len(x0) == 1 and dim > 1:
        x0 = x0 * dim
    basis = make_basis("polynomial", degree, dim)
    kern = KernelSpec(KERNEL_ALIASES.get(kernel, kernel), dim)
    return ModelSpec(x0, float(h), basis, kern, quad_order)


def eval_basis(basis: BasisSpec, t) -> np.ndarray:
    """Evaluate the basis at one point (shape ``(d,)``) or many (``(N, d)``).

    One-dimensional inputs may also be passed as scalars or flat arrays.
    """
    t = np.asarray(t, dtype=float)
    single = t.ndim == 0 or (t.ndim == 1 and basis.dim > 1)
    if basis.dim == 1:
        t = t.reshape(-1, 1)
    else:
        t = np.atleast_2d(t)
    exps = basis.exponents
    if basis.dim == 1:
        out = np.power(t, exps[:, 0][None, :])
    else:
        out = np.ones((t.shape[0], basis.p))
        for axis in range(basis.dim):
            out *= np.power(t[:, axis : axis + 1], exps[:, axis][None, :])
    return out[0] if single else out


def eval_kernel(kernel: KernelSpec, t) -> np.ndarray:
    """Kernel weight; zero outside the cube ``[-1, 1]^d``."""
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0 or (t.ndim == 1 and kernel.dim > 1)
    t = t.reshape(-1, kernel.dim)
    inside = np.all(np.abs(t) <= 1.0, axis=1)
    if kernel.kind == "indicator":
        k = np.ones(t.shape[0])
    elif kernel.kind == "epanechnikov_product":
        k = np.prod(0.75 * (1.0 - t * t), axis=1)
    else:
        k = np.exp(-0.5 * np.sum(t * t, axis=1))
    k = np.where(inside, k, 0.0)
    return float(k[0]) if scalar else k
