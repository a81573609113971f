"""Jacobi parameters, Cauchy transforms and densities of free Meixner laws.

A law on the real line is encoded by its recursion coefficients
``alpha = (alpha_1, alpha_2, ...)`` and ``beta = (beta_1, beta_2, ...)``.
Free Meixner laws are the laws whose coefficients are constant from the
second index on, so they are described by four numbers
``(a1, a2, b1, b2)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "DensityError",
    "JacobiParams",
    "MeixnerParams",
    "MomentTable",
    "METHODS",
    "meixner_to_jacobi",
    "support_radius",
    "cauchy_transform",
    "density_eval",
    "density_support",
    "density_mass",
    "density_moments",
    "moments_tridiagonal",
    "hankel_min_eigenvalue",
    "moment_series",
]

METHODS = ("combinatorial", "tridiagonal", "fock", "density-quadrature", "monte-carlo")


class DensityError(ValueError):
    """The density formula has a pole inside its support."""


@dataclass(frozen=True)
class JacobiParams:
    """Recursion coefficients with a finite head and a constant tail.

    ``jacobi(k)`` returns ``(alpha_k, beta_k)`` for ``k >= 1``; indices past
    the head take the tail values.
    """

    alpha_head: tuple[float, ...]
    alpha_tail: float
    beta_head: tuple[float, ...]
    beta_tail: float

    def __post_init__(self):
        object.__setattr__(self, "alpha_head", tuple(float(a) for a in self.alpha_head))
        object.__setattr__(self, "beta_head", tuple(float(b) for b in self.beta_head))
        object.__setattr__(self, "alpha_tail", float(self.alpha_tail))
        object.__setattr__(self, "beta_tail", float(self.beta_tail))
        if len(self.alpha_head) != len(self.beta_head) or not self.alpha_head:
            raise ValueError("alpha_head and beta_head must have the same length >= 1")
        betas = self.beta_head + (self.beta_tail,)
        alphas = self.alpha_head + (self.alpha_tail,)
        if any(b < 0 for b in betas):
            raise ValueError("beta coefficients must be non-negative")
        # once some beta_k vanishes, everything after index k must vanish
        k = self.terminal_index
        if k is not None:
            tail_alphas = alphas[k:]
            tail_betas = betas[k:]
            if any(a != 0.0 for a in tail_alphas) or any(b != 0.0 for b in tail_betas):
                raise ValueError(
                    f"beta_{k} = 0 requires alpha_m = beta_m = 0 for all m > {k}"
                )

    @property
    def head_length(self) -> int:
        return len(self.alpha_head)

    @property
    def terminal_index(self) -> int | None:
        """First index k with beta_k = 0, or None if the fraction never stops."""
        for i, b in enumerate(self.beta_head):
            if b == 0.0:
                return i + 1
        if self.beta_tail == 0.0:
            return self.head_length + 1
        return None

    def jacobi(self, k: int) -> tuple[float, float]:
        if k < 1:
            raise IndexError("Jacobi coefficients are indexed from 1")
        if k <= self.head_length:
            return self.alpha_head[k - 1], self.beta_head[k - 1]
        return self.alpha_tail, self.beta_tail

    def alpha(self, k: int) -> float:
        return self.jacobi(k)[0]

    def beta(self, k: int) -> float:
        return self.jacobi(k)[1]

    def sequences(self, length: int) -> tuple[np.ndarray, np.ndarray]:
        """First ``length`` entries of alpha and beta as arrays."""
        pairs = [self.jacobi(k) for k in range(1, length + 1)]
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    def absolute(self) -> "JacobiParams":
        """Same betas, alphas replaced by their absolute values."""
        return JacobiParams(
            tuple(abs(a) for a in self.alpha_head),
            abs(self.alpha_tail),
            self.beta_head,
            self.beta_tail,
        )


@dataclass(frozen=True)
class MeixnerParams:
    """The quadruple (a1, a2, b1, b2) of a free Meixner law."""

    a1: float
    a2: float
    b1: float
    b2: float

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.b1 < 0 or self.b2 < 0:
            raise ValueError("b1 and b2 must be non-negative")

    @property
    def is_dirac(self) -> bool:
        return self.b1 == 0.0

    @property
    def is_standard(self) -> bool:
        return self.a1 == 0.0 and self.b1 == 1.0

    def jacobi(self) -> JacobiParams:
        return meixner_to_jacobi(self)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a1, self.a2, self.b1, self.b2)


def meixner_to_jacobi(p: MeixnerParams) -> JacobiParams:
    """Jacobi sequences ``(a1, a2, a2, ...)`` and ``(b1, b2, b2, ...)``.

    Degenerate quadruples are cut off according to the termination rule:
    ``b1 = 0`` gives the point mass at ``a1`` and ``b2 = 0`` stops the
    fraction after the second level.
    """
    if p.b1 == 0.0:
        return JacobiParams((p.a1, 0.0), 0.0, (0.0, 0.0), 0.0)
    if p.b2 == 0.0:
        return JacobiParams((p.a1, p.a2), 0.0, (p.b1, 0.0), 0.0)
    return JacobiParams((p.a1, p.a2), p.a2, (p.b1, p.b2), p.b2)


@dataclass
class MomentTable:
    """Moments ``M_0..M_mmax`` of a law together with how they were obtained."""

    moments: np.ndarray
    method: str
    stderr: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.moments = np.asarray(self.moments, dtype=float)
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")
        if self.moments.size == 0 or abs(self.moments[0] - 1.0) > 1e-12:
            raise ValueError("moment 0 must equal 1")
        if self.stderr is not None:
            if self.method != "monte-carlo":
                raise ValueError("standard errors are only carried by monte-carlo tables")
            self.stderr = np.asarray(self.stderr, dtype=float)
            if self.stderr.shape != self.moments.shape or np.any(self.stderr < 0):
                raise ValueError("stderr must be non-negative and match the moments")

    @property
    def m_max(self) -> int:
        return len(self.moments) - 1

    def __getitem__(self, m):
        return self.moments[m]

    def rows(self) -> list[tuple[int, float, float | None, str]]:
        se = self.stderr if self.stderr is not None else [None] * len(self.moments)
        return [(m, float(v), None if s is None else float(s), self.method)
                for m, (v, s) in enumerate(zip(self.moments, se))]

    def to_csv(self, fh=None) -> str:
        """Write ``m,moment,stderr,method`` rows; returns the text if no file given."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "moment", "stderr", "method"])
        for m, v, s, method in self.rows():
            w.writerow([m, repr(v), "" if s is None else repr(s), method])
        return buf.getvalue() if fh is None else ""

    @classmethod
    def from_csv(cls, text: str) -> "MomentTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        rows.sort(key=lambda r: int(r["m"]))
        if [int(r["m"]) for r in rows] != list(range(len(rows))):
            raise ValueError("moment rows must cover m = 0..m_max")
        methods = {r["method"] for r in rows}
        if len(methods) != 1:
            raise ValueError("a moment table carries a single method tag")
        se = [r["stderr"] for r in rows]
        stderr = None if all(s == "" for s in se) else [float(s or 0.0) for s in se]
        return cls([float(r["moment"]) for r in rows], methods.pop(), stderr)


def support_radius(j: JacobiParams) -> float:
    """Gershgorin bound R with the support of the law inside [-R, R]."""
    L = j.head_length + 2
    alpha, beta = j.sequences(L)
    sq = np.sqrt(beta)
    prev = np.concatenate([[0.0], sq[:-1]])
    return float(np.max(np.abs(alpha) + sq + prev))


def _tail_fixed_point(z: complex, a: float, b: float) -> complex:
    # w = 1 / (z - a - b w): the root that decays at infinity has the smaller modulus
    if b == 0.0:
        return 1.0 / (z - a)
    s = np.sqrt(complex((z - a) ** 2 - 4.0 * b))
    w1 = ((z - a) - s) / (2.0 * b)
    w2 = ((z - a) + s) / (2.0 * b)
    return w1 if abs(w1) <= abs(w2) else w2


def cauchy_transform(j: JacobiParams, z: complex, depth: int = 30) -> complex:
    """Continued-fraction Cauchy transform ``G(z) = 1/(z - a_1 - b_1/(z - a_2 - ...))``.

    The fraction is evaluated bottom-up from level ``depth``.  Below that
    level the constant tail is summed in closed form, so any ``depth`` at
    least the head length gives the exact value.  A vanishing ``beta_k``
    ends the fraction at level ``k``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    z = complex(z)
    if z.imag == 0.0 and abs(z.real) <= support_radius(j):
        raise ValueError(f"z = {z.real} lies on the real axis inside the support bound")
    stop = j.terminal_index
    if stop is not None and stop <= depth:
        level, g = stop, 0.0
    else:
        level = depth
        g = _tail_fixed_point(z, j.alpha_tail, j.beta_tail)
    for k in range(level, 0, -1):
        a, b = j.jacobi(k)
        g = 1.0 / (z - a - b * g)
    return complex(g)


def _check_standard(p: MeixnerParams) -> None:
    if not p.is_standard:
        raise ValueError("the density formula covers standard laws only (a1 = 0, b1 = 1)")
    if p.b2 <= 0:
        raise ValueError("the density formula needs b2 > 0")


def density_support(p: MeixnerParams) -> tuple[float, float]:
    r = 2.0 * math.sqrt(p.b2)
    return p.a2 - r, p.a2 + r


def _denominator(p: MeixnerParams, x):
    return (p.b2 - 1.0) * x * x + p.a2 * x + 1.0


def _check_poles(p: MeixnerParams) -> None:
    lo, hi = density_support(p)
    roots = np.roots([p.b2 - 1.0, p.a2, 1.0]) if (p.b2 != 1.0 or p.a2 != 0.0) else []
    for r in roots:
        if abs(r.imag) < 1e-14 and lo <= r.real <= hi:
            raise DensityError(
                f"denominator vanishes at x = {r.real:.6g} inside [{lo:.6g}, {hi:.6g}]"
            )


def density_eval(p: MeixnerParams, x):
    """Absolutely continuous density of a standard free Meixner law.

    ``sqrt(4 b2 - (x - a2)^2) / (2 pi ((b2 - 1) x^2 + a2 x + 1))`` on
    ``[a2 - 2 sqrt(b2), a2 + 2 sqrt(b2)]`` and 0 elsewhere.  Accepts scalars
    or arrays.
    """
    _check_standard(p)
    _check_poles(p)
    x = np.asarray(x, dtype=float)
    rad = 4.0 * p.b2 - (x - p.a2) ** 2
    out = np.where(
        rad > 0,
        np.sqrt(np.clip(rad, 0.0, None)) / (2.0 * math.pi * _denominator(p, x)),
        0.0,
    )
    return float(out) if out.ndim == 0 else out


def _theta_rule(panels: int, order: int = 16) -> tuple[np.ndarray, np.ndarray]:
    # composite Gauss-Legendre on [0, pi]
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, math.pi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _density_weights(p: MeixnerParams, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes x_i and weights w_i with sum w_i f(x_i) ~ integral of f * density."""
    _check_standard(p)
    _check_poles(p)
    theta, w = _theta_rule(panels)
    r = 2.0 * math.sqrt(p.b2)
    x = p.a2 + r * np.cos(theta)
    # x = a2 + r cos(t) turns sqrt(4 b2 - (x - a2)^2) dx into r^2 sin^2(t) dt
    wx = w * (r * np.sin(theta)) ** 2 / (2.0 * math.pi * _denominator(p, x))
    return x, wx


def density_mass(p: MeixnerParams, panels: int = 64) -> float:
    """Total mass of the absolutely continuous part (1 minus the atomic mass)."""
    _, wx = _density_weights(p, panels)
    return float(wx.sum())


def density_moments(p: MeixnerParams, m_max: int, panels: int = 64) -> np.ndarray:
    """Raw moments of the density by quadrature, not renormalised."""
    x, wx = _density_weights(p, panels)
    powers = x[None, :] ** np.arange(m_max + 1)[:, None]
    return powers @ wx


def moments_tridiagonal(j: JacobiParams, m_max: int) -> MomentTable:
    """Moments as ``(J^m)_{11}`` of the truncated Jacobi matrix.

    The truncation size ``m_max // 2 + 2`` exceeds the deepest level a
    closed walk of length ``m_max`` can reach, so the values are exact.
    """
    if m_max < 0:
        raise ValueError("m_max must be >= 0")
    k = m_max // 2 + 2
    alpha, beta = j.sequences(k)
    J = np.diag(alpha) + np.diag(np.sqrt(beta[:-1]), 1) + np.diag(np.sqrt(beta[:-1]), -1)
    v = np.zeros(k)
    v[0] = 1.0
    out = np.empty(m_max + 1)
    for m in range(m_max + 1):
        out[m] = v[0]
        v = J @ v
    return MomentTable(out, "tridiagonal")


def hankel_min_eigenvalue(moments: Sequence[float], size: int = 6) -> float:
    """Smallest eigenvalue of the Hankel matrix ``[M_{i+j}]_{0 <= i, j < size}``."""
    mom = np.asarray(moments, dtype=float)
    if len(mom) < 2 * size - 1:
        raise ValueError(f"need moments up to order {2 * size - 2}")
    idx = np.add.outer(np.arange(size), np.arange(size))
    return float(np.linalg.eigvalsh(mom[idx]).min())


def moment_series(moments: Iterable[float], z: complex) -> complex:
    """Partial sum of ``sum_m M_m z^(-m-1)``."""
    z = complex(z)
    return complex(sum(m * z ** (-k - 1) for k, m in enumerate(moments)))
