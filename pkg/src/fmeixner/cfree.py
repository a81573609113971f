"""Conditional freeness checks for families of free Meixner variables.

Elements of the algebra of label ``u`` are polynomials in the single
generator ``y(u) = w(u) + g(u)``.  The kernel property says that
``Psi_1(a_1 ... a_k)`` vanishes when adjacent labels differ, every inner
factor has ``Psi_2``-expectation zero and the last one has
``Psi_1``-expectation zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .fock import FockModel, TruncationError, required_depth
from .rmt import EnsembleSpec, mc_words

__all__ = [
    "AlgebraElement",
    "center",
    "product_moment",
    "kernel_property_test",
    "kernel_report",
    "counterexample_values",
    "matrix_cfree_test",
    "model_for",
    "KERNEL_THRESHOLD",
]

KERNEL_THRESHOLD = 1e-9
MAX_DEGREE = 6


@dataclass(frozen=True)
class AlgebraElement:
    """``sum_k coeffs[k] y(label)^k``."""

    label: str
    coeffs: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            coeffs = (0.0,)
        if len(coeffs) - 1 > MAX_DEGREE:
            raise ValueError(f"degree is capped at {MAX_DEGREE}")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_terms(cls, label, terms: Sequence[tuple[float, int]]) -> "AlgebraElement":
        """Build from ``(coefficient, power)`` pairs."""
        deg = max((k for _, k in terms), default=0)
        c = [0.0] * (deg + 1)
        for coef, k in terms:
            c[k] += coef
        return cls(label, tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def expectation(self, model: FockModel, q: int) -> float:
        return product_moment(model, [self], q)

    def shifted(self, c: float) -> "AlgebraElement":
        return replace(self, coeffs=(self.coeffs[0] + c,) + self.coeffs[1:])


def product_moment(model: FockModel, elements: Sequence[AlgebraElement], q: int) -> float:
    """``Psi_q(a_1 ... a_k)`` in the Fock model."""
    total = sum(e.degree for e in elements)
    if total > model.exact_length():
        raise TruncationError(
            f"total degree {total} exceeds the exactness bound {model.exact_length()}"
        )
    v = model.vacuum(q)
    for e in reversed(elements):
        v = model.apply_polynomial(e.label, e.coeffs, v)
    return float(v[q - 1])


def center(e: AlgebraElement, model: FockModel, q: int) -> AlgebraElement:
    """``e - Psi_q(e) 1``."""
    return e.shifted(-e.expectation(model, q))


def _check_alternating(labels: Sequence) -> None:
    for a, b in zip(labels, labels[1:]):
        if a == b:
            raise ValueError(f"adjacent labels must differ, got {list(labels)}")


def _center_word(model, elements, centering):
    if centering == "conditional":
        states = [2] * (len(elements) - 1) + [1]
    elif centering == "psi1":
        states = [1] * len(elements)
    elif centering == "psi2":
        states = [2] * len(elements)
    else:
        raise ValueError("centering must be 'conditional', 'psi1' or 'psi2'")
    return [center(e, model, q) for e, q in zip(elements, states)]


def kernel_property_test(model: FockModel, labels: Sequence, degrees: Sequence[int] | int,
                         seed: int = 0, samples: int = 200,
                         centering: str = "conditional") -> float:
    """Largest ``|Psi_1(a_1 ... a_k)|`` over random centred polynomials.

    Coefficients are uniform in [-1, 1].  With the default centering the
    inner factors are centred under ``Psi_2`` and the last under ``Psi_1``;
    ``"psi1"`` centres every factor under ``Psi_1`` instead, which is the
    freeness-style test that is expected to fail.
    """
    labels = list(labels)
    if not labels:
        raise ValueError("empty word")
    _check_alternating(labels)
    if isinstance(degrees, int):
        degrees = [degrees] * len(labels)
    if len(degrees) != len(labels):
        raise ValueError("one degree per factor is required")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        elems = [AlgebraElement(u, tuple(rng.uniform(-1.0, 1.0, d + 1)))
                 for u, d in zip(labels, degrees)]
        val = product_moment(model, _center_word(model, elems, centering), 1)
        worst = max(worst, abs(val))
    return worst


def fixed_word_value(model: FockModel, elements: Sequence[AlgebraElement],
                     centering: str = "conditional") -> float:
    """``Psi_1`` of a fixed word after centring each factor."""
    _check_alternating([e.label for e in elements])
    return product_moment(model, _center_word(model, list(elements), centering), 1)


def kernel_report(model: FockModel, labels, degrees, seed=0, samples=200,
                  centering="conditional", threshold=KERNEL_THRESHOLD) -> dict:
    """JSON-ready summary of :func:`kernel_property_test`."""
    labels = list(labels)
    if isinstance(degrees, int):
        degrees = [degrees] * len(labels)
    worst = kernel_property_test(model, labels, degrees, seed, samples, centering)
    return {
        "word": [str(u) for u in labels],
        "degrees": list(degrees),
        "draws": samples,
        "centering": centering,
        "max_abs": worst,
        "threshold": threshold,
        "pass": bool(worst <= threshold),
    }


def counterexample_values(model: FockModel, s, u) -> tuple[float, float]:
    """``Psi_1(w1 w2 w1)`` and ``Psi_1(w1 w3 w1)`` for ``w1 = y(s)``,
    ``w2 = y(u)^2 - b1``, ``w3 = y(u)^2 - b2``.

    The first equals ``b1 (b2 - b1)``, the second vanishes.
    """
    ps, pu = model.params[s], model.params[u]
    if s == u:
        raise ValueError("s and u must be different labels")
    if any(x != 0.0 for x in (ps.a1, ps.a2, pu.a1, pu.a2)):
        raise ValueError("the construction assumes all shifts vanish")
    if (ps.b1, ps.b2) != (pu.b1, pu.b2):
        raise ValueError("both labels must share (b1, b2)")
    b1, b2 = ps.b1, ps.b2
    if b1 <= 0 or b2 <= 0 or b1 == b2:
        raise ValueError("needs 0 < b1 != b2 > 0")
    w1 = AlgebraElement(s, (0.0, 1.0))
    w2 = AlgebraElement(u, (-b1, 0.0, 1.0))
    w3 = AlgebraElement(u, (-b2, 0.0, 1.0))
    return product_moment(model, [w1, w2, w1], 1), product_moment(model, [w1, w3, w1], 1)


def model_for(espec_or_params, word_length: int) -> FockModel:
    """Fock model over the labels of an ensemble, deep enough for ``word_length``."""
    params = espec_or_params.block.params if isinstance(espec_or_params, EnsembleSpec) \
        else espec_or_params
    return FockModel(list(params), required_depth(word_length),
                     {u: p.meixner for u, p in params.items()})


def matrix_cfree_test(espec: EnsembleSpec, elements: Sequence[AlgebraElement],
                      centering: str | None = "conditional", n: int | None = None,
                      workers: int = 1) -> dict:
    """Matrix counterpart of a kernel word.

    Factors are centred with the limit constants of the Fock model (or not
    at all when ``centering`` is None), ``y(u)`` is replaced by ``M(u)`` and
    ``tau_1`` of the product is estimated.  Returns the estimate, its
    standard error and the Fock limit of the same word.
    """
    elements = list(elements)
    total = sum(e.degree for e in elements)
    model = model_for(espec, total)
    if centering is not None:
        elements = _center_word(model, elements, centering)
    limit = product_moment(model, elements, 1)
    (est, se), = mc_words(espec, [([e.label for e in elements],
                                   [e.coeffs for e in elements])], 1, n, workers)
    return {"estimate": est, "stderr": se, "limit": limit,
            "word": [str(e.label) for e in elements],
            "coeffs": [list(e.coeffs) for e in elements]}
