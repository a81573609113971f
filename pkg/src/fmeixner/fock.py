"""Truncated matricially free Fock space of tracial type.

The space is the direct sum of two word spaces.  The first one is spanned
by a vacuum ``Omega1`` and words ``e2(u_1..u_{k-1}) (x) e1(u_k)``; the second
by a vacuum ``Omega2`` and words ``e2(u_1..u_k)``.  Creation operators
``p1(u)`` and ``p2(u)`` act on this basis with 0-1 patterns weighted by
``sqrt(b1(u))`` and ``sqrt(b2(u))``; their vacuum expectations reproduce
free Meixner moments and the joint law of independent block matrices.

Words longer than the truncation depth ``D`` are dropped, which is exact
for operator words of length at most ``2 (D - 1)``.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .jacobi import MeixnerParams, MomentTable

__all__ = [
    "BasisWord",
    "FockModel",
    "WordParseError",
    "TruncationError",
    "build_model",
    "parse_word",
    "state_moment",
    "meixner_moment_fock",
    "meixner_moment_fock_beta2_zero",
    "meixner_moment_fock_psi2",
    "meixner_moments_fock",
    "ensemble_moment",
    "required_depth",
]

OMEGA1 = "Omega1"
OMEGA2 = "Omega2"
WORD = "Word"

_TOKEN = re.compile(r"^(p1\*|p2\*|p1|p2|w1|w2|w|g|y)(?:\(([^()]+)\))?$")
OPERATOR_NAMES = ("p1", "p1*", "p2", "p2*", "w1", "w2", "w", "g", "y")


class WordParseError(ValueError):
    def __init__(self, msg: str, position: int, token: str):
        super().__init__(f"{msg} at token {position} ({token!r})")
        self.position = position
        self.token = token


class TruncationError(ValueError):
    """Operator word too long for the truncation depth of the model."""


@dataclass(frozen=True)
class BasisWord:
    """One basis vector: a vacuum or a word over the index set."""

    kind: str
    letters: tuple = ()
    terminal_e1: bool = False

    @property
    def length(self) -> int:
        return len(self.letters)

    @property
    def in_m1(self) -> bool:
        return self.kind == OMEGA1 or (self.kind == WORD and self.terminal_e1)

    def __str__(self) -> str:
        if self.kind != WORD:
            return self.kind
        head = self.letters[:-1] if self.terminal_e1 else self.letters
        parts = []
        if head:
            parts.append("e2(" + ",".join(map(str, head)) + ")")
        if self.terminal_e1:
            parts.append(f"e1({self.letters[-1]})")
        return " x ".join(parts)


def required_depth(word_length: int) -> int:
    """Smallest depth D with ``word_length <= 2 (D - 1)``."""
    return max(1, math.ceil(word_length / 2) + 1)


class FockModel:
    """Basis and sparse operator matrices over a finite index set.

    Parameters
    ----------
    index_set : sequence of hashable labels
    depth : int
        Maximal word length ``D``.
    params : mapping label -> MeixnerParams, or a single MeixnerParams
        used for every label.

    Operators are built on first use and cached; the model is otherwise
    immutable.
    """

    def __init__(self, index_set: Sequence[Hashable], depth: int,
                 params: Mapping[Hashable, MeixnerParams] | MeixnerParams):
        if depth < 1:
            raise ValueError("depth must be >= 1")
        index_set = list(index_set)
        if not index_set:
            raise ValueError("index set must not be empty")
        if len(set(index_set)) != len(index_set):
            raise ValueError("index set has repeated labels")
        if isinstance(params, MeixnerParams):
            params = {u: params for u in index_set}
        missing = [u for u in index_set if u not in params]
        if missing:
            raise ValueError(f"no parameters for labels {missing}")
        self.index_set = tuple(index_set)
        self.depth = depth
        self.params = {u: params[u] for u in index_set}

        basis = [BasisWord(OMEGA1), BasisWord(OMEGA2)]
        for k in range(1, depth + 1):
            for letters in itertools.product(self.index_set, repeat=k):
                basis.append(BasisWord(WORD, letters, False))
                basis.append(BasisWord(WORD, letters, True))
        self.basis = tuple(basis)
        self._index = {b: i for i, b in enumerate(self.basis)}
        self._cache: dict = {}

    # -- basis helpers -------------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index(self, b: BasisWord) -> int:
        return self._index[b]

    def vacuum(self, q: int) -> np.ndarray:
        if q not in (1, 2):
            raise ValueError("state index must be 1 or 2")
        v = np.zeros(self.dim)
        v[q - 1] = 1.0
        return v

    @property
    def m1_mask(self) -> np.ndarray:
        return np.array([b.in_m1 for b in self.basis])

    def exact_length(self) -> int:
        return 2 * (self.depth - 1)

    def _label(self, u):
        if u is None:
            if len(self.index_set) != 1:
                raise ValueError("a label is required when the index set has several labels")
            return self.index_set[0]
        if u not in self.params:
            # labels typed on the command line arrive as strings
            for cand in self.index_set:
                if str(cand) == str(u):
                    return cand
            raise ValueError(f"unknown label {u!r}")
        return u

    # -- operators -----------------------------------------------------------

    def _creation(self, j: int, u) -> sp.csr_matrix:
        p = self.params[u]
        rows, cols, vals = [], [], []
        if j == 1:
            if p.b1 > 0:
                rows.append(self._index[BasisWord(WORD, (u,), True)])
                cols.append(0)
                vals.append(math.sqrt(p.b1))
        elif p.b2 > 0:
            s = math.sqrt(p.b2)
            rows.append(self._index[BasisWord(WORD, (u,), False)])
            cols.append(1)
            vals.append(s)
            for i, b in enumerate(self.basis):
                if b.kind == WORD and b.length < self.depth:
                    rows.append(self._index[BasisWord(WORD, (u,) + b.letters, b.terminal_e1)])
                    cols.append(i)
                    vals.append(s)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.dim, self.dim))

    def _gamma(self, u) -> sp.csr_matrix:
        p = self.params[u]
        diag = np.full(self.dim, p.a2)
        diag[0] = p.a1
        return sp.diags(diag, format="csr")

    def operator(self, name: str, u=None) -> sp.csr_matrix:
        """Sparse matrix of ``p1 p1* p2 p2* w1 w2 w g y`` for label ``u``."""
        if name not in OPERATOR_NAMES:
            raise ValueError(f"unknown operator {name!r}")
        u = self._label(u)
        key = (name, u)
        if key not in self._cache:
            if name == "p1":
                m = self._creation(1, u)
            elif name == "p2":
                m = self._creation(2, u)
            elif name.endswith("*"):
                m = self.operator(name[:-1], u).T.tocsr()
            elif name in ("w1", "w2"):
                c = "p" + name[1]
                m = self.operator(c, u) + self.operator(c + "*", u)
            elif name == "w":
                m = self.operator("w1", u) + self.operator("w2", u)
            elif name == "g":
                m = self._gamma(u)
            else:
                m = self.operator("w", u) + self.operator("g", u)
            self._cache[key] = m.tocsr()
        return self._cache[key]

    def identity(self) -> sp.csr_matrix:
        return sp.identity(self.dim, format="csr")

    def apply_polynomial(self, u, coeffs: Sequence[float], v: np.ndarray) -> np.ndarray:
        """``sum_k coeffs[k] y(u)^k v`` by Horner's rule."""
        y = self.operator("y", u)
        out = np.zeros_like(v)
        for c in reversed(list(coeffs)):
            out = y @ out + c * v
        return out


def build_model(index_set, depth: int, params) -> FockModel:
    return FockModel(index_set, depth, params)


def parse_word(text: str) -> list[tuple[str, str | None]]:
    """Split an operator word like ``"p1*(s) g(s) y(u)"`` into (name, label) pairs."""
    out = []
    for pos, tok in enumerate(text.split()):
        m = _TOKEN.match(tok)
        if m is None:
            raise WordParseError("cannot parse operator", pos, tok)
        out.append((m.group(1), m.group(2)))
    return out


def _resolve(model: FockModel, ops) -> list:
    if isinstance(ops, str):
        ops = parse_word(ops)
    mats = []
    for op in ops:
        if isinstance(op, tuple):
            mats.append(model.operator(op[0], op[1]))
        elif isinstance(op, str):
            (parsed,) = parse_word(op)
            mats.append(model.operator(*parsed))
        else:
            mats.append(op)
    return mats


def state_moment(model: FockModel, q: int, ops) -> float:
    """``<Omega_q, Op_1 ... Op_m Omega_q>``, applying operators right to left.

    ``ops`` is an operator-word string, a list of ``(name, label)`` pairs or
    a list of matrices.  Words longer than ``2 (D - 1)`` are rejected.
    """
    mats = _resolve(model, ops)
    if len(mats) > model.exact_length():
        raise TruncationError(
            f"word of length {len(mats)} exceeds the exactness bound "
            f"{model.exact_length()} of depth {model.depth}"
        )
    v = model.vacuum(q)
    for a in reversed(mats):
        v = a @ v
    return float(v[q - 1])


def _power_moment(model: FockModel, x, q: int, m: int) -> float:
    if m > model.exact_length():
        raise TruncationError(f"m = {m} exceeds the exactness bound of depth {model.depth}")
    v = model.vacuum(q)
    for _ in range(m):
        v = x @ v
    return float(v[q - 1])


def meixner_moment_fock(p: MeixnerParams, m: int, depth: int | None = None) -> float:
    """``Psi_1((w1 + w2 + gamma)^m)`` with
    ``gamma = (a2 - a1)(p1 p1* / b1 + p2 p2* / b2) + a1``."""
    if p.b1 == 0 or p.b2 == 0:
        raise ValueError("this route needs b1 > 0 and b2 > 0; use the degenerate variants")
    model = FockModel(["u"], depth or required_depth(m), p)
    P = {k: model.operator(k) for k in ("p1", "p1*", "p2", "p2*")}
    gamma = (p.a2 - p.a1) * (P["p1"] @ P["p1*"] / p.b1 + P["p2"] @ P["p2*"] / p.b2) \
        + p.a1 * model.identity()
    x = model.operator("w1") + model.operator("w2") + gamma
    return _power_moment(model, x, 1, m)


def meixner_moment_fock_beta2_zero(p: MeixnerParams, m: int, depth: int | None = None) -> float:
    """``Psi_1((w1 + gamma1)^m)`` with ``gamma1 = (a2 - a1) p1 p1* / b1 + a1``."""
    if p.b1 <= 0 or p.b2 != 0:
        raise ValueError("this route needs b1 > 0 and b2 = 0")
    model = FockModel(["u"], depth or required_depth(m), p)
    p1, p1s = model.operator("p1"), model.operator("p1*")
    gamma1 = (p.a2 - p.a1) * (p1 @ p1s) / p.b1 + p.a1 * model.identity()
    return _power_moment(model, model.operator("w1") + gamma1, 1, m)


def meixner_moment_fock_psi2(p: MeixnerParams, m: int, depth: int | None = None) -> float:
    """``Psi_2((w2 + gamma2)^m)`` with ``gamma2 = (a2 - a1) p2 p2* / b2 + a1``.

    These are the moments of the law ``(a1, a2, b2, b2)``; ``b1`` plays no role.
    """
    if p.b2 <= 0:
        raise ValueError("this route needs b2 > 0")
    model = FockModel(["u"], depth or required_depth(m), p)
    p2, p2s = model.operator("p2"), model.operator("p2*")
    gamma2 = (p.a2 - p.a1) * (p2 @ p2s) / p.b2 + p.a1 * model.identity()
    return _power_moment(model, model.operator("w2") + gamma2, 2, m)


def meixner_moments_fock(p: MeixnerParams, m_max: int, state: int = 1) -> MomentTable:
    """Moment table through the Fock route that fits the parameters."""
    if state == 2:
        vals = [meixner_moment_fock_psi2(p, m) for m in range(m_max + 1)]
    elif p.b1 == 0:
        # point mass: no field operator, gamma reduces to a1
        vals = [p.a1 ** m for m in range(m_max + 1)]
    elif p.b2 == 0:
        vals = [meixner_moment_fock_beta2_zero(p, m) for m in range(m_max + 1)]
    else:
        vals = [meixner_moment_fock(p, m) for m in range(m_max + 1)]
    return MomentTable(vals, "fock", meta={"state": state})


def ensemble_moment(model: FockModel, q: int, labels: Sequence, with_gamma: bool = True) -> float:
    """``Psi_q(y(u_1) ... y(u_m))``, or with ``w`` in place of ``y``."""
    name = "y" if with_gamma else "w"
    return state_moment(model, q, [(name, u) for u in labels])
