"""Monte-Carlo block Gaussian Hermitian matrices and their partial traces.

The index set ``{1..n}`` is split into a small block ``N1 = {1..n1}`` with
``n1 = floor(n ** rho)`` and its complement ``N2``, so ``n1 / n -> 0``.  Each
label ``u`` carries a symmetric variance matrix ``V(u)`` and two diagonal
shifts; the matrix ``M(u) = Y(u) + a1(u) I1 + a2(u) I2`` has, in the limit,
the free Meixner law ``(a1, a2, v12, v22)`` under the partial trace over
``N1``.

Randomness
----------
Trial ``t`` of label ``u`` draws from
``numpy.random.default_rng(SeedSequence(seed, spawn_key=(t, crc32(str(u)))))``,
so every (seed, trial, label) stream is fixed and independent of the order
in which trials run.  Estimates are plain means over trials in trial order;
the standard error is the sample standard deviation over ``sqrt(trials)``.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .fock import FockModel, meixner_moment_fock_psi2, meixner_moments_fock, required_depth
from .jacobi import MeixnerParams, MomentTable

__all__ = [
    "LabelParams",
    "BlockSpec",
    "EnsembleSpec",
    "HermitianSample",
    "trial_rng",
    "sample_matrix",
    "meixner_matrix",
    "partial_trace",
    "mc_moments",
    "mc_moments_both",
    "mc_word",
    "mc_words",
    "mc_mixed_moments",
    "oracle_moments",
    "finite_size_sweep",
    "SweepResult",
]


@dataclass(frozen=True)
class LabelParams:
    """Variances ``v11, v12 (= v21), v22`` and shifts ``a1, a2`` of one matrix."""

    a1: float = 0.0
    a2: float = 0.0
    v11: float = 0.0
    v12: float = 1.0
    v22: float = 1.0

    def __post_init__(self):
        if min(self.v11, self.v12, self.v22) < 0:
            raise ValueError("variances must be non-negative")

    @property
    def meixner(self) -> MeixnerParams:
        """Limit law under the first partial trace: b1 = v21, b2 = v22."""
        return MeixnerParams(self.a1, self.a2, self.v12, self.v22)

    @property
    def variance(self) -> np.ndarray:
        return np.array([[self.v11, self.v12], [self.v12, self.v22]])


@dataclass(frozen=True)
class BlockSpec:
    """Matrix size, block split and per-label parameters shared by a run."""

    n: int
    params: Mapping[str, LabelParams]
    rho: float = 0.5
    n1: int | None = None

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")
        n1 = self.n1 if self.n1 is not None else int(math.floor(self.n ** self.rho))
        if not 1 <= n1 < self.n:
            raise ValueError(f"need 1 <= n1 < n, got n1 = {n1}, n = {self.n}")
        object.__setattr__(self, "n1", n1)
        object.__setattr__(self, "params", dict(self.params))
        if not self.params:
            raise ValueError("at least one label is required")

    @classmethod
    def single(cls, n: int, a1=0.0, a2=0.0, b1=1.0, b2=1.0, v11=0.0, rho=0.5,
               n1=None, label="u") -> "BlockSpec":
        return cls(n, {label: LabelParams(a1, a2, v11, b1, b2)}, rho, n1)

    @property
    def n2(self) -> int:
        return self.n - self.n1

    @property
    def labels(self) -> list[str]:
        return list(self.params)

    def block_of(self) -> np.ndarray:
        """0 for indices in N1, 1 for N2."""
        out = np.ones(self.n, dtype=int)
        out[: self.n1] = 0
        return out

    def dimension_matrix(self) -> np.ndarray:
        return np.diag([self.n1 / self.n, self.n2 / self.n])

    def b_matrix(self, u) -> np.ndarray:
        """``D V(u)`` at the current n; reported only, the limit has d1 = 0."""
        return self.dimension_matrix() @ self.params[u].variance

    def with_n(self, n: int) -> "BlockSpec":
        return BlockSpec(n, self.params, self.rho)


@dataclass(frozen=True)
class EnsembleSpec:
    block: BlockSpec
    trials: int = 400
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    @property
    def labels(self) -> list[str]:
        return self.block.labels


@dataclass
class HermitianSample:
    matrix: np.ndarray
    label: str
    draw: int = 0


def trial_rng(seed: int, trial: int, label) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(trial, zlib.crc32(str(label).encode())))
    return np.random.default_rng(ss)


def sample_matrix(spec: BlockSpec, u, rng: np.random.Generator, draw: int = 0) -> HermitianSample:
    """Hermitian Gaussian matrix with ``E|Y_ij|^2 = v_pq / n`` on block (p, q).

    Off the diagonal, real and imaginary parts are independent with variance
    ``v_pq / (2n)`` each; diagonal entries are real with variance ``v_qq / n``.
    """
    n = spec.n
    blk = spec.block_of()
    sd = np.sqrt(spec.params[u].variance[np.ix_(blk, blk)] / n)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    upper = np.triu(z * (sd / math.sqrt(2.0)), 1)
    y = upper + upper.conj().T
    y[np.diag_indices(n)] = rng.standard_normal(n) * np.diag(sd)
    return HermitianSample(y, u, draw)


def meixner_matrix(Y: HermitianSample | np.ndarray, spec: BlockSpec, u=None) -> np.ndarray:
    """``Y + a1 I1 + a2 I2``."""
    if isinstance(Y, HermitianSample):
        u = Y.label if u is None else u
        Y = Y.matrix
    p = spec.params[u]
    shift = np.where(spec.block_of() == 0, p.a1, p.a2)
    return Y + np.diag(shift).astype(Y.dtype)


def _block_slice(spec: BlockSpec, j: int) -> slice:
    if j == 1:
        return slice(0, spec.n1)
    if j == 2:
        return slice(spec.n1, spec.n)
    raise ValueError("partial trace index must be 1 or 2")


def partial_trace(A: np.ndarray, j: int, spec: BlockSpec, allow_complex: bool = False,
                  tol: float = 1e-10) -> float:
    """Normalised trace over the basis vectors in ``N_j``.

    The imaginary part is discarded; unless ``allow_complex`` is set it must
    be below ``tol``, which holds for Hermitian arguments.
    """
    s = _block_slice(spec, j)
    t = np.trace(A[s, s]) / (s.stop - s.start)
    if not allow_complex and abs(t.imag) > tol:
        raise ValueError(f"partial trace has imaginary part {t.imag:.3g}; argument is not Hermitian")
    return float(t.real)


# -- per-trial kernels ------------------------------------------------------

def _draw(spec: BlockSpec, seed: int, trial: int, u) -> np.ndarray:
    return meixner_matrix(sample_matrix(spec, u, trial_rng(seed, trial, u), trial), spec)


def _trial_power_moments(M: np.ndarray, spec: BlockSpec, m_max: int, method: str,
                         tau2: bool = True) -> np.ndarray:
    """Row 0: tau_1(M^m); row 1: tau_2(M^m) (NaN if skipped), for m = 0..m_max."""
    n1, n2 = spec.n1, spec.n2
    out = np.empty((2, m_max + 1))
    out[:, 0] = 1.0
    if method == "full":
        P = np.eye(spec.n, dtype=M.dtype)
        for m in range(1, m_max + 1):
            P = P @ M
            d = np.diag(P).real
            out[0, m] = d[:n1].sum() / n1
            out[1, m] = d[n1:].sum() / n2
        return out
    # tau_1 from the N1 rows only; full traces from half powers of M
    R = np.eye(spec.n, dtype=M.dtype)[:n1]
    for m in range(1, m_max + 1):
        R = R @ M
        out[0, m] = np.trace(R[:, :n1]).real / n1
    if not tau2:
        out[1, 1:] = np.nan
        return out
    half = [np.eye(spec.n, dtype=M.dtype), M]
    for _ in range(2, (m_max + 1) // 2 + 1):
        half.append(half[-1] @ M)
    for m in range(1, m_max + 1):
        a = m // 2
        # tr(P_a P_b) = <P_b, P_a> for Hermitian powers
        tr = np.vdot(half[m - a], half[a]).real
        out[1, m] = (tr - n1 * out[0, m]) / n2
    return out


def _run_trials(fn: Callable[[int], np.ndarray], trials: int, workers: int) -> np.ndarray:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(fn, range(trials)))
    else:
        results = [fn(t) for t in range(trials)]
    return np.stack(results)


def _mean_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k = samples.shape[0]
    mean = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.zeros_like(mean)
    return mean, se


def mc_moments_both(spec: BlockSpec, u, m_max: int, trials: int, seed: int,
                    method: str = "rows", workers: int = 1,
                    tau2: bool = True) -> tuple[MomentTable, MomentTable | None]:
    """Monte-Carlo tables of ``tau_1(M^m)`` and ``tau_2(M^m)`` from the same draws.

    With ``tau2=False`` only the first table is computed (second is None).
    """
    if m_max > 8:
        raise ValueError("m_max is capped at 8")
    if method not in ("rows", "full"):
        raise ValueError("method must be 'rows' or 'full'")

    def one(t):
        return _trial_power_moments(_draw(spec, seed, t, u), spec, m_max, method,
                                    tau2 or method == "full")

    samples = _run_trials(one, trials, workers)
    mean, se = _mean_se(samples)
    meta = {"n": spec.n, "n1": spec.n1, "trials": trials, "seed": seed, "label": u}
    tables = [MomentTable(mean[0], "monte-carlo", se[0], meta={**meta, "state": 1}), None]
    if tau2:
        tables[1] = MomentTable(mean[1], "monte-carlo", se[1], meta={**meta, "state": 2})
    return tuple(tables)


def mc_moments(spec: BlockSpec, u, m_max: int, trials: int, seed: int, state: int = 1,
               method: str = "rows", workers: int = 1) -> MomentTable:
    """Monte-Carlo estimate of ``tau_state(M(u)^m)`` for ``m <= m_max``."""
    both = mc_moments_both(spec, u, m_max, trials, seed, method, workers, tau2=(state == 2))
    return both[state - 1]


def _apply_poly_right(R: np.ndarray, M: np.ndarray, coeffs: Sequence[float]) -> np.ndarray:
    # R p(M) = sum_k c_k R M^k, Horner from the top coefficient
    coeffs = list(coeffs)
    S = coeffs[-1] * R
    for c in reversed(coeffs[:-1]):
        S = S @ M + c * R
    return S


def mc_words(espec: EnsembleSpec, words: Sequence[tuple[Sequence, Sequence[Sequence[float]] | None]],
             state: int = 1, n: int | None = None, workers: int = 1) -> list[tuple[float, float]]:
    """Monte-Carlo estimates of ``tau_state(p_1(M(u_1)) ... p_k(M(u_k)))`` for several words.

    Each word is ``(labels, polys)``; ``polys[i]`` holds ascending
    coefficients and ``None`` means the plain mixed moment.  Within one trial
    every label is drawn once and shared by all words and all repeated
    occurrences of that label.
    """
    spec = espec.block if n is None else espec.block.with_n(n)
    prepared = []
    for labels, polys in words:
        labels = list(labels)
        if polys is None:
            polys = [[0.0, 1.0]] * len(labels)
        if len(polys) != len(labels):
            raise ValueError("one polynomial per factor is required")
        for u in labels:
            if u not in spec.params:
                raise ValueError(f"unknown label {u!r}")
        prepared.append((labels, [list(map(float, c)) for c in polys]))
    needed = list(dict.fromkeys(u for labels, _ in prepared for u in labels))
    s = _block_slice(spec, state)
    size = s.stop - s.start

    def one(t):
        mats = {u: _draw(spec, espec.seed, t, u) for u in needed}
        out = np.empty(len(prepared))
        for k, (labels, polys) in enumerate(prepared):
            R = np.eye(spec.n, dtype=complex)[s]
            for u, c in zip(labels, polys):
                R = _apply_poly_right(R, mats[u], c)
            out[k] = np.trace(R[:, s]).real / size
        return out

    samples = _run_trials(one, espec.trials, workers)
    mean, se = _mean_se(samples)
    return [(float(a), float(b)) for a, b in zip(mean, se)]


def mc_word(espec: EnsembleSpec, labels: Sequence, polys: Sequence[Sequence[float]] | None = None,
            state: int = 1, n: int | None = None, workers: int = 1) -> tuple[float, float]:
    """Single-word form of :func:`mc_words`."""
    return mc_words(espec, [(labels, polys)], state, n, workers)[0]


def mc_mixed_moments(espec: EnsembleSpec, word: Sequence, state: int = 1,
                     seed: int | None = None, workers: int = 1) -> tuple[float, float]:
    """Estimate of ``tau_state(M(u_1) ... M(u_m))`` with its standard error."""
    if seed is not None:
        espec = EnsembleSpec(espec.block, espec.trials, seed)
    return mc_word(espec, word, None, state, workers=workers)


def ensemble_model(params: Mapping[str, LabelParams], word_length: int) -> FockModel:
    return FockModel(list(params), required_depth(word_length),
                     {u: p.meixner for u, p in params.items()})


def oracle_moments(p: LabelParams, m_max: int, state: int = 1,
                   tau2_route: str = "ensemble") -> np.ndarray:
    """Limit moments of ``M`` under ``tau_state`` from the Fock model.

    For the second partial trace two routes exist: ``"ensemble"`` evaluates
    ``Psi_2(y^m)`` in the multivariate model, where ``y`` acts as ``a2`` on
    the second vacuum (the value the matrices converge to); ``"restricted"``
    evaluates ``Psi_2((w2 + gamma2)^m)`` with ``gamma2 = a1`` on that vacuum,
    i.e. the law ``(a1, a2, v22, v22)``.  The two agree iff ``a1 = a2``.
    """
    law = p.meixner
    if state == 1:
        return meixner_moments_fock(law, m_max).moments
    if tau2_route == "restricted":
        return np.array([meixner_moment_fock_psi2(law, m) for m in range(m_max + 1)])
    if tau2_route != "ensemble":
        raise ValueError("tau2_route must be 'ensemble' or 'restricted'")
    model = FockModel(["u"], required_depth(m_max), law)
    y = model.operator("y")
    v = model.vacuum(2)
    out = np.empty(m_max + 1)
    for m in range(m_max + 1):
        out[m] = v[1]
        v = y @ v
    return out


@dataclass
class SweepResult:
    label: str
    m: int
    limit: float
    rows: list[dict] = field(default_factory=list)
    slope: float | None = None

    def table(self) -> list[tuple[int, float, float]]:
        return [(r["n"], r["estimate"], r["stderr"]) for r in self.rows]


def finite_size_sweep(spec: BlockSpec, u, m: int, n_list: Sequence[int], trials: int,
                      seed: int, state: int = 1, workers: int = 1) -> SweepResult:
    """Estimates of ``tau_state(M^m)`` for growing ``n`` against the limit.

    ``slope`` is the least-squares exponent of ``|estimate - limit|`` against
    ``n`` on log-log axes (None when fewer than two errors are nonzero).
    """
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be increasing")
    limit = float(oracle_moments(spec.params[u], m, state)[m])
    res = SweepResult(str(u), m, limit)
    for n in n_list:
        sub = spec.with_n(n)
        tab = mc_moments(sub, u, m, trials, seed, state, workers=workers)
        est, se = float(tab.moments[m]), float(tab.stderr[m])
        res.rows.append({"n": n, "n1": sub.n1, "estimate": est, "stderr": se,
                         "abs_error": abs(est - limit)})
    errs = np.array([r["abs_error"] for r in res.rows])
    ns = np.array(n_list, dtype=float)
    ok = errs > 0
    if ok.sum() >= 2:
        res.slope = float(np.polyfit(np.log(ns[ok]), np.log(errs[ok]), 1)[0])
    return res
