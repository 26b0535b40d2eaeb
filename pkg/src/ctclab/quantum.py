"""Finite-dimensional density matrices, Kraus channels and their fixed points.

States are plain complex numpy arrays, checked on entry against the
tolerances below. Basis index i stands for the i-th binary string in
(length, lex) order, so the level-k block is the leading
``2^(k+1) - 1`` indices.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from ctclab.errors import ContractError, InvariantViolation
from ctclab.outcomes import Verdict

HERMITIAN_TOL = 1e-12
EIG_TOL = 1e-10
TRACE_TOL = 1e-10
KRAUS_TOL = 1e-10
SLACK = 1e-9


def level_size(k: int) -> int:
    """Number of binary strings of length <= k."""
    return 2 ** (k + 1) - 1


def validate_density(rho, what: str = "state") -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
        raise InvariantViolation(f"{what}: square shape", float(rho.ndim), 0.0)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > HERMITIAN_TOL:
        raise InvariantViolation(f"{what}: hermitian", herm, HERMITIAN_TOL)
    lam = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min())
    if lam < -EIG_TOL:
        raise InvariantViolation(f"{what}: positive semidefinite", -lam, EIG_TOL)
    tr = abs(complex(np.trace(rho)) - 1)
    if tr > TRACE_TOL:
        raise InvariantViolation(f"{what}: unit trace", tr, TRACE_TOL)
    return rho


def _same_dim(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ContractError(f"dimension mismatch: {a.shape} vs {b.shape}")


def hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


@dataclass
class KrausChannel:
    """$(rho) = sum_i E_i rho E_i^dagger with sum_i E_i^dagger E_i = I."""

    ops: np.ndarray
    description: str = ""

    def __post_init__(self):
        ops = np.asarray(self.ops, dtype=complex)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2] or ops.shape[0] == 0:
            raise ContractError("Kraus operators must be a nonempty stack of square matrices")
        gram = np.einsum("kji,kjl->il", ops.conj(), ops)
        err = float(np.linalg.norm(gram - np.eye(ops.shape[1])))
        if err > KRAUS_TOL:
            raise InvariantViolation("kraus completeness (sum E^dagger E = I)", err, KRAUS_TOL)
        self.ops = ops
        self._adj = ops.conj().transpose(0, 2, 1)

    @property
    def dim(self) -> int:
        return self.ops.shape[1]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return hermitize((self.ops @ rho @ self._adj).sum(axis=0))

    def power(self, rho: np.ndarray, t: int) -> np.ndarray:
        for _ in range(t):
            rho = self(rho)
        return rho

    @classmethod
    def identity(cls, dim: int) -> "KrausChannel":
        return cls(np.eye(dim), "identity")

    @classmethod
    def unitary(cls, u, description="unitary") -> "KrausChannel":
        return cls(np.asarray(u)[None], description)

    @classmethod
    def bit_flip(cls) -> "KrausChannel":
        return cls.unitary(np.array([[0, 1], [1, 0]]), "bit flip")

    @classmethod
    def depolarizing(cls, dim: int = 2) -> "KrausChannel":
        """Completely depolarizing: Kraus ops |i><j| / sqrt(dim)."""
        ops = np.zeros((dim * dim, dim, dim), dtype=complex)
        for n, (i, j) in enumerate(itertools.product(range(dim), repeat=2)):
            ops[n, i, j] = 1 / math.sqrt(dim)
        return cls(ops, "completely depolarizing")


def apply_channel(ch: KrausChannel, rho) -> np.ndarray:
    rho = validate_density(rho)
    if rho.shape[0] != ch.dim:
        raise ContractError(f"channel has dim {ch.dim}, state has dim {rho.shape[0]}")
    return validate_density(ch(rho), "channel output")


@dataclass
class AcceptEffect:
    """POVM element Q with 0 <= Q <= I; Pr[accept] = tr(Q rho)."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=complex)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ContractError("effect must be a square matrix")
        herm = float(np.max(np.abs(q - q.conj().T)))
        if herm > HERMITIAN_TOL:
            raise InvariantViolation("effect: hermitian", herm, HERMITIAN_TOL)
        lam = np.linalg.eigvalsh(hermitize(q))
        if lam.min() < -EIG_TOL:
            raise InvariantViolation("effect: Q >= 0", float(-lam.min()), EIG_TOL)
        if lam.max() > 1 + EIG_TOL:
            raise InvariantViolation("effect: Q <= I", float(lam.max() - 1), EIG_TOL)
        self.q = q

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    def accept_probability(self, rho: np.ndarray) -> float:
        return float(np.real(np.trace(self.q @ rho)))


def trace_norm(a: np.ndarray) -> float:
    """Sum of absolute eigenvalues of a Hermitian matrix."""
    return float(np.abs(np.linalg.eigvalsh(hermitize(np.asarray(a)))).sum())


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    _same_dim(rho, sigma)
    return trace_norm(rho - sigma) / 2


def vec_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Euclidean distance between vectorizations, i.e. the Frobenius norm of the difference."""
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    _same_dim(rho, sigma)
    return float(np.linalg.norm((rho - sigma).ravel()))


def check_trlb(rho, sigma) -> bool:
    """Frobenius norm of rho - sigma is at most its trace norm."""
    return vec_distance(rho, sigma) <= trace_norm(np.asarray(rho) - np.asarray(sigma)) + SLACK


def trub_bound(k: int, rho, sigma) -> float:
    return 2 ** (k / 4 + 2) * math.sqrt(vec_distance(rho, sigma))


def check_trub(rho, k: int, sigma) -> bool:
    """Trace norm of sigma - rho is at most 2^(k/4+2) sqrt(vec distance).

    ``sigma`` must live on the level-k block (the first 2^(k+1)-1 basis
    strings); ``rho`` may be any state of the same dimension.
    """
    sigma = np.asarray(sigma)
    m = level_size(k)
    outside = sigma.copy()
    outside[:m, :m] = 0
    if m > sigma.shape[0] or np.abs(outside).max(initial=0) > EIG_TOL:
        raise ContractError(f"sigma is not supported on the level-{k} block")
    return trace_norm(sigma - np.asarray(rho)) <= trub_bound(k, rho, sigma) + SLACK


# -- Cesaro averaging -------------------------------------------------------


@dataclass
class CesaroResult:
    rho: np.ndarray
    residual: float
    curve: list[tuple[int, float]] = field(default_factory=list)


def _curve_points(T: int) -> set[int]:
    pts = {T}
    p = 1
    while p < T:
        pts.add(p)
        p *= 2
    return pts


def cesaro_fixpoint(ch: KrausChannel, seed, T: int, curve: Optional[Iterable[int]] = None) -> CesaroResult:
    """rho_T = (1/T) sum_{i=1..T} $^i(seed) and its residual tr-dist($(rho_T), rho_T).

    The residual is also recorded at powers of two up to T (or at the
    requested ``curve`` points).
    """
    if T < 1:
        raise ContractError("T must be at least 1")
    x = validate_density(seed, "seed")
    if x.shape[0] != ch.dim:
        raise ContractError("seed and channel dimensions differ")
    pts = set(curve) if curve is not None else _curve_points(T)
    total = np.zeros_like(x)
    points = []
    for i in range(1, T + 1):
        x = ch(x)
        total += x
        if i in pts:
            avg = total / i
            points.append((i, trace_distance(ch(avg), avg)))
    rho = hermitize(total / T)
    residual = trace_distance(ch(rho), rho)
    return CesaroResult(rho, residual, points)


# -- grid search ------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    k: int
    denom: int


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def _signed_range(bound: int) -> list[int]:
    out = [0]
    for b in range(1, bound + 1):
        out += [b, -b]
    return out


def grid_states(dim: int, spec: GridSpec) -> Iterator[np.ndarray]:
    """Rational PSD unit-trace states on the level-k block with entries in (1/denom)Z.

    Diagonals run over compositions of ``denom``; real symmetric
    off-diagonals b satisfy |b| <= sqrt(a_i a_j) and the PSD ones are kept.
    """
    m = min(dim, level_size(spec.k))
    n = spec.denom
    for diag in _compositions(n, m):
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m) if diag[i] and diag[j]]
        ranges = [_signed_range(math.isqrt(diag[i] * diag[j])) for i, j in pairs]
        for offs in itertools.product(*ranges):
            a = np.zeros((dim, dim))
            a[range(m), range(m)] = diag
            for (i, j), b in zip(pairs, offs):
                a[i, j] = a[j, i] = b
            if any(offs) and np.linalg.eigvalsh(a).min() < -1e-12:
                continue
            yield (a / n).astype(complex)


def grid_schedule(dim: int, max_denom: int) -> list[GridSpec]:
    """Diagonal interleaving of (k, denom): by k + denom, then k.

    Levels stop at the first k whose block fills the whole space.
    """
    k_cap = 1
    while level_size(k_cap) < dim:
        k_cap += 1
    specs = [GridSpec(k, d) for k in range(1, k_cap + 1) for d in range(1, max_denom + 1)]
    specs.sort(key=lambda g: (g.k + g.denom, g.k))
    return specs


def search_threshold(k: int) -> float:
    return 2.0 ** -(k + 12)


@dataclass
class SearchAResult:
    verdict: Verdict
    state: Optional[np.ndarray] = None
    grid: Optional[GridSpec] = None
    accept_probability: Optional[float] = None
    states_tried: int = 0


def fixed_point_search_A(
    ch: KrausChannel,
    effect: AcceptEffect,
    schedule: Sequence[GridSpec],
    t_budget: int,
    max_states: Optional[int] = None,
) -> SearchAResult:
    """Walk the grid schedule; a state survives if no t <= t_budget moves it by more
    than 2^-(k+12) in trace distance, and then decides at 0.55 / 0.45."""
    schedule = list(schedule)
    if not schedule:
        raise ContractError("grid schedule is empty")
    if effect.dim != ch.dim:
        raise ContractError("effect and channel dimensions differ")
    seen = set()
    tried = 0
    for g in schedule:
        eps = search_threshold(g.k)
        for sigma in grid_states(ch.dim, g):
            key = np.round(sigma.real, 12).tobytes()
            if key in seen:
                continue
            seen.add(key)
            if max_states is not None and tried >= max_states:
                return SearchAResult(Verdict.EXHAUSTED, states_tried=tried)
            tried += 1
            x = sigma
            moved = False
            for _ in range(t_budget):
                x = ch(x)
                if trace_distance(sigma, x) > eps:
                    moved = True
                    break
            if moved:
                continue
            p = effect.accept_probability(sigma)
            if p >= 0.55:
                return SearchAResult(Verdict.ACCEPT, sigma, g, p, tried)
            if p <= 0.45:
                return SearchAResult(Verdict.REJECT, sigma, g, p, tried)
    return SearchAResult(Verdict.EXHAUSTED, states_tried=tried)


def planted_channel(rho_star, p: float, rng: np.random.Generator) -> KrausChannel:
    """$(rho) = (1-p) V rho V^dagger + p tr(rho) rho*, V diagonal in rho*'s eigenbasis.

    rho* is then the unique fixed point and $ contracts by (1-p).
    """
    rho_star = validate_density(rho_star, "planted state")
    n = rho_star.shape[0]
    lam, w = np.linalg.eigh(rho_star)
    phases = np.exp(2j * np.pi * rng.random(n))
    v = w @ np.diag(phases) @ w.conj().T
    ops = [math.sqrt(1 - p) * v]
    # replacement channel rho -> tr(rho) rho* = sum_{i,j} sqrt(lam_i) |w_i><j| rho |j><w_i| sqrt(lam_i)
    for i in range(n):
        if lam[i] > 0:
            for j in range(n):
                e = np.zeros((n, n), dtype=complex)
                e[:, j] = math.sqrt(p * lam[i]) * w[:, i]
                ops.append(e)
    return KrausChannel(np.array(ops), "planted replacement channel")


# -- random instances -------------------------------------------------------


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_density(dim: int, rng: np.random.Generator, rank: Optional[int] = None) -> np.ndarray:
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return hermitize(rho / np.trace(rho).real)


def random_channel(dim: int, rng: np.random.Generator, n_kraus: int = 2) -> KrausChannel:
    """Kraus ops from the blocks of a random isometry C^dim -> C^(n_kraus*dim)."""
    z = rng.normal(size=(n_kraus * dim, dim)) + 1j * rng.normal(size=(n_kraus * dim, dim))
    q, _ = np.linalg.qr(z)
    return KrausChannel(q.reshape(n_kraus, dim, dim), f"random channel ({n_kraus} Kraus ops)")


def embed(block: np.ndarray, dim: int) -> np.ndarray:
    out = np.zeros((dim, dim), dtype=complex)
    m = block.shape[0]
    out[:m, :m] = block
    return out


# -- JSON matrix format -----------------------------------------------------


def _matrix_from_pairs(pairs, dim: int, what: str) -> np.ndarray:
    if len(pairs) != dim * dim:
        raise ContractError(f"{what}: expected {dim * dim} entries, got {len(pairs)}")
    try:
        vals = [complex(float(re), float(im)) for re, im in pairs]
    except (TypeError, ValueError):
        raise ContractError(f"{what}: entries must be [re, im] pairs") from None
    return np.array(vals).reshape(dim, dim)


def _matrix_to_pairs(a: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(a, dtype=complex).ravel()]


def channel_from_json(data: dict) -> KrausChannel:
    """``{"dim": N, "kraus": [[[re, im], ...N*N row-major], ...]}``"""
    dim = int(data["dim"])
    ops = [_matrix_from_pairs(op, dim, f"kraus[{i}]") for i, op in enumerate(data["kraus"])]
    return KrausChannel(np.array(ops), data.get("description", ""))


def effect_from_json(data: dict) -> AcceptEffect:
    """``{"dim": N, "Q": [[re, im], ...]}``"""
    dim = int(data["dim"])
    return AcceptEffect(_matrix_from_pairs(data["Q"], dim, "Q"))


def channel_to_json(ch: KrausChannel) -> dict:
    return {"dim": ch.dim, "description": ch.description, "kraus": [_matrix_to_pairs(e) for e in ch.ops]}


def effect_to_json(e: AcceptEffect) -> dict:
    return {"dim": e.dim, "Q": _matrix_to_pairs(e.q)}


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ContractError(f"{path}: invalid JSON ({exc})") from None
