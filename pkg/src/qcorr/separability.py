"""Separable-state bounds.

Bipartite pure test operators get exact bounds from the Schmidt (distinguishable),
Takagi (bosonic) and Slater (fermionic) spectra of the coefficient matrix.
General operators and multipartite partitions go through an alternating
solver of the separability eigenvalue equations, which returns a certified
lower bound on the true maximum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    CommutatorViolation,
    DimensionMismatch,
    SolverFailure,
    SymmetryViolation,
)
from .hilbert import (
    NULL_TOL,
    HermitianOperator,
    LowRankOperator,
    SpaceSpec,
    StateVector,
    SymmetryClass,
    symmetrizer,
)

SYMMETRY_TOL = 1e-10
PAIRING_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SchmidtSpectrum:
    """Descending decomposition coefficients of a bipartite vector.

    For the Slater variant each value multiplies a two-term antisymmetric
    pair, so a normalized input has ``2 * sum(values**2) == 1``.
    """

    values: np.ndarray
    variant: SymmetryClass

    def __post_init__(self):
        values = np.sort(np.asarray(self.values, dtype=float))[::-1].copy()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def weight(self) -> float:
        """Squared norm of the decomposed vector."""
        factor = 2.0 if self.variant is SymmetryClass.FERMIONIC else 1.0
        return float(factor * np.sum(self.values**2))

    @property
    def bound(self) -> float:
        """Maximal separable expectation of ``|psi><psi|`` in this variant."""
        lam = self.values
        if lam.size == 0:
            return 0.0
        if self.variant is SymmetryClass.DISTINGUISHABLE:
            return float(lam[0] ** 2)
        if self.variant is SymmetryClass.BOSONIC:
            # max over pairs k > l of the zero-padded spectrum
            second = lam[1] if lam.size > 1 else 0.0
            return float(lam[0] ** 2 + second**2)
        return float(2 * lam[0] ** 2)


def _check_bipartite(psi: StateVector):
    if psi.space.n_particles != 2:
        raise DimensionMismatch(f"bipartite decomposition needs N=2, got N={psi.space.n_particles}")


def coefficient_matrix(psi: StateVector, sector=None) -> np.ndarray:
    """``M[k, l] = <k,l|psi>``; optionally assert the exchange symmetry of M."""
    _check_bipartite(psi)
    d = psi.space.local_dim
    m = np.array(psi.amplitudes).reshape(d, d)
    if sector is not None:
        sign = SymmetryClass.from_sign(sector).sign
        if sign != 0:
            _check_matrix_symmetry(m, sign)
    return m


def _check_matrix_symmetry(m: np.ndarray, sign: int):
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    deviation = float(np.max(np.abs(m - sign * m.T))) if m.size else 0.0
    if deviation > SYMMETRY_TOL * scale:
        kind = "symmetric" if sign > 0 else "antisymmetric"
        raise SymmetryViolation(f"coefficient matrix is not {kind} (deviation {deviation:.3g})")


def schmidt(psi: StateVector) -> SchmidtSpectrum:
    m = coefficient_matrix(psi)
    return SchmidtSpectrum(np.linalg.svd(m, compute_uv=False), SymmetryClass.DISTINGUISHABLE)


def takagi_factorization(m: np.ndarray, rtol: float = 1e-10):
    """Autonne-Takagi factorization ``m = U diag(s) U^T`` of a complex symmetric matrix.

    Built from the SVD ``m = V S W^H``: inside each block of equal singular
    values ``Z = V^T W`` is a symmetric unitary, and ``U = V conj(sqrt(Z))``.
    Degenerate blocks are grouped with relative tolerance ``rtol``.
    """
    m = np.asarray(m, dtype=complex)
    _check_matrix_symmetry(m, +1)
    v, s, wh = np.linalg.svd(m)
    w = wh.conj().T
    scale = s[0] if s.size and s[0] > 0 else 1.0
    blocks = []
    start = 0
    for i in range(1, s.size + 1):
        if i == s.size or abs(s[i] - s[start]) > rtol * scale:
            blocks.append(range(start, i))
            start = i
    q = np.zeros((s.size, s.size), dtype=complex)
    for blk in blocks:
        idx = np.array(blk)
        z = v[:, idx].T @ w[:, idx]
        q[np.ix_(idx, idx)] = scipy.linalg.sqrtm(z)
    u = v @ q.conj()
    return s, u


def takagi(psi: StateVector) -> SchmidtSpectrum:
    m = coefficient_matrix(psi, SymmetryClass.BOSONIC)
    values, _ = takagi_factorization(m)
    return SchmidtSpectrum(values, SymmetryClass.BOSONIC)


def slater(psi: StateVector) -> SchmidtSpectrum:
    """Slater values from the paired singular values of an antisymmetric M.

    Singular values of an antisymmetric matrix come in equal pairs; each pair
    contributes one Slater value. An odd dimension leaves one unpaired zero.
    """
    m = coefficient_matrix(psi, SymmetryClass.FERMIONIC)
    s = np.linalg.svd(m, compute_uv=False)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    if s.size % 2:
        if s[-1] > PAIRING_TOL * scale:
            raise SymmetryViolation("odd-dimensional antisymmetric matrix with nonzero unpaired value")
        s = s[:-1]
    firsts, seconds = s[0::2], s[1::2]
    if np.any(np.abs(firsts - seconds) > PAIRING_TOL * scale):
        raise SymmetryViolation("singular values of the antisymmetric matrix are not paired")
    return SchmidtSpectrum((firsts + seconds) / 2, SymmetryClass.FERMIONIC)


def bipartite_bound(psi: StateVector, sym) -> float:
    """Closed-form separable bound of ``|psi><psi|`` (psi may be unnormalized)."""
    sym = SymmetryClass.from_sign(sym)
    decompose = {
        SymmetryClass.DISTINGUISHABLE: schmidt,
        SymmetryClass.BOSONIC: takagi,
        SymmetryClass.FERMIONIC: slater,
    }[sym]
    return decompose(psi).bound


@dataclass(frozen=True)
class PartitionSpec:
    """Disjoint blocks of zero-based particle indices covering 0..N-1."""

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(i) for i in b)) for b in self.blocks)
        if any(len(b) == 0 for b in blocks):
            raise ValueError("partition blocks must be nonempty")
        members = sorted(i for b in blocks for i in b)
        if members != list(range(len(members))):
            raise ValueError(f"blocks {self.blocks} do not partition 0..N-1")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_particles(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def k(self) -> int:
        return len(self.blocks)

    @classmethod
    def full(cls, n: int) -> "PartitionSpec":
        return cls(tuple((i,) for i in range(n)))

    @classmethod
    def bipartitions(cls, n: int) -> list["PartitionSpec"]:
        """All 2-block partitions; particle 0 always sits in the first block."""
        out = []
        rest = range(1, n)
        for size in range(0, n - 1):
            for extra in itertools.combinations(rest, size):
                first = (0,) + extra
                second = tuple(i for i in range(n) if i not in first)
                out.append(cls((first, second)))
        return out


@dataclass(frozen=True)
class SolverOptions:
    restarts: int = 32
    max_iters: int = 1000
    tol: float = 1e-10
    seed: int = 42

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or self.tol <= 0:
            raise ValueError("restarts, max_iters and tol must be positive")


@dataclass
class SolverResult:
    value: float
    vectors: list[np.ndarray]
    history: list[float] = field(default_factory=list)
    restart_values: list[float] = field(default_factory=list)


class _BlockedOperator:
    """Operator with its particles regrouped by partition block."""

    def __init__(self, operator, partition: PartitionSpec, space: SpaceSpec):
        self.k = partition.k
        d = space.local_dim
        self.dims = [d ** len(b) for b in partition.blocks]
        order = [i for b in partition.blocks for i in b]
        n = space.n_particles
        if isinstance(operator, LowRankOperator):
            tensor = operator.vectors.reshape((d,) * n + (operator.rank,))
            tensor = tensor.transpose(order + [n])
            self.factors = tensor.reshape(self.dims + [operator.rank])
            self.weights = np.asarray(operator.weights)
            self.dense = None
        else:
            tensor = np.asarray(operator.entries).reshape((d,) * (2 * n))
            tensor = tensor.transpose(order + [n + i for i in order])
            self.dense = tensor.reshape(self.dims * 2)
            self.factors = None

    def reduced(self, j: int, vectors) -> np.ndarray:
        """Operator on block j with every other block contracted against its vector."""
        k = self.k
        others = [b for b in reversed(range(k)) if b != j]
        if self.factors is not None:
            u = self.factors
            # highest axes first so lower axis positions stay valid
            for b in others:
                u = np.tensordot(u, vectors[b].conj(), axes=([b], [0]))
            return (u * self.weights) @ u.conj().T
        t = self.dense
        for b in others:
            t = np.tensordot(t, vectors[b], axes=([k + b], [0]))
        for b in others:
            t = np.tensordot(t, vectors[b].conj(), axes=([b], [0]))
        return t


def _top_eigvec(h: np.ndarray):
    vals, vecs = np.linalg.eigh((h + h.conj().T) / 2)
    top = vals[-1]
    # lowest-index eigenvector among those tied with the maximum
    i = int(np.flatnonzero(vals >= top - 1e-12)[0])
    vec = vecs[:, i]
    pivot = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[pivot]) / vec[pivot])
    return float(vals[i]), vec


class _RestartNeeded(Exception):
    pass


def _generalized_top(lj: np.ndarray, pj):
    """Maximize <x|lj|x>/<x|pj|x> on the range of pj."""
    if pj is None:
        return _top_eigvec(lj)
    pvals, pvecs = np.linalg.eigh((pj + pj.conj().T) / 2)
    keep = pvals > NULL_TOL
    if not np.any(keep):
        raise _RestartNeeded
    q = pvecs[:, keep] / np.sqrt(pvals[keep])
    g, y = _top_eigvec(q.conj().T @ lj @ q)
    x = q @ y
    return g, x / np.linalg.norm(x)


def _objective(ops, j, vectors):
    lop, pop = ops
    x = vectors[j]
    num = np.vdot(x, lop.reduced(j, vectors) @ x).real
    if pop is None:
        return float(num)
    den = np.vdot(x, pop.reduced(j, vectors) @ x).real
    if den <= NULL_TOL:
        raise _RestartNeeded
    return float(num / den)


def _spectral_init(operator, blocked: _BlockedOperator, partition, space):
    vals, vecs = operator.eigh()
    top = vecs[:, -1]
    d, n = space.local_dim, space.n_particles
    order = [i for b in partition.blocks for i in b]
    tensor = top.reshape((d,) * n).transpose(order).reshape(blocked.dims)
    out = []
    for j in range(blocked.k):
        mat = np.moveaxis(tensor, j, 0).reshape(blocked.dims[j], -1)
        _, vec = _top_eigvec(mat @ mat.conj().T)
        out.append(vec)
    return out


def _classical_init(effective, proj, blocked: _BlockedOperator, partition, space):
    """Basis product with the largest (projected) diagonal ratio.

    Starting here makes the result at least the best classical value, since
    sweeps never decrease the objective.
    """
    diag = np.asarray(effective.diagonal(), dtype=float)
    if proj is not None:
        norms = proj.diagonal()
        diag = np.where(norms > NULL_TOL, diag / np.where(norms > NULL_TOL, norms, 1.0), -np.inf)
    levels = space.unflatten(int(np.argmax(diag)))
    d = space.local_dim
    out = []
    for block, dim in zip(partition.blocks, blocked.dims):
        flat = 0
        for i in block:
            flat = flat * d + levels[i]
        vec = np.zeros(dim, dtype=complex)
        vec[flat] = 1.0
        out.append(vec)
    return out


def _random_init(rng, dims):
    out = []
    for dim in dims:
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        out.append(v / np.linalg.norm(v))
    return out


def _prepare(operator, projector, space):
    sign = _projector_sign(projector)
    if sign == 0:
        return operator, None
    residual = operator.commutator_residual(sign)
    scale = max(1.0, abs(operator.max_eigenvalue()))
    if residual > NULL_TOL * scale * max(1.0, np.sqrt(space.dim)):
        raise CommutatorViolation(f"[L, Pi] has norm {residual:.3g}")
    return operator.sector_projected(sign), symmetrizer(space, sign)


def _projector_sign(projector) -> int:
    if projector is None:
        return 0
    if isinstance(projector, str):
        projector = {"identity": 0, "I": 0, "+": 1, "-": -1, "plus": 1, "minus": -1}[projector]
    return SymmetryClass.from_sign(projector).sign


def alternating_maximize(operator, partition: PartitionSpec, projector=None,
                         opts: SolverOptions | None = None) -> SolverResult:
    """Alternating solution of the separability eigenvalue equations.

    Each sweep visits the blocks round-robin, contracts the operator (and the
    projector) against the other blocks' vectors, and replaces the current
    block vector with the top generalized eigenvector. The objective
    ``<x|L|x>/<x|P|x>`` never decreases; the best value over all restarts is
    returned together with the history of the winning restart. Once a start
    reaches the top eigenvalue of L (an upper bound) the remaining starts are
    skipped.
    """
    opts = opts or SolverOptions()
    space = operator.space
    if partition.n_particles != space.n_particles:
        raise DimensionMismatch("partition does not cover the operator's particles")
    effective, proj = _prepare(operator, projector, space)
    lop = _BlockedOperator(effective, partition, space)
    pop = None if proj is None else _BlockedOperator(proj, partition, space)
    ops = (lop, pop)
    rng = np.random.default_rng(opts.seed)
    # no product vector beats the top eigenvalue; reaching it ends the search early
    ceiling = effective.max_eigenvalue()

    best = None
    restart_values = []
    # restart 0 is spectral, the last start is the best classical product, the rest are random
    for restart in range(opts.restarts + 1):
        if restart == 0:
            vectors = _spectral_init(effective, lop, partition, space)
        elif restart == opts.restarts:
            vectors = _classical_init(effective, proj, lop, partition, space)
        else:
            vectors = _random_init(rng, lop.dims)
        for attempt in range(100):
            try:
                result = _sweep_until_converged(ops, vectors, opts, ceiling)
                break
            except _RestartNeeded:
                vectors = _random_init(rng, lop.dims)
        else:
            raise SolverFailure("could not find a product vector with nonzero projected norm")
        restart_values.append(result.value)
        if best is None or result.value > best.value:
            best = result
        if best.value >= ceiling - opts.tol:
            break
    best.restart_values = restart_values
    return best


def _sweep_until_converged(ops, vectors, opts: SolverOptions, ceiling: float = np.inf) -> SolverResult:
    lop, pop = ops
    vectors = [v.copy() for v in vectors]
    current = _objective(ops, 0, vectors)
    history = [current]
    for _ in range(opts.max_iters):
        for j in range(lop.k):
            lj = lop.reduced(j, vectors)
            pj = None if pop is None else pop.reduced(j, vectors)
            # the generalized eigenvalue is the objective at the updated iterate
            value, vectors[j] = _generalized_top(lj, pj)
        history.append(value)
        if value - current < opts.tol or value >= ceiling - opts.tol:
            current = max(current, value)
            break
        current = value
    return SolverResult(current, vectors, history)


def separability_eigen_solve(operator, partition: PartitionSpec, projector=None,
                             opts: SolverOptions | None = None) -> float:
    """Largest separability eigenvalue found (lower bound on the K-separable maximum)."""
    return alternating_maximize(operator, partition, projector, opts).value


def partial_and_full_bounds(operator, space: SpaceSpec | None = None, projector=None,
                            opts: SolverOptions | None = None) -> dict:
    """``g_partsep`` (max over all bipartitions) and ``g_fullsep`` (N-block partition)."""
    space = space or operator.space
    n = space.n_particles
    if n < 3:
        raise DimensionMismatch(f"partial/full separability needs N >= 3, got N={n}")
    full = separability_eigen_solve(operator, PartitionSpec.full(n), projector, opts)
    partial = max(
        separability_eigen_solve(operator, part, projector, opts)
        for part in PartitionSpec.bipartitions(n)
    )
    return {"g_partsep": partial, "g_fullsep": full}


def as_rank_one(operator):
    """Return ``psi`` with ``L = |psi><psi|`` if L is a positive rank-one operator, else None."""
    if isinstance(operator, LowRankOperator) and operator.rank == 1:
        w = float(operator.weights[0])
        if w < 0:
            return None
        amps = np.sqrt(w) * operator.vectors[:, 0]
        return StateVector(operator.space, amps, normalized=False)
    if isinstance(operator, (LowRankOperator, HermitianOperator)):
        vals, vecs = operator.eigh()
        scale = max(np.max(np.abs(vals)), 1.0) if vals.size else 1.0
        nonzero = np.abs(vals) > NULL_TOL * scale
        if np.count_nonzero(nonzero) != 1 or vals[nonzero][0] <= 0:
            return None
        i = int(np.flatnonzero(nonzero)[0])
        return StateVector(operator.space, np.sqrt(vals[i]) * vecs[:, i], normalized=False)
    return None
