"""Dense tensor algebra for N qudits of local dimension d.

Flattening convention: subsystem 1 is the slowest-varying index, i.e.
``flat = sum_j k_j * d**(N - j)`` (numpy row-major over a ``(d,)*N`` tensor).
Every vector and matrix in the package uses this order.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    DimensionMismatch,
    NotNormalized,
    NullProjection,
    TooManyParticles,
)

NORM_TOL = 1e-12
NULL_TOL = 1e-10
MAX_PARTICLES = 8


@dataclass(frozen=True)
class SpaceSpec:
    """N particles, each with a d-dimensional single-particle space."""

    n_particles: int
    local_dim: int

    def __post_init__(self):
        if int(self.n_particles) != self.n_particles or self.n_particles < 1:
            raise ValueError(f"n_particles must be a positive integer, got {self.n_particles}")
        if int(self.local_dim) != self.local_dim or self.local_dim < 1:
            raise ValueError(f"local_dim must be a positive integer, got {self.local_dim}")
        if self.local_dim ** self.n_particles > np.iinfo(np.intp).max:
            raise ValueError("total dimension exceeds addressable range")

    @property
    def dim(self) -> int:
        return self.local_dim ** self.n_particles

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.local_dim,) * self.n_particles

    def flatten(self, levels) -> int:
        levels = tuple(levels)
        if len(levels) != self.n_particles:
            raise DimensionMismatch(f"expected {self.n_particles} levels, got {len(levels)}")
        flat = 0
        for k in levels:
            if not 0 <= k < self.local_dim:
                raise ValueError(f"level {k} outside 0..{self.local_dim - 1}")
            flat = flat * self.local_dim + int(k)
        return flat

    def unflatten(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.dim:
            raise ValueError(f"flat index {flat} outside 0..{self.dim - 1}")
        levels = []
        for _ in range(self.n_particles):
            flat, k = divmod(flat, self.local_dim)
            levels.append(k)
        return tuple(reversed(levels))


def occupation_numbers(levels, local_dim: int) -> tuple[int, ...]:
    """Multiplicities N_k: how often each level k occurs in ``levels``."""
    counts = [0] * local_dim
    for k in levels:
        counts[k] += 1
    return tuple(counts)


@dataclass(frozen=True)
class Permutation:
    """Zero-based bijection; ``P_sigma |x_0..x_{N-1}> = |x_sigma[0]..x_sigma[N-1]>``."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        mapping = tuple(int(i) for i in self.mapping)
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError(f"not a permutation: {self.mapping}")
        object.__setattr__(self, "mapping", mapping)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))

    @property
    def size(self) -> int:
        return len(self.mapping)

    @property
    def parity(self) -> int:
        return permutation_parity(self.mapping)

    def compose(self, other: "Permutation") -> "Permutation":
        """Permutation whose operator equals ``P_self @ P_other``."""
        if other.size != self.size:
            raise DimensionMismatch("permutations act on different numbers of symbols")
        return Permutation(tuple(other.mapping[i] for i in self.mapping))

    def inverse(self) -> "Permutation":
        inv = [0] * self.size
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return Permutation(tuple(inv))


def permutation_parity(mapping) -> int:
    inversions = sum(
        1 for i in range(len(mapping)) for j in range(i + 1, len(mapping)) if mapping[i] > mapping[j]
    )
    return -1 if inversions % 2 else 1


@lru_cache(maxsize=None)
def _signed_permutations(n: int) -> tuple[tuple[tuple[int, ...], int], ...]:
    return tuple((p, permutation_parity(p)) for p in itertools.permutations(range(n)))


class SymmetryClass(enum.Enum):
    DISTINGUISHABLE = "0"
    BOSONIC = "+"
    FERMIONIC = "-"

    @property
    def sign(self) -> int:
        """Exchange sign (+1 bosons, -1 fermions); 0 for distinguishable."""
        return {"0": 0, "+": 1, "-": -1}[self.value]

    @classmethod
    def from_sign(cls, sign) -> "SymmetryClass":
        if isinstance(sign, SymmetryClass):
            return sign
        lookup = {0: cls.DISTINGUISHABLE, 1: cls.BOSONIC, -1: cls.FERMIONIC,
                  "0": cls.DISTINGUISHABLE, "+": cls.BOSONIC, "-": cls.FERMIONIC}
        try:
            return lookup[sign]
        except KeyError:
            raise ValueError(f"unknown symmetry sign {sign!r}") from None


def _frozen(array) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over a multi-qudit product space.

    ``normalized=True`` asserts unit norm (checked at construction); raw
    vectors such as the unnormalized test vector are built with
    ``normalized=False``.
    """

    space: SpaceSpec
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.size != self.space.dim:
            raise DimensionMismatch(f"expected {self.space.dim} amplitudes, got {amps.size}")
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized and abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise NotNormalized(f"norm is {np.linalg.norm(amps)!r}, expected 1")

    @classmethod
    def from_amplitudes(cls, space: SpaceSpec, amplitudes, normalize: bool = True) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        if normalize:
            norm = np.linalg.norm(amps)
            if norm <= NULL_TOL:
                raise NullProjection("cannot normalize a null vector")
            amps = amps / norm
        return cls(space, amps, normalized=normalize)

    @classmethod
    def basis(cls, levels, local_dim: int) -> "StateVector":
        levels = tuple(levels)
        space = SpaceSpec(len(levels), local_dim)
        amps = np.zeros(space.dim, dtype=complex)
        amps[space.flatten(levels)] = 1.0
        return cls(space, amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def as_tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.space.shape)

    def amplitude(self, levels) -> complex:
        return complex(self.amplitudes[self.space.flatten(levels)])

    def overlap(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        _check_same_space(self.space, other.space)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def normalize(self) -> "StateVector":
        return StateVector.from_amplitudes(self.space, self.amplitudes)

    def __repr__(self):
        return f"StateVector(N={self.space.n_particles}, d={self.space.local_dim}, normalized={self.normalized})"


def _check_same_space(a: SpaceSpec, b: SpaceSpec):
    if a != b:
        raise DimensionMismatch(f"space mismatch: {a} vs {b}")


def _check_hermitian(matrix: np.ndarray, tol: float):
    scale = max(1.0, float(np.max(np.abs(matrix)))) if matrix.size else 1.0
    if matrix.size and np.max(np.abs(matrix - matrix.conj().T)) > tol * scale:
        raise ValueError("matrix is not Hermitian")


class HermitianOperator:
    """Dense Hermitian matrix acting on ``space``."""

    def __init__(self, space: SpaceSpec, entries):
        entries = _frozen(entries)
        if entries.shape != (space.dim, space.dim):
            raise DimensionMismatch(f"expected a {space.dim}x{space.dim} matrix, got {entries.shape}")
        _check_hermitian(entries, NORM_TOL)
        self.space = space
        self.entries = entries

    @property
    def dim(self) -> int:
        return self.space.dim

    def diagonal(self) -> np.ndarray:
        return self.entries.diagonal().real

    def elements(self, rows, cols) -> np.ndarray:
        return self.entries[np.ix_(np.asarray(rows), np.asarray(cols))]

    def apply(self, vector) -> np.ndarray:
        return self.entries @ np.asarray(vector, dtype=complex)

    def expectation_vector(self, vector) -> complex:
        vector = np.asarray(vector, dtype=complex)
        return complex(np.vdot(vector, self.entries @ vector))

    def expectation_matrix(self, rho) -> complex:
        # tr[rho L] = sum_ij rho_ij L_ji
        if hasattr(rho, "multiply"):
            return complex(rho.multiply(self.entries.T).sum())
        return complex(np.sum(np.asarray(rho) * self.entries.T))

    def eigh(self):
        return np.linalg.eigh(self.entries)

    def max_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[-1])

    def sector_residual(self, sign: int) -> float:
        """Frobenius norm of ``Pi L Pi - L`` for the given exchange sign."""
        n, d = self.space.n_particles, self.space.local_dim
        half = _symmetrize_rows(self.entries, n, d, sign)
        full = _symmetrize_rows(half.conj().T, n, d, sign)
        return float(np.linalg.norm(full - self.entries))

    def commutator_residual(self, sign: int) -> float:
        """Frobenius norm of ``[L, Pi_sign]``."""
        n, d = self.space.n_particles, self.space.local_dim
        left = _symmetrize_rows(self.entries, n, d, sign)
        return float(np.linalg.norm(left - left.conj().T))

    def sector_projected(self, sign: int) -> "HermitianOperator":
        """``Pi L Pi``."""
        n, d = self.space.n_particles, self.space.local_dim
        half = _symmetrize_rows(self.entries, n, d, sign)
        full = _symmetrize_rows(half.conj().T, n, d, sign)
        return HermitianOperator(self.space, (full + full.conj().T) / 2)

    def to_dense(self) -> "HermitianOperator":
        return self

    def scaled(self, alpha: float) -> "HermitianOperator":
        return HermitianOperator(self.space, alpha * self.entries)

    def __repr__(self):
        return f"HermitianOperator(N={self.space.n_particles}, d={self.space.local_dim})"


class LowRankOperator:
    """Hermitian operator ``sum_r w_r |v_r><v_r|`` kept in factored form.

    Matrix elements are produced on demand, so projectors onto large
    (e.g. Fock-truncated) vectors never need a dense ``dim x dim`` array.
    """

    def __init__(self, space: SpaceSpec, vectors, weights=None):
        vectors = np.array(vectors, dtype=complex)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        if vectors.shape[0] != space.dim:
            raise DimensionMismatch(f"vectors must have {space.dim} rows, got {vectors.shape[0]}")
        weights = np.ones(vectors.shape[1]) if weights is None else np.array(weights, dtype=float)
        if weights.shape != (vectors.shape[1],):
            raise DimensionMismatch("one weight per vector required")
        vectors.setflags(write=False)
        weights.setflags(write=False)
        self.space = space
        self.vectors = vectors
        self.weights = weights

    @classmethod
    def projector(cls, psi: StateVector) -> "LowRankOperator":
        """``|psi><psi|``; ``psi`` may be unnormalized (raw)."""
        return cls(psi.space, psi.amplitudes)

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    def diagonal(self) -> np.ndarray:
        return (np.abs(self.vectors) ** 2) @ self.weights

    def elements(self, rows, cols) -> np.ndarray:
        rows, cols = np.asarray(rows), np.asarray(cols)
        return (self.vectors[rows] * self.weights) @ self.vectors[cols].conj().T

    def apply(self, vector) -> np.ndarray:
        vector = np.asarray(vector, dtype=complex)
        return self.vectors @ (self.weights * (self.vectors.conj().T @ vector))

    def expectation_vector(self, vector) -> complex:
        amps = self.vectors.conj().T @ np.asarray(vector, dtype=complex)
        return complex(np.sum(self.weights * np.abs(amps) ** 2))

    def expectation_matrix(self, rho) -> complex:
        rv = rho @ self.vectors
        return complex(np.sum(self.weights * np.sum(self.vectors.conj() * rv, axis=0)))

    def _gram_eigh(self):
        # nonzero spectrum of V W V^H via the small matrix W^1/2 G W^1/2 (indefinite W allowed)
        q, r = np.linalg.qr(self.vectors)
        small = (r * self.weights) @ r.conj().T
        vals, vecs = np.linalg.eigh((small + small.conj().T) / 2)
        return vals, q @ vecs

    def eigh(self):
        """Eigenpairs on the range of the factors (plus an implicit zero spectrum)."""
        return self._gram_eigh()

    def max_eigenvalue(self) -> float:
        vals, _ = self._gram_eigh()
        top = float(vals[-1]) if vals.size else 0.0
        if self.rank < self.dim:
            top = max(top, 0.0)
        return top

    def sector_residual(self, sign: int) -> float:
        n, d = self.space.n_particles, self.space.local_dim
        projected = _symmetrize_rows(self.vectors, n, d, sign)
        stacked = np.hstack([projected, self.vectors])
        coeff = np.concatenate([self.weights, -self.weights])
        gram = stacked.conj().T @ stacked
        cg = coeff[:, None] * gram
        value = np.trace(cg @ cg).real
        return float(np.sqrt(max(value, 0.0)))

    def commutator_residual(self, sign: int) -> float:
        n, d = self.space.n_particles, self.space.local_dim
        projected = _symmetrize_rows(self.vectors, n, d, sign)
        # Pi L - L Pi = A C B^H with A = [Pi V, V], B = [V, Pi V], C = diag(W, -W);
        # ||A C B^H||_F^2 = tr(C A^H A C B^H B)
        left = np.hstack([projected, self.vectors])
        right = np.hstack([self.vectors, projected])
        coeff = np.concatenate([self.weights, -self.weights])
        value = np.trace(
            (coeff[:, None] * (left.conj().T @ left)) @ (coeff[:, None] * (right.conj().T @ right))
        ).real
        return float(np.sqrt(max(value, 0.0)))

    def sector_projected(self, sign: int) -> "LowRankOperator":
        n, d = self.space.n_particles, self.space.local_dim
        return LowRankOperator(self.space, _symmetrize_rows(self.vectors, n, d, sign), self.weights)

    def to_dense(self) -> HermitianOperator:
        return HermitianOperator(self.space, (self.vectors * self.weights) @ self.vectors.conj().T)

    def scaled(self, alpha: float) -> "LowRankOperator":
        return LowRankOperator(self.space, self.vectors, alpha * self.weights)

    def __repr__(self):
        return f"LowRankOperator(N={self.space.n_particles}, d={self.space.local_dim}, rank={self.rank})"


def _symmetrize_rows(array: np.ndarray, n: int, d: int, sign: int) -> np.ndarray:
    """Apply Pi_sign to the row index of a ``(d**n, ...)`` array."""
    if n > MAX_PARTICLES:
        raise TooManyParticles(f"N={n} exceeds the supported maximum {MAX_PARTICLES}")
    array = np.asarray(array, dtype=complex)
    tail = array.shape[1:]
    tensor = array.reshape((d,) * n + tail)
    extra = tuple(range(n, n + len(tail)))
    out = np.zeros_like(tensor)
    for perm, parity in _signed_permutations(n):
        weight = parity if sign < 0 else 1
        out += weight * tensor.transpose(perm + extra)
    out /= math.factorial(n)
    return out.reshape(array.shape)


def tensor_product(a: StateVector, b: StateVector) -> StateVector:
    if a.space.local_dim != b.space.local_dim:
        raise DimensionMismatch(
            f"local dimensions differ: {a.space.local_dim} vs {b.space.local_dim}"
        )
    space = SpaceSpec(a.space.n_particles + b.space.n_particles, a.space.local_dim)
    amps = np.kron(a.amplitudes, b.amplitudes)
    normalized = a.normalized and b.normalized
    return StateVector(space, amps, normalized=normalized)


def apply_permutation(sigma: Permutation, psi: StateVector) -> StateVector:
    if sigma.size != psi.space.n_particles:
        raise DimensionMismatch(
            f"permutation on {sigma.size} symbols applied to {psi.space.n_particles} particles"
        )
    amps = psi.as_tensor().transpose(sigma.mapping).reshape(-1)
    return StateVector(psi.space, amps, normalized=psi.normalized)


def symmetrizer(space: SpaceSpec, sign: int) -> HermitianOperator:
    """Dense projector ``Pi_sign = (1/N!) sum_sigma sign^|sigma| P_sigma``."""
    sign = _as_sign(sign)
    if space.n_particles > MAX_PARTICLES:
        raise TooManyParticles(f"N={space.n_particles} exceeds the supported maximum {MAX_PARTICLES}")
    eye = np.eye(space.dim, dtype=complex)
    return HermitianOperator(space, _symmetrize_rows(eye, space.n_particles, space.local_dim, sign))


def project_symmetrize(psi: StateVector, sign: int) -> StateVector:
    """Normalized ``Pi_sign psi``; raises NullProjection if nothing survives."""
    sign = _as_sign(sign)
    n, d = psi.space.n_particles, psi.space.local_dim
    projected = _symmetrize_rows(psi.amplitudes, n, d, sign)
    norm = np.linalg.norm(projected)
    if norm <= NULL_TOL * max(psi.norm, 1.0):
        raise NullProjection(
            f"state has no component in the {'symmetric' if sign > 0 else 'antisymmetric'} sector"
        )
    return StateVector(psi.space, projected / norm)


def expectation(operator, state) -> float:
    """``<psi|L|psi>`` for a StateVector or ``tr[rho L]`` for a density matrix."""
    _check_same_space(operator.space, state.space)
    if isinstance(state, StateVector):
        if not state.normalized and abs(state.norm - 1.0) > NORM_TOL:
            raise NotNormalized("expectation requires a normalized state")
        value = operator.expectation_vector(state.amplitudes)
    else:
        value = operator.expectation_matrix(state.entries)
    if abs(value.imag) > NULL_TOL * max(1.0, abs(value.real)):
        raise ValueError(f"expectation has imaginary residue {value.imag!r}")
    return float(value.real)


def subspace_dimension(space: SpaceSpec, sym: SymmetryClass) -> int:
    n, d = space.n_particles, space.local_dim
    sym = SymmetryClass.from_sign(sym)
    if sym is SymmetryClass.DISTINGUISHABLE:
        return d ** n
    if sym is SymmetryClass.BOSONIC:
        return math.comb(n + d - 1, n)
    return math.comb(d, n)


def _as_sign(sign) -> int:
    if isinstance(sign, SymmetryClass):
        sign = sign.sign
    if isinstance(sign, str):
        sign = {"+": 1, "-": -1}.get(sign, sign)
    if sign not in (1, -1):
        raise ValueError(f"exchange sign must be +1 or -1, got {sign!r}")
    return int(sign)
