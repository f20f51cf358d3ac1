"""Constructors for the qudit and Fock-truncated states used throughout qcorr."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, NotNormalized
from .hilbert import (
    NORM_TOL,
    NULL_TOL,
    SpaceSpec,
    StateVector,
    project_symmetrize,
    tensor_product,
)

DEFAULT_NMAX = 64


class DensityMatrix:
    """Unit-trace positive semidefinite operator.

    ``entries`` may be a dense array or a scipy sparse matrix; the sparse form
    is what the Fock-truncated dephased state uses, since only ``(n_max+1)**2``
    of its ``(n_max+1)**4`` entries are nonzero.
    """

    def __init__(self, space: SpaceSpec, entries, trace_tol: float = NULL_TOL):
        if sp.issparse(entries):
            entries = sp.csr_matrix(entries, dtype=complex)
        else:
            entries = np.array(entries, dtype=complex)
            entries.setflags(write=False)
        if entries.shape != (space.dim, space.dim):
            raise DimensionMismatch(f"expected a {space.dim}x{space.dim} matrix, got {entries.shape}")
        self.space = space
        self.entries = entries
        self._validate(trace_tol)

    def _validate(self, trace_tol):
        m = self.entries
        herm = abs(m - m.conj().T)
        herm_err = herm.max() if herm.shape[0] else 0.0
        if herm_err > NORM_TOL:
            raise ValueError(f"density matrix not Hermitian (deviation {herm_err:.3g})")
        tr = m.diagonal().sum()
        if abs(tr - 1.0) > trace_tol:
            raise NotNormalized(f"trace is {tr!r}, expected 1")
        # PSD check on the support; zero rows/columns add only zero eigenvalues
        support = self.support()
        block = self._principal(support)
        if block.size and np.linalg.eigvalsh(block)[0] < -NULL_TOL:
            raise ValueError("density matrix has a negative eigenvalue")

    def support(self) -> np.ndarray:
        m = self.entries
        if sp.issparse(m):
            rows = np.unique(m.nonzero()[0])
        else:
            rows = np.flatnonzero(np.any(m != 0, axis=1))
        return rows

    def _principal(self, idx) -> np.ndarray:
        m = self.entries
        if sp.issparse(m):
            return m[idx][:, idx].toarray()
        return m[np.ix_(idx, idx)]

    def dense(self) -> np.ndarray:
        if sp.issparse(self.entries):
            return self.entries.toarray()
        return np.asarray(self.entries)

    def trace(self) -> float:
        return float(self.entries.diagonal().sum().real)

    @classmethod
    def pure(cls, psi: StateVector) -> "DensityMatrix":
        return cls(psi.space, np.outer(psi.amplitudes, psi.amplitudes.conj()))

    def __repr__(self):
        kind = "sparse" if sp.issparse(self.entries) else "dense"
        return f"DensityMatrix(N={self.space.n_particles}, d={self.space.local_dim}, {kind})"


@dataclass(frozen=True)
class TMSVParams:
    kappa: float
    delta_phi: float = 0.0
    n_max: int = DEFAULT_NMAX

    def __post_init__(self):
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError(f"kappa must lie in [0, 1), got {self.kappa}")
        if not 0.0 <= self.delta_phi <= math.pi:
            raise ValueError(f"delta_phi must lie in [0, pi], got {self.delta_phi}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max}")

    @property
    def space(self) -> SpaceSpec:
        return SpaceSpec(2, self.n_max + 1)

    @property
    def truncated_weight(self) -> float:
        """Probability weight of the discarded Fock tail, kappa**(2(n_max+1))."""
        return self.kappa ** (2 * (self.n_max + 1))


def sinc(x):
    """Unnormalized sinc, sin(x)/x with sinc(0) = 1."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def basis_ket(level: int, d: int) -> StateVector:
    return StateVector.basis((level,), d)


def superposition_s(k: int, l: int, d: int) -> StateVector:
    """``(|k> + |l>)/sqrt(2)`` on a single qudit."""
    if k == l:
        raise ValueError("superposition_s requires k != l")
    for level in (k, l):
        if not 0 <= level < d:
            raise ValueError(f"level {level} outside 0..{d - 1}")
    amps = np.zeros(d, dtype=complex)
    amps[[k, l]] = 1 / math.sqrt(2)
    return StateVector(SpaceSpec(1, d), amps)


def _psi1(d=4):
    return tensor_product(basis_ket(0, d), superposition_s(1, 2, d))


def _psi2(d=4):
    return tensor_product(superposition_s(0, 1, d), superposition_s(2, 3, d))


def _superpose(*kets: StateVector) -> StateVector:
    amps = sum(k.amplitudes for k in kets)
    return StateVector.from_amplitudes(kets[0].space, amps)


def _psi3(d=4):
    return _superpose(StateVector.basis((0, 1), d), StateVector.basis((2, 3), d))


def _psi4(d=5):
    return _superpose(StateVector.basis((0, 1, 2), d), StateVector.basis((0, 3, 4), d))


def _psi5(d=6):
    return _superpose(StateVector.basis((0, 1, 2), d), StateVector.basis((3, 4, 5), d))


_BASE_STATES = {1: _psi1, 2: _psi2, 3: _psi3, 4: _psi4, 5: _psi5}
_VARIANTS = {"0": 0, "plus": 1, "+": 1, "minus": -1, "-": -1}
_NAME_RE = re.compile(r"^psi([1-5])_(0|plus|minus|\+|-)$")

EXAMPLE_NAMES = tuple(
    f"psi{n}_{v}" for n in range(1, 6) for v in ("0", "plus", "minus")
) + ("chi_kappa",)


def example_state(name: str, kappa: float = 0.5, n_max: int = DEFAULT_NMAX) -> StateVector:
    """Named example states: ``psi{1..5}_{0,plus,minus}`` and ``chi_kappa``.

    Exchange-symmetric variants are the normalized (anti)symmetrizations of the
    ``_0`` vector. ``chi_kappa`` is the truncated two-mode squeezed vacuum.
    """
    if name == "chi_kappa":
        return tmsv(TMSVParams(kappa, 0.0, n_max))
    match = _NAME_RE.match(name)
    if match is None:
        raise KeyError(f"unknown example state {name!r}; known: {', '.join(EXAMPLE_NAMES)}")
    base = _BASE_STATES[int(match.group(1))]()
    sign = _VARIANTS[match.group(2)]
    if sign == 0:
        return base
    return project_symmetrize(base, sign)


def tmsv(params: TMSVParams) -> StateVector:
    """Two-mode squeezed vacuum truncated at ``n_max`` and renormalized."""
    d = params.n_max + 1
    ks = np.arange(d)
    amps = np.zeros((d, d), dtype=complex)
    amps[ks, ks] = math.sqrt(1 - params.kappa**2) * params.kappa**ks
    return StateVector.from_amplitudes(params.space, amps.reshape(-1))


def chi_vector(n_max: int) -> StateVector:
    """Raw test vector ``sum_k |k>|k>`` (unnormalized, norm**2 = n_max + 1)."""
    d = n_max + 1
    amps = np.eye(d, dtype=complex).reshape(-1)
    return StateVector(SpaceSpec(2, d), amps, normalized=False)


def dephased_pair_block(params: TMSVParams) -> np.ndarray:
    """Coefficients ``c_kl`` of the dephased state in the ``|kk><ll|`` basis."""
    ks = np.arange(params.n_max + 1)
    kappa = params.kappa
    diff = ks[:, None] - ks[None, :]
    powers = float(kappa) ** (ks[:, None] + ks[None, :]).astype(float)
    return (1 - kappa**2) * powers * sinc(diff * params.delta_phi)


def dephased_tmsv(params: TMSVParams) -> DensityMatrix:
    """Phase-averaged TMSV on the truncated space (entries exactly per formula).

    The trace falls short of one by the discarded tail weight, so the trace
    check tolerance is widened by that amount.
    """
    d = params.n_max + 1
    block = dephased_pair_block(params)
    diag_idx = np.arange(d) * (d + 1)
    rows = np.repeat(diag_idx, d)
    cols = np.tile(diag_idx, d)
    entries = sp.csr_matrix((block.reshape(-1), (rows, cols)), shape=(d * d, d * d), dtype=complex)
    entries.eliminate_zeros()
    return DensityMatrix(params.space, entries, trace_tol=NULL_TOL + params.truncated_weight)


def chi_expectation_analytic(kappa: float, delta_phi: float) -> float:
    """Closed-form ``<chi|rho|chi>`` for the dephased TMSV (infinite Fock space)."""
    if not 0.0 <= kappa < 1.0:
        raise ValueError(f"kappa must lie in [0, 1), got {kappa}")
    if not 0.0 <= delta_phi <= math.pi:
        raise ValueError(f"delta_phi must lie in [0, pi], got {delta_phi}")
    ratio = (1 + kappa) / (1 - kappa)
    if delta_phi == 0.0:
        return ratio
    if delta_phi == math.pi:
        return 1.0
    return 2.0 / delta_phi * math.atan(ratio * math.tan(delta_phi / 2))
