"""Classical (incoherent) bounds, witnesses, Gamma and the origin classifier."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import separability
from .errors import EmptyClassicalSet, NonpositiveBound, TooManyParticles
from .hilbert import (
    MAX_PARTICLES,
    NORM_TOL,
    NULL_TOL,
    SpaceSpec,
    StateVector,
    SymmetryClass,
    expectation,
    occupation_numbers,
)

VERDICT_TOL = 1e-10


def classical_tuples(space: SpaceSpec, sym):
    """Labels of the pure classical family: all tuples (0), non-decreasing (+), strictly increasing (-)."""
    sym = SymmetryClass.from_sign(sym)
    n, d = space.n_particles, space.local_dim
    if sym is SymmetryClass.DISTINGUISHABLE:
        return itertools.product(range(d), repeat=n)
    if sym is SymmetryClass.BOSONIC:
        return itertools.combinations_with_replacement(range(d), n)
    if d < n:
        raise EmptyClassicalSet(f"no fermionic classical states for d={d} < N={n}")
    return itertools.combinations(range(d), n)


def classical_components(levels, space: SpaceSpec, sym):
    """Flat indices and real coefficients of the normalized classical state.

    The permutation sum over S_N is grouped by distinct arrangements: an
    arrangement of a tuple with multiplicities N_k occurs prod(N_k!) times,
    so the normalized (anti)symmetric state is
    ``sqrt(prod N_k! / N!) * sum_alpha sign_alpha |alpha>``.
    """
    sym = SymmetryClass.from_sign(sym)
    levels = tuple(levels)
    if sym is SymmetryClass.DISTINGUISHABLE:
        return np.array([space.flatten(levels)]), np.ones(1)
    n = len(levels)
    seen = {}
    for perm in itertools.permutations(range(n)):
        arrangement = tuple(levels[i] for i in perm)
        if arrangement in seen:
            continue
        sign = 1
        if sym is SymmetryClass.FERMIONIC:
            sign = _parity(perm)
        seen[arrangement] = sign
    multiplicity = math.prod(math.factorial(c) for c in occupation_numbers(levels, space.local_dim))
    norm = math.sqrt(multiplicity / math.factorial(n))
    idx = np.array([space.flatten(a) for a in seen])
    coeff = norm * np.array(list(seen.values()), dtype=float)
    return idx, coeff


def _parity(perm) -> int:
    inv = sum(1 for i in range(len(perm)) for j in range(i + 1, len(perm)) if perm[i] > perm[j])
    return -1 if inv % 2 else 1


def _check_size(space: SpaceSpec):
    if space.n_particles > MAX_PARTICLES:
        raise TooManyParticles(f"N={space.n_particles} exceeds {MAX_PARTICLES}")


def _family_values(operator, space: SpaceSpec, sym):
    _check_size(space)
    for levels in classical_tuples(space, sym):
        idx, coeff = classical_components(levels, space, sym)
        block = operator.elements(idx, idx)
        yield levels, float(np.real(coeff @ block @ coeff))


def incoherent_bound(operator, space: SpaceSpec | None = None, sym=SymmetryClass.DISTINGUISHABLE,
                     return_argmax: bool = False):
    """Exact maximum of ``<c|L|c>`` over the pure classical family of ``sym``.

    Distinguishable: the largest diagonal element. Bosons and fermions: the
    (anti)symmetrized double permutation sum for every sorted label tuple.
    """
    space = space or operator.space
    sym = SymmetryClass.from_sign(sym)
    if sym is SymmetryClass.DISTINGUISHABLE:
        _check_size(space)
        diag = operator.diagonal()
        flat = int(np.argmax(diag))
        best, arg = float(diag[flat]), space.unflatten(flat)
    else:
        best, arg = -np.inf, None
        for levels, value in _family_values(operator, space, sym):
            if value > best:
                best, arg = value, levels
        if arg is None:
            raise EmptyClassicalSet(f"empty classical family for {sym}")
    return (best, arg) if return_argmax else best


def classical_state(levels, space: SpaceSpec, sym) -> StateVector:
    idx, coeff = classical_components(levels, space, sym)
    amps = np.zeros(space.dim, dtype=complex)
    amps[idx] = coeff
    return StateVector(space, amps)


def classical_fidelity(psi: StateVector, space: SpaceSpec | None = None, sym=SymmetryClass.DISTINGUISHABLE) -> float:
    """``sup_c |<c|psi>|`` over the pure classical family."""
    space = space or psi.space
    sym = SymmetryClass.from_sign(sym)
    _check_size(space)
    amps = psi.amplitudes
    if sym is SymmetryClass.DISTINGUISHABLE:
        return float(np.max(np.abs(amps)))
    best = None
    for levels in classical_tuples(space, sym):
        idx, coeff = classical_components(levels, space, sym)
        value = abs(coeff @ amps[idx])
        best = value if best is None else max(best, value)
    if best is None:
        raise EmptyClassicalSet(f"empty classical family for {sym}")
    return float(best)


@dataclass(frozen=True)
class ClassicalMixture:
    """Incoherent state ``sum_k p_k |c_k><c_k|`` over one classical family."""

    space: SpaceSpec
    sym: SymmetryClass
    weights: tuple[float, ...]
    kets: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.weights) != len(self.kets):
            raise ValueError("one weight per classical label required")
        if np.any(w < 0) or abs(w.sum() - 1) > NORM_TOL:
            raise ValueError("weights must be a probability vector")
        for ket in self.kets:
            ket = tuple(ket)
            if len(ket) != self.space.n_particles or not all(0 <= k < self.space.local_dim for k in ket):
                raise ValueError(f"label {ket} invalid for {self.space}")
            if self.sym is SymmetryClass.BOSONIC and list(ket) != sorted(ket):
                raise ValueError(f"bosonic label {ket} must be non-decreasing")
            if self.sym is SymmetryClass.FERMIONIC and any(a >= b for a, b in zip(ket, ket[1:])):
                raise ValueError(f"fermionic label {ket} must be strictly increasing")

    def to_density(self):
        from .states import DensityMatrix

        rho = np.zeros((self.space.dim, self.space.dim), dtype=complex)
        for p, ket in zip(self.weights, self.kets):
            c = classical_state(ket, self.space, self.sym).amplitudes
            rho += p * np.outer(c, c.conj())
        return DensityMatrix(self.space, rho)


@dataclass(frozen=True, eq=False)
class Witness:
    """``W = g_max * I - L``; negative expectation certifies nonclassicality."""

    operator: object
    bound: float
    symmetry_family: str

    def expectation(self, state) -> float:
        return self.bound - expectation(self.operator, state)

    def matrix(self) -> np.ndarray:
        dense = self.operator.to_dense().entries
        return self.bound * np.eye(dense.shape[0]) - dense


def make_witness(operator, g_max: float, family="0") -> Witness:
    return Witness(operator, float(g_max), str(family.value if isinstance(family, SymmetryClass) else family))


def gamma(expectation_value: float, g_max: float, tol: float = 0.0) -> float:
    """Relative violation ``max((<L> - g)/g, 0)``; requires g > 0.

    Relative excesses not larger than ``tol`` are reported as zero.
    """
    if not g_max > 0:
        raise NonpositiveBound(f"Gamma needs a positive bound, got {g_max!r}")
    value = (expectation_value - g_max) / g_max
    return value if value > tol else 0.0


BOUND_KEYS = ("g0", "gplus", "gminus", "gsep0", "gsep_plus", "gsep_minus", "g_partsep")


@dataclass
class BoundsReport:
    """Per-bound results; ``None`` marks a not-applicable bound."""

    expectation: float
    g0: float
    gplus: float | None = None
    gminus: float | None = None
    gsep0: float | None = None
    gsep_plus: float | None = None
    gsep_minus: float | None = None
    g_partsep: float | None = None
    gammas: dict = field(default_factory=dict)
    violated: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)
    conclusions: list = field(default_factory=list)
    conventions: dict = field(default_factory=dict)

    def bounds(self) -> dict:
        return {k: getattr(self, k) for k in BOUND_KEYS}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BoundsReport":
        return cls(**data)


def _sector_bound(operator, space, sign):
    """Incoherent bound in the (anti)symmetric family, or None if L has no support there."""
    scale = max(1.0, float(np.max(np.abs(operator.diagonal()))))
    if operator.sector_residual(sign) > NULL_TOL * scale:
        return None
    try:
        return incoherent_bound(operator, space, sign)
    except EmptyClassicalSet:
        return None


def _separable_bounds(report: BoundsReport, operator, space, opts):
    n = space.n_particles
    plus_ok = report.gplus is not None
    minus_ok = report.gminus is not None
    if n == 1:
        top = operator.max_eigenvalue()
        report.gsep0 = top
        report.gsep_plus = top if plus_ok else None
        report.gsep_minus = top if minus_ok else None
        report.labels.update(gsep0="exact")
        return
    if n == 2:
        psi = separability.as_rank_one(operator)
        if psi is not None:
            report.gsep0 = separability.bipartite_bound(psi, 0)
            if plus_ok:
                report.gsep_plus = separability.bipartite_bound(psi, +1)
            if minus_ok:
                report.gsep_minus = separability.bipartite_bound(psi, -1)
            report.labels.update(gsep0="exact", gsep_plus="exact", gsep_minus="exact")
            return
        part = separability.PartitionSpec.full(2)
        report.gsep0 = separability.separability_eigen_solve(operator, part, None, opts)
        if plus_ok:
            report.gsep_plus = separability.separability_eigen_solve(operator, part, +1, opts)
        if minus_ok:
            report.gsep_minus = separability.separability_eigen_solve(operator, part, -1, opts)
        label = "lower bound (heuristic global max)"
        report.labels.update(gsep0=label, gsep_plus=label, gsep_minus=label)
        return
    full = separability.PartitionSpec.full(n)
    bounds = separability.partial_and_full_bounds(operator, space, None, opts)
    report.gsep0 = bounds["g_fullsep"]
    report.g_partsep = bounds["g_partsep"]
    if plus_ok:
        report.gsep_plus = separability.separability_eigen_solve(operator, full, +1, opts)
    if minus_ok:
        report.gsep_minus = separability.separability_eigen_solve(operator, full, -1, opts)
    label = "lower bound (heuristic global max)"
    report.labels.update(gsep0=label, g_partsep=label, gsep_plus=label, gsep_minus=label)


def classify(operator, state, space: SpaceSpec | None = None,
             opts: separability.SolverOptions | None = None) -> BoundsReport:
    """Evaluate every applicable bound for ``operator`` and interpret the violations.

    For N >= 3, ``gsep0`` is the full-separability bound and ``g_partsep`` the
    maximum over bipartitions; the (anti)symmetric separable bounds use the
    N-block partition.
    """
    space = space or operator.space
    value = expectation(operator, state)
    report = BoundsReport(expectation=value, g0=incoherent_bound(operator, space, 0))
    report.labels["g0"] = "exact"
    report.gplus = _sector_bound(operator, space, +1)
    report.gminus = _sector_bound(operator, space, -1)
    report.labels.update(gplus="exact", gminus="exact")
    _separable_bounds(report, operator, space, opts)
    report.labels = {k: lbl for k, lbl in report.labels.items() if getattr(report, k) is not None}

    for key, bound in report.bounds().items():
        if bound is None:
            continue
        excess = value - bound
        report.violated[key] = bool(excess > VERDICT_TOL * max(1.0, abs(bound)))
        try:
            report.gammas[key] = gamma(value, bound, tol=VERDICT_TOL)
        except NonpositiveBound:
            report.gammas[key] = None
    report.conclusions = _conclusions(report)
    report.conventions = _conventions(report)
    return report


def _conventions(report: BoundsReport) -> dict:
    """Both readings side by side: tensor-product classicality vs exchange-symmetric classicality."""
    v = report.violated
    out = {
        "tensor": {
            "coherence_detected": v.get("g0", False),
            "entanglement_detected": v.get("gsep0", False),
        }
    }
    for sign, gkey, skey in (("plus", "gplus", "gsep_plus"), ("minus", "gminus", "gsep_minus")):
        if gkey in v:
            out[sign] = {
                "coherence_detected": v[gkey],
                "entanglement_detected": v.get(skey),
            }
    return out


def _conclusions(report: BoundsReport) -> list[str]:
    v, g = report.violated, report.gammas
    notes = []
    if v.get("g0") and v.get("gsep0") is False:
        notes.append("local quantum superposition only: coherence detected, no entanglement detected")
    for gkey in ("gplus", "gminus"):
        if v.get("g0") and v.get(gkey) is False:
            notes.append(f"coherence detected with the tensor product but not in {gkey}: it originates from the exchange symmetry")
    for skey in ("gsep_plus", "gsep_minus"):
        if v.get("gsep0") and v.get(skey) is False:
            notes.append(f"entangled with respect to the tensor product but not in {skey}: the inseparability stems from the (anti)symmetrization")
    pairs = [("g0", "gsep0"), ("gplus", "gsep_plus"), ("gminus", "gsep_minus")]
    applicable = [(a, b) for a, b in pairs if g.get(a) is not None and g.get(b) is not None]
    if applicable and all(
        g[a] > 0 and abs(g[a] - g[b]) <= 1e-9 * max(1.0, g[a]) for a, b in applicable
    ):
        notes.append("only global quantum superpositions: coherence completely determined by entanglement")
    if report.g_partsep is not None:
        if v.get("gsep0") and v.get("g_partsep") is False:
            notes.append("coherence from full inseparability only; a bipartition factorizes")
        elif v.get("g_partsep"):
            notes.append("no bipartition reproduces the correlations: partial and full inseparability detected")
    if not notes:
        detected = sorted(k for k, flag in v.items() if flag)
        notes.append("violated bounds: " + (", ".join(detected) if detected else "none"))
    return notes
