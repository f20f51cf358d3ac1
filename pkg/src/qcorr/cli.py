"""``qcorr`` command-line front end.

Subcommands::

    qcorr table1
    qcorr fig2 --kappa 0.5 --nmax 64 --grid 200 [--out file.csv]
    qcorr tripartite [--seed N] [--restarts N]
    qcorr classify (--builtin NAME | --state FILE) [--operator FILE] [--seed N] [--restarts N] [--out FILE]

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import __version__
from .coherence import BoundsReport, classify, gamma, incoherent_bound
from .errors import CommutatorViolation, QCorrError, SolverFailure
from .hilbert import NORM_TOL, NULL_TOL, LowRankOperator, SpaceSpec, StateVector, expectation
from .separability import SolverOptions, bipartite_bound, partial_and_full_bounds
from .states import (
    DEFAULT_NMAX,
    EXAMPLE_NAMES,
    DensityMatrix,
    TMSVParams,
    chi_expectation_analytic,
    chi_vector,
    dephased_tmsv,
    example_state,
    superposition_s,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

FLOAT_FMT = "%.12g"
NA = "n.a."
DEFAULT_SEED = 42
DEFAULT_SOLVER_TOL = 1e-10


class InputError(QCorrError, ValueError):
    pass


def fmt(value) -> str:
    return NA if value is None else FLOAT_FMT % value


def solver_tol() -> float:
    raw = os.environ.get("QCORR_TOL")
    if raw is None:
        return DEFAULT_SOLVER_TOL
    try:
        tol = float(raw)
    except ValueError:
        raise InputError(f"QCORR_TOL must be a number, got {raw!r}") from None
    if not tol > 0:
        raise InputError("QCORR_TOL must be positive")
    return tol


def _write_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# --- Table I ---------------------------------------------------------------

TABLE1_HEADER = ("vector", "g0", "g_pm", "g_sep0", "g_sep_pm")


def table1_values() -> list[tuple[str, tuple]]:
    """Bounds for ``L = |psi><psi|`` of the six two-qudit vectors.

    The bosonic and fermionic variants of each vector are computed
    separately and must agree; they share one ``pm`` row.
    """
    rows = []
    for n in (1, 2, 3):
        psi = example_state(f"psi{n}_0")
        op = LowRankOperator.projector(psi)
        rows.append((f"psi{n}_0", (incoherent_bound(op, sym=0), None, bipartite_bound(psi, 0), None)))
        per_sign = []
        for sign, name in ((+1, "plus"), (-1, "minus")):
            psi = example_state(f"psi{n}_{name}")
            op = LowRankOperator.projector(psi)
            per_sign.append((
                incoherent_bound(op, sym=0),
                incoherent_bound(op, sym=sign),
                bipartite_bound(psi, 0),
                bipartite_bound(psi, sign),
            ))
        plus, minus = per_sign
        if not np.allclose(plus, minus, atol=NULL_TOL, rtol=0):
            raise SolverFailure(f"bosonic and fermionic bounds disagree for psi{n}: {plus} vs {minus}")
        rows.append((f"psi{n}_pm", plus))
    return rows


def cmd_table1() -> str:
    rows = [(name, *(fmt(v) for v in values)) for name, values in table1_values()]
    return _write_csv(TABLE1_HEADER, rows)


# --- Fig. 2 ----------------------------------------------------------------

FIG2_HEADER = ("delta_phi", "L_analytic", "L_numeric", "g0", "gplus", "gsep0", "gsep_plus")


@dataclass
class Fig2Result:
    kappa: float
    n_max: int
    bounds: dict
    rows: list = field(default_factory=list)
    threshold: float | None = None
    truncated_weight: float = 0.0


def chi_bounds(n_max: int) -> dict:
    """Bounds of ``L = |chi><chi|`` on the Fock-truncated space."""
    chi = chi_vector(n_max)
    op = LowRankOperator.projector(chi)
    return {
        "g0": incoherent_bound(op, sym=0),
        "gplus": incoherent_bound(op, sym=+1),
        "gsep0": bipartite_bound(chi, 0),
        "gsep_plus": bipartite_bound(chi, +1),
    }


def bosonic_threshold(kappa: float, level: float = 2.0, xtol: float = 1e-10) -> float | None:
    """Dephasing width where the closed-form ``<L>`` drops to ``level`` (bisection)."""
    f = lambda dphi: chi_expectation_analytic(kappa, dphi) - level
    lo, hi = 0.0, math.pi
    if f(lo) <= 0 or f(hi) >= 0:
        return None
    return float(scipy.optimize.bisect(f, lo, hi, xtol=xtol))


def fig2_data(kappa: float = 0.5, n_max: int = DEFAULT_NMAX, grid: int = 200) -> Fig2Result:
    if grid < 2:
        raise InputError("grid needs at least two points")
    chi = chi_vector(n_max)
    op = LowRankOperator.projector(chi)
    bounds = chi_bounds(n_max)
    result = Fig2Result(kappa, n_max, bounds)
    for dphi in np.linspace(0.0, math.pi, grid):
        dphi = float(dphi)
        params = TMSVParams(kappa, dphi, n_max)
        numeric = expectation(op, dephased_tmsv(params))
        analytic = chi_expectation_analytic(kappa, dphi)
        result.rows.append((dphi, analytic, numeric, bounds["g0"], bounds["gplus"], bounds["gsep0"], bounds["gsep_plus"]))
    result.threshold = bosonic_threshold(kappa, bounds["gsep_plus"])
    result.truncated_weight = TMSVParams(kappa, 0.0, n_max).truncated_weight
    return result


def cmd_fig2(kappa: float = 0.5, n_max: int = DEFAULT_NMAX, grid: int = 200) -> tuple[str, Fig2Result]:
    result = fig2_data(kappa, n_max, grid)
    text = _write_csv(FIG2_HEADER, [tuple(fmt(v) for v in row) for row in result.rows])
    return text, result


# --- tripartite ----------------------------------------------------------------

TRIPARTITE_HEADER = ("state", "gamma0", "gamma_partsep0", "gamma_fullsep0", "gamma_pm")


def tripartite_values(opts: SolverOptions) -> list[tuple[str, tuple]]:
    rows = []
    for n in (4, 5):
        psi = example_state(f"psi{n}_0")
        op = LowRankOperator.projector(psi)
        value = expectation(op, psi)
        sep = partial_and_full_bounds(op, opts=opts)
        rows.append((f"psi{n}_0", (
            gamma(value, incoherent_bound(op, sym=0), tol=NULL_TOL),
            gamma(value, sep["g_partsep"], tol=NULL_TOL),
            gamma(value, sep["g_fullsep"], tol=NULL_TOL),
            None,
        )))
    for n in (4, 5):
        for sign, name in ((+1, "plus"), (-1, "minus")):
            psi = example_state(f"psi{n}_{name}")
            op = LowRankOperator.projector(psi)
            value = expectation(op, psi)
            rows.append((f"psi{n}_{name}", (
                gamma(value, incoherent_bound(op, sym=0), tol=NULL_TOL),
                None,
                None,
                gamma(value, incoherent_bound(op, sym=sign), tol=NULL_TOL),
            )))
    return rows


def cmd_tripartite(opts: SolverOptions | None = None) -> str:
    opts = opts or SolverOptions(restarts=32, tol=solver_tol(), seed=DEFAULT_SEED)
    rows = [(name, *(fmt(v) for v in values)) for name, values in tripartite_values(opts)]
    return _write_csv(TRIPARTITE_HEADER, rows)


# --- classify ------------------------------------------------------------------

@dataclass
class RunReport:
    inputs: dict
    bounds: BoundsReport
    provenance: dict
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "inputs": self.inputs,
            "bounds": self.bounds.to_dict(),
            "provenance": self.provenance,
            "wall_time": self.wall_time,
        }

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def parse(cls, text: str) -> "RunReport":
        data = json.loads(text)
        return cls(
            inputs=data["inputs"],
            bounds=BoundsReport.from_dict(data["bounds"]),
            provenance=data["provenance"],
            wall_time=data["wall_time"],
        )


BUILTINS = tuple(n for n in EXAMPLE_NAMES) + ("cv_dephased", "s01")


def _complex_array(raw, where: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=float) if raw is not None else None
    if arr is None or arr.ndim < 1 or arr.shape[-1] != 2:
        raise InputError(f"{where}: expected [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def load_state_file(path: str):
    """Read a state JSON file; returns a StateVector (raw) or a DensityMatrix."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_state(data, path)


def parse_state(data, where: str = "<state>"):
    if not isinstance(data, dict):
        raise InputError(f"{where}: top level must be a JSON object")
    try:
        n, d = int(data["n_particles"]), int(data["local_dim"])
    except (KeyError, TypeError, ValueError):
        raise InputError(f"{where}: integer fields 'n_particles' and 'local_dim' are required") from None
    try:
        space = SpaceSpec(n, d)
    except ValueError as exc:
        raise InputError(f"{where}: {exc}") from None
    try:
        if "amplitudes" in data:
            amps = _complex_array(data["amplitudes"], where)
            if amps.shape != (space.dim,):
                raise InputError(f"{where}: expected {space.dim} amplitudes, got {amps.size}")
            return StateVector(space, amps, normalized=False)
        if "matrix" in data:
            mat = _complex_array(data["matrix"], where)
            if mat.shape != (space.dim, space.dim):
                raise InputError(f"{where}: expected a {space.dim}x{space.dim} matrix, got shape {mat.shape}")
            return DensityMatrix(space, mat)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"{where}: {exc}") from None
    raise InputError(f"{where}: need either 'amplitudes' or 'matrix'")


def _builtin(name: str, kappa: float, delta_phi: float, n_max: int):
    """Returns (test operator, state)."""
    if name == "cv_dephased":
        chi = chi_vector(n_max)
        return LowRankOperator.projector(chi), dephased_tmsv(TMSVParams(kappa, delta_phi, n_max))
    if name == "s01":
        psi = superposition_s(0, 1, 2)
        return LowRankOperator.projector(psi), psi
    try:
        psi = example_state(name, kappa=kappa, n_max=n_max)
    except KeyError:
        raise InputError(f"unknown builtin {name!r}; choose from {', '.join(BUILTINS)}") from None
    return LowRankOperator.projector(psi), psi


def run_classify(builtin=None, state_file=None, operator_file=None, kappa=0.5, delta_phi=0.0,
                 n_max=DEFAULT_NMAX, seed=DEFAULT_SEED, restarts=32) -> RunReport:
    start = time.perf_counter()
    tol = solver_tol()
    inputs = {"builtin": builtin, "state_file": state_file, "operator_file": operator_file,
              "kappa": kappa, "delta_phi": delta_phi, "n_max": n_max, "seed": seed, "restarts": restarts}
    if (builtin is None) == (state_file is None):
        raise InputError("exactly one of --builtin or --state is required")
    try:
        if builtin is not None:
            op, state = _builtin(builtin, kappa, delta_phi, n_max)
        else:
            state = load_state_file(state_file)
            if isinstance(state, StateVector):
                if state.norm <= NULL_TOL:
                    raise InputError(f"{state_file}: null state vector")
                inputs["input_norm"] = state.norm
                state = state.normalize()
            op = None
        if operator_file is not None:
            vec = load_state_file(operator_file)
            if not isinstance(vec, StateVector):
                raise InputError(f"{operator_file}: the test operator file must hold 'amplitudes'")
            op = LowRankOperator.projector(vec)
        if op is None:
            if not isinstance(state, StateVector):
                raise InputError("a density-matrix input needs --operator to define L")
            op = LowRankOperator.projector(state)
        if op.space != state.space:
            raise InputError(f"operator space {op.space} does not match state space {state.space}")
    except (KeyError, ValueError) as exc:
        if isinstance(exc, QCorrError):
            raise
        raise InputError(str(exc)) from None
    opts = SolverOptions(restarts=restarts, tol=tol, seed=seed)
    report = classify(op, state, opts=opts)
    provenance = {
        "version": __version__,
        "norm_tol": NORM_TOL,
        "null_tol": NULL_TOL,
        "solver_tol": tol,
        "n_particles": state.space.n_particles,
        "local_dim": state.space.local_dim,
    }
    if builtin == "cv_dephased" or builtin == "chi_kappa":
        provenance["truncated_weight"] = TMSVParams(kappa, delta_phi, n_max).truncated_weight
    return RunReport(inputs, report, provenance, time.perf_counter() - start)


# --- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qcorr", description="Witness bounds for multi-qudit quantum correlations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("table1", help="bounds for the two-qudit example vectors")

    p = sub.add_parser("fig2", help="dephased two-mode squeezed vacuum curve as CSV")
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--nmax", type=int, default=DEFAULT_NMAX)
    p.add_argument("--grid", type=int, default=200)
    p.add_argument("--out")

    p = sub.add_parser("tripartite", help="Gamma values for the three-qudit examples")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--restarts", type=int, default=32)

    p = sub.add_parser("classify", help="full bounds report for one state")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", choices=BUILTINS, metavar="NAME", help=f"one of: {', '.join(BUILTINS)}")
    src.add_argument("--state", metavar="FILE")
    p.add_argument("--operator", metavar="FILE", help="vector file; L is its projector")
    p.add_argument("--kappa", type=float, default=0.5)
    p.add_argument("--dphi", type=float, default=0.0)
    p.add_argument("--nmax", type=int, default=DEFAULT_NMAX)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--restarts", type=int, default=32)
    p.add_argument("--out")
    return parser


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "table1":
            _emit(cmd_table1(), None)
        elif args.command == "fig2":
            text, result = cmd_fig2(args.kappa, args.nmax, args.grid)
            _emit(text, args.out)
            msg = (f"bosonic-entanglement threshold delta_phi* = {fmt(result.threshold)} rad "
                   f"(approximate, bisection on the closed form); truncated weight {result.truncated_weight:.3g}\n")
            (sys.stdout if args.out else sys.stderr).write(msg)
        elif args.command == "tripartite":
            opts = SolverOptions(restarts=args.restarts, tol=solver_tol(), seed=args.seed)
            _emit(cmd_tripartite(opts), None)
        elif args.command == "classify":
            report = run_classify(
                builtin=args.builtin, state_file=args.state, operator_file=args.operator,
                kappa=args.kappa, delta_phi=args.dphi, n_max=args.nmax,
                seed=args.seed, restarts=args.restarts,
            )
            _emit(report.serialize(), args.out)
    except (SolverFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"qcorr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (QCorrError, ValueError, CommutatorViolation) as exc:
        print(f"qcorr: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
