"""Command-line front end: ``fuller analyze | simulate | chatter``.

Every JSON output embeds the resolved run configuration (including the seed)
and is written with sorted keys, so identical invocations give identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import problems
from .liecone import (
    GLCInapplicable,
    LadderError,
    delta_rank,
    fuller_certificate,
    glc_check,
)
from .polyalg import Poly, PolyError
from .problems import ContractError
from .simulate import (
    FeedbackLaw,
    InsufficientSwitches,
    SimOptions,
    beta_scan,
    fit_chatter,
    fit_chatter_times,
    integrate_extremal,
    save_json,
    shoot_fuller_adjoint,
    simulate_feedback,
)
from .system import AffineSystem, ProblemError, augment

BUILTINS = ("fuller-classic", "fuller-multi", "hamiltonian", "time-optimal-di")
PERTURBATIONS = 8
PERTURBATION_SIZE = 1e-2


class CLIError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    problem: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    tol_event: float = 1e-13
    zeno_floor: float = 1e-10
    horizon: float = 10.0
    mode: str = "feedback"
    beta: float | str | None = None
    x0: tuple[float, ...] | None = None
    p0: tuple[float, ...] | str | None = None
    lam: float = 1.0
    target_radius: float | None = None
    point: tuple[str, ...] | None = None
    events: str | None = None

    def __post_init__(self):
        for name in ("tol_event", "zeno_floor", "horizon"):
            if not getattr(self, name) > 0:
                raise CLIError(f"--{name.replace('_', '-')} must be strictly positive")
        if self.target_radius is not None and not self.target_radius > 0:
            raise CLIError("--target-radius must be strictly positive")
        if not 0 <= self.seed < 2**64:
            raise CLIError("--seed must be an unsigned 64-bit integer")

    def sim_options(self) -> SimOptions:
        return SimOptions(tol_event=self.tol_event, zeno_floor=self.zeno_floor,
                          target_radius=self.target_radius)


# ---------------------------------------------------------------------------
# Problem loading


def _read_matrix(source: str | None, name: str, dim: int | None = None):
    if source is None:
        raise CLIError(f"--{name.lower()} is required")
    if source.upper().startswith("I") and not Path(source).exists():
        size = source[1:] or (str(dim) if dim else "1")
        if not size.isdigit() or int(size) < 1:
            raise CLIError(f"--{name.lower()}: identity shorthand is I or I<n>, got {source!r}")
        return problems.identity(int(size))
    try:
        return problems.load_matrix(source, name)
    except FileNotFoundError as exc:
        raise CLIError(f"--{name.lower()}: no such file {source}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"--{name.lower()}: invalid JSON in {source} ({exc})") from exc


def _read_poly(source: str | None, name: str, nvars: int) -> Poly:
    if source is None:
        raise CLIError(f"--{name} is required")
    path = Path(source)
    text = path.read_text() if path.exists() else source
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = text.strip()
    try:
        return Poly.from_json(data, nvars)
    except (PolyError, KeyError, TypeError, ValueError) as exc:
        raise CLIError(f"--{name}: {exc}") from exc


def _matrix_dim(source: str | None) -> int | None:
    if source is None:
        return None
    if source.upper().startswith("I") and not Path(source).exists():
        return int(source[1:]) if source[1:].isdigit() else None
    try:
        return len(json.loads(Path(source).read_text()))
    except (OSError, json.JSONDecodeError, TypeError):
        return None


def load_problem(name: str, params: dict) -> AffineSystem:
    if name == "fuller-classic":
        return problems.fuller_classic()
    if name == "time-optimal-di":
        return problems.time_optimal_di()
    if name == "fuller-multi":
        dim = _matrix_dim(params.get("m1")) or _matrix_dim(params.get("m2"))
        return problems.fuller_multi(
            _read_matrix(params.get("m1"), "M1", dim), _read_matrix(params.get("m2"), "M2", dim)
        )
    if name == "hamiltonian":
        dim = _matrix_dim(params.get("t")) or _matrix_dim(params.get("m"))
        T = _read_matrix(params.get("t"), "T", dim)
        M = _read_matrix(params.get("m"), "M", len(T))
        k = len(T)
        return problems.hamiltonian_family(
            T, M, _read_poly(params.get("q"), "q", k), _read_poly(params.get("c"), "c", k)
        )
    path = Path(name)
    if not path.exists():
        raise CLIError(f"unknown problem {name!r}: expected one of {', '.join(BUILTINS)} or a JSON file")
    return AffineSystem.load(path)


# ---------------------------------------------------------------------------
# analyze


def _parse_vector(text: str, name: str) -> tuple[str, ...]:
    parts = tuple(s.strip() for s in text.split(",") if s.strip())
    try:
        for s in parts:
            Fraction(s)
    except ValueError as exc:
        raise CLIError(f"{name}: expected comma-separated rationals, got {text!r}") from exc
    return parts


def _exact_or_float(values):
    fr = [Fraction(v) for v in values]
    return tuple(int(v) if v.denominator == 1 else v for v in fr)


def _perturbed(point, rng: np.random.Generator, count: int) -> list[tuple[float, ...]]:
    base = np.asarray([float(v) for v in point])
    return [tuple(base + PERTURBATION_SIZE * rng.uniform(-1.0, 1.0, base.size)) for _ in range(count)]


def _strs(values) -> list[str]:
    return [str(v) for v in values]


def analyze(cfg: RunConfig) -> dict:
    sys_ = load_problem(cfg.problem, cfg.params)
    aug = augment(sys_)
    if cfg.point is not None:
        if len(cfg.point) != aug.N:
            raise CLIError(f"--point: expected {aug.N} coordinates (x0 first), got {len(cfg.point)}")
        point = _exact_or_float(cfg.point)
    else:
        point = (0,) * aug.N
    cert = fuller_certificate(aug, [point])
    ladder, delta = cert.ladder, cert.delta

    rng = np.random.default_rng(cfg.seed)
    probes = _perturbed(point, rng, PERTURBATIONS)
    probe_report = delta_rank(list(delta.basis_fields), probes, delta.tol)

    annihilator = delta.annihilator
    exact = delta.annihilators_exact[0] if delta.annihilators_exact else None
    if ladder.q is None:
        glc = {"verdict": "inapplicable", "reason": ladder.note or ladder.status}
    elif annihilator is None:
        glc = {"verdict": "inapplicable", "reason": f"no unique annihilator (rank {delta.rank})"}
    else:
        try:
            glc = {"verdict": glc_check(ladder, [float(v) for v in point], annihilator),
                   "z": [float(v) for v in point], "p": [float(v) + 0.0 for v in annihilator]}
        except GLCInapplicable as exc:
            glc = {"verdict": "inapplicable", "reason": str(exc)}

    N = aug.N
    return {
        "config": _config_json(cfg),
        "problem": {
            "name": sys_.name, "n": sys_.n, "m": sys_.m,
            "fbar": aug.fbar.render(), "gbar": [g.render() for g in aug.gbar],
        },
        "variables": {"state": [f"x{j}" for j in range(N)],
                      "adjoint": [f"x{N + j}" for j in range(N)],
                      "note": "x0 is the accumulated cost; the adjoint stores p0 = -lambda"},
        "ladder": {
            "status": ladder.status, "k": ladder.k, "q": ladder.q, "note": ladder.note,
            "levels": [[{"word": b.word, "field": b.field.render()} for b in level]
                       for level in ladder.ladder],
        },
        "A": [a.render() for a in ladder.A_polys()],
        "B": [[b.render() for b in row] for row in ladder.B_polys()],
        "glc": glc,
        "delta": {
            "basis": [b.word for b in delta.basis_fields],
            "point": _strs(point),
            "rank": delta.rank,
            "annihilator": None if annihilator is None else [float(v) + 0.0 for v in annihilator],
            "annihilator_exact": None if exact is None else _strs(exact),
            "membership": delta.membership_queries,
            "inverse_decidable": delta.decidable,
            "perturbation_ranks": list(probe_report.ranks),
            "perturbation_size": PERTURBATION_SIZE,
        },
        "certificate": {"verdict": cert.verdict, "failing": cert.failing},
    }


# ---------------------------------------------------------------------------
# simulate / chatter


def _floats(values, name, size):
    try:
        out = tuple(float(v) for v in values)
    except ValueError as exc:
        raise CLIError(f"{name}: expected numbers") from exc
    if len(out) != size:
        raise CLIError(f"{name}: expected {size} values, got {len(out)}")
    return out


def _default_beta(cfg: RunConfig) -> float | str:
    if cfg.beta is not None:
        return cfg.beta
    if cfg.problem == "fuller-classic":
        return "scan"
    if cfg.problem == "time-optimal-di":
        return 0.5
    raise CLIError("feedback mode needs --beta for this problem")


def simulate(cfg: RunConfig) -> tuple[dict, object]:
    sys_ = load_problem(cfg.problem, cfg.params)
    opts = cfg.sim_options()
    if cfg.target_radius is None and cfg.problem == "time-optimal-di" and cfg.mode == "feedback":
        opts = SimOptions(tol_event=cfg.tol_event, zeno_floor=cfg.zeno_floor, target_radius=1e-6)
    x0 = (1.0,) + (0.0,) * (sys_.n - 1) if cfg.x0 is None else _floats(cfg.x0, "--x0", sys_.n)
    info: dict = {}
    if cfg.mode == "feedback":
        beta = _default_beta(cfg)
        if beta == "scan":
            if cfg.problem != "fuller-classic":
                raise CLIError("--beta scan is only defined for fuller-classic")
            beta, costs = beta_scan(x0, opts=SimOptions(tol_event=cfg.tol_event, zeno_floor=cfg.zeno_floor))
            info["beta_scan"] = {"best": beta, "cost": costs[beta], "grid": len(costs)}
        law = FeedbackLaw.fuller(float(beta))
        info["law"] = law.describe()
        traj = simulate_feedback(sys_, law, x0, cfg.horizon, opts)
    elif cfg.mode == "extremal":
        aug = augment(sys_)
        if cfg.p0 == "shoot" or (cfg.p0 is None and cfg.problem == "fuller-classic"):
            if cfg.problem != "fuller-classic":
                raise CLIError("--p0 shoot is only defined for fuller-classic")
            p0 = shoot_fuller_adjoint(x0, horizon=cfg.horizon, opts=opts)
            info["shooting"] = {"p0": list(p0)}
        elif cfg.p0 is None:
            raise CLIError("extremal mode needs --p0")
        else:
            p0 = _floats(cfg.p0, "--p0", sys_.n)
        traj = integrate_extremal(aug, (0.0,) + tuple(x0), p0, cfg.lam, cfg.horizon, opts)
        H = traj.hamiltonian(aug)
        info["max_abs_H"] = float(np.abs(H).max())
    else:
        raise CLIError(f"--mode must be extremal or feedback, got {cfg.mode!r}")
    if traj.terminated_by == "error":
        raise CLIError(f"integration failed (last valid t={traj.t[-1]:.17g}): {traj.message}")
    try:
        chatter = fit_chatter(traj).to_json()
    except InsufficientSwitches as exc:
        chatter = {"accumulation": False, "insufficient-switches": str(exc), "inputs": []}
    report = {
        "config": _config_json(cfg),
        "problem": sys_.name,
        "x0": list(x0),
        "events": len(traj.events),
        "grazes": len(traj.grazes),
        "terminated_by": traj.terminated_by,
        "message": traj.message,
        "t_final": float(traj.t[-1]),
        "cost": float(traj.z[-1, 0]),
        "chatter": chatter,
        **info,
    }
    return report, traj


def chatter_from_csv(cfg: RunConfig) -> dict:
    if cfg.events is None:
        raise CLIError("chatter needs --events <events.csv>")
    times: dict[int, list[float]] = {}
    try:
        with open(cfg.events, newline="") as fh:
            for row in csv.DictReader(fh):
                times.setdefault(int(row["input"]), []).append(float(row["t"]))
    except FileNotFoundError as exc:
        raise CLIError(f"--events: no such file {cfg.events}") from exc
    except (KeyError, ValueError) as exc:
        raise CLIError(f"--events: malformed events CSV ({exc})") from exc
    m = max(times, default=-1) + 1
    try:
        rep = fit_chatter_times([times.get(i, []) for i in range(m)]).to_json()
    except InsufficientSwitches as exc:
        rep = {"accumulation": False, "insufficient-switches": str(exc), "inputs": []}
    return {"config": _config_json(cfg), **rep}


def summary_line(report: dict) -> str:
    parts = [f"events={report['events']}", f"terminated_by={report['terminated_by']}"]
    fitted = [c for c in report["chatter"].get("inputs", []) if c.get("rho") is not None]
    for c in fitted:
        parts.append(f"rho[{c['input_index']}]={c['rho']:.6g}")
        parts.append(f"fit_r2[{c['input_index']}]={c['fit_r2']:.6g}")
    parts.append(f"accumulation={str(report['chatter']['accumulation']).lower()}")
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Entry point


def _config_json(cfg: RunConfig) -> dict:
    return json.loads(json.dumps(asdict(cfg)))


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("problem", nargs="?", default="fuller-classic",
                        help=f"{', '.join(BUILTINS)} or a problem JSON file")
    common.add_argument("--m1", help="fuller-multi M1: JSON matrix file, I or I<n>")
    common.add_argument("--m2", help="fuller-multi M2: JSON matrix file, I or I<n>")
    common.add_argument("--t", help="hamiltonian T: JSON matrix file, I or I<n>")
    common.add_argument("--m", help="hamiltonian M: JSON matrix file, I or I<n>")
    common.add_argument("--q", help="hamiltonian potential Q: polynomial file or text")
    common.add_argument("--c", help="hamiltonian running cost c: polynomial file or text")
    common.add_argument("--out", help="output directory (analyze prints to stdout if omitted)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol-event", type=float, default=1e-13)
    common.add_argument("--zeno-floor", type=float, default=1e-10)
    common.add_argument("--horizon", type=float, default=10.0)

    parser = argparse.ArgumentParser(prog="fuller", description="Singular-arc and chattering analysis")
    sub = parser.add_subparsers(dest="command", required=True)
    an = sub.add_parser("analyze", parents=[common], help="ladder, GLC, cone rank and certificate")
    an.add_argument("--point", help="candidate singular point, comma-separated (cost coordinate first)")
    for name in ("simulate", "chatter"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("--mode", choices=("extremal", "feedback"), default="feedback")
        sp.add_argument("--beta", help="switching-curve coefficient, or 'scan'")
        sp.add_argument("--x0", help="initial state, comma-separated")
        sp.add_argument("--p0", help="initial adjoint (state part), comma-separated, or 'shoot'")
        sp.add_argument("--lam", type=float, default=1.0)
        sp.add_argument("--target-radius", type=float)
        if name == "chatter":
            sp.add_argument("--events", help="fit an existing events CSV instead of simulating")
    return parser


def _config_from_args(args) -> RunConfig:
    params = {k: getattr(args, k) for k in ("m1", "m2", "t", "m", "q", "c") if getattr(args, k)}
    kw = dict(
        command=args.command, problem=args.problem, params=params, seed=args.seed, out=args.out,
        tol_event=args.tol_event, zeno_floor=args.zeno_floor, horizon=args.horizon,
    )
    if args.command == "analyze":
        if args.point:
            kw["point"] = _parse_vector(args.point, "--point")
        return RunConfig(**kw)
    beta = args.beta
    if beta is not None and beta != "scan":
        try:
            beta = float(beta)
        except ValueError as exc:
            raise CLIError(f"--beta: expected a number or 'scan', got {beta!r}") from exc
    p0 = args.p0
    if p0 is not None and p0 != "shoot":
        p0 = tuple(s.strip() for s in p0.split(","))
    kw.update(
        mode=args.mode, beta=beta, p0=p0, lam=args.lam, target_radius=args.target_radius,
        x0=None if args.x0 is None else tuple(s.strip() for s in args.x0.split(",")),
        events=getattr(args, "events", None),
    )
    return RunConfig(**kw)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        out = Path(cfg.out) if cfg.out else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        if cfg.command == "analyze":
            text = _dump(analyze(cfg))
            if out is None:
                sys.stdout.write(text)
            else:
                (out / "analysis.json").write_text(text)
                print(f"wrote {out / 'analysis.json'}")
            return 0
        if cfg.command == "chatter" and cfg.events is not None:
            text = _dump(chatter_from_csv(cfg))
            if out is None:
                sys.stdout.write(text)
            else:
                (out / "chatter.json").write_text(text)
            return 0
        report, traj = simulate(cfg)
        out = out or Path(".")
        if cfg.command == "simulate":
            traj.write_csv(out / "trajectory.csv")
            traj.write_events_csv(out / "events.csv")
            save_json(report, out / "report.json")
        save_json({"config": report["config"], **report["chatter"]}, out / "chatter.json")
        print(summary_line(report))
        return 0
    except (CLIError, ProblemError, ContractError, LadderError, PolyError, ValueError) as exc:
        kind = type(exc).__name__
        sys.stderr.write(json.dumps({"error": kind, "message": str(exc)}) + "\n")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
