"""Command-line harness producing CSV tables from the analytic model and the simulator.

Usage::

    csma-backoff curve --a 0.1 --grid G=0.01:10:0.01 --out curve.csv
    csma-backoff regions --n 10 --grid lambda_hat=0.05:0.45:0.05
    csma-backoff simulate --q 0.5 --horizon 1000000 --reps 5
    csma-backoff sweep --grid q=0.05:0.95:0.05
    csma-backoff validate

Parameters come from flags, then a ``key=value`` config file (``--config``),
then built-in defaults, in that order of precedence.  Every CSV starts with a
``#`` comment line holding the full parameter set and the seed.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelParams, throughput
from .errors import DomainError, Divergent, Infeasible, NoSolution, Unstable
from .hol import (BackoffParams, is_infinite, mean_delay, normalizer, offered_load, parse_K,
                  service_moments, success_probs)
from .regions import (NetworkLoad, bounded_delay_region_exp, stable_region_exp,
                      throughput_roots)
from .simulator import SimConfig, pool, run

COMMANDS = ("curve", "regions", "moments", "simulate", "sweep", "validate")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_VALIDATION = 0, 2, 3, 4

DEFAULTS = {
    "a": "0.1",
    "n": "10",
    "lambda_hat": "0.3",
    "q": "0.5",
    "K": "inf",
    "horizon": "1000000",
    "warmup": "",
    "seed": "0",
    "batches": "20",
    "reps": "5",
    "G": "",
    "out": "-",
}

# sweep variable used when --grid omits "name="
DEFAULT_GRID_VAR = {
    "curve": "G",
    "regions": "lambda_hat",
    "moments": "q",
    "simulate": "q",
    "sweep": "q",
}
DEFAULT_GRID = {"curve": "0.01:10:0.01"}
GRID_VARS = {
    "curve": {"G"},
    "regions": {"lambda_hat"},
    "moments": {"q", "G", "lambda_hat"},
    "simulate": {"q", "lambda_hat", "lambda"},
    "sweep": {"q", "lambda_hat", "lambda"},
    "validate": set(),
}


class UsageError(ValueError):
    pass


def expand_grid(text: str) -> list[float]:
    """Expand ``start:stop:step`` (stop inclusive) or a comma list into floats."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError as exc:
            raise UsageError(f"bad grid {text!r}; expected start:stop:step") from exc
        if not step > 0:
            raise UsageError(f"grid step must be positive in {text!r}")
        count = math.floor((stop - start) / step + 1e-9) + 1
        values = [round(start + k * step, 12) for k in range(max(count, 0))]
    else:
        try:
            values = [float(v) for v in text.split(",") if v.strip()]
        except ValueError as exc:
            raise UsageError(f"bad grid {text!r}") from exc
    if not values:
        raise UsageError(f"grid {text!r} is empty")
    return values


@dataclass
class ExperimentSpec:
    """A fully resolved experiment: command, scalar parameters and sweep grids.

    Values are kept as text so that :meth:`to_text` and :meth:`from_text`
    round-trip exactly.
    """

    command: str
    params: dict[str, str] = field(default_factory=dict)
    grid: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")

    def get(self, key: str) -> str:
        return self.params.get(key, DEFAULTS.get(key, ""))

    def num(self, key: str) -> float:
        return float(self.get(key))

    def integer(self, key: str) -> int:
        return int(float(self.get(key)))

    @property
    def seed(self) -> int:
        return self.integer("seed")

    @property
    def out(self) -> str:
        return self.get("out")

    def lambda_hat(self) -> float:
        """Aggregate load; a per-node ``lambda`` takes priority when set."""
        if self.params.get("lambda"):
            return float(self.params["lambda"]) * self.integer("n")
        return self.num("lambda_hat")

    def grids(self) -> list[tuple[str, list[float]]]:
        return [(name, expand_grid(text)) for name, text in self.grid.items()]

    def items(self) -> list[tuple[str, str]]:
        pairs = [("command", self.command)]
        pairs += sorted(self.params.items())
        pairs += [(f"grid.{k}", v) for k, v in self.grid.items()]
        return pairs

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.items())

    @classmethod
    def from_text(cls, text: str) -> "ExperimentSpec":
        command, params, grid = "", {}, {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"config line without '=': {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key == "command":
                command = value
            elif key.startswith("grid."):
                grid[key[5:]] = value
            else:
                params[key] = value
        return cls(command or "validate", params, grid)

    def comment(self) -> str:
        resolved = dict(DEFAULTS)
        resolved.update(self.params)
        parts = [f"command={self.command}"]
        parts += [f"{k}={v}" for k, v in sorted(resolved.items()) if k != "out"]
        parts += [f"grid.{k}={v}" for k, v in self.grid.items()]
        return "# " + " ".join(parts)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def write_csv(spec: ExperimentSpec, header: list[str], rows: list[list], stream=None) -> str:
    """Write the comment line, header and rows; returns the text written."""
    buf = io.StringIO()
    buf.write(spec.comment() + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    text = buf.getvalue()
    path = spec.out
    if stream is not None:
        stream.write(text)
    elif path in ("", "-"):
        sys.stdout.write(text)
    else:
        try:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return text


def read_csv(source) -> tuple[dict[str, str], list[str], list[dict[str, float | str]]]:
    """Parse a CSV written by this harness into ``(meta, header, rows)``."""
    if hasattr(source, "read"):
        text = source.read()
    elif "\n" in str(source):
        text = str(source)
    else:
        with open(source) as fh:
            text = fh.read()
    lines = text.splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        for part in lines[0][1:].split():
            key, _, value = part.partition("=")
            meta[key] = value
        lines = lines[1:]
    reader = csv.reader(lines)
    header = next(reader)
    rows = []
    for rec in reader:
        row = {}
        for k, v in zip(header, rec):
            try:
                row[k] = float(v)
            except ValueError:
                row[k] = v
        rows.append(row)
    return meta, header, rows


# ---------------------------------------------------------------- commands

def _single_grid(spec: ExperimentSpec, required: bool) -> tuple[str, list[float]]:
    grids = spec.grids()
    if len(grids) > 1:
        raise UsageError(f"{spec.command} sweeps one variable at a time")
    if grids:
        return grids[0]
    if spec.command in DEFAULT_GRID:
        return DEFAULT_GRID_VAR[spec.command], expand_grid(DEFAULT_GRID[spec.command])
    if required:
        raise UsageError(f"{spec.command} needs --grid")
    return "", []


def cmd_curve(spec: ExperimentSpec):
    a = spec.num("a")
    _, g_grid = _single_grid(spec, required=True)
    rows = []
    for G in g_grid:
        params = ChannelParams(a, G)
        sp = success_probs(params)
        rows.append([G, throughput(params), sp.p, sp.p1, sp.p2, sp.alpha])
    return ["G", "throughput", "p", "p1", "p2", "alpha"], rows


def cmd_regions(spec: ExperimentSpec):
    a, n, K = spec.num("a"), spec.integer("n"), parse_K(spec.get("K"))
    _, grid = _single_grid(spec, required=False)
    grid = grid or [spec.lambda_hat()]
    rows = []
    nan = math.nan
    for L in grid:
        try:
            load = NetworkLoad(L, n, a, K)
            rt = stable_region_exp(load)
            rd = bounded_delay_region_exp(load)
        except (Infeasible, NoSolution):
            rows.append([L, nan, nan, nan, nan, True, True, False])
            continue
        rows.append([L, rt.lo, rt.hi, rd.lo, rd.hi, rt.is_empty, rd.is_empty, True])
    return ["lambda_hat", "rt_lo", "rt_hi", "rd_lo", "rd_hi", "rt_empty", "rd_empty",
            "feasible"], rows


def _moment_row(a, n, K, L, q, G):
    sp = success_probs(ChannelParams(a, G))
    lam = L / n
    bp = BackoffParams(q, K, lam=lam, n=n)
    if is_infinite(K):
        if sp.p + q <= 1.0:
            return [q, G, sp.p, sp.alpha, math.inf, math.inf, False, math.inf, math.inf,
                    "not_recurrent"]
        m = service_moments(sp, bp, a)
        ex, ex2, converged = m.ex, m.ex2, m.converged
    else:
        ex, ex2, converged = normalizer(sp, bp, a), math.nan, False
    rho = offered_load(bp, sp, a)
    try:
        delay, status = mean_delay(lam, service_moments(sp, bp, a)), "ok"
    except Divergent:
        delay, status = math.inf, "divergent"
    except Unstable:
        delay, status = math.inf, "unstable"
    except DomainError:
        delay, status = math.nan, "finite_K"
    return [q, G, sp.p, sp.alpha, ex, ex2, converged, rho, delay, status]


def cmd_moments(spec: ExperimentSpec):
    """Service-time moments at the stable operating point ``G_S`` (or ``--G``)."""
    a, n, K = spec.num("a"), spec.integer("n"), parse_K(spec.get("K"))
    L = spec.lambda_hat()
    var, grid = _single_grid(spec, required=False)
    grid = grid or [spec.num(var or "q")]
    var = var or "q"

    def operating_G(lam_hat):
        if spec.get("G"):
            return spec.num("G")
        return throughput_roots(NetworkLoad(lam_hat, n, a)).g_small

    rows = []
    for value in grid:
        q, G, lh = spec.num("q"), None, L
        if var == "q":
            q = value
        elif var == "G":
            G = value
        else:
            lh = value
        try:
            G = operating_G(lh) if G is None else G
        except Infeasible:
            nan = math.nan
            rows.append([q, nan, nan, nan, nan, nan, False, nan, nan, "infeasible"])
            continue
        rows.append(_moment_row(a, n, K, lh, q, G))
    return ["q", "G", "p", "alpha", "ex", "ex2", "converged", "rho", "mean_delay",
            "status"], rows


def _sim_config(spec: ExperimentSpec, var: str, value: float) -> SimConfig:
    n = spec.integer("n")
    lam = spec.lambda_hat() / n
    q = spec.num("q")
    if var == "q":
        q = value
    elif var == "lambda_hat":
        lam = value / n
    elif var == "lambda":
        lam = value
    warmup = spec.get("warmup")
    return SimConfig(n=n, a=spec.num("a"), lam=lam, q=q, K=parse_K(spec.get("K")),
                     horizon=spec.integer("horizon"),
                     warmup=int(float(warmup)) if warmup else None,
                     seed=spec.seed, batches=spec.integer("batches"))


def cmd_simulate(spec: ExperimentSpec, workers: int | None = None):
    """Replicated simulations over one sweep variable.

    Every ``(grid value, replication)`` cell runs independently on a worker
    pool; results are gathered by grid index so the output does not depend
    on scheduling.
    """
    var, grid = _single_grid(spec, required=spec.command == "sweep")
    if not grid:
        var, grid = "q", [spec.num("q")]
    reps = spec.integer("reps")
    if reps < 1:
        raise UsageError("reps must be positive")
    base = [_sim_config(spec, var, v) for v in grid]
    cells = [(i, replace(cfg, seed=cfg.seed + r)) for i, cfg in enumerate(base)
             for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        results = list(ex.map(lambda cell: run(cell[1]), cells))
    rows = []
    for i, value in enumerate(grid):
        stats = pool(results[i * reps:(i + 1) * reps])
        rows.append([value, stats.throughput.mean, stats.throughput.half_width,
                     stats.mean_queue.mean, stats.mean_delay.mean, stats.delay_variance,
                     base[i].seed])
    return [var, "throughput", "ci_half_width", "mean_queue", "mean_delay",
            "delay_variance", "seed"], rows


def cmd_validate(spec: ExperimentSpec, perturb_p2: float = 0.0, stream=None):
    from .validate import run_validation

    checks = run_validation(seed=spec.seed, perturb_p2=perturb_p2)
    stream = stream or sys.stderr
    for c in checks:
        stream.write(c.line() + "\n")
    rows = [[c.name, c.passed, c.residual, c.bound] for c in checks]
    return ["check", "passed", "residual", "bound"], rows, all(c.passed for c in checks)


# ---------------------------------------------------------------- argument parsing

FLAG_KEYS = {
    "a": "a", "n": "n", "lambda_hat": "lambda_hat", "lam": "lambda", "q": "q", "K": "K",
    "horizon": "horizon", "warmup": "warmup", "seed": "seed", "batches": "batches",
    "reps": "reps", "G": "G", "out": "out",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--a", help="mini-slot length as a fraction of a slot (1/a integer)")
    common.add_argument("--n", help="number of nodes")
    common.add_argument("--lambda-hat", dest="lambda_hat", help="aggregate input rate")
    common.add_argument("--lambda", dest="lam", help="per-node input rate (overrides --lambda-hat)")
    common.add_argument("--q", help="retransmission factor")
    common.add_argument("--K", help='cut-off phase, integer or "inf"')
    common.add_argument("--horizon", help="simulated mini-slots per replication")
    common.add_argument("--warmup", help="mini-slots discarded (default 10%% of horizon)")
    common.add_argument("--seed", help="master seed")
    common.add_argument("--batches", help="batches for batch-means intervals")
    common.add_argument("--reps", help="replications per simulated point")
    common.add_argument("--G", help="attempt rate for the moments command")
    common.add_argument("--out", help="output CSV path, '-' for stdout")
    common.add_argument("--grid", action="append", default=[],
                        help='sweep "name=start:stop:step" or "name=v1,v2"; repeatable')
    common.add_argument("--config", help="key=value parameter file")
    common.add_argument("--workers", type=int, help="worker threads for simulations")

    parser = argparse.ArgumentParser(prog="csma-backoff", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("curve", parents=[common], help="throughput versus attempt rate")
    sub.add_parser("regions", parents=[common], help="stable and bounded-delay q intervals")
    sub.add_parser("moments", parents=[common], help="service-time moments and mean delay")
    sub.add_parser("simulate", parents=[common], help="simulate one point or a sweep")
    sub.add_parser("sweep", parents=[common], help="simulate a parameter sweep")
    v = sub.add_parser("validate", parents=[common], help="run all oracle cross-checks")
    v.add_argument("--perturb-p2", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    """Merge flags over the config file over defaults."""
    params: dict[str, str] = {}
    grid: dict[str, str] = {}
    if args.config:
        try:
            with open(args.config) as fh:
                base = ExperimentSpec.from_text(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from exc
        params.update(base.params)
        grid.update(base.grid)
    for attr, key in FLAG_KEYS.items():
        value = getattr(args, attr)
        if value is not None:
            params[key] = str(value)
    if args.grid:
        grid = {}
        for item in args.grid:
            name, sep, text = item.partition("=")
            if not sep:
                name, text = DEFAULT_GRID_VAR.get(args.command, ""), item
            name = name.strip().replace("-", "_")
            grid[name] = text.strip()
    for name in grid:
        if name not in GRID_VARS[args.command]:
            raise UsageError(f"{args.command} cannot sweep {name!r}")
    spec = ExperimentSpec(args.command, params, grid)
    spec.grids()  # surface empty or malformed grids as usage errors
    return spec


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        spec = spec_from_args(args)
        if spec.command == "validate":
            header, rows, ok = cmd_validate(spec, args.perturb_p2)
            if spec.out not in ("", "-"):
                write_csv(spec, header, rows)
            return EXIT_OK if ok else EXIT_VALIDATION
        if spec.command == "curve":
            header, rows = cmd_curve(spec)
        elif spec.command == "regions":
            header, rows = cmd_regions(spec)
        elif spec.command == "moments":
            header, rows = cmd_moments(spec)
        else:
            header, rows = cmd_simulate(spec, args.workers)
        write_csv(spec, header, rows)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, Infeasible, NoSolution) as exc:
        print(f"infeasible parameters: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
