"""Command-line front end: fringe scans, verification runs and figure tables."""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic as an
from .analytic import FormulaId as F
from .channels import LossChannel, lossy_correlation
from .correlators import DEFAULT_GRID_POINTS, Analyzer, default_analyzer, fringe_scan, heisenberg_fringe, theta_grid
from .errors import NoonAmpError
from .fock import PureState
from .opa import GainParams, Geometry, amplify
from .states import NoonSpec, change_basis, make_noon, vacuum
from .verify import BLOCKS, run_checks

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE, EXIT_VERIFY = 0, 1, 2, 3
CSV_HEADER = "geometry,N,g,n_bar,M,eta,theta,G_value"
FIGURES = ("fig3", "fig4", "fig8")
CONFIG_PREFIX = "# config: "


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    command: str = "scan"
    geometry: str = "collinear"
    seed_n: int = 2
    phi: float = 0.0
    gains: tuple[float, ...] = (1.0,)
    eta: float = 1.0
    orders: tuple[int, ...] = (2,)
    grid_points: int = DEFAULT_GRID_POINTS
    cutoff: int | None = None
    format: str = "csv"
    analyzer: str | None = None
    backend: str = "heisenberg"
    tolerance: float | None = None
    blocks: tuple[str, ...] = ()
    figure: str | None = None
    out: str | None = field(default=None, compare=False)
    jobs: int | None = field(default=None, compare=False)

    def validate(self) -> RunConfig:
        if self.command not in ("scan", "verify", "figure"):
            raise ConfigError(f"unknown command {self.command!r}")
        if self.geometry not in ("collinear", "noncollinear"):
            raise ConfigError(f"geometry must be collinear or noncollinear, got {self.geometry!r}")
        if int(self.seed_n) != self.seed_n or self.seed_n < 0:
            raise ConfigError("seed photon number must be a nonnegative integer (0 = vacuum)")
        if not math.isfinite(self.phi):
            raise ConfigError("phi must be finite")
        if not self.gains or any(not math.isfinite(g) or g < 0 for g in self.gains):
            raise ConfigError("gains must be finite and nonnegative")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError("eta must lie in [0, 1]")
        top = 64 if self.command == "figure" else 6
        if not self.orders or any(int(m) != m or not 1 <= m <= top for m in self.orders):
            raise ConfigError(f"orders must be integers in 1..{top}")
        if int(self.grid_points) != self.grid_points or self.grid_points < 1:
            raise ConfigError("grid points must be a positive integer")
        if self.cutoff is not None and (int(self.cutoff) != self.cutoff or self.cutoff < 1):
            raise ConfigError("cutoff must be a positive integer")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.analyzer not in (None, "rotation", "phase", "fixed"):
            raise ConfigError(f"unknown analyzer {self.analyzer!r}")
        if self.backend not in ("heisenberg", "schrodinger"):
            raise ConfigError("backend must be heisenberg or schrodinger")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        bad = [b for b in self.blocks if b not in BLOCKS]
        if bad:
            raise ConfigError(f"unknown verification block(s): {', '.join(bad)}")
        if self.command == "figure" and self.figure not in FIGURES:
            raise ConfigError(f"figure must be one of {', '.join(FIGURES)}")
        if self.jobs is not None and self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        return self

    def echo(self) -> dict:
        """Effective configuration that determines the output (no paths, no job count)."""
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("jobs")
        d["gains"] = list(self.gains)
        d["orders"] = list(self.orders)
        d["blocks"] = list(self.blocks)
        return d


# ---------------------------------------------------------------------------
# scan


def _seed(cfg: RunConfig) -> PureState:
    if cfg.seed_n == 0:
        return vacuum()
    return make_noon(NoonSpec(cfg.seed_n, cfg.phi))


def _scan_point(cfg: RunConfig, g: float, m: int) -> np.ndarray:
    geometry = Geometry(cfg.geometry)
    analyzer = Analyzer(cfg.analyzer) if cfg.analyzer else default_analyzer(geometry)
    thetas = theta_grid(cfg.grid_points)
    gain = GainParams(g)
    seed = _seed(cfg)
    if cfg.backend == "heisenberg":
        return heisenberg_fringe(seed, geometry, gain, m, thetas, analyzer, eta=cfg.eta).values
    state = amplify(seed, geometry, gain, cutoff=cfg.cutoff, order=m)
    if state.basis is not analyzer.native_basis:
        state = change_basis(state, analyzer.native_basis)
    if cfg.eta < 1:
        return lossy_correlation(state, LossChannel(cfg.eta), m, thetas, analyzer).values
    return fringe_scan(state, m, analyzer, thetas).values


def _scan_task(args):
    cfg, g, m = args
    return _scan_point(cfg, g, m)


def _fmt(x: float) -> str:
    return "%.17g" % x


def run_scan(cfg: RunConfig) -> tuple[list[str], list[list[float]], list[str]]:
    tasks = [(cfg, g, m) for g in cfg.gains for m in cfg.orders]
    jobs = cfg.jobs or os.cpu_count() or 1
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_scan_task, tasks))  # map keeps submission order
    else:
        results = [_scan_task(t) for t in tasks]
    thetas = theta_grid(cfg.grid_points)
    rows = []
    for (_, g, m), values in zip(tasks, results):
        nbar = GainParams(g).nbar
        for t, v in zip(thetas, values):
            rows.append([cfg.geometry, cfg.seed_n, g, nbar, m, cfg.eta, t, v])
    return CSV_HEADER.split(","), rows, []


# ---------------------------------------------------------------------------
# figures


FIGURE_GAINS = tuple(round(0.05 * k, 10) for k in range(81))
FIGURE_ORDERS = tuple(range(1, 13))


def figure_table(cfg: RunConfig) -> tuple[list[str], list[list[float]]]:
    if cfg.figure == "fig4":
        header = ["g", "n_bar"] + [f"V{m}" for m in range(2, 7)]
        rows = []
        for g in cfg.gains:
            gain = GainParams(g)
            rows.append([g, gain.nbar] + [an.eval_formula(an.VISIBILITY_SERIES[m], g=g) for m in range(2, 7)])
        return header, rows
    if cfg.figure == "fig3":
        header = ["g", "n_mean_stim", "V_stim", "n_mean_spont", "V_spont"]
        rows = [
            [
                g,
                an.eval_formula(F.MEAN_N_STIM, g=g),
                an.eval_formula(F.COLL_V2, g=g),
                an.eval_formula(F.MEAN_N_SP, g=g),
                an.eval_formula(F.COLL_SPONT_V2, g=g),
            ]
            for g in cfg.gains
        ]
        return header, rows
    orders = cfg.orders
    header = ["M", "V_N2", "V_N3", "V_N4"]
    rows = [[m] + [an.eval_formula(an.ASYMPTOTIC_BY_N[n], M=m) for n in (2, 3, 4)] for m in orders]
    return header, rows


# ---------------------------------------------------------------------------
# output


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return _fmt(float(x))
    return str(x)


def render(cfg: RunConfig, header: list[str], rows: list[list], notes: list[str] = ()) -> str:
    echo = json.dumps(cfg.echo(), sort_keys=True)
    if cfg.format == "json":
        payload = {
            "config": cfg.echo(),
            "columns": header,
            "rows": [[float(x) if isinstance(x, (float, np.floating)) else x for x in r] for r in rows],
        }
        if notes:
            payload["notes"] = list(notes)
        return json.dumps(payload, sort_keys=True, indent=1) + "\n"
    buf = io.StringIO()
    buf.write(CONFIG_PREFIX + echo + "\n")
    for note in notes:
        buf.write("# " + note + "\n")
    buf.write(",".join(header) + "\n")
    for r in rows:
        buf.write(",".join(_cell(x) for x in r) + "\n")
    return buf.getvalue()


def write_output(text: str, path: str | None) -> None:
    """Write atomically; a failed run leaves no partial file behind."""
    if path is None:
        sys.stdout.write(text)
        return
    tmp = f"{path}.part"
    try:
        with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


# ---------------------------------------------------------------------------
# argument handling


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file, or a CSV output whose header echoes one")
    common.add_argument("--geometry", choices=["collinear", "noncollinear"])
    common.add_argument("--seed-n", type=int, help="NOON photon number (0 = vacuum)")
    common.add_argument("--phi", type=float, help="seed phase")
    common.add_argument("--gain", type=float, action="append", help="nonlinear gain g (repeatable)")
    common.add_argument("--eta", type=float, help="transmittivity of the loss channel")
    common.add_argument("--order", type=int, action="append", help="correlation order M (repeatable)")
    common.add_argument("--grid-points", type=int, help="theta samples over [0, 2pi)")
    common.add_argument("--cutoff", type=int, help="photon cutoff per mode (schrodinger backend)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
    common.add_argument("--tolerance", type=float, help="override every verification tolerance")
    common.add_argument("--analyzer", choices=["rotation", "phase", "fixed"])
    common.add_argument("--backend", choices=["heisenberg", "schrodinger"])

    parser = _Parser(prog="noonamp", description="Amplified NOON-state correlation simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("scan", parents=[common], help="correlation fringes G^(M)(theta)")
    verify = sub.add_parser("verify", parents=[common], help="compare simulation with closed forms")
    verify.add_argument("--block", action="append", choices=list(BLOCKS), help="restrict to a block (repeatable)")
    figure = sub.add_parser("figure", parents=[common], help="tables of closed-form curves")
    figure.add_argument("figure_id", metavar="FIGURE", help=f"one of {', '.join(FIGURES)}")
    return parser


_FLAG_FIELDS = {
    "geometry": "geometry",
    "seed_n": "seed_n",
    "phi": "phi",
    "gain": "gains",
    "eta": "eta",
    "order": "orders",
    "grid_points": "grid_points",
    "cutoff": "cutoff",
    "format": "format",
    "out": "out",
    "jobs": "jobs",
    "tolerance": "tolerance",
    "analyzer": "analyzer",
    "backend": "backend",
    "block": "blocks",
}


def load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.startswith(CONFIG_PREFIX):
        text = text.splitlines()[0][len(CONFIG_PREFIX):]
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "rows" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return data


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if ns.config:
        values.update(load_config_file(ns.config))
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(ns, flag, None)
        if v is not None:
            values[name] = v
    values["command"] = ns.command
    if ns.command == "figure":
        values["figure"] = ns.figure_id
    if ns.command == "figure":
        values.setdefault("gains", FIGURE_GAINS)
        values.setdefault("orders", FIGURE_ORDERS)
    for key in ("gains", "orders", "blocks"):
        if key in values:
            values[key] = tuple(values[key])
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def cmd_scan(cfg: RunConfig) -> int:
    header, rows, notes = run_scan(cfg)
    write_output(render(cfg, header, rows, notes), cfg.out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    results = run_checks(cfg.blocks or None, cfg.tolerance)
    header = ["criterion", "check", "passed", "max_deviation", "tolerance", "detail"]
    rows = [[r.criterion, r.name, r.passed, r.deviation, r.tolerance, r.detail] for r in results]
    if cfg.format == "csv":
        lines = [r.line() for r in results]
        failed = sum(not r.passed for r in results)
        lines.append(f"{len(results) - failed} passed, {failed} failed")
        write_output("\n".join(lines) + "\n", cfg.out)
    else:
        write_output(render(cfg, header, rows), cfg.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_figure(cfg: RunConfig) -> int:
    header, rows = figure_table(cfg)
    write_output(render(cfg, header, rows), cfg.out)
    return EXIT_OK


COMMANDS = {"scan": cmd_scan, "verify": cmd_verify, "figure": cmd_figure}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve_config(ns)
    except (ConfigError, OSError) as exc:
        print(f"noonamp: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[cfg.command](cfg)
    except (NoonAmpError, ArithmeticError, ValueError, MemoryError) as exc:
        print(f"noonamp: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
