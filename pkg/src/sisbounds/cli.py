"""Command-line interface: ``sisbounds {bounds,simulate,exact,gen,experiment}``.

Exit codes: 0 success, 1 usage, 2 input, 3 numeric, 4 resource guard.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import SisParams, adjacency_lambda_max, compute_bounds
from .errors import ConvergenceError, ResourceGuardError
from .exact import MAX_EXACT_N, build_sub_generator, exact_decay_rate
from .graph import DiGraph, EdgeListError, GraphGenSpec, gen_random, read_edge_list, restrict_to_largest_scc, write_edge_list
from .simulator import DecayFitError, SimConfig, estimate_decay, run_ensemble

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC, EXIT_RESOURCE = 0, 1, 2, 3, 4

EXPERIMENT_COLUMNS = [
    "family", "n_requested", "n", "beta_frac", "seed", "rho1", "rho2", "rho_hat", "e1", "e2", "status", "message",
]


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# helpers


def atomic_write(path, data: bytes | str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(out, text: str, stream=None) -> None:
    if out:
        atomic_write(out, text)
    else:
        (stream or sys.stdout).write(text)


def sibling(out: str, suffix: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + suffix)


def _read_numbers(path) -> list[float]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    vals = []
    for line in text.splitlines():
        line = line.split("#", 1)[0]
        for tok in line.split():
            try:
                vals.append(float(tok))
            except ValueError:
                raise InputError(f"{path}: not a number: {tok!r}") from None
    return vals


def _rate_vector(value, file, n: int, what: str):
    if file is not None:
        vals = _read_numbers(file)
        if len(vals) != n:
            raise InputError(f"{file}: expected {n} {what} values, got {len(vals)}")
        return np.array(vals)
    return np.full(n, float(value))


def _parse_list(text: str, conv, what: str) -> list:
    items = [x.strip() for x in str(text).split(",") if x.strip()]
    if not items:
        raise UsageError(f"{what}: list is empty")
    try:
        return [conv(x) for x in items]
    except ValueError:
        raise UsageError(f"{what}: cannot parse {text!r}") from None


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text}")
    return v


def _seed(text: str) -> int:
    v = int(text, 16) if text.lower().startswith("0x") else int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Resolved command configuration: parsed flags plus rates."""

    command: str
    args: argparse.Namespace
    graph: DiGraph | None = None
    params: SisParams | None = None
    beta_mode: str | None = None


BETA_KEYS = ("beta", "beta_file", "beta_frac")
BOOL_KEYS = ("bidirect", "scc_restrict")


def read_config_file(path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _truthy(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def load_graph(args) -> DiGraph:
    if not args.graph:
        raise UsageError("--graph is required")
    try:
        return read_edge_list(args.graph, bidirect=bool(args.bidirect))
    except (OSError, EdgeListError, ValueError) as exc:
        raise InputError(f"{args.graph}: {exc}") from None


def resolve_params(args, g: DiGraph) -> tuple[SisParams, str]:
    given = [k for k in BETA_KEYS if getattr(args, k, None) is not None]
    if len(given) != 1:
        raise UsageError("specify exactly one of --beta, --beta-file, --beta-frac")
    mode = given[0]
    delta = _rate_vector(args.delta if args.delta is not None else 1.0, args.delta_file, g.n, "delta")
    if mode == "beta_frac":
        lam = adjacency_lambda_max(g).lambda_max
        if lam <= 0:
            raise InputError("--beta-frac needs a graph with a cycle (lambda_max(A) > 0)")
        beta = np.full(g.n, args.beta_frac / lam)
    else:
        beta = _rate_vector(args.beta, args.beta_file, g.n, "beta")
    try:
        return SisParams(beta, delta), mode
    except ValueError as exc:
        raise InputError(str(exc)) from None


# ---------------------------------------------------------------------------
# commands


def cmd_bounds(cfg: RunConfig) -> int:
    args = cfg.args
    solver = {"tol": args.tol} if args.tol else {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = compute_bounds(cfg.graph, cfg.params, **solver)
    doc = report.as_dict()
    doc["diagnostics"] = {
        "beta_mode": cfg.beta_mode,
        "warnings": [str(w.message) for w in caught],
    }
    _emit(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def _initial_from_args(args, n: int):
    init = args.init or "all"
    if init == "all":
        return None
    vals = _read_numbers(init)
    if not vals or any(v != int(v) or not 0 <= v < n for v in vals):
        raise InputError(f"{init}: initial set must list node ids in [0, {n})")
    return tuple(int(v) for v in vals)


def _fit_window(text):
    if text is None:
        return None
    parts = str(text).split(",")
    if len(parts) != 2:
        raise UsageError("--fit-window expects A,B")
    try:
        a, b = float(parts[0]), float(parts[1])
    except ValueError:
        raise UsageError(f"--fit-window: cannot parse {text!r}") from None
    return a, b


def cmd_simulate(cfg: RunConfig) -> int:
    args = cfg.args
    try:
        sim = SimConfig(
            paths=args.paths, horizon=args.horizon, grid_dt=args.grid_dt, seed=args.seed,
            initial=_initial_from_args(args, cfg.graph.n), fit_window=_fit_window(args.fit_window),
            workers=args.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    traj = run_ensemble(cfg.graph, cfg.params, sim)
    _emit(args.out, traj.to_csv())
    doc = {"paths": sim.paths, "horizon": sim.horizon, "grid_dt": sim.grid_dt, "seed": sim.seed}
    code = EXIT_OK
    try:
        doc.update(estimate_decay(traj, sim.fit_window).as_dict())
    except DecayFitError as exc:
        doc["error"] = str(exc)
        code = EXIT_NUMERIC
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        atomic_write(sibling(args.out, ".decay.json"), text)
    else:
        sys.stderr.write(text)
    if code:
        sys.stderr.write(f"error: decay fit failed: {doc['error']}\n")
    return code


def cmd_exact(cfg: RunConfig) -> int:
    args = cfg.args
    max_n = args.max_n or MAX_EXACT_N
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        gen = build_sub_generator(cfg.graph, cfg.params, max_n=max_n)
        rho = exact_decay_rate(cfg.graph, cfg.params, max_n=max_n)
    doc = {
        "n": cfg.graph.n,
        "transient_states": gen.dim,
        "rho": rho,
        "warnings": [str(w.message) for w in caught],
    }
    _emit(args.out, json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def _gen_spec(family: str, n: int, args, seed: int) -> GraphGenSpec:
    family = family.lower()
    p = args.p
    if p is None:
        # defaults for sweeps; not fixed by the source experiments
        p = min(1.0, 2.0 * math.log(n) / n) if family == "er" else 0.1
    return GraphGenSpec(
        family=family, n=n, seed=seed,
        p=p if family in ("er", "nws") else None,
        m=(args.m or 2) if family == "ba" else None,
        k=(args.k or 2) if family == "nws" else None,
    )


def cmd_gen(cfg: RunConfig) -> int:
    args = cfg.args
    if not args.family or args.n is None:
        raise UsageError("gen requires --family and --n")
    try:
        spec = _gen_spec(args.family, args.n, args, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    g = gen_random(spec)
    if args.scc_restrict:
        g, _ = restrict_to_largest_scc(g)
    data = write_edge_list(g)
    if args.out:
        atomic_write(args.out, data)
    else:
        sys.stdout.write(data.decode())
    return EXIT_OK


def _realization_seeds(seed: int, fam_idx: int, n: int, frac_idx: int, r: int) -> tuple[int, int]:
    ss = np.random.SeedSequence([seed, fam_idx, n, frac_idx, r])
    g_seed, s_seed = (int(x) for x in ss.generate_state(2, dtype=np.uint64))
    return g_seed, s_seed


def run_experiment_cell(family, n, frac, g_seed, s_seed, args) -> dict:
    row = {"family": family, "n_requested": n, "beta_frac": frac, "seed": g_seed}
    try:
        g, _ = restrict_to_largest_scc(gen_random(_gen_spec(family, n, args, g_seed)))
        row["n"] = g.n
        if g.n < 2:
            raise ValueError("largest strongly connected component has fewer than 2 nodes")
        params = SisParams.from_beta_frac(g, frac)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = compute_bounds(g, params)
        row["rho1"], row["rho2"] = rep.rho1, rep.rho2
        sim = SimConfig(paths=args.paths, horizon=args.horizon, grid_dt=args.grid_dt, seed=s_seed,
                        workers=args.workers)
        est = estimate_decay(run_ensemble(g, params, sim))
        rho_hat = est.rho_hat
        row["rho_hat"] = rho_hat
        row["e1"] = (rho_hat - rep.rho1) / rho_hat
        row["e2"] = (rho_hat - rep.rho2) / rho_hat
        row["status"] = "ok"
        row["message"] = "; ".join(est.notes)
    except (ValueError, ArithmeticError, MemoryError) as exc:
        row["status"] = "failed"
        row["message"] = f"{type(exc).__name__}: {exc}"
    return row


PLOT_SCRIPT = '''"""Plot mean relative errors from a sisbounds experiment summary."""
import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt

SUMMARY = {summary!r}
MARKERS = {{"er": "o", "ba": "^", "nws": "s"}}

rows = list(csv.DictReader(open(sys.argv[1] if len(sys.argv) > 1 else SUMMARY)))
fracs = sorted({{float(r["beta_frac"]) for r in rows}}, reverse=True)
fig, axes = plt.subplots(len(fracs), 1, figsize=(5, 3.2 * len(fracs)), squeeze=False)
for ax, frac in zip(axes[:, 0], fracs):
    series = defaultdict(list)
    for r in rows:
        if float(r["beta_frac"]) == frac and r["mean_e1"]:
            series[r["family"]].append((int(r["n_requested"]), float(r["mean_e1"]), float(r["mean_e2"])))
    for fam, pts in sorted(series.items()):
        pts.sort()
        ns = [p[0] for p in pts]
        mk = MARKERS.get(fam, "x")
        ax.plot(ns, [p[1] for p in pts], mk, mfc="none", label=f"{{fam}} first order")
        ax.plot(ns, [p[2] for p in pts], mk, label=f"{{fam}} second order")
    ax.set_title(f"beta = {{frac}} / lambda_max(A)")
    ax.set_xlabel("n")
    ax.set_ylabel("relative error")
    ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig({figure!r})
print("wrote", {figure!r})
'''


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def cmd_experiment(cfg: RunConfig) -> int:
    args = cfg.args
    families = _parse_list(args.families or "er,ba,nws", str.lower, "--families")
    sizes = _parse_list(args.sizes or "", int, "--sizes")
    fracs = _parse_list(args.beta_fracs or "", float, "--beta-fracs")
    for fam in families:
        if fam not in ("er", "ba", "nws"):
            raise UsageError(f"unknown family {fam!r}")
    if any(f <= 0 for f in fracs) or any(n < 2 for n in sizes):
        raise UsageError("beta fractions must be positive and sizes >= 2")
    if args.realizations < 1:
        raise UsageError("--realizations must be >= 1")

    rows = []
    for fi, fam in enumerate(families):
        for n in sizes:
            for ci, frac in enumerate(fracs):
                for r in range(args.realizations):
                    g_seed, s_seed = _realization_seeds(args.seed, fi, n, ci, r)
                    rows.append(run_experiment_cell(fam, n, frac, g_seed, s_seed, args))
                    if args.verbose:
                        row = rows[-1]
                        print(f"{fam} n={n} c={frac} r={r}: {row['status']} "
                              f"rho1={row.get('rho1')} rho2={row.get('rho2')} rho_hat={row.get('rho_hat')}",
                              file=sys.stderr)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXPERIMENT_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in EXPERIMENT_COLUMNS])
    out = args.out or "experiment.csv"
    atomic_write(out, buf.getvalue())

    sbuf = io.StringIO()
    sw = csv.writer(sbuf, lineterminator="\n")
    sw.writerow(["family", "n_requested", "beta_frac", "realizations", "ok", "mean_n", "mean_rho1",
                 "mean_rho2", "mean_rho_hat", "mean_e1", "mean_e2"])
    for fam in families:
        for n in sizes:
            for frac in fracs:
                cell = [r for r in rows if r["family"] == fam and r["n_requested"] == n and r["beta_frac"] == frac]
                ok = [r for r in cell if r["status"] == "ok"]

                def mean(key):
                    return _fmt(float(np.mean([r[key] for r in ok]))) if ok else ""

                sw.writerow([fam, n, _fmt(frac), len(cell), len(ok), mean("n"), mean("rho1"), mean("rho2"),
                             mean("rho_hat"), mean("e1"), mean("e2")])
    summary = sibling(out, ".summary.csv")
    atomic_write(summary, sbuf.getvalue())
    atomic_write(sibling(out, ".plot.py"),
                 PLOT_SCRIPT.format(summary=str(summary), figure=str(sibling(out, ".png"))))
    failed = sum(r["status"] != "ok" for r in rows)
    if failed:
        print(f"warning: {failed} of {len(rows)} realizations failed (flagged in {out})", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "gen": cmd_gen,
    "experiment": cmd_experiment,
}
NEEDS_MODEL = ("bounds", "simulate", "exact")


# ---------------------------------------------------------------------------
# parser


def _shared(p: argparse.ArgumentParser, model: bool = True) -> None:
    p.add_argument("--config", help="key=value file; command-line flags take precedence")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--seed", type=_seed, default=0)
    if model:
        p.add_argument("--graph", help="edge-list file")
        p.add_argument("--bidirect", action="store_true", default=None, help="insert both orientations of each edge")
        p.add_argument("--beta", type=_positive_float, help="homogeneous infection rate")
        p.add_argument("--beta-file", help="per-node infection rates, one per node")
        p.add_argument("--beta-frac", type=_positive_float, help="beta = C / lambda_max(A)")
        p.add_argument("--delta", type=_positive_float, help="homogeneous recovery rate (default 1)")
        p.add_argument("--delta-file", help="per-node recovery rates, one per node")


def _sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--paths", type=int, default=10_000)
    p.add_argument("--horizon", type=_positive_float, default=100.0)
    p.add_argument("--grid-dt", type=_positive_float, default=0.1)
    p.add_argument("--workers", type=int, default=1)


def _graph_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--p", type=float, help="ER edge / NWS shortcut probability")
    p.add_argument("--m", type=int, help="BA attachment count (default 2)")
    p.add_argument("--k", type=int, help="NWS ring half-degree (default 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sisbounds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("bounds", help="first- and second-order decay-rate bounds (JSON)")
    _shared(p)
    p.add_argument("--tol", type=_positive_float, help="eigensolver tolerance")

    p = sub.add_parser("simulate", help="Monte Carlo trajectory (CSV) and decay fit (JSON)")
    _shared(p)
    _sim_flags(p)
    p.add_argument("--init", default="all", help="'all' or a file of initially infected node ids")
    p.add_argument("--fit-window", help="A,B time window for the decay fit")

    p = sub.add_parser("exact", help="exact decay rate from the 2^n-state chain (JSON)")
    _shared(p)
    p.add_argument("--max-n", type=int, help=f"size guard (default {MAX_EXACT_N})")

    p = sub.add_parser("gen", help="generate a random bidirected graph (edge list)")
    _shared(p, model=False)
    p.add_argument("--family", choices=["er", "ba", "nws"])
    p.add_argument("--n", type=int)
    _graph_flags(p)
    p.add_argument("--scc-restrict", action="store_true", default=None)

    p = sub.add_parser("experiment", help="random-graph sweep of relative errors (CSV)")
    _shared(p, model=False)
    _sim_flags(p)
    _graph_flags(p)
    p.add_argument("--families", default="er,ba,nws")
    p.add_argument("--sizes")
    p.add_argument("--beta-fracs")
    p.add_argument("--realizations", type=int, default=20)
    p.add_argument("--verbose", action="store_true")
    return parser


def parse_config(argv) -> RunConfig:
    """Flags override config-file values, which override defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sub = parser._subparsers._group_actions[0].choices[args.command]
        explicit = {k: v for k, v in vars(sub.parse_args(argv[1:])).items()}
        conf = read_config_file(args.config)
        known = {a.dest for a in sub._actions}
        unknown = set(conf) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        if any(explicit.get(k) is not None for k in BETA_KEYS):
            conf = {k: v for k, v in conf.items() if k not in BETA_KEYS}
        defaults = {}
        for k, v in conf.items():
            defaults[k] = _truthy(v) if k in BOOL_KEYS else v
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return RunConfig(args.command, args)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cfg = parse_config(argv)
        if cfg.command in NEEDS_MODEL:
            cfg.graph = load_graph(cfg.args)
            cfg.params, cfg.beta_mode = resolve_params(cfg.args, cfg.graph)
        return COMMANDS[cfg.command](cfg)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    except UsageError as exc:
        print(f"sisbounds: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"sisbounds: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceGuardError as exc:
        print(f"sisbounds: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConvergenceError, DecayFitError) as exc:
        print(f"sisbounds: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"sisbounds: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
