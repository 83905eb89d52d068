"""Command-line entry point: ``gffperc <subcommand> [flags]``.

Exit codes: 0 when the command ran and its checks passed, 1 when a check
failed, 2 on usage errors.  Tables are CSV preceded by ``# key = value``
comment lines holding the effective configuration (strip the ``# `` prefix
to get a config file that reproduces the run).  ``verify`` writes one JSON
line per experiment.
"""
from __future__ import annotations

import argparse
import configparser
import contextlib
import math
import sys

import numpy as np

from . import domains, harness
from .couplings import ScheduleOverflowError, constant_env, env_centered, env_overlay, env_shifted
from .gff import sample_gff
from .graph import GraphError
from .multiscale import build_scales, check_properties, sample_scale_fields
from .percolation import connect, connect_boundary, exact_event, holds, sample_perc
from .walk import capacity, estimate_decay, green_dirichlet

COMMANDS = ("green", "cap", "decay", "gff-sample", "decompose", "env", "percolate", "exact",
            "russo-check", "verify")

# key -> (type, default, help)
PARAMS = {
    "domain": (str, "box3", "domain string or preset name"),
    "seed": (int, 0, "base seed"),
    "samples": (int, 10000, "Monte Carlo budget"),
    "workers": (int, None, f"worker threads (default: ${harness.WORKERS_ENV} or 1)"),
    "out": (str, "-", "output path ('-' for stdout)"),
    "set": (str, "center", "vertex set S"),
    "target": (str, "", "vertex set T (empty: the boundary)"),
    "vertex": (str, "center", "single vertex"),
    "kind": (str, "shifted", "environment kind: shifted, centered, overlay, constant"),
    "q": (float, 0.5, "constant edge parameter"),
    "n": (int, 0, "scale index"),
    "lam": (float, 0.0, "level lambda (inf allowed)"),
    "h": (float, 5.0, "coarse-channel offset h"),
    "alpha": (float, 1.0, "schedule alpha"),
    "n0": (int, 8, "schedule n0"),
    "levels": (int, None, "scale truncation N (default: adaptive)"),
    "n_max": (int, 64, "heat-kernel steps"),
    "summary": (bool, False, "emit moments instead of raw samples"),
    "instances": (int, 100, "random instances"),
    "max_edges": (int, 14, "edge cap for random instances"),
    "delta": (float, 1e-3, "finite-difference step"),
    "nodes": (int, 200, "quadrature nodes per piece"),
    "pairs": (str, "center-a", "vertex pairs 'x-y;x-y'"),
}

CONFIG_SECTIONS = ("domain", "model", "run", "output")


class UsageError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(key: str, text: str):
    typ = PARAMS[key][0]
    if typ is bool:
        return _parse_bool(text)
    if typ is float:
        return float(text)
    return typ(text)


def load_config(path: str) -> dict:
    """Read a flat ``key = value`` file with optional sections; unknown keys are errors."""
    cp = configparser.ConfigParser(default_section="__none__", interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if not text.lstrip().startswith("["):
            text = "[run]\n" + text
        cp.read_string(text)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"--config: {exc}") from None
    out = {}
    for section in cp.sections():
        if section not in CONFIG_SECTIONS:
            raise UsageError(f"--config: unknown section [{section}]")
        for key, val in cp.items(section):
            k = key.replace("-", "_")
            if k not in PARAMS or k == "config":
                raise UsageError(f"--config: unknown key {key!r}")
            try:
                out[k] = _convert(k, val)
            except ValueError as exc:
                raise UsageError(f"--config: bad value for {key}: {exc}") from None
    return out


def _add_flags(p: argparse.ArgumentParser, keys):
    for k in keys:
        typ, _, help_ = PARAMS[k]
        flag = "--" + k.replace("_", "-")
        if typ is bool:
            p.add_argument(flag, dest=k, action="store_const", const=True, default=None, help=help_)
        else:
            p.add_argument(flag, dest=k, type=typ, default=None, help=help_)


COMMON = ("domain", "seed", "samples", "workers", "out")
EXTRA = {
    "green": (),
    "cap": ("set",),
    "decay": ("vertex", "n_max"),
    "gff-sample": ("summary",),
    "decompose": ("levels",),
    "env": ("kind", "q", "n", "lam", "h", "levels"),
    "percolate": ("kind", "q", "set", "target"),
    "exact": ("q", "set", "target"),
    "russo-check": ("instances", "max_edges"),
}
VERIFY_EXTRA = ("set", "target", "vertex", "pairs", "q", "n", "lam", "h", "alpha", "n0", "delta",
                "nodes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gffperc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key = value config file")
        if name == "verify":
            p.add_argument("experiment", choices=sorted(list(harness.EXPERIMENTS) + ["lambda"]))
            _add_flags(p, COMMON + VERIFY_EXTRA)
        else:
            _add_flags(p, COMMON + EXTRA[name])
    return parser


def _resolve(args, keys) -> tuple[dict, dict]:
    """Effective settings (flag > config > default) and the explicitly set subset."""
    cfg = load_config(args.config) if args.config else {}
    unknown = sorted(set(cfg) - set(keys))
    if unknown:
        raise UsageError(f"--config: keys not used by {args.command}: {', '.join(unknown)}")
    out, explicit = {}, {}
    for k in keys:
        val = getattr(args, k, None)
        if val is None and k in cfg:
            val = cfg[k]
        if val is not None:
            explicit[k] = val
        out[k] = PARAMS[k][1] if val is None else val
    if out.get("workers") is None:
        out["workers"] = harness.default_workers()
    return out, explicit


@contextlib.contextmanager
def _open_out(path: str):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def write_csv(path: str, cfg: dict, header, rows):
    with _open_out(path) as fh:
        fh.write("# [run]\n")
        for k in sorted(cfg):
            if k in ("out", "workers") or cfg[k] is None:
                continue
            fh.write(f"# {k} = {_fmt(cfg[k])}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _graph(cfg):
    return domains.parse_domain(cfg["domain"])


def _set(g, cfg, key="set"):
    return domains.parse_set(g, cfg[key], domains.is_glued(cfg["domain"]))


def _event(g, cfg):
    S = _set(g, cfg)
    if cfg.get("target"):
        return connect(S, _set(g, cfg, "target"))
    return connect_boundary(S)


def cmd_green(cfg):
    G = green_dirichlet(_graph(cfg))
    dom = G.domain
    rows = [(int(x), int(y), G.matrix[i, j]) for i, x in enumerate(dom) for j, y in enumerate(dom)]
    write_csv(cfg["out"], cfg, ("x", "y", "green"), rows)
    return 0


def cmd_cap(cfg):
    g = _graph(cfg)
    S = _set(g, cfg)
    res = capacity(g, None, S)
    G = green_dirichlet(g)
    ident = G.submatrix(S) @ res.eq_measure if len(S) else np.zeros(0)
    rows = [(int(x), e, res.cap, r) for x, e, r in zip(S, res.eq_measure, ident)]
    write_csv(cfg["out"], cfg, ("x", "eq_measure", "cap", "identity"), rows)
    return 0 if np.all(np.abs(ident - 1.0) <= 1e-10) else 1


def cmd_decay(cfg):
    g = _graph(cfg)
    x = int(domains.parse_set(g, cfg["vertex"], domains.is_glued(cfg["domain"]))[0])
    fit = estimate_decay(g, x, cfg["n_max"])
    write_csv(cfg["out"], cfg, ("vertex", "slope", "constant", "dimension", "lo", "hi"),
              [(x, fit.slope, fit.constant, fit.dimension, *fit.window)])
    return 0


def cmd_gff_sample(cfg):
    g = _graph(cfg)
    G = green_dirichlet(g)
    psi = sample_gff(G, cfg["seed"], cfg["samples"])
    if cfg["summary"]:
        dom = G.domain
        vals = psi[:, dom]
        rows = [(int(x), vals[:, i].mean(), vals[:, i].var(ddof=1), G.matrix[i, i])
                for i, x in enumerate(dom)]
        write_csv(cfg["out"], cfg, ("x", "mean", "variance", "green"), rows)
    else:
        header = ("sample",) + tuple(f"v{i}" for i in range(g.n_vertices))
        write_csv(cfg["out"], cfg, header, ((k, *row) for k, row in enumerate(psi)))
    return 0


def cmd_decompose(cfg):
    g = _graph(cfg)
    stack = build_scales(g, levels=cfg["levels"])
    rep = check_properties(stack, green_dirichlet(g))
    write_csv(cfg["out"], cfg, ("quantity", "value"), rep.rows())
    return 0 if rep.ok else 1


def _env(g, cfg, seed):
    kind = cfg["kind"]
    if kind == "constant":
        return constant_env(g, cfg["q"])
    if kind in ("shifted", "centered"):
        psi = sample_gff(green_dirichlet(g), seed)
        return (env_shifted if kind == "shifted" else env_centered)(g, psi)
    if kind == "overlay":
        stack = build_scales(g, levels=cfg.get("levels"))
        fields = sample_scale_fields(stack, seed)
        return env_overlay(g, fields, cfg["q"], cfg["n"], cfg["lam"], cfg["h"])
    raise UsageError(f"--kind: unknown environment {kind!r}")


def cmd_env(cfg):
    g = _graph(cfg)
    env = _env(g, cfg, cfg["seed"])
    u, v = g.edges.T
    if cfg["kind"] == "overlay":
        c = env.channels
        rows = [(e, u[e], v[e], *c[e], env.effective[e]) for e in range(g.n_edges)]
        header = ("edge", "u", "v", "plain", "bar", "right", "left", "effective")
    else:
        rows = [(e, u[e], v[e], env.probs[e]) for e in range(g.n_edges)]
        header = ("edge", "u", "v", "probability")
    write_csv(cfg["out"], cfg, header, rows)
    return 0


def cmd_percolate(cfg):
    g = _graph(cfg)
    ev = _event(g, cfg)
    kind = cfg["kind"]
    if kind not in ("constant", "shifted", "centered"):
        raise UsageError("--kind: percolate takes constant, shifted or centered")
    cov = green_dirichlet(g) if kind != "constant" else None

    def fn(rng, size):
        if kind == "constant":
            p = np.full((size, g.n_edges), cfg["q"])
        else:
            psi = sample_gff(cov, rng, size)
            p = (env_shifted if kind == "shifted" else env_centered)(g, psi).probs
        return holds(g, sample_perc(p, rng), ev).astype(float)

    vals = np.concatenate(harness.map_blocks(fn, cfg["samples"], cfg["seed"], cfg["workers"]))
    est = harness.Estimate.from_values(vals, cfg["seed"])
    q = cfg["q"] if kind == "constant" else math.nan
    write_csv(cfg["out"], cfg, ("instance", "q", "probability", "stderr", "n_samples"),
              [(0, q, est.mean, est.stderr, est.n_samples)])
    return 0


def cmd_exact(cfg):
    g = _graph(cfg)
    res = exact_event(g, constant_env(g, cfg["q"]), _event(g, cfg))
    gap = abs(res.derivative_q - res.pivotal_sum)
    write_csv(cfg["out"], cfg, ("instance", "q", "probability", "derivative", "pivotal_sum", "gap"),
              [(0, cfg["q"], res.probability, res.derivative_q, res.pivotal_sum, gap)])
    return 0 if gap <= 1e-10 else 1


def cmd_russo_check(cfg):
    rows = harness.russo_sweep(cfg["instances"], seed=cfg["seed"], max_edges=cfg["max_edges"])
    write_csv(cfg["out"], cfg, ("instance", "q", "probability", "derivative", "pivotal_sum", "gap"),
              rows)
    return 0 if max(r[-1] for r in rows) <= 1e-10 else 1


# flag -> keyword of the experiment function, per experiment
VERIFY_KEYS = {
    "prop21": {"domain": "domain", "set": "S", "target": "T", "samples": "samples"},
    "sgn": {"domain": "domain", "vertex": "x", "samples": "samples"},
    "arcsin": {"domain": "domain", "pairs": "pairs", "samples": "samples"},
    "sign-law": {"domain": "domain", "samples": "samples"},
    "es": {"domain": "domain"},
    "flow": {"domain": "domain", "set": "event", "n": "n", "alpha": "alpha", "n0": "n0", "h": "h",
             "samples": "samples"},
    "lambda": {"domain": "domain", "q": "q", "n": "n", "lam": "lam", "h": "h", "delta": "delta",
               "nodes": "nodes"},
}


def cmd_verify(cfg, explicit, experiment):
    """Run a named experiment; options not given on the command line or in
    the config keep the experiment's own defaults."""
    kwargs = {VERIFY_KEYS[experiment][k]: v for k, v in explicit.items() if k in VERIFY_KEYS[experiment]}
    unused = sorted(set(explicit) - set(VERIFY_KEYS[experiment]) - {"seed", "workers", "out", "samples"})
    if unused:
        raise UsageError(f"options not used by {experiment}: {', '.join('--' + k for k in unused)}")
    if experiment == "es" and "samples" in explicit:
        kwargs["chains"] = max(2, explicit["samples"] // 1000)
    kwargs["seed"] = cfg["seed"]
    if experiment == "lambda":
        rep = harness.verify_lambda(**kwargs)
    else:
        rep = harness.EXPERIMENTS[experiment](workers=cfg["workers"], **kwargs)
    rep["config"] = {k: v for k, v in explicit.items() if k not in ("out", "workers")}
    with _open_out(cfg["out"]) as fh:
        fh.write(harness.report_line(rep) + "\n")
    return 0 if rep["pass"] else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    keys = COMMON + (VERIFY_EXTRA if args.command == "verify" else EXTRA[args.command])
    try:
        cfg, explicit = _resolve(args, keys)
        if cfg["samples"] < 2 and args.command in ("percolate", "verify"):
            raise UsageError("--samples must be at least 2")
        if args.command == "verify":
            return cmd_verify(cfg, explicit, args.experiment)
        return globals()["cmd_" + args.command.replace("-", "_")](cfg)
    except UsageError as exc:
        print(f"gffperc: error: {exc}", file=sys.stderr)
        return 2
    except (GraphError, ScheduleOverflowError, ValueError) as exc:
        print(f"gffperc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
