"""Command line front end: ``fkslab <subcommand> --config run.ini``.

The configuration is an INI file with the sections ``[model]``, ``[geometry]``,
``[experiment]`` and ``[output]``.  Unknown sections or keys are errors; every
default that gets applied is logged.  Output CSV files start with a comment row
holding the run hash and the master seed, and are written atomically.

Exit codes: 0 success, 1 experiment-level failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import (BaseWindow, CouplingJ, FiberGraph, GeometryError, RectRegion,
                       build_long_range, build_slab, builtin_fiber, builtin_graph)

log = logging.getLogger("fkslab")

SUBCOMMANDS = ("sample", "crossing", "scan-pc", "decay", "sharpness", "potts", "gluing-demo",
               "verify-exact", "hamming")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    """The configuration is malformed or violates a constraint."""


# --------------------------------------------------------------------------
# schema


def _floats(text: str) -> list[float]:
    """Comma list of numbers, or ``start:stop:step`` (inclusive stop)."""
    text = text.strip()
    if ":" in text:
        a, b, s = (float(t) for t in text.split(":"))
        if s <= 0:
            raise ValueError("range step must be positive")
        k = int(math.floor((b - a) / s + 1e-9))
        return [round(a + i * s, 12) for i in range(k + 1)]
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValueError("expected integers")
    return [int(v) for v in vals]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_int(text: str):
    return None if text.strip().lower() in ("", "none", "default") else int(text)


def _opt_float(text: str):
    return None if text.strip().lower() in ("", "none") else float(text)


def _rects(text: str) -> list[tuple[int, int, int, int]]:
    """Semicolon list of ``a,b,c,d`` rectangles."""
    out = []
    for part in text.split(";"):
        if part.strip():
            vals = [int(t) for t in part.split(",")]
            if len(vals) != 4:
                raise ValueError(f"rectangle {part!r} needs four integers a,b,c,d")
            out.append(tuple(vals))
    return out


# section -> key -> (parser, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "model": {
        "q": (float, 1.0),
        "p": (float, 0.5),
        "beta": (_opt_float, None),
        "boundary": (str, "free"),
        "sampler": (str, "auto"),
        "burn_in": (_opt_int, None),
        "thin": (int, 1),
    },
    "geometry": {
        "fiber": (str, "trivial"),
        "fiber_file": (str, ""),
        "graph": (str, ""),
        "width": (int, 8),
        "height": (int, 8),
        "n": (_ints, [8, 16]),
        "aspect": (_ints, [2, 1]),
        "direction": (str, "horizontal"),
        "rects": (_rects, [(0, 2, 0, 1)]),
        "coupling": (str, ""),
        "x": (int, 0),
        "y": (int, -1),
    },
    "experiment": {
        "seed": (_opt_int, None),
        "samples": (int, 4000),
        "ps": (_floats, [0.4, 0.5, 0.6]),
        "delta": (float, 1.0),
        "offset": (float, 0.1),
        "tolerance": (float, 0.004),
        "target_half_width": (_opt_float, None),
        "max_samples": (_opt_int, None),
        "margin": (int, 0),
        "families": (_bool, True),
        "keep_log": (_bool, True),
    },
    "output": {
        "dir": (str, "out"),
        "csv": (str, ""),
        "plot": (_bool, False),
        "checkpoint": (str, ""),
    },
}


@dataclass
class RunConfig:
    subcommand: str
    model: dict
    geometry: dict
    experiment: dict
    output: dict
    seed: int
    threads: int = 1
    defaults_applied: list = field(default_factory=list)

    def identity(self) -> dict:
        return {"subcommand": self.subcommand, "model": self.model, "geometry": self.geometry,
                "experiment": self.experiment, "seed": self.seed, "version": __version__}

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    # typed accessors
    def fiber(self) -> FiberGraph:
        g = self.geometry
        if g["fiber_file"]:
            return FiberGraph.load(g["fiber_file"])
        return builtin_fiber(g["fiber"])


def _validate(section: str, key: str, value):
    bad = None
    if section == "model":
        if key == "q" and not value >= 1:
            bad = "q must be ≥ 1"
        elif key == "p" and not 0 <= value <= 1:
            bad = "p must lie in [0, 1]"
        elif key == "beta" and value is not None and value < 0:
            bad = "beta must be >= 0"
        elif key == "boundary" and value not in ("free", "wired"):
            bad = "boundary must be free or wired"
        elif key == "sampler" and value not in ("auto", "heat-bath", "swendsen-wang",
                                                "independent"):
            bad = "sampler must be auto, heat-bath, swendsen-wang or independent"
        elif key == "burn_in" and value is not None and value < 0:
            bad = "burn_in must be >= 0"
        elif key == "thin" and value < 1:
            bad = "thin must be >= 1"
    elif section == "geometry":
        if key in ("width", "height") and value < 1:
            bad = f"{key} must be >= 1"
        elif key == "n" and (not value or min(value) < 1):
            bad = "n values must be >= 1"
        elif key == "direction" and value not in ("horizontal", "vertical", "h", "v"):
            bad = "direction must be horizontal or vertical"
        elif key == "aspect" and (len(value) != 2 or min(value) < 1):
            bad = "aspect must be two positive integers"
    elif section == "experiment":
        if key == "samples" and value < 1:
            bad = "samples must be >= 1"
        elif key == "ps" and (not value or min(value) < 0 or max(value) > 1):
            bad = "ps values must lie in [0, 1]"
        elif key == "tolerance" and value <= 0:
            bad = "tolerance must be > 0"
        elif key == "seed" and value is not None and not 0 <= value < 2 ** 64:
            bad = "seed must be an unsigned 64-bit integer"
    if bad:
        raise ConfigError(f"[{section}] {key}: {bad}")


def parse_config(text: str, subcommand: str = "sample", seed: int | None = None,
                 threads: int = 1, env: dict | None = None) -> RunConfig:
    """Validate INI text against the schema and apply defaults (each one logged)."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from None
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]; expected one of {sorted(SCHEMA)}")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]; allowed: "
                                  f"{sorted(SCHEMA[sec])}")
    resolved: dict[str, dict] = {}
    defaults = []
    for sec, keys in SCHEMA.items():
        resolved[sec] = {}
        for key, (parse, default) in keys.items():
            if cp.has_option(sec, key):
                raw = cp[sec][key]
                try:
                    val = parse(raw)
                except (ValueError, TypeError) as exc:
                    raise ConfigError(f"[{sec}] {key}: cannot parse {raw!r}: {exc}") from None
            else:
                val = default
                defaults.append(f"[{sec}] {key} = {default!r}")
            _validate(sec, key, val)
            resolved[sec][key] = val
    env = os.environ if env is None else env
    cfg_seed = resolved["experiment"]["seed"]
    if seed is not None:
        master = int(seed)
    elif cfg_seed is not None:
        master = int(cfg_seed)
        if "RC_SEED" in env:
            log.info("RC_SEED is ignored: the configuration sets seed = %d", cfg_seed)
    elif "RC_SEED" in env:
        try:
            master = int(env["RC_SEED"])
        except ValueError:
            raise ConfigError(f"RC_SEED must be an integer, got {env['RC_SEED']!r}") from None
    else:
        master = 0
        defaults.append("master seed = 0")
    if not 0 <= master < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    for d in defaults:
        log.info("default applied: %s", d)
    cfg = RunConfig(subcommand, resolved["model"], resolved["geometry"],
                    resolved["experiment"], resolved["output"], master, threads, defaults)
    _check_geometry(cfg)
    return cfg


def _check_geometry(cfg: RunConfig):
    g = cfg.geometry
    try:
        cfg.fiber()
    except GeometryError as exc:
        key = "fiber_file" if g["fiber_file"] else "fiber"
        raise ConfigError(f"[geometry] {key}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"[geometry] fiber_file: {exc}") from None
    if g["graph"]:
        try:
            builtin_graph(g["graph"])
        except GeometryError as exc:
            raise ConfigError(f"[geometry] graph: {exc}") from None
    if g["coupling"]:
        try:
            _coupling(g["coupling"])
        except (GeometryError, ValueError) as exc:
            raise ConfigError(f"[geometry] coupling: {exc}") from None
    for r in g["rects"]:
        try:
            RectRegion(*r)
        except GeometryError as exc:
            raise ConfigError(f"[geometry] rects: {exc}") from None


def _coupling(text: str) -> CouplingJ:
    """Radial coupling ``r:J`` pairs, e.g. ``1:1.0, 2:0.25``."""
    vals = {}
    for part in text.split(","):
        r, J = part.split(":")
        vals[int(r)] = float(J)
    return CouplingJ.radial(vals)


# --------------------------------------------------------------------------
# output


def atomic_write(path: Path, data: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render_csv(cfg: RunConfig, header, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg.config_hash} seed={cfg.seed} subcommand={cfg.subcommand} "
              f"version={__version__}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


@dataclass
class Outputs:
    files: dict = field(default_factory=dict)     # name -> text
    plots: list = field(default_factory=list)     # (name, callable(path))
    ok: bool = True
    summary: list = field(default_factory=list)


# --------------------------------------------------------------------------
# subcommands


def _params(cfg: RunConfig, p=None):
    from .measure_oracle import ModelParams
    m = cfg.model
    return ModelParams(m["p"] if p is None else p, m["q"], m["boundary"])


def _sampling(cfg: RunConfig) -> dict:
    return {"sampler": cfg.model["sampler"], "burn_in": cfg.model["burn_in"],
            "thin": cfg.model["thin"]}


def _records_csv(cfg: RunConfig, records) -> str:
    from .experiments import CSV_FIELDS
    return render_csv(cfg, CSV_FIELDS, [r.row() for r in records])


def _graph_for_sampling(cfg: RunConfig):
    g = cfg.geometry
    if g["graph"]:
        return builtin_graph(g["graph"])
    if g["coupling"]:
        return build_long_range(BaseWindow(0, g["width"] - 1, 0, g["height"] - 1),
                                _coupling(g["coupling"]))
    return build_slab(BaseWindow(0, g["width"] - 1, 0, g["height"] - 1), cfg.fiber())


def cmd_sample(cfg: RunConfig) -> Outputs:
    from .dynamics import ChainState, advance, resolve_sampler, save_checkpoint
    from .experiments import ExperimentRecord, _summarise
    from .measure_oracle import ModelParams
    from . import _kernels as K
    graph = _graph_for_sampling(cfg)
    m = cfg.model
    if m["beta"] is not None and hasattr(graph, "edge_probabilities"):
        params = ModelParams.long_range(graph, m["beta"], m["q"], m["boundary"])
    else:
        params = _params(cfg)
    s = resolve_sampler(m["sampler"], params.q)
    st = ChainState.new(graph, params, cfg.seed)
    from .experiments import _burn
    advance(st, s, _burn(s, m["burn_in"]))
    n = cfg.experiment["samples"]
    dens = np.empty(n)
    clusters = np.empty(n)
    for i in range(n):
        advance(st, s, m["thin"])
        dens[i] = st.omega.mean() if graph.n_edges else 0.0
        clusters[i] = K.count_clusters(graph.n_vertices, graph.eu, graph.ev, st.omega,
                                       graph.boundary_mask, params.wired)
    recs = []
    p_val = float(params.p) if params.is_uniform else math.nan
    for name, vals in (("open_fraction", dens), ("clusters", clusters)):
        r = _summarise(vals, s, False, name)
        recs.append(ExperimentRecord("sample", float(params.q), p_val,
                                     m["beta"] if m["beta"] is not None else math.nan, 0,
                                     graph.name, params.boundary, "", name,
                                     float(vals.sum()), n, r.mean, r.ci_lo, r.ci_hi, cfg.seed,
                                     r.stderr, r.ess))
    out = Outputs({"sample.csv": _records_csv(cfg, recs)})
    if cfg.output["checkpoint"]:
        out.summary.append(("checkpoint", cfg.output["checkpoint"], st))
    return out


def cmd_crossing(cfg: RunConfig) -> Outputs:
    from .experiments import CrossingCurveSpec, crossing_curve, monotone_within_bands
    g, e = cfg.geometry, cfg.experiment
    spec = CrossingCurveSpec(cfg.model["q"], cfg.fiber(), g["n"], e["ps"], cfg.model["boundary"],
                             tuple(g["aspect"]), g["direction"], e["samples"], cfg.seed,
                             margin=e["margin"], target_half_width=e["target_half_width"],
                             max_samples=e["max_samples"], **_sampling(cfg))
    recs = crossing_curve(spec, cfg.threads)
    out = Outputs({"crossing.csv": _records_csv(cfg, recs)})
    if not monotone_within_bands(recs):
        log.warning("crossing curve is not monotone within 3 joint standard errors")
    out.plots.append(("crossing.svg", lambda path: _plot_curves(recs, path)))
    return out


def cmd_scan(cfg: RunConfig) -> Outputs:
    from .experiments import ExperimentRecord, scan_pc
    g, e = cfg.geometry, cfg.experiment
    res = scan_pc(cfg.model["q"], cfg.fiber(), g["n"], e["tolerance"], e["samples"], cfg.seed,
                  **_sampling(cfg))
    recs = res.records(cfg.seed)
    for n, ph in res.per_n.items():
        recs.append(ExperimentRecord("scan-pc", res.q, ph, math.nan, n, res.fiber_id, "",
                                     "horizontal", "p_half", 0, 0, ph, ph, ph, cfg.seed))
    recs.append(ExperimentRecord("scan-pc", res.q, res.p_hat, math.nan, max(g["n"]), res.fiber_id,
                                 "", "horizontal", "p_hat", 0, 0, res.p_hat, res.ci_lo, res.ci_hi,
                                 cfg.seed))
    out = Outputs({"scan-pc.csv": _records_csv(cfg, recs)})
    out.plots.append(("scan-pc.svg", lambda path: _plot_scan(res, path)))
    log.info("p_hat = %.4f  [%.4f, %.4f]", res.p_hat, res.ci_lo, res.ci_hi)
    return out


def cmd_decay(cfg: RunConfig) -> Outputs:
    from .experiments import ExperimentRecord, decay_rate
    g, e = cfg.geometry, cfg.experiment
    fit = decay_rate(cfg.model["p"], cfg.model["q"], cfg.fiber(), g["n"], e["samples"], cfg.seed,
                     cfg.model["boundary"], **_sampling(cfg))
    recs = list(fit.points)
    for name, val in (("decay_slope", fit.slope), ("decay_r2", fit.r2)):
        recs.append(ExperimentRecord("decay", fit.q, fit.p, math.nan, max(g["n"]),
                                     cfg.fiber().name, cfg.model["boundary"], "", name, 0,
                                     e["samples"], val, val, val, cfg.seed))
    out = Outputs({"decay.csv": _records_csv(cfg, recs)})
    out.plots.append(("decay.svg", lambda path: _plot_decay(fit, path)))
    if fit.truncated:
        log.warning("sizes without any hit were dropped from the fit: %s", fit.truncated)
    return out


def cmd_sharpness(cfg: RunConfig) -> Outputs:
    from .experiments import ExperimentRecord, sharp_convergence_check
    g, e = cfg.geometry, cfg.experiment
    tab = sharp_convergence_check(e["ps"], cfg.model["q"], cfg.fiber(), e["delta"], g["n"],
                                  e["samples"], cfg.seed, cfg.model["boundary"],
                                  workers=cfg.threads, **_sampling(cfg))
    recs = [r.record for r in tab.rows]
    for p, ok in tab.verdict.items():
        recs.append(ExperimentRecord("sharpness", cfg.model["q"], p, math.nan, max(g["n"]),
                                     cfg.fiber().name, cfg.model["boundary"], "horizontal",
                                     f"verdict(delta={tab.delta:g})", int(ok), 1, float(ok),
                                     float(ok), float(ok), cfg.seed))
    return Outputs({"sharpness.csv": _records_csv(cfg, recs)})


def cmd_potts(cfg: RunConfig) -> Outputs:
    from .experiments import ExperimentRecord, potts_two_point_mc
    from .measure_oracle import EnumerationCapError, exact_potts_two_point
    m, g, e = cfg.model, cfg.geometry, cfg.experiment
    if m["beta"] is None:
        raise ConfigError("[model] beta is required for potts")
    if m["q"] != int(m["q"]) or m["q"] < 2:
        raise ConfigError("[model] q: potts needs an integer q >= 2")
    graph = _graph_for_sampling(cfg)
    y = g["y"] if g["y"] >= 0 else graph.n_vertices - 1
    rec = potts_two_point_mc(m["beta"], int(m["q"]), graph, g["x"], y, e["samples"], cfg.seed,
                             **_sampling(cfg), boundary=m["boundary"])
    recs = [rec]
    if m["boundary"] == "free":
        try:
            ex = exact_potts_two_point(graph, int(m["q"]), m["beta"], g["x"], y)
            recs.append(ExperimentRecord("potts", m["q"], rec.p, m["beta"], 0, rec.fiber_id,
                                         "free", "", f"exact_spin_correlation", 0, 0, ex, ex, ex,
                                         cfg.seed))
        except EnumerationCapError:
            pass
    return Outputs({"potts.csv": _records_csv(cfg, recs)})


def cmd_gluing(cfg: RunConfig) -> Outputs:
    from .experiments import ExperimentRecord
    from .surgery import GluingInstance, gluing_estimate
    m, g, e = cfg.model, cfg.geometry, cfg.experiment
    recs = []
    logs = []
    for n in g["n"]:
        inst = GluingInstance.standard(n, cfg.fiber(), margin=max(e["margin"], 0))
        est = gluing_estimate(inst, _params(cfg), e["samples"], cfg.seed,
                              m["sampler"], m["burn_in"] if m["burn_in"] is not None else 200,
                              m["thin"], keep_log=e["keep_log"])
        for r in (est.X, est.A, est.B):
            recs.append(ExperimentRecord("gluing-demo", m["q"], m["p"], math.nan, n,
                                         cfg.fiber().name, m["boundary"], "", r.name,
                                         int(round(r.mean * r.n_samples)), r.n_samples, r.mean,
                                         r.ci_lo, r.ci_hi, cfg.seed, r.stderr, r.ess))
        recs.append(ExperimentRecord("gluing-demo", m["q"], m["p"], math.nan, n, cfg.fiber().name,
                                     m["boundary"], "", "c_hat", 0, e["samples"], est.c_hat,
                                     est.c_lo, est.c_hi, cfg.seed))
        recs.append(ExperimentRecord("gluing-demo", m["q"], m["p"], math.nan, n, cfg.fiber().name,
                                     m["boundary"], "", "beta_hat", 0, e["samples"], est.beta_hat,
                                     est.beta_hat, est.beta_hat, cfg.seed))
        logs += [(n,) + row for row in est.log]
    files = {"gluing-demo.csv": _records_csv(cfg, recs)}
    if e["keep_log"]:
        files["gluing-demo-log.csv"] = render_csv(cfg, ("n", "sample", "A", "B", "X", "Y1", "Y2"),
                                                  logs)
    return Outputs(files)


def cmd_verify(cfg: RunConfig) -> Outputs:
    from .measure_oracle import InequalityReport, verify_builtin_suite
    rep = verify_builtin_suite(families=cfg.experiment["families"])
    rows = [r.csv_fields() + [r.detail] for r in rep.rows]
    text = render_csv(cfg, InequalityReport.CSV_HEADER + ("detail",), rows)
    out = Outputs({"verify-exact.csv": text}, ok=rep.ok)
    log.info("%d checks, %d violations", len(rep.rows), len(rep.violations))
    for v in rep.violations:
        log.error("violation: %s", v)
    return out


def cmd_hamming(cfg: RunConfig) -> Outputs:
    from .experiments import hamming_profile
    e = cfg.experiment
    rects = [RectRegion(*r) for r in cfg.geometry["rects"]]
    recs = hamming_profile(cfg.model["p"], cfg.model["q"], cfg.fiber(), rects, e["samples"],
                           cfg.seed, cfg.model["boundary"], **_sampling(cfg))
    return Outputs({"hamming.csv": _records_csv(cfg, recs)})


COMMANDS = {"sample": cmd_sample, "crossing": cmd_crossing, "scan-pc": cmd_scan,
            "decay": cmd_decay, "sharpness": cmd_sharpness, "potts": cmd_potts,
            "gluing-demo": cmd_gluing, "verify-exact": cmd_verify, "hamming": cmd_hamming}


# --------------------------------------------------------------------------
# optional plots


def _svg_figure():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "fkslab"
    return plt


def _plot_curves(recs, path):
    plt = _svg_figure()
    fig, ax = plt.subplots()
    for n in sorted({r.n for r in recs}):
        rs = sorted((r for r in recs if r.n == n), key=lambda r: r.p)
        ax.errorbar([r.p for r in rs], [r.mean for r in rs],
                    yerr=[[r.mean - r.ci_lo for r in rs], [r.ci_hi - r.mean for r in rs]],
                    label=f"n={n}", capsize=2)
    ax.set_xlabel("p")
    ax.set_ylabel("crossing probability")
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_scan(res, path):
    plt = _svg_figure()
    fig, ax = plt.subplots()
    ns = list(res.per_n)
    ax.plot(ns, [res.per_n[n] for n in ns], "o-")
    ax.axhspan(res.ci_lo, res.ci_hi, alpha=0.2)
    ax.set_xscale("log")
    ax.set_xlabel("n")
    ax.set_ylabel("half-point of C_h(n+1, n)")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_decay(fit, path):
    plt = _svg_figure()
    fig, ax = plt.subplots()
    pts = [r for r in fit.points if r.hits > 0]
    ax.plot([r.n for r in pts], [-math.log(r.mean) for r in pts], "o")
    if math.isfinite(fit.slope):
        xs = np.array([r.n for r in pts], dtype=float)
        ax.plot(xs, fit.slope * xs + fit.intercept, "-", label=f"slope {fit.slope:.4f}")
        ax.legend()
    ax.set_xlabel("n")
    ax.set_ylabel("-log P(0 <-> boundary)")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --------------------------------------------------------------------------
# entry points


def run(cfg: RunConfig, out_dir: Path | None = None, plot: bool = False) -> int:
    """Dispatch the subcommand and write its outputs; returns the exit code."""
    out_dir = Path(out_dir or cfg.output["dir"])
    try:
        res = COMMANDS[cfg.subcommand](cfg)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (GeometryError, ValueError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except Exception as exc:  # experiment-level failure
        log.error("%s failed: %s", cfg.subcommand, exc)
        return EXIT_FAILURE
    for name, text in res.files.items():
        if cfg.output["csv"] and len(res.files) == 1:
            name = cfg.output["csv"]
        atomic_write(out_dir / name, text)
        log.info("wrote %s", out_dir / name)
    for tag, path, state in (s for s in res.summary if s[0] == "checkpoint"):
        from .dynamics import save_checkpoint
        save_checkpoint(state, out_dir / path)
    if plot or cfg.output["plot"]:
        for name, draw in res.plots:
            try:
                draw(out_dir / name)
            except ImportError:
                log.warning("matplotlib is not installed; skipping %s", name)
    return EXIT_OK if res.ok else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fkslab", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="INI configuration file")
    ap.add_argument("--seed", type=int, help="master seed (overrides config and RC_SEED)")
    ap.add_argument("--threads", type=int, default=1, help="worker processes")
    ap.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
    ap.add_argument("--plot", action="store_true", help="also write SVG plots")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        log.error("cannot read configuration: %s", exc)
        return EXIT_CONFIG
    if args.threads < 1:
        log.error("--threads must be >= 1")
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, args.subcommand, args.seed, args.threads)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    return run(cfg, args.out, args.plot)


if __name__ == "__main__":
    sys.exit(main())
