"""Command-line entry point ``birkhoff-nlw``.

Every command reads a flat ``key = value`` config (``--config``) plus
``--set key=value`` overrides, writes its artifacts to ``output_dir`` and
a ``<artifact>.meta`` sidecar echoing the whole config. Timestamps live
only in the sidecar so artifact bodies are reproducible byte for byte.

Exit codes: 0 success, 1 other package error, 2 configuration error,
3 near-resonance, 4 integration failure, 5 blow-up.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import io
import logging
import math
import os
import sys

from . import __version__, _backend
from .config import VALID_KEYS, RunConfig, parse_config, serialize_config
from .errors import (
    BirkhoffError,
    BlowUpError,
    ConfigError,
    IntegrationError,
    InvalidArgumentError,
    NearResonanceError,
)

logger = logging.getLogger("birkhoff_nlw")

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_RESONANCE = 3
EXIT_INTEGRATION = 4
EXIT_BLOWUP = 5

COMMANDS = ("expand", "resonance-scan", "normal-form", "verify-nf", "simulate", "drift-study")


def exit_code_for(exc):
    if isinstance(exc, (ConfigError, InvalidArgumentError)):
        return EXIT_CONFIG
    if isinstance(exc, NearResonanceError):
        return EXIT_RESONANCE
    if isinstance(exc, BlowUpError):
        return EXIT_BLOWUP
    if isinstance(exc, IntegrationError):
        return EXIT_INTEGRATION
    return EXIT_OTHER


class _Run:
    """Artifact writer bound to one command invocation."""

    def __init__(self, command, cfg):
        self.command = command
        self.cfg = cfg
        self.started = datetime.datetime.now(datetime.timezone.utc)
        os.makedirs(cfg.output_dir, exist_ok=True)
        self.written = []

    def path(self, name):
        return os.path.join(self.cfg.output_dir, name)

    def write(self, name, text, extra=None):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(text)
        self.write_meta(name, extra)
        self.written.append(self.path(name))

    def write_meta(self, name, extra=None):
        lines = [
            f"command = {self.command}",
            f"artifact = {name}",
            f"version = {__version__}",
            f"backend = {_backend.BACKEND}",
            f"started = {self.started.isoformat()}",
            f"finished = {datetime.datetime.now(datetime.timezone.utc).isoformat()}",
        ]
        lines += [f"{k} = {v}" for k, v in (extra or {}).items()]
        body = "\n".join(lines) + "\n" + serialize_config(self.cfg)
        with open(self.path(name) + ".meta", "w") as fh:
            fh.write(body)


def _expansion(cfg):
    from .polynomial import taylor_expand_nlw

    return taylor_expand_nlw(cfg.nonlinearity(), cfg.K, cfg.r, cfg.m, cfg.d)


def _require_nf_degree(cfg):
    if cfg.r < 3:
        raise ConfigError(f"normal forms need r >= 3, got r = {cfg.r}")


def cmd_expand(cfg, run):
    from .polynomial import dump_polynomial

    P = _expansion(cfg) if cfg.r >= 3 else None
    text = dump_polynomial(P) if P is not None else ""
    run.write("expansion.txt", text, {"terms": len(P) if P is not None else 0})


def cmd_resonance_scan(cfg, run):
    from .resonance import FrequencyModel, fit_alpha_gamma, min_divisor_scan, scan_rows_csv

    model = FrequencyModel(cfg.m, cfg.d)
    results = []
    for cond in cfg.scan_conditions:
        for N in cfg.scan_N:
            results.append(min_divisor_scan(cfg.r, N, model, cond, cfg.high_bound))
    run.write("scan.csv", scan_rows_csv(results), {"rows": len(results)})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["condition", "alpha", "gamma", "gamma_ls", "residual"])
    for cond in cfg.scan_conditions:
        pts = [res for res in results if res.condition == cond and not res.empty]
        if len(pts) < 3:
            continue
        try:
            fit = fit_alpha_gamma(pts)
        except NearResonanceError as exc:
            logger.warning("%s: %s", cond, exc)
            continue
        w.writerow([cond] + ["%.17g" % x for x in (fit.alpha, fit.gamma, fit.gamma_ls, fit.residual)])
    run.write("scan_fit.csv", buf.getvalue())


def _normal_form(cfg):
    from .normal_form import birkhoff_normal_form
    from .resonance import FrequencyModel

    _require_nf_degree(cfg)
    model = FrequencyModel(cfg.m, cfg.d)
    P = _expansion(cfg)
    N = cfg.threshold()
    return P, birkhoff_normal_form(P, model, N, cfg.r, cfg.divisor_floor, K=cfg.K)


def cmd_normal_form(cfg, run):
    from .normal_form import dump_normal_form

    _, res = _normal_form(cfg)
    res.check_invariants()
    run.write("normal_form.txt", dump_normal_form(res), {"N": res.N})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    names = ["Q", "chi", "Z", "S", "P_three"]
    w.writerow(["degree"] + [f"sup_{n}" for n in names] + ["residual"])
    for deg, norms in sorted(res.coeff_log.items()):
        w.writerow([deg] + ["%.17g" % norms[n] for n in names] + ["%.17g" % res.residuals[deg]])
    run.write("normal_form_summary.csv", buf.getvalue(), {"N": res.N})


def cmd_verify_nf(cfg, run):
    from .normal_form import verify_normal_form

    P, res = _normal_form(cfg)
    rep = verify_normal_form(res, P, cfg.radii, cfg.samples, s=cfg.s0, seed=cfg.seed, tol=cfg.flow_tol)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["radius", "max_residual", "flow_constant"])
    for eps, val, c in zip(rep.radii, rep.max_residual, rep.flow_constants):
        w.writerow(["%.17g" % eps, "%.17g" % val, "%.17g" % c])
    w.writerow(["exponent", "%.17g" % rep.exponent, ""])
    run.write("verify.csv", buf.getvalue(), {"N": res.N, "exponent": rep.exponent})


def cmd_simulate(cfg, run):
    from .nlw_sim import Diagnostics, NLWSimulator, run_experiment

    name = "diagnostics.csv"
    tmp = run.path(name)
    classes = Diagnostics(tuple(sorted({int(w) for w in _weights(cfg)})))
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(classes.header)

        def sink(row):
            w.writerow(["%.17g" % x for x in row])

        try:
            summary = run_experiment(cfg, sink=sink, collect=False)
        finally:
            fh.flush()
    run.written.append(tmp)
    run.write_meta(
        name,
        {
            "N": summary.N,
            "T": summary.T,
            "dt_effective": summary.dt,
            "steps": summary.steps,
            "grid_size": summary.grid_size,
            "max_weighted_drift": summary.max_weighted_drift,
        },
    )


def _weights(cfg):
    from .lattice import SpectralState

    return SpectralState.zeros(cfg.d, cfg.K).weights_sq


def cmd_drift_study(cfg, run):
    from .nlw_sim import drift_scaling_study

    res = drift_scaling_study(cfg)
    run.write("drift.csv", res.to_csv(), {"exponent": res.exponent, "degenerate": res.degenerate})


HANDLERS = {
    "expand": cmd_expand,
    "resonance-scan": cmd_resonance_scan,
    "normal-form": cmd_normal_form,
    "verify-nf": cmd_verify_nf,
    "simulate": cmd_simulate,
    "drift-study": cmd_drift_study,
}


def load_config(path=None, overrides=()):
    text = ""
    if path:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    extra = {}
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        extra[key.strip()] = value.strip()
    return parse_config(text, **extra)


def dispatch(command, cfg):
    """Run one command; returns the list of artifact paths written."""
    if command not in HANDLERS:
        raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")
    run = _Run(command, cfg)
    HANDLERS[command](cfg, run)
    return run.written


def build_parser():
    p = argparse.ArgumentParser(
        prog="birkhoff-nlw",
        description="Normal forms, divisor scans and simulations for NLW on the torus.",
        epilog="config keys: " + ", ".join(VALID_KEYS),
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--log-level", default="WARNING", help="python logging level (default WARNING)")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HANDLERS[name].__name__.replace("cmd_", "").replace("_", " "))
        sp.add_argument("-c", "--config", help="key = value config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one key")
        sp.add_argument("-o", "--output-dir", help="shortcut for --set output_dir=DIR")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.set)
    if args.output_dir:
        overrides.append(f"output_dir={args.output_dir}")
    try:
        cfg = load_config(args.config, overrides)
        written = dispatch(args.command, cfg)
    except BirkhoffError as exc:
        code = exit_code_for(exc)
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return code
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
