"""Command-line driver: ``sl2approx <command> --config FILE [--out PATH] [--precision BITS] [--seed N]``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import random
import sys
import warnings
from pathlib import Path

from .cf import check_hypothesis, constants, expand
from .config import ConfigError, ExperimentConfig, load_config
from .embedding import embed_trial
from .errors import EnumerationBudgetExceeded, InsufficientData, NotCoprime, PrecisionInsufficient, UnsupportedRing
from .exponents import (
    OrbitRecord, dirichlet_profile, dirichlet_rescan, exponent_report, fit_slope, omega_K_estimate,
    predicted_bounds, residual_floor_check,
)
from .field import ring
from .inputs import parse_complex, parse_krational
from .matrices import TargetSpec
from .orbit import slope_source, sweep_irrational, sweep_origin, sweep_rational
from .pcomplex import PrecisionPolicy, ctx, with_retry
from .serialize import csv_text, fmt_num, header_lines, kv_text

log = logging.getLogger("sl2approx")

EXIT_OK, EXIT_CONFIG, EXIT_PRECISION, EXIT_BUDGET = 0, 2, 3, 4


# --------------------------------------------------------------------------- helpers


class Run:
    """Parsed config plus the derived ring, sources and header."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.R = ring(cfg.d)
        self.policy = PrecisionPolicy(cfg.precision, cfg.precision_cap)
        try:
            self.consts = constants(self.R)
        except ValueError:
            self.consts = None
        try:
            z1 = parse_complex(cfg.z1 or cfg.z, self.R, f"{cfg.seed}:z1")
            z2 = parse_complex(cfg.z2, self.R, f"{cfg.seed}:z2")
        except (ValueError, TypeError, SyntaxError) as exc:
            raise ConfigError(f"bad z: {exc}") from None
        self.z = (z1, z2)

    def need_consts(self):
        if self.consts is None:
            raise ConfigError(f"growth constants are not declared for d={self.cfg.d}")
        return self.consts

    def header(self, **extra) -> list[str]:
        return header_lines(self.cfg.sha256(), self.consts, self.cfg.digits, extra)

    def fmt(self, x) -> str:
        return fmt_num(x, self.cfg.digits)

    def target(self):
        cfg, R = self.cfg, self.R
        try:
            if cfg.target == "origin":
                return TargetSpec.origin(), None
            y2 = parse_complex(cfg.y2, R, f"{cfg.seed}:y2")
            if cfg.target == "rational":
                a, b = parse_krational(cfg.y, R)
                return TargetSpec.rational(a, b, y2), None
            return TargetSpec.irrational(None, y2), (parse_complex(cfg.y, R, f"{cfg.seed}:y1"), y2)
        except (ValueError, TypeError, SyntaxError) as exc:
            raise ConfigError(f"bad target: {exc}") from None

    def sweep(self):
        cfg, R = self.cfg, self.R
        c = self.need_consts()
        spec, ypair = self.target()
        if cfg.target == "origin":
            s = sweep_origin(self.z, R, cfg.max_terms, self.policy, c)
        elif cfg.target == "rational":
            s = sweep_rational(self.z, spec, R, cfg.max_terms, cfg.omega, self.policy, c)
        else:
            s = sweep_irrational(self.z, ypair, R, cfg.max_terms, cfg.depth_y, cfg.omega, self.policy, c)
        keep = [g for g in s.results if g.k >= cfg.k_min and (not cfg.k_max or g.k <= cfg.k_max)]
        return s, sorted(keep, key=lambda g: (g.k, -1 if g.j is None else g.j))


def _emit(text: str, out: str) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _pair(x) -> list[int]:
    return [x.a, x.b]


# --------------------------------------------------------------------------- commands


def cmd_expand(run: Run) -> str:
    cfg = run.cfg
    exp = expand(slope_source(*run.z), run.R, cfg.max_terms, run.policy)
    c = ctx(exp.prec)
    hyp = check_hypothesis(exp) if exp.depth > 2 else None
    lines = run.header(precision_bits=exp.prec, depth=exp.depth, terminated=exp.terminated,
                       hypothesis_passed="n/a" if hyp is None else hyp.passed)
    for n in range(exp.depth):
        det = exp.p(n) * exp.q(n - 1) - exp.p(n - 1) * exp.q(n)
        rec = {"n": n, "a": _pair(exp.a[n]), "p": _pair(exp.p(n)), "q": _pair(exp.q(n)),
               "det": _pair(det), "abs_q": run.fmt(c.sqrt(exp.q(n).norm())),
               "abs_eps": run.fmt(exp.eps(n).abs_mid())}
        lines.append(json.dumps(rec, separators=(", ", ": ")))
    return "\n".join(lines) + "\n"


ORBIT_COLUMNS = ["class", "d", "k", "j", "height", "err", "predicted_bound", "measured_constant"]


def orbit_rows(run: Run, gammas) -> list[list]:
    c = ctx(run.cfg.precision)
    rows = []
    for g in gammas:
        err = max(x.abs_mid() for x in g.residual)
        rows.append([g.cls, run.cfg.d, g.k, "" if g.j is None else g.j, run.fmt(c.sqrt(g.gamma.height_norm())),
                     run.fmt(err), run.fmt(math.exp(g.predicted_bound)), run.fmt(g.measured_constant)])
    return rows


def cmd_orbit(run: Run) -> str:
    s, gammas = run.sweep()
    if not gammas:
        warnings.warn("no gamma constructed for this configuration", stacklevel=2)
    failed = sum(not all(g.checks.values()) for g in gammas)
    head = run.header(target=run.cfg.target, precision_bits=s.prec, rows=len(gammas), failed_checks=failed)
    return csv_text(head, ORBIT_COLUMNS, orbit_rows(run, gammas))


def _synthetic(slope: float, seed: int) -> list[OrbitRecord]:
    rng = random.Random(seed)
    return [OrbitRecord(i * math.log(2) / 4, -slope * i * math.log(2) / 4 + math.log(rng.uniform(0.5, 2.0)),
                        k=i, tag="synthetic") for i in range(4, 161)]


def cmd_exponent(run: Run) -> tuple[str, str]:
    cfg = run.cfg
    extra = {}
    if cfg.selftest_slope > 0:
        recs, cls = _synthetic(cfg.selftest_slope, cfg.seed), "synthetic"
    else:
        s, gammas = run.sweep()
        recs, cls = [OrbitRecord.from_gamma(g) for g in gammas], cfg.target
        try:
            extra["omega_K_estimate"] = run.fmt(omega_K_estimate(s.exp_z))
        except InsufficientData:
            extra["omega_K_estimate"] = "n/a"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = exponent_report(recs, cfg.window_decades, cfg.t_ratio, cfg.tail_fraction)
    pb = predicted_bounds(1, 1, run.consts) if run.consts else None
    ref = {"origin": pb.origin_mu, "rational": pb.rational_mu_lower, "irrational": pb.irrational_upper,
           "synthetic": cfg.selftest_slope}.get(cls) if pb else cfg.selftest_slope or None
    items = {"class": cls, "records": len(recs), "mu_emp": run.fmt(rep.mu_emp),
             "mu_hat_emp": run.fmt(rep.mu_hat_emp), "fit_slope": run.fmt(rep.mu.fit_slope),
             "fit_residual": run.fmt(rep.mu.fit_residual), "window_decades": cfg.window_decades,
             "window_count": rep.mu.window_count, "t_ratio": cfg.t_ratio, "tail_fraction": cfg.tail_fraction,
             "consistent": rep.consistent, "reference_exponent": "n/a" if ref is None else run.fmt(float(ref)),
             **extra, "warnings": "; ".join(str(w.message) for w in caught) or "none"}
    report = kv_text(run.header(), items)
    rows = [["record", run.fmt(r.log_height), run.fmt(r.log_err)] for r in recs]
    rows += [["per_T", run.fmt(t), run.fmt(b)] for t, b in rep.mu_hat.per_T_best]
    if ref is not None:
        rows += [["reference", run.fmt(t), run.fmt(-float(ref) * t)] for t, _ in rep.mu_hat.per_T_best]
    plot = csv_text(run.header(), ["series", "log_x", "log_y"], rows)
    return report, plot


def cmd_dirichlet(run: Run) -> str:
    cfg = run.cfg
    z = slope_source(*run.z).at(cfg.precision)
    Qs = [2 ** e for e in range(cfg.q_min_exp, cfg.q_max_exp + 1)]
    prof = dirichlet_profile(z, Qs, run.R)
    slope = fit_slope([math.log(r.Q) for r in prof], [math.log(r.err) for r in prof]) \
        if all(r.err > 0 for r in prof) and len(prof) > 1 else math.nan
    rescan = dirichlet_rescan(z, Qs[-1], run.R, cfg.seed)
    head = run.header(fitted_slope=run.fmt(slope), rescan_err=run.fmt(rescan),
                      rescan_agrees=math.isclose(rescan, prof[-1].err, rel_tol=1e-9, abs_tol=1e-15))
    rows = [[r.Q, run.fmt(r.err), str(r.q), str(r.p), run.fmt(r.pigeonhole_bound), r.n_scanned] for r in prof]
    return csv_text(head, ["Q", "err", "q", "p", "pigeonhole_bound", "scanned"], rows)


def cmd_embed_check(run: Run) -> str:
    if run.cfg.d != 1:
        raise UnsupportedRing("embed-check needs d = 1")
    rng = random.Random(run.cfg.seed)
    trials = [embed_trial(rng) for _ in range(run.cfg.trials)]
    items = {"trials": len(trials), "passed": sum(t.passed for t in trials),
             "homomorphism": sum(t.homomorphism for t in trials), "det_one": sum(t.det_one for t in trials),
             "height_comparable": sum(t.height_ok for t in trials),
             "action_compatible": sum(t.compatible for t in trials)}
    return kv_text(run.header(), items)


def cmd_floor_check(run: Run) -> str:
    cfg = run.cfg
    if cfg.target != "rational":
        raise ConfigError("floor-check needs target = rational")
    c = run.need_consts()
    spec, _ = run.target()

    def go(prec):
        exp = expand(slope_source(*run.z), run.R, cfg.max_terms, PrecisionPolicy(prec, cfg.precision_cap))
        zv = (run.z[0].at(exp.prec), run.z[1].at(exp.prec))
        return residual_floor_check(zv, spec, cfg.H, exp, c, cfg.floor_scale, cfg.budget)

    rep = with_retry(go, run.policy)
    head = run.header(H=cfg.H, floor_scale=cfg.floor_scale, matrices=rep.n_matrices, min_err=run.fmt(rep.min_err),
                      argmin=str(rep.argmin), margin=run.fmt(rep.margin), passed=rep.passed)
    rows = [[k, run.fmt(fl), "admissible" if k in rep.admissible else "informational",
             run.fmt(rep.min_err / fl)] for k, fl in sorted(rep.floors.items())]
    return csv_text(head, ["k", "floor", "status", "margin"], rows)


COMMANDS = {"expand": cmd_expand, "orbit": cmd_orbit, "exponent": cmd_exponent, "dirichlet": cmd_dirichlet,
            "embed-check": cmd_embed_check, "floor-check": cmd_floor_check}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sl2approx", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--precision", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, {"precision": args.precision, "seed": args.seed, "out": args.out})
        run = Run(cfg)
        result = COMMANDS[args.command](run)
    except (ConfigError, UnsupportedRing, NotCoprime, InsufficientData) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except PrecisionInsufficient as exc:
        log.error("precision failure: %s", exc)
        return EXIT_PRECISION
    except EnumerationBudgetExceeded as exc:
        log.error("budget exceeded: %s", exc)
        return EXIT_BUDGET
    if isinstance(result, tuple):
        report, plot = result
        _emit(report, cfg.out)
        if cfg.out:
            Path(cfg.out).with_suffix(".plot.csv").write_text(plot)
    else:
        _emit(result, cfg.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
