"""Command-line front end.

Subcommands:

* ``simulate-ttp``   – run schemes under the average-power objective
* ``simulate-ppap``  – run schemes under the peak-antenna-power objective
* ``verify-sep``     – Monte Carlo check that shaped frames meet SEP targets
* ``check-theory``   – randomized self-checks of the closed-form results
* ``dump-frame``     – write one trial's matrices in long CSV form

Exit codes: 0 success, 1 a verification failed, 2 bad usage or config.
Config files are flat ``key = value`` lines (# comments); command-line flags
override file values.
"""

import argparse
import sys

import numpy as np

from .analysis import (
    box_qp_lower_bound,
    phase_rotation_spectrum_deviation,
    power_ratio_lower_bound,
    spacing_optimality_check,
    zf_ttp_closed_form,
)
from .harness import (
    ExperimentConfig,
    draw_channel,
    draw_symbols,
    emit_csv,
    run_experiment,
    to_db,
    verify_sep,
)
from .precoders import PPAP_SCHEMES, TTP_SCHEMES, run_scheme
from .signal_model import (
    make_constellation,
    make_sep_spec,
    margins_for_frame,
)

_CONFIG_KEYS = {
    "n": int, "k": int, "t": int, "trials": int, "l": int,
    "eps": float, "sigma_v2": float, "schemes": str, "objective": str,
    "seed": int, "out": str, "workers": int, "candidate_budget": int,
}


def load_config(path):
    """Parse a flat key = value config file into a dict."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError("%s:%d: expected key = value" % (path, lineno))
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ValueError("%s:%d: unknown key %r" % (path, lineno, key))
            out[key] = _CONFIG_KEYS[key](val)
    return out


def _add_common(p):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--scheme", action="append", default=None,
                   help="scheme key (repeatable or comma-separated)")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--t", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--l", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--candidate-budget", type=int, default=None,
                   dest="candidate_budget")


def build_parser():
    ap = argparse.ArgumentParser(prog="slprecode")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("simulate-ttp", "average-power simulations"),
        ("simulate-ppap", "peak-antenna-power simulations"),
        ("verify-sep", "Monte Carlo SEP verification"),
        ("dump-frame", "dump one trial's matrices as CSV"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        if name.startswith("simulate"):
            p.add_argument("--verify-sep", action="store_true",
                           dest="verify_sep_flag",
                           help="also Monte Carlo check the SEP targets")
    p = sub.add_parser("check-theory", help="randomized theory self-checks")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--l", type=int, default=None)
    return ap


def config_from_args(args, objective):
    fields = {}
    if getattr(args, "config", None):
        fields.update(load_config(args.config))
    for key in _CONFIG_KEYS:
        if key == "schemes":
            continue
        val = getattr(args, key, None)
        if val is not None:
            fields[key] = val
    if getattr(args, "scheme", None):
        parts = []
        for item in args.scheme:
            parts.extend(s.strip() for s in item.split(",") if s.strip())
        fields["schemes"] = tuple(parts)
    fields["objective"] = objective
    cfg = ExperimentConfig(**fields)
    allowed = TTP_SCHEMES if objective == "ttp" else PPAP_SCHEMES
    for s in cfg.schemes:
        if s not in allowed:
            raise ValueError("scheme %r not defined for objective %r"
                             % (s, objective))
    return cfg


def _cmd_simulate(args, objective):
    cfg = config_from_args(args, objective)
    results = run_experiment(cfg)
    text = emit_csv(cfg, results)
    if not cfg.out:
        sys.stdout.write(text)
    for s in cfg.schemes:
        vals = [r[s]["objective"] for r in results]
        print("# %s: mean %s = %.6g (%.3f dB over %d trials)"
              % (s, objective, np.mean(vals), to_db(np.mean(vals)),
                 cfg.trials), file=sys.stderr)
    if getattr(args, "verify_sep_flag", False):
        report, _ = verify_sep(cfg)
        bad = [s for s, r in report.items() if not r["ok"] and not r["exempt"]]
        for s, r in report.items():
            print("# sep %s: worst excess %.3g (%s)"
                  % (s, r["worst_excess"],
                     "exempt" if r["exempt"] else ("ok" if r["ok"] else "VIOLATED")),
                  file=sys.stderr)
        if bad:
            return 1
    return 0


def _cmd_verify_sep(args):
    cfg = config_from_args(args, "ttp")
    report, results = verify_sep(cfg)
    emit_csv(cfg, results)
    code = 0
    for s, r in report.items():
        status = "exempt" if r["exempt"] else ("ok" if r["ok"] else "VIOLATED")
        print("%s: worst excess %.6g (%s)" % (s, r["worst_excess"], status))
        if not r["ok"] and not r["exempt"]:
            code = 1
    return code


def _cmd_check_theory(args):
    trials = args.trials if args.trials is not None else 50
    seed = args.seed if args.seed is not None else 0
    k = args.k if args.k is not None else 4
    l = args.l if args.l is not None else 4
    rng = np.random.default_rng(seed)
    failures = []

    # power-ratio bound: monotone in L, zero at the smallest constellation
    ratios = [power_ratio_lower_bound(L, k, 4.0, 1.0) for L in range(2, 33)]
    if abs(ratios[0]) > 1e-15 or np.any(np.diff(ratios) <= 0.0):
        failures.append("power-ratio bound not monotone from zero")

    cons = make_constellation(l)
    for i in range(trials):
        ch = draw_channel(rng, k, k + 2)
        sep = make_sep_spec(10 ** rng.uniform(-4, -1), K=k)
        # spectrum invariance under random phases
        phi = np.exp(2j * np.pi * rng.uniform(size=k))
        dev = phase_rotation_spectrum_deviation(ch.R, phi, beta=rng.uniform(0.1, 10.0))
        if dev > 1e-8:
            failures.append("spectrum deviation %.3g at instance %d" % (dev, i))
        # box-QP bound never exceeds a feasible value
        S = draw_symbols(rng, cons, k, 1)
        b = (sep.alpha * (np.real(S[:, 0]) + 1j * np.imag(S[:, 0])))
        c = np.full(k, 0.3 * float(sep.alpha[0]))
        bound = box_qp_lower_bound(ch.R, b, c, beta=rng.uniform(0.05, 5.0))
        feasible = float(np.real(np.vdot(b, ch.R @ b)))
        if bound > feasible + 1e-9:
            failures.append("box bound above feasible value at instance %d" % i)
        # spacing floor optimality on a random strand instance
        margins = margins_for_frame(S, sep, cons)
        floor = float(sep.alpha[0])
        d_star, _ = spacing_optimality_check(
            floor, np.real(S[0:1, 0]), margins.lo[0, :1], margins.hi[0, :1],
            margins.lo_bounded[0, :1], margins.hi_bounded[0, :1])
        if abs(d_star - floor) > 1e-9:
            failures.append("spacing minimizer off floor at instance %d" % i)
    # rigid-power closed form on one instance
    ch = draw_channel(rng, k, k + 2)
    sep = make_sep_spec(1e-2, K=k)
    val = zf_ttp_closed_form(sep, cons, ch.R)
    if not np.isfinite(val) or val <= 0.0:
        failures.append("rigid-power closed form not positive")
    for msg in failures:
        print("FAIL:", msg)
    if not failures:
        print("all theory checks passed (%d randomized instances)" % trials)
    return 1 if failures else 0


def _cmd_dump_frame(args):
    cfg = config_from_args(args, "ttp")
    if len(cfg.schemes) != 1:
        raise ValueError("dump-frame wants exactly one scheme")
    child = np.random.SeedSequence(cfg.seed).spawn(1)[0]
    rng = np.random.default_rng(child.spawn(2)[0])
    cons = make_constellation(cfg.l)
    sep = make_sep_spec(cfg.eps, K=cfg.k, sigma_v2=cfg.sigma_v2)
    ch = draw_channel(rng, cfg.k, cfg.n)
    S = draw_symbols(rng, cons, cfg.k, cfg.t)
    res = run_scheme(cfg.schemes[0], ch, S, sep, cons,
                     objective=cfg.objective, cfg=cfg.solver,
                     candidate_budget=cfg.candidate_budget)
    lines = ["matrix,row,col,re,im"]

    def emit(name, M):
        M = np.atleast_2d(np.asarray(M, dtype=complex))
        for r in range(M.shape[0]):
            for c in range(M.shape[1]):
                lines.append("%s,%d,%d,%.17g,%.17g"
                             % (name, r, c, M[r, c].real, M[r, c].imag))

    emit("H", ch.H)
    emit("S", S)
    emit("X", res.X)
    emit("d", res.shaping.d[None, :])
    emit("phi", res.shaping.phi[None, :])
    emit("U", res.shaping.U)
    emit("Z", res.shaping.Z)
    emit("Gamma", res.shaping.Gamma)
    text = "\n".join(lines) + "\n"
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print("# %s %s objective %.9g residual %.3g"
          % (res.scheme, res.objective, res.objective_value, res.residual),
          file=sys.stderr)
    return 0


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "simulate-ttp":
            return _cmd_simulate(args, "ttp")
        if args.command == "simulate-ppap":
            return _cmd_simulate(args, "ppap")
        if args.command == "verify-sep":
            return _cmd_verify_sep(args)
        if args.command == "check-theory":
            return _cmd_check_theory(args)
        if args.command == "dump-frame":
            return _cmd_dump_frame(args)
    except (ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
