"""Command-line entry point: ``design``, ``evaluate``, ``sweep`` and ``check``.

Exit codes: 0 success, 1 internal error, 2 infeasible design, 3 config or
usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import precoding as pc
from .channel import sample_channel
from .config import RunConfig, load_config
from .errors import ConfigError, InfeasibleDesignError, ZeroForcingError
from .model import ChannelRealization, require_valid, sample_inputs, validate_config
from .rng import stream
from .scaling import c_sq_of_snr, db, feasible_mu_min, from_db, scaling_from_mse, snr_of
from .security import (
    SchemeDesign,
    approximation_level,
    isotropic_levels,
    empirical_mse,
    security_level,
)
from .sim import default_plot_path, run_sweep, summarize, write_atomic

log = logging.getLogger("secure_aircomp")

EXIT_OK, EXIT_INTERNAL, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2, 3
FULL_TRIALS = 1_000_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.replace(",", " ").split()]


def _methods(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML config file (defaults give the reference simulation setup)")
    common.add_argument("--out", metavar="PATH", help="output file")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed override")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config key (repeatable)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    design = argparse.ArgumentParser(add_help=False)
    design.add_argument("--mu", type=float, help="MSE requirement at the legitimate receiver")
    design.add_argument("--snr-db", type=float, help="target receive SNR in dB (alternative to --mu)")
    design.add_argument("--h", type=_floats, help="legitimate channel coefficients")
    design.add_argument("--g", type=_floats, help="eavesdropper channel coefficients")
    design.add_argument("--bound-kind", choices=["thm2_closed_form", "improved_monotone"])

    parser = _Parser(prog="secure-aircomp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("design", parents=[common, design], help="design c and the noise precoder")
    p.add_argument("--method", choices=pc.METHODS)

    p = sub.add_parser("evaluate", parents=[common, design], help="closed-form and empirical levels per method")
    p.add_argument("--methods", type=_methods)
    p.add_argument("--draws", type=int, default=20_000, help="empirical MMSE draws (0 disables)")

    p = sub.add_parser("sweep", parents=[common], help="Monte Carlo sweep over SNR")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--methods", type=_methods)
    p.add_argument("--snr-grid-db", type=_floats)
    p.add_argument("--full", action="store_true", help=f"run {FULL_TRIALS:.0e} trials per point")

    p = sub.add_parser("check", parents=[common], help="run structural invariant checks")
    p.add_argument("--mu", type=float)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--precoder", metavar="PATH", help="precoder file to verify")
    return parser


def _load(args) -> RunConfig:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides += [f"sweep.master_seed={args.seed}", f"design.seed={args.seed}"]
    run = load_config(args.config, overrides)
    require_valid(run.system)
    return run


def _channel(run: RunConfig, args) -> tuple[ChannelRealization, bool]:
    """Explicit channel from flags/config, or one sampled from the design seed."""
    h = args.h if getattr(args, "h", None) is not None else run.design.get("h")
    g = args.g if getattr(args, "g", None) is not None else run.design.get("g")
    M = run.system.num_users
    if h is None:
        ch = sample_channel(run.system, run.protocol, stream(int(run.design["seed"]), "design"))
        return ch, True
    if len(h) != M or (g is not None and len(g) != M):
        raise UsageError(f"--h and --g need {M} coefficients")
    if g is None:
        return ChannelRealization.sorted(h, np.zeros(M)), False
    return ChannelRealization.sorted(h, g), True


def _scaling(run: RunConfig, args, h) -> tuple[float, Optional[float]]:
    mu = args.mu if args.mu is not None else run.design.get("mu")
    snr_db = args.snr_db if args.snr_db is not None else run.design.get("snr_db")
    if (mu is None) == (snr_db is None):
        raise UsageError("give exactly one of --mu or --snr-db")
    if mu is not None:
        kind = args.bound_kind or run.design["bound_kind"]
        sd = scaling_from_mse(run.system, h, float(mu), kind)
        if sd.degenerate:
            print("warning: mu = M gives a degenerate design with c = 0 (no information transmitted)")
        return sd.c_sq, float(mu)
    return c_sq_of_snr(run.system, from_db(float(snr_db)), h), None


def cmd_design(args) -> int:
    run = _load(args)
    cfg = run.system
    ch, g_known = _channel(run, args)
    method = args.method or run.design["method"]
    if method == "rre_known_csi" and not g_known:
        raise UsageError("rre_known_csi needs the eavesdropper channel (--g)")
    c_sq, mu = _scaling(run, args, ch.h)
    budget = pc.noise_budget(cfg, ch.h, c_sq)
    precoder = pc.build_precoder(method, ch.h, budget, g=ch.g if g_known else None)
    design = SchemeDesign(config=cfg, c_sq=c_sq, precoder=precoder, channel=ch)

    snr = snr_of(cfg, c_sq)
    print(f"method        {method}")
    print(f"h             {' '.join(f'{v:.6g}' for v in ch.h)}")
    if g_known:
        print(f"g             {' '.join(f'{v:.6g}' for v in ch.g)}")
    if mu is not None:
        print(f"mu            {mu:.6g}")
    print(f"mu floor      {feasible_mu_min(cfg, ch.h):.6g}")
    print(f"c^2           {c_sq:.10g}")
    print(f"SNR           {snr:.6g} ({db(snr):.4f} dB)")
    print(f"predicted D   {approximation_level(design):.10g}")
    if g_known:
        print(f"||Ag||^2      {design.noise_power_at_eve:.10g}")
        print(f"predicted S   {security_level(design):.10g}")
    else:
        print(f"E||Ag||^2     {pc.expected_noise_power_general(precoder.A, cfg.sigma_g):.10g}")
    print(f"d^2           {' '.join(repr(float(v)) for v in precoder.d_sq)}")
    print("user  signal_power  noise_power   total        budget_left")
    noise = precoder.column_norms_sq
    for m in range(cfg.num_users):
        sig = c_sq / ch.h[m] ** 2
        print(f"{m + 1:4d}  {sig:12.6g}  {noise[m]:12.6g}  {sig + noise[m]:12.6g}  {cfg.power_limit - sig - noise[m]:12.6g}")
    print("A =")
    print(pc.format_matrix(precoder.A))
    if args.out:
        write_atomic(args.out, pc.dump_precoder(precoder, ch.h, c_sq))
        log.info("wrote %s", args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    run = _load(args)
    cfg = run.system
    ch, g_known = _channel(run, args)
    if not g_known:
        raise UsageError("evaluate needs the eavesdropper channel (--g) or a sampled channel")
    c_sq, _ = _scaling(run, args, ch.h)
    methods = args.methods or list(run.sweep.methods)
    budget = pc.noise_budget(cfg, ch.h, c_sq)
    rng = stream(int(run.design["seed"]), "inputs")
    print(f"c^2={c_sq:.10g}  SNR={db(snr_of(cfg, c_sq)):.4f} dB")
    print(f"{'method':16} {'D':>12} {'S':>12} {'D_emp':>12} {'S_emp':>12}")
    lines = []
    for method in methods:
        precoder = pc.build_precoder(method, ch.h, budget, g=ch.g)
        design = SchemeDesign(config=cfg, c_sq=c_sq, precoder=precoder, channel=ch)
        d, s = approximation_level(design), security_level(design)
        ed = es = float("nan")
        if args.draws > 0:
            err_y, err_z = empirical_mse(design, sample_inputs(cfg, rng, size=args.draws), rng)
            ed, es = float(np.mean(err_y)), float(np.mean(err_z))
        line = f"{method:16} {d:12.6f} {s:12.6f} {ed:12.6f} {es:12.6f}"
        lines.append(line)
        print(line)
    if args.out:
        write_atomic(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    overrides = list(args.overrides)
    if args.trials is not None:
        overrides.append(f"sweep.trials={args.trials}")
    if args.full:
        overrides.append(f"sweep.trials={FULL_TRIALS}")
    if args.workers is not None:
        overrides.append(f"sweep.workers={args.workers}")
    if args.methods is not None:
        overrides.append("sweep.methods=[" + ", ".join(args.methods) + "]")
    if args.snr_grid_db is not None:
        overrides.append("sweep.snr_grid_db=[" + ", ".join(repr(x) for x in args.snr_grid_db) + "]")
    args.overrides = overrides
    run = _load(args)
    result = run_sweep(run.system, run.protocol, run.sweep, workers=run.workers)
    out = Path(args.out or "sweep.csv")
    print(summarize(result, out, default_plot_path(out)))
    print(f"wrote {out} and {default_plot_path(out)}")
    return EXIT_OK


def _run_checks(run: RunConfig, args) -> list[tuple[str, bool, str]]:
    cfg = run.system
    results = []
    problems = validate_config(cfg)
    results.append(("config", not problems, "; ".join(problems)))
    rng = stream(int(run.sweep.master_seed), "check")

    mu = args.mu if args.mu is not None else run.design.get("mu")
    if mu is not None:
        if run.protocol.mode == "fixed_weakest":
            h_ref = np.full(cfg.num_users, run.protocol.h1_fixed)
        else:
            h_ref = sample_channel(cfg, run.protocol, rng).h
        try:
            sd = scaling_from_mse(cfg, h_ref, float(mu), run.design["bound_kind"])
            results.append(("feasibility", True, f"mu={mu:g} gives c^2={sd.c_sq:.6g}"))
        except InfeasibleDesignError as exc:
            results.append(("feasibility", False, str(exc)))
    if problems:
        return results

    zf_worst = budget_worst = iso_worst = 0.0
    for _ in range(args.instances):
        ch = sample_channel(cfg, run.protocol, rng)
        c_sq = rng.uniform(0.0, 1.0) * ch.h[0] ** 2 * cfg.power_limit
        budget = pc.noise_budget(cfg, ch.h, c_sq)
        for method in pc.METHODS:
            precoder = pc.build_precoder(method, ch.h, budget, g=ch.g)
            zf_worst = max(zf_worst, pc.zero_forcing_residual(precoder.A, ch.h))
            budget_worst = max(budget_worst, float(np.max(precoder.column_norms_sq - budget.per_user_budget)))
            design = SchemeDesign(config=cfg, c_sq=c_sq, precoder=precoder, channel=ch)
            if cfg.is_isotropic:
                d_c, s_c = isotropic_levels(design)
                d, s = approximation_level(design), security_level(design)
                iso_worst = max(iso_worst, abs(d - d_c) / abs(d), abs(s - s_c) / abs(s))
    results.append(("zero-forcing", zf_worst <= pc.ZF_TOL, f"worst residual {zf_worst:.3e}"))
    results.append(("power budget", budget_worst <= pc.BUDGET_TOL, f"worst excess {budget_worst:.3e}"))
    if cfg.is_isotropic:
        results.append(("isotropic form agreement", iso_worst <= 1e-12, f"worst relative gap {iso_worst:.3e}"))

    if args.precoder:
        precoder, h, c_sq = pc.load_precoder(Path(args.precoder).read_text())
        res = pc.zero_forcing_residual(precoder.A, h)
        results.append(("precoder zero-forcing", res <= pc.ZF_TOL, f"residual {res:.3e}"))
        if c_sq is not None:
            try:
                pc.check_budget(precoder.A, pc.noise_budget(cfg, h, c_sq))
                results.append(("precoder budget", True, ""))
            except InfeasibleDesignError as exc:
                results.append(("precoder budget", False, str(exc)))
    return results


def cmd_check(args) -> int:
    run = load_config(args.config, args.overrides + ([f"sweep.master_seed={args.seed}"] if args.seed is not None else []))
    results = _run_checks(run, args)
    for name, passed, detail in results:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    if args.out:
        write_atomic(args.out, "\n".join(f"{n},{'pass' if p else 'fail'},{d}" for n, p, d in results) + "\n")
    return EXIT_OK if all(p for _, p, _ in results) else EXIT_INFEASIBLE


COMMANDS = {"design": cmd_design, "evaluate": cmd_evaluate, "sweep": cmd_sweep, "check": cmd_check}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InfeasibleDesignError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.floor is not None:
            print(f"smallest feasible mu: {exc.floor:.6g}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ZeroForcingError as exc:
        print(f"zero-forcing violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
