"""Command-line front end: ``dfrelay <command> [options]``.

Every command reads one INI configuration (packaged defaults when
``--config`` is omitted), applies ``--set section.field=value`` and the
dedicated flags on top, and writes CSV to ``--out`` (or stdout). With
``--out`` a ``<out>.manifest.ini`` holding every resolved parameter is
written next to the CSV; feeding it back with ``--config`` reproduces the
CSV byte for byte.

Exit status: 0 success, 1 usage or configuration error, 2 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import logging
import os
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .channel_model import ChannelModelError, binding_response
from .config import ConfigError, default_config_text, load_config, write_manifest
from .link_analysis import (
    LinkConfigError,
    direct_threshold,
    optimize_thresholds,
    sweep_allocation,
    sweep_kinetics,
    sweep_relay_position,
    two_hop_error,
)
from .numerics import QuadratureError
from .particle_sim import SimConfig, SimConfigError, estimate_psi_mc, simulate_two_hop_ber, simulate_two_hop_trace

logger = logging.getLogger("dfrelay")

THREADS_ENV = "DFRELAY_THREADS"
BREAKDOWN_FIELDS = ("p_s1r0", "p_s0r1", "p_s1r1", "p_s0r0", "p_r1d0", "p_r0d1", "p_r1d1", "p_r0d0")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _num(v) -> str:
    return f"{v:.12g}"


def _mc(v) -> str:
    return f"{v:.6g}"


def _grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:step`` (stop inclusive)."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise UsageError(f"bad grid {text!r}: need start <= stop and step > 0")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [float(round(start + i * step, 12)) for i in range(n)]
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad grid {text!r}: expected 'a,b,c' or 'start:stop:step'") from None
    if not values:
        raise UsageError("grid is empty")
    return values


def _overrides(pairs: Sequence[str]) -> tuple[dict, dict]:
    from .config import _LINK_FIELDS, _SIM_FIELDS

    link, sim = {}, {}
    for item in pairs:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or section not in ("link", "sim"):
            raise UsageError(f"--set expects section.field=value with section link or sim, got {item!r}")
        fields = _LINK_FIELDS if section == "link" else _SIM_FIELDS
        if name not in fields:
            raise UsageError(f"--set: unknown field {section}.{name}")
        try:
            (link if section == "link" else sim)[name] = fields[name](value)
        except ValueError as exc:
            raise UsageError(f"--set {key}: {exc}") from None
    return link, sim


def _resolve(args) -> SimConfig:
    link_kw, sim_kw = _overrides(args.set or [])
    if args.seed is not None:
        sim_kw["seed"] = args.seed
    if args.snapshots is not None:
        sim_kw["snapshots"] = args.snapshots
    threads = args.threads
    if threads is None and os.environ.get(THREADS_ENV):
        try:
            threads = int(os.environ[THREADS_ENV])
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be an integer") from None
    if threads is not None:
        if threads < 1:
            raise UsageError("thread count must be >= 1")
        sim_kw["workers"] = threads
    return load_config(args.config, link_kw, sim_kw)


def _workers(sim: SimConfig) -> int:
    return sim.workers or 1


def _emit(args, sim: SimConfig, header: list[str], rows: list[list[str]], started) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(buf.getvalue())
        write_manifest(args.out + ".manifest.ini", sim, " ".join(args.argv), [args.out], started)
    else:
        sys.stdout.write(buf.getvalue())


def _say(args, text: str) -> None:
    # keep stdout clean for CSV when no --out is given
    print(text, file=sys.stdout if args.out else sys.stderr)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_psi(args, sim: SimConfig, started) -> int:
    if not args.t_min > 0:
        raise UsageError(f"--t-min must be > 0, got {args.t_min}")
    if args.t_max < args.t_min:
        raise UsageError("--t-max must be >= --t-min")
    if args.points < 1:
        raise UsageError("--points must be >= 1")
    link = sim.link
    hop = {"sr": link.hop_sr, "rd": link.hop_rd, "sd": link.hop_sd}[args.hop]
    times = np.linspace(args.t_min, args.t_max, args.points) if args.points > 1 else np.array([args.t_min])
    psi = [binding_response(float(t), hop, link.tol, link.kernel) for t in times]
    header = ["t_s", "psi_analytical"]
    rows = [[_num(t), _num(p)] for t, p in zip(times, psi)]
    if args.mc_validate:
        header += ["psi_mc", "std_err"]
        mc = estimate_psi_mc(hop, [float(t) for t in times], args.molecules, sim.seed, sim)
        outside = 0
        for row, p, (_, p_hat, se) in zip(rows, psi, mc):
            row += [_mc(p_hat), _mc(se)]
            if abs(p_hat - p) > 3 * se:
                outside += 1
        _say(args, f"mc-validate: {len(times) - outside}/{len(times)} points within 3 standard errors")
    _emit(args, sim, header, rows, started)
    return 0


def _breakdown_row(label, pe, ci, br, fmt) -> list[str]:
    lo, hi = ci if ci is not None else ("", "")
    row = [label, fmt(pe), fmt(lo) if lo != "" else "", fmt(hi) if hi != "" else "",
           str(br.tau_r), str(br.tau_d)]
    row += [fmt(getattr(br, f)) for f in BREAKDOWN_FIELDS]
    return row


def cmd_ber(args, sim: SimConfig, started) -> int:
    header = ["mode", "pe", "ci95_low", "ci95_high", "tau_r", "tau_d", *BREAKDOWN_FIELDS, "relay_zero"]
    rows = []
    if args.mode in ("analytical", "both"):
        br = two_hop_error(sim.link)
        p_r0 = sim.link.p1 * br.p_s1r0 + sim.link.p0 * br.p_s0r0
        rows.append(_breakdown_row("analytical", br.pe, None, br, _num) + [_num(p_r0)])
        _say(args, f"analytical: pe = {br.pe:.6g} (tau_R = {br.tau_r}, tau_D = {br.tau_d})")
        sim = sim.replace(link=sim.link.replace(tau_r=br.tau_r, tau_d=br.tau_d))
    if args.mode in ("simulate", "both"):
        est = simulate_two_hop_ber(sim)
        br = est.breakdown
        rows.append(_breakdown_row("simulate", est.pe, est.ci95, br, _mc) + [_mc(br.relay_zero)])
        _say(args, f"simulate: pe = {est.pe:.6g}, 95% CI [{est.ci95[0]:.6g}, {est.ci95[1]:.6g}] "
                   f"over {sim.snapshots} snapshots")
        if args.mode == "both":
            pe_an = float(rows[0][1])
            inside = est.ci95[0] <= pe_an <= est.ci95[1]
            _say(args, f"analytical pe {'inside' if inside else 'OUTSIDE'} the simulated 95% CI")
    _emit(args, sim, header, rows, started)
    return 0


def _sweep_points(args, sim: SimConfig):
    link = sim.link
    workers = _workers(sim)
    if args.axis == "relay-position":
        values = _grid(args.grid or "0.2:0.8:0.1")
        pts = sweep_relay_position(link, values, workers)
        header = ["ratio", "d_sr", "tau_r", "tau_d", "pe"]
        rows = [[_num(p.ratio), _num(p.ratio * link.d_sd), str(p.tau_r), str(p.tau_d), _num(p.pe)]
                for p in pts]
        cfgs = [link.replace(d_sr=p.ratio * link.d_sd, tau_r=p.tau_r, tau_d=p.tau_d) for p in pts]
    elif args.axis == "allocation":
        budget = link.budget if link.budget is not None else link.n_a + link.n_b
        values = _grid(args.grid or f"{budget / 10:g}:{budget * 0.9:g}:{budget / 10:g}")
        pts = sweep_allocation(link, budget, values, workers)
        header = ["n_a", "n_b", "tau_r", "tau_d", "pe"]
        rows = [[_num(p.n_a), _num(p.n_b), str(p.tau_r), str(p.tau_d), _num(p.pe)] for p in pts]
        cfgs = [link.replace(n_a=p.n_a, n_b=p.n_b, budget=budget, tau_r=p.tau_r, tau_d=p.tau_d)
                for p in pts]
    else:
        k_on = _grid(args.k_on or "2000,10000")
        k_off = _grid(args.k_off or "10,100")
        pts = sweep_kinetics(link, k_on, k_off, workers)
        header = ["k_on", "k_off", "tau_r", "tau_d", "pe"]
        rows = [[_num(p.k_on), _num(p.k_off), str(p.tau_r), str(p.tau_d), _num(p.pe)] for p in pts]
        cfgs = [link.replace(kon_r=p.k_on, koff_r=p.k_off, kon_d=p.k_on, koff_d=p.k_off,
                             tau_r=p.tau_r, tau_d=p.tau_d) for p in pts]
    return header, rows, cfgs


def cmd_sweep(args, sim: SimConfig, started) -> int:
    header, rows, cfgs = _sweep_points(args, sim)
    if args.simulate:
        header += ["pe_mc", "ci95_low", "ci95_high"]
        for row, cfg in zip(rows, cfgs):
            est = simulate_two_hop_ber(sim.replace(link=cfg))
            row += [_mc(est.pe), _mc(est.ci95[0]), _mc(est.ci95[1])]
    best = min(range(len(rows)), key=lambda i: float(rows[i][-1 if not args.simulate else -4]))
    _say(args, f"{args.axis}: minimum analytical pe at {header[0]} = {rows[best][0]}")
    _emit(args, sim, header, rows, started)
    return 0


def cmd_compare_direct(args, sim: SimConfig, started) -> int:
    link = sim.link
    if args.budget is not None:
        if args.budget < 0:
            raise UsageError("--budget must be >= 0")
        link = link.replace(n_a=args.budget / 2, n_b=args.budget / 2, budget=args.budget)
    budget = link.budget if link.budget is not None else link.n_a + link.n_b
    tau_r, tau_d, pe_relay = optimize_thresholds(link)
    tau_direct, pe_direct = direct_threshold(link, budget)
    header = ["scheme", "molecules", "tau_r", "tau_d", "pe"]
    rows = [["relay", _num(budget), str(tau_r), str(tau_d), _num(pe_relay)],
            ["direct", _num(budget), "", str(tau_direct), _num(pe_direct)]]
    verdict = "below" if pe_relay < pe_direct else "not below"
    _say(args, f"relay pe = {pe_relay:.6g}, direct pe = {pe_direct:.6g} "
               f"(budget {budget:g}, d_sd = {link.d_sd:g} um): relay is {verdict} direct")
    _emit(args, sim.replace(link=link), header, rows, started)
    return 0


def cmd_trace(args, sim: SimConfig, started) -> int:
    if args.bit not in (0, 1):
        raise UsageError("--bit must be 0 or 1")
    tr = simulate_two_hop_trace(sim, args.bit, args.snapshot)
    rows = [[_mc(t), str(int(a)), str(int(b))]
            for t, a, b in zip(tr.times, tr.complexes_r, tr.complexes_d)]
    _say(args, f"trace: source bits {tr.source_bits}, relay decisions {tr.relay_bits}, "
               f"destination decided {tr.dest_bit}")
    _emit(args, sim, ["time_s", "complexes_R", "complexes_D"], rows, started)
    return 0


def cmd_default_config(args, sim, started) -> int:
    text = default_config_text()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI configuration file (default: packaged defaults)")
    common.add_argument("--out", help="CSV output path (default: stdout); also writes <out>.manifest.ini")
    common.add_argument("--seed", type=int, help="Monte Carlo seed")
    common.add_argument("--snapshots", type=int, help="Monte Carlo snapshot count")
    common.add_argument("--threads", type=int, help=f"worker threads (env {THREADS_ENV})")
    common.add_argument("--set", action="append", metavar="SECTION.FIELD=VALUE",
                        help="override one configuration field, e.g. link.d_sr=12")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="dfrelay", description="Two-hop decode-and-forward molecular link analysis.")
    p.add_argument("--version", action="version", version=f"dfrelay {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("psi", parents=[common], help="cumulative binding response curve")
    s.add_argument("--t-min", type=float, default=0.01)
    s.add_argument("--t-max", type=float, default=2.1)
    s.add_argument("--points", type=int, default=50)
    s.add_argument("--hop", choices=("sr", "rd", "sd"), default="sr")
    s.add_argument("--mc-validate", action="store_true", help="add Monte Carlo estimates")
    s.add_argument("--molecules", type=int, default=10_000)
    s.set_defaults(func=cmd_psi)

    s = sub.add_parser("ber", parents=[common], help="two-hop bit error probability")
    s.add_argument("--mode", choices=("analytical", "simulate", "both"), default="analytical")
    s.set_defaults(func=cmd_ber)

    s = sub.add_parser("sweep", parents=[common], help="error probability over a parameter grid")
    s.add_argument("axis", choices=("relay-position", "allocation", "kon-koff-grid"))
    s.add_argument("--grid", help="ratios or N_A values: 'a,b,c' or 'start:stop:step'")
    s.add_argument("--k-on", help="k_on values for kon-koff-grid")
    s.add_argument("--k-off", help="k_off values for kon-koff-grid")
    s.add_argument("--simulate", action="store_true", help="append Monte Carlo pe and CI per point")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("compare-direct", parents=[common], help="relay vs direct transmission")
    s.add_argument("--budget", type=float, help="total molecules, split evenly between S and R")
    s.set_defaults(func=cmd_compare_direct)

    s = sub.add_parser("trace", parents=[common], help="complex counts of one simulated snapshot")
    s.add_argument("--bit", type=int, default=1, help="source bit in the evaluated slot")
    s.add_argument("--snapshot", type=int, default=0)
    s.set_defaults(func=cmd_trace)

    s = sub.add_parser("default-config", parents=[common], help="print the default configuration")
    s.set_defaults(func=cmd_default_config)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = ["dfrelay", *argv]
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = _dt.datetime.now(_dt.timezone.utc)
    try:
        sim = None if args.func is cmd_default_config else _resolve(args)
        return args.func(args, sim, started)
    except QuadratureError as exc:
        print(f"dfrelay: numerical non-convergence: {exc}", file=sys.stderr)
        return 2
    except (UsageError, ConfigError, LinkConfigError, SimConfigError, ChannelModelError,
            ValueError, OSError) as exc:
        print(f"dfrelay: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
