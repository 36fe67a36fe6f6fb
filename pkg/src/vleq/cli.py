"""Command-line interface.

Subcommands::

    vleq run     [--config FILE] [--seed N] [--ensemble N] [--out PREFIX] [--<field> VALUE ...]
    vleq sweep   [--config FILE] --lengths 9,12,15 [--out FILE]
    vleq predict --formula lms_le --mmse 0.01 --n 11 --sq2 1e-5 --sv2 0.003 --m 23 --mu 0.01
    vleq wiener  --profile model2 --ebno 15 --lengths 5,11,23 [--delays 0-20] [--dfe 6,10]

Every :class:`~vleq.sim.SimulationConfig` field has a matching ``--field-name``
flag that overrides the config file (``--scenario`` takes a JSON list).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import types
import typing
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import wiener
from .channels import load_profile, normalize_power
from .sim import SimulationConfig, run_experiment, sweep_fixed_lengths, write_outputs
from .signals import noise_variance_from_ebno


def _parse_ints(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


_NULL = object()  # "--flag none" on an optional field


def _field_type(f):
    hints = typing.get_type_hints(SimulationConfig)
    tp = hints[f.name]
    args = [a for a in typing.get_args(tp) if a is not type(None)]
    optional = typing.get_origin(tp) in (typing.Union, types.UnionType) and len(args) < len(
        typing.get_args(tp))
    if typing.get_origin(tp) in (typing.Union, types.UnionType) and args:
        tp = args[0]
    if tp is bool:
        conv = lambda s: s.lower() in ("1", "true", "yes", "on")  # noqa: E731
    elif tp in (int, float, str):
        conv = tp
    else:
        conv = json.loads
    if not optional:
        return conv

    def parse(text: str):
        return _NULL if text.lower() in ("none", "null") else conv(text)

    parse.__name__ = getattr(conv, "__name__", "value")
    return parse


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file (SimulationConfig fields)")
    g = p.add_argument_group("config overrides")
    for f in fields(SimulationConfig):
        flag = "--" + f.name.replace("_", "-")
        g.add_argument(flag, dest=f"cfg_{f.name}", type=_field_type(f), default=None,
                       metavar=f.name.upper())


def load_config(args: argparse.Namespace) -> SimulationConfig:
    data = {}
    if args.config is not None:
        data = json.loads(Path(args.config).read_text())
    for f in fields(SimulationConfig):
        v = getattr(args, f"cfg_{f.name}", None)
        if v is not None:
            data[f.name] = None if v is _NULL else v
    return SimulationConfig.from_dict(data)


def cmd_run(args) -> int:
    cfg = load_config(args)
    rec = run_experiment(cfg)
    if args.out:
        csv_path, json_path = write_outputs(rec, args.out)
        print(f"wrote {csv_path} and {json_path}")
    print(json.dumps(rec.summary(), indent=2, sort_keys=True, default=str))
    return 0


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    rows = sweep_fixed_lengths(cfg, _parse_ints(args.lengths))
    text = "length,steady_mse_db\n" + "".join(f"{m},{v:.6f}\n" for m, v in rows)
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


FORMULAS = {
    "lms_le": wiener.predict_mse_lms_le,
    "rls_le": wiener.predict_mse_rls_le,
    "lms_dfe": wiener.predict_mse_lms_dfe,
    "rls_dfe": wiener.predict_mse_rls_dfe,
    "optimum_mu": wiener.optimum_mu,
    "optimum_lambda": wiener.optimum_lambda,
}


def _channel(args):
    if args.taps:
        return normalize_power([float(x) for x in args.taps.split(",")])
    return load_profile(args.profile)


def cmd_predict(args) -> int:
    sv2 = args.sv2 if args.sv2 is not None else noise_variance_from_ebno(args.ebno, args.sd2)
    mmse = args.mmse
    n = args.n
    if mmse is None or n is None:
        c = _channel(args)
        n = n if n is not None else c.n_taps
        if args.nf:
            sys_ = wiener.build_dfe_correlations(c, sv2, args.nf, args.nb, args.delay, args.sd2)
        else:
            sys_ = wiener.build_le_correlations(c, sv2, args.m, args.delay, args.sd2)
        mmse = wiener.wiener_solve(sys_)[1] if mmse is None else mmse
    x = wiener.PredictionInputs(mmse=mmse, n=n, sq2=args.sq2, sv2=sv2, sd2=args.sd2, m=args.m,
                                nf=args.nf, nb=args.nb, mu=args.mu, lam=args.lam)
    value = FORMULAS[args.formula](x)
    out = {"formula": args.formula, "value": value, "mmse": mmse, "sv2": sv2}
    if args.formula not in ("optimum_mu", "optimum_lambda"):
        out["value_db"] = 10 * np.log10(value)
    print(json.dumps(out, indent=2))
    return 0


def cmd_wiener(args) -> int:
    c = _channel(args)
    sv2 = noise_variance_from_ebno(args.ebno)
    lines = ["layout,length,nf,nb,delay,mmse,mmse_db,eigen_spread"]
    delays = _parse_ints(args.delays) if args.delays else None
    if args.dfe:
        nf, nb = (int(v) for v in args.dfe.split(","))
        configs = [("dfe", nf, nb)]
    else:
        configs = [("le", m, 0) for m in _parse_ints(args.lengths)]
    for layout, a, b in configs:
        for d in delays if delays is not None else [a - 1 if layout == "dfe" else a // 2]:
            if layout == "dfe":
                sys_ = wiener.build_dfe_correlations(c, sv2, a, b, d)
            else:
                if d > a + c.n_taps - 2:
                    continue
                sys_ = wiener.build_le_correlations(c, sv2, a, d)
            try:
                _, mm = wiener.wiener_solve(sys_)
                spread = wiener.eigenvalue_spread(sys_.R)
            except np.linalg.LinAlgError:
                mm, spread = float("nan"), float("nan")
            mm_db = 10 * np.log10(mm) if mm > 0 else float("-inf")
            lines.append(f"{layout},{a + b},{a if layout == 'dfe' else 0},{b},{d},"
                         f"{mm:.9g},{mm_db:.4f},{spread:.6g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vleq", description="Variable-length equalizer simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration")
    _add_config_flags(p)
    p.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="steady MSE of fixed-length equalizers")
    _add_config_flags(p)
    p.add_argument("--lengths", required=True, help="e.g. 9,12,15 or 3-30")
    p.add_argument("--out", help="CSV file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("predict", help="steady-state MSE prediction formulas")
    p.add_argument("--formula", choices=sorted(FORMULAS), required=True)
    p.add_argument("--mmse", type=float, help="MMSE; computed from the channel when omitted")
    p.add_argument("--n", type=int, help="channel length (default: profile length)")
    p.add_argument("--profile", default="model2")
    p.add_argument("--taps", help="comma-separated taps instead of --profile")
    p.add_argument("--ebno", type=float, default=15.0)
    p.add_argument("--sv2", type=float, help="noise variance (overrides --ebno)")
    p.add_argument("--sd2", type=float, default=1.0)
    p.add_argument("--sq2", type=float, default=0.0)
    p.add_argument("--m", type=int, default=11)
    p.add_argument("--nf", type=int, default=0)
    p.add_argument("--nb", type=int, default=0)
    p.add_argument("--delay", type=int, default=5)
    p.add_argument("--mu", type=float, default=0.01)
    p.add_argument("--lam", type=float, default=1.0)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("wiener", help="MMSE and eigenvalue-spread tables")
    p.add_argument("--profile", default="model2")
    p.add_argument("--taps", help="comma-separated taps instead of --profile")
    p.add_argument("--ebno", type=float, default=15.0)
    p.add_argument("--lengths", default="11", help="LE lengths, e.g. 5,11,23")
    p.add_argument("--delays", help="delays to tabulate, e.g. 0-10 (default: centre)")
    p.add_argument("--dfe", help="NF,NB for a DFE table instead of LE lengths")
    p.add_argument("--out", help="CSV file")
    p.set_defaults(func=cmd_wiener)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
