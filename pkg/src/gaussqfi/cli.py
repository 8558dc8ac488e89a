"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 numerical-consistency failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .crosscheck import GridSpec, format_report, run_crosscheck
from .errors import GaussQfiError, InvalidParameter, NumericalInconsistency
from .fock_oracle import output_density_matrix, qfi_spectral
from .gaussian_state import ChannelConfig, ProductStateParams, mean_photon_input
from .qfi_engine import (
    PrecisionReport,
    delta_phi_bound,
    j_ratio,
    precision_report,
    qfi_closed_form,
    qfi_interferometer,
)
from .sweeps import (
    PARAM_FIELDS,
    SweepSpec,
    gnuplot_stub,
    read_config,
    run_sweep,
    spec_from_mapping,
    write_results,
)
from .variance_bound import unbounded_demo

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3
ORACLE_MAX_N_BAR = 6.0
ORACLE_TOL = 1e-3
ROW_CONSISTENCY_TOL = 1e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from exc


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _fmt(x: float) -> str:
    return format(x, ".12g")


def _merge_config(args: argparse.Namespace, converters: dict[str, Callable[[str], object]]) -> dict[str, str]:
    """Fill unset arguments from ``--config``; returns keys the caller must interpret itself."""
    if not getattr(args, "config", None):
        return {}
    leftover = {}
    for key, raw in read_config(args.config).items():
        dest = key.strip().replace("-", "_")
        if dest in converters:
            if getattr(args, dest, None) in (None, False):
                try:
                    setattr(args, dest, converters[dest](raw))
                except (ValueError, argparse.ArgumentTypeError) as exc:
                    raise UsageError(f"config key {key!r}: {exc}") from exc
        else:
            leftover[dest] = raw
    return leftover


# ---------------------------------------------------------------- qfi

_QFI_KEYS: dict[str, Callable] = {
    "state": str, "n_bar": float, "r": float, "alpha": float, "alpha2": float,
    "eta": float, "eta_a": float, "eta_b": float, "phi": float, "oracle": _bool,
    "route": str, "json": _bool,
    **{name: float for name in PARAM_FIELDS},
}


def _add_qfi(sub) -> None:
    p = sub.add_parser("qfi", help="QFI, gain ratio and phase bound for one configuration")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--dsv", dest="state", action="store_const", const="dsv", help="dual squeezed vacuum")
    kind.add_argument("--dsdv", dest="state", action="store_const", const="dsdv",
                      help="dual squeezed displaced vacuum")
    kind.add_argument("--custom", dest="state", action="store_const", const="custom",
                      help="explicit per-mode parameters (--r-a, --alpha-a, ...)")
    p.add_argument("--nbar", dest="n_bar", type=float, help="total mean photon number (DSV)")
    p.add_argument("--r", type=float, help="squeezing per mode (DSV, DSDV)")
    p.add_argument("--alpha", type=float, help="displacement amplitude per mode (DSDV)")
    p.add_argument("--alpha2", type=float, help="squared displacement per mode (DSDV)")
    for name in PARAM_FIELDS:
        flag = "--" + name.replace("alpha_abs", "alpha").replace("_", "-")
        p.add_argument(flag, dest=name, type=float, help=argparse.SUPPRESS)
    p.add_argument("--eta", type=float, help="transmissivity of both arms (default 1)")
    p.add_argument("--eta-a", type=float)
    p.add_argument("--eta-b", type=float)
    p.add_argument("--phi", type=float, help="phase (default 0)")
    p.add_argument("--route", choices=("auto", "general", "closed-form"), help="evaluation route (default auto)")
    p.add_argument("--oracle", action="store_true", help="also run the Fock-space simulation (N <= 6)")
    p.add_argument("--json", action="store_true", help="print a JSON object")
    p.add_argument("--config", type=Path, help="key = value file with any of the above")
    p.set_defaults(handler=cmd_qfi)


def _qfi_params(args) -> ProductStateParams:
    state = args.state or ("custom" if any(getattr(args, n) is not None for n in PARAM_FIELDS) else None)
    if state == "dsv":
        if (args.n_bar is None) == (args.r is None):
            raise UsageError("--dsv needs exactly one of --nbar or --r")
        return ProductStateParams.dsv(args.r) if args.r is not None else ProductStateParams.dsv(n_bar=args.n_bar)
    if state == "dsdv":
        if args.r is None or (args.alpha is None) == (args.alpha2 is None):
            raise UsageError("--dsdv needs --r and exactly one of --alpha or --alpha2")
        if args.alpha2 is not None and args.alpha2 < 0:
            raise InvalidParameter("alpha2 must be >= 0")
        alpha = args.alpha if args.alpha is not None else math.sqrt(args.alpha2)
        return ProductStateParams.dsdv(alpha, args.r)
    if state == "custom":
        return ProductStateParams(**{n: getattr(args, n) for n in PARAM_FIELDS if getattr(args, n) is not None})
    raise UsageError("choose a state: --dsv, --dsdv or --custom")


def _qfi_channel(args) -> ChannelConfig:
    eta = 1.0 if args.eta is None else args.eta
    eta_a = eta if args.eta_a is None else args.eta_a
    eta_b = eta if args.eta_b is None else args.eta_b
    return ChannelConfig(eta_a=eta_a, eta_b=eta_b, phi=0.0 if args.phi is None else args.phi)


def _report_for_route(params, cfg, route) -> PrecisionReport:
    if route in (None, "auto"):
        return precision_report(params, cfg)
    if route == "general":
        qfi = qfi_interferometer(params, cfg).i_total
    else:
        if not cfg.is_symmetric:
            raise InvalidParameter("the closed form needs equal transmissivities")
        qfi = qfi_closed_form(params, cfg.eta_a)
    n_bar = mean_photon_input(params)
    bound, j = delta_phi_bound(qfi), j_ratio(qfi, cfg.eta, n_bar)
    flags = (("ZERO_QFI",) if math.isinf(bound) else ()) + (("J_UNDEFINED",) if math.isnan(j) else ())
    return PrecisionReport(n_bar, qfi, bound, j, route.replace("-", "_"), flags)


def cmd_qfi(args, out) -> int:
    extra = _merge_config(args, _QFI_KEYS)
    if extra:
        raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
    params, cfg = _qfi_params(args), _qfi_channel(args)
    report = _report_for_route(params, cfg, args.route)
    fields = {
        "n_bar": report.n_bar, "qfi": report.qfi, "j_ratio": report.j_ratio,
        "delta_phi_bound": report.delta_phi_bound, "route": report.route, "flags": list(report.flags),
    }
    status = EXIT_OK
    if args.oracle:
        if report.n_bar > ORACLE_MAX_N_BAR:
            raise UsageError(f"--oracle is limited to mean photon number <= {ORACLE_MAX_N_BAR:g}")
        rho = output_density_matrix(params, cfg)
        qfi_fock = qfi_spectral(rho)
        dev = abs(qfi_fock - report.qfi) / report.qfi if report.qfi > 0 else abs(qfi_fock)
        fields.update(qfi_fock=qfi_fock, oracle_rel_dev=dev, oracle_cutoff=rho.cutoff, oracle_leakage=rho.leakage)
        if not dev <= ORACLE_TOL:
            fields["flags"].append("ORACLE_MISMATCH")
            print(f"ORACLE_MISMATCH: relative deviation {dev:.3e} exceeds {ORACLE_TOL:g}", file=sys.stderr)
            status = EXIT_NUMERICAL
    if args.json:
        out.write(json.dumps(fields, allow_nan=True) + "\n")
    else:
        for key, value in fields.items():
            if key == "flags":
                value = ",".join(value) if value else "-"
            elif isinstance(value, float):
                value = _fmt(value)
            out.write(f"{key:16s} {value}\n")
    return status


# ---------------------------------------------------------------- sweep


def _add_sweep(sub) -> None:
    p = sub.add_parser("sweep", help="parameter sweeps behind the gain-ratio figures; writes CSV")
    p.add_argument("mode", nargs="?", choices=("dsv", "dsdv-fixed-alpha", "dsdv-fixed-r", "surface", "custom"))
    p.add_argument("--eta", dest="etas", type=_floats, help="comma-separated transmissivities")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--num", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--scale", choices=("log", "linear"))
    p.add_argument("--alpha2", type=float, help="fixed |alpha|^2 per mode (dsdv-fixed-alpha, default 10)")
    p.add_argument("--r", type=float, help="fixed squeezing per mode (dsdv-fixed-r, default 1)")
    p.add_argument("--nbar", dest="n_bar", type=float, help="fixed total mean photon number (surface, default 100)")
    p.add_argument("--phi", type=float)
    p.add_argument("--vary", help="parameter swept in custom mode")
    p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="fixed state parameter for custom mode (repeatable)")
    p.add_argument("--output", "-o", type=Path, help="directory, file stem, or file with --single-file (default .)")
    p.add_argument("--single-file", action="store_true", help="one CSV with an eta column")
    p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script next to the CSV")
    p.add_argument("--config", type=Path, help="key = value file mirroring the sweep options")
    p.set_defaults(handler=cmd_sweep)


def _check_rows(result) -> None:
    cols = result.columns
    for row in result.rows:
        values = dict(zip(cols, row))
        qfi, n_bar = values["qfi"], values["n_bar"]
        bound = values["delta_phi_bound"]
        expected_bound = math.inf if qfi <= 0 else 1 / math.sqrt(qfi)
        if not (bound == expected_bound or math.isclose(bound, expected_bound, rel_tol=ROW_CONSISTENCY_TOL)):
            raise NumericalInconsistency(f"phase bound {bound!r} inconsistent with qfi {qfi!r}")
        j = values["j_ratio"]
        if result.eta * n_bar > 0:
            if not math.isclose(j * j * result.eta * n_bar, qfi, rel_tol=ROW_CONSISTENCY_TOL, abs_tol=1e-300):
                raise NumericalInconsistency(f"j_ratio {j!r} inconsistent with qfi {qfi!r} at n_bar {n_bar!r}")


def cmd_sweep(args, out) -> int:
    config = read_config(args.config) if args.config else {}
    spec_keys = {k.strip().replace("-", "_"): v for k, v in config.items()}
    try:
        single = args.single_file or _bool(spec_keys.pop("single_file", "false"))
        gnuplot = args.gnuplot or _bool(spec_keys.pop("gnuplot", "false"))
    except argparse.ArgumentTypeError as exc:
        raise UsageError(str(exc)) from exc
    output = args.output or Path(spec_keys.pop("output", "."))
    spec_keys.pop("output", None)
    if args.mode:
        spec_keys["mode"] = args.mode
    if "mode" not in spec_keys:
        raise UsageError("sweep needs a mode (positional or 'mode' in --config)")
    spec, extra = spec_from_mapping(spec_keys)
    if extra:
        raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
    overrides = {k: getattr(args, k) for k in
                 ("etas", "start", "stop", "num", "step", "scale", "alpha2", "r", "n_bar", "phi", "vary")
                 if getattr(args, k) is not None}
    params = dict(spec.params)
    for item in args.param:
        name, sep, value = item.partition("=")
        if not sep or name not in PARAM_FIELDS:
            raise UsageError(f"--param expects NAME=VALUE with NAME in {', '.join(PARAM_FIELDS)}")
        try:
            params[name] = float(value)
        except ValueError as exc:
            raise UsageError(f"--param {item!r}: {exc}") from exc
    spec = SweepSpec(**{**asdict(spec), **overrides, "params": params})
    results = run_sweep(spec)
    for res in results:
        _check_rows(res)
    paths = write_results(results, output, single_file=single)
    for res, path in zip(results, paths if not single else paths * len(results)):
        out.write(f"eta={res.eta:g} rows={len(res.rows)} skipped={res.skipped} -> {path}\n")
    if gnuplot:
        first = paths[0]
        script = first.with_name(first.stem.rsplit("_eta", 1)[0] + ".gp") if not single else first.with_suffix(".gp")
        script.write_text(gnuplot_stub(paths, results, single), encoding="ascii")
        out.write(f"gnuplot script -> {script}\n")
    return EXIT_OK


# ---------------------------------------------------------------- oracle-check

_ORACLE_KEYS: dict[str, Callable] = {
    "etas": _floats, "dsv_nbar": _floats, "random": int, "seed": int, "phi": float, "verbose": _bool,
}


def _add_oracle(sub) -> None:
    p = sub.add_parser("oracle-check", help="compare Gaussian formulas with the Fock-space simulation")
    p.add_argument("--eta", dest="etas", type=_floats, help="transmissivities (default 0.5,0.8,1)")
    p.add_argument("--dsv-nbar", type=_floats, help="DSV mean photon numbers (default 0.5,2,4; '' for none)")
    p.add_argument("--dsdv", action="append", type=_floats, metavar="ALPHA,R",
                   help="DSDV point (repeatable; default 1,0.4 and 0.6,0.7)")
    p.add_argument("--no-dsdv", action="store_true", help="drop the DSDV points")
    p.add_argument("--random", type=int, help="number of random states (default 20)")
    p.add_argument("--seed", type=int)
    p.add_argument("--phi", type=float)
    p.add_argument("--verbose", "-v", action="store_true", help="print every grid point")
    p.add_argument("--config", type=Path, help="key = value file with any of the above")
    p.set_defaults(handler=cmd_oracle_check)


def cmd_oracle_check(args, out) -> int:
    extra = _merge_config(args, _ORACLE_KEYS)
    dsdv = args.dsdv
    if "dsdv" in extra:
        dsdv = dsdv or [_floats(v) for v in extra.pop("dsdv").split(";") if v.strip()]
    if extra:
        raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
    grid = GridSpec()
    kwargs = {}
    if args.etas is not None:
        kwargs["etas"] = args.etas
    if args.dsv_nbar is not None:
        kwargs["dsv_n_bars"] = args.dsv_nbar
    if args.no_dsdv:
        kwargs["dsdv_points"] = ()
    elif dsdv:
        if any(len(pt) != 2 for pt in dsdv):
            raise UsageError("--dsdv expects ALPHA,R")
        kwargs["dsdv_points"] = tuple(tuple(pt) for pt in dsdv)
    for key, attr in (("random_states", "random"), ("seed", "seed"), ("phi", "phi")):
        if getattr(args, attr) is not None:
            kwargs[key] = getattr(args, attr)
    if kwargs.get("random_states", 0) < 0:
        raise UsageError("--random must be >= 0")
    grid = GridSpec(**{**asdict(grid), **kwargs})
    report = run_crosscheck(grid.points())
    out.write(format_report(report, verbose=args.verbose) + "\n")
    if not report.passed:
        print(f"ORACLE_MISMATCH: {', '.join(report.failures())} above tolerance", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


# ---------------------------------------------------------------- variance-demo


def _add_variance(sub) -> None:
    p = sub.add_parser("variance-demo", help="fixed mean photon number with an arbitrarily large generator spread")
    p.add_argument("--nbar", dest="n_bar", type=float, help="mean photon number (> 0)")
    p.add_argument("--kappa", type=float, help="target spread (> 0)")
    p.add_argument("--config", type=Path)
    p.set_defaults(handler=cmd_variance_demo)


def cmd_variance_demo(args, out) -> int:
    extra = _merge_config(args, {"n_bar": float, "kappa": float})
    if extra:
        raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
    if args.n_bar is None or args.kappa is None:
        raise UsageError("variance-demo needs --nbar and --kappa")
    if not (args.n_bar > 0 and args.kappa > 0):
        raise UsageError("--nbar and --kappa must be positive")
    demo = unbounded_demo(args.n_bar, args.kappa)
    probs = demo.distribution.probs
    n = demo.n_max
    rows = [("N", str(n)), ("p_0", _fmt(probs.get(0, 0.0))), ("p_N", _fmt(probs[n])),
            ("mean", _fmt(demo.mean)), ("delta_h", _fmt(demo.delta_h)), ("kappa", _fmt(args.kappa))]
    for key, value in rows:
        out.write(f"{key:8s} {value}\n")
    return EXIT_OK


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gaussqfi", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    _add_qfi(sub)
    _add_sweep(sub)
    _add_oracle(sub)
    _add_variance(sub)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "handler", None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.handler(args, out)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except InvalidParameter as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GaussQfiError, ArithmeticError) as exc:
        # invalid states, failed extrapolations, truncation and consistency checks
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
