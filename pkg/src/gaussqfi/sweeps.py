"""Parameter sweeps over the interferometer model and their CSV form.

Each sweep produces one :class:`SweepResult` per transmissivity. Rows hold plain
floats so that a CSV written with 17 significant digits reads back bit-exactly.
"""

from __future__ import annotations

import configparser
import csv
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidParameter
from .gaussian_state import ChannelConfig, ProductStateParams, _check_eta
from .qfi_engine import j_dsv, optimal_phases, precision_report

MODES = ("dsv", "dsdv-fixed-alpha", "dsdv-fixed-r", "surface", "custom")
DEFAULT_ETAS = (0.6, 0.8, 0.9, 0.95, 1.0)
FLOAT_FORMAT = "%.17g"
REPORT_COLUMNS = ("n_bar", "qfi", "j_ratio", "delta_phi_bound")
PARAM_FIELDS = tuple(f.name for f in fields(ProductStateParams))
# |alpha|^2 within this (relative) distance below zero is rounding at the feasibility edge
FEASIBILITY_SLACK = 1e-12


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep. ``None`` fields fall back to per-mode defaults in :meth:`resolved`."""

    mode: str
    etas: tuple[float, ...] | None = None
    start: float | None = None
    stop: float | None = None
    num: int | None = None
    step: float | None = None
    scale: str | None = None
    alpha2: float = 10.0
    r: float = 1.0
    n_bar: float = 100.0
    phi: float = 0.0
    vary: str | None = None
    params: dict[str, float] = field(default_factory=dict)

    def resolved(self) -> "SweepSpec":
        if self.mode not in MODES:
            raise InvalidParameter(f"unknown sweep mode {self.mode!r}; expected one of {', '.join(MODES)}")
        defaults: dict = {"etas": DEFAULT_ETAS, "num": 60, "scale": "log", "start": 0.1, "stop": 1e4}
        if self.mode == "dsdv-fixed-r":
            defaults.update(scale="linear", start=0.0, stop=30.0)
        elif self.mode == "surface":
            defaults.update(etas=(0.9,), num=40, scale="linear", start=0.0,
                            stop=math.asinh(math.sqrt(self.n_bar / 2.0)) if self.n_bar >= 0 else None)
        elif self.mode == "custom":
            defaults.update(scale="linear", start=None, stop=None, num=None if self.step else 50)
        if self.step is not None:
            defaults["num"] = None
        spec = replace(self, **{k: v for k, v in defaults.items() if getattr(self, k) is None})
        spec._validate()
        return spec

    def _validate(self) -> None:
        if not self.etas:
            raise InvalidParameter("at least one eta is required")
        for eta in self.etas:
            _check_eta(eta)
        if self.start is None or self.stop is None:
            raise InvalidParameter(f"mode {self.mode!r} needs an explicit start and stop")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)) or self.stop < self.start:
            raise InvalidParameter(f"empty range [{self.start}, {self.stop}]")
        if self.scale not in ("log", "linear"):
            raise InvalidParameter(f"scale must be 'log' or 'linear', got {self.scale!r}")
        if self.scale == "log" and self.start <= 0:
            raise InvalidParameter("a log-spaced range needs start > 0")
        if self.step is not None:
            if self.scale == "log":
                raise InvalidParameter("step applies to linear ranges only; use num for log spacing")
            if not self.step > 0:
                raise InvalidParameter("step must be > 0")
        elif self.num is None or self.num < 1:
            raise InvalidParameter("num must be >= 1")
        if self.alpha2 < 0 or self.r < 0 or self.n_bar < 0:
            raise InvalidParameter("alpha2, r and n_bar must be >= 0")
        if self.mode == "custom":
            if self.vary not in PARAM_FIELDS + ("phi",):
                raise InvalidParameter(f"custom sweeps vary one of {', '.join(PARAM_FIELDS + ('phi',))}")
            unknown = set(self.params) - set(PARAM_FIELDS)
            if unknown:
                raise InvalidParameter(f"unknown state parameters: {', '.join(sorted(unknown))}")

    def axis(self) -> np.ndarray:
        if self.scale == "log":
            return np.logspace(math.log10(self.start), math.log10(self.stop), self.num)
        if self.step is not None:
            count = int(math.floor((self.stop - self.start) / self.step * (1 + 1e-12))) + 1
            return self.start + self.step * np.arange(count)
        return np.linspace(self.start, self.stop, self.num)


@dataclass
class SweepResult:
    mode: str
    eta: float
    columns: tuple[str, ...]
    rows: list[tuple[float, ...]]
    skipped: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([row[self.columns.index(name)] for row in self.rows], dtype=float)


def _clamped_alpha2(value: float, scale: float) -> float | None:
    """``value`` if non-negative, 0 if negative only through rounding, otherwise ``None``."""
    if value >= 0:
        return value
    return 0.0 if value >= -FEASIBILITY_SLACK * max(scale, 1.0) else None


def _report_values(params: ProductStateParams, cfg: ChannelConfig) -> tuple[float, ...]:
    rep = precision_report(params, cfg)
    return (rep.n_bar, rep.qfi, rep.j_ratio, rep.delta_phi_bound)


def _sweep_dsv(spec: SweepSpec, eta: float) -> tuple[tuple[str, ...], list, int]:
    cfg = ChannelConfig.symmetric(eta, spec.phi)
    rows = []
    for n_bar in spec.axis():
        params = ProductStateParams.dsv(n_bar=float(n_bar))
        rows.append((float(n_bar), params.r_a) + _report_values(params, cfg)[1:])
    return ("n_bar", "r") + REPORT_COLUMNS[1:], rows, 0


def _sweep_dsdv_fixed_alpha(spec: SweepSpec, eta: float):
    cfg = ChannelConfig.symmetric(eta, spec.phi)
    alpha = math.sqrt(spec.alpha2)
    rows, skipped = [], 0
    for n_bar in spec.axis():
        sinh2 = _clamped_alpha2(float(n_bar) / 2.0 - spec.alpha2, float(n_bar))
        if sinh2 is None:
            skipped += 1
            continue
        r = math.asinh(math.sqrt(sinh2))
        values = _report_values(ProductStateParams.dsdv(alpha, r), cfg)
        reference = j_dsv(values[0], eta)
        rows.append((values[0], spec.alpha2, r) + values[1:] + (reference, values[2] - reference))
    return ("n_bar", "alpha2", "r") + REPORT_COLUMNS[1:] + ("j_dsv", "delta_j"), rows, skipped


def _sweep_dsdv_fixed_r(spec: SweepSpec, eta: float):
    cfg = ChannelConfig.symmetric(eta, spec.phi)
    rows = []
    for alpha in spec.axis():
        alpha = float(alpha)
        if alpha < 0:
            raise InvalidParameter("alpha must be >= 0")
        values = _report_values(ProductStateParams.dsdv(alpha, spec.r), cfg)
        rows.append((alpha, alpha * alpha, spec.r) + values)
    return ("alpha", "alpha2", "r") + REPORT_COLUMNS, rows, 0


def _sweep_surface(spec: SweepSpec, eta: float):
    cfg = ChannelConfig.symmetric(eta, spec.phi)
    half = spec.n_bar / 2.0
    rows, skipped = [], 0
    grid = spec.axis()
    for r_a in grid:
        for r_b in grid:
            r_a, r_b = float(r_a), float(r_b)
            a2 = _clamped_alpha2(half - math.sinh(r_a) ** 2, half)
            b2 = _clamped_alpha2(half - math.sinh(r_b) ** 2, half)
            if a2 is None or b2 is None:
                skipped += 1
                continue
            params = optimal_phases(
                ProductStateParams(alpha_abs_a=math.sqrt(a2), r_a=r_a, alpha_abs_b=math.sqrt(b2), r_b=r_b)
            )
            rows.append((r_a, r_b, a2, b2) + _report_values(params, cfg))
    return ("r_a", "r_b", "alpha2_a", "alpha2_b") + REPORT_COLUMNS, rows, skipped


def _sweep_custom(spec: SweepSpec, eta: float):
    base = ProductStateParams(**spec.params)
    rows, skipped = [], 0
    for x in spec.axis():
        x = float(x)
        if spec.vary == "phi":
            params, cfg = base, ChannelConfig.symmetric(eta, x)
        else:
            try:
                params = replace(base, **{spec.vary: x})
            except InvalidParameter:
                skipped += 1
                continue
            cfg = ChannelConfig.symmetric(eta, spec.phi)
        rows.append((x,) + _report_values(params, cfg))
    return (spec.vary,) + REPORT_COLUMNS, rows, skipped


_RUNNERS: dict[str, Callable] = {
    "dsv": _sweep_dsv,
    "dsdv-fixed-alpha": _sweep_dsdv_fixed_alpha,
    "dsdv-fixed-r": _sweep_dsdv_fixed_r,
    "surface": _sweep_surface,
    "custom": _sweep_custom,
}


def run_sweep(spec: SweepSpec) -> list[SweepResult]:
    """Evaluate the sweep for every eta in the spec, in the order given."""
    spec = spec.resolved()
    results = []
    for eta in spec.etas:
        columns, rows, skipped = _RUNNERS[spec.mode](spec, eta)
        results.append(SweepResult(spec.mode, eta, columns, rows, skipped))
    return results


def format_float(x: float) -> str:
    return FLOAT_FORMAT % x


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[Sequence[float]]) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_float(v) for v in row])


def read_csv(path: Path) -> tuple[tuple[str, ...], list[tuple[float, ...]]]:
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        return header, [tuple(float(v) for v in row) for row in reader]


def _eta_tag(eta: float) -> str:
    return f"eta{eta:g}"


def output_paths(output: Path, mode: str, etas: Sequence[float], single_file: bool) -> list[Path]:
    """Where the CSVs go.

    A directory receives ``<mode>_eta<eta>.csv`` files. Any other path is a stem:
    ``out/fig.csv`` becomes ``out/fig_eta0.9.csv`` and so on. With
    ``single_file`` the path itself is the file (``.csv`` appended if missing).
    """
    output = Path(output)
    if single_file:
        return [output if output.suffix else output.with_suffix(".csv")]
    if output.is_dir():
        return [output / f"{mode}_{_eta_tag(eta)}.csv" for eta in etas]
    stem = output.with_suffix("") if output.suffix == ".csv" else output
    return [stem.with_name(f"{stem.name}_{_eta_tag(eta)}.csv") for eta in etas]


def write_results(results: Sequence[SweepResult], output: Path, single_file: bool = False) -> list[Path]:
    if not results:
        raise InvalidParameter("nothing to write")
    paths = output_paths(output, results[0].mode, [r.eta for r in results], single_file)
    if single_file:
        columns = ("eta",) + results[0].columns
        write_csv(paths[0], columns, ((r.eta,) + row for r in results for row in r.rows))
    else:
        for path, res in zip(paths, results):
            write_csv(path, res.columns, res.rows)
    return paths


def gnuplot_stub(paths: Sequence[Path], results: Sequence[SweepResult], single_file: bool) -> str:
    """A gnuplot script plotting the gain ratio from the written CSVs."""
    res = results[0]
    offset = 1 if single_file else 0
    x_col = 1 + offset
    j_col = res.columns.index("j_ratio") + 1 + offset
    lines = ["set datafile separator ','", "set key autotitle columnhead"]
    if res.mode == "surface":
        lines += ["set xlabel 'r_a'", "set ylabel 'r_b'", "set zlabel 'J'",
                  f"splot '{paths[0]}' using {x_col}:{x_col + 1}:{j_col} with points"]
        return "\n".join(lines) + "\n"
    lines += [f"set xlabel '{res.columns[0]}'", "set ylabel 'J'"]
    if res.columns[0] == "n_bar":
        lines.append("set logscale x")
    if single_file:
        etas = " ".join(f"{r.eta:g}" for r in results)
        lines.append(
            f"plot for [e in '{etas}'] '{paths[0]}' using {x_col}:(abs($1 - e) < 1e-12 ? ${j_col} : 1/0) "
            "with lines title 'eta='.e"
        )
    else:
        plots = [f"'{p}' using {x_col}:{j_col} with lines title 'eta={r.eta:g}'" for p, r in zip(paths, results)]
        lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


_FLOAT_KEYS = {"start", "stop", "step", "alpha2", "r", "n_bar", "phi"}


def spec_from_mapping(values: dict[str, str]) -> tuple[SweepSpec, dict[str, str]]:
    """Build a spec from string key-value pairs; returns the spec and keys it did not consume."""
    values = dict(values)
    kwargs: dict = {}
    params: dict[str, float] = {}
    extra: dict[str, str] = {}
    try:
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            raw = raw.strip()
            if key == "mode":
                kwargs["mode"] = raw
            elif key in ("etas", "eta"):
                kwargs["etas"] = tuple(float(v) for v in raw.replace(",", " ").split())
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(raw)
            elif key == "num":
                kwargs["num"] = int(raw)
            elif key in ("scale", "vary"):
                kwargs[key] = raw
            elif key in PARAM_FIELDS:
                params[key] = float(raw)
            else:
                extra[key] = raw
    except ValueError as exc:
        raise InvalidParameter(f"bad config value: {exc}") from exc
    if "mode" not in kwargs:
        raise InvalidParameter("config has no 'mode'")
    return SweepSpec(params=params, **kwargs), extra


def read_config(path: Path) -> dict[str, str]:
    """Key-value config: ``key = value`` per line, ``#`` comments, optional ``[section]`` headers ignored."""
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[__top__]\n" + text)
    except configparser.Error as exc:
        raise InvalidParameter(f"cannot parse config {path}: {exc}") from exc
    merged: dict[str, str] = {}
    for section in parser.sections():
        merged.update(parser[section])
    return merged
