"""Command-line front end.

Every command reads its parameters from flags and, optionally, from the
section of the same name in an INI-style ``--config`` file; flags win over
config keys, which win over built-in defaults.  Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

from . import statistics as st
from .directed_network import build_dsf, build_gilbert, directed_persistence, save_branch_diagram
from .errors import CalibrationError, InsufficientExtentError, ParameterError, PatternFormatError
from .filtration import build_complex
from .persistence import PersistenceDiagram, compute_persistence, save_diagram
from .point_process import (MaternParams, StraussParams, Window, load_pattern, sample_matern,
                            sample_poisson, sample_strauss, save_pattern)
from .svg import diagram_svg, histogram_svg, qq_svg

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_window(text: str) -> Window:
    """``"15x5"`` -> ``[-7.5, 7.5] x [0, 5]``."""
    try:
        length, height = (float(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"window must look like LENGTHxHEIGHT, got {text!r}") from None
    try:
        return Window.centered(length, height)
    except ParameterError as exc:
        raise UsageError(str(exc)) from None


class Settings:
    """Flag > config-file > default lookup for one command."""

    def __init__(self, args: argparse.Namespace, section: str):
        self.args = args
        self.config: dict[str, str] = {}
        if getattr(args, "config", None):
            parser = configparser.ConfigParser()
            parser.optionxform = str  # keep keys such as r_C and T as written
            if not parser.read(args.config):
                raise UsageError(f"cannot read config file {args.config}")
            if parser.has_section(section):
                self.config = {k.replace("-", "_"): v for k, v in parser.items(section)}

    def get(self, name: str, conv: Callable[[str], Any] = str, default: Any = None,
            required: bool = False) -> Any:
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            try:
                return conv(self.config[name])
            except ValueError as exc:
                raise UsageError(f"config key {name}: {exc}") from None
        if required:
            raise UsageError(f"missing required parameter --{name.replace('_', '-')}")
        return default


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# --- commands --------------------------------------------------------------------------------

def cmd_sample(args: argparse.Namespace) -> int:
    s = Settings(args, "sample")
    window = parse_window(s.get("window", required=True))
    model = s.get("model", default="poisson")
    seed = s.get("seed", int, 0)
    out = Path(s.get("out", default="pattern.csv"))
    if model == "poisson":
        pattern = sample_poisson(window, s.get("intensity", float, 2.0), seed)
    elif model == "matern":
        params = MaternParams(s.get("kappa", float, 2.0), s.get("disk_radius", float, 0.5),
                              s.get("mu", float, 1.0))
        pattern = sample_matern(window, params, seed)
    elif model == "strauss":
        params = StraussParams(s.get("beta", float, 4.0), s.get("gamma", float, 0.6),
                               s.get("r", float, 0.5), s.get("steps", int), s.get("burn_in", int))
        pattern = sample_strauss(window, params, seed)
    else:
        raise UsageError(f"unknown model {model!r}")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_pattern(pattern, out)
    print(f"wrote {len(pattern)} points to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_diagram(args: argparse.Namespace) -> int:
    s = Settings(args, "diagram")
    pattern = load_pattern(s.get("input", required=True))
    pipeline = s.get("pipeline", default="cech")
    out = Path(s.get("out", default="diagram.csv"))
    svg = s.get("svg")
    out.parent.mkdir(parents=True, exist_ok=True)
    if pipeline in ("dsf", "gilbert"):
        if pipeline == "dsf":
            net = build_dsf(pattern)
        else:
            net = build_gilbert(pattern, s.get("radius", float, required=True))
        diagram = directed_persistence(net)
        save_branch_diagram(diagram, out)
        births, deaths, dims = diagram.births, diagram.deaths, None
        title = f"directed persistence ({pipeline})"
    elif pipeline in ("cech", "vr"):
        T = s.get("T", float, 1.0)
        q = s.get("q", int)
        diagram = compute_persistence(build_complex(pattern, pipeline, T))
        if q is not None:
            if q not in (0, 1):
                raise UsageError("--q must be 0 or 1")
            diagram = diagram.in_dim(q)
        else:
            keep = diagram.dims <= 1
            diagram = PersistenceDiagram(diagram.dims[keep], diagram.births[keep],
                                         diagram.deaths[keep])
        save_diagram(diagram, out)
        births, deaths, dims = diagram.births, diagram.deaths, diagram.dims
        title = f"{pipeline} persistence"
    else:
        raise UsageError(f"unknown pipeline {pipeline!r}")
    if svg:
        _write(Path(svg), diagram_svg(births, deaths, title, dims))
    return EXIT_OK


STATISTIC_CHOICES = ("tl-dsf", "tc", "tl-cech", "tl-vr")


def _statistic(name: str, s: Settings) -> st.Statistic:
    T = s.get("T", float, 1.0)
    if name == "tl-dsf":
        return st.DirectedAPF(s.get("dsf_r_L", float), s.get("dsf_r_f", float))
    if name == "tc":
        return st.ClusterDeaths(s.get("r_C", float, st.DEFAULT_R_C), True, "cech", T)
    if name in ("tl-cech", "tl-vr"):
        return st.APF(1, s.get("r_L", float, st.DEFAULT_R_L), s.get("r_f", float, st.DEFAULT_R_F),
                      name.split("-")[1], T)
    raise UsageError(f"unknown statistic {name!r}; expected one of {STATISTIC_CHOICES}")


TABLES = {"dsf": ("tl-dsf",), "cech": ("tc", "tl-cech")}


def cmd_experiment(args: argparse.Namespace) -> int:
    s = Settings(args, "experiment")
    table = s.get("table", default="cech")
    names = TABLES.get(table, None)
    if names is None:
        names = tuple(n.strip() for n in table.split(","))
    specs = tuple(_statistic(n, s) for n in names)
    intensities = tuple(float(v) for v in str(s.get("intensities", default="1.6,2.0,2.4")).split(","))
    betas = tuple(float(v) for v in str(s.get("strauss_beta", default="2.7,4.0,5.4")).split(","))
    config = st.ExperimentConfig(
        specs=specs,
        intensities=intensities,
        window=parse_window(s.get("window", default="15x5")),
        strauss_beta=betas,
        strauss_steps=s.get("strauss_steps", int),
        n_reps=s.get("n_reps", int, 1000),
        n_cal=s.get("n_cal", int, 10000),
        level=s.get("level", float, 0.05),
        seed=s.get("seed", int, 0),
    )
    out_dir = Path(s.get("out_dir", default="experiment"))
    workers = s.get("workers", int, st.default_workers())
    tables = st.rejection_experiment(config, workers, out_dir / "cells",
                                     progress=lambda m: print(m, file=sys.stderr))
    for name, tab in zip(names, tables):
        _write(out_dir / f"{name}.csv", tab.to_csv())
        _write(out_dir / f"{name}.json", json.dumps(tab.to_json(), indent=2, sort_keys=True) + "\n")
        print(f"{tab.statistic}\n{tab.to_csv()}")
    return EXIT_OK


def cmd_diagnostics(args: argparse.Namespace) -> int:
    s = Settings(args, "diagnostics")
    n_reps = s.get("n_reps", int, 10000)
    if n_reps < 1000:
        raise UsageError("diagnostics need --n-reps >= 1000")
    name = s.get("statistic", default="tl-dsf")
    spec = _statistic(name, s)
    window = parse_window(s.get("window", default="15x5"))
    intensity = s.get("intensity", float, 2.0)
    out_dir = Path(s.get("out_dir", default="diagnostics"))
    workers = s.get("workers", int, st.default_workers())
    values = st.simulate(spec, window, "poisson", {"intensity": intensity}, n_reps,
                         s.get("seed", int, 0), workers)
    rep = st.normality_diagnostics(values, s.get("bins", int, 40))
    hist = ["bin_left,bin_right,density"] + [
        f"{a!r},{b!r},{d!r}" for a, b, d in zip(rep.hist_edges[:-1].tolist(),
                                               rep.hist_edges[1:].tolist(),
                                               rep.hist_density.tolist())]
    qq = ["theoretical,sample"] + [f"{a!r},{b!r}" for a, b in zip(rep.qq_theoretical.tolist(),
                                                                 rep.qq_sample.tolist())]
    _write(out_dir / f"{name}_histogram.csv", "\n".join(hist) + "\n")
    _write(out_dir / f"{name}_qq.csv", "\n".join(qq) + "\n")
    _write(out_dir / f"{name}_histogram.svg", histogram_svg(rep.hist_edges, rep.hist_density,
                                                           f"{spec.name} histogram"))
    _write(out_dir / f"{name}_qq.svg", qq_svg(rep.qq_theoretical, rep.qq_sample,
                                             f"{spec.name} Q-Q plot"))
    summary = {"statistic": spec.name, "n_reps": n_reps, "ks_distance": rep.ks_distance,
               "skewness": rep.skewness, "excess_kurtosis": rep.excess_kurtosis}
    _write(out_dir / f"{name}_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"ks_distance={rep.ks_distance:.4f} skewness={rep.skewness:.4f} "
          f"excess_kurtosis={rep.excess_kurtosis:.4f}")
    return EXIT_OK


# --- parser --------------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cylpersist", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="INI file with one section per command")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample a point pattern")
    p.add_argument("--model", choices=("poisson", "matern", "strauss"))
    p.add_argument("--window", help="LENGTHxHEIGHT, centered in x")
    p.add_argument("--intensity", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--disk-radius", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("diagram", help="persistence diagram of a pattern file")
    p.add_argument("--input")
    p.add_argument("--pipeline", choices=("dsf", "gilbert", "cech", "vr"))
    p.add_argument("--radius", type=float, help="Gilbert graph radius")
    p.add_argument("--T", type=float, help="truncation value of the filtration")
    p.add_argument("--q", type=int, help="keep only this homology dimension")
    p.add_argument("--out")
    p.add_argument("--svg")
    p.set_defaults(func=cmd_diagram)

    def stat_flags(p):
        p.add_argument("--T", type=float)
        p.add_argument("--r-C", dest="r_C", type=float)
        p.add_argument("--r-L", dest="r_L", type=float)
        p.add_argument("--r-f", dest="r_f", type=float)
        p.add_argument("--dsf-r-L", dest="dsf_r_L", type=float)
        p.add_argument("--dsf-r-f", dest="dsf_r_f", type=float)
        p.add_argument("--window")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out-dir")

    p = sub.add_parser("experiment", help="rejection-rate tables")
    p.add_argument("--table", help="'dsf', 'cech' or a comma list of statistics")
    p.add_argument("--intensities")
    p.add_argument("--strauss-beta")
    p.add_argument("--strauss-steps", type=int)
    p.add_argument("--n-reps", type=int)
    p.add_argument("--n-cal", type=int)
    p.add_argument("--level", type=float)
    stat_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("diagnostics", help="normality diagnostics under the null")
    p.add_argument("--statistic", choices=STATISTIC_CHOICES)
    p.add_argument("--n-reps", type=int)
    p.add_argument("--intensity", type=float)
    p.add_argument("--bins", type=int)
    stat_flags(p)
    p.set_defaults(func=cmd_diagnostics)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ParameterError) as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PatternFormatError, CalibrationError, InsufficientExtentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
