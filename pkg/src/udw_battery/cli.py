"""Command-line front end: CSV sweeps for every figure plus the verification run.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence, TextIO

import numpy as np

from . import dynamics as dyn
from . import regression as reg
from . import spectrum as spc
from .errors import NumericalFailure
from .regression import format_number
from .spectral import PhysParams, fourier_response_numeric, response
from .verify import FAULTS, run_all

COMMANDS = ("spectral-scan", "dynamics", "correlators", "hbt", "spectrum", "verify")
THREADS_ENV = "UDW_BATTERY_THREADS"

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    count: int

    @classmethod
    def parse(cls, text: str) -> "Grid":
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"grid must be start:stop:count, got {text!r}")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError as exc:
            raise UsageError(f"malformed grid {text!r}") from exc
        grid = cls(start, stop, count)
        grid.validate()
        return grid

    def validate(self) -> None:
        if self.count < 2:
            raise UsageError(f"grid count must be >= 2, got {self.count}")
        if not (math.isfinite(self.start) and math.isfinite(self.stop)) or not self.start < self.stop:
            raise UsageError(f"grid needs finite start < stop, got {self.start}:{self.stop}")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class RunConfig:
    command: str
    a_values: tuple[float, ...] = (1.0,)
    omega: float = 1.0
    mu: float = 1.0
    grid: Grid | None = None
    out: str | None = None
    fig: int | None = None
    T: float = 50.0
    eps: float | None = None
    tau_prime: float = 0.0
    inject_fault: str = "none"

    def params(self, a: float | None = None, omega: float | None = None) -> PhysParams:
        return PhysParams(self.a_values[0] if a is None else a, self.omega if omega is None else omega, self.mu)


# Preset sweeps selected with --fig.
FIG_DEFAULTS = {
    1: dict(command="spectral-scan", a_values=(0.5, 1.0, 2.0), grid=Grid(0.1, 5.0, 50)),
    2: dict(command="spectral-scan", a_values=(0.5, 1.0, 2.0), grid=Grid(0.1, 5.0, 50)),
    3: dict(command="spectral-scan", a_values=(0.5, 1.0, 2.0), grid=Grid(0.1, 5.0, 50)),
    4: dict(command="hbt", a_values=(0.5, 1.0, 2.0), omega=1.0, mu=1.0, grid=Grid(0.0, 200.0, 101)),
    5: dict(command="hbt", a_values=(0.5, 1.0, 2.0), mu=1.0, grid=Grid(0.1, 5.0, 50)),
}
COMMAND_GRIDS = {
    "spectral-scan": Grid(0.1, 5.0, 50),
    "dynamics": Grid(0.0, 100.0, 51),
    "correlators": Grid(0.0, 25.0, 26),
    "hbt": Grid(0.0, 200.0, 101),
}


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc


def _ordered_map(fn: Callable, items: Sequence) -> list:
    """Map over ``items`` with the configured thread count, results kept in input order."""
    threads = _thread_count()
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _write_rows(stream: TextIO, header: Sequence[str], rows, meta: dict | None = None) -> None:
    for key, value in (meta or {}).items():
        stream.write(f"# {key}={format_number(value)}\n")
    stream.write(",".join(header) + "\n")
    for row in rows:
        stream.write(",".join(format_number(v) for v in row) + "\n")


def cmd_spectral_scan(cfg: RunConfig, stream: TextIO) -> int:
    omegas = (cfg.grid or COMMAND_GRIDS["spectral-scan"]).values()
    if omegas[0] <= 0:
        raise UsageError("omega grid must be positive")

    def rows_for(a: float):
        out = []
        for om in omegas:
            p = PhysParams(a, om, cfg.mu)
            s = response(p)
            row = (a, om, s.p_rod, s.p1, s.p2)
            if cfg.eps is not None and a > 0:
                row += (fourier_response_numeric(p, +1, eps=cfg.eps),
                        fourier_response_numeric(p, -1, eps=cfg.eps))
            elif cfg.eps is not None:
                row += (math.nan, math.nan)
            out.append(row)
        return out

    header = ("a", "omega", "p_rod", "p1", "p2")
    if cfg.eps is not None:
        header += ("g_pos_numeric", "g_neg_numeric")
    blocks = _ordered_map(rows_for, cfg.a_values)
    _write_rows(stream, header, (r for b in blocks for r in b))
    return EXIT_OK


def cmd_dynamics(cfg: RunConfig, stream: TextIO) -> int:
    taus = (cfg.grid or COMMAND_GRIDS["dynamics"]).values()
    if taus[0] < 0:
        raise UsageError("time grid must be >= 0")
    header = ("a", "tau", "sigma_x_analytic", "sigma_x_rk4", "number_analytic", "number_rk4",
              "antinumber_analytic", "antinumber_rk4", "max_abs_diff",
              "rho_pp_re", "rho_pp_im", "rho_pm_re", "rho_pm_im",
              "rho_mp_re", "rho_mp_im", "rho_mm_re", "rho_mm_im")

    def rows_for(a: float):
        p = cfg.params(a)
        s = response(p)
        states = dyn.trajectory(dyn.build_generator(p, s), dyn.DensityMatrix.excited(), taus)
        out = []
        for t, rho in zip(taus, states):
            sx_a, n_a, d_a = dyn.expect_sigma_x(p, s, t), dyn.expect_number(p, s, t), dyn.expect_antinumber(p, s, t)
            sx_n, n_n, d_n = rho.expect(dyn.SIGMA_X).real, rho.pp, rho.mm
            diff = max(abs(sx_a - sx_n), abs(n_a - n_n), abs(d_a - d_n))
            vec = rho.vector()
            comps = [c for z in vec for c in (z.real, z.imag)]
            out.append((a, t, sx_a, sx_n, n_a, n_n, d_a, d_n, diff, *comps))
        return out

    blocks = _ordered_map(rows_for, cfg.a_values)
    _write_rows(stream, header, (r for b in blocks for r in b), {"omega": cfg.omega, "mu": cfg.mu})
    return EXIT_OK


def cmd_correlators(cfg: RunConfig, stream: TextIO) -> int:
    taus = (cfg.grid or COMMAND_GRIDS["correlators"]).values()
    if taus[0] < 0:
        raise UsageError("delay grid must be >= 0")
    stream.write(",".join(reg.CSV_COLUMNS) + "\n")
    for a in cfg.a_values:
        p = cfg.params(a)
        s = response(p)
        for kind in reg.CorrelatorKind:
            reg.correlator_series(kind, p, s, cfg.tau_prime, taus).write_csv(stream, header=False)
    return EXIT_OK


def cmd_hbt(cfg: RunConfig, stream: TextIO) -> int:
    if cfg.fig == 5:
        omegas = (cfg.grid or FIG_DEFAULTS[5]["grid"]).values()
        if omegas[0] <= 0:
            raise UsageError("omega grid must be positive")
        rows = [(a, om, reg.hbt_long_delay(response(PhysParams(a, om, cfg.mu))))
                for a in cfg.a_values for om in omegas]
        _write_rows(stream, ("a", "omega", "p_hbt"), rows, {"mu": cfg.mu})
        return EXIT_OK
    taus = (cfg.grid or COMMAND_GRIDS["hbt"]).values()
    if taus[0] < 0:
        raise UsageError("delay grid must be >= 0")
    rows = []
    for a in cfg.a_values:
        p = cfg.params(a)
        s = response(p)
        rows.extend((a, t, v) for t, v in zip(taus, reg.hbt_steady(p, s, taus)))
    _write_rows(stream, ("a", "tau", "pss"), rows, {"omega": cfg.omega, "mu": cfg.mu})
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig, stream: TextIO) -> int:
    p = cfg.params()
    s = response(p)
    sp = spc.spectrum_params(p, s)
    # Default window: 30 linewidths either side, sampled at a tenth of a linewidth.
    half = 30.0 * abs(sp.R)
    grid = cfg.grid or Grid(sp.centre - half, sp.centre + half, 601)
    omegas = grid.values()
    if math.isinf(cfg.T):
        b1, b2 = spc.lorentzian_limit(p, s, omegas)
        _write_rows(stream, ("omega", "branch1", "branch2"), zip(omegas, b1, b2),
                    {"a": p.a, "omega": p.omega, "mu": p.mu, "T": cfg.T})
        return EXIT_OK
    spc.spectrum_finite_T(p, s, cfg.T, omegas).write_csv(stream)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, stream: TextIO) -> int:
    results = run_all(cfg.params(), cfg.inject_fault)
    for r in results:
        stream.write(r.line() + "\n")
    failed = sum(not r.passed for r in results)
    stream.write(f"SUMMARY {len(results) - failed}/{len(results)} passed\n")
    return EXIT_VERIFY if failed else EXIT_OK


HANDLERS = {
    "spectral-scan": cmd_spectral_scan,
    "dynamics": cmd_dynamics,
    "correlators": cmd_correlators,
    "hbt": cmd_hbt,
    "spectrum": cmd_spectrum,
    "verify": cmd_verify,
}


def _parse_floats(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from exc
    if not values:
        raise UsageError("empty list")
    return values


def _parse_float(name: str, text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise UsageError(f"--{name} expects a number, got {text!r}") from exc


def read_config_file(path: str) -> dict[str, str]:
    """``key=value`` lines; blank lines and ``#`` comments ignored."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected key=value")
        values[key.strip().replace("_", "-")] = value.strip()
    return values


CONFIG_KEYS = ("a", "omega", "mu", "grid", "out", "fig", "T", "eps", "tau-prime", "inject-fault")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="udw-battery", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS, nargs="?",
                        help="subcommand; may be omitted when --fig selects one")
    parser.add_argument("--a", help="comma-separated accelerations")
    parser.add_argument("--omega", help="gap frequency")
    parser.add_argument("--mu", help="coupling strength")
    parser.add_argument("--grid", help="start:stop:count sweep (frequency or time, per command)")
    parser.add_argument("--out", help="output path (default: standard output)")
    parser.add_argument("--fig", help="preset sweep 1-5 (sets command, a-list, grid and parameters)")
    parser.add_argument("--T", help="spectrum window; 'inf' gives the long-window line shape")
    parser.add_argument("--eps", help="regulator; adds numeric Fourier-oracle columns to spectral-scan")
    parser.add_argument("--tau-prime", dest="tau_prime", help="earlier time for correlators ('inf' = steady state)")
    parser.add_argument("--inject-fault", dest="inject_fault", choices=sorted(FAULTS),
                        help="corrupt the bath spectrum before verification (mutation testing)")
    parser.add_argument("--config", help="key=value file; command-line flags take precedence")
    return parser


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    raw = read_config_file(ns.config) if ns.config else {}
    for key in CONFIG_KEYS:
        value = getattr(ns, key.replace("-", "_"))
        if value is not None:
            raw[key] = value
    unknown = set(raw) - set(CONFIG_KEYS) - {"command"}
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")

    fig = None
    if "fig" in raw:
        try:
            fig = int(raw["fig"])
        except ValueError as exc:
            raise UsageError(f"--fig expects 1..5, got {raw['fig']!r}") from exc
        if fig not in FIG_DEFAULTS:
            raise UsageError(f"--fig expects 1..5, got {fig}")
    command = ns.command or raw.get("command")
    if command is None:
        if fig is None:
            raise UsageError("a command or --fig is required")
        command = FIG_DEFAULTS[fig]["command"]
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r}")
    if fig is not None and FIG_DEFAULTS[fig]["command"] != command:
        raise UsageError(f"figure {fig} belongs to the {FIG_DEFAULTS[fig]['command']} command")

    cfg = RunConfig(command=command, fig=fig)
    if fig is not None:
        cfg = replace(cfg, **{k: v for k, v in FIG_DEFAULTS[fig].items() if k != "command"})
    updates = {}
    if "a" in raw:
        updates["a_values"] = _parse_floats(raw["a"])
    for key in ("omega", "mu", "T", "eps"):
        if key in raw:
            updates[key] = _parse_float(key, raw[key])
    if "tau-prime" in raw:
        updates["tau_prime"] = _parse_float("tau-prime", raw["tau-prime"])
    if "grid" in raw:
        updates["grid"] = Grid.parse(raw["grid"])
    if "out" in raw:
        updates["out"] = raw["out"]
    if "inject-fault" in raw:
        if raw["inject-fault"] not in FAULTS:
            raise UsageError(f"unknown fault {raw['inject-fault']!r}")
        updates["inject_fault"] = raw["inject-fault"]
    return replace(cfg, **updates)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(ns)
        # Validate every parameter set up front so bad values are usage errors.
        for a in cfg.a_values:
            cfg.params(a)
        handler = HANDLERS[cfg.command]
        if cfg.out:
            try:
                stream = open(cfg.out, "w", encoding="utf-8", newline="")
            except OSError as exc:
                raise UsageError(f"cannot write {cfg.out!r}: {exc}") from exc
            with stream:
                return handler(cfg, stream)
        code = handler(cfg, sys.stdout)
        sys.stdout.flush()
        return code
    except (UsageError, ValueError) as exc:
        print(f"udw-battery: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"udw-battery: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BrokenPipeError:
        # Downstream closed the pipe (e.g. `| head`); silence the flush at exit.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
