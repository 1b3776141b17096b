"""Command-line harness: shaper design, scenario simulation, modal analysis.

    flyingbelt design   --config modes.json --sf 0.15 --ts 0.01 --out DIR
    flyingbelt simulate --config scenario.json --strategy h2-opt-shaped --out DIR
    flyingbelt compare  --config scenario.json --out DIR
    flyingbelt modal    --config plant.json --out DIR

Exit status: 0 success, 1 invalid input, 2 numerical failure.  The output
directory defaults to ``$FLYINGBELT_OUT`` when set, else ``out``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, motion, shaper
from .metrics import DEFAULT_HORIZON, SETTLE_BAND_DEG, StrategyMetrics, evaluate_profile
from .modal import NOMINAL_MODES, ModalError, ModalSet, compute_frf, identify_modes
from .motion import MotionError, STRATEGIES
from .multibody import DEFAULT_DT, SimOutput, SimulationError, SystemState, simulate, static_equilibrium
from .optim import DesignError, DesignRequest, LpError, QpError, design
from .plant import PlantError, PlantParams
from .shaper import ShaperError

log = logging.getLogger("flyingbelt")

OUT_ENV = "FLYINGBELT_OUT"
SCENARIO_SCHEMA = "scenario/1"
METRICS_SCHEMA = "metrics/1"
SIM_HEADER = "t,alpha,eps2,theta2,tensionA,tensionB,tensionC"

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class ConfigError(ValueError):
    pass


VALIDATION_ERRORS = (ConfigError, PlantError, ModalError, ShaperError, MotionError, json.JSONDecodeError, OSError)
NUMERICAL_ERRORS = (SimulationError, LpError, QpError, DesignError, np.linalg.LinAlgError)


@dataclass
class ScenarioConfig:
    """Point-to-point scenario; the defaults are the 180 degree turn of the nominal plant."""

    plant: PlantParams = field(default_factory=PlantParams)
    start: float = 0.0
    target: float = math.pi
    strategies: tuple[str, ...] = STRATEGIES
    rate_limit: float = math.pi / 3.0
    vmax: float = motion.POLY3_VMAX
    amax: float = motion.POLY3_AMAX
    jmax: float = motion.POLY3_JMAX
    modes: ModalSet = NOMINAL_MODES
    topt_sf: float = 0.0
    h2_sf: float = 0.15
    Ts: float = 0.01
    dt: float = DEFAULT_DT
    horizon: float = DEFAULT_HORIZON
    out_dir: str | None = None

    def __post_init__(self):
        self.strategies = tuple(self.strategies)
        self.validate()

    def validate(self) -> None:
        bad = [s for s in self.strategies if s not in STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategy {bad}; choose from {list(STRATEGIES)}")
        for name in ("start", "target"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        for name in ("rate_limit", "vmax", "amax", "jmax", "Ts", "dt", "horizon"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ConfigError(f"{name} must be positive, got {v}")
        for name in ("topt_sf", "h2_sf"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        ratio = self.Ts / self.dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError(f"Ts={self.Ts} must be an integer multiple of dt={self.dt}")

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["plant"] = self.plant.to_dict()
        d["modes"] = asdict(self.modes)
        d["strategies"] = list(self.strategies)
        return {"schema": SCENARIO_SCHEMA, **d}

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        schema = d.pop("schema", SCENARIO_SCHEMA)
        if schema != SCENARIO_SCHEMA:
            raise ConfigError(f"unsupported scenario schema {schema!r}")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scenario key(s): {sorted(unknown)}")
        if "plant" in d:
            d["plant"] = PlantParams.from_dict(d["plant"])
        if "modes" in d:
            d["modes"] = ModalSet.from_dict(d["modes"])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_scenario(path: str | Path | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    return ScenarioConfig.from_dict(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# strategies
# --------------------------------------------------------------------------


def build_profile(cfg: ScenarioConfig, strategy: str) -> motion.MotionProfile:
    """Motor command of one strategy for the configured move."""
    a0, a1, Ts = cfg.start, cfg.target, cfg.Ts
    if strategy == "const-velocity":
        return motion.const_velocity_profile(a0, a1, cfg.rate_limit, Ts)
    if strategy == "polynomial":
        return motion.poly3_profile(a0, a1, cfg.vmax, cfg.amax, cfg.jmax, Ts)
    sf = cfg.topt_sf if strategy == "t-opt-shaped" else cfg.h2_sf
    sh = design(DesignRequest(cfg.modes, Ts, sf)).shaper
    if a0 == a1:
        return motion.hold_profile(a0, Ts, strategy)
    return motion.shaped_profile(motion.step_profile(a0, a1, Ts), sh, strategy)


# --------------------------------------------------------------------------
# output files
# --------------------------------------------------------------------------


def sim_to_csv(sim: SimOutput) -> str:
    rows = [SIM_HEADER]
    cols = np.column_stack([sim.t, sim.alpha, sim.eps2, sim.theta2, sim.tension])
    for r in cols:
        rows.append(",".join(f"{v:.17g}" for v in r))
    return "\n".join(rows) + "\n"


def read_sim_csv(path: str | Path) -> dict[str, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(SIM_HEADER.split(","))}


def _write(path: Path, text: str) -> None:
    shaper._atomic_write(path, text)


def resolve_out(arg: str | None, cfg_dir: str | None = None) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or cfg_dir or "out")


def metrics_document(cfg: ScenarioConfig, results: list[StrategyMetrics], refs: dict, complete: bool, failure=None) -> dict:
    return {
        "schema": METRICS_SCHEMA,
        "version": __version__,
        "complete": complete,
        "failure": failure,
        "units": "deg, s",
        "definitions": {
            "torsion_error": "eps2 - (eps2 at rest + commanded move)",
            "nutation_error": "theta2 - theta2 at rest",
            "window": "end of commanded motion to horizon",
            "transient_time": f"first time after which |torsion error| stays within {SETTLE_BAND_DEG} deg",
        },
        "horizon": cfg.horizon,
        "dt": cfg.dt,
        "scenario": cfg.to_dict(),
        "strategies": {m.strategy: {**m.to_dict(), **refs.get(m.strategy, {})} for m in results},
    }


def run_scenario(cfg: ScenarioConfig, out: Path, strategies=None) -> list[StrategyMetrics]:
    """Simulate each strategy, writing its CSV trace and the cumulative report.

    The report is rewritten after every strategy; if one fails the report is
    left with ``complete: false`` and the failure recorded, then the error
    propagates.
    """
    out.mkdir(parents=True, exist_ok=True)
    results: list[StrategyMetrics] = []
    refs: dict = {}
    state0 = static_equilibrium(cfg.plant, cfg.start)
    for name in strategies or cfg.strategies:
        try:
            prof = build_profile(cfg, name)
            m, sim = evaluate_profile(
                prof, cfg.plant, state0, cfg.target, cfg.horizon, cfg.dt, with_sim=True
            )
        except NUMERICAL_ERRORS as exc:
            doc = metrics_document(cfg, results, refs, False, {"strategy": name, "error": str(exc)})
            _write(out / "metrics.json", json.dumps(doc, indent=2) + "\n")
            raise
        m.strategy = name
        eps0, theta0 = float(sim.eps2[0]), float(sim.theta2[0])
        refs[name] = {"eps2_rest": eps0, "theta2_rest": theta0, "move": cfg.target - cfg.start}
        if np.any(sim.tension < 0.0):
            log.warning("%s: cable compression detected (min tension %.3g N)", name, m.min_tension)
        _write(out / f"{name}.csv", sim_to_csv(sim))
        results.append(m)
        doc = metrics_document(cfg, results, refs, False)
        _write(out / "metrics.json", json.dumps(doc, indent=2) + "\n")
    doc = metrics_document(cfg, results, refs, True)
    _write(out / "metrics.json", json.dumps(doc, indent=2) + "\n")
    return results


def format_table(results: list[StrategyMetrics]) -> str:
    head = f"{'measure':<22}" + "".join(f"{m.strategy:>16}" for m in results)
    rows = [
        ("torsion pk-pk [deg]", "torsion_pkpk"),
        ("torsion rms [deg]", "torsion_rms"),
        ("nutation pk-pk [deg]", "nutation_pkpk"),
        ("nutation rms [deg]", "nutation_rms"),
        ("motion time [s]", "motion_time"),
        ("transient time [s]", "transient_time"),
    ]
    lines = [head]
    for label, key in rows:
        lines.append(f"{label:<22}" + "".join(f"{getattr(m, key):>16.4g}" for m in results))
    return "\n".join(lines)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_design(args) -> int:
    if args.config:
        modes = ModalSet.from_json(Path(args.config).read_text())
    else:
        modes = NOMINAL_MODES
    sf = 0.0 if args.sf is None else args.sf
    Ts = 0.01 if args.ts is None else args.ts
    req = _validated(lambda: DesignRequest(modes, Ts, sf))
    out = resolve_out(args.out)
    d = design(req)
    out.mkdir(parents=True, exist_ok=True)
    shaper.save(d.shaper, out / "shaper.xml")
    shaper.save(d.shaper, out / "shaper.json")
    print(f"n_min={d.n_min} n={d.n} duration={d.shaper.duration:.2f} s  ->  {out}/shaper.xml")
    return EXIT_OK


def _validated(make):
    # design-request validation errors are input errors, not numerical ones
    try:
        return make()
    except DesignError as exc:
        raise ConfigError(str(exc)) from exc


def _scenario_from_args(args) -> ScenarioConfig:
    cfg = load_scenario(args.config)
    changes = {}
    if args.sf is not None:
        changes["h2_sf"] = args.sf
    if args.ts is not None:
        changes["Ts"] = args.ts
    if changes:
        d = cfg.to_dict()
        d.update(changes)
        cfg = ScenarioConfig.from_dict(d)
    return cfg


def cmd_simulate(args) -> int:
    cfg = _scenario_from_args(args)
    names = args.strategy or list(cfg.strategies)
    if "all" in names:
        names = list(STRATEGIES)
    bad = [s for s in names if s not in STRATEGIES]
    if bad:
        raise ConfigError(f"unknown strategy {bad}; choose from {list(STRATEGIES)}")
    out = resolve_out(args.out, cfg.out_dir)
    results = run_scenario(cfg, out, names)
    for m in results:
        print(f"{m.strategy}: torsion pk-pk {m.torsion_pkpk:.4g} deg, rms {m.torsion_rms:.4g} deg")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _scenario_from_args(args)
    out = resolve_out(args.out, cfg.out_dir)
    results = run_scenario(cfg, out, list(STRATEGIES))
    print(format_table(results))
    return EXIT_OK


DEFAULT_FRF_GRID = "0.5:6:23"


def _parse_grid(text: str) -> np.ndarray:
    try:
        if ":" in text:
            lo, hi, num = text.split(":")
            return np.linspace(float(lo), float(hi), int(num))
        return np.array([float(v) for v in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad frequency grid {text!r}: use lo:hi:num or a comma list") from exc


def free_decay(p: PlantParams, duration: float = 60.0, dt: float = 0.01) -> SimOutput:
    """Release the belt from rest with a small kick in torsion and sway."""
    eq = static_equilibrium(p)
    qd = eq.qdot.copy()
    qd[11] = 0.05  # belt yaw rate
    qd[6] = qd[7] = 0.02  # belt centre velocity
    s0 = SystemState.from_arrays(eq.q, qd)
    return simulate(np.zeros(2), s0, p, dt=dt, sample_time=dt, horizon=duration)


def cmd_modal(args) -> int:
    p = PlantParams.from_dict(json.loads(Path(args.config).read_text())) if args.config else PlantParams()
    grid = _parse_grid(args.grid)
    if grid.size == 0 or np.any(np.diff(grid) <= 0.0) or grid[0] <= 0.0 or grid[-1] > 20.0:
        raise ConfigError("frequency grid must be strictly increasing within (0, 20] rad/s")
    out = resolve_out(args.out)
    try:
        modes = identify_modes(free_decay(p))
    except ModalError as exc:
        raise SimulationError(str(exc)) from exc
    frf = compute_frf(p, grid)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "modal.json", modes.to_json())
    _write(out / "frf.csv", frf.to_csv())
    print(modes.to_json().strip())
    capped = frf.omega[frf.capped]
    if capped.size:
        print("resonance (capped) at", ", ".join(f"{w:.4g}" for w in capped), "rad/s")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flyingbelt", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, config_help):
        sp.add_argument("--config", help=config_help)
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./out)")
        return sp

    sp = common(sub.add_parser("design", help="design a shaper from a modal set"), "modal set JSON")
    sp.add_argument("--sf", type=float, help="smoothing factor in [0, 1] (default 0)")
    sp.add_argument("--ts", type=float, help="sampling period [s] (default 0.01)")
    sp.set_defaults(func=cmd_design)

    for name, func, text in (
        ("simulate", cmd_simulate, "simulate selected strategies"),
        ("compare", cmd_compare, "simulate all four strategies and tabulate"),
    ):
        sp = common(sub.add_parser(name, help=text), "scenario JSON")
        if name == "simulate":
            sp.add_argument("--strategy", action="append", help=f"one of {', '.join(STRATEGIES)} or all; repeatable")
        sp.add_argument("--sf", type=float, help="smoothing factor of the H2-optimal shaper")
        sp.add_argument("--ts", type=float, help="command sampling period [s]")
        sp.set_defaults(func=func)

    sp = common(sub.add_parser("modal", help="identify modes and sweep the frequency response"), "plant JSON")
    sp.add_argument("--grid", default=DEFAULT_FRF_GRID, help="lo:hi:num or comma list, rad/s")
    sp.set_defaults(func=cmd_modal)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if getattr(args, "sf", None) is not None and not 0.0 <= args.sf <= 1.0:
            raise ConfigError(f"--sf must lie in [0, 1], got {args.sf}")
        if getattr(args, "ts", None) is not None and not args.ts > 0.0:
            raise ConfigError(f"--ts must be positive, got {args.ts}")
        return args.func(args)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
