"""Scenario engine: named figure reproductions, custom runs and grid scans.

Configs are flat ``key = value`` text files (``#`` starts a comment). Each run
writes ``timeseries.csv`` and ``summary.json``; scans write ``scan.csv``. CSV
files start with a ``# rydsim <version>`` line followed by the header, and
numbers are printed with 12 significant digits, so two runs of the same
config give byte-identical bodies.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import TimeGrid, propagate_density, propagate_state
from .metrics import (
    dissipative_gate_fidelity,
    equal_weight_input,
    extract_gate,
    gate_curve,
    ghz_values,
    ideal_output,
    single_qubit_phase,
    unitary_gate_fidelity,
)
from .model import (
    FOUR_LEVEL,
    THREE_LEVEL,
    PhysParams,
    build_eliminated_h,
    build_full_h,
    build_gate_target,
    build_ladder_h,
    collapse_ops,
    raman_h,
    resonance_u,
)
from .perturbation import (
    calibrate_full_params,
    effective_model,
    gate_time,
    ghz_time,
    predicted_alpha,
)
from .qkernel import AtomBasis, LadderBasis, QuantumState, RamanBasis

log = logging.getLogger(__name__)

SCENARIOS = ("fig2", "fig3", "fig4_ghz", "fig4_gate", "fig5_ghz", "fig5_gate", "custom")
MODELS = ("full", "eliminated", "ladder", "effective")
TARGETS = ("standard", "local", "fitted")
GATE_FIDELITIES = ("unitary", "state")

# Laser parameters of the experimental estimate, in units of Omega_R Omega_B / Delta.
LAB_OMEGA_R = 10.0
LAB_OMEGA_B = 120.0
LAB_DELTA_BIG = 1200.0

DEFAULT_DELTA_GRID = tuple(float(d) for d in range(8, 17))
DEFAULT_GAMMA_GRID = tuple(round(0.001 * k, 3) for k in range(11))

SCENARIO_INFO = {
    "fig2": "three-atom populations and GHZ fidelity vs time (default delta = U = 20)",
    "fig3": "three-qubit gate fidelity vs time, one curve per delta in 10..14",
    "fig4_ghz": "GHZ fidelity with Rydberg decay; scan over delta and gamma",
    "fig4_gate": "gate fidelity with Rydberg decay; scan over delta and gamma",
    "fig5_ghz": "four-atom GHZ fidelity vs time at delta = 20, U = 2 delta / 3",
    "fig5_gate": "four-qubit gate fidelity vs time at delta = 12, fitted phase",
    "custom": "free-form run; every parameter from the config",
}

SCENARIO_DEFAULTS = {
    "fig2": dict(metric="ghz", n_atoms=3, delta_over_omega=(20.0,)),
    "fig3": dict(metric="gate", n_atoms=3, delta_over_omega=(10.0, 11.0, 12.0, 13.0, 14.0),
                 target="local"),
    "fig4_ghz": dict(metric="ghz", n_atoms=3, delta_over_omega=(14.0,), gamma_over_omega=0.002,
                     gate_fidelity="state"),
    "fig4_gate": dict(metric="gate", n_atoms=3, delta_over_omega=(12.0,), gamma_over_omega=0.002,
                      target="local", gate_fidelity="state"),
    "fig5_ghz": dict(metric="ghz", n_atoms=4, delta_over_omega=(20.0,)),
    "fig5_gate": dict(metric="gate", n_atoms=4, delta_over_omega=(12.0,), target="fitted"),
    "custom": dict(metric="ghz", n_atoms=3, delta_over_omega=(20.0,)),
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


class ScanError(RuntimeError):
    """A scan grid point failed; the message names the point."""


@dataclass
class ScenarioConfig:
    scenario: str = "custom"
    model: str = "eliminated"
    metric: str | None = None
    n_atoms: int | None = None
    delta_over_omega: tuple[float, ...] | None = None
    u_mode: str = "resonant"
    gamma_over_omega: float | None = None
    t_max_over_inv_omega: float | None = None
    n_points: int = 1001
    output_dir: str = "out"
    target: str | None = None
    gate_fidelity: str | None = None
    delta_grid: tuple[float, ...] | None = None
    gamma_grid: tuple[float, ...] | None = None
    peak_search: bool = False
    tol: float = 1e-8

    def resolved(self) -> ScenarioConfig:
        """Fill unset fields from the scenario defaults and validate."""
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario: {self.scenario!r} not in {SCENARIOS}")
        cfg = replace(self)
        for key, value in SCENARIO_DEFAULTS[cfg.scenario].items():
            if getattr(cfg, key) is None:
                setattr(cfg, key, value)
        if cfg.gamma_over_omega is None:
            cfg.gamma_over_omega = 0.0
        if cfg.target is None:
            cfg.target = "standard"
        if cfg.gate_fidelity is None:
            cfg.gate_fidelity = "unitary" if cfg.gamma_over_omega == 0 else "state"
        if cfg.delta_grid is None:
            cfg.delta_grid = DEFAULT_DELTA_GRID
        if cfg.gamma_grid is None:
            cfg.gamma_grid = DEFAULT_GAMMA_GRID
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.model not in MODELS:
            raise ConfigError(f"model: {self.model!r} not in {MODELS}")
        if self.metric not in ("ghz", "gate"):
            raise ConfigError(f"metric: {self.metric!r} not in ('ghz', 'gate')")
        if not 2 <= self.n_atoms <= 6:
            raise ConfigError(f"n_atoms: {self.n_atoms} outside [2, 6]")
        if self.n_points < 2:
            raise ConfigError(f"n_points: {self.n_points} < 2")
        if self.gamma_over_omega < 0:
            raise ConfigError(f"gamma_over_omega: {self.gamma_over_omega} < 0")
        if not self.delta_over_omega:
            raise ConfigError("delta_over_omega: empty")
        if self.t_max_over_inv_omega is not None and self.t_max_over_inv_omega <= 0:
            raise ConfigError(f"t_max_over_inv_omega: {self.t_max_over_inv_omega} <= 0")
        if self.target not in TARGETS:
            raise ConfigError(f"target: {self.target!r} not in {TARGETS}")
        if self.gate_fidelity not in GATE_FIDELITIES:
            raise ConfigError(f"gate_fidelity: {self.gate_fidelity!r} not in {GATE_FIDELITIES}")
        if self.u_mode != "resonant":
            try:
                float(self.u_mode)
            except ValueError:
                raise ConfigError(f"u_mode: {self.u_mode!r} is neither 'resonant' nor a number") from None
        if self.metric == "gate":
            if self.model != "eliminated":
                raise ConfigError(f"model: gate metric needs model = eliminated, got {self.model!r}")
            if self.gate_fidelity == "unitary" and self.gamma_over_omega > 0:
                raise ConfigError("gate_fidelity: 'unitary' needs gamma_over_omega = 0")
            if self.target == "fitted" and self.gate_fidelity != "unitary":
                raise ConfigError("target: 'fitted' needs gate_fidelity = unitary")
            if self.target == "local" and self.n_atoms != 3:
                raise ConfigError("target: 'local' uses the three-atom phase; use 'fitted' for n_atoms != 3")
        if self.model in ("full", "ladder", "effective") and self.gamma_over_omega > 0:
            raise ConfigError(f"gamma_over_omega: model {self.model!r} supports gamma = 0 only")
        if self.model == "full" and self.u_mode != "resonant":
            raise ConfigError("u_mode: the full model calibrates U itself; use 'resonant'")
        if self.model == "effective" and self.u_mode != "resonant":
            raise ConfigError("u_mode: the effective model assumes resonance")

    def u_value(self, delta: float) -> float:
        if self.u_mode == "resonant":
            return resonance_u(self.n_atoms, delta)
        return float(self.u_mode)


_FIELD_TYPES = {
    "scenario": str, "model": str, "metric": str, "n_atoms": int,
    "delta_over_omega": "floats", "u_mode": str, "gamma_over_omega": float,
    "t_max_over_inv_omega": float, "n_points": int, "output_dir": str,
    "target": str, "gate_fidelity": str, "delta_grid": "floats",
    "gamma_grid": "floats", "peak_search": bool, "tol": float,
}


def _parse_floats(text: str) -> tuple[float, ...]:
    """``a, b, c`` or an inclusive range ``start:stop:step``."""
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        if step <= 0:
            raise ValueError("range step must be > 0")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + k * step, 12) for k in range(max(n, 0)))
    return tuple(float(x) for x in text.split(","))


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    try:
        if kind == "floats":
            return _parse_floats(raw)
        if kind is bool:
            low = raw.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw.strip()!r}") from None


def parse_config(text: str) -> ScenarioConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{key}: unknown key (line {lineno})")
        if key in values:
            raise ConfigError(f"{key}: given twice (line {lineno})")
        values[key] = _parse_value(key, raw)
    return ScenarioConfig(**values)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    return parse_config(text)


# --------------------------------------------------------------------------
# physics per config


@dataclass
class _Setup:
    """Everything needed to evolve one config at one (delta, gamma) point."""

    h: np.ndarray
    collapse: list
    basis: object
    psi0: np.ndarray
    t_eval: float
    params: dict = field(default_factory=dict)


def _effective(cfg: ScenarioConfig, delta: float):
    return effective_model(cfg.n_atoms, delta)


def _gate_alpha(cfg: ScenarioConfig, delta: float) -> float:
    return predicted_alpha(delta) if cfg.target == "local" else 0.0


def build_setup(cfg: ScenarioConfig, delta: float, gamma: float) -> _Setup:
    n = cfg.n_atoms
    eff = _effective(cfg, delta)
    extra = {"g_eff": eff.g_eff, "effective_source": eff.source}
    if cfg.metric == "gate":
        basis = AtomBasis(THREE_LEVEL, n)
        p = PhysParams.effective(n, delta, cfg.u_value(delta), gamma)
        h = build_eliminated_h(p, absorb_shifts=True, basis=basis)
        return _Setup(h, collapse_ops(p, basis), basis, equal_weight_input(n, basis),
                      gate_time(eff), {**extra, "u": cfg.u_value(delta)})
    t_eval = ghz_time(eff)
    if cfg.model == "eliminated":
        basis = AtomBasis(THREE_LEVEL, n)
        p = PhysParams.effective(n, delta, cfg.u_value(delta), gamma)
        h = build_eliminated_h(p, absorb_shifts=True, basis=basis)
        collapse = collapse_ops(p, basis)
        extra["u"] = cfg.u_value(delta)
    elif cfg.model == "ladder":
        basis = LadderBasis(n)
        h = build_ladder_h(n, delta, cfg.u_value(delta))
        collapse = []
        extra["u"] = cfg.u_value(delta)
    elif cfg.model == "effective":
        basis = RamanBasis(n)
        h = raman_h(eff.g_eff, eff.shift)
        collapse = []
    else:
        cal = calibrate_full_params(LAB_OMEGA_R, LAB_OMEGA_B, LAB_DELTA_BIG, delta, n)
        basis = AtomBasis(FOUR_LEVEL, n)
        h, collapse = build_full_h(cal.params, basis)
        extra.update(omega_r=cal.params.omega_r, omega_b=cal.params.omega_b,
                     delta_big=cal.params.delta_big, delta_laser=cal.params.delta,
                     u=float(cal.params.u))
    psi0 = np.zeros(basis.dim, dtype=complex)
    psi0[basis.all_ones_index()] = 1.0
    return _Setup(h, collapse, basis, psi0, t_eval, extra)


def _default_t_max(cfg: ScenarioConfig, setup: _Setup) -> float:
    if cfg.metric == "gate":
        return 1.5 * setup.t_eval
    if cfg.scenario == "fig2":
        return 4.0 * setup.t_eval
    # 1.5 Raman half-periods covers the k = 0 and k = 1 GHZ points
    return 6.0 * setup.t_eval


def _series(cfg: ScenarioConfig, setup: _Setup, delta: float, times: np.ndarray):
    """Populations of |1..1>, |r..r> and the metric on ``times`` (t=0 first)."""
    grid = TimeGrid(float(times[0]), float(times[-1]), len(times))
    psi0 = QuantumState(setup.psi0, setup.basis)
    if setup.collapse:
        traj = propagate_density(setup.h, setup.collapse, psi0, grid, tol=cfg.tol)
    else:
        traj = propagate_state(setup.h, psi0, grid, tol=cfg.tol)
    pops = traj.populations()
    p1 = pops[:, setup.basis.all_ones_index()]
    pr = pops[:, setup.basis.all_rydberg_index()]
    if cfg.metric == "ghz":
        return p1, pr, ghz_values(traj.states, traj.kind, setup.basis)
    n = cfg.n_atoms
    if cfg.gate_fidelity == "state":
        ideal = ideal_output(build_gate_target(n, _gate_alpha(cfg, delta)), setup.basis)
        if traj.kind == "pure":
            f = np.abs(traj.states @ ideal.conj()) ** 2
        else:
            f = np.einsum("i,tij,j->t", ideal.conj(), traj.states, ideal).real
        return p1, pr, f
    gates = gate_curve(setup.h, n, times, setup.basis)
    f = np.empty(len(times))
    for k, g in enumerate(gates):
        alpha = single_qubit_phase(g, n) if cfg.target == "fitted" else _gate_alpha(cfg, delta)
        f[k] = abs(np.trace(g.conj().T @ build_gate_target(n, alpha).matrix)) / 2**n
    return p1, pr, f


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [f"# rydsim {__version__}", header]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _params_echo(cfg: ScenarioConfig, delta: float, extra: dict) -> dict:
    echo = asdict(cfg)
    echo["delta_over_omega"] = delta
    for key in ("delta_grid", "gamma_grid", "peak_search"):
        del echo[key]
    echo.update({k: (float(v) if isinstance(v, (np.floating, float)) else v)
                 for k, v in extra.items()})
    return echo


def _run_one(cfg: ScenarioConfig, delta: float, out: Path) -> dict:
    setup = build_setup(cfg, delta, cfg.gamma_over_omega)
    t_max = cfg.t_max_over_inv_omega or _default_t_max(cfg, setup)
    times = np.linspace(0.0, t_max, cfg.n_points)
    p1, pr, f = _series(cfg, setup, delta, times)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "timeseries.csv", "t,pop_111,pop_rrr,f_metric", zip(times, p1, pr, f))
    k = int(np.argmax(f))
    extra = {**setup.params, "t_eval": setup.t_eval, "t_max_over_inv_omega": t_max}
    summary = {
        "scenario": cfg.scenario,
        "params": _params_echo(cfg, delta, extra),
        "peak_value": float(f[k]),
        "peak_time": float(times[k]),
        "version": __version__,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    log.info("%s delta=%g: peak %.6f at t=%.4f", cfg.scenario, delta, f[k], times[k])
    return summary


def run_scenario(config: ScenarioConfig, output_dir=None) -> list[dict]:
    """Run a scenario, writing one ``timeseries.csv``/``summary.json`` per delta.

    A single delta writes directly into the output directory; several deltas
    each get a ``delta_<value>`` subdirectory.
    """
    cfg = config.resolved()
    out = Path(output_dir or cfg.output_dir)
    deltas = cfg.delta_over_omega
    if len(deltas) == 1:
        return [_run_one(cfg, deltas[0], out)]
    return [_run_one(cfg, d, out / f"delta_{_fmt(d)}") for d in deltas]


@dataclass
class ScanResult:
    delta_grid: tuple[float, ...]
    gamma_grid: tuple[float, ...]
    values: np.ndarray
    metric: str


def evaluate_point(cfg: ScenarioConfig, delta: float, gamma: float) -> float:
    """Figure of merit at the scheme's prescribed time (or its peak, if asked)."""
    setup = build_setup(cfg, delta, gamma)
    if cfg.peak_search:
        times = np.linspace(0.0, 1.5 * setup.t_eval, cfg.n_points)
        return float(np.max(_series(cfg, setup, delta, times)[2]))
    if cfg.metric == "gate":
        target = build_gate_target(cfg.n_atoms, _gate_alpha(cfg, delta))
        if cfg.gate_fidelity == "unitary":
            gate = extract_gate(setup.h, cfg.n_atoms, setup.t_eval, setup.basis)
            if cfg.target == "fitted":
                target = build_gate_target(cfg.n_atoms, single_qubit_phase(gate.matrix, cfg.n_atoms))
            return unitary_gate_fidelity(gate, target)
        return dissipative_gate_fidelity(setup.h, setup.collapse, target, setup.t_eval,
                                         setup.basis, tol=cfg.tol)
    times = np.array([0.0, setup.t_eval])
    return float(_series(cfg, setup, delta, times)[2][-1])


def _scan_task(args):
    cfg, i, j, delta, gamma = args
    try:
        return i, j, evaluate_point(cfg, delta, gamma)
    except Exception as exc:
        raise ScanError(f"grid point delta={delta}, gamma={gamma} failed: {exc}") from exc


def run_scan(config: ScenarioConfig, workers: int = 1, output_dir=None) -> ScanResult:
    """Evaluate the metric over ``delta_grid x gamma_grid`` and write ``scan.csv``.

    Points run in up to ``workers`` processes and are merged by grid index,
    so the output does not depend on the worker count.
    """
    cfg = config.resolved()
    if not cfg.delta_grid:
        raise ConfigError("delta_grid: empty")
    if not cfg.gamma_grid:
        raise ConfigError("gamma_grid: empty")
    if any(g < 0 for g in cfg.gamma_grid):
        raise ConfigError("gamma_grid: negative rate")
    if cfg.metric == "gate" and cfg.gate_fidelity == "unitary" and any(cfg.gamma_grid):
        raise ConfigError("gate_fidelity: 'unitary' cannot scan gamma > 0; use 'state'")
    if cfg.model in ("full", "ladder", "effective") and any(cfg.gamma_grid):
        raise ConfigError(f"gamma_grid: model {cfg.model!r} supports gamma = 0 only")
    tasks = [(cfg, i, j, d, g) for i, d in enumerate(cfg.delta_grid)
             for j, g in enumerate(cfg.gamma_grid)]
    values = np.full((len(cfg.delta_grid), len(cfg.gamma_grid)), np.nan)
    if workers <= 1:
        results = map(_scan_task, tasks)
        for i, j, v in results:
            values[i, j] = v
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, j, v in pool.map(_scan_task, tasks):
                values[i, j] = v
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [(d, g, values[i, j]) for i, d in enumerate(cfg.delta_grid)
            for j, g in enumerate(cfg.gamma_grid)]
    _write_csv(out / "scan.csv", "delta_over_omega,gamma_over_omega,fidelity", rows)
    return ScanResult(tuple(cfg.delta_grid), tuple(cfg.gamma_grid), values, cfg.metric)


def list_scenarios() -> list[tuple[str, str]]:
    return [(name, SCENARIO_INFO[name]) for name in SCENARIOS]
