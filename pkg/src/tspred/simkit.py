"""Classical-model transient simulator for small multi-machine systems.

Generators follow the second-order swing equation with constant internal
EMF; the network is given as reduced admittance matrices at the generator
internal nodes (prefault, one or more named during-fault matrices, and a
postfault matrix equal to the prefault one). Three-phase faults are
represented purely by switching matrices.
"""

import math
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np
from scipy import optimize

from . import kernels

#: default integration step: a quarter of a 60 Hz cycle
DEFAULT_STEP = 1.0 / 240.0
DEFAULT_HORIZON = 3.0

#: |δ| beyond this many degrees aborts with NumericOverflowError
OVERFLOW_LIMIT_DEG = 1.0e6

CLEARING_RANGE_CYCLES = (5.0, 10.0)
LOAD_LEVEL_RANGE = (0.8, 1.3)

_MATRIX_SYMMETRY_TOL = 1e-9
_EQUILIBRIUM_TOL = 1e-8


class SimkitError(Exception):
    """Base class for simulator failures."""


class ModelFormatError(SimkitError):
    """Malformed or inconsistent power-system model."""


class NoEquilibriumError(SimkitError):
    """The prefault operating point cannot be solved."""


class NumericOverflowError(SimkitError):
    """Rotor angle blew past the overflow guard (step/model pathology)."""


def _readonly(arr, dtype=float):
    out = np.array(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PowerSystemModel:
    """Generators plus reduced admittance matrices for each fault stage.

    `y_fault` maps fault identifiers to during-fault matrices so one model
    file can describe several fault locations on the same system.
    """

    name: str
    f0: float
    inertia: np.ndarray        # H_i, seconds on machine base
    damping: np.ndarray        # D_i, per-unit
    xd: np.ndarray             # transient reactance, per-unit (bookkeeping)
    emf: np.ndarray            # internal EMF magnitude E_i, per-unit
    pm: np.ndarray             # mechanical power, per-unit
    y_prefault: np.ndarray     # complex G×G
    y_fault: dict              # fault id -> complex G×G
    y_postfault: np.ndarray    # complex G×G, equals y_prefault

    def __post_init__(self):
        for name in ("inertia", "damping", "xd", "emf", "pm"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        object.__setattr__(self, "y_prefault",
                           _readonly(self.y_prefault, complex))
        object.__setattr__(self, "y_postfault",
                           _readonly(self.y_postfault, complex))
        object.__setattr__(
            self, "y_fault",
            {k: _readonly(v, complex) for k, v in self.y_fault.items()})
        self._validate()

    def _validate(self):
        ng = self.n_generators
        if ng == 0:
            raise ModelFormatError("model has no generators")
        for name in ("damping", "xd", "emf", "pm"):
            if getattr(self, name).shape != (ng,):
                raise ModelFormatError(f"{name} length != generator count")
        if np.any(self.inertia <= 0):
            raise ModelFormatError("inertia constants must be positive")
        if np.any(self.damping < 0):
            raise ModelFormatError("damping must be non-negative")
        if self.f0 <= 0:
            raise ModelFormatError("base frequency must be positive")
        for label, mat in self._all_matrices():
            if mat.shape != (ng, ng):
                raise ModelFormatError(
                    f"{label} matrix shape {mat.shape} != ({ng}, {ng})")
            if not np.allclose(mat, mat.T, atol=_MATRIX_SYMMETRY_TOL,
                               rtol=0.0):
                raise ModelFormatError(f"{label} matrix is not symmetric")
        if not self.y_fault:
            raise ModelFormatError("model defines no during-fault matrix")
        if not np.allclose(self.y_postfault, self.y_prefault,
                           atol=_MATRIX_SYMMETRY_TOL, rtol=0.0):
            raise ModelFormatError(
                "postfault matrix must equal the prefault matrix "
                "(successful reclosure assumption)")

    def _all_matrices(self):
        yield "prefault", self.y_prefault
        yield "postfault", self.y_postfault
        for fid, mat in self.y_fault.items():
            yield f"fault '{fid}'", mat

    @property
    def n_generators(self):
        return int(self.inertia.shape[0])

    @property
    def omega0(self):
        """Synchronous speed in rad/s."""
        return 2.0 * math.pi * self.f0


@dataclass(frozen=True)
class SimulationScenario:
    """One disturbance case: which fault, how long, at what load."""

    fault: str
    clearing_cycles: float
    load_level: float = 1.0
    step: float = DEFAULT_STEP
    horizon: float = DEFAULT_HORIZON
    seed: int = 0

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("integration step must be positive")
        if self.clearing_cycles < 0:
            raise ValueError("clearing time must be non-negative")
        if self.horizon < self.clearing_time(60.0) and self.horizon <= 0:
            raise ValueError("horizon must be positive")

    def clearing_time(self, f0):
        """Fault clearing time in seconds at base frequency f0."""
        return self.clearing_cycles / f0


@dataclass(frozen=True)
class Trajectory:
    """Time-domain response on a uniform grid.

    Angles in degrees, speed deviations in rad/s, powers in per-unit.
    `inertia` and `f0` are echoed from the model for feature extraction.
    """

    time: np.ndarray           # (T,)
    delta_deg: np.ndarray      # (T, G)
    speed_dev: np.ndarray      # (T, G), rad/s
    pm: np.ndarray             # (G,)
    pe: np.ndarray             # (T, G)
    inertia: np.ndarray        # (G,)
    f0: float
    scenario: SimulationScenario

    def __post_init__(self):
        for name in ("time", "delta_deg", "speed_dev", "pm", "pe", "inertia"):
            object.__setattr__(self, name, _readonly(getattr(self, name)))

    @property
    def n_generators(self):
        return int(self.delta_deg.shape[1])


def _power_mismatch(delta, model, pm=None):
    """Pm − Pe(δ) under the prefault matrix; δ in radians."""
    pm = model.pm if pm is None else pm
    g = np.ascontiguousarray(model.y_prefault.real)
    b = np.ascontiguousarray(model.y_prefault.imag)
    pe = kernels.electrical_power(delta, model.emf, g, b)
    return pm - pe


def solve_equilibrium(model, tol=_EQUILIBRIUM_TOL, max_iter=200):
    """Prefault operating point: rotor angles (radians) with Δω = 0.

    The last machine's angle is the reference (fixed at 0); the remaining
    angles are solved so every machine's power mismatch vanishes. Raises
    NoEquilibriumError when the root-finder fails or the full residual
    (including the reference machine) stays above `tol`.
    """
    ng = model.n_generators
    if ng == 1:
        delta = np.zeros(1)
        if np.max(np.abs(_power_mismatch(delta, model))) > tol:
            raise NoEquilibriumError(
                "single-machine power mismatch is not balanced")
        return delta

    def residual(free):
        delta = np.append(free, 0.0)
        return _power_mismatch(delta, model)[:-1]

    sol = optimize.root(residual, np.zeros(ng - 1), method="hybr",
                        options={"maxfev": max_iter * ng, "xtol": 1e-13})
    delta = np.append(sol.x, 0.0)
    mismatch = np.max(np.abs(_power_mismatch(delta, model)))
    if not sol.success or mismatch > tol:
        raise NoEquilibriumError(
            f"no prefault equilibrium (max mismatch {mismatch:.3e} pu)")
    return delta


def apply_load_level(model, level):
    """Scale mechanical power by `level`, keeping an equilibrium solvable.

    Pm is always scaled. The EMF magnitudes are kept when the scaled
    system still has an equilibrium; otherwise they are re-derived as
    E·sqrt(level), which scales every power-flow term by `level` and
    preserves the base-case angles exactly.
    """
    lo, hi = LOAD_LEVEL_RANGE
    if not lo <= level <= hi:
        raise ValueError(f"load level {level} outside [{lo}, {hi}]")
    if level == 1.0:
        return model
    scaled = replace(model, pm=model.pm * level)
    try:
        solve_equilibrium(scaled)
        return scaled
    except NoEquilibriumError:
        pass
    rescaled = replace(scaled, emf=model.emf * math.sqrt(level))
    try:
        solve_equilibrium(rescaled)
    except NoEquilibriumError as exc:
        raise NoEquilibriumError(
            f"load level {level} destroys the operating point") from exc
    return rescaled


def _pe_series(delta_rad, model, t_clear, time, fault):
    """Electrical power at each grid point with the stage-appropriate matrix."""
    g_pre = np.ascontiguousarray(model.y_prefault.real)
    b_pre = np.ascontiguousarray(model.y_prefault.imag)
    g_flt = np.ascontiguousarray(model.y_fault[fault].real)
    b_flt = np.ascontiguousarray(model.y_fault[fault].imag)
    g_post = np.ascontiguousarray(model.y_postfault.real)
    b_post = np.ascontiguousarray(model.y_postfault.imag)
    pe = np.empty_like(delta_rad)
    for k, t in enumerate(time):
        if k == 0:
            g, b = g_pre, b_pre
        elif t < t_clear:
            g, b = g_flt, b_flt
        else:
            g, b = g_post, b_post
        pe[k] = kernels.electrical_power(delta_rad[k], model.emf, g, b)
    return pe


def simulate_trajectory(model, scenario):
    """Integrate one fault scenario with fixed-step RK4.

    The during-fault matrix is active on [0, t_clear), the postfault one
    afterwards; the step containing t_clear is split in two so the state
    is continuous and the switching instant is hit exactly. Output is
    sampled on the uniform integration grid.
    """
    model = apply_load_level(model, scenario.load_level)
    if scenario.fault not in model.y_fault:
        raise ValueError(f"unknown fault id '{scenario.fault}'")
    dt = scenario.step
    t_clear = scenario.clearing_time(model.f0)
    if scenario.horizon < t_clear:
        raise ValueError("horizon shorter than the fault clearing time")
    nsteps = int(round(scenario.horizon / dt))
    time = np.arange(nsteps + 1) * dt
    limit = math.radians(OVERFLOW_LIMIT_DEG)

    delta0 = solve_equilibrium(model)
    args = (model.inertia, model.damping, model.emf, model.pm)

    def span(d, w, step_size, count, ymat, out_d, out_w):
        status = kernels.rk4_span(
            d, w, step_size, count,
            *args,
            np.ascontiguousarray(ymat.real), np.ascontiguousarray(ymat.imag),
            model.omega0, limit, out_d, out_w)
        if status != kernels.STATUS_OK:
            raise NumericOverflowError(
                "rotor angle exceeded the overflow guard "
                f"({OVERFLOW_LIMIT_DEG:g} degrees)")

    ng = model.n_generators
    delta = np.empty((nsteps + 1, ng))
    speed = np.empty((nsteps + 1, ng))
    delta[0] = delta0
    speed[0] = 0.0

    y_during = model.y_fault[scenario.fault]
    eps = 1e-12
    if t_clear <= eps:
        span(delta[0], speed[0], dt, nsteps, model.y_postfault,
             delta[1:], speed[1:])
    else:
        n_fault = min(int(math.floor(t_clear / dt + eps)), nsteps)
        if n_fault > 0:
            span(delta[0], speed[0], dt, n_fault, y_during,
                 delta[1:n_fault + 1], speed[1:n_fault + 1])
        rem = t_clear - n_fault * dt
        start = n_fault
        if rem > eps and n_fault < nsteps:
            # split the step containing t_clear at the switching instant
            mid_d = np.empty((1, ng))
            mid_w = np.empty((1, ng))
            span(delta[n_fault], speed[n_fault], rem, 1, y_during,
                 mid_d, mid_w)
            span(mid_d[0], mid_w[0], dt - rem, 1, model.y_postfault,
                 delta[n_fault + 1:n_fault + 2],
                 speed[n_fault + 1:n_fault + 2])
            start = n_fault + 1
        if start < nsteps:
            span(delta[start], speed[start], dt, nsteps - start,
                 model.y_postfault, delta[start + 1:], speed[start + 1:])

    pe = _pe_series(delta, model, t_clear, time, scenario.fault)
    return Trajectory(
        time=time,
        delta_deg=np.degrees(delta),
        speed_dev=speed,
        pm=model.pm,
        pe=pe,
        inertia=model.inertia,
        f0=model.f0,
        scenario=scenario,
    )


def _scenario_seed(master_seed, index):
    return int(np.random.SeedSequence([master_seed, index])
               .generate_state(1)[0])


def build_scenario_grid(faults, clearing_cycles, load_levels, seed,
                        step=DEFAULT_STEP, horizon=DEFAULT_HORIZON):
    """Cartesian product of faults × clearing times × load levels.

    Deterministic order; each scenario carries a seed derived from the
    master seed by its index.
    """
    if not faults or not len(clearing_cycles) or not len(load_levels):
        raise ValueError("grid lists must be non-empty")
    lo, hi = CLEARING_RANGE_CYCLES
    for c in clearing_cycles:
        if not lo <= c <= hi:
            raise ValueError(f"clearing time {c} cycles outside [{lo}, {hi}]")
    llo, lhi = LOAD_LEVEL_RANGE
    for lv in load_levels:
        if not llo <= lv <= lhi:
            raise ValueError(f"load level {lv} outside [{llo}, {lhi}]")
    scenarios = []
    for idx, (fault, cyc, lvl) in enumerate(
            product(faults, clearing_cycles, load_levels)):
        scenarios.append(SimulationScenario(
            fault=fault, clearing_cycles=float(cyc), load_level=float(lvl),
            step=step, horizon=horizon,
            seed=_scenario_seed(seed, idx)))
    return scenarios


# ---------------------------------------------------------------------------
# Textual file formats
# ---------------------------------------------------------------------------

def _format_matrix_rows(mat):
    lines = []
    for row in mat:
        parts = []
        for z in row:
            parts.append(repr(float(z.real)))
            parts.append(repr(float(z.imag)))
        lines.append(" ".join(parts))
    return lines


def save_model(model, path):
    """Write the textual .sys model file (see README for the layout)."""
    lines = [
        f"name {model.name}",
        f"f0 {model.f0!r}",
        f"generators {model.n_generators}",
        "# H D xd E Pm",
    ]
    for i in range(model.n_generators):
        lines.append("gen " + " ".join(
            repr(float(v)) for v in (model.inertia[i], model.damping[i],
                                     model.xd[i], model.emf[i],
                                     model.pm[i])))
    ng = model.n_generators

    def emit(label, mat):
        lines.append(f"matrix {label} {ng}")
        lines.extend(_format_matrix_rows(mat))

    emit("prefault", model.y_prefault)
    for fid, mat in model.y_fault.items():
        emit(f"fault:{fid}", mat)
    emit("postfault", model.y_postfault)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path):
    """Parse the textual .sys model file."""
    with open(path, encoding="utf-8") as fh:
        raw = [ln.strip() for ln in fh]
    lines = [ln for ln in raw if ln and not ln.startswith("#")]
    name = "unnamed"
    f0 = 60.0
    gens = []
    matrices = {}
    i = 0
    try:
        while i < len(lines):
            tokens = lines[i].split()
            key = tokens[0]
            if key == "name":
                name = " ".join(tokens[1:])
            elif key == "f0":
                f0 = float(tokens[1])
            elif key == "generators":
                pass  # count is implied by the gen lines
            elif key == "gen":
                gens.append([float(v) for v in tokens[1:6]])
            elif key == "matrix":
                label = tokens[1]
                dim = int(tokens[2])
                rows = []
                for r in range(dim):
                    vals = [float(v) for v in lines[i + 1 + r].split()]
                    if len(vals) != 2 * dim:
                        raise ModelFormatError(
                            f"matrix '{label}' row {r} has {len(vals)} "
                            f"values, expected {2 * dim}")
                    rows.append([complex(vals[2 * c], vals[2 * c + 1])
                                 for c in range(dim)])
                matrices[label] = np.array(rows, dtype=complex)
                i += dim
            else:
                raise ModelFormatError(f"unknown directive '{key}'")
            i += 1
    except (ValueError, IndexError) as exc:
        raise ModelFormatError(f"malformed model file {path}: {exc}") from exc
    if not gens:
        raise ModelFormatError(f"{path}: no generators defined")
    if "prefault" not in matrices or "postfault" not in matrices:
        raise ModelFormatError(f"{path}: prefault/postfault matrix missing")
    faults = {label.split(":", 1)[1]: mat
              for label, mat in matrices.items() if label.startswith("fault:")}
    arr = np.array(gens)
    return PowerSystemModel(
        name=name, f0=f0,
        inertia=arr[:, 0], damping=arr[:, 1], xd=arr[:, 2],
        emf=arr[:, 3], pm=arr[:, 4],
        y_prefault=matrices["prefault"],
        y_fault=faults,
        y_postfault=matrices["postfault"],
    )


def save_grid_spec(path, faults, clearing_cycles, load_levels, seed,
                   step=DEFAULT_STEP, horizon=DEFAULT_HORIZON):
    """Write the key-value .grid scenario specification."""
    lines = [
        "faults = " + ", ".join(faults),
        "clearing_cycles = " + ", ".join(repr(float(c))
                                         for c in clearing_cycles),
        "load_levels = " + ", ".join(repr(float(v)) for v in load_levels),
        f"step = {step!r}",
        f"horizon = {horizon!r}",
        f"seed = {seed}",
    ]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_grid_spec(path):
    """Parse the .grid file into build_scenario_grid keyword arguments."""
    spec = {}
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            key, _, value = ln.partition("=")
            spec[key.strip()] = value.strip()
    def _split(text):
        return [v.strip() for v in text.split(",") if v.strip()]

    try:
        return {
            "faults": _split(spec["faults"]),
            "clearing_cycles": [float(v)
                                for v in _split(spec["clearing_cycles"])],
            "load_levels": [float(v) for v in _split(spec["load_levels"])],
            "seed": int(spec["seed"]),
            "step": float(spec.get("step", DEFAULT_STEP)),
            "horizon": float(spec.get("horizon", DEFAULT_HORIZON)),
        }
    except (KeyError, ValueError) as exc:
        raise ValueError(f"malformed grid spec {path}: {exc}") from exc
