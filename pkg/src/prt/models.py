"""Built-in model zoo: analytic examples and ODE case studies.

Three small analytic maps exercise linear, product-form, and nearly
rank-deficient parameter dependence; the SIWR waterborne-disease model
and the six-variable cyclin/Cdk skeleton oscillator provide realistic
ODE case studies. Each entry ships an analytic Jacobian where one is
available, plus a default box and reference point for analyses.
"""

import math
import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .accel import njit
from .core import ModelOutputSpec, ParameterSpace, ParametricModel
from .errors import NotPeriodicError
from .ode import OdeSystem, estimate_period, integrate

# --- analytic examples ----------------------------------------------------


def example1() -> ParametricModel:
    """Scalar map exp(a + b): a linear identifiable combination.

    Rank-1 sensitivity FIM everywhere; the active direction is the
    normalized (1, 1), and the rank-1 surrogate reproduces the map
    exactly.
    """

    def ev(theta):
        return np.array([math.exp(theta[0] + theta[1])])

    def jac(theta):
        e = math.exp(theta[0] + theta[1])
        return np.array([[e, e]])

    return ParametricModel(name="example1", n=2,
                           output_spec=ModelOutputSpec(kind="scalar", m=1, labels=("f",)),
                           evaluator=ev, analytic_jacobian=jac)


def example2() -> ParametricModel:
    """Scalar map exp(a*b): a product-form (non-linear) combination."""

    def ev(theta):
        return np.array([math.exp(theta[0] * theta[1])])

    def jac(theta):
        e = math.exp(theta[0] * theta[1])
        return np.array([[theta[1] * e, theta[0] * e]])

    return ParametricModel(name="example2", n=2,
                           output_spec=ModelOutputSpec(kind="scalar", m=1, labels=("f",)),
                           evaluator=ev, analytic_jacobian=jac)


def example3() -> ParametricModel:
    """Two-output map (a + log(1+b), a + b): nearly rank-deficient for small b.

    Defined for b > -1; outside that the evaluator reports NaN so callers
    see the usual non-finite failure.
    """

    def ev(theta):
        base = 1.0 + theta[1]
        if base <= 0.0:
            return np.array([np.nan, np.nan])
        return np.array([theta[0] + math.log(base), theta[0] + theta[1]])

    def jac(theta):
        base = 1.0 + theta[1]
        if base <= 0.0:
            return np.array([[np.nan, np.nan], [np.nan, np.nan]])
        return np.array([[1.0, 1.0 / base], [1.0, 1.0]])

    return ParametricModel(name="example3", n=2,
                           output_spec=ModelOutputSpec(kind="vector", m=2,
                                                       labels=("f1", "f2")),
                           evaluator=ev, analytic_jacobian=jac)


# --- SIWR waterborne-disease model ----------------------------------------

SIWR_GAMMA = 0.25
SIWR_DEFAULT_THETA = np.array([0.256, 1.21, 0.00756, 1.1212e-5])
SIWR_FAST_XI_THETA = np.array([0.256, 1.21, 37.8, 1.1212e-5])
SIWR_NAMES = ("beta_i", "beta_w", "xi", "k")
SIWR_DEFAULT_Y0 = 25.0
SIWR_N_OBSERVATIONS = 20

# packed ODE parameter vector: (beta_i, beta_w, xi, gamma, k, y0, w0)


def _siwr_rhs_impl(t, x, th):
    s = x[0]
    i = x[1]
    w = x[3]
    force = s * (th[0] * i + th[1] * w)
    out = np.empty(4)
    out[0] = -force
    out[1] = force - th[3] * i
    out[2] = th[3] * i
    out[3] = th[2] * (i - w)
    return out


siwr_rhs = njit(cache=True)(_siwr_rhs_impl)


def _siwr_initial_state(th):
    i0 = th[5] * th[4]
    return np.array([1.0 - i0, i0, 0.0, th[6]])


def _siwr_observe(x, th):
    return np.array([x[1] / th[4]])


SIWR_SYSTEM = OdeSystem(dim=4, rhs=siwr_rhs, initial_state=_siwr_initial_state,
                        observe=_siwr_observe)


def _siwr_packed(theta, gamma, y0, w0):
    return np.array([theta[0], theta[1], theta[2], gamma, theta[3], y0, w0])


def siwr_epidemic_window(theta, gamma=SIWR_GAMMA, y0=SIWR_DEFAULT_Y0, w0=0.0,
                         tolerances=(1e-8, 1e-10)) -> float:
    """End time of the epidemic at ``theta``: infections below 1% of their peak.

    Integrates on a coarse grid, doubling the horizon until the peak has
    passed and decayed.
    """
    packed = _siwr_packed(np.asarray(theta, dtype=float), gamma, y0, w0)
    horizon = 500.0
    for _ in range(8):
        times = np.linspace(0.0, horizon, 2001)
        traj = integrate(SIWR_SYSTEM, packed, (0.0, horizon), times,
                         tolerances=tolerances)
        infected = traj.states[:, 1]
        peak = int(np.argmax(infected))
        if peak > 0 and peak < len(times) - 1:
            after = infected[peak:]
            low = np.nonzero(after < 0.01 * infected[peak])[0]
            if low.size:
                return float(times[peak + low[0]])
        horizon *= 2.0
    raise NotPeriodicError(f"no epidemic peak-and-decay found within {horizon:g} time units")


def siwr(observation_times=None, theta_hat=None, gamma=SIWR_GAMMA,
         y0=SIWR_DEFAULT_Y0, w0=0.0, tolerances=(1e-8, 1e-10)) -> ParametricModel:
    """Observed-cases SIWR model: y(t) = I(t)/k at the observation times.

    Susceptibles are infected directly (rate beta_i) and through the
    water compartment (rate beta_w); water pathogen levels relax toward
    infection prevalence at rate xi; recovery rate gamma is fixed, not
    estimated. Parameters are (beta_i, beta_w, xi, k) with k the inverse
    reporting scale: I(0) = y0*k and the remaining population starts
    susceptible. W(0) defaults to 0. When ``observation_times`` is
    omitted, 20 points are spread evenly from time zero to the
    approximate end of the epidemic at ``theta_hat``.
    """
    if theta_hat is None:
        theta_hat = SIWR_DEFAULT_THETA
    theta_hat = np.asarray(theta_hat, dtype=float)
    if observation_times is None:
        t_end = siwr_epidemic_window(theta_hat, gamma=gamma, y0=y0, w0=w0,
                                     tolerances=tolerances)
        observation_times = np.linspace(0.0, t_end, SIWR_N_OBSERVATIONS)
    observation_times = np.asarray(observation_times, dtype=float)
    t1 = float(observation_times[-1])

    def ev(theta):
        packed = _siwr_packed(theta, gamma, y0, w0)
        traj = integrate(SIWR_SYSTEM, packed, (0.0, t1), observation_times,
                         tolerances=tolerances)
        return traj.observations[:, 0]

    labels = tuple(f"y{i}" for i in range(observation_times.size))
    return ParametricModel(
        name="siwr", n=4,
        output_spec=ModelOutputSpec(kind="vector", m=observation_times.size,
                                    observation_times=observation_times, labels=labels),
        evaluator=ev)


# --- cell-cycle skeleton oscillator ----------------------------------------

CELLCYCLE_NAMES = (
    "v_sd", "K_gf", "GF", "V_dd", "K_dd",
    "V_1e2f", "K_1e2f", "V_2e2f", "K_2e2f", "E2F_tot",
    "v_se", "V_de", "K_de",
    "v_sa", "V_da", "K_da",
    "v_sb", "V_db", "K_db",
    "V_1cdc20", "K_1cdc20", "Cdc20_tot", "V_2cdc20", "K_2cdc20",
)

#: index of cyclin B/Cdk1 (Mb), whose peaks define the cycle period
CELLCYCLE_PERIOD_VARIABLE = 4
#: coarse period at the bundled defaults; sets the default horizon
CELLCYCLE_PERIOD_GUESS = 24.0
CELLCYCLE_INITIAL_STATE = np.array([0.5, 0.5, 0.5, 0.5, 0.5, 0.2])
CELLCYCLE_DEFAULTS_FILE = os.path.join(os.path.dirname(__file__), "data",
                                       "cellcycle_defaults.txt")


def _cellcycle_rhs_impl(t, x, th):
    md = x[0]
    e2f = x[1]
    me = x[2]
    ma = x[3]
    mb = x[4]
    cdc = x[5]
    e2f_free = th[9] - e2f
    cdc_free = th[21] - cdc
    out = np.empty(6)
    out[0] = th[0] * th[2] / (th[1] + th[2]) - th[3] * md / (th[4] + md)
    out[1] = (th[5] * e2f_free / (th[6] + e2f_free) * (md + me)
              - th[7] * e2f / (th[8] + e2f) * ma)
    out[2] = th[10] * e2f - th[11] * ma * me / (th[12] + me)
    out[3] = th[13] * e2f - th[14] * cdc * ma / (th[15] + ma)
    out[4] = th[16] * ma - th[17] * cdc * mb / (th[18] + mb)
    out[5] = (th[19] * mb * cdc_free / (th[20] + cdc_free)
              - th[22] * cdc / (th[23] + cdc))
    return out


cellcycle_rhs = njit(cache=True)(_cellcycle_rhs_impl)


def _cellcycle_initial_state(th):
    return CELLCYCLE_INITIAL_STATE.copy()


CELLCYCLE_SYSTEM = OdeSystem(dim=6, rhs=cellcycle_rhs,
                             initial_state=_cellcycle_initial_state, observe=None)


def load_cellcycle_defaults(path=CELLCYCLE_DEFAULTS_FILE) -> np.ndarray:
    """Parse the bundled flat key-value defaults file into parameter order."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            values[key.strip()] = float(val.strip())
    missing = [name for name in CELLCYCLE_NAMES if name not in values]
    if missing:
        raise ValueError(f"cell-cycle defaults file missing {missing}")
    return np.array([values[name] for name in CELLCYCLE_NAMES])


def cellcycle(horizon: Optional[float] = None, tolerances=(1e-8, 1e-10),
              n_output: int = 4096, transient_fraction: float = 0.5,
              periodicity_cv_tol: float = 0.05) -> ParametricModel:
    """Cell-cycle skeleton model with the oscillation period as scalar QOI.

    Six-variable cyclin/Cdk network (cyclin D/E/A/B modules, transcription
    factor E2F, and the APC activator Cdc20) over 24 positive parameters.
    The QOI integrates the system, discards the transient half of the
    horizon, and measures the mean interval between peaks of Mb (cyclin
    B/Cdk1). Parameter points without sustained oscillations raise
    :class:`NotPeriodicError`; callers sampling parameter space are
    expected to exclude such points rather than abort. The model does not
    oscillate everywhere, which is why analyses restrict to a band around
    the bundled defaults.

    ``horizon`` defaults to 20 times the period at the bundled defaults.
    """
    if horizon is None:
        horizon = 20.0 * CELLCYCLE_PERIOD_GUESS
    times = np.linspace(0.0, float(horizon), n_output)

    def ev(theta):
        if np.any(np.asarray(theta) <= 0):
            raise NotPeriodicError("cell-cycle parameters must be strictly positive")
        traj = integrate(CELLCYCLE_SYSTEM, theta, (0.0, float(horizon)), times,
                         tolerances=tolerances, max_steps=5_000_000)
        est = estimate_period(traj, CELLCYCLE_PERIOD_VARIABLE,
                              transient_fraction=transient_fraction,
                              periodicity_cv_tol=periodicity_cv_tol)
        return np.array([est.period])

    return ParametricModel(
        name="cellcycle", n=24,
        output_spec=ModelOutputSpec(kind="scalar", m=1, labels=("period",)),
        evaluator=ev)


# --- registry ---------------------------------------------------------------


@dataclass(frozen=True)
class ModelRegistryEntry:
    """A buildable model with its default analysis domain."""

    name: str
    factory: Callable[..., ParametricModel]
    default_space: ParameterSpace
    default_theta_hat: np.ndarray
    doc: str


def _box_space(names, lower, upper):
    return ParameterSpace(names=names, lower=lower, upper=upper)


def relative_box(names, theta_hat, lo_frac=0.5, hi_frac=1.5) -> ParameterSpace:
    """Box between ``lo_frac`` and ``hi_frac`` of a positive reference point."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    if np.any(theta_hat <= 0):
        raise ValueError("relative boxes need a strictly positive reference point")
    return ParameterSpace(names=names, lower=lo_frac * theta_hat, upper=hi_frac * theta_hat)


def _build_registry():
    entries = {}

    def add(entry):
        entries[entry.name] = entry

    add(ModelRegistryEntry(
        name="example1",
        factory=lambda theta_hat=None, **kw: example1(),
        default_space=_box_space(("theta1", "theta2"), [0.0, 0.0], [1.0, 2.0]),
        default_theta_hat=np.array([0.3, 1.0]),
        doc="exp(theta1 + theta2): linear identifiable combination"))
    add(ModelRegistryEntry(
        name="example2",
        factory=lambda theta_hat=None, **kw: example2(),
        default_space=_box_space(("theta1", "theta2"), [0.0, 0.0], [1.0, 2.0]),
        default_theta_hat=np.array([0.3, 1.0]),
        doc="exp(theta1 * theta2): product identifiable combination"))
    add(ModelRegistryEntry(
        name="example3",
        factory=lambda theta_hat=None, **kw: example3(),
        default_space=_box_space(("theta1", "theta2"), [0.0, 0.0], [2.0, 2.0]),
        default_theta_hat=np.array([1.95, 0.05]),
        doc="(theta1 + log(1+theta2), theta1 + theta2): nearly rank-deficient"))
    add(ModelRegistryEntry(
        name="siwr",
        factory=lambda theta_hat=None, **kw: siwr(theta_hat=theta_hat, **kw),
        default_space=relative_box(SIWR_NAMES, SIWR_DEFAULT_THETA),
        default_theta_hat=SIWR_DEFAULT_THETA.copy(),
        doc="SIWR waterborne-disease model, observed cases y = I/k"))
    cc_defaults = load_cellcycle_defaults()
    add(ModelRegistryEntry(
        name="cellcycle",
        factory=lambda theta_hat=None, **kw: cellcycle(**kw),
        default_space=relative_box(CELLCYCLE_NAMES, cc_defaults),
        default_theta_hat=cc_defaults,
        doc="six-variable cyclin/Cdk skeleton oscillator, period QOI"))
    return entries


_REGISTRY = None


def registry():
    global _REGISTRY
    if _REGISTRY is None:
        _REGISTRY = _build_registry()
    return _REGISTRY


def get_model_entry(name: str) -> ModelRegistryEntry:
    reg = registry()
    if name not in reg:
        raise KeyError(f"unknown model {name!r}; available: {sorted(reg)}")
    return reg[name]
