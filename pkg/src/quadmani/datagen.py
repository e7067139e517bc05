"""Deterministic generators for the benchmark snapshot sets and their splits.

PDE data use periodic second-order central differences in space and the
classical fourth-order Runge-Kutta method in time. The number of RK4 steps is
the smallest multiple of the snapshot count that satisfies the advective
limit ``dt <= 0.5 dx / max|speed|`` and, for Burgers, the diffusive limit
``dt <= 0.25 dx^2 / nu``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

INSTABILITY_LIMIT = 1e3


class UnstableIntegrationError(FloatingPointError):
    pass


def gen_parabola() -> np.ndarray:
    """2 x 20 matrix with columns ``[x, x^2]`` for 20 equispaced x in [-2, 2]."""
    x = -2.0 + 4.0 * np.arange(20) / 19.0
    return np.vstack([x, x**2])


@dataclass(frozen=True)
class AdvectConfig:
    n_x: int = 4096
    n_t: int = 2000
    mu: float = 0.1
    c: float = 10.0
    variance: float = 0.0002
    t_span: float = 0.2

    def __post_init__(self):
        if self.n_x < 4 or self.n_t < 4:
            raise ValueError("n_x and n_t must be >= 4")


ADVECT_DESK = AdvectConfig(n_x=512, n_t=500)


def gaussian_bump(x, cfg: AdvectConfig = AdvectConfig()) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-((x - cfg.mu) ** 2) / cfg.variance) / math.sqrt(cfg.variance * math.pi)


def gen_advecting_wave(cfg: AdvectConfig = AdvectConfig()) -> np.ndarray:
    """Columns ``s0(x - c t_i)`` on ``n_x`` points of [0, 1], ``t_i = t_span (i-1)/n_t``."""
    x = np.linspace(0.0, 1.0, cfg.n_x)
    t = cfg.t_span * np.arange(cfg.n_t) / cfg.n_t
    return gaussian_bump(x[:, None] - cfg.c * t[None, :], cfg)


def _rk4(f, y0: np.ndarray, t_end: float, n_out: int, n_steps: int, label: str) -> np.ndarray:
    """Integrate ``y' = f(y)`` on [0, t_end]; return ``n_out`` equispaced states incl. t = 0."""
    if n_out < 2:
        raise ValueError("need at least two output times")
    per_out = n_steps // (n_out - 1)
    dt = t_end / (per_out * (n_out - 1))
    out = np.empty((y0.shape[0], n_out))
    y = y0.copy()
    out[:, 0] = y
    for j in range(1, n_out):
        for _ in range(per_out):
            k1 = f(y)
            k2 = f(y + 0.5 * dt * k1)
            k3 = f(y + 0.5 * dt * k2)
            k4 = f(y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.abs(y) <= INSTABILITY_LIMIT):
            raise UnstableIntegrationError(
                f"{label}: solution exceeded {INSTABILITY_LIMIT:g} at output {j}; "
                "increase the step count (smaller dt) to satisfy the CFL limit"
            )
        out[:, j] = y
    return out


def _step_count(t_end: float, dt_max: float, n_out: int) -> int:
    per_out = max(1, math.ceil(t_end / (n_out - 1) / dt_max - 1e-12))
    return per_out * (n_out - 1)


def _dx_central(y: np.ndarray, dx: float, axis: int = 0) -> np.ndarray:
    return (np.roll(y, -1, axis=axis) - np.roll(y, 1, axis=axis)) / (2.0 * dx)


@dataclass(frozen=True)
class BurgersConfig:
    nu: float = 1e-4
    n_x: int = 5000
    t_end: float = 1.0
    snapshots_per_traj: int = 500
    mu_train: tuple[float, ...] = (10.0, 11.25, 13.75, 15.0)
    mu_valtest: float = 12.5
    rk4_steps: int | None = None  # None: CFL-derived

    def __post_init__(self):
        if self.n_x < 8:
            raise ValueError("n_x must be >= 8")

    @property
    def dx(self) -> float:
        return 2.0 / self.n_x

    @property
    def grid(self) -> np.ndarray:
        return -1.0 + self.dx * np.arange(self.n_x)


BURGERS_DESK = BurgersConfig(n_x=512, snapshots_per_traj=120)


def burgers_initial(x, mu: float) -> np.ndarray:
    return 0.3 * np.exp(-(mu**2) * (np.asarray(x) + 0.5) ** 2) + 1.0


def burgers_rhs(s: np.ndarray, dx: float, nu: float) -> np.ndarray:
    """Conservative central semi-discretization of ``s_t + (s^2/2)_x = nu s_xx`` (periodic)."""
    flux = 0.5 * s * s
    rhs = -_dx_central(flux, dx)
    if nu:
        rhs += nu * (np.roll(s, -1) - 2.0 * s + np.roll(s, 1)) / (dx * dx)
    return rhs


def burgers_steps(cfg: BurgersConfig, mu: float) -> int:
    if cfg.rk4_steps is not None:
        return cfg.rk4_steps
    speed = float(np.max(np.abs(burgers_initial(cfg.grid, mu))))
    dt_max = 0.5 * cfg.dx / speed
    if cfg.nu > 0:
        dt_max = min(dt_max, 0.25 * cfg.dx**2 / cfg.nu)
    return _step_count(cfg.t_end, dt_max, cfg.snapshots_per_traj)


def gen_burgers(cfg: BurgersConfig, mu: float) -> np.ndarray:
    """One trajectory, ``n_x x snapshots_per_traj``, snapshots equispaced on [0, t_end]."""
    s0 = burgers_initial(cfg.grid, mu)
    return _rk4(
        lambda s: burgers_rhs(s, cfg.dx, cfg.nu),
        s0,
        cfg.t_end,
        cfg.snapshots_per_traj,
        burgers_steps(cfg, mu),
        f"burgers(mu={mu})",
    )


@dataclass(frozen=True)
class Wave2dConfig:
    grid_per_dim: int = 600
    half_width: float = 4.0
    t_end: float = 8.0
    n_snapshots: int = 1600
    rk4_steps: int | None = None

    def __post_init__(self):
        if self.grid_per_dim < 16:
            raise ValueError("grid_per_dim must be >= 16")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.grid_per_dim

    @property
    def axis(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.grid_per_dim)


WAVE2D_DESK = Wave2dConfig(grid_per_dim=96)


def wave2d_initial_density(x1, x2) -> np.ndarray:
    return np.exp(-((2.0 * np.pi) ** 2) * ((x1 - 2.0) ** 2 + (x2 - 2.0) ** 2))


def wave2d_rhs(y: np.ndarray, g: int, dx: float) -> np.ndarray:
    rho, vx, vy = y.reshape(3, g, g)  # row-major: axis 0 = x1, axis 1 = x2
    out = np.empty((3, g, g))
    out[0] = -(_dx_central(vx, dx, 0) + _dx_central(vy, dx, 1))
    out[1] = -_dx_central(rho, dx, 0)
    out[2] = -_dx_central(rho, dx, 1)
    return out.reshape(-1)


def wave2d_steps(cfg: Wave2dConfig) -> int:
    if cfg.rk4_steps is not None:
        return cfg.rk4_steps
    # unit wave speed in each direction
    return _step_count(cfg.t_end, 0.5 * cfg.dx, cfg.n_snapshots)


def gen_wave2d(cfg: Wave2dConfig = WAVE2D_DESK) -> np.ndarray:
    """States ``[rho; v_x; v_y]``, each field flattened row-major (x1 slow, x2 fast)."""
    g = cfg.grid_per_dim
    X1, X2 = np.meshgrid(cfg.axis, cfg.axis, indexing="ij")
    y0 = np.concatenate([wave2d_initial_density(X1, X2).reshape(-1), np.zeros(2 * g * g)])
    return _rk4(lambda y: wave2d_rhs(y, g, cfg.dx), y0, cfg.t_end, cfg.n_snapshots,
                wave2d_steps(cfg), "wave2d")


def wave2d_energy(Y: np.ndarray, cfg: Wave2dConfig) -> np.ndarray:
    """Discrete energy ``1/2 sum(rho^2 + |v|^2) dx^2`` of each column."""
    return 0.5 * np.sum(Y * Y, axis=0) * cfg.dx**2


class SplitPattern(str, enum.Enum):
    Alternating = "alternating"  # train odd, val 2 mod 4, test 0 mod 4 (1-based)
    Burgers = "burgers"  # train = given trajectories, val/test alternate on extra one


def split_snapshots(S, pattern: SplitPattern | str = SplitPattern.Alternating):
    """Column index split; returns ``(train, val, test)`` matrices.

    For the alternating pattern, 1-based column j goes to train when j is odd,
    to validation when j = 2 mod 4 and to test when j = 0 mod 4.
    """
    pattern = SplitPattern(pattern)
    if pattern is SplitPattern.Burgers:
        raise TypeError("use split_burgers(train_trajectories, extra_trajectory)")
    S = np.asarray(S)
    tr, va, te = split_indices(S.shape[1])
    return S[:, tr], S[:, va], S[:, te]


def split_indices(k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """0-based column indices of the alternating split."""
    if k % 4:
        raise ValueError(f"column count {k} is not divisible by 4")
    j = np.arange(1, k + 1)
    return np.flatnonzero(j % 2 == 1), np.flatnonzero(j % 4 == 2), np.flatnonzero(j % 4 == 0)


def split_burgers(train_trajectories, extra) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Training data are all given trajectories side by side; the extra
    trajectory's columns go alternately to validation (1st, 3rd, ...) and test."""
    train = np.hstack(list(train_trajectories))
    extra = np.asarray(extra)
    if extra.shape[1] % 2:
        raise ValueError("extra trajectory must have an even number of columns")
    return train, extra[:, 0::2], extra[:, 1::2]


def config_dict(cfg) -> dict:
    return asdict(cfg)


@dataclass
class Dataset:
    name: str
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    center: bool
    config: dict


def _advect(cfg: AdvectConfig, name: str) -> Dataset:
    tr, va, te = split_snapshots(gen_advecting_wave(cfg))
    return Dataset(name, tr, va, te, True, config_dict(cfg))


def _burgers(cfg: BurgersConfig, name: str) -> Dataset:
    trajs = [gen_burgers(cfg, mu) for mu in cfg.mu_train]
    tr, va, te = split_burgers(trajs, gen_burgers(cfg, cfg.mu_valtest))
    return Dataset(name, tr, va, te, True, config_dict(cfg))


def _wave2d(cfg: Wave2dConfig, name: str) -> Dataset:
    tr, va, te = split_snapshots(gen_wave2d(cfg))
    return Dataset(name, tr, va, te, True, config_dict(cfg))


def _parabola(name: str) -> Dataset:
    S = gen_parabola()
    # every point is needed for exactness; all three roles see the full set
    return Dataset(name, S, S.copy(), S.copy(), False, {"columns": 20})


DATASETS = {
    "parabola": lambda: _parabola("parabola"),
    "advect": lambda: _advect(AdvectConfig(), "advect"),
    "advect-desk": lambda: _advect(ADVECT_DESK, "advect-desk"),
    "burgers": lambda: _burgers(BurgersConfig(), "burgers"),
    "burgers-desk": lambda: _burgers(BURGERS_DESK, "burgers-desk"),
    "wave2d": lambda: _wave2d(Wave2dConfig(), "wave2d"),
    "wave2d-desk": lambda: _wave2d(WAVE2D_DESK, "wave2d-desk"),
}


def load_dataset(name: str) -> Dataset:
    try:
        return DATASETS[name]()
    except KeyError:
        raise ValueError(f"unknown dataset {name!r}; choose from {sorted(DATASETS)}") from None
