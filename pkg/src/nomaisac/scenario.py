"""System configuration, channel sampling, steering vectors and desired patterns."""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

DEFAULT_GRID_STEP = math.pi / 100


@dataclass(frozen=True)
class SystemConfig:
    n_antennas: int = 8
    n_users: int = 5
    q_streams: int = 1
    targets_deg: tuple[float, ...] = (-60.0, 0.0, 60.0)
    beam_width_deg: float = 10.0
    grid_step_rad: float = DEFAULT_GRID_STEP
    pt_dbm: float = 20.0
    noise_dbm: float = -80.0
    pathloss_db: float = 80.0
    rng_seed: int = 2023

    def __post_init__(self):
        object.__setattr__(self, "targets_deg", tuple(float(t) for t in self.targets_deg))
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if self.n_users < 1:
            raise ValueError("n_users must be >= 1")
        if not 0 <= self.q_streams <= self.n_antennas:
            raise ValueError("q_streams must lie in [0, n_antennas]")
        if not self.beam_width_deg > 0:
            raise ValueError("beam_width_deg must be positive")
        steps = math.pi / self.grid_step_rad
        if self.grid_step_rad <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ValueError("grid_step_rad must divide pi")
        for v in (self.pt_dbm, self.noise_dbm, self.pathloss_db):
            if not math.isfinite(v):
                raise ValueError("power/noise/pathloss must be finite")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")

    @property
    def pt_watts(self) -> float:
        return dbm_to_watts(self.pt_dbm)

    @property
    def noise_watts(self) -> float:
        return dbm_to_watts(self.noise_dbm)

    def with_(self, **kw) -> "SystemConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class ChannelSet:
    channels: np.ndarray  # (K, N) complex, normalized by the noise std
    noise_power: float = 1.0
    raw_gain_db: float = 0.0

    @property
    def n_users(self) -> int:
        return self.channels.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.channels.shape[1]

    def __post_init__(self):
        h = np.asarray(self.channels, dtype=complex)
        if h.ndim != 2:
            raise ValueError("channels must be a (K, N) array")
        if not np.all(np.isfinite(h)):
            raise ValueError("channels must be finite")
        h.setflags(write=False)
        object.__setattr__(self, "channels", h)


@dataclass(frozen=True)
class AngleGrid:
    angles_rad: np.ndarray
    steering: np.ndarray  # (L, N)

    @property
    def size(self) -> int:
        return len(self.angles_rad)

    @property
    def angles_deg(self) -> np.ndarray:
        return np.degrees(self.angles_rad)


def dbm_to_watts(p: float) -> float:
    return 10.0 ** ((p - 30.0) / 10.0)


def make_steering_vector(n_antennas: int, theta: float) -> np.ndarray:
    """Half-wavelength ULA response, entry n = exp(j*pi*n*sin(theta))."""
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    if not math.isfinite(theta):
        raise ValueError("theta must be finite")
    n = np.arange(n_antennas)
    return np.exp(1j * math.pi * n * math.sin(theta))


def steering_matrix(n_antennas: int, angles: np.ndarray) -> np.ndarray:
    """Stacked steering vectors, shape (len(angles), n_antennas)."""
    n = np.arange(n_antennas)
    return np.exp(1j * math.pi * np.outer(np.sin(angles), n))


def make_angle_grid(n_antennas: int, step: float = DEFAULT_GRID_STEP) -> AngleGrid:
    count = int(round(math.pi / step))
    # index-based construction keeps both endpoints exact
    angles = -math.pi / 2 + step * np.arange(count + 1)
    angles[-1] = math.pi / 2
    return AngleGrid(angles, steering_matrix(n_antennas, angles))


def desired_pattern(grid: AngleGrid, targets_deg, beam_width_deg: float) -> np.ndarray:
    """Indicator of the union of closed windows [t - w/2, t + w/2]."""
    deg = grid.angles_deg
    phi = np.zeros(grid.size)
    half = beam_width_deg / 2
    for t in targets_deg:
        if not -90.0 <= t <= 90.0:
            raise ValueError(f"target {t} outside [-90, 90] degrees")
        # small slack absorbs round-off of the radian grid at window edges
        phi[(deg >= t - half - 1e-9) & (deg <= t + half + 1e-9)] = 1.0
    return phi


def build_desired_pattern(cfg: SystemConfig) -> tuple[AngleGrid, np.ndarray]:
    grid = make_angle_grid(cfg.n_antennas, cfg.grid_step_rad)
    return grid, desired_pattern(grid, cfg.targets_deg, cfg.beam_width_deg)


def realization_rng(master_seed: int, realization: int) -> np.random.Generator:
    """Generator for one Monte Carlo realization; independent of how many others run."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(realization,)))


def sample_raw_channels(n_antennas: int, n_users: int, pathloss_db: float,
                        rng: np.random.Generator) -> np.ndarray:
    var = 10.0 ** (-pathloss_db / 10.0)
    shape = (n_users, n_antennas)
    return math.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channels(cfg: SystemConfig, seed: int | None = None, realization: int = 0) -> ChannelSet:
    """I.i.d. Rayleigh channels, rescaled so the receiver noise power is one."""
    seed = cfg.rng_seed if seed is None else seed
    rng = realization_rng(seed, realization)
    h = sample_raw_channels(cfg.n_antennas, cfg.n_users, cfg.pathloss_db, rng)
    h = h / math.sqrt(cfg.noise_watts)
    return ChannelSet(h, 1.0, cfg.pathloss_db)


# ---------------------------------------------------------------- config files

_LIST_KEYS = {"targets_deg"}


def load_config(path: str | Path, base: SystemConfig | None = None) -> SystemConfig:
    """Read a ``[system]`` INI section; keys mirror :class:`SystemConfig`.

    Angles are in degrees except ``grid_step_deg`` which, when given,
    overrides ``grid_step_rad``.  Keys missing from the file keep the values
    of ``base`` (the dataclass defaults when omitted).
    """
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    sec = parser["system"] if parser.has_section("system") else {}
    kw = {}
    types = {f.name: f.type for f in fields(SystemConfig)}
    for key, raw in sec.items():
        if key == "grid_step_deg":
            kw["grid_step_rad"] = math.pi / round(180.0 / float(raw))
        elif key in _LIST_KEYS:
            kw[key] = tuple(float(x) for x in raw.replace(",", " ").split())
        elif key in types:
            kw[key] = int(raw) if types[key] == "int" else float(raw)
        else:
            raise KeyError(f"unknown config key {key!r}")
    return replace(base, **kw) if base is not None else SystemConfig(**kw)


def dump_config(cfg: SystemConfig) -> str:
    lines = ["[system]"]
    for f in fields(SystemConfig):
        v = getattr(cfg, f.name)
        if f.name == "targets_deg":
            v = ", ".join(f"{x:g}" for x in v)
        elif f.name == "grid_step_rad":
            lines.append(f"grid_step_deg = {math.degrees(v):.12g}")
            continue
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
