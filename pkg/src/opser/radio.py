"""Physical layer: propagation, RSSI to LQI mapping and reception decisions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterable

from .engine import RngStream

SPEED_OF_LIGHT = 299_792_458.0
CAPTURE_MARGIN_DB = 10.0


class PropagationModel(str, enum.Enum):
    LOG_NORMAL_SHADOWING = "log_normal_shadowing"
    TWO_RAY_GROUND_WITH_ERROR = "two_ray_ground_with_error"


def free_space_loss_db(distance_m: float, freq_hz: float = 2.4e9) -> float:
    wavelength = SPEED_OF_LIGHT / freq_hz
    return 20.0 * math.log10(4.0 * math.pi * distance_m / wavelength)


@dataclass(frozen=True)
class PropagationParams:
    model: PropagationModel = PropagationModel.LOG_NORMAL_SHADOWING
    pt_dbm: float = 0.0
    beta: float = 4.5
    sigma_db: float = 4.0
    d0_m: float = 1.0
    pl_d0_db: float = 40.05
    error_rate: float = 0.0
    rx_thresh_dbm: float = -110.0
    cs_thresh_dbm: float = -110.0
    ed_min_dbm: float = -110.0
    ed_max_dbm: float = -45.0
    antenna_height_m: float = 0.03125
    freq_hz: float = 2.4e9

    def __post_init__(self):
        if not self.ed_min_dbm < self.ed_max_dbm:
            raise ValueError("ed_min_dbm must be below ed_max_dbm")
        if self.sigma_db < 0:
            raise ValueError("sigma_db must be non-negative")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.d0_m <= 0:
            raise ValueError("d0_m must be positive")
        if not 0.0 <= self.error_rate <= 1.0:
            raise ValueError("error_rate must lie in [0, 1]")
        object.__setattr__(self, "model", PropagationModel(self.model))


@dataclass(frozen=True)
class RxReport:
    rssi_dbm: float
    lqi: int
    received_ok: bool
    collided: bool


def dbm_to_mw(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0)


def mw_to_dbm(mw: float) -> float:
    return 10.0 * math.log10(mw) if mw > 0 else -math.inf


def _two_ray_mean_dbm(params: PropagationParams, distance_m: float) -> float:
    h = params.antenna_height_m
    wavelength = SPEED_OF_LIGHT / params.freq_hz
    crossover = 4.0 * math.pi * h * h / wavelength
    if distance_m < crossover:
        return params.pt_dbm - free_space_loss_db(distance_m, params.freq_hz)
    # Pr = Pt * ht^2 * hr^2 / d^4 with unit gains and system loss
    return params.pt_dbm + 10.0 * math.log10((h * h) ** 2 / distance_m**4)


def mean_rssi(params: PropagationParams, distance_m: float) -> float:
    """Deterministic part of the received power, in dBm."""
    if distance_m <= 0:
        raise ValueError("degenerate geometry: distance must be positive")
    if params.model is PropagationModel.TWO_RAY_GROUND_WITH_ERROR:
        return _two_ray_mean_dbm(params, distance_m)
    return params.pt_dbm - params.pl_d0_db - 10.0 * params.beta * math.log10(distance_m / params.d0_m)


def compute_rssi(params: PropagationParams, distance_m: float, rng: RngStream | None = None) -> float:
    """Received power in dBm with a fresh shadowing draw (log-normal model only)."""
    mu = mean_rssi(params, distance_m)
    if params.model is PropagationModel.LOG_NORMAL_SHADOWING and params.sigma_db > 0:
        if rng is None:
            raise ValueError("a random stream is required when sigma_db > 0")
        return mu + rng.normal(0.0, params.sigma_db)
    return mu


def rssi_to_lqi(rssi_dbm: float, ed_min_dbm: float, ed_max_dbm: float) -> int:
    if not ed_min_dbm < ed_max_dbm:
        raise ValueError("ed_min_dbm must be below ed_max_dbm")
    clamped = min(max(rssi_dbm, ed_min_dbm), ed_max_dbm)
    scaled = 255.0 * (clamped - ed_min_dbm) / (ed_max_dbm - ed_min_dbm)
    return min(255, max(0, math.floor(scaled + 0.5)))


def survives_interference(rssi_dbm: float, interference_mw: float) -> bool:
    """Capture rule: the frame must beat the summed interference by the capture margin."""
    if interference_mw <= 0.0:
        return True
    return rssi_dbm - mw_to_dbm(interference_mw) >= CAPTURE_MARGIN_DB


def reception_decision(
    params: PropagationParams,
    rssi_dbm: float,
    interferers_dbm: Iterable[float] = (),
    rng: RngStream | None = None,
) -> RxReport:
    """Decide whether a frame arriving at ``rssi_dbm`` is decoded.

    ``interferers_dbm`` lists the received powers of every frame that
    overlapped it in time; an empty list means no contention.
    """
    lqi = rssi_to_lqi(rssi_dbm, params.ed_min_dbm, params.ed_max_dbm)
    if rssi_dbm < params.rx_thresh_dbm:
        return RxReport(rssi_dbm, lqi, False, False)
    interference = sum(dbm_to_mw(p) for p in interferers_dbm)
    if not survives_interference(rssi_dbm, interference):
        return RxReport(rssi_dbm, lqi, False, True)
    if params.model is PropagationModel.TWO_RAY_GROUND_WITH_ERROR and params.error_rate > 0:
        if rng is None:
            raise ValueError("a random stream is required for the packet error model")
        if rng.random() < params.error_rate:
            return RxReport(rssi_dbm, lqi, False, False)
    return RxReport(rssi_dbm, lqi, True, False)


def prr_vs_distance(params: PropagationParams, distance_m: float, trials: int, rng: RngStream) -> float:
    """Monte Carlo fraction of RSSI draws at or above the receiver sensitivity."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    hits = 0
    for _ in range(trials):
        if compute_rssi(params, distance_m, rng) >= params.rx_thresh_dbm:
            hits += 1
    return hits / trials


def prr_closed_form(params: PropagationParams, distance_m: float) -> float:
    """Gaussian-tail reception probability for the log-normal model."""
    mu = mean_rssi(params, distance_m)
    if params.sigma_db == 0 or params.model is not PropagationModel.LOG_NORMAL_SHADOWING:
        return 1.0 if mu >= params.rx_thresh_dbm else 0.0
    return NormalDist().cdf((mu - params.rx_thresh_dbm) / params.sigma_db)


def deterministic_range(params: PropagationParams) -> float:
    """Distance at which the mean RSSI equals the receiver sensitivity."""
    if params.model is PropagationModel.TWO_RAY_GROUND_WITH_ERROR:
        h2 = params.antenna_height_m ** 2
        return (h2 * h2 / dbm_to_mw(params.rx_thresh_dbm - params.pt_dbm)) ** 0.25
    margin = params.pt_dbm - params.pl_d0_db - params.rx_thresh_dbm
    return params.d0_m * 10.0 ** (margin / (10.0 * params.beta))
