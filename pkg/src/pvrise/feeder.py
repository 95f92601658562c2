"""Synthetic radial-feeder simulator producing per-minute meter data.

The inner loop runs at one-second resolution. Each minute the meters report
the average net and PV power, the minute-midpoint irradiance, and the
*maximum* of the sixty per-second PCC voltages.

Voltages follow a linearised resistive power flow,
``V_i = V_source - sum_j R_ij * P_j * 1000 / V_base**2``, with ``R_ij`` the
resistance of the path shared by sites ``i`` and ``j``.
"""
from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from .errors import InvalidInputError
from .model import (
    MAX_TAP,
    MINUTES_PER_DAY,
    CloudModel,
    Dataset,
    FeederConfig,
    LoadModel,
    LtcSettings,
    PvSiteSpec,
    SharedImpedanceMatrix,
    SiteStream,
    UpstreamModel,
)

DAYLIGHT_START_MIN = 360
DAYLIGHT_END_MIN = 1080
MIDDAY_WINDOW_MIN = (720, 840)
SECONDS_PER_MINUTE = 60

# Default five-site feeder, listed from the far end of the line inwards.
DEFAULT_CAPACITY_KW = (1.94, 3.87, 7.31, 11.61, 9.24)
DEFAULT_IMPEDANCE_OHM = (0.077, 0.060, 0.053, 0.025, 0.011)
PV_IRRADIANCE_SLOPE = 0.906


@dataclass(frozen=True)
class LtcState:
    tap_position: int = 0
    violation_timer_s: float = 0.0


@dataclass(frozen=True)
class CloudState:
    clearness_index: np.ndarray


def clear_sky_irradiance(minute_of_day, site: PvSiteSpec):
    """Raised-cosine clear-sky irradiance in kW/m², peaking at 1.0 at 720 + offset.

    ``minute_of_day`` may be fractional or an array. The 12-hour daylight
    window moves with the site's orientation offset.
    """
    m = np.asarray(minute_of_day, dtype=float) - site.orientation_offset_min
    width = DAYLIGHT_END_MIN - DAYLIGHT_START_MIN
    inside = (m >= DAYLIGHT_START_MIN) & (m <= DAYLIGHT_END_MIN)
    value = np.where(inside, 0.5 * (1.0 - np.cos(2 * np.pi * (m - DAYLIGHT_START_MIN) / width)), 0.0)
    return float(value) if value.ndim == 0 else value


def cloud_step(state: CloudState, rng: np.random.Generator, cloud_model: CloudModel) -> CloudState:
    """One-minute AR(1) update of the clearness index, reverting toward clear sky.

    Innovations share a common weather component across sites with
    correlation ``cloud_model.site_correlation``.
    """
    k = np.asarray(state.clearness_index, dtype=float)
    k = k + cloud_model.mean_reversion * (1.0 - k)
    if cloud_model.volatility > 0:
        rho = cloud_model.site_correlation
        common, local = rng.standard_normal(), rng.standard_normal(k.shape)
        k = k + cloud_model.volatility * (np.sqrt(rho) * common + np.sqrt(1.0 - rho) * local)
    lo, hi = cloud_model.clamp
    return CloudState(np.clip(k, lo, hi))


def pv_output(irradiance_kw_m2, spec: PvSiteSpec):
    """Inverter output in kW for the given irradiance."""
    irr = np.asarray(irradiance_kw_m2, dtype=float)
    if np.any(irr < 0):
        raise InvalidInputError("irradiance must be non-negative")
    out = spec.derate * irr * spec.capacity_kw
    return float(out) if out.ndim == 0 else out


def default_day_shape() -> tuple:
    """Residential load multipliers per minute: overnight base, morning and evening peaks."""
    m = np.arange(MINUTES_PER_DAY, dtype=float)
    shape = (
        0.45
        + 0.35 * np.exp(-0.5 * ((m - 450) / 60) ** 2)
        + 0.15 * np.exp(-0.5 * ((m - 780) / 120) ** 2)
        + 0.75 * np.exp(-0.5 * ((m - 1140) / 90) ** 2)
    )
    return tuple(np.round(shape, 6).tolist())


def _day_shape(load_model: LoadModel) -> np.ndarray:
    return np.asarray(load_model.day_shape or default_day_shape(), dtype=float)


def load_kw(minute_of_day, rng: np.random.Generator, load_model: LoadModel, size=None):
    """Stochastic household load in kW, clamped at zero.

    ``minute_of_day`` may be an integer or an integer array; ``size`` is passed
    to the noise draw and must broadcast against it.
    """
    minute = np.asarray(minute_of_day, dtype=int)
    mean = load_model.base_kw * _day_shape(load_model)[minute]
    lo, hi = MIDDAY_WINDOW_MIN
    std = load_model.noise_std_kw * np.where(
        (minute >= lo) & (minute <= hi), load_model.midday_noise_scale, 1.0
    )
    shape = np.broadcast_shapes(mean.shape, size if size is not None else ())
    noise = rng.standard_normal(shape) if load_model.noise_std_kw > 0 else 0.0
    out = np.maximum(mean + std * noise, 0.0)
    return float(out) if out.ndim == 0 else out


def feeder_voltages(net_powers_kw, source_pu, impedance: SharedImpedanceMatrix, base_voltage_v):
    """Per-unit voltage at every site for the given net powers.

    ``net_powers_kw`` has the site axis last; leading axes (e.g. time) broadcast
    against ``source_pu``.
    """
    if not base_voltage_v > 0:
        raise InvalidInputError("base_voltage_v must be positive")
    p = np.asarray(net_powers_kw, dtype=float)
    r = np.asarray(impedance.r_ohm if isinstance(impedance, SharedImpedanceMatrix) else impedance)
    if p.shape[-1:] != (r.shape[0],):
        raise InvalidInputError(f"net powers have {p.shape[-1:]} sites, impedance matrix has {r.shape[0]}")
    drop = (p @ r.T) * 1000.0 / base_voltage_v**2
    return np.asarray(source_pu, dtype=float)[..., None] - drop if np.ndim(source_pu) else source_pu - drop


def ltc_update(state: LtcState, transformer_voltage_pu: float, dt_s: float, ltc: LtcSettings, setpoint_pu: float) -> LtcState:
    """Advance the tap changer by ``dt_s`` seconds.

    Outside the half-deadband the violation timer accumulates; once it reaches
    the delay the tap moves one step toward the setpoint and the timer resets.
    Back inside the band the timer drops to zero.
    """
    if not dt_s > 0:
        raise InvalidInputError("dt_s must be positive")
    deviation = transformer_voltage_pu - setpoint_pu
    if abs(deviation) <= ltc.deadband_pu / 2:
        return LtcState(state.tap_position, 0.0)
    timer = state.violation_timer_s + dt_s
    if timer < ltc.delay_s:
        return LtcState(state.tap_position, timer)
    tap = state.tap_position - 1 if deviation > 0 else state.tap_position + 1
    return LtcState(int(np.clip(tap, -MAX_TAP, MAX_TAP)), 0.0)


def _ltc_minute(state: LtcState, upstream_pu: np.ndarray, config: FeederConfig):
    """Run the LTC second by second through one minute of upstream drift.

    Returns the new state and the tap position in force during each second.
    """
    ltc = config.ltc
    setpoint = config.source_setpoint_pu
    half_band = ltc.deadband_pu / 2
    if state.violation_timer_s == 0.0 and np.max(np.abs(upstream_pu + state.tap_position * ltc.step_pu)) <= half_band:
        return state, np.full(len(upstream_pu), state.tap_position)
    taps = np.empty(len(upstream_pu), dtype=int)
    for s, u in enumerate(upstream_pu):
        taps[s] = state.tap_position
        state = ltc_update(state, setpoint + u + state.tap_position * ltc.step_pu, 1.0, ltc, setpoint)
    return state, taps


def upstream_drift(rng: np.random.Generator, n_seconds: int, start_pu: float, model: UpstreamModel) -> np.ndarray:
    """Per-second AR(1) deviation of the medium-voltage side from nominal, in pu."""
    if model.volatility_pu == 0:
        return start_pu * (1.0 - model.mean_reversion) ** np.arange(1, n_seconds + 1)
    phi = 1.0 - model.mean_reversion
    noise = rng.standard_normal(n_seconds)
    out, _ = lfilter([model.volatility_pu], [1.0, -phi], noise, zi=[phi * start_pu])
    return out


def default_config(**overrides) -> FeederConfig:
    """Five-site radial feeder with the default capacities and impedances.

    Sites are listed by decreasing impedance; positions run from the
    transformer outwards by increasing impedance.
    """
    offsets = (-20, 10, 0, 25, -10)
    order = np.argsort(DEFAULT_IMPEDANCE_OHM)
    position = np.empty(len(order), dtype=int)
    position[order] = np.arange(len(order))
    sites = [
        PvSiteSpec(
            site_id=f"site{k + 1}",
            capacity_kw=cap,
            impedance_ohm=imp,
            derate=PV_IRRADIANCE_SLOPE,
            orientation_offset_min=offsets[k],
            position_index=int(position[k]),
        )
        for k, (cap, imp) in enumerate(zip(DEFAULT_CAPACITY_KW, DEFAULT_IMPEDANCE_OHM))
    ]
    sorted_imp = np.sort(DEFAULT_IMPEDANCE_OHM)
    segments = np.round(np.diff(sorted_imp, prepend=0.0), 12)
    kwargs = dict(sites=sites, segment_resistances_ohm=tuple(segments.tolist()))
    kwargs.update(overrides)
    return FeederConfig(**kwargs)


def single_site_config(impedance_ohm=0.077, capacity_kw=1.94, **overrides) -> FeederConfig:
    site = PvSiteSpec("site1", capacity_kw, impedance_ohm, derate=PV_IRRADIANCE_SLOPE)
    return FeederConfig(sites=[site], segment_resistances_ohm=[impedance_ohm], **overrides)


def noise_free(config: FeederConfig, loads_off=False) -> FeederConfig:
    """Copy of ``config`` with every stochastic term switched off."""
    load_model = replace(config.load_model, noise_std_kw=0.0)
    if loads_off:
        load_model = replace(load_model, base_kw=0.0)
    return replace(
        config,
        load_model=load_model,
        cloud_model=replace(config.cloud_model, volatility=0.0),
        upstream_model=replace(config.upstream_model, volatility_pu=0.0),
    )


def simulate(config: FeederConfig) -> Dataset:
    """Run the feeder for ``config.n_days`` days and return per-site minute streams.

    A pure function of ``config`` (including its seed).
    """
    config.validate()
    sites = config.sites
    n = len(sites)
    impedance = SharedImpedanceMatrix.from_config(config)
    cloud_rng, load_rng, upstream_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(3)
    )

    spm = SECONDS_PER_MINUTE
    minutes = np.arange(MINUTES_PER_DAY)
    # irradiance is sampled at the minute midpoint and held for the minute
    clear_mid = np.column_stack([clear_sky_irradiance(minutes + 0.5, s) for s in sites])
    rated = np.array([s.derate * s.capacity_kw for s in sites])

    clouds = CloudState(np.ones(n))
    ltc_state = LtcState()
    upstream_end = 0.0
    cols = {name: [] for name in ("net", "vmax", "vmean", "pv", "irr")}

    for _ in range(config.n_days):
        k = np.empty((MINUTES_PER_DAY, n))
        for m in range(MINUTES_PER_DAY):
            clouds = cloud_step(clouds, cloud_rng, config.cloud_model)
            k[m] = clouds.clearness_index
        upstream = upstream_drift(upstream_rng, MINUTES_PER_DAY * spm, upstream_end, config.upstream_model)
        upstream_end = upstream[-1]
        taps = np.empty(MINUTES_PER_DAY * spm, dtype=int)
        for m in range(MINUTES_PER_DAY):
            sl = slice(m * spm, (m + 1) * spm)
            ltc_state, taps[sl] = _ltc_minute(ltc_state, upstream[sl], config)
        source_sec = config.source_setpoint_pu + upstream + taps * config.ltc.step_pu

        irr = clear_mid * k
        pv = irr * rated
        loads = load_kw(minutes[:, None], load_rng, config.load_model, size=(MINUTES_PER_DAY, n))
        net_sec = np.repeat(loads - pv, spm, axis=0)
        v_sec = feeder_voltages(net_sec, source_sec, impedance, config.base_voltage_v)
        v_sec = v_sec.reshape(MINUTES_PER_DAY, spm, n)
        cols["vmax"].append(v_sec.max(axis=1))
        cols["vmean"].append(v_sec.mean(axis=1))
        cols["net"].append(net_sec.reshape(MINUTES_PER_DAY, spm, n).mean(axis=1))
        cols["pv"].append(pv)
        cols["irr"].append(irr)

    stacked = {name: np.concatenate(v) if v else np.empty((0, n)) for name, v in cols.items()}
    day = np.repeat(np.arange(config.n_days), MINUTES_PER_DAY)
    minute = np.tile(minutes, config.n_days)
    start = _dt.date.fromisoformat(config.start_date)
    streams = {}
    for i, s in enumerate(sites):
        streams[s.site_id] = SiteStream(
            s.site_id,
            start,
            day.copy(),
            minute.copy(),
            net_power_kw=stacked["net"][:, i].copy(),
            pcc_voltage_pu=stacked["vmax"][:, i].copy(),
            pv_power_kw=stacked["pv"][:, i].copy(),
            pv_voltage_pu=stacked["vmean"][:, i].copy(),
            irradiance_kw_m2=stacked["irr"][:, i].copy(),
        )
    return Dataset(config, streams)
