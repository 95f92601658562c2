"""Domain types and unit conventions shared by the simulator and the analyses.

Sign convention: net power is grid-supplied minus PV-generated power, so a
negative ``net_power_kw`` means the site is injecting into the grid.
Voltages are per-unit on a 240 V base unless a config says otherwise.
"""
from __future__ import annotations

import datetime as _dt
import math
from dataclasses import dataclass, field, fields
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import ConfigError

MINUTES_PER_DAY = 1440
DEFAULT_BASE_VOLTAGE_V = 240.0
OVER_INJECTION_TOLERANCE_KW = 0.1
MAX_IRRADIANCE_KW_M2 = 1.5
VOLTAGE_GUARD_PU = (0.5, 1.5)
MAX_TAP = 16

SAMPLE_COLUMNS = (
    "net_power_kw",
    "pcc_voltage_pu",
    "pv_power_kw",
    "pv_voltage_pu",
    "irradiance_kw_m2",
)


def to_per_unit(voltage_v, base_voltage_v):
    """Convert volts to per-unit. Works elementwise on arrays."""
    if not base_voltage_v > 0:
        raise ConfigError("base_voltage_v", f"must be positive, got {base_voltage_v!r}")
    return voltage_v / base_voltage_v


@dataclass(frozen=True)
class MeterSample:
    """One minute of one site's telemetry."""

    date: _dt.date
    minute: int
    net_power_kw: float
    pcc_voltage_pu: float
    pv_power_kw: float
    pv_voltage_pu: float
    irradiance_kw_m2: float


@dataclass(frozen=True)
class PvSiteSpec:
    site_id: str
    capacity_kw: float
    impedance_ohm: float
    derate: float = 0.906
    orientation_offset_min: int = 0
    position_index: int = 0

    def __post_init__(self):
        if not self.site_id:
            raise ConfigError("site_id", "must be a non-empty string")
        if not self.capacity_kw > 0:
            raise ConfigError("capacity_kw", f"must be > 0, got {self.capacity_kw!r}")
        if not self.impedance_ohm >= 0:
            raise ConfigError("impedance_ohm", f"must be >= 0, got {self.impedance_ohm!r}")
        if not 0 < self.derate <= 1:
            raise ConfigError("derate", f"must lie in (0, 1], got {self.derate!r}")


def validate_sample(sample: MeterSample, spec: Optional[PvSiteSpec]) -> Optional[str]:
    """Return ``None`` if the sample is acceptable, else the first violated invariant.

    Passing ``spec=None`` skips the capacity-dependent over-injection check.
    """
    if not sample.pv_power_kw >= 0:
        return "negative pv power"
    if not 0 <= sample.irradiance_kw_m2 <= MAX_IRRADIANCE_KW_M2:
        return "irradiance_kw_m2 out of range"
    lo, hi = VOLTAGE_GUARD_PU
    if not lo < sample.pcc_voltage_pu < hi:
        return "pcc_voltage_pu out of range"
    if not math.isfinite(sample.net_power_kw):
        return "net_power_kw not finite"
    if spec is not None and sample.net_power_kw < -spec.capacity_kw - OVER_INJECTION_TOLERANCE_KW:
        return "over-injection"
    return None


@dataclass(frozen=True)
class LtcSettings:
    step_pu: float = 0.00625
    deadband_pu: float = 0.0125
    delay_s: float = 30.0


@dataclass(frozen=True)
class LoadModel:
    base_kw: float = 1.0
    day_shape: tuple = ()
    noise_std_kw: float = 0.15
    midday_noise_scale: float = 0.5


@dataclass(frozen=True)
class CloudModel:
    mean_reversion: float = 0.02
    volatility: float = 0.03
    clamp: tuple = (0.0, 1.0)
    site_correlation: float = 0.9


@dataclass(frozen=True)
class UpstreamModel:
    """Exogenous per-second drift of the medium-voltage side seen by the transformer LTC."""

    mean_reversion: float = 0.2
    volatility_pu: float = 0.0005


@dataclass(frozen=True)
class FeederConfig:
    sites: tuple
    segment_resistances_ohm: tuple
    base_voltage_v: float = DEFAULT_BASE_VOLTAGE_V
    source_setpoint_pu: float = 1.02
    ltc: LtcSettings = field(default_factory=LtcSettings)
    load_model: LoadModel = field(default_factory=LoadModel)
    cloud_model: CloudModel = field(default_factory=CloudModel)
    upstream_model: UpstreamModel = field(default_factory=UpstreamModel)
    n_days: int = 160
    seed: int = 0
    start_date: str = "2017-01-01"

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(self.sites))
        object.__setattr__(self, "segment_resistances_ohm", tuple(float(r) for r in self.segment_resistances_ohm))
        self.validate()

    def validate(self):
        if not self.base_voltage_v > 0:
            raise ConfigError("base_voltage_v", "must be positive")
        if not self.sites:
            raise ConfigError("sites", "at least one site is required")
        ids = [s.site_id for s in self.sites]
        if len(set(ids)) != len(ids):
            raise ConfigError("sites", "site_id values must be unique")
        positions = sorted(s.position_index for s in self.sites)
        if positions != list(range(len(self.sites))):
            raise ConfigError("sites", "position_index values must be 0..n-1 without gaps")
        segs = self.segment_resistances_ohm
        if len(segs) != len(self.sites):
            raise ConfigError(
                "segment_resistances_ohm",
                f"expected {len(self.sites)} entries, got {len(segs)}",
            )
        for k, r in enumerate(segs):
            if not r >= 0:
                raise ConfigError(f"segment_resistances_ohm[{k}]", "must be >= 0")
        prefix = np.cumsum(segs)
        for i, s in enumerate(self.sites):
            if abs(prefix[s.position_index] - s.impedance_ohm) > 1e-9:
                raise ConfigError(
                    f"sites[{i}].impedance_ohm",
                    f"{s.impedance_ohm} does not match feeder prefix resistance "
                    f"{prefix[s.position_index]:.9f} at position {s.position_index}",
                )
        ltc = self.ltc
        if not ltc.step_pu > 0:
            raise ConfigError("ltc.step_pu", "must be > 0")
        if not ltc.deadband_pu >= ltc.step_pu:
            raise ConfigError("ltc.deadband_pu", "must be >= ltc.step_pu")
        if not ltc.delay_s > 0:
            raise ConfigError("ltc.delay_s", "must be > 0")
        lm = self.load_model
        if lm.day_shape and len(lm.day_shape) != MINUTES_PER_DAY:
            raise ConfigError("load_model.day_shape", f"needs {MINUTES_PER_DAY} multipliers")
        if not lm.noise_std_kw >= 0:
            raise ConfigError("load_model.noise_std_kw", "must be >= 0")
        if not 0 < lm.midday_noise_scale <= 1:
            raise ConfigError("load_model.midday_noise_scale", "must lie in (0, 1]")
        cm = self.cloud_model
        if not 0 <= cm.mean_reversion <= 1:
            raise ConfigError("cloud_model.mean_reversion", "must lie in [0, 1]")
        if not cm.volatility >= 0:
            raise ConfigError("cloud_model.volatility", "must be >= 0")
        if len(cm.clamp) != 2 or not 0 <= cm.clamp[0] <= cm.clamp[1] <= 1:
            raise ConfigError("cloud_model.clamp", "must be [lo, hi] within [0, 1]")
        if not 0 <= cm.site_correlation <= 1:
            raise ConfigError("cloud_model.site_correlation", "must lie in [0, 1]")
        um = self.upstream_model
        if not 0 <= um.mean_reversion <= 1:
            raise ConfigError("upstream_model.mean_reversion", "must lie in [0, 1]")
        if not um.volatility_pu >= 0:
            raise ConfigError("upstream_model.volatility_pu", "must be >= 0")
        if not (isinstance(self.n_days, int) and self.n_days > 0):
            raise ConfigError("n_days", "must be a positive integer")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        try:
            _dt.date.fromisoformat(self.start_date)
        except (TypeError, ValueError):
            raise ConfigError("start_date", f"not an ISO date: {self.start_date!r}") from None

    def site(self, site_id) -> PvSiteSpec:
        for s in self.sites:
            if s.site_id == site_id:
                return s
        raise KeyError(site_id)

    def to_dict(self) -> dict:
        def conv(obj):
            if hasattr(obj, "__dataclass_fields__"):
                return {f.name: conv(getattr(obj, f.name)) for f in fields(obj)}
            if isinstance(obj, (tuple, list)):
                return [conv(v) for v in obj]
            return obj

        return conv(self)

    @classmethod
    def from_dict(cls, data: dict) -> "FeederConfig":
        """Build a config from a JSON-style mapping, reporting the offending field path."""
        if not isinstance(data, dict):
            raise ConfigError("", "config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        for req in ("sites", "segment_resistances_ohm"):
            if req not in data:
                raise ConfigError(req, "missing required field")
        kwargs = dict(data)
        sites = []
        for i, s in enumerate(data["sites"]):
            try:
                sites.append(PvSiteSpec(**s))
            except ConfigError as exc:
                raise ConfigError(f"sites[{i}].{exc.path}", str(exc).split(": ", 1)[-1]) from None
            except TypeError as exc:
                raise ConfigError(f"sites[{i}]", str(exc)) from None
        kwargs["sites"] = sites
        nested = {
            "ltc": LtcSettings,
            "load_model": LoadModel,
            "cloud_model": CloudModel,
            "upstream_model": UpstreamModel,
        }
        for name, typ in nested.items():
            if name in data:
                sub = data[name]
                if not isinstance(sub, dict):
                    raise ConfigError(name, "must be an object")
                bad = set(sub) - {f.name for f in fields(typ)}
                if bad:
                    raise ConfigError(f"{name}.{sorted(bad)[0]}", "unknown field")
                sub = {k: tuple(v) if isinstance(v, list) else v for k, v in sub.items()}
                kwargs[name] = typ(**sub)
        return cls(**kwargs)


@dataclass(frozen=True)
class SharedImpedanceMatrix:
    """Pairwise resistance of the feeder path shared by two sites back to the transformer."""

    r_ohm: np.ndarray

    @classmethod
    def from_segments(cls, segment_resistances_ohm: Sequence[float], positions: Sequence[int] = None):
        """Radial line: entry (i, j) is the prefix resistance up to the nearer of the two sites."""
        segs = np.asarray(segment_resistances_ohm, dtype=float)
        if np.any(segs < 0):
            raise ConfigError("segment_resistances_ohm", "entries must be >= 0")
        prefix = np.cumsum(segs)
        pos = np.arange(len(segs)) if positions is None else np.asarray(positions, dtype=int)
        r = prefix[np.minimum.outer(pos, pos)]
        r.setflags(write=False)
        return cls(r)

    @classmethod
    def from_config(cls, config: FeederConfig):
        return cls.from_segments(
            config.segment_resistances_ohm, [s.position_index for s in config.sites]
        )

    @property
    def n(self):
        return self.r_ohm.shape[0]


@dataclass(frozen=True)
class BetaFit:
    beta_pu_per_kw: float
    intercept_pu: float
    n_samples: int
    residual_std_pu: float
    explained_variance: float


@dataclass(frozen=True)
class BetaSeries:
    kind: str  # "daily" or "minute_of_day"
    entries: tuple = ()

    def __post_init__(self):
        if self.kind not in ("daily", "minute_of_day"):
            raise ValueError(f"unknown series kind {self.kind!r}")
        labels = [lbl for lbl, _ in self.entries]
        if any(b <= a for a, b in zip(labels, labels[1:])):
            raise ValueError("series labels must be strictly increasing")

    @property
    def labels(self) -> np.ndarray:
        return np.array([lbl for lbl, _ in self.entries], dtype=int)

    @property
    def betas(self) -> np.ndarray:
        return np.array([f.beta_pu_per_kw for _, f in self.entries], dtype=float)

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class BetaSummary:
    minimum: float
    average: float
    std: float
    map: float


@dataclass(frozen=True)
class Density:
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))


@dataclass(frozen=True, eq=False)
class SiteStream:
    """Column-oriented per-minute samples of one site, sorted by (day, minute).

    ``day`` is the day index counted from ``start_date``.
    """

    site_id: str
    start_date: _dt.date
    day: np.ndarray
    minute: np.ndarray
    net_power_kw: np.ndarray
    pcc_voltage_pu: np.ndarray
    pv_power_kw: np.ndarray
    pv_voltage_pu: np.ndarray
    irradiance_kw_m2: np.ndarray

    def __len__(self):
        return len(self.day)

    def dates(self) -> list:
        return [self.start_date + _dt.timedelta(days=int(d)) for d in self.day]

    def __iter__(self) -> Iterator[MeterSample]:
        for k, date in enumerate(self.dates()):
            yield MeterSample(
                date,
                int(self.minute[k]),
                *(float(getattr(self, c)[k]) for c in SAMPLE_COLUMNS),
            )

    def select(self, mask) -> "SiteStream":
        return SiteStream(
            self.site_id,
            self.start_date,
            self.day[mask],
            self.minute[mask],
            *(getattr(self, c)[mask] for c in SAMPLE_COLUMNS),
        )

    @property
    def n_days(self) -> int:
        return len(np.unique(self.day))

    def violations(self, spec: Optional[PvSiteSpec]) -> np.ndarray:
        """Vectorised ``validate_sample``: first violated invariant per row, '' when valid."""
        out = np.full(len(self), "", dtype=object)
        lo, hi = VOLTAGE_GUARD_PU
        checks = [
            ("negative pv power", ~(self.pv_power_kw >= 0)),
            ("irradiance_kw_m2 out of range", ~((self.irradiance_kw_m2 >= 0) & (self.irradiance_kw_m2 <= MAX_IRRADIANCE_KW_M2))),
            ("pcc_voltage_pu out of range", ~((self.pcc_voltage_pu > lo) & (self.pcc_voltage_pu < hi))),
            ("net_power_kw not finite", ~np.isfinite(self.net_power_kw)),
        ]
        if spec is not None:
            limit = -spec.capacity_kw - OVER_INJECTION_TOLERANCE_KW
            checks.append(("over-injection", self.net_power_kw < limit))
        # reversed so the earliest check wins
        for reason, bad in reversed(checks):
            out[bad] = reason
        return out


@dataclass(frozen=True, eq=False)
class Dataset:
    config: FeederConfig
    streams: dict

    def __getitem__(self, site_id) -> SiteStream:
        return self.streams[site_id]

    @property
    def site_ids(self):
        return [s.site_id for s in self.config.sites if s.site_id in self.streams]

    def spec(self, site_id) -> PvSiteSpec:
        return self.config.site(site_id)
