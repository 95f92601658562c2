"""PV output against irradiance, and daily energy yield per kW of capacity."""
import numpy as np

from .errors import InsufficientDataError
from .model import MINUTES_PER_DAY, Dataset
from .regression import OLSRegressor

DAYLIGHT_IRRADIANCE_KW_M2 = 0.05


def _daylight_points(dataset: Dataset, site_ids=None):
    ids = dataset.site_ids if site_ids is None else list(site_ids)
    irr, per_cap = [], []
    for sid in ids:
        st = dataset[sid]
        day = st.irradiance_kw_m2 > DAYLIGHT_IRRADIANCE_KW_M2
        irr.append(st.irradiance_kw_m2[day])
        per_cap.append(st.pv_power_kw[day] / dataset.spec(sid).capacity_kw)
    return np.concatenate(irr), np.concatenate(per_cap)


def fit_irradiance_slope(dataset: Dataset, min_samples: int = 100, site_ids=None) -> float:
    """Pooled slope of PV output per kW of capacity against irradiance, through the origin."""
    irr, per_cap = _daylight_points(dataset, site_ids)
    if len(irr) < min_samples:
        raise InsufficientDataError(f"{len(irr)} daylight samples, need {min_samples}")
    return float(OLSRegressor(fit_intercept=False).fit(irr, per_cap).coef_[0])


def daily_energy_per_capacity(dataset: Dataset, site_id: str) -> float:
    """Mean daily PV energy in kWh per kW of capacity, over complete days only."""
    st = dataset[site_id]
    days, counts = np.unique(st.day, return_counts=True)
    complete = days[counts == MINUTES_PER_DAY]
    if len(complete) == 0:
        raise InsufficientDataError(f"site {site_id}: no complete day of data")
    mask = np.isin(st.day, complete)
    per_day = np.bincount(np.searchsorted(complete, st.day[mask]), weights=st.pv_power_kw[mask])
    return float(np.mean(per_day / 60.0) / dataset.spec(site_id).capacity_kw)


def mean_daylight_output_ratio(dataset: Dataset, site_id: str) -> float:
    """Mean PV output as a fraction of capacity over daylight minutes. Descriptive only."""
    irr, per_cap = _daylight_points(dataset, [site_id])
    if len(per_cap) == 0:
        raise InsufficientDataError(f"site {site_id}: no daylight samples")
    return float(per_cap.mean())
