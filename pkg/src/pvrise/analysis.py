"""Daily and per-minute-of-day beta series, their statistics, densities and entropy."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import DegenerateDataError, InsufficientDataError
from .model import BetaFit, BetaSeries, BetaSummary, Density, Dataset, SiteStream
from .regression import PLS1Regressor, injection_filter
from .validation import MIN_PREDICTOR_VARIANCE, check_values

DEFAULT_GRID_POINTS = 512
# past this the histogram already resolves every distinct value of any realistic sample
MAX_HISTOGRAM_BINS = 1 << 16
GRID_HALF_WIDTH_BANDWIDTHS = 3.0


def _fit(x, y) -> BetaFit:
    return PLS1Regressor().fit(x, y).beta_fit()


def fit_site_beta(dataset: Dataset, site_id: str, min_samples: int = 100) -> BetaFit:
    """Fit V = beta * P + intercept over every injection sample of one site."""
    data = injection_filter(dataset[site_id])
    if len(data) < min_samples:
        raise InsufficientDataError(
            f"site {site_id}: {len(data)} injection samples, need {min_samples}"
        )
    return _fit(data.x, data.y)


def _grouped_series(stream: SiteStream, keys: np.ndarray, kind: str, min_samples: int) -> BetaSeries:
    keep = stream.net_power_kw <= 0
    keys = keys[keep]
    x = stream.net_power_kw[keep]
    y = stream.pcc_voltage_pu[keep]
    order = np.argsort(keys, kind="stable")
    labels, starts = np.unique(keys[order], return_index=True)
    entries = []
    for label, idx in zip(labels, np.split(order, starts[1:])):
        if len(idx) < min_samples or np.var(x[idx]) <= MIN_PREDICTOR_VARIANCE:
            continue
        entries.append((int(label), _fit(x[idx], y[idx])))
    return BetaSeries(kind, tuple(entries))


def daily_beta_series(dataset: Dataset, site_id: str, min_samples: int = 30) -> BetaSeries:
    """One fit per day with enough injection samples; other days are left out."""
    stream = dataset[site_id]
    return _grouped_series(stream, stream.day, "daily", min_samples)


def hourly_beta_series(dataset: Dataset, site_id: str, min_samples: int = 30) -> BetaSeries:
    """One fit per minute of day, pooling that minute across all days."""
    stream = dataset[site_id]
    return _grouped_series(stream, stream.minute, "minute_of_day", min_samples)


def silverman_bandwidth(values) -> float:
    v = np.asarray(values, dtype=float)
    # rescale first so squared deviations of tiny values do not underflow
    scale = float(np.ptp(v)) or 1.0
    return 1.06 * (v / scale).std(ddof=1) * scale * len(v) ** (-0.2)


class GaussianKDE(BaseEstimator):
    """Gaussian kernel density evaluated on a uniform grid.

    The grid spans the data ± 3 bandwidths. Values on the grid are rescaled
    so their trapezoidal integral is exactly one, i.e. the density is the
    one restricted to the grid.

    Parameters
    ----------
    bandwidth : float or None
        Kernel standard deviation; None selects Silverman's rule.
    n_grid : int
    """

    def __init__(self, bandwidth=None, n_grid=DEFAULT_GRID_POINTS):
        self.bandwidth = bandwidth
        self.n_grid = n_grid

    def fit(self, X, y=None):
        v = check_values(X, 2)
        if np.ptp(v) == 0:
            raise DegenerateDataError("all values are identical")
        h = silverman_bandwidth(v) if self.bandwidth is None else float(self.bandwidth)
        if not h > 0:
            raise ValueError("bandwidth must be positive")
        self.sample_ = v
        self.bandwidth_ = h
        grid = np.linspace(v.min() - GRID_HALF_WIDTH_BANDWIDTHS * h, v.max() + GRID_HALF_WIDTH_BANDWIDTHS * h, self.n_grid)
        values = self.score_samples(grid)
        values = values / np.trapezoid(values, grid)
        self.density_ = Density(grid, values, h)
        return self

    def score_samples(self, X):
        """Unnormalised-on-grid KDE evaluated at arbitrary points."""
        check_is_fitted(self, "sample_")
        pts = np.asarray(X, dtype=float)
        z = (pts.reshape(-1, 1) - self.sample_) / self.bandwidth_
        dens = np.exp(-0.5 * z * z).sum(axis=1) / (len(self.sample_) * self.bandwidth_ * np.sqrt(2 * np.pi))
        return dens.reshape(pts.shape)

    @property
    def mode_(self) -> float:
        check_is_fitted(self, "density_")
        return map_estimate(self.density_)


def kde(values, bandwidth: Optional[float] = None) -> Density:
    return GaussianKDE(bandwidth=bandwidth).fit(values).density_


def map_estimate(density: Density) -> float:
    """Grid point of maximum density; ties resolve to the smaller grid value."""
    return float(density.grid[int(np.argmax(density.values))])


def fd_bin_width(values) -> float:
    """Freedman-Diaconis bin width, 2 * IQR * n^(-1/3)."""
    v = np.asarray(values, dtype=float)
    q75, q25 = np.percentile(v, [75, 25])
    return 2.0 * (q75 - q25) * len(v) ** (-1.0 / 3.0)


def entropy_bits(values, bin_width: Optional[float] = None) -> float:
    """Shannon entropy (bits) of the histogram of ``values`` over their range.

    ``bin_width`` defaults to the Freedman-Diaconis width of the values
    themselves, which makes the result invariant to rescaling the data.
    Pass a shared width to compare spreads across samples. When the IQR is
    zero the Sturges bin count is used instead; the bin count is capped
    at ``MAX_HISTOGRAM_BINS``.
    """
    v = check_values(values, 8)
    span = float(np.ptp(v))
    if span == 0:
        return 0.0
    width = fd_bin_width(v) if bin_width is None else float(bin_width)
    if width > 0:
        n_bins = int(min(MAX_HISTOGRAM_BINS, max(1.0, np.ceil(span / width))))
    else:
        n_bins = int(np.ceil(np.log2(len(v)))) + 1
    counts, _ = np.histogram(v, bins=n_bins, range=(v.min(), v.max()))
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def summarize_betas(series, density: Optional[Density] = None) -> BetaSummary:
    """Minimum, mean, sample standard deviation and MAP of a beta series.

    ``series`` may be a ``BetaSeries`` or a plain array of betas. Without a
    density one is estimated with :func:`kde`.
    """
    values = series.betas if isinstance(series, BetaSeries) else np.asarray(series, dtype=float)
    values = check_values(values, 2, "beta series")
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        mode = lo
    else:
        if density is None:
            density = kde(values)
        # grid discretisation may step just outside the data range
        mode = float(np.clip(map_estimate(density), lo, hi))
    return BetaSummary(lo, float(values.mean()), float(values.std(ddof=1)), mode)


@dataclass(frozen=True, eq=False)
class SiteAnalysis:
    site_id: str
    capacity_kw: float
    impedance_ohm: float
    overall: BetaFit
    daily: BetaSeries
    hourly: BetaSeries
    daily_summary: Optional[BetaSummary]
    hourly_summary: Optional[BetaSummary]
    daily_density: Optional[Density]
    hourly_density: Optional[Density]
    daily_entropy: Optional[float] = None
    hourly_entropy: Optional[float] = None
    energy_per_capacity: Optional[float] = None


def _density_and_summary(series: BetaSeries):
    if len(series) < 2:
        return None, None
    betas = series.betas
    density = kde(betas) if np.ptp(betas) > 0 else None
    return density, summarize_betas(series, density)


def analyze_site(dataset: Dataset, site_id: str, min_samples: int = 30, overall_min_samples: int = 100) -> SiteAnalysis:
    spec = dataset.spec(site_id)
    overall = fit_site_beta(dataset, site_id, overall_min_samples)
    daily = daily_beta_series(dataset, site_id, min_samples)
    hourly = hourly_beta_series(dataset, site_id, min_samples)
    d_density, d_summary = _density_and_summary(daily)
    h_density, h_summary = _density_and_summary(hourly)
    return SiteAnalysis(
        site_id, spec.capacity_kw, spec.impedance_ohm, overall, daily, hourly,
        d_summary, h_summary, d_density, h_density,
    )


def shared_bin_width(samples) -> Optional[float]:
    """FD width of the pooled samples after centring each on its own median.

    Used as a common histogram resolution so entropies reflect spread.
    """
    centred = [np.asarray(s) - np.median(s) for s in samples if len(s) >= 2]
    if not centred:
        return None
    width = fd_bin_width(np.concatenate(centred))
    return width if width > 0 else None


def analyze_dataset(dataset: Dataset, site_ids=None, min_samples: int = 30, overall_min_samples: int = 100) -> list:
    """Run the per-site analyses and attach entropies on a shared bin width."""
    from .profile import daily_energy_per_capacity

    ids = list(site_ids) if site_ids is not None else dataset.site_ids
    results = [analyze_site(dataset, sid, min_samples, overall_min_samples) for sid in ids]
    out = []
    daily_w = shared_bin_width([r.daily.betas for r in results])
    hourly_w = shared_bin_width([r.hourly.betas for r in results])
    for r in results:
        d_ent = entropy_bits(r.daily.betas, daily_w) if len(r.daily) >= 8 else None
        h_ent = entropy_bits(r.hourly.betas, hourly_w) if len(r.hourly) >= 8 else None
        try:
            energy = daily_energy_per_capacity(dataset, r.site_id)
        except InsufficientDataError:
            energy = None
        out.append(SiteAnalysis(**{**r.__dict__, "daily_entropy": d_ent, "hourly_entropy": h_ent, "energy_per_capacity": energy}))
    return out
