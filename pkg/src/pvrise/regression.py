"""Voltage-versus-power regression: PLS1 with an ordinary least squares oracle.

Net power (kW) is the predictor and PCC voltage (pu) the response. With a
single predictor and one latent component PLS1 reduces to the OLS slope;
``OLSRegressor`` exists to check exactly that.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .errors import InvalidInputError
from .model import BetaFit, SiteStream
from .validation import as_2d, check_xy


@dataclass(frozen=True)
class RegressionInput:
    x: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.x)


def injection_filter(samples) -> RegressionInput:
    """Keep samples with net power <= 0 (injection, boundary included), in order.

    Accepts a ``SiteStream`` or any iterable of ``MeterSample``.
    """
    if isinstance(samples, SiteStream):
        net, volt = samples.net_power_kw, samples.pcc_voltage_pu
    else:
        samples = list(samples)
        net = np.array([s.net_power_kw for s in samples], dtype=float)
        volt = np.array([s.pcc_voltage_pu for s in samples], dtype=float)
    keep = net <= 0
    return RegressionInput(net[keep], volt[keep])


def _fit_summary(X, y, coef, intercept) -> tuple:
    resid = y - (X @ coef + intercept)
    ssr = float(resid @ resid)
    n = len(y)
    dev = y - y.mean()
    sst = float(dev @ dev)
    residual_std = float(np.sqrt(ssr / (n - 2))) if n > 2 else 0.0
    # sums of squares at rounding level count as an exact fit
    tiny = n * (1e-12 * max(1.0, abs(float(y.mean())))) ** 2
    if sst <= tiny or ssr <= tiny:
        explained = 1.0
    else:
        explained = float(np.clip(1.0 - ssr / sst, 0.0, 1.0))
    return residual_std, explained


class PLS1Regressor(RegressorMixin, BaseEstimator):
    """Partial least squares with a single response, fitted by NIPALS.

    Data are mean-centred, not scaled. For a univariate response the NIPALS
    inner loop converges in one pass, so each component is computed directly:
    weight ``w ∝ Xᵀy``, score ``t = Xw``, then both blocks are deflated by ``t``.

    Parameters
    ----------
    n_components : int
        Number of latent components; at most the rank of the centred X.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    x_weights_, x_loadings_ : ndarray of shape (n_features, n_components)
    y_loadings_ : ndarray of shape (n_components,)
    """

    def __init__(self, n_components=1):
        self.n_components = n_components

    def fit(self, X, y):
        X, y = check_xy(X, y)
        n, p = X.shape
        if not (isinstance(self.n_components, (int, np.integer)) and self.n_components >= 1):
            raise InvalidInputError("n_components must be a positive integer")
        x_mean, y_mean = X.mean(axis=0), y.mean()
        Xc, yc = X - x_mean, y - y_mean
        rank = np.linalg.matrix_rank(Xc)
        if self.n_components > rank:
            raise InvalidInputError(f"n_components={self.n_components} exceeds rank {rank} of centred X")

        W = np.zeros((p, self.n_components))
        P = np.zeros((p, self.n_components))
        q = np.zeros(self.n_components)
        for a in range(self.n_components):
            w = Xc.T @ yc
            norm = np.linalg.norm(w)
            if norm == 0:
                # no remaining covariance; any direction gives a zero y-loading
                w = np.zeros(p)
                w[np.argmax(np.linalg.norm(Xc, axis=0))] = 1.0
            else:
                w = w / norm
            t = Xc @ w
            tt = t @ t
            P[:, a] = Xc.T @ t / tt
            q[a] = yc @ t / tt
            W[:, a] = w
            Xc = Xc - np.outer(t, P[:, a])
            yc = yc - q[a] * t

        self.coef_ = W @ np.linalg.solve(P.T @ W, q)
        self.intercept_ = float(y_mean - x_mean @ self.coef_)
        self.x_weights_, self.x_loadings_, self.y_loadings_ = W, P, q
        self.n_features_in_ = p
        self.residual_std_, self.explained_variance_ = _fit_summary(X, y, self.coef_, self.intercept_)
        self.n_samples_ = n
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return as_2d(X) @ self.coef_ + self.intercept_

    def beta_fit(self) -> BetaFit:
        """Summary of a fitted single-predictor model."""
        check_is_fitted(self, "coef_")
        if self.n_features_in_ != 1:
            raise InvalidInputError("beta_fit needs a single predictor")
        return BetaFit(float(self.coef_[0]), self.intercept_, self.n_samples_, self.residual_std_, self.explained_variance_)


class OLSRegressor(RegressorMixin, BaseEstimator):
    """Closed-form least squares for one predictor.

    ``fit_intercept=False`` fits a line through the origin:
    ``slope = Σxy / Σx²``.
    """

    def __init__(self, fit_intercept=True):
        self.fit_intercept = fit_intercept

    def fit(self, X, y):
        if self.fit_intercept:
            X, y = check_xy(X, y)
        else:
            X = as_2d(X)
            y = np.asarray(y, dtype=float).ravel()
            if len(y) != X.shape[0] or len(y) < 1:
                raise InvalidInputError("x and y must have equal, non-zero length")
            if not np.any(X):
                raise InvalidInputError("predictor is identically zero")
        if X.shape[1] != 1:
            raise InvalidInputError("OLSRegressor supports a single predictor")
        x = X[:, 0]
        if self.fit_intercept:
            dx, dy = x - x.mean(), y - y.mean()
            slope = float(dx @ dy / (dx @ dx))
            intercept = float(y.mean() - slope * x.mean())
        else:
            slope = float(x @ y / (x @ x))
            intercept = 0.0
        self.coef_ = np.array([slope])
        self.intercept_ = intercept
        self.n_features_in_ = 1
        self.n_samples_ = len(y)
        self.residual_std_, self.explained_variance_ = _fit_summary(X, y, self.coef_, intercept)
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        return as_2d(X) @ self.coef_ + self.intercept_

    def beta_fit(self) -> BetaFit:
        check_is_fitted(self, "coef_")
        return BetaFit(float(self.coef_[0]), self.intercept_, self.n_samples_, self.residual_std_, self.explained_variance_)


def pls1_fit(data: RegressionInput, n_components: int = 1) -> BetaFit:
    return PLS1Regressor(n_components=n_components).fit(data.x, data.y).beta_fit()


def ols_fit(data: RegressionInput) -> BetaFit:
    return OLSRegressor().fit(data.x, data.y).beta_fit()
