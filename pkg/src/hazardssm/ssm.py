"""Local-linear-trend state-space machinery.

The model: y_t = X_t'b + mu_t + eps_t with a 2-d latent state
alpha_t = (mu_t, nu_t) following alpha_t = A alpha_{t-1} + eta_t,
A = [[1,1],[0,1]], Q = diag(sigma_mu2, sigma_nu2), alpha_0 known.

Everything here is exact: Kalman filtering for the observed-data
log-likelihood, backward simulation for joint draws of the latent path, and
a dense joint-Gaussian construction as an independent cross-check of the
filter. The per-step recursions are hand-unrolled 2x2 scalar arithmetic and
jit-compiled; covariance updates use the Joseph form so filtered covariances
stay positive semidefinite even when Q is rank-deficient or zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.stats import multivariate_normal

from .errors import NumericalError

__all__ = [
    "ModelParams",
    "FilterOutput",
    "LatentPath",
    "kalman_filter",
    "ffbs_sample",
    "exact_joint_loglik",
]

# A latent path is a (T, 2) array of (mu_t, nu_t) rows.
LatentPath = np.ndarray

TRANSITION = np.array([[1.0, 1.0], [0.0, 1.0]])


@dataclass(frozen=True)
class ModelParams:
    """Static parameters theta = (beta, sigma_y2, sigma_mu2, sigma_nu2).

    The transition matrix and the diagonal structure of Q are fixed model
    constants; alpha0 is the known initial state (zero unless configured).
    """

    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    sigma_y2: float = 1.0
    sigma_mu2: float = 0.0
    sigma_nu2: float = 0.0
    alpha0: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "beta", np.atleast_1d(np.asarray(self.beta, dtype=float)))
        object.__setattr__(self, "alpha0", (float(self.alpha0[0]), float(self.alpha0[1])))
        if not self.sigma_y2 > 0:
            raise NumericalError(f"sigma_y2 must be positive, got {self.sigma_y2}")
        if self.sigma_mu2 < 0 or self.sigma_nu2 < 0:
            raise NumericalError("state innovation variances must be nonnegative")
        if not np.all(np.isfinite(self.beta)):
            raise NumericalError("non-finite beta")

    @property
    def transition_matrix(self) -> np.ndarray:
        return TRANSITION.copy()

    @property
    def state_cov(self) -> np.ndarray:
        return np.diag([self.sigma_mu2, self.sigma_nu2])


@dataclass(frozen=True)
class FilterOutput:
    """Per-step filter quantities plus the observed-data log-likelihood."""

    filtered_mean: np.ndarray      # (T, 2)
    filtered_cov: np.ndarray       # (T, 2, 2)
    pred_state_mean: np.ndarray    # (T, 2) one-step state predictions
    pred_state_cov: np.ndarray     # (T, 2, 2)
    pred_mean_y: np.ndarray        # (T,) one-step predictive mean of y_t
    pred_var_y: np.ndarray         # (T,)
    loglik: float


@njit(cache=True)
def _forward_filter(resid, sy2, smu2, snu2, mu0, nu0,
                    filt_m, filt_c, pred_m, pred_c, pred_y, pred_f):
    """Kalman recursion on the covariate-adjusted series resid = y - X b.

    Writes per-step filtered/predicted moments into the output arrays and
    returns the accumulated log-likelihood.
    """
    T = resid.shape[0]
    ll = 0.0
    m0, m1 = mu0, nu0
    c00 = 0.0
    c01 = 0.0
    c11 = 0.0
    for t in range(T):
        # predict: a = A m, P = A C A' + Q
        a0 = m0 + m1
        a1 = m1
        p00 = c00 + 2.0 * c01 + c11 + smu2
        p01 = c01 + c11
        p11 = c11 + snu2
        F = p00 + sy2
        v = resid[t] - a0
        ll += -0.5 * (np.log(2.0 * np.pi * F) + v * v / F)
        pred_m[t, 0] = a0
        pred_m[t, 1] = a1
        pred_c[t, 0, 0] = p00
        pred_c[t, 0, 1] = p01
        pred_c[t, 1, 0] = p01
        pred_c[t, 1, 1] = p11
        pred_y[t] = a0
        pred_f[t] = F
        # update with gain K = P Z' / F, Z = [1, 0], Joseph-stabilized
        k0 = p00 / F
        k1 = p01 / F
        m0 = a0 + k0 * v
        m1 = a1 + k1 * v
        l00 = 1.0 - k0
        l10 = -k1
        # C = (I - K Z) P (I - K Z)' + sy2 K K'
        q00 = l00 * p00
        q01 = l00 * p01
        q10 = l10 * p00 + p01
        q11 = l10 * p01 + p11
        c00 = q00 * l00 + sy2 * k0 * k0
        c01 = q00 * l10 + q01 + sy2 * k0 * k1
        c11 = q10 * l10 + q11 + sy2 * k1 * k1
        filt_m[t, 0] = m0
        filt_m[t, 1] = m1
        filt_c[t, 0, 0] = c00
        filt_c[t, 0, 1] = c01
        filt_c[t, 1, 0] = c01
        filt_c[t, 1, 1] = c11
    return ll


@njit(cache=True)
def _eig2(a, b, c):
    """Eigen-decomposition of the symmetric 2x2 [[a,b],[b,c]].

    Returns (l1, l2, v00, v10) with l1 >= l2 and unit eigenvector
    (v00, v10) for l1; the second eigenvector is (-v10, v00).
    """
    half_tr = 0.5 * (a + c)
    disc = np.sqrt(0.25 * (a - c) * (a - c) + b * b)
    l1 = half_tr + disc
    l2 = half_tr - disc
    u0 = l1 - c
    u1 = l1 - a
    if u0 >= u1:
        v0, v1 = u0, b
    else:
        v0, v1 = b, u1
    n = np.sqrt(v0 * v0 + v1 * v1)
    if n == 0.0:
        return l1, l2, 1.0, 0.0
    return l1, l2, v0 / n, v1 / n


@njit(cache=True)
def _backward_sample(filt_m, filt_c, pred_m, pred_c, z, path):
    """Joint smoothing draw by backward simulation.

    z is a (T, 2) array of standard normals; the draw at each step maps them
    through the eigen square root of the conditional covariance, which copes
    with singular conditionals (deterministic state components) exactly.
    """
    T = filt_m.shape[0]
    # terminal draw from N(m_T, C_T)
    a = filt_c[T - 1, 0, 0]
    b = filt_c[T - 1, 0, 1]
    c = filt_c[T - 1, 1, 1]
    l1, l2, v0, v1 = _eig2(a, b, c)
    if l1 < 0.0:
        l1 = 0.0
    if l2 < 0.0:
        l2 = 0.0
    s1 = np.sqrt(l1)
    s2 = np.sqrt(l2)
    w0 = s1 * z[T - 1, 0]
    w1 = s2 * z[T - 1, 1]
    path[T - 1, 0] = filt_m[T - 1, 0] + v0 * w0 - v1 * w1
    path[T - 1, 1] = filt_m[T - 1, 1] + v1 * w0 + v0 * w1

    for t in range(T - 2, -1, -1):
        # G = C_t A', A = [[1,1],[0,1]]
        g00 = filt_c[t, 0, 0] + filt_c[t, 0, 1]
        g01 = filt_c[t, 0, 1]
        g10 = filt_c[t, 0, 1] + filt_c[t, 1, 1]
        g11 = filt_c[t, 1, 1]
        # pseudo-inverse of P_{t+1} via its eigen pair
        pa = pred_c[t + 1, 0, 0]
        pb = pred_c[t + 1, 0, 1]
        pc = pred_c[t + 1, 1, 1]
        l1, l2, v0, v1 = _eig2(pa, pb, pc)
        tol = 1e-12 * l1
        i1 = 1.0 / l1 if l1 > tol and l1 > 0.0 else 0.0
        i2 = 1.0 / l2 if l2 > tol else 0.0
        # P^+ = V diag(i1, i2) V'
        q00 = i1 * v0 * v0 + i2 * v1 * v1
        q01 = (i1 - i2) * v0 * v1
        q11 = i1 * v1 * v1 + i2 * v0 * v0
        # J = G P^+
        j00 = g00 * q00 + g01 * q01
        j01 = g00 * q01 + g01 * q11
        j10 = g10 * q00 + g11 * q01
        j11 = g10 * q01 + g11 * q11
        d0 = path[t + 1, 0] - pred_m[t + 1, 0]
        d1 = path[t + 1, 1] - pred_m[t + 1, 1]
        mean0 = filt_m[t, 0] + j00 * d0 + j01 * d1
        mean1 = filt_m[t, 1] + j10 * d0 + j11 * d1
        # cov = C_t - J P J' ; J P = G P^+ P, reuse J G' structure via P J'
        # (P J')_{ab} = sum_k P_{ak} J_{bk}
        pj00 = pa * j00 + pb * j01
        pj10 = pb * j00 + pc * j01
        pj01 = pa * j10 + pb * j11
        pj11 = pb * j10 + pc * j11
        cc00 = filt_c[t, 0, 0] - (j00 * pj00 + j01 * pj10)
        cc01 = filt_c[t, 0, 1] - (j00 * pj01 + j01 * pj11)
        cc10 = filt_c[t, 1, 0] - (j10 * pj00 + j11 * pj10)
        cc11 = filt_c[t, 1, 1] - (j10 * pj01 + j11 * pj11)
        cb = 0.5 * (cc01 + cc10)
        l1, l2, v0, v1 = _eig2(cc00, cb, cc11)
        if l1 < 0.0:
            l1 = 0.0
        if l2 < 0.0:
            l2 = 0.0
        s1 = np.sqrt(l1)
        s2 = np.sqrt(l2)
        w0 = s1 * z[t, 0]
        w1 = s2 * z[t, 1]
        path[t, 0] = mean0 + v0 * w0 - v1 * w1
        path[t, 1] = mean1 + v1 * w0 + v0 * w1


def _adjusted_series(params: ModelParams, y, X):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or len(y) == 0:
        raise NumericalError("y must be a non-empty 1-d series")
    if not np.all(np.isfinite(y)):
        raise NumericalError("non-finite values in y")
    if X is None:
        if len(params.beta) != 0:
            raise NumericalError("beta given but no covariates")
        return y.copy()
    Xv = X.values if hasattr(X, "values") else np.asarray(X, dtype=float)
    Xv = np.asarray(Xv, dtype=float)
    if Xv.ndim == 1:
        Xv = Xv[:, None]
    if Xv.shape[0] != len(y):
        raise NumericalError(f"X has {Xv.shape[0]} rows for {len(y)} observations")
    if not np.all(np.isfinite(Xv)):
        raise NumericalError("non-finite values in X")
    if Xv.shape[1] != len(params.beta):
        raise NumericalError(
            f"beta has length {len(params.beta)} for {Xv.shape[1]} design columns"
        )
    return y - Xv @ params.beta


def _run_filter(params: ModelParams, resid: np.ndarray) -> FilterOutput:
    T = len(resid)
    filt_m = np.empty((T, 2))
    filt_c = np.empty((T, 2, 2))
    pred_m = np.empty((T, 2))
    pred_c = np.empty((T, 2, 2))
    pred_y = np.empty(T)
    pred_f = np.empty(T)
    ll = _forward_filter(
        resid,
        float(params.sigma_y2),
        float(params.sigma_mu2),
        float(params.sigma_nu2),
        params.alpha0[0],
        params.alpha0[1],
        filt_m, filt_c, pred_m, pred_c, pred_y, pred_f,
    )
    if not np.isfinite(ll):
        raise NumericalError("filter produced a non-finite log-likelihood")
    if np.any(pred_f <= 0):
        raise NumericalError("one-step prediction variance is not positive")
    return FilterOutput(filt_m, filt_c, pred_m, pred_c, pred_y, pred_f, float(ll))


def kalman_filter(params: ModelParams, y, X=None) -> FilterOutput:
    """Exact filter for the local-linear-trend model.

    The observation fed to the recursion is y_t - X_t'b; the returned
    one-step predictive mean of y_t therefore excludes the covariate term
    (add X_t'b back for predictions on the original scale).
    """
    return _run_filter(params, _adjusted_series(params, y, X))


def ffbs_sample(params: ModelParams, y, X=None, rng=None) -> LatentPath:
    """Exact joint draw of the latent path (mu_t, nu_t)_{t=1..T}.

    Forward filter, then backward simulation from the terminal filtered
    distribution. Deterministic given the rng seed.
    """
    resid = _adjusted_series(params, y, X)
    out = _run_filter(params, resid)
    rng = np.random.default_rng(rng)
    T = len(resid)
    z = rng.standard_normal((T, 2))
    path = np.empty((T, 2))
    _backward_sample(out.filtered_mean, out.filtered_cov,
                     out.pred_state_mean, out.pred_state_cov, z, path)
    return path


def exact_joint_loglik(params: ModelParams, y, X=None, max_t: int = 50) -> float:
    """Log density of y under the model, via the dense joint Gaussian.

    Independent of the filter recursion: the T x T covariance of y is built
    by explicit propagation of the state covariance through A and Q. Meant
    as a cross-check for small T; refuses T > ``max_t``.
    """
    resid = _adjusted_series(params, y, X)
    T = len(resid)
    if T > max_t:
        raise NumericalError(f"dense joint construction limited to T <= {max_t}")
    Q = params.state_cov
    A = TRANSITION
    mu0, nu0 = params.alpha0
    # V_t = Cov(alpha_t); for u >= t, Cov(mu_t, mu_u) = V_t[0,0] + (u-t) V_t[0,1]
    cov = np.zeros((T, T))
    V = np.zeros((2, 2))
    for t in range(1, T + 1):
        V = A @ V @ A.T + Q
        for u in range(t, T + 1):
            c = V[0, 0] + (u - t) * V[0, 1]
            cov[t - 1, u - 1] = c
            cov[u - 1, t - 1] = c
    cov += params.sigma_y2 * np.eye(T)
    mean = mu0 + nu0 * np.arange(1, T + 1)
    return float(multivariate_normal(mean=mean, cov=cov).logpdf(resid))
