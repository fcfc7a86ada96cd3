"""Regularized tangent/stress maps for the relaxed inextensibility constraint.

The forward map ``F(psi) = eps*psi + psi/sqrt(eps + |psi|^2)`` sends a stress
vector to a tangent vector. Its inverse ``G`` recovers stress from a tangent.
Both maps are radial, so inversion reduces to a scalar monotone root find.

All functions accept arrays of shape ``(..., d)`` and operate on the last
axis.
"""

from dataclasses import dataclass

import numpy as np

from .errors import RootNotConverged

__all__ = [
    "RegularizationParams",
    "f_eps",
    "g_eps",
    "q_eps",
    "g_and_q",
    "grad_f_eps",
    "grad_g_eps",
    "tension_of_tangent",
    "eigen_bounds",
]

_TINY = 1e-300


@dataclass(frozen=True)
class RegularizationParams:
    """Regularization strength and radial root-finding controls.

    Parameters
    ----------
    eps : float
        Regularization parameter, ``0 < eps <= 1``.
    root_tol : float
        Absolute tolerance on the recovered stress radius (scaled by
        ``1 + radius`` for large radii).
    max_root_iters : int
        Iteration cap for the safeguarded Newton solve.
    """

    eps: float
    root_tol: float = 1e-12
    max_root_iters: int = 200

    def __post_init__(self):
        if not (0.0 < self.eps <= 1.0):
            raise ValueError(f"eps must lie in (0, 1], got {self.eps!r}")
        if not self.root_tol > 0.0:
            raise ValueError("root_tol must be positive")
        if int(self.max_root_iters) < 1:
            raise ValueError("max_root_iters must be a positive integer")


def _radial_profile(eps, r):
    return eps * r + r / np.sqrt(eps + r * r)


def _radial_slope(eps, r):
    return eps + eps * (eps + r * r) ** -1.5


def _invert_radius(p, target):
    """Solve ``eps*r + r/sqrt(eps+r^2) = target`` for ``r >= 0`` elementwise."""
    eps = p.eps
    target = np.asarray(target, dtype=float)
    shape = target.shape
    target = target.ravel()
    # phi(r) <= (eps + eps**-0.5) r and phi(r) <= eps r + 1 give lower bounds;
    # phi is concave and increasing, so Newton from below rises monotonically.
    lo = np.maximum(target / (eps + eps**-0.5), (target - 1.0) / eps)
    hi = target / eps
    r = lo.copy()
    active = target > 0.0
    for _ in range(int(p.max_root_iters)):
        if not active.any():
            return r.reshape(shape)
        ra = r[active]
        ta = target[active]
        resid = _radial_profile(eps, ra) - ta
        lo_a, hi_a = lo[active], hi[active]
        lo_a = np.where(resid < 0.0, np.maximum(lo_a, ra), lo_a)
        hi_a = np.where(resid > 0.0, np.minimum(hi_a, ra), hi_a)
        step = resid / _radial_slope(eps, ra)
        new = ra - step
        outside = (new < lo_a) | (new > hi_a)
        new = np.where(outside, 0.5 * (lo_a + hi_a), new)
        done = (np.abs(new - ra) <= p.root_tol * (1.0 + new)) | (resid == 0.0)
        r[active] = new
        lo[active], hi[active] = lo_a, hi_a
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    if active.any():
        raise RootNotConverged(
            f"radial inversion did not converge in {p.max_root_iters} iterations"
        )
    return r.reshape(shape)


def f_eps(p, psi):
    """Forward regularizing map ``psi -> eps*psi + psi/sqrt(eps+|psi|^2)``."""
    psi = np.asarray(psi, dtype=float)
    r2 = np.sum(psi * psi, axis=-1, keepdims=True)
    return p.eps * psi + psi / np.sqrt(p.eps + r2)


def g_eps(p, tau):
    """Inverse of :func:`f_eps`: the stress vector producing tangent ``tau``.

    Parameters
    ----------
    p : RegularizationParams
    tau : array_like, shape (..., d)

    Returns
    -------
    psi : ndarray, shape (..., d)
        Colinear with ``tau``; exactly zero where ``|tau| < 1e-300``.

    Raises
    ------
    RootNotConverged
        If the radial solve exceeds ``p.max_root_iters``.
    """
    tau = np.asarray(tau, dtype=float)
    norm = np.sqrt(np.sum(tau * tau, axis=-1))
    rho = _invert_radius(p, norm)
    scale = np.where(norm < _TINY, 0.0, rho / np.where(norm < _TINY, 1.0, norm))
    return tau * scale[..., None]


def _q_from_radius(eps, rho):
    s = np.sqrt(eps + rho * rho)
    se = np.sqrt(eps)
    # sqrt(eps) - eps/s rewritten without cancellation near rho = 0
    return 0.5 * eps * rho * rho + eps * rho * rho / (se * s * (s + se))


def q_eps(p, tau):
    """Potential whose gradient is :func:`g_eps`; nonnegative, zero at 0."""
    tau = np.asarray(tau, dtype=float)
    norm = np.sqrt(np.sum(tau * tau, axis=-1))
    rho = _invert_radius(p, norm)
    return _q_from_radius(p.eps, rho)


def g_and_q(p, tau):
    """Return ``(g_eps(p, tau), q_eps(p, tau))`` from a single radial solve."""
    tau = np.asarray(tau, dtype=float)
    norm = np.sqrt(np.sum(tau * tau, axis=-1))
    rho = _invert_radius(p, norm)
    scale = np.where(norm < _TINY, 0.0, rho / np.where(norm < _TINY, 1.0, norm))
    return tau * scale[..., None], _q_from_radius(p.eps, rho)


def grad_f_eps(p, psi):
    """Jacobian of :func:`f_eps`, shape ``(..., d, d)``."""
    psi = np.asarray(psi, dtype=float)
    d = psi.shape[-1]
    s2 = p.eps + np.sum(psi * psi, axis=-1)
    a = p.eps + s2**-0.5
    b = s2**-1.5
    eye = np.eye(d)
    return a[..., None, None] * eye - b[..., None, None] * psi[..., :, None] * psi[..., None, :]


def grad_g_eps(p, tau, psi=None):
    """Jacobian of :func:`g_eps`, shape ``(..., d, d)``.

    Computed as the closed-form inverse of ``grad_f_eps`` at ``psi = g_eps(tau)``
    (Sherman-Morrison on a scaled identity minus a rank-one term), so the
    result is exactly symmetric. Pass ``psi`` to skip the radial solve.
    """
    if psi is None:
        psi = g_eps(p, tau)
    psi = np.asarray(psi, dtype=float)
    d = psi.shape[-1]
    eps = p.eps
    r2 = np.sum(psi * psi, axis=-1)
    s2 = eps + r2
    a = eps + s2**-0.5
    b = s2**-1.5
    # a - b r^2 = eps + eps * s2**-1.5, the eigenvalue along psi
    along = eps + eps * b
    coef = b / (a * along)
    eye = np.eye(d)
    return (1.0 / a)[..., None, None] * eye + coef[..., None, None] * (
        psi[..., :, None] * psi[..., None, :]
    )


def eigen_bounds(p, tau):
    """Return ``(lam, Lam)``, the extreme eigenvalues of ``grad_g_eps(tau)``."""
    psi = g_eps(p, tau)
    r2 = np.sum(psi * psi, axis=-1)
    s2 = p.eps + r2
    lam = 1.0 / (p.eps + s2**-0.5)
    Lam = (1.0 / p.eps) / (1.0 + s2**-1.5)
    return lam, Lam


def tension_of_tangent(p, tau):
    """Scalar tension ``g_eps(tau) . tau``; nonnegative by colinearity."""
    tau = np.asarray(tau, dtype=float)
    return np.sum(g_eps(p, tau) * tau, axis=-1)
