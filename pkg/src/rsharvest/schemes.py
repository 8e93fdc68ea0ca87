"""Third-order WENO one-sided derivatives and the local Lax-Friedrichs Hamiltonian.

Reference (vectorized numpy) versions. The marching kernel in ``_kernels``
inlines the same formulas; the test suite checks the two agree.
"""

import numpy as np

WENO_EPS = 1e-6


def weno3_biased_derivatives(u, dx, eps=WENO_EPS):
    """Left- and right-biased derivative estimates ``(p_minus, p_plus)``.

    Interior nodes use the HJ-WENO3 blend of the two candidate slopes,

        p- = (D[j-1] + D[j]) / 2 - w- / 2 * (D[j-2] - 2 D[j-1] + D[j])
        w- = 1 / (1 + 2 r-**2),  r- = (eps + s[j-1]**2) / (eps + s[j]**2)

    with forward differences ``D[k] = u[k+1] - u[k]`` and second differences
    ``s[k] = u[k+1] - 2u[k] + u[k-1]``, and its mirror image for p+.

    There are no ghost nodes. Where the upwind-biased stencil would leave the
    grid, only the central candidate ``(D[j-1] + D[j]) / 2`` is kept (second
    order). At the two end nodes both estimates are the one-sided first
    order difference.
    """
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    if n < 5:
        raise ValueError(f"WENO3 needs at least 5 nodes, got {n}")
    D = np.diff(u, axis=-1)  # D[k] = u[k+1] - u[k], k = 0..n-2
    s = np.diff(D, axis=-1)  # s[k-1] = u[k+1] - 2u[k] + u[k-1], k = 1..n-2

    pm = np.empty_like(u)
    pp = np.empty_like(u)

    # p- at j = 2..n-2 uses D[j-2], D[j-1], D[j] and smoothness s at j-1, j.
    j = np.arange(2, n - 1)
    a, b, c = D[..., j - 2], D[..., j - 1], D[..., j]
    r = (eps + s[..., j - 2] ** 2) / (eps + s[..., j - 1] ** 2)
    w = 1.0 / (1.0 + 2.0 * r * r)
    pm[..., j] = 0.5 * (b + c) - 0.5 * w * (a - 2.0 * b + c)

    # p+ at j = 1..n-3 uses D[j-1], D[j], D[j+1] and smoothness s at j+1, j.
    j = np.arange(1, n - 2)
    a, b, c = D[..., j - 1], D[..., j], D[..., j + 1]
    r = (eps + s[..., j] ** 2) / (eps + s[..., j - 1] ** 2)
    w = 1.0 / (1.0 + 2.0 * r * r)
    pp[..., j] = 0.5 * (a + b) - 0.5 * w * (c - 2.0 * b + a)

    pm[..., 1] = 0.5 * (D[..., 0] + D[..., 1])
    pp[..., n - 2] = 0.5 * (D[..., n - 3] + D[..., n - 2])
    pm[..., 0] = pp[..., 0] = D[..., 0]
    pm[..., n - 1] = pp[..., n - 1] = D[..., n - 2]
    return pm / dx, pp / dx


def llxf_hamiltonian(fval, p_minus, p_plus):
    """Monotone numerical Hamiltonian for H(p) = -f p.

    With the local dissipation coefficient |f| this reduces to exact
    upwinding: -f p+ where f > 0, -f p- where f < 0.
    """
    f = np.asarray(fval, dtype=float)
    return -f * 0.5 * (p_minus + p_plus) - np.abs(f) * 0.5 * (p_plus - p_minus)
