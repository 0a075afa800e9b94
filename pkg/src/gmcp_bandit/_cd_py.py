"""Pure-Python fallback for the coordinate-descent kernel in ``_cd.pyx``."""
import numpy as np


def _kkt(lin, w, b, q):
    g = lin + q
    zero = b == 0.0
    viol = np.where(zero, np.maximum(np.abs(g) - w, 0.0), np.abs(g + w * np.sign(b)))
    return float(viol.max()) if viol.size else 0.0


def cd_quadratic(H, lin, w, b, tol, max_sweeps, obj_trace):
    """Minimize ``lin @ b + 0.5 * b @ H @ b + sum(w * |b|)`` in place over ``b``.

    Returns ``(sweeps, kkt_residual)``; see the compiled twin for details.
    """
    p = b.shape[0]
    q = H @ b
    diag = np.diagonal(H).copy()
    sweeps = 0
    resid = _kkt(lin, w, b, q)
    while resid > tol and sweeps < max_sweeps:
        for j in range(p):
            hjj = diag[j]
            if hjj <= 0.0:
                continue
            bj = b[j]
            z = bj - (lin[j] + q[j]) / hjj
            gamma = w[j] / hjj
            if z > gamma:
                new = z - gamma
            elif z < -gamma:
                new = z + gamma
            else:
                new = 0.0
            delta = new - bj
            if delta != 0.0:
                b[j] = new
                q += delta * H[j]
        if sweeps < obj_trace.shape[0]:
            obj_trace[sweeps] = float(lin @ b + 0.5 * (b @ q) + w @ np.abs(b))
        sweeps += 1
        resid = _kkt(lin, w, b, q)
    return sweeps, resid
