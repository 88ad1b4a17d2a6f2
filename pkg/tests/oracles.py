"""Independent reference computations shared by the unit and acceptance tests."""
import numpy as np


def scalar_picard_ode(v0, w0, kin, T, N, tol=1e-8, max_iters=50, shift=True):
    """Backward Euler for v' = -I_ion(v, w), w' = H(v, w) with the solver's Picard rule.

    The potential update carries the shift ``max(0, dI/dv)`` on both sides and
    the gating update is Gauss-Seidel in the freshly updated potential.
    Returns arrays of length ``N + 1`` and the iteration counts.
    """
    dt = T / N
    v, w = float(v0), float(w0)
    vs, ws, its = [v], [w], []
    for _ in range(N):
        vk, wk = v, w
        for it in range(1, max_iters + 1):
            sig = max(0.0, kin.ionic_dv(vk)) if shift else 0.0
            v_new = (v / dt - kin.ionic(vk, wk) + sig * vk) / (1.0 / dt + sig)
            w_new = w + dt * kin.gating(v_new, wk)
            inc = max(abs(v_new - vk) / max(1.0, abs(v_new)), abs(w_new - wk) / max(1.0, abs(w_new)))
            vk, wk = v_new, w_new
            if inc <= tol:
                break
        else:
            raise RuntimeError("scalar Picard did not converge")
        v, w = vk, wk
        vs.append(v)
        ws.append(w)
        its.append(it)
    return np.array(vs), np.array(ws), its
