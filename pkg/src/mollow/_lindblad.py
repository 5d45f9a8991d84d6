"""Small dense Lindblad toolkit (row-major vectorization, vec(A rho B) = (A kron B^T) vec(rho))."""
import numpy as np
import scipy.linalg as sla

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # basis order (g, e): |g><e|
SIGMA_PLUS = SIGMA_MINUS.conj().T
PROJ_E = SIGMA_PLUS @ SIGMA_MINUS


def embed(op, site, n_sites):
    """Operator acting on one two-level factor of an n-site tensor product."""
    out = np.eye(1, dtype=complex)
    for k in range(n_sites):
        out = np.kron(out, op if k == site else np.eye(2, dtype=complex))
    return out


def liouvillian(H, c_ops):
    d = H.shape[0]
    eye = np.eye(d, dtype=complex)
    L = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for c in c_ops:
        cdc = c.conj().T @ c
        L += np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)
    return L


def trace_row(d):
    return np.eye(d, dtype=complex).reshape(-1)


def steady_state(L):
    """Stationary density matrix by replacing one balance equation with the trace condition."""
    d = int(round(np.sqrt(L.shape[0])))
    M = L.copy()
    M[0, :] = trace_row(d)
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    rho = sla.solve(M, rhs).reshape(d, d)
    return 0.5 * (rho + rho.conj().T)


def expectation(op, rho_vec):
    """Tr(op @ rho) for row-major vectorized rho of shape (..., d*d)."""
    d = op.shape[0]
    rho = np.asarray(rho_vec).reshape(*np.shape(rho_vec)[:-1], d, d)
    return np.einsum("ij,...ji->...", op, rho)


def propagate(L, x0, times):
    """exp(L t) x0 for each t in `times` (any order, t >= 0)."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.empty((0, x0.size), dtype=complex)
    steps = np.diff(times)
    if steps.size and np.all(steps > 0) and np.allclose(steps, steps[0], rtol=1e-9, atol=0):
        # uniform grid: one exponential, repeated application
        out = np.empty((times.size, x0.size), dtype=complex)
        out[0] = sla.expm(L * times[0]) @ x0
        U = sla.expm(L * steps[0])
        for k in range(1, times.size):
            out[k] = U @ out[k - 1]
        return out
    return np.einsum("tij,j->ti", sla.expm(L[None, :, :] * times[:, None, None]), x0)
