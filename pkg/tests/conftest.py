import numpy as np
import pytest
from hypothesis import settings
from scipy.integrate import solve_ivp

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in _ACCEPTANCE:
        terminalreporter.write_line(line)


def brute_force_master_equation(gamma, omega, delta, rho0, t_eval):
    """Independent oracle: integrate the 2x2 master equation directly with DOP853.

    Basis order (g, e); H = -delta |e><e| + omega/2 (s+ + s-); returns density matrices.
    """
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    sp = sm.conj().T
    H = -delta * sp @ sm + 0.5 * omega * (sp + sm)

    def rhs(_, y):
        r = y.reshape(2, 2)
        d = -1j * (H @ r - r @ H) + gamma * (sm @ r @ sp - 0.5 * (sp @ sm @ r + r @ sp @ sm))
        return d.ravel()

    t_eval = np.atleast_1d(np.asarray(t_eval, dtype=float))
    sol = solve_ivp(rhs, (0.0, max(t_eval.max(), 1e-300)), np.asarray(rho0, complex).ravel(),
                    method="DOP853", t_eval=t_eval, rtol=1e-13, atol=1e-15)
    return sol.y.T.reshape(-1, 2, 2)


def to_bloch(rho):
    """(p_ee, Re rho_eg, Im rho_eg) from (g, e)-basis density matrices."""
    rho = np.asarray(rho)
    return np.stack([rho[..., 1, 1].real, rho[..., 1, 0].real, rho[..., 1, 0].imag], axis=-1)


# --- synthetic data shared by the estimator and acceptance suites -------------------

def synth_spectrum(rng, omega, gamma, noise=0.03, cavity=None, reflection=0.076, amplitude=1.0):
    from mollow import mhz
    from mollow.estimators import instrument_profile
    cavity = mhz(3.92) if cavity is None else cavity
    x = mhz(np.arange(-100.0, 100.01, 0.5))
    clean = amplitude * instrument_profile(x, omega, gamma, cavity, reflection)
    err = np.full(x.size, noise * clean.max())
    return x, clean + rng.normal(0, err), err


def synth_g2(rng, omega, gamma, noise=0.05, pulse=2e-6):
    from mollow import AtomParams, g2_analytic, triangle_window
    tau = np.arange(-200.0, 200.01, 1.0) * 1e-9
    clean = g2_analytic(AtomParams(gamma, omega), tau) * triangle_window(tau, pulse)
    err = np.full(tau.size, noise)
    return tau, clean + rng.normal(0, err), err


def synth_saturation(rng, gamma, p_sat=6.3e-12, eta=0.0179, noise=0.03, p_max=60e-12):
    from mollow import SaturationModel, saturation_rate
    p = np.geomspace(0.2e-12, p_max, 20)
    clean = saturation_rate(SaturationModel(p_sat, eta), gamma, p)
    err = noise * clean
    return p, clean + rng.normal(0, err), err
