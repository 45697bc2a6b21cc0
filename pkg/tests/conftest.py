import numpy as np
import pytest

from msacert import BUILTINS, builtin
from msacert.problem import ProblemSpec
from msacert.signals import BoxSet


def make_scalar(a=-1.0, box=1.0, x0=1.0, T=1.0, q=1.0, r=1.0, pT=0.0, analytic=True, **kw):
    """``x' = a x + u`` with cost ``(q x^2 + r u^2)/2`` and terminal ``pT x^2 / 2``."""
    minimizer = (lambda t, x, lam: -np.asarray(lam) / r) if analytic else None
    return ProblemSpec(
        f=lambda t, x, u: a * x + u,
        dxf=lambda t, x, u: np.array([[a]]),
        duf=lambda t, x, u: np.array([[1.0]]),
        phi=lambda t, x, u: 0.5 * (q * x[0] ** 2 + r * u[0] ** 2),
        phix=lambda t, x, u: q * np.asarray(x),
        phiu=lambda t, x, u: r * np.asarray(u),
        psi=lambda x: 0.5 * pT * x[0] ** 2,
        psix=lambda x: pT * np.asarray(x),
        control_box=BoxSet.symmetric(box),
        x0=[x0],
        T=T,
        analytic_minimizer=minimizer,
        **kw,
    )


@pytest.fixture(scope="session")
def problems():
    return {name: builtin(name) for name in BUILTINS}


@pytest.fixture
def scalar():
    return make_scalar
