"""
How the guarantee fades as the horizon grows.

The certified bound b1 kappa + b2 kappa^2 increases with T because kappa
does.  For the 2-state LQR problem it crosses 1 at a finite horizon, while
the measured contraction factor of the sweep stays well below it.
"""
import numpy as np

from msacert import builtin, certify, critical_horizon, empirical_contraction
from msacert.signals import Grid


def main():
    base = builtin("lqr-2d")
    Tc = critical_horizon(base.constants)
    print(f"critical horizon: {Tc:.4f}" if Tc is not None else "bound stays below 1 for every horizon")
    print("\n     T    kappa   bound   measured")
    for T in np.geomspace(0.25, 8.0, 6):
        bp = builtin("lqr-2d", horizon=float(T))
        cert = certify(bp.constants, bp.spec.T)
        emp = empirical_contraction(bp.spec, pairs=8, grid=Grid(bp.spec.T, 100))
        flag = "" if cert.contractive else "  (no guarantee)"
        print(f"{T:6.2f}  {cert.kappa:6.3f}  {cert.lip_bound:6.3f}   {emp:6.3f}{flag}")


if __name__ == "__main__":
    main()
