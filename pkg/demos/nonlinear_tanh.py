"""
A saturating input without a closed-form minimizer.

x' = -x + tanh(u) with quadratic costs.  The pointwise minimizer of the
Hamiltonian is found numerically, and the Lipschitz constants are both
declared (from hand analysis) and estimated by sampling, to show how close
the sampled values come.
"""
from msacert import builtin, certify, cost, direct_solve, estimate_constants, solve
from msacert.signals import Grid, sup_distance


def main():
    bp = builtin("tanh-input")
    spec = bp.spec

    declared = bp.constants
    sampled = estimate_constants(spec, bp.bounds, budget=256)
    for name in ("c", "l_fu", "l_phixx", "l_hlam"):
        print(f"{name:8s} declared {getattr(declared, name):.4f}   sampled {getattr(sampled, name):.4f}")

    for label, lip in (("declared", declared), ("sampled", sampled)):
        cert = certify(lip, spec.T)
        print(f"{label}: bound {cert.lip_bound:.4f}, soundness {cert.soundness}")

    grid = Grid(spec.T, 200)
    rep = solve(spec, grid=grid)
    print(f"\nsweeps: {rep.iterations}, converged={rep.converged}, J = {rep.costs[-1]:.8f}")

    # projected gradient on the same discretization, as a cross-check
    u_dir = direct_solve(spec, grid, steps=2000)
    print(f"direct method J = {cost(spec, u_dir):.8f}")
    print(f"sup |u_msa - u_direct| = {sup_distance(rep.control, u_dir, spec.control_norm):.2e}")


if __name__ == "__main__":
    main()
