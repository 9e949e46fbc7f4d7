"""Where the eigenvalues of the linearised system sit.

For quadratic costs the stacked state ``[x; y]`` evolves linearly under
``M(alpha)``. A weight-balanced, strongly connected network gives exactly
``m`` zero eigenvalues (the consensus directions) and pushes the rest into
the open left half-plane once ``alpha`` is below the spectral-gap bound. The
sampled map ``I + eta M`` then has ``m`` eigenvalues at one and the rest
inside the unit circle.

    python demos/spectrum.py
"""

import numpy as np
from scipy.linalg import block_diag

from gtdyn.scenarios import random_quadratic_instance, spectrum_audit
from gtdyn.spectral import (
    build_system_matrix,
    check_continuous_spectrum,
    check_discrete_spectrum,
    compute_bounds,
    eigenvalues,
    euler_matrix,
)


def show(label, vals):
    vals = np.sort_complex(vals)
    print(f"{label}:")
    for v in vals:
        print(f"   {v.real:+.5f} {v.imag:+.5f}j   |.| = {abs(v):.5f}")


def main():
    graph, cost = random_quadratic_instance(3)
    hess = block_diag(*cost.curvatures)
    b = compute_bounds(graph.laplacian_w, graph.laplacian_a, hess, cost.gamma, cost.m)
    print(f"n={cost.n} nodes, m={cost.m}, gamma={cost.gamma:.3f}")
    print(f"alpha = 0.9 x gap bound = {b.auto_alpha:.4f}, eta = {b.auto_eta:.4f}\n")

    system = build_system_matrix(graph.laplacian_w, graph.laplacian_a, hess, b.auto_alpha, cost.m)
    show("M(alpha)", eigenvalues(system.entries).values)
    print("continuous check passed:", check_continuous_spectrum(system, cost.m).passed, "\n")
    show("I + eta M(alpha)", eigenvalues(euler_matrix(system, b.auto_eta).entries).values)
    print("discrete check passed:", check_discrete_spectrum(euler_matrix(system, b.auto_eta), cost.m).passed)

    cases = spectrum_audit(100)
    print(f"\naudit over 100 random networks: {sum(c.passed for c in cases)}/100 pass both checks")


if __name__ == "__main__":
    main()
