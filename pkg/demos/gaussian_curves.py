"""
Rate versus distortion for a unit-variance Gaussian source
==========================================================

Three curves: no realism constraint, perfect realism with unlimited shared
randomness, and perfect realism with none. Run from the repository root::

    python demos/gaussian_curves.py
"""
import numpy as np

from rdpcr import gaussian

deltas = np.array(gaussian.fig1_grid())
curves = gaussian.fig1_curves()
rates = {name: np.array([p.rate for p in pts]) for name, pts in curves.items()}

# At small distortion the realism penalty with unlimited common randomness
# all but vanishes...
for d in (0.02, 0.1, 0.5, 1.0):
    k = int(np.argmin(np.abs(deltas - d)))
    print(f"delta={d:<5} classical={rates['classical'][k]:.4f}  rc=inf={rates['rcinf'][k]:.4f}  rc=0={rates['rc0'][k]:.4f}")

# ...while without it the required distortion doubles at every rate.
print("rate_rc_zero(2*0.25) =", gaussian.rate_rc_zero(0.5), " rate_classical(0.25) =", gaussian.rate_classical(0.25))

# Intermediate budgets interpolate between the two realism curves.
for rc in (0.0, 0.25, 1.0, float("inf")):
    print(f"rc={rc:<4} rate at delta=0.5: {gaussian.rate(0.5, rc):.4f}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(deltas, rates["classical"], label="no realism")
    ax.plot(deltas, rates["rcinf"], label=r"realism, $R_c=\infty$")
    ax.plot(deltas, rates["rc0"], label=r"realism, $R_c=0$")
    ax.set_xlabel(r"distortion $\Delta$")
    ax.set_ylabel("rate (bits)")
    ax.set_ylim(0, 3)
    ax.legend()
    fig.tight_layout()
    fig.savefig("gaussian_curves.png", dpi=120)
    print("wrote gaussian_curves.png")
