"""Values-at-Risk and risk surfaces for reference stochastic processes.

The Value-at-Risk of a scalar random variable at level eps is the smallest
threshold its samples stay below with probability 1 - eps.  Indexing such
thresholds over a process's index set gives a risk surface.  This script
overlays empirical and closed-form surfaces for a Wiener process and a
binomial counting process at three risk levels, the classic picture of
layered quantile envelopes over ragged sample paths.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from riskbound import figure2_fixture

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

fixtures = figure2_fixture(n_paths=20000, seed=0)

fig, axes = plt.subplots(1, 2, figsize=(11, 4))
colors = {0.1: "tab:green", 0.05: "tab:orange", 0.01: "tab:red"}
for ax, name in zip(axes, ("wiener", "binomial")):
    fx = fixtures[name]
    for path in fx.paths[:15]:
        ax.plot(fx.times, path, color="black", alpha=0.25, lw=0.6)
    for eps, color in colors.items():
        ax.plot(fx.times, fx.analytic_sar[eps], color=color, lw=2,
                label=f"analytic, eps={eps}")
        ax.plot(fx.times, fx.empirical_sar[eps], color=color, lw=1,
                ls="--", label=f"empirical, eps={eps}")
    ax.set_title(f"{name} process")
    ax.set_xlabel("index")
axes[0].set_ylabel("value")
axes[0].legend(fontsize=7)
fig.tight_layout()
fig.savefig(OUT / "risk_surfaces.png", dpi=130)

# smaller eps -> higher surface, pointwise
wiener = fixtures["wiener"]
assert (wiener.empirical_sar[0.01] >= wiener.empirical_sar[0.05]).all()
assert (wiener.empirical_sar[0.05] >= wiener.empirical_sar[0.1]).all()
print(f"wrote {OUT / 'risk_surfaces.png'}")
print("surface layering (smaller eps above larger) holds pointwise")
