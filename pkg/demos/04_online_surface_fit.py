"""Online fitting of the upper-bound surface from a disturbance stream.

Records stream in one at a time; every 60th completes a batch that adds
one GP pair (last state, max norm + beta) and refits.  The joint
confidence (1 - (1-eps)^60)^iota decays slowly with the batch count, and
the per-batch alpha_D/beta_D diagnostics verify the bounded-discrepancy
margin from data, after the fact.
"""

import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from riskbound import (
    ConfidenceParams,
    DiscrepancyParams,
    OnlineSurfaceFitter,
    SquaredExponentialKernel,
    builtin_scenario,
)
from riskbound.harness import simulate_phase
from riskbound.surface import evaluate_surface_many

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

scenario = builtin_scenario("c_like")
trace, metrics = simulate_phase(scenario, seed=7, phase="baseline")
print(f"fitting traversal: {metrics.total_seconds:.1f} s, {len(trace.steps)} records")

fitter = OnlineSurfaceFitter(
    DiscrepancyParams(scenario.alpha, scenario.beta),
    scenario.eps,
    scenario.n_per_batch,
    SquaredExponentialKernel(scenario.length_scale),
    ConfidenceParams(scenario.rkhs_bound),
)
confidences = []
for record in trace.records():
    snapshot = fitter.push(record)
    if snapshot is not None:
        diag = snapshot.diagnostics[-1]
        confidences.append(snapshot.joint_confidence)
        print(
            f"batch {diag.batch_index}: target {snapshot.gp.dataset.targets[-1]:.4f}, "
            f"alpha_D {diag.alpha_d:.2f} (<= {scenario.alpha:g}: {diag.alpha_ok}), "
            f"beta_D {diag.beta_d:.3f} (<= {scenario.beta:g}: {diag.beta_ok}), "
            f"joint confidence {snapshot.joint_confidence:.4f}"
        )

model = fitter.model
heights = float(np.mean([w[2] for w in scenario.course.waypoints]))
xs = np.linspace(-2, 2, 80)
ys = np.linspace(-2, 2, 80)
xx, yy = np.meshgrid(xs, ys)
pts = np.column_stack([xx.ravel(), yy.ravel(), np.full(
    xx.size, heights)])
slice_vals = evaluate_surface_many(model, pts).reshape(xx.shape)

fig, axes = plt.subplots(1, 2, figsize=(10.5, 4))
im = axes[0].pcolormesh(xx, yy, slice_vals, shading="auto", cmap="viridis")
axes[0].scatter(
    model.gp.dataset.points[:, 0], model.gp.dataset.points[:, 1],
    color="white", edgecolor="black", s=30, label="batch states",
)
fig.colorbar(im, ax=axes[0], label="upper bound (m)")
axes[0].set_title(f"fitted surface at z={heights:.2f}")
axes[0].legend(loc="lower right", fontsize=7)
axes[1].plot(range(1, len(confidences) + 1), confidences, marker="o")
axes[1].set_xlabel("batches")
axes[1].set_ylabel("joint confidence")
fig.tight_layout()
fig.savefig(OUT / "online_surface_fit.png", dpi=130)
print(f"wrote {OUT / 'online_surface_fit.png'}")
