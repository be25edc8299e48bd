"""Two-phase protocol: fit on one traversal, then reject what was learned.

Phase 1 flies the course under the plain proportional controller while the
surface is fitted online from its own disturbance records.  Phase 2 replays
the course with the augmented controller, paired against the baseline on
identical disturbance realizations.  In the moderate transverse wind
scenario the augmentation recovers the slow crawl near each waypoint; in
the strong wind scenario the baseline cannot arrive at all and times out
while the augmented controller completes.
"""

import pathlib
from dataclasses import replace

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from riskbound import builtin_scenario, run_experiment
from riskbound.harness import fit_from_trace, simulate_phase

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

scenario = replace(builtin_scenario("c_like"), n_episodes=10)
report = run_experiment(scenario, seed=7)
print(f"scenario {report.label}: fitted {report.iterations} batches "
      f"over {report.phase1_seconds:.1f} s of baseline flight")
print(f"mean paired speedup over {len(report.episodes)} episodes: "
      f"{report.mean_speedup:.2f}x (wins: {report.win_fraction:.0%})")
print(f"surface coverage vs Monte Carlo truth: {report.coverage.coverage:.2f}")

strong = replace(builtin_scenario("d_like"), n_episodes=3)
strong_report = run_experiment(strong, seed=7)
timeouts = [e.baseline_timeouts for e in strong_report.episodes]
print(f"strong wind: baseline timeouts per episode {timeouts}, "
      f"augmented completed {[e.augmented_completed for e in strong_report.episodes]}")

# overlay one paired episode in the x-y plane
trace_b, mb = simulate_phase(scenario, 7, "baseline", stream_id=1000)
model = fit_from_trace(scenario, simulate_phase(scenario, 7, "baseline")[0])
trace_a, ma = simulate_phase(scenario, 7, "augmented", sar=model, stream_id=1000)

fig, ax = plt.subplots(figsize=(6.5, 5))
for trace, metrics, color, label in (
    (trace_b, mb, "tab:blue", "baseline"),
    (trace_a, ma, "tab:red", "augmented"),
):
    xy = np.array([s.x_hat[:2] for s in trace.steps])
    ax.plot(xy[:, 0], xy[:, 1], color=color, lw=1,
            label=f"{label} ({metrics.total_seconds:.1f} s)")
wps = np.array([w[:2] for w in scenario.course.waypoints])
ax.scatter(wps[:, 0], wps[:, 1], marker="*", s=200, color="gold",
           edgecolor="black", zorder=5, label="waypoints")
for wp in wps:
    ax.add_patch(plt.Circle(wp, scenario.course.arrival_radius,
                            fill=False, ls=":", color="gray"))
ax.annotate("wind", xy=(-1.5, 0.25), xytext=(-1.5, -0.25),
            arrowprops=dict(arrowstyle="<-", color="teal"), color="teal")
ax.set_xlabel("x (m)")
ax.set_ylabel("y (m)")
ax.legend(fontsize=8)
ax.set_title("paired episode, identical disturbance realizations")
fig.tight_layout()
fig.savefig(OUT / "waypoint_speedup.png", dpi=130)
print(f"wrote {OUT / 'waypoint_speedup.png'}")
