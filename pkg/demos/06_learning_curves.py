"""Learning progress: mind changes as a convergence heuristic.

Each trial learns the training set in a random order and evaluates the
detector after every step.  Mind changes (counters flipping from zero to
one) spike on the first document and die out as the language saturates;
detection quality climbs monotonically in the poisoning-free setting.
"""

from xvpa import NamingScheme, default_system
from xvpa.harness import build_cardealer_scenario, learning_curve

dts = default_system()
corpus = build_cardealer_scenario(seed=7, train_count=30, normal_count=120)

curve = learning_curve(dts, corpus, NamingScheme("ancestor", k=1, l=2),
                       trials=8, seed=7, normal_sample=40)

mc_mean = curve.mean("mind_changes")
mc_lo, mc_hi = curve.envelope("mind_changes")
f1_mean = curve.mean("f1")
f1_lo, f1_hi = curve.envelope("f1")

print("step  mind-changes (min..max)   F1 mean (min..max)")
for step in range(len(mc_mean)):
    bar = "#" * min(24, int(mc_mean[step]))
    print(f"{step + 1:4d}  {mc_mean[step]:6.1f} ({mc_lo[step]:2d}..{mc_hi[step]:2d}) {bar:24} "
          f"{f1_mean[step]:.3f} ({f1_lo[step]:.3f}..{f1_hi[step]:.3f})")

print("\nper-trial convergence points (last step with a mind change):")
for i, trial in enumerate(curve.trials):
    last = max((s for s, m in enumerate(trial.mind_changes) if m), default=0)
    print(f"  trial {i}: step {last + 1}")

print("\nTSV series for external plotting:")
print("\n".join(curve.to_tsv().splitlines()[:6]) + "\n...")
