"""Validating streams and detecting attacks.

Compiles the learned automaton into its predicate form and runs the
bundled attack classes against it: structure manipulations are caught,
text anomalies are caught when the learned datatype is narrow enough,
and the two documented blind spots show up exactly where expected.
"""

from xvpa import Learner, NamingScheme, build_xvpa, compile_cxvpa, default_system, validate
from xvpa.harness import (ATTACK_KINDS, build_cardealer_scenario, evaluate)

dts = default_system()
corpus = build_cardealer_scenario(seed=7)

learner = Learner(dts, NamingScheme("ancestor", k=1, l=2))
for doc in corpus.train:
    learner.learn(doc)
model = compile_cxvpa(build_xvpa(learner.snapshot(), dts))

print("one attack instance per kind:")
for kind in ATTACK_KINDS:
    stream = corpus.test_attacks[kind][0]
    verdict = validate(model, stream)
    outcome = "REJECTED" if not verdict.accepted else "accepted (known blind spot)"
    where = f" at event {verdict.event_index} ({verdict.reason})" if not verdict.accepted else ""
    print(f"  {kind:24} -> {outcome}{where}")

print("\nfull evaluation over the bundled scenario:")
report = evaluate(model, corpus)
print(report.summary())
print("\nreport as TSV:")
print(report.to_tsv())
