"""Recovering from poisoned training data.

Two countermeasures: unlearning exactly reverses an identified poisoning
document (counters are decremented along its run), and sanitization
uniformly decrements all transition counters so structure seen only once
falls away.  Sanitizing a thin model is refused rather than destroying it.
"""

from xvpa import (Learner, NamingScheme, build_xvpa, compile_cxvpa,
                  default_system, dump_state, parse_document, validate)
from xvpa.harness import cardealer_grammar, generate

dts = default_system()
scheme = NamingScheme("ancestor", k=1, l=2)

poison = parse_document(
    b"<dealer><newcars/><usedcars/>"
    b"<backdoor>run(anything)</backdoor></dealer>")


def model_of(learner):
    return compile_cxvpa(build_xvpa(learner.snapshot(), dts))


# --- scenario 1: the poisoning is identified later and unlearned
learner = Learner(dts, scheme)
docs = generate(cardealer_grammar(), 30, seed=11)
for doc in docs[:10]:
    learner.learn(doc)
checkpoint = dump_state(learner)
learner.learn(poison)
print("poison learned:", "accepted" if validate(model_of(learner), poison).accepted else "rejected")

learner.unlearn(poison)
print("after unlearn: ", "accepted" if validate(model_of(learner), poison).accepted else "rejected")
print("state file byte-identical to the checkpoint:", dump_state(learner) == checkpoint)

# --- scenario 2: the poisoning stays hidden but is rare
learner = Learner(dts, scheme)
for doc in docs:
    learner.learn(doc)
learner.learn(poison)  # hidden: one occurrence among 31 documents
print("\nhidden poison accepted before sanitize:",
      validate(model_of(learner), poison).accepted)
applied = learner.sanitize()
print(f"sanitize applied: {applied}")
model = model_of(learner)
print("poison accepted after sanitize:", validate(model, poison).accepted)
print("normal documents still accepted:",
      all(validate(model, d).accepted for d in docs))

# --- sanitizing a single-document model is not applicable
thin = Learner(dts, scheme)
thin.learn(docs[0])
print("\nsanitize on a single-document model applied:", thin.sanitize())
